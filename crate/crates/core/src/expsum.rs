//! Exponential polynomials `sum c * t^n * exp(s t)` with exact integration.
//!
//! Every time integral the Kanai system needs (the damping factors, the drive
//! integral, and the nested drift integrals of the characteristic maps) lives
//! in this class when the drive is a finite sum of complex exponentials, so
//! the propagators never discretize time inside a diagonal factor.

use num_complex::Complex64;

/// Rates smaller than this in modulus are treated as exactly zero.
pub const RATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: Complex64,
    pub power: u32,
    pub rate: Complex64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpPoly {
    terms: Vec<ExpTerm>,
}

fn snap(rate: Complex64) -> Complex64 {
    if rate.norm() < RATE_EPS {
        Complex64::new(0.0, 0.0)
    } else {
        rate
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `int_0^h tau^k exp(s tau) d tau`, stable for small and large `|s h|`.
pub fn moment_integral(k: u32, rate: Complex64, h: f64) -> Complex64 {
    let s = snap(rate);
    let sh = s * h;
    if sh.norm() < 1.0 {
        // sum_m s^m h^(m+k+1) / (m! (m+k+1))
        let mut total = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(h.powi(k as i32 + 1), 0.0);
        let mut fact = 1.0;
        for m in 0..40u32 {
            if m > 0 {
                pow *= sh;
                fact *= m as f64;
            }
            let term = pow / (fact * (m + k + 1) as f64);
            total += term;
            if term.norm() <= 1e-18 * total.norm() {
                break;
            }
        }
        total
    } else {
        let e = sh.exp();
        let mut j = (e - 1.0) / s;
        for kk in 1..=k {
            j = (e * h.powi(kk as i32) - j * kk as f64) / s;
        }
        j
    }
}

impl ExpPoly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::term(c, 0, Complex64::new(0.0, 0.0))
    }

    /// `c * exp(rate * t)`
    pub fn exp(c: Complex64, rate: Complex64) -> Self {
        Self::term(c, 0, rate)
    }

    pub fn term(coef: Complex64, power: u32, rate: Complex64) -> Self {
        let mut p = Self::zero();
        p.push(ExpTerm {
            coef,
            power,
            rate: snap(rate),
        });
        p
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    fn push(&mut self, term: ExpTerm) {
        if term.coef == Complex64::new(0.0, 0.0) {
            return;
        }
        if let Some(existing) = self
            .terms
            .iter_mut()
            .find(|t| t.power == term.power && t.rate == term.rate)
        {
            existing.coef += term.coef;
        } else {
            self.terms.push(term);
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|term| term.coef * t.powi(term.power as i32) * (term.rate * t).exp())
            .sum()
    }

    /// Time derivative.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zero();
        for term in &self.terms {
            if term.power > 0 {
                out.push(ExpTerm {
                    coef: term.coef * term.power as f64,
                    power: term.power - 1,
                    rate: term.rate,
                });
            }
            out.push(ExpTerm {
                coef: term.coef * term.rate,
                ..*term
            });
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero();
        for term in &self.terms {
            out.push(ExpTerm {
                coef: term.coef * c,
                ..*term
            });
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for term in &other.terms {
            out.push(*term);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for a in &self.terms {
            for b in &other.terms {
                out.push(ExpTerm {
                    coef: a.coef * b.coef,
                    power: a.power + b.power,
                    rate: snap(a.rate + b.rate),
                });
            }
        }
        out
    }

    /// Definite integral over `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> Complex64 {
        let h = t1 - t0;
        self.terms
            .iter()
            .map(|term| {
                let n = term.power;
                let shifted: Complex64 = (0..=n)
                    .map(|k| {
                        binomial(n, k) * t0.powi((n - k) as i32) * moment_integral(k, term.rate, h)
                    })
                    .sum();
                term.coef * (term.rate * t0).exp() * shifted
            })
            .sum()
    }

    /// The function `t -> int_0^t self`.
    pub fn antiderivative(&self) -> Self {
        let mut out = Self::zero();
        for term in &self.terms {
            let n = term.power;
            let s = term.rate;
            if s == Complex64::new(0.0, 0.0) {
                out.push(ExpTerm {
                    coef: term.coef / (n + 1) as f64,
                    power: n + 1,
                    rate: s,
                });
                continue;
            }
            let nf = factorial(n);
            for k in 0..=n {
                let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
                out.push(ExpTerm {
                    coef: term.coef * sign * nf / (factorial(k) * s.powu(n - k + 1)),
                    power: k,
                    rate: s,
                });
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            out.push(ExpTerm {
                coef: -term.coef * sign * nf / s.powu(n + 1),
                power: 0,
                rate: Complex64::new(0.0, 0.0),
            });
        }
        out
    }
}
