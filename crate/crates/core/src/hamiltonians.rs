//! Classical Hamiltonians and their extended-phase-space operators.
//!
//! A classical Hamiltonian is kept as a polynomial in `p` and `q` with
//! time-dependent coefficients. Its extension
//! `H(p - i hbar d/dq, q) - H(p, q - i hbar d/dp)` then terminates after
//! finitely many Taylor terms and is stored as a list of
//! `coeff(p, q, t) * d^a/dq^a d^b/dp^b` terms with coefficients to the left.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EpsError, Result};
use crate::expsum::ExpPoly;
use crate::grid::{spectral_derivative, Grid, StateFunction};

pub type TimeFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
pub type CoeffFn = Arc<dyn Fn(f64, f64, f64) -> Complex64 + Send + Sync>;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn cplx(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, c: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(invalid("hbar", "must be positive"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c", "must be positive"));
        }
        Ok(())
    }
}

/// Damped, non-interacting charged particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargedParticleMedium {
    pub m: f64,
    pub e_charge: f64,
    /// Damping constant (1/time).
    pub alpha: f64,
    pub n_particles: u64,
}

impl Default for ChargedParticleMedium {
    fn default() -> Self {
        Self {
            m: 1.0,
            e_charge: 1.0,
            alpha: 1.0,
            n_particles: 1,
        }
    }
}

impl ChargedParticleMedium {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(invalid("m", "mass must be positive"));
        }
        if self.e_charge == 0.0 || !self.e_charge.is_finite() {
            return Err(invalid("e_charge", "charge must be finite and non-zero"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", "damping must be non-negative"));
        }
        if self.n_particles == 0 {
            return Err(invalid("n_particles", "need at least one particle"));
        }
        Ok(())
    }
}

/// Monochromatic drive `E(t) = e0 * exp(i omega t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub e0: Complex64,
    pub omega: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self {
            e0: cplx(1.0),
            omega: 1.0,
        }
    }
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.e0.re.is_finite() && self.e0.im.is_finite()) {
            return Err(invalid("e0", "amplitude must be finite"));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(invalid("omega", "frequency must be non-negative"));
        }
        Ok(())
    }

    pub fn phasor(&self) -> Drive {
        Drive::from_poly(ExpPoly::exp(self.e0, Complex64::new(0.0, self.omega)))
    }

    /// `Re[e0 exp(i omega t)]`
    pub fn in_phase(&self) -> Drive {
        let z = self.e0 * 0.5;
        Drive::from_poly(
            ExpPoly::exp(z, Complex64::new(0.0, self.omega))
                .add(&ExpPoly::exp(z.conj(), Complex64::new(0.0, -self.omega))),
        )
    }

    /// `Im[e0 exp(i omega t)]`
    pub fn quadrature(&self) -> Drive {
        let z = self.e0 / Complex64::new(0.0, 2.0);
        Drive::from_poly(
            ExpPoly::exp(z, Complex64::new(0.0, self.omega))
                .add(&ExpPoly::exp(z.conj(), Complex64::new(0.0, -self.omega))),
        )
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.e0 * Complex64::new(0.0, self.omega * t).exp()
    }
}

/// Electric field as a finite sum of complex exponentials in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Drive {
    field: ExpPoly,
}

impl Drive {
    pub fn from_poly(field: ExpPoly) -> Self {
        Self { field }
    }

    pub fn zero() -> Self {
        Self {
            field: ExpPoly::zero(),
        }
    }

    pub fn constant(e0: Complex64) -> Self {
        Self {
            field: ExpPoly::constant(e0),
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.field.eval(t)
    }

    pub fn field(&self) -> &ExpPoly {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.field.terms().is_empty()
    }

    pub fn is_real(&self) -> bool {
        [0.0, 0.37, 1.3, 4.1]
            .iter()
            .all(|&t| self.eval(t).im.abs() <= 1e-14 * (1.0 + self.eval(t).re.abs()))
    }
}

/// `exp(-alpha t)`
pub fn damping(medium: &ChargedParticleMedium) -> ExpPoly {
    ExpPoly::exp(cplx(1.0), cplx(-medium.alpha))
}

/// `exp(alpha t)`
pub fn antidamping(medium: &ChargedParticleMedium) -> ExpPoly {
    ExpPoly::exp(cplx(1.0), cplx(medium.alpha))
}

/// `I(t) = int_0^t exp(alpha s) E(s) ds` in closed form.
pub fn drive_integral(medium: &ChargedParticleMedium, drive: &Drive) -> ExpPoly {
    antidamping(medium).mul(drive.field()).antiderivative()
}

/// A-gauge vector potential `A(t) = -c I(t)`.
pub fn vector_potential(
    t: f64,
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> Result<Complex64> {
    if t < 0.0 {
        return Err(invalid("t", "time must be non-negative"));
    }
    Ok(-constants.c * drive_integral(medium, drive).eval(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeTag {
    AGauge,
    PhiGauge,
    Custom,
}

impl fmt::Display for GaugeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GaugeTag::AGauge => "a_gauge",
            GaugeTag::PhiGauge => "phi_gauge",
            GaugeTag::Custom => "custom",
        })
    }
}

/// Polynomial in `q` with time-dependent coefficients; `coeffs[j]` multiplies `q^j`.
#[derive(Clone, Default)]
pub struct QPoly {
    pub coeffs: Vec<TimeFn>,
}

impl fmt::Debug for QPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QPoly(degree {})", self.coeffs.len() as i64 - 1)
    }
}

impl QPoly {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn new(coeffs: Vec<TimeFn>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, q: f64, t: f64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(cplx(0.0), |acc, c| acc * q + c(t))
    }

    /// `n`-th derivative in `q`.
    pub fn derivative(&self, n: usize, q: f64, t: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(n)
            .map(|(j, c)| c(t) * falling(j as u32, n as u32) * q.powi((j - n) as i32))
            .sum()
    }
}

fn falling(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}

fn factorial(n: u32) -> f64 {
    falling(n, n)
}

/// Vector and scalar potential of a uniform electric field.
#[derive(Clone, Debug)]
pub struct GaugePotentials {
    pub vector: QPoly,
    pub scalar: QPoly,
    pub tag: GaugeTag,
}

impl GaugePotentials {
    /// `A = -c int_0^t exp(alpha s) E(s) ds`, `phi = 0`.
    pub fn a_gauge(
        medium: &ChargedParticleMedium,
        drive: &Drive,
        constants: &PhysicalConstants,
    ) -> Self {
        let integral = drive_integral(medium, drive);
        let c = constants.c;
        Self {
            vector: QPoly::new(vec![Arc::new(move |t| -c * integral.eval(t))]),
            scalar: QPoly::zero(),
            tag: GaugeTag::AGauge,
        }
    }

    /// `A = 0`, `phi = -q E(t)`.
    pub fn phi_gauge(drive: &Drive) -> Self {
        let drive = drive.clone();
        Self {
            vector: QPoly::zero(),
            scalar: QPoly::new(vec![
                Arc::new(|_| cplx(0.0)),
                Arc::new(move |t| -drive.eval(t)),
            ]),
            tag: GaugeTag::PhiGauge,
        }
    }

    pub fn custom(vector: QPoly, scalar: QPoly) -> Self {
        Self {
            vector,
            scalar,
            tag: GaugeTag::Custom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.tag {
            GaugeTag::AGauge if self.scalar.degree().is_some() || self.vector.degree() > Some(0) => {
                Err(invalid("potentials", "a_gauge needs phi = 0 and A independent of q"))
            }
            GaugeTag::PhiGauge if self.vector.degree().is_some() || self.scalar.degree() > Some(1) => {
                Err(invalid("potentials", "phi_gauge needs A = 0 and phi linear in q"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone)]
pub struct Monomial {
    pub p_pow: u32,
    pub q_pow: u32,
    pub coef: TimeFn,
}

/// `H(p, q, t) = sum coef(t) p^a q^b`.
#[derive(Clone, Default)]
pub struct PolyHamiltonian {
    pub monomials: Vec<Monomial>,
}

impl fmt::Debug for PolyHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let powers: Vec<_> = self.monomials.iter().map(|m| (m.p_pow, m.q_pow)).collect();
        f.debug_struct("PolyHamiltonian").field("powers", &powers).finish()
    }
}

impl PolyHamiltonian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, p_pow: u32, q_pow: u32, coef: TimeFn) -> Self {
        self.monomials.push(Monomial { p_pow, q_pow, coef });
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.monomials.extend(other.monomials.iter().cloned());
        out
    }

    pub fn p_degree(&self) -> u32 {
        self.monomials.iter().map(|m| m.p_pow).max().unwrap_or(0)
    }

    pub fn q_degree(&self) -> u32 {
        self.monomials.iter().map(|m| m.q_pow).max().unwrap_or(0)
    }

    pub fn eval(&self, p: f64, q: f64, t: f64) -> Complex64 {
        self.partial(0, 0, p, q, t)
    }

    /// `d^np/dp^np d^nq/dq^nq H` at `(p, q, t)`.
    pub fn partial(&self, np: u32, nq: u32, p: f64, q: f64, t: f64) -> Complex64 {
        self.monomials
            .iter()
            .filter(|m| m.p_pow >= np && m.q_pow >= nq)
            .map(|m| {
                (m.coef)(t)
                    * falling(m.p_pow, np)
                    * falling(m.q_pow, nq)
                    * p.powi((m.p_pow - np) as i32)
                    * q.powi((m.q_pow - nq) as i32)
            })
            .sum()
    }
}

/// Kanai Hamiltonian `exp(-alpha t)/2m (p - e A/c)^2 + exp(alpha t) e phi`.
pub fn build_kanai(
    medium: &ChargedParticleMedium,
    potentials: &GaugePotentials,
    constants: &PhysicalConstants,
) -> Result<PolyHamiltonian> {
    medium.validate()?;
    constants.validate()?;
    potentials.validate()?;
    let alpha = medium.alpha;
    let m = medium.m;
    let e = medium.e_charge;
    let kappa = e / constants.c;
    let mut h = PolyHamiltonian::new().with(2, 0, Arc::new(move |t| cplx((-alpha * t).exp() / (2.0 * m))));
    for (j, a_j) in potentials.vector.coeffs.iter().enumerate() {
        let a_j = a_j.clone();
        h = h.with(
            1,
            j as u32,
            Arc::new(move |t| -kappa * a_j(t) * (-alpha * t).exp() / m),
        );
        for (l, a_l) in potentials.vector.coeffs.iter().enumerate() {
            let (a_j, a_l) = (potentials.vector.coeffs[j].clone(), a_l.clone());
            h = h.with(
                0,
                (j + l) as u32,
                Arc::new(move |t| kappa * kappa * a_j(t) * a_l(t) * (-alpha * t).exp() / (2.0 * m)),
            );
        }
    }
    for (j, phi_j) in potentials.scalar.coeffs.iter().enumerate() {
        let phi_j = phi_j.clone();
        h = h.with(0, j as u32, Arc::new(move |t| e * (alpha * t).exp() * phi_j(t)));
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Exact,
    Order(u32),
}

#[derive(Clone)]
pub struct OpTerm {
    pub q_order: u32,
    pub p_order: u32,
    pub coeff: CoeffFn,
}

impl fmt::Debug for OpTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OpTerm(d_q^{} d_p^{})", self.q_order, self.p_order)
    }
}

/// `sum coeff(p, q, t) d^a/dq^a d^b/dp^b`, acting on state functions.
#[derive(Clone, Debug)]
pub struct ExtendedHamiltonianOp {
    pub terms: Vec<OpTerm>,
    pub truncation: Truncation,
}

impl ExtendedHamiltonianOp {
    pub fn new(terms: Vec<OpTerm>) -> Self {
        Self {
            terms,
            truncation: Truncation::Exact,
        }
    }

    /// Distinct `(a, b)` derivative orders present, sorted.
    pub fn orders(&self) -> Vec<(u32, u32)> {
        let mut orders: Vec<_> = self.terms.iter().map(|t| (t.q_order, t.p_order)).collect();
        orders.sort_unstable();
        orders.dedup();
        orders
    }

    /// Total coefficient of `d^a_q d^b_p` at a phase-space point.
    pub fn coefficient(&self, q_order: u32, p_order: u32, p: f64, q: f64, t: f64) -> Complex64 {
        self.terms
            .iter()
            .filter(|term| term.q_order == q_order && term.p_order == p_order)
            .map(|term| (term.coeff)(p, q, t))
            .sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(terms)
    }

    /// Apply to raw values whose momentum axis is `p_axis`, at time `t`.
    pub fn apply_values(
        &self,
        values: &Array2<Complex64>,
        grid: &Grid,
        p_axis: &[f64],
        t: f64,
    ) -> Array2<Complex64> {
        let mut out = Array2::zeros(grid.shape());
        for (a, b) in self.orders() {
            let deriv = if a == 0 && b == 0 {
                values.to_owned()
            } else {
                spectral_derivative(values, grid, a, b)
            };
            for ((i, j), z) in out.indexed_iter_mut() {
                let c = self.coefficient(a, b, p_axis[i], grid.q[j], t);
                *z += c * deriv[(i, j)];
            }
        }
        out
    }

    pub fn apply(&self, chi: &StateFunction) -> Array2<Complex64> {
        self.apply_values(&chi.values, chi.grid(), &chi.p_axis(), chi.time)
    }

    /// Upper bound on the spectral radius of `-(i/hbar) H` on the grid.
    pub fn generator_bound(&self, grid: &Grid, p_axis: &[f64], t: f64, hbar: f64) -> f64 {
        let kq = grid.k_q.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        let kp = grid.k_p.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        self.orders()
            .into_iter()
            .map(|(a, b)| {
                let mut max_c = 0.0f64;
                for &p in p_axis {
                    for &q in &grid.q {
                        max_c = max_c.max(self.coefficient(a, b, p, q, t).norm());
                    }
                }
                max_c * kq.powi(a as i32) * kp.powi(b as i32) / hbar
            })
            .sum()
    }
}

/// Extend a classical Hamiltonian by the terminating Taylor series
/// `sum (-i hbar)^n / n! (d^nH/dp^n d^n/dq^n - d^nH/dq^n d^n/dp^n)`.
pub fn extend_hamiltonian(
    h: &PolyHamiltonian,
    constants: &PhysicalConstants,
) -> Result<ExtendedHamiltonianOp> {
    constants.validate()?;
    if h.p_degree() > 2 {
        return Err(EpsError::Unrepresentable(format!(
            "momentum degree {} exceeds 2",
            h.p_degree()
        )));
    }
    let hbar = constants.hbar;
    let mut terms = Vec::new();
    for n in 1..=h.p_degree() {
        let h = h.clone();
        let scale = (-I * hbar).powu(n) / factorial(n);
        terms.push(OpTerm {
            q_order: n,
            p_order: 0,
            coeff: Arc::new(move |p, q, t| scale * h.partial(n, 0, p, q, t)),
        });
    }
    for n in 1..=h.q_degree() {
        let h = h.clone();
        let scale = -(-I * hbar).powu(n) / factorial(n);
        terms.push(OpTerm {
            q_order: 0,
            p_order: n,
            coeff: Arc::new(move |p, q, t| scale * h.partial(0, n, p, q, t)),
        });
    }
    Ok(ExtendedHamiltonianOp::new(terms))
}

/// Extend the Kanai Hamiltonian with symbolic potentials, expanding the
/// operator products `(p + pi_q - e A(q)/c)^2` and `(p - e A(q + pi_p)/c)^2`
/// literally, then substitute the given potentials.
///
/// Supports `A` at most linear and `phi` at most quadratic in `q`.
pub fn extend_kanai(
    medium: &ChargedParticleMedium,
    potentials: &GaugePotentials,
    constants: &PhysicalConstants,
) -> Result<ExtendedHamiltonianOp> {
    medium.validate()?;
    constants.validate()?;
    potentials.validate()?;
    if potentials.vector.degree() > Some(1) || potentials.scalar.degree() > Some(2) {
        return Err(EpsError::Unrepresentable(
            "literal expansion needs A linear and phi quadratic in q".into(),
        ));
    }
    let (alpha, m, e, hbar) = (medium.alpha, medium.m, medium.e_charge, constants.hbar);
    let kappa = e / constants.c;
    let coeff_of = |poly: &QPoly, j: usize| -> TimeFn {
        poly.coeffs
            .get(j)
            .cloned()
            .unwrap_or_else(|| Arc::new(|_| cplx(0.0)))
    };
    let vector = potentials.vector.clone();
    let (a1, phi1, phi2) = (
        coeff_of(&potentials.vector, 1),
        coeff_of(&potentials.scalar, 1),
        coeff_of(&potentials.scalar, 2),
    );
    let pi = -I * hbar;

    // kinetic momentum P = p - kappa A(q, t)
    let kinetic = {
        let vector = vector.clone();
        move |p: f64, q: f64, t: f64| p - kappa * vector.eval(q, t)
    };
    let mut terms = Vec::new();
    // (e^{-at}/2m) [(P + pi_q)^2 - P^2] = (e^{-at}/2m)[2 P pi_q + pi_q^2 + i hbar kappa a1]
    {
        let kinetic = kinetic.clone();
        terms.push(OpTerm {
            q_order: 1,
            p_order: 0,
            coeff: Arc::new(move |p, q, t| pi * kinetic(p, q, t) * (-alpha * t).exp() / m),
        });
    }
    terms.push(OpTerm {
        q_order: 2,
        p_order: 0,
        coeff: Arc::new(move |_, _, t| pi * pi * (-alpha * t).exp() / (2.0 * m)),
    });
    {
        let a1 = a1.clone();
        terms.push(OpTerm {
            q_order: 0,
            p_order: 0,
            coeff: Arc::new(move |_, _, t| I * hbar * kappa * a1(t) * (-alpha * t).exp() / (2.0 * m)),
        });
    }
    // -(e^{-at}/2m) [(P - kappa a1 pi_p)^2 - P^2]
    //   = -(e^{-at}/2m) [-2 kappa a1 P pi_p + i hbar kappa a1 + kappa^2 a1^2 pi_p^2]
    {
        let (a1, kinetic) = (a1.clone(), kinetic.clone());
        terms.push(OpTerm {
            q_order: 0,
            p_order: 1,
            coeff: Arc::new(move |p, q, t| {
                pi * kappa * a1(t) * kinetic(p, q, t) * (-alpha * t).exp() / m
            }),
        });
    }
    {
        let a1 = a1.clone();
        terms.push(OpTerm {
            q_order: 0,
            p_order: 0,
            coeff: Arc::new(move |_, _, t| -I * hbar * kappa * a1(t) * (-alpha * t).exp() / (2.0 * m)),
        });
    }
    {
        let a1 = a1.clone();
        terms.push(OpTerm {
            q_order: 0,
            p_order: 2,
            coeff: Arc::new(move |_, _, t| {
                -pi * pi * kappa * kappa * a1(t) * a1(t) * (-alpha * t).exp() / (2.0 * m)
            }),
        });
    }
    // -e^{at} e [phi(q + pi_p) - phi(q)] = -e^{at} e [phi1 pi_p + phi2 (2 q pi_p + pi_p^2)]
    {
        let (phi1, phi2) = (phi1.clone(), phi2.clone());
        terms.push(OpTerm {
            q_order: 0,
            p_order: 1,
            coeff: Arc::new(move |_, q, t| -pi * e * (alpha * t).exp() * (phi1(t) + 2.0 * q * phi2(t))),
        });
    }
    terms.push(OpTerm {
        q_order: 0,
        p_order: 2,
        coeff: Arc::new(move |_, _, t| -pi * pi * e * (alpha * t).exp() * phi2(t)),
    });
    Ok(ExtendedHamiltonianOp::new(terms))
}

/// Closed-form A-gauge operator
/// `exp(-alpha t)/2m [pi_q^2 + 2 pi_q (p + e I(t))]`.
pub fn kanai_a_gauge_operator(
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> ExtendedHamiltonianOp {
    let (alpha, m, e, hbar) = (medium.alpha, medium.m, medium.e_charge, constants.hbar);
    let integral = drive_integral(medium, drive);
    ExtendedHamiltonianOp::new(vec![
        OpTerm {
            q_order: 2,
            p_order: 0,
            coeff: Arc::new(move |_, _, t| cplx(-hbar * hbar * (-alpha * t).exp() / (2.0 * m))),
        },
        OpTerm {
            q_order: 1,
            p_order: 0,
            coeff: Arc::new(move |p, _, t| {
                -I * hbar * (-alpha * t).exp() * (p + e * integral.eval(t)) / m
            }),
        },
    ])
}

/// Closed-form phi-gauge operator
/// `exp(-alpha t)/2m (pi_q^2 + 2 p pi_q) + exp(alpha t) e E(t) pi_p`.
pub fn kanai_phi_gauge_operator(
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> ExtendedHamiltonianOp {
    let (alpha, m, e, hbar) = (medium.alpha, medium.m, medium.e_charge, constants.hbar);
    let drive = drive.clone();
    ExtendedHamiltonianOp::new(vec![
        OpTerm {
            q_order: 2,
            p_order: 0,
            coeff: Arc::new(move |_, _, t| cplx(-hbar * hbar * (-alpha * t).exp() / (2.0 * m))),
        },
        OpTerm {
            q_order: 1,
            p_order: 0,
            coeff: Arc::new(move |p, _, t| -I * hbar * (-alpha * t).exp() * p / m),
        },
        OpTerm {
            q_order: 0,
            p_order: 1,
            coeff: Arc::new(move |_, _, t| -I * hbar * (alpha * t).exp() * e * drive.eval(t)),
        },
    ])
}

/// Extended operator of the Kanai system in one of the two uniform-field gauges.
pub fn kanai_operator(
    gauge: GaugeTag,
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> Result<ExtendedHamiltonianOp> {
    let potentials = match gauge {
        GaugeTag::AGauge => GaugePotentials::a_gauge(medium, drive, constants),
        GaugeTag::PhiGauge => GaugePotentials::phi_gauge(drive),
        GaugeTag::Custom => {
            return Err(invalid("gauge", "custom potentials need build_kanai directly"));
        }
    };
    extend_hamiltonian(&build_kanai(medium, &potentials, constants)?, constants)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn medium(alpha: f64) -> ChargedParticleMedium {
        ChargedParticleMedium {
            alpha,
            ..Default::default()
        }
    }

    #[test]
    fn free_particle_extension_has_two_q_terms() {
        let consts = PhysicalConstants { hbar: 0.7, c: 1.0 };
        let m = 2.0;
        let h = PolyHamiltonian::new().with(2, 0, Arc::new(move |_| cplx(1.0 / (2.0 * m))));
        let op = extend_hamiltonian(&h, &consts).unwrap();
        assert_eq!(op.orders(), vec![(1, 0), (2, 0)]);
        let (p, q, t) = (0.3, -1.2, 0.5);
        let c1 = op.coefficient(1, 0, p, q, t);
        assert!((c1 - c(0.0, -0.7 * p / m)).norm() < 1e-15);
        let c2 = op.coefficient(2, 0, p, q, t);
        assert!((c2 - c(-0.49 / m / 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn kanai_free_limit() {
        let med = medium(0.0);
        let pots = GaugePotentials::custom(QPoly::zero(), QPoly::zero());
        let h = build_kanai(&med, &pots, &PhysicalConstants::default()).unwrap();
        for &(p, q, t) in &[(0.5, 1.0, 0.0), (-2.0, 3.0, 4.0)] {
            assert!((h.eval(p, q, t) - c(p * p / 2.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn kanai_gauge_substitutions() {
        let med = ChargedParticleMedium {
            m: 1.5,
            e_charge: -0.8,
            alpha: 0.6,
            n_particles: 1,
        };
        let consts = PhysicalConstants { hbar: 1.0, c: 2.0 };
        let drive = DriveSpec {
            e0: c(1.2, 0.3),
            omega: 0.9,
        }
        .phasor();
        let integral = drive_integral(&med, &drive);

        let ha = build_kanai(&med, &GaugePotentials::a_gauge(&med, &drive, &consts), &consts).unwrap();
        let hphi = build_kanai(&med, &GaugePotentials::phi_gauge(&drive), &consts).unwrap();
        for &(p, q, t) in &[(0.3, 1.0, 0.2), (-1.1, -2.0, 1.7)] {
            let kin = p + med.e_charge * integral.eval(t);
            let want = (-med.alpha * t).exp() / (2.0 * med.m) * kin * kin;
            assert!((ha.eval(p, q, t) - want).norm() < 1e-13);
            let want = (-med.alpha * t).exp() * p * p / (2.0 * med.m)
                - (med.alpha * t).exp() * med.e_charge * q * drive.eval(t);
            assert!((hphi.eval(p, q, t) - want).norm() < 1e-13);
        }
    }

    #[test]
    fn vector_potential_examples() {
        let med = medium(1.0);
        let consts = PhysicalConstants::default();
        let drive = DriveSpec::default().phasor();
        assert_eq!(vector_potential(0.0, &med, &drive, &consts).unwrap().norm(), 0.0);
        let a = vector_potential(1.0, &med, &drive, &consts).unwrap();
        assert!((a + c(1.3780, 0.9093)).norm() < 1e-4);
        let dc = DriveSpec { e0: cplx(1.0), omega: 0.0 }.phasor();
        for &t in &[1.0, 5.0, 20.0] {
            let a = vector_potential(t, &med, &dc, &consts).unwrap();
            assert!((a + (t.exp() - 1.0)).norm() < 1e-12 * t.exp());
        }
        // alpha + i omega = 0 limit
        let undamped = vector_potential(2.5, &medium(0.0), &dc, &consts).unwrap();
        assert!((undamped + 2.5).norm() < 1e-14);
        assert!(vector_potential(-1.0, &med, &drive, &consts).is_err());
    }

    #[test]
    fn quadrature_drives_recombine_to_phasor() {
        let spec = DriveSpec {
            e0: c(0.4, -1.3),
            omega: 2.0,
        };
        let (re, im, full) = (spec.in_phase(), spec.quadrature(), spec.phasor());
        assert!(re.is_real() && im.is_real() && !full.is_real());
        for &t in &[0.0, 0.3, 2.2, 7.9] {
            let z = re.eval(t) + I * im.eval(t);
            assert!((z - full.eval(t)).norm() < 1e-14);
            assert!((full.eval(t) - spec.eval(t)).norm() < 1e-14);
        }
    }

    #[test]
    fn potentials_validate_their_tag() {
        let drive = Drive::constant(cplx(1.0));
        let mut pots = GaugePotentials::phi_gauge(&drive);
        assert!(pots.validate().is_ok());
        pots.tag = GaugeTag::AGauge;
        assert!(pots.validate().is_err());
    }

    #[test]
    fn rejects_cubic_momentum() {
        let h = PolyHamiltonian::new().with(3, 0, Arc::new(|_| cplx(1.0)));
        assert!(matches!(
            extend_hamiltonian(&h, &PhysicalConstants::default()),
            Err(EpsError::Unrepresentable(_))
        ));
    }
}
