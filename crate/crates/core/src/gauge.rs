//! Extended gauge transformations `Gamma = F G^dagger` with
//! `Gamma = exp(-i e (f(q, t) - g(p, t)) / (hbar c))`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{EpsError, Result};
use crate::expsum::ExpPoly;
use crate::grid::StateFunction;
use crate::hamiltonians::{ExtendedHamiltonianOp, OpTerm, PhysicalConstants};

pub type RealFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const VALIDATION_TOL: f64 = 1e-8;
const SAMPLE_X: [f64; 4] = [-2.1, -0.3, 0.8, 1.9];
const SAMPLE_T: [f64; 2] = [0.1, 0.9];

/// A real function `h(x, t)` with its analytic derivatives.
#[derive(Clone)]
pub struct GaugeComponent {
    pub value: RealFn2,
    pub grad: RealFn2,
    pub grad2: RealFn2,
    pub dt: RealFn2,
}

impl fmt::Debug for GaugeComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GaugeComponent")
    }
}

impl GaugeComponent {
    pub fn zero() -> Self {
        let z: RealFn2 = Arc::new(|_, _| 0.0);
        Self {
            value: z.clone(),
            grad: z.clone(),
            grad2: z.clone(),
            dt: z,
        }
    }

    /// `h(x, t) = sum_j Re c_j(t) x^j`.
    pub fn polynomial(coeffs: Vec<ExpPoly>) -> Self {
        let coeffs = Arc::new(coeffs);
        let rates = Arc::new(coeffs.iter().map(ExpPoly::derivative).collect::<Vec<_>>());
        let eval = |c: &[ExpPoly], n: usize, x: f64, t: f64| -> f64 {
            c.iter()
                .enumerate()
                .skip(n)
                .map(|(j, cj)| {
                    let fall = (0..n).fold(1.0, |acc, i| acc * (j - i) as f64);
                    cj.eval(t).re * fall * x.powi((j - n) as i32)
                })
                .sum()
        };
        let (c0, c1, c2) = (coeffs.clone(), coeffs.clone(), coeffs);
        Self {
            value: Arc::new(move |x, t| eval(&c0, 0, x, t)),
            grad: Arc::new(move |x, t| eval(&c1, 1, x, t)),
            grad2: Arc::new(move |x, t| eval(&c2, 2, x, t)),
            dt: Arc::new(move |x, t| eval(&rates, 0, x, t)),
        }
    }

    /// Check the supplied derivatives against fourth-order finite differences.
    pub fn validate(&self, label: &str) -> Result<()> {
        let h = 1e-3;
        for &x in &SAMPLE_X {
            for &t in &SAMPLE_T {
                let v = |x: f64, t: f64| (self.value)(x, t);
                let fd_x = (v(x - 2.0 * h, t) - 8.0 * v(x - h, t) + 8.0 * v(x + h, t)
                    - v(x + 2.0 * h, t))
                    / (12.0 * h);
                let fd_xx = (-v(x - 2.0 * h, t) + 16.0 * v(x - h, t) - 30.0 * v(x, t)
                    + 16.0 * v(x + h, t)
                    - v(x + 2.0 * h, t))
                    / (12.0 * h * h);
                let fd_t = (v(x, t - 2.0 * h) - 8.0 * v(x, t - h) + 8.0 * v(x, t + h)
                    - v(x, t + 2.0 * h))
                    / (12.0 * h);
                let checks = [
                    ("gradient", (self.grad)(x, t), fd_x),
                    ("second derivative", (self.grad2)(x, t), fd_xx),
                    ("time derivative", (self.dt)(x, t), fd_t),
                ];
                for (what, analytic, numeric) in checks {
                    let scale = 1.0 + analytic.abs().max(v(x, t).abs());
                    if !analytic.is_finite() || (analytic - numeric).abs() > VALIDATION_TOL * scale {
                        return Err(EpsError::GaugeValidation(format!(
                            "{label}: {what} at ({x}, {t}) is {analytic}, finite differences give {numeric}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The pair `(f(q, t), g(p, t))`.
#[derive(Clone, Debug)]
pub struct GaugeFunctions {
    pub f: GaugeComponent,
    pub g: GaugeComponent,
}

impl GaugeFunctions {
    pub fn new(f: GaugeComponent, g: GaugeComponent) -> Result<Self> {
        f.validate("f")?;
        g.validate("g")?;
        Ok(Self { f, g })
    }

    pub fn identity() -> Self {
        Self {
            f: GaugeComponent::zero(),
            g: GaugeComponent::zero(),
        }
    }

    /// `gamma(p, q, t) = f(q, t) - g(p, t)`.
    pub fn gamma(&self, p: f64, q: f64, t: f64) -> f64 {
        (self.f.value)(q, t) - (self.g.value)(p, t)
    }
}

/// `chi' = exp(-i e (f - g) / (hbar c)) chi`, pointwise.
pub fn apply_gauge(
    chi: &StateFunction,
    gf: &GaugeFunctions,
    constants: &PhysicalConstants,
    charge: f64,
) -> StateFunction {
    let scale = charge / (constants.hbar * constants.c);
    let p_axis = chi.p_axis();
    let q_axis = &chi.grid().q;
    let mut out = chi.clone();
    for ((i, j), z) in out.values.indexed_iter_mut() {
        let phase = -scale * gf.gamma(p_axis[i], q_axis[j], chi.time);
        *z *= Complex64::from_polar(1.0, phase);
    }
    out
}

/// Expansion of `(d + s)^n` as `[(order, coefficient)]`, `n <= 2`.
fn shifted_power(
    n: u32,
    s: Complex64,
    ds: Complex64,
) -> Result<Vec<(u32, Complex64)>> {
    let one = Complex64::new(1.0, 0.0);
    Ok(match n {
        0 => vec![(0, one)],
        1 => vec![(1, one), (0, s)],
        2 => vec![(2, one), (1, 2.0 * s), (0, ds + s * s)],
        _ => {
            return Err(EpsError::Unrepresentable(format!(
                "gauge conjugation of derivative order {n} is not supported"
            )))
        }
    })
}

/// `Gamma H Gamma^dagger - i hbar Gamma d/dt Gamma^dagger` as a new term list.
///
/// Conjugation maps `d/dq -> d/dq + i k f_q / hbar` and
/// `d/dp -> d/dp - i k g_p / hbar` with `k = e / c`, and adds the scalar
/// `k (f_t - g_t)`.
pub fn transform_hamiltonian(
    op: &ExtendedHamiltonianOp,
    gf: &GaugeFunctions,
    constants: &PhysicalConstants,
    charge: f64,
) -> Result<ExtendedHamiltonianOp> {
    let kappa = charge / constants.c;
    let hbar = constants.hbar;
    let i = Complex64::new(0.0, 1.0);
    let mut terms = Vec::new();
    for term in &op.terms {
        // Validate orders once; the per-point expansion below has the same shape.
        let q_shape = shifted_power(term.q_order, i, i)?;
        let p_shape = shifted_power(term.p_order, i, i)?;
        for (qi, _) in q_shape.iter().enumerate() {
            for (pj, _) in p_shape.iter().enumerate() {
                let (f, g, coeff) = (gf.f.clone(), gf.g.clone(), term.coeff.clone());
                let (a, b) = (term.q_order, term.p_order);
                let q_order = q_shape[qi].0;
                let p_order = p_shape[pj].0;
                terms.push(OpTerm {
                    q_order,
                    p_order,
                    coeff: Arc::new(move |p, q, t| {
                        let sq = i * kappa * (f.grad)(q, t) / hbar;
                        let dsq = i * kappa * (f.grad2)(q, t) / hbar;
                        let sp = -i * kappa * (g.grad)(p, t) / hbar;
                        let dsp = -i * kappa * (g.grad2)(p, t) / hbar;
                        let cq = shifted_power(a, sq, dsq).map(|v| v[qi].1).unwrap_or_default();
                        let cp = shifted_power(b, sp, dsp).map(|v| v[pj].1).unwrap_or_default();
                        coeff(p, q, t) * cq * cp
                    }),
                });
            }
        }
    }
    let (f, g) = (gf.f.clone(), gf.g.clone());
    terms.push(OpTerm {
        q_order: 0,
        p_order: 0,
        coeff: Arc::new(move |p, q, t| Complex64::new(kappa * ((f.dt)(q, t) - (g.dt)(p, t)), 0.0)),
    });
    Ok(ExtendedHamiltonianOp::new(terms))
}

/// A point of extended phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedPoint {
    pub p: f64,
    pub q: f64,
    pub pi_p: f64,
    pub pi_q: f64,
}

impl ExtendedPoint {
    pub fn to_array(self) -> [f64; 4] {
        [self.p, self.q, self.pi_p, self.pi_q]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            p: a[0],
            q: a[1],
            pi_p: a[2],
            pi_q: a[3],
        }
    }
}

/// Coordinate view of a gauge transformation:
/// `pi_p' = pi_p + (e/c) g_p`, `pi_q' = pi_q - (e/c) f_q`, `p' = p`, `q' = q`.
pub fn canonical_shift(
    point: ExtendedPoint,
    t: f64,
    gf: &GaugeFunctions,
    constants: &PhysicalConstants,
    charge: f64,
) -> ExtendedPoint {
    let kappa = charge / constants.c;
    ExtendedPoint {
        pi_p: point.pi_p + kappa * (gf.g.grad)(point.p, t),
        pi_q: point.pi_q - kappa * (gf.f.grad)(point.q, t),
        ..point
    }
}
