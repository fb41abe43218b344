//! Closed-form solutions of the Kanai system: characteristic maps,
//! plane waves, classical trajectories and the steady-state conductivity.

use num_complex::Complex64;

use crate::error::{invalid, EpsError, Result};
use crate::expsum::ExpPoly;
use crate::grid::{shift_p, shift_q, StateFunction};
use crate::hamiltonians::{
    antidamping, damping, drive_integral, ChargedParticleMedium, Drive, DriveSpec, GaugeTag,
    PhysicalConstants,
};

/// Below this damping the plane-wave phase uses its undamped limit.
pub const UNDAMPED_ALPHA: f64 = 1e-12;

/// Time integrals behind the characteristic coordinates, all with lower limit 0.
///
/// `u = int exp(-a s)`, `i = int exp(a s) E`, `w_a = (e/m) int exp(-a s) i`,
/// `w_phi = (e/m) int exp(a s) E u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicMap {
    pub gauge: GaugeTag,
    pub m: f64,
    pub e_charge: f64,
    pub u: ExpPoly,
    pub i: ExpPoly,
    pub w_a: ExpPoly,
    pub w_phi: ExpPoly,
    /// Integrand of `w_a`.
    pub w_a_rate: ExpPoly,
    /// Integrand of `i`.
    pub i_rate: ExpPoly,
}

impl CharacteristicMap {
    pub fn new(gauge: GaugeTag, medium: &ChargedParticleMedium, drive: &Drive) -> Result<Self> {
        medium.validate()?;
        if gauge == GaugeTag::Custom {
            return Err(invalid("gauge", "characteristic maps exist for a_gauge and phi_gauge only"));
        }
        let ratio = Complex64::new(medium.e_charge / medium.m, 0.0);
        let u = damping(medium).antiderivative();
        let i_rate = antidamping(medium).mul(drive.field());
        let i = drive_integral(medium, drive);
        let w_a_rate = damping(medium).mul(&i).scale(ratio);
        let w_a = w_a_rate.antiderivative();
        let w_phi = i_rate.mul(&u).scale(ratio).antiderivative();
        Ok(Self {
            gauge,
            m: medium.m,
            e_charge: medium.e_charge,
            u,
            i,
            w_a,
            w_phi,
            w_a_rate,
            i_rate,
        })
    }

    pub fn with_gauge(&self, gauge: GaugeTag) -> Self {
        Self {
            gauge,
            ..self.clone()
        }
    }

    /// Position characteristic `xi` (A-gauge) or `xi'` (phi-gauge).
    pub fn xi(&self, q: f64, p: f64, t: f64) -> Complex64 {
        let drift = q - p * self.u.eval(t).re / self.m;
        match self.gauge {
            GaugeTag::PhiGauge => drift + self.w_phi.eval(t),
            _ => drift - self.w_a.eval(t),
        }
    }

    /// Momentum characteristic `eta = p` (A-gauge) or `eta' = p - e I` (phi-gauge).
    pub fn eta(&self, p: f64, t: f64) -> Complex64 {
        match self.gauge {
            GaugeTag::PhiGauge => p - self.e_charge * self.i.eval(t),
            _ => Complex64::new(p, 0.0),
        }
    }
}

/// `(xi, eta)` at `(q, p, t)`; the time characteristic is `tau = t`.
pub fn xi_eta(q: f64, p: f64, t: f64, map: &CharacteristicMap) -> Result<(Complex64, Complex64)> {
    if t < 0.0 {
        return Err(invalid("t", "time must be non-negative"));
    }
    Ok((map.xi(q, p, t), map.eta(p, t)))
}

/// Amplitudes and wavenumber of a two-sided plane wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveSolution {
    pub k: f64,
    pub c_plus: Complex64,
    pub c_minus: Complex64,
}

impl PlaneWaveSolution {
    /// `cos(k xi)`-type standing wave.
    pub fn standing(k: f64) -> Self {
        let half = Complex64::new(0.5, 0.0);
        Self {
            k,
            c_plus: half,
            c_minus: half,
        }
    }
}

/// `C+ exp(i k xi + phase) + C- exp(-i k xi + phase)` with the global phase
/// `i hbar k^2 exp(-alpha t) / (2 m alpha)`, or `-i hbar k^2 t / 2m` when undamped.
pub fn plane_wave_solution(
    sol: &PlaneWaveSolution,
    q: f64,
    p: f64,
    t: f64,
    map: &CharacteristicMap,
    medium: &ChargedParticleMedium,
    constants: &PhysicalConstants,
) -> Result<Complex64> {
    if medium.alpha < 0.0 {
        return Err(invalid("alpha", "damping must be non-negative"));
    }
    let xi = map.xi(q, p, t);
    let i = Complex64::new(0.0, 1.0);
    let k2 = constants.hbar * sol.k * sol.k / (2.0 * medium.m);
    let phase = if medium.alpha < UNDAMPED_ALPHA {
        -i * k2 * t
    } else {
        i * k2 * (-medium.alpha * t).exp() / medium.alpha
    };
    Ok(sol.c_plus * (i * sol.k * xi + phase).exp() + sol.c_minus * (-i * sol.k * xi + phase).exp())
}

/// Centroid `(q(t), p(t))` from the characteristics with `pi_q -> 0`.
pub fn classical_trajectory(
    q0: f64,
    p0: f64,
    t: f64,
    gauge: GaugeTag,
    map: &CharacteristicMap,
) -> Result<(Complex64, Complex64)> {
    if t < 0.0 {
        return Err(invalid("t", "time must be non-negative"));
    }
    let u = map.u.eval(t).re;
    Ok(match gauge {
        GaugeTag::AGauge => (q0 + p0 * u / map.m + map.w_a.eval(t), Complex64::new(p0, 0.0)),
        GaugeTag::PhiGauge => {
            // constancy of xi' and eta'
            let p = p0 + map.e_charge * map.i.eval(t);
            (q0 + p * u / map.m - map.w_phi.eval(t), p)
        }
        GaugeTag::Custom => {
            return Err(invalid("gauge", "no closed-form trajectory for custom potentials"));
        }
    })
}

/// `N e^2 / (m (alpha + i omega))`.
pub fn steady_state_conductivity(medium: &ChargedParticleMedium, drive: &DriveSpec) -> Result<Complex64> {
    medium.validate()?;
    let denom = Complex64::new(medium.alpha, drive.omega);
    if denom.norm() == 0.0 {
        return Err(EpsError::Conductivity(
            "alpha = omega = 0: the undamped DC response diverges".into(),
        ));
    }
    let e = medium.e_charge;
    Ok(medium.n_particles as f64 * e * e / (medium.m * denom))
}

/// Bias of the windowed average of `N e <qdot> / E` for a zero-momentum
/// packet under the phasor drive: `-sigma * mean_{[t0, t1]} exp(-(alpha + i omega) t)`.
pub fn transient_bias(medium: &ChargedParticleMedium, drive: &DriveSpec, window: (f64, f64)) -> Result<Complex64> {
    let sigma = steady_state_conductivity(medium, drive)?;
    let s = Complex64::new(medium.alpha, drive.omega);
    let (t0, t1) = window;
    let mean = ExpPoly::exp(Complex64::new(1.0, 0.0), -s).integral(t0, t1) / (t1 - t0);
    Ok(-sigma * mean)
}

/// `chi_phi` resampled at the phi-gauge points that share characteristics
/// with each A-gauge grid point: `xi'(p~, q~) = xi(p, q)`, `eta'(p~) = eta(p)`.
///
/// The composite map is a uniform translation, so resampling is an exact
/// spectral shift in each direction.
pub fn resample_composite(
    chi_phi: &StateFunction,
    a_map: &CharacteristicMap,
    phi_map: &CharacteristicMap,
) -> Result<StateFunction> {
    let t = chi_phi.time;
    let m = a_map.m;
    let u = a_map.u.eval(t).re;
    // eta'(p~) = p  =>  p~ = p + e I(t)
    let p_shift = a_map.e_charge * phi_map.i.eval(t);
    // xi'(p~, q~) = xi(p, q)  =>  q~ = q - p u/m - w_a + p~ u/m - w_phi
    let q_shift = -a_map.w_a.eval(t) + p_shift * u / m - phi_map.w_phi.eval(t);
    if p_shift.im.abs() > 1e-12 * (1.0 + p_shift.norm()) || q_shift.im.abs() > 1e-12 * (1.0 + q_shift.norm()) {
        return Err(invalid("drive", "composite resampling needs a real drive"));
    }
    // target row i sits at p_i (A frame); source rows sit at p_j + offset
    let dp = p_shift.re - chi_phi.p_offset;
    let grid = chi_phi.grid().clone();
    let shifted = shift_p(&chi_phi.values, &grid, Complex64::new(-dp, 0.0));
    let shifted = shift_q(&shifted, &grid, Complex64::new(-q_shift.re, 0.0));
    StateFunction::new(grid, shifted, t)
}

/// Adaptive double-exponential quadrature of the characteristic integrals,
/// used as an independent check on the closed forms.
pub mod quadrature_oracle {
    use super::*;
    use quadrature::double_exponential::integrate;

    const TOL: f64 = 1e-12;

    fn complex_integral(f: impl Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
        if b == a {
            return Complex64::new(0.0, 0.0);
        }
        let re = integrate(|s| f(s).re, a, b, TOL).integral;
        let im = integrate(|s| f(s).im, a, b, TOL).integral;
        Complex64::new(re, im)
    }

    pub fn u(alpha: f64, t: f64) -> f64 {
        complex_integral(|s| Complex64::new((-alpha * s).exp(), 0.0), 0.0, t).re
    }

    pub fn drive_integral(alpha: f64, drive: &Drive, t: f64) -> Complex64 {
        complex_integral(|s| (alpha * s).exp() * drive.eval(s), 0.0, t)
    }

    pub fn w_a(medium: &ChargedParticleMedium, drive: &Drive, t: f64) -> Complex64 {
        let a = medium.alpha;
        medium.e_charge / medium.m
            * complex_integral(|s| (-a * s).exp() * drive_integral(a, drive, s), 0.0, t)
    }

    pub fn w_phi(medium: &ChargedParticleMedium, drive: &Drive, t: f64) -> Complex64 {
        let a = medium.alpha;
        medium.e_charge / medium.m
            * complex_integral(|s| (a * s).exp() * drive.eval(s) * u(a, s), 0.0, t)
    }
}
