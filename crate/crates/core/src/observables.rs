//! Averages `<O> = int O chi* dp dq` and conductivity extraction.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{steady_state_conductivity, CharacteristicMap};
use crate::error::{EpsError, Result};
use crate::grid::StateFunction;
use crate::hamiltonians::{ChargedParticleMedium, DriveSpec, GaugeTag};

pub const NORM_DRIFT_WARN: f64 = 1e-8;
/// Window start in units of the damping time `1/alpha`.
pub const TRANSIENT_DAMPING_TIMES: f64 = 5.0;

/// `int O(p, q) chi*(p, q, t) dp dq`.
pub fn average(observable: impl Fn(f64, f64) -> Complex64, chi: &StateFunction) -> Complex64 {
    let grid = chi.grid();
    let p_axis = chi.p_axis();
    let mut total = Complex64::new(0.0, 0.0);
    let mut norm = Complex64::new(0.0, 0.0);
    for (i, row) in chi.values.outer_iter().enumerate() {
        let p = p_axis[i];
        for (j, z) in row.iter().enumerate() {
            total += observable(p, grid.q[j]) * z.conj();
            norm += z.conj();
        }
    }
    let area = grid.cell_area();
    let norm = norm * area;
    if (norm - 1.0).norm() > NORM_DRIFT_WARN {
        warn!("normalization drift: <1> = {norm}");
    }
    total * area
}

/// `<qdot>` given `<p>`: `(exp(-alpha t)/m)(<p> + e I(t))` in the A-gauge,
/// `exp(-alpha t) <p> / m` in the phi-gauge, where `p` is already kinetic.
pub fn qdot_from_mean_p(mean_p: Complex64, t: f64, medium: &ChargedParticleMedium, map: &CharacteristicMap) -> Complex64 {
    let decay = (-medium.alpha * t).exp() / medium.m;
    match map.gauge {
        GaugeTag::PhiGauge => decay * mean_p,
        _ => decay * (mean_p + medium.e_charge * map.i.eval(t)),
    }
}

pub fn mean_qdot(chi: &StateFunction, medium: &ChargedParticleMedium, map: &CharacteristicMap) -> Complex64 {
    let mean_p = average(|p, _| Complex64::new(p, 0.0), chi);
    qdot_from_mean_p(mean_p, chi.time, medium, map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub mean_p: Complex64,
    pub mean_qdot: Complex64,
    /// `<1>`
    pub norm: Complex64,
    /// `N e <qdot> / E(t)`, NaN where the field vanishes.
    pub sigma_instant: Complex64,
    /// `<q>` when position tracking is enabled.
    pub mean_q: Option<Complex64>,
}

pub fn instantaneous_sigma(mean_qdot: Complex64, field: Complex64, medium: &ChargedParticleMedium) -> Complex64 {
    if field.norm() == 0.0 {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    medium.n_particles as f64 * medium.e_charge * mean_qdot / field
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityResult {
    pub sigma: Complex64,
    pub sigma_theory: Complex64,
    pub transient_window: (f64, f64),
    pub relative_error: f64,
}

impl ConductivityResult {
    pub fn new(sigma: Complex64, sigma_theory: Complex64, window: (f64, f64)) -> Self {
        Self {
            sigma,
            sigma_theory,
            transient_window: window,
            relative_error: (sigma - sigma_theory).norm() / sigma_theory.norm(),
        }
    }
}

/// Default averaging window `[5/alpha, 10/alpha]`.
pub fn default_window(medium: &ChargedParticleMedium) -> (f64, f64) {
    let tau = 1.0 / medium.alpha;
    (TRANSIENT_DAMPING_TIMES * tau, 2.0 * TRANSIENT_DAMPING_TIMES * tau)
}

fn window_records(records: &[ObservableRecord], window: (f64, f64)) -> Result<Vec<&ObservableRecord>> {
    let (t0, t1) = window;
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(EpsError::Conductivity(format!("empty window [{t0}, {t1}]")));
    }
    let slack = 1e-9 * (1.0 + t1.abs());
    let inside: Vec<_> = records
        .iter()
        .filter(|r| r.t >= t0 - slack && r.t <= t1 + slack)
        .collect();
    if inside.len() < 2 {
        return Err(EpsError::Conductivity(format!(
            "window [{t0}, {t1}] holds {} records, need at least 2",
            inside.len()
        )));
    }
    Ok(inside)
}

fn warn_if_early(medium: &ChargedParticleMedium, window: (f64, f64)) {
    if medium.alpha * window.0 < TRANSIENT_DAMPING_TIMES {
        warn!(
            "averaging window starts at t = {} before {TRANSIENT_DAMPING_TIMES}/alpha; transient weight ~ {:.2e}",
            window.0,
            (-medium.alpha * window.0).exp()
        );
    }
}

fn trapezoid(points: &[(f64, Complex64)]) -> Complex64 {
    points
        .windows(2)
        .map(|w| (w[0].1 + w[1].1) * 0.5 * (w[1].0 - w[0].0))
        .sum()
}

/// Time-average of `N e <qdot> / E(t)` over `window` for the phasor drive.
pub fn conductivity(
    records: &[ObservableRecord],
    medium: &ChargedParticleMedium,
    drive: &DriveSpec,
    window: (f64, f64),
) -> Result<ConductivityResult> {
    let theory = steady_state_conductivity(medium, drive)?;
    warn_if_early(medium, window);
    let inside = window_records(records, window)?;
    let mut ratios = Vec::with_capacity(inside.len());
    for r in inside {
        let sigma = instantaneous_sigma(r.mean_qdot, drive.eval(r.t), medium);
        if !(sigma.re.is_finite() && sigma.im.is_finite()) {
            return Err(EpsError::Conductivity(format!("non-finite ratio at t = {}", r.t)));
        }
        ratios.push((r.t, sigma));
    }
    let span = ratios.last().unwrap().0 - ratios[0].0;
    Ok(ConductivityResult::new(trapezoid(&ratios) / span, theory, window))
}

/// Lock-in extraction from the response to the real drive `Re[E0 exp(i omega t)]`:
/// demodulate `N e Re<qdot>` against `exp(-i omega t)` over whole periods.
pub fn lock_in_conductivity(
    records: &[ObservableRecord],
    medium: &ChargedParticleMedium,
    drive: &DriveSpec,
    window: (f64, f64),
) -> Result<ConductivityResult> {
    if drive.omega <= 0.0 {
        return Err(EpsError::Conductivity("lock-in needs omega > 0".into()));
    }
    if drive.e0.norm() == 0.0 {
        return Err(EpsError::Conductivity("lock-in needs a non-zero amplitude".into()));
    }
    let theory = steady_state_conductivity(medium, drive)?;
    warn_if_early(medium, window);
    let period = 2.0 * std::f64::consts::PI / drive.omega;
    let periods = ((window.1 - window.0) / period).floor();
    if periods < 1.0 {
        return Err(EpsError::Conductivity("window shorter than one drive period".into()));
    }
    let window = (window.0, window.0 + periods * period);
    let inside = window_records(records, window)?;
    let scale = medium.n_particles as f64 * medium.e_charge;
    let points: Vec<_> = inside
        .iter()
        .map(|r| (r.t, scale * r.mean_qdot.re * Complex64::new(0.0, -drive.omega * r.t).exp()))
        .collect();
    let span = points.last().unwrap().0 - points[0].0;
    let demod = trapezoid(&points) * 2.0 / span;
    Ok(ConductivityResult::new(demod / drive.e0, theory, window))
}
