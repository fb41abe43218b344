//! Time propagation of state functions.
//!
//! The A-gauge generator is diagonal in `(p, k_q)` and commutes with itself
//! at all times, so its step is an exact phase. The phi-gauge generator adds
//! a uniform `p`-advection; it is split half/full/half with each factor exact.
//! Both engines keep the state Fourier-transformed along `q` between steps,
//! and the phi-gauge engine realizes real `p`-translations by moving the
//! momentum frame instead of the data.

use std::sync::Arc;
use std::thread;

use log::debug;
use ndarray::{Array2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::CharacteristicMap;
use crate::error::{invalid, EpsError, Result};
use crate::expsum::ExpPoly;
use crate::grid::{shift_p, Grid, StateFunction};
use crate::hamiltonians::{
    damping, kanai_operator, ChargedParticleMedium, Drive, DriveSpec, ExtendedHamiltonianOp,
    GaugeTag, PhysicalConstants,
};
use crate::observables::{average, instantaneous_sigma, qdot_from_mean_p, ObservableRecord};

/// Largest `|lambda| dt` accepted by the Runge-Kutta step.
pub const RK4_STABILITY_LIMIT: f64 = 2.8;
/// Steps between exact resets of the phase recurrence.
const RECURRENCE_RESET: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `exact_diagonal` in the A-gauge, `strang` in the phi-gauge.
    Auto,
    ExactDiagonal,
    Strang,
    GenericSeries,
}

impl Scheme {
    pub fn resolve(self, gauge: GaugeTag) -> Result<Scheme> {
        let resolved = match (self, gauge) {
            (Scheme::Auto, GaugeTag::AGauge) => Scheme::ExactDiagonal,
            (Scheme::Auto, GaugeTag::PhiGauge) => Scheme::Strang,
            (Scheme::ExactDiagonal, GaugeTag::AGauge)
            | (Scheme::Strang, GaugeTag::PhiGauge)
            | (Scheme::GenericSeries, GaugeTag::AGauge | GaugeTag::PhiGauge) => self,
            _ => {
                return Err(EpsError::SchemeMismatch {
                    scheme: format!("{self:?}"),
                    gauge: gauge.to_string(),
                })
            }
        };
        Ok(resolved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub record_every: usize,
    /// Also record `<q>` (costs one inverse transform per record).
    pub track_position: bool,
    /// Keep the full state at every record.
    pub keep_states: bool,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 10.0,
            scheme: Scheme::Auto,
            record_every: 1,
            track_position: false,
            keep_states: false,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("propagator.dt", "must be positive"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid("propagator.t_final", "must be non-negative"));
        }
        if self.record_every == 0 {
            return Err(invalid("propagator.record_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Step sizes reaching `t_final` exactly; the last step may be shorter.
    pub fn step_sizes(&self) -> Vec<f64> {
        let ratio = self.t_final / self.dt;
        let n = (ratio - 1e-9).ceil().max(0.0) as usize;
        (0..n)
            .map(|k| {
                let t0 = k as f64 * self.dt;
                (self.t_final - t0).min(self.dt)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub gauge: GaugeTag,
    pub records: Vec<ObservableRecord>,
    pub states: Vec<StateFunction>,
    pub final_state: StateFunction,
    pub steps: usize,
}

/// Closed-form per-step integrals of the Kanai system.
#[derive(Debug, Clone)]
struct StepIntegrals {
    damping: ExpPoly,
    map: CharacteristicMap,
    e_charge: f64,
    m: f64,
    hbar: f64,
}

impl StepIntegrals {
    fn new(
        gauge: GaugeTag,
        medium: &ChargedParticleMedium,
        drive: &Drive,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        constants.validate()?;
        Ok(Self {
            damping: damping(medium),
            map: CharacteristicMap::new(gauge, medium, drive)?,
            e_charge: medium.e_charge,
            m: medium.m,
            hbar: constants.hbar,
        })
    }

    /// `int exp(-alpha s) ds` over `[t0, t1]`.
    fn u(&self, t0: f64, t1: f64) -> f64 {
        self.damping.integral(t0, t1).re
    }

    /// `(e/m) int exp(-alpha s) I(s) ds` over `[t0, t1]`.
    fn w_a(&self, t0: f64, t1: f64) -> Complex64 {
        self.map.w_a_rate.integral(t0, t1)
    }

    /// `e int exp(alpha s) E(s) ds` over `[t0, t1]`.
    fn p_shift(&self, t0: f64, t1: f64) -> Complex64 {
        self.e_charge * self.map.i_rate.integral(t0, t1)
    }

    /// Multiply `q`-transformed data by
    /// `exp(-i [hbar k^2 u / 2m + k (p u / m + w)])` with `p` from `p_axis`.
    fn apply_q_phase(&self, data: &mut Array2<Complex64>, grid: &Grid, p_axis: &[f64], u: f64, w: Complex64) {
        let i = Complex64::new(0.0, 1.0);
        let column: Vec<Complex64> = grid
            .k_q
            .iter()
            .map(|&k| (-i * (self.hbar * k * k * u / (2.0 * self.m) + k * w)).exp())
            .collect();
        let n = grid.k_q.len();
        let half = n / 2;
        let dk = grid.k_q[1];
        let mut factor = vec![Complex64::new(0.0, 0.0); n];
        for (mut row, &p) in data.axis_iter_mut(Axis(0)).zip(p_axis) {
            let theta = -dk * p * u / self.m;
            let base = Complex64::from_polar(1.0, theta);
            let mut z = Complex64::new(1.0, 0.0);
            for (j, f) in factor.iter_mut().enumerate().take(half) {
                if j % RECURRENCE_RESET == 0 {
                    z = Complex64::from_polar(1.0, theta * j as f64);
                }
                *f = z;
                z *= base;
            }
            let back = base.conj();
            for (step, j) in (half..n).rev().enumerate() {
                if step % RECURRENCE_RESET == 0 {
                    z = Complex64::from_polar(1.0, -theta * (step + 1) as f64);
                }
                factor[j] = z;
                z *= back;
            }
            for ((x, f), c) in row.iter_mut().zip(&factor).zip(&column) {
                *x *= f * c;
            }
        }
    }
}

fn p_axis(grid: &Grid, offset: f64) -> Vec<f64> {
    grid.p.iter().map(|p| p + offset).collect()
}

/// Exact A-gauge step from `chi.time` to `chi.time + dt`.
pub fn step_a_gauge(
    chi: &StateFunction,
    dt: f64,
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> Result<StateFunction> {
    let ints = StepIntegrals::new(GaugeTag::AGauge, medium, drive, constants)?;
    let (t0, t1) = (chi.time, chi.time + dt);
    let grid = chi.grid();
    let mut data = chi.values.clone();
    grid.fft_q(&mut data);
    ints.apply_q_phase(&mut data, grid, &chi.p_axis(), ints.u(t0, t1), ints.w_a(t0, t1));
    grid.ifft_q(&mut data);
    Ok(StateFunction::new(grid.clone(), data, t1)?.with_p_offset(chi.p_offset))
}

/// Split phi-gauge step on a fixed momentum frame: `p`-advection over the
/// first half-interval, the `q`-sector over the whole interval, `p`-advection
/// over the second half-interval. Advection is the spectral phase
/// `exp(-i k_p e int exp(alpha s) E ds)`.
pub fn step_phi_gauge(
    chi: &StateFunction,
    dt: f64,
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> Result<StateFunction> {
    let ints = StepIntegrals::new(GaugeTag::PhiGauge, medium, drive, constants)?;
    let (t0, t1) = (chi.time, chi.time + dt);
    let tm = t0 + 0.5 * dt;
    let grid = chi.grid();
    let mut data = shift_p(&chi.values, grid, ints.p_shift(t0, tm));
    grid.fft_q(&mut data);
    ints.apply_q_phase(&mut data, grid, &chi.p_axis(), ints.u(t0, t1), Complex64::new(0.0, 0.0));
    grid.ifft_q(&mut data);
    let data = shift_p(&data, grid, ints.p_shift(tm, t1));
    Ok(StateFunction::new(grid.clone(), data, t1)?.with_p_offset(chi.p_offset))
}

/// Difference between one split step of `dt` and two of `dt/2` (sup norm).
pub fn strang_doubling_estimate(
    chi: &StateFunction,
    dt: f64,
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let one = step_phi_gauge(chi, dt, medium, drive, constants)?;
    let half = step_phi_gauge(chi, 0.5 * dt, medium, drive, constants)?;
    let two = step_phi_gauge(&half, 0.5 * dt, medium, drive, constants)?;
    Ok((&one.values - &two.values).iter().fold(0.0, |m, z| m.max(z.norm())))
}

/// Classical fourth-order Runge-Kutta step of `d chi/dt = -(i/hbar) H chi`.
pub fn generic_series_step(
    chi: &StateFunction,
    dt: f64,
    op: &ExtendedHamiltonianOp,
    constants: &PhysicalConstants,
) -> Result<StateFunction> {
    let grid = chi.grid();
    let p_axis = chi.p_axis();
    let t = chi.time;
    let bound = [t, t + dt]
        .iter()
        .map(|&s| op.generator_bound(grid, &p_axis, s, constants.hbar))
        .fold(0.0, f64::max);
    if bound * dt > RK4_STABILITY_LIMIT {
        return Err(EpsError::Unstable {
            dt,
            product: bound * dt,
            limit: RK4_STABILITY_LIMIT,
        });
    }
    let scale = Complex64::new(0.0, -1.0 / constants.hbar);
    let rhs = |values: &Array2<Complex64>, s: f64| op.apply_values(values, grid, &p_axis, s) * scale;
    let y = &chi.values;
    let k1 = rhs(y, t);
    let k2 = rhs(&(y + &(&k1 * (0.5 * dt))), t + 0.5 * dt);
    let k3 = rhs(&(y + &(&k2 * (0.5 * dt))), t + 0.5 * dt);
    let k4 = rhs(&(y + &(&k3 * dt)), t + dt);
    let next = y + &((k1 + &k2 * 2.0 + &k3 * 2.0 + k4) * (dt / 6.0));
    Ok(StateFunction::new(grid.clone(), next, t + dt)?.with_p_offset(chi.p_offset))
}

/// Diagnostic for a state that is no longer finite.
fn divergence(step: usize, time: f64, data: &Array2<Complex64>) -> EpsError {
    let bad = data.iter().filter(|z| !(z.re.is_finite() && z.im.is_finite())).count();
    let finite_max = data
        .iter()
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .fold(0.0f64, |m, z| m.max(z.norm()));
    let band_norms: Vec<String> = data
        .axis_iter(Axis(1))
        .step_by((data.ncols() / 8).max(1))
        .map(|col| format!("{:.2e}", col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
        .collect();
    EpsError::Diverged {
        step,
        time,
        diagnostic: format!(
            "{bad} non-finite entries, largest finite |mode| {finite_max:.3e}, column norms [{}]",
            band_norms.join(", ")
        ),
    }
}

/// Spectral engine state: data transformed along `q`, rows at `p + p_offset`.
struct Engine {
    gauge: GaugeTag,
    grid: Arc<Grid>,
    ints: StepIntegrals,
    medium: ChargedParticleMedium,
    drive: Drive,
    data: Array2<Complex64>,
    p_offset: f64,
    t: f64,
}

impl Engine {
    fn new(
        chi0: &StateFunction,
        gauge: GaugeTag,
        medium: &ChargedParticleMedium,
        drive: &Drive,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        let mut data = chi0.values.clone();
        chi0.grid().fft_q(&mut data);
        Ok(Self {
            gauge,
            grid: chi0.grid().clone(),
            ints: StepIntegrals::new(gauge, medium, drive, constants)?,
            medium: *medium,
            drive: drive.clone(),
            data,
            p_offset: chi0.p_offset,
            t: chi0.time,
        })
    }

    fn advect(&mut self, t0: f64, t1: f64) {
        let delta = self.ints.p_shift(t0, t1);
        self.p_offset += delta.re;
        if delta.im != 0.0 {
            self.data = shift_p(&self.data, &self.grid, Complex64::new(0.0, delta.im));
        }
    }

    fn step_to(&mut self, t1: f64) {
        let (t0, h) = (self.t, t1 - self.t);
        let u = self.ints.u(t0, t1);
        match self.gauge {
            GaugeTag::PhiGauge => {
                let tm = t0 + 0.5 * h;
                self.advect(t0, tm);
                let axis = p_axis(&self.grid, self.p_offset);
                self.ints.apply_q_phase(&mut self.data, &self.grid, &axis, u, Complex64::new(0.0, 0.0));
                self.advect(tm, t1);
            }
            _ => {
                let axis = p_axis(&self.grid, self.p_offset);
                let w = self.ints.w_a(t0, t1);
                self.ints.apply_q_phase(&mut self.data, &self.grid, &axis, u, w);
            }
        }
        self.t = t1;
    }

    /// `int chi* dp dq` and `int p chi* dp dq` from the `k_q = 0` column.
    fn moments(&self) -> (Complex64, Complex64) {
        let area = self.grid.cell_area();
        let (mut norm, mut mean_p) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (i, z) in self.data.column(0).iter().enumerate() {
            let z = z.conj();
            norm += z;
            mean_p += (self.grid.p[i] + self.p_offset) * z;
        }
        (norm * area, mean_p * area)
    }

    fn state(&self) -> Result<StateFunction> {
        let mut values = self.data.clone();
        self.grid.ifft_q(&mut values);
        Ok(StateFunction::new(self.grid.clone(), values, self.t)?.with_p_offset(self.p_offset))
    }

    fn record(&self, track_position: bool, state: Option<&StateFunction>) -> ObservableRecord {
        let (norm, mean_p) = self.moments();
        let mean_qdot = qdot_from_mean_p(mean_p, self.t, &self.medium, &self.ints.map);
        ObservableRecord {
            t: self.t,
            mean_p,
            mean_qdot,
            norm,
            sigma_instant: instantaneous_sigma(mean_qdot, self.drive.eval(self.t), &self.medium),
            mean_q: if track_position {
                state.map(|s| average(|_, q| Complex64::new(q, 0.0), s))
            } else {
                None
            },
        }
    }

    fn check(&self, step: usize) -> Result<()> {
        if self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(divergence(step, self.t, &self.data))
        }
    }
}

fn record_state(
    chi: &StateFunction,
    medium: &ChargedParticleMedium,
    drive: &Drive,
    map: &CharacteristicMap,
    track_position: bool,
) -> ObservableRecord {
    let norm = average(|_, _| Complex64::new(1.0, 0.0), chi);
    let mean_p = average(|p, _| Complex64::new(p, 0.0), chi);
    let mean_qdot = qdot_from_mean_p(mean_p, chi.time, medium, map);
    ObservableRecord {
        t: chi.time,
        mean_p,
        mean_qdot,
        norm,
        sigma_instant: instantaneous_sigma(mean_qdot, drive.eval(chi.time), medium),
        mean_q: track_position.then(|| average(|_, q| Complex64::new(q, 0.0), chi)),
    }
}

/// Evolve `chi0` under the Kanai system in `gauge`, recording observables
/// every `record_every` steps and at the final time.
pub fn propagate(
    chi0: &StateFunction,
    config: &PropagatorConfig,
    gauge: GaugeTag,
    medium: &ChargedParticleMedium,
    drive: &Drive,
    constants: &PhysicalConstants,
) -> Result<Trajectory> {
    config.validate()?;
    medium.validate()?;
    chi0.check_finite()?;
    let scheme = config.scheme.resolve(gauge)?;
    let steps = config.step_sizes();
    let t_start = chi0.time;
    // end times are taken on the lattice t0 + k dt, not accumulated
    let end_time = |k: usize| {
        if k == steps.len() {
            t_start + config.t_final
        } else {
            t_start + k as f64 * config.dt
        }
    };
    let is_record = |k: usize| k.is_multiple_of(config.record_every) || k == steps.len();
    let mut records = Vec::new();
    let mut states = Vec::new();

    if scheme == Scheme::GenericSeries {
        let op = kanai_operator(gauge, medium, drive, constants)?;
        let map = CharacteristicMap::new(gauge, medium, drive)?;
        let mut chi = chi0.clone();
        for k in 0..=steps.len() {
            if k > 0 {
                chi = generic_series_step(&chi, end_time(k) - chi.time, &op, constants)?;
                chi.time = end_time(k);
                if chi.check_finite().is_err() {
                    return Err(divergence(k, chi.time, &chi.values));
                }
            }
            if is_record(k) {
                records.push(record_state(&chi, medium, drive, &map, config.track_position));
                if config.keep_states {
                    states.push(chi.clone());
                }
            }
        }
        return Ok(Trajectory {
            gauge,
            records,
            states,
            final_state: chi,
            steps: steps.len(),
        });
    }

    let mut engine = Engine::new(chi0, gauge, medium, drive, constants)?;
    for k in 0..=steps.len() {
        if k > 0 {
            engine.step_to(end_time(k));
            let col_ok = engine.data.column(0).iter().all(|z| z.re.is_finite() && z.im.is_finite());
            if !col_ok {
                return Err(divergence(k, engine.t, &engine.data));
            }
        }
        if is_record(k) {
            engine.check(k)?;
            let need_state = config.track_position || config.keep_states;
            let state = if need_state { Some(engine.state()?) } else { None };
            records.push(engine.record(config.track_position, state.as_ref()));
            if config.keep_states {
                states.push(state.unwrap());
            }
        }
    }
    debug!("{gauge} run: {} steps, p frame offset {}", steps.len(), engine.p_offset);
    engine.check(steps.len())?;
    Ok(Trajectory {
        gauge,
        records,
        states,
        final_state: engine.state()?,
        steps: steps.len(),
    })
}

/// Response to the phasor drive assembled from two real-drive runs.
#[derive(Debug, Clone)]
pub struct PhasorResponse {
    pub in_phase: Trajectory,
    pub quadrature: Trajectory,
    /// Records of the phasor response `x_in + i (x_quad - x_free)`.
    pub records: Vec<ObservableRecord>,
}

/// Run the drives `Re E` and `Im E` concurrently and combine them into the
/// linear response to the complex phasor `E = E0 exp(i omega t)`.
///
/// The drive-free part of each run (`exp(-alpha t) <p>_0 / m`) is counted
/// once: `x = x_in + i (x_quad - x_free)`.
pub fn phasor_response(
    chi0: &StateFunction,
    config: &PropagatorConfig,
    gauge: GaugeTag,
    medium: &ChargedParticleMedium,
    spec: &DriveSpec,
    constants: &PhysicalConstants,
) -> Result<PhasorResponse> {
    spec.validate()?;
    let (re_drive, im_drive) = (spec.in_phase(), spec.quadrature());
    let (in_phase, quadrature) = thread::scope(|s| {
        let a = s.spawn(|| propagate(chi0, config, gauge, medium, &re_drive, constants));
        let b = s.spawn(|| propagate(chi0, config, gauge, medium, &im_drive, constants));
        (a.join(), b.join())
    });
    let in_phase = in_phase.map_err(|_| EpsError::Diverged {
        step: 0,
        time: 0.0,
        diagnostic: "in-phase worker panicked".into(),
    })??;
    let quadrature = quadrature.map_err(|_| EpsError::Diverged {
        step: 0,
        time: 0.0,
        diagnostic: "quadrature worker panicked".into(),
    })??;

    let free_map = CharacteristicMap::new(gauge, medium, &Drive::zero())?;
    let p0 = average(|p, _| Complex64::new(p, 0.0), chi0);
    let i = Complex64::new(0.0, 1.0);
    let records = in_phase
        .records
        .iter()
        .zip(&quadrature.records)
        .map(|(c, s)| {
            let free_qdot = qdot_from_mean_p(p0, c.t, medium, &free_map);
            let mean_p = c.mean_p + i * (s.mean_p - p0);
            let mean_qdot = c.mean_qdot + i * (s.mean_qdot - free_qdot);
            ObservableRecord {
                t: c.t,
                mean_p,
                mean_qdot,
                norm: c.norm,
                sigma_instant: instantaneous_sigma(mean_qdot, spec.eval(c.t), medium),
                mean_q: None,
            }
        })
        .collect();
    Ok(PhasorResponse {
        in_phase,
        quadrature,
        records,
    })
}
