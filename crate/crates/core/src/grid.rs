//! Periodic phase-space grid, spectral derivatives and quadrature.
//!
//! State arrays have shape `(n_p, n_q)`: rows are momenta, columns are
//! positions, so transforms along `q` run over contiguous rows.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{EpsError, Result};

const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_q: usize,
    pub n_p: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            q_min: -10.0,
            q_max: 10.0,
            p_min: -10.0,
            p_max: 10.0,
            n_q: 256,
            n_p: 256,
        }
    }
}

impl GridSpec {
    pub fn square(min: f64, max: f64, n: usize) -> Self {
        Self {
            q_min: min,
            q_max: max,
            p_min: min,
            p_max: max,
            n_q: n,
            n_p: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [("q", self.q_min, self.q_max), ("p", self.p_min, self.p_max)] {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(EpsError::InvalidGrid(format!("{name} bounds must be finite")));
            }
            if hi <= lo {
                return Err(EpsError::InvalidGrid(format!(
                    "{name}_max ({hi}) must exceed {name}_min ({lo})"
                )));
            }
        }
        for (name, n) in [("n_q", self.n_q), ("n_p", self.n_p)] {
            if n < MIN_POINTS || !n.is_power_of_two() {
                return Err(EpsError::InvalidGrid(format!(
                    "{name} = {n} must be a power of two and at least {MIN_POINTS}"
                )));
            }
        }
        Ok(())
    }

    pub fn q_length(&self) -> f64 {
        self.q_max - self.q_min
    }

    pub fn p_length(&self) -> f64 {
        self.p_max - self.p_min
    }
}

/// Angular wavenumbers in DFT order; the Nyquist mode sits on the negative branch.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let base = 2.0 * PI / length;
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
            base * m as f64
        })
        .collect()
}

pub struct Grid {
    spec: GridSpec,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub k_q: Vec<f64>,
    pub k_p: Vec<f64>,
    pub dq: f64,
    pub dp: f64,
    fwd_q: Arc<dyn Fft<f64>>,
    inv_q: Arc<dyn Fft<f64>>,
    fwd_p: Arc<dyn Fft<f64>>,
    inv_p: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

pub fn make_grid(spec: GridSpec) -> Result<Arc<Grid>> {
    Grid::new(spec).map(Arc::new)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let dq = spec.q_length() / spec.n_q as f64;
        let dp = spec.p_length() / spec.n_p as f64;
        let mut planner = FftPlanner::new();
        Ok(Self {
            q: (0..spec.n_q).map(|j| spec.q_min + j as f64 * dq).collect(),
            p: (0..spec.n_p).map(|j| spec.p_min + j as f64 * dp).collect(),
            k_q: wavenumbers(spec.n_q, spec.q_length()),
            k_p: wavenumbers(spec.n_p, spec.p_length()),
            dq,
            dp,
            fwd_q: planner.plan_fft_forward(spec.n_q),
            inv_q: planner.plan_fft_inverse(spec.n_q),
            fwd_p: planner.plan_fft_forward(spec.n_p),
            inv_p: planner.plan_fft_inverse(spec.n_p),
            spec,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.spec.n_p, self.spec.n_q)
    }

    pub fn cell_area(&self) -> f64 {
        self.dq * self.dp
    }

    pub fn nyquist_q(&self) -> usize {
        self.spec.n_q / 2
    }

    pub fn nyquist_p(&self) -> usize {
        self.spec.n_p / 2
    }

    /// Unnormalized forward DFT along `q`, in place.
    pub fn fft_q(&self, data: &mut Array2<Complex64>) {
        transform_rows(data, &*self.fwd_q, 1.0);
    }

    /// Normalized inverse DFT along `q`, in place.
    pub fn ifft_q(&self, data: &mut Array2<Complex64>) {
        transform_rows(data, &*self.inv_q, 1.0 / self.spec.n_q as f64);
    }

    pub fn fft_p(&self, data: &mut Array2<Complex64>) {
        transform_cols(data, &*self.fwd_p, 1.0);
    }

    pub fn ifft_p(&self, data: &mut Array2<Complex64>) {
        transform_cols(data, &*self.inv_p, 1.0 / self.spec.n_p as f64);
    }
}

fn transform_rows(data: &mut Array2<Complex64>, fft: &dyn Fft<f64>, norm: f64) {
    if !data.is_standard_layout() {
        *data = data.as_standard_layout().into_owned();
    }
    let slice = data.as_slice_mut().expect("standard layout");
    fft.process(slice);
    if norm != 1.0 {
        slice.iter_mut().for_each(|z| *z *= norm);
    }
}

fn transform_cols(data: &mut Array2<Complex64>, fft: &dyn Fft<f64>, norm: f64) {
    let mut transposed = data.t().as_standard_layout().into_owned();
    transform_rows(&mut transposed, fft, norm);
    data.assign(&transposed.t());
}

/// Sampled state function `chi(p, q, t)`.
///
/// `p_offset` translates the momentum axis: row `j` holds momentum
/// `grid.p[j] + p_offset`. Propagators that follow a drifting packet move this
/// offset instead of the data.
#[derive(Debug, Clone)]
pub struct StateFunction {
    pub values: Array2<Complex64>,
    pub time: f64,
    pub p_offset: f64,
    grid: Arc<Grid>,
}

impl StateFunction {
    pub fn new(grid: Arc<Grid>, values: Array2<Complex64>, time: f64) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(EpsError::InvalidGrid(format!(
                "state shape {:?} does not match grid shape {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        let state = Self {
            values,
            time,
            p_offset: 0.0,
            grid,
        };
        state.check_finite()?;
        Ok(state)
    }

    pub fn from_fn(grid: Arc<Grid>, time: f64, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.p[i], grid.q[j]));
        Self::new(grid, values, time)
    }

    pub fn with_p_offset(mut self, offset: f64) -> Self {
        self.p_offset = offset;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p_axis(&self) -> Vec<f64> {
        self.grid.p.iter().map(|p| p + self.p_offset).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(((i, j), _)) = self
            .values
            .indexed_iter()
            .find(|(_, z)| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(EpsError::NonFinite(format!(
                "state entry (p index {i}, q index {j}) at t = {}",
                self.time
            )));
        }
        Ok(())
    }

    /// `int chi dp dq`
    pub fn total(&self) -> Complex64 {
        sum_ordered(&self.values) * self.grid.cell_area()
    }

    /// `int |chi|^2 dp dq`
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

fn sum_ordered(field: &Array2<Complex64>) -> Complex64 {
    field.iter().fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
}

fn derivative_multiplier(k: &[f64], nyquist: usize, order: u32) -> Vec<Complex64> {
    k.iter()
        .enumerate()
        .map(|(j, &kj)| {
            if order % 2 == 1 && j == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, kj).powu(order)
            }
        })
        .collect()
}

/// Mixed spectral derivative `d^order_q/dq d^order_p/dp` of a raw field.
pub fn spectral_derivative(
    field: &Array2<Complex64>,
    grid: &Grid,
    order_q: u32,
    order_p: u32,
) -> Array2<Complex64> {
    let mut out = field.to_owned();
    if order_q > 0 {
        let mult = derivative_multiplier(&grid.k_q, grid.nyquist_q(), order_q);
        grid.fft_q(&mut out);
        for mut row in out.rows_mut() {
            row.iter_mut().zip(&mult).for_each(|(z, m)| *z *= m);
        }
        grid.ifft_q(&mut out);
    }
    if order_p > 0 {
        let mult = derivative_multiplier(&grid.k_p, grid.nyquist_p(), order_p);
        grid.fft_p(&mut out);
        for (mut row, m) in out.rows_mut().into_iter().zip(&mult) {
            row.iter_mut().for_each(|z| *z *= m);
        }
        grid.ifft_p(&mut out);
    }
    out
}

fn check_order(order: i32) -> Result<u32> {
    if order <= 0 {
        Err(EpsError::InvalidOrder(order))
    } else {
        Ok(order as u32)
    }
}

pub fn d_dq(chi: &StateFunction, order: i32) -> Result<Array2<Complex64>> {
    let order = check_order(order)?;
    Ok(spectral_derivative(&chi.values, &chi.grid, order, 0))
}

pub fn d_dp(chi: &StateFunction, order: i32) -> Result<Array2<Complex64>> {
    let order = check_order(order)?;
    Ok(spectral_derivative(&chi.values, &chi.grid, 0, order))
}

/// Rectangle-rule quadrature, summed in row-major order.
pub fn integrate_phase_space(field: &Array2<Complex64>, grid: &Grid) -> Result<Complex64> {
    if field.dim() != grid.shape() {
        return Err(EpsError::InvalidGrid(format!(
            "field shape {:?} does not match grid shape {:?}",
            field.dim(),
            grid.shape()
        )));
    }
    if field.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(EpsError::NonFinite("integrand".into()));
    }
    Ok(sum_ordered(field) * grid.cell_area())
}

/// Translate a field along `p`: returns `V'(p) = V(p - delta)`.
///
/// Applied as the diagonal phase `exp(-i k_p delta)`; a complex `delta`
/// realizes the analytic continuation of the translation.
pub fn shift_p(field: &Array2<Complex64>, grid: &Grid, delta: Complex64) -> Array2<Complex64> {
    let mut out = field.to_owned();
    grid.fft_p(&mut out);
    let nyq = grid.nyquist_p();
    for (j, mut row) in out.rows_mut().into_iter().enumerate() {
        let phase = if j == nyq {
            // the Nyquist mode is not translation-covariant; keep it real
            (Complex64::new(0.0, -grid.k_p[j]) * delta).exp().re.into()
        } else {
            (Complex64::new(0.0, -grid.k_p[j]) * delta).exp()
        };
        row.iter_mut().for_each(|z| *z *= phase);
    }
    grid.ifft_p(&mut out);
    out
}

/// Translate a field along `q`: returns `V'(q) = V(q - delta)`.
pub fn shift_q(field: &Array2<Complex64>, grid: &Grid, delta: Complex64) -> Array2<Complex64> {
    let mut out = field.to_owned();
    grid.fft_q(&mut out);
    let nyq = grid.nyquist_q();
    let phases: Vec<Complex64> = grid
        .k_q
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let z = (Complex64::new(0.0, -k) * delta).exp();
            if j == nyq {
                z.re.into()
            } else {
                z
            }
        })
        .collect();
    for mut row in out.rows_mut() {
        Zip::from(&mut row).and(&phases[..]).for_each(|z, m| *z *= m);
    }
    grid.ifft_q(&mut out);
    out
}

/// Real positive Gaussian packet, the initial-condition convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPacket {
    pub q0: f64,
    pub p0: f64,
    pub s_q: f64,
    pub s_p: f64,
}

impl Default for GaussianPacket {
    fn default() -> Self {
        Self {
            q0: 0.0,
            p0: 0.0,
            s_q: 1.0,
            s_p: 1.0,
        }
    }
}

impl GaussianPacket {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_q > 0.0 && self.s_p > 0.0) {
            return Err(crate::error::invalid("packet", "widths s_q, s_p must be positive"));
        }
        if !(self.q0.is_finite() && self.p0.is_finite()) {
            return Err(crate::error::invalid("packet", "centre must be finite"));
        }
        Ok(())
    }

    /// `chi_0(p, q)`, normalized so that `int chi_0 dp dq = 1` on the real line.
    pub fn value(&self, p: f64, q: f64) -> f64 {
        let norm = 1.0 / (2.0 * PI * self.s_q * self.s_p);
        let xq = (q - self.q0) / self.s_q;
        let xp = (p - self.p0) / self.s_p;
        norm * (-0.5 * (xq * xq + xp * xp)).exp()
    }

    pub fn sample(&self, grid: Arc<Grid>) -> Result<StateFunction> {
        self.validate()?;
        StateFunction::from_fn(grid, 0.0, |p, q| self.value(p, q).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn periodic_axis_and_wavenumbers() {
        let spec = GridSpec {
            q_min: 0.0,
            q_max: 2.0 * PI,
            p_min: 0.0,
            p_max: 1.0,
            n_q: 8,
            n_p: 8,
        };
        let grid = make_grid(spec).unwrap();
        for (j, q) in grid.q.iter().enumerate() {
            assert!((q - j as f64 * PI / 4.0).abs() < 1e-15);
        }
        let expect = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (k, e) in grid.k_q.iter().zip(expect) {
            assert!((k - e).abs() < 1e-14);
        }
    }

    #[test]
    fn spacing_is_length_over_points() {
        let grid = make_grid(GridSpec::default()).unwrap();
        assert_eq!(grid.dq, 0.078125);
        assert_eq!(grid.dp, 0.078125);
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = GridSpec { n_q: 4, ..Default::default() };
        assert!(matches!(make_grid(spec), Err(EpsError::InvalidGrid(_))));
        let spec = GridSpec { n_q: 100, ..Default::default() };
        assert!(make_grid(spec).is_err());
        let spec = GridSpec { p_max: -10.0, ..Default::default() };
        assert!(make_grid(spec).is_err());
        let spec = GridSpec { q_min: 11.0, ..Default::default() };
        assert!(make_grid(spec).is_err());
    }

    #[test]
    fn derivative_of_fourier_mode_is_exact() {
        let grid = make_grid(GridSpec::square(0.0, 2.0 * PI, 32)).unwrap();
        let chi = StateFunction::from_fn(grid.clone(), 0.0, |_, q| c(0.0, 3.0 * q).exp()).unwrap();
        let d = d_dq(&chi, 1).unwrap();
        for ((i, j), z) in d.indexed_iter() {
            let want = c(0.0, 3.0) * chi.values[(i, j)];
            assert!((z - want).norm() < 1e-12);
        }
        let chi = StateFunction::from_fn(grid, 0.0, |p, _| c(0.0, -5.0 * p).exp()).unwrap();
        let d = d_dp(&chi, 1).unwrap();
        for ((i, j), z) in d.indexed_iter() {
            let want = c(0.0, -5.0) * chi.values[(i, j)];
            assert!((z - want).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let grid = make_grid(GridSpec::square(-3.0, 3.0, 16)).unwrap();
        let chi = StateFunction::from_fn(grid, 0.0, |_, _| c(2.5, -1.0)).unwrap();
        for order in 1..4 {
            assert!(d_dq(&chi, order).unwrap().iter().all(|z| z.norm() < 1e-13));
            assert!(d_dp(&chi, order).unwrap().iter().all(|z| z.norm() < 1e-13));
        }
        assert_eq!(d_dq(&chi, 0).unwrap_err(), EpsError::InvalidOrder(0));
        assert_eq!(d_dp(&chi, -1).unwrap_err(), EpsError::InvalidOrder(-1));
    }

    #[test]
    fn quadrature_examples() {
        let spec = GridSpec {
            q_min: 0.0,
            q_max: 1.0,
            p_min: 0.0,
            p_max: 1.0,
            n_q: 16,
            n_p: 16,
        };
        let grid = make_grid(spec).unwrap();
        let ones = Array2::from_elem(grid.shape(), c(1.0, 0.0));
        assert!((integrate_phase_space(&ones, &grid).unwrap() - 1.0).norm() < 1e-15);

        let grid = make_grid(GridSpec::square(0.0, 2.0 * PI, 64)).unwrap();
        let sine = Array2::from_shape_fn(grid.shape(), |(_, j)| c(grid.q[j].sin(), 0.0));
        assert!(integrate_phase_space(&sine, &grid).unwrap().norm() < 1e-14);

        let mut bad = ones.clone();
        bad[(0, 0)] = c(f64::NAN, 0.0);
        let grid16 = make_grid(GridSpec::square(0.0, 1.0, 16)).unwrap();
        assert!(integrate_phase_space(&bad, &grid16).is_err());
    }

    #[test]
    fn normalized_gaussian_integrates_to_one() {
        let grid = make_grid(GridSpec::default()).unwrap();
        let chi = GaussianPacket::default().sample(grid).unwrap();
        assert!((chi.total() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn shift_p_translates_band_limited_fields() {
        let grid = make_grid(GridSpec::square(-10.0, 10.0, 64)).unwrap();
        let packet = GaussianPacket::default();
        let chi = packet.sample(grid.clone()).unwrap();
        let shifted = shift_p(&chi.values, &grid, c(0.37, 0.0));
        let moved = GaussianPacket { p0: 0.37, ..packet };
        for ((i, j), z) in shifted.indexed_iter() {
            assert!((z - moved.value(grid.p[i], grid.q[j])).norm() < 1e-13);
        }
    }
}
