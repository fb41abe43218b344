use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use eps_core::analytic::resample_composite;
use eps_core::evolution::phasor_response;
use eps_core::gauge::{ExtendedPoint, GaugeComponent};
use eps_core::observables::default_window;
use eps_core::{
    canonical_shift, conductivity, make_grid, propagate, steady_state_conductivity, CharacteristicMap, Complex64,
    ConductivityResult, GaugeFunctions, GaugeTag, ObservableRecord, PropagatorConfig, Scheme, StateFunction,
};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{emit_csv, emit_report};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

pub const SIGMA_TOLERANCE: f64 = 1e-3;
pub const CROSS_GAUGE_TOLERANCE: f64 = 1e-6;
pub const MODULUS_TOLERANCE: f64 = 1e-7;
pub const NORM_DRIFT_TOLERANCE: f64 = 1e-12;
pub const CANONICITY_TOLERANCE: f64 = 1e-8;
/// Horizon of the modulus-equivalence comparison.
pub const MODULUS_CHECK_TIME: f64 = 1.0;
pub const CANONICITY_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn measured(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance {
            CheckStatus::Passed
        } else {
            CheckStatus::Failed
        };
        Self {
            name: name.into(),
            value: Some(value),
            tolerance,
            status,
            note: None,
        }
    }

    fn skipped(name: impl Into<String>, tolerance: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: None,
            tolerance,
            status: CheckStatus::Skipped,
            note: Some(note.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDiagnostics {
    pub norm: Complex64,
    pub mean_p: Complex64,
    pub mean_q: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub gauge: GaugeTag,
    pub scheme: Scheme,
    pub steps: usize,
    pub records: usize,
    pub final_time: f64,
    pub norm_drift: f64,
    pub conductivity: Option<ConductivityResult>,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossGauge {
    pub delta_sigma_rel: Option<f64>,
    /// `max ||chi_A| - |chi_phi o map||` at `modulus_check_time`.
    pub modulus_residual: Option<f64>,
    pub modulus_check_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub gauge_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub sigma_theory: Option<Complex64>,
    pub initial: InitialDiagnostics,
    pub gauges: Vec<GaugeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_gauge: Option<CrossGauge>,
    pub checks: Vec<Check>,
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Failed)
    }

    pub fn gauge(&self, gauge: GaugeTag) -> Option<&GaugeReport> {
        self.gauges.iter().find(|g| g.gauge == gauge)
    }
}

struct GaugeRun {
    report: GaugeReport,
    records: Vec<ObservableRecord>,
    seconds: f64,
}

fn csv_name(gauge: GaugeTag) -> String {
    format!("{gauge}.csv")
}

fn run_gauge(config: &ExperimentConfig, chi0: &StateFunction, gauge: GaugeTag) -> Result<GaugeRun> {
    let start = Instant::now();
    let (medium, consts) = (&config.medium, &config.constants);
    // the phi-gauge phasor response is assembled from two real-drive runs
    let (records, steps) = match gauge {
        GaugeTag::PhiGauge => {
            let res = phasor_response(chi0, &config.propagator, gauge, medium, &config.drive, consts)?;
            (res.records, res.in_phase.steps)
        }
        _ => {
            let traj = propagate(chi0, &config.propagator, gauge, medium, &config.drive.phasor(), consts)?;
            (traj.records, traj.steps)
        }
    };
    let n0 = records[0].norm;
    let norm_drift = records.iter().map(|r| (r.norm - n0).norm()).fold(0.0, f64::max);
    let window = default_window(medium);
    let final_time = records.last().map_or(0.0, |r| r.t);
    let conductivity = if final_time + 1e-9 >= window.1 {
        Some(conductivity(&records, medium, &config.drive, window)?)
    } else {
        None
    };
    let report = GaugeReport {
        gauge,
        scheme: config.propagator.scheme.resolve(gauge)?,
        steps,
        records: records.len(),
        final_time,
        norm_drift,
        conductivity,
        csv: csv_name(gauge),
    };
    Ok(GaugeRun {
        report,
        records,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Largest modulus mismatch between the A-gauge state and the resampled
/// phi-gauge state under the real drive.
fn modulus_residual(config: &ExperimentConfig, chi0: &StateFunction, horizon: f64) -> Result<f64> {
    let drive = config.drive.in_phase();
    let a_map = CharacteristicMap::new(GaugeTag::AGauge, &config.medium, &drive)?;
    let phi_map = a_map.with_gauge(GaugeTag::PhiGauge);
    let cfg = PropagatorConfig {
        t_final: horizon,
        record_every: usize::MAX,
        track_position: false,
        keep_states: false,
        ..config.propagator.clone()
    };
    let a = propagate(chi0, &cfg, GaugeTag::AGauge, &config.medium, &drive, &config.constants)?;
    let phi = propagate(chi0, &cfg, GaugeTag::PhiGauge, &config.medium, &drive, &config.constants)?;
    let resampled = resample_composite(&phi.final_state, &a_map, &phi_map)?;
    Ok(a.final_state
        .values
        .iter()
        .zip(resampled.values.iter())
        .map(|(x, y)| (x.norm() - y.norm()).abs())
        .fold(0.0, f64::max))
}

fn random_component(rng: &mut ChaCha8Rng) -> GaugeComponent {
    let (a, k, w, ph) = (
        rng.random_range(-1.0..1.0),
        rng.random_range(0.2..2.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(0.0..2.0 * PI),
    );
    let quad: f64 = rng.random_range(-0.5..0.5);
    GaugeComponent {
        value: Arc::new(move |x, t| a * (k * x + w * t + ph).sin() + quad * x * x * t.cos()),
        grad: Arc::new(move |x, t| a * k * (k * x + w * t + ph).cos() + 2.0 * quad * x * t.cos()),
        grad2: Arc::new(move |x, t| -a * k * k * (k * x + w * t + ph).sin() + 2.0 * quad * t.cos()),
        dt: Arc::new(move |x, t| a * w * (k * x + w * t + ph).cos() - quad * x * x * t.sin()),
    }
}

/// `max |J^T Omega J - Omega|` of the gauge-induced map over seeded random
/// gauge functions, with `J` from central differences.
pub fn random_canonicity(config: &ExperimentConfig, samples: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let omega = [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
    ];
    let charge = config.medium.e_charge;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let gf = GaugeFunctions::new(random_component(&mut rng), random_component(&mut rng))?;
        let t = rng.random_range(0.0..config.propagator.t_final.max(1.0));
        let x: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let mut jac = [[0.0; 4]; 4];
        for col in 0..4 {
            let (mut plus, mut minus) = (x, x);
            plus[col] += h;
            minus[col] -= h;
            let fp = canonical_shift(ExtendedPoint::from_array(plus), t, &gf, &config.constants, charge).to_array();
            let fm = canonical_shift(ExtendedPoint::from_array(minus), t, &gf, &config.constants, charge).to_array();
            for row in 0..4 {
                jac[row][col] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        s += jac[k][i] * omega[k][l] * jac[l][j];
                    }
                }
                worst = worst.max((s - omega[i][j]).abs());
            }
        }
    }
    Ok(worst)
}

fn initial_diagnostics(chi0: &StateFunction) -> InitialDiagnostics {
    let one = |_: f64, _: f64| Complex64::new(1.0, 0.0);
    InitialDiagnostics {
        norm: eps_core::average(one, chi0),
        mean_p: eps_core::average(|p, _| Complex64::new(p, 0.0), chi0),
        mean_q: eps_core::average(|_, q| Complex64::new(q, 0.0), chi0),
    }
}

/// Runs every selected gauge concurrently, writes `<gauge>.csv` and
/// `report.json` into `config.output_dir` and returns the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let dir: PathBuf = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let grid = make_grid(config.grid)?;
    let chi0 = config.packet.sample(grid)?;
    let sigma_theory = steady_state_conductivity(&config.medium, &config.drive).ok();

    let runs: Vec<Result<GaugeRun>> = thread::scope(|scope| {
        let handles: Vec<_> = config
            .gauges
            .iter()
            .map(|&gauge| {
                let chi0 = &chi0;
                scope.spawn(move || run_gauge(config, chi0, gauge))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("gauge worker panicked"))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut checks = Vec::new();
    for run in &runs {
        let g = &run.report;
        info!("{}: {} steps in {:.2}s", g.gauge, g.steps, run.seconds);
        emit_csv(&run.records, &dir.join(&g.csv))?;
        checks.push(Check::measured(format!("{}.norm_drift", g.gauge), g.norm_drift, NORM_DRIFT_TOLERANCE));
        let name = format!("{}.sigma_relative_error", g.gauge);
        checks.push(match &g.conductivity {
            Some(c) => Check::measured(name, c.relative_error, SIGMA_TOLERANCE),
            None => Check::skipped(name, SIGMA_TOLERANCE, "t_final ends before the averaging window"),
        });
    }

    let cross_gauge = if runs.len() == 2 {
        let sigmas: Vec<_> = runs.iter().filter_map(|r| r.report.conductivity.map(|c| c.sigma)).collect();
        let delta = (sigmas.len() == 2).then(|| (sigmas[0] - sigmas[1]).norm() / sigmas[0].norm());
        checks.push(match delta {
            Some(d) => Check::measured("cross_gauge.delta_sigma_rel", d, CROSS_GAUGE_TOLERANCE),
            None => Check::skipped("cross_gauge.delta_sigma_rel", CROSS_GAUGE_TOLERANCE, "no conductivity"),
        });
        let horizon = config.propagator.t_final.min(MODULUS_CHECK_TIME);
        let residual = if horizon > 0.0 {
            Some(modulus_residual(config, &chi0, horizon)?)
        } else {
            None
        };
        checks.push(match residual {
            Some(r) => Check::measured("cross_gauge.modulus_residual", r, MODULUS_TOLERANCE),
            None => Check::skipped("cross_gauge.modulus_residual", MODULUS_TOLERANCE, "t_final = 0"),
        });
        Some(CrossGauge {
            delta_sigma_rel: delta,
            modulus_residual: residual,
            modulus_check_time: horizon,
        })
    } else {
        None
    };

    checks.push(Check::measured(
        "random.canonicity",
        random_canonicity(config, CANONICITY_SAMPLES)?,
        CANONICITY_TOLERANCE,
    ));

    let gauge_seconds = runs.iter().map(|r| (r.report.gauge.to_string(), r.seconds)).collect();
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        sigma_theory,
        initial: initial_diagnostics(&chi0),
        gauges: runs.into_iter().map(|r| r.report).collect(),
        cross_gauge,
        checks,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            gauge_seconds,
        },
    };
    emit_report(&report, &dir.join(REPORT_FILE))?;
    Ok(report)
}
