//! Single transfer runs, parameter sweeps and the files they produce.
//!
//! Sweep cells are evaluated in parallel but always emitted in grid order
//! (T-major), so output does not depend on the worker count.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{fidelity_pure, integrate_pure, FullTrajectory, IntegratorConfig};
use crate::invariant::{lewis_riesenfeld_phase, von_neumann_residual};
use crate::model::{FluctuationState, ModeIndex, SystemParams};
use crate::noise::{fidelity_density, propagate_density, DensityMatrix5, NoiseConfig};
use crate::pulse::{
    check_boundaries, format_float, min_zeno_ratio, uniform_grid, BoundaryReport, PulseParams,
    PulseSchedule, DEFAULT_SAMPLES,
};
use crate::steady::{validate_rwa, ValidityReport, RWA_THRESHOLD};
use crate::{Error, Result};

/// Points per axis of the default sweep grids.
pub const DEFAULT_RESOLUTION: usize = 41;
/// Cavity decay rate used when a decay sweep does not specify one.
pub const DEFAULT_CAVITY_DECAY: f64 = 0.05;
/// Membrane decay rate used when a decay sweep does not specify one.
pub const DEFAULT_MEMBRANE_DECAY: f64 = 0.001;
/// Tolerance on the shape-function boundary residuals in `validate`.
pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 0.05;
/// Tolerance on the invariance residual and the Lewis-Riesenfeld phase.
pub const INVARIANT_TOLERANCE: f64 = 1e-8;

/// Rectangular grid of pulse durations and maximal mixing angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepGrid {
    pub t_values: Vec<f64>,
    pub phi0_values: Vec<f64>,
}

impl SweepGrid {
    pub fn linspace(
        t_range: (f64, f64),
        phi0_range: (f64, f64),
        n_t: usize,
        n_phi0: usize,
    ) -> Self {
        Self {
            t_values: uniform_grid(t_range.0, t_range.1, n_t),
            phi0_values: uniform_grid(phi0_range.0, phi0_range.1, n_phi0),
        }
    }

    /// Noiseless fidelity and `K_min` maps.
    pub fn default_fidelity() -> Self {
        Self::linspace(
            (0.1, 1.0),
            (0.05, 0.45),
            DEFAULT_RESOLUTION,
            DEFAULT_RESOLUTION,
        )
    }

    /// Noise and decay maps.
    pub fn default_robustness() -> Self {
        Self::linspace(
            (0.3, 1.0),
            (0.1, 0.25),
            DEFAULT_RESOLUTION,
            DEFAULT_RESOLUTION,
        )
    }

    pub fn single(total_time: f64, phi0: f64) -> Self {
        Self {
            t_values: vec![total_time],
            phi0_values: vec![phi0],
        }
    }

    pub fn len(&self) -> usize {
        self.t_values.len() * self.phi0_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(T, φ₀)` pairs, T-major.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.t_values
            .iter()
            .flat_map(|&t| self.phi0_values.iter().map(move |&phi0| (t, phi0)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidConfig("sweep grid has no cells".into()));
        }
        if let Some(t) = self.t_values.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "grid duration {t} must be positive"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Transfer,
    SweepFidelity,
    SweepKmin,
    SweepNoise,
    SweepDecay,
    Validate,
}

impl RunMode {
    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            RunMode::SweepFidelity | RunMode::SweepKmin | RunMode::SweepNoise | RunMode::SweepDecay
        )
    }
}

/// Unit annotations carried in config files. Only the internal units are
/// accepted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub rate: String,
    pub time: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            rate: "g".into(),
            time: "1/g".into(),
        }
    }
}

impl Units {
    fn validate(&self) -> Result<()> {
        let expected = Units::default();
        if *self != expected {
            return Err(Error::InvalidConfig(format!(
                "units must be rate = \"{}\" and time = \"{}\", got rate = \"{}\" and time = \"{}\"",
                expected.rate, expected.time, self.rate, self.time
            )));
        }
        Ok(())
    }
}

/// Everything needed to reproduce one run. Missing sections are filled from
/// mode-specific defaults by [`ExperimentConfig::resolved`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub units: Units,
    pub mode: RunMode,
    #[serde(default)]
    pub system: Option<SystemParams>,
    /// Pulse for `transfer` and `validate`.
    #[serde(default)]
    pub pulse: Option<PulseParams>,
    /// Grid for the sweep modes.
    #[serde(default)]
    pub grid: Option<SweepGrid>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    /// Points in exported drive schedules and `K_min` scans.
    #[serde(default = "default_samples")]
    pub schedule_samples: usize,
    /// Sweep worker threads; `None` uses all available cores.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_rwa_threshold")]
    pub rwa_threshold: f64,
    #[serde(default = "default_boundary_tolerance")]
    pub boundary_tolerance: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_rwa_threshold() -> f64 {
    RWA_THRESHOLD
}

fn default_boundary_tolerance() -> f64 {
    DEFAULT_BOUNDARY_TOLERANCE
}

impl ExperimentConfig {
    /// Default configuration for `mode`, fully resolved.
    pub fn for_mode(mode: RunMode) -> Self {
        Self {
            units: Units::default(),
            mode,
            system: None,
            pulse: None,
            grid: None,
            noise: NoiseConfig::default(),
            integrator: IntegratorConfig::default(),
            schedule_samples: DEFAULT_SAMPLES,
            workers: None,
            rwa_threshold: RWA_THRESHOLD,
            boundary_tolerance: DEFAULT_BOUNDARY_TOLERANCE,
            output: None,
        }
        .resolved()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })
    }

    /// Fills absent sections with the defaults of the configured mode.
    pub fn resolved(mut self) -> Self {
        if self.system.is_none() {
            let base = SystemParams::reference();
            self.system = Some(match self.mode {
                RunMode::SweepDecay => {
                    base.with_uniform_decay(DEFAULT_CAVITY_DECAY, DEFAULT_MEMBRANE_DECAY)
                }
                _ => base,
            });
        }
        match self.mode {
            RunMode::Transfer | RunMode::Validate => {
                self.pulse.get_or_insert_with(PulseParams::reference);
            }
            RunMode::SweepFidelity | RunMode::SweepKmin => {
                self.grid.get_or_insert_with(SweepGrid::default_fidelity);
            }
            RunMode::SweepNoise | RunMode::SweepDecay => {
                self.grid.get_or_insert_with(SweepGrid::default_robustness);
            }
        }
        self
    }

    pub fn system(&self) -> SystemParams {
        self.system.unwrap_or_else(SystemParams::reference)
    }

    pub fn pulse(&self) -> PulseParams {
        self.pulse.unwrap_or_else(PulseParams::reference)
    }

    pub fn validate(&self) -> Result<()> {
        self.units.validate()?;
        self.system().validate()?;
        self.integrator.validate()?;
        self.noise.validate()?;
        if self.schedule_samples < 2 {
            return Err(Error::InvalidConfig(
                "scheduleSamples must be at least 2".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.mode.is_sweep() {
            self.grid
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("sweep modes need a grid".into()))?
                .validate()?;
        } else {
            self.pulse().validate()?;
        }
        Ok(())
    }

    fn expect_mode(&self, mode: RunMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidConfig(format!(
                "configuration is for {:?}, not {:?}",
                self.mode, mode
            )));
        }
        self.validate()
    }
}

/// Designed drives and the resulting trajectory for one pulse.
#[derive(Clone, Debug)]
pub struct TransferResult {
    pub schedule: PulseSchedule,
    pub trajectory: FullTrajectory,
    pub fidelity: f64,
    pub final_source_occupation: f64,
}

pub fn run_transfer(cfg: &ExperimentConfig) -> Result<TransferResult> {
    cfg.expect_mode(RunMode::Transfer)?;
    let p = cfg.system();
    let pp = cfg.pulse();
    let schedule = PulseSchedule::design(&pp, &p, cfg.schedule_samples)?;
    let init = FluctuationState::excited(ModeIndex::Membrane1);
    let trajectory = integrate_pure(&init, &pp, &p, false, &cfg.integrator)?;
    let last = trajectory.final_fluctuation();
    Ok(TransferResult {
        schedule,
        fidelity: fidelity_pure(&trajectory),
        final_source_occupation: last.amplitude(ModeIndex::Membrane1).norm_sqr(),
        trajectory,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub total_time: f64,
    pub phi0: f64,
    pub value: f64,
}

/// One value per grid cell, in grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub mode: RunMode,
    pub grid: SweepGrid,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn value_at(&self, i_t: usize, i_phi0: usize) -> f64 {
        self.cells[i_t * self.grid.phi0_values.len() + i_phi0].value
    }

    /// Values with `T` along rows and `φ₀` along columns.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.grid.phi0_values.len())
            .map(|row| row.iter().map(|c| c.value).collect())
            .collect()
    }

    /// Writes `T,phi0,value`, one row per cell.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["T", "phi0", "value"])?;
        for c in &self.cells {
            out.write_record([
                format_float(c.total_time),
                format_float(c.phi0),
                format_float(c.value),
            ])?;
        }
        out.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Noiseless, lossless fidelity of the designed pulse.
pub fn fidelity_cell(
    total_time: f64,
    phi0: f64,
    p: &SystemParams,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let pp = PulseParams::scaled(total_time, phi0);
    pp.validate()?;
    let init = FluctuationState::excited(ModeIndex::Membrane1);
    Ok(fidelity_pure(&integrate_pure(
        &init, &pp, p, false, integrator,
    )?))
}

/// Smallest Zeno ratio over the designed schedule.
pub fn kmin_cell(total_time: f64, phi0: f64, p: &SystemParams, samples: usize) -> Result<f64> {
    let pp = PulseParams::scaled(total_time, phi0);
    min_zeno_ratio(&PulseSchedule::design(&pp, p, samples)?, p)
}

/// Fidelity of the averaged density matrix under drive noise.
pub fn noise_cell(
    total_time: f64,
    phi0: f64,
    p: &SystemParams,
    noise: &NoiseConfig,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let pp = PulseParams::scaled(total_time, phi0);
    pp.validate()?;
    let rho = propagate_density(
        &DensityMatrix5::excited(ModeIndex::Membrane1),
        &pp,
        p,
        noise,
        integrator,
    )?;
    Ok(fidelity_density(&rho))
}

/// Fidelity with the decay rates of `p` switched on.
pub fn decay_cell(
    total_time: f64,
    phi0: f64,
    p: &SystemParams,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let pp = PulseParams::scaled(total_time, phi0);
    pp.validate()?;
    let init = FluctuationState::excited(ModeIndex::Membrane1);
    Ok(fidelity_pure(&integrate_pure(
        &init, &pp, p, true, integrator,
    )?))
}

fn sweep<F>(cfg: &ExperimentConfig, mode: RunMode, cell: F) -> Result<SweepResult>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    cfg.expect_mode(mode)?;
    let grid = cfg.grid.clone().expect("validated sweep config has a grid");
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let cells = pool.install(|| {
        grid.cells()
            .par_iter()
            .map(|&(total_time, phi0)| {
                let value = cell(total_time, phi0).unwrap_or_else(|e| {
                    warn!("cell T = {total_time}, phi0 = {phi0} failed: {e}");
                    f64::NAN
                });
                SweepCell {
                    total_time,
                    phi0,
                    value,
                }
            })
            .collect()
    });
    Ok(SweepResult { mode, grid, cells })
}

pub fn run_sweep_fidelity(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let p = cfg.system();
    sweep(cfg, RunMode::SweepFidelity, |t, phi0| {
        fidelity_cell(t, phi0, &p, &cfg.integrator)
    })
}

pub fn run_sweep_kmin(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let p = cfg.system();
    sweep(cfg, RunMode::SweepKmin, |t, phi0| {
        kmin_cell(t, phi0, &p, cfg.schedule_samples)
    })
}

pub fn run_sweep_noise(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let p = cfg.system();
    sweep(cfg, RunMode::SweepNoise, |t, phi0| {
        noise_cell(t, phi0, &p, &cfg.noise, &cfg.integrator)
    })
}

pub fn run_sweep_decay(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let p = cfg.system();
    sweep(cfg, RunMode::SweepDecay, |t, phi0| {
        decay_cell(t, phi0, &p, &cfg.integrator)
    })
}

/// Diagnostics of a designed pulse that do not require propagation.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub boundaries: BoundaryReport,
    pub rwa: ValidityReport,
    pub max_invariant_residual: f64,
    pub lewis_riesenfeld_phase: f64,
    pub invariant_pass: bool,
    pub min_zeno_ratio: f64,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.boundaries.pass && self.rwa.pass && self.invariant_pass
    }
}

pub fn run_validation(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.expect_mode(RunMode::Validate)?;
    let p = cfg.system();
    let pp = cfg.pulse();
    let schedule = PulseSchedule::design(&pp, &p, cfg.schedule_samples)?;
    let max_invariant_residual = schedule
        .times()
        .map(|t| von_neumann_residual(t, &pp))
        .try_fold(0.0, |acc: f64, r| r.map(|r| acc.max(r)))?;
    let phase = lewis_riesenfeld_phase(&pp)?;
    Ok(ValidationReport {
        boundaries: check_boundaries(&pp, cfg.boundary_tolerance),
        rwa: validate_rwa(&p, &schedule, cfg.rwa_threshold),
        max_invariant_residual,
        lewis_riesenfeld_phase: phase,
        invariant_pass: max_invariant_residual <= INVARIANT_TOLERANCE
            && phase.abs() <= INVARIANT_TOLERANCE,
        min_zeno_ratio: min_zeno_ratio(&schedule, &p)?,
    })
}

/// What a run produced on disk.
#[derive(Clone, Debug)]
pub enum RunOutcome {
    Transfer(TransferResult),
    Sweep(SweepResult),
    Validate(ValidationReport),
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn with_path(path: &Path, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Csv(inner) => match inner.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::InvalidConfig(format!("{}: {other:?}", path.display())),
        },
        other => other,
    })
}

/// Runs the configured mode and writes its files plus `run_meta.json` into
/// `out_dir`, which is created if needed.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let cfg = cfg.clone().resolved();
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let outcome = match cfg.mode {
        RunMode::Transfer => {
            let r = run_transfer(&cfg)?;
            let drives = out_dir.join("drives.csv");
            with_path(&drives, r.schedule.write_csv(create(&drives)?))?;
            let traj = out_dir.join("trajectory.csv");
            with_path(&traj, r.trajectory.write_csv(create(&traj)?))?;
            RunOutcome::Transfer(r)
        }
        RunMode::Validate => {
            let report = run_validation(&cfg)?;
            write_json(&out_dir.join("validation.json"), &report)?;
            RunOutcome::Validate(report)
        }
        mode => {
            let result = match mode {
                RunMode::SweepFidelity => run_sweep_fidelity(&cfg)?,
                RunMode::SweepKmin => run_sweep_kmin(&cfg)?,
                RunMode::SweepNoise => run_sweep_noise(&cfg)?,
                _ => run_sweep_decay(&cfg)?,
            };
            let path = out_dir.join("sweep.csv");
            with_path(&path, result.write_csv(create(&path)?))?;
            RunOutcome::Sweep(result)
        }
    };
    write_json(
        &out_dir.join("run_meta.json"),
        &RunMeta {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &cfg,
        },
    )?;
    Ok(outcome)
}
