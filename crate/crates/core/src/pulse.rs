//! Shape functions and the inverse-engineered drive fields.
//!
//! The mixing angle `θ(t)` follows a logistic (Vitanov) profile rising from 0
//! to π/2, and `φ(t)` is a Gaussian centred on `t = 0`. The time window is
//! `[−T/2, T/2]`. Both angles only reach their boundary values
//! asymptotically, so [`check_boundaries`] reports residuals rather than
//! exact satisfaction.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::model::SystemParams;
use crate::{Error, Result};

/// Below this value of `φ` the cotangent in the coupling design is refused.
pub const PHI_GUARD: f64 = 1e-8;

/// Default number of stored schedule samples.
pub const DEFAULT_SAMPLES: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PulseParams {
    /// Total duration `T`.
    pub total_time: f64,
    /// Rise time `τ` of the logistic `θ`.
    pub tau: f64,
    /// Width `τ_c` of the Gaussian `φ`.
    pub tau_c: f64,
    /// Peak coefficient `φ₀`; the peak angle is `π φ₀`.
    pub phi0: f64,
}

impl PulseParams {
    /// `τ = 0.1 T`, `τ_c = 0.3 T`, the ratios used in every sweep.
    pub fn scaled(total_time: f64, phi0: f64) -> Self {
        Self {
            total_time,
            tau: 0.1 * total_time,
            tau_c: 0.3 * total_time,
            phi0,
        }
    }

    /// `T = 1/g`, `φ₀ = 0.1` with the standard ratios.
    pub fn reference() -> Self {
        Self::scaled(1.0, 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("totalTime", self.total_time),
            ("tau", self.tau),
            ("tauC", self.tau_c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.phi0 > 0.0 && self.phi0 < FRAC_PI_2) {
            return Err(Error::invalid(
                "phi0",
                format!("must lie in (0, π/2), got {}", self.phi0),
            ));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        -0.5 * self.total_time
    }

    pub fn end(&self) -> f64 {
        0.5 * self.total_time
    }
}

/// `θ`, `φ` and their time derivatives at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angles {
    pub theta: f64,
    pub theta_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

fn logistic(t: f64, tau: f64) -> f64 {
    1.0 / (1.0 + (-t / tau).exp())
}

pub fn theta(t: f64, pp: &PulseParams) -> f64 {
    FRAC_PI_2 * logistic(t, pp.tau)
}

pub fn theta_dot(t: f64, pp: &PulseParams) -> f64 {
    let s = logistic(t, pp.tau);
    FRAC_PI_2 * s * (1.0 - s) / pp.tau
}

pub fn phi(t: f64, pp: &PulseParams) -> f64 {
    PI * pp.phi0 * (-(t * t) / (pp.tau_c * pp.tau_c)).exp()
}

pub fn phi_dot(t: f64, pp: &PulseParams) -> f64 {
    -2.0 * t / (pp.tau_c * pp.tau_c) * phi(t, pp)
}

pub fn angles(t: f64, pp: &PulseParams) -> Angles {
    Angles {
        theta: theta(t, pp),
        theta_dot: theta_dot(t, pp),
        phi: phi(t, pp),
        phi_dot: phi_dot(t, pp),
    }
}

/// Effective couplings `g1·α_L` and `g2·α_R`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Couplings {
    pub left: f64,
    pub right: f64,
}

impl Couplings {
    pub const ZERO: Couplings = Couplings {
        left: 0.0,
        right: 0.0,
    };

    /// Total coupling `Ω`.
    pub fn magnitude(&self) -> f64 {
        self.left.hypot(self.right)
    }
}

/// Couplings that make the invariant exact for the given angle trajectory.
pub fn couplings_from_angles(a: &Angles) -> Couplings {
    let (sin_t, cos_t) = a.theta.sin_cos();
    let drift = a.theta_dot / a.phi.tan();
    Couplings {
        left: -SQRT_2 * (drift * sin_t + a.phi_dot * cos_t),
        right: -SQRT_2 * (drift * cos_t - a.phi_dot * sin_t),
    }
}

fn guarded_angles(t: f64, pp: &PulseParams) -> Result<Angles> {
    let a = angles(t, pp);
    if a.phi.abs() < PHI_GUARD {
        return Err(Error::NearSingularCotangent { t, phi: a.phi });
    }
    Ok(a)
}

pub fn effective_couplings(t: f64, pp: &PulseParams) -> Result<Couplings> {
    Ok(couplings_from_angles(&guarded_angles(t, pp)?))
}

/// The angle `ϱ` with `g1·α_L = −Ω sin ϱ` and `g2·α_R = −Ω cos ϱ`.
pub fn coupling_angle(t: f64, pp: &PulseParams) -> Result<f64> {
    let a = guarded_angles(t, pp)?;
    Ok(a.theta + (a.phi_dot / (a.theta_dot / a.phi.tan())).atan())
}

/// Any source of time-dependent effective couplings on a finite window.
pub trait CouplingProfile {
    fn couplings(&self, t: f64) -> Result<Couplings>;
    fn window(&self) -> (f64, f64);
}

impl CouplingProfile for PulseParams {
    fn couplings(&self, t: f64) -> Result<Couplings> {
        effective_couplings(t, self)
    }

    fn window(&self) -> (f64, f64) {
        (self.start(), self.end())
    }
}

/// Constant couplings over a fixed window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrozenCouplings {
    pub couplings: Couplings,
    pub start: f64,
    pub end: f64,
}

impl CouplingProfile for FrozenCouplings {
    fn couplings(&self, _t: f64) -> Result<Couplings> {
        Ok(self.couplings)
    }

    fn window(&self) -> (f64, f64) {
        (self.start, self.end)
    }
}

/// Drive amplitudes and the resulting effective couplings at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSample {
    pub t: f64,
    pub omega_l: f64,
    pub omega_r: f64,
    pub omega_m: f64,
    pub ga_l: f64,
    pub ga_r: f64,
}

impl DriveSample {
    pub fn couplings(&self) -> Couplings {
        Couplings {
            left: self.ga_l,
            right: self.ga_r,
        }
    }
}

/// Classical drives `Ω_L`, `Ω_R` and the middle drive that keeps the middle
/// cavity dark.
pub fn design_drives(t: f64, pp: &PulseParams, p: &SystemParams) -> Result<DriveSample> {
    // The middle-drive relation assumes equal tunneling rates.
    p.symmetric_tunneling()?;
    if p.delta0.is_nan() || p.delta0 <= 0.0 {
        return Err(Error::invalid("delta0", "must be positive"));
    }
    let a = guarded_angles(t, pp)?;
    let (sin_t, cos_t) = a.theta.sin_cos();
    let drift = a.theta_dot / a.phi.tan();
    let omega_l = SQRT_2 * p.delta0 / p.g1 * (drift * sin_t + a.phi_dot * cos_t);
    let omega_r = SQRT_2 * p.delta0 / p.g2 * (drift * cos_t - a.phi_dot * sin_t);
    let omega_m = crate::steady::middle_drive_for_dark_cavity(p, omega_l, omega_r)?;
    Ok(DriveSample {
        t,
        omega_l,
        omega_r,
        omega_m,
        ga_l: p.g1 * omega_l / -p.delta0,
        ga_r: p.g2 * omega_r / -p.delta0,
    })
}

/// Drives sampled on a uniform grid over `[−T/2, T/2]`.
///
/// Integrators re-evaluate the couplings analytically from `params`; the
/// stored samples are for export and grid diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSchedule {
    pub params: PulseParams,
    pub samples: Vec<DriveSample>,
}

impl PulseSchedule {
    pub fn design(pp: &PulseParams, p: &SystemParams, n_samples: usize) -> Result<Self> {
        pp.validate()?;
        p.validate()?;
        if n_samples < 2 {
            return Err(Error::InvalidSchedule(format!(
                "need at least 2 samples, got {n_samples}"
            )));
        }
        let times = uniform_grid(pp.start(), pp.end(), n_samples);
        let samples = times
            .into_iter()
            .map(|t| design_drives(t, pp, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *pp,
            samples,
        })
    }

    /// Schedule from precomputed samples. Sample times must be uniform,
    /// strictly increasing and span the pulse window.
    pub fn from_samples(params: PulseParams, samples: Vec<DriveSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidSchedule("need at least 2 samples".into()));
        }
        let tol = 1e-9 * params.total_time;
        let first = samples[0].t;
        let last = samples[samples.len() - 1].t;
        if (first - params.start()).abs() > tol || (last - params.end()).abs() > tol {
            return Err(Error::InvalidSchedule(format!(
                "samples span [{first}, {last}], expected [{}, {}]",
                params.start(),
                params.end()
            )));
        }
        let step = (last - first) / (samples.len() - 1) as f64;
        for (k, w) in samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if dt <= 0.0 || (dt - step).abs() > tol {
                return Err(Error::InvalidSchedule(format!(
                    "non-uniform spacing at sample {k}"
                )));
            }
        }
        Ok(Self { params, samples })
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "omega_L", "omega_R", "omega_M", "gA_L", "gA_R"])?;
        for s in &self.samples {
            out.write_record(
                [s.t, s.omega_l, s.omega_r, s.omega_m, s.ga_l, s.ga_r].map(format_float),
            )?;
        }
        out.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

impl CouplingProfile for PulseSchedule {
    fn couplings(&self, t: f64) -> Result<Couplings> {
        effective_couplings(t, &self.params)
    }

    fn window(&self) -> (f64, f64) {
        (self.params.start(), self.params.end())
    }
}

/// `n` evenly spaced points covering both endpoints exactly.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let h = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        end
                    } else {
                        start + h * k as f64
                    }
                })
                .collect()
        }
    }
}

/// Shortest round-trip decimal form; NaN is written as `nan`.
pub(crate) fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_owned()
    } else {
        format!("{x}")
    }
}

/// Distance of the shape functions from their ideal boundary values at
/// `t = ±T/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub theta_start: f64,
    pub theta_end: f64,
    pub theta_dot_start: f64,
    pub theta_dot_end: f64,
    pub phi_start: f64,
    pub phi_end: f64,
    pub phi_dot_start: f64,
    pub phi_dot_end: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl BoundaryReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.theta_start,
            self.theta_end,
            self.theta_dot_start,
            self.theta_dot_end,
            self.phi_start,
            self.phi_end,
            self.phi_dot_start,
            self.phi_dot_end,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn check_boundaries(pp: &PulseParams, tol: f64) -> BoundaryReport {
    let (ti, tf) = (pp.start(), pp.end());
    let mut report = BoundaryReport {
        theta_start: theta(ti, pp).abs(),
        theta_end: (theta(tf, pp) - FRAC_PI_2).abs(),
        theta_dot_start: theta_dot(ti, pp).abs(),
        theta_dot_end: theta_dot(tf, pp).abs(),
        phi_start: phi(ti, pp).abs(),
        phi_end: phi(tf, pp).abs(),
        phi_dot_start: phi_dot(ti, pp).abs(),
        phi_dot_end: phi_dot(tf, pp).abs(),
        tolerance: tol,
        pass: false,
    };
    report.pass = report.max_residual() <= tol;
    report
}

/// Minimum over the schedule grid of `K = √2 J / Ω(t)`. Grid points with
/// `Ω = 0` are skipped.
pub fn min_zeno_ratio(schedule: &PulseSchedule, p: &SystemParams) -> Result<f64> {
    let j = p.symmetric_tunneling()?;
    let peak = schedule
        .samples
        .iter()
        .map(|s| s.couplings().magnitude())
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::UndefinedZenoRatio);
    }
    Ok(SQRT_2 * j / peak)
}
