//! Fixed-step propagation of the fluctuation amplitudes.
//!
//! Couplings are re-evaluated from the pulse parameters at every Runge-Kutta
//! stage, so the stored schedule grid never enters the dynamics. Stochastic
//! input noise is not propagated; only the mean amplitudes are.

use std::io::Write;

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::integrator::rk4;
use crate::model::{
    effective_matrix, interaction_matrix, lossless_interaction_matrix, FluctuationState, ModeIndex,
    SystemParams, Vector3, Vector5, ZenoBasis,
};
use crate::pulse::{format_float, CouplingProfile};
use crate::{Error, Result, C64};

/// Default number of RK4 steps over the pulse window.
pub const DEFAULT_STEPS: usize = 4000;
/// Smallest accepted step count.
pub const MIN_STEPS: usize = 100;
/// Final-state deviation under step doubling above which a run is rejected.
pub const CONVERGENCE_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub steps: usize,
    /// Rerun at twice the step count and reject the run if the final state
    /// moves by more than [`CONVERGENCE_LIMIT`].
    pub convergence_check: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            convergence_check: false,
        }
    }
}

impl IntegratorConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < MIN_STEPS {
            return Err(Error::invalid(
                "steps",
                format!("must be at least {MIN_STEPS}, got {}", self.steps),
            ));
        }
        Ok(())
    }

    fn doubled(&self) -> Self {
        Self {
            steps: 2 * self.steps,
            convergence_check: false,
        }
    }
}

/// States sampled after every integrator step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub times: Vec<f64>,
    pub states: Vec<SVector<C64, D>>,
    /// Final-state deviation against a doubled-resolution rerun, when checked.
    pub convergence_deviation: Option<f64>,
}

pub type FullTrajectory = Trajectory<5>;
pub type EffectiveTrajectory = Trajectory<3>;

impl<const D: usize> Trajectory<D> {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            convergence_deviation: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &SVector<C64, D> {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// `|amplitude|²` of every component, per sample.
    pub fn occupations(&self) -> Vec<[f64; D]> {
        self.states
            .iter()
            .map(|s| std::array::from_fn(|i| s[i].norm_sqr()))
            .collect()
    }

    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.norm())
    }
}

impl Trajectory<5> {
    pub fn final_fluctuation(&self) -> FluctuationState {
        FluctuationState(*self.final_state())
    }

    /// Writes `t,n_aL,n_aM,n_aR,n_b1,n_b2,n_psi3`, one row per sample.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let basis = ZenoBasis::new();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "n_aL", "n_aM", "n_aR", "n_b1", "n_b2", "n_psi3"])?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = Vec::with_capacity(7);
            row.push(format_float(*t));
            row.extend(s.iter().map(|a| format_float(a.norm_sqr())));
            row.push(format_float(basis.intermediate_occupancy(s)));
            out.write_record(&row)?;
        }
        out.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

fn propagate<const D: usize, F>(
    rhs: F,
    window: (f64, f64),
    initial: SVector<C64, D>,
    steps: usize,
) -> Result<Trajectory<D>>
where
    F: FnMut(f64, &SVector<C64, D>) -> Result<SVector<C64, D>>,
{
    let mut traj = Trajectory::with_capacity(steps + 1);
    rk4(rhs, window.0, window.1, initial, steps, |t, y| {
        traj.times.push(t);
        traj.states.push(*y);
    })?;
    Ok(traj)
}

fn check_convergence<const D: usize>(
    traj: &mut Trajectory<D>,
    rerun: impl FnOnce() -> Result<Trajectory<D>>,
) -> Result<()> {
    let fine = rerun()?;
    let deviation = (traj.final_state() - fine.final_state()).camax();
    traj.convergence_deviation = Some(deviation);
    if deviation > CONVERGENCE_LIMIT {
        return Err(Error::UnderResolved {
            quantity: "final state",
            deviation,
            limit: CONVERGENCE_LIMIT,
        });
    }
    Ok(())
}

/// Propagates the five-mode amplitudes under `i dΨ/dt = M(t) Ψ`.
///
/// With `include_decay` the diagonal `−iγ/2` terms are kept and the norm
/// decays; otherwise the generator is Hermitian.
pub fn integrate_pure<P: CouplingProfile + ?Sized>(
    initial: &FluctuationState,
    profile: &P,
    p: &SystemParams,
    include_decay: bool,
    cfg: &IntegratorConfig,
) -> Result<FullTrajectory> {
    cfg.validate()?;
    p.validate()?;
    let run = |steps: usize| {
        let rhs = |t: f64, y: &Vector5| -> Result<Vector5> {
            let c = profile.couplings(t)?;
            let m = if include_decay {
                interaction_matrix(p, c.left, c.right)
            } else {
                lossless_interaction_matrix(p, c.left, c.right)
            };
            Ok((m * y) * -C64::i())
        };
        propagate(rhs, profile.window(), initial.0, steps)
    };
    let mut traj = run(cfg.steps)?;
    if cfg.convergence_check {
        check_convergence(&mut traj, || run(cfg.doubled().steps))?;
    }
    Ok(traj)
}

/// Propagates the dark-subspace amplitudes under `i dv/dt = M_eff(t) v`.
pub fn integrate_effective<P: CouplingProfile + ?Sized>(
    initial: &Vector3,
    profile: &P,
    cfg: &IntegratorConfig,
) -> Result<EffectiveTrajectory> {
    cfg.validate()?;
    let run = |steps: usize| {
        let rhs = |t: f64, y: &Vector3| -> Result<Vector3> {
            let c = profile.couplings(t)?;
            Ok((effective_matrix(c.left, c.right) * y) * -C64::i())
        };
        propagate(rhs, profile.window(), *initial, steps)
    };
    let mut traj = run(cfg.steps)?;
    if cfg.convergence_check {
        check_convergence(&mut traj, || run(cfg.doubled().steps))?;
    }
    Ok(traj)
}

/// Final occupation of the second membrane, `|⟨ψ2|Ψ(t_f)⟩|²`.
pub fn fidelity_pure(traj: &FullTrajectory) -> f64 {
    traj.final_state()[ModeIndex::Membrane2.index()].norm_sqr()
}

/// `|⟨ψ2|v(t_f)⟩|²` for the dark-subspace model.
pub fn fidelity_effective(traj: &EffectiveTrajectory) -> f64 {
    traj.final_state()[1].norm_sqr()
}

/// Per-mode occupations of a state.
pub fn occupations(state: &FluctuationState) -> [f64; 5] {
    state.occupations()
}

/// `|⟨ψ3|Ψ⟩|²`.
pub fn intermediate_occupancy(state: &FluctuationState) -> f64 {
    ZenoBasis::new().intermediate_occupancy(&state.0)
}

/// Occupations of `(ψ1, ψ2, ψ3)` along a five-mode trajectory.
pub fn dark_basis_occupations(traj: &FullTrajectory) -> Vec<[f64; 3]> {
    let basis = ZenoBasis::new();
    traj.states
        .iter()
        .map(|s| {
            let c = basis.project(s);
            [c[0].norm_sqr(), c[1].norm_sqr(), c[2].norm_sqr()]
        })
        .collect()
}
