//! Averaged dynamics under white amplitude noise on the two cavity drives.
//!
//! Each noisy drive contributes a double-commutator dephasing term built from
//! a Hermitian jump matrix, so the ensemble-averaged density matrix is
//! integrated directly instead of sampling noise realizations.

use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorConfig;
use crate::integrator::rk4;
use crate::model::{
    interaction_matrix, lossless_interaction_matrix, FluctuationState, Matrix5, ModeIndex,
    SystemParams,
};
use crate::pulse::CouplingProfile;
use crate::{Error, Result, C64};

/// Trace drift tolerated in lossless runs.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Largest `|ρ − ρ†|` entry tolerated anywhere along a run.
pub const HERMITICITY_DRIFT_LIMIT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix5(pub Matrix5);

impl DensityMatrix5 {
    /// `|ψ⟩⟨ψ|`.
    pub fn pure(state: &FluctuationState) -> Self {
        Self(state.0 * state.0.adjoint())
    }

    pub fn excited(mode: ModeIndex) -> Self {
        Self::pure(&FluctuationState::excited(mode))
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix5::identity() * C64::from(0.2))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.0)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn population(&self, mode: ModeIndex) -> f64 {
        let i = mode.index();
        self.0[(i, i)].re
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (self.0 + self.0.adjoint()) * C64::from(0.5);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

fn hermiticity_error(m: &Matrix5) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// How strongly each noise channel dephases for a given intensity `μ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePrefactor {
    /// `μ²` per double commutator.
    #[default]
    AsPublished,
    /// `μ²/2`, the white-noise Novikov average.
    Novikov,
}

impl NoisePrefactor {
    pub fn factor(self, mu: f64) -> f64 {
        match self {
            NoisePrefactor::AsPublished => mu * mu,
            NoisePrefactor::Novikov => 0.5 * mu * mu,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Relative noise intensity on each drive.
    pub mu: f64,
    pub prefactor: NoisePrefactor,
    pub include_decay: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            mu: 0.05,
            prefactor: NoisePrefactor::AsPublished,
            include_decay: false,
        }
    }
}

impl NoiseConfig {
    pub fn with_mu(mu: f64) -> Self {
        Self {
            mu,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(
                "mu",
                format!("must be finite and non-negative, got {}", self.mu),
            ));
        }
        Ok(())
    }
}

fn symmetric_unit(i: usize, j: usize, value: f64) -> Matrix5 {
    let mut m = Matrix5::zeros();
    m[(i, j)] = C64::from(value);
    m[(j, i)] = C64::from(value);
    m
}

/// Jump matrices for noise on the left and right drives at time `t`.
///
/// Each is the corresponding effective coupling placed symmetrically on the
/// cavity-membrane pair it acts on.
pub fn noise_jump_matrices<P: CouplingProfile + ?Sized>(
    t: f64,
    profile: &P,
) -> Result<(Matrix5, Matrix5)> {
    let c = profile.couplings(t)?;
    let left = symmetric_unit(
        ModeIndex::CavityLeft.index(),
        ModeIndex::Membrane1.index(),
        c.left,
    );
    let right = symmetric_unit(
        ModeIndex::CavityRight.index(),
        ModeIndex::Membrane2.index(),
        c.right,
    );
    Ok((left, right))
}

fn double_commutator(a: &Matrix5, rho: &Matrix5) -> Matrix5 {
    let inner = a * rho - rho * a;
    a * inner - inner * a
}

/// Maximum drift observed along a density-matrix run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DensityDiagnostics {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    /// Whether `Tr ρ²` never rose between consecutive steps.
    pub purity_nonincreasing: bool,
}

/// Integrates the averaged master equation from the profile's start to end.
pub fn propagate_density<P: CouplingProfile + ?Sized>(
    initial: &DensityMatrix5,
    profile: &P,
    p: &SystemParams,
    noise: &NoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<DensityMatrix5> {
    propagate_density_with_diagnostics(initial, profile, p, noise, cfg).map(|(rho, _)| rho)
}

/// As [`propagate_density`], also returning drift diagnostics.
pub fn propagate_density_with_diagnostics<P: CouplingProfile + ?Sized>(
    initial: &DensityMatrix5,
    profile: &P,
    p: &SystemParams,
    noise: &NoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<(DensityMatrix5, DensityDiagnostics)> {
    cfg.validate()?;
    p.validate()?;
    noise.validate()?;
    let strength = C64::from(noise.prefactor.factor(noise.mu));
    let minus_i = -C64::i();

    let rhs = |t: f64, rho: &Matrix5| -> Result<Matrix5> {
        let c = profile.couplings(t)?;
        let m = if noise.include_decay {
            interaction_matrix(p, c.left, c.right)
        } else {
            lossless_interaction_matrix(p, c.left, c.right)
        };
        let mut d = (m * rho - rho * m.adjoint()) * minus_i;
        if noise.mu > 0.0 {
            let (a, b) = noise_jump_matrices(t, profile)?;
            d -= (double_commutator(&a, rho) + double_commutator(&b, rho)) * strength;
        }
        Ok(d)
    };

    let initial_trace = initial.trace();
    let check_trace = !noise.include_decay || p.is_lossless();
    let mut diag = DensityDiagnostics {
        purity_nonincreasing: true,
        ..Default::default()
    };
    let mut last_purity = f64::INFINITY;
    let (t0, t1) = profile.window();
    let rho = rk4(rhs, t0, t1, initial.0, cfg.steps, |_, rho| {
        if check_trace {
            diag.max_trace_drift = diag
                .max_trace_drift
                .max((rho.trace() - initial_trace).norm());
        }
        diag.max_hermiticity_error = diag.max_hermiticity_error.max(hermiticity_error(rho));
        let purity = (rho * rho).trace().re;
        if purity > last_purity + 1e-12 {
            diag.purity_nonincreasing = false;
        }
        last_purity = purity;
    })?;

    if diag.max_trace_drift > TRACE_DRIFT_LIMIT {
        return Err(Error::UnderResolved {
            quantity: "density-matrix trace",
            deviation: diag.max_trace_drift,
            limit: TRACE_DRIFT_LIMIT,
        });
    }
    if diag.max_hermiticity_error > HERMITICITY_DRIFT_LIMIT {
        return Err(Error::UnderResolved {
            quantity: "density-matrix hermiticity",
            deviation: diag.max_hermiticity_error,
            limit: HERMITICITY_DRIFT_LIMIT,
        });
    }
    Ok((DensityMatrix5(rho), diag))
}

/// `⟨ψ2|ρ|ψ2⟩`, the overlap with the target membrane state.
pub fn fidelity_density(rho: &DensityMatrix5) -> f64 {
    rho.population(ModeIndex::Membrane2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{fidelity_pure, integrate_pure};
    use crate::pulse::{design_drives, Couplings, FrozenCouplings, PulseParams, PulseSchedule};

    #[test]
    fn jump_matrices_follow_couplings() {
        let frozen = FrozenCouplings {
            couplings: Couplings {
                left: 0.0,
                right: 0.3,
            },
            start: 0.0,
            end: 1.0,
        };
        let (a, b) = noise_jump_matrices(0.5, &frozen).unwrap();
        assert_eq!(a, Matrix5::zeros());
        assert_eq!(b[(2, 4)], C64::from(0.3));
        assert_eq!(b[(4, 2)], C64::from(0.3));
        assert_eq!(b.adjoint(), b);
    }

    #[test]
    fn jump_matrix_from_drive() {
        // g1 = 1, Ω_L = 2, Δ₀ = 100 gives a coupling of −0.02.
        let frozen = FrozenCouplings {
            couplings: Couplings {
                left: 1.0 * 2.0 / -100.0,
                right: 0.0,
            },
            start: 0.0,
            end: 1.0,
        };
        let (a, _) = noise_jump_matrices(0.0, &frozen).unwrap();
        assert!((a[(0, 3)].re + 0.02).abs() < 1e-15);
    }

    #[test]
    fn jump_matrices_match_interaction_block() {
        let p = SystemParams::reference();
        let pp = PulseParams::reference();
        let schedule = PulseSchedule::design(&pp, &p, 201).unwrap();
        for s in schedule.samples.iter().step_by(20) {
            let d = design_drives(s.t, &pp, &p).unwrap();
            let (a, b) = noise_jump_matrices(s.t, &pp).unwrap();
            let m = lossless_interaction_matrix(&p, d.ga_l, d.ga_r);
            assert!((a[(0, 3)] + m[(0, 3)]).norm() < 1e-9);
            assert!((b[(2, 4)] - m[(2, 4)]).norm() < 1e-9);
        }
    }

    #[test]
    fn fidelity_readout() {
        assert_eq!(
            fidelity_density(&DensityMatrix5::excited(ModeIndex::Membrane2)),
            1.0
        );
        assert!((fidelity_density(&DensityMatrix5::maximally_mixed()) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn noiseless_density_matches_pure_state() {
        let p = SystemParams::reference();
        let pp = PulseParams::reference();
        let cfg = IntegratorConfig::default();
        let init = FluctuationState::excited(ModeIndex::Membrane1);
        let traj = integrate_pure(&init, &pp, &p, false, &cfg).unwrap();
        let rho = propagate_density(
            &DensityMatrix5::pure(&init),
            &pp,
            &p,
            &NoiseConfig::with_mu(0.0),
            &cfg,
        )
        .unwrap();
        let expected = DensityMatrix5::pure(&traj.final_fluctuation());
        let diff = (rho.0 - expected.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
        assert!((fidelity_density(&rho) - fidelity_pure(&traj)).abs() < 1e-8);
    }

    #[test]
    fn noise_dephases_but_keeps_trace() {
        let p = SystemParams::reference();
        let pp = PulseParams::reference();
        let cfg = IntegratorConfig::default();
        let init = DensityMatrix5::excited(ModeIndex::Membrane1);
        let (clean, _) =
            propagate_density_with_diagnostics(&init, &pp, &p, &NoiseConfig::with_mu(0.0), &cfg)
                .unwrap();
        let (noisy, diag) =
            propagate_density_with_diagnostics(&init, &pp, &p, &NoiseConfig::with_mu(0.05), &cfg)
                .unwrap();
        assert!(fidelity_density(&noisy) < fidelity_density(&clean));
        assert!((noisy.trace() - C64::from(1.0)).norm() < 1e-9);
        assert!(diag.max_hermiticity_error < 1e-10);
        assert!(diag.purity_nonincreasing);
        assert!(noisy.eigenvalues()[0] > -1e-9);
    }

    #[test]
    fn novikov_prefactor_is_weaker() {
        let p = SystemParams::reference();
        let pp = PulseParams::reference();
        let cfg = IntegratorConfig::with_steps(2000);
        let init = DensityMatrix5::excited(ModeIndex::Membrane1);
        let published =
            propagate_density(&init, &pp, &p, &NoiseConfig::with_mu(0.1), &cfg).unwrap();
        let novikov = NoiseConfig {
            prefactor: NoisePrefactor::Novikov,
            ..NoiseConfig::with_mu(0.1)
        };
        let halved = propagate_density(&init, &pp, &p, &novikov, &cfg).unwrap();
        assert!(fidelity_density(&halved) > fidelity_density(&published));
    }

    #[test]
    fn negative_mu_rejected() {
        let r = propagate_density(
            &DensityMatrix5::excited(ModeIndex::Membrane1),
            &PulseParams::reference(),
            &SystemParams::reference(),
            &NoiseConfig::with_mu(-0.1),
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidParameter { name: "mu", .. })));
    }
}
