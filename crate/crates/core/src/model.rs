//! Coupled-mode model of the linearized fluctuations.
//!
//! The fluctuation vector is ordered `(δa_L, δa_M, δa_R, δb_1, δb_2)` and
//! obeys `i dΨ/dt = M(t) Ψ`. The middle cavity sits in slot 2: it is the mode
//! that carries both tunneling rates, and the dark vector `ψ3 = (δa_L −
//! δa_R)/√2` only decouples from the tunneling with this ordering.

use std::f64::consts::SQRT_2;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub type Matrix5 = SMatrix<C64, 5, 5>;
pub type Matrix3 = SMatrix<C64, 3, 3>;
pub type Vector5 = SVector<C64, 5>;
pub type Vector3 = SVector<C64, 3>;

/// Index of each fluctuation mode in the state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeIndex {
    CavityLeft = 0,
    CavityMiddle = 1,
    CavityRight = 2,
    Membrane1 = 3,
    Membrane2 = 4,
}

impl ModeIndex {
    pub const ALL: [ModeIndex; 5] = [
        ModeIndex::CavityLeft,
        ModeIndex::CavityMiddle,
        ModeIndex::CavityRight,
        ModeIndex::Membrane1,
        ModeIndex::Membrane2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Physical constants of the coupled-mode model, all in units of `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SystemParams {
    pub g1: f64,
    pub g2: f64,
    pub j1: f64,
    pub j2: f64,
    /// Common detuning Δ₀, equal to the mechanical frequencies in the RWA regime.
    pub delta0: f64,
    pub gamma_l: f64,
    pub gamma_m: f64,
    pub gamma_r: f64,
    pub gamma_m1: f64,
    pub gamma_m2: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl SystemParams {
    /// `g1 = g2 = 1`, `J = 50`, `Δ₀ = 100`, no decay.
    pub fn reference() -> Self {
        Self {
            g1: 1.0,
            g2: 1.0,
            j1: 50.0,
            j2: 50.0,
            delta0: 100.0,
            gamma_l: 0.0,
            gamma_m: 0.0,
            gamma_r: 0.0,
            gamma_m1: 0.0,
            gamma_m2: 0.0,
        }
    }

    pub fn with_tunneling(mut self, j: f64) -> Self {
        self.j1 = j;
        self.j2 = j;
        self
    }

    /// Same cavity decay rate on all three subcavities and the same
    /// dissipation rate on both membranes.
    pub fn with_uniform_decay(mut self, cavity: f64, membrane: f64) -> Self {
        self.gamma_l = cavity;
        self.gamma_m = cavity;
        self.gamma_r = cavity;
        self.gamma_m1 = membrane;
        self.gamma_m2 = membrane;
        self
    }

    pub fn without_decay(self) -> Self {
        self.with_uniform_decay(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g1", self.g1), ("g2", self.g2), ("delta0", self.delta0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        let rates = [
            ("j1", self.j1),
            ("j2", self.j2),
            ("gammaL", self.gamma_l),
            ("gammaM", self.gamma_m),
            ("gammaR", self.gamma_r),
            ("gammaM1", self.gamma_m1),
            ("gammaM2", self.gamma_m2),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Decay rates in state order.
    pub fn decay_rates(&self) -> [f64; 5] {
        [
            self.gamma_l,
            self.gamma_m,
            self.gamma_r,
            self.gamma_m1,
            self.gamma_m2,
        ]
    }

    pub fn is_lossless(&self) -> bool {
        self.decay_rates().iter().all(|&g| g == 0.0)
    }

    /// The common tunneling rate, if `J1 = J2`.
    pub fn symmetric_tunneling(&self) -> Result<f64> {
        if self.j1 == self.j2 {
            Ok(self.j1)
        } else {
            Err(Error::AsymmetricTunneling {
                j1: self.j1,
                j2: self.j2,
            })
        }
    }

    /// Whether `J_k = ω_{m,k} / 2` holds with `ω_{m,k} = Δ₀`, the condition
    /// for the coupling to be linear in the displacement quadrature.
    pub fn tunneling_consistent(&self) -> bool {
        let half = 0.5 * self.delta0;
        let tol = 1e-12 * half.max(1.0);
        (self.j1 - half).abs() <= tol && (self.j2 - half).abs() <= tol
    }
}

/// Amplitudes of the five fluctuation operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluctuationState(pub Vector5);

impl FluctuationState {
    pub fn new(amp: [C64; 5]) -> Self {
        Self(Vector5::from(amp))
    }

    /// Unit excitation in a single mode.
    pub fn excited(mode: ModeIndex) -> Self {
        let mut v = Vector5::zeros();
        v[mode.index()] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn amplitude(&self, mode: ModeIndex) -> C64 {
        self.0[mode.index()]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `|amplitude|²` per mode, in state order.
    pub fn occupations(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.0[i].norm_sqr())
    }
}

/// Orthonormal basis of the zero-eigenvalue subspace of the tunneling matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZenoBasis {
    pub psi1: Vector5,
    pub psi2: Vector5,
    pub psi3: Vector5,
}

impl Default for ZenoBasis {
    fn default() -> Self {
        Self::new()
    }
}

impl ZenoBasis {
    pub fn new() -> Self {
        let one = C64::new(1.0, 0.0);
        let h = C64::new(1.0 / SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        Self {
            psi1: Vector5::from([z, z, z, one, z]),
            psi2: Vector5::from([z, z, z, z, one]),
            psi3: Vector5::from([h, z, -h, z, z]),
        }
    }

    pub fn vectors(&self) -> [&Vector5; 3] {
        [&self.psi1, &self.psi2, &self.psi3]
    }

    /// Components `⟨ψ_i|v⟩`.
    pub fn project(&self, v: &Vector5) -> Vector3 {
        Vector3::from(self.vectors().map(|psi| psi.dotc(v)))
    }

    /// `Σ c_i ψ_i`.
    pub fn embed(&self, c: &Vector3) -> Vector5 {
        self.psi1 * c[0] + self.psi2 * c[1] + self.psi3 * c[2]
    }

    /// `|⟨ψ3|v⟩|²`, the occupancy of the intermediate state.
    pub fn intermediate_occupancy(&self, v: &Vector5) -> f64 {
        self.psi3.dotc(v).norm_sqr()
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn set_sym(m: &mut Matrix5, i: usize, j: usize, v: f64) {
    m[(i, j)] = re(v);
    m[(j, i)] = re(v);
}

/// Interaction matrix `M(t)` for effective couplings `ga_l = g1·α_L` and
/// `ga_r = g2·α_R` at one instant. Decay enters as `−iγ/2` on the diagonal.
pub fn interaction_matrix(p: &SystemParams, ga_l: f64, ga_r: f64) -> Matrix5 {
    let mut m = lossless_interaction_matrix(p, ga_l, ga_r);
    for (i, gamma) in p.decay_rates().into_iter().enumerate() {
        m[(i, i)] = C64::new(0.0, -0.5 * gamma);
    }
    m
}

/// `M(t)` with all decay rates dropped. Hermitian.
pub fn lossless_interaction_matrix(p: &SystemParams, ga_l: f64, ga_r: f64) -> Matrix5 {
    let mut m = Matrix5::zeros();
    set_sym(&mut m, 0, 1, -p.j1);
    set_sym(&mut m, 1, 2, -p.j2);
    set_sym(&mut m, 0, 3, -ga_l);
    set_sym(&mut m, 2, 4, ga_r);
    m
}

/// `M(γ=0) = Ω (M_p + K M_q)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZenoDecomposition {
    /// Optomechanical part `M_p`, normalized by `Ω`.
    pub coupling: Matrix5,
    /// Tunneling part `M_q`, normalized by `√2 J`.
    pub tunneling: Matrix5,
    /// Total coupling `Ω = √(ga_l² + ga_r²)`.
    pub omega: f64,
    /// Zeno ratio `K = √2 J / Ω`.
    pub zeno_ratio: f64,
}

impl ZenoDecomposition {
    pub fn reconstruct(&self) -> Matrix5 {
        (self.coupling + self.tunneling * re(self.zeno_ratio)) * re(self.omega)
    }
}

pub fn zeno_decompose(p: &SystemParams, ga_l: f64, ga_r: f64) -> Result<ZenoDecomposition> {
    let j = p.symmetric_tunneling()?;
    let omega = ga_l.hypot(ga_r);
    if omega == 0.0 {
        return Err(Error::DegenerateDecomposition);
    }
    let mut coupling = Matrix5::zeros();
    set_sym(&mut coupling, 0, 3, -ga_l / omega);
    set_sym(&mut coupling, 2, 4, ga_r / omega);
    let mut tunneling = Matrix5::zeros();
    set_sym(&mut tunneling, 0, 1, -1.0 / SQRT_2);
    set_sym(&mut tunneling, 1, 2, -1.0 / SQRT_2);
    Ok(ZenoDecomposition {
        coupling,
        tunneling,
        omega,
        zeno_ratio: SQRT_2 * j / omega,
    })
}

/// Effective matrix in the dark basis `(ψ1, ψ2, ψ3)`.
pub fn effective_matrix(ga_l: f64, ga_r: f64) -> Matrix3 {
    let mut m = Matrix3::zeros();
    m[(0, 2)] = re(-ga_l / SQRT_2);
    m[(2, 0)] = m[(0, 2)];
    m[(1, 2)] = re(-ga_r / SQRT_2);
    m[(2, 1)] = m[(1, 2)];
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn coupling_free_limit_has_only_tunneling() {
        let p = SystemParams::reference().with_tunneling(2.0);
        let m = interaction_matrix(&p, 0.0, 0.0);
        for i in 0..5 {
            for j in 0..5 {
                let expected = match (i.min(j), i.max(j)) {
                    (0, 1) | (1, 2) => -2.0,
                    _ => 0.0,
                };
                assert_eq!(m[(i, j)], re(expected), "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn decay_on_diagonal() {
        let mut p = SystemParams::reference();
        p.gamma_l = 0.2;
        let m = interaction_matrix(&p, 0.0, 0.0);
        assert_eq!(m[(0, 0)], C64::new(0.0, -0.1));
        assert!(m.adjoint() != m);
    }

    #[test]
    fn coupling_signs_and_hermiticity() {
        let p = SystemParams::reference();
        let m = interaction_matrix(&p, 1.0, 3.0);
        assert_eq!(m[(0, 3)], re(-1.0));
        assert_eq!(m[(3, 0)], re(-1.0));
        assert_eq!(m[(2, 4)], re(3.0));
        assert_eq!(m[(4, 2)], re(3.0));
        assert_eq!(m.adjoint(), m);
    }

    #[test]
    fn zeno_ratio_formula() {
        let p = SystemParams::reference().with_tunneling(5.0);
        let d = zeno_decompose(&p, 1.0, 0.0).unwrap();
        assert!((d.zeno_ratio - SQRT_2 * 5.0).abs() < 1e-15);
        assert!((d.zeno_ratio - 7.0711).abs() < 1e-4);
    }

    #[test]
    fn decomposition_reconstructs_builder() {
        let p = SystemParams::reference().with_tunneling(10.0);
        let d = zeno_decompose(&p, 3.0, 4.0).unwrap();
        assert_eq!(d.omega, 5.0);
        let diff = d.reconstruct() - lossless_interaction_matrix(&p, 3.0, 4.0);
        assert!(max_abs(&diff) < 1e-12);
    }

    #[test]
    fn tunneling_part_spectrum() {
        let p = SystemParams::reference();
        let d = zeno_decompose(&p, 1.0, 1.0).unwrap();
        let mut ev: Vec<f64> = d
            .tunneling
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-1.0, 0.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn degenerate_and_asymmetric_decompositions() {
        let p = SystemParams::reference();
        assert!(matches!(
            zeno_decompose(&p, 0.0, 0.0),
            Err(Error::DegenerateDecomposition)
        ));
        let mut q = p;
        q.j2 = 40.0;
        assert!(matches!(
            zeno_decompose(&q, 1.0, 0.0),
            Err(Error::AsymmetricTunneling { .. })
        ));
    }

    #[test]
    fn effective_matrix_entries() {
        assert_eq!(effective_matrix(0.0, 0.0), Matrix3::zeros());
        let m = effective_matrix(SQRT_2, 0.0);
        assert!((m[(0, 2)] - re(-1.0)).norm() < 1e-15);
        assert_eq!(m[(2, 0)], m[(0, 2)]);
    }

    #[test]
    fn effective_matrix_is_dark_projection() {
        let basis = ZenoBasis::new();
        for j in [0.5, 50.0, 1e3] {
            let p = SystemParams::reference().with_tunneling(j);
            let m = lossless_interaction_matrix(&p, 1.0, 2.0);
            let vs = basis.vectors();
            let projected = Matrix3::from_fn(|r, c| vs[r].dotc(&(m * vs[c])));
            assert!(max_abs(&(projected - effective_matrix(1.0, 2.0))) < 1e-14);
        }
    }

    #[test]
    fn basis_is_orthonormal_and_dark() {
        let b = ZenoBasis::new();
        let vs = b.vectors();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((vs[i].dotc(vs[j]) - re(expected)).norm() < 1e-15);
            }
        }
        let q = zeno_decompose(&SystemParams::reference(), 1.0, 0.0)
            .unwrap()
            .tunneling;
        for v in vs {
            assert!((q * v).norm() < 1e-15);
        }
        let c = Vector3::from([re(0.6), C64::new(0.0, 0.8), re(0.0)]);
        assert!((b.project(&b.embed(&c)) - c).norm() < 1e-15);
    }

    #[test]
    fn param_validation() {
        let p = SystemParams::reference();
        assert!(p.validate().is_ok());
        assert!(p.tunneling_consistent());
        assert!(!p.with_tunneling(40.0).tunneling_consistent());
        let mut bad = p;
        bad.delta0 = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = p;
        bad.gamma_m = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn occupations_sum_to_norm_squared() {
        let s = FluctuationState::new([
            re(0.1),
            C64::new(0.0, 0.2),
            re(-0.3),
            C64::new(0.4, 0.1),
            re(0.5),
        ]);
        let total: f64 = s.occupations().iter().sum();
        assert!((total - s.norm().powi(2)).abs() < 1e-15);
        assert_eq!(
            FluctuationState::excited(ModeIndex::Membrane1).occupations(),
            [0.0, 0.0, 0.0, 1.0, 0.0]
        );
    }
}
