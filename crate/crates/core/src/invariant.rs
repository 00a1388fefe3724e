//! The dynamical invariant of the dark-subspace dynamics and its
//! zero-eigenvalue eigenvector.
//!
//! With `i dv/dt = M_eff v`, an operator `I(t)` is invariant when
//! `∂_t I + i[M_eff, I] = 0`. The couplings from
//! [`couplings_from_angles`](crate::pulse::couplings_from_angles) make the
//! invariant below satisfy this exactly, and the zero-eigenvalue eigenvector
//! then evolves without acquiring any phase.

use nalgebra::Matrix3 as M3;

use crate::model::{effective_matrix, Matrix3, Vector3, Vector5, ZenoBasis};
use crate::pulse::{
    angles, effective_couplings, uniform_grid, Angles, Couplings, PulseParams, DEFAULT_SAMPLES,
};
use crate::{Result, C64};

/// Invariant in the dark basis `(ψ1, ψ2, ψ3)` for one pair of angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantMatrix {
    pub mat: Matrix3,
    pub theta: f64,
    pub phi: f64,
}

pub fn build_invariant(theta: f64, phi: f64) -> InvariantMatrix {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let z = C64::from(0.0);
    let a = C64::from(cp * st);
    let b = C64::from(cp * ct);
    let s = C64::new(0.0, sp);
    #[rustfmt::skip]
    let mat = M3::new(
        z,  -s, a,
        s,  z,  b,
        a,  b,  z,
    );
    InvariantMatrix { mat, theta, phi }
}

/// `∂_t I` by the chain rule through `θ̇` and `φ̇`.
pub fn invariant_time_derivative(a: &Angles) -> Matrix3 {
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    let z = C64::from(0.0);
    let da = C64::from(-sp * a.phi_dot * st + cp * ct * a.theta_dot);
    let db = C64::from(-sp * a.phi_dot * ct - cp * st * a.theta_dot);
    let ds = C64::new(0.0, cp * a.phi_dot);
    #[rustfmt::skip]
    let m = M3::new(
        z,   -ds, da,
        ds,  z,   db,
        da,  db,  z,
    );
    m
}

/// Zero-eigenvalue eigenvector `(cos φ cos θ, −cos φ sin θ, −i sin φ)`,
/// with the overall sign chosen so the `ψ1` component is non-negative.
pub fn dark_eigenvector(theta: f64, phi: f64) -> Vector3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let v = Vector3::new(C64::from(cp * ct), C64::from(-cp * st), C64::new(0.0, -sp));
    if v[0].re < 0.0 {
        -v
    } else {
        v
    }
}

/// Time derivative of the unsigned eigenvector formula.
fn dark_eigenvector_derivative(a: &Angles) -> Vector3 {
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    Vector3::new(
        C64::from(-sp * a.phi_dot * ct - cp * st * a.theta_dot),
        C64::from(sp * a.phi_dot * st - cp * ct * a.theta_dot),
        C64::new(0.0, -cp * a.phi_dot),
    )
}

/// The analytic dark-path state embedded in the five-mode space.
pub fn dark_path_state(t: f64, pp: &PulseParams) -> Vector5 {
    let a = angles(t, pp);
    ZenoBasis::new().embed(&dark_eigenvector(a.theta, a.phi))
}

fn max_abs(m: &Matrix3) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |∂_t I + i[M_eff, I]|` for arbitrary couplings along an angle path.
pub fn von_neumann_residual_for(a: &Angles, c: &Couplings) -> f64 {
    let inv = build_invariant(a.theta, a.phi).mat;
    let m = effective_matrix(c.left, c.right);
    let commutator = m * inv - inv * m;
    max_abs(&(invariant_time_derivative(a) + commutator * C64::i()))
}

/// Residual of the invariance condition with the designed couplings at `t`.
pub fn von_neumann_residual(t: f64, pp: &PulseParams) -> Result<f64> {
    let c = effective_couplings(t, pp)?;
    Ok(von_neumann_residual_for(&angles(t, pp), &c))
}

/// `⟨φ₀| i∂_t − M_eff |φ₀⟩` along the designed path.
pub fn phase_integrand(t: f64, pp: &PulseParams) -> Result<C64> {
    let c = effective_couplings(t, pp)?;
    let a = angles(t, pp);
    // Unsigned formula: the sign flip in `dark_eigenvector` is global and
    // cancels in the expectation values below.
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    let v = Vector3::new(C64::from(cp * ct), C64::from(-cp * st), C64::new(0.0, -sp));
    let dv = dark_eigenvector_derivative(&a);
    let m = effective_matrix(c.left, c.right);
    Ok(C64::i() * v.dotc(&dv) - v.dotc(&(m * v)))
}

/// Lewis-Riesenfeld phase of the dark eigenvector over the full pulse,
/// by composite Simpson quadrature on the default grid.
pub fn lewis_riesenfeld_phase(pp: &PulseParams) -> Result<f64> {
    lewis_riesenfeld_phase_on(pp, DEFAULT_SAMPLES)
}

/// As [`lewis_riesenfeld_phase`] on `n` grid points (rounded up to odd).
pub fn lewis_riesenfeld_phase_on(pp: &PulseParams, n: usize) -> Result<f64> {
    pp.validate()?;
    let n = if n.is_multiple_of(2) { n + 1 } else { n.max(3) };
    let ts = uniform_grid(pp.start(), pp.end(), n);
    let values = ts
        .iter()
        .map(|&t| phase_integrand(t, pp))
        .collect::<Result<Vec<_>>>()?;
    let h = pp.total_time / (n - 1) as f64;
    let sum: C64 = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = if k == 0 || k == n - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            v * w
        })
        .sum();
    Ok((sum * (h / 3.0)).re)
}
