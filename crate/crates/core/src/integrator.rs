//! Classical fourth-order Runge-Kutta with a fixed number of steps.

use nalgebra::SMatrix;

use crate::{Result, C64};

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` in `steps` equal steps and
/// calls `observe` at the start time and after every step.
///
/// Works for state vectors (`C = 1`) and density matrices alike.
pub fn rk4<const R: usize, const C: usize, F, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: SMatrix<C64, R, C>,
    steps: usize,
    mut observe: O,
) -> Result<SMatrix<C64, R, C>>
where
    F: FnMut(f64, &SMatrix<C64, R, C>) -> Result<SMatrix<C64, R, C>>,
    O: FnMut(f64, &SMatrix<C64, R, C>),
{
    assert!(steps > 0, "rk4 needs at least one step");
    let h = (t1 - t0) / steps as f64;
    let half = C64::from(0.5 * h);
    let full = C64::from(h);
    let sixth = C64::from(h / 6.0);
    let two = C64::from(2.0);

    let mut y = y0;
    observe(t0, &y);
    for k in 0..steps {
        let t = t0 + h * k as f64;
        // Land exactly on t1 so the last observation sits on the window edge.
        let t_next = if k + 1 == steps {
            t1
        } else {
            t0 + h * (k + 1) as f64
        };
        let tm = t + 0.5 * h;
        let k1 = f(t, &y)?;
        let k2 = f(tm, &(y + k1 * half))?;
        let k3 = f(tm, &(y + k2 * half))?;
        let k4 = f(t_next, &(y + k3 * full))?;
        y += (k1 + k2 * two + k3 * two + k4) * sixth;
        observe(t_next, &y);
    }
    Ok(y)
}
