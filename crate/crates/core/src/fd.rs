//! Central finite differences, used by gradient self-checks and tests as
//! an oracle independent of the analytic gradient path.

use crate::manifolds::Ambient;

/// Central-difference gradient of `f` at `x`, perturbing each entry by
/// `h`.
pub fn fd_gradient<A: Ambient>(f: impl Fn(&A) -> f64, x: &A, h: f64) -> A {
    let mut g = x.scaled(0.0);
    for i in 0..x.n_entries() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        *xp.entry_mut(i) += h;
        *xm.entry_mut(i) -= h;
        *g.entry_mut(i) = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Relative disagreement ‖fd - analytic‖ / max(1, ‖analytic‖) between the
/// finite-difference gradient of `f` and a supplied analytic gradient.
pub fn relative_gradient_error<A: Ambient>(
    f: impl Fn(&A) -> f64,
    analytic: &A,
    x: &A,
    h: f64,
) -> f64 {
    let fd = fd_gradient(f, x, h);
    fd.add_scaled(-1.0, analytic).norm() / analytic.norm().max(1.0)
}

/// Step size 1e-6 (1 + ‖x‖), the scale used throughout the gradient
/// checks.
pub fn default_step<A: Ambient>(x: &A) -> f64 {
    1e-6 * (1.0 + x.norm())
}
