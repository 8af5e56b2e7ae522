use crate::error::{Error, Result};
use crate::manifolds::{Ambient, Manifold};

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C: f64 = 1e-4;

/// Step halvings attempted before a search is declared dead.
pub const MAX_HALVINGS: usize = 60;

/// Result of a backtracking search.
#[derive(Debug, Clone)]
pub enum LineSearchOutcome<P> {
    Accepted {
        step: f64,
        point: P,
        value: f64,
        /// Objective evaluations spent.
        evals: usize,
    },
    /// No acceptable step after [`MAX_HALVINGS`] halvings.
    Stagnated,
}

/// Backtracking Armijo line search along a descent direction.
///
/// Starting from `initial_step` the step is halved until
/// f(R(x, t d)) <= f0 + c t g0 with a finite value; `g0` is the
/// directional derivative of the smoothed objective along `d` and must be
/// negative. Trial points where the retraction fails or the objective is
/// non-finite just trigger another halving.
pub fn armijo_linesearch<M, F>(
    manifold: &M,
    f: F,
    x: &M::Point,
    d: &M::Tangent,
    f0: f64,
    g0: f64,
    initial_step: f64,
) -> Result<LineSearchOutcome<M::Point>>
where
    M: Manifold,
    F: Fn(&M::Point) -> f64,
{
    if g0.is_nan() || g0 >= 0.0 {
        return Err(Error::NotDescentDirection(g0));
    }
    let mut t = if initial_step.is_finite() && initial_step > 0.0 {
        initial_step
    } else {
        1.0
    };
    let mut evals = 0;
    for _ in 0..=MAX_HALVINGS {
        if let Ok(point) = manifold.retract(x, &d.scaled(t)) {
            let value = f(&point);
            evals += 1;
            if value.is_finite() && value <= f0 + ARMIJO_C * t * g0 {
                return Ok(LineSearchOutcome::Accepted {
                    step: t,
                    point,
                    value,
                    evals,
                });
            }
        }
        t *= 0.5;
    }
    Ok(LineSearchOutcome::Stagnated)
}
