use super::linesearch::{armijo_linesearch, LineSearchOutcome};
use super::rtr;
use super::{
    eval_checked, riemannian_grad, InnerOutcome, SmoothedObjective, StopReason, SubAlgorithm,
};
use crate::error::Result;
use crate::manifolds::{Ambient, Manifold};

/// Clamp bounds for the Barzilai-Borwein step.
pub const BB_STEP_MIN: f64 = 1e-10;
pub const BB_STEP_MAX: f64 = 1e10;

/// A safeguarded BB1 step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbStep {
    pub step: f64,
    /// Set when <s, y> was non-positive or non-finite and the caller
    /// should fall back to its Armijo default.
    pub fallback: bool,
    /// Set when the raw quotient was clamped into
    /// [`BB_STEP_MIN`, `BB_STEP_MAX`].
    pub clamped: bool,
}

/// BB1 step <s, s>/<s, y> from the transported displacement `s` and the
/// gradient difference `y`.
pub fn bb_step<A: Ambient>(s: &A, y: &A) -> BbStep {
    let ss = s.dot(s);
    let sy = s.dot(y);
    if !ss.is_finite() || !sy.is_finite() || sy <= 0.0 || ss == 0.0 {
        return BbStep {
            step: 1.0,
            fallback: true,
            clamped: false,
        };
    }
    let raw = ss / sy;
    let step = raw.clamp(BB_STEP_MIN, BB_STEP_MAX);
    BbStep {
        step,
        fallback: false,
        clamped: step != raw,
    }
}

/// A Polak-Ribiere+ conjugate-gradient direction.
#[derive(Debug, Clone)]
pub struct CgDirection<A> {
    pub direction: A,
    pub beta: f64,
    /// Set when the combined direction was not a sufficient descent
    /// direction and the method fell back to steepest descent.
    pub restarted: bool,
}

/// PR+ direction: d = -g + beta * d_prev with
/// beta = max(0, <g, g - g_prev>/<g_prev, g_prev>), restarting to -g when
/// d loses descent.
pub fn cg_direction<A: Ambient>(
    g: &A,
    g_prev_transported: &A,
    d_prev_transported: &A,
    g_prev_norm_sq: f64,
) -> CgDirection<A> {
    let gnorm = g.norm();
    if !g_prev_norm_sq.is_finite() || g_prev_norm_sq <= 0.0 {
        return CgDirection {
            direction: g.scaled(-1.0),
            beta: 0.0,
            restarted: true,
        };
    }
    let beta = ((g.dot(g) - g.dot(g_prev_transported)) / g_prev_norm_sq).max(0.0);
    let direction = g.scaled(-1.0).add_scaled(beta, d_prev_transported);
    let descent = direction.dot(g);
    if descent >= -1e-12 * direction.norm() * gnorm {
        return CgDirection {
            direction: g.scaled(-1.0),
            beta,
            restarted: true,
        };
    }
    CgDirection {
        direction,
        beta,
        restarted: false,
    }
}

/// Memory carried between first-order iterations, already transported to
/// the current iterate.
struct Memory<A> {
    /// Displacement tangent of the accepted step.
    s: A,
    /// Previous Riemannian gradient.
    g_prev: A,
    /// Previous search direction.
    d_prev: A,
    /// ‖g_prev‖² taken at the previous point, before transport.
    g_prev_norm_sq: f64,
}

pub(crate) fn inner_solve<M, O>(
    obj: &O,
    manifold: &M,
    x0: M::Point,
    mu: f64,
    grad_tol: Option<f64>,
    iter_cap: usize,
    alg: SubAlgorithm,
) -> Result<InnerOutcome<M>>
where
    M: Manifold,
    O: SmoothedObjective<M>,
{
    match alg {
        SubAlgorithm::Rtr => rtr::rtr_inner(obj, manifold, x0, mu, grad_tol, iter_cap),
        SubAlgorithm::Sd | SubAlgorithm::Bb | SubAlgorithm::Cg => {
            first_order_inner(obj, manifold, x0, mu, grad_tol, iter_cap, alg)
        }
    }
}

fn first_order_inner<M, O>(
    obj: &O,
    manifold: &M,
    x0: M::Point,
    mu: f64,
    grad_tol: Option<f64>,
    iter_cap: usize,
    alg: SubAlgorithm,
) -> Result<InnerOutcome<M>>
where
    M: Manifold,
    O: SmoothedObjective<M>,
{
    let mut x = x0;
    let mut value = eval_checked(obj, &x, mu)?;
    let mut grad = riemannian_grad(obj, manifold, &x, mu)?;
    let mut grad_norm = grad.norm();
    let mut memory: Option<Memory<M::Tangent>> = None;
    let mut prev_step = 1.0f64;
    let mut iters = 0;
    let mut stagnated = false;

    let reason = loop {
        if grad_tol.is_some_and(|tol| grad_norm < tol) {
            break StopReason::TolMet;
        }
        if iters >= iter_cap {
            break StopReason::CapHit;
        }
        if grad_norm == 0.0 {
            // Exact first-order point; only relevant in basic mode where
            // no tolerance would have caught it.
            stagnated = true;
            break StopReason::CapHit;
        }

        let (direction, initial_step) = match (alg, &memory) {
            (SubAlgorithm::Sd, _) | (SubAlgorithm::Cg, None) | (SubAlgorithm::Bb, None) => (
                grad.scaled(-1.0),
                first_order_default_step(iters, prev_step),
            ),
            (SubAlgorithm::Cg, Some(mem)) => {
                let cg = cg_direction(&grad, &mem.g_prev, &mem.d_prev, mem.g_prev_norm_sq);
                (cg.direction, first_order_default_step(iters, prev_step))
            }
            (SubAlgorithm::Bb, Some(mem)) => {
                let y = grad.add_scaled(-1.0, &mem.g_prev);
                let bb = bb_step(&mem.s, &y);
                let step = if bb.fallback {
                    first_order_default_step(iters, prev_step)
                } else {
                    bb.step
                };
                (grad.scaled(-1.0), step)
            }
            (SubAlgorithm::Rtr, _) => unreachable!("rtr dispatched separately"),
        };

        let g0 = direction.dot(&grad);
        let outcome = armijo_linesearch(
            manifold,
            |p: &M::Point| obj.eval(p, mu),
            &x,
            &direction,
            value,
            g0,
            initial_step,
        )?;
        match outcome {
            LineSearchOutcome::Accepted {
                step,
                point,
                value: new_value,
                ..
            } => {
                let g_prev_norm_sq = grad_norm * grad_norm;
                let s_at_old = direction.scaled(step);
                let new_grad = riemannian_grad(obj, manifold, &point, mu)?;
                memory = Some(Memory {
                    s: manifold.transport(&point, &s_at_old)?,
                    g_prev: manifold.transport(&point, &grad)?,
                    d_prev: manifold.transport(&point, &direction)?,
                    g_prev_norm_sq,
                });
                x = point;
                value = new_value;
                grad = new_grad;
                grad_norm = grad.norm();
                prev_step = step;
                iters += 1;
            }
            LineSearchOutcome::Stagnated => {
                stagnated = true;
                break StopReason::CapHit;
            }
        }
    };

    Ok(InnerOutcome {
        point: x,
        value,
        grad_norm,
        iters,
        reason,
        stagnated,
    })
}

/// Initial trial step for the Armijo search: 1 on the first iteration,
/// twice the previously accepted step afterwards.
fn first_order_default_step(iters: usize, prev_step: f64) -> f64 {
    if iters == 0 {
        1.0
    } else {
        2.0 * prev_step
    }
}
