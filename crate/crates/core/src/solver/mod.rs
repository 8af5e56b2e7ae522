//! Riemannian smoothing outer loops over a pluggable smoothed objective.
//!
//! The basic loop approximately minimizes f~(x, mu_k) for a decreasing
//! sequence mu_{k+1} = theta * mu_k, warm-starting each subproblem at the
//! previous iterate. The enhanced loop additionally requires the inner
//! solver to drive the Riemannian gradient norm below a tolerance delta_k
//! before mu shrinks. Sub-algorithms: steepest descent with Armijo
//! backtracking, safeguarded Barzilai-Borwein, Polak-Ribiere+ conjugate
//! gradient, and a trust-region method with finite-difference
//! Hessian-vector products.

mod linesearch;
mod rtr;
mod subalg;

pub use linesearch::{armijo_linesearch, LineSearchOutcome, ARMIJO_C, MAX_HALVINGS};
pub use rtr::{fd_hessian_vec, rtr_subproblem, TcgOutcome};
pub use subalg::{bb_step, cg_direction, BbStep, CgDirection};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::{Ambient, Manifold};
use crate::smoothing::MU_FLOOR;

/// A smoothed objective f~(., mu) with its Euclidean gradient, tied to the
/// manifold it is minimized over.
///
/// Both methods expect `mu >= MU_FLOOR`; [`solve_smoothed`] never calls
/// them outside that range.
pub trait SmoothedObjective<M: Manifold> {
    fn manifold(&self) -> &M;

    /// f~(x, mu).
    fn eval(&self, x: &M::Point, mu: f64) -> f64;

    /// Gradient of f~(., mu) in the ambient space.
    fn euclidean_grad(&self, x: &M::Point, mu: f64) -> M::Tangent;
}

/// Inner sub-algorithm choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubAlgorithm {
    /// Steepest descent with Armijo backtracking.
    Sd,
    /// Gradient descent with a safeguarded Barzilai-Borwein step.
    Bb,
    /// Polak-Ribiere+ conjugate gradient with restarts.
    Cg,
    /// Trust regions with Steihaug-Toint truncated CG.
    Rtr,
}

impl SubAlgorithm {
    pub const ALL: [SubAlgorithm; 4] = [
        SubAlgorithm::Sd,
        SubAlgorithm::Bb,
        SubAlgorithm::Cg,
        SubAlgorithm::Rtr,
    ];
}

impl std::fmt::Display for SubAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SubAlgorithm::Sd => "sd",
            SubAlgorithm::Bb => "bb",
            SubAlgorithm::Cg => "cg",
            SubAlgorithm::Rtr => "rtr",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SubAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sd" => Ok(SubAlgorithm::Sd),
            "bb" => Ok(SubAlgorithm::Bb),
            "cg" => Ok(SubAlgorithm::Cg),
            "rtr" => Ok(SubAlgorithm::Rtr),
            other => Err(Error::Domain(format!(
                "unknown sub-algorithm '{other}' (expected sd|bb|cg|rtr)"
            ))),
        }
    }
}

/// Schedule for the inner gradient tolerances delta_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule")]
pub enum DeltaRule {
    /// delta_k = gamma * mu_k: the tolerance tracks the smoothing level.
    Adaptive { gamma: f64 },
    /// delta_{k+1} = rho * delta_k from an initial delta_0.
    Geometric { delta0: f64, rho: f64 },
}

/// Basic mode runs each subproblem to its iteration cap; enhanced mode
/// stops it once the gradient norm drops below delta_k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Basic,
    Enhanced,
}

/// Outer-loop schedule and sub-algorithm selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mu0: f64,
    pub theta: f64,
    pub delta_rule: DeltaRule,
    pub mode: Mode,
    pub sub_algorithm: SubAlgorithm,
    /// Cap on the cumulative number of inner iterations across all outer
    /// steps; sub-algorithm iterations are what gets counted.
    pub max_total_iters: usize,
    /// Per-subproblem iteration cap.
    pub inner_iter_cap: usize,
    /// The outer loop stops once mu drops below this floor.
    pub mu_min: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Domain(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(Error::Domain(format!(
                "mu0 must be positive, got {}",
                self.mu0
            )));
        }
        if !(self.mu_min >= MU_FLOOR && self.mu_min < self.mu0) {
            return Err(Error::Domain(format!(
                "mu_min must satisfy {MU_FLOOR:e} <= mu_min < mu0, got {}",
                self.mu_min
            )));
        }
        match self.delta_rule {
            DeltaRule::Adaptive { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::Domain(format!(
                        "gamma must be positive, got {gamma}"
                    )));
                }
            }
            DeltaRule::Geometric { delta0, rho } => {
                if !(delta0 > 0.0 && delta0.is_finite()) {
                    return Err(Error::Domain(format!(
                        "delta0 must be positive, got {delta0}"
                    )));
                }
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(Error::Domain(format!("rho must lie in (0, 1), got {rho}")));
                }
            }
        }
        if self.max_total_iters == 0 || self.inner_iter_cap == 0 {
            return Err(Error::Domain("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why an inner solve returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Gradient norm below the requested tolerance.
    TolMet,
    /// Iteration cap (or, with `stagnated` set, a dead line search).
    CapHit,
}

/// One outer iteration of the smoothing loop.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub mu: f64,
    pub delta: f64,
    /// f~(x^k, mu_k) at the accepted iterate.
    pub value: f64,
    /// ‖grad f~(x^k, mu_k)‖ at the accepted iterate.
    pub grad_norm: f64,
    pub inner_iters: usize,
    pub reason: StopReason,
    pub stagnated: bool,
    /// Inner iterations accumulated over all outer steps so far.
    pub cumulative_iters: usize,
}

/// Per-outer-iteration history of a smoothing solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub outer: Vec<OuterRecord>,
}

impl SolveTrace {
    pub fn outer_iters(&self) -> usize {
        self.outer.len()
    }

    pub fn total_iters(&self) -> usize {
        self.outer.last().map_or(0, |r| r.cumulative_iters)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.outer.iter().map(|r| r.value)
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The caller's convergence test fired.
    Converged,
    /// mu fell below `mu_min`.
    MuFloor,
    /// The total iteration budget ran out.
    IterBudget,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Converged => "converged",
            Status::MuFloor => "mu_floor",
            Status::IterBudget => "iter_budget",
        };
        f.write_str(s)
    }
}

/// A finished smoothing solve.
#[derive(Debug, Clone)]
pub struct Solved<M: Manifold> {
    pub point: M::Point,
    pub trace: SolveTrace,
    pub status: Status,
}

pub(crate) struct InnerOutcome<M: Manifold> {
    pub point: M::Point,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub reason: StopReason,
    pub stagnated: bool,
}

/// Runs the smoothing outer loop from `x_init`.
///
/// Each subproblem min f~(x, mu_k) is warm-started at the previous outer
/// iterate. The loop stops when `converged` fires on the new iterate, when
/// mu falls below `cfg.mu_min`, or when the total iteration budget is
/// exhausted — whichever comes first.
pub fn solve_smoothed<M, O, F>(
    obj: &O,
    x_init: M::Point,
    cfg: &SolverConfig,
    mut converged: F,
) -> Result<Solved<M>>
where
    M: Manifold,
    O: SmoothedObjective<M>,
    F: FnMut(&M::Point, &SolveTrace) -> bool,
{
    cfg.validate()?;
    let manifold = obj.manifold();
    let mut trace = SolveTrace::default();
    let mut x = x_init;
    let mut mu = cfg.mu0;
    let mut delta = match cfg.delta_rule {
        DeltaRule::Adaptive { gamma } => gamma * mu,
        DeltaRule::Geometric { delta0, .. } => delta0,
    };
    let mut total = 0usize;

    let status = loop {
        if mu < cfg.mu_min {
            break Status::MuFloor;
        }
        let cap = cfg.inner_iter_cap.min(cfg.max_total_iters - total);
        let grad_tol = match cfg.mode {
            Mode::Enhanced => Some(delta),
            Mode::Basic => None,
        };
        let out = match subalg::inner_solve(obj, manifold, x, mu, grad_tol, cap, cfg.sub_algorithm)
        {
            Ok(out) => out,
            Err(err) => {
                return Err(Error::Numeric {
                    message: format!("inner solve failed at mu = {mu:.3e}: {err}"),
                    trace: Box::new(trace),
                })
            }
        };
        total += out.iters;
        x = out.point;
        trace.outer.push(OuterRecord {
            mu,
            delta,
            value: out.value,
            grad_norm: out.grad_norm,
            inner_iters: out.iters,
            reason: out.reason,
            stagnated: out.stagnated,
            cumulative_iters: total,
        });
        if converged(&x, &trace) {
            break Status::Converged;
        }
        if total >= cfg.max_total_iters {
            break Status::IterBudget;
        }
        mu *= cfg.theta;
        delta = match cfg.delta_rule {
            DeltaRule::Adaptive { gamma } => gamma * mu,
            DeltaRule::Geometric { rho, .. } => delta * rho,
        };
    };

    Ok(Solved {
        point: x,
        trace,
        status,
    })
}

pub(crate) fn riemannian_grad<M, O>(
    obj: &O,
    manifold: &M,
    x: &M::Point,
    mu: f64,
) -> Result<M::Tangent>
where
    M: Manifold,
    O: SmoothedObjective<M>,
{
    let egrad = obj.euclidean_grad(x, mu);
    if !egrad.is_finite() {
        return Err(Error::Domain(format!(
            "euclidean gradient has non-finite entries at mu = {mu:.3e}"
        )));
    }
    manifold.project(x, &egrad)
}

pub(crate) fn eval_checked<M, O>(obj: &O, x: &M::Point, mu: f64) -> Result<f64>
where
    M: Manifold,
    O: SmoothedObjective<M>,
{
    let value = obj.eval(x, mu);
    if !value.is_finite() {
        return Err(Error::Domain(format!(
            "objective value {value} at mu = {mu:.3e}"
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::Sphere;
    use crate::smoothing::AbsKind;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::cell::RefCell;

    /// Pseudo-Huber smoothing of |a . x| on the sphere: an AP1 family.
    struct HuberRay {
        manifold: Sphere,
        a: DVector<f64>,
    }

    impl SmoothedObjective<Sphere> for HuberRay {
        fn manifold(&self) -> &Sphere {
            &self.manifold
        }

        fn eval(&self, x: &DVector<f64>, mu: f64) -> f64 {
            AbsKind::F2.value(self.a.dot(x), mu).expect("mu validated")
        }

        fn euclidean_grad(&self, x: &DVector<f64>, mu: f64) -> DVector<f64> {
            &self.a * AbsKind::F2.deriv(self.a.dot(x), mu).expect("mu validated")
        }
    }

    fn huber(n: usize) -> HuberRay {
        let mut a = DVector::zeros(n);
        a[0] = 2.0;
        a[1] = -1.0;
        HuberRay {
            manifold: Sphere::new(n).unwrap(),
            a,
        }
    }

    fn base_config(alg: SubAlgorithm) -> SolverConfig {
        SolverConfig {
            mu0: 1.0,
            theta: 0.5,
            delta_rule: DeltaRule::Adaptive { gamma: 0.5 },
            mode: Mode::Enhanced,
            sub_algorithm: alg,
            max_total_iters: 2000,
            inner_iter_cap: 200,
            mu_min: 1e-8,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = base_config(SubAlgorithm::Sd);
        assert!(cfg.validate().is_ok());
        cfg.theta = 1.0;
        assert!(cfg.validate().is_err());
        cfg.theta = 0.5;
        cfg.mu_min = 1e-13;
        assert!(cfg.validate().is_err());
        cfg.mu_min = 2.0;
        assert!(cfg.validate().is_err());
        cfg.mu_min = 1e-8;
        cfg.delta_rule = DeltaRule::Geometric {
            delta0: 0.1,
            rho: 1.0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trivially_converged_after_one_outer_step() {
        let obj = huber(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        use crate::manifolds::Manifold as _;
        let x0 = obj.manifold.random_point(&mut rng);
        let solved = solve_smoothed(&obj, x0, &base_config(SubAlgorithm::Sd), |_, _| true).unwrap();
        assert_eq!(solved.status, Status::Converged);
        assert_eq!(solved.trace.outer_iters(), 1);
    }

    #[test]
    fn mu_schedule_is_exact_and_status_is_mu_floor() {
        let obj = huber(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use crate::manifolds::Manifold as _;
        let x0 = obj.manifold.random_point(&mut rng);
        let cfg = base_config(SubAlgorithm::Sd);
        let solved = solve_smoothed(&obj, x0, &cfg, |_, _| false).unwrap();
        assert_eq!(solved.status, Status::MuFloor);
        let mut mu = cfg.mu0;
        for rec in &solved.trace.outer {
            assert_eq!(rec.mu, mu);
            mu *= cfg.theta;
        }
        assert!(mu < cfg.mu_min);
    }

    #[test]
    fn delta_schedules_read_back_exactly() {
        let obj = huber(4);
        use crate::manifolds::Manifold as _;

        let mut cfg = base_config(SubAlgorithm::Sd);
        cfg.delta_rule = DeltaRule::Adaptive { gamma: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = obj.manifold.random_point(&mut rng);
        let solved = solve_smoothed(&obj, x0, &cfg, |_, _| false).unwrap();
        let mut mu = cfg.mu0;
        for rec in &solved.trace.outer {
            assert_eq!(rec.delta, 0.5 * mu);
            mu *= cfg.theta;
        }

        cfg.delta_rule = DeltaRule::Geometric {
            delta0: 0.1,
            rho: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = obj.manifold.random_point(&mut rng);
        let solved = solve_smoothed(&obj, x0, &cfg, |_, _| false).unwrap();
        let mut delta = 0.1;
        for rec in &solved.trace.outer {
            assert_eq!(rec.delta, delta);
            delta *= 0.5;
        }
    }

    #[test]
    fn enhanced_mode_meets_delta_when_tolerance_stopped() {
        let obj = huber(5);
        use crate::manifolds::Manifold as _;
        for alg in SubAlgorithm::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let x0 = obj.manifold.random_point(&mut rng);
            let solved = solve_smoothed(&obj, x0, &base_config(alg), |_, _| false).unwrap();
            for rec in &solved.trace.outer {
                if rec.reason == StopReason::TolMet {
                    assert!(
                        rec.grad_norm < rec.delta,
                        "{alg}: grad {} !< delta {}",
                        rec.grad_norm,
                        rec.delta
                    );
                }
            }
        }
    }

    #[test]
    fn ap1_trace_values_strictly_decrease() {
        // Monotone-decrease contract: with an AP1 family the recorded values
        // f~(x^k, mu_k) strictly decrease, for every sub-algorithm.
        let obj = huber(5);
        use crate::manifolds::Manifold as _;
        for alg in SubAlgorithm::ALL {
            for seed in 0..5 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let x0 = obj.manifold.random_point(&mut rng);
                let solved = solve_smoothed(&obj, x0, &base_config(alg), |_, _| false).unwrap();
                let values: Vec<f64> = solved.trace.values().collect();
                for w in values.windows(2) {
                    assert!(w[1] < w[0], "{alg} seed {seed}: {} !< {}", w[1], w[0]);
                }
                // |a . x| >= 0, and pseudo-Huber lies above it.
                assert!(values.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn warm_start_passes_previous_iterate() {
        // Instrument the objective to record the first point each inner
        // solve evaluates (the inner loop evaluates its start point before
        // anything else); it must equal the previous outer iterate.
        struct Probe {
            inner: HuberRay,
            first_eval: RefCell<Vec<DVector<f64>>>,
            last_mu: RefCell<Option<f64>>,
        }

        impl SmoothedObjective<Sphere> for Probe {
            fn manifold(&self) -> &Sphere {
                self.inner.manifold()
            }

            fn eval(&self, x: &DVector<f64>, mu: f64) -> f64 {
                if *self.last_mu.borrow() != Some(mu) {
                    *self.last_mu.borrow_mut() = Some(mu);
                    self.first_eval.borrow_mut().push(x.clone());
                }
                self.inner.eval(x, mu)
            }

            fn euclidean_grad(&self, x: &DVector<f64>, mu: f64) -> DVector<f64> {
                self.inner.euclidean_grad(x, mu)
            }
        }

        let probe = Probe {
            inner: huber(4),
            first_eval: RefCell::new(Vec::new()),
            last_mu: RefCell::new(None),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use crate::manifolds::Manifold as _;
        let x0 = probe.inner.manifold.random_point(&mut rng);

        let mut cfg = base_config(SubAlgorithm::Sd);
        cfg.max_total_iters = 40;
        let outer_points: RefCell<Vec<DVector<f64>>> = RefCell::new(Vec::new());
        let solved = solve_smoothed(&probe, x0.clone(), &cfg, |x, _| {
            outer_points.borrow_mut().push(x.clone());
            false
        })
        .unwrap();

        let firsts = probe.first_eval.borrow();
        let outers = outer_points.borrow();
        assert_eq!(firsts.len(), solved.trace.outer_iters());
        assert_eq!(firsts[0], x0);
        for k in 1..firsts.len() {
            assert_eq!(
                firsts[k],
                outers[k - 1],
                "warm start broken at outer step {k}"
            );
        }
        // The iterates actually move, so the check is not vacuous.
        assert_ne!(outers.last().unwrap(), &x0);
    }

    #[test]
    fn inner_solve_at_tolerance_takes_zero_iterations() {
        // A warm start already inside the tolerance: the subproblem must
        // return immediately with tol_met.
        let obj = huber(4);
        use crate::manifolds::Manifold as _;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x0 = obj.manifold.random_point(&mut rng);
        let mut cfg = base_config(SubAlgorithm::Sd);
        cfg.delta_rule = DeltaRule::Adaptive { gamma: 1e6 };
        let solved = solve_smoothed(&obj, x0, &cfg, |_, _| true).unwrap();
        let first = &solved.trace.outer[0];
        assert_eq!(first.inner_iters, 0);
        assert_eq!(first.reason, StopReason::TolMet);
        assert!(first.grad_norm < first.delta);
    }

    #[test]
    fn iter_budget_status() {
        let obj = huber(4);
        use crate::manifolds::Manifold as _;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = obj.manifold.random_point(&mut rng);
        let mut cfg = base_config(SubAlgorithm::Sd);
        cfg.max_total_iters = 3;
        cfg.inner_iter_cap = 2;
        let solved = solve_smoothed(&obj, x0, &cfg, |_, _| false).unwrap();
        assert_eq!(solved.status, Status::IterBudget);
        assert!(solved.trace.total_iters() >= 3);
    }

    #[test]
    fn non_finite_objective_reports_numeric_error_with_trace() {
        struct Evil {
            manifold: Sphere,
        }

        impl SmoothedObjective<Sphere> for Evil {
            fn manifold(&self) -> &Sphere {
                &self.manifold
            }

            fn eval(&self, _x: &DVector<f64>, _mu: f64) -> f64 {
                f64::NAN
            }

            fn euclidean_grad(&self, x: &DVector<f64>, _mu: f64) -> DVector<f64> {
                x.clone()
            }
        }

        let obj = Evil {
            manifold: Sphere::new(3).unwrap(),
        };
        use crate::manifolds::Manifold as _;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x0 = obj.manifold.random_point(&mut rng);
        let err =
            solve_smoothed(&obj, x0, &base_config(SubAlgorithm::Sd), |_, _| false).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }
}
