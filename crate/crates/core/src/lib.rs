//! Riemannian smoothing methods for nonsmooth optimization, with two
//! applications built on top:
//!
//! - completely positive matrix factorization over the orthogonal group,
//!   where feasibility min(Bbar X) >= 0 is reached by minimizing a
//!   LogSumExp surrogate of max(-Bbar X);
//! - recovery of a planted sparse vector by smoothed l1 minimization on
//!   the unit sphere.
//!
//! The solver drives a sequence of smoothed subproblems
//! min f~(x, mu_k) with mu_{k+1} = theta mu_k, warm-starting each one at
//! the previous iterate and (in enhanced mode) requiring the Riemannian
//! gradient to drop below a schedule delta_k. Sub-algorithms: steepest
//! descent, Barzilai-Borwein, conjugate gradient, and trust regions.

pub mod cpfact;
pub mod error;
pub mod fd;
pub mod fsv;
pub mod manifolds;
pub mod smoothing;
pub mod solver;

pub use error::{Error, Result};
pub use manifolds::{
    nearest_orthogonal, random_orthogonal, riemannian_gradient, Ambient, Manifold, Sphere, Stiefel,
};
pub use smoothing::{
    lse_gradient, lse_value, separable_l1_gradient, separable_l1_value, AbsKind, SmoothingFamily,
    SoftmaxWeights, MU_FLOOR,
};
pub use solver::{
    solve_smoothed, DeltaRule, Mode, SmoothedObjective, SolveTrace, Solved, SolverConfig, Status,
    StopReason, SubAlgorithm,
};
