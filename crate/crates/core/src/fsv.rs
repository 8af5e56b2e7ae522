//! Finding the sparsest unit vector in a planted subspace via smoothed
//! l1 minimization on the sphere.
//!
//! An orthonormal basis Q of an n-dimensional subspace of R^m is built so
//! that the sparse vector e_n (n ones, then zeros) lies in its range; the
//! solver minimizes a smoothed ‖Qx‖_1 over the unit sphere in R^n and a
//! run counts as successful when the tau-truncated support of Qx has
//! exactly n entries.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::manifolds::{gram_schmidt, Manifold, Sphere};
use crate::smoothing::{separable_l1_gradient, separable_l1_value, AbsKind};
use crate::solver::{
    solve_smoothed, DeltaRule, Mode, SmoothedObjective, SolveTrace, SolverConfig, Status,
    SubAlgorithm,
};

/// A planted-sparse-vector instance: Q spans a subspace of R^m containing
/// the vector of n ones followed by zeros.
#[derive(Debug, Clone)]
pub struct FsvInstance {
    q: DMatrix<f64>,
    n: usize,
    m: usize,
}

impl FsvInstance {
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn subspace_dim(&self) -> usize {
        self.n
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    /// Max-abs violations of the two defining invariants, for tests.
    pub fn invariant_errors(&self) -> (f64, f64) {
        let mut gram = self.q.transpose() * &self.q;
        for i in 0..self.n {
            gram[(i, i)] -= 1.0;
        }
        let planted = planted_vector(self.n, self.m);
        let replay = &self.q * (self.q.transpose() * &planted) - &planted;
        (gram.amax(), replay.norm())
    }
}

fn planted_vector(n: usize, m: usize) -> DVector<f64> {
    let mut e = DVector::zeros(m);
    for i in 0..n {
        e[i] = 1.0;
    }
    e
}

/// Spans e_n together with n - 1 Gaussian vectors and orthonormalizes by
/// modified Gram-Schmidt, keeping e_n in the range exactly.
pub fn gen_fsv_instance<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<FsvInstance> {
    if n == 0 || m <= n {
        return Err(Error::Domain(format!(
            "instance requires m > n >= 1, got n = {n}, m = {m}"
        )));
    }
    let mut basis = DMatrix::zeros(m, n);
    basis.column_mut(0).copy_from(&planted_vector(n, m));
    for j in 1..n {
        for i in 0..m {
            basis[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let q = gram_schmidt(&basis)?;
    Ok(FsvInstance { q, n, m })
}

/// Smoothed ‖Qx‖_1 over the sphere, separable through one of the
/// absolute-value smoothing families.
#[derive(Debug, Clone)]
pub struct FsvObjective {
    q: DMatrix<f64>,
    kind: AbsKind,
    manifold: Sphere,
}

impl FsvObjective {
    pub fn new(q: DMatrix<f64>, kind: AbsKind) -> Result<Self> {
        if q.ncols() == 0 || q.nrows() < q.ncols() {
            return Err(Error::Dimension(format!(
                "basis must be m x n with m >= n >= 1, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        let manifold = Sphere::new(q.ncols())?;
        Ok(Self { q, kind, manifold })
    }

    pub fn value(&self, x: &DVector<f64>, mu: f64) -> Result<f64> {
        separable_l1_value(&(&self.q * x), mu, self.kind)
    }

    /// Euclidean gradient Q^T d with d_i the smoother derivative at
    /// (Qx)_i.
    pub fn gradient(&self, x: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        let d = separable_l1_gradient(&(&self.q * x), mu, self.kind)?;
        Ok(self.q.transpose() * d)
    }

    /// Opt-in self-check against central finite differences.
    pub fn gradient_check(&self, x: &DVector<f64>, mu: f64) -> f64 {
        let g = match self.gradient(x, mu) {
            Ok(g) => g,
            Err(_) => return f64::INFINITY,
        };
        fd::relative_gradient_error(
            |p: &DVector<f64>| self.value(p, mu).unwrap_or(f64::NAN),
            &g,
            x,
            fd::default_step(x),
        )
    }
}

impl SmoothedObjective<Sphere> for FsvObjective {
    fn manifold(&self) -> &Sphere {
        &self.manifold
    }

    fn eval(&self, x: &DVector<f64>, mu: f64) -> f64 {
        self.value(x, mu).unwrap_or(f64::NAN)
    }

    fn euclidean_grad(&self, x: &DVector<f64>, mu: f64) -> DVector<f64> {
        self.gradient(x, mu)
            .unwrap_or_else(|_| DVector::from_element(self.q.ncols(), f64::NAN))
    }
}

/// Number of entries surviving the truncation |z_i| >= tau.
pub fn truncated_support_size(z: &DVector<f64>, tau: f64) -> usize {
    debug_assert!(tau > 0.0, "tau must be positive");
    z.iter().filter(|v| v.abs() >= tau).count()
}

/// Options of a single FSV solve.
#[derive(Debug, Clone, Copy)]
pub struct FsvOptions {
    pub kind: AbsKind,
    /// Truncation tolerance the result's own support is measured at.
    pub tau: f64,
    /// Start from |random point| (the default); set false for a signed
    /// start.
    pub nonnegative_start: bool,
}

impl Default for FsvOptions {
    fn default() -> Self {
        Self {
            kind: AbsKind::F1,
            tau: 1e-5,
            nonnegative_start: true,
        }
    }
}

/// Result of one solve: the recovered unit vector and its truncated
/// support.
#[derive(Debug, Clone)]
pub struct FsvResult {
    pub x: DVector<f64>,
    /// Qx at the final iterate.
    pub coords: DVector<f64>,
    pub support_size: usize,
    pub success: bool,
    pub status: Status,
    pub trace: SolveTrace,
}

impl FsvResult {
    /// Support measured at a different truncation level.
    pub fn support_at(&self, tau: f64) -> usize {
        truncated_support_size(&self.coords, tau)
    }
}

/// The experiment settings for FSV: mu0 = 1, theta = 0.5 with the
/// geometric tolerance schedule delta_0 = 0.1, rho = 0.5.
pub fn fsv_solver_config(sub_algorithm: SubAlgorithm) -> SolverConfig {
    SolverConfig {
        mu0: 1.0,
        theta: 0.5,
        delta_rule: DeltaRule::Geometric {
            delta0: 0.1,
            rho: 0.5,
        },
        mode: Mode::Enhanced,
        sub_algorithm,
        max_total_iters: 20_000,
        inner_iter_cap: 200,
        mu_min: 1e-12,
    }
}

/// Runs the smoothing solver on an instance down to the mu floor and
/// measures the truncated support at termination.
pub fn fsv_solve<R: Rng + ?Sized>(
    inst: &FsvInstance,
    cfg: &SolverConfig,
    opts: &FsvOptions,
    rng: &mut R,
) -> Result<FsvResult> {
    if cfg.mode != Mode::Enhanced {
        return Err(Error::Domain(
            "fsv_solve requires the enhanced mode (inner gradient tolerances)".into(),
        ));
    }
    if opts.tau.is_nan() || opts.tau <= 0.0 {
        return Err(Error::Domain(format!(
            "tau must be positive, got {}",
            opts.tau
        )));
    }
    let obj = FsvObjective::new(inst.q.clone(), opts.kind)?;
    let sphere = Sphere::new(inst.n)?;
    let mut x0 = sphere.random_point(rng);
    if opts.nonnegative_start {
        // Entrywise |.| keeps the norm, so the start stays on the sphere.
        x0.apply(|v| *v = v.abs());
    }
    let solved = solve_smoothed(&obj, x0, cfg, |_, _| false)?;
    let coords = &inst.q * &solved.point;
    let support_size = truncated_support_size(&coords, opts.tau);
    Ok(FsvResult {
        x: solved.point,
        coords,
        support_size,
        success: support_size == inst.n,
        status: solved.status,
        trace: solved.trace,
    })
}

/// Machine-readable summary of a success count at one truncation level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FsvBenchReport {
    pub n: usize,
    pub m: usize,
    pub kind: String,
    pub sub_algorithm: String,
    pub tau: f64,
    pub successes: usize,
    pub trials: usize,
    pub seed: u64,
}
