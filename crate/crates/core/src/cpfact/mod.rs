//! Completely positive factorization via smoothing on the orthogonal
//! group.
//!
//! Given a symmetric PSD matrix A with a (possibly sign-indefinite)
//! initial factorization A = Bbar Bbar^T, a nonnegative factor is searched
//! as Bbar X over X in O(r) by minimizing the LogSumExp smoothing of
//! max(-Bbar X). Any X with min(Bbar X) >= 0 certifies a factorization
//! since orthogonal recombination preserves the Gram matrix.

mod instances;
mod io;

pub use instances::{
    easy_boundary_instance, gen_boundary, gen_random_cp, gen_structured, hard_boundary_instance,
    Provenance,
};
pub use io::{read_factor, read_matrix, write_factor, write_matrix, CpRunReport};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fd;
use crate::manifolds::{random_orthogonal, Stiefel};
use crate::smoothing::{lse_gradient, lse_value};
use crate::solver::{
    solve_smoothed, DeltaRule, Mode, SmoothedObjective, SolveTrace, SolverConfig, Status,
    SubAlgorithm,
};

/// Feasibility threshold on the smallest entry of Bbar X.
pub const CP_ENTRY_TOL: f64 = 1e-15;

/// Residual bound a successful factorization must meet.
pub const CP_RESIDUAL_TOL: f64 = 1e-8;

/// Relative symmetry tolerance for instance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Order-dependent upper bound on the cp-rank: n for n <= 4, otherwise
/// n(n+1)/2 - 4.
pub fn cp_upper_bound(n: usize) -> Result<usize> {
    match n {
        0 => Err(Error::Domain("cp_upper_bound requires n >= 1".into())),
        1..=4 => Ok(n),
        _ => Ok(n * (n + 1) / 2 - 4),
    }
}

/// A symmetric PSD input matrix together with where it came from.
#[derive(Debug, Clone)]
pub struct CpInstance {
    a: DMatrix<f64>,
    provenance: Provenance,
    /// Nonnegative factor retained by generators that construct A = C C^T
    /// explicitly; used by tests as a ground-truth certificate.
    witness: Option<DMatrix<f64>>,
}

impl CpInstance {
    /// Validates symmetry (relative 1e-12) and positive semidefiniteness
    /// (eigenvalues above -1e-8 lambda_max).
    pub fn new(a: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        Self::with_witness(a, provenance, None)
    }

    fn with_witness(
        a: DMatrix<f64>,
        provenance: Provenance,
        witness: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if a.nrows() != a.ncols() || a.is_empty() {
            return Err(Error::Dimension(format!(
                "instance matrix must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse(
                "instance matrix has non-finite entries".into(),
            ));
        }
        let scale = a.amax();
        let asym = (&a - a.transpose()).amax();
        if asym > SYMMETRY_TOL * scale.max(1.0) {
            return Err(Error::Domain(format!(
                "matrix is not symmetric: max |A - A^T| = {asym:.3e}"
            )));
        }
        let eigs = a.clone().symmetric_eigenvalues();
        let lambda_max = eigs.max().max(0.0);
        let lambda_min = eigs.min();
        if lambda_min < -1e-8 * lambda_max.max(1.0) {
            return Err(Error::NotPsd(format!(
                "smallest eigenvalue {lambda_min:.3e} (lambda_max = {lambda_max:.3e})"
            )));
        }
        Ok(Self {
            a,
            provenance,
            witness,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn witness(&self) -> Option<&DMatrix<f64>> {
        self.witness.as_ref()
    }
}

/// An initial factorization A = Bbar Bbar^T with r columns, not
/// necessarily nonnegative.
#[derive(Debug, Clone)]
pub struct InitialFactorization {
    pub bbar: DMatrix<f64>,
    pub r: usize,
}

/// Builds Bbar by Cholesky when A is numerically positive definite
/// (smallest eigenvalue above 1e-10 lambda_max), otherwise by the spectral
/// decomposition truncated at 1e-12 lambda_max, then widens to `r` columns
/// by column replication.
pub fn initial_factorization(a: &DMatrix<f64>, r: usize) -> Result<InitialFactorization> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return Err(Error::Dimension(format!(
            "expected a square nonempty matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let eig = a.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.max().max(0.0);
    let lambda_min = eig.eigenvalues.min();
    if lambda_min < -1e-8 * lambda_max.max(1.0) {
        return Err(Error::NotPsd(format!(
            "smallest eigenvalue {lambda_min:.3e}"
        )));
    }

    let base = if lambda_min > 1e-10 * lambda_max {
        match a.clone().cholesky() {
            Some(chol) => chol.l(),
            // Right at the definiteness probe's edge Cholesky can still
            // fail; the spectral route always works.
            None => spectral_factor(&eig, lambda_max),
        }
    } else {
        spectral_factor(&eig, lambda_max)
    };

    let rank = base.ncols();
    if r < rank {
        return Err(Error::Rank(format!(
            "requested r = {r} columns but the numerical rank is {rank}"
        )));
    }
    let bbar = if rank == 0 {
        DMatrix::zeros(n, r)
    } else {
        column_replicate(&base, r)?
    };
    Ok(InitialFactorization { bbar, r })
}

fn spectral_factor(
    eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
    lambda_max: f64,
) -> DMatrix<f64> {
    let n = eig.eigenvectors.nrows();
    // Eigenvalues sorted descending for a deterministic column order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * lambda_max.max(1.0))
        .collect();
    let mut b = DMatrix::zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        b.column_mut(j)
            .copy_from(&(eig.eigenvectors.column(i) * scale));
    }
    b
}

/// Widens B to `r_prime` columns by splitting the last column into
/// m = r_prime - r + 1 copies scaled by 1/sqrt(m); the Gram matrix B B^T
/// is preserved exactly. `r_prime = r` returns B unchanged.
pub fn column_replicate(b: &DMatrix<f64>, r_prime: usize) -> Result<DMatrix<f64>> {
    let (n, r) = (b.nrows(), b.ncols());
    if r == 0 {
        return Err(Error::Domain(
            "column replication needs at least one column".into(),
        ));
    }
    if r_prime < r {
        return Err(Error::Domain(format!(
            "cannot shrink from {r} to {r_prime} columns"
        )));
    }
    if r_prime == r {
        return Ok(b.clone());
    }
    let m = r_prime - r + 1;
    let scale = 1.0 / (m as f64).sqrt();
    let mut out = DMatrix::zeros(n, r_prime);
    out.view_mut((0, 0), (n, r - 1))
        .copy_from(&b.view((0, 0), (n, r - 1)));
    let last = b.column(r - 1) * scale;
    for j in (r - 1)..r_prime {
        out.column_mut(j).copy_from(&last);
    }
    Ok(out)
}

/// The smoothed feasibility objective lse(-Bbar X, mu) over O(r).
#[derive(Debug, Clone)]
pub struct CpObjective {
    bbar: DMatrix<f64>,
    manifold: Stiefel,
}

impl CpObjective {
    pub fn new(bbar: DMatrix<f64>) -> Result<Self> {
        let r = bbar.ncols();
        if r == 0 || bbar.nrows() == 0 {
            return Err(Error::Dimension("Bbar must be nonempty".into()));
        }
        Ok(Self {
            bbar,
            manifold: Stiefel::orthogonal_group(r)?,
        })
    }

    pub fn bbar(&self) -> &DMatrix<f64> {
        &self.bbar
    }

    /// lse(vec(-Bbar X), mu).
    pub fn value(&self, x: &DMatrix<f64>, mu: f64) -> Result<f64> {
        let neg = -(&self.bbar * x);
        lse_value(neg.as_slice(), mu)
    }

    /// Euclidean gradient -Bbar^T Sigma, where Sigma holds the softmax
    /// weights of vec(-Bbar X) reshaped to n x r.
    pub fn gradient(&self, x: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
        let (n, r) = (self.bbar.nrows(), self.bbar.ncols());
        let neg = -(&self.bbar * x);
        let weights = lse_gradient(neg.as_slice(), mu)?;
        let sigma = DMatrix::from_column_slice(n, r, weights.as_vector().as_slice());
        Ok(-(self.bbar.transpose() * sigma))
    }

    /// Opt-in self-check: relative disagreement between the analytic
    /// gradient and central finite differences at (x, mu).
    pub fn gradient_check(&self, x: &DMatrix<f64>, mu: f64) -> f64 {
        let g = match self.gradient(x, mu) {
            Ok(g) => g,
            Err(_) => return f64::INFINITY,
        };
        fd::relative_gradient_error(
            |p: &DMatrix<f64>| self.value(p, mu).unwrap_or(f64::NAN),
            &g,
            x,
            fd::default_step(x),
        )
    }
}

impl SmoothedObjective<Stiefel> for CpObjective {
    fn manifold(&self) -> &Stiefel {
        &self.manifold
    }

    fn eval(&self, x: &DMatrix<f64>, mu: f64) -> f64 {
        self.value(x, mu).unwrap_or(f64::NAN)
    }

    fn euclidean_grad(&self, x: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
        self.gradient(x, mu).unwrap_or_else(|_| {
            DMatrix::from_element(self.bbar.ncols(), self.bbar.ncols(), f64::NAN)
        })
    }
}

/// Outcome of a factorization attempt.
#[derive(Debug, Clone)]
pub struct CpResult {
    /// Final orthogonal recombination.
    pub x: DMatrix<f64>,
    /// Bbar X with entries in [-1e-15, 0) clamped to zero.
    pub b: DMatrix<f64>,
    /// Smallest entry of Bbar X before clamping.
    pub min_entry: f64,
    /// ‖A - B B^T‖_F / ‖A‖_F after clamping.
    pub residual: f64,
    pub success: bool,
    pub status: Status,
    pub trace: SolveTrace,
}

/// Reference solver settings for the CP experiments: mu0 = 100,
/// theta = 0.8, adaptive tolerance delta_k = 0.5 mu_k, 5000 total
/// iterations.
pub fn cp_solver_config(sub_algorithm: SubAlgorithm) -> SolverConfig {
    SolverConfig {
        mu0: 100.0,
        theta: 0.8,
        delta_rule: DeltaRule::Adaptive { gamma: 0.5 },
        mode: Mode::Enhanced,
        sub_algorithm,
        max_total_iters: 5000,
        inner_iter_cap: 1000,
        mu_min: 1e-10,
    }
}

fn min_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().copied().fold(f64::INFINITY, f64::min)
}

fn build_result(
    inst: &CpInstance,
    bbar: &DMatrix<f64>,
    x: DMatrix<f64>,
    status: Status,
    trace: SolveTrace,
) -> CpResult {
    let fac = bbar * &x;
    let smallest = min_entry(&fac);
    let mut b = fac;
    for v in b.iter_mut() {
        if *v >= -CP_ENTRY_TOL && *v < 0.0 {
            *v = 0.0;
        }
    }
    let diff = (inst.matrix() - &b * b.transpose()).norm();
    let norm_a = inst.matrix().norm();
    let residual = if norm_a > 0.0 { diff / norm_a } else { diff };
    CpResult {
        x,
        b,
        min_entry: smallest,
        residual,
        success: smallest >= -CP_ENTRY_TOL,
        status,
        trace,
    }
}

/// Full factorization pipeline: initial factorization with `r` columns
/// (default cp_upper_bound(n)), a random orthogonal start, and the
/// smoothing solve stopped as soon as min(Bbar X) >= -1e-15.
pub fn cp_factorize<R: Rng + ?Sized>(
    inst: &CpInstance,
    r: Option<usize>,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<CpResult> {
    let r = match r {
        Some(r) => r,
        None => cp_upper_bound(inst.order())?,
    };
    let init = initial_factorization(inst.matrix(), r)?;
    let obj = CpObjective::new(init.bbar.clone())?;
    let x0 = random_orthogonal(r, rng)?;
    let bbar = init.bbar;
    let solved = solve_smoothed(&obj, x0, cfg, |x, _| {
        min_entry(&(&bbar * x)) >= -CP_ENTRY_TOL
    })?;
    Ok(build_result(
        inst,
        &bbar,
        solved.point,
        solved.status,
        solved.trace,
    ))
}

/// Keeps optimizing past feasibility for a fixed iteration budget, pushing
/// the smallest entry of the factor as high as possible.
pub fn maximin_entry_refine<R: Rng + ?Sized>(
    inst: &CpInstance,
    r: Option<usize>,
    cfg: &SolverConfig,
    total_iteration_budget: usize,
    rng: &mut R,
) -> Result<CpResult> {
    let r = match r {
        Some(r) => r,
        None => cp_upper_bound(inst.order())?,
    };
    let init = initial_factorization(inst.matrix(), r)?;
    let obj = CpObjective::new(init.bbar.clone())?;
    let x0 = random_orthogonal(r, rng)?;
    let mut cfg = cfg.clone();
    cfg.max_total_iters = total_iteration_budget.max(1);
    let solved = solve_smoothed(&obj, x0, &cfg, |_, _| false)?;
    Ok(build_result(
        inst,
        &init.bbar,
        solved.point,
        solved.status,
        solved.trace,
    ))
}

/// Report of checking a candidate factorization A = B B^T, B >= 0.
#[derive(Debug, Clone, Copy)]
pub struct FactorCheck {
    pub min_entry: f64,
    pub residual: f64,
    pub entry_ok: bool,
    pub residual_ok: bool,
}

impl FactorCheck {
    pub fn passes(&self) -> bool {
        self.entry_ok && self.residual_ok
    }
}

/// Checks min(B) >= -entry_tol and ‖A - B B^T‖_F/‖A‖_F <= residual_tol.
pub fn verify_factorization(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    entry_tol: f64,
    residual_tol: f64,
) -> Result<FactorCheck> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "A is {}x{} but B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let smallest = min_entry(b);
    let diff = (a - b * b.transpose()).norm();
    let norm_a = a.norm();
    let residual = if norm_a > 0.0 { diff / norm_a } else { diff };
    Ok(FactorCheck {
        min_entry: smallest,
        residual,
        entry_ok: smallest >= -entry_tol,
        residual_ok: residual <= residual_tol,
    })
}

/// Frobenius-relative reconstruction error of an initial factorization,
/// exposed for the builders' contract tests.
pub fn reconstruction_error(a: &DMatrix<f64>, bbar: &DMatrix<f64>) -> f64 {
    let diff = (a - bbar * bbar.transpose()).norm();
    let norm_a = a.norm();
    if norm_a > 0.0 {
        diff / norm_a
    } else {
        diff
    }
}
