//! The four CP instance families used in the experiments: random Gram
//! matrices of folded Gaussians, the structured interior family A_n, the
//! easy rank-3 boundary matrix, and the hard boundary matrix blended with
//! an interior point.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::CpInstance;
use crate::error::{Error, Result};

/// Where an instance matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Random,
    Structured,
    Boundary { lambda: f64 },
    EasyBoundary,
    File,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Random => f.write_str("random"),
            Provenance::Structured => f.write_str("structured"),
            Provenance::Boundary { lambda } => write!(f, "boundary({lambda})"),
            Provenance::EasyBoundary => f.write_str("easy_boundary"),
            Provenance::File => f.write_str("file"),
        }
    }
}

/// A = C C^T with C = |B| entrywise and B an n x 2n standard Gaussian
/// matrix. The nonnegative C is retained as the instance witness.
pub fn gen_random_cp<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CpInstance> {
    if n == 0 {
        return Err(Error::Domain("random instance requires n >= 1".into()));
    }
    let c = DMatrix::from_fn(n, 2 * n, |_, _| rng.sample::<f64, _>(StandardNormal).abs());
    let mut a = &c * c.transpose();
    symmetrize(&mut a);
    CpInstance::with_witness(a, Provenance::Random, Some(c))
}

/// The interior family A_n = G^T G with G = [[0, e^T], [e, I]]; its
/// cp-rank is exactly n.
pub fn gen_structured(n: usize) -> Result<CpInstance> {
    if n < 2 {
        return Err(Error::Domain("structured instance requires n >= 2".into()));
    }
    let mut g = DMatrix::zeros(n, n);
    for j in 1..n {
        g[(0, j)] = 1.0;
        g[(j, 0)] = 1.0;
        g[(j, j)] = 1.0;
    }
    let mut a = g.transpose() * &g;
    symmetrize(&mut a);
    CpInstance::with_witness(a, Provenance::Structured, Some(g.transpose()))
}

const HARD_BOUNDARY: [f64; 25] = [
    8.0, 5.0, 1.0, 1.0, 5.0, //
    5.0, 8.0, 5.0, 1.0, 1.0, //
    1.0, 5.0, 8.0, 5.0, 1.0, //
    1.0, 1.0, 5.0, 8.0, 5.0, //
    5.0, 1.0, 1.0, 5.0, 8.0,
];

const INTERIOR_M: [f64; 30] = [
    1.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
    1.0, 0.0, 1.0, 0.0, 0.0, 0.0, //
    1.0, 0.0, 0.0, 1.0, 0.0, 0.0, //
    1.0, 0.0, 0.0, 0.0, 1.0, 0.0, //
    1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
];

/// A_lambda = lambda A + (1 - lambda) C, where A is the hard 5x5 boundary
/// matrix and C = M M^T is interior. lambda = 1 gives the unperturbed
/// boundary matrix; lambda = 0 gives C itself (with witness M).
pub fn gen_boundary(lambda: f64) -> Result<CpInstance> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let a_hard = DMatrix::from_row_slice(5, 5, &HARD_BOUNDARY);
    let m = DMatrix::from_row_slice(5, 6, &INTERIOR_M);
    let c = &m * m.transpose();
    let mut a = a_hard * lambda + &c * (1.0 - lambda);
    symmetrize(&mut a);
    let witness = (lambda == 0.0).then_some(m);
    CpInstance::with_witness(a, Provenance::Boundary { lambda }, witness)
}

/// The unperturbed hard boundary matrix (lambda = 1). Full rank but on
/// the boundary, so no strictly positive factorization exists.
pub fn hard_boundary_instance() -> CpInstance {
    gen_boundary(1.0).expect("fixed instance is valid")
}

const EASY_BOUNDARY: [f64; 25] = [
    41.0, 43.0, 80.0, 56.0, 50.0, //
    43.0, 62.0, 89.0, 78.0, 51.0, //
    80.0, 89.0, 162.0, 120.0, 93.0, //
    56.0, 78.0, 120.0, 104.0, 62.0, //
    50.0, 51.0, 93.0, 62.0, 65.0,
];

/// The rank-3 boundary matrix every method factorizes easily; its cp-rank
/// equals its rank, 3.
pub fn easy_boundary_instance() -> CpInstance {
    let a = DMatrix::from_row_slice(5, 5, &EASY_BOUNDARY);
    CpInstance::with_witness(a, Provenance::EasyBoundary, None).expect("fixed instance is valid")
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_instance_has_exact_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = gen_random_cp(6, &mut rng).unwrap();
        let c = inst.witness().expect("generator retains C");
        assert!(c.iter().all(|&v| v >= 0.0));
        let err = (inst.matrix() - c * c.transpose()).amax();
        assert!(err <= 1e-12 * inst.matrix().amax());
    }

    #[test]
    fn random_instance_is_deterministic_per_seed() {
        let a = gen_random_cp(5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = gen_random_cp(5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn structured_instance_matches_block_product() {
        let inst = gen_structured(3).unwrap();
        // G = [[0,1,1],[1,1,0],[1,0,1]] gives A_3 = G^T G.
        let g = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let expected = g.transpose() * &g;
        assert_eq!(inst.matrix(), &expected);
        // Diagonal: (1,1) entry is n - 1, the rest are 2.
        for n in [3usize, 5, 9] {
            let inst = gen_structured(n).unwrap();
            assert_eq!(inst.matrix()[(0, 0)], (n - 1) as f64);
            for j in 1..n {
                assert_eq!(inst.matrix()[(j, j)], 2.0);
            }
        }
        assert!(gen_structured(1).is_err());
    }

    #[test]
    fn boundary_endpoints() {
        let c = gen_boundary(0.0).unwrap();
        assert_eq!(c.matrix()[(0, 0)], 2.0);
        let m = c.witness().expect("lambda = 0 retains M");
        assert_eq!((c.matrix() - m * m.transpose()).amax(), 0.0);

        let hard = hard_boundary_instance();
        assert_eq!(hard.matrix()[(0, 0)], 8.0);
        assert_eq!(hard.matrix()[(0, 1)], 5.0);

        assert!(gen_boundary(-0.1).is_err());
        assert!(gen_boundary(1.1).is_err());
    }

    #[test]
    fn easy_boundary_matches_print() {
        let inst = easy_boundary_instance();
        assert_eq!(inst.matrix()[(0, 0)], 41.0);
        assert_eq!(inst.matrix()[(2, 2)], 162.0);
        assert_eq!(inst.matrix()[(4, 2)], 93.0);
        // Known rank 3: two eigenvalues vanish.
        let eigs = inst.matrix().clone().symmetric_eigenvalues();
        let lambda_max = eigs.max();
        let near_zero = eigs
            .iter()
            .filter(|&&l| l.abs() <= 1e-10 * lambda_max)
            .count();
        assert_eq!(near_zero, 2);
    }
}
