use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Manifold;
use crate::error::{Error, Result};

/// The Stiefel manifold St(n, p) of n×p matrices with orthonormal columns.
/// `Stiefel::orthogonal_group(r)` gives the square case O(r).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stiefel {
    n: usize,
    p: usize,
}

impl Stiefel {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 || p > n {
            return Err(Error::Domain(format!(
                "Stiefel requires 1 <= p <= n, got n = {n}, p = {p}"
            )));
        }
        Ok(Self { n, p })
    }

    /// O(r), the square Stiefel manifold.
    pub fn orthogonal_group(r: usize) -> Result<Self> {
        Self::new(r, r)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    fn check_shape(&self, m: &DMatrix<f64>, what: &str) -> Result<()> {
        if m.nrows() != self.n || m.ncols() != self.p {
            return Err(Error::Dimension(format!(
                "{what} must be {}x{}, got {}x{}",
                self.n,
                self.p,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }
}

impl Manifold for Stiefel {
    type Point = DMatrix<f64>;
    type Tangent = DMatrix<f64>;

    fn name(&self) -> &'static str {
        "stiefel"
    }

    fn dim(&self) -> usize {
        self.n * self.p - self.p * (self.p + 1) / 2
    }

    fn point_norm(&self, x: &Self::Point) -> f64 {
        x.norm()
    }

    fn feasibility_error(&self, x: &Self::Point) -> f64 {
        let mut gram = x.transpose() * x;
        for i in 0..self.p {
            gram[(i, i)] -= 1.0;
        }
        gram.amax()
    }

    fn tangency_error(&self, x: &Self::Point, v: &Self::Tangent) -> f64 {
        // X^T v must be skew-symmetric.
        let xtv = x.transpose() * v;
        let sym = (&xtv + xtv.transpose()) * 0.5;
        sym.amax()
    }

    /// Proj_X(V) = V - X * sym(X^T V) with sym(A) = (A + A^T)/2.
    fn project(&self, x: &Self::Point, v: &Self::Tangent) -> Result<Self::Tangent> {
        self.check_shape(x, "point")?;
        self.check_shape(v, "ambient vector")?;
        let xtv = x.transpose() * v;
        let sym = (&xtv + xtv.transpose()) * 0.5;
        Ok(v - x * sym)
    }

    /// QR retraction: the Q factor of X + V with the diagonal of R forced
    /// positive so the map is well defined and R(X, 0) = X exactly.
    fn retract(&self, x: &Self::Point, v: &Self::Tangent) -> Result<Self::Point> {
        self.check_shape(x, "point")?;
        self.check_shape(v, "tangent vector")?;
        if v.iter().all(|&t| t == 0.0) {
            // R(X, 0) = X exactly; QR of X itself would only get there up
            // to rounding.
            return Ok(x.clone());
        }
        let y = x + v;
        if !y.iter().all(|t| t.is_finite()) {
            return Err(Error::Retraction("X + v has non-finite entries".into()));
        }
        let qr = y.qr();
        let r = qr.r();
        // A zero diagonal entry of R means X + v is (numerically) rank
        // deficient and the Q factor is not determined.
        let scale = r.amax().max(f64::MIN_POSITIVE);
        for i in 0..self.p {
            if r[(i, i)].abs() <= 1e-14 * scale {
                return Err(Error::Retraction(format!(
                    "X + v is rank deficient (|R[{i},{i}]| = {:.3e})",
                    r[(i, i)].abs()
                )));
            }
        }
        let mut q = qr.q();
        for j in 0..self.p {
            if r[(j, j)] < 0.0 {
                for i in 0..self.n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        Ok(q)
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point {
        // Gaussian matrix orthonormalized by modified Gram-Schmidt; entries
        // drawn column-major so the result is deterministic per seed.
        loop {
            let g = DMatrix::from_fn(self.n, self.p, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(q) = gram_schmidt(&g) {
                return q;
            }
        }
    }

    fn zero_tangent(&self, _x: &Self::Point) -> Self::Tangent {
        DMatrix::zeros(self.n, self.p)
    }
}

/// Random r×r orthogonal matrix from a Gaussian sample orthonormalized by
/// the Gram-Schmidt process. Deterministic for a fixed generator state.
pub fn random_orthogonal<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if r == 0 {
        return Err(Error::Domain("random_orthogonal requires r >= 1".into()));
    }
    let manifold = Stiefel::orthogonal_group(r)?;
    Ok(manifold.random_point(rng))
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Fails on
/// (numerically) rank-deficient input.
pub(crate) fn gram_schmidt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = (a.nrows(), a.ncols());
    let mut q = a.clone();
    for j in 0..p {
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).clone_owned();
                let coeff = qi.dot(&q.column(j));
                let mut col = q.column_mut(j);
                col.axpy(-coeff, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm <= 1e-13 * (n as f64).sqrt() {
            return Err(Error::Rank(format!(
                "column {j} is numerically dependent on the previous ones"
            )));
        }
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(q)
}

/// Nearest orthogonal matrix in Frobenius norm: the polar factor U V^T of
/// the SVD M = U diag(s) V^T. Requires M square and full rank; a zero
/// singular value makes the projection non-unique.
pub fn nearest_orthogonal(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "nearest_orthogonal requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Err(Error::Domain(
            "nearest_orthogonal of an empty matrix".into(),
        ));
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= 1e-13 * smax) || smax == 0.0 {
        return Err(Error::NonUniqueProjection(format!(
            "smallest singular value {:.3e} is numerically zero",
            svd.singular_values.min()
        )));
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    Ok(u * v_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn project_keeps_skew_at_identity() {
        let m = Stiefel::orthogonal_group(2).unwrap();
        let x = DMatrix::identity(2, 2);
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let p = m.project(&x, &skew).unwrap();
        assert_abs_diff_eq!(p, skew, epsilon = 1e-15);
    }

    #[test]
    fn project_kills_symmetric_at_identity() {
        let m = Stiefel::orthogonal_group(2).unwrap();
        let x = DMatrix::identity(2, 2);
        let sym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -0.5]);
        let p = m.project(&x, &sym).unwrap();
        assert!(p.amax() <= 1e-15);
    }

    #[test]
    fn project_is_idempotent_and_tangent() {
        let m = Stiefel::orthogonal_group(5).unwrap();
        let mut r = rng(7);
        let x = m.random_point(&mut r);
        let v = DMatrix::from_fn(5, 5, |_, _| r.sample::<f64, _>(StandardNormal));
        let p = m.project(&x, &v).unwrap();
        let pp = m.project(&x, &p).unwrap();
        assert!(m.tangency_error(&x, &p) <= 1e-10);
        assert!((&pp - &p).amax() <= 1e-12);
    }

    #[test]
    fn project_rejects_shape_mismatch() {
        let m = Stiefel::orthogonal_group(3).unwrap();
        let x = DMatrix::identity(3, 3);
        let v = DMatrix::zeros(2, 3);
        assert!(matches!(m.project(&x, &v), Err(Error::Dimension(_))));
    }

    #[test]
    fn retract_zero_is_identity_map() {
        let m = Stiefel::orthogonal_group(4).unwrap();
        let mut r = rng(3);
        let x = m.random_point(&mut r);
        let y = m.retract(&x, &m.zero_tangent(&x)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn retract_first_order_agreement() {
        // ||R(X, tv) - (X + tv)|| = O(t^2); at t = 1e-4 it must be tiny.
        let m = Stiefel::orthogonal_group(2).unwrap();
        let x = DMatrix::identity(2, 2);
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let t = 1e-4;
        let v = &skew * t;
        let y = m.retract(&x, &v).unwrap();
        let lin = &x + &v;
        assert!((y - lin).norm() <= 1e-7);
    }

    #[test]
    fn retract_output_is_orthonormal() {
        let m = Stiefel::orthogonal_group(6).unwrap();
        let mut r = rng(11);
        let x = m.random_point(&mut r);
        let v = m
            .project(
                &x,
                &DMatrix::from_fn(6, 6, |_, _| r.sample::<f64, _>(StandardNormal)),
            )
            .unwrap();
        let y = m.retract(&x, &v).unwrap();
        assert!(m.feasibility_error(&y) <= 1e-12);
    }

    #[test]
    fn random_orthogonal_is_orthogonal_and_deterministic() {
        let x1 = random_orthogonal(10, &mut rng(42)).unwrap();
        let x2 = random_orthogonal(10, &mut rng(42)).unwrap();
        assert_eq!(x1, x2);
        let m = Stiefel::orthogonal_group(10).unwrap();
        assert!(m.feasibility_error(&x1) <= 1e-12);
    }

    #[test]
    fn random_orthogonal_one_by_one() {
        let x = random_orthogonal(1, &mut rng(5)).unwrap();
        assert!((x[(0, 0)].abs() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn random_orthogonal_rejects_zero() {
        assert!(matches!(
            random_orthogonal(0, &mut rng(0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn nearest_orthogonal_fixed_points_and_spd() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_abs_diff_eq!(nearest_orthogonal(&id).unwrap(), id, epsilon = 1e-14);

        // Polar factor of an SPD diagonal matrix is the identity.
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        assert_abs_diff_eq!(
            nearest_orthogonal(&d).unwrap(),
            DMatrix::identity(2, 2),
            epsilon = 1e-14
        );

        let q = random_orthogonal(5, &mut rng(9)).unwrap();
        assert!((nearest_orthogonal(&q).unwrap() - &q).amax() <= 1e-12);
    }

    #[test]
    fn nearest_orthogonal_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            nearest_orthogonal(&m),
            Err(Error::NonUniqueProjection(_))
        ));
    }

    #[test]
    fn nearest_orthogonal_equivariance() {
        // nearest_orthogonal(M Q) = nearest_orthogonal(M) Q for Q in O(r).
        let mut r = rng(13);
        for _ in 0..5 {
            let g = DMatrix::from_fn(4, 4, |_, _| r.sample::<f64, _>(StandardNormal));
            let m = &g + DMatrix::identity(4, 4) * 2.0;
            let q = random_orthogonal(4, &mut r).unwrap();
            let lhs = nearest_orthogonal(&(&m * &q)).unwrap();
            let rhs = nearest_orthogonal(&m).unwrap() * &q;
            assert!((lhs - rhs).amax() <= 1e-10);
        }
    }

    #[test]
    fn transport_is_projection_at_target() {
        let m = Stiefel::orthogonal_group(4).unwrap();
        let mut r = rng(21);
        let x = m.random_point(&mut r);
        let y = m.random_point(&mut r);
        let v = m
            .project(
                &x,
                &DMatrix::from_fn(4, 4, |_, _| r.sample::<f64, _>(StandardNormal)),
            )
            .unwrap();
        // Transport to the same point keeps a tangent vector unchanged.
        let same = m.transport(&x, &v).unwrap();
        assert!((&same - &v).amax() <= 1e-12);
        // Transport elsewhere lands in the target tangent space.
        let moved = m.transport(&y, &v).unwrap();
        assert!(m.tangency_error(&y, &moved) <= 1e-10);
    }
}
