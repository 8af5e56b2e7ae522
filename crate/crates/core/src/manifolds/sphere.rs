use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Manifold;
use crate::error::{Error, Result};

/// The unit sphere S^{n-1} = {x in R^n : ‖x‖ = 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sphere {
    n: usize,
}

impl Sphere {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("Sphere requires dimension >= 1".into()));
        }
        Ok(Self { n })
    }

    pub fn dim_ambient(&self) -> usize {
        self.n
    }

    fn check_len(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!(
                "{what} must have length {}, got {}",
                self.n,
                v.len()
            )));
        }
        Ok(())
    }
}

impl Manifold for Sphere {
    type Point = DVector<f64>;
    type Tangent = DVector<f64>;

    fn name(&self) -> &'static str {
        "sphere"
    }

    fn dim(&self) -> usize {
        self.n - 1
    }

    fn point_norm(&self, x: &Self::Point) -> f64 {
        x.norm()
    }

    fn feasibility_error(&self, x: &Self::Point) -> f64 {
        (x.norm() - 1.0).abs()
    }

    fn tangency_error(&self, x: &Self::Point, v: &Self::Tangent) -> f64 {
        x.dot(v).abs()
    }

    /// v - (x^T v) x.
    fn project(&self, x: &Self::Point, v: &Self::Tangent) -> Result<Self::Tangent> {
        self.check_len(x, "point")?;
        self.check_len(v, "ambient vector")?;
        Ok(v - x * x.dot(v))
    }

    /// Metric retraction (x + v)/‖x + v‖. For tangent v the denominator is
    /// at least 1, so degeneracy can only come from bad input.
    fn retract(&self, x: &Self::Point, v: &Self::Tangent) -> Result<Self::Point> {
        self.check_len(x, "point")?;
        self.check_len(v, "tangent vector")?;
        if v.iter().all(|&t| t == 0.0) {
            return Ok(x.clone());
        }
        let y = x + v;
        let norm = y.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::Retraction(format!(
                "‖x + v‖ = {norm:.3e} is degenerate"
            )));
        }
        Ok(y / norm)
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point {
        loop {
            let g = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = g.norm();
            if norm > 1e-8 {
                return g / norm;
            }
        }
    }

    fn zero_tangent(&self, _x: &Self::Point) -> Self::Tangent {
        DVector::zeros(self.n)
    }
}
