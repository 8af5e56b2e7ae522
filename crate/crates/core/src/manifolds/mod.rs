//! Geometry kernel for the two manifolds used by the solver: the Stiefel
//! manifold St(n, p) (with p = n giving the orthogonal group O(r)) and the
//! unit sphere S^{n-1}, both embedded in Euclidean space with the metric
//! inherited from it.
//!
//! Points and tangent vectors are plain dense arrays; a tangent vector is
//! implicitly "at" the point it was projected at. Every operation is a pure
//! function of its inputs.

mod sphere;
mod stiefel;

pub use sphere::Sphere;
pub use stiefel::{nearest_orthogonal, random_orthogonal, Stiefel};

pub(crate) use stiefel::gram_schmidt;

use rand::Rng;

use crate::error::Result;

/// Vector-space operations the solver needs from an ambient representation.
///
/// Implemented for `DMatrix<f64>` (Stiefel) and `DVector<f64>` (sphere) so
/// the outer loop and the sub-algorithms can be written once.
pub trait Ambient: Clone {
    /// Euclidean inner product (Frobenius for matrices).
    fn dot(&self, other: &Self) -> f64;

    /// `a * self`.
    fn scaled(&self, a: f64) -> Self;

    /// `self + a * other`.
    fn add_scaled(&self, a: f64, other: &Self) -> Self;

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn is_finite(&self) -> bool;

    /// Number of scalar entries (linear, column-major for matrices).
    fn n_entries(&self) -> usize;

    fn entry(&self, i: usize) -> f64;

    fn entry_mut(&mut self, i: usize) -> &mut f64;
}

impl Ambient for nalgebra::DMatrix<f64> {
    fn dot(&self, other: &Self) -> f64 {
        nalgebra::DMatrix::dot(self, other)
    }

    fn scaled(&self, a: f64) -> Self {
        self * a
    }

    fn add_scaled(&self, a: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.zip_apply(other, |o, v| *o += a * v);
        out
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn n_entries(&self) -> usize {
        self.len()
    }

    fn entry(&self, i: usize) -> f64 {
        self[i]
    }

    fn entry_mut(&mut self, i: usize) -> &mut f64 {
        &mut self[i]
    }
}

impl Ambient for nalgebra::DVector<f64> {
    fn dot(&self, other: &Self) -> f64 {
        nalgebra::DVector::dot(self, other)
    }

    fn scaled(&self, a: f64) -> Self {
        self * a
    }

    fn add_scaled(&self, a: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(a, other, 1.0);
        out
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn n_entries(&self) -> usize {
        self.len()
    }

    fn entry(&self, i: usize) -> f64 {
        self[i]
    }

    fn entry_mut(&mut self, i: usize) -> &mut f64 {
        &mut self[i]
    }
}

/// A Riemannian submanifold of Euclidean space.
///
/// `Point` and `Tangent` share the same ambient representation; tangency is
/// a property checked by [`Manifold::tangency_error`], not a type-level
/// guarantee.
pub trait Manifold {
    type Point: Clone + Send + Sync;
    type Tangent: Ambient + Send + Sync;

    fn name(&self) -> &'static str;

    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    /// Euclidean norm of the point seen as an ambient array; used to scale
    /// finite-difference steps.
    fn point_norm(&self, x: &Self::Point) -> f64;

    /// Max-abs violation of the defining constraint (`X^T X = I` or
    /// `‖x‖ = 1`) at `x`.
    fn feasibility_error(&self, x: &Self::Point) -> f64;

    /// Max-abs violation of the tangency condition of `v` at `x`.
    fn tangency_error(&self, x: &Self::Point, v: &Self::Tangent) -> f64;

    /// Orthogonal projection of an ambient array onto the tangent space at
    /// `x`. Converts Euclidean gradients to Riemannian ones.
    fn project(&self, x: &Self::Point, v: &Self::Tangent) -> Result<Self::Tangent>;

    /// First-order retraction of the tangent vector `v` at `x`.
    fn retract(&self, x: &Self::Point, v: &Self::Tangent) -> Result<Self::Point>;

    /// Projection-based vector transport of `v` to the tangent space at `to`.
    fn transport(&self, to: &Self::Point, v: &Self::Tangent) -> Result<Self::Tangent> {
        self.project(to, v)
    }

    /// Uniform-ish random point, deterministic for a fixed generator state.
    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    fn zero_tangent(&self, x: &Self::Point) -> Self::Tangent;

    fn inner(&self, u: &Self::Tangent, v: &Self::Tangent) -> f64 {
        u.dot(v)
    }

    fn norm(&self, v: &Self::Tangent) -> f64 {
        v.norm()
    }
}

/// Riemannian gradient: tangent projection of the Euclidean gradient.
pub fn riemannian_gradient<M: Manifold>(
    manifold: &M,
    x: &M::Point,
    egrad: &M::Tangent,
) -> Result<M::Tangent> {
    manifold.project(x, egrad)
}
