use super::{eval_checked, riemannian_grad, InnerOutcome, SmoothedObjective, StopReason};
use crate::error::{Error, Result};
use crate::manifolds::{Ambient, Manifold};

const INITIAL_RADIUS: f64 = 1.0;
const MAX_RADIUS: f64 = 100.0;
const SHRINK: f64 = 0.25;
const EXPAND: f64 = 2.0;
const RHO_SHRINK: f64 = 0.25;
const RHO_EXPAND: f64 = 0.75;
const RHO_ACCEPT: f64 = 0.1;
const MAX_NONFINITE_RETRIES: usize = 10;

/// Central finite-difference Hessian-vector product of the smoothed
/// objective's Riemannian gradient:
///
///   H v ~ ‖v‖ [P_x grad f~(R(x, h u)) - P_x grad f~(R(x, -h u))] / (2h)
///
/// with u = v/‖v‖ and h = 1e-5 (1 + ‖x‖); the displaced gradients are
/// transported back to x by projection. Keeps the objective interface
/// first-order only.
pub fn fd_hessian_vec<M, O>(
    obj: &O,
    manifold: &M,
    x: &M::Point,
    mu: f64,
    v: &M::Tangent,
) -> Result<M::Tangent>
where
    M: Manifold,
    O: SmoothedObjective<M>,
{
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return Ok(v.clone());
    }
    let u = v.scaled(1.0 / vnorm);
    let h = 1e-5 * (1.0 + manifold.point_norm(x));
    let xp = manifold.retract(x, &u.scaled(h))?;
    let xm = manifold.retract(x, &u.scaled(-h))?;
    let gp = manifold.transport(x, &riemannian_grad(obj, manifold, &xp, mu)?)?;
    let gm = manifold.transport(x, &riemannian_grad(obj, manifold, &xm, mu)?)?;
    Ok(gp.add_scaled(-1.0, &gm).scaled(vnorm / (2.0 * h)))
}

/// Diagnostics of one truncated-CG subproblem solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcgOutcome {
    /// Model decrease m(0) - m(step) predicted for the returned step.
    pub predicted_reduction: f64,
    pub hit_boundary: bool,
    pub negative_curvature: bool,
    pub iterations: usize,
}

/// Steihaug-Toint truncated CG on the quadratic model
/// m(s) = <g, s> + 0.5 <s, H s> inside ‖s‖ <= radius.
///
/// Stops on the trust-region boundary, on negative curvature, or once the
/// residual satisfies ‖r‖ <= min(0.1, sqrt(‖g‖)) ‖g‖.
fn steihaug<T, H>(g: &T, mut hvp: H, radius: f64, max_iters: usize) -> Result<(T, TcgOutcome)>
where
    T: Ambient,
    H: FnMut(&T) -> Result<T>,
{
    let gnorm = g.norm();
    let mut z = g.scaled(0.0);
    let mut out = TcgOutcome {
        predicted_reduction: 0.0,
        hit_boundary: false,
        negative_curvature: false,
        iterations: 0,
    };
    if gnorm == 0.0 {
        return Ok((z, out));
    }
    let stop = gnorm * gnorm.sqrt().min(0.1);
    let mut r = g.clone();
    let mut d = g.scaled(-1.0);
    let mut rr = gnorm * gnorm;

    for _ in 0..max_iters {
        out.iterations += 1;
        let hd = hvp(&d)?;
        let dhd = d.dot(&hd);
        if !dhd.is_finite() {
            return Err(Error::Stagnation(format!(
                "non-finite model curvature {dhd} in truncated CG"
            )));
        }
        if dhd <= 0.0 {
            let tau = boundary_tau(&z, &d, radius);
            out.predicted_reduction -= tau * d.dot(&r) + 0.5 * tau * tau * dhd;
            out.hit_boundary = true;
            out.negative_curvature = true;
            return Ok((z.add_scaled(tau, &d), out));
        }
        let alpha = rr / dhd;
        let z_next = z.add_scaled(alpha, &d);
        if z_next.norm() >= radius {
            let tau = boundary_tau(&z, &d, radius);
            out.predicted_reduction -= tau * d.dot(&r) + 0.5 * tau * tau * dhd;
            out.hit_boundary = true;
            return Ok((z.add_scaled(tau, &d), out));
        }
        // Exact CG identity: the model drops by alpha <r, r>/2 per step.
        out.predicted_reduction += 0.5 * alpha * rr;
        let r_next = r.add_scaled(alpha, &hd);
        let rr_next = r_next.dot(&r_next);
        z = z_next;
        if rr_next.sqrt() <= stop {
            return Ok((z, out));
        }
        let beta = rr_next / rr;
        d = r_next.scaled(-1.0).add_scaled(beta, &d);
        r = r_next;
        rr = rr_next;
    }
    Ok((z, out))
}

/// Positive root of ‖z + tau d‖ = radius.
fn boundary_tau<T: Ambient>(z: &T, d: &T, radius: f64) -> f64 {
    let dd = d.dot(d);
    if dd == 0.0 {
        return 0.0;
    }
    let zd = z.dot(d);
    let zz = z.dot(z);
    let disc = (zd * zd + dd * (radius * radius - zz)).max(0.0);
    (-zd + disc.sqrt()) / dd
}

/// One trust-region subproblem at `x`: truncated CG on the quadratic model
/// with the finite-difference Hessian operator. Returns the tangent step
/// and the tCG diagnostics.
pub fn rtr_subproblem<M, O>(
    obj: &O,
    manifold: &M,
    x: &M::Point,
    mu: f64,
    radius: f64,
) -> Result<(M::Tangent, TcgOutcome)>
where
    M: Manifold,
    O: SmoothedObjective<M>,
{
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::Domain(format!(
            "trust-region radius must be positive, got {radius}"
        )));
    }
    let grad = riemannian_grad(obj, manifold, x, mu)?;
    let max_iters = manifold.dim().max(1) + 10;
    steihaug(
        &grad,
        |v| fd_hessian_vec(obj, manifold, x, mu, v),
        radius,
        max_iters,
    )
}

pub(crate) fn rtr_inner<M, O>(
    obj: &O,
    manifold: &M,
    x0: M::Point,
    mu: f64,
    grad_tol: Option<f64>,
    iter_cap: usize,
) -> Result<InnerOutcome<M>>
where
    M: Manifold,
    O: SmoothedObjective<M>,
{
    let mut x = x0;
    let mut value = eval_checked(obj, &x, mu)?;
    let mut grad = riemannian_grad(obj, manifold, &x, mu)?;
    let mut grad_norm = grad.norm();
    let mut radius = INITIAL_RADIUS;
    let mut iters = 0;
    let mut stagnated = false;
    let mut nonfinite_retries = 0;
    let max_cg_iters = manifold.dim().max(1) + 10;

    let reason = loop {
        if grad_tol.is_some_and(|tol| grad_norm < tol) {
            break StopReason::TolMet;
        }
        if iters >= iter_cap {
            break StopReason::CapHit;
        }
        if grad_norm == 0.0 || radius < 1e-18 {
            stagnated = true;
            break StopReason::CapHit;
        }

        let (step, tcg) = steihaug(
            &grad,
            |v| fd_hessian_vec(obj, manifold, &x, mu, v),
            radius,
            max_cg_iters,
        )?;
        iters += 1;

        let candidate = manifold.retract(&x, &step).ok();
        let cand_value = candidate.as_ref().map(|p| obj.eval(p, mu));
        let model_ok = tcg.predicted_reduction.is_finite()
            && cand_value.as_ref().is_some_and(|v| v.is_finite());
        if !model_ok {
            nonfinite_retries += 1;
            if nonfinite_retries > MAX_NONFINITE_RETRIES {
                return Err(Error::Stagnation(format!(
                    "trust region could not recover finite model values after \
                     {MAX_NONFINITE_RETRIES} radius shrinks at mu = {mu:.3e}"
                )));
            }
            radius *= SHRINK;
            continue;
        }
        nonfinite_retries = 0;
        let candidate = candidate.expect("checked above");
        let cand_value = cand_value.expect("checked above");

        if tcg.predicted_reduction <= 0.0 {
            // Finite-difference noise has swamped the model; retrying on a
            // smaller radius either recovers a usable model or the radius
            // floor above ends the loop.
            radius *= SHRINK;
            continue;
        }

        let rho = (value - cand_value) / tcg.predicted_reduction;
        if rho < RHO_SHRINK {
            radius *= SHRINK;
        } else if rho > RHO_EXPAND && tcg.hit_boundary {
            radius = (radius * EXPAND).min(MAX_RADIUS);
        }
        if rho > RHO_ACCEPT {
            x = candidate;
            value = cand_value;
            grad = riemannian_grad(obj, manifold, &x, mu)?;
            grad_norm = grad.norm();
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::Sphere;
    use nalgebra::{DMatrix, DVector};

    /// Quadratic 0.5 x^T A x on the sphere; analytic Euclidean Hessian A.
    struct SphereQuadratic {
        manifold: Sphere,
        a: DMatrix<f64>,
    }

    impl SmoothedObjective<Sphere> for SphereQuadratic {
        fn manifold(&self) -> &Sphere {
            &self.manifold
        }

        fn eval(&self, x: &DVector<f64>, _mu: f64) -> f64 {
            0.5 * x.dot(&(&self.a * x))
        }

        fn euclidean_grad(&self, x: &DVector<f64>, _mu: f64) -> DVector<f64> {
            &self.a * x
        }
    }

    fn quadratic(diag: &[f64]) -> SphereQuadratic {
        let n = diag.len();
        SphereQuadratic {
            manifold: Sphere::new(n).unwrap(),
            a: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    #[test]
    fn zero_gradient_gives_zero_step() {
        let obj = quadratic(&[1.0, 2.0, 3.0]);
        // e1 is an eigenvector, so the Riemannian gradient vanishes there.
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let (step, out) = rtr_subproblem(&obj, &obj.manifold, &x, 1.0, 1.0).unwrap();
        assert_eq!(step.norm(), 0.0);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn fd_hessian_matches_analytic_on_quadratic() {
        // In a tangent chart of the sphere the Riemannian Hessian of
        // 0.5 x^T A x at x is P(A - (x^T A x) I)P; compare the FD operator
        // against it on tangent probes.
        let obj = quadratic(&[3.0, 1.0, 0.5]);
        let m = &obj.manifold;
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        use crate::manifolds::Manifold as _;
        for v_raw in [
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.3, -0.4, 0.0]),
        ] {
            let v = m.project(&x, &v_raw).unwrap();
            let hv = fd_hessian_vec(&obj, m, &x, 1.0, &v).unwrap();
            let xax = x.dot(&(&obj.a * &x));
            let analytic = m.project(&x, &(&obj.a * &v - &v * xax)).unwrap();
            let rel = (&hv - &analytic).norm() / analytic.norm().max(1e-12);
            assert!(rel <= 1e-4, "relative error {rel}");
        }
    }

    #[test]
    fn negative_curvature_steps_to_boundary() {
        // Minimizing 0.5 x^T A x from near the largest eigenvector: the
        // model curvature toward smaller eigenvalues is negative, so tCG
        // must stop on the trust-region boundary.
        let obj = quadratic(&[5.0, 0.1, 0.1]);
        let m = &obj.manifold;
        let x = DVector::from_vec(vec![0.9995, 0.02, 0.02]);
        let x = &x / x.norm();
        let radius = 0.5;
        let (step, out) = rtr_subproblem(&obj, m, &x, 1.0, radius).unwrap();
        assert!(out.hit_boundary);
        assert!((step.norm() - radius).abs() <= 1e-8 * radius.max(1.0));
    }

    #[test]
    fn rtr_minimizes_sphere_quadratic() {
        // The minimum of 0.5 x^T A x on the sphere is half the smallest
        // eigenvalue.
        let obj = quadratic(&[4.0, 2.0, 0.5]);
        let m = obj.manifold.clone();
        let x0 = DVector::from_vec(vec![0.6, 0.64, 0.48]);
        let x0 = &x0 / x0.norm();
        let out = rtr_inner(&obj, &m, x0, 1.0, Some(1e-9), 200).unwrap();
        assert_eq!(out.reason, StopReason::TolMet);
        assert!((out.value - 0.25).abs() <= 1e-6, "value {}", out.value);
        assert!(out.point[2].abs() > 0.999);
    }

    #[test]
    fn rtr_rejects_nonpositive_radius() {
        let obj = quadratic(&[1.0, 2.0]);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert!(rtr_subproblem(&obj, &obj.manifold, &x, 1.0, 0.0).is_err());
    }
}
