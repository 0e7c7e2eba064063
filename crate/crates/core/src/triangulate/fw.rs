//! Iterative optimal ray-pair correction on the sphere.
//!
//! Both rays are estimated jointly in a Gauss-Helmert model: the unknowns are
//! the corrected rays, kept on the unit sphere and updated through reduced
//! (tangent-plane) coordinates, subject to the coplanarity constraint
//! `det[e, x, x′] = 0` with the baseline `e`. Each iteration relinearises the
//! constraint at the current estimate and solves the constrained least
//! squares problem in closed form. The fixed point minimises
//! `‖x − u‖² + ‖x′ − u′‖²` over unit rays on a common epipolar plane.

use nalgebra::{Matrix3x2, Vector2, Vector4};

use crate::geometry::{StereoFrame, Vec3};

use super::{
    finish_with_midpoint, plane::working_rays, Correspondence, PlaneFit, PlaneParam,
    TriangulationError, TriangulationResult,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    /// Iteration stops once the update of the estimate is below `tolerance`
    /// times the size of the current observation corrections.
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions {
            tolerance: 0.01,
            max_iterations: 100,
        }
    }
}

/// Orthonormal basis of the tangent plane at the unit vector `x`.
#[inline]
fn tangent_basis(x: &Vec3) -> Matrix3x2<f64> {
    let helper = if x.x.abs() < 0.6 {
        Vec3::x()
    } else if x.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let a = helper.cross(x).normalize();
    let b = x.cross(&a);
    Matrix3x2::from_columns(&[a, b])
}

pub fn optimise_fw(
    c: &Correspondence,
    frame: &StereoFrame,
    options: &FwOptions,
) -> Result<PlaneFit, TriangulationError> {
    let (v, v2, swapped) = working_rays(c, frame);
    let e = Vec3::x();

    let mut x = v;
    let mut x2 = v2;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        let basis = tangent_basis(&x);
        let basis2 = tangent_basis(&x2);

        // Reduced observations relative to the current estimate.
        let obs = basis.tr_mul(&v);
        let obs2 = basis2.tr_mul(&v2);
        let l = Vector4::new(obs.x, obs.y, obs2.x, obs2.y);

        let g0 = e.dot(&x.cross(&x2));
        let grad = basis.tr_mul(&x2.cross(&e));
        let grad2 = basis2.tr_mul(&e.cross(&x));
        let jac = Vector4::new(grad.x, grad.y, grad2.x, grad2.y);
        let jj = jac.norm_squared();
        if !(jj > f64::MIN_POSITIVE) {
            return Err(TriangulationError::DegenerateNoSolution(
                "coplanarity constraint has no gradient",
            ));
        }

        // Minimum-norm corrections satisfying g0 + jᵀ(l + w) = 0.
        let correction = jac * (-(g0 + jac.dot(&l)) / jj);
        let step = l + correction;
        x = (x + basis * Vector2::new(step[0], step[1])).normalize();
        x2 = (x2 + basis2 * Vector2::new(step[2], step[3])).normalize();

        if step.norm() <= options.tolerance * correction.norm() + f64::EPSILON {
            converged = true;
            break;
        }
    }

    // Close the remaining linearisation error exactly: pick the epipolar
    // plane through the estimates and project them onto it.
    let n = e.cross(&x);
    let n2 = e.cross(&x2);
    let normal = if n.dot(&n2) >= 0.0 { n + n2 } else { n - n2 };
    let lambda = if swapped {
        normal.y / normal.z
    } else {
        normal.z / normal.y
    };
    if !lambda.is_finite() {
        return Err(TriangulationError::DegenerateNoSolution(
            "estimated plane is outside the parameterised pencil",
        ));
    }
    let plane = PlaneParam {
        lambda,
        axis_swapped: swapped,
    };
    Ok(PlaneFit {
        plane,
        observed: v,
        observed2: v2,
        corrected: plane.project(&x).normalize(),
        corrected2: plane.project(&x2).normalize(),
        iterations,
        converged,
    })
}

pub fn triangulate_fw(
    c: &Correspondence,
    frame: &StereoFrame,
    options: &FwOptions,
) -> Result<TriangulationResult, TriangulationError> {
    finish_with_midpoint(&optimise_fw(c, frame, options)?, frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_stereo_frame, CameraPose, Rotation, UnitRay};

    fn frame() -> StereoFrame {
        make_stereo_frame(
            CameraPose::identity(),
            CameraPose::new(Rotation::rot_y(0.1), Vec3::new(0.6, 0.0, 0.8)),
        )
        .unwrap()
    }

    #[test]
    fn noise_free_pair_converges_immediately() {
        let f = frame();
        let x = Vec3::new(1.0, -2.0, 4.0);
        let c = Correspondence::new(
            f.pose.project_to_sphere(&x).unwrap(),
            f.pose2.project_to_sphere(&x).unwrap(),
        );
        let fit = optimise_fw(&c, &f, &FwOptions::default()).unwrap();
        assert!(fit.converged && fit.iterations <= 2);
        assert!((fit.corrected - fit.observed).norm() < 1e-14);
        assert!((fit.corrected2 - fit.observed2).norm() < 1e-14);
        let r = triangulate_fw(&c, &f, &FwOptions::default()).unwrap();
        assert!((r.point - x).norm() < 1e-12);
    }

    #[test]
    fn corrected_rays_are_unit_and_coplanar() {
        let f = frame();
        let c = Correspondence::new(
            UnitRay::from_xyz(0.1, 0.2, 1.0).unwrap(),
            UnitRay::from_xyz(-0.2, 0.25, 1.0).unwrap(),
        );
        let fit = optimise_fw(&c, &f, &FwOptions::default()).unwrap();
        assert!(fit.converged);
        let n = fit.plane.normal();
        assert!(fit.corrected.dot(&n).abs() < 1e-15);
        assert!(fit.corrected2.dot(&n).abs() < 1e-15);
        assert!((fit.corrected.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let f = frame();
        let c = Correspondence::new(
            UnitRay::from_xyz(0.1, 0.2, 1.0).unwrap(),
            UnitRay::from_xyz(-0.2, 0.35, 1.0).unwrap(),
        );
        let opts = FwOptions {
            tolerance: 0.0,
            max_iterations: 3,
        };
        let fit = optimise_fw(&c, &f, &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
        let r = triangulate_fw(&c, &f, &opts).unwrap();
        assert_eq!(r.status, super::super::Status::NotConverged);
    }
}
