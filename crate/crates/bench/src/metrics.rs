use nalgebra::Vector2;
use sphtri::{Correspondence, StereoFrame, TriangulationError, TriangulationResult, Vec3};

/// Error measures of one triangulated point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMetrics {
    /// `‖x̂ − u‖ + ‖x̂′ − u′‖` with `x̂` the reprojection of the point onto
    /// each unit sphere.
    pub s2: f64,
    /// Same distance on the z = 1 plane; `None` when the observation or the
    /// reprojection lies at or behind the plane's horizon.
    pub p2: Option<f64>,
    /// Distance to the ground-truth point.
    pub r3: Option<f64>,
    /// Summed length of the ray corrections made by the method.
    pub correction: f64,
    /// Corrected first ray, for comparisons between methods.
    pub corrected: Vec3,
}

pub type Outcome = Result<(TriangulationResult, PointMetrics), TriangulationError>;

fn plane(v: &Vec3) -> Option<Vector2<f64>> {
    (v.z > 0.0).then(|| Vector2::new(v.x / v.z, v.y / v.z))
}

pub fn sphere_reprojection(point: &Vec3, c: &Correspondence, frame: &StereoFrame) -> f64 {
    let err = |x: Vec3, u: &Vec3| {
        let n = x.norm();
        if n > 0.0 {
            (x / n - u).norm()
        } else {
            (x - u).norm()
        }
    };
    err(frame.pose.to_camera(point), c.u.dir()) + err(frame.pose2.to_camera(point), c.u2.dir())
}

pub fn plane_reprojection(point: &Vec3, c: &Correspondence, frame: &StereoFrame) -> Option<f64> {
    let d = plane(&frame.pose.to_camera(point))? - plane(c.u.dir())?;
    let d2 = plane(&frame.pose2.to_camera(point))? - plane(c.u2.dir())?;
    Some(d.norm() + d2.norm())
}

pub fn evaluate(
    result: Result<TriangulationResult, TriangulationError>,
    c: &Correspondence,
    frame: &StereoFrame,
    truth: Option<&Vec3>,
) -> Outcome {
    let r = result?;
    let metrics = PointMetrics {
        s2: sphere_reprojection(&r.point, c, frame),
        p2: plane_reprojection(&r.point, c, frame),
        r3: truth.map(|x| (r.point - x).norm()),
        correction: r.residual,
        corrected: r.corrected,
    };
    Ok((r, metrics))
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sphtri::{make_stereo_frame, CameraPose, Rotation, UnitRay};

    #[test]
    fn statistics() {
        assert_eq!(mean(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(mean(&[1.0, 2.0]), Some(1.5));
    }

    #[test]
    fn reprojection_of_exact_point_is_zero() {
        let f = make_stereo_frame(
            CameraPose::identity(),
            CameraPose::new(Rotation::rot_y(0.3), Vec3::new(1.0, 0.0, 0.0)),
        )
        .unwrap();
        let x = Vec3::new(0.2, 0.1, 3.0);
        let c = Correspondence::new(
            f.pose.project_to_sphere(&x).unwrap(),
            f.pose2.project_to_sphere(&x).unwrap(),
        );
        assert!(sphere_reprojection(&x, &c, &f) < 1e-15);
        assert!(plane_reprojection(&x, &c, &f).unwrap() < 1e-15);
        let behind = Correspondence::new(UnitRay::from_xyz(0.0, 0.0, -1.0).unwrap(), c.u2);
        assert_eq!(plane_reprojection(&x, &behind, &f), None);
    }
}
