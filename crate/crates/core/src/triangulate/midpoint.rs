use crate::geometry::{StereoFrame, Vec3};

use super::{Correspondence, MidpointScalars, Status, TriangulationError, TriangulationResult};

/// Relative threshold on `(d·d)(d′·d′) − (d·d′)²` below which rays are parallel.
const PARALLEL_THRESHOLD: f64 = 1e-14;

/// Midpoint of the shortest segment between the rays `c + α d` and
/// `c′ + α′ d′`. The directions need not be unit length.
pub fn midpoint_of_rays(
    c: &Vec3,
    d: &Vec3,
    c2: &Vec3,
    d2: &Vec3,
) -> Result<(Vec3, MidpointScalars), TriangulationError> {
    let t = c2 - c;
    let dd = d.dot(d);
    let d2d2 = d2.dot(d2);
    let dd2 = d.dot(d2);
    let denom = dd * d2d2 - dd2 * dd2;
    if !(denom >= PARALLEL_THRESHOLD * dd * d2d2) {
        return Err(TriangulationError::DegenerateNoSolution(
            "rays are parallel",
        ));
    }
    let dt = d.dot(&t);
    let d2t = d2.dot(&t);
    let alpha = (d2d2 * dt - dd2 * d2t) / denom;
    let alpha2 = (dd2 * dt - dd * d2t) / denom;
    let point = (c + d * alpha + c2 + d2 * alpha2) * 0.5;
    Ok((point, MidpointScalars { alpha, alpha2 }))
}

pub fn triangulate_midpoint(
    c: &Correspondence,
    frame: &StereoFrame,
) -> Result<TriangulationResult, TriangulationError> {
    let (point, scalars) = midpoint_of_rays(
        &frame.pose.position,
        &frame.pose.ray_to_world(c.u.dir()),
        &frame.pose2.position,
        &frame.pose2.ray_to_world(c.u2.dir()),
    )?;
    let status = if scalars.alpha < 0.0 && scalars.alpha2 < 0.0 {
        Status::BehindBothCameras
    } else {
        Status::Ok
    };
    Ok(TriangulationResult {
        point,
        corrected: *c.u.dir(),
        corrected2: *c.u2.dir(),
        residual: 0.0,
        scalars,
        plane: None,
        status,
        iterations: 0,
    })
}
