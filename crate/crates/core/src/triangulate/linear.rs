use nalgebra::{DMatrix, DVector, Vector3};

use crate::geometry::{CameraPose, UnitRay};

use super::{MidpointScalars, Status, TriangulationError, TriangulationResult};

/// Smallest admissible ratio of extreme diagonal entries of the triangular
/// factor of the design matrix.
const RANK_THRESHOLD: f64 = 1e-12;

/// Linear triangulation from any number of spherical observations.
///
/// Each observation `(u, pose)` contributes the two independent rows of
/// `u × R (X − C) = 0`:
///
/// ```text
/// (u₁ r³ − u₃ r¹)ᵀ X = (u₁ r³ − u₃ r¹)ᵀ C
/// (u₂ r³ − u₃ r²)ᵀ X = (u₂ r³ − u₃ r²)ᵀ C
/// ```
///
/// and `X` is the least-squares solution of the stacked system.
pub fn triangulate_sph_linear(
    observations: &[(UnitRay, CameraPose)],
) -> Result<TriangulationResult, TriangulationError> {
    if observations.len() < 2 {
        return Err(TriangulationError::TooFewObservations(observations.len()));
    }
    let rows = 2 * observations.len();
    let mut a = DMatrix::<f64>::zeros(rows, 3);
    let mut b = DVector::<f64>::zeros(rows);
    for (k, (ray, pose)) in observations.iter().enumerate() {
        let u = ray.dir();
        let r = &pose.orientation;
        let (r1, r2, r3) = (r.row(0), r.row(1), r.row(2));
        let row1: Vector3<f64> = r3 * u.x - r1 * u.z;
        let row2: Vector3<f64> = r3 * u.y - r2 * u.z;
        a.set_row(2 * k, &row1.transpose());
        a.set_row(2 * k + 1, &row2.transpose());
        b[2 * k] = row1.dot(&pose.position);
        b[2 * k + 1] = row2.dot(&pose.position);
    }

    // Householder QR solves this small least-squares problem to working
    // precision; the SVD solver loses several digits on it.
    let qr = a.qr();
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    let (d_max, d_min) = (diag.max(), diag.min());
    if !(d_max > 0.0) || d_min / d_max < RANK_THRESHOLD {
        return Err(TriangulationError::DegenerateNoSolution(
            "linear system is rank deficient",
        ));
    }
    qr.q_tr_mul(&mut b);
    let x = r.solve_upper_triangular(&b.rows(0, 3).into_owned()).ok_or(
        TriangulationError::DegenerateNoSolution("linear system is rank deficient"),
    )?;
    let point = Vector3::new(x[0], x[1], x[2]);

    // Depth along the first two rays, for the cheirality flag.
    let depth = |(ray, pose): &(UnitRay, CameraPose)| ray.dir().dot(&pose.to_camera(&point));
    let scalars = MidpointScalars {
        alpha: depth(&observations[0]),
        alpha2: depth(&observations[1]),
    };
    let status = if scalars.alpha < 0.0 && scalars.alpha2 < 0.0 {
        Status::BehindBothCameras
    } else {
        Status::Ok
    };
    Ok(TriangulationResult {
        point,
        corrected: *observations[0].0.dir(),
        corrected2: *observations[1].0.dir(),
        residual: 0.0,
        scalars,
        plane: None,
        status,
        iterations: 0,
    })
}
