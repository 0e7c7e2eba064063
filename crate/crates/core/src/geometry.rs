//! Vectors, rotations, camera poses and the epipole-aligned stereo frame.
//!
//! Camera poses use the world-to-camera convention: a world point `X` has
//! camera coordinates `R (X - C)`, so a ray `d` measured in the camera frame
//! points along `Rᵀ d` in the world.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Three-component real vector (directions or scene points).
pub type Vec3 = Vector3<f64>;

/// Norm below which a vector is considered zero.
pub const MIN_NORM: f64 = 1e-12;

/// Tolerance used when validating user-supplied rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("vector norm {0:e} is too small to define a direction")]
    DegenerateVector(f64),
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("camera centres coincide (baseline {0:e}); triangulation is undefined")]
    ZeroBaseline(f64),
    #[error("matrix is not a proper rotation: {0}")]
    NotARotation(String),
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitRay(Vec3);

impl UnitRay {
    /// Normalises `v`; rejects vectors shorter than [`MIN_NORM`].
    pub fn new(v: Vec3) -> Result<Self, GeometryError> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let norm = v.norm();
        if norm < MIN_NORM {
            return Err(GeometryError::DegenerateVector(norm));
        }
        Ok(UnitRay(v / norm))
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        Self::new(Vec3::new(x, y, z))
    }

    pub fn x_axis() -> Self {
        UnitRay(Vec3::x())
    }

    pub fn y_axis() -> Self {
        UnitRay(Vec3::y())
    }

    pub fn z_axis() -> Self {
        UnitRay(Vec3::z())
    }

    #[inline]
    pub fn dir(&self) -> &Vec3 {
        &self.0
    }

    #[inline]
    pub fn into_inner(self) -> Vec3 {
        self.0
    }

    /// Angle between two rays, accurate for both tiny and obtuse angles.
    pub fn angle_to(&self, other: &UnitRay) -> f64 {
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

impl TryFrom<[f64; 3]> for UnitRay {
    type Error = GeometryError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        UnitRay::new(Vec3::new(v[0], v[1], v[2]))
    }
}

impl From<UnitRay> for [f64; 3] {
    fn from(r: UnitRay) -> Self {
        [r.0.x, r.0.y, r.0.z]
    }
}

/// Proper rotation stored as a 3×3 orthonormal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and a positive determinant within
    /// [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let ortho_err = (m.transpose() * m - Matrix3::identity()).abs().max();
        if ortho_err > ROTATION_TOLERANCE {
            return Err(GeometryError::NotARotation(format!(
                "RᵀR deviates from identity by {ortho_err:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::NotARotation(format!("determinant is {det}")));
        }
        Ok(Rotation(m))
    }

    /// Row-major construction, as used by the calibration file format.
    pub fn from_row_slice(rows: &[f64; 9]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_row_slice(rows))
    }

    pub fn rot_x(angle: f64) -> Self {
        axis_angle_to_rotation(&Vec3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        axis_angle_to_rotation(&Vec3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        axis_angle_to_rotation(&Vec3::z(), angle)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    #[inline]
    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// The i-th row as a column vector (`rⁱ`).
    #[inline]
    pub fn row(&self, i: usize) -> Vec3 {
        self.0.row(i).transpose()
    }

    #[inline]
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    #[inline]
    pub fn apply_transpose(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }

    #[inline]
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }
}

/// Rodrigues' formula. The axis need not be normalised; a zero angle (or a
/// zero axis) yields the identity.
pub fn axis_angle_to_rotation(axis: &Vec3, angle: f64) -> Rotation {
    let norm = axis.norm();
    if angle == 0.0 || norm < MIN_NORM {
        return Rotation::identity();
    }
    let k = axis / norm;
    let skew = k.cross_matrix();
    let (s, c) = angle.sin_cos();
    Rotation(Matrix3::identity() + skew * s + skew * skew * (1.0 - c))
}

/// Orientation and centre of a camera in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub orientation: Rotation,
    pub position: Vec3,
}

impl CameraPose {
    pub fn new(orientation: Rotation, position: Vec3) -> Self {
        CameraPose {
            orientation,
            position,
        }
    }

    pub fn identity() -> Self {
        CameraPose::new(Rotation::identity(), Vec3::zeros())
    }

    /// Camera coordinates of a world point.
    #[inline]
    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.orientation.apply(&(world - self.position))
    }

    /// World direction of a ray measured in this camera's frame.
    #[inline]
    pub fn ray_to_world(&self, dir: &Vec3) -> Vec3 {
        self.orientation.apply_transpose(dir)
    }

    /// Spherical projection of a world point; `None` at the camera centre.
    pub fn project_to_sphere(&self, world: &Vec3) -> Option<UnitRay> {
        UnitRay::new(self.to_camera(world)).ok()
    }
}

/// Everything the two-view triangulators share for one camera pair: the
/// poses, the baseline, the epipole in the first camera, the rotation taking
/// that epipole onto the X axis and the rotation from the second camera's
/// frame into the first's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoFrame {
    pub pose: CameraPose,
    pub pose2: CameraPose,
    pub baseline: Vec3,
    pub epipole: UnitRay,
    pub basis_rotation: Rotation,
    pub relative_rotation: Rotation,
    // R_b · R_r, cached because every second-view ray goes through it.
    aligned_relative: Rotation,
}

impl StereoFrame {
    /// First-camera ray in the epipole-aligned frame.
    #[inline]
    pub fn align_first(&self, u: &Vec3) -> Vec3 {
        self.basis_rotation.apply(u)
    }

    /// Second-camera ray in the epipole-aligned frame.
    #[inline]
    pub fn align_second(&self, u2: &Vec3) -> Vec3 {
        self.aligned_relative.apply(u2)
    }

    /// Inverse of [`StereoFrame::align_first`].
    #[inline]
    pub fn unalign_first(&self, v: &Vec3) -> Vec3 {
        self.basis_rotation.apply_transpose(v)
    }

    /// Inverse of [`StereoFrame::align_second`].
    #[inline]
    pub fn unalign_second(&self, v2: &Vec3) -> Vec3 {
        self.aligned_relative.apply_transpose(v2)
    }

    /// Baseline length in scene units.
    pub fn baseline_length(&self) -> f64 {
        self.baseline.norm()
    }
}

/// Rotation `R_b` with `R_b · e = (1, 0, 0)ᵀ`.
///
/// The rotation axis is `(1,0,0)ᵀ × e`. Epipoles in the negative-X half
/// space are first turned by π about the Z axis so the alignment angle is
/// always acute; the angle itself comes from `atan2` rather than `asin` so
/// it stays accurate near π/2.
pub fn epipole_basis_rotation(epipole: &UnitRay) -> Rotation {
    let e = epipole.dir();
    if e.x < 0.0 {
        let flip = Rotation(Matrix3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0)));
        let flipped = flip.apply(e);
        return acute_alignment(&flipped).compose(&flip);
    }
    acute_alignment(e)
}

fn acute_alignment(e: &Vec3) -> Rotation {
    let axis = Vec3::x().cross(e);
    let sin = axis.norm();
    if sin < MIN_NORM * 1e-3 {
        return Rotation::identity();
    }
    let angle = sin.atan2(e.x);
    // Rotating X onto e by `angle`; we need the inverse.
    axis_angle_to_rotation(&axis, angle).transpose()
}

pub fn make_stereo_frame(
    pose: CameraPose,
    pose2: CameraPose,
) -> Result<StereoFrame, GeometryError> {
    let baseline = pose2.position - pose.position;
    let length = baseline.norm();
    if length < MIN_NORM {
        return Err(GeometryError::ZeroBaseline(length));
    }
    let epipole = UnitRay::new(pose.orientation.apply(&(baseline / length)))?;
    let basis_rotation = epipole_basis_rotation(&epipole);
    let relative_rotation = pose.orientation.compose(&pose2.orientation.transpose());
    Ok(StereoFrame {
        pose,
        pose2,
        baseline,
        epipole,
        basis_rotation,
        relative_rotation,
        aligned_relative: basis_rotation.compose(&relative_rotation),
    })
}

/// Frame for a relative pose known only up to scale: the first camera sits
/// at the origin with identity orientation, the second at `t̂` with
/// orientation `relative`.
pub fn make_similarity_frame(relative: Rotation, translation: UnitRay) -> StereoFrame {
    make_stereo_frame(
        CameraPose::identity(),
        CameraPose::new(relative, translation.into_inner()),
    )
    .expect("unit translation always gives a non-zero baseline")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn assert_proper(r: &Rotation, tol: f64) {
        let m = r.matrix();
        assert!((m.transpose() * m - Matrix3::identity()).abs().max() < tol);
        assert!((m.determinant() - 1.0).abs() < tol);
    }

    // Independent construction: the rotation aligning `from` with `to` built
    // from an orthonormal basis pair rather than an axis-angle.
    fn two_vector_alignment(from: &Vec3, to: &Vec3) -> Matrix3<f64> {
        let helper = if from.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let mut perp = from.cross(to);
        if perp.norm() < 1e-9 {
            perp = from.cross(&helper);
        }
        let p = perp.normalize();
        let basis = |a: &Vec3| Matrix3::from_columns(&[*a, p, a.cross(&p)]);
        basis(to) * basis(from).transpose()
    }

    #[test]
    fn aligned_baseline_gives_identity_basis() {
        let f = make_stereo_frame(
            CameraPose::identity(),
            CameraPose::new(Rotation::identity(), Vec3::new(1.0, 0.0, 0.0)),
        )
        .unwrap();
        assert_eq!(*f.epipole.dir(), Vec3::x());
        assert_eq!(f.basis_rotation, Rotation::identity());
        assert_eq!(f.relative_rotation, Rotation::identity());
    }

    #[test]
    fn y_baseline_is_rotated_onto_x() {
        let f = make_stereo_frame(
            CameraPose::identity(),
            CameraPose::new(Rotation::identity(), Vec3::new(0.0, 1.0, 0.0)),
        )
        .unwrap();
        let e = f.basis_rotation.apply(f.epipole.dir());
        assert_abs_diff_eq!(e, Vec3::x(), epsilon = 1e-15);
        assert_proper(&f.basis_rotation, 1e-14);
    }

    #[test]
    fn antiparallel_epipole_is_handled() {
        let f = make_stereo_frame(
            CameraPose::identity(),
            CameraPose::new(Rotation::identity(), Vec3::new(-2.0, 0.0, 0.0)),
        )
        .unwrap();
        let e = f.align_first(f.epipole.dir());
        assert_abs_diff_eq!(e, Vec3::x(), epsilon = 1e-15);
        assert_proper(&f.basis_rotation, 1e-14);

        let nearly = UnitRay::from_xyz(-1.0, 1e-17, 0.0).unwrap();
        let r = epipole_basis_rotation(&nearly);
        assert_abs_diff_eq!(r.apply(nearly.dir()), Vec3::x(), epsilon = 1e-15);
    }

    #[test]
    fn zero_baseline_is_rejected() {
        let p = CameraPose::new(Rotation::rot_x(0.3), Vec3::new(1.0, 2.0, 3.0));
        let q = CameraPose::new(Rotation::identity(), Vec3::new(1.0, 2.0, 3.0 + 1e-13));
        assert!(matches!(
            make_stereo_frame(p, q),
            Err(GeometryError::ZeroBaseline(_))
        ));
    }

    #[test]
    fn similarity_frame_z_translation() {
        let rel = Rotation::rot_z(10f64.to_radians());
        let f = make_similarity_frame(rel, UnitRay::z_axis());
        assert_abs_diff_eq!(
            f.basis_rotation.apply(&Vec3::z()),
            Vec3::x(),
            epsilon = 1e-15
        );
        let g = make_stereo_frame(CameraPose::identity(), CameraPose::new(rel, Vec3::z())).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn similarity_frame_identity_case() {
        let f = make_similarity_frame(Rotation::identity(), UnitRay::x_axis());
        assert_eq!(*f.epipole.dir(), Vec3::x());
        assert_eq!(f.basis_rotation, Rotation::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = axis_angle_to_rotation(&Vec3::z(), FRAC_PI_2);
        assert_abs_diff_eq!(r.apply(&Vec3::x()), Vec3::y(), epsilon = 1e-15);
        assert_eq!(
            axis_angle_to_rotation(&Vec3::new(0.3, 0.1, 2.0), 0.0),
            Rotation::identity()
        );
    }

    #[test]
    fn unit_ray_rejects_short_vectors() {
        assert!(UnitRay::new(Vec3::new(1e-13, 0.0, 0.0)).is_err());
        assert!(UnitRay::new(Vec3::new(f64::NAN, 0.0, 1.0)).is_err());
        let r = UnitRay::from_xyz(3.0, 4.0, 0.0).unwrap();
        assert!((r.dir().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_validation() {
        assert!(Rotation::from_matrix(Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).is_err());
        assert!(Rotation::from_matrix(Matrix3::identity() * 1.001).is_err());
        let r = Rotation::rot_y(0.7);
        assert_eq!(Rotation::from_row_slice(&r.to_row_array()).unwrap(), r);
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-4)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
    }

    fn arb_pose() -> impl Strategy<Value = CameraPose> {
        (
            arb_unit(),
            -PI..PI,
            -5.0f64..5.0,
            -5.0f64..5.0,
            -5.0f64..5.0,
        )
            .prop_map(|(axis, angle, x, y, z)| {
                CameraPose::new(axis_angle_to_rotation(&axis, angle), Vec3::new(x, y, z))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn axis_angle_is_proper(axis in arb_unit(), angle in -10.0f64..10.0) {
            assert_proper(&axis_angle_to_rotation(&axis, angle), 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn basis_rotation_aligns_epipole(p in arb_pose(), q in arb_pose()) {
            prop_assume!((q.position - p.position).norm() > 1e-6);
            let f = make_stereo_frame(p, q).unwrap();
            let aligned = f.basis_rotation.apply(f.epipole.dir());
            prop_assert!((aligned - Vec3::x()).abs().max() < 1e-10);

            // Any rotation aligning e with X differs from R_b only by a
            // rotation about X, so both must send e to the same place.
            let oracle = two_vector_alignment(f.epipole.dir(), &Vec3::x());
            prop_assert!((oracle * f.epipole.dir() - aligned).abs().max() < 1e-10);
            prop_assert!((f.relative_rotation.matrix()
                - p.orientation.matrix() * q.orientation.matrix().transpose()).abs().max() < 1e-12);
        }

        #[test]
        fn similarity_matches_substituted_poses(axis in arb_unit(), angle in -PI..PI, t in arb_unit()) {
            let rel = axis_angle_to_rotation(&axis, angle);
            let t = UnitRay::new(t).unwrap();
            let a = make_similarity_frame(rel, t);
            let b = make_stereo_frame(CameraPose::identity(), CameraPose::new(rel, t.into_inner())).unwrap();
            prop_assert!((a.basis_rotation.matrix() - b.basis_rotation.matrix()).abs().max() < 1e-12);
            prop_assert!((a.relative_rotation.matrix() - b.relative_rotation.matrix()).abs().max() < 1e-12);
            prop_assert!((a.epipole.dir() - b.epipole.dir()).abs().max() < 1e-12);
        }
    }
}
