//! Two-view triangulation from rays on the unit sphere.
//!
//! Six methods are provided:
//!
//! * [`triangulate_midpoint`]: closed-form midpoint of the common perpendicular.
//! * [`triangulate_sph_linear`]: linear least squares on the ray/point cross product.
//! * [`triangulate_sph_quad`]: closed-form choice of the epipolar plane minimising
//!   the summed squared ray-to-plane distances, then midpoint.
//! * [`triangulate_sph_abs`]: same with the summed absolute distances.
//! * [`triangulate_fw`]: iterative Gauss-Helmert correction of both rays on the
//!   sphere under the coplanarity constraint.
//! * [`triangulate_pln_poly`]: optimal correction on the z = 1 image plane via
//!   the degree-six polynomial in the epipolar line pencil.
//!
//! All methods consume a [`Correspondence`] (one ray per camera, each in its
//! own camera frame) and a [`StereoFrame`].

mod fw;
mod linear;
mod midpoint;
mod plane;
mod pln_poly;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{StereoFrame, UnitRay, Vec3};

pub use fw::{optimise_fw, triangulate_fw, FwOptions};
pub use linear::triangulate_sph_linear;
pub use midpoint::{midpoint_of_rays, triangulate_midpoint};
pub use plane::{optimise_sph_abs, optimise_sph_quad, triangulate_sph_abs, triangulate_sph_quad};
pub use pln_poly::{optimise_pln_poly, triangulate_pln_poly};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TriangulationError {
    #[error("no unique solution: {0}")]
    DegenerateNoSolution(&'static str),
    #[error("ray {0:?} cannot be represented on the z = 1 plane")]
    NotRepresentable([f64; 3]),
    #[error("at least two observations are required, got {0}")]
    TooFewObservations(usize),
}

/// A ray pair observing the same scene point, each ray in its own camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub u: UnitRay,
    pub u2: UnitRay,
}

impl Correspondence {
    pub fn new(u: UnitRay, u2: UnitRay) -> Self {
        Correspondence { u, u2 }
    }
}

/// Member of the pencil of planes through the baseline, in the
/// epipole-aligned frame. The normal is `(0, 1, λ)` or, with the axes
/// swapped, `(0, λ, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneParam {
    pub lambda: f64,
    pub axis_swapped: bool,
}

impl PlaneParam {
    #[inline]
    pub fn normal(&self) -> Vec3 {
        if self.axis_swapped {
            Vec3::new(0.0, self.lambda, 1.0)
        } else {
            Vec3::new(0.0, 1.0, self.lambda)
        }
    }

    /// Orthogonal projection of `v` onto the plane. The result is generally
    /// shorter than `v`.
    #[inline]
    pub fn project(&self, v: &Vec3) -> Vec3 {
        let n = self.normal();
        v - n * (v.dot(&n) / n.norm_squared())
    }
}

/// Output of a ray-pair optimiser, expressed in the epipole-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub plane: PlaneParam,
    /// Working rays the optimiser started from.
    pub observed: Vec3,
    pub observed2: Vec3,
    pub corrected: Vec3,
    pub corrected2: Vec3,
    pub iterations: u32,
    pub converged: bool,
}

impl PlaneFit {
    /// Summed Euclidean length of the two corrections.
    pub fn residual(&self) -> f64 {
        (self.corrected - self.observed).norm() + (self.corrected2 - self.observed2).norm()
    }
}

/// Distances along each ray to the closest points of the two rays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointScalars {
    pub alpha: f64,
    pub alpha2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Ok,
    /// The rays meet behind both camera centres.
    BehindBothCameras,
    /// An iterative method hit its iteration limit; the last iterate is returned.
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulationResult {
    pub point: Vec3,
    /// Corrected first ray in the first camera's frame (not re-normalised).
    pub corrected: Vec3,
    /// Corrected second ray in the second camera's frame.
    pub corrected2: Vec3,
    /// `‖û − u‖ + ‖û′ − u′‖`; zero for methods that do not correct the rays.
    pub residual: f64,
    pub scalars: MidpointScalars,
    /// Epipolar plane chosen by the optimising methods.
    pub plane: Option<PlaneParam>,
    pub status: Status,
    pub iterations: u32,
}

impl TriangulationResult {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

/// Triangulation method identifiers, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "midpoint")]
    Midpoint,
    #[serde(rename = "sph-lin")]
    SphLin,
    #[serde(rename = "sph-quad")]
    SphQuad,
    #[serde(rename = "sph-abs")]
    SphAbs,
    #[serde(rename = "f-w")]
    Fw,
    #[serde(rename = "pln-poly")]
    PlnPoly,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Midpoint,
        Method::SphLin,
        Method::SphQuad,
        Method::SphAbs,
        Method::Fw,
        Method::PlnPoly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Midpoint => "midpoint",
            Method::SphLin => "sph-lin",
            Method::SphQuad => "sph-quad",
            Method::SphAbs => "sph-abs",
            Method::Fw => "f-w",
            Method::PlnPoly => "pln-poly",
        }
    }

    /// Whether the method corrects the ray pair before intersecting.
    pub fn optimises_rays(&self) -> bool {
        matches!(
            self,
            Method::SphQuad | Method::SphAbs | Method::Fw | Method::PlnPoly
        )
    }

    /// Triangulates one correspondence with this method.
    pub fn triangulate(
        &self,
        c: &Correspondence,
        frame: &StereoFrame,
    ) -> Result<TriangulationResult, TriangulationError> {
        match self {
            Method::Midpoint => triangulate_midpoint(c, frame),
            Method::SphLin => triangulate_sph_linear(&[(c.u, frame.pose), (c.u2, frame.pose2)]),
            Method::SphQuad => triangulate_sph_quad(c, frame),
            Method::SphAbs => triangulate_sph_abs(c, frame),
            Method::Fw => triangulate_fw(c, frame, &FwOptions::default()),
            Method::PlnPoly => triangulate_pln_poly(c, frame),
        }
    }

    /// Runs only the ray-correction stage; `None` for methods without one.
    pub fn optimise(
        &self,
        c: &Correspondence,
        frame: &StereoFrame,
    ) -> Option<Result<PlaneFit, TriangulationError>> {
        match self {
            Method::SphQuad => Some(optimise_sph_quad(c, frame)),
            Method::SphAbs => Some(optimise_sph_abs(c, frame)),
            Method::Fw => Some(optimise_fw(c, frame, &FwOptions::default())),
            Method::PlnPoly => Some(optimise_pln_poly(c, frame).map(|p| p.fit)),
            Method::Midpoint | Method::SphLin => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown triangulation method '{0}' (expected one of midpoint, sph-lin, sph-quad, sph-abs, f-w, pln-poly)")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

/// Rotates an aligned-frame fit back into the camera frames and intersects
/// the corrected rays with the midpoint method.
fn finish_with_midpoint(
    fit: &PlaneFit,
    frame: &StereoFrame,
) -> Result<TriangulationResult, TriangulationError> {
    let corrected = frame.unalign_first(&fit.corrected);
    let corrected2 = frame.unalign_second(&fit.corrected2);
    let (point, scalars) = midpoint_of_rays(
        &frame.pose.position,
        &frame.pose.ray_to_world(&corrected),
        &frame.pose2.position,
        &frame.pose2.ray_to_world(&corrected2),
    )?;
    let status = if !fit.converged {
        Status::NotConverged
    } else if scalars.alpha < 0.0 && scalars.alpha2 < 0.0 {
        Status::BehindBothCameras
    } else {
        Status::Ok
    };
    Ok(TriangulationResult {
        point,
        corrected,
        corrected2,
        residual: fit.residual(),
        scalars,
        plane: Some(fit.plane),
        status,
        iterations: fit.iterations,
    })
}
