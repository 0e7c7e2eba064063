//! Two-view triangulation for calibrated omnidirectional and narrow
//! field-of-view cameras, working directly with rays on the unit sphere.
//!
//! * [`geometry`]: rotations, camera poses and the epipole-aligned stereo frame.
//! * [`camera`]: double-sphere fisheye and pinhole projection models.
//! * [`triangulate`]: the triangulation methods.
//! * [`synthetic`]: synthetic scenes and noise models.
//! * [`dataset`]: correspondence datasets and result files.

pub mod camera;
pub mod dataset;
pub mod geometry;
pub mod synthetic;
pub mod triangulate;

pub use camera::{Camera, CameraError, CameraModel, DoubleSphereParams, PinholeParams, PixelPoint};
pub use geometry::{
    make_stereo_frame, CameraPose, GeometryError, Rotation, StereoFrame, UnitRay, Vec3,
};
pub use triangulate::{Correspondence, Method, Status, TriangulationError, TriangulationResult};
