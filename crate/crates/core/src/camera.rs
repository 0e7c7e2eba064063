//! Camera models mapping between image pixels and rays on the unit sphere.
//!
//! Models report raw pixels; whether a pixel lies inside the sensor is a
//! separate question answered by [`CameraModel::in_image`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{UnitRay, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CameraError {
    #[error("point {0:?} is outside the valid projection region of the model")]
    OutsideValidProjection([f64; 3]),
    #[error("pixel ({0}, {1}) is outside the invertible region of the model")]
    OutsideValidDomain(f64, f64),
    #[error("point {0:?} is behind the camera")]
    BehindCamera([f64; 3]),
    #[error("invalid camera parameters: {0}")]
    InvalidParams(String),
    #[error("camera description could not be parsed: {0}")]
    Parse(String),
    #[error("could not read camera description: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        PixelPoint { u, v }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Injective map between the image and the unit sphere.
pub trait CameraModel {
    fn project(&self, point: &Vec3) -> Result<PixelPoint, CameraError>;

    fn unproject(&self, pixel: &PixelPoint) -> Result<UnitRay, CameraError>;

    /// Image size in pixels as `(width, height)`.
    fn image_size(&self) -> (u32, u32);

    /// True when the pixel lies in `[0, width) × [0, height)`.
    fn in_image(&self, pixel: &PixelPoint) -> bool {
        let (w, h) = self.image_size();
        pixel.u >= 0.0 && pixel.v >= 0.0 && pixel.u < w as f64 && pixel.v < h as f64
    }
}

/// Double-sphere fisheye model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleSphereParams {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub xi: f64,
    pub alpha: f64,
    pub width: u32,
    pub height: u32,
}

impl DoubleSphereParams {
    /// Calibration of the 195° BF2M2020S23 lens on a 1280×1040 sensor.
    pub const BF2M2020S23: DoubleSphereParams = DoubleSphereParams {
        fx: 313.21,
        fy: 313.21,
        cx: 638.66,
        cy: 514.39,
        xi: -0.18,
        alpha: 0.59,
        width: 1280,
        height: 1040,
    };

    pub fn validate(&self) -> Result<(), CameraError> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.xi, self.alpha]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(CameraError::InvalidParams("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CameraError::InvalidParams(
                "focal lengths must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CameraError::InvalidParams(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::InvalidParams(
                "image size must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `z > -w₂·d₁`, the half-space of points the model can project.
    fn projects(&self, z: f64, d1: f64) -> bool {
        let w1 = if self.alpha <= 0.5 {
            self.alpha / (1.0 - self.alpha)
        } else {
            (1.0 - self.alpha) / self.alpha
        };
        let w2 = (w1 + self.xi) / (2.0 * w1 * self.xi + self.xi * self.xi + 1.0).sqrt();
        z > -w2 * d1
    }
}

impl CameraModel for DoubleSphereParams {
    fn project(&self, point: &Vec3) -> Result<PixelPoint, CameraError> {
        let (x, y, z) = (point.x, point.y, point.z);
        let r2 = x * x + y * y;
        let d1 = (r2 + z * z).sqrt();
        let shifted = self.xi * d1 + z;
        let d2 = (r2 + shifted * shifted).sqrt();
        let denom = self.alpha * d2 + (1.0 - self.alpha) * shifted;
        if !(denom > 0.0) || !self.projects(z, d1) {
            return Err(CameraError::OutsideValidProjection([x, y, z]));
        }
        Ok(PixelPoint::new(
            self.fx * x / denom + self.cx,
            self.fy * y / denom + self.cy,
        ))
    }

    fn unproject(&self, pixel: &PixelPoint) -> Result<UnitRay, CameraError> {
        let outside = || CameraError::OutsideValidDomain(pixel.u, pixel.v);
        let mx = (pixel.u - self.cx) / self.fx;
        let my = (pixel.v - self.cy) / self.fy;
        let r2 = mx * mx + my * my;
        let alpha = self.alpha;
        if alpha > 0.5 && r2 > 1.0 / (2.0 * alpha - 1.0) {
            return Err(outside());
        }
        let mz = (1.0 - alpha * alpha * r2)
            / (alpha * (1.0 - (2.0 * alpha - 1.0) * r2).sqrt() + 1.0 - alpha);
        let disc = mz * mz + (1.0 - self.xi * self.xi) * r2;
        if !(disc >= 0.0) {
            return Err(outside());
        }
        let scale = (mz * self.xi + disc.sqrt()) / (mz * mz + r2);
        UnitRay::new(Vec3::new(scale * mx, scale * my, scale * mz - self.xi)).map_err(|_| outside())
    }

    fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Ideal perspective camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinholeParams {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeParams {
    pub fn validate(&self) -> Result<(), CameraError> {
        if ![self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(CameraError::InvalidParams("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CameraError::InvalidParams(
                "focal lengths must be positive".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::InvalidParams(
                "image size must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl CameraModel for PinholeParams {
    fn project(&self, point: &Vec3) -> Result<PixelPoint, CameraError> {
        if !(point.z > 0.0) {
            return Err(CameraError::BehindCamera([point.x, point.y, point.z]));
        }
        Ok(PixelPoint::new(
            self.fx * point.x / point.z + self.cx,
            self.fy * point.y / point.z + self.cy,
        ))
    }

    fn unproject(&self, pixel: &PixelPoint) -> Result<UnitRay, CameraError> {
        UnitRay::from_xyz(
            (pixel.u - self.cx) / self.fx,
            (pixel.v - self.cy) / self.fy,
            1.0,
        )
        .map_err(|_| CameraError::OutsideValidDomain(pixel.u, pixel.v))
    }

    fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Any supported camera, as stored in JSON documents:
/// `{"model": "double_sphere", "fx": .., "fy": .., "cx": .., "cy": .., "xi": .., "alpha": .., "width": .., "height": ..}`
/// or the same without `xi`/`alpha` for `"pinhole"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Camera {
    DoubleSphere(DoubleSphereParams),
    Pinhole(PinholeParams),
}

impl Camera {
    pub fn validate(&self) -> Result<(), CameraError> {
        match self {
            Camera::DoubleSphere(p) => p.validate(),
            Camera::Pinhole(p) => p.validate(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, CameraError> {
        let camera: Camera =
            serde_json::from_str(text).map_err(|e| CameraError::Parse(e.to_string()))?;
        camera.validate()?;
        Ok(camera)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, CameraError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CameraError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    fn model(&self) -> &dyn CameraModel {
        match self {
            Camera::DoubleSphere(p) => p,
            Camera::Pinhole(p) => p,
        }
    }
}

impl CameraModel for Camera {
    fn project(&self, point: &Vec3) -> Result<PixelPoint, CameraError> {
        self.model().project(point)
    }

    fn unproject(&self, pixel: &PixelPoint) -> Result<UnitRay, CameraError> {
        self.model().unproject(pixel)
    }

    fn image_size(&self) -> (u32, u32) {
        self.model().image_size()
    }
}
