//! Synthetic scenes and noisy correspondences.
//!
//! A grid of scene points is observed by a camera at the origin and a second
//! camera placed uniformly at random on the unit sphere with a small random
//! rotation. Rays are perturbed either directly on the sphere, by a random
//! small rotation, or in the image of a fisheye or pinhole camera before
//! being unprojected.
//!
//! `σ` is the standard deviation of every noise component, in radians for the
//! sphere channel and pixels for the image channels. Laplacian noise uses
//! scale `σ/√2` so both distributions share the same standard deviation.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, CameraModel, PixelPoint};
use crate::geometry::{CameraPose, Rotation, UnitRay, Vec3};
use crate::triangulate::Correspondence;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyntheticError {
    #[error("invalid scene configuration: {0}")]
    InvalidScene(String),
    #[error("invalid noise settings: {0}")]
    InvalidNoise(String),
    #[error("the {0:?} channel needs a camera model")]
    MissingCamera(Channel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub extent_x: f64,
    pub extent_y: f64,
    pub extent_z: f64,
    pub spacing: f64,
    /// Distance from the first camera to the nearest grid layer along Z.
    pub depth: f64,
    /// Fill the full X-Y-Z box instead of a single layer at `depth`.
    pub volumetric: bool,
    /// Bound of the per-axis rotation of the second camera, in degrees.
    pub rotation_range_deg: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig::near(0)
    }
}

impl SceneConfig {
    pub fn near(seed: u64) -> Self {
        SceneConfig {
            extent_x: 20.0,
            extent_y: 10.0,
            extent_z: 20.0,
            spacing: 1.0,
            depth: 1.0,
            volumetric: false,
            rotation_range_deg: 10.0,
            seed,
        }
    }

    pub fn far(seed: u64) -> Self {
        SceneConfig {
            depth: 10.0,
            ..SceneConfig::near(seed)
        }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        let positive = [
            ("extent_x", self.extent_x),
            ("extent_y", self.extent_y),
            ("extent_z", self.extent_z),
            ("spacing", self.spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SyntheticError::InvalidScene(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.depth.is_finite() && self.rotation_range_deg.is_finite())
            || self.rotation_range_deg < 0.0
        {
            return Err(SyntheticError::InvalidScene(
                "depth and rotation range must be finite, rotation range non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub points: Vec<Vec3>,
    pub pose: CameraPose,
    pub pose2: CameraPose,
}

/// Grid coordinates from `-extent/2` to `extent/2` inclusive.
fn axis_samples(extent: f64, spacing: f64) -> Vec<f64> {
    let steps = (extent / spacing + 1e-9).floor() as i64;
    (0..=steps)
        .map(|i| -0.5 * extent + i as f64 * spacing)
        .collect()
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene, SyntheticError> {
    cfg.validate()?;
    let xs = axis_samples(cfg.extent_x, cfg.spacing);
    let ys = axis_samples(cfg.extent_y, cfg.spacing);
    let zs: Vec<f64> = if cfg.volumetric {
        axis_samples(cfg.extent_z, cfg.spacing)
            .into_iter()
            .map(|z| z + 0.5 * cfg.extent_z + cfg.depth)
            .collect()
    } else {
        vec![cfg.depth]
    };
    let mut points = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                points.push(Vec3::new(x, y, z));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c2: [f64; 3] = UnitSphere.sample(&mut rng);
    let range = cfg.rotation_range_deg.to_radians();
    let mut angle = || {
        if range > 0.0 {
            rng.random_range(-range..range)
        } else {
            0.0
        }
    };
    let (ax, ay, az) = (angle(), angle(), angle());
    let rotation = Rotation::rot_z(az)
        .compose(&Rotation::rot_y(ay))
        .compose(&Rotation::rot_x(ax));
    Ok(Scene {
        points,
        pose: CameraPose::identity(),
        pose2: CameraPose::new(rotation, Vec3::from(c2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Sphere,
    FisheyeImage,
    PinholePlane,
}

impl Channel {
    pub fn name(&self) -> &'static str {
        match self {
            Channel::Sphere => "sphere",
            Channel::FisheyeImage => "fisheye_image",
            Channel::PinholePlane => "pinhole_plane",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub channel: Channel,
    #[serde(default)]
    pub distribution: NoiseDistribution,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SyntheticError::InvalidNoise(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Draws one zero-mean sample with standard deviation `sigma`.
pub fn sample_noise<R: Rng + ?Sized>(dist: NoiseDistribution, sigma: f64, rng: &mut R) -> f64 {
    match dist {
        NoiseDistribution::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        }
        NoiseDistribution::Laplacian => {
            let e: f64 = Exp1.sample(rng);
            let scale = sigma / std::f64::consts::SQRT_2;
            if rng.random::<bool>() {
                scale * e
            } else {
                -scale * e
            }
        }
    }
}

/// Rotation by the normalised quaternion `(1, a/2, b/2, c/2)`.
pub fn small_rotation(a: f64, b: f64, c: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(1.0, 0.5 * a, 0.5 * b, 0.5 * c))
}

/// Rotates `u` by a random small rotation with i.i.d. components drawn
/// from `dist`. `σ = 0` returns `u` unchanged without consuming randomness.
pub fn perturb_on_sphere<R: Rng + ?Sized>(
    u: &UnitRay,
    dist: NoiseDistribution,
    sigma: f64,
    rng: &mut R,
) -> UnitRay {
    if sigma == 0.0 {
        return *u;
    }
    let a = sample_noise(dist, sigma, rng);
    let b = sample_noise(dist, sigma, rng);
    let c = sample_noise(dist, sigma, rng);
    let v = small_rotation(a, b, c) * u.dir();
    UnitRay::new(v).expect("rotation preserves unit length")
}

/// Seeded generator for an independent noise stream.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCorrespondence {
    /// Index into the scene's point list.
    pub index: usize,
    pub point: Vec3,
    pub correspondence: Correspondence,
    /// Measured pixels for the image channels.
    pub pixels: Option<(PixelPoint, PixelPoint)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DropReason {
    #[error("camera {view} cannot project the point: {message}")]
    NotProjectable { view: usize, message: String },
    #[error("camera {view} sees the point outside the image")]
    OutsideImage { view: usize },
    #[error("camera {view} cannot unproject the measured pixel: {message}")]
    NotUnprojectable { view: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedPoint {
    pub index: usize,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pub items: Vec<SyntheticCorrespondence>,
    pub dropped: Vec<DroppedPoint>,
}

fn observe_image<R: Rng + ?Sized>(
    camera: &Camera,
    pose: &CameraPose,
    point: &Vec3,
    view: usize,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<(UnitRay, PixelPoint), DropReason> {
    let exact = camera
        .project(&pose.to_camera(point))
        .map_err(|e| DropReason::NotProjectable {
            view,
            message: e.to_string(),
        })?;
    if !camera.in_image(&exact) {
        return Err(DropReason::OutsideImage { view });
    }
    let measured = if noise.sigma == 0.0 {
        exact
    } else {
        PixelPoint::new(
            exact.u + sample_noise(noise.distribution, noise.sigma, rng),
            exact.v + sample_noise(noise.distribution, noise.sigma, rng),
        )
    };
    if !camera.in_image(&measured) {
        return Err(DropReason::OutsideImage { view });
    }
    let ray = camera
        .unproject(&measured)
        .map_err(|e| DropReason::NotUnprojectable {
            view,
            message: e.to_string(),
        })?;
    Ok((ray, measured))
}

/// Observes every scene point in both cameras through the given noise channel.
///
/// Points that cannot be observed are reported in `dropped`. With `σ = 0`
/// the sphere channel yields exact rays.
pub fn make_correspondences<R: Rng + ?Sized>(
    scene: &Scene,
    camera: Option<&Camera>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<CorrespondenceSet, SyntheticError> {
    noise.validate()?;
    let camera = match (noise.channel, camera) {
        (Channel::Sphere, _) => None,
        (ch, None) => return Err(SyntheticError::MissingCamera(ch)),
        (_, Some(c)) => Some(c),
    };
    let mut out = CorrespondenceSet::default();
    for (index, point) in scene.points.iter().enumerate() {
        let observed = match camera {
            None => {
                let rays = scene.pose.project_to_sphere(point).ok_or(0).and_then(|u| {
                    scene
                        .pose2
                        .project_to_sphere(point)
                        .map(|u2| (u, u2))
                        .ok_or(1)
                });
                match rays {
                    Ok((u, u2)) => Ok((
                        Correspondence::new(
                            perturb_on_sphere(&u, noise.distribution, noise.sigma, rng),
                            perturb_on_sphere(&u2, noise.distribution, noise.sigma, rng),
                        ),
                        None,
                    )),
                    Err(view) => Err(DropReason::NotProjectable {
                        view,
                        message: "point coincides with the camera centre".into(),
                    }),
                }
            }
            Some(cam) => {
                observe_image(cam, &scene.pose, point, 0, noise, rng).and_then(|(u, px)| {
                    let (u2, px2) = observe_image(cam, &scene.pose2, point, 1, noise, rng)?;
                    Ok((Correspondence::new(u, u2), Some((px, px2))))
                })
            }
        };
        match observed {
            Ok((correspondence, pixels)) => out.items.push(SyntheticCorrespondence {
                index,
                point: *point,
                correspondence,
                pixels,
            }),
            Err(reason) => out.dropped.push(DroppedPoint { index, reason }),
        }
    }
    Ok(out)
}

/// Pinhole camera used for the far-point experiments.
pub fn far_pinhole() -> Camera {
    Camera::Pinhole(crate::camera::PinholeParams {
        fx: 500.0,
        fy: 500.0,
        cx: 640.0,
        cy: 520.0,
        width: 1280,
        height: 1040,
    })
}
