use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sphtri::camera::Camera;
use sphtri::synthetic::{far_pinhole, Channel, NoiseDistribution, SceneConfig};
use sphtri::{DoubleSphereParams, Method};

use crate::BenchError;

/// Smallest batch accepted by the runtime benchmark.
pub const MIN_RUNTIME_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_channel")]
    pub channel: Channel,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

fn default_channel() -> Channel {
    Channel::Sphere
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            channel: Channel::Sphere,
            distribution: NoiseDistribution::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    /// Number of correspondences timed per pass.
    pub points: usize,
    /// Timed passes; the median is reported.
    pub repetitions: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            points: 20_000,
            repetitions: 7,
        }
    }
}

/// Experiment description, read from JSON.
///
/// `seed` drives every random draw: trial `k` uses scene seed `seed + k`,
/// overriding `scene.seed`. `σ` is a standard deviation, in radians on the
/// sphere channel and pixels on the image channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDescriptor {
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Camera for the image channels; defaults to the fisheye calibration
    /// or the far-point pinhole.
    #[serde(default)]
    pub camera: Option<Camera>,
    /// Dataset directory for the `real` experiment, relative to the
    /// descriptor file.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "one")]
    pub trials: u32,
    #[serde(default)]
    pub seed: u64,
    /// Method whose corrected rays the `d` statistics compare against.
    #[serde(default = "default_reference")]
    pub reference_method: Method,
    #[serde(default)]
    pub runtime: RuntimeConfig,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_sigmas() -> Vec<f64> {
    vec![0.001, 0.01, 0.1]
}

fn one() -> u32 {
    1
}

fn default_reference() -> Method {
    Method::SphQuad
}

impl Default for ExperimentDescriptor {
    fn default() -> Self {
        ExperimentDescriptor {
            scene: SceneConfig::default(),
            noise: NoiseConfig::default(),
            camera: None,
            dataset: None,
            methods: all_methods(),
            sigmas: default_sigmas(),
            trials: 1,
            seed: 0,
            reference_method: default_reference(),
            runtime: RuntimeConfig::default(),
        }
    }
}

impl ExperimentDescriptor {
    /// Near-point sphere-noise setup comparing the closed-form and iterative
    /// optimal corrections.
    pub fn fwcheck() -> Self {
        ExperimentDescriptor {
            scene: SceneConfig {
                spacing: 0.5,
                ..SceneConfig::near(0)
            },
            methods: vec![Method::SphQuad, Method::Fw],
            reference_method: Method::Fw,
            ..Default::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, BenchError> {
        let desc: ExperimentDescriptor =
            serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        desc.validate()?;
        Ok(desc)
    }

    /// Reads a descriptor file; a relative dataset path is resolved against
    /// the file's directory.
    pub fn from_json_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut desc = Self::from_json_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(ds), Some(dir)) = (&desc.dataset, path.parent()) {
            if ds.is_relative() {
                desc.dataset = Some(dir.join(ds));
            }
        }
        Ok(desc)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: String| Err(BenchError::Config(m));
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        if self.sigmas.is_empty() {
            return fail("at least one sigma is required".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return fail(format!("sigma must be finite and non-negative, got {s}"));
        }
        if self.runtime.points < MIN_RUNTIME_POINTS {
            return fail(format!(
                "runtime.points must be at least {MIN_RUNTIME_POINTS}, got {}",
                self.runtime.points
            ));
        }
        if self.runtime.repetitions < 1 {
            return fail("runtime.repetitions must be at least 1".into());
        }
        if let Some(cam) = &self.camera {
            cam.validate()
                .map_err(|e| BenchError::Config(e.to_string()))?;
        }
        self.scene
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Camera used by the image channels.
    pub fn image_camera(&self) -> Option<Camera> {
        match (self.noise.channel, &self.camera) {
            (Channel::Sphere, _) => None,
            (_, Some(c)) => Some(*c),
            (Channel::FisheyeImage, None) => {
                Some(Camera::DoubleSphere(DoubleSphereParams::BF2M2020S23))
            }
            (Channel::PinholePlane, None) => Some(far_pinhole()),
        }
    }

    /// Requested methods plus the reference method, without duplicates.
    pub fn methods_with_reference(&self) -> Vec<Method> {
        let mut all = self.methods.clone();
        if !all.contains(&self.reference_method) {
            all.push(self.reference_method);
        }
        all
    }
}
