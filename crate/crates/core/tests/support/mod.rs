//! Random exact two-view configurations shared by the integration tests.

#![allow(dead_code)]

use proptest::prelude::*;
use sphtri::geometry::axis_angle_to_rotation;
use sphtri::{make_stereo_frame, CameraPose, Correspondence, StereoFrame, Vec3};

/// Two cameras and a scene point seen by both, with a parallax of at
/// least two degrees.
#[derive(Debug, Clone, Copy)]
pub struct Config {
    pub frame: StereoFrame,
    pub point: Vec3,
}

impl Config {
    pub fn exact(&self) -> Correspondence {
        Correspondence::new(
            self.frame.pose.project_to_sphere(&self.point).unwrap(),
            self.frame.pose2.project_to_sphere(&self.point).unwrap(),
        )
    }

    /// Whether the point is in front of both cameras (z > 0 in each frame).
    pub fn in_front(&self) -> bool {
        self.frame.pose.to_camera(&self.point).z > 0.0
            && self.frame.pose2.to_camera(&self.point).z > 0.0
    }
}

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = CameraPose> {
    (vec3(1.0), -0.6f64..0.6, vec3(3.0)).prop_filter_map("axis too short", |(axis, angle, c)| {
        (axis.norm() > 0.1).then(|| CameraPose::new(axis_angle_to_rotation(&axis, angle), c))
    })
}

pub fn config() -> impl Strategy<Value = Config> {
    (pose(), vec3(1.0), 0.3f64..2.0, vec3(3.0), 1.0f64..8.0).prop_filter_map(
        "degenerate geometry",
        |(pose, dir, length, local, depth)| {
            if dir.norm() < 0.1 {
                return None;
            }
            let rotation2 = pose
                .orientation
                .compose(&axis_angle_to_rotation(&dir, 0.4 * length));
            let pose2 = CameraPose::new(rotation2, pose.position + dir.normalize() * length);
            let in_camera = Vec3::new(local.x, local.y, depth);
            let point = pose.ray_to_world(&in_camera) + pose.position;
            let (a, b) = (point - pose.position, point - pose2.position);
            let parallax = a.angle(&b);
            if parallax < 2f64.to_radians() {
                return None;
            }
            let frame = make_stereo_frame(pose, pose2).ok()?;
            Some(Config { frame, point })
        },
    )
}
