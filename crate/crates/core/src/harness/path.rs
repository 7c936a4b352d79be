use glam::{DQuat, DVec3};
use serde::Deserialize;
use thiserror::Error;

use crate::splat_render::Camera;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("camera path: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("camera path needs at least two checkpoints, got {0}")]
    TooFewCheckpoints(usize),
    #[error("camera path: {0}")]
    Invalid(String),
}

/// A camera pose: position and camera-to-world rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Checkpoint {
    pub position: DVec3,
    pub rotation: DQuat,
}

impl Checkpoint {
    /// Pose looking from `position` towards `target`, image up along `-up`'s
    /// screen projection (the camera's +y points down).
    pub fn looking_at(position: DVec3, target: DVec3, up: DVec3) -> Checkpoint {
        let rotation = Camera::look_at(position, target, up, 1.0, 1, 1).orientation;
        Checkpoint { position, rotation }
    }
}

/// Checkpoints traversed at constant speed.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPath {
    pub checkpoints: Vec<Checkpoint>,
    /// Scene units per second.
    pub speed: f64,
    pub fps: f64,
    /// Vertical field of view, radians.
    pub fov_y: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PathFile {
    speed: f64,
    #[serde(default = "default_fps")]
    fps: f64,
    #[serde(default = "default_fov")]
    fov_degrees: f64,
    #[serde(rename = "checkpoint", default)]
    checkpoints: Vec<CheckpointFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    position: [f64; 3],
    /// `[w, x, y, z]`, camera to world.
    rotation: Option<[f64; 4]>,
    look_at: Option<[f64; 3]>,
    up: Option<[f64; 3]>,
}

fn default_fps() -> f64 {
    30.0
}

fn default_fov() -> f64 {
    90.0
}

impl CameraPath {
    pub fn new(checkpoints: Vec<Checkpoint>, speed: f64, fps: f64, fov_y: f64) -> Result<CameraPath, PathError> {
        let path = CameraPath { checkpoints, speed, fps, fov_y };
        path.validate()?;
        Ok(path)
    }

    /// Parses the TOML path format documented in the README.
    pub fn parse(text: &str) -> Result<CameraPath, PathError> {
        let file: PathFile = toml::from_str(text)?;
        let mut checkpoints = Vec::with_capacity(file.checkpoints.len());
        for (i, c) in file.checkpoints.iter().enumerate() {
            let position = DVec3::from(c.position);
            let cp = match (c.rotation, c.look_at) {
                (Some([w, x, y, z]), None) => {
                    let q = DQuat::from_xyzw(x, y, z, w);
                    let len = q.length();
                    if !len.is_finite() || len < 1e-12 {
                        return Err(PathError::Invalid(format!("checkpoint {i}: degenerate rotation")));
                    }
                    Checkpoint { position, rotation: q / len }
                }
                (None, Some(target)) => {
                    let target = DVec3::from(target);
                    let up = DVec3::from(c.up.unwrap_or([0.0, -1.0, 0.0]));
                    let fwd = target - position;
                    if !(fwd.length() > 1e-12) || !(fwd.cross(up).length() > 1e-12 * fwd.length() * up.length()) {
                        return Err(PathError::Invalid(format!("checkpoint {i}: degenerate look_at")));
                    }
                    Checkpoint::looking_at(position, target, up)
                }
                _ => return Err(PathError::Invalid(format!("checkpoint {i}: give exactly one of rotation, look_at"))),
            };
            checkpoints.push(cp);
        }
        CameraPath::new(checkpoints, file.speed, file.fps, file.fov_degrees.to_radians())
    }

    pub fn validate(&self) -> Result<(), PathError> {
        if self.checkpoints.len() < 2 {
            return Err(PathError::TooFewCheckpoints(self.checkpoints.len()));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(PathError::Invalid(format!("speed must be positive, got {}", self.speed)));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(PathError::Invalid(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(PathError::Invalid(format!("field of view out of range: {}", self.fov_y)));
        }
        for (i, c) in self.checkpoints.iter().enumerate() {
            if !c.position.is_finite() || !c.rotation.is_finite() {
                return Err(PathError::Invalid(format!("checkpoint {i} is not finite")));
            }
        }
        Ok(())
    }

    fn segment_lengths(&self) -> Vec<f64> {
        self.checkpoints.windows(2).map(|w| w[0].position.distance(w[1].position)).collect()
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    /// Seconds to traverse the whole path.
    pub fn duration(&self) -> f64 {
        self.length() / self.speed
    }

    /// Frames sampled at `1/fps` intervals, including both ends.
    pub fn frame_count(&self) -> usize {
        (self.duration() * self.fps + 1e-9).floor() as usize + 1
    }

    /// Pose at time `t` seconds, clamped to the path. Position moves at
    /// constant speed along the polyline; rotation is slerped with the same
    /// per-segment parameter.
    pub fn pose_at(&self, t: f64) -> Checkpoint {
        let mut s = (t * self.speed).max(0.0);
        if s == 0.0 {
            return self.checkpoints[0];
        }
        let lengths = self.segment_lengths();
        for (i, &len) in lengths.iter().enumerate() {
            let (a, b) = (self.checkpoints[i], self.checkpoints[i + 1]);
            if s <= len && len > 0.0 {
                let u = s / len;
                return Checkpoint { position: a.position.lerp(b.position, u), rotation: a.rotation.slerp(b.rotation, u) };
            }
            s -= len;
        }
        *self.checkpoints.last().expect("validated path")
    }

    pub fn camera_at(&self, t: f64, width: u32, height: u32) -> Camera {
        let p = self.pose_at(t);
        Camera::new(p.position, p.rotation, self.fov_y, width, height)
    }

    /// Camera of every frame.
    pub fn cameras(&self, width: u32, height: u32) -> Vec<Camera> {
        (0..self.frame_count()).map(|i| self.camera_at(i as f64 / self.fps, width, height)).collect()
    }
}
