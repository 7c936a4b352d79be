use glam::{DMat3, DQuat, DVec3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("field of view {0} outside (0, pi)")]
    Fov(f64),
    #[error("resolution {0}x{1} is empty")]
    Resolution(u32, u32),
    #[error("camera pose is not finite")]
    Pose,
    #[error("near plane {0} must be positive")]
    Near(f64),
}

/// Pinhole camera looking down its local +z axis with +y pointing down the
/// image and +x to the right. `orientation` maps camera axes to world axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub position: DVec3,
    pub orientation: DQuat,
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
}

impl Camera {
    pub fn new(position: DVec3, orientation: DQuat, fov_y: f64, width: u32, height: u32) -> Camera {
        Camera { position, orientation: orientation.normalize(), fov_y, width, height, near: 0.01 }
    }

    /// Camera at `eye` looking at `target`; `up` is the world direction that
    /// should appear upwards in the image.
    pub fn look_at(eye: DVec3, target: DVec3, up: DVec3, fov_y: f64, width: u32, height: u32) -> Camera {
        let forward = (target - eye).normalize();
        let right = forward.cross(up).normalize();
        let down = forward.cross(right);
        let rot = DMat3::from_cols(right, down, forward);
        Camera::new(eye, DQuat::from_mat3(&rot), fov_y, width, height)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(CameraError::Fov(self.fov_y));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::Resolution(self.width, self.height));
        }
        if !self.position.is_finite() || !self.orientation.is_finite() {
            return Err(CameraError::Pose);
        }
        if !(self.near > 0.0) {
            return Err(CameraError::Near(self.near));
        }
        Ok(())
    }

    /// Same pose at another resolution; the vertical field of view is kept.
    pub fn with_resolution(&self, width: u32, height: u32) -> Camera {
        Camera { width, height, ..*self }
    }

    /// World-to-camera rotation.
    pub fn view_rotation(&self) -> DMat3 {
        DMat3::from_quat(self.orientation).transpose()
    }

    pub fn to_view(&self, p: DVec3) -> DVec3 {
        self.view_rotation() * (p - self.position)
    }

    /// Focal lengths in pixels (square pixels).
    pub fn focal(&self) -> (f64, f64) {
        let f = 0.5 * self.height as f64 / (0.5 * self.fov_y).tan();
        (f, f)
    }

    /// Pixel coordinates of a view-space point; pixel `(i, j)` covers
    /// `[i, i+1) × [j, j+1)`.
    pub fn project_view(&self, t: DVec3) -> [f64; 2] {
        let (fx, fy) = self.focal();
        [fx * t.x / t.z + 0.5 * self.width as f64, fy * t.y / t.z + 0.5 * self.height as f64]
    }

    /// World-space direction of the ray through pixel coordinates `px`.
    pub fn ray_direction(&self, px: [f64; 2]) -> DVec3 {
        let (fx, fy) = self.focal();
        let d = DVec3::new(
            (px[0] - 0.5 * self.width as f64) / fx,
            (px[1] - 0.5 * self.height as f64) / fy,
            1.0,
        );
        DMat3::from_quat(self.orientation) * d
    }
}
