//! The splat record shared by every stage of the pipeline.

use bytemuck::{Pod, Zeroable};
use glam::{DMat3, DQuat, DVec3};

/// Number of spherical-harmonics coefficients per color channel (degree 3).
pub const SH_COEFFS: usize = 16;
/// Total spherical-harmonics scalars per Gaussian (3 channels).
pub const SH_LEN: usize = 3 * SH_COEFFS;
/// Scalars per stored record: position 3, rotation 4, scale 3, opacity 1, SH 48.
pub const RECORD_SCALARS: usize = 59;
/// Bytes per stored record.
pub const RECORD_BYTES: usize = RECORD_SCALARS * 4;

/// One decoded 3D Gaussian.
///
/// The layout is exactly the on-disk record, so a page of Gaussians can be
/// copied from the scene file into a render buffer without per-record work.
/// Spherical harmonics are stored coefficient-major: `sh[3 * i + c]` is
/// coefficient `i` of channel `c`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Pod, Zeroable)]
pub struct Gaussian {
    pub position: [f32; 3],
    /// Unit quaternion, `(w, x, y, z)`.
    pub rotation: [f32; 4],
    /// Per-axis standard deviation, linear.
    pub scale: [f32; 3],
    pub opacity: f32,
    pub sh: [f32; SH_LEN],
}

const _: () = assert!(std::mem::size_of::<Gaussian>() == RECORD_BYTES);

impl Default for Gaussian {
    fn default() -> Self {
        Self::PADDING
    }
}

impl Gaussian {
    /// The all-zero record used to fill pages up to their capacity.
    pub const PADDING: Gaussian = Gaussian {
        position: [0.0; 3],
        rotation: [0.0; 4],
        scale: [0.0; 3],
        opacity: 0.0,
        sh: [0.0; SH_LEN],
    };

    /// A Gaussian with identity rotation, the given scale and a flat DC color.
    pub fn new(position: [f32; 3], scale: [f32; 3], opacity: f32, dc: [f32; 3]) -> Self {
        let mut sh = [0.0; SH_LEN];
        sh[..3].copy_from_slice(&dc);
        Gaussian { position, rotation: [1.0, 0.0, 0.0, 0.0], scale, opacity, sh }
    }

    pub fn with_rotation(mut self, rotation: DQuat) -> Self {
        let q = rotation.normalize();
        self.rotation = [q.w as f32, q.x as f32, q.y as f32, q.z as f32];
        self
    }

    pub fn is_padding(&self) -> bool {
        self.as_scalars().iter().all(|&v| v == 0.0)
    }

    pub fn position(&self) -> DVec3 {
        DVec3::new(self.position[0] as f64, self.position[1] as f64, self.position[2] as f64)
    }

    pub fn scale(&self) -> DVec3 {
        DVec3::new(self.scale[0] as f64, self.scale[1] as f64, self.scale[2] as f64)
    }

    pub fn rotation(&self) -> DQuat {
        let [w, x, y, z] = self.rotation;
        DQuat::from_xyzw(x as f64, y as f64, z as f64, w as f64)
    }

    pub fn rotation_matrix(&self) -> DMat3 {
        rotation_matrix(self.rotation())
    }

    /// World-space covariance `R S Sᵀ Rᵀ`.
    pub fn covariance(&self) -> DMat3 {
        let m = self.rotation_matrix() * DMat3::from_diagonal(self.scale());
        m * m.transpose()
    }

    /// Squared Mahalanobis distance of `p` from the mean, in units of the
    /// per-axis standard deviations.
    pub fn mahalanobis_sq(&self, p: DVec3) -> f64 {
        let local = self.rotation_matrix().transpose() * (p - self.position());
        (local / self.scale()).length_squared()
    }

    pub fn as_scalars(&self) -> &[f32; RECORD_SCALARS] {
        bytemuck::cast_ref(self)
    }
}

/// Rotation matrix of a possibly non-normalized quaternion.
pub fn rotation_matrix(q: DQuat) -> DMat3 {
    DMat3::from_quat(q.normalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_is_all_zero() {
        assert!(Gaussian::PADDING.is_padding());
        assert!(Gaussian::PADDING.as_scalars().iter().all(|&v| v == 0.0));
        let g = Gaussian::new([0.0; 3], [1.0; 3], 0.5, [0.0; 3]);
        assert!(!g.is_padding());
    }

    #[test]
    fn negative_zero_counts_as_padding() {
        let mut g = Gaussian::PADDING;
        g.opacity = -0.0;
        assert!(g.is_padding());
    }

    #[test]
    fn covariance_of_rotated_axis_aligned_ellipsoid() {
        let g = Gaussian::new([0.0; 3], [2.0, 1.0, 1.0], 1.0, [0.0; 3])
            .with_rotation(DQuat::from_rotation_z(std::f64::consts::FRAC_PI_2));
        let c = g.covariance();
        // x axis rotated onto y.
        assert!((c.y_axis.y - 4.0).abs() < 1e-6);
        assert!((c.x_axis.x - 1.0).abs() < 1e-6);
        assert!((g.mahalanobis_sq(DVec3::new(0.0, 2.0, 0.0)) - 1.0).abs() < 1e-6);
    }
}
