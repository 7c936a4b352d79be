//! Software Gaussian splatting: depth keys, a stable radix sort, EWA
//! projection and front-to-back compositing.

mod camera;
mod composite;
mod project;
mod sh;
mod sort;

pub use camera::{Camera, CameraError};
pub use composite::{composite, shade_pixel, CompositeStats, MAX_ALPHA, MIN_TRANSMITTANCE};
pub use project::{project_gaussian, projected_covariance, Splat, EXTENT_SIGMAS, LOW_PASS};
pub use sh::{basis, evaluate_sh, SH_C0, SH_C1};
pub use sort::{compute_keys, compute_keys_by, depth_key, radix_sort, DepthMetric, SortEntry};

use crate::gaussian::Gaussian;

/// Linear RGB image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Image {
        Image { width, height, pixels: vec![[0.0; 3]; (width * height) as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, c: [f32; 3]) {
        self.pixels[(y * self.width + x) as usize] = c;
    }
}

/// Sorts and composites a Gaussian set in one call.
pub fn render(gaussians: &[Gaussian], cam: &Camera) -> Image {
    let sorted = radix_sort(compute_keys(gaussians, cam));
    composite(gaussians, &sorted, cam).0
}
