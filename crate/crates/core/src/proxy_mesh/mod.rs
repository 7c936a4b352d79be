//! Proxy mesh extraction: slice the Gaussian cloud into an occupancy grid,
//! clean it morphologically, run Marching Cubes and simplify.

mod marching_cubes;
mod mesh;
mod morphology;
mod simplify;
mod slicing;

pub use slicing::{plane_ellipsoid_intersect, rasterize_slices, GeometryError, OccupancyGrid, PlaneEllipseIntersection};
pub use marching_cubes::{case_table, marching_cubes};
pub use simplify::{simplify, simplify_traced};
pub use morphology::{close, dilate, erode, morphological_clean, open};
pub use mesh::{closest_point_on_triangle, point_triangle_distance_sq, ProxyMesh};

use glam::DVec3;

use crate::gaussian::Gaussian;
use crate::scene_io::Bounds;

#[derive(Clone, Debug, PartialEq)]
pub struct MeshParams {
    /// Cells per axis of the occupancy grid.
    pub grid: usize,
    pub close_radius: usize,
    pub open_radius: usize,
    /// Mahalanobis radius treated as the inside of a Gaussian.
    pub extent: f64,
    pub target_faces: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams { grid: 128, close_radius: 2, open_radius: 1, extent: 1.0, target_faces: 4096 }
    }
}

impl MeshParams {
    /// Four faces per expected page.
    pub fn default_target_faces(gaussian_count: usize, page_size: usize) -> usize {
        (4 * gaussian_count.div_ceil(page_size.max(1))).max(4)
    }
}

/// Grid spanning the scene bounds with a one-cell margin on every side.
pub fn scene_grid(bounds: &Bounds, resolution: usize) -> OccupancyGrid {
    let half = (bounds.half_extent as f64).max(1e-3);
    let inner = resolution.saturating_sub(2).max(1) as f64;
    let half = half * resolution as f64 / inner;
    OccupancyGrid::cube(resolution, DVec3::from(bounds.center.map(f64::from)), half)
}

/// Slices, cleans, meshes and simplifies. Face pages are all unassigned.
pub fn build_proxy_mesh(gaussians: &[Gaussian], params: &MeshParams) -> ProxyMesh {
    let bounds = Bounds::of_gaussians(gaussians);
    let frame = scene_grid(&bounds, params.grid);
    let grid = rasterize_slices(gaussians, frame.resolution, frame.origin, frame.voxel_size, params.extent);
    let grid = morphological_clean(&grid, params.close_radius, params.open_radius);
    simplify(&marching_cubes(&grid), params.target_faces)
}
