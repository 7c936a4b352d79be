//! Analytic slicing of Gaussian ellipsoids by horizontal planes.
//!
//! Each ellipsoid is mapped to the unit sphere at the origin; the slicing
//! plane `z = h` maps to a plane with unit normal `n` at signed distance `p`.
//! The intersection circle has center `n p` and radius `sqrt(1 - p²)` and is
//! mapped back through scale, rotation and translation to a world ellipse.

use glam::{DMat3, DVec3};
use rayon::prelude::*;
use thiserror::Error;

use crate::gaussian::Gaussian;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate ellipsoid: scale component {0} is not positive")]
    DegenerateEllipsoid(usize),
}

/// Intersection of a plane with an ellipsoid, as a parametric ellipse
/// `c(t) = center + axis_u cos t + axis_v sin t` in world space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneEllipseIntersection {
    pub hit: bool,
    pub center: DVec3,
    pub axis_u: DVec3,
    pub axis_v: DVec3,
    /// Plane normal in unit-sphere space.
    pub sphere_normal: DVec3,
    /// Signed plane distance from the origin in unit-sphere space.
    pub sphere_distance: f64,
    /// Circle axes in unit-sphere space; each has length `sqrt(1 - p²)`.
    pub sphere_u: DVec3,
    pub sphere_v: DVec3,
}

impl PlaneEllipseIntersection {
    pub fn point(&self, t: f64) -> DVec3 {
        self.center + self.axis_u * t.cos() + self.axis_v * t.sin()
    }

    pub fn radius(&self) -> f64 {
        self.sphere_u.length()
    }
}

/// Intersects the ellipsoid of `g` scaled by `extent` standard deviations
/// with the plane `z = plane_z`. A tangent plane does not count as a hit.
pub fn plane_ellipsoid_intersect(
    g: &Gaussian,
    plane_z: f64,
    extent: f64,
) -> Result<PlaneEllipseIntersection, GeometryError> {
    let scale = g.scale() * extent;
    if let Some(axis) = (0..3).find(|&i| !(scale[i] > 0.0)) {
        return Err(GeometryError::DegenerateEllipsoid(axis));
    }
    let rot = g.rotation_matrix();
    let mean = g.position();
    // Plane normal pulled back into sphere space: for x = mean + R S u,
    // z-component equation (S Rᵀ e_z) · u = plane_z - mean_z.
    let sn = DVec3::new(rot.x_axis.z, rot.y_axis.z, rot.z_axis.z) * scale;
    let len = sn.length();
    let n = sn / len;
    let p = (plane_z - mean.z) / len;
    let to_world = rot * DMat3::from_diagonal(scale);
    if p.abs() >= 1.0 {
        return Ok(PlaneEllipseIntersection {
            hit: false,
            center: mean,
            axis_u: DVec3::ZERO,
            axis_v: DVec3::ZERO,
            sphere_normal: n,
            sphere_distance: p,
            sphere_u: DVec3::ZERO,
            sphere_v: DVec3::ZERO,
        });
    }
    let r = (1.0 - p * p).sqrt();
    let c0 = n * p;
    let tangent = DVec3::new(n.y, -n.x, 0.0);
    let u = if tangent.length_squared() < 1e-24 {
        DVec3::new(r, 0.0, 0.0)
    } else {
        tangent.normalize() * r
    };
    let v = n.cross(u);
    Ok(PlaneEllipseIntersection {
        hit: true,
        center: mean + to_world * c0,
        axis_u: to_world * u,
        axis_v: to_world * v,
        sphere_normal: n,
        sphere_distance: p,
        sphere_u: u,
        sphere_v: v,
    })
}

/// Boolean voxel grid; cell `(x, y, z)` covers
/// `origin + [x, x+1) * voxel_size` (and likewise for y, z).
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: [usize; 3],
    pub origin: DVec3,
    pub voxel_size: f64,
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(resolution: [usize; 3], origin: DVec3, voxel_size: f64) -> Self {
        assert!(resolution.iter().all(|&r| r >= 2), "grid resolution must be at least 2");
        assert!(voxel_size > 0.0, "voxel size must be positive");
        let n = resolution.iter().product();
        OccupancyGrid { resolution, origin, voxel_size, cells: vec![false; n] }
    }

    /// Cubic grid of `res³` cells spanning the cube `center ± half_extent`.
    pub fn cube(res: usize, center: DVec3, half_extent: f64) -> Self {
        let voxel = 2.0 * half_extent / res as f64;
        Self::empty([res; 3], center - DVec3::splat(half_extent), voxel)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution[0] * (y + self.resolution[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.cells[self.index(x, y, z)]
    }

    /// Occupancy with everything outside the grid treated as empty.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize, z: isize) -> bool {
        let [nx, ny, nz] = self.resolution;
        if x < 0 || y < 0 || z < 0 || x as usize >= nx || y as usize >= ny || z as usize >= nz {
            return false;
        }
        self.get(x as usize, y as usize, z as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.index(x, y, z);
        self.cells[i] = v;
    }

    pub fn cell_center(&self, x: usize, y: usize, z: usize) -> DVec3 {
        self.origin + (DVec3::new(x as f64, y as f64, z as f64) + 0.5) * self.voxel_size
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Marks every cell whose center lies inside at least one Gaussian's
/// ellipsoid of `extent` standard deviations, one Z-slice at a time.
pub fn rasterize_slices(
    gaussians: &[Gaussian],
    resolution: [usize; 3],
    origin: DVec3,
    voxel_size: f64,
    extent: f64,
) -> OccupancyGrid {
    let mut grid = OccupancyGrid::empty(resolution, origin, voxel_size);
    let [nx, ny, _] = resolution;
    // Vertical reach of each ellipsoid: extent * sqrt(Σ_zz).
    let spans: Vec<(usize, f64, f64)> = gaussians
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_padding() && g.scale.iter().all(|&s| s > 0.0))
        .map(|(i, g)| {
            let reach = extent * g.covariance().z_axis.z.sqrt();
            (i, g.position().z - reach, g.position().z + reach)
        })
        .collect();

    grid.cells.par_chunks_mut(nx * ny).enumerate().for_each(|(z, slice)| {
        let plane_z = origin.z + (z as f64 + 0.5) * voxel_size;
        for &(i, lo, hi) in &spans {
            if plane_z <= lo || plane_z >= hi {
                continue;
            }
            let Ok(ell) = plane_ellipsoid_intersect(&gaussians[i], plane_z, extent) else {
                continue;
            };
            if !ell.hit {
                continue;
            }
            fill_ellipse(slice, nx, ny, origin, voxel_size, &ell);
        }
    });
    grid
}

/// Sets the cells of one slice whose centers fall inside the ellipse.
fn fill_ellipse(slice: &mut [bool], nx: usize, ny: usize, origin: DVec3, voxel: f64, ell: &PlaneEllipseIntersection) {
    let (a, b) = (ell.axis_u, ell.axis_v);
    let det = a.x * b.y - a.y * b.x;
    if det.abs() < 1e-300 {
        return;
    }
    let half_x = (a.x * a.x + b.x * b.x).sqrt();
    let half_y = (a.y * a.y + b.y * b.y).sqrt();
    let to_cell = |v: f64, o: f64| (v - o) / voxel - 0.5;
    let x0 = to_cell(ell.center.x - half_x, origin.x).ceil().max(0.0) as usize;
    let x1 = to_cell(ell.center.x + half_x, origin.x).floor();
    let y0 = to_cell(ell.center.y - half_y, origin.y).ceil().max(0.0) as usize;
    let y1 = to_cell(ell.center.y + half_y, origin.y).floor();
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let x1 = (x1 as usize).min(nx - 1);
    let y1 = (y1 as usize).min(ny - 1);
    for y in y0..=y1 {
        let py = origin.y + (y as f64 + 0.5) * voxel - ell.center.y;
        for x in x0..=x1 {
            let px = origin.x + (x as f64 + 0.5) * voxel - ell.center.x;
            // Solve [a b] (s, t)ᵀ = d in the plane.
            let s = (px * b.y - py * b.x) / det;
            let t = (a.x * py - a.y * px) / det;
            if s * s + t * t <= 1.0 {
                slice[x + nx * y] = true;
            }
        }
    }
}
