//! Binary morphology on occupancy grids with a discrete ball structuring
//! element. Cells outside the grid count as empty, and closing is computed
//! on a padded copy so it behaves as on an unbounded lattice.

use rayon::prelude::*;

use super::slicing::OccupancyGrid;

fn ball_offsets(radius: usize) -> Vec<[isize; 3]> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy + dz * dz <= r * r {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

#[derive(Clone)]
struct Volume {
    dims: [usize; 3],
    cells: Vec<bool>,
}

impl Volume {
    fn get(&self, x: isize, y: isize, z: isize) -> bool {
        let [nx, ny, nz] = self.dims;
        if x < 0 || y < 0 || z < 0 || x as usize >= nx || y as usize >= ny || z as usize >= nz {
            return false;
        }
        self.cells[x as usize + nx * (y as usize + ny * z as usize)]
    }

    /// `dilate = true`: any neighbor set; otherwise all neighbors set.
    fn filter(&self, offsets: &[[isize; 3]], dilate: bool) -> Volume {
        let [nx, ny, _] = self.dims;
        let mut cells = vec![false; self.cells.len()];
        cells.par_chunks_mut(nx * ny).enumerate().for_each(|(z, slice)| {
            for y in 0..ny {
                for x in 0..nx {
                    let (x, y, z) = (x as isize, y as isize, z as isize);
                    let hit = |o: &[isize; 3]| self.get(x + o[0], y + o[1], z + o[2]);
                    slice[x as usize + nx * y as usize] =
                        if dilate { offsets.iter().any(hit) } else { offsets.iter().all(hit) };
                }
            }
        });
        Volume { dims: self.dims, cells }
    }
}

pub fn dilate(grid: &OccupancyGrid, radius: usize) -> OccupancyGrid {
    apply(grid, radius, true)
}

pub fn erode(grid: &OccupancyGrid, radius: usize) -> OccupancyGrid {
    apply(grid, radius, false)
}

fn apply(grid: &OccupancyGrid, radius: usize, dilate: bool) -> OccupancyGrid {
    if radius == 0 {
        return grid.clone();
    }
    let v = Volume { dims: grid.resolution, cells: grid.cells.clone() };
    OccupancyGrid { cells: v.filter(&ball_offsets(radius), dilate).cells, ..grid.clone() }
}

/// Dilation followed by erosion; fills holes and gaps narrower than the ball.
pub fn close(grid: &OccupancyGrid, radius: usize) -> OccupancyGrid {
    if radius == 0 {
        return grid.clone();
    }
    let [nx, ny, nz] = grid.resolution;
    let pad = radius;
    let dims = [nx + 2 * pad, ny + 2 * pad, nz + 2 * pad];
    let mut padded = Volume { dims, cells: vec![false; dims.iter().product()] };
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                padded.cells[(x + pad) + dims[0] * ((y + pad) + dims[1] * (z + pad))] = grid.get(x, y, z);
            }
        }
    }
    let offsets = ball_offsets(radius);
    let closed = padded.filter(&offsets, true).filter(&offsets, false);
    let mut out = grid.clone();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                out.set(x, y, z, closed.cells[(x + pad) + dims[0] * ((y + pad) + dims[1] * (z + pad))]);
            }
        }
    }
    out
}

/// Erosion followed by dilation; removes features thinner than the ball.
pub fn open(grid: &OccupancyGrid, radius: usize) -> OccupancyGrid {
    dilate(&erode(grid, radius), radius)
}

/// Closing with `close_radius`, then opening with `open_radius`.
pub fn morphological_clean(grid: &OccupancyGrid, close_radius: usize, open_radius: usize) -> OccupancyGrid {
    open(&close(grid, close_radius), open_radius)
}
