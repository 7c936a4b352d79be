use rayon::prelude::*;

use super::camera::Camera;
use super::project::{project_gaussian, Splat};
use super::sort::SortEntry;
use super::Image;
use crate::gaussian::Gaussian;

/// Remaining transmittance below which a pixel stops accumulating.
pub const MIN_TRANSMITTANCE: f32 = 1.0 / 255.0;
pub const MAX_ALPHA: f32 = 0.99;
const TILE: u32 = 16;

/// Front-to-back blending of `splats` (already in depth order) at pixel
/// center `(px, py)`. Returns the color and the final transmittance.
pub fn shade_pixel<'a>(splats: impl IntoIterator<Item = &'a Splat>, px: f64, py: f64) -> ([f32; 3], f32) {
    let mut color = [0.0f32; 3];
    let mut t = 1.0f32;
    for s in splats {
        let dx = px - s.center[0];
        let dy = py - s.center[1];
        let power = -0.5 * (s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy);
        if power > 0.0 {
            continue;
        }
        let w = (s.alpha * power.exp() as f32).clamp(0.0, MAX_ALPHA);
        for c in 0..3 {
            color[c] += w * t * s.color[c];
        }
        t *= 1.0 - w;
        if t < MIN_TRANSMITTANCE {
            break;
        }
    }
    (color, t)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompositeStats {
    /// Sorted entries that projected to a splat on screen.
    pub splats: usize,
}

/// Projects the sorted Gaussians and composites them over a black
/// background. Pixels are independent once the order is fixed, so tiles are
/// shaded in parallel; each tile only visits splats whose bounds touch it.
pub fn composite(gaussians: &[Gaussian], sorted: &[SortEntry], cam: &Camera) -> (Image, CompositeStats) {
    let splats: Vec<Splat> = sorted
        .par_iter()
        .filter_map(|e| project_gaussian(&gaussians[e.index as usize], cam))
        .collect();
    let tiles_x = cam.width.div_ceil(TILE);
    let tiles_y = cam.height.div_ceil(TILE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (i, s) in splats.iter().enumerate() {
        let [x0, y0, x1, y1] = s.bounds;
        for ty in y0 / TILE..=(y1 - 1) / TILE {
            for tx in x0 / TILE..=(x1 - 1) / TILE {
                bins[(ty * tiles_x + tx) as usize].push(i as u32);
            }
        }
    }
    let shaded: Vec<Vec<[f32; 3]>> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|tile| {
            let (tx, ty) = (tile % tiles_x, tile / tiles_x);
            let list: Vec<&Splat> = bins[tile as usize].iter().map(|&i| &splats[i as usize]).collect();
            let mut out = Vec::with_capacity((TILE * TILE) as usize);
            for y in ty * TILE..((ty + 1) * TILE).min(cam.height) {
                for x in tx * TILE..((tx + 1) * TILE).min(cam.width) {
                    let inside = list.iter().copied().filter(|s| {
                        x >= s.bounds[0] && x < s.bounds[2] && y >= s.bounds[1] && y < s.bounds[3]
                    });
                    out.push(shade_pixel(inside, x as f64 + 0.5, y as f64 + 0.5).0);
                }
            }
            out
        })
        .collect();
    let mut image = Image::new(cam.width, cam.height);
    for (tile, px) in shaded.into_iter().enumerate() {
        let (tx, ty) = (tile as u32 % tiles_x, tile as u32 / tiles_x);
        let mut it = px.into_iter();
        for y in ty * TILE..((ty + 1) * TILE).min(cam.height) {
            for x in tx * TILE..((tx + 1) * TILE).min(cam.width) {
                image.set(x, y, it.next().expect("tile pixel"));
            }
        }
    }
    (image, CompositeStats { splats: splats.len() })
}
