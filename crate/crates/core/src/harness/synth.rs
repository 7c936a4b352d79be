//! Synthetic scenes with controlled geometry.

use glam::{DQuat, DVec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::splat_render::SH_C0;
use crate::Gaussian;

/// DC coefficients reproducing an RGB color at every view direction.
pub fn dc_for_color(rgb: [f32; 3]) -> [f32; 3] {
    rgb.map(|c| (c - 0.5) / SH_C0 as f32)
}

/// Which part of a synthetic scene a Gaussian belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    Wall,
    /// In front of the wall, on the camera side.
    Front,
    /// Behind the wall.
    Hidden,
    Ground,
    Blob(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub gaussians: Vec<Gaussian>,
    pub parts: Vec<Part>,
}

impl SynthScene {
    fn push(&mut self, g: Gaussian, part: Part) {
        self.gaussians.push(g);
        self.parts.push(part);
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [f32; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = h.floor() as i32;
    let f = h - i as f64;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r as f32, g as f32, b as f32]
}

fn unit_vector(rng: &mut ChaCha8Rng) -> DVec3 {
    loop {
        let v = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let l = v.length_squared();
        if l > 1e-6 && l <= 1.0 {
            return v / l.sqrt();
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> DQuat {
    let v = unit_vector(rng);
    DQuat::from_axis_angle(v, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Gaussians filling a ball, colored by direction from the center. Solid
/// volumes survive the proxy mesh's morphological opening at any grid
/// resolution that resolves the ball itself.
fn ball(scene: &mut SynthScene, rng: &mut ChaCha8Rng, center: DVec3, radius: f64, count: usize, hue: f64, part: Part) {
    let spacing = (4.0 / 3.0 * std::f64::consts::PI * radius.powi(3) / count.max(1) as f64).cbrt();
    for _ in 0..count {
        let n = unit_vector(rng);
        let r = radius * rng.random_range(0.0f64..1.0).cbrt();
        let p = center + n * r;
        let color = hsv(hue + 0.08 * n.y, 0.7, 0.55 + 0.4 * n.z.abs());
        let s = (spacing * rng.random_range(0.9..1.3)) as f32;
        let g = Gaussian::new(p.as_vec3().into(), [s, s, s * 0.6], 0.9, dc_for_color(color))
            .with_rotation(random_rotation(rng));
        scene.push(g, part);
    }
}

/// An opaque wall in the plane `z = 0` with one cluster in front of it
/// (towards `-z`) and one behind. The clusters sit far enough from the wall
/// that no Gaussian of one part reaches another part's surface.
pub fn wall_scene(total: usize, seed: u64) -> SynthScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = SynthScene { gaussians: Vec::new(), parts: Vec::new() };
    let half = 4.0f64;
    let wall = total / 2;
    let per_side = (wall as f64).sqrt().floor() as usize;
    let step = 2.0 * half / per_side as f64;
    for i in 0..per_side {
        for j in 0..per_side {
            let x = -half + (i as f64 + 0.5) * step + rng.random_range(-0.2..0.2) * step;
            let y = -half + (j as f64 + 0.5) * step + rng.random_range(-0.2..0.2) * step;
            let checker = ((x.floor() as i64 + y.floor() as i64) & 1) as f64;
            let color = hsv(0.08 + 0.5 * checker, 0.5, 0.6 + 0.3 * checker);
            let s = (step * 0.9) as f32;
            let g = Gaussian::new([x as f32, y as f32, rng.random_range(-0.05..0.05)], [s, s, 0.25], 0.97, dc_for_color(color));
            scene.push(g, Part::Wall);
        }
    }
    let rest = total.saturating_sub(scene.len());
    ball(&mut scene, &mut rng, DVec3::new(0.5, 0.3, -2.6), 1.1, rest / 2, 0.6, Part::Front);
    ball(&mut scene, &mut rng, DVec3::new(-0.5, -0.3, 2.6), 1.1, rest - rest / 2, 0.0, Part::Hidden);
    scene
}

/// A ground slab with a regular grid of colored blobs standing on it. The
/// footprint is `2 * half` wide in x and z; y points down.
pub fn blob_field(blobs_per_side: usize, gaussians_per_blob: usize, ground: usize, seed: u64) -> SynthScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = SynthScene { gaussians: Vec::new(), parts: Vec::new() };
    let spacing = 3.0;
    let half = spacing * blobs_per_side as f64 / 2.0;
    let per_side = (ground as f64).sqrt().floor() as usize;
    if per_side > 0 {
        let step = 2.0 * half / per_side as f64;
        for i in 0..per_side {
            for j in 0..per_side {
                let x = -half + (i as f64 + 0.5) * step;
                let z = -half + (j as f64 + 0.5) * step;
                let color = hsv(0.3 + 0.05 * (x * 0.7).sin() * (z * 0.5).cos(), 0.4, 0.45);
                let s = (step * 0.9) as f32;
                let g = Gaussian::new([x as f32, 0.0, z as f32], [s, 0.5, s], 0.95, dc_for_color(color));
                scene.push(g, Part::Ground);
            }
        }
    }
    let mut id = 0;
    for i in 0..blobs_per_side {
        for j in 0..blobs_per_side {
            let x = -half + (i as f64 + 0.5) * spacing;
            let z = -half + (j as f64 + 0.5) * spacing;
            let radius = rng.random_range(0.6..1.0);
            let center = DVec3::new(x, -1.3 - radius, z);
            let hue = rng.random_range(0.0..1.0);
            ball(&mut scene, &mut rng, center, radius, gaussians_per_blob, hue, Part::Blob(id));
            id += 1;
        }
    }
    scene
}

/// Separate spherical clusters placed on a ring, each of its own color.
pub fn clusters(count: usize, per_cluster: usize, seed: u64) -> SynthScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = SynthScene { gaussians: Vec::new(), parts: Vec::new() };
    let ring = 1.5 * count as f64 / std::f64::consts::PI + 2.0;
    for k in 0..count {
        let a = k as f64 / count as f64 * std::f64::consts::TAU;
        let center = DVec3::new(ring * a.cos(), 0.0, ring * a.sin());
        ball(&mut scene, &mut rng, center, 1.0, per_cluster, k as f64 / count as f64, Part::Blob(k as u32));
    }
    scene
}

/// A regular grid of small isotropic Gaussians filling a box; useful for
/// stress and page-size sweeps.
pub fn grid(nx: usize, ny: usize, nz: usize, spacing: f32) -> SynthScene {
    let mut scene = SynthScene { gaussians: Vec::new(), parts: Vec::new() };
    let c = |n: usize, i: usize| (i as f32 - (n as f32 - 1.0) / 2.0) * spacing;
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let color = [i as f32 / nx.max(1) as f32, j as f32 / ny.max(1) as f32, k as f32 / nz.max(1) as f32];
                let g = Gaussian::new([c(nx, i), c(ny, j), c(nz, k)], [spacing * 0.6; 3], 0.8, dc_for_color(color));
                scene.push(g, Part::Blob(0));
            }
        }
    }
    scene
}
