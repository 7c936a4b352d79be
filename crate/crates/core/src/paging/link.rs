use std::collections::BTreeMap;

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bvh::FaceBvh;
use super::Page;
use crate::gaussian::Gaussian;
use crate::proxy_mesh::ProxyMesh;

#[derive(Clone, Debug, PartialEq)]
pub struct LinkParams {
    pub samples_per_gaussian: usize,
    pub seed: u64,
    /// Minimum number of samples an overlap needs to become a link.
    pub threshold: usize,
    /// Mahalanobis radius of the sampled ellipsoid.
    pub extent: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams { samples_per_gaussian: 32, seed: 7, threshold: 1, extent: 1.0 }
    }
}

/// Point in the unit ball from uniform radius, polar and azimuth angles.
/// Samples concentrate towards the center: the radius is uniform on [0, 1).
pub fn sample_unit_sphere<R: Rng>(rng: &mut R) -> DVec3 {
    let r: f64 = rng.random();
    let theta = rng.random::<f64>() * std::f64::consts::PI;
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    DVec3::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos())
}

/// Random stream for one Gaussian, independent of evaluation order.
pub fn gaussian_rng(seed: u64, gaussian: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(gaussian as u64);
    rng
}

/// Nearest face of every sample drawn for Gaussian `index`.
pub fn sample_faces(g: &Gaussian, index: u32, bvh: &FaceBvh, params: &LinkParams) -> Vec<u32> {
    let mut rng = gaussian_rng(params.seed, index);
    let m = g.rotation_matrix();
    let s = g.scale() * params.extent;
    let mu = g.position();
    (0..params.samples_per_gaussian)
        .map(|_| {
            let p = mu + m * (sample_unit_sphere(&mut rng) * s);
            bvh.nearest(p).expect("non-empty mesh").0
        })
        .collect()
}

/// Samples every Gaussian's ellipsoid, hands unassigned faces to the page
/// with the most samples on them, and records a link `q → p` whenever at
/// least `threshold` samples of page `p`'s Gaussians land on faces of page
/// `q`. Existing links are kept.
pub fn link_pages(gaussians: &[Gaussian], mesh: &mut ProxyMesh, pages: &mut [Page], params: &LinkParams) {
    if mesh.is_empty() {
        return;
    }
    let bvh = FaceBvh::new(mesh);
    let mut owner = vec![0u32; gaussians.len()];
    for p in pages.iter() {
        for &g in &p.gaussians {
            owner[g as usize] = p.id;
        }
    }
    let samples: Vec<Vec<u32>> = (0..gaussians.len())
        .into_par_iter()
        .map(|i| {
            if owner[i] == 0 || gaussians[i].is_padding() {
                Vec::new()
            } else {
                sample_faces(&gaussians[i], i as u32, &bvh, params)
            }
        })
        .collect();

    // Votes for unassigned faces.
    let mut votes: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
    for (i, faces) in samples.iter().enumerate() {
        for &f in faces {
            if mesh.face_page[f as usize] == 0 {
                *votes.entry(f).or_default().entry(owner[i]).or_default() += 1;
            }
        }
    }
    for (f, tally) in votes {
        let best = tally.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).expect("non-empty tally");
        mesh.face_page[f as usize] = *best.0;
    }

    let mut overlap: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (i, faces) in samples.iter().enumerate() {
        for &f in faces {
            let q = mesh.face_page[f as usize];
            if q != 0 && q != owner[i] {
                *overlap.entry((q, owner[i])).or_default() += 1;
            }
        }
    }
    for ((q, p), count) in overlap {
        if count >= params.threshold.max(1) {
            pages[q as usize - 1].links.insert(p);
        }
    }
}

/// Link lists in page order, as stored in the scene file.
pub fn link_lists(pages: &[Page]) -> Vec<Vec<u32>> {
    pages.iter().map(|p| p.links.iter().copied().collect()).collect()
}
