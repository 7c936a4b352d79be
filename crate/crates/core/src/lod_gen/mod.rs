//! Per-page detail levels: each level clusters the previous level's
//! Gaussians with k-means and replaces every cluster by its average, halving
//! the page.

mod kmeans;

use glam::DVec4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use kmeans::{cluster_page, distance_sq, feature, kmeans, AttributeWeights, Clustering, Feature, FEATURE_DIM};

use crate::gaussian::{Gaussian, SH_LEN};
use crate::scene_io::SceneFile;

#[derive(Debug, Error, PartialEq)]
pub enum LodError {
    #[error("page size {page_size} is not divisible by 2^{}", .levels - 1)]
    Indivisible { page_size: u32, levels: u32 },
    #[error("level count must be at least 1")]
    NoLevels,
    #[error("scene is not paged")]
    Unpaged,
    #[error("scene already has {0} levels")]
    AlreadyBuilt(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LodParams {
    pub levels: u32,
    pub scale_factor: f32,
    pub max_iters: usize,
    pub seed: u64,
    pub weights: AttributeWeights,
}

impl Default for LodParams {
    fn default() -> Self {
        LodParams {
            levels: 4,
            scale_factor: 2f32.powf(1.0 / 3.0),
            max_iters: 50,
            seed: 7,
            weights: AttributeWeights::default(),
        }
    }
}

/// Averages a cluster. Quaternions are flipped onto the first member's
/// hemisphere before averaging; the scale is enlarged by `scale_factor`.
pub fn merge_cluster(members: &[Gaussian], scale_factor: f32) -> Gaussian {
    assert!(!members.is_empty(), "cannot merge an empty cluster");
    let n = members.len() as f64;
    let mut out = Gaussian::PADDING;
    let reference = DVec4::from_array(members[0].rotation.map(f64::from));
    let mut q_sum = DVec4::ZERO;
    let mut pos = [0.0f64; 3];
    let mut scale = [0.0f64; 3];
    let mut opacity = 0.0f64;
    let mut sh = [0.0f64; SH_LEN];
    for g in members {
        let q = DVec4::from_array(g.rotation.map(f64::from));
        q_sum += if q.dot(reference) < 0.0 { -q } else { q };
        for i in 0..3 {
            pos[i] += g.position[i] as f64;
            scale[i] += g.scale[i] as f64;
        }
        opacity += g.opacity as f64;
        for (s, v) in sh.iter_mut().zip(&g.sh) {
            *s += *v as f64;
        }
    }
    let mean_q = q_sum / n;
    out.rotation = if mean_q.length() < 1e-6 {
        members[0].rotation
    } else {
        mean_q.normalize().to_array().map(|c| c as f32)
    };
    out.position = pos.map(|p| (p / n) as f32);
    out.scale = scale.map(|s| (s / n) as f32 * scale_factor);
    out.opacity = (opacity / n) as f32;
    out.sh = sh.map(|s| (s / n) as f32);
    out
}

fn page_rng(seed: u64, page: u32, level: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((page as u64) << 8) | level as u64);
    rng
}

/// One coarser level of a page: `⌈n/2⌉` clusters of the non-padding
/// records, merged and padded to `out_len`.
pub fn halve_page(page: &[Gaussian], out_len: usize, params: &LodParams, rng: &mut ChaCha8Rng) -> Vec<Gaussian> {
    let real: Vec<Gaussian> = page.iter().filter(|g| !g.is_padding()).copied().collect();
    let mut out = Vec::with_capacity(out_len);
    if !real.is_empty() {
        let k = real.len().div_ceil(2);
        let clustering = cluster_page(&real, k, &params.weights, params.max_iters, rng);
        let mut groups: Vec<Vec<Gaussian>> = vec![Vec::new(); clustering.cluster_count];
        for (g, &c) in real.iter().zip(&clustering.assignment) {
            groups[c].push(*g);
        }
        out.extend(groups.iter().map(|m| merge_cluster(m, params.scale_factor)));
    }
    assert!(out.len() <= out_len, "{} merged records for {} slots", out.len(), out_len);
    out.resize(out_len, Gaussian::PADDING);
    out
}

/// All levels of one page, level 0 first.
pub fn page_pyramid(level0: &[Gaussian], page_id: u32, params: &LodParams) -> Vec<Vec<Gaussian>> {
    let mut levels = vec![level0.to_vec()];
    for level in 1..params.levels {
        let out_len = level0.len() >> level;
        let mut rng = page_rng(params.seed, page_id, level);
        let next = halve_page(levels.last().expect("level 0 present"), out_len, params, &mut rng);
        levels.push(next);
    }
    levels
}

pub fn validate_levels(page_size: u32, levels: u32) -> Result<(), LodError> {
    if levels == 0 {
        return Err(LodError::NoLevels);
    }
    if levels > 31 || page_size % (1u32 << (levels - 1)) != 0 {
        return Err(LodError::Indivisible { page_size, levels });
    }
    Ok(())
}

/// Replaces the single-level Gaussian section of a paged scene with the
/// full pyramid; pages are processed in parallel.
pub fn build_pyramid(scene: &SceneFile, params: &LodParams) -> Result<SceneFile, LodError> {
    if !scene.is_paged() {
        return Err(LodError::Unpaged);
    }
    if scene.lod_levels != 1 {
        return Err(LodError::AlreadyBuilt(scene.lod_levels));
    }
    validate_levels(scene.page_size, params.levels)?;
    let pages: Vec<Vec<Vec<Gaussian>>> = (1..=scene.page_count())
        .into_par_iter()
        .map(|p| page_pyramid(scene.page(0, p), p, params))
        .collect();
    let mut gaussians = Vec::with_capacity(scene.gaussians.len() * 2);
    for level in 0..params.levels as usize {
        for page in &pages {
            gaussians.extend_from_slice(&page[level]);
        }
    }
    Ok(SceneFile {
        lod_levels: params.levels,
        page_counts: vec![scene.page_count(); params.levels as usize],
        gaussians,
        ..scene.clone()
    })
}
