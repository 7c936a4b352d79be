use std::time::{Duration, Instant};

use crate::lod_gen::{build_pyramid, LodError, LodParams};
use crate::paging::{page_scene, paged_scene_file, Page, PagingParams};
use crate::proxy_mesh::{build_proxy_mesh, MeshParams};
use crate::scene_io::{Bounds, SceneFile};
use crate::Gaussian;

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub mesh: MeshParams,
    /// Overrides `mesh.target_faces`; `None` derives it from the page count.
    pub target_faces: Option<usize>,
    pub paging: PagingParams,
    /// `None` keeps a single level.
    pub lod: Option<LodParams>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            mesh: MeshParams::default(),
            target_faces: None,
            paging: PagingParams::default(),
            lod: Some(LodParams::default()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreprocessTimings {
    pub mesh: Duration,
    pub page: Duration,
    pub lod: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub scene: SceneFile,
    pub timings: PreprocessTimings,
    pub splits: usize,
    /// Input indices of each page's Gaussians, page `i + 1` at index `i`.
    pub pages: Vec<Page>,
}

/// Mesh, page, link and (optionally) build the detail pyramid.
pub fn preprocess(gaussians: &[Gaussian], cfg: &PreprocessConfig) -> Result<Preprocessed, LodError> {
    if let Some(lod) = &cfg.lod {
        crate::lod_gen::validate_levels(cfg.paging.page_size as u32, lod.levels)?;
    }
    let mut timings = PreprocessTimings::default();
    let t = Instant::now();
    let mut mesh_params = cfg.mesh.clone();
    mesh_params.target_faces = cfg
        .target_faces
        .unwrap_or_else(|| MeshParams::default_target_faces(gaussians.len(), cfg.paging.page_size));
    let mesh = build_proxy_mesh(gaussians, &mesh_params);
    timings.mesh = t.elapsed();

    let t = Instant::now();
    let paged = page_scene(gaussians, &mesh, &cfg.paging);
    let mut scene = paged_scene_file(gaussians, &paged, cfg.paging.page_size, Bounds::of_gaussians(gaussians));
    timings.page = t.elapsed();

    if let Some(lod) = &cfg.lod {
        let t = Instant::now();
        if lod.levels > 1 {
            scene = build_pyramid(&scene, lod)?;
        }
        timings.lod = t.elapsed();
    }
    Ok(Preprocessed { scene, timings, splits: paged.splits, pages: paged.pages })
}
