//! Grouping Gaussians into fixed-size pages attached to proxy-mesh faces,
//! and linking pages whose Gaussians reach over each other's faces.

mod assign;
mod bvh;
mod link;
mod merge;

use std::collections::BTreeSet;

pub use assign::{assign_pages, Assignment, MAX_SPLIT_DEPTH};
pub use bvh::{nearest_face_brute, FaceBvh};
pub use link::{gaussian_rng, link_lists, link_pages, sample_faces, sample_unit_sphere, LinkParams};
pub use merge::{merge_pages, Merged};

use crate::gaussian::Gaussian;
use crate::proxy_mesh::ProxyMesh;
use crate::scene_io::{Bounds, SceneFile};

/// Page IDs start at 1; 0 marks unassigned faces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Page {
    pub id: u32,
    /// Indices into the input Gaussian list, ascending.
    pub gaussians: Vec<u32>,
    pub links: BTreeSet<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PagingParams {
    pub page_size: usize,
    pub link: LinkParams,
}

impl Default for PagingParams {
    fn default() -> Self {
        PagingParams { page_size: 2048, link: LinkParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PagedScene {
    pub mesh: ProxyMesh,
    pub pages: Vec<Page>,
    pub splits: usize,
}

/// Assignment, merge and linking in one pass.
pub fn page_scene(gaussians: &[Gaussian], mesh: &ProxyMesh, params: &PagingParams) -> PagedScene {
    let assignment = assign_pages(gaussians, mesh, params.page_size);
    let Merged { mut mesh, mut pages } = merge_pages(&assignment, params.page_size);
    link_pages(gaussians, &mut mesh, &mut pages, &params.link);
    PagedScene { mesh, pages, splits: assignment.splits }
}

/// Concatenates the pages' Gaussians, each page padded to `page_size`
/// records with all-zero Gaussians.
pub fn pad_pages(gaussians: &[Gaussian], pages: &[Page], page_size: usize) -> Vec<Gaussian> {
    let mut out = Vec::with_capacity(pages.len() * page_size);
    for p in pages {
        assert!(p.gaussians.len() <= page_size, "page {} holds {} Gaussians", p.id, p.gaussians.len());
        out.extend(p.gaussians.iter().map(|&i| gaussians[i as usize]));
        out.resize(out.len() + page_size - p.gaussians.len(), Gaussian::PADDING);
    }
    out
}

/// Single-level scene file holding the padded pages.
pub fn paged_scene_file(gaussians: &[Gaussian], paged: &PagedScene, page_size: usize, bounds: Bounds) -> SceneFile {
    SceneFile {
        page_size: page_size as u32,
        lod_levels: 1,
        page_counts: vec![paged.pages.len() as u32],
        bounds,
        mesh: paged.mesh.clone(),
        links: link_lists(&paged.pages),
        gaussians: pad_pages(gaussians, &paged.pages, page_size),
    }
}
