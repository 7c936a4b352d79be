use std::collections::{BTreeSet, HashMap, VecDeque};

use glam::DVec3;
use rayon::prelude::*;

use super::bvh::FaceBvh;
use super::Page;
use crate::gaussian::Gaussian;
use crate::proxy_mesh::{point_triangle_distance_sq, ProxyMesh};

/// Faces still overflowing after this many splits spill their surplus into
/// extra pages.
pub const MAX_SPLIT_DEPTH: u8 = 16;

/// One page per face of the (possibly subdivided) mesh, followed by any
/// spill pages.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub mesh: ProxyMesh,
    pub pages: Vec<Page>,
    /// Face each page hangs off; spill pages use their source face.
    pub anchor_face: Vec<u32>,
    pub splits: usize,
}

#[derive(Clone, Copy)]
struct FaceState {
    split_edge: u8,
    depth: u8,
}

/// Assigns each non-padding Gaussian to the face nearest its mean, then
/// splits faces holding more than `page_size` Gaussians at an edge midpoint
/// until every face fits.
pub fn assign_pages(gaussians: &[Gaussian], mesh: &ProxyMesh, page_size: usize) -> Assignment {
    assert!(page_size >= 1, "page size must be positive");
    assert!(!mesh.is_empty(), "cannot page against an empty mesh");
    let bvh = FaceBvh::new(mesh);
    let nearest: Vec<Option<u32>> = gaussians
        .par_iter()
        .map(|g| (!g.is_padding()).then(|| bvh.nearest(g.position()).expect("non-empty mesh").0))
        .collect();

    let mut mesh = ProxyMesh::new(mesh.vertices.clone(), mesh.faces.clone());
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); mesh.faces.len()];
    for (i, f) in nearest.iter().enumerate() {
        if let Some(f) = f {
            members[*f as usize].push(i as u32);
        }
    }
    let mut state = vec![FaceState { split_edge: 0, depth: 0 }; mesh.faces.len()];
    let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
    let mut queue: VecDeque<usize> = (0..mesh.faces.len()).filter(|&f| members[f].len() > page_size).collect();
    let mut spills: Vec<(usize, Vec<u32>)> = Vec::new();
    let mut splits = 0;

    while let Some(f) = queue.pop_front() {
        if members[f].len() <= page_size {
            continue;
        }
        let st = state[f];
        if st.depth >= MAX_SPLIT_DEPTH {
            members[f].sort_unstable();
            let surplus = members[f].split_off(page_size);
            for chunk in surplus.chunks(page_size) {
                spills.push((f, chunk.to_vec()));
            }
            continue;
        }
        let face = mesh.faces[f];
        let e = st.split_edge as usize;
        let (a, b, c) = (face[e], face[(e + 1) % 3], face[(e + 2) % 3]);
        let m = *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let p = (mesh.vertex(a) + mesh.vertex(b)) * 0.5;
            mesh.vertices.push([p.x as f32, p.y as f32, p.z as f32]);
            mesh.vertices.len() as u32 - 1
        });
        let first = [a, m, c];
        let second = [m, b, c];
        mesh.faces[f] = first;
        mesh.faces.push(second);
        mesh.face_page.push(0);
        let g = mesh.faces.len() - 1;
        let child = FaceState { split_edge: ((e + 1) % 3) as u8, depth: st.depth + 1 };
        state[f] = child;
        state.push(child);
        splits += 1;

        let t1 = first.map(|v| mesh.vertex(v));
        let t2 = second.map(|v| mesh.vertex(v));
        let (keep, moved): (Vec<u32>, Vec<u32>) = std::mem::take(&mut members[f]).into_iter().partition(|&i| {
            let p: DVec3 = gaussians[i as usize].position();
            point_triangle_distance_sq(p, &t1) <= point_triangle_distance_sq(p, &t2)
        });
        members[f] = keep;
        members.push(moved);
        for h in [f, g] {
            if members[h].len() > page_size {
                queue.push_back(h);
            }
        }
    }

    let mut pages: Vec<Page> = Vec::with_capacity(members.len() + spills.len());
    let mut anchor_face = Vec::with_capacity(members.len() + spills.len());
    for (f, mut m) in members.into_iter().enumerate() {
        m.sort_unstable();
        pages.push(Page { id: f as u32 + 1, gaussians: m, links: BTreeSet::new() });
        anchor_face.push(f as u32);
    }
    for (f, m) in spills {
        let id = pages.len() as u32 + 1;
        pages[f].links.insert(id);
        pages.push(Page { id, gaussians: m, links: BTreeSet::new() });
        anchor_face.push(f as u32);
    }
    mesh.face_page = (1..=mesh.faces.len() as u32).collect();
    Assignment { mesh, pages, anchor_face, splits }
}
