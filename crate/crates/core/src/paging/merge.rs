use std::collections::{BTreeSet, HashMap, VecDeque};

use glam::DVec3;

use super::assign::Assignment;
use super::Page;
use crate::proxy_mesh::ProxyMesh;

/// Result of merging: pages renumbered `1..=N` in creation order, with
/// `mesh.face_page` rewritten. Faces whose merged page holds no Gaussians
/// are left unassigned (page 0).
#[derive(Clone, Debug, PartialEq)]
pub struct Merged {
    pub mesh: ProxyMesh,
    pub pages: Vec<Page>,
}

fn page_adjacency(mesh: &ProxyMesh, page_count: usize) -> Vec<BTreeSet<usize>> {
    let mut by_edge: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (face[k], face[(k + 1) % 3]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    let mut adj = vec![BTreeSet::new(); page_count];
    for faces in by_edge.values() {
        for &f in faces {
            for &g in faces {
                let (p, q) = (mesh.face_page[f] as usize, mesh.face_page[g] as usize);
                if p != q && p > 0 && q > 0 {
                    adj[p - 1].insert(q - 1);
                }
            }
        }
    }
    adj
}

/// Connected surface component of each page's anchor face, joining faces
/// that share a vertex.
fn page_components(a: &Assignment) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..a.mesh.vertices.len()).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for face in &a.mesh.faces {
        let r = find(&mut parent, face[0] as usize);
        for &v in &face[1..] {
            let s = find(&mut parent, v as usize);
            parent[s] = r;
        }
    }
    a.anchor_face.iter().map(|&f| find(&mut parent, a.mesh.faces[f as usize][0] as usize)).collect()
}

fn page_centroids(a: &Assignment) -> Vec<DVec3> {
    let n = a.pages.len();
    let mut sum = vec![DVec3::ZERO; n];
    let mut weight = vec![0.0; n];
    for f in 0..a.mesh.faces.len() {
        let p = a.mesh.face_page[f] as usize;
        if p > 0 {
            let w = a.mesh.face_area(f).max(1e-30);
            sum[p - 1] += a.mesh.face_centroid(f) * w;
            weight[p - 1] += w;
        }
    }
    (0..n)
        .map(|i| {
            if weight[i] > 0.0 {
                sum[i] / weight[i]
            } else {
                a.mesh.face_centroid(a.anchor_face[i] as usize)
            }
        })
        .collect()
}

/// Greedy breadth-first merge of edge-adjacent pages while their total stays
/// within `page_size`. A neighbor that would overflow seeds the next merged
/// page; a page with no mergeable neighbor left tries the nearest remaining
/// page by centroid distance on the same connected surface.
pub fn merge_pages(assignment: &Assignment, page_size: usize) -> Merged {
    let n = assignment.pages.len();
    let size: Vec<usize> = assignment.pages.iter().map(|p| p.gaussians.len()).collect();
    let adj = page_adjacency(&assignment.mesh, n);
    let centroid = page_centroids(assignment);
    let component = page_components(assignment);
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut next_base: Option<usize> = None;
    let mut scan = 0;

    loop {
        let base = match next_base.take().filter(|&b| group_of[b] == usize::MAX) {
            Some(b) => b,
            None => {
                while scan < n && group_of[scan] != usize::MAX {
                    scan += 1;
                }
                if scan == n {
                    break;
                }
                scan
            }
        };
        let gid = groups.len();
        let mut group = vec![base];
        group_of[base] = gid;
        let mut total = size[base];
        let mut queue: VecDeque<usize> = adj[base].iter().copied().collect();
        loop {
            while let Some(c) = queue.pop_front() {
                if group_of[c] != usize::MAX {
                    continue;
                }
                if total + size[c] <= page_size {
                    group_of[c] = gid;
                    group.push(c);
                    total += size[c];
                    queue.extend(adj[c].iter().copied());
                } else if next_base.is_none() {
                    next_base = Some(c);
                }
            }
            if total >= page_size {
                break;
            }
            let here = centroid[base];
            let nearest = (0..n)
                .filter(|&p| group_of[p] == usize::MAX && component[p] == component[base])
                .min_by(|&p, &q| {
                    here.distance_squared(centroid[p])
                        .total_cmp(&here.distance_squared(centroid[q]))
                        .then(p.cmp(&q))
                });
            match nearest {
                Some(c) if total + size[c] <= page_size => queue.push_back(c),
                _ => break,
            }
        }
        groups.push(group);
    }

    // Renumber non-empty groups in creation order.
    let mut new_id = vec![0u32; groups.len()];
    let mut pages: Vec<Page> = Vec::new();
    for (gid, group) in groups.iter().enumerate() {
        let mut gaussians: Vec<u32> = group.iter().flat_map(|&p| assignment.pages[p].gaussians.iter().copied()).collect();
        if gaussians.is_empty() {
            continue;
        }
        gaussians.sort_unstable();
        new_id[gid] = pages.len() as u32 + 1;
        pages.push(Page { id: new_id[gid], gaussians, links: BTreeSet::new() });
    }
    for (old, page) in assignment.pages.iter().enumerate() {
        let from = new_id[group_of[old]];
        for &l in &page.links {
            let to = new_id[group_of[l as usize - 1]];
            if from != 0 && to != 0 && from != to {
                pages[from as usize - 1].links.insert(to);
            }
        }
    }
    let mut mesh = assignment.mesh.clone();
    for p in mesh.face_page.iter_mut() {
        *p = if *p == 0 { 0 } else { new_id[group_of[*p as usize - 1]] };
    }
    Merged { mesh, pages }
}
