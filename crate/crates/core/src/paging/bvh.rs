//! Bounding-volume hierarchy over mesh faces for nearest-face queries.

use glam::DVec3;

use crate::proxy_mesh::{point_triangle_distance_sq, ProxyMesh};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: DVec3,
    hi: DVec3,
}

impl Aabb {
    const EMPTY: Aabb = Aabb { lo: DVec3::splat(f64::INFINITY), hi: DVec3::splat(f64::NEG_INFINITY) };

    fn grow(self, p: DVec3) -> Aabb {
        Aabb { lo: self.lo.min(p), hi: self.hi.max(p) }
    }

    fn union(self, o: Aabb) -> Aabb {
        Aabb { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    fn distance_sq(&self, p: DVec3) -> f64 {
        let d = (self.lo - p).max(p - self.hi).max(DVec3::ZERO);
        d.length_squared()
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Static BVH; queries return the same face as an exhaustive scan, with
/// ties resolved towards the lower face index.
#[derive(Clone, Debug)]
pub struct FaceBvh {
    triangles: Vec<[DVec3; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl FaceBvh {
    pub fn new(mesh: &ProxyMesh) -> FaceBvh {
        let triangles: Vec<[DVec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            let centroids: Vec<DVec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
            build(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        FaceBvh { triangles, order, nodes }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Nearest face to `p` and its squared distance.
    pub fn nearest(&self, p: DVec3) -> Option<(u32, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.nodes[n].bounds().distance_sq(p) > best.1 {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[start..end] {
                        let d = point_triangle_distance_sq(p, &self.triangles[f as usize]);
                        if d < best.1 || (d == best.1 && f < best.0) {
                            best = (f, d);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_sq(p);
                    let dr = self.nodes[right].bounds().distance_sq(p);
                    // Push the farther child first so the nearer is visited first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        Some(best)
    }
}

fn build(
    triangles: &[[DVec3; 3]],
    centroids: &[DVec3],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let bounds = order[start..end]
        .iter()
        .flat_map(|&f| triangles[f as usize])
        .fold(Aabb::EMPTY, Aabb::grow);
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let cb = order[start..end].iter().fold(Aabb::EMPTY, |b, &f| b.grow(centroids[f as usize]));
    let ext = cb.hi - cb.lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis]).then(a.cmp(&b))
    });
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build(triangles, centroids, order, start, mid, nodes);
    let right = build(triangles, centroids, order, mid, end, nodes);
    let bounds = nodes[left].bounds().union(*nodes[right].bounds());
    nodes[id] = Node::Inner { bounds, left, right };
    id
}

/// Exhaustive nearest-face scan with the same tie rule as [`FaceBvh`].
pub fn nearest_face_brute(mesh: &ProxyMesh, p: DVec3) -> Option<(u32, f64)> {
    (0..mesh.faces.len())
        .map(|f| (f as u32, point_triangle_distance_sq(p, &mesh.triangle(f))))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}
