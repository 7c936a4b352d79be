//! Quadric error metric edge-collapse simplification.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use glam::{DMat3, DVec3};

use super::mesh::ProxyMesh;

/// Symmetric quadric `f(v) = vᵀAv + 2bᵀv + c`.
#[derive(Clone, Copy, Debug)]
struct Quadric {
    a: DMat3,
    b: DVec3,
    c: f64,
}

impl Quadric {
    const ZERO: Quadric = Quadric { a: DMat3::ZERO, b: DVec3::ZERO, c: 0.0 };

    fn plane(n: DVec3, d: f64, weight: f64) -> Self {
        Quadric {
            a: DMat3::from_cols(n * n.x, n * n.y, n * n.z) * weight,
            b: n * d * weight,
            c: d * d * weight,
        }
    }

    fn add(self, o: Quadric) -> Quadric {
        Quadric { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c }
    }

    fn eval(&self, v: DVec3) -> f64 {
        (v.dot(self.a * v) + 2.0 * self.b.dot(v) + self.c).max(0.0)
    }

    /// Minimizer closest to `anchor`, via a truncated pseudo-inverse of `a`.
    fn minimizer(&self, anchor: DVec3) -> DVec3 {
        let (values, vectors) = symmetric_eigen(self.a);
        let largest = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = -(self.a * anchor + self.b);
        let mut step = DVec3::ZERO;
        for i in 0..3 {
            if values[i] > 1e-6 * largest && values[i] > 0.0 {
                let e = vectors.col(i);
                step += e * (e.dot(residual) / values[i]);
            }
        }
        anchor + step
    }
}

/// Jacobi eigen-decomposition of a symmetric 3×3 matrix; eigenvectors are
/// the columns of the returned matrix.
fn symmetric_eigen(m: DMat3) -> ([f64; 3], DMat3) {
    let mut a = m.to_cols_array_2d();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..32 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    // `v` holds eigenvectors as columns in row-major form.
    let cols = DMat3::from_cols(
        DVec3::new(v[0][0], v[1][0], v[2][0]),
        DVec3::new(v[0][1], v[1][1], v[2][1]),
        DVec3::new(v[0][2], v[1][2], v[2][2]),
    );
    ([a[0][0], a[1][1], a[2][2]], cols)
}

#[derive(PartialEq)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    stamp: (u32, u32),
    target: DVec3,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        // Reversed for a min-heap; ties broken by vertex indices.
        o.cost.total_cmp(&self.cost).then_with(|| (o.a, o.b).cmp(&(self.a, self.b)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Simplifier {
    pos: Vec<DVec3>,
    quadric: Vec<Quadric>,
    version: Vec<u32>,
    faces: Vec<[u32; 3]>,
    alive: Vec<bool>,
    incident: Vec<Vec<u32>>,
    live_faces: usize,
    heap: BinaryHeap<Candidate>,
    collapse_costs: Vec<f64>,
}

impl Simplifier {
    fn new(mesh: &ProxyMesh) -> Self {
        let pos: Vec<DVec3> = (0..mesh.vertices.len() as u32).map(|i| mesh.vertex(i)).collect();
        let mut quadric = vec![Quadric::ZERO; pos.len()];
        let mut incident = vec![Vec::new(); pos.len()];
        for (fi, f) in mesh.faces.iter().enumerate() {
            let [a, b, c] = f.map(|v| pos[v as usize]);
            let cross = (b - a).cross(c - a);
            let area = 0.5 * cross.length();
            if area > 0.0 {
                let n = cross.normalize();
                let q = Quadric::plane(n, -n.dot(a), area);
                for &v in f {
                    quadric[v as usize] = quadric[v as usize].add(q);
                }
            }
            for &v in f {
                incident[v as usize].push(fi as u32);
            }
        }
        Simplifier {
            version: vec![0; pos.len()],
            pos,
            quadric,
            alive: vec![true; mesh.faces.len()],
            faces: mesh.faces.clone(),
            incident,
            live_faces: mesh.faces.len(),
            heap: BinaryHeap::new(),
            collapse_costs: Vec::new(),
        }
    }

    fn neighbors(&self, v: u32) -> BTreeSet<u32> {
        self.incident[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&u| u != v)
            .collect()
    }

    fn push_edge(&mut self, a: u32, b: u32) {
        let (a, b) = (a.min(b), a.max(b));
        let q = self.quadric[a as usize].add(self.quadric[b as usize]);
        let mid = 0.5 * (self.pos[a as usize] + self.pos[b as usize]);
        let target = q.minimizer(mid);
        self.heap.push(Candidate {
            cost: q.eval(target),
            a,
            b,
            stamp: (self.version[a as usize], self.version[b as usize]),
            target,
        });
    }

    fn face_normal(&self, f: [u32; 3], moved: u32, to: DVec3) -> DVec3 {
        let p = f.map(|v| if v == moved { to } else { self.pos[v as usize] });
        (p[1] - p[0]).cross(p[2] - p[0])
    }

    fn collapse_allowed(&self, a: u32, b: u32, to: DVec3) -> bool {
        let shared: Vec<u32> = self.incident[a as usize]
            .iter()
            .copied()
            .filter(|f| self.faces[*f as usize].contains(&b))
            .collect();
        if shared.is_empty() || self.live_faces - shared.len() < 4 {
            return false;
        }
        // Link condition: common neighbors are exactly the opposite vertices.
        let opposite: BTreeSet<u32> = shared
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&v| v != a && v != b)
            .collect();
        let common: BTreeSet<u32> = self.neighbors(a).intersection(&self.neighbors(b)).copied().collect();
        if common != opposite {
            return false;
        }
        // No flipped or degenerate faces around either endpoint.
        for &v in &[a, b] {
            for &f in &self.incident[v as usize] {
                if shared.contains(&f) {
                    continue;
                }
                let face = self.faces[f as usize];
                let before = self.face_normal(face, v, self.pos[v as usize]);
                let after = self.face_normal(face, v, to);
                if 0.5 * after.length() <= 1e-12 || before.dot(after) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: u32, b: u32, to: DVec3) {
        for f in std::mem::take(&mut self.incident[b as usize]) {
            let face = &mut self.faces[f as usize];
            if face.contains(&a) {
                self.alive[f as usize] = false;
                self.live_faces -= 1;
                for v in *face {
                    if v != b {
                        self.incident[v as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for v in face.iter_mut() {
                    if *v == b {
                        *v = a;
                    }
                }
                self.incident[a as usize].push(f);
            }
        }
        self.pos[a as usize] = to;
        self.quadric[a as usize] = self.quadric[a as usize].add(self.quadric[b as usize]);
        self.version[a as usize] += 1;
        self.version[b as usize] += 1;
        for n in self.neighbors(a) {
            self.push_edge(a, n);
        }
    }

    fn run(&mut self, target_faces: usize) {
        for f in 0..self.faces.len() {
            let face = self.faces[f];
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                if a < b {
                    self.push_edge(a, b);
                } else if !self.faces_with_edge(a, b).any(|g| {
                    let h = self.faces[g as usize];
                    (0..3).any(|j| h[j] == b && h[(j + 1) % 3] == a)
                }) {
                    // Boundary edge seen only in this direction.
                    self.push_edge(a, b);
                }
            }
        }
        while self.live_faces > target_faces {
            let Some(c) = self.heap.pop() else { break };
            if (self.version[c.a as usize], self.version[c.b as usize]) != c.stamp {
                continue;
            }
            if !self.collapse_allowed(c.a, c.b, c.target) {
                continue;
            }
            self.collapse_costs.push(c.cost);
            self.collapse(c.a, c.b, c.target);
        }
    }

    fn faces_with_edge(&self, a: u32, b: u32) -> impl Iterator<Item = u32> + '_ {
        self.incident[a as usize]
            .iter()
            .copied()
            .filter(move |&f| self.faces[f as usize].contains(&b))
    }

    fn finish(self) -> ProxyMesh {
        let vertices = self.pos.iter().map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect();
        let faces = self
            .faces
            .iter()
            .zip(&self.alive)
            .filter(|(_, &alive)| alive)
            .map(|(f, _)| *f)
            .collect();
        let mut mesh = ProxyMesh::new(vertices, faces);
        mesh.compact();
        mesh
    }
}

/// Collapses edges in order of quadric error until at most `target_faces`
/// faces remain or no collapse is safe. Collapses that would break the link
/// condition, flip a face or create a degenerate face are skipped.
pub fn simplify(mesh: &ProxyMesh, target_faces: usize) -> ProxyMesh {
    simplify_traced(mesh, target_faces).0
}

/// Like [`simplify`], also returning the quadric cost of every collapse in
/// the order performed.
pub fn simplify_traced(mesh: &ProxyMesh, target_faces: usize) -> (ProxyMesh, Vec<f64>) {
    let target_faces = target_faces.max(4);
    if mesh.faces.len() <= target_faces {
        return (mesh.clone(), Vec::new());
    }
    let mut s = Simplifier::new(mesh);
    s.run(target_faces);
    let costs = std::mem::take(&mut s.collapse_costs);
    (s.finish(), costs)
}
