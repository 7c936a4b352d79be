//! Marching Cubes over a boolean occupancy grid.
//!
//! The 256-case triangle table is derived at first use from the cube's face
//! configurations instead of being transcribed: every face contributes the
//! segments separating its inside corners from its outside corners, with
//! diagonal (ambiguous) faces always separating the inside corners. Segments
//! chain into closed loops which are triangulated without diagonals lying on
//! a cube face. Because a face's segments depend only on its four corners,
//! neighboring cubes agree on every shared boundary segment and the output
//! is a closed, consistently oriented, edge-manifold surface.
//!
//! Corner `i` sits at offset `(i & 1 ^ (i >> 1) & 1, (i >> 1) & 1, i >> 2)`
//! in the usual Lorensen ordering; edge midpoints are used as vertices.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::mesh::ProxyMesh;
use super::slicing::OccupancyGrid;

pub const CORNERS: [[u8; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

pub const EDGES: [[u8; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Cube faces as cyclic corner lists with their outward normal.
const FACES: [([u8; 4], [i8; 3]); 6] = [
    ([0, 1, 2, 3], [0, 0, -1]),
    ([4, 5, 6, 7], [0, 0, 1]),
    ([0, 1, 5, 4], [0, -1, 0]),
    ([3, 2, 6, 7], [0, 1, 0]),
    ([0, 3, 7, 4], [-1, 0, 0]),
    ([1, 2, 6, 5], [1, 0, 0]),
];

/// Triangles (as cube edge indices) for each of the 256 corner configurations.
pub fn case_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|case| triangulate_case(case as u8)))
}

fn edge_between(a: u8, b: u8) -> u8 {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("adjacent corners") as u8
}

fn corner_pos(c: u8) -> [f64; 3] {
    CORNERS[c as usize].map(f64::from)
}

fn edge_mid(e: u8) -> [f64; 3] {
    let [a, b] = EDGES[e as usize];
    let (pa, pb) = (corner_pos(a), corner_pos(b));
    [0, 1, 2].map(|i| 0.5 * (pa[i] + pb[i]))
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn centroid(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    [0, 1, 2].map(|i| points.iter().map(|p| p[i]).sum::<f64>() / n)
}

/// Oriented boundary segments (edge → edge) for one cube configuration.
fn face_segments(case: u8) -> Vec<(u8, u8)> {
    let inside = |c: u8| case >> c & 1 == 1;
    let mut segments = Vec::new();
    for (corners, normal) in FACES {
        let normal = normal.map(f64::from);
        let flags = corners.map(inside);
        let cut: Vec<usize> = (0..4).filter(|&k| flags[k] != flags[(k + 1) % 4]).collect();
        let face_edge = |k: usize| edge_between(corners[k], corners[(k + 1) % 4]);
        // Each segment with the direction from its inside side to its outside side.
        let mut raw: Vec<(u8, u8, [f64; 3])> = Vec::new();
        match cut.len() {
            0 => {}
            2 => {
                let (ea, eb) = (face_edge(cut[0]), face_edge(cut[1]));
                let ins: Vec<[f64; 3]> = (0..4).filter(|&k| flags[k]).map(|k| corner_pos(corners[k])).collect();
                let outs: Vec<[f64; 3]> = (0..4).filter(|&k| !flags[k]).map(|k| corner_pos(corners[k])).collect();
                raw.push((ea, eb, sub(centroid(&outs), centroid(&ins))));
            }
            4 => {
                for k in 0..4 {
                    if flags[k] {
                        let ea = face_edge((k + 3) % 4);
                        let eb = face_edge(k);
                        let mid = centroid(&[edge_mid(ea), edge_mid(eb)]);
                        raw.push((ea, eb, sub(mid, corner_pos(corners[k]))));
                    }
                }
            }
            _ => unreachable!("a square has an even number of sign changes"),
        }
        for (ea, eb, away) in raw {
            let t = sub(edge_mid(eb), edge_mid(ea));
            if dot(cross(away, t), normal) < 0.0 {
                segments.push((ea, eb));
            } else {
                segments.push((eb, ea));
            }
        }
    }
    segments
}

fn edge_faces(e: u8) -> [usize; 2] {
    let [a, b] = EDGES[e as usize];
    let mut found = FACES
        .iter()
        .enumerate()
        .filter(|(_, (corners, _))| corners.contains(&a) && corners.contains(&b))
        .map(|(i, _)| i);
    [found.next().expect("two faces"), found.next().expect("two faces")]
}

/// A diagonal may not lie on a cube face, or the neighboring cube could
/// produce the same edge.
fn diagonal_allowed(a: u8, b: u8) -> bool {
    let (fa, fb) = (edge_faces(a), edge_faces(b));
    !fa.iter().any(|f| fb.contains(f))
}

fn triangulate_loop(poly: &[u8], out: &mut Vec<[u8; 3]>) -> bool {
    if poly.len() == 3 {
        out.push([poly[0], poly[1], poly[2]]);
        return true;
    }
    let n = poly.len();
    for i in 0..n {
        let (prev, cur, next) = (poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]);
        if !diagonal_allowed(prev, next) {
            continue;
        }
        let mark = out.len();
        out.push([prev, cur, next]);
        let rest: Vec<u8> = poly.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
        if triangulate_loop(&rest, out) {
            return true;
        }
        out.truncate(mark);
    }
    false
}

fn triangulate_case(case: u8) -> Vec<[u8; 3]> {
    let segments = face_segments(case);
    let mut next: HashMap<u8, u8> = HashMap::new();
    for &(a, b) in &segments {
        let previous = next.insert(a, b);
        assert!(previous.is_none(), "case {case}: edge {a} starts two segments");
    }
    let mut starts: Vec<u8> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut seen = [false; 12];
    let mut triangles = Vec::new();
    for s in starts {
        if seen[s as usize] {
            continue;
        }
        let mut poly = Vec::new();
        let mut e = s;
        loop {
            seen[e as usize] = true;
            poly.push(e);
            e = next[&e];
            if e == s {
                break;
            }
        }
        let mark = triangles.len();
        if !triangulate_loop(&poly, &mut triangles) {
            triangles.truncate(mark);
            for k in 1..poly.len() - 1 {
                triangles.push([poly[0], poly[k], poly[k + 1]]);
            }
        }
    }
    triangles
}

/// Extracts the boundary surface of the occupied cells. Cells outside the
/// grid count as empty, so any occupancy yields a closed surface.
pub fn marching_cubes(grid: &OccupancyGrid) -> ProxyMesh {
    let table = case_table();
    let [nx, ny, nz] = grid.resolution.map(|r| r as isize);
    type EdgeKey = (i32, i32, i32, u8);
    // Triangles of each z-layer of cubes, as global edge keys.
    let layers: Vec<Vec<[EdgeKey; 3]>> = (-1..nz)
        .into_par_iter()
        .map(|z| {
            let mut tris = Vec::new();
            for y in -1..ny {
                for x in -1..nx {
                    let mut case = 0u8;
                    for (i, c) in CORNERS.iter().enumerate() {
                        if grid.get_signed(x + c[0] as isize, y + c[1] as isize, z + c[2] as isize) {
                            case |= 1 << i;
                        }
                    }
                    if case == 0 || case == 255 {
                        continue;
                    }
                    let key = |e: u8| -> EdgeKey {
                        let [a, b] = EDGES[e as usize];
                        let (ca, cb) = (CORNERS[a as usize], CORNERS[b as usize]);
                        let lo = [0, 1, 2].map(|i| ca[i].min(cb[i]));
                        let axis = (0..3).find(|&i| ca[i] != cb[i]).expect("edge spans one axis") as u8;
                        (
                            (x + lo[0] as isize) as i32,
                            (y + lo[1] as isize) as i32,
                            (z + lo[2] as isize) as i32,
                            axis,
                        )
                    };
                    for t in &table[case as usize] {
                        tris.push([key(t[0]), key(t[1]), key(t[2])]);
                    }
                }
            }
            tris
        })
        .collect();

    let mut index: HashMap<EdgeKey, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for tri in layers.iter().flatten() {
        let mut f = [0u32; 3];
        for (slot, &k) in f.iter_mut().zip(tri) {
            *slot = *index.entry(k).or_insert_with(|| {
                let (x, y, z, axis) = k;
                let mut p = grid.cell_center(0, 0, 0);
                p.x += x as f64 * grid.voxel_size;
                p.y += y as f64 * grid.voxel_size;
                p.z += z as f64 * grid.voxel_size;
                p[axis as usize] += 0.5 * grid.voxel_size;
                vertices.push([p.x as f32, p.y as f32, p.z as f32]);
                vertices.len() as u32 - 1
            });
        }
        faces.push(f);
    }
    ProxyMesh::new(vertices, faces)
}
