use rand::Rng;

use crate::gaussian::Gaussian;

/// Multipliers applied to each attribute group before distances are taken.
/// Higher-order SH coefficients do not enter the distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttributeWeights {
    pub position: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub sh_dc: f64,
}

impl Default for AttributeWeights {
    fn default() -> Self {
        AttributeWeights { position: 1.0, rotation: 0.1, scale: 0.1, opacity: 0.05, sh_dc: 0.1 }
    }
}

pub const FEATURE_DIM: usize = 14;

pub type Feature = [f64; FEATURE_DIM];

/// Weighted attribute vector. The quaternion is flipped into the `w ≥ 0`
/// hemisphere so `q` and `−q` land on the same point.
pub fn feature(g: &Gaussian, w: &AttributeWeights) -> Feature {
    let mut q = g.rotation.map(f64::from);
    if q[0] < 0.0 || (q[0] == 0.0 && q.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)) {
        q = q.map(|c| -c);
    }
    let mut f = [0.0; FEATURE_DIM];
    for i in 0..3 {
        f[i] = g.position[i] as f64 * w.position;
        f[7 + i] = g.scale[i] as f64 * w.scale;
        f[11 + i] = g.sh[i] as f64 * w.sh_dc;
    }
    for i in 0..4 {
        f[3 + i] = q[i] * w.rotation;
    }
    f[10] = g.opacity as f64 * w.opacity;
    f
}

pub fn distance_sq(a: &Feature, b: &Feature) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// Cluster of each point; clusters are numbered densely from 0.
    pub assignment: Vec<usize>,
    pub cluster_count: usize,
    /// Inertia after every assignment step, first entry from the seeds.
    pub inertia: Vec<f64>,
}

fn nearest(p: &Feature, centers: &[Feature]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = distance_sq(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_seeds<R: Rng>(points: &[Feature], k: usize, rng: &mut R) -> Vec<Feature> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut chosen = vec![false; points.len()];
    let mut d2: Vec<f64> = points.iter().map(|p| distance_sq(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            pick
        } else {
            // All remaining points coincide with a center.
            match chosen.iter().position(|c| !c) {
                Some(i) => i,
                None => break,
            }
        };
        chosen[pick] = true;
        centers.push(points[pick]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(distance_sq(p, &points[pick]));
        }
    }
    centers
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters take the point
/// farthest from its center; clusters that stay empty are dropped.
pub fn kmeans<R: Rng>(points: &[Feature], k: usize, max_iters: usize, rng: &mut R) -> Clustering {
    let n = points.len();
    if n == 0 || k == 0 {
        return Clustering { assignment: Vec::new(), cluster_count: 0, inertia: Vec::new() };
    }
    if k >= n {
        return Clustering { assignment: (0..n).collect(), cluster_count: n, inertia: vec![0.0] };
    }
    let mut centers = plus_plus_seeds(points, k, rng);
    let mut assignment = vec![usize::MAX; n];
    let mut inertia = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            changed |= assignment[i] != c;
            assignment[i] = c;
            dist[i] = d;
        }
        // Hand empty clusters the farthest points; each move can only lower
        // the inertia while centers are fixed.
        let mut counts = vec![0usize; centers.len()];
        for &a in &assignment {
            counts[a] += 1;
        }
        for c in 0..centers.len() {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far.filter(|&i| dist[i] > 0.0) {
                counts[assignment[i]] -= 1;
                counts[c] = 1;
                assignment[i] = c;
                centers[c] = points[i];
                dist[i] = 0.0;
                changed = true;
            }
        }
        inertia.push(dist.iter().sum());
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; FEATURE_DIM]; centers.len()];
        for (p, &a) in points.iter().zip(&assignment) {
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..centers.len() {
            if counts[c] > 0 {
                centers[c] = sums[c].map(|s| s / counts[c] as f64);
            }
        }
    }
    // Renumber non-empty clusters densely in order of first appearance.
    let mut remap = vec![usize::MAX; centers.len()];
    let mut next = 0;
    for a in assignment.iter_mut() {
        if remap[*a] == usize::MAX {
            remap[*a] = next;
            next += 1;
        }
        *a = remap[*a];
    }
    Clustering { assignment, cluster_count: next, inertia }
}

/// Clusters a page's Gaussians by their weighted attribute vectors.
pub fn cluster_page<R: Rng>(
    gaussians: &[Gaussian],
    k: usize,
    weights: &AttributeWeights,
    max_iters: usize,
    rng: &mut R,
) -> Clustering {
    let points: Vec<Feature> = gaussians.iter().map(|g| feature(g, weights)).collect();
    kmeans(&points, k, max_iters, rng)
}
