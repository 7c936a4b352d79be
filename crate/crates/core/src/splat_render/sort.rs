use rayon::prelude::*;

use super::camera::Camera;
use crate::gaussian::Gaussian;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SortEntry {
    pub key: u32,
    pub index: u32,
}

/// Order-preserving map from `f32` to `u32`.
pub fn depth_key(z: f32) -> u32 {
    let bits = z.to_bits();
    if bits & 0x8000_0000 != 0 {
        !bits
    } else {
        bits | 0x8000_0000
    }
}

/// Quantity the global sort orders Gaussians by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DepthMetric {
    /// View-space z.
    #[default]
    ViewZ,
    /// Euclidean distance from the camera center.
    Distance,
}

impl std::str::FromStr for DepthMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "z" => Ok(DepthMetric::ViewZ),
            "distance" => Ok(DepthMetric::Distance),
            _ => Err(format!("unknown depth metric {s:?} (expected z or distance)")),
        }
    }
}

/// One entry per visible Gaussian in front of the near plane, keyed by
/// view-space depth. Padding and zero-opacity records are skipped.
pub fn compute_keys(gaussians: &[Gaussian], cam: &Camera) -> Vec<SortEntry> {
    compute_keys_by(gaussians, cam, DepthMetric::ViewZ)
}

/// [`compute_keys`] with a choice of sort metric. Culling against the near
/// plane always uses view z.
pub fn compute_keys_by(gaussians: &[Gaussian], cam: &Camera, metric: DepthMetric) -> Vec<SortEntry> {
    let rot = cam.view_rotation();
    let axis = rot.row(2);
    gaussians
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| {
            if g.is_padding() || g.opacity <= 0.0 {
                return None;
            }
            let d = g.position() - cam.position;
            let z = axis.dot(d);
            let depth = match metric {
                DepthMetric::ViewZ => z,
                DepthMetric::Distance => d.length(),
            };
            (z > cam.near).then(|| SortEntry { key: depth_key(depth as f32), index: i as u32 })
        })
        .collect()
}

/// Stable least-significant-digit radix sort on `key`, 8 bits per pass.
pub fn radix_sort(mut entries: Vec<SortEntry>) -> Vec<SortEntry> {
    let mut scratch = vec![SortEntry { key: 0, index: 0 }; entries.len()];
    for shift in [0u32, 8, 16, 24] {
        let mut counts = [0usize; 256];
        for e in &entries {
            counts[(e.key >> shift) as usize & 0xFF] += 1;
        }
        if counts.iter().any(|&c| c == entries.len()) {
            continue;
        }
        let mut offsets = [0usize; 256];
        let mut sum = 0;
        for (o, c) in offsets.iter_mut().zip(counts) {
            *o = sum;
            sum += c;
        }
        for e in &entries {
            let d = (e.key >> shift) as usize & 0xFF;
            scratch[offsets[d]] = *e;
            offsets[d] += 1;
        }
        std::mem::swap(&mut entries, &mut scratch);
    }
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use glam::{DQuat, DVec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depth_key_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs: Vec<f32> = (0..2000).map(|_| rng.random_range(-1e6f32..1e6)).collect();
        xs.extend([0.0, -0.0, f32::MIN_POSITIVE, 1e-30, -1e-30]);
        xs.sort_by(f32::total_cmp);
        for w in xs.windows(2) {
            assert!(depth_key(w[0]) <= depth_key(w[1]), "{} {}", w[0], w[1]);
        }
    }

    #[test]
    fn sorted_and_reversed_inputs() {
        let sorted: Vec<SortEntry> = (0..1000).map(|i| SortEntry { key: i * 7, index: i }).collect();
        assert_eq!(radix_sort(sorted.clone()), sorted);
        let reversed: Vec<SortEntry> = sorted.iter().rev().copied().collect();
        assert_eq!(radix_sort(reversed), sorted);
    }

    #[test]
    fn keys_skip_padding_and_points_behind() {
        let cam = Camera::new(DVec3::ZERO, DQuat::IDENTITY, 1.0, 8, 8);
        let g = |z: f32| Gaussian::new([0.0, 0.0, z], [0.1; 3], 0.5, [0.0; 3]);
        let gs = vec![g(3.0), Gaussian::PADDING, g(-1.0), g(1.0), g(2.0)];
        let keys = compute_keys(&gs, &cam);
        assert_eq!(keys.iter().map(|e| e.index).collect::<Vec<_>>(), vec![0, 3, 4]);
        let sorted = radix_sort(keys);
        assert_eq!(sorted.iter().map(|e| e.index).collect::<Vec<_>>(), vec![3, 4, 0]);
        assert!(sorted.windows(2).all(|w| w[0].key < w[1].key));
    }
}
