use std::collections::BTreeSet;

use glam::{DQuat, DVec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatvm::paging::*;
use splatvm::proxy_mesh::{marching_cubes, point_triangle_distance_sq, OccupancyGrid, ProxyMesh};
use splatvm::Gaussian;

fn g(p: [f32; 3]) -> Gaussian {
    Gaussian::new(p, [0.01; 3], 0.9, [0.5; 3])
}

/// Three faces in a row; the first and last only share a vertex.
fn strip() -> ProxyMesh {
    ProxyMesh::new(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [2.0, 0.0, 0.0]],
        vec![[0, 1, 2], [1, 3, 2], [1, 4, 3]],
    )
}

fn two_far_faces() -> ProxyMesh {
    ProxyMesh::new(
        vec![
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [10.0, 0.0, 0.0],
            [12.0, 0.0, 0.0],
            [10.0, 2.0, 0.0],
        ],
        vec![[0, 1, 2], [3, 4, 5]],
    )
}

fn sphere_mesh() -> ProxyMesh {
    let mut grid = OccupancyGrid::cube(12, DVec3::ZERO, 1.5);
    for z in 0..12 {
        for y in 0..12 {
            for x in 0..12 {
                let inside = grid.cell_center(x, y, z).length() < 1.0;
                grid.set(x, y, z, inside);
            }
        }
    }
    marching_cubes(&grid)
}

#[test]
fn gaussians_go_to_nearest_face_without_splitting() {
    let gs = vec![g([0.3, 0.3, 0.1]), g([0.5, 0.2, -0.1]), g([0.1, 0.9, 0.0])];
    let a = assign_pages(&gs, &two_far_faces(), 4);
    assert_eq!(a.splits, 0);
    assert_eq!(a.pages[0].gaussians, vec![0, 1, 2]);
    assert!(a.pages[1].gaussians.is_empty());
}

#[test]
fn overfull_face_is_split_once_at_edge_midpoint() {
    let gs = vec![g([0.2, 0.5, 0.1]), g([0.3, 1.0, 0.1]), g([1.5, 0.2, 0.1])];
    let a = assign_pages(&gs, &two_far_faces(), 2);
    assert_eq!(a.splits, 1);
    assert_eq!(a.mesh.faces.len(), 3);
    let mut sizes: Vec<usize> = a.pages.iter().map(|p| p.gaussians.len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![0, 1, 2]);
    // Children of the split face are faces 0 and 2; each Gaussian must sit
    // on whichever child is closer.
    let children = [0usize, 2];
    for (i, gauss) in gs.iter().enumerate() {
        let d: Vec<f64> = children
            .iter()
            .map(|&f| point_triangle_distance_sq(gauss.position(), &a.mesh.triangle(f)))
            .collect();
        let expect = if d[0] <= d[1] { children[0] } else { children[1] };
        assert!(a.pages[expect].gaussians.contains(&(i as u32)), "Gaussian {i}");
    }
    let parent = 2.0;
    assert!((a.mesh.face_area(0) + a.mesh.face_area(2) - parent).abs() < 1e-9);
}

#[test]
fn bvh_matches_brute_force() {
    let mesh = sphere_mesh();
    let bvh = FaceBvh::new(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let p = DVec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        assert_eq!(bvh.nearest(p), nearest_face_brute(&mesh, p), "point {p}");
    }
    // Vertex positions are equidistant to several faces; ties must agree too.
    for v in 0..mesh.vertices.len().min(50) {
        let p = mesh.vertex(v as u32);
        assert_eq!(bvh.nearest(p), nearest_face_brute(&mesh, p));
    }
}

#[test]
fn subdivision_preserves_area_and_terminates_on_colocated_points() {
    let mesh = ProxyMesh::new(vec![[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0, 4.0, 0.0]], vec![[0, 1, 2]]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut gs: Vec<Gaussian> = (0..200)
        .map(|_| g([rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), 0.0]))
        .collect();
    gs.extend((0..10).map(|_| g([1.0, 1.0, 0.5])));
    let a = assign_pages(&gs, &mesh, 8);
    assert!((a.mesh.surface_area() - 8.0).abs() < 1e-9);
    let total: usize = a.pages.iter().map(|p| p.gaussians.len()).sum();
    assert_eq!(total, gs.len());
    assert!(a.pages.iter().all(|p| p.gaussians.len() <= 8));
    // The ten co-located Gaussians cannot be separated; two of them spill.
    let spill = a.pages.len() - a.mesh.faces.len();
    assert_eq!(spill, 1);
    let spill_id = a.pages.len() as u32;
    assert!(a.pages.iter().any(|p| p.links.contains(&spill_id)));
}

#[test]
fn adjacent_pages_merge_within_capacity() {
    let mut gs = Vec::new();
    for i in 0..10 {
        gs.push(g([0.2 + 0.01 * i as f32, 0.2, 0.0]));
    }
    for i in 0..10 {
        gs.push(g([0.8, 0.8 - 0.01 * i as f32, 0.0]));
    }
    let mesh = ProxyMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]], vec![[0, 1, 2], [1, 3, 2]]);
    let a = assign_pages(&gs, &mesh, 32);
    assert_eq!(a.pages[0].gaussians.len(), 10);
    let m = merge_pages(&a, 32);
    assert_eq!(m.pages.len(), 1);
    assert_eq!(m.pages[0].gaussians.len(), 20);
    assert_eq!(m.mesh.face_page, vec![1, 1]);
}

#[test]
fn strip_merge_follows_greedy_order() {
    let centers = [[0.3f32, 0.3, 0.0], [0.7, 0.7, 0.0], [1.7, 0.2, 0.0]];
    let mut gs = Vec::new();
    for c in centers {
        for i in 0..10 {
            gs.push(g([c[0] + 0.005 * i as f32, c[1], 0.0]));
        }
    }
    let a = assign_pages(&gs, &strip(), 25);
    let sizes: Vec<usize> = a.pages.iter().map(|p| p.gaussians.len()).collect();
    assert_eq!(sizes, vec![10, 10, 10]);
    let m = merge_pages(&a, 25);
    let sizes: Vec<usize> = m.pages.iter().map(|p| p.gaussians.len()).collect();
    assert_eq!(sizes, vec![20, 10]);
    assert_eq!(m.mesh.face_page, vec![1, 1, 2]);
}

#[test]
fn merge_conserves_gaussians_on_random_scene() {
    let mesh = sphere_mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gs: Vec<Gaussian> = (0..3000)
        .map(|_| {
            let d = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize_or(DVec3::X);
            let p = d * rng.random_range(0.9..1.1);
            g([p.x as f32, p.y as f32, p.z as f32])
        })
        .collect();
    for page_size in [16, 64, 256] {
        let a = assign_pages(&gs, &mesh, page_size);
        let m = merge_pages(&a, page_size);
        let mut all: Vec<u32> = m.pages.iter().flat_map(|p| p.gaussians.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..gs.len() as u32).collect::<Vec<_>>());
        for (i, p) in m.pages.iter().enumerate() {
            assert_eq!(p.id, i as u32 + 1);
            assert!(!p.gaussians.is_empty() && p.gaussians.len() <= page_size);
            assert!(!p.links.contains(&p.id));
        }
        assert!(m.mesh.face_page.iter().all(|&p| p as usize <= m.pages.len()));
        if page_size >= 64 {
            assert!(m.pages.len() < a.pages.len() / 2, "{} of {}", m.pages.len(), a.pages.len());
        }
    }
}

#[test]
fn padding_fills_pages_with_zero_records() {
    let gs = vec![g([0.0; 3]), g([1.0; 3]), g([2.0; 3])];
    let pages = vec![
        Page { id: 1, gaussians: vec![0, 1, 2], links: BTreeSet::new() },
        Page { id: 2, gaussians: vec![], links: BTreeSet::new() },
    ];
    let out = pad_pages(&gs, &pages, 4);
    assert_eq!(out.len(), 8);
    assert_eq!(&out[..3], &gs[..]);
    assert!(out[3].is_padding());
    assert!(out[4..].iter().all(|r| r.is_padding() && r.opacity == 0.0));
}

/// Two pages side by side: page 1 covers x < 0, page 2 covers x > 0.
fn split_plane() -> (ProxyMesh, Vec<Page>) {
    let mut mesh = ProxyMesh::new(
        vec![
            [-2.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [-2.0, 2.0, 0.0],
            [2.0, 0.0, 0.0],
            [2.0, 2.0, 0.0],
        ],
        vec![[0, 1, 2], [0, 2, 3], [1, 4, 5], [1, 5, 2]],
    );
    mesh.face_page = vec![1, 1, 2, 2];
    let pages = vec![
        Page { id: 1, gaussians: vec![0], links: BTreeSet::new() },
        Page { id: 2, gaussians: vec![], links: BTreeSet::new() },
    ];
    (mesh, pages)
}

#[test]
fn contained_gaussian_creates_no_links() {
    let (mut mesh, mut pages) = split_plane();
    let gs = vec![g([-1.0, 1.0, 0.05])];
    link_pages(&gs, &mut mesh, &mut pages, &LinkParams::default());
    assert!(pages.iter().all(|p| p.links.is_empty()));
}

#[test]
fn straddling_gaussian_links_neighbor_page() {
    let elongated = Gaussian::new([-0.3, 1.0, 0.05], [1.0, 0.1, 0.1], 0.9, [0.5; 3]);
    let mut hits = 0;
    for seed in 0..100 {
        let (mut mesh, mut pages) = split_plane();
        let params = LinkParams { samples_per_gaussian: 64, seed, ..LinkParams::default() };
        link_pages(&[elongated], &mut mesh, &mut pages, &params);
        assert!(pages[0].links.is_empty());
        if pages[1].links.contains(&1) {
            hits += 1;
        }
    }
    assert!(hits >= 99, "{hits} of 100");
}

#[test]
fn unassigned_faces_take_the_majority_page() {
    let (mut mesh, mut pages) = split_plane();
    mesh.face_page = vec![1, 1, 0, 0];
    let gs = vec![Gaussian::new([-0.3, 1.0, 0.05], [1.0, 0.5, 0.1], 0.9, [0.5; 3])];
    link_pages(&gs, &mut mesh, &mut pages, &LinkParams::default());
    // Face 2 lies beyond the Gaussian's reach and keeps no page.
    assert_eq!(mesh.face_page, vec![1, 1, 0, 1]);
    assert!(pages.iter().all(|p| p.links.is_empty()));
}

#[test]
fn link_threshold_drops_small_overlaps() {
    let grazing = Gaussian::new([-0.3, 1.0, 0.05], [0.6, 0.1, 0.1], 0.9, [0.5; 3]);
    let count_links = |threshold| {
        let (mut mesh, mut pages) = split_plane();
        let params = LinkParams { samples_per_gaussian: 64, threshold, ..LinkParams::default() };
        link_pages(&[grazing], &mut mesh, &mut pages, &params);
        pages[1].links.len()
    };
    assert_eq!(count_links(1), 1);
    assert_eq!(count_links(64), 0);
}

/// Kolmogorov distribution tail probability.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..100 {
        let k = k as f64;
        sum += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    sum.clamp(0.0, 1.0)
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sampler_radii_follow_spherical_coordinate_construction() {
    let mut rng = gaussian_rng(7, 0);
    let n = 100_000;
    let mut radii = Vec::with_capacity(n);
    let mut cos_theta = Vec::with_capacity(n);
    for _ in 0..n {
        let p = sample_unit_sphere(&mut rng);
        let r = p.length();
        radii.push(r);
        cos_theta.push(if r > 0.0 { p.z / r } else { 0.0 });
    }
    let d = ks_statistic(radii.clone(), |r| r);
    assert!(ks_p_value(d, n) > 0.01, "D = {d}");
    // A uniform-in-ball sampler would have CDF r³; this one must not.
    let d_ball = ks_statistic(radii, |r| r * r * r);
    assert!(ks_p_value(d_ball, n) < 1e-6);
    // Uniform polar angle: cos θ has CDF (1 − acos(x)/π) reversed.
    let d_theta = ks_statistic(cos_theta, |c| 1.0 - c.clamp(-1.0, 1.0).acos() / std::f64::consts::PI);
    assert!(ks_p_value(d_theta, n) > 0.01, "D = {d_theta}");
}

#[test]
fn paging_is_deterministic() {
    let mesh = sphere_mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gs: Vec<Gaussian> = (0..2000)
        .map(|_| {
            let d = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize_or(DVec3::X);
            let q = DQuat::from_rotation_z(rng.random_range(0.0..3.0));
            Gaussian::new([d.x as f32, d.y as f32, d.z as f32], [0.1, 0.03, 0.03], 0.7, [0.5; 3]).with_rotation(q)
        })
        .collect();
    let params = PagingParams { page_size: 64, ..PagingParams::default() };
    let a = page_scene(&gs, &mesh, &params);
    let b = page_scene(&gs, &mesh, &params);
    assert_eq!(a, b);
    assert!(a.pages.iter().any(|p| !p.links.is_empty()));
    for p in &a.pages {
        for &l in &p.links {
            assert!(l >= 1 && l as usize <= a.pages.len() && l != p.id);
        }
    }
}
