use glam::DVec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splatvm::gaussian::RECORD_BYTES;
use splatvm::proxy_mesh::ProxyMesh;
use splatvm::scene_io::{write_scene, Bounds, MappedScene, SceneFile};
use splatvm::splat_render::Camera;
use splatvm::vm_runtime::*;
use splatvm::Gaussian;

fn front_camera(w: u32, h: u32) -> Camera {
    Camera::look_at(DVec3::new(0.0, 0.0, -5.0), DVec3::ZERO, DVec3::new(0.0, -1.0, 0.0), 1.0, w, h)
}

fn buffer(width: u32, height: u32, page: Vec<u32>, depth: Vec<f32>) -> VisibilityBuffer {
    VisibilityBuffer { width, height, page, depth }
}

#[test]
fn empty_mesh_gives_blank_visibility() {
    let vis = render_visibility(&ProxyMesh::default(), &front_camera(16, 12));
    assert_eq!(vis.page.len(), 16 * 12);
    assert!(vis.page.iter().all(|&p| p == 0));
}

#[test]
fn full_screen_triangle_covers_every_pixel() {
    let mut mesh = ProxyMesh::new(
        vec![[-100.0, -100.0, 0.0], [100.0, -100.0, 0.0], [0.0, 100.0, 0.0]],
        vec![[0, 1, 2]],
    );
    mesh.face_page = vec![7];
    let vis = render_visibility(&mesh, &front_camera(32, 24));
    assert!(vis.page.iter().all(|&p| p == 7));
    assert!(vis.depth.iter().all(|&d| (d - 5.0).abs() < 1e-4));
}

/// Ray–triangle intersection returning (t, smallest barycentric).
fn ray_triangle(o: DVec3, d: DVec3, tri: [DVec3; 3]) -> Option<(f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-15 {
        return None;
    }
    let s = o - tri[0];
    let u = s.dot(p) / det;
    let q = s.cross(e1);
    let v = d.dot(q) / det;
    let t = e2.dot(q) / det;
    let w = 1.0 - u - v;
    let margin = u.min(v).min(w);
    (margin >= -1e-9 && t > 0.0).then_some((t, margin))
}

#[test]
fn visibility_matches_ray_cast() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cam = Camera::look_at(DVec3::new(0.3, -0.2, -6.0), DVec3::ZERO, DVec3::new(0.0, -1.0, 0.0), 0.9, 64, 64);
    for _ in 0..10 {
        let mut verts = Vec::new();
        for z in [-0.5f32, 0.5] {
            for _ in 0..3 {
                verts.push([rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), z + rng.random_range(-0.3..0.3)]);
            }
        }
        let mut mesh = ProxyMesh::new(verts, vec![[0, 1, 2], [3, 4, 5]]);
        mesh.face_page = vec![1, 2];
        let vis = render_visibility(&mesh, &cam);
        let mut checked = 0;
        for y in 0..64 {
            for x in 0..64 {
                let d = cam.ray_direction([x as f64 + 0.5, y as f64 + 0.5]);
                let mut best: Option<(f64, u32)> = None;
                let mut ambiguous = false;
                for f in 0..2 {
                    if let Some((t, margin)) = ray_triangle(cam.position, d, mesh.triangle(f)) {
                        ambiguous |= margin < 1e-7;
                        if best.is_none_or(|(bt, _)| t < bt) {
                            best = Some((t, mesh.face_page[f]));
                        }
                    }
                }
                if ambiguous {
                    continue;
                }
                checked += 1;
                let want = best.map_or(0, |b| b.1);
                assert_eq!(vis.page_at(x, y), want, "pixel ({x},{y})");
                if let Some((t, _)) = best {
                    // The view direction has unit z, so the ray parameter is view depth.
                    let i = (y * 64 + x) as usize;
                    assert!((vis.depth[i] as f64 - t).abs() < 1e-4 * t);
                }
            }
        }
        assert!(checked > 4000);
    }
}

#[test]
fn reduction_of_small_image() {
    let vis = buffer(2, 2, vec![1, 0, 1, 2], vec![3.0; 4]);
    let r = reduce_visibility(&vis, 2, None).unwrap();
    assert_eq!(r.pages().collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(r.depth[1], encode_depth(3.0));
}

#[test]
fn linked_pages_inherit_nearest_depth() {
    let vis = buffer(3, 1, vec![1, 1, 2], vec![4.0, 2.5, 1.0]);
    let links = vec![vec![3], vec![], vec![]];
    let r = reduce_visibility(&vis, 3, Some(&links)).unwrap();
    assert_eq!(r.pages().collect::<Vec<_>>(), vec![1, 2, 3]);
    assert_eq!(r.depth[3], encode_depth(2.5));
    assert!(r.direct[1] && r.direct[2] && !r.direct[3]);
    let plain = reduce_visibility(&vis, 3, None).unwrap();
    assert!(!plain.is_required(3));
}

#[test]
fn parallel_reduction_equals_sequential() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for size in [32u32, 200] {
        let n = (size * size) as usize;
        let page: Vec<u32> = (0..n).map(|_| rng.random_range(0..=20)).collect();
        let depth: Vec<f32> = (0..n).map(|_| rng.random_range(0.01..100.0)).collect();
        let links: Vec<Vec<u32>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(1..=20)).collect()).collect();
        let vis = buffer(size, size, page, depth);
        for l in [None, Some(links.as_slice())] {
            assert_eq!(reduce_visibility(&vis, 20, l).unwrap(), reduce_visibility_sequential(&vis, 20, l).unwrap());
        }
    }
}

#[test]
fn out_of_range_page_faults() {
    let vis = buffer(2, 1, vec![1, 9], vec![1.0, 1.0]);
    match reduce_visibility(&vis, 4, None) {
        Err(VmError::PageOutOfRange { page: 9, page_count: 4 }) => {}
        other => panic!("unexpected {other:?}"),
    }
    let vis = buffer(1, 1, vec![1], vec![1.0]);
    let links = vec![vec![5]];
    assert!(matches!(reduce_visibility(&vis, 1, Some(&links)), Err(VmError::PageOutOfRange { page: 5, .. })));
}

proptest! {
    #[test]
    fn depth_encoding_inverts_order(a in 0.0f32..1e30, b in 0.0f32..1e30) {
        let (ea, eb) = (encode_depth(a), encode_depth(b));
        prop_assert!(ea > 0 && eb > 0);
        prop_assert_eq!(a.partial_cmp(&b).map(|o| o.reverse()), ea.partial_cmp(&eb));
        prop_assert_eq!(decode_depth(ea), a);
    }
}

#[test]
fn lod_selection_uses_strict_comparison() {
    let c = LodController::new(vec![10.0, 20.0, 40.0], ControllerConfig::default());
    assert_eq!(c.select_lod(encode_depth(5.0)), 0);
    assert_eq!(c.select_lod(encode_depth(10.0)), 0);
    assert_eq!(c.select_lod(encode_depth(10.5)), 1);
    assert_eq!(c.select_lod(encode_depth(40.0)), 2);
    assert_eq!(c.select_lod(encode_depth(1e6)), 3);
    assert_eq!(LodController::disabled().select_lod(encode_depth(1e6)), 0);
}

#[test]
fn geometric_thresholds_end_at_radius() {
    let c = LodController::geometric(4, 8.0, ControllerConfig::default());
    assert_eq!(c.thresholds, vec![2.0, 4.0, 8.0]);
}

#[test]
fn controller_holds_inside_band() {
    let mut c = LodController::new(vec![10.0, 20.0, 40.0], ControllerConfig::default());
    c.adapt(0.65, 1);
    assert_eq!(c.thresholds, vec![10.0, 20.0, 40.0]);
    assert_eq!(c.step, 0.05);
}

#[test]
fn controller_shrinks_over_band() {
    let mut c = LodController::new(vec![10.0, 20.0, 40.0], ControllerConfig::default());
    c.adapt(0.9, 1);
    for (t, want) in c.thresholds.iter().zip([9.5, 19.0, 38.0]) {
        assert!((t - want).abs() < 1e-12);
    }
    assert_eq!(c.step, 0.05);
    c.adapt(0.9, 2);
    assert!((c.step - 0.0505).abs() < 1e-12);
}

#[test]
fn controller_step_shrinks_on_quick_flip_and_holds_after_pause() {
    let mut c = LodController::new(vec![10.0], ControllerConfig::default());
    c.adapt(0.9, 1);
    c.adapt(0.1, 5);
    assert!((c.thresholds[0] - 10.0 * 0.95 * 1.05).abs() < 1e-12);
    assert!((c.step - 0.0495).abs() < 1e-12);
    c.adapt(0.1, 100);
    assert!((c.step - 0.0495).abs() < 1e-12);
}

#[test]
fn controller_step_stays_clamped() {
    let cfg = ControllerConfig::default();
    let mut c = LodController::new(vec![1.0, 2.0], cfg.clone());
    for f in 0..2000 {
        c.adapt(0.1, f);
        assert!(c.step <= cfg.step_max && c.step >= cfg.step_min);
        assert!(c.thresholds[0] < c.thresholds[1]);
    }
    assert_eq!(c.step, cfg.step_max);
}

fn required(page_count: u32, pages: &[(u32, f32, bool)]) -> RequiredList {
    let mut r = RequiredList::new(page_count);
    for &(p, d, direct) in pages {
        r.depth[p as usize] = encode_depth(d);
        r.direct[p as usize] = direct;
    }
    r
}

fn apply(table: &mut PageTable, plan: &UpdatePlan) {
    for op in &plan.ops {
        table.commit(op);
    }
    table.check_invariants().unwrap();
}

#[test]
fn least_recently_used_entry_is_evicted() {
    let ctl = LodController::disabled();
    let mut t = PageTable::new(3, 4, 4, 1);
    for (frame, page) in [(1, 1), (2, 2), (3, 3)] {
        let plan = t.update(&required(4, &[(page, 1.0, true)]), &ctl, frame, 100).unwrap();
        apply(&mut t, &plan);
    }
    let plan = t.update(&required(4, &[(4, 1.0, true)]), &ctl, 4, 100).unwrap();
    assert_eq!(plan.ops.len(), 1);
    assert_eq!(plan.ops[0].to.entry, 0);
    apply(&mut t, &plan);
    assert!(!t.is_resident(1));
    assert!(t.is_resident(2) && t.is_resident(3) && t.is_resident(4));
}

#[test]
fn level_transitions_come_last() {
    let ctl = LodController::new(vec![10.0], ControllerConfig::default());
    let mut t = PageTable::new(4, 3, 4, 2);
    let plan = t.update(&required(3, &[(1, 20.0, true)]), &ctl, 1, 100).unwrap();
    assert_eq!(plan.ops[0].to.level, 1);
    apply(&mut t, &plan);

    let req = required(3, &[(1, 5.0, true), (2, 30.0, false), (3, 6.0, true)]);
    let plan = t.update(&req, &ctl, 2, 100).unwrap();
    let order: Vec<_> = plan.ops.iter().map(|o| (o.page, o.class, o.to.level)).collect();
    assert_eq!(
        order,
        vec![(3, CopyClass::Visible, 0), (2, CopyClass::LinkOnly, 1), (1, CopyClass::Transition, 0)]
    );
    apply(&mut t, &plan);
    assert_eq!(t.location(1).unwrap().level, 0);

    // A budget covering only the new pages leaves the transition for later
    // while the coarse copy stays resident.
    let mut t = PageTable::new(4, 3, 4, 2);
    let plan = t.update(&required(3, &[(1, 20.0, true)]), &ctl, 1, 100).unwrap();
    apply(&mut t, &plan);
    let req = required(3, &[(1, 5.0, true), (3, 6.0, true)]);
    let plan = t.update(&req, &ctl, 2, 4).unwrap();
    assert_eq!(plan.ops.len(), 1);
    assert_eq!(plan.over_budget, 1);
    assert_eq!(plan.missing, 0);
    apply(&mut t, &plan);
    assert_eq!(t.location(1).unwrap().level, 1);
}

#[test]
fn coarse_pages_share_entries() {
    let ctl = LodController::new(vec![1.0, 2.0], ControllerConfig::default());
    let mut t = PageTable::new(2, 6, 8, 3);
    let req = required(6, &[(1, 5.0, true), (2, 5.0, true), (3, 5.0, true), (4, 5.0, true), (5, 1.5, true)]);
    let plan = t.update(&req, &ctl, 1, 1000).unwrap();
    apply(&mut t, &plan);
    assert_eq!(t.occupied_entries(), 2);
    assert_eq!(t.resident_per_level(), vec![0, 1, 4]);
    let ranges: Vec<_> = (1..=4).map(|p| t.record_range(t.location(p).unwrap())).collect();
    assert_eq!(ranges.iter().map(|r| r.len()).sum::<usize>(), 8);
}

#[test]
fn update_rejects_mismatched_required_list() {
    let mut t = PageTable::new(2, 3, 4, 1);
    let r = RequiredList::new(5);
    assert!(matches!(t.update(&r, &LodController::disabled(), 0, 10), Err(VmError::PageOutOfRange { .. })));
}

#[test]
fn random_trace_keeps_table_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pages = 60u32;
    let page_size = 16u32;
    let capacity = 12;
    let ctl = LodController::new(vec![2.0, 4.0, 8.0], ControllerConfig::default());
    let mut t = PageTable::new(capacity, pages, page_size, 4);
    for frame in 0..200u64 {
        let n = rng.random_range(0..25);
        let mut req = RequiredList::new(pages);
        for _ in 0..n {
            let p = rng.random_range(1..=pages) as usize;
            req.depth[p] = req.depth[p].max(encode_depth(rng.random_range(0.5..12.0)));
            req.direct[p] |= rng.random_bool(0.7);
        }
        let protected: Vec<u32> = req.pages().filter(|&p| t.is_resident(p)).collect();
        let budget = rng.random_range(0..6) as usize * page_size as usize;
        let plan = t.update(&req, &ctl, frame, budget).unwrap();
        let cost: usize = plan.ops.iter().map(|o| t.page_records(o.to.level)).sum();
        assert!(cost <= budget);
        // Copy part of the plan and drop the rest, as a short staging buffer would.
        let keep = rng.random_range(0..=plan.ops.len());
        for op in &plan.ops[..keep] {
            t.commit(op);
        }
        for op in plan.ops[keep..].iter().rev() {
            t.revert(op);
        }
        t.check_invariants().unwrap();
        assert!(t.occupied_entries() <= capacity);
        for p in protected {
            assert!(t.is_resident(p), "frame {frame}: page {p} evicted while required");
        }
        let missing = req.pages().filter(|&p| !t.is_resident(p)).count();
        assert!(missing >= plan.missing);
    }
}

fn paged_scene(page_size: u32, pages: u32, dir: &tempfile::TempDir) -> (SceneFile, MappedScene) {
    let gaussians: Vec<Gaussian> = (0..page_size * pages)
        .map(|i| Gaussian::new([i as f32, 0.0, 0.0], [0.1; 3], 0.5, [0.1, 0.2, 0.3]))
        .collect();
    let scene = SceneFile {
        page_size,
        lod_levels: 1,
        page_counts: vec![pages],
        bounds: Bounds::of_gaussians(&gaussians),
        mesh: ProxyMesh::default(),
        links: vec![Vec::new(); pages as usize],
        gaussians,
    };
    let path = dir.path().join("scene.gsvm");
    write_scene(&scene, &path).unwrap();
    let mapped = MappedScene::open(&path).unwrap();
    (scene, mapped)
}

#[test]
fn empty_plan_copies_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mapped) = paged_scene(8, 2, &dir);
    let mut t = PageTable::new(2, 2, 8, 1);
    let mut buf = vec![Gaussian::PADDING; 16];
    let r = execute_copies(&mut t, &[], &mapped, &mut buf, 100);
    assert_eq!((r.copied, r.bytes, r.deferred.len()), (0, 0, 0));
}

#[test]
fn one_page_copies_its_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, mapped) = paged_scene(2048, 2, &dir);
    let mut t = PageTable::new(1, 2, 2048, 1);
    let plan = t.update(&required(2, &[(2, 1.0, true)]), &LodController::disabled(), 0, 2048).unwrap();
    let mut buf = vec![Gaussian::PADDING; 2048];
    let r = execute_copies(&mut t, &plan.ops, &mapped, &mut buf, 40 * 2048);
    assert_eq!(r.bytes, 2048 * 59 * 4);
    assert_eq!(r.bytes, 2048 * RECORD_BYTES);
    assert_eq!(buf.as_slice(), scene.page(0, 2));
    t.check_invariants().unwrap();
}

#[test]
fn copies_beyond_budget_are_deferred() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, mapped) = paged_scene(2048, 45, &dir);
    let mut t = PageTable::new(50, 45, 2048, 1);
    let all: Vec<_> = (1..=45).map(|p| (p, 1.0, true)).collect();
    let plan = t.update(&required(45, &all), &LodController::disabled(), 0, 45 * 2048).unwrap();
    assert_eq!(plan.ops.len(), 45);
    let mut buf = vec![Gaussian::PADDING; 50 * 2048];
    let r = execute_copies(&mut t, &plan.ops, &mapped, &mut buf, 40 * 2048);
    assert_eq!((r.copied, r.deferred.len()), (40, 5));
    t.check_invariants().unwrap();
    assert_eq!(t.resident_pages().count(), 40);
    for op in &r.deferred {
        assert!(!t.is_resident(op.page));
    }
    for (p, loc) in t.resident_pages() {
        assert_eq!(&buf[t.record_range(loc)], scene.page(0, p));
    }
}

fn quad_scene(dir: &tempfile::TempDir) -> MappedScene {
    let gaussians: Vec<Gaussian> =
        (0..8).map(|i| Gaussian::new([i as f32 * 0.1 - 0.4, 0.0, 0.0], [0.05; 3], 0.8, [0.5; 3])).collect();
    let mut mesh = ProxyMesh::new(
        vec![[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]],
        vec![[0, 1, 2], [0, 2, 3]],
    );
    mesh.face_page = vec![1, 2];
    let scene = SceneFile {
        page_size: 4,
        lod_levels: 1,
        page_counts: vec![3],
        bounds: Bounds::of_gaussians(&gaussians),
        mesh,
        links: vec![vec![3], vec![], vec![]],
        gaussians: [gaussians.clone(), gaussians[..4].to_vec()].concat(),
    };
    let path = dir.path().join("quad.gsvm");
    write_scene(&scene, &path).unwrap();
    MappedScene::open(&path).unwrap()
}

#[test]
fn frame_driver_streams_visible_and_linked_pages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = VmConfig { buffer_pages: 4, staging_pages: 2, vis_scale: 0.5, ..VmConfig::default() };
    let mut vm = VirtualMemory::new(quad_scene(&dir), cfg).unwrap();
    let cam = front_camera(64, 64);

    let first = vm.frame(&cam, 0).unwrap();
    assert_eq!((first.required, first.direct), (3, 2));
    assert_eq!((first.copied, first.deferred, first.missing), (2, 0, 1));
    assert_eq!(first.bytes_copied, 2 * 4 * RECORD_BYTES);

    let second = vm.frame(&cam, 1).unwrap();
    assert_eq!((second.copied, second.missing), (1, 0));
    assert_eq!(vm.render_list().len(), 12);

    let third = vm.frame(&cam, 2).unwrap();
    assert_eq!(third.copied, 0);
    vm.table.check_invariants().unwrap();

    let mut off = vm.config.clone();
    off.links = false;
    let mut vm = VirtualMemory::new(quad_scene(&dir), off).unwrap();
    assert_eq!(vm.frame(&cam, 0).unwrap().required, 2);
}

#[test]
fn frame_driver_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let mut vm = VirtualMemory::new(quad_scene(&dir), VmConfig { buffer_pages: 2, staging_pages: 1, ..VmConfig::default() }).unwrap();
        (0..5)
            .map(|f| {
                let cam = Camera::look_at(
                    DVec3::new(f as f64 * 0.3, 0.0, -4.0),
                    DVec3::ZERO,
                    DVec3::new(0.0, -1.0, 0.0),
                    1.0,
                    64,
                    48,
                );
                let mut r = vm.frame(&cam, f).unwrap();
                r.times = StageTimes::default();
                (r, vm.render_list())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn full_buffer_coarsens_in_place() {
    let ctl = LodController::new(vec![10.0], ControllerConfig::default());
    let mut t = PageTable::new(1, 2, 4, 2);
    let plan = t.update(&required(2, &[(1, 5.0, true)]), &ctl, 1, 100).unwrap();
    apply(&mut t, &plan);
    assert_eq!(t.location(1).unwrap().level, 0);

    let req = required(2, &[(1, 20.0, true)]);
    let mut reverted = t.clone();
    let plan = reverted.update(&req, &ctl, 2, 100).unwrap();
    assert_eq!(plan.ops.len(), 1);
    reverted.revert(&plan.ops[0]);
    reverted.check_invariants().unwrap();
    assert_eq!(reverted.location(1).unwrap().level, 0);

    let plan = t.update(&req, &ctl, 2, 100).unwrap();
    assert_eq!(plan.ops[0].to, Location { entry: 0, slot: 0, level: 1 });
    apply(&mut t, &plan);
    assert_eq!(t.location(1).unwrap().level, 1);

    // The freed half of the entry now takes the second page.
    let plan = t.update(&required(2, &[(1, 20.0, true), (2, 30.0, true)]), &ctl, 3, 100).unwrap();
    assert_eq!(plan.ops[0].to, Location { entry: 0, slot: 1, level: 1 });
    apply(&mut t, &plan);
}
