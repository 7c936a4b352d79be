use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::scene_io::MappedScene;
use crate::splat_render::{composite, compute_keys_by, radix_sort, Camera, DepthMetric, Image};
use crate::vm_runtime::{VirtualMemory, VmConfig, VmError};
use crate::Gaussian;

/// Feature switches for ablation runs; everything is on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ablation {
    pub links: bool,
    pub lod: bool,
    /// Off renders every level-0 Gaussian without a page table.
    pub vm: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation { links: true, lod: true, vm: true }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad ablation spec {0:?}; expected e.g. links=off,lod=off,vm=off")]
pub struct AblationParseError(pub String);

impl FromStr for Ablation {
    type Err = AblationParseError;

    /// Comma-separated `name=on|off` pairs.
    fn from_str(s: &str) -> Result<Ablation, AblationParseError> {
        let mut a = Ablation::default();
        for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let err = || AblationParseError(item.to_string());
            let (key, value) = item.split_once('=').ok_or_else(err)?;
            let on = match value.trim() {
                "on" => true,
                "off" => false,
                _ => return Err(err()),
            };
            match key.trim() {
                "links" => a.links = on,
                "lod" => a.lod = on,
                "vm" => a.vm = on,
                _ => return Err(err()),
            }
        }
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub vm: VmConfig,
    pub ablation: Ablation,
    pub width: u32,
    pub height: u32,
    pub depth: DepthMetric,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            vm: VmConfig::default(),
            ablation: Ablation::default(),
            width: 640,
            height: 480,
            depth: DepthMetric::ViewZ,
        }
    }
}

/// Wall time of each frame stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageDurations {
    pub visibility: Duration,
    pub reduce: Duration,
    pub update: Duration,
    pub copy: Duration,
    pub sort: Duration,
    pub render: Duration,
}

impl StageDurations {
    pub const NAMES: [&'static str; 6] = ["visibility", "reduce", "update", "copy", "sort", "render"];

    pub fn as_array(&self) -> [Duration; 6] {
        [self.visibility, self.reduce, self.update, self.copy, self.sort, self.render]
    }

    pub fn from_array(a: [Duration; 6]) -> StageDurations {
        StageDurations { visibility: a[0], reduce: a[1], update: a[2], copy: a[3], sort: a[4], render: a[5] }
    }

    pub fn total(&self) -> Duration {
        self.as_array().iter().sum()
    }
}

/// Everything recorded about one frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameStats {
    pub frame: usize,
    /// Resident pages per level.
    pub resident_per_level: Vec<usize>,
    pub required: usize,
    pub missing: usize,
    pub bytes_copied: usize,
    pub usage: f64,
    /// Gaussians handed to the renderer, padding included.
    pub splats: usize,
    pub thresholds: Vec<f64>,
    pub times: StageDurations,
}

impl FrameStats {
    pub fn resident(&self) -> usize {
        self.resident_per_level.iter().sum()
    }

    /// Resident pages weighted by their share of a level-0 page.
    pub fn resident_level0_equivalent(&self) -> f64 {
        self.resident_per_level.iter().enumerate().map(|(k, &n)| n as f64 / (1u64 << k) as f64).sum()
    }
}

fn render_timed(gaussians: &[Gaussian], cam: &Camera, depth: DepthMetric, times: &mut StageDurations) -> Image {
    let t = Instant::now();
    let sorted = radix_sort(compute_keys_by(gaussians, cam, depth));
    times.sort = t.elapsed();
    let t = Instant::now();
    let (img, _) = composite(gaussians, &sorted, cam);
    times.render = t.elapsed();
    img
}

/// Replays `cameras` over a mapped scene, calling `on_frame` with every
/// rendered image. Frames run strictly in sequence.
pub fn run_benchmark(
    scene: MappedScene,
    cameras: &[Camera],
    cfg: &BenchConfig,
    mut on_frame: impl FnMut(usize, &Image),
) -> Result<Vec<FrameStats>, VmError> {
    let mut stats = Vec::with_capacity(cameras.len());
    if !cfg.ablation.vm {
        let pages = scene.page_count() as usize;
        let all = scene.level_gaussians(0);
        for (i, cam) in cameras.iter().enumerate() {
            let cam = cam.with_resolution(cfg.width, cfg.height);
            cam.validate()?;
            let mut times = StageDurations::default();
            let img = render_timed(&all, &cam, cfg.depth, &mut times);
            on_frame(i, &img);
            let mut per_level = vec![0; scene.layout.lod_levels as usize];
            per_level[0] = pages;
            stats.push(FrameStats {
                frame: i,
                resident_per_level: per_level,
                required: pages,
                missing: 0,
                bytes_copied: 0,
                usage: 1.0,
                splats: all.len(),
                thresholds: Vec::new(),
                times,
            });
        }
        return Ok(stats);
    }

    let mut vm_cfg = cfg.vm.clone();
    vm_cfg.links = cfg.ablation.links;
    vm_cfg.lod = cfg.ablation.lod;
    let mut vm = VirtualMemory::new(scene, vm_cfg)?;
    for (i, cam) in cameras.iter().enumerate() {
        let cam = cam.with_resolution(cfg.width, cfg.height);
        let report = vm.frame(&cam, i as u64)?;
        if let Err(msg) = vm.table.check_invariants() {
            return Err(VmError::Invariant(msg));
        }
        let list = vm.render_list();
        let mut times = StageDurations {
            visibility: report.times.visibility,
            reduce: report.times.reduce,
            update: report.times.update,
            copy: report.times.copy,
            ..StageDurations::default()
        };
        let img = render_timed(&list, &cam, cfg.depth, &mut times);
        on_frame(i, &img);
        stats.push(FrameStats {
            frame: i,
            resident_per_level: report.resident_per_level,
            required: report.required,
            missing: report.missing,
            bytes_copied: report.bytes_copied,
            usage: report.usage,
            splats: list.len(),
            thresholds: report.thresholds,
            times,
        });
    }
    Ok(stats)
}
