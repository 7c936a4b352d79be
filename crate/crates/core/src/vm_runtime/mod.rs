//! Runtime page streaming: visibility buffer, required-page reduction, page
//! table with LRU replacement, budgeted copies and adaptive LOD thresholds.

mod controller;
mod page_table;
mod reduce;
mod visibility;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use controller::{ControllerConfig, LodController};
pub use page_table::{CopyClass, CopyOp, Location, PageTable, PageTableEntry, Slot, UpdatePlan};
pub use reduce::{decode_depth, encode_depth, reduce_visibility, reduce_visibility_sequential, RequiredList};
pub use visibility::{render_visibility, VisibilityBuffer};

use crate::gaussian::{Gaussian, RECORD_BYTES};
use crate::scene_io::{MappedScene, SceneFormatError};
use crate::splat_render::{Camera, CameraError};

#[derive(Debug, Error)]
pub enum VmError {
    #[error("page {page} out of range (scene has {page_count} pages)")]
    PageOutOfRange { page: u32, page_count: u32 },
    #[error("scene: {0}")]
    Scene(#[from] SceneFormatError),
    #[error("camera: {0}")]
    Camera(#[from] CameraError),
    #[error("page table invariant violated: {0}")]
    Invariant(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Outcome of [`execute_copies`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CopyReport {
    pub copied: usize,
    pub bytes: usize,
    /// Operations left over once the budget was spent.
    pub deferred: Vec<CopyOp>,
}

/// Copies planned pages from the mapped scene into the render buffer in plan
/// order until `budget_records` records are spent. Copied operations are
/// committed to the table; from the first one that does not fit, the rest
/// are reverted and returned as deferred.
pub fn execute_copies(
    table: &mut PageTable,
    plan: &[CopyOp],
    scene: &MappedScene,
    buffer: &mut [Gaussian],
    budget_records: usize,
) -> CopyReport {
    let mut report = CopyReport::default();
    let mut spent = 0;
    for (i, op) in plan.iter().enumerate() {
        let records = table.page_records(op.to.level);
        if spent + records > budget_records {
            for op in plan[i..].iter().rev() {
                table.revert(op);
            }
            report.deferred = plan[i..].to_vec();
            break;
        }
        let dst = &mut buffer[table.record_range(op.to)];
        let src = scene.page_bytes(op.to.level, op.page);
        bytemuck::cast_slice_mut::<Gaussian, u8>(dst).copy_from_slice(src);
        table.commit(op);
        spent += records;
        report.copied += 1;
        report.bytes += records * RECORD_BYTES;
    }
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct VmConfig {
    pub buffer_pages: usize,
    pub staging_pages: usize,
    /// Visibility buffer size relative to the output image, per axis.
    pub vis_scale: f64,
    pub links: bool,
    pub lod: bool,
    pub controller: ControllerConfig,
}

impl Default for VmConfig {
    fn default() -> Self {
        VmConfig {
            buffer_pages: 500,
            staging_pages: 40,
            vis_scale: 0.25,
            links: true,
            lod: true,
            controller: ControllerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub visibility: Duration,
    pub reduce: Duration,
    pub update: Duration,
    pub copy: Duration,
}

/// Per-frame counters of the streaming system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameReport {
    pub required: usize,
    pub direct: usize,
    pub missing: usize,
    pub planned: usize,
    pub copied: usize,
    pub deferred: usize,
    pub bytes_copied: usize,
    pub usage: f64,
    pub resident_per_level: Vec<usize>,
    /// Thresholds in effect for this frame's LOD selection.
    pub thresholds: Vec<f64>,
    pub times: StageTimes,
}

/// A scene streamed into a fixed-size render buffer.
pub struct VirtualMemory {
    scene: MappedScene,
    pub table: PageTable,
    buffer: Vec<Gaussian>,
    pub controller: LodController,
    pub config: VmConfig,
    last_required: RequiredList,
}

impl VirtualMemory {
    pub fn new(scene: MappedScene, config: VmConfig) -> Result<VirtualMemory, VmError> {
        let layout = scene.layout;
        if layout.page_size == 0 {
            return Err(VmError::Config("scene is not paged".into()));
        }
        if config.buffer_pages == 0 || config.staging_pages == 0 {
            return Err(VmError::Config("buffer and staging sizes must be positive".into()));
        }
        if !(config.vis_scale > 0.0) {
            return Err(VmError::Config("visibility scale must be positive".into()));
        }
        let levels = if config.lod { layout.lod_levels } else { 1 };
        let controller = if levels > 1 {
            LodController::geometric(levels, scene.bounds.half_extent.max(1e-3) as f64 * 3f64.sqrt(), config.controller.clone())
        } else {
            LodController::disabled()
        };
        let table = PageTable::new(config.buffer_pages, layout.page_count, layout.page_size, layout.lod_levels);
        let buffer = vec![Gaussian::PADDING; config.buffer_pages * layout.page_size as usize];
        Ok(VirtualMemory {
            last_required: RequiredList::new(layout.page_count),
            scene,
            table,
            buffer,
            controller,
            config,
        })
    }

    pub fn scene(&self) -> &MappedScene {
        &self.scene
    }

    pub fn staging_records(&self) -> usize {
        self.config.staging_pages * self.table.page_size() as usize
    }

    pub fn visibility_camera(&self, cam: &Camera) -> Camera {
        let w = ((cam.width as f64 * self.config.vis_scale).round() as u32).max(1);
        let h = ((cam.height as f64 * self.config.vis_scale).round() as u32).max(1);
        cam.with_resolution(w, h)
    }

    /// Required list of the most recent frame.
    pub fn required(&self) -> &RequiredList {
        &self.last_required
    }

    /// Visibility, reduction, table update, copies and threshold adaptation
    /// for one frame.
    pub fn frame(&mut self, cam: &Camera, frame: u64) -> Result<FrameReport, VmError> {
        cam.validate()?;
        let mut times = StageTimes::default();
        let t = Instant::now();
        let vis = render_visibility(&self.scene.mesh, &self.visibility_camera(cam));
        times.visibility = t.elapsed();

        let t = Instant::now();
        let links = self.config.links.then_some(self.scene.links.as_slice());
        let required = reduce_visibility(&vis, self.table.page_count(), links)?;
        times.reduce = t.elapsed();

        let t = Instant::now();
        let thresholds = self.controller.thresholds.clone();
        let budget = self.staging_records();
        let plan = self.table.update(&required, &self.controller, frame, budget)?;
        times.update = t.elapsed();

        let t = Instant::now();
        let copies = execute_copies(&mut self.table, &plan.ops, &self.scene, &mut self.buffer, budget);
        times.copy = t.elapsed();
        debug_assert!(self.table.check_invariants().is_ok());

        let usage = self.table.usage_ratio();
        self.controller.adapt(usage, frame);
        let missing = required.pages().filter(|&p| !self.table.is_resident(p)).count();
        let report = FrameReport {
            required: required.count(),
            direct: required.pages().filter(|&p| required.direct[p as usize]).count(),
            missing,
            planned: plan.ops.len(),
            copied: copies.copied,
            deferred: copies.deferred.len(),
            bytes_copied: copies.bytes,
            usage,
            resident_per_level: self.table.resident_per_level(),
            thresholds,
            times,
        };
        self.last_required = required;
        Ok(report)
    }

    /// Resident Gaussians of the required pages, gathered in ascending page
    /// order. Pages that are resident but not required this frame are left
    /// out.
    pub fn render_list(&self) -> Vec<Gaussian> {
        let mut out = Vec::new();
        for (page, loc) in self.table.resident_pages() {
            if self.last_required.is_required(page) {
                out.extend_from_slice(&self.buffer[self.table.record_range(loc)]);
            }
        }
        out
    }
}
