//! Evaluation plumbing: camera paths, synthetic scenes, the preprocessing
//! pipeline, benchmark replay, image metrics and report files.

mod bench;
mod image_io;
mod metrics;
mod path;
mod pipeline;
mod report;
pub mod synth;

pub use bench::{run_benchmark, Ablation, AblationParseError, BenchConfig, FrameStats, StageDurations};
pub use image_io::{decode_png, encode_png, read_png, write_png, ImageError};
pub use metrics::{psnr, ssim};
pub use path::{CameraPath, Checkpoint, PathError};
pub use pipeline::{preprocess, PreprocessConfig, PreprocessTimings, Preprocessed};
pub use report::{
    emit_reports, median, summarize, timer_resolution, write_stats_csv, write_timings_csv, FrameSummary,
    SelectedFrames, StageMs, Summary, SUMMARY_SCHEMA,
};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SPLATVM_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set to a
/// positive integer. Has no effect once the pool exists.
pub fn init_threads_from_env() -> Result<Option<usize>, String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}
