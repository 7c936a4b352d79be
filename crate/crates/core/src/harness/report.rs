use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::bench::{FrameStats, StageDurations};

/// Median of a sample; the mean of the two middle values for even sizes.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Stats columns that do not depend on wall time. Byte-identical across
/// replays of the same configuration.
pub fn write_stats_csv<W: Write>(out: W, stats: &[FrameStats]) -> csv::Result<()> {
    let levels = stats.iter().map(|s| s.resident_per_level.len()).max().unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["frame".into(), "resident".into()];
    header.extend((0..levels).map(|k| format!("resident_l{k}")));
    header.extend(["required", "missing", "bytes_copied", "usage", "splats", "thresholds"].map(String::from));
    w.write_record(&header)?;
    for s in stats {
        let mut row = vec![s.frame.to_string(), s.resident().to_string()];
        row.extend((0..levels).map(|k| s.resident_per_level.get(k).copied().unwrap_or(0).to_string()));
        row.push(s.required.to_string());
        row.push(s.missing.to_string());
        row.push(s.bytes_copied.to_string());
        row.push(format!("{:.6}", s.usage));
        row.push(s.splats.to_string());
        row.push(s.thresholds.iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>().join(";"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-stage wall times in milliseconds.
pub fn write_timings_csv<W: Write>(out: W, stats: &[FrameStats]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["frame".to_string()];
    header.extend(StageDurations::NAMES.iter().map(|n| format!("{n}_ms")));
    header.push("total_ms".into());
    w.write_record(&header)?;
    for s in stats {
        let mut row = vec![s.frame.to_string()];
        row.extend(s.times.as_array().iter().map(|&d| format!("{:.6}", ms(d))));
        row.push(format!("{:.6}", ms(s.times.total())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageMs {
    pub visibility: f64,
    pub reduce: f64,
    pub update: f64,
    pub copy: f64,
    pub sort: f64,
    pub render: f64,
    pub total: f64,
}

impl StageMs {
    fn of(t: &StageDurations) -> StageMs {
        let a = t.as_array().map(ms);
        StageMs { visibility: a[0], reduce: a[1], update: a[2], copy: a[3], sort: a[4], render: a[5], total: ms(t.total()) }
    }
}

/// One row of the frame breakdown. `frame` is absent for the median row,
/// which is assembled from per-column medians.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameSummary {
    pub frame: Option<usize>,
    pub resident: f64,
    pub required: f64,
    pub missing: f64,
    pub bytes_copied: f64,
    pub ms: StageMs,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectedFrames {
    pub most_pages: FrameSummary,
    pub median: FrameSummary,
    pub shortest: FrameSummary,
    pub largest_transfer: FrameSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub frames: usize,
    pub timer: String,
    pub timer_resolution_ns: u64,
    pub max_missing: usize,
    pub total_bytes_copied: u64,
    pub median_usage: f64,
    pub median_ms: StageMs,
    pub selected: Option<SelectedFrames>,
}

/// JSON Schema of `summary.json`.
pub const SUMMARY_SCHEMA: &str = r##"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "type": "object",
  "required": ["frames", "timer", "timer_resolution_ns", "max_missing", "total_bytes_copied",
               "median_usage", "median_ms", "selected"],
  "additionalProperties": false,
  "properties": {
    "frames": {"type": "integer", "minimum": 0},
    "timer": {"type": "string"},
    "timer_resolution_ns": {"type": "integer", "minimum": 0},
    "max_missing": {"type": "integer", "minimum": 0},
    "total_bytes_copied": {"type": "integer", "minimum": 0},
    "median_usage": {"type": ["number", "null"]},
    "median_ms": {"$ref": "#/$defs/stages"},
    "selected": {
      "oneOf": [
        {"type": "null"},
        {
          "type": "object",
          "required": ["most_pages", "median", "shortest", "largest_transfer"],
          "additionalProperties": false,
          "properties": {
            "most_pages": {"$ref": "#/$defs/frame"},
            "median": {"$ref": "#/$defs/frame"},
            "shortest": {"$ref": "#/$defs/frame"},
            "largest_transfer": {"$ref": "#/$defs/frame"}
          }
        }
      ]
    }
  },
  "$defs": {
    "stages": {
      "type": "object",
      "required": ["visibility", "reduce", "update", "copy", "sort", "render", "total"],
      "additionalProperties": false,
      "properties": {
        "visibility": {"type": "number", "minimum": 0},
        "reduce": {"type": "number", "minimum": 0},
        "update": {"type": "number", "minimum": 0},
        "copy": {"type": "number", "minimum": 0},
        "sort": {"type": "number", "minimum": 0},
        "render": {"type": "number", "minimum": 0},
        "total": {"type": "number", "minimum": 0}
      }
    },
    "frame": {
      "type": "object",
      "required": ["frame", "resident", "required", "missing", "bytes_copied", "ms"],
      "additionalProperties": false,
      "properties": {
        "frame": {"type": ["integer", "null"], "minimum": 0},
        "resident": {"type": "number", "minimum": 0},
        "required": {"type": "number", "minimum": 0},
        "missing": {"type": "number", "minimum": 0},
        "bytes_copied": {"type": "number", "minimum": 0},
        "ms": {"$ref": "#/$defs/stages"}
      }
    }
  }
}"##;

/// Smallest observable step of the monotonic clock, sampled briefly.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..64 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

fn frame_summary(s: &FrameStats) -> FrameSummary {
    FrameSummary {
        frame: Some(s.frame),
        resident: s.resident() as f64,
        required: s.required as f64,
        missing: s.missing as f64,
        bytes_copied: s.bytes_copied as f64,
        ms: StageMs::of(&s.times),
    }
}

/// First frame maximizing `key`.
fn pick<K: PartialOrd>(stats: &[FrameStats], key: impl Fn(&FrameStats) -> K) -> &FrameStats {
    let mut best = &stats[0];
    for s in &stats[1..] {
        if key(s) > key(best) {
            best = s;
        }
    }
    best
}

/// Column medians; stage times and the total are medianed independently.
fn median_frame(stats: &[FrameStats]) -> FrameSummary {
    let col = |f: &dyn Fn(&FrameStats) -> f64| median(&stats.iter().map(f).collect::<Vec<_>>());
    let stage = |i: usize| col(&|s| ms(s.times.as_array()[i]));
    FrameSummary {
        frame: None,
        resident: col(&|s| s.resident() as f64),
        required: col(&|s| s.required as f64),
        missing: col(&|s| s.missing as f64),
        bytes_copied: col(&|s| s.bytes_copied as f64),
        ms: StageMs {
            visibility: stage(0),
            reduce: stage(1),
            update: stage(2),
            copy: stage(3),
            sort: stage(4),
            render: stage(5),
            total: col(&|s| ms(s.times.total())),
        },
    }
}

pub fn summarize(stats: &[FrameStats], timer_resolution: Duration) -> Summary {
    let selected = (!stats.is_empty()).then(|| SelectedFrames {
        most_pages: frame_summary(pick(stats, |s| s.resident())),
        median: median_frame(stats),
        shortest: frame_summary(pick(stats, |s| std::cmp::Reverse(s.times.total()))),
        largest_transfer: frame_summary(pick(stats, |s| s.bytes_copied)),
    });
    let median_ms = selected.as_ref().map(|s| s.median.ms.clone()).unwrap_or(StageMs {
        visibility: 0.0,
        reduce: 0.0,
        update: 0.0,
        copy: 0.0,
        sort: 0.0,
        render: 0.0,
        total: 0.0,
    });
    Summary {
        frames: stats.len(),
        timer: "monotonic wall clock".into(),
        timer_resolution_ns: timer_resolution.as_nanos() as u64,
        max_missing: stats.iter().map(|s| s.missing).max().unwrap_or(0),
        total_bytes_copied: stats.iter().map(|s| s.bytes_copied as u64).sum(),
        median_usage: median(&stats.iter().map(|s| s.usage).collect::<Vec<_>>()),
        median_ms,
        selected,
    }
}

/// Writes `stats.csv`, `timings.csv` and `summary.json` into `dir`.
pub fn emit_reports(stats: &[FrameStats], dir: &Path) -> io::Result<Summary> {
    fs::create_dir_all(dir)?;
    write_stats_csv(fs::File::create(dir.join("stats.csv"))?, stats).map_err(io::Error::other)?;
    write_timings_csv(fs::File::create(dir.join("timings.csv"))?, stats).map_err(io::Error::other)?;
    let summary = summarize(stats, timer_resolution());
    let json = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}
