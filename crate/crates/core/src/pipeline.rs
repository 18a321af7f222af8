//! End-to-end runs: track a sequence, interpolate, evaluate, and sweep a
//! parameter.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::config::{ClassMode, RunConfig};
use crate::error::{Error, Result};
use crate::io::DetectionFrames;
use crate::metrics::{evaluate, FrameLabels, LabeledBox, LabeledFrameSet, MetricsReport};
use crate::postprocess::{collect_trajectories, interpolate, Trajectory};
use crate::tracker::{Detection, TrackOutput, Tracker, TrackerConfig};

/// Frames from the first to the last detected frame, inclusive; frames with
/// no entry are fed as empty.
fn frame_span(frames: &DetectionFrames) -> impl Iterator<Item = u32> {
    let first = frames.keys().next().copied();
    let last = frames.keys().next_back().copied();
    first.zip(last).into_iter().flat_map(|(a, b)| a..=b)
}

/// Runs one tracker over the sequence and returns raw per-frame outputs.
pub fn run_tracker(
    frames: &DetectionFrames,
    cfg: &TrackerConfig,
) -> Result<Vec<(u32, Vec<TrackOutput>)>> {
    let mut tracker = Tracker::new(cfg.clone())?;
    let empty = Vec::new();
    frame_span(frames)
        .map(|f| Ok((f, tracker.step(f, frames.get(&f).unwrap_or(&empty))?)))
        .collect()
}

/// One tracker per class, all drawing ids from a shared counter. Classes
/// are stepped in ascending order within each frame.
fn run_per_class(
    frames: &DetectionFrames,
    cfg: &TrackerConfig,
) -> Result<Vec<(u32, Vec<TrackOutput>)>> {
    let mut trackers: BTreeMap<i32, Tracker> = BTreeMap::new();
    let mut next_id = crate::tracker::TrackId(1);
    let mut out = Vec::new();
    for frame in frame_span(frames) {
        let mut by_class: BTreeMap<i32, Vec<Detection>> = BTreeMap::new();
        for d in frames.get(&frame).into_iter().flatten() {
            by_class.entry(d.class).or_default().push(d.clone());
        }
        for class in by_class.keys() {
            if !trackers.contains_key(class) {
                trackers.insert(*class, Tracker::new(cfg.clone())?);
            }
        }
        let mut outputs = Vec::new();
        for (class, tracker) in trackers.iter_mut() {
            tracker.advance_ids_to(next_id);
            let dets = by_class.get(class).map_or(&[][..], Vec::as_slice);
            outputs.extend(tracker.step(frame, dets)?);
            next_id = tracker.next_id();
        }
        outputs.sort_by_key(|o| o.id);
        out.push((frame, outputs));
    }
    Ok(out)
}

/// Tracks a sequence according to `cfg`, including interpolation.
pub fn track_sequence(frames: &DetectionFrames, cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let raw = match cfg.class_mode {
        ClassMode::Single => run_tracker(frames, &cfg.tracker)?,
        ClassMode::PerClass => run_per_class(frames, &cfg.tracker)?,
    };
    let trajectories = collect_trajectories(raw.iter().map(|(f, o)| (*f, o.as_slice())));
    Ok(if cfg.max_gap > 0 {
        trajectories
            .iter()
            .map(|t| interpolate(t, cfg.max_gap))
            .collect()
    } else {
        trajectories
    })
}

/// Flattens trajectories into identity-labeled boxes per frame.
pub fn trajectories_to_labels(trajectories: &[Trajectory]) -> FrameLabels {
    let mut labels = FrameLabels::new();
    for t in trajectories {
        for (f, b) in &t.entries {
            labels.entry(*f).or_default().push(LabeledBox {
                id: t.id.0,
                bbox: *b,
            });
        }
    }
    labels
}

pub fn evaluate_trajectories(
    ground_truth: &FrameLabels,
    trajectories: &[Trajectory],
    cfg: &RunConfig,
) -> Result<MetricsReport> {
    let data = LabeledFrameSet::new(ground_truth, &trajectories_to_labels(trajectories))?;
    Ok(evaluate(&data, &cfg.eval))
}

/// Column names of the sweep table after the leading parameter column.
pub const SWEEP_COLUMNS: &[&str] = &[
    "hota",
    "deta",
    "assa",
    "mota",
    "idf1",
    "id_switches",
    "fragmentations",
    "fp",
    "fn",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub param: String,
    pub rows: Vec<(f64, MetricsReport)>,
}

impl SweepReport {
    /// Comma-separated table: a header `<param>,hota,...,fn` and one row per
    /// value. Ratios carry four decimals, counts are integers.
    pub fn to_table(&self) -> String {
        let mut out = format!("{},{}\n", self.param, SWEEP_COLUMNS.join(","));
        for (value, r) in &self.rows {
            let _ = writeln!(
                out,
                "{value},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{},{}",
                r.hota,
                r.deta,
                r.assa,
                r.mota,
                r.idf1,
                r.id_switches,
                r.fragmentations,
                r.fp,
                r.fn_
            );
        }
        out
    }

    pub fn best_idf1(&self) -> f64 {
        self.rows.iter().map(|(_, r)| r.idf1).fold(0.0, f64::max)
    }
}

/// Tracks and evaluates the sequence once per value of `param`.
pub fn sweep(
    frames: &DetectionFrames,
    ground_truth: &FrameLabels,
    base: &RunConfig,
    param: &str,
    values: &[f64],
) -> Result<SweepReport> {
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = base.clone();
        cfg.set(param, &value.to_string())
            .map_err(|e| Error::InvalidConfig(vec![e]))?;
        cfg.validate()?;
        let trajectories = track_sequence(frames, &cfg)?;
        rows.push((
            value,
            evaluate_trajectories(ground_truth, &trajectories, &cfg)?,
        ));
    }
    Ok(SweepReport {
        param: param.to_string(),
        rows,
    })
}
