//! Text file formats.
//!
//! All files are comma separated, one record per line. Blank lines and lines
//! starting with `#` are ignored.
//!
//! * Detections: `frame,id,x,y,w,h,conf,class,vis,_` with `id = -1`, `(x, y)`
//!   the top-left corner and at least the first seven fields present.
//! * Embeddings: `frame,det_index,v1,...,vD` where `det_index` is the 0-based
//!   position of the detection among the lines of its frame in the
//!   detection file.
//! * Ground truth: `frame,id,x,y,w,h,flag,...`; rows with `flag = 0` are
//!   ignored.
//! * Results: `frame,id,x,y,w,h,conf,-1,-1,-1`, sorted by frame then id,
//!   numbers with two decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::appearance::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::{FrameLabels, LabeledBox, MetricsReport};
use crate::postprocess::Trajectory;
use crate::tracker::Detection;

/// Detections grouped by frame, in file order within a frame.
pub type DetectionFrames = BTreeMap<u32, Vec<Detection>>;

/// Embeddings keyed by `(frame, detection index within frame)`.
pub type EmbeddingTable = BTreeMap<(u32, usize), Embedding>;

/// Everything known about one input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBundle {
    pub name: String,
    pub frame_rate: Option<f64>,
    pub detections: DetectionFrames,
    pub ground_truth: Option<FrameLabels>,
}

impl SequenceBundle {
    /// Reads detections, then optional embeddings and ground truth. The
    /// sequence is named after the detection file stem.
    pub fn load(
        dets: &Path,
        embeddings: Option<(&Path, Option<usize>)>,
        ground_truth: Option<&Path>,
    ) -> Result<Self> {
        let mut detections = parse_detections(dets)?;
        if let Some((path, dim)) = embeddings {
            let table = parse_embeddings(path, dim)?;
            attach_embeddings(&mut detections, table, path)?;
        }
        let ground_truth = ground_truth.map(parse_ground_truth).transpose()?;
        Ok(SequenceBundle {
            name: dets
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            frame_rate: None,
            detections,
            ground_truth,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Iterates `(line_number, fields)` over meaningful lines.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split(',').map(str::trim).collect()))
        }
    })
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: PathBuf::from(self.path),
            line: self.line,
            message: message.into(),
        }
    }

    fn num(&self, fields: &[&str], idx: usize, name: &str) -> Result<f64> {
        let raw = fields[idx];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(format!(
                "field {} ({name}) is not a number: {raw:?}",
                idx + 1
            ))),
        }
    }

    fn frame(&self, fields: &[&str]) -> Result<u32> {
        let raw = fields[0];
        match raw.parse::<u32>() {
            Ok(f) if f >= 1 => Ok(f),
            _ => Err(self.err(format!("frame must be a positive integer, got {raw:?}"))),
        }
    }

    fn need(&self, fields: &[&str], n: usize) -> Result<()> {
        if fields.len() < n {
            return Err(self.err(format!(
                "expected at least {n} fields, found {}",
                fields.len()
            )));
        }
        Ok(())
    }

    fn tlwh(&self, fields: &[&str], confidence: f64) -> Result<BBox> {
        let x = self.num(fields, 2, "x")?;
        let y = self.num(fields, 3, "y")?;
        let w = self.num(fields, 4, "w")?;
        let h = self.num(fields, 5, "h")?;
        if w < 0.0 || h < 0.0 {
            return Err(self.err(format!("negative box size {w}x{h}")));
        }
        BBox::from_tlwh(x, y, w, h, confidence).map_err(|e| self.err(e.to_string()))
    }
}

/// Reads a detection file into per-frame detection lists.
pub fn parse_detections(path: &Path) -> Result<DetectionFrames> {
    parse_detections_str(&read(path)?, path)
}

/// [`parse_detections`] on in-memory text; `path` is only used in errors.
pub fn parse_detections_str(text: &str, path: &Path) -> Result<DetectionFrames> {
    let mut frames = DetectionFrames::new();
    for (line, fields) in records(text) {
        let ctx = LineCtx { path, line };
        ctx.need(&fields, 7)?;
        let frame = ctx.frame(&fields)?;
        let conf = ctx.num(&fields, 6, "conf")?;
        if !(0.0..=1.0).contains(&conf) {
            return Err(ctx.err(format!("confidence {conf} outside [0, 1]")));
        }
        let bbox = ctx.tlwh(&fields, conf)?;
        let class = if fields.len() > 7 {
            ctx.num(&fields, 7, "class")? as i32
        } else {
            -1
        };
        frames.entry(frame).or_default().push(Detection {
            frame,
            bbox,
            embedding: None,
            class,
        });
    }
    Ok(frames)
}

/// Reads an embedding file. With `expected_dim` unset, the first record fixes
/// the dimension.
pub fn parse_embeddings(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    parse_embeddings_str(&read(path)?, path, expected_dim)
}

pub fn parse_embeddings_str(
    text: &str,
    path: &Path,
    expected_dim: Option<usize>,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new();
    let mut dim = expected_dim;
    for (line, fields) in records(text) {
        let ctx = LineCtx { path, line };
        ctx.need(&fields, 3)?;
        let frame = ctx.frame(&fields)?;
        let index: usize = fields[1].parse().map_err(|_| {
            ctx.err(format!(
                "detection index is not an integer: {:?}",
                fields[1]
            ))
        })?;
        let values = (2..fields.len())
            .map(|i| ctx.num(&fields, i, "component"))
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            Some(d) if d != values.len() => {
                return Err(ctx.err(format!(
                    "embedding has {} components, expected {d}",
                    values.len()
                )))
            }
            _ => dim = Some(values.len()),
        }
        let emb = Embedding::new(values).map_err(|e| ctx.err(e.to_string()))?;
        if table.insert((frame, index), emb).is_some() {
            return Err(ctx.err(format!(
                "duplicate embedding for frame {frame} detection {index}"
            )));
        }
    }
    Ok(table)
}

/// Attaches embeddings to their detections. Fails if a record points at a
/// detection that does not exist. Detections without a record keep no
/// embedding.
pub fn attach_embeddings(
    frames: &mut DetectionFrames,
    table: EmbeddingTable,
    source: &Path,
) -> Result<()> {
    for ((frame, index), emb) in table {
        let slot = frames
            .get_mut(&frame)
            .and_then(|dets| dets.get_mut(index))
            .ok_or_else(|| {
                Error::Domain(format!(
                    "{}: embedding for frame {frame} detection {index} has no matching detection",
                    source.display()
                ))
            })?;
        slot.embedding = Some(emb);
    }
    Ok(())
}

/// Reads a tracker results file into identity-labeled boxes. The seventh
/// field is the confidence; every row is kept.
pub fn parse_labels(path: &Path) -> Result<FrameLabels> {
    parse_labels_str(&read(path)?, path)
}

pub fn parse_labels_str(text: &str, path: &Path) -> Result<FrameLabels> {
    labels_from_str(text, path, false)
}

/// Reads a ground-truth file. Rows whose seventh field is `0` mark ignore
/// regions and are skipped.
pub fn parse_ground_truth(path: &Path) -> Result<FrameLabels> {
    parse_ground_truth_str(&read(path)?, path)
}

pub fn parse_ground_truth_str(text: &str, path: &Path) -> Result<FrameLabels> {
    labels_from_str(text, path, true)
}

fn labels_from_str(text: &str, path: &Path, skip_ignored: bool) -> Result<FrameLabels> {
    let mut labels = FrameLabels::new();
    for (line, fields) in records(text) {
        let ctx = LineCtx { path, line };
        ctx.need(&fields, 6)?;
        let frame = ctx.frame(&fields)?;
        let id = ctx.num(&fields, 1, "id")?;
        if id < 0.0 || id.fract() != 0.0 {
            return Err(ctx.err(format!("identity must be a non-negative integer, got {id}")));
        }
        let flag = if fields.len() > 6 {
            ctx.num(&fields, 6, "conf")?
        } else {
            1.0
        };
        if skip_ignored && flag == 0.0 {
            continue;
        }
        let bbox = ctx.tlwh(&fields, flag.clamp(0.0, 1.0))?;
        let boxes = labels.entry(frame).or_default();
        if boxes.iter().any(|b: &LabeledBox| b.id == id as u64) {
            return Err(ctx.err(format!("identity {id} repeated in frame {frame}")));
        }
        boxes.push(LabeledBox {
            id: id as u64,
            bbox,
        });
    }
    Ok(labels)
}

fn round2(v: f64) -> f64 {
    // adding 0.0 turns -0.0 into 0.0
    (v * 100.0).round() / 100.0 + 0.0
}

/// `x,y,w,h` with corners rounded first, so that `x + w` reproduces the
/// rounded right edge.
fn tlwh2(b: &BBox) -> String {
    let (x1, y1, x2, y2) = (round2(b.x1), round2(b.y1), round2(b.x2), round2(b.y2));
    format!(
        "{:.2},{:.2},{:.2},{:.2}",
        x1,
        y1,
        round2(x2 - x1),
        round2(y2 - y1)
    )
}

/// Renders finished trajectories in the results format.
pub fn format_results(trajectories: &[Trajectory]) -> String {
    let mut rows: Vec<(u32, u64, &BBox)> = trajectories
        .iter()
        .flat_map(|t| t.entries.iter().map(move |(f, b)| (*f, t.id.0, b)))
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    for (frame, id, b) in rows {
        let _ = writeln!(
            out,
            "{frame},{id},{},{:.2},-1,-1,-1",
            tlwh2(b),
            round2(b.confidence)
        );
    }
    out
}

pub fn write_results(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    write(path, &format_results(trajectories))
}

/// Renders detections in the detection format. Confidences keep four
/// decimals.
pub fn format_detections(frames: &DetectionFrames) -> String {
    let mut out = String::new();
    for (frame, dets) in frames {
        for d in dets {
            let _ = writeln!(
                out,
                "{frame},-1,{},{:.4},{},-1,-1",
                tlwh2(&d.bbox),
                d.bbox.confidence,
                d.class
            );
        }
    }
    out
}

pub fn write_detections(frames: &DetectionFrames, path: &Path) -> Result<()> {
    write(path, &format_detections(frames))
}

/// Renders the embeddings carried by `frames`, indexed by position in frame.
pub fn format_embeddings(frames: &DetectionFrames) -> String {
    let mut out = String::new();
    for (frame, dets) in frames {
        for (i, d) in dets.iter().enumerate() {
            if let Some(e) = &d.embedding {
                let _ = write!(out, "{frame},{i}");
                for v in e.as_slice() {
                    let _ = write!(out, ",{v:.6}");
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_embeddings(frames: &DetectionFrames, path: &Path) -> Result<()> {
    write(path, &format_embeddings(frames))
}

/// Renders labels as MOT ground truth: `frame,id,x,y,w,h,1,1,1`.
pub fn format_ground_truth(labels: &FrameLabels) -> String {
    let mut out = String::new();
    for (frame, boxes) in labels {
        let mut sorted: Vec<&LabeledBox> = boxes.iter().collect();
        sorted.sort_by_key(|b| b.id);
        for b in sorted {
            let _ = writeln!(out, "{frame},{},{},1,1,1", b.id, tlwh2(&b.bbox));
        }
    }
    out
}

pub fn write_ground_truth(labels: &FrameLabels, path: &Path) -> Result<()> {
    write(path, &format_ground_truth(labels))
}

/// Writes the report as a JSON object with the keys of
/// [`MetricsReport::to_text`].
pub fn write_report_json(report: &MetricsReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Domain(format!("cannot serialize report: {e}")))?;
    write(path, &(text + "\n"))
}
