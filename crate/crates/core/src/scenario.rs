//! Seeded synthetic sequences with sports-like motion, detector noise and
//! identity embeddings.
//!
//! Targets live in a rectangular arena and bounce off its walls. Three motion
//! models are available: constant velocity, zigzag (the lateral velocity
//! component flips every `period` frames) and burst (an independent random
//! displacement of up to `d_max` pixels every frame). Detections are the
//! ground-truth boxes with Gaussian corner jitter, random misses and sampled
//! confidences. Every identity owns a random unit vector; per-frame
//! embeddings are that vector plus isotropic noise.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::appearance::Embedding;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::metrics::{FrameLabels, LabeledBox};
use crate::tracker::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionModel {
    Linear { speed: f64 },
    Zigzag { speed: f64, period: u32 },
    Burst { d_max: f64 },
}

/// Where targets start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Uniform random positions.
    #[default]
    Random,
    /// Targets in pairs sharing a horizontal lane, starting at opposite ends
    /// and heading toward each other. Lanes are spread evenly over the arena
    /// height. Motion is forced horizontal.
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorNoise {
    pub miss_prob: f64,
    pub conf_min: f64,
    pub conf_max: f64,
    /// Standard deviation of the per-corner jitter, in pixels.
    pub jitter_sigma: f64,
    /// Emit low-confidence detections for targets hidden behind another one.
    pub occlusion: bool,
    /// IoU with a nearer target above which a target counts as occluded.
    pub occlusion_iou: f64,
}

impl Default for DetectorNoise {
    fn default() -> Self {
        DetectorNoise {
            miss_prob: 0.0,
            conf_min: 0.6,
            conf_max: 1.0,
            jitter_sigma: 0.0,
            occlusion: false,
            occlusion_iou: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub dim: usize,
    /// Per-component noise standard deviation.
    pub noise_sigma: f64,
    /// Make identities `2k` and `2k + 1` near-parallel.
    pub confusable_pairs: bool,
    /// Size of the perturbation separating a confusable pair.
    pub confusion_spread: f64,
}

impl Default for EmbeddingModel {
    fn default() -> Self {
        EmbeddingModel {
            dim: 64,
            noise_sigma: 0.05,
            confusable_pairs: false,
            confusion_spread: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub n_frames: u32,
    pub arena_width: f64,
    pub arena_height: f64,
    pub box_width: f64,
    pub box_height: f64,
    pub motion: MotionModel,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default)]
    pub detector: DetectorNoise,
    /// `None` produces detections without embeddings.
    #[serde(default)]
    pub embedding: Option<EmbeddingModel>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    /// Ten targets for 300 frames with per-frame displacements of up to 1.5
    /// box widths, the regime where plain IoU loses overlap between frames.
    pub fn burst_suite(seed: u64) -> Self {
        ScenarioConfig {
            n_targets: 10,
            n_frames: 300,
            arena_width: 1920.0,
            arena_height: 1080.0,
            box_width: 40.0,
            box_height: 80.0,
            motion: MotionModel::Burst { d_max: 60.0 },
            layout: Layout::Random,
            detector: DetectorNoise {
                jitter_sigma: 1.0,
                ..DetectorNoise::default()
            },
            embedding: Some(EmbeddingModel::default()),
            seed,
        }
    }

    /// Pairs of targets running at each other along shared lanes.
    pub fn crossing_suite(seed: u64) -> Self {
        ScenarioConfig {
            n_targets: 6,
            n_frames: 300,
            arena_width: 1000.0,
            arena_height: 600.0,
            box_width: 40.0,
            box_height: 80.0,
            motion: MotionModel::Linear { speed: 24.0 },
            layout: Layout::Crossing,
            detector: DetectorNoise {
                jitter_sigma: 1.0,
                ..DetectorNoise::default()
            },
            embedding: Some(EmbeddingModel::default()),
            seed,
        }
    }

    /// Typical sports footage: zigzag runs at 0.4 box widths per frame with
    /// direction changes every 10 frames, misses, occlusion-driven
    /// low-confidence detections and pairs of similar-looking identities.
    pub fn standard_suite(seed: u64) -> Self {
        ScenarioConfig {
            n_targets: 12,
            n_frames: 300,
            arena_width: 1280.0,
            arena_height: 720.0,
            box_width: 40.0,
            box_height: 80.0,
            motion: MotionModel::Zigzag {
                speed: 16.0,
                period: 10,
            },
            layout: Layout::Random,
            detector: DetectorNoise {
                miss_prob: 0.05,
                jitter_sigma: 2.0,
                occlusion: true,
                ..DetectorNoise::default()
            },
            embedding: Some(EmbeddingModel {
                confusable_pairs: true,
                ..EmbeddingModel::default()
            }),
            seed,
        }
    }

    /// Looks up a named suite: `burst`, `crossing` or `standard`.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "burst" => Some(Self::burst_suite(seed)),
            "crossing" => Some(Self::crossing_suite(seed)),
            "standard" => Some(Self::standard_suite(seed)),
            _ => None,
        }
    }

    /// Parses a scenario file. A top-level `preset = "<name>"` starts from
    /// that suite; any other keys override it, with nested tables such as
    /// `[detector]` merged key by key. Without a preset every required field
    /// must be present.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidConfig(vec![m]);
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| bad(e.to_string()))?;
        let merged = match table.remove("preset") {
            None => table,
            Some(toml::Value::String(name)) => {
                let base = Self::preset(&name, 0)
                    .ok_or_else(|| bad(format!("unknown preset {name:?}")))?;
                let mut base = toml::Table::try_from(base).map_err(|e| bad(e.to_string()))?;
                for (key, value) in table {
                    match (base.get_mut(&key), value) {
                        (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => dst.extend(src),
                        (_, value) => {
                            base.insert(key, value);
                        }
                    }
                }
                base
            }
            Some(other) => return Err(bad(format!("preset must be a string, got {other}"))),
        };
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_targets == 0 {
            out.push("n_targets must be at least 1".to_string());
        }
        if self.n_frames == 0 {
            out.push("n_frames must be at least 1".to_string());
        }
        if !(self.box_width > 0.0 && self.box_height > 0.0) {
            out.push("box dimensions must be positive".to_string());
        }
        if !(self.arena_width >= self.box_width && self.arena_height >= self.box_height) {
            out.push("arena must be at least one box large".to_string());
        }
        match self.motion {
            MotionModel::Linear { speed } | MotionModel::Zigzag { speed, .. }
                if speed.is_nan() || speed < 0.0 =>
            {
                out.push(format!("speed {speed} must be >= 0"));
            }
            MotionModel::Zigzag { period: 0, .. } => {
                out.push("zigzag period must be at least 1".to_string());
            }
            MotionModel::Burst { d_max } if d_max.is_nan() || d_max < 0.0 => {
                out.push(format!("d_max {d_max} must be >= 0"));
            }
            _ => {}
        }
        let d = &self.detector;
        for (name, v) in [
            ("miss_prob", d.miss_prob),
            ("conf_min", d.conf_min),
            ("conf_max", d.conf_max),
            ("occlusion_iou", d.occlusion_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        if d.conf_min > d.conf_max {
            out.push("conf_min must not exceed conf_max".to_string());
        }
        if d.jitter_sigma.is_nan() || d.jitter_sigma < 0.0 {
            out.push("jitter_sigma must be >= 0".to_string());
        }
        if let Some(e) = &self.embedding {
            if e.dim == 0 {
                out.push("embedding dim must be at least 1".to_string());
            }
            if !(e.noise_sigma >= 0.0 && e.confusion_spread >= 0.0) {
                out.push("embedding noise parameters must be >= 0".to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// A generated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ground_truth: FrameLabels,
    /// Detections for every frame `1..=n_frames`, possibly empty.
    pub detections: BTreeMap<u32, Vec<Detection>>,
    /// Identity vector of each target, indexed by `id - 1`.
    pub identity_vectors: Vec<Vec<f64>>,
}

struct Target {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Reflects `pos` into `[0, limit]`, flipping `vel` on each bounce.
fn bounce(pos: &mut f64, vel: &mut f64, limit: f64) {
    if limit <= 0.0 {
        *pos = 0.0;
        return;
    }
    for _ in 0..4 {
        if *pos < 0.0 {
            *pos = -*pos;
            *vel = -*vel;
        } else if *pos > limit {
            *pos = 2.0 * limit - *pos;
            *vel = -*vel;
        } else {
            return;
        }
    }
    *pos = pos.clamp(0.0, limit);
}

/// Generates ground truth and detections. Identical configs produce
/// identical output.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.box_width, cfg.box_height);
    let x_max = cfg.arena_width - w;
    let y_max = cfg.arena_height - h;

    let mut targets: Vec<Target> = Vec::with_capacity(cfg.n_targets);
    let lanes = cfg.n_targets.div_ceil(2);
    for k in 0..cfg.n_targets {
        let (x, y, heading) = match cfg.layout {
            Layout::Random => (
                rng.random_range(0.0..=x_max),
                rng.random_range(0.0..=y_max),
                rng.random_range(0.0..TAU),
            ),
            Layout::Crossing => {
                let lane = k / 2;
                let lane_y =
                    cfg.arena_height * (lane as f64 + 1.0) / (lanes as f64 + 1.0) - h / 2.0;
                let y = (lane_y + rng.random_range(-0.05..=0.05) * h).clamp(0.0, y_max);
                let offset = rng.random_range(0.0..=0.25) * x_max;
                if k % 2 == 0 {
                    (offset, y, 0.0)
                } else {
                    (x_max - offset, y, std::f64::consts::PI)
                }
            }
        };
        let (vx, vy) = match cfg.motion {
            MotionModel::Linear { speed } | MotionModel::Zigzag { speed, .. } => {
                (speed * heading.cos(), speed * heading.sin())
            }
            MotionModel::Burst { .. } => (0.0, 0.0),
        };
        let vy = if cfg.layout == Layout::Crossing {
            0.0
        } else {
            vy
        };
        targets.push(Target { x, y, vx, vy });
    }

    let identity_vectors: Vec<Vec<f64>> = match &cfg.embedding {
        None => Vec::new(),
        Some(model) => {
            let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_targets);
            for k in 0..cfg.n_targets {
                if model.confusable_pairs && k % 2 == 1 {
                    let base = &vecs[k - 1];
                    let push = random_unit(&mut rng, model.dim);
                    let v = base
                        .iter()
                        .zip(&push)
                        .map(|(b, p)| b + model.confusion_spread * p)
                        .collect();
                    vecs.push(normalized(v));
                } else {
                    vecs.push(random_unit(&mut rng, model.dim));
                }
            }
            vecs
        }
    };

    let jitter = Normal::new(0.0, cfg.detector.jitter_sigma.max(0.0))
        .map_err(|e| Error::Domain(e.to_string()))?;
    let emb_noise = Normal::new(0.0, cfg.embedding.map_or(0.0, |m| m.noise_sigma))
        .map_err(|e| Error::Domain(e.to_string()))?;

    let mut ground_truth = FrameLabels::new();
    let mut detections = BTreeMap::new();
    for frame in 1..=cfg.n_frames {
        if frame > 1 {
            for t in targets.iter_mut() {
                match cfg.motion {
                    MotionModel::Linear { .. } => {}
                    MotionModel::Zigzag { period, .. } => {
                        if (frame - 1) % period == 0 {
                            t.vy = -t.vy;
                        }
                    }
                    MotionModel::Burst { d_max } => {
                        let angle = rng.random_range(0.0..TAU);
                        let mag = rng.random_range(0.0..=d_max);
                        t.vx = mag * angle.cos();
                        t.vy = if cfg.layout == Layout::Crossing {
                            0.0
                        } else {
                            mag * angle.sin()
                        };
                    }
                }
                t.x += t.vx;
                t.y += t.vy;
                bounce(&mut t.x, &mut t.vx, x_max);
                bounce(&mut t.y, &mut t.vy, y_max);
            }
        }

        let gt_boxes: Vec<BBox> = targets
            .iter()
            .map(|t| BBox {
                x1: t.x,
                y1: t.y,
                x2: t.x + w,
                y2: t.y + h,
                confidence: 1.0,
            })
            .collect();
        ground_truth.insert(
            frame,
            gt_boxes
                .iter()
                .enumerate()
                .map(|(k, b)| LabeledBox {
                    id: k as u64 + 1,
                    bbox: *b,
                })
                .collect(),
        );

        let mut frame_dets = Vec::new();
        for (k, gt) in gt_boxes.iter().enumerate() {
            // Sample every random quantity unconditionally so that toggling
            // one noise source does not reshuffle the others.
            let missed = rng.random_bool(cfg.detector.miss_prob);
            let d = &cfg.detector;
            let occluded = d.occlusion
                && gt_boxes.iter().enumerate().any(|(o, other)| {
                    o != k && other.y2 > gt.y2 && iou(gt, other) > d.occlusion_iou
                });
            let conf_draw: f64 = rng.random_range(0.0..=1.0);
            // Occluded confidences stay in [0.1, 0.59] so that four-decimal
            // file output cannot round them into the high-score band.
            let confidence = if occluded {
                0.1 + conf_draw * 0.49
            } else {
                d.conf_min + conf_draw * (d.conf_max - d.conf_min)
            };
            let mut corners = [gt.x1, gt.y1, gt.x2, gt.y2];
            for c in corners.iter_mut() {
                *c += jitter.sample(&mut rng);
            }
            if corners[2] < corners[0] {
                corners.swap(0, 2);
            }
            if corners[3] < corners[1] {
                corners.swap(1, 3);
            }
            let embedding = match &cfg.embedding {
                None => None,
                Some(_) => {
                    let noisy: Vec<f64> = identity_vectors[k]
                        .iter()
                        .map(|v| v + emb_noise.sample(&mut rng))
                        .collect();
                    Some(Embedding::new(noisy)?.normalized())
                }
            };
            if missed {
                continue;
            }
            let bbox = BBox::new(corners[0], corners[1], corners[2], corners[3], confidence)?;
            frame_dets.push(Detection {
                frame,
                bbox,
                embedding,
                class: -1,
            });
        }
        detections.insert(frame, frame_dets);
    }

    Ok(Scenario {
        ground_truth,
        detections,
        identity_vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless_linear() -> ScenarioConfig {
        ScenarioConfig {
            n_targets: 4,
            n_frames: 50,
            arena_width: 640.0,
            arena_height: 480.0,
            box_width: 20.0,
            box_height: 40.0,
            motion: MotionModel::Linear { speed: 5.0 },
            layout: Layout::Random,
            detector: DetectorNoise {
                conf_min: 1.0,
                conf_max: 1.0,
                ..DetectorNoise::default()
            },
            embedding: None,
            seed: 11,
        }
    }

    #[test]
    fn zero_noise_detections_equal_ground_truth() {
        let s = generate(&noiseless_linear()).unwrap();
        for (f, gt) in &s.ground_truth {
            let dets = &s.detections[f];
            assert_eq!(dets.len(), gt.len());
            for (d, g) in dets.iter().zip(gt) {
                assert_eq!(d.bbox, g.bbox);
                assert_eq!(d.confidence(), 1.0);
            }
        }
    }

    #[test]
    fn certain_misses_give_empty_frames() {
        let mut cfg = noiseless_linear();
        cfg.detector.miss_prob = 1.0;
        let s = generate(&cfg).unwrap();
        assert_eq!(s.detections.len(), 50);
        assert!(s.detections.values().all(Vec::is_empty));
    }

    #[test]
    fn boxes_stay_in_arena() {
        for motion in [
            MotionModel::Linear { speed: 37.0 },
            MotionModel::Zigzag {
                speed: 30.0,
                period: 7,
            },
            MotionModel::Burst { d_max: 90.0 },
        ] {
            let cfg = ScenarioConfig {
                motion,
                n_frames: 200,
                ..noiseless_linear()
            };
            let s = generate(&cfg).unwrap();
            for b in s.ground_truth.values().flatten() {
                assert!(b.bbox.x1 >= 0.0 && b.bbox.x2 <= cfg.arena_width + 1e-9);
                assert!(b.bbox.y1 >= 0.0 && b.bbox.y2 <= cfg.arena_height + 1e-9);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = noiseless_linear();
        cfg.n_targets = 0;
        cfg.detector.miss_prob = 1.5;
        cfg.motion = MotionModel::Burst { d_max: -1.0 };
        let Err(Error::InvalidConfig(problems)) = generate(&cfg) else {
            panic!("expected validation failure");
        };
        assert_eq!(problems.len(), 3, "{problems:?}");
    }

    #[test]
    fn occlusion_lowers_confidence() {
        let mut cfg = ScenarioConfig::standard_suite(3);
        cfg.detector.miss_prob = 0.0;
        let s = generate(&cfg).unwrap();
        let low = s
            .detections
            .values()
            .flatten()
            .filter(|d| d.confidence() < 0.6)
            .count();
        assert!(low > 0);
        assert!(s
            .detections
            .values()
            .flatten()
            .all(|d| d.confidence() >= 0.1));
    }

    #[test]
    fn toml_preset_with_overrides() {
        let cfg = ScenarioConfig::from_toml_str(
            "preset = \"burst\"\nseed = 5\nn_frames = 20\n[detector]\nmiss_prob = 0.5\n",
        )
        .unwrap();
        let mut expected = ScenarioConfig::burst_suite(5);
        expected.n_frames = 20;
        expected.detector.miss_prob = 0.5;
        assert_eq!(cfg, expected);
        assert!(ScenarioConfig::from_toml_str("preset = \"nope\"").is_err());
        assert!(ScenarioConfig::from_toml_str("n_targets = 3").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::crossing_suite(9);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
