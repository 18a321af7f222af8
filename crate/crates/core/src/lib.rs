//! Online multi-object tracking without a motion model.
//!
//! Association relies on expansion IoU (IoU of boxes enlarged around their
//! centers) computed over a few rounds of growing expansion, fused with
//! appearance-embedding costs for high-confidence detections. Low-confidence
//! detections are matched geometrically in a second stage. The crate also
//! ships the evaluation metrics (HOTA, MOTA, IDF1), a synthetic sequence
//! generator, and MOT-style text file readers and writers.
//!
//! ```
//! use deep_eiou::{BBox, Detection, Tracker, TrackerConfig};
//!
//! let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
//! let det = Detection::new(1, BBox::new(0.0, 0.0, 40.0, 80.0, 0.9).unwrap());
//! let out = tracker.step(1, &[det]).unwrap();
//! assert_eq!(out.len(), 1);
//! ```

pub mod appearance;
pub mod assignment;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod scenario;
pub mod tracker;

pub use appearance::{cosine_cost, update_track_feature, Embedding};
pub use assignment::{solve, CostMatrix, MatchResult};
pub use config::{load_config, ClassMode, RunConfig};
pub use error::{Error, Result};
pub use geometry::{eiou, expand, iou, BBox};
pub use io::{DetectionFrames, SequenceBundle};
pub use metrics::{EvalConfig, FrameLabels, LabeledBox, LabeledFrameSet, MetricsReport};
pub use pipeline::{sweep, track_sequence, SweepReport};
pub use postprocess::{interpolate, Trajectory};
pub use scenario::{generate, Scenario, ScenarioConfig};
pub use tracker::{
    Detection, ExpansionSchedule, Track, TrackId, TrackOutput, TrackState, Tracker, TrackerConfig,
};
