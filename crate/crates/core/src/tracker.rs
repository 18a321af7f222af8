//! Kalman-free online tracker: confidence split, iterative scale-up
//! association on high-score detections fused with appearance, expansion IoU
//! rescue of low-score detections, confirmation of tentative tracks and the
//! track lifecycle.

use std::borrow::{Borrow, BorrowMut};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::appearance::{cosine_cost, update_track_feature, Embedding};
use crate::assignment::{solve, solve_with_tiebreak, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{check_scale, eiou, BBox};

/// Sequence-unique track identity. Allocated in increasing order and never
/// reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackId(pub u64);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A single detector output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub embedding: Option<Embedding>,
    /// Object class as read from the input, `-1` when unknown.
    pub class: i32,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox) -> Self {
        Detection {
            frame,
            bbox,
            embedding: None,
            class: -1,
        }
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn confidence(&self) -> f64 {
        self.bbox.confidence
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    Unconfirmed,
    Tracked,
    Lost,
    Removed,
}

impl TrackState {
    /// Whether the lifecycle allows moving from `self` to `next`.
    pub fn can_become(self, next: TrackState) -> bool {
        use TrackState::*;
        matches!(
            (self, next),
            (Unconfirmed, Tracked)
                | (Unconfirmed, Removed)
                | (Tracked, Tracked)
                | (Tracked, Lost)
                | (Lost, Tracked)
                | (Lost, Lost)
                | (Lost, Removed)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: TrackId,
    pub state: TrackState,
    pub last_box: BBox,
    pub feature: Option<Embedding>,
    pub last_update_frame: u32,
    pub start_frame: u32,
    pub history: Vec<(u32, BBox)>,
}

impl Track {
    /// A tentative track seeded from a detection.
    pub fn new(id: TrackId, det: &Detection) -> Self {
        Track {
            id,
            state: TrackState::Unconfirmed,
            last_box: det.bbox,
            feature: det.embedding.as_ref().map(Embedding::normalized),
            last_update_frame: det.frame,
            start_frame: det.frame,
            history: vec![(det.frame, det.bbox)],
        }
    }

    fn transition(&mut self, next: TrackState) {
        debug_assert!(
            self.state.can_become(next),
            "illegal transition {:?} -> {:?}",
            self.state,
            next
        );
        self.state = next;
    }

    /// Absorbs a matched detection. The appearance feature is only refreshed
    /// when `refresh_feature` is set.
    fn absorb(&mut self, det: &Detection, refresh_feature: bool, alpha: f64) -> Result<()> {
        self.last_box = det.bbox;
        self.last_update_frame = det.frame;
        self.history.push((det.frame, det.bbox));
        if refresh_feature {
            if let Some(observed) = &det.embedding {
                self.feature = Some(match &self.feature {
                    Some(current) => update_track_feature(current, observed, alpha)?,
                    None => observed.normalized(),
                });
            }
        }
        self.transition(TrackState::Tracked);
        Ok(())
    }
}

/// Expansion scale schedule `E_t = e_initial + step * t` for the high-score
/// association rounds `t = 0 .. t_total - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSchedule {
    pub e_initial: f64,
    pub step: f64,
    pub t_total: u32,
}

impl Default for ExpansionSchedule {
    fn default() -> Self {
        ExpansionSchedule {
            e_initial: 0.7,
            step: 0.1,
            t_total: 2,
        }
    }
}

impl ExpansionSchedule {
    /// A single round at a fixed scale.
    pub fn fixed(scale: f64) -> Self {
        ExpansionSchedule {
            e_initial: scale,
            step: 0.0,
            t_total: 1,
        }
    }

    /// Scale for round `t`.
    pub fn expansion_at(&self, t: u32) -> Result<f64> {
        if t >= self.t_total {
            return Err(Error::Domain(format!(
                "iteration {t} outside schedule of {} rounds",
                self.t_total
            )));
        }
        Ok(self.e_initial + self.step * f64::from(t))
    }

    pub fn scales(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.t_total).map(|t| self.e_initial + self.step * f64::from(t))
    }
}

/// Free-function form of [`ExpansionSchedule::expansion_at`].
pub fn expansion_at(schedule: &ExpansionSchedule, t: u32) -> Result<f64> {
    schedule.expansion_at(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Detections at or above this confidence are high score.
    pub high_thresh: f64,
    /// Detections below this confidence are discarded.
    pub low_thresh: f64,
    /// Appearance cost gate.
    pub tau_a: f64,
    /// Expansion IoU cost gate for the appearance term.
    pub tau_eiou: f64,
    pub schedule: ExpansionSchedule,
    /// Expansion scale for low-score detections.
    pub e_low: f64,
    /// Expansion scale when confirming tentative tracks.
    pub e_unconfirmed: f64,
    /// Frames a lost track is kept before removal.
    pub max_lost: u32,
    /// Minimum confidence for a leftover detection to start a track.
    pub new_track_thresh: f64,
    pub stage1_reject: f64,
    pub stage2_reject: f64,
    pub unconfirmed_reject: f64,
    /// EMA weight of the existing track feature.
    pub ema_alpha: f64,
    /// Report tentative tracks in the frame they are created.
    pub emit_unconfirmed: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            high_thresh: 0.6,
            low_thresh: 0.1,
            tau_a: 0.25,
            tau_eiou: 0.5,
            schedule: ExpansionSchedule::default(),
            e_low: 0.7,
            e_unconfirmed: 0.5,
            max_lost: 60,
            new_track_thresh: 0.7,
            stage1_reject: 0.8,
            stage2_reject: 0.5,
            unconfirmed_reject: 0.7,
            ema_alpha: 0.9,
            emit_unconfirmed: true,
        }
    }
}

impl TrackerConfig {
    /// Returns one message per offending key.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let unit = |name: &str, v: f64, out: &mut Vec<String>| {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} = {v} must lie in [0, 1]"));
            }
        };
        unit("high_thresh", self.high_thresh, &mut out);
        unit("low_thresh", self.low_thresh, &mut out);
        unit("new_track_thresh", self.new_track_thresh, &mut out);
        unit("ema_alpha", self.ema_alpha, &mut out);
        if self.low_thresh >= self.high_thresh {
            out.push(format!(
                "high_thresh = {} must exceed low_thresh = {}",
                self.high_thresh, self.low_thresh
            ));
        }
        for (name, v) in [
            ("e_initial", self.schedule.e_initial),
            ("e_low", self.e_low),
            ("e_unconfirmed", self.e_unconfirmed),
        ] {
            if check_scale(v).is_err() {
                out.push(format!("{name} = {v} must be >= -0.5"));
            }
        }
        if !(self.schedule.step >= 0.0 && self.schedule.step.is_finite()) {
            out.push(format!("step = {} must be >= 0", self.schedule.step));
        }
        for (name, v) in [
            ("tau_a", self.tau_a),
            ("tau_eiou", self.tau_eiou),
            ("stage1_reject", self.stage1_reject),
            ("stage2_reject", self.stage2_reject),
            ("unconfirmed_reject", self.unconfirmed_reject),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} = {v} must be positive"));
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

/// Splits detections into high-score and low-score sets; anything below
/// `low_thresh` is dropped. Input order is preserved within each set.
pub fn split_detections(
    dets: &[Detection],
    cfg: &TrackerConfig,
) -> (Vec<Detection>, Vec<Detection>) {
    let mut high = Vec::new();
    let mut low = Vec::new();
    for d in dets {
        let conf = d.confidence();
        if conf >= cfg.high_thresh {
            high.push(d.clone());
        } else if conf >= cfg.low_thresh {
            low.push(d.clone());
        }
    }
    (high, low)
}

/// Fused stage-1 cost for one pair given its appearance and expansion IoU
/// costs. A missing appearance cost forces the appearance branch to 1.
pub fn fused_cost(appearance: Option<f64>, eiou_cost: f64, cfg: &TrackerConfig) -> f64 {
    let gated = match appearance {
        Some(a) if a <= cfg.tau_a && eiou_cost <= cfg.tau_eiou => 0.5 * a,
        _ => 1.0,
    };
    gated.min(eiou_cost)
}

fn eiou_cost_matrix<T: Borrow<Track>>(
    tracks: &[T],
    dets: &[Detection],
    scale: f64,
) -> Result<CostMatrix> {
    CostMatrix::try_from_fn(tracks.len(), dets.len(), |r, c| {
        Ok(1.0 - eiou(&tracks[r].borrow().last_box, &dets[c].bbox, scale)?)
    })
}

fn appearance_cost(track: &Track, det: &Detection) -> Result<Option<f64>> {
    match (&track.feature, &det.embedding) {
        (Some(f), Some(e)) => cosine_cost(f, e).map(Some),
        _ => Ok(None),
    }
}

/// Stage-1 cost matrix at expansion scale `scale`.
pub fn stage1_cost<T: Borrow<Track>>(
    tracks: &[T],
    dets: &[Detection],
    scale: f64,
    cfg: &TrackerConfig,
) -> Result<CostMatrix> {
    check_scale(scale)?;
    CostMatrix::try_from_fn(tracks.len(), dets.len(), |r, c| {
        let track = tracks[r].borrow();
        let det = &dets[c];
        let eiou_cost = 1.0 - eiou(&track.last_box, &det.bbox, scale)?;
        Ok(fused_cost(appearance_cost(track, det)?, eiou_cost, cfg))
    })
}

/// Matches of one association stage. Indices refer to the track and
/// detection slices passed to the stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// High-score association over `t_total` rounds of growing expansion scale.
/// Each round matches only what earlier rounds left over. Matched tracks take
/// the detection box, refresh their feature and become `Tracked`.
pub fn associate_stage1<T: BorrowMut<Track>>(
    tracks: &mut [T],
    dets: &[Detection],
    cfg: &TrackerConfig,
) -> Result<Association> {
    let mut track_left: Vec<usize> = (0..tracks.len()).collect();
    let mut det_left: Vec<usize> = (0..dets.len()).collect();
    let mut matches = Vec::new();

    for scale in cfg.schedule.scales() {
        if track_left.is_empty() || det_left.is_empty() {
            break;
        }
        let sub_tracks: Vec<&Track> = track_left.iter().map(|&i| tracks[i].borrow()).collect();
        let sub_dets: Vec<Detection> = det_left.iter().map(|&j| dets[j].clone()).collect();
        let fused = stage1_cost(&sub_tracks, &sub_dets, scale, cfg)?;
        let geometric = eiou_cost_matrix(&sub_tracks, &sub_dets, scale)?;
        let result = solve_with_tiebreak(&fused, &geometric, cfg.stage1_reject)?;

        for &(r, c) in &result.matches {
            let (ti, dj) = (track_left[r], det_left[c]);
            tracks[ti]
                .borrow_mut()
                .absorb(&dets[dj], true, cfg.ema_alpha)?;
            matches.push((ti, dj));
        }
        track_left = result
            .unmatched_tracks
            .iter()
            .map(|&r| track_left[r])
            .collect();
        det_left = result
            .unmatched_detections
            .iter()
            .map(|&c| det_left[c])
            .collect();
    }

    Ok(Association {
        matches,
        unmatched_tracks: track_left,
        unmatched_detections: det_left,
    })
}

fn associate_geometric<T: BorrowMut<Track>>(
    tracks: &mut [T],
    dets: &[Detection],
    scale: f64,
    reject_above: f64,
) -> Result<Association> {
    let costs = eiou_cost_matrix(tracks, dets, scale)?;
    let result = solve(&costs, reject_above);
    for &(r, c) in &result.matches {
        tracks[r].borrow_mut().absorb(&dets[c], false, 0.0)?;
    }
    Ok(Association {
        matches: result.matches,
        unmatched_tracks: result.unmatched_tracks,
        unmatched_detections: result.unmatched_detections,
    })
}

/// Low-score association: expansion IoU only, at `e_low`. Appearance
/// features are left untouched.
pub fn associate_stage2<T: BorrowMut<Track>>(
    tracks: &mut [T],
    low_dets: &[Detection],
    cfg: &TrackerConfig,
) -> Result<Association> {
    associate_geometric(tracks, low_dets, cfg.e_low, cfg.stage2_reject)
}

/// Confirms tentative tracks against leftover high-score detections at
/// `e_unconfirmed`. Tentative tracks left without a match are removed.
pub fn associate_unconfirmed<T: BorrowMut<Track>>(
    tracks: &mut [T],
    dets: &[Detection],
    cfg: &TrackerConfig,
) -> Result<Association> {
    let assoc = associate_geometric(tracks, dets, cfg.e_unconfirmed, cfg.unconfirmed_reject)?;
    for &r in &assoc.unmatched_tracks {
        tracks[r].borrow_mut().transition(TrackState::Removed);
    }
    Ok(assoc)
}

/// One reported box for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub id: TrackId,
    pub bbox: BBox,
}

/// Per-sequence tracker state. Frames must be fed in strictly increasing
/// order; independent sequences need independent trackers.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    finished: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
    embedding_dim: Option<usize>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker {
            cfg,
            tracks: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            last_frame: None,
            embedding_dim: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracks (everything not yet removed), ordered by id.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Tracks that have been removed, in removal order.
    pub fn removed_tracks(&self) -> &[Track] {
        &self.finished
    }

    /// Id the next new track will receive.
    pub fn next_id(&self) -> TrackId {
        TrackId(self.next_id)
    }

    /// Moves the id counter forward, e.g. to share one id space between
    /// several trackers. Never moves it backwards.
    pub fn advance_ids_to(&mut self, next: TrackId) {
        self.next_id = self.next_id.max(next.0);
    }

    fn check_frame(&self, frame: u32, dets: &[Detection]) -> Result<()> {
        if let Some(previous) = self.last_frame {
            if frame <= previous {
                return Err(Error::NonMonotonicFrame { frame, previous });
            }
        }
        if frame == 0 {
            return Err(Error::Domain("frame indices start at 1".into()));
        }
        let mut dim = self.embedding_dim;
        for d in dets {
            if d.frame != frame {
                return Err(Error::Domain(format!(
                    "detection for frame {} passed with frame {frame}",
                    d.frame
                )));
            }
            d.bbox.validate()?;
            if let Some(e) = &d.embedding {
                match dim {
                    Some(expected) if expected != e.dim() => {
                        return Err(Error::DimensionMismatch {
                            expected,
                            found: e.dim(),
                        })
                    }
                    _ => dim = Some(e.dim()),
                }
            }
        }
        Ok(())
    }

    /// Runs the full association cascade for one frame and returns the boxes
    /// of active tracks, ordered by id.
    pub fn step(&mut self, frame: u32, dets: &[Detection]) -> Result<Vec<TrackOutput>> {
        self.check_frame(frame, dets)?;
        self.last_frame = Some(frame);
        if self.embedding_dim.is_none() {
            self.embedding_dim = dets
                .iter()
                .find_map(|d| d.embedding.as_ref().map(Embedding::dim));
        }
        let cfg = self.cfg.clone();
        let (high, low) = split_detections(dets, &cfg);

        let mut tracks = std::mem::take(&mut self.tracks);
        let (mut pool, mut unconfirmed): (Vec<&mut Track>, Vec<&mut Track>) = tracks
            .iter_mut()
            .partition(|t| t.state != TrackState::Unconfirmed);

        let first = associate_stage1(&mut pool, &high, &cfg)?;
        let high_left: Vec<Detection> = first
            .unmatched_detections
            .iter()
            .map(|&j| high[j].clone())
            .collect();

        // Only tracks that were alive last frame may claim low-score boxes.
        let mut slots: Vec<Option<&mut Track>> = pool.into_iter().map(Some).collect();
        let (mut recent, mut lost): (Vec<&mut Track>, Vec<&mut Track>) = first
            .unmatched_tracks
            .iter()
            .filter_map(|&i| slots[i].take())
            .partition(|t| t.state == TrackState::Tracked);
        let second = associate_stage2(&mut recent, &low, &cfg)?;
        for &i in &second.unmatched_tracks {
            recent[i].transition(TrackState::Lost);
        }

        let third = associate_unconfirmed(&mut unconfirmed, &high_left, &cfg)?;

        for t in lost.iter_mut() {
            if frame - t.last_update_frame > cfg.max_lost {
                t.transition(TrackState::Removed);
            }
        }
        drop((slots, recent, lost, unconfirmed));

        let mut created = Vec::new();
        for &j in &third.unmatched_detections {
            let det = &high_left[j];
            if det.confidence() >= cfg.new_track_thresh {
                let id = TrackId(self.next_id);
                self.next_id += 1;
                created.push(Track::new(id, det));
            }
        }

        let (removed, mut live): (Vec<Track>, Vec<Track>) = tracks
            .into_iter()
            .partition(|t| t.state == TrackState::Removed);
        self.finished.extend(removed);
        live.extend(created);
        live.sort_by_key(|t| t.id);
        self.tracks = live;

        Ok(self
            .tracks
            .iter()
            .filter(|t| {
                t.last_update_frame == frame
                    && (t.state == TrackState::Tracked
                        || (cfg.emit_unconfirmed && t.state == TrackState::Unconfirmed))
            })
            .map(|t| TrackOutput {
                id: t.id,
                bbox: t.last_box,
            })
            .collect())
    }
}
