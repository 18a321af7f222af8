//! Offline gap filling of finished trajectories.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::tracker::{TrackId, TrackOutput};

/// Default longest gap, in frames, that interpolation will bridge.
pub const DEFAULT_MAX_GAP: u32 = 20;

/// All observations of one track, ordered by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: TrackId,
    pub entries: Vec<(u32, BBox)>,
}

impl Trajectory {
    pub fn new(id: TrackId, entries: Vec<(u32, BBox)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain(format!("trajectory {id} has no entries")));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Domain(format!(
                "trajectory {id} frames are not strictly increasing"
            )));
        }
        Ok(Trajectory { id, entries })
    }

    pub fn first_frame(&self) -> u32 {
        self.entries[0].0
    }

    pub fn last_frame(&self) -> u32 {
        self.entries[self.entries.len() - 1].0
    }
}

/// Groups per-frame tracker outputs into trajectories ordered by id.
pub fn collect_trajectories<'a, I>(frames: I) -> Vec<Trajectory>
where
    I: IntoIterator<Item = (u32, &'a [TrackOutput])>,
{
    let mut by_id: BTreeMap<TrackId, Vec<(u32, BBox)>> = BTreeMap::new();
    for (frame, outputs) in frames {
        for o in outputs {
            by_id.entry(o.id).or_default().push((frame, o.bbox));
        }
    }
    by_id
        .into_iter()
        .map(|(id, mut entries)| {
            entries.sort_by_key(|e| e.0);
            entries.dedup_by_key(|e| e.0);
            Trajectory { id, entries }
        })
        .collect()
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Fills every internal gap of at most `max_gap` missing frames with boxes
/// whose corners move linearly between the bracketing observations. Inserted
/// boxes carry the mean confidence of the two endpoints. Nothing is added
/// before the first or after the last observation.
pub fn interpolate(traj: &Trajectory, max_gap: u32) -> Trajectory {
    let mut entries = Vec::with_capacity(traj.entries.len());
    for pair in traj.entries.windows(2) {
        let (f0, a) = pair[0];
        let (f1, b) = pair[1];
        entries.push((f0, a));
        let missing = f1 - f0 - 1;
        if missing == 0 || missing > max_gap {
            continue;
        }
        let span = f64::from(f1 - f0);
        let confidence = 0.5 * (a.confidence + b.confidence);
        for f in f0 + 1..f1 {
            let t = f64::from(f - f0) / span;
            entries.push((
                f,
                BBox {
                    x1: lerp(a.x1, b.x1, t),
                    y1: lerp(a.y1, b.y1, t),
                    x2: lerp(a.x2, b.x2, t),
                    y2: lerp(a.y2, b.y2, t),
                    confidence,
                },
            ));
        }
    }
    if let Some(&last) = traj.entries.last() {
        entries.push(last);
    }
    Trajectory {
        id: traj.id,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64, conf: f64) -> BBox {
        BBox::new(x1, y1, x2, y2, conf).unwrap()
    }

    #[test]
    fn fills_short_gap_linearly() {
        let t = Trajectory::new(
            TrackId(1),
            vec![
                (1, bx(0.0, 0.0, 10.0, 10.0, 0.8)),
                (5, bx(8.0, 0.0, 18.0, 10.0, 0.6)),
            ],
        )
        .unwrap();
        let out = interpolate(&t, 20);
        let frames: Vec<u32> = out.entries.iter().map(|e| e.0).collect();
        assert_eq!(frames, vec![1, 2, 3, 4, 5]);
        let expect = [(2.0, 12.0), (4.0, 14.0), (6.0, 16.0)];
        for ((_, b), (x1, x2)) in out.entries[1..4].iter().zip(expect) {
            assert_eq!((b.x1, b.y1, b.x2, b.y2), (x1, 0.0, x2, 10.0));
            assert!((b.confidence - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn leaves_long_gaps_and_contiguous_runs() {
        let contiguous = Trajectory::new(
            TrackId(2),
            vec![
                (3, bx(0.0, 0.0, 1.0, 1.0, 1.0)),
                (4, bx(1.0, 0.0, 2.0, 1.0, 1.0)),
            ],
        )
        .unwrap();
        assert_eq!(interpolate(&contiguous, 20), contiguous);

        // 25 missing frames between 1 and 27
        let long = Trajectory::new(
            TrackId(3),
            vec![
                (1, bx(0.0, 0.0, 1.0, 1.0, 1.0)),
                (27, bx(9.0, 0.0, 10.0, 1.0, 1.0)),
            ],
        )
        .unwrap();
        assert_eq!(interpolate(&long, 20), long);
        assert_eq!(interpolate(&long, 25).entries.len(), 27);
    }

    #[test]
    fn rejects_bad_trajectories() {
        assert!(Trajectory::new(TrackId(1), vec![]).is_err());
        let b = bx(0.0, 0.0, 1.0, 1.0, 1.0);
        assert!(Trajectory::new(TrackId(1), vec![(2, b), (2, b)]).is_err());
    }
}
