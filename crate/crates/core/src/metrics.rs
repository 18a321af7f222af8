//! Tracking evaluation: CLEAR MOT (MOTA, ID switches, fragmentation),
//! identity F1, and HOTA with its detection and association components.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::{min_cost_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

const EPS: f64 = 1e-10;

/// A box carrying an identity, either ground truth or a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub id: u64,
    pub bbox: BBox,
}

/// Boxes per frame for one side (ground truth or predictions).
pub type FrameLabels = BTreeMap<u32, Vec<LabeledBox>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FramePair {
    pub gt: Vec<LabeledBox>,
    pub pred: Vec<LabeledBox>,
}

/// Ground truth and predictions aligned per frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledFrameSet {
    frames: BTreeMap<u32, FramePair>,
}

impl LabeledFrameSet {
    /// Aligns both sides; identities must be unique within a frame on each side.
    pub fn new(gt: &FrameLabels, pred: &FrameLabels) -> Result<Self> {
        let mut frames: BTreeMap<u32, FramePair> = BTreeMap::new();
        for (&f, boxes) in gt {
            check_unique(f, boxes, "ground truth")?;
            frames.entry(f).or_default().gt = boxes.clone();
        }
        for (&f, boxes) in pred {
            check_unique(f, boxes, "prediction")?;
            frames.entry(f).or_default().pred = boxes.clone();
        }
        Ok(LabeledFrameSet { frames })
    }

    pub fn frames(&self) -> impl Iterator<Item = (u32, &FramePair)> {
        self.frames.iter().map(|(&f, p)| (f, p))
    }

    pub fn num_gt(&self) -> usize {
        self.frames.values().map(|p| p.gt.len()).sum()
    }

    pub fn num_pred(&self) -> usize {
        self.frames.values().map(|p| p.pred.len()).sum()
    }
}

fn check_unique(frame: u32, boxes: &[LabeledBox], side: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for b in boxes {
        if !seen.insert(b.id) {
            return Err(Error::Domain(format!(
                "{side} id {} appears twice in frame {frame}",
                b.id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMetrics {
    pub mota: f64,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub num_gt: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityMetrics {
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotaMetrics {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    /// `(alpha, hota, deta, assa)` per localization threshold.
    pub per_alpha: Vec<(f64, f64, f64, f64)>,
}

/// Flat evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub mota: f64,
    pub idf1: f64,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MetricsReport {
    /// `key: value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        format!(
            "hota: {:.4}\ndeta: {:.4}\nassa: {:.4}\nmota: {:.4}\nidf1: {:.4}\n\
             id_switches: {}\nfragmentations: {}\nfp: {}\nfn: {}\n",
            self.hota,
            self.deta,
            self.assa,
            self.mota,
            self.idf1,
            self.id_switches,
            self.fragmentations,
            self.fp,
            self.fn_
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// IoU needed for a CLEAR or identity match.
    pub iou_threshold: f64,
    /// Localization thresholds averaged by HOTA.
    pub alphas: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.5,
            alphas: default_alphas(),
        }
    }
}

/// `0.05, 0.10, ..., 0.95`.
pub fn default_alphas() -> Vec<f64> {
    (1..=19).map(|k| f64::from(k) * 0.05).collect()
}

pub fn evaluate(data: &LabeledFrameSet, cfg: &EvalConfig) -> MetricsReport {
    let clear = clear_metrics(data, cfg.iou_threshold);
    let ident = idf1(data, cfg.iou_threshold);
    let h = hota_with_alphas(data, &cfg.alphas);
    MetricsReport {
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        mota: clear.mota,
        idf1: ident.idf1,
        id_switches: clear.id_switches,
        fragmentations: clear.fragmentations,
        fp: clear.fp,
        fn_: clear.fn_,
    }
}

/// Maximum-cardinality, then minimum-cost matching where `None` marks a
/// forbidden pair. Returns `(row, col)` pairs.
fn gated_matching(rows: usize, cols: usize, costs: &[Option<f64>]) -> Vec<(usize, usize)> {
    if rows == 0 || cols == 0 || costs.iter().all(Option::is_none) {
        return Vec::new();
    }
    let max_allowed = costs.iter().flatten().fold(0.0f64, |m, &c| m.max(c));
    // Any forbidden pair costs more than every allowed assignment combined.
    let forbidden = (max_allowed + 1.0) * (rows.min(cols) as f64 + 1.0);
    let data = costs.iter().map(|c| c.unwrap_or(forbidden)).collect();
    let matrix = CostMatrix::new(rows, cols, data).expect("finite non-negative costs");
    min_cost_assignment(&matrix)
        .into_iter()
        .filter(|&(r, c)| costs[r * cols + c].is_some())
        .collect()
}

/// CLEAR MOT counts. Correspondences from earlier frames are kept while
/// they still overlap by at least `iou_threshold`; the rest of each frame is
/// matched by minimum `1 - IoU`. A ground-truth object matched to a different
/// prediction than at its previous match counts one identity switch.
pub fn clear_metrics(data: &LabeledFrameSet, iou_threshold: f64) -> ClearMetrics {
    let mut last_match: BTreeMap<u64, u64> = BTreeMap::new();
    let mut tracked_flags: BTreeMap<u64, Vec<bool>> = BTreeMap::new();
    let (mut tp, mut fp, mut fn_, mut idsw) = (0usize, 0usize, 0usize, 0usize);

    for (_, frame) in data.frames() {
        let (gt, pred) = (&frame.gt, &frame.pred);
        let mut gt_done = vec![false; gt.len()];
        let mut pred_done = vec![false; pred.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();

        for (gi, g) in gt.iter().enumerate() {
            let Some(&prev) = last_match.get(&g.id) else {
                continue;
            };
            if let Some(pj) = pred.iter().position(|p| p.id == prev) {
                if !pred_done[pj] && iou(&g.bbox, &pred[pj].bbox) >= iou_threshold {
                    gt_done[gi] = true;
                    pred_done[pj] = true;
                    pairs.push((gi, pj));
                }
            }
        }

        let free_gt: Vec<usize> = (0..gt.len()).filter(|&i| !gt_done[i]).collect();
        let free_pred: Vec<usize> = (0..pred.len()).filter(|&j| !pred_done[j]).collect();
        let mut costs = Vec::with_capacity(free_gt.len() * free_pred.len());
        for &gi in &free_gt {
            for &pj in &free_pred {
                let overlap = iou(&gt[gi].bbox, &pred[pj].bbox);
                costs.push((overlap >= iou_threshold).then_some(1.0 - overlap));
            }
        }
        for (r, c) in gated_matching(free_gt.len(), free_pred.len(), &costs) {
            let (gi, pj) = (free_gt[r], free_pred[c]);
            if let Some(&prev) = last_match.get(&gt[gi].id) {
                if prev != pred[pj].id {
                    idsw += 1;
                }
            }
            gt_done[gi] = true;
            pairs.push((gi, pj));
        }

        for &(gi, pj) in &pairs {
            last_match.insert(gt[gi].id, pred[pj].id);
        }
        for (gi, g) in gt.iter().enumerate() {
            tracked_flags.entry(g.id).or_default().push(gt_done[gi]);
        }
        tp += pairs.len();
        fn_ += gt.len() - pairs.len();
        fp += pred.len() - pairs.len();
    }

    let fragmentations = tracked_flags
        .values()
        .map(|flags| {
            let segments = flags
                .iter()
                .enumerate()
                .filter(|&(i, &on)| on && (i == 0 || !flags[i - 1]))
                .count();
            segments.saturating_sub(1)
        })
        .sum();

    let num_gt = tp + fn_;
    let mota = 1.0 - (fp + fn_ + idsw) as f64 / num_gt.max(1) as f64;
    ClearMetrics {
        mota,
        id_switches: idsw,
        fragmentations,
        tp,
        fp,
        fn_,
        num_gt,
    }
}

fn index_ids<'a>(boxes: impl Iterator<Item = &'a LabeledBox>) -> BTreeMap<u64, usize> {
    let mut ids: BTreeMap<u64, usize> = BTreeMap::new();
    for b in boxes {
        let next = ids.len();
        ids.entry(b.id).or_insert(next);
    }
    ids
}

/// Identity precision/recall F1 under the one-to-one identity mapping that
/// maximizes the number of frames where mapped identities overlap by at
/// least `iou_threshold`.
pub fn idf1(data: &LabeledFrameSet, iou_threshold: f64) -> IdentityMetrics {
    let gt_ids = index_ids(data.frames().flat_map(|(_, p)| p.gt.iter()));
    let pred_ids = index_ids(data.frames().flat_map(|(_, p)| p.pred.iter()));
    let (ng, np) = (gt_ids.len(), pred_ids.len());
    let mut overlap = vec![0usize; ng * np];
    for (_, frame) in data.frames() {
        for g in &frame.gt {
            for p in &frame.pred {
                if iou(&g.bbox, &p.bbox) >= iou_threshold {
                    overlap[gt_ids[&g.id] * np + pred_ids[&p.id]] += 1;
                }
            }
        }
    }
    let most = overlap.iter().copied().max().unwrap_or(0) as f64;
    let costs: Vec<Option<f64>> = overlap
        .iter()
        .map(|&n| (n > 0).then_some(most - n as f64))
        .collect();
    let idtp: usize = gated_matching(ng, np, &costs)
        .into_iter()
        .map(|(r, c)| overlap[r * np + c])
        .sum();
    let idfn = data.num_gt() - idtp;
    let idfp = data.num_pred() - idtp;
    let denom = 2 * idtp + idfp + idfn;
    let idf1 = if denom == 0 {
        0.0
    } else {
        2.0 * idtp as f64 / denom as f64
    };
    IdentityMetrics {
        idf1,
        idtp,
        idfp,
        idfn,
    }
}

/// HOTA, DetA and AssA averaged over the default 19 thresholds.
pub fn hota(data: &LabeledFrameSet) -> HotaMetrics {
    hota_with_alphas(data, &default_alphas())
}

/// HOTA over the given localization thresholds.
///
/// Each frame is matched once, maximizing IoU weighted by a global
/// identity-alignment score; each threshold then keeps the matched pairs whose
/// IoU reaches it.
pub fn hota_with_alphas(data: &LabeledFrameSet, alphas: &[f64]) -> HotaMetrics {
    let gt_ids = index_ids(data.frames().flat_map(|(_, p)| p.gt.iter()));
    let pred_ids = index_ids(data.frames().flat_map(|(_, p)| p.pred.iter()));
    let (ng, np) = (gt_ids.len(), pred_ids.len());

    // Soft co-occurrence of identities, used to prefer consistent pairings.
    let mut potential = vec![0.0f64; ng * np];
    let mut gt_count = vec![0.0f64; ng];
    let mut pred_count = vec![0.0f64; np];
    let mut sims: Vec<Vec<f64>> = Vec::new();
    for (_, frame) in data.frames() {
        let (gt, pred) = (&frame.gt, &frame.pred);
        let sim: Vec<f64> = gt
            .iter()
            .flat_map(|g| pred.iter().map(move |p| iou(&g.bbox, &p.bbox)))
            .collect();
        let row_sum: Vec<f64> = (0..gt.len())
            .map(|i| sim[i * pred.len()..(i + 1) * pred.len()].iter().sum())
            .collect();
        let col_sum: Vec<f64> = (0..pred.len())
            .map(|j| (0..gt.len()).map(|i| sim[i * pred.len() + j]).sum())
            .collect();
        for (i, g) in gt.iter().enumerate() {
            for (j, p) in pred.iter().enumerate() {
                let s = sim[i * pred.len() + j];
                let denom = row_sum[i] + col_sum[j] - s;
                if denom > EPS {
                    potential[gt_ids[&g.id] * np + pred_ids[&p.id]] += s / denom;
                }
            }
            gt_count[gt_ids[&g.id]] += 1.0;
        }
        for p in pred {
            pred_count[pred_ids[&p.id]] += 1.0;
        }
        sims.push(sim);
    }
    let alignment: Vec<f64> = (0..ng * np)
        .map(|k| {
            let (g, p) = (k / np, k % np);
            let denom = gt_count[g] + pred_count[p] - potential[k];
            if denom > EPS {
                potential[k] / denom
            } else {
                0.0
            }
        })
        .collect();

    let na = alphas.len();
    let mut tp = vec![0usize; na];
    let mut fn_ = vec![0usize; na];
    let mut fp = vec![0usize; na];
    let mut matches: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); na];

    for ((_, frame), sim) in data.frames().zip(&sims) {
        let (gt, pred) = (&frame.gt, &frame.pred);
        let pairs = if gt.is_empty() || pred.is_empty() {
            Vec::new()
        } else {
            let scores: Vec<f64> = (0..gt.len() * pred.len())
                .map(|k| {
                    let (i, j) = (k / pred.len(), k % pred.len());
                    alignment[gt_ids[&gt[i].id] * np + pred_ids[&pred[j].id]] * sim[k]
                })
                .collect();
            let top = scores.iter().copied().fold(0.0f64, f64::max);
            let costs = CostMatrix::new(
                gt.len(),
                pred.len(),
                scores.iter().map(|s| top - s).collect(),
            )
            .expect("finite non-negative costs");
            min_cost_assignment(&costs)
        };
        for (a, &alpha) in alphas.iter().enumerate() {
            let mut n = 0;
            for &(i, j) in &pairs {
                if sim[i * pred.len() + j] >= alpha - EPS {
                    n += 1;
                    *matches[a]
                        .entry((gt_ids[&gt[i].id], pred_ids[&pred[j].id]))
                        .or_default() += 1.0;
                }
            }
            tp[a] += n;
            fn_[a] += gt.len() - n;
            fp[a] += pred.len() - n;
        }
    }

    let mut per_alpha = Vec::with_capacity(na);
    for (a, &alpha) in alphas.iter().enumerate() {
        let deta = tp[a] as f64 / ((tp[a] + fn_[a] + fp[a]).max(1)) as f64;
        let assoc: f64 = matches[a]
            .iter()
            .map(|(&(g, p), &count)| count * count / (gt_count[g] + pred_count[p] - count).max(1.0))
            .sum();
        let assa = assoc / (tp[a].max(1)) as f64;
        per_alpha.push((alpha, (deta * assa).sqrt(), deta, assa));
    }
    let mean = |k: usize| -> f64 {
        if per_alpha.is_empty() {
            return 0.0;
        }
        per_alpha
            .iter()
            .map(|row| match k {
                0 => row.1,
                1 => row.2,
                _ => row.3,
            })
            .sum::<f64>()
            / per_alpha.len() as f64
    };
    HotaMetrics {
        hota: mean(0),
        deta: mean(1),
        assa: mean(2),
        per_alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lb(id: u64, x: f64) -> LabeledBox {
        LabeledBox {
            id,
            bbox: BBox::new(x, 0.0, x + 10.0, 10.0, 1.0).unwrap(),
        }
    }

    fn single_track(n: u32) -> FrameLabels {
        (1..=n)
            .map(|f| (f, vec![lb(1, f64::from(f) * 3.0)]))
            .collect()
    }

    #[test]
    fn perfect_tracking_scores_one() {
        let gt = single_track(10);
        let data = LabeledFrameSet::new(&gt, &gt).unwrap();
        let r = evaluate(&data, &EvalConfig::default());
        assert_eq!(r.mota, 1.0);
        assert_eq!(r.idf1, 1.0);
        assert_eq!(r.hota, 1.0);
        assert_eq!(r.deta, 1.0);
        assert_eq!(r.assa, 1.0);
        assert_eq!(r.id_switches, 0);
        assert_eq!(r.fragmentations, 0);
    }

    #[test]
    fn one_miss_in_ten() {
        let gt = single_track(10);
        let mut pred = gt.clone();
        pred.remove(&4);
        let c = clear_metrics(&LabeledFrameSet::new(&gt, &pred).unwrap(), 0.5);
        assert!((c.mota - 0.9).abs() < 1e-12);
        assert_eq!((c.fn_, c.fp, c.id_switches), (1, 0, 0));
        assert_eq!(c.fragmentations, 1);
    }

    #[test]
    fn single_id_change() {
        let gt = single_track(10);
        let pred: FrameLabels = gt
            .iter()
            .map(|(&f, v)| {
                let id = if f <= 5 { 7 } else { 8 };
                (
                    f,
                    vec![LabeledBox {
                        id,
                        bbox: v[0].bbox,
                    }],
                )
            })
            .collect();
        let c = clear_metrics(&LabeledFrameSet::new(&gt, &pred).unwrap(), 0.5);
        assert_eq!(c.id_switches, 1);
        assert!((c.mota - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_predictions() {
        let gt = single_track(4);
        let data = LabeledFrameSet::new(&gt, &FrameLabels::new()).unwrap();
        let r = evaluate(&data, &EvalConfig::default());
        assert_eq!(r.idf1, 0.0);
        assert_eq!(r.hota, 0.0);
        assert_eq!(r.fn_, 4);
        assert_eq!(r.mota, 0.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut gt = FrameLabels::new();
        gt.insert(1, vec![lb(1, 0.0), lb(1, 50.0)]);
        assert!(LabeledFrameSet::new(&gt, &FrameLabels::new()).is_err());
    }

    #[test]
    fn report_text_keys() {
        let gt = single_track(3);
        let r = evaluate(
            &LabeledFrameSet::new(&gt, &gt).unwrap(),
            &EvalConfig::default(),
        );
        let text = r.to_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split(':').next().unwrap()).collect();
        assert_eq!(
            keys,
            [
                "hota",
                "deta",
                "assa",
                "mota",
                "idf1",
                "id_switches",
                "fragmentations",
                "fp",
                "fn"
            ]
        );
    }
}
