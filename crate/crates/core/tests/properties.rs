use deep_eiou::appearance::{cosine_cost, update_track_feature, Embedding};
use deep_eiou::assignment::{min_cost_assignment, solve, total_cost, CostMatrix};
use deep_eiou::geometry::{eiou, expand, iou, BBox};
use deep_eiou::metrics::{evaluate, EvalConfig, FrameLabels, LabeledBox, LabeledFrameSet};
use deep_eiou::postprocess::{interpolate, Trajectory};
use deep_eiou::tracker::TrackId;
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BBox> {
    (
        -200.0..200.0f64,
        -200.0..200.0f64,
        0.5..80.0f64,
        0.5..80.0f64,
        0.0..=1.0f64,
    )
        .prop_map(|(x, y, w, h, c)| BBox::new(x, y, x + w, y + h, c).unwrap())
}

fn embedding(dim: usize) -> impl Strategy<Value = Embedding> {
    prop::collection::vec(-1.0..1.0f64, dim)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(|v| Embedding::new(v).unwrap())
}

fn cost_matrix(max: usize) -> impl Strategy<Value = CostMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.0..1.0f64, r * c)
            .prop_map(move |data| CostMatrix::new(r, c, data).unwrap())
    })
}

/// Minimum total cost over all maximum-cardinality assignments.
fn brute_force(m: &CostMatrix) -> f64 {
    fn go(m: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == m.rows() {
            *best = best.min(acc);
            return;
        }
        for c in 0..m.cols() {
            if !used[c] {
                used[c] = true;
                go(m, row + 1, used, acc + m.get(row, c), best);
                used[c] = false;
            }
        }
    }
    let t = if m.rows() > m.cols() {
        m.transposed()
    } else {
        m.clone()
    };
    let mut best = f64::INFINITY;
    go(&t, 0, &mut vec![false; t.cols()], 0.0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eiou_symmetric_and_bounded(a in bbox(), b in bbox(), e in -0.5..3.0f64) {
        let ab = eiou(&a, &b, e).unwrap();
        let ba = eiou(&b, &a, e).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((eiou(&a, &a, e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eiou_at_minimum_scale_is_iou(a in bbox(), b in bbox()) {
        prop_assert!((eiou(&a, &b, -0.5).unwrap() - iou(&a, &b)).abs() <= 1e-9);
    }

    #[test]
    fn expansion_keeps_center_and_scales_size(a in bbox(), e in -0.5..3.0f64) {
        let x = expand(&a, e).unwrap();
        let (cx, cy) = a.center();
        let (ex, ey) = x.center();
        prop_assert!((cx - ex).abs() < 1e-9 && (cy - ey).abs() < 1e-9);
        prop_assert!((x.width() - (2.0 * e + 2.0) * a.width()).abs() < 1e-9);
        prop_assert!((x.height() - (2.0 * e + 2.0) * a.height()).abs() < 1e-9);
    }

    #[test]
    fn congruent_boxes_gain_overlap_with_scale(
        a in bbox(), dx in -150.0..150.0f64, dy in -150.0..150.0f64,
        e1 in -0.5..2.0f64, de in 0.0..2.0f64,
    ) {
        let b = a.translated(dx, dy);
        let lo = eiou(&a, &b, e1).unwrap();
        let hi = eiou(&a, &b, e1 + de).unwrap();
        prop_assert!(hi >= lo - 1e-12, "{lo} > {hi}");
    }

    #[test]
    fn cosine_cost_scale_invariant(a in embedding(8), b in embedding(8), k in 0.01..100.0f64) {
        let scaled = Embedding::new(a.as_slice().iter().map(|v| v * k).collect()).unwrap();
        let c1 = cosine_cost(&a, &b).unwrap();
        let c2 = cosine_cost(&scaled, &b).unwrap();
        prop_assert!((c1 - c2).abs() < 1e-9);
        prop_assert!((0.0..=2.0).contains(&c1));
    }

    #[test]
    fn ema_feature_is_unit_norm(a in embedding(8), b in embedding(8), alpha in 0.0..=1.0f64) {
        let f = update_track_feature(&a, &b, alpha).unwrap();
        prop_assert!((f.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn assignment_is_optimal(m in cost_matrix(7)) {
        let pairs = min_cost_assignment(&m);
        prop_assert_eq!(pairs.len(), m.rows().min(m.cols()));
        prop_assert!((total_cost(&m, &pairs) - brute_force(&m)).abs() < 1e-9);
    }

    #[test]
    fn assignment_one_to_one_and_transpose_equivariant(m in cost_matrix(7), reject in 0.0..1.2f64) {
        let r = solve(&m, reject);
        let mut rows: Vec<usize> = r.matches.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = r.matches.iter().map(|p| p.1).collect();
        rows.extend(&r.unmatched_tracks);
        cols.extend(&r.unmatched_detections);
        rows.sort_unstable();
        cols.sort_unstable();
        prop_assert_eq!(rows, (0..m.rows()).collect::<Vec<_>>());
        prop_assert_eq!(cols, (0..m.cols()).collect::<Vec<_>>());
        prop_assert!(r.matches.iter().all(|&(i, j)| m.get(i, j) <= reject));

        let t = min_cost_assignment(&m.transposed());
        let direct = total_cost(&m, &min_cost_assignment(&m));
        prop_assert!((total_cost(&m.transposed(), &t) - direct).abs() < 1e-9);
        prop_assert_eq!(solve(&m, reject), r);
    }

    #[test]
    fn assignment_invariant_to_row_offsets(m in cost_matrix(6), offsets in prop::collection::vec(0.0..5.0f64, 6)) {
        prop_assume!(m.rows() <= m.cols());
        let shifted = CostMatrix::try_from_fn(m.rows(), m.cols(), |i, j| Ok(m.get(i, j) + offsets[i])).unwrap();
        let a = total_cost(&m, &min_cost_assignment(&m));
        let b = total_cost(&m, &min_cost_assignment(&shifted));
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn interpolation_idempotent_and_keeps_observations(
        frames in prop::collection::btree_set(1u32..80, 1..12),
        seed_box in bbox(),
        max_gap in 0u32..30,
    ) {
        let entries: Vec<(u32, BBox)> = frames
            .iter()
            .map(|&f| (f, seed_box.translated(f64::from(f) * 1.5, -f64::from(f))))
            .collect();
        let t = Trajectory::new(TrackId(1), entries.clone()).unwrap();
        let once = interpolate(&t, max_gap);
        prop_assert_eq!(&interpolate(&once, max_gap), &once);
        for e in &entries {
            prop_assert!(once.entries.contains(e));
        }
    }

    #[test]
    fn metrics_invariant_to_relabel_and_translation(
        n_frames in 1u32..12, n_targets in 1usize..5, dx in -50.0..50.0f64, id_shift in 1u64..1000,
    ) {
        let mut gt = FrameLabels::new();
        let mut pred = FrameLabels::new();
        for f in 1..=n_frames {
            let mut g = Vec::new();
            let mut p = Vec::new();
            for k in 0..n_targets {
                let b = BBox::new(k as f64 * 100.0, 0.0, k as f64 * 100.0 + 40.0, 80.0, 1.0).unwrap();
                g.push(LabeledBox { id: k as u64 + 1, bbox: b });
                // second half of the sequence swaps ids of targets 0 and 1
                let pid = if f > n_frames / 2 && k < 2 && n_targets > 1 { 1 - k as u64 } else { k as u64 };
                p.push(LabeledBox { id: pid + 10, bbox: b.translated(2.0, 0.0) });
            }
            gt.insert(f, g);
            pred.insert(f, p);
        }
        let base = evaluate(&LabeledFrameSet::new(&gt, &pred).unwrap(), &EvalConfig::default());

        let moved = |labels: &FrameLabels, shift: u64| -> FrameLabels {
            labels.iter().map(|(f, v)| (*f, v.iter().map(|b| LabeledBox {
                id: b.id + shift, bbox: b.bbox.translated(dx, dx),
            }).collect())).collect()
        };
        let other = evaluate(
            &LabeledFrameSet::new(&moved(&gt, 0), &moved(&pred, id_shift)).unwrap(),
            &EvalConfig::default(),
        );
        prop_assert_eq!(base.id_switches, other.id_switches);
        prop_assert_eq!((base.fp, base.fn_), (other.fp, other.fn_));
        prop_assert!((base.idf1 - other.idf1).abs() < 1e-12);
        prop_assert!((base.hota - other.hota).abs() < 1e-9);
        prop_assert!((base.mota - other.mota).abs() < 1e-12);
    }
}
