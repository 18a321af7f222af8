//! Minimum-cost rectangular assignment (Hungarian method) with post-solve
//! rejection of expensive pairs.

use crate::error::{Error, Result};

/// Weight of the secondary cost in [`solve_with_tiebreak`]. Small enough that
/// it only decides between assignments whose primary totals are equal.
pub const TIEBREAK_WEIGHT: f64 = 1e-6;

/// Dense row-major matrix of non-negative, finite association costs.
/// Rows are tracks, columns are detections.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::Domain(format!(
                "cost entries must be finite and non-negative, found {bad}"
            )));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged cost matrix".into()));
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix from a fallible per-entry cost function.
    pub fn try_from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Result<f64>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c)?);
            }
        }
        CostMatrix::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn transposed(&self) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// Outcome of one assignment: matched pairs plus the rows and columns left
/// over. Every row and every column appears exactly once across the three
/// lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Sum of costs of the given pairs.
pub fn total_cost(costs: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| costs.get(r, c)).sum()
}

/// A minimum-total-cost assignment covering `min(rows, cols)` pairs, sorted
/// by row. No rejection is applied.
pub fn min_cost_assignment(costs: &CostMatrix) -> Vec<(usize, usize)> {
    if costs.is_empty() {
        return Vec::new();
    }
    let mut pairs = if costs.rows <= costs.cols {
        hungarian(costs)
    } else {
        hungarian(&costs.transposed())
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.sort_unstable();
    pairs
}

/// Solves the assignment and strikes every pair whose cost exceeds
/// `reject_above`.
pub fn solve(costs: &CostMatrix, reject_above: f64) -> MatchResult {
    let pairs = min_cost_assignment(costs);
    partition(costs, pairs, reject_above)
}

/// Like [`solve`], but assignments with equal primary cost are ranked by the
/// `secondary` matrix. Rejection uses the primary cost only.
pub fn solve_with_tiebreak(
    primary: &CostMatrix,
    secondary: &CostMatrix,
    reject_above: f64,
) -> Result<MatchResult> {
    if primary.rows != secondary.rows || primary.cols != secondary.cols {
        return Err(Error::DimensionMismatch {
            expected: primary.data.len(),
            found: secondary.data.len(),
        });
    }
    let combined = CostMatrix {
        rows: primary.rows,
        cols: primary.cols,
        data: primary
            .data
            .iter()
            .zip(&secondary.data)
            .map(|(p, s)| p + TIEBREAK_WEIGHT * s)
            .collect(),
    };
    let pairs = min_cost_assignment(&combined);
    Ok(partition(primary, pairs, reject_above))
}

fn partition(costs: &CostMatrix, pairs: Vec<(usize, usize)>, reject_above: f64) -> MatchResult {
    let mut row_used = vec![false; costs.rows];
    let mut col_used = vec![false; costs.cols];
    let mut matches = Vec::with_capacity(pairs.len());
    for (r, c) in pairs {
        if costs.get(r, c) <= reject_above {
            row_used[r] = true;
            col_used[c] = true;
            matches.push((r, c));
        }
    }
    MatchResult {
        matches,
        unmatched_tracks: (0..costs.rows).filter(|&r| !row_used[r]).collect(),
        unmatched_detections: (0..costs.cols).filter(|&c| !col_used[c]).collect(),
    }
}

/// Shortest augmenting path Hungarian method for `rows <= cols`.
///
/// Rows are inserted in index order and, on equal reduced cost, the lowest
/// column index wins, so the result is fully deterministic.
fn hungarian(costs: &CostMatrix) -> Vec<(usize, usize)> {
    let n = costs.rows;
    let m = costs.cols;
    debug_assert!(n <= m);
    // 1-based with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = costs.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m)
        .filter(|&j| row_of[j] != 0)
        .map(|j| (row_of[j] - 1, j - 1))
        .collect()
}
