//! Optimal assignment of predicted centers to ground-truth centers.
//!
//! The pair cost is `lambda * ||P - P̂|| + mu * |gc(P) - score(P̂)|`, with
//! the distance taken on coordinates divided by the image width and height.
//! After the minimum-cost assignment, pairs farther apart (in pixels) than
//! half the diagonal of the ground-truth box are split again.

use alloc::vec;
use alloc::vec::Vec;

use crate::annotations::{BoundingBox, ImageInfo, SizeBand};
use crate::error::{Error, Result};
use crate::numeric::hypot;
use crate::peaks::CenterPoint;

/// Weights of the distance and probability terms of the pair cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCostParams {
    /// Distance weight.
    pub lambda: f64,
    /// Probability-gap weight.
    pub mu: f64,
}

impl Default for MatchCostParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
        }
    }
}

impl MatchCostParams {
    /// Validated constructor: both weights non-negative, not both zero.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let ok = lambda.is_finite() && mu.is_finite() && lambda >= 0.0 && mu >= 0.0;
        if !ok || (lambda == 0.0 && mu == 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda/mu",
                reason: alloc::format!(
                    "weights must be finite, >= 0 and not both 0, got ({lambda}, {mu})"
                ),
            });
        }
        Ok(Self { lambda, mu })
    }
}

/// A ground-truth center with the geometry needed for matching and scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthCenter {
    /// Horizontal image coordinate.
    pub x: f64,
    /// Vertical image coordinate.
    pub y: f64,
    /// Target probability at the point (1 at a box center).
    pub gc: f64,
    /// Distance threshold: half the box diagonal.
    pub d: f64,
    /// Size band of the source box.
    pub band: SizeBand,
    /// Source box, used for the true-positive test.
    pub bbox: BoundingBox,
}

impl GroundTruthCenter {
    /// Center of `bbox` with target probability 1.
    pub fn from_box(bbox: &BoundingBox) -> Self {
        let (x, y) = bbox.center();
        Self {
            x,
            y,
            gc: 1.0,
            d: bbox.diagonal_threshold(),
            band: bbox.size_band(),
            bbox: *bbox,
        }
    }
}

/// Pair cost between a ground-truth and a predicted center.
pub fn match_cost(
    gt: &GroundTruthCenter,
    pred: &CenterPoint,
    params: &MatchCostParams,
    image: &ImageInfo,
) -> f64 {
    let dx = (gt.x - pred.x) / image.width;
    let dy = (gt.y - pred.y) / image.height;
    params.lambda * hypot(dx, dy) + params.mu * (gt.gc - pred.score).abs()
}

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Builds a matrix from rows of equal length, rejecting non-finite entries.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::RaggedMatrix {
                    row: i,
                    len: r.len(),
                    expected: cols,
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Wraps a flat row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCost {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

/// A set of `(row, col)` pairs and their summed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the costs of `pairs`, accumulated in row order.
    pub total: f64,
}

impl Assignment {
    pub(crate) fn from_pairs(cost: &CostMatrix, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let total = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
        Self { pairs, total }
    }
}

/// Minimum-cost assignment of `min(rows, cols)` pairs.
///
/// Shortest augmenting paths with dual potentials, O(n³) in the padded size.
/// Rectangular inputs are padded to square with a constant above every real
/// cost; pairs touching padding are dropped. Rows are inserted in index order,
/// which fixes the tie-breaking.
pub fn hungarian(cost: &CostMatrix) -> Assignment {
    let (g, m) = (cost.rows, cost.cols);
    if g == 0 || m == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    let n = g.max(m);
    let pad = cost.max() + 1.0;
    let at = |i: usize, j: usize| -> f64 {
        if i < g && j < m {
            cost.get(i, j)
        } else {
            pad
        }
    };

    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let pairs = (1..=n)
        .filter_map(|j| {
            let i = owner[j];
            (i >= 1 && i - 1 < g && j - 1 < m).then(|| (i - 1, j - 1))
        })
        .collect();
    Assignment::from_pairs(cost, pairs)
}

/// One matched pair after refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    /// Ground-truth index.
    pub gt: usize,
    /// Prediction index.
    pub pred: usize,
    /// Pair cost.
    pub cost: f64,
    /// Center distance in image pixels.
    pub distance: f64,
}

/// Refined assignment of one (image, category) unit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchSet {
    /// Matched pairs, sorted by ground-truth index.
    pub pairs: Vec<MatchedPair>,
    /// Ground truths without a partner, ascending.
    pub unmatched_gt: Vec<usize>,
    /// Predictions without a partner, ascending.
    pub unmatched_pred: Vec<usize>,
}

/// Builds the pair-cost matrix, ground truths as rows.
pub fn cost_matrix(
    gts: &[GroundTruthCenter],
    preds: &[CenterPoint],
    params: &MatchCostParams,
    image: &ImageInfo,
) -> Result<CostMatrix> {
    let data = gts
        .iter()
        .flat_map(|gt| preds.iter().map(move |p| match_cost(gt, p, params, image)))
        .collect();
    CostMatrix::from_vec(gts.len(), preds.len(), data)
}

/// Pixel distance between a ground-truth center and a prediction.
pub fn pixel_distance(gt: &GroundTruthCenter, pred: &CenterPoint) -> f64 {
    hypot(gt.x - pred.x, gt.y - pred.y)
}

/// Splits an assignment into pairs within each ground truth's threshold and
/// unmatched leftovers.
pub fn refine(
    assignment: &Assignment,
    cost: &CostMatrix,
    gts: &[GroundTruthCenter],
    preds: &[CenterPoint],
) -> MatchSet {
    let mut gt_used = vec![false; gts.len()];
    let mut pred_used = vec![false; preds.len()];
    let mut pairs = Vec::with_capacity(assignment.pairs.len());
    for &(g, p) in &assignment.pairs {
        let distance = pixel_distance(&gts[g], &preds[p]);
        if distance > gts[g].d {
            continue;
        }
        gt_used[g] = true;
        pred_used[p] = true;
        pairs.push(MatchedPair {
            gt: g,
            pred: p,
            cost: cost.get(g, p),
            distance,
        });
    }
    let unused = |flags: &[bool]| {
        flags
            .iter()
            .enumerate()
            .filter_map(|(i, &u)| (!u).then_some(i))
            .collect()
    };
    MatchSet {
        pairs,
        unmatched_gt: unused(&gt_used),
        unmatched_pred: unused(&pred_used),
    }
}

/// Hungarian assignment on the pair costs followed by the distance refinement.
pub fn match_and_refine(
    gts: &[GroundTruthCenter],
    preds: &[CenterPoint],
    params: &MatchCostParams,
    image: &ImageInfo,
) -> Result<MatchSet> {
    let cost = cost_matrix(gts, preds, params, image)?;
    let assignment = hungarian(&cost);
    Ok(refine(&assignment, &cost, gts, preds))
}
