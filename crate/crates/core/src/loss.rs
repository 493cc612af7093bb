//! Heatmap regression losses.
//!
//! All kernels clamp the predicted probability into `[EPS, 1 - EPS]` before
//! taking logarithms and return non-negative values.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::heatmap::Heatmap;
use crate::numeric::{ln, pairwise_sum, pow};

/// Probability clamp applied before every logarithm.
pub const EPS: f64 = 1e-7;

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Binary cross-entropy against a continuous target, `-[(1-y)ln(1-p) + y ln p]`.
#[inline]
fn cross_entropy(p: f64, y: f64) -> f64 {
    -((1.0 - y) * ln(1.0 - p) + y * ln(p))
}

/// Discrete class label of the classic focal loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// `y = +1`.
    Positive,
    /// `y = -1`.
    Negative,
}

/// α-balanced focal loss `-α_t (1 - p_t)^γ ln p_t`.
pub fn focal_loss(p: f64, label: Label, alpha: f64, gamma: f64) -> f64 {
    let p = clamp_prob(p);
    let (pt, at) = match label {
        Label::Positive => (p, alpha),
        Label::Negative => (1.0 - p, 1.0 - alpha),
    };
    -at * pow(1.0 - pt, gamma) * ln(pt)
}

/// Quality focal loss `-|y - p|^γ [(1-y) ln(1-p) + y ln p]`.
///
/// The modulating factor uses the unclamped `p`, so `p == y` gives exactly 0.
pub fn qfl(p: f64, y: f64, gamma: f64) -> f64 {
    pow((y - p).abs(), gamma) * cross_entropy(clamp_prob(p), y)
}

/// Target-dependent weight `α y + (1 - α)(1 - y)`.
pub fn alpha_c(y: f64, alpha: f64) -> f64 {
    alpha * y + (1.0 - alpha) * (1.0 - y)
}

/// Parameters of the balanced continuous focal loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcflParams {
    /// Weight given to full positives; `1 - alpha` goes to full negatives.
    pub alpha: f64,
    /// Focusing exponent.
    pub gamma: f64,
}

impl Default for BcflParams {
    fn default() -> Self {
        Self {
            alpha: 0.984,
            gamma: 2.0,
        }
    }
}

impl BcflParams {
    /// Validated constructor.
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: alloc::format!("must lie in [0, 1], got {alpha}"),
            });
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: alloc::format!("must be finite and >= 0, got {gamma}"),
            });
        }
        Ok(Self { alpha, gamma })
    }
}

/// Balanced continuous focal loss: `alpha_c(y) * qfl(p, y, gamma)`.
pub fn bcfl(p: f64, y: f64, params: &BcflParams) -> f64 {
    alpha_c(y, params.alpha) * qfl(p, y, params.gamma)
}

/// Analytic derivative of [`bcfl`] with respect to `p`.
///
/// Zero inside the clamp region. At `p == y` the derivative is 0 for
/// `gamma == 0` and `gamma >= 1`; for `0 < gamma < 1` the loss has a cusp there
/// and an error is returned.
pub fn bcfl_grad_p(p: f64, y: f64, params: &BcflParams) -> Result<f64> {
    if p <= EPS || p >= 1.0 - EPS {
        return Ok(0.0);
    }
    let gamma = params.gamma;
    let diff = p - y;
    if diff == 0.0 {
        return if gamma == 0.0 || gamma >= 1.0 {
            Ok(0.0)
        } else {
            Err(Error::NonDifferentiable { gamma })
        };
    }
    let gap = diff.abs();
    let modulating = pow(gap, gamma);
    let d_modulating = if gamma == 0.0 {
        0.0
    } else {
        gamma * pow(gap, gamma - 1.0) * diff.signum()
    };
    let ce = cross_entropy(p, y);
    let d_ce = (1.0 - y) / (1.0 - p) - y / p;
    Ok(alpha_c(y, params.alpha) * (d_modulating * ce + modulating * d_ce))
}

/// Fixed target weighting `pos_weight * y + (1 - y)`.
#[inline]
fn fixed_weight(y: f64, pos_weight: f64) -> f64 {
    pos_weight * y + (1.0 - y)
}

/// Cross-entropy scaled by `pos_weight * y + (1 - y)`.
pub fn weighted_bce(p: f64, y: f64, pos_weight: f64) -> f64 {
    fixed_weight(y, pos_weight) * cross_entropy(clamp_prob(p), y)
}

/// Squared error scaled by `pos_weight * y + (1 - y)`.
pub fn weighted_mse(p: f64, y: f64, pos_weight: f64) -> f64 {
    let p = clamp_prob(p);
    fixed_weight(y, pos_weight) * (p - y) * (p - y)
}

/// Elementwise kernel used by [`reduce_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKernel {
    /// Focal loss; a cell is positive iff its target equals 1.
    Fl,
    /// Quality focal loss.
    Qfl,
    /// Balanced continuous focal loss.
    Bcfl,
    /// Weighted binary cross-entropy.
    Wbce,
    /// Weighted mean squared error.
    Wmse,
}

impl LossKernel {
    /// Name used on the command line and in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            LossKernel::Fl => "fl",
            LossKernel::Qfl => "qfl",
            LossKernel::Bcfl => "bcfl",
            LossKernel::Wbce => "wbce",
            LossKernel::Wmse => "wmse",
        }
    }

    /// Evaluates the kernel on one cell.
    pub fn eval(self, p: f64, y: f64, params: &LossParams) -> f64 {
        match self {
            LossKernel::Fl => {
                let label = if y >= 1.0 {
                    Label::Positive
                } else {
                    Label::Negative
                };
                focal_loss(p, label, params.bcfl.alpha, params.bcfl.gamma)
            }
            LossKernel::Qfl => qfl(p, y, params.bcfl.gamma),
            LossKernel::Bcfl => bcfl(p, y, &params.bcfl),
            LossKernel::Wbce => weighted_bce(p, y, params.pos_weight),
            LossKernel::Wmse => weighted_mse(p, y, params.pos_weight),
        }
    }
}

/// Parameters for every kernel of [`LossKernel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    /// α and γ for FL, QFL (γ only) and BCFL.
    pub bcfl: BcflParams,
    /// Positive weight of the fixed-weight baselines.
    pub pos_weight: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            bcfl: BcflParams::default(),
            pos_weight: 1.0,
        }
    }
}

/// Mean loss over a raster or a batch of rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    /// Mean over every cell of every channel.
    pub total: f64,
    /// Mean per channel.
    pub per_channel: Vec<f64>,
    /// Number of cells contributing to `total`.
    pub cell_count: usize,
}

/// Per-channel pairwise sums of the kernel values of one raster pair.
fn channel_sums(
    pred: &Heatmap,
    target: &Heatmap,
    kernel: LossKernel,
    params: &LossParams,
) -> Result<Vec<f64>> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            left: pred.shape(),
            right: target.shape(),
        });
    }
    let mut scratch = Vec::with_capacity(pred.height() * pred.width());
    Ok((0..pred.channels())
        .map(|c| {
            scratch.clear();
            scratch.extend(
                pred.channel(c)
                    .iter()
                    .zip(target.channel(c))
                    .map(|(&p, &y)| kernel.eval(p as f64, y as f64, params)),
            );
            pairwise_sum(&scratch)
        })
        .collect())
}

/// Mean-reduces `kernel` over two rasters of identical shape.
pub fn reduce_loss(
    pred: &Heatmap,
    target: &Heatmap,
    kernel: LossKernel,
    params: &LossParams,
) -> Result<LossReport> {
    reduce_loss_batch(&[(pred, target)], kernel, params)
}

/// Mean-reduces `kernel` over several raster pairs sharing a channel count.
///
/// Sums are taken per raster and channel, then combined pairwise in input
/// order, so the result depends only on the order of `pairs`.
pub fn reduce_loss_batch(
    pairs: &[(&Heatmap, &Heatmap)],
    kernel: LossKernel,
    params: &LossParams,
) -> Result<LossReport> {
    let (first, _) = pairs.first().ok_or(Error::Empty("no rasters to reduce"))?;
    let channels = first.channels();
    let mut sums: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(pairs.len()); channels];
    let mut cells_per_channel = 0usize;
    for (pred, target) in pairs {
        if pred.channels() != channels {
            return Err(Error::ShapeMismatch {
                left: first.shape(),
                right: pred.shape(),
            });
        }
        for (c, s) in channel_sums(pred, target, kernel, params)?.into_iter().enumerate() {
            sums[c].push(s);
        }
        cells_per_channel += pred.height() * pred.width();
    }
    let channel_totals: Vec<f64> = sums.iter().map(|s| pairwise_sum(s)).collect();
    let cell_count = cells_per_channel * channels;
    let per_channel = channel_totals
        .iter()
        .map(|s| if cells_per_channel == 0 { 0.0 } else { s / cells_per_channel as f64 })
        .collect();
    let total = if cell_count == 0 {
        0.0
    } else {
        pairwise_sum(&channel_totals) / cell_count as f64
    };
    Ok(LossReport {
        total,
        per_channel,
        cell_count,
    })
}

/// Running count of negative cells for α estimation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlphaCount {
    /// Cells with target strictly below the threshold.
    pub negatives: u64,
    /// All cells seen.
    pub cells: u64,
}

impl AlphaCount {
    /// Adds every cell of `map`.
    pub fn add(&mut self, map: &Heatmap, threshold: f64) {
        self.add_values(map.data(), threshold);
    }

    /// Adds raw target values.
    pub fn add_values(&mut self, values: &[f32], threshold: f64) {
        self.cells += values.len() as u64;
        self.negatives += values.iter().filter(|&&v| (v as f64) < threshold).count() as u64;
    }

    /// Combines two counts.
    pub fn merge(self, other: AlphaCount) -> AlphaCount {
        AlphaCount {
            negatives: self.negatives + other.negatives,
            cells: self.cells + other.cells,
        }
    }

    /// Negative-class frequency.
    pub fn alpha(&self) -> Result<f64> {
        if self.cells == 0 {
            return Err(Error::Empty("no cells to estimate alpha from"));
        }
        Ok(self.negatives as f64 / self.cells as f64)
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "threshold",
            reason: alloc::format!("must lie in [0, 1], got {threshold}"),
        })
    }
}

/// Fraction of cells whose target is strictly below `threshold`.
pub fn estimate_alpha(heatmaps: &[Heatmap], threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    heatmaps
        .iter()
        .fold(AlphaCount::default(), |mut acc, m| {
            acc.add(m, threshold);
            acc
        })
        .alpha()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const LN2: f64 = core::f64::consts::LN_2;

    #[test]
    fn focal_loss_examples() {
        assert!(focal_loss(1.0, Label::Positive, 0.25, 2.0) < 1e-12);
        let v = focal_loss(0.5, Label::Positive, 0.25, 2.0);
        assert!((v - 0.25 * 0.25 * LN2).abs() < 1e-15);
        assert!((v - 0.04332).abs() < 1e-5);
        for p in [0.1, 0.4, 0.9] {
            let ce_pos = -ln(p);
            let ce_neg = -ln(1.0 - p);
            assert!((focal_loss(p, Label::Positive, 0.5, 0.0) - 0.5 * ce_pos).abs() < 1e-15);
            assert!((focal_loss(p, Label::Negative, 0.5, 0.0) - 0.5 * ce_neg).abs() < 1e-15);
        }
    }

    #[test]
    fn qfl_examples() {
        assert_eq!(qfl(0.3, 0.3, 2.0), 0.0);
        assert!((qfl(0.5, 0.0, 2.0) - 0.25 * LN2).abs() < 1e-15);
        assert!((qfl(0.5, 0.0, 2.0) - 0.17329).abs() < 1e-5);
        for (p, g) in [(0.2, 1.0), (0.7, 2.5), (0.01, 3.0)] {
            let fl = focal_loss(p, Label::Positive, 1.0, g);
            assert!((qfl(p, 1.0, g) - fl).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_c_examples() {
        assert_eq!(alpha_c(1.0, 0.75), 0.75);
        assert_eq!(alpha_c(0.0, 0.75), 0.25);
        assert_eq!(alpha_c(0.5, 0.75), 0.5);
        for y in [0.0, 0.3, 1.0] {
            assert_eq!(alpha_c(y, 0.5), 0.5);
        }
    }

    #[test]
    fn bcfl_examples() {
        let params = BcflParams::new(0.75, 2.0).unwrap();
        assert_eq!(bcfl(0.5, 0.5, &params), 0.0);
        // 0.65 * 0.04 * 0.59192...
        let ce = -(0.2 * ln(0.4) + 0.8 * ln(0.6));
        let v = bcfl(0.6, 0.8, &params);
        assert!((v - 0.65 * 0.04 * ce).abs() < 1e-15);
        assert!((v - 0.015390).abs() < 1e-6);
        let half = BcflParams::new(0.5, 1.7).unwrap();
        assert!((bcfl(0.3, 0.9, &half) - 0.5 * qfl(0.3, 0.9, 1.7)).abs() < 1e-12);
    }

    #[test]
    fn bcfl_params_validation() {
        assert!(BcflParams::new(1.1, 2.0).is_err());
        assert!(BcflParams::new(0.5, -1.0).is_err());
        assert!(BcflParams::new(0.5, f64::NAN).is_err());
    }

    #[test]
    fn bcfl_grad_at_target() {
        let p = BcflParams::new(0.75, 2.0).unwrap();
        assert_eq!(bcfl_grad_p(0.4, 0.4, &p), Ok(0.0));
        let cusp = BcflParams::new(0.75, 0.5).unwrap();
        assert_eq!(
            bcfl_grad_p(0.4, 0.4, &cusp),
            Err(Error::NonDifferentiable { gamma: 0.5 })
        );
        let flat = BcflParams::new(0.75, 0.0).unwrap();
        assert_eq!(bcfl_grad_p(0.4, 0.4, &flat), Ok(0.0));
    }

    #[test]
    fn bcfl_grad_sign() {
        let p = BcflParams::new(0.75, 2.0).unwrap();
        assert!(bcfl_grad_p(0.5, 0.0, &p).unwrap() > 0.0);
        assert!(bcfl_grad_p(0.5, 1.0, &p).unwrap() < 0.0);
    }

    #[test]
    fn weighted_baselines() {
        assert!((weighted_mse(0.3, 0.8, 1.0) - 0.25).abs() < 1e-15);
        let ce = -(0.2 * ln(0.7) + 0.8 * ln(0.3));
        assert!((weighted_bce(0.3, 0.8, 1.0) - ce).abs() < 1e-15);
        assert!((weighted_bce(0.3, 1.0, 10.0) - 10.0 * weighted_bce(0.3, 1.0, 1.0)).abs() < 1e-12);
        assert!((weighted_mse(0.3, 1.0, 10.0) - 10.0 * weighted_mse(0.3, 1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn reduce_identical_is_zero() {
        let m = Heatmap::from_data(2, 1, 3, 4.0, vec![0.0, 0.2, 1.0, 0.5, 0.9, 0.1]).unwrap();
        let params = LossParams::default();
        for k in [LossKernel::Qfl, LossKernel::Bcfl, LossKernel::Wmse] {
            let r = reduce_loss(&m, &m, k, &params).unwrap();
            assert!(r.total < 1e-12, "{k:?} {}", r.total);
            assert_eq!(r.cell_count, 6);
            assert_eq!(r.per_channel.len(), 2);
        }
    }

    #[test]
    fn reduce_single_cell_and_uniform() {
        let params = LossParams {
            bcfl: BcflParams::new(0.75, 2.0).unwrap(),
            pos_weight: 1.0,
        };
        let p = Heatmap::from_data(1, 1, 1, 4.0, vec![0.6]).unwrap();
        let y = Heatmap::from_data(1, 1, 1, 4.0, vec![0.8]).unwrap();
        let r = reduce_loss(&p, &y, LossKernel::Bcfl, &params).unwrap();
        let scalar = bcfl(0.6f32 as f64, 0.8f32 as f64, &params.bcfl);
        assert_eq!(r.total, scalar);

        let p = Heatmap::from_data(1, 4, 5, 4.0, vec![0.5; 20]).unwrap();
        let y = Heatmap::from_data(1, 4, 5, 4.0, vec![0.8; 20]).unwrap();
        let r = reduce_loss(&p, &y, LossKernel::Bcfl, &params).unwrap();
        // the cross-entropy term at p = 0.5 is ln 2 for any target
        let y32 = 0.8f32 as f64;
        let per_cell = alpha_c(y32, 0.75) * (y32 - 0.5) * (y32 - 0.5) * LN2;
        assert!((r.total - per_cell).abs() < 1e-12);
        assert!((r.total - 0.040548).abs() < 1e-5);
    }

    #[test]
    fn reduce_rejects_shape_mismatch() {
        let a = Heatmap::zeros(1, 2, 2, 4.0).unwrap();
        let b = Heatmap::zeros(1, 2, 3, 4.0).unwrap();
        assert!(reduce_loss(&a, &b, LossKernel::Qfl, &LossParams::default()).is_err());
    }

    #[test]
    fn alpha_estimation() {
        let zeros = Heatmap::zeros(1, 10, 10, 4.0).unwrap();
        assert_eq!(estimate_alpha(&[zeros], 0.6), Ok(1.0));
        let mut data = vec![0.0f32; 100];
        data[3] = 0.6;
        data[40] = 0.9;
        data[41] = 1.0;
        data[99] = 0.61;
        data[50] = 0.59;
        let m = Heatmap::from_data(1, 10, 10, 4.0, data).unwrap();
        assert_eq!(estimate_alpha(&[m], 0.6), Ok(0.96));
        assert!(estimate_alpha(&[], 0.6).is_err());
        let empty = Heatmap::zeros(1, 0, 0, 4.0).unwrap();
        assert!(estimate_alpha(&[empty], 0.6).is_err());
        assert!(estimate_alpha(&[], 1.5).is_err());
    }
}
