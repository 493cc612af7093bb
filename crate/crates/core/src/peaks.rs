//! Peak extraction from predicted heatmaps.
//!
//! A cell is a candidate when no cell of its `(2r+1)²` window beats it; on a
//! plateau only the row-major first cell survives because a cell must strictly
//! exceed every neighbour that precedes it in row-major order. Candidates
//! below the probability threshold are dropped, then a greedy pass in
//! descending score order removes candidates closer than `min_distance` grid
//! cells to an already kept one.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::heatmap::Heatmap;

/// Peak extraction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakParams {
    /// Minimum score of a kept peak.
    pub prob_threshold: f64,
    /// Minimum Euclidean distance between kept peaks, in grid cells.
    pub min_distance: f64,
    /// Half-size of the local-maximum window; 1 means 3x3.
    pub window_radius: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            prob_threshold: 0.5,
            min_distance: 3.0,
            window_radius: 1,
        }
    }
}

impl PeakParams {
    /// Validated constructor.
    pub fn new(prob_threshold: f64, min_distance: f64, window_radius: usize) -> Result<Self> {
        if !(prob_threshold >= 0.0 && prob_threshold.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "prob_threshold",
                reason: alloc::format!("must be finite and >= 0, got {prob_threshold}"),
            });
        }
        if !(min_distance >= 0.0 && min_distance.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "min_distance",
                reason: alloc::format!("must be finite and >= 0, got {min_distance}"),
            });
        }
        if window_radius == 0 {
            return Err(Error::InvalidParameter {
                name: "window_radius",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self {
            prob_threshold,
            min_distance,
            window_radius,
        })
    }
}

/// A detected or ground-truth-like center in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterPoint {
    /// Horizontal image coordinate.
    pub x: f64,
    /// Vertical image coordinate.
    pub y: f64,
    /// Predicted probability.
    pub score: f64,
    /// Category label.
    pub category_id: i64,
    /// Owning image.
    pub image_id: i64,
}

/// A peak in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPeak {
    /// Grid row.
    pub row: usize,
    /// Grid column.
    pub col: usize,
    /// Cell value.
    pub score: f32,
}

fn is_local_max(values: &[f32], height: usize, width: usize, i: usize, j: usize, r: usize) -> bool {
    let v = values[i * width + j];
    let (i0, i1) = (i.saturating_sub(r), (i + r).min(height - 1));
    let (j0, j1) = (j.saturating_sub(r), (j + r).min(width - 1));
    for ii in i0..=i1 {
        for jj in j0..=j1 {
            if ii == i && jj == j {
                continue;
            }
            let n = values[ii * width + jj];
            let before = (ii, jj) < (i, j);
            if n > v || (before && n == v) {
                return false;
            }
        }
    }
    true
}

/// Local maxima of one channel, thresholded and distance-suppressed.
///
/// The result is ordered by descending score, ties in row-major order.
pub fn find_peaks(map: &Heatmap, channel: usize, params: &PeakParams) -> Vec<GridPeak> {
    let (height, width) = (map.height(), map.width());
    if height == 0 || width == 0 {
        return Vec::new();
    }
    let values = map.channel(channel);
    let mut candidates: Vec<GridPeak> = Vec::new();
    for i in 0..height {
        for j in 0..width {
            let score = values[i * width + j];
            if (score as f64) < params.prob_threshold {
                continue;
            }
            if is_local_max(values, height, width, i, j, params.window_radius) {
                candidates.push(GridPeak { row: i, col: j, score });
            }
        }
    }
    // stable sort keeps row-major order among equal scores
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));

    let min_sq = params.min_distance * params.min_distance;
    let mut kept: Vec<GridPeak> = Vec::new();
    for c in candidates {
        let close = kept.iter().any(|k| {
            let dy = k.row as f64 - c.row as f64;
            let dx = k.col as f64 - c.col as f64;
            dx * dx + dy * dy < min_sq
        });
        if !close {
            kept.push(c);
        }
    }
    kept
}

/// Converts grid peaks to image-coordinate centers at the cell sample points.
pub fn to_center_points(
    map: &Heatmap,
    peaks: &[GridPeak],
    category_id: i64,
    image_id: i64,
) -> Vec<CenterPoint> {
    peaks
        .iter()
        .map(|p| {
            let (x, y) = map.sample_point(p.row, p.col);
            CenterPoint {
                x,
                y,
                score: p.score as f64,
                category_id,
                image_id,
            }
        })
        .collect()
}

/// Runs [`find_peaks`] on every channel; `categories[c]` labels channel `c`.
///
/// Output is ordered by channel, then descending score.
pub fn peaks_per_class(
    map: &Heatmap,
    categories: &[i64],
    image_id: i64,
    params: &PeakParams,
) -> Result<Vec<CenterPoint>> {
    if categories.len() < map.channels() {
        return Err(Error::MissingChannelCategory(categories.len()));
    }
    let mut out = Vec::new();
    for (c, &category_id) in categories.iter().enumerate().take(map.channels()) {
        let peaks = find_peaks(map, c, params);
        out.extend(to_center_points(map, &peaks, category_id, image_id));
    }
    Ok(out)
}
