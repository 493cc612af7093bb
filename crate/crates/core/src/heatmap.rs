//! Ground-truth heatmap rendering.
//!
//! Three renderers share one sampling convention: grid cell `(i, j)` is
//! evaluated at image coordinate `((j + 0.5) * stride, (i + 0.5) * stride)`.
//!
//! * [`render_gc`] – generalized centerness, the product of the horizontal and
//!   vertical edge-distance ratios raised to `eta` and `phi`.
//! * [`render_gaussian`] – fixed-sigma Gaussian around each center, measured in
//!   grid cells.
//! * [`render_ellipse`] – quadratic falloff inside the box-inscribed ellipse.
//!
//! Overlapping objects of the same category are merged with a cellwise max.

use alloc::vec;
use alloc::vec::Vec;

use crate::annotations::{BoundingBox, ImageInfo};
use crate::error::{Error, Result};
use crate::numeric::{ceil, exp, floor, pow};

/// Multi-channel probability raster, channel-major and row-major within a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    channels: usize,
    height: usize,
    width: usize,
    stride: f32,
    data: Vec<f32>,
}

fn check_stride(stride: f32) -> Result<()> {
    if stride.is_finite() && stride > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "stride",
            reason: alloc::format!("must be positive and finite, got {stride}"),
        })
    }
}

impl Heatmap {
    /// All-zero raster.
    pub fn zeros(channels: usize, height: usize, width: usize, stride: f32) -> Result<Self> {
        check_stride(stride)?;
        Ok(Self {
            channels,
            height,
            width,
            stride,
            data: vec![0.0; channels * height * width],
        })
    }

    /// Wraps existing values after checking length and range.
    pub fn from_data(
        channels: usize,
        height: usize,
        width: usize,
        stride: f32,
        data: Vec<f32>,
    ) -> Result<Self> {
        check_stride(stride)?;
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::DataLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self {
            channels,
            height,
            width,
            stride,
            data,
        })
    }

    /// Zero raster sized to cover `image` at `stride`.
    pub fn for_image(image: &ImageInfo, channels: usize, stride: f32) -> Result<Self> {
        check_stride(stride)?;
        let (height, width) = grid_size(image, stride);
        Self::zeros(channels, height, width, stride)
    }

    /// Number of channels.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Grid rows.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Grid columns.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Image pixels per grid cell.
    pub fn stride(&self) -> f32 {
        self.stride
    }

    /// `(channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Flat values.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Consumes the raster and returns its values.
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Values of one channel.
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Copies one channel out as a single-channel raster.
    pub fn extract_channel(&self, c: usize) -> Heatmap {
        Heatmap {
            channels: 1,
            height: self.height,
            width: self.width,
            stride: self.stride,
            data: self.channel(c).to_vec(),
        }
    }

    /// Value at `(channel, row, col)`.
    pub fn get(&self, c: usize, i: usize, j: usize) -> f32 {
        self.data[(c * self.height + i) * self.width + j]
    }

    /// Sets a value, clamping it into [0, 1].
    pub fn set(&mut self, c: usize, i: usize, j: usize, value: f32) {
        let idx = (c * self.height + i) * self.width + j;
        self.data[idx] = value.clamp(0.0, 1.0);
    }

    /// Image coordinate of the sample point of cell `(i, j)`.
    pub fn sample_point(&self, i: usize, j: usize) -> (f64, f64) {
        let s = self.stride as f64;
        (sample_coord(j, s), sample_coord(i, s))
    }

    /// Concatenates single- or multi-channel rasters of identical grid along channels.
    pub fn stack(maps: &[Heatmap]) -> Result<Heatmap> {
        let first = maps.first().ok_or(Error::Empty("no rasters to stack"))?;
        let mut data = Vec::with_capacity(maps.iter().map(|m| m.data.len()).sum());
        let mut channels = 0;
        for m in maps {
            if m.height != first.height || m.width != first.width || m.stride != first.stride {
                return Err(Error::ShapeMismatch {
                    left: first.shape(),
                    right: m.shape(),
                });
            }
            channels += m.channels;
            data.extend_from_slice(&m.data);
        }
        Ok(Heatmap {
            channels,
            height: first.height,
            width: first.width,
            stride: first.stride,
            data,
        })
    }

    fn same_layout(&self, other: &Heatmap) -> bool {
        self.shape() == other.shape() && self.stride.to_bits() == other.stride.to_bits()
    }
}

#[inline]
fn sample_coord(index: usize, stride: f64) -> f64 {
    (index as f64 + 0.5) * stride
}

/// Rows and columns needed to cover an image at `stride` (at least one each).
pub fn grid_size(image: &ImageInfo, stride: f32) -> (usize, usize) {
    let s = stride as f64;
    let rows = ceil(image.height / s).max(1.0) as usize;
    let cols = ceil(image.width / s).max(1.0) as usize;
    (rows, cols)
}

/// Shape exponents of generalized centerness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcParams {
    /// Horizontal exponent.
    pub eta: f64,
    /// Vertical exponent.
    pub phi: f64,
}

impl Default for GcParams {
    fn default() -> Self {
        Self { eta: 0.5, phi: 0.5 }
    }
}

impl GcParams {
    /// Validated constructor: both exponents finite and non-negative.
    pub fn new(eta: f64, phi: f64) -> Result<Self> {
        for (name, v) in [("eta", eta), ("phi", phi)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: alloc::format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(Self { eta, phi })
    }
}

/// Generalized centerness from the four edge distances.
///
/// A zero exponent makes its factor 1 for every point, including edge points.
pub fn gc_value(l: f64, r: f64, t: f64, b: f64, params: GcParams) -> Result<f64> {
    if [l, r, t, b].iter().any(|d| d.is_nan() || *d < 0.0 || !d.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "edge distance",
            reason: alloc::format!("distances must be finite and >= 0, got ({l}, {r}, {t}, {b})"),
        });
    }
    if l + r <= 0.0 || t + b <= 0.0 {
        return Err(Error::DegenerateAxis);
    }
    let horizontal = pow(l.min(r) / l.max(r), params.eta);
    let vertical = pow(t.min(b) / t.max(b), params.phi);
    Ok(horizontal * vertical)
}

/// Inclusive range of grid indices whose sample coordinate lies in `[lo, hi]`.
fn covered_indices(lo: f64, hi: f64, stride: f64, len: usize) -> Option<(usize, usize)> {
    if len == 0 || hi < lo {
        return None;
    }
    // (k + 0.5) * s >= lo  <=>  k >= lo / s - 0.5
    let first = ceil(lo / stride - 0.5).max(0.0);
    let last = floor(hi / stride - 0.5).min(len as f64 - 1.0);
    if first > last {
        None
    } else {
        Some((first as usize, last as usize))
    }
}

/// Grid cell whose sample point is nearest to an image coordinate.
pub fn nearest_cell(x: f64, y: f64, stride: f32, height: usize, width: usize) -> (usize, usize) {
    let s = stride as f64;
    let clamp_idx = |v: f64, len: usize| (floor(v / s).max(0.0) as usize).min(len.saturating_sub(1));
    (clamp_idx(y, height), clamp_idx(x, width))
}

/// Renders a single-channel generalized-centerness target for one category.
///
/// Every sample point strictly inside a box receives [`gc_value`] of its edge
/// distances; points on an edge or outside every box receive 0. Overlaps take
/// the maximum. A box with no sample point in its interior marks the cell
/// nearest its center with 1.0.
pub fn render_gc(
    boxes: &[BoundingBox],
    image: &ImageInfo,
    stride: f32,
    params: GcParams,
) -> Result<Heatmap> {
    let mut map = Heatmap::for_image(image, 1, stride)?;
    let (height, width) = (map.height, map.width);
    let s = stride as f64;
    let out = map.channel_mut(0);
    for b in boxes {
        let mut covered = false;
        if let (Some((r0, r1)), Some((c0, c1))) = (
            covered_indices(b.y, b.bottom(), s, height),
            covered_indices(b.x, b.right(), s, width),
        ) {
            for i in r0..=r1 {
                let py = sample_coord(i, s);
                for j in c0..=c1 {
                    let px = sample_coord(j, s);
                    if !b.contains_strictly(px, py) {
                        continue;
                    }
                    covered = true;
                    let (l, r, t, bt) = b.edge_distances(px, py);
                    let v = gc_value(l, r, t, bt, params)? as f32;
                    let cell = &mut out[i * width + j];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
        if !covered {
            let (cx, cy) = b.center();
            let (i, j) = nearest_cell(cx, cy, stride, height, width);
            out[i * width + j] = 1.0;
        }
    }
    Ok(map)
}

/// Renders fixed-sigma Gaussians around centers, `sigma` in grid cells.
pub fn render_gaussian(
    centers: &[(f64, f64)],
    image: &ImageInfo,
    stride: f32,
    sigma: f64,
) -> Result<Heatmap> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: alloc::format!("must be positive, got {sigma}"),
        });
    }
    let mut map = Heatmap::for_image(image, 1, stride)?;
    let (height, width) = (map.height, map.width);
    let s = stride as f64;
    let denom = 2.0 * sigma * sigma;
    let out = map.channel_mut(0);
    for &(cx, cy) in centers {
        // grid position such that cell k sits at k
        let gx = cx / s - 0.5;
        let gy = cy / s - 0.5;
        for i in 0..height {
            let dy = i as f64 - gy;
            for j in 0..width {
                let dx = j as f64 - gx;
                let v = exp(-(dx * dx + dy * dy) / denom) as f32;
                let cell = &mut out[i * width + j];
                if v > *cell {
                    *cell = v;
                }
            }
        }
    }
    Ok(map)
}

/// Renders the quadratic falloff `1 - ((2dx/w)^2 + (2dy/h)^2)` inside each box.
///
/// Boxes that leave every cell at zero (zero extent or smaller than a cell)
/// mark the cell nearest their center with 1.0, as [`render_gc`] does.
pub fn render_ellipse(boxes: &[BoundingBox], image: &ImageInfo, stride: f32) -> Result<Heatmap> {
    let mut map = Heatmap::for_image(image, 1, stride)?;
    let (height, width) = (map.height, map.width);
    let s = stride as f64;
    let out = map.channel_mut(0);
    for b in boxes {
        let (cx, cy) = b.center();
        let mut covered = false;
        if b.w > 0.0 && b.h > 0.0 {
            if let (Some((r0, r1)), Some((c0, c1))) = (
                covered_indices(b.y, b.bottom(), s, height),
                covered_indices(b.x, b.right(), s, width),
            ) {
                for i in r0..=r1 {
                    let ny = 2.0 * (sample_coord(i, s) - cy) / b.h;
                    for j in c0..=c1 {
                        let nx = 2.0 * (sample_coord(j, s) - cx) / b.w;
                        let v = ellipse_value(nx, ny);
                        if v > 0.0 {
                            covered = true;
                            let cell = &mut out[i * width + j];
                            if v as f32 > *cell {
                                *cell = v as f32;
                            }
                        }
                    }
                }
            }
        }
        if !covered {
            let (i, j) = nearest_cell(cx, cy, stride, height, width);
            out[i * width + j] = 1.0;
        }
    }
    Ok(map)
}

/// Quadratic ellipse falloff at normalized offsets (1 at the center, 0 on the rim).
pub fn ellipse_value(nx: f64, ny: f64) -> f64 {
    (1.0 - (nx * nx + ny * ny)).max(0.0)
}

/// Cellwise maximum of two rasters with identical layout.
pub fn merge_max(a: &Heatmap, b: &Heatmap) -> Result<Heatmap> {
    if !a.same_layout(b) {
        return Err(Error::ShapeMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x.max(*y))
        .collect();
    Ok(Heatmap { data, ..a.clone() })
}
