//! Images, boxes and the per-box geometry used by rendering and scoring.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::hypot;

/// Upper bound (exclusive) of the small band: 32² px².
pub const SMALL_AREA_MAX: f64 = 32.0 * 32.0;
/// Upper bound (exclusive) of the medium band: 96² px².
pub const MEDIUM_AREA_MAX: f64 = 96.0 * 96.0;

/// An image entry of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInfo {
    /// Identifier, unique within a dataset.
    pub id: i64,
    /// Width in pixels.
    pub width: f64,
    /// Height in pixels.
    pub height: f64,
    /// Source file name, informational only.
    pub file_name: String,
}

impl ImageInfo {
    /// Builds an image entry, rejecting non-positive or non-finite sizes.
    pub fn new(id: i64, width: f64, height: f64, file_name: impl Into<String>) -> Result<Self> {
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(Error::InvalidImageSize { id, width, height });
        }
        Ok(Self {
            id,
            width,
            height,
            file_name: file_name.into(),
        })
    }
}

/// COCO-style object size band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeBand {
    /// Area below 32².
    Small,
    /// Area in [32², 96²).
    Medium,
    /// Area at least 96².
    Large,
}

impl SizeBand {
    /// All bands in ascending size order.
    pub const ALL: [SizeBand; 3] = [SizeBand::Small, SizeBand::Medium, SizeBand::Large];

    /// Classifies an area in square pixels. Bounds are half-open.
    pub fn from_area(area: f64) -> Self {
        if area < SMALL_AREA_MAX {
            SizeBand::Small
        } else if area < MEDIUM_AREA_MAX {
            SizeBand::Medium
        } else {
            SizeBand::Large
        }
    }

    /// Lower-case name used in reports and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            SizeBand::Small => "small",
            SizeBand::Medium => "medium",
            SizeBand::Large => "large",
        }
    }
}

/// Axis-aligned box in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    /// Left edge.
    pub x: f64,
    /// Top edge.
    pub y: f64,
    /// Width.
    pub w: f64,
    /// Height.
    pub h: f64,
    /// Category label.
    pub category_id: i64,
    /// Owning image.
    pub image_id: i64,
}

impl BoundingBox {
    /// Creates a box; negative extents are collapsed to zero.
    pub fn new(x: f64, y: f64, w: f64, h: f64, category_id: i64, image_id: i64) -> Self {
        Self {
            x,
            y,
            w: w.max(0.0),
            h: h.max(0.0),
            category_id,
            image_id,
        }
    }

    /// Right edge.
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    /// Bottom edge.
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Midpoint of the box.
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Half of the box diagonal, the largest center-to-point distance inside it.
    pub fn diagonal_threshold(&self) -> f64 {
        0.5 * hypot(self.w, self.h)
    }

    /// Area in square pixels.
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Size band of the box area.
    pub fn size_band(&self) -> SizeBand {
        SizeBand::from_area(self.area())
    }

    /// Closed containment test.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    /// Open containment test (strict interior).
    pub fn contains_strictly(&self, px: f64, py: f64) -> bool {
        px > self.x && px < self.right() && py > self.y && py < self.bottom()
    }

    /// Distances `(left, right, top, bottom)` from a point to the four edges.
    pub fn edge_distances(&self, px: f64, py: f64) -> (f64, f64, f64, f64) {
        (px - self.x, self.right() - px, py - self.y, self.bottom() - py)
    }

    /// Clips the box to `[0, width] x [0, height]`.
    ///
    /// A box lying entirely outside the image collapses to a zero-extent box on
    /// the nearest image edge.
    pub fn clamped(&self, image: &ImageInfo) -> Self {
        let x0 = self.x.clamp(0.0, image.width);
        let x1 = self.right().clamp(0.0, image.width).max(x0);
        let y0 = self.y.clamp(0.0, image.height);
        let y1 = self.bottom().clamp(0.0, image.height).max(y0);
        Self {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
            ..*self
        }
    }
}

/// Images, boxes and categories with referential integrity checked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    images: Vec<ImageInfo>,
    boxes: Vec<BoundingBox>,
    categories: BTreeMap<i64, String>,
}

impl Dataset {
    /// Validates references and clamps every box to its image.
    pub fn new(
        images: Vec<ImageInfo>,
        boxes: Vec<BoundingBox>,
        categories: BTreeMap<i64, String>,
    ) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (idx, img) in images.iter().enumerate() {
            if by_id.insert(img.id, idx).is_some() {
                return Err(Error::DuplicateImage(img.id));
            }
        }
        let mut clamped = Vec::with_capacity(boxes.len());
        for b in &boxes {
            let img = by_id
                .get(&b.image_id)
                .map(|&i| &images[i])
                .ok_or(Error::UnknownImage(b.image_id))?;
            if !categories.contains_key(&b.category_id) {
                return Err(Error::UnknownCategory(b.category_id));
            }
            clamped.push(b.clamped(img));
        }
        Ok(Self {
            images,
            boxes: clamped,
            categories,
        })
    }

    /// Images in input order.
    pub fn images(&self) -> &[ImageInfo] {
        &self.images
    }

    /// Clamped boxes in input order.
    pub fn boxes(&self) -> &[BoundingBox] {
        &self.boxes
    }

    /// Category id to name.
    pub fn categories(&self) -> &BTreeMap<i64, String> {
        &self.categories
    }

    /// Category ids in ascending order.
    pub fn category_ids(&self) -> Vec<i64> {
        self.categories.keys().copied().collect()
    }

    /// Looks up an image by id.
    pub fn image(&self, id: i64) -> Option<&ImageInfo> {
        self.images.iter().find(|img| img.id == id)
    }

    /// Boxes of one image, optionally restricted to one category.
    pub fn boxes_for(&self, image_id: i64, category_id: Option<i64>) -> Vec<BoundingBox> {
        self.boxes
            .iter()
            .filter(|b| b.image_id == image_id && category_id.is_none_or(|c| b.category_id == c))
            .copied()
            .collect()
    }

    /// Image ids in ascending order.
    pub fn image_ids(&self) -> BTreeSet<i64> {
        self.images.iter().map(|img| img.id).collect()
    }
}
