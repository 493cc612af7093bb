//! Allocation-only kernels for object center detection.
//!
//! The crate turns bounding boxes into center-probability heatmaps, evaluates
//! continuous focal-style losses and their gradients, extracts peaks from
//! predicted heatmaps, and scores predicted centers against ground truth with
//! optimal assignment and the center alignment score (CAS).
//!
//! Nothing here touches the file system; parsing, raster files and the
//! command-line front end live in the `centerkit` crate.
#![no_std]
#![deny(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod annotations;
pub mod error;
pub mod heatmap;
pub mod loss;
pub mod matching;
pub mod metrics;
pub mod numeric;
pub mod oracle;
pub mod peaks;

pub use annotations::{BoundingBox, Dataset, ImageInfo, SizeBand};
pub use error::{Error, Result};
pub use heatmap::{GcParams, Heatmap};
pub use loss::{BcflParams, LossKernel, LossReport};
pub use matching::{GroundTruthCenter, MatchCostParams, MatchSet};
pub use metrics::{CasReport, UnitScore};
pub use peaks::{CenterPoint, PeakParams};
