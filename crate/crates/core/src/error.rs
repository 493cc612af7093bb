//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures raised by the core kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A box references an image id that is not part of the dataset.
    #[error("annotation references unknown image id {0}")]
    UnknownImage(i64),
    /// A box references a category id that is not part of the dataset.
    #[error("annotation references unknown category id {0}")]
    UnknownCategory(i64),
    /// Two images share the same id.
    #[error("duplicate image id {0}")]
    DuplicateImage(i64),
    /// Image dimensions must be positive and finite.
    #[error("image {id} has invalid size {width}x{height}")]
    InvalidImageSize {
        /// Image id.
        id: i64,
        /// Width in pixels.
        width: f64,
        /// Height in pixels.
        height: f64,
    },
    /// A parameter lies outside its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// Human readable constraint.
        reason: String,
    },
    /// The generalized centerness formula is undefined on a zero-extent axis.
    #[error("degenerate axis: distances to both edges are zero")]
    DegenerateAxis,
    /// The gradient does not exist at the requested point.
    #[error("loss is not differentiable at p = y for gamma = {gamma}")]
    NonDifferentiable {
        /// Focusing exponent.
        gamma: f64,
    },
    /// Two rasters that must agree in shape do not.
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        /// (channels, height, width) of the left operand.
        left: (usize, usize, usize),
        /// (channels, height, width) of the right operand.
        right: (usize, usize, usize),
    },
    /// Raster data length does not equal channels * height * width.
    #[error("raster holds {actual} values, expected {expected}")]
    DataLength {
        /// Expected number of values.
        expected: usize,
        /// Number of values supplied.
        actual: usize,
    },
    /// A raster value is outside [0, 1] or not finite.
    #[error("raster value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange {
        /// Flat index of the offending value.
        index: usize,
        /// Offending value.
        value: f32,
    },
    /// A cost matrix entry is NaN or infinite.
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost {
        /// Row index.
        row: usize,
        /// Column index.
        col: usize,
    },
    /// A cost matrix row has the wrong number of columns.
    #[error("cost matrix row {row} has {len} entries, expected {expected}")]
    RaggedMatrix {
        /// Row index.
        row: usize,
        /// Entries found.
        len: usize,
        /// Entries expected.
        expected: usize,
    },
    /// An exhaustive oracle was asked to enumerate too many assignments.
    #[error("instance too large for exhaustive search: {size} > {limit}")]
    TooLarge {
        /// Requested size.
        size: usize,
        /// Maximum supported size.
        limit: usize,
    },
    /// An aggregate was requested over an empty input.
    #[error("empty input: {0}")]
    Empty(&'static str),
    /// A heatmap channel has no category attached to it.
    #[error("channel {0} has no category association")]
    MissingChannelCategory(usize),
}
