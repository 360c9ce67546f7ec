//! Streaming intensity covariances over one-dimensional slices of frames.

pub mod accumulator;
pub mod curve;
pub mod siegert;
pub mod slice;

pub use accumulator::{accumulate_parallel, asymmetry, CovarianceAccumulator, PARALLEL_CHUNK};
pub use curve::{antidiagonal_average, fwhm, fwhm_samples, CovarianceCurve};
pub use siegert::{siegert_check, SiegertEstimate, MIN_SIEGERT_FRAMES};
pub use slice::{extract_slice, Interpolation, SliceKind, SliceSampler, SliceSpec};
