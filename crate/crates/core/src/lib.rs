pub mod error;
pub mod io;
pub mod model;
pub mod num;
pub mod pipeline;
pub mod recon;
pub mod su11;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

/// Double-precision aliases for the generic types.
pub type Spectrum = model::SchmidtSpectrum<f64>;
pub type Basis = model::ModeBasis<f64>;
pub type Geometry = model::FrameGeometry<f64>;
pub type Interferometer = su11::InterferometerConfig<f64>;
pub type Synth = synth::FieldSynth<f64>;
pub type Accumulator = stats::CovarianceAccumulator<f64>;
pub type Curve = stats::CovarianceCurve<f64>;
pub type Slice = stats::SliceSpec<f64>;
pub type Oam = recon::OamSpectrum<f64>;
pub type RadialModes = recon::RadialModeSet<f64>;
