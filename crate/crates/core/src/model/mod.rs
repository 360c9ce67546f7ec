//! Angular grids, radial mode bases and Schmidt spectra used as ground truth.

pub mod basis;
pub mod grid;
pub mod spectrum;
pub mod tpa;

pub use basis::{build_basis, build_lg_basis, laguerre, ModeBasis, RadialFamily};
pub use grid::{FrameGeometry, PolarGrid};
pub use spectrum::{
    geometric_spectrum, geometric_truncation, product_spectrum, ModeIndex, SchmidtSpectrum,
    SpectrumKind,
};
pub use tpa::evaluate_tpa;
