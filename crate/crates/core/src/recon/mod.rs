//! Mode weights, shapes and counts reconstructed from intensity covariances.

pub mod count;
pub mod eigen;
pub mod jackknife;
pub mod oam;
pub mod radial;

pub use count::{mode_count, total_mode_count, ModeCountReport};
pub use eigen::symmetric_eigen;
pub use jackknife::{jackknife, JackknifeEstimate};
pub use oam::{
    analytic_oam_at, analytic_oam_avg, circular_dft, oam_spectrum_at, oam_spectrum_avg, OamContext,
    OamSpectrum, ASYMMETRY_LIMIT,
};
pub use radial::{radial_modes, shape_overlap, RadialModeSet, SignConvention, SYMMETRY_TOLERANCE};
