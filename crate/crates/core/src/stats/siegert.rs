use crate::error::{Error, Result};
use crate::synth::FrameStack;

/// Minimum number of frames for a g² estimate.
pub const MIN_SIEGERT_FRAMES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiegertEstimate {
    pub pixel: (usize, usize),
    pub mean: f64,
    /// Normalized second moment `⟨I²⟩/⟨I⟩²`.
    pub g2: f64,
    /// Standard error of `g2` from the delta method.
    pub std_error: f64,
}

/// Normalized second moment of the intensity at each requested pixel.
/// Pixels with zero mean are left out.
pub fn siegert_check(stack: &FrameStack, pixels: &[(usize, usize)]) -> Result<Vec<SiegertEstimate>> {
    let g = stack.geometry();
    if stack.len() < MIN_SIEGERT_FRAMES {
        return Err(Error::InsufficientData {
            have: stack.len(),
            need: MIN_SIEGERT_FRAMES,
        });
    }
    if let Some(&(ix, iy)) = pixels.iter().find(|(ix, iy)| *ix >= g.width || *iy >= g.height) {
        return Err(Error::SliceOutside(format!(
            "pixel ({ix}, {iy}) outside the {}x{} frame",
            g.width, g.height
        )));
    }
    let n = stack.len() as f64;
    let mut out = Vec::with_capacity(pixels.len());
    for &(ix, iy) in pixels {
        let samples: Vec<f64> = stack.frames().iter().map(|f| f64::from(f.get(ix, iy))).collect();
        let m1 = samples.iter().sum::<f64>() / n;
        if m1 == 0.0 {
            continue;
        }
        let m2 = samples.iter().map(|v| v * v).sum::<f64>() / n;
        let g2 = m2 / (m1 * m1);
        // Influence of each sample on g2 = m2/m1².
        let psi: Vec<f64> = samples
            .iter()
            .map(|v| (v * v - 2.0 * g2 * m1 * v) / (m1 * m1))
            .collect();
        let pm = psi.iter().sum::<f64>() / n;
        let var = psi.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (n - 1.0);
        out.push(SiegertEstimate {
            pixel: (ix, iy),
            mean: m1,
            g2,
            std_error: (var / n).sqrt(),
        });
    }
    Ok(out)
}
