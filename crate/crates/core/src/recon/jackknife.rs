use ndarray::Array2;

use crate::error::{Error, Result};
use crate::num::{count, Real};
use crate::stats::CovarianceAccumulator;

/// Estimate from all frames with its delete-one-block jackknife standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeEstimate<T> {
    pub value: Vec<T>,
    pub std_error: Vec<T>,
}

fn merged<T: Real>(blocks: &[Vec<CovarianceAccumulator<T>>], skip: Option<usize>) -> Result<Vec<Array2<T>>> {
    let slices = blocks[0].len();
    (0..slices)
        .map(|s| {
            let mut acc = CovarianceAccumulator::new(blocks[0][s].dim());
            for (b, block) in blocks.iter().enumerate() {
                if Some(b) != skip {
                    acc = acc.merge(block[s].clone())?;
                }
            }
            acc.finalize()
        })
        .collect()
}

/// Applies `estimator` to the covariances of every slice, once with all
/// frame blocks and once with each block left out.
///
/// `blocks[b][s]` holds the accumulator of slice `s` over frame block `b`.
pub fn jackknife<T, F>(blocks: &[Vec<CovarianceAccumulator<T>>], estimator: F) -> Result<JackknifeEstimate<T>>
where
    T: Real,
    F: Fn(&[Array2<T>]) -> Result<Vec<T>>,
{
    let nb = blocks.len();
    if nb < 2 {
        return Err(Error::InsufficientData { have: nb, need: 2 });
    }
    if blocks.iter().any(|b| b.len() != blocks[0].len()) || blocks[0].is_empty() {
        return Err(Error::Shape("every block needs the same nonempty set of slices".into()));
    }
    let value = estimator(&merged(blocks, None)?)?;
    let partial = (0..nb)
        .map(|b| estimator(&merged(blocks, Some(b))?))
        .collect::<Result<Vec<_>>>()?;
    if partial.iter().any(|p| p.len() != value.len()) {
        return Err(Error::Shape("estimator output length varies between blocks".into()));
    }
    let n = count::<T>(nb);
    let std_error = (0..value.len())
        .map(|k| {
            let mean = partial.iter().map(|p| p[k]).sum::<T>() / n;
            let ss: T = partial.iter().map(|p| (p[k] - mean) * (p[k] - mean)).sum();
            ((n - T::one()) / n * ss).sqrt()
        })
        .collect();
    Ok(JackknifeEstimate { value, std_error })
}
