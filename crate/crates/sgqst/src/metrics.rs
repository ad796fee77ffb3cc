//! Uhlmann fidelity/infidelity between density matrices and the robust
//! summary statistics used on trial ensembles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, hermitian_part, DensityMatrix};

/// (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clamped to [0, 1].
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let root = rho.sqrt();
    let inner = hermitian_part(&(&root * sigma.matrix() * &root));
    let spectrum = hermitian_eig(&inner)?;
    // eigenvalues that are zero up to eigensolver noise must be dropped, not
    // square-rooted: sqrt amplifies 1e-16 dust to 1e-8 per zero eigenvalue
    let trace: f64 = spectrum
        .values()
        .iter()
        .map(|&v| if v > 1e-14 { v.sqrt() } else { 0.0 })
        .sum();
    Ok((trace * trace).clamp(0.0, 1.0))
}

/// 1 - fidelity, clamped to [0, 1]. Zero iff the states coincide.
pub fn infidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok((1.0 - fidelity(rho, sigma)?).clamp(0.0, 1.0))
}

/// Standard median; even-length lists average the middle two values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        Ok(sorted[n / 2])
    } else {
        Ok(0.5 * (sorted[n / 2 - 1] + sorted[n / 2]))
    }
}

/// Linear-interpolation quantiles between order statistics; q = 0.5 agrees
/// with [`median`].
pub fn quantiles(values: &[f64], qs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    for &q in qs {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::QuantileOutOfRange(q));
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    Ok(qs
        .iter()
        .map(|&q| {
            let idx = q * (n - 1) as f64;
            let lo = idx.floor() as usize;
            let hi = idx.ceil() as usize;
            if lo == hi {
                sorted[lo]
            } else {
                let w = idx - lo as f64;
                sorted[lo] * (1.0 - w) + sorted[hi] * w
            }
        })
        .collect())
}

/// One (cumulative iteration, infidelity) instrumentation sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub iteration: u64,
    pub infidelity: f64,
}

/// Everything recorded about one trial of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub checkpoints: Vec<CheckpointRecord>,
    pub final_infidelity: f64,
    pub copies_used: u64,
}
