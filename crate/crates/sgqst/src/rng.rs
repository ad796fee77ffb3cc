//! Seeded, reproducible random generation: Hilbert-Schmidt (Ginibre) mixed
//! states, Haar-random pure states, and SPSA perturbation vectors.
//!
//! All randomness flows through [`RngHandle`], a (seed, stream) pair mapped
//! onto ChaCha8 streams, so parallel trials get independent sequences that are
//! identical across runs and platforms.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, DensityMatrix, RawVector, StateVector, C64};

/// Identifies one reproducible random stream.
///
/// The same (seed, stream) always yields the same sequence; distinct streams
/// under one seed are independent. Handles are cheap to copy and build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream: u64,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Instantiates the generator positioned at the start of the stream.
    pub fn build(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl Default for RngHandle {
    fn default() -> Self {
        Self::new(0)
    }
}

/// One standard complex Gaussian: independent N(0,1) real and imaginary parts.
fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Draws a d x rank complex Gaussian matrix G and returns GG†/tr(GG†): the
/// Ginibre-induced (Hilbert-Schmidt for rank = d) measure on rank-limited
/// density matrices.
pub fn ginibre_mixed_state<R: Rng>(d: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    if rank == 0 || rank > d {
        return Err(Error::RankOutOfRange { rank, d });
    }
    // column-major fill keeps the draw order stable
    let mut g = DMatrix::from_element(d, rank, C64::ZERO);
    for j in 0..rank {
        for i in 0..d {
            g[(i, j)] = complex_gaussian(rng);
        }
    }
    let a = &g * g.adjoint();
    let trace = a.diagonal().sum().re;
    if trace < 1e-300 {
        // probability zero; draw again rather than divide by zero
        return ginibre_mixed_state(d, rank, rng);
    }
    let m = hermitian_part(&a.unscale(trace));
    Ok(DensityMatrix::new(m)?)
}

/// Normalized vector of i.i.d. complex Gaussians: Haar-distributed on the
/// unit sphere, invariant under any fixed unitary.
pub fn haar_random_pure<R: Rng>(d: usize, rng: &mut R) -> Result<StateVector> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    loop {
        let raw = DVector::from_fn(d, |_, _| complex_gaussian(rng));
        match StateVector::normalized(&raw) {
            Ok(v) => return Ok(v),
            Err(Error::ZeroNorm) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// SPSA perturbation direction: each entry drawn uniformly from
/// {1+i, 1-i, -1+i, -1-i}.
pub fn perturbation_vector<R: Rng>(d: usize, rng: &mut R) -> Result<RawVector> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    let entries = DVector::from_fn(d, |_, _| {
        let re = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let im = if rng.random::<bool>() { 1.0 } else { -1.0 };
        C64::new(re, im)
    });
    RawVector::new(entries)
}

/// A vector of i.i.d. standard complex Gaussian entries.
pub fn random_raw_vector<R: Rng>(d: usize, rng: &mut R) -> Result<RawVector> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    RawVector::new(DVector::from_fn(d, |_, _| complex_gaussian(rng)))
}
