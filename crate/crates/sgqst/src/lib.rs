//! Self-guided learning of mixed qudit states.
//!
//! An unknown density matrix hides inside a [`measure::MeasurementDevice`]
//! that answers projector-expectation queries (exactly or with finite-shot
//! binomial sampling, optionally through a uniform measurement-noise map),
//! and the [`learner`] extracts its eigenvectors one at a time with a
//! simultaneous-perturbation stochastic approximation loop, deflating each
//! found eigenvector from the objective. Eigenvalues accumulate from the same
//! measurements, the estimated basis is orthonormalized, and a valid
//! density-matrix estimate is assembled — all at O(d^3) post-processing.
//!
//! The [`experiment`] module runs seeded trial ensembles in parallel and
//! aggregates median/quantile infidelity curves into machine-readable
//! reports; the `sgqst-cli` crate exposes it on the command line and
//! `sgqst-web` drives it from a browser demo.

pub mod error;
pub mod experiment;
pub mod learner;
pub mod linalg;
pub mod measure;
pub mod metrics;
pub mod mub;
pub mod rng;

pub use error::{DensityReport, Error, Result};
pub use learner::{
    learn_state, learn_state_probed, LearnerConfig, NormalizationMode, Probe, TomographyResult,
};
pub use linalg::{
    expectation, hermitian_eig, inner_product, psd_sqrt, validate_density, DensityMatrix,
    RawVector, Spectrum, StateVector, C64,
};
pub use measure::{depolarize, MeasureMode, MeasurementDevice, NoiseModel};
pub use metrics::{infidelity, median, quantiles};
pub use rng::RngHandle;
