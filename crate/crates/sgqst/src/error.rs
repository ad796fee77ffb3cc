//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Validation report for a candidate density matrix.
///
/// Produced by [`crate::validate_density`] when at least one of the three
/// defining predicates (Hermitian, unit trace, positive semidefinite) fails;
/// each field carries the measured magnitude so callers can see how far off
/// the input is.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub dim: usize,
    /// Max entrywise |A - A†|. Violated when > 1e-10.
    pub hermiticity_deviation: f64,
    /// |tr(A) - 1|. Violated when > 1e-10.
    pub trace_deviation: f64,
    /// Smallest eigenvalue of the Hermitian part. Violated when < -1e-8.
    pub min_eigenvalue: f64,
}

impl DensityReport {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.hermiticity_deviation > 1e-10 {
            v.push(format!(
                "not Hermitian: max |A - A†| = {:.3e}",
                self.hermiticity_deviation
            ));
        }
        if self.trace_deviation > 1e-10 {
            v.push(format!("trace violation: |tr - 1| = {:.3e}", self.trace_deviation));
        }
        if self.min_eigenvalue < -1e-8 {
            v.push(format!(
                "not PSD: min eigenvalue = {:.6}",
                self.min_eigenvalue
            ));
        }
        v
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }
}

impl std::fmt::Display for DensityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            write!(f, "valid {}x{} density matrix", self.dim, self.dim)
        } else {
            write!(f, "{}", self.violations().join("; "))
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("vector entries must be finite")]
    NonFiniteEntries,

    #[error("matrix is not Hermitian: max |A - A†| = {deviation:.3e}")]
    NonHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(DensityReport),

    #[error("expectation value {value} outside [0, 1] beyond tolerance")]
    InvalidExpectation { value: f64 },

    #[error("rank {rank} out of range for dimension {d}")]
    RankOutOfRange { rank: usize, d: usize },

    #[error("noise strength must lie in [0, 1], got {0}")]
    InvalidLambda(f64),

    #[error("iteration index must be at least 1")]
    ZeroIteration,

    #[error("perturbed state has vanishing norm; resample the perturbation")]
    DegeneratePerturbation,

    #[error("updated state has vanishing norm; skip the iteration")]
    DegenerateUpdate,

    #[error("prior eigenvectors already span the full space")]
    NullspaceExhausted,

    #[error("vector {index} is linearly dependent on its predecessors")]
    DependentVector { index: usize },

    #[error("all raw eigenvalue estimates are zero")]
    AllZeroEigenvalues,

    #[error("empty value list")]
    EmptyValues,

    #[error("quantile {0} outside [0, 1]")]
    QuantileOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown figure preset `{0}`; valid names: fig2, fig3, fig4")]
    UnknownPreset(String),

    #[error("trial {trial} failed: {source}")]
    TrialFailed {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
