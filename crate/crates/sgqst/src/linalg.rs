//! Complex vector/matrix value types and the algebraic predicates the rest of
//! the crate relies on: unit-norm state vectors, validated density matrices,
//! Hermitian eigendecomposition and the PSD matrix square root.
//!
//! Tolerances are fixed for double precision at dimensions up to 64:
//! 1e-10 for norms and traces, 1e-8 for PSD checks and eigendecomposition
//! reconstruction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{DensityReport, Error, Result};

pub type C64 = Complex64;

/// Norm / trace tolerance.
pub const NORM_TOL: f64 = 1e-10;
/// PSD / reconstruction tolerance.
pub const PSD_TOL: f64 = 1e-8;

/// A unit-norm complex vector of dimension d >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Wraps amplitudes that are already unit norm (within 1e-10).
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        check_finite(amps.iter())?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { amps })
    }

    /// Rescales an arbitrary vector to unit norm.
    pub fn normalized(raw: &DVector<C64>) -> Result<Self> {
        check_dim(raw.len())?;
        check_finite(raw.iter())?;
        let norm = raw.norm();
        if norm < 1e-12 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amps: raw.unscale(norm),
        })
    }

    /// The computational basis state |j>.
    pub fn basis(d: usize, j: usize) -> Self {
        assert!(d >= 2 && j < d, "basis index out of range");
        let mut amps = DVector::from_element(d, C64::ZERO);
        amps[j] = C64::ONE;
        Self { amps }
    }

    pub fn from_components(components: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(components))
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    /// <self|other>, conjugating the left argument.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// |self><self| as a dense matrix.
    pub fn outer(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.amps[i] * self.amps[j].conj())
    }

    /// Multiplies by a global phase so the first non-negligible component is
    /// real positive. Physics is phase-invariant; tests are not.
    pub fn canonical_phase(mut self) -> Self {
        let idx = self
            .amps
            .iter()
            .position(|c| c.norm() > 1e-12)
            .unwrap_or(0);
        let c = self.amps[idx];
        let phase = c.conj() / c.norm();
        self.amps *= phase;
        self
    }
}

/// <a|b> with conjugation on the first argument.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.inner(b)
}

/// A complex vector with finite entries and no norm constraint: SPSA
/// perturbations, gradients, and intermediate update vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVector {
    entries: DVector<C64>,
}

impl RawVector {
    pub fn new(entries: DVector<C64>) -> Result<Self> {
        check_dim(entries.len())?;
        check_finite(entries.iter())?;
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &DVector<C64> {
        &self.entries
    }

    pub fn scale(&self, s: f64) -> RawVector {
        Self {
            entries: self.entries.scale(s),
        }
    }
}

/// A d x d Hermitian, PSD, unit-trace complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates all three invariants; see [`validate_density`].
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        validate_density(&m)
    }

    /// I/d.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d).scale(1.0 / d as f64),
        }
    }

    /// |psi><psi|.
    pub fn from_pure(psi: &StateVector) -> Self {
        Self { m: psi.outer() }
    }

    /// Assembles sum_i p_i |v_i><v_i| from non-negative weights and
    /// orthonormal vectors; weights must sum to 1 within tolerance.
    pub fn from_mixture(weights: &[f64], vectors: &[StateVector]) -> Result<Self> {
        assert_eq!(weights.len(), vectors.len());
        let d = vectors.first().map(|v| v.dim()).unwrap_or(0);
        check_dim(d)?;
        let mut m = DMatrix::from_element(d, d, C64::ZERO);
        for (w, v) in weights.iter().zip(vectors) {
            m += v.outer().scale(*w);
        }
        // assembly is Hermitian up to fp noise; make it exact
        let m = hermitian_part(&m);
        validate_density(&m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    /// Born-rule expectation <phi|rho|phi>, clamped to [0, 1].
    pub fn expectation(&self, phi: &StateVector) -> Result<f64> {
        if self.dim() != phi.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: phi.dim(),
            });
        }
        let w = &self.m * phi.amplitudes();
        let p = phi.amplitudes().dotc(&w).re;
        if !(-PSD_TOL..=1.0 + PSD_TOL).contains(&p) {
            return Err(Error::InvalidExpectation { value: p });
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Hermitian PSD square root of the matrix.
    pub fn sqrt(&self) -> DMatrix<C64> {
        psd_sqrt(&self.m).expect("validated density matrix is Hermitian")
    }

}

/// Born-rule expectation.
pub fn expectation(rho: &DensityMatrix, phi: &StateVector) -> Result<f64> {
    rho.expectation(phi)
}

/// Checks the three density-matrix predicates and reports their magnitudes.
pub fn density_report(m: &DMatrix<C64>) -> DensityReport {
    let dim = m.nrows();
    let herm = hermiticity_deviation(m);
    let trace = (m.diagonal().sum().re - 1.0).abs().max(m.diagonal().sum().im.abs());
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    DensityReport {
        dim,
        hermiticity_deviation: herm,
        trace_deviation: trace,
        min_eigenvalue,
    }
}

/// Validates a square complex matrix as a density matrix, or returns a report
/// naming each violated predicate and its magnitude.
pub fn validate_density(m: &DMatrix<C64>) -> Result<DensityMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    check_dim(m.nrows())?;
    check_finite(m.iter())?;
    let report = density_report(m);
    if report.is_valid() {
        Ok(DensityMatrix { m: m.clone() })
    } else {
        Err(Error::InvalidDensity(report))
    }
}

/// A descending eigendecomposition of a Hermitian matrix: real eigenvalues
/// paired with orthonormal, phase-canonicalized eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Vec<StateVector>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>, vectors: Vec<StateVector>) -> Result<Self> {
        if values.is_empty() || values.len() != vectors.len() {
            return Err(Error::InvalidConfig(
                "spectrum needs one eigenvalue per eigenvector".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("eigenvalues must be descending".into()));
        }
        for (i, a) in vectors.iter().enumerate() {
            for b in vectors.iter().skip(i + 1) {
                if a.inner(b)?.norm() > PSD_TOL {
                    return Err(Error::InvalidConfig(
                        "eigenvectors must be orthonormal".into(),
                    ));
                }
            }
        }
        Ok(Self { values, vectors })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    /// sum_i p_i |v_i><v_i|.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = self.vectors[0].dim();
        let mut m = DMatrix::from_element(d, d, C64::ZERO);
        for (p, v) in self.values.iter().zip(&self.vectors) {
            m += v.outer().scale(*p);
        }
        hermitian_part(&m)
    }
}

/// Full descending eigendecomposition of a Hermitian matrix (within 1e-8).
pub fn hermitian_eig(m: &DMatrix<C64>) -> Result<Spectrum> {
    let dev = hermiticity_deviation(m);
    if dev > PSD_TOL {
        return Err(Error::NonHermitian { deviation: dev });
    }
    check_dim(m.nrows())?;
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut values = Vec::with_capacity(d);
    let mut vectors = Vec::with_capacity(d);
    for &i in &order {
        values.push(eig.eigenvalues[i]);
        let col = DVector::from_column_slice(eig.eigenvectors.column(i).as_slice());
        vectors.push(StateVector::normalized(&col)?.canonical_phase());
    }
    Ok(Spectrum { values, vectors })
}

/// Hermitian PSD square root: eigendecompose, clamp negative eigenvalues to
/// zero, take elementwise square roots.
pub fn psd_sqrt(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let spectrum = hermitian_eig(m)?;
    let d = m.nrows();
    let mut out = DMatrix::from_element(d, d, C64::ZERO);
    for (p, v) in spectrum.values().iter().zip(spectrum.vectors()) {
        out += v.outer().scale(p.max(0.0).sqrt());
    }
    Ok(hermitian_part(&out))
}

/// (A + A†)/2.
pub(crate) fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let diff = m - m.adjoint();
    diff.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::DimensionTooSmall(d))
    } else {
        Ok(())
    }
}

fn check_finite<'a>(entries: impl Iterator<Item = &'a C64>) -> Result<()> {
    for c in entries {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFiniteEntries);
        }
    }
    Ok(())
}
