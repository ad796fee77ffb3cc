//! Construction of (approximately) mutually unbiased bases and selection of
//! the initial learning vector.
//!
//! For prime d the full set of d+1 exact MUBs exists: the computational basis
//! plus d Weyl-Heisenberg bases (the Pauli eigenbases for d = 2). Composite d
//! gets every exact MUB obtainable from tensor products of prime-dimension
//! sets, padded with seeded random orthonormal bases up to d+1; those padded
//! sets are orthonormal but not unbiased, which is all the initializer needs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64};
use crate::measure::MeasurementDevice;
use crate::rng::RngHandle;

/// Whether the initializer bases are a complete exact MUB set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Complete set of d+1 pairwise unbiased bases (prime d).
    ExactMub,
    /// Tensor-product MUBs padded with random orthonormal bases.
    ApproximateMub,
}

/// d+1 orthonormal bases of dimension d used to pick the starting vector.
#[derive(Debug, Clone)]
pub struct BasisSet {
    bases: Vec<Vec<StateVector>>,
    kind: BasisKind,
}

impl BasisSet {
    pub fn count(&self) -> usize {
        self.bases.len()
    }

    pub fn dim(&self) -> usize {
        self.bases[0][0].dim()
    }

    pub fn bases(&self) -> &[Vec<StateVector>] {
        &self.bases
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }
}

/// Builds the d+1 initializer bases for dimension d.
pub fn build_initializer_bases(d: usize) -> Result<BasisSet> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    if is_prime(d) {
        return Ok(BasisSet {
            bases: prime_mub(d),
            kind: BasisKind::ExactMub,
        });
    }
    let factors = prime_factors(d);
    let factor_sets: Vec<Vec<Vec<StateVector>>> = factors.iter().map(|&p| prime_mub(p)).collect();
    let exact_count = factors.iter().map(|&p| p + 1).min().unwrap();
    let mut bases = Vec::with_capacity(d + 1);
    for i in 0..exact_count {
        bases.push(tensor_basis(&factor_sets, i, d));
    }
    let mut pad_rng = RngHandle::with_stream(0x6d75_6221, d as u64).build();
    while bases.len() < d + 1 {
        bases.push(random_orthonormal_basis(d, &mut pad_rng));
    }
    Ok(BasisSet {
        bases,
        kind: BasisKind::ApproximateMub,
    })
}

/// Measures every initializer basis with N copies each and returns the basis
/// state with the highest estimated probability together with the copies
/// consumed. Ties break toward the lowest (basis, vector) index.
pub fn select_initial_vector(
    dev: &mut MeasurementDevice,
    bases: &BasisSet,
) -> Result<(StateVector, u64)> {
    let per_basis = vec![dev.shots(); bases.count()];
    select_with_shots(dev, bases, &per_basis)
}

/// Same, but splitting a fixed total copy budget as evenly as possible across
/// the d+1 basis measurements (remainder to the lowest indices).
pub fn select_initial_vector_with_total(
    dev: &mut MeasurementDevice,
    bases: &BasisSet,
    total: u64,
) -> Result<(StateVector, u64)> {
    let n = bases.count() as u64;
    let base = total / n;
    let rem = (total % n) as usize;
    let per_basis: Vec<u64> = (0..bases.count())
        .map(|i| base + if i < rem { 1 } else { 0 })
        .collect();
    select_with_shots(dev, bases, &per_basis)
}

fn select_with_shots(
    dev: &mut MeasurementDevice,
    bases: &BasisSet,
    per_basis: &[u64],
) -> Result<(StateVector, u64)> {
    if bases.dim() != dev.dim() {
        return Err(Error::DimensionMismatch {
            expected: dev.dim(),
            got: bases.dim(),
        });
    }
    let before = dev.budget();
    let mut best: Option<(f64, &StateVector)> = None;
    for (basis, &shots) in bases.bases().iter().zip(per_basis) {
        let probs = dev.measure_basis_with_shots(basis, shots)?;
        for (p, v) in probs.iter().zip(basis) {
            // strictly-greater comparison keeps the first maximizer on ties
            if best.map_or(true, |(bp, _)| *p > bp) {
                best = Some((*p, v));
            }
        }
    }
    let (_, v) = best.expect("at least one basis");
    Ok((v.clone(), dev.budget() - before))
}

/// Complete MUB set for prime p: computational basis first, then the p
/// Weyl-Heisenberg bases (Pauli eigenbases for p = 2).
fn prime_mub(p: usize) -> Vec<Vec<StateVector>> {
    if p == 2 {
        return qubit_mub();
    }
    let mut bases = Vec::with_capacity(p + 1);
    bases.push((0..p).map(|j| StateVector::basis(p, j)).collect());
    let omega = std::f64::consts::TAU / p as f64;
    let scale = 1.0 / (p as f64).sqrt();
    for a in 0..p {
        let mut basis = Vec::with_capacity(p);
        for b in 0..p {
            let amps = DVector::from_fn(p, |j, _| {
                let phase = omega * ((a * j * j + b * j) % p) as f64;
                C64::new(phase.cos(), phase.sin()) * scale
            });
            basis.push(StateVector::new(amps).expect("unit norm by construction"));
        }
        bases.push(basis);
    }
    bases
}

/// Z, X, Y eigenbases.
fn qubit_mub() -> Vec<Vec<StateVector>> {
    let s = 1.0 / 2f64.sqrt();
    let c = |re: f64, im: f64| C64::new(re, im);
    let v = |a: C64, b: C64| StateVector::from_components(&[a, b]).unwrap();
    vec![
        vec![StateVector::basis(2, 0), StateVector::basis(2, 1)],
        vec![
            v(c(s, 0.0), c(s, 0.0)),
            v(c(s, 0.0), c(-s, 0.0)),
        ],
        vec![
            v(c(s, 0.0), c(0.0, s)),
            v(c(s, 0.0), c(0.0, -s)),
        ],
    ]
}

/// The i-th diagonal tensor-product basis over the prime-factor MUB sets.
fn tensor_basis(factor_sets: &[Vec<Vec<StateVector>>], i: usize, d: usize) -> Vec<StateVector> {
    let mut vectors: Vec<DVector<C64>> = vec![DVector::from_element(1, C64::ONE)];
    for set in factor_sets {
        let basis = &set[i];
        let mut next = Vec::with_capacity(vectors.len() * basis.len());
        for v in &vectors {
            for b in basis {
                let kron = v.kronecker(b.amplitudes());
                next.push(DVector::from_column_slice(kron.as_slice()));
            }
        }
        vectors = next;
    }
    debug_assert_eq!(vectors.len(), d);
    vectors
        .into_iter()
        .map(|v| StateVector::new(v).expect("tensor of unit vectors"))
        .collect()
}

/// Q factor of a complex Ginibre matrix: Haar-distributed orthonormal columns.
fn random_orthonormal_basis(d: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<StateVector> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        use rand_distr::{Distribution, StandardNormal};
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let q = g.qr().q();
    (0..d)
        .map(|j| {
            let col = DVector::from_column_slice(q.column(j).as_slice());
            StateVector::normalized(&col)
                .expect("QR columns are unit norm")
                .canonical_phase()
        })
        .collect()
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= n {
        if n % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while n > 1 {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DensityMatrix;
    use crate::measure::MeasureMode;
    use approx::assert_abs_diff_eq;

    fn orthonormal(basis: &[StateVector]) {
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let ip = a.inner(b).unwrap().norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip, expect, epsilon = 1e-10);
            }
        }
    }

    fn all_overlaps_unbiased(set: &BasisSet) {
        let d = set.dim() as f64;
        for (i, a) in set.bases().iter().enumerate() {
            for b in set.bases().iter().skip(i + 1) {
                for va in a {
                    for vb in b {
                        let overlap = va.inner(vb).unwrap().norm_sqr();
                        assert_abs_diff_eq!(overlap, 1.0 / d, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn qubit_trio_is_exact() {
        let set = build_initializer_bases(2).unwrap();
        assert_eq!(set.count(), 3);
        assert_eq!(set.kind(), BasisKind::ExactMub);
        for basis in set.bases() {
            orthonormal(basis);
        }
        all_overlaps_unbiased(&set);
    }

    #[test]
    fn prime_sets_are_exact() {
        for d in [3usize, 5, 7, 11] {
            let set = build_initializer_bases(d).unwrap();
            assert_eq!(set.count(), d + 1);
            assert_eq!(set.kind(), BasisKind::ExactMub);
            for basis in set.bases() {
                orthonormal(basis);
            }
            all_overlaps_unbiased(&set);
        }
    }

    #[test]
    fn composite_sets_are_orthonormal_and_padded() {
        for d in [4usize, 6, 8, 9, 10, 12] {
            let set = build_initializer_bases(d).unwrap();
            assert_eq!(set.count(), d + 1, "d = {d}");
            assert_eq!(set.kind(), BasisKind::ApproximateMub);
            for basis in set.bases() {
                assert_eq!(basis.len(), d);
                orthonormal(basis);
            }
        }
    }

    #[test]
    fn composite_tensor_heads_stay_unbiased() {
        // the tensor-product bases (before padding) are exact MUBs
        let set = build_initializer_bases(6).unwrap();
        let d = 6.0;
        for i in 0..3 {
            for k in (i + 1)..3 {
                for va in &set.bases()[i] {
                    for vb in &set.bases()[k] {
                        let overlap = va.inner(vb).unwrap().norm_sqr();
                        assert_abs_diff_eq!(overlap, 1.0 / d, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn bases_are_deterministic() {
        let a = build_initializer_bases(6).unwrap();
        let b = build_initializer_bases(6).unwrap();
        for (x, y) in a.bases().iter().zip(b.bases()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn rejects_dimension_one() {
        assert!(build_initializer_bases(1).is_err());
    }

    #[test]
    fn selects_pure_state_basis_vector() {
        let rho = DensityMatrix::from_pure(&StateVector::basis(2, 0));
        let mut dev =
            MeasurementDevice::new(rho, MeasureMode::Exact, 50, 0.0, RngHandle::new(1)).unwrap();
        let set = build_initializer_bases(2).unwrap();
        let (v, copies) = select_initial_vector(&mut dev, &set).unwrap();
        assert!(v.inner(&StateVector::basis(2, 0)).unwrap().norm() > 1.0 - 1e-12);
        assert_eq!(copies, 150); // (d+1) basis measurements at N = 50
        assert_eq!(dev.budget(), 150);
    }

    #[test]
    fn degenerate_tie_breaks_to_first() {
        let rho = DensityMatrix::maximally_mixed(2);
        let mut dev =
            MeasurementDevice::new(rho, MeasureMode::Exact, 10, 0.0, RngHandle::new(1)).unwrap();
        let set = build_initializer_bases(2).unwrap();
        let (v, _) = select_initial_vector(&mut dev, &set).unwrap();
        assert_eq!(&v, &set.bases()[0][0]);
    }

    #[test]
    fn picks_x_basis_winner() {
        // rho = 0.9 |+><+| + 0.1 |-><-|
        let set = build_initializer_bases(2).unwrap();
        let plus = set.bases()[1][0].clone();
        let minus = set.bases()[1][1].clone();
        let rho =
            DensityMatrix::from_mixture(&[0.9, 0.1], &[plus.clone(), minus]).unwrap();
        let mut dev =
            MeasurementDevice::new(rho, MeasureMode::Exact, 10, 0.0, RngHandle::new(1)).unwrap();
        let (v, _) = select_initial_vector(&mut dev, &set).unwrap();
        assert!(v.inner(&plus).unwrap().norm() > 1.0 - 1e-12);
    }

    #[test]
    fn split_total_budget_exactly() {
        let rho = DensityMatrix::maximally_mixed(2);
        let mut dev =
            MeasurementDevice::new(rho, MeasureMode::Shots, 10, 0.0, RngHandle::new(1)).unwrap();
        let set = build_initializer_bases(2).unwrap();
        let (_, copies) = select_initial_vector_with_total(&mut dev, &set, 10_000).unwrap();
        assert_eq!(copies, 10_000);
        assert_eq!(dev.budget(), 10_000);
    }
}
