//! The simulated measurement device: answers projector-expectation queries
//! exactly or via N-shot sampling, applies the uniform measurement-noise map,
//! and accounts for every consumed state copy.
//!
//! Noise model: a faulty device mixes the outcome distribution toward uniform,
//! p -> (1-lambda) p + lambda/d. For two-outcome rank-1 measurements this is
//! applied to the scalar probability; for full orthonormal-basis measurements
//! the probability vector is multiplied by the doubly stochastic matrix with
//! diagonal 1-lambda+lambda/d and off-diagonal lambda/d. Both views agree with
//! depolarizing the state before a noiseless measurement.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, DensityMatrix, StateVector};
use crate::rng::RngHandle;

/// How expectation queries are answered. Both modes charge the same number of
/// copies per query so budgets stay comparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMode {
    /// Return the exact (noisy) Born probability.
    Exact,
    /// Return k/N with k ~ Binomial(N, p).
    Shots,
}

impl std::fmt::Display for MeasureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasureMode::Exact => write!(f, "exact"),
            MeasureMode::Shots => write!(f, "shots"),
        }
    }
}

impl std::str::FromStr for MeasureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MeasureMode::Exact),
            "shots" => Ok(MeasureMode::Shots),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode `{other}`; expected exact|shots"
            ))),
        }
    }
}

/// Uniform measurement-noise map of strength lambda in dimension d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    lambda: f64,
    d: usize,
}

impl NoiseModel {
    pub fn new(lambda: f64, d: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        Ok(Self { lambda, d })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Outcome probability of a rank-1 projector under the noise map.
    pub fn apply(&self, p: f64) -> f64 {
        (1.0 - self.lambda) * p + self.lambda / self.d as f64
    }

    /// Multiplies a d-outcome probability vector by the doubly stochastic
    /// noise matrix.
    pub fn apply_vector(&self, probs: &[f64]) -> Vec<f64> {
        let total: f64 = probs.iter().sum();
        probs
            .iter()
            .map(|&p| (1.0 - self.lambda) * p + self.lambda * total / self.d as f64)
            .collect()
    }

    /// The doubly stochastic matrix: diagonal 1-lambda+lambda/d, off-diagonal
    /// lambda/d. Rows and columns each sum to 1.
    pub fn stochastic_matrix(&self) -> DMatrix<f64> {
        let off = self.lambda / self.d as f64;
        DMatrix::from_fn(self.d, self.d, |i, j| {
            if i == j {
                1.0 - self.lambda + off
            } else {
                off
            }
        })
    }
}

/// The doubly stochastic outcome-noise matrix for a given model.
pub fn stochastic_matrix(model: &NoiseModel) -> DMatrix<f64> {
    model.stochastic_matrix()
}

/// (1-lambda) rho + lambda I/d.
pub fn depolarize(rho: &DensityMatrix, lambda: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    let d = rho.dim();
    let m = rho.matrix().scale(1.0 - lambda)
        + DMatrix::identity(d, d).scale(lambda / d as f64);
    DensityMatrix::new(hermitian_part(&m))
}

/// Oracle over an unknown state: all information leaves through expectation
/// queries; every query is charged to the copy ledger.
#[derive(Debug, Clone)]
pub struct MeasurementDevice {
    rho: DensityMatrix,
    mode: MeasureMode,
    shots: u64,
    noise: NoiseModel,
    ledger: u64,
    rng: ChaCha8Rng,
}

impl MeasurementDevice {
    /// `shots` is N, the copies consumed per query; in `Exact` mode it is
    /// still charged so exact and sampled runs are budget-comparable.
    pub fn new(
        rho: DensityMatrix,
        mode: MeasureMode,
        shots: u64,
        lambda: f64,
        rng: RngHandle,
    ) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidConfig("shots per query must be >= 1".into()));
        }
        let noise = NoiseModel::new(lambda, rho.dim())?;
        Ok(Self {
            rho,
            mode,
            shots,
            noise,
            ledger: 0,
            rng: rng.build(),
        })
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn mode(&self) -> MeasureMode {
        self.mode
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn noise_lambda(&self) -> f64 {
        self.noise.lambda()
    }

    /// Total copies consumed so far.
    pub fn budget(&self) -> u64 {
        self.ledger
    }

    /// Two-outcome measurement of |phi><phi| at the nominal N.
    pub fn expectation(&mut self, phi: &StateVector) -> Result<f64> {
        self.expectation_with_shots(phi, self.shots)
    }

    /// Two-outcome measurement of |phi><phi| with an explicit copy count.
    /// `shots = 0` consumes nothing and carries no information (returns 0).
    pub fn expectation_with_shots(&mut self, phi: &StateVector, shots: u64) -> Result<f64> {
        if shots == 0 {
            return Ok(0.0);
        }
        let p = self.noise.apply(self.rho.expectation(phi)?);
        self.ledger += shots;
        match self.mode {
            MeasureMode::Exact => Ok(p),
            MeasureMode::Shots => Ok(self.sample_binomial(shots, p) as f64 / shots as f64),
        }
    }

    /// d-outcome measurement in a complete orthonormal basis at the nominal N.
    /// One basis measurement yields estimates for all d projectors from the
    /// same N copies.
    pub fn measure_basis(&mut self, basis: &[StateVector]) -> Result<Vec<f64>> {
        self.measure_basis_with_shots(basis, self.shots)
    }

    pub fn measure_basis_with_shots(
        &mut self,
        basis: &[StateVector],
        shots: u64,
    ) -> Result<Vec<f64>> {
        let d = self.dim();
        if basis.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: basis.len(),
            });
        }
        if shots == 0 {
            return Ok(vec![0.0; d]);
        }
        let mut probs = Vec::with_capacity(d);
        for v in basis {
            probs.push(self.rho.expectation(v)?);
        }
        let noisy = self.noise.apply_vector(&probs);
        self.ledger += shots;
        match self.mode {
            MeasureMode::Exact => Ok(noisy),
            MeasureMode::Shots => {
                let counts = self.sample_multinomial(shots, &noisy);
                Ok(counts.iter().map(|&k| k as f64 / shots as f64).collect())
            }
        }
    }

    fn sample_binomial(&mut self, n: u64, p: f64) -> u64 {
        let p = p.clamp(0.0, 1.0);
        Binomial::new(n, p)
            .expect("clamped probability")
            .sample(&mut self.rng)
    }

    /// Conditional-binomial multinomial sampler.
    fn sample_multinomial(&mut self, n: u64, probs: &[f64]) -> Vec<u64> {
        let mut counts = vec![0u64; probs.len()];
        let mut remaining = n;
        let mut rem_p: f64 = probs.iter().sum();
        for (j, &pj) in probs.iter().enumerate().take(probs.len() - 1) {
            if remaining == 0 {
                break;
            }
            if rem_p <= 0.0 {
                break;
            }
            let cond = (pj / rem_p).clamp(0.0, 1.0);
            let k = self.sample_binomial(remaining, cond);
            counts[j] = k;
            remaining -= k;
            rem_p -= pj;
        }
        *counts.last_mut().unwrap() += remaining;
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{validate_density, C64};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn diag2(a: f64, b: f64) -> DensityMatrix {
        DensityMatrix::new(DMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(if i == 0 { a } else { b }, 0.0)
            } else {
                C64::ZERO
            }
        }))
        .unwrap()
    }

    fn device(rho: DensityMatrix, mode: MeasureMode, shots: u64, lambda: f64) -> MeasurementDevice {
        MeasurementDevice::new(rho, mode, shots, lambda, RngHandle::new(9)).unwrap()
    }

    #[test]
    fn exact_noiseless_expectation() {
        let mut dev = device(diag2(0.8, 0.2), MeasureMode::Exact, 100, 0.0);
        let p = dev.expectation(&StateVector::basis(2, 0)).unwrap();
        assert_abs_diff_eq!(p, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn fully_random_device_returns_uniform() {
        let mut dev = device(diag2(0.8, 0.2), MeasureMode::Exact, 10, 1.0);
        for j in 0..2 {
            let p = dev.expectation(&StateVector::basis(2, j)).unwrap();
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn noise_map_arithmetic() {
        let mut dev = device(diag2(0.9, 0.1), MeasureMode::Exact, 1, 0.2);
        let p = dev.expectation(&StateVector::basis(2, 0)).unwrap();
        assert_abs_diff_eq!(p, 0.82, epsilon = 1e-12);
    }

    #[test]
    fn depolarize_examples() {
        let rho = diag2(1.0, 0.0);
        let same = depolarize(&rho, 0.0).unwrap();
        assert_eq!(same.matrix(), rho.matrix());

        let mixed = depolarize(&rho, 1.0).unwrap();
        assert_abs_diff_eq!(mixed.matrix()[(0, 0)].re, 0.5, epsilon = 1e-12);

        let partial = depolarize(&rho, 0.2).unwrap();
        assert_abs_diff_eq!(partial.matrix()[(0, 0)].re, 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(partial.matrix()[(1, 1)].re, 0.1, epsilon = 1e-12);

        assert!(matches!(
            depolarize(&rho, 1.5),
            Err(Error::InvalidLambda(_))
        ));
    }

    #[test]
    fn noise_views_agree() {
        // rank-1 projector: scalar noise map equals depolarize-then-measure
        let rho = diag2(0.7, 0.3);
        let phi = StateVector::normalized(&nalgebra::DVector::from_column_slice(&[
            C64::new(0.6, 0.2),
            C64::new(0.5, -0.3),
        ]))
        .unwrap();
        for &lambda in &[0.0, 0.2, 0.7, 1.0] {
            let mut dev = device(rho.clone(), MeasureMode::Exact, 1, lambda);
            let a = dev.expectation(&phi).unwrap();
            let b = depolarize(&rho, lambda).unwrap().expectation(&phi).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn stochastic_matrix_examples() {
        let id = NoiseModel::new(0.0, 3).unwrap().stochastic_matrix();
        assert!((id - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-15);

        let flat = NoiseModel::new(1.0, 2).unwrap().stochastic_matrix();
        for v in flat.iter() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-15);
        }

        let m = NoiseModel::new(0.2, 4).unwrap().stochastic_matrix();
        assert_abs_diff_eq!(m[(0, 0)], 0.85, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)], 0.05, epsilon = 1e-15);
        for i in 0..4 {
            assert_abs_diff_eq!(m.row(i).sum(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.column(i).sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ledger_accounting() {
        let mut dev = device(diag2(0.5, 0.5), MeasureMode::Exact, 100, 0.0);
        assert_eq!(dev.budget(), 0);
        dev.expectation(&StateVector::basis(2, 0)).unwrap();
        assert_eq!(dev.budget(), 100);
        dev.expectation_with_shots(&StateVector::basis(2, 1), 7).unwrap();
        assert_eq!(dev.budget(), 107);
        dev.measure_basis(&[StateVector::basis(2, 0), StateVector::basis(2, 1)])
            .unwrap();
        assert_eq!(dev.budget(), 207);
        // zero-shot queries are free and uninformative
        let p = dev.expectation_with_shots(&StateVector::basis(2, 0), 0).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(dev.budget(), 207);
    }

    #[test]
    fn shots_mode_is_an_empirical_frequency() {
        let mut dev = device(diag2(0.5, 0.5), MeasureMode::Shots, 1000, 0.0);
        let f = dev.expectation(&StateVector::basis(2, 0)).unwrap();
        assert!((0.0..=1.0).contains(&f));
        assert_eq!((f * 1000.0).round(), f * 1000.0, "multiple of 1/N");
    }

    #[test]
    fn shots_mode_is_seeded() {
        let run = || {
            let mut dev = device(diag2(0.6, 0.4), MeasureMode::Shots, 500, 0.1);
            (0..10)
                .map(|_| dev.expectation(&StateVector::basis(2, 0)).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn basis_measurement_distributes_all_shots() {
        let rho = diag2(0.3, 0.7);
        let basis = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
        let mut dev = device(rho.clone(), MeasureMode::Exact, 100, 0.2);
        let exact = dev.measure_basis(&basis).unwrap();
        assert_abs_diff_eq!(exact.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(exact[0], 0.34, epsilon = 1e-12);

        let mut dev = device(rho, MeasureMode::Shots, 100, 0.2);
        let freqs = dev.measure_basis(&basis).unwrap();
        assert_abs_diff_eq!(freqs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(dev.budget(), 100);
    }

    #[test]
    fn depolarized_state_stays_valid() {
        let mut rng = RngHandle::new(4).build();
        for _ in 0..20 {
            let rho = crate::rng::ginibre_mixed_state(3, 3, &mut rng).unwrap();
            let dep = depolarize(&rho, 0.35).unwrap();
            assert!(validate_density(dep.matrix()).is_ok());
        }
    }
}
