//! The self-guided mixed-state learning algorithm: an SPSA eigenvector loop
//! with nullspace deflation, eigenvalue accumulation, a stopping rule on the
//! accumulated eigenvalue mass, Gram-Schmidt orthonormalization, and
//! eigenvalue finalization into a valid density-matrix estimate.
//!
//! Each eigenvector phase runs K iterations. Iteration k draws a perturbation
//! delta with entries in {±1±i}, measures the two perturbed projectors
//! |eta±><eta±| (N copies each), forms the one-direction gradient estimate
//! ((mu+ - mu-)/2 beta) delta from the deflated values, and updates the
//! unit-norm iterate. The eigenvalue accumulator q sums the *raw* (undeflated)
//! expectations of the same measurements; q_K/(2K) is the eigenvalue estimate.
//! Phases continue while the estimated eigenvalue mass stays <= 1 - epsilon
//! and at most d run in total.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, RawVector, Spectrum, StateVector};
use crate::measure::MeasurementDevice;
use crate::metrics::infidelity;
pub use crate::metrics::CheckpointRecord;
use crate::mub::{
    build_initializer_bases, select_initial_vector, select_initial_vector_with_total, BasisKind,
};
use crate::rng::{perturbation_vector, random_raw_vector, RngHandle};

/// Power-law gain schedule: alpha_k = a/k^0.602 step sizes, beta_k = c/k^0.101
/// perturbation widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub alpha_scale: f64,
    pub alpha_exponent: f64,
    pub beta_scale: f64,
    pub beta_exponent: f64,
}

impl Default for GainSchedule {
    fn default() -> Self {
        Self {
            alpha_scale: 1.0,
            alpha_exponent: 0.602,
            beta_scale: 0.1,
            beta_exponent: 0.101,
        }
    }
}

impl GainSchedule {
    /// (alpha_k, beta_k) for iteration k >= 1.
    pub fn gains(&self, k: u64) -> Result<(f64, f64)> {
        if k == 0 {
            return Err(Error::ZeroIteration);
        }
        let kf = k as f64;
        Ok((
            self.alpha_scale / kf.powf(self.alpha_exponent),
            self.beta_scale / kf.powf(self.beta_exponent),
        ))
    }
}

/// How estimated eigenvalues are normalized into a unit-trace spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Divide every estimate by their sum.
    Standard,
    /// Keep the first estimate as measured (uniform measurement noise pushes
    /// eigenvalues toward 1/d, so the leading eigenvalue is never
    /// overestimated), divide the rest by the total, truncate the spectrum at
    /// the largest prefix with mass <= 1, then renormalize what remains.
    NoiseAware,
}

impl std::fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormalizationMode::Standard => write!(f, "standard"),
            NormalizationMode::NoiseAware => write!(f, "noise-aware"),
        }
    }
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(NormalizationMode::Standard),
            "noise-aware" => Ok(NormalizationMode::NoiseAware),
            other => Err(Error::InvalidConfig(format!(
                "unknown normalization `{other}`; expected standard|noise-aware"
            ))),
        }
    }
}

/// Parameters of one learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Hilbert-space dimension.
    pub d: usize,
    /// Copies consumed per expectation query (N).
    pub shots: u64,
    /// SPSA iterations per eigenvector phase (K).
    pub iterations: u64,
    /// Stopping threshold: phases continue while the estimated eigenvalue
    /// mass is <= 1 - epsilon.
    pub epsilon: f64,
    pub normalization: NormalizationMode,
    /// Random stream for perturbations and nullspace starts.
    pub rng: RngHandle,
    pub gains: GainSchedule,
    /// Optional fixed copy budget for the basis-initialization step, split
    /// evenly across the d+1 basis measurements instead of N per basis.
    pub init_shots_total: Option<u64>,
}

impl LearnerConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            shots: 1000,
            iterations: 300,
            epsilon: 1e-4,
            normalization: NormalizationMode::Standard,
            rng: RngHandle::new(0),
            gains: GainSchedule::default(),
            init_shots_total: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::DimensionTooSmall(self.d));
        }
        if self.shots == 0 {
            return Err(Error::InvalidConfig("shots (N) must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations (K) must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(
                "epsilon must lie strictly between 0 and 1".into(),
            ));
        }
        if self.gains.alpha_scale <= 0.0 || self.gains.beta_scale <= 0.0 {
            return Err(Error::InvalidConfig("gain scales must be positive".into()));
        }
        Ok(())
    }
}

/// One learned eigenpair: the final iterate and the sample-average eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenpairEstimate {
    pub vector: StateVector,
    pub value: f64,
}

/// Output of a full learning run.
#[derive(Debug, Clone)]
pub struct TomographyResult {
    /// The assembled estimate; always a valid density matrix.
    pub rho_hat: DensityMatrix,
    /// Finalized eigenpairs, descending.
    pub spectrum: Spectrum,
    /// Number of retained eigenpairs.
    pub rank: usize,
    /// Copies consumed by this run.
    pub copies_used: u64,
    pub config: LearnerConfig,
    /// Whether the initializer bases were a complete exact MUB set.
    pub basis_kind: BasisKind,
    /// Raw per-phase estimates before orthonormalization and finalization.
    pub raw_estimates: Vec<EigenpairEstimate>,
}

/// Simulation-only instrumentation: the true state plus sorted cumulative
/// iteration indices at which to record the infidelity of a snapshot estimate.
/// The learner itself never reads the truth outside this instrumentation.
#[derive(Debug, Clone, Copy)]
pub struct Probe<'a> {
    pub truth: &'a DensityMatrix,
    pub checkpoints: &'a [u64],
}

/// eta± = normalize(phi ± beta delta).
pub fn perturbed_states(
    phi: &StateVector,
    delta: &RawVector,
    beta: f64,
) -> Result<(StateVector, StateVector)> {
    if phi.dim() != delta.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            got: delta.dim(),
        });
    }
    let step = delta.entries().scale(beta);
    let plus = phi.amplitudes() + &step;
    let minus = phi.amplitudes() - &step;
    match (StateVector::normalized(&plus), StateVector::normalized(&minus)) {
        (Ok(p), Ok(m)) => Ok((p, m)),
        _ => Err(Error::DegeneratePerturbation),
    }
}

/// ((mu+ - mu-) / 2 beta) delta.
pub fn spsa_gradient(mu_plus: f64, mu_minus: f64, beta: f64, delta: &RawVector) -> Result<RawVector> {
    let scale = (mu_plus - mu_minus) / (2.0 * beta);
    RawVector::new(delta.entries().scale(scale))
}

/// normalize(phi + alpha g); a vanishing result signals a skipped iteration.
pub fn spsa_update(phi: &StateVector, gradient: &RawVector, alpha: f64) -> Result<StateVector> {
    if phi.dim() != gradient.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            got: gradient.dim(),
        });
    }
    let y = phi.amplitudes() + gradient.entries().scale(alpha);
    StateVector::normalized(&y).map_err(|_| Error::DegenerateUpdate)
}

/// Raw expectation of |eta><eta| minus the overlap with already-found
/// eigenvectors. The subtraction is classical post-processing; only the single
/// expectation query consumes copies. May be negative.
pub fn deflated_mu(
    dev: &mut MeasurementDevice,
    eta: &StateVector,
    prior: &[StateVector],
) -> Result<f64> {
    let raw = dev.expectation(eta)?;
    deflate(raw, eta, prior)
}

fn deflate(raw: f64, eta: &StateVector, prior: &[StateVector]) -> Result<f64> {
    let mut value = raw;
    for psi in prior {
        value -= eta.inner(psi)?.norm_sqr();
    }
    Ok(value)
}

/// A random unit vector in the orthogonal complement of `prior`.
pub fn nullspace_init<R: Rng>(
    prior: &[StateVector],
    d: usize,
    rng: &mut R,
) -> Result<StateVector> {
    if prior.len() >= d {
        return Err(Error::NullspaceExhausted);
    }
    for _ in 0..1000 {
        let v = random_raw_vector(d, rng)?;
        let mut w = v.entries().clone();
        for psi in prior {
            let overlap = psi.amplitudes().dotc(&w);
            w -= psi.amplitudes().scale(1.0) * overlap;
        }
        if w.norm() >= 1e-8 {
            return StateVector::normalized(&w);
        }
    }
    Err(Error::NullspaceExhausted)
}

/// Modified Gram-Schmidt with positive diagonal: the i-th output has a
/// positive real inner product with the i-th input.
pub fn orthonormalize(vectors: &[StateVector]) -> Result<Vec<StateVector>> {
    let mut out: Vec<StateVector> = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        let mut w = v.amplitudes().clone();
        for u in &out {
            let overlap = u.amplitudes().dotc(&w);
            w -= u.amplitudes().scale(1.0) * overlap;
        }
        if w.norm() < 1e-6 {
            return Err(Error::DependentVector { index: i });
        }
        out.push(StateVector::normalized(&w)?);
    }
    Ok(out)
}

/// Turns raw eigenvalue estimates over an orthonormal basis into a final
/// spectrum. Full rank keeps the sample averages; rank-deficient runs
/// re-measure each retained projector, spending the 2NK(d - r) copies left by
/// the skipped phases, split as evenly as possible. The result is normalized
/// per the configured mode.
pub fn finalize_eigenvalues(
    dev: &mut MeasurementDevice,
    basis: &[StateVector],
    raw_values: &[f64],
    cfg: &LearnerConfig,
) -> Result<Spectrum> {
    let r = basis.len();
    assert_eq!(r, raw_values.len(), "one raw value per basis vector");
    let d = dev.dim();
    let values: Vec<f64> = if r < d {
        let total = 2 * cfg.shots * cfg.iterations * (d - r) as u64;
        let base = total / r as u64;
        let rem = (total % r as u64) as usize;
        let mut measured = Vec::with_capacity(r);
        for (i, v) in basis.iter().enumerate() {
            let m = base + if i < rem { 1 } else { 0 };
            measured.push(dev.expectation_with_shots(v, m)?);
        }
        measured
    } else {
        raw_values.to_vec()
    };
    let (weights, retained) = normalize_values(&values, cfg.normalization)
        .ok_or(Error::AllZeroEigenvalues)?;
    let mut pairs: Vec<(f64, StateVector)> = weights
        .into_iter()
        .zip(basis[..retained].iter().cloned())
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (values, vectors): (Vec<f64>, Vec<StateVector>) = pairs.into_iter().unzip();
    Spectrum::new(values, vectors)
}

/// Normalizes raw eigenvalue estimates to a unit-sum weight list; returns the
/// weights and how many leading entries are retained. `None` when the
/// estimates carry no mass at all.
fn normalize_values(values: &[f64], mode: NormalizationMode) -> Option<(Vec<f64>, usize)> {
    let sum: f64 = values.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    match mode {
        NormalizationMode::Standard => {
            Some((values.iter().map(|v| v / sum).collect(), values.len()))
        }
        NormalizationMode::NoiseAware => {
            let candidates: Vec<f64> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| if i == 0 { v } else { v / sum })
                .collect();
            let mut cumulative = 0.0;
            let mut t = 0;
            for &c in &candidates {
                if cumulative + c <= 1.0 + 1e-9 {
                    cumulative += c;
                    t += 1;
                } else {
                    break;
                }
            }
            let t = t.max(1);
            let retained_sum: f64 = candidates[..t].iter().sum();
            if retained_sum <= 0.0 {
                return None;
            }
            Some((
                candidates[..t].iter().map(|c| c / retained_sum).collect(),
                t,
            ))
        }
    }
}

/// Runs one eigenvector phase: K SPSA iterations against the device with the
/// given deflation set. Consumes exactly 2NK copies.
pub fn learn_eigenvector<R: Rng>(
    dev: &mut MeasurementDevice,
    phi0: &StateVector,
    prior: &[StateVector],
    cfg: &LearnerConfig,
    rng: &mut R,
) -> Result<EigenpairEstimate> {
    learn_eigenvector_inner(dev, phi0, prior, cfg, rng, |_, _, _| {})
}

fn learn_eigenvector_inner<R: Rng>(
    dev: &mut MeasurementDevice,
    phi0: &StateVector,
    prior: &[StateVector],
    cfg: &LearnerConfig,
    rng: &mut R,
    mut on_iteration: impl FnMut(u64, &StateVector, f64),
) -> Result<EigenpairEstimate> {
    let mut phi = phi0.clone();
    let mut q = 0.0;
    for k in 1..=cfg.iterations {
        let (alpha, beta) = cfg.gains.gains(k)?;
        let drawn = draw_perturbation(&phi, beta, cfg.d, rng)?;
        let (eta_plus, eta_minus, delta) = match drawn {
            Some(v) => v,
            None => {
                // perturbation kept collapsing; measure the unperturbed state
                // so the copy budget and the accumulator stay on schedule
                q += dev.expectation_with_shots(&phi, cfg.shots)?;
                q += dev.expectation_with_shots(&phi, cfg.shots)?;
                on_iteration(k, &phi, q / (2.0 * k as f64));
                continue;
            }
        };
        let raw_plus = dev.expectation_with_shots(&eta_plus, cfg.shots)?;
        let raw_minus = dev.expectation_with_shots(&eta_minus, cfg.shots)?;
        // the accumulator uses the raw expectations from the same
        // measurements; deflation only shapes the gradient
        q += raw_plus + raw_minus;
        let mu_plus = deflate(raw_plus, &eta_plus, prior)?;
        let mu_minus = deflate(raw_minus, &eta_minus, prior)?;
        let gradient = spsa_gradient(mu_plus, mu_minus, beta, &delta)?;
        match spsa_update(&phi, &gradient, alpha) {
            Ok(next) => phi = next,
            Err(Error::DegenerateUpdate) => {} // copies spent; keep the iterate
            Err(e) => return Err(e),
        }
        on_iteration(k, &phi, q / (2.0 * k as f64));
    }
    let value = q / (2.0 * cfg.iterations as f64);
    Ok(EigenpairEstimate { vector: phi, value })
}

/// Draws delta and the perturbed pair, resampling delta up to 8 times if the
/// perturbation cancels the state. `None` means the iteration degenerated.
#[allow(clippy::type_complexity)]
fn draw_perturbation<R: Rng>(
    phi: &StateVector,
    beta: f64,
    d: usize,
    rng: &mut R,
) -> Result<Option<(StateVector, StateVector, RawVector)>> {
    for _ in 0..8 {
        let delta = perturbation_vector(d, rng)?;
        match perturbed_states(phi, &delta, beta) {
            Ok((plus, minus)) => return Ok(Some((plus, minus, delta))),
            Err(Error::DegeneratePerturbation) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Runs the full algorithm against the device.
pub fn learn_state(dev: &mut MeasurementDevice, cfg: &LearnerConfig) -> Result<TomographyResult> {
    learn_state_probed(dev, cfg, None).map(|(result, _)| result)
}

/// Like [`learn_state`], recording snapshot infidelities against the supplied
/// truth at the probe's cumulative iteration checkpoints. Checkpoints beyond
/// the executed iterations (after an early stop) record the final estimate.
pub fn learn_state_probed(
    dev: &mut MeasurementDevice,
    cfg: &LearnerConfig,
    probe: Option<Probe<'_>>,
) -> Result<(TomographyResult, Vec<CheckpointRecord>)> {
    cfg.validate()?;
    if dev.dim() != cfg.d {
        return Err(Error::DimensionMismatch {
            expected: cfg.d,
            got: dev.dim(),
        });
    }
    if dev.shots() != cfg.shots {
        return Err(Error::InvalidConfig(format!(
            "device charges {} copies per query but the config says {}",
            dev.shots(),
            cfg.shots
        )));
    }
    let budget_before = dev.budget();
    let bases = build_initializer_bases(cfg.d)?;
    let (phi_start, _) = match cfg.init_shots_total {
        None => select_initial_vector(dev, &bases)?,
        Some(total) => select_initial_vector_with_total(dev, &bases, total)?,
    };
    let mut rng = cfg.rng.build();
    let mut estimates: Vec<EigenpairEstimate> = Vec::new();
    let mut records: Vec<CheckpointRecord> = Vec::new();
    let mut executed: u64 = 0;

    for phase in 0..cfg.d {
        let prior: Vec<StateVector> = estimates.iter().map(|e| e.vector.clone()).collect();
        let prior_values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        let phi0 = if phase == 0 {
            phi_start.clone()
        } else {
            nullspace_init(&prior, cfg.d, &mut rng)?
        };
        let estimate = learn_eigenvector_inner(dev, &phi0, &prior, cfg, &mut rng, |k, phi, value| {
            if let Some(p) = &probe {
                let cumulative = executed + k;
                if p.checkpoints.binary_search(&cumulative).is_ok() {
                    let infid = snapshot_infidelity(
                        p.truth,
                        &prior,
                        &prior_values,
                        phi,
                        value,
                        cfg.normalization,
                    );
                    records.push(CheckpointRecord {
                        iteration: cumulative,
                        infidelity: infid,
                    });
                }
            }
        })?;
        executed += cfg.iterations;
        estimates.push(estimate);
        let mass: f64 = estimates.iter().map(|e| e.value).sum();
        if mass > 1.0 - cfg.epsilon {
            break;
        }
    }

    let vectors: Vec<StateVector> = estimates.iter().map(|e| e.vector.clone()).collect();
    let raw_values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let basis = orthonormalize(&vectors)?;
    let spectrum = finalize_eigenvalues(dev, &basis, &raw_values, cfg)?;
    let rho_hat = DensityMatrix::new(spectrum.reconstruct())?;

    if let Some(p) = &probe {
        let final_infid = infidelity(p.truth, &rho_hat)?;
        for &c in p.checkpoints.iter().filter(|&&c| c > executed) {
            records.push(CheckpointRecord {
                iteration: c,
                infidelity: final_infid,
            });
        }
    }

    let rank = spectrum.len();
    Ok((
        TomographyResult {
            rho_hat,
            spectrum,
            rank,
            copies_used: dev.budget() - budget_before,
            config: cfg.clone(),
            basis_kind: bases.kind(),
            raw_estimates: estimates,
        },
        records,
    ))
}

/// Best-effort estimate assembled mid-run: completed eigenpairs plus the
/// current iterate, orthonormalized and normalized per the active mode.
fn snapshot_infidelity(
    truth: &DensityMatrix,
    prior: &[StateVector],
    prior_values: &[f64],
    current: &StateVector,
    current_value: f64,
    normalization: NormalizationMode,
) -> f64 {
    let mut vectors: Vec<StateVector> = prior.to_vec();
    vectors.push(current.clone());
    let mut values: Vec<f64> = prior_values.to_vec();
    values.push(current_value);
    let basis = match orthonormalize(&vectors) {
        Ok(b) => b,
        Err(_) => {
            // current iterate collapsed onto the prior span; use the prior
            vectors.pop();
            values.pop();
            match orthonormalize(&vectors) {
                Ok(b) => b,
                Err(_) => vec![vectors[0].clone()],
            }
        }
    };
    let values = &values[..basis.len()];
    let weights = match normalize_values(values, normalization) {
        Some((w, t)) => (w, t),
        // no mass yet: fall back to a uniform mixture over the snapshot basis
        None => (vec![1.0 / basis.len() as f64; basis.len()], basis.len()),
    };
    let (weights, retained) = weights;
    let rho = DensityMatrix::from_mixture(&weights, &basis[..retained])
        .expect("snapshot mixture is a valid state");
    infidelity(truth, &rho).expect("snapshot dimensions match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, C64};
    use crate::measure::MeasureMode;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag_state(entries: &[f64]) -> DensityMatrix {
        DensityMatrix::new(DMatrix::from_fn(entries.len(), entries.len(), |i, j| {
            if i == j {
                c(entries[i], 0.0)
            } else {
                C64::ZERO
            }
        }))
        .unwrap()
    }

    fn exact_device(rho: DensityMatrix, shots: u64) -> MeasurementDevice {
        MeasurementDevice::new(rho, MeasureMode::Exact, shots, 0.0, RngHandle::new(5)).unwrap()
    }

    #[test]
    fn gain_closed_forms() {
        let g = GainSchedule::default();
        let (a1, b1) = g.gains(1).unwrap();
        assert_abs_diff_eq!(a1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b1, 0.1, epsilon = 1e-15);

        let (a100, b100) = g.gains(100).unwrap();
        assert_abs_diff_eq!(a100, 0.06252, epsilon = 1e-4);
        assert_abs_diff_eq!(b100, 0.06281, epsilon = 1e-4);

        assert!(matches!(g.gains(0), Err(Error::ZeroIteration)));

        let mut prev = g.gains(1).unwrap();
        for k in 2..50 {
            let cur = g.gains(k).unwrap();
            assert!(cur.0 < prev.0 && cur.1 < prev.1);
            prev = cur;
        }
    }

    #[test]
    fn perturbed_states_arithmetic() {
        let phi = StateVector::basis(2, 0);
        let delta = RawVector::new(DVector::from_column_slice(&[c(1.0, 1.0), c(1.0, 1.0)])).unwrap();
        let (plus, _minus) = perturbed_states(&phi, &delta, 0.1).unwrap();
        // plus = normalize((1.1 + 0.1i, 0.1 + 0.1i))
        let norm = (1.1f64.powi(2) + 0.01 + 0.01 + 0.01).sqrt();
        assert_abs_diff_eq!(plus.amplitudes()[0].re, 1.1 / norm, epsilon = 1e-12);
        assert_abs_diff_eq!(plus.amplitudes()[0].im, 0.1 / norm, epsilon = 1e-12);
        assert_abs_diff_eq!(plus.amplitudes()[1].re, 0.1 / norm, epsilon = 1e-12);
        assert_abs_diff_eq!(plus.amplitudes().norm(), 1.0, epsilon = 1e-12);

        // beta -> 0 limit returns phi itself
        let (p, m) = perturbed_states(&phi, &delta, 1e-14).unwrap();
        assert!(p.inner(&phi).unwrap().norm() > 1.0 - 1e-10);
        assert!(m.inner(&phi).unwrap().norm() > 1.0 - 1e-10);
    }

    #[test]
    fn gradient_examples() {
        let delta =
            RawVector::new(DVector::from_column_slice(&[c(1.0, 1.0), c(-1.0, -1.0)])).unwrap();
        let zero = spsa_gradient(0.5, 0.5, 0.1, &delta).unwrap();
        assert!(zero.entries().norm() < 1e-15);

        let g = spsa_gradient(0.6, 0.4, 0.1, &delta).unwrap();
        assert_abs_diff_eq!(g.entries()[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.entries()[0].im, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.entries()[1].re, -1.0, epsilon = 1e-12);

        let flipped =
            RawVector::new(DVector::from_column_slice(&[c(-1.0, -1.0), c(1.0, 1.0)])).unwrap();
        let g2 = spsa_gradient(0.6, 0.4, 0.1, &flipped).unwrap();
        assert_abs_diff_eq!(g2.entries()[0].re, -g.entries()[0].re, epsilon = 1e-12);
    }

    #[test]
    fn update_examples() {
        let phi = StateVector::basis(2, 0);
        let zero = RawVector::new(DVector::from_column_slice(&[C64::ZERO, C64::ZERO])).unwrap();
        let same = spsa_update(&phi, &zero, 1.0).unwrap();
        assert_eq!(same, phi);

        let g = RawVector::new(DVector::from_column_slice(&[C64::ZERO, C64::ONE])).unwrap();
        let updated = spsa_update(&phi, &g, 1.0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(updated.amplitudes()[0].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(updated.amplitudes()[1].re, s, epsilon = 1e-12);

        // exact cancellation signals a skipped iteration
        let anti = RawVector::new(DVector::from_column_slice(&[-C64::ONE, C64::ZERO])).unwrap();
        assert!(matches!(
            spsa_update(&phi, &anti, 1.0),
            Err(Error::DegenerateUpdate)
        ));
    }

    #[test]
    fn deflation_examples() {
        let rho = diag_state(&[0.9, 0.1]);
        let e0 = StateVector::basis(2, 0);
        let e1 = StateVector::basis(2, 1);

        let mut dev = exact_device(rho.clone(), 10);
        let plain = deflated_mu(&mut dev, &e0, &[]).unwrap();
        assert_abs_diff_eq!(plain, 0.9, epsilon = 1e-12);

        let deflated = deflated_mu(&mut dev, &e0, &[e0.clone()]).unwrap();
        assert_abs_diff_eq!(deflated, -0.1, epsilon = 1e-12);

        let orthogonal = deflated_mu(&mut dev, &e1, &[e0.clone()]).unwrap();
        assert_abs_diff_eq!(orthogonal, 0.1, epsilon = 1e-12);
        assert_eq!(dev.budget(), 30);
    }

    #[test]
    fn nullspace_examples() {
        let mut rng = RngHandle::new(2).build();
        let e0 = StateVector::basis(2, 0);
        let v = nullspace_init(&[e0.clone()], 2, &mut rng).unwrap();
        assert!(v.inner(&e0).unwrap().norm() <= 1e-8);
        assert!(v.inner(&StateVector::basis(2, 1)).unwrap().norm() > 1.0 - 1e-8);

        let free = nullspace_init(&[], 3, &mut rng).unwrap();
        assert_abs_diff_eq!(free.amplitudes().norm(), 1.0, epsilon = 1e-12);

        let prior = [StateVector::basis(4, 0), StateVector::basis(4, 1)];
        let w = nullspace_init(&prior, 4, &mut rng).unwrap();
        assert!(w.inner(&prior[0]).unwrap().norm() <= 1e-8);
        assert!(w.inner(&prior[1]).unwrap().norm() <= 1e-8);
        let tail: f64 = w.amplitudes()[2].norm_sqr() + w.amplitudes()[3].norm_sqr();
        assert_abs_diff_eq!(tail, 1.0, epsilon = 1e-12);

        let full = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
        assert!(matches!(
            nullspace_init(&full, 2, &mut rng),
            Err(Error::NullspaceExhausted)
        ));
    }

    #[test]
    fn orthonormalize_examples() {
        let e0 = StateVector::basis(2, 0);
        let e1 = StateVector::basis(2, 1);
        let out = orthonormalize(&[e0.clone(), e1.clone()]).unwrap();
        assert!(out[0].inner(&e0).unwrap().norm() > 1.0 - 1e-10);
        assert!(out[1].inner(&e1).unwrap().norm() > 1.0 - 1e-10);

        let s = 1.0 / 2f64.sqrt();
        let mixed = StateVector::from_components(&[c(s, 0.0), c(s, 0.0)]).unwrap();
        let out = orthonormalize(&[e0.clone(), mixed.clone()]).unwrap();
        assert!(out[1].inner(&e1).unwrap().norm() > 1.0 - 1e-10);

        // Gram matrix is the identity; diagonal of R is positive
        for (i, a) in out.iter().enumerate() {
            for (j, b) in out.iter().enumerate() {
                let ip = a.inner(b).unwrap().norm();
                assert_abs_diff_eq!(ip, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
        let inputs = [e0.clone(), mixed];
        for (o, i) in out.iter().zip(&inputs) {
            let ip = o.inner(i).unwrap();
            assert!(ip.re > 0.0 && ip.im.abs() < 1e-12);
        }

        let dup = orthonormalize(&[e0.clone(), e0.clone()]);
        assert!(matches!(dup, Err(Error::DependentVector { index: 1 })));
    }

    #[test]
    fn finalize_full_rank_normalizes() {
        let mut dev = exact_device(diag_state(&[0.5, 0.5]), 10);
        let basis = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
        let cfg = LearnerConfig::new(2);
        let s = finalize_eigenvalues(&mut dev, &basis, &[0.6, 0.6], &cfg).unwrap();
        assert_eq!(s.values(), &[0.5, 0.5]);
        assert_eq!(dev.budget(), 0, "full rank consumes nothing extra");

        let mut dev = exact_device(diag_state(&[0.6, 0.3, 0.1]), 10);
        let basis3 = [
            StateVector::basis(3, 0),
            StateVector::basis(3, 1),
            StateVector::basis(3, 2),
        ];
        let cfg = LearnerConfig::new(3);
        let s = finalize_eigenvalues(&mut dev, &basis3, &[0.6, 0.3, 0.1], &cfg).unwrap();
        for (a, b) in s.values().iter().zip(&[0.6, 0.3, 0.1]) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn finalize_noise_aware_truncates() {
        let mut dev = exact_device(diag_state(&[0.5, 0.5]), 10);
        let basis = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
        let mut cfg = LearnerConfig::new(2);
        cfg.normalization = NormalizationMode::NoiseAware;
        // S = 1.2; candidates (0.6, 0.5); prefix sums 0.6, 1.1 -> keep one
        let s = finalize_eigenvalues(&mut dev, &basis, &[0.6, 0.6], &cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(s.values()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn finalize_rank_deficient_remeasures() {
        // d = 3, r = 1: the skipped phases leave 2NK(d - r) copies
        let mut cfg = LearnerConfig::new(3);
        cfg.shots = 10;
        cfg.iterations = 5;
        let mut dev = MeasurementDevice::new(
            diag_state(&[1.0, 0.0, 0.0]),
            MeasureMode::Exact,
            10,
            0.0,
            RngHandle::new(1),
        )
        .unwrap();
        let basis = [StateVector::basis(3, 0)];
        let s = finalize_eigenvalues(&mut dev, &basis, &[0.97], &cfg).unwrap();
        assert_eq!(dev.budget(), 2 * 10 * 5 * 2);
        assert_abs_diff_eq!(s.values()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn finalize_rejects_zero_mass() {
        let mut dev = exact_device(diag_state(&[0.5, 0.5]), 10);
        let basis = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
        let cfg = LearnerConfig::new(2);
        assert!(matches!(
            finalize_eigenvalues(&mut dev, &basis, &[0.0, 0.0], &cfg),
            Err(Error::AllZeroEigenvalues)
        ));
    }

    #[test]
    fn isotropic_state_has_flat_accumulator() {
        let mut cfg = LearnerConfig::new(2);
        cfg.shots = 1;
        cfg.iterations = 50;
        let mut dev = exact_device(DensityMatrix::maximally_mixed(2), 1);
        let mut rng = RngHandle::new(3).build();
        let est =
            learn_eigenvector(&mut dev, &StateVector::basis(2, 0), &[], &cfg, &mut rng).unwrap();
        assert_abs_diff_eq!(est.value, 0.5, epsilon = 1e-12);
        assert_eq!(dev.budget(), 2 * 50);
    }

    #[test]
    fn finds_dominant_eigenvector() {
        let rho = diag_state(&[0.9, 0.1]);
        let truth = hermitian_eig(rho.matrix()).unwrap();
        let mut cfg = LearnerConfig::new(2);
        cfg.shots = 1;
        cfg.iterations = 500;
        let mut dev = exact_device(rho, 1);
        let mut rng = RngHandle::new(7).build();
        let start = StateVector::normalized(&DVector::from_column_slice(&[
            c(0.8, 0.0),
            c(0.6, 0.0),
        ]))
        .unwrap();
        let est = learn_eigenvector(&mut dev, &start, &[], &cfg, &mut rng).unwrap();
        let fidelity = est.vector.inner(&truth.vectors()[0]).unwrap().norm_sqr();
        assert!(fidelity >= 0.99, "fidelity {fidelity}");
        assert_eq!(dev.budget(), 2 * 500);
    }

    #[test]
    fn deflated_phase_finds_second_eigenvector() {
        let rho = diag_state(&[0.6, 0.3, 0.1]);
        let mut cfg = LearnerConfig::new(3);
        cfg.shots = 1;
        cfg.iterations = 2000;
        let mut dev = exact_device(rho, 1);
        let mut rng = RngHandle::new(11).build();
        let prior = [StateVector::basis(3, 0)];
        let start = nullspace_init(&prior, 3, &mut rng).unwrap();
        let est = learn_eigenvector(&mut dev, &start, &prior, &cfg, &mut rng).unwrap();
        let fidelity = est
            .vector
            .inner(&StateVector::basis(3, 1))
            .unwrap()
            .norm_sqr();
        assert!(fidelity >= 0.99, "fidelity {fidelity}");
    }

    #[test]
    fn accumulator_tracks_eigenvalue_with_frozen_iterate() {
        // zero learning rate pins the iterate at the exact eigenvector; the
        // remaining error is the O(beta^2) perturbation bias
        let rho = diag_state(&[0.9, 0.1]);
        let mut cfg = LearnerConfig::new(2);
        cfg.shots = 1;
        cfg.iterations = 1000;
        cfg.gains.alpha_scale = 0.0;
        let mut dev = exact_device(rho, 1);
        let mut rng = RngHandle::new(13).build();
        let est =
            learn_eigenvector(&mut dev, &StateVector::basis(2, 0), &[], &cfg, &mut rng).unwrap();
        assert!((est.value - 0.9).abs() <= 0.01, "value {}", est.value);
    }

    #[test]
    fn learn_state_on_maximally_mixed_qubit() {
        let mut cfg = LearnerConfig::new(2);
        cfg.shots = 1;
        cfg.iterations = 100;
        let mut dev = exact_device(DensityMatrix::maximally_mixed(2), 1);
        let result = learn_state(&mut dev, &cfg).unwrap();
        assert_eq!(result.rank, 2);
        let diff = result.rho_hat.matrix() - DensityMatrix::maximally_mixed(2).matrix();
        assert!(diff.norm() < 1e-6, "deviation {}", diff.norm());
    }

    #[test]
    fn full_rank_budget_matches_closed_form() {
        let (n, k) = (100u64, 10u64);
        let mut cfg = LearnerConfig::new(2);
        cfg.shots = n;
        cfg.iterations = k;
        let rho = diag_state(&[0.6, 0.4]);
        let mut dev =
            MeasurementDevice::new(rho, MeasureMode::Exact, n, 0.0, RngHandle::new(5)).unwrap();
        let result = learn_state(&mut dev, &cfg).unwrap();
        assert_eq!(result.rank, 2);
        assert_eq!(result.copies_used, n * (2 * (2 * k + 1) + 1)); // 4300
        assert_eq!(result.copies_used, 4300);
    }

    #[test]
    fn probe_records_checkpoints_and_flatlines() {
        let rho = diag_state(&[1.0, 0.0]);
        let mut cfg = LearnerConfig::new(2);
        cfg.shots = 1;
        cfg.iterations = 50;
        cfg.epsilon = 0.05; // a pure state stops after one phase
        let mut dev = exact_device(rho.clone(), 1);
        let checkpoints = [5u64, 25, 50, 75, 100];
        let probe = Probe {
            truth: &rho,
            checkpoints: &checkpoints,
        };
        let (result, records) = learn_state_probed(&mut dev, &cfg, Some(probe)).unwrap();
        assert_eq!(result.rank, 1);
        assert_eq!(records.len(), checkpoints.len());
        for (r, c) in records.iter().zip(&checkpoints) {
            assert_eq!(r.iteration, *c);
            assert!((0.0..=1.0).contains(&r.infidelity));
        }
        // beyond-the-end checkpoints carry the final infidelity
        assert_eq!(records[3].infidelity, records[4].infidelity);
        // learning improves over the phase
        assert!(records[2].infidelity <= records[0].infidelity);
    }

    #[test]
    fn learner_config_validation() {
        let mut cfg = LearnerConfig::new(2);
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = LearnerConfig::new(2);
        cfg.iterations = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = LearnerConfig::new(1);
        cfg.d = 1;
        assert!(cfg.validate().is_err());
    }
}
