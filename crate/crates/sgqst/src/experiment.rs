//! Experiment orchestration: seeded trial ensembles, median/quantile
//! aggregation, bundled experiment grids, and CSV/JSON report emission.
//!
//! Reports are a pure function of the configuration (seed included) and
//! independent of the worker-thread count: every trial derives its own RNG
//! streams from (seed, trial) and aggregation folds in trial order. Wall time
//! is recorded as metadata and is the one field outside that contract.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{learn_state_probed, LearnerConfig, NormalizationMode, Probe};
use crate::measure::{MeasureMode, MeasurementDevice};
use crate::metrics::{infidelity, median, quantiles, TrialRecord};
use crate::rng::{ginibre_mixed_state, RngHandle};

/// Per-trial RNG stream layout: stream 4t + role.
const STREAM_STATE: u64 = 0;
const STREAM_DEVICE: u64 = 1;
const STREAM_LEARNER: u64 = 2;

/// One experiment: an ensemble of learning runs over random states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    /// Copies per expectation query (N).
    pub shots: u64,
    /// SPSA iterations per eigenvector phase (K).
    pub iterations: u64,
    pub trials: u64,
    /// Measurement-noise strength.
    pub lambda: f64,
    pub mode: MeasureMode,
    pub epsilon: f64,
    pub normalization: NormalizationMode,
    pub seed: u64,
    /// Cumulative iteration indices at which to record infidelity snapshots;
    /// strictly ascending, bounded by K*d.
    pub checkpoints: Vec<u64>,
    /// Rank of the randomly generated truth states.
    pub rank: usize,
    /// Optional fixed copy budget for the initialization step.
    pub init_shots_total: Option<u64>,
    /// Free-form provenance note (preset name, scale); echoed into reports.
    pub label: Option<String>,
}

impl ExperimentConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            shots: 1000,
            iterations: 300,
            trials: 1,
            lambda: 0.0,
            mode: MeasureMode::Exact,
            epsilon: 1e-4,
            normalization: NormalizationMode::Standard,
            seed: 0,
            checkpoints: Vec::new(),
            rank: d,
            init_shots_total: None,
            label: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learner_config().validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.rank == 0 || self.rank > self.d {
            return Err(Error::RankOutOfRange {
                rank: self.rank,
                d: self.d,
            });
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "checkpoints must be strictly ascending".into(),
            ));
        }
        let limit = self.iterations * self.d as u64;
        if self.checkpoints.last().is_some_and(|&c| c == 0 || c > limit) {
            return Err(Error::InvalidConfig(format!(
                "checkpoints must lie in 1..={limit} (K*d)"
            )));
        }
        Ok(())
    }

    fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            d: self.d,
            shots: self.shots,
            iterations: self.iterations,
            epsilon: self.epsilon,
            normalization: self.normalization,
            rng: RngHandle::new(self.seed),
            gains: Default::default(),
            init_shots_total: self.init_shots_total,
        }
    }
}

/// Median and quartiles of the trial infidelities at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub iteration: u64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub checkpoint_stats: Vec<CheckpointStat>,
    pub trials: Vec<TrialRecord>,
    pub total_copies: u64,
    /// Metadata only; not covered by the determinism contract.
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn final_infidelities(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.final_infidelity).collect()
    }

    pub fn median_final_infidelity(&self) -> Result<f64> {
        median(&self.final_infidelities())
    }
}

/// Runs one experiment with the default worker pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_threads(cfg, 0)
}

/// Runs one experiment on `threads` workers (0 = automatic). The report is
/// identical for every thread count.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let outcomes = run_trials(cfg, threads);
    let mut trials = Vec::with_capacity(outcomes.len());
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(record) => trials.push(record),
            Err(e) => {
                return Err(Error::TrialFailed {
                    trial: t as u64,
                    source: Box::new(e),
                })
            }
        }
    }
    let mut checkpoint_stats = Vec::with_capacity(cfg.checkpoints.len());
    for (j, &iteration) in cfg.checkpoints.iter().enumerate() {
        let values: Vec<f64> = trials.iter().map(|t| t.checkpoints[j].infidelity).collect();
        let qs = quantiles(&values, &[0.25, 0.75])?;
        checkpoint_stats.push(CheckpointStat {
            iteration,
            median: median(&values)?,
            q25: qs[0],
            q75: qs[1],
        });
    }
    let total_copies = trials.iter().map(|t| t.copies_used).sum();
    Ok(ExperimentReport {
        config: cfg.clone(),
        checkpoint_stats,
        trials,
        total_copies,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(feature = "parallel")]
fn run_trials(cfg: &ExperimentConfig, threads: usize) -> Vec<Result<TrialRecord>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("worker pool");
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_trials(cfg: &ExperimentConfig, _threads: usize) -> Vec<Result<TrialRecord>> {
    (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
}

fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialRecord> {
    let mut state_rng = RngHandle::with_stream(cfg.seed, 4 * trial + STREAM_STATE).build();
    let truth = ginibre_mixed_state(cfg.d, cfg.rank, &mut state_rng)?;
    let mut device = MeasurementDevice::new(
        truth.clone(),
        cfg.mode,
        cfg.shots,
        cfg.lambda,
        RngHandle::with_stream(cfg.seed, 4 * trial + STREAM_DEVICE),
    )?;
    let mut learner_cfg = cfg.learner_config();
    learner_cfg.rng = RngHandle::with_stream(cfg.seed, 4 * trial + STREAM_LEARNER);
    let probe = Probe {
        truth: &truth,
        checkpoints: &cfg.checkpoints,
    };
    let (result, checkpoints) = learn_state_probed(&mut device, &learner_cfg, Some(probe))?;
    let final_infidelity = infidelity(&truth, &result.rho_hat)?;
    Ok(TrialRecord {
        trial,
        checkpoints,
        final_infidelity,
        copies_used: result.copies_used,
    })
}

/// Bundled experiment grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureName {
    /// d = 2 shot-count sweep: N in {10, 100, 1000, 10000}.
    Fig2,
    /// Dimension sweep d = 2..8 at N = 1000.
    Fig3,
    /// Noise-robustness sweep: d in {2, 4, 6, 8}, lambda in {0, 0.2}, at a
    /// fixed total copy budget across d.
    Fig4,
}

impl std::str::FromStr for FigureName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(FigureName::Fig2),
            "fig3" => Ok(FigureName::Fig3),
            "fig4" => Ok(FigureName::Fig4),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl std::fmt::Display for FigureName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FigureName::Fig2 => write!(f, "fig2"),
            FigureName::Fig3 => write!(f, "fig3"),
            FigureName::Fig4 => write!(f, "fig4"),
        }
    }
}

/// Full presets reproduce the published grids; desk scale cuts trial counts
/// (1000 -> 50 for fig2, 100 -> 25 for fig3/fig4) and caps iterations so the
/// grid finishes on a laptop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::InvalidConfig(format!(
                "unknown scale `{other}`; expected full|desk"
            ))),
        }
    }
}

const PRESET_SEED: u64 = 42;

/// The config grid for one bundled experiment.
pub fn figure_preset(name: FigureName, scale: Scale) -> Vec<ExperimentConfig> {
    match name {
        FigureName::Fig2 => {
            let (trials, k) = match scale {
                Scale::Full => (1000, 1000),
                Scale::Desk => (50, 300),
            };
            [10u64, 100, 1000, 10_000]
                .iter()
                .map(|&n| {
                    let mut cfg = ExperimentConfig::new(2);
                    cfg.shots = n;
                    cfg.iterations = k;
                    cfg.trials = trials;
                    cfg.mode = MeasureMode::Shots;
                    cfg.seed = PRESET_SEED;
                    cfg.checkpoints = log_grid(k * 2);
                    cfg.label = Some(format!("fig2/{} N={n}", scale_name(scale)));
                    cfg
                })
                .collect()
        }
        FigureName::Fig3 => {
            let (trials, k) = match scale {
                Scale::Full => (100, 1000),
                Scale::Desk => (25, 300),
            };
            (2..=8)
                .map(|d| {
                    let mut cfg = ExperimentConfig::new(d);
                    cfg.shots = 1000;
                    cfg.iterations = k;
                    cfg.trials = trials;
                    cfg.mode = MeasureMode::Shots;
                    cfg.seed = PRESET_SEED;
                    cfg.checkpoints = log_grid(k * d as u64);
                    cfg.label = Some(format!("fig3/{} d={d}", scale_name(scale)));
                    cfg
                })
                .collect()
        }
        FigureName::Fig4 => {
            // fixed total budget across d: 10^4 copies for initialization,
            // N = 10^3, K = (total - 10^4) / (N d)
            let (trials, total) = match scale {
                Scale::Full => (100, 8_010_000u64),
                Scale::Desk => (25, 1_210_000u64),
            };
            let n = 1000u64;
            let init = 10_000u64;
            let mut out = Vec::new();
            for &d in &[2usize, 4, 6, 8] {
                for &lambda in &[0.0, 0.2] {
                    let k = (total - init) / (n * d as u64);
                    let mut cfg = ExperimentConfig::new(d);
                    cfg.shots = n;
                    cfg.iterations = k;
                    cfg.trials = trials;
                    cfg.lambda = lambda;
                    cfg.mode = MeasureMode::Shots;
                    cfg.normalization = if lambda > 0.0 {
                        NormalizationMode::NoiseAware
                    } else {
                        NormalizationMode::Standard
                    };
                    cfg.seed = PRESET_SEED;
                    cfg.init_shots_total = Some(init);
                    cfg.checkpoints = log_grid(k * d as u64);
                    cfg.label = Some(format!(
                        "fig4/{} d={d} lambda={lambda}",
                        scale_name(scale)
                    ));
                    out.push(cfg);
                }
            }
            out
        }
    }
}

fn scale_name(scale: Scale) -> &'static str {
    match scale {
        Scale::Full => "full",
        Scale::Desk => "desk",
    }
}

/// ~13 logarithmically spaced integer checkpoints in 1..=max.
fn log_grid(max: u64) -> Vec<u64> {
    let points = 13usize;
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            ((max as f64).powf(t)).round() as u64
        })
        .collect();
    out.dedup();
    out
}

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown format `{other}`; expected csv|json"
            ))),
        }
    }
}

/// CSV columns, one row per (config, trial, checkpoint).
pub const CSV_HEADER: &str =
    "config_id,d,N,K,lambda,mode,trial,checkpoint_iteration,infidelity,copies_used";

/// Writes the flat CSV view of one or more reports.
pub fn write_csv<W: Write>(reports: &[ExperimentReport], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (config_id, report) in reports.iter().enumerate() {
        let c = &report.config;
        for trial in &report.trials {
            for cp in &trial.checkpoints {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    config_id,
                    c.d,
                    c.shots,
                    c.iterations,
                    c.lambda,
                    c.mode,
                    trial.trial,
                    cp.iteration,
                    cp.infidelity,
                    trial.copies_used
                )?;
            }
        }
    }
    Ok(())
}

/// Writes the structured JSON view (an array of reports).
pub fn write_json<W: Write>(reports: &[ExperimentReport], out: &mut W) -> Result<()> {
    serde_json::to_writer_pretty(out, reports).map_err(|e| Error::Json {
        path: "<writer>".into(),
        source: e,
    })
}

pub fn read_json(path: &Path) -> Result<Vec<ExperimentReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes reports to a file in the chosen format.
pub fn emit_reports(
    reports: &[ExperimentReport],
    format: ReportFormat,
    path: &Path,
) -> Result<()> {
    let to_io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut file = std::fs::File::create(path).map_err(to_io)?;
    match format {
        ReportFormat::Csv => write_csv(reports, &mut file).map_err(to_io)?,
        ReportFormat::Json => write_json(reports, &mut file)?,
    }
    Ok(())
}

/// Writes a single report to a file.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    emit_reports(std::slice::from_ref(report), format, path)
}
