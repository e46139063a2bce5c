//! One end-to-end trial: build `A` and `x`, transmit `y = A x`, corrupt the
//! matrix for the receiver, recover, threshold and score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{reconstruction_metrics, support_metrics, SupportMetrics};
use crate::ensemble::{build_ensemble, build_weight_vector, perturb_ensemble, Ensemble, EnsembleConfig, WeightVector};
use crate::multiplex::{self, Measurement};
use crate::recovery::{
    estimate_eta, recover_support, solve_bpdn, solve_omp, AmplitudePrior, BpdnSettings, OmpStopping, RecoveryResult,
    SolverKind,
};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub kind: SolverKind,
    /// Residual bound; estimated from the configuration when absent.
    pub eta: Option<f64>,
    pub eta_safety_factor: f64,
    pub max_iterations: usize,
    pub convergence_tolerance: f64,
    pub penalty_parameter: f64,
    /// Fixed selection count for OMP; otherwise OMP stops at residual `η`.
    pub omp_sparsity: Option<usize>,
    /// Refit amplitudes by least squares on the recovered support.
    pub debias: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let b = BpdnSettings::default();
        Self {
            kind: SolverKind::Bpdn,
            eta: None,
            eta_safety_factor: 1.5,
            max_iterations: b.max_iterations,
            convergence_tolerance: b.convergence_tolerance,
            penalty_parameter: b.penalty_parameter,
            omp_sparsity: None,
            debias: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ensemble: EnsembleConfig,
    /// Variance of the receiver's perturbation of signal-dominant columns.
    pub receiver_noise_variance: f64,
    pub solver: SolverSettings,
    /// Support threshold `T`.
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ensemble: EnsembleConfig::default(),
            receiver_noise_variance: 0.01,
            solver: SolverSettings::default(),
            threshold: 0.4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if !(self.receiver_noise_variance >= 0.0) || !self.receiver_noise_variance.is_finite() {
            return Err(Error::InvalidParameter("receiver_noise_variance must be non-negative".into()));
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::InvalidParameter("threshold must be positive".into()));
        }
        if !(self.solver.eta_safety_factor > 0.0) {
            return Err(Error::InvalidParameter("solver.eta_safety_factor must be positive".into()));
        }
        if let Some(k) = self.solver.omp_sparsity {
            if k > self.ensemble.measurements {
                return Err(Error::InvalidParameter("solver.omp_sparsity exceeds measurements".into()));
            }
        }
        self.bpdn_settings().validate()
    }

    /// `η`: the configured value, or the heuristic estimate.
    pub fn eta(&self) -> f64 {
        self.solver.eta.unwrap_or_else(|| {
            let prior = AmplitudePrior::from_config(&self.ensemble, self.receiver_noise_variance, self.solver.eta_safety_factor);
            estimate_eta(self.ensemble.measurements, &prior)
        })
    }

    pub fn bpdn_settings(&self) -> BpdnSettings {
        BpdnSettings {
            eta: self.eta(),
            max_iterations: self.solver.max_iterations,
            convergence_tolerance: self.solver.convergence_tolerance,
            penalty_parameter: self.solver.penalty_parameter,
        }
    }

    /// A copy with the estimated `η` written into the configuration.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.solver.eta = Some(self.eta());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub transmitter: u64,
    pub weights: u64,
    pub receiver: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, trial: u64) -> Self {
        Self {
            transmitter: derive_seed(master, &[trial, 1]),
            weights: derive_seed(master, &[trial, 2]),
            receiver: derive_seed(master, &[trial, 3]),
        }
    }
}

/// The transmitter side of a trial.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub ensemble: Ensemble,
    pub weights: WeightVector,
    pub measurement: Measurement,
}

pub fn transmit(config: &EnsembleConfig, seeds: &TrialSeeds) -> Result<Transmission> {
    let ensemble = build_ensemble(config, seeds.transmitter)?;
    let weights = build_weight_vector(config, &ensemble, seeds.weights)?;
    let mut measurement = multiplex::multiplex(&ensemble, &weights)?;
    measurement.provenance.weight_seed = Some(seeds.weights);
    Ok(Transmission { ensemble, weights, measurement })
}

/// Runs the configured solver on `(Â, y)` and thresholds the result.
///
/// BPDN non-convergence is not an error here: the best iterate is kept and
/// the result is flagged `converged = false`.
pub fn recover(config: &PipelineConfig, a_hat: &DMatrix<f64>, y: &DVector<f64>) -> Result<RecoveryResult> {
    let eta = config.eta();
    let (x_star, iterations, converged) = match config.solver.kind {
        SolverKind::Bpdn => match solve_bpdn(a_hat, y, &config.bpdn_settings()) {
            Ok(s) => (s.coefficients, s.iterations, true),
            Err(Error::MaxIterationsExceeded { best }) => (best.coefficients, best.iterations, false),
            Err(e) => return Err(e),
        },
        SolverKind::Omp => {
            let stopping = match config.solver.omp_sparsity {
                Some(k) => OmpStopping::Sparsity(k),
                None => OmpStopping::Residual(eta),
            };
            let s = solve_omp(a_hat, y, stopping)?;
            (s.coefficients, s.iterations, true)
        }
    };
    let x_star = if config.solver.debias { debias(a_hat, y, &x_star, config.threshold)? } else { x_star };
    Ok(RecoveryResult::from_solution(config.solver.kind, eta, config.threshold, a_hat, y, x_star, iterations, converged))
}

/// Least-squares amplitudes on `{i : |x_i| > threshold}`, zero elsewhere.
fn debias(a_hat: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, threshold: f64) -> Result<DVector<f64>> {
    let support = recover_support(x, threshold);
    let mut out = DVector::zeros(x.len());
    if support.is_empty() {
        return Ok(out);
    }
    let sub = DMatrix::from_fn(a_hat.nrows(), support.len(), |i, c| a_hat[(i, support[c])]);
    let fit = sub.svd(true, true).solve(y, 1e-12).map_err(|e| Error::Format(e.to_string()))?;
    for (&j, &v) in support.iter().zip(fit.iter()) {
        out[j] = v;
    }
    Ok(out)
}

/// How well one multiplexed signal `w_i a_i` was reproduced by `x*_i â_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFidelity {
    pub index: usize,
    pub weight: f64,
    pub estimate: f64,
    /// `None` when the original is constant.
    pub pearson_correlation: Option<f64>,
    pub relative_l2_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub eta: f64,
    pub true_support: Vec<usize>,
    pub recovered_support: Vec<usize>,
    pub support: SupportMetrics,
    pub signals: Vec<SignalFidelity>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|x − x*|₂`.
    pub coefficient_error: f64,
    /// Signal-to-interference ratio of `y` in dB, when defined.
    pub signal_to_interference_db: Option<f64>,
}

pub struct TrialRun {
    pub transmission: Transmission,
    pub receiver: Ensemble,
    pub recovery: RecoveryResult,
    pub report: TrialReport,
}

/// Scores a recovery against the transmitted weights.
pub fn score(
    trial: usize,
    seeds: &TrialSeeds,
    tx: &Transmission,
    a_hat: &DMatrix<f64>,
    recovery: &RecoveryResult,
) -> TrialReport {
    let truth = &tx.weights.significant_support;
    let signals = truth
        .iter()
        .map(|&i| {
            let original = tx.ensemble.matrix().column(i) * tx.weights.values[i];
            let rebuilt = a_hat.column(i) * recovery.x_star[i];
            let m = reconstruction_metrics(original.as_slice(), rebuilt.as_slice()).ok();
            SignalFidelity {
                index: i,
                weight: tx.weights.values[i],
                estimate: recovery.x_star[i],
                pearson_correlation: m.map(|m| m.pearson_correlation),
                relative_l2_error: m.map(|m| m.relative_l2_error),
            }
        })
        .collect();
    TrialReport {
        trial,
        seeds: *seeds,
        eta: recovery.eta,
        true_support: truth.clone(),
        recovered_support: recovery.recovered_support.clone(),
        support: support_metrics(truth, &recovery.recovered_support),
        signals,
        residual_norm: recovery.residual_norm,
        iterations: recovery.iterations,
        converged: recovery.converged,
        coefficient_error: (&tx.weights.values - &recovery.x_star).norm(),
        signal_to_interference_db: multiplex::signal_to_interference_ratio(&tx.ensemble, &tx.weights).ok(),
    }
}

/// Full pipeline for one trial.
pub fn run_trial(config: &PipelineConfig, trial: usize, seeds: &TrialSeeds) -> Result<TrialRun> {
    config.validate()?;
    let transmission = transmit(&config.ensemble, seeds)?;
    let receiver = perturb_ensemble(&transmission.ensemble, config.receiver_noise_variance, seeds.receiver)?;
    let recovery = recover(config, receiver.matrix(), &transmission.measurement.y)?;
    let report = score(trial, seeds, &transmission, receiver.matrix(), &recovery);
    Ok(TrialRun { transmission, receiver, recovery, report })
}
