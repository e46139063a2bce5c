//! Demultiplexing: sparse recovery of `x` from `y` and the receiver's `Â`.

mod bpdn;
mod omp;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleConfig;
use crate::{Error, Result};

pub use bpdn::{min_residual, solve_bpdn, BpdnSettings, BpdnSolution};
pub use omp::{solve_omp, OmpSolution, OmpStopping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Bpdn,
    Omp,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bpdn => "bpdn",
            SolverKind::Omp => "omp",
        }
    }
}

/// Solver output after thresholding and demultiplexing.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub solver: SolverKind,
    pub eta: f64,
    pub threshold: f64,
    pub x_star: DVector<f64>,
    pub recovered_support: Vec<usize>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `x*_i · â_i` for every recovered index `i`.
    pub reconstructions: BTreeMap<usize, DVector<f64>>,
}

impl RecoveryResult {
    /// Assembles a result from a raw solution vector.
    #[allow(clippy::too_many_arguments)]
    pub fn from_solution(
        solver: SolverKind,
        eta: f64,
        threshold: f64,
        a_hat: &DMatrix<f64>,
        y: &DVector<f64>,
        x_star: DVector<f64>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let recovered_support = recover_support(&x_star, threshold);
        let reconstructions = demultiplex(&x_star, &recovered_support, a_hat);
        let residual_norm = residual_norm(a_hat, &x_star, y);
        Self {
            solver,
            eta,
            threshold,
            x_star,
            recovered_support,
            residual_norm,
            iterations,
            converged,
            reconstructions,
        }
    }

    /// `{solver, eta, iterations, residual_norm, support, coefficients}`,
    /// with coefficients as `[index, value]` pairs for every nonzero entry
    /// of `x*` in index order.
    pub fn to_json(&self) -> serde_json::Value {
        let coefficients: Vec<(usize, f64)> =
            self.x_star.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect();
        serde_json::json!({
            "solver": self.solver.name(),
            "eta": self.eta,
            "threshold": self.threshold,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual_norm": self.residual_norm,
            "support": self.recovered_support,
            "coefficients": coefficients,
        })
    }
}

/// `|Â x − y|₂`, skipping zero coefficients.
pub fn residual_norm(a_hat: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut r = -y.clone();
    for (j, &v) in x.iter().enumerate() {
        if v != 0.0 {
            r.axpy(v, &a_hat.column(j), 1.0);
        }
    }
    r.norm()
}

/// `{i : |x_i| > threshold}` in increasing order. Entries equal to the
/// threshold are excluded.
pub fn recover_support(x_star: &DVector<f64>, threshold: f64) -> Vec<usize> {
    debug_assert!(threshold > 0.0);
    x_star.iter().enumerate().filter(|(_, v)| v.abs() > threshold).map(|(i, _)| i).collect()
}

/// `i ↦ x*_i · â_i` for each `i` in `support`, in the matrix's own scale.
pub fn demultiplex(x_star: &DVector<f64>, support: &[usize], a_hat: &DMatrix<f64>) -> BTreeMap<usize, DVector<f64>> {
    support.iter().map(|&i| (i, a_hat.column(i) * x_star[i])).collect()
}

/// Assumed amplitudes behind the receiver's model error `Σ x_i ε_i`, with
/// `ε_i ~ N(0, σ_ε² I)` on every perturbed column.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudePrior {
    pub perturbed_amplitudes: Vec<f64>,
    pub perturbation_variance: f64,
    pub safety_factor: f64,
}

impl AmplitudePrior {
    /// Configured multiplexed weights, background weights at the midpoint of
    /// their ranges.
    pub fn from_config(config: &EnsembleConfig, column_noise_variance: f64, safety_factor: f64) -> Self {
        let mid = |[lo, hi]: [f64; 2]| 0.5 * (lo + hi);
        let background = config.signal_dominant.saturating_sub(config.multiplexed);
        let mut perturbed = config.multiplexed_weights.clone();
        perturbed.extend(std::iter::repeat_n(mid(config.background_signal_weight_range), background));
        Self {
            perturbed_amplitudes: perturbed,
            perturbation_variance: column_noise_variance,
            safety_factor,
        }
    }
}

/// Heuristic residual bound `c · sqrt(M · σ_ε² · Σ x_i²)`.
///
/// It ignores the noise columns the receiver redraws, whose contribution
/// is small at the default weight ranges.
pub fn estimate_eta(measurements: usize, prior: &AmplitudePrior) -> f64 {
    let energy: f64 = prior.perturbed_amplitudes.iter().map(|a| a * a).sum();
    prior.safety_factor * (measurements as f64 * prior.perturbation_variance * energy).sqrt()
}

pub(crate) fn check_dims(matrix: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if matrix.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("measurement has non-finite entries".into()));
    }
    Ok(())
}
