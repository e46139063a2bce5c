//! Recovery scoring, coherence diagnostics and the measurement-count sweep.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::pipeline::{self, PipelineConfig, TrialSeeds};
use crate::rng::{derive_seed, stream, Purpose};
use crate::{Error, Result};

/// Success rate that defines the smallest sufficient measurement count.
pub const SUCCESS_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub precision: f64,
    pub recall: f64,
    pub exact_match: bool,
}

pub fn support_metrics(true_support: &[usize], recovered: &[usize]) -> SupportMetrics {
    let truth: BTreeSet<usize> = true_support.iter().copied().collect();
    let found: BTreeSet<usize> = recovered.iter().copied().collect();
    let hits = truth.intersection(&found).count() as f64;
    let precision = match (found.is_empty(), truth.is_empty()) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        _ => hits / found.len() as f64,
    };
    let recall = if truth.is_empty() { 1.0 } else { hits / truth.len() as f64 };
    SupportMetrics { precision, recall, exact_match: truth == found }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionMetrics {
    pub pearson_correlation: f64,
    pub relative_l2_error: f64,
}

pub fn reconstruction_metrics(original: &[f64], reconstructed: &[f64]) -> Result<ReconstructionMetrics> {
    if original.len() != reconstructed.len() {
        return Err(Error::DimensionMismatch { expected: original.len(), found: reconstructed.len() });
    }
    let n = original.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mo, mr) = (mean(original), mean(reconstructed));
    let (mut cov, mut vo, mut vr) = (0.0, 0.0, 0.0);
    for (o, r) in original.iter().zip(reconstructed) {
        let (a, b) = (o - mo, r - mr);
        cov += a * b;
        vo += a * a;
        vr += b * b;
    }
    if original.is_empty() || vo == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    // a constant reconstruction carries no shape information
    let pearson_correlation = if vr == 0.0 { 0.0 } else { cov / (vo * vr).sqrt() };
    let diff: f64 = original.iter().zip(reconstructed).map(|(o, r)| (o - r).powi(2)).sum();
    let norm: f64 = original.iter().map(|o| o * o).sum();
    Ok(ReconstructionMetrics { pearson_correlation, relative_l2_error: (diff / norm).sqrt() })
}

/// Largest absolute cosine between distinct columns, over all columns or a
/// seeded random subset of `subset_size` of them.
pub fn mutual_coherence(matrix: &DMatrix<f64>, subset_size: Option<usize>, seed: u64) -> Result<f64> {
    let n = matrix.ncols();
    let columns: Vec<usize> = match subset_size {
        Some(s) if s < n => {
            let mut idx = index::sample(&mut stream(seed, Purpose::Subset, 0), n, s).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    };
    let mut sub = DMatrix::from_fn(matrix.nrows(), columns.len(), |i, c| matrix[(i, columns[c])]);
    for (c, mut col) in sub.column_iter_mut().enumerate() {
        let s = col.norm();
        if s == 0.0 {
            return Err(Error::ZeroColumn { index: columns[c] });
        }
        col /= s;
    }
    let gram = sub.tr_mul(&sub);
    let mut mu = 0.0f64;
    for j in 0..gram.ncols() {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Decreases along `rates` (each is `rates[i] - rates[i+1]` where positive).
/// An empty result means the sequence is non-decreasing.
pub fn drops(rates: &[f64]) -> Vec<f64> {
    rates.windows(2).filter(|w| w[1] < w[0]).map(|w| w[0] - w[1]).collect()
}

/// At most one drop, and that drop no larger than `tolerance`.
pub fn monotone_within(rates: &[f64], tolerance: f64) -> bool {
    let d = drops(rates);
    d.is_empty() || (d.len() == 1 && d[0] <= tolerance + 1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub neurons: Vec<usize>,
    pub multiplexed: Vec<usize>,
    pub measurements: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            neurons: vec![2000],
            multiplexed: vec![4, 8],
            measurements: vec![20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150, 160, 180, 200],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub neurons: usize,
    pub multiplexed: usize,
    pub measurements: usize,
    pub success_rate: f64,
    pub successes: usize,
    /// Trials that ended in a pipeline error (counted as failures).
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MStar {
    pub neurons: usize,
    pub multiplexed: usize,
    /// Smallest grid `M` with success rate at least [`SUCCESS_LEVEL`].
    pub m_star: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub trials: usize,
    pub points: Vec<SweepPoint>,
    pub m_star: Vec<MStar>,
}

impl SweepResult {
    /// Success rates for one `(N, k)` curve in increasing `M`.
    pub fn curve(&self, neurons: usize, multiplexed: usize) -> Vec<(usize, f64)> {
        let mut c: Vec<(usize, f64)> = self
            .points
            .iter()
            .filter(|p| p.neurons == neurons && p.multiplexed == multiplexed)
            .map(|p| (p.measurements, p.success_rate))
            .collect();
        c.sort_by_key(|p| p.0);
        c
    }

    pub fn m_star_for(&self, neurons: usize, multiplexed: usize) -> Option<usize> {
        self.m_star
            .iter()
            .find(|s| s.neurons == neurons && s.multiplexed == multiplexed)
            .and_then(|s| s.m_star)
    }
}

/// The base configuration adapted to one grid point. The signal-dominant
/// fraction of the base configuration is kept.
pub fn grid_config(base: &PipelineConfig, neurons: usize, multiplexed: usize, measurements: usize) -> PipelineConfig {
    let mut cfg = base.clone();
    let fraction = base.ensemble.signal_dominant as f64 / base.ensemble.neurons as f64;
    cfg.ensemble = cfg.ensemble.with_multiplexed(multiplexed);
    cfg.ensemble.neurons = neurons;
    cfg.ensemble.measurements = measurements;
    cfg.ensemble.signal_dominant = ((fraction * neurons as f64).round() as usize).clamp(multiplexed, neurons);
    cfg
}

/// Exact-support success rate over `trials` seeded pipelines at every grid
/// point. Trial seeds depend only on `(master_seed, N, k, trial)`, so along
/// one curve trial `t` sees the same neurons observed for longer as `M`
/// grows.
pub fn measurement_sweep(base: &PipelineConfig, grid: &SweepGrid, trials: usize, master_seed: u64) -> Result<SweepResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if grid.neurons.is_empty() || grid.multiplexed.is_empty() || grid.measurements.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    let mut measurements = grid.measurements.clone();
    measurements.sort_unstable();
    measurements.dedup();

    let mut points = Vec::new();
    let mut m_star = Vec::new();
    for &n in &grid.neurons {
        for &k in &grid.multiplexed {
            let mut first = None;
            for &m in &measurements {
                let cfg = grid_config(base, n, k, m);
                cfg.validate()?;
                let (mut successes, mut errors) = (0, 0);
                for t in 0..trials {
                    let seed = derive_seed(master_seed, &[n as u64, k as u64, t as u64]);
                    match pipeline::run_trial(&cfg, t, &TrialSeeds::derive(seed, 0)) {
                        Ok(run) if run.report.support.exact_match => successes += 1,
                        Ok(_) => {}
                        Err(_) => errors += 1,
                    }
                }
                let rate = successes as f64 / trials as f64;
                if first.is_none() && rate >= SUCCESS_LEVEL {
                    first = Some(m);
                }
                points.push(SweepPoint {
                    neurons: n,
                    multiplexed: k,
                    measurements: m,
                    success_rate: rate,
                    successes,
                    errors,
                });
            }
            m_star.push(MStar { neurons: n, multiplexed: k, m_star: first });
        }
    }
    Ok(SweepResult { trials, points, m_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFit {
    /// `C` in `M ≈ C k ln(N / k)`.
    pub constant: f64,
    /// Euclidean norm of `m_star − C k ln(N/k)` over the fitted points.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit through the origin of `m_star` against `k ln(N/k)`.
pub fn fit_measurement_constant(sweep: &SweepResult) -> Result<MeasurementFit> {
    let points: Vec<(usize, usize, f64)> = sweep
        .m_star
        .iter()
        .filter_map(|s| s.m_star.map(|m| (s.neurons, s.multiplexed, m as f64)))
        .collect();
    fit_constant(&points)
}

/// [`fit_measurement_constant`] on raw `(N, k, m)` triples.
pub fn fit_constant(points: &[(usize, usize, f64)]) -> Result<MeasurementFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData { points: points.len() });
    }
    let data: Vec<(f64, f64)> =
        points.iter().map(|&(n, k, m)| (k as f64 * (n as f64 / k as f64).ln(), m)).collect();
    let sxx: f64 = data.iter().map(|(g, _)| g * g).sum();
    let sxy: f64 = data.iter().map(|(g, m)| g * m).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let constant = sxy / sxx;
    let residual = data.iter().map(|(g, m)| (m - constant * g).powi(2)).sum::<f64>().sqrt();
    Ok(MeasurementFit { constant, residual, points: data.len() })
}
