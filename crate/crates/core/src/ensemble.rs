//! Transmitter mixing matrix, weight vector, and the receiver's corrupted
//! copy of the matrix.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::hr::{self, HrParams, HrState};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// The four multiplexed weights of the reference experiment.
pub const REFERENCE_WEIGHTS: [f64; 4] = [1.0, 0.9, 0.8, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Total number of columns `N`.
    pub neurons: usize,
    /// Samples per column `M`.
    pub measurements: usize,
    /// Number of multiplexed signals `k`.
    pub multiplexed: usize,
    /// Number of Hindmarsh-Rose columns.
    pub signal_dominant: usize,
    pub hr: HrParams,
    pub signal_noise_variance: f64,
    pub noise_column_variance: f64,
    pub multiplexed_weights: Vec<f64>,
    pub background_signal_weight_range: [f64; 2],
    pub noise_column_weight_range: [f64; 2],
    /// Place the signal-dominant block at random column positions.
    pub shuffle_signal_columns: bool,
    /// Give background weights a random sign.
    pub signed_background: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            neurons: 10_000,
            measurements: 100,
            multiplexed: 4,
            signal_dominant: 150,
            hr: HrParams::default(),
            signal_noise_variance: 0.01,
            noise_column_variance: 1.0,
            multiplexed_weights: REFERENCE_WEIGHTS.to_vec(),
            background_signal_weight_range: [0.0, 0.02],
            noise_column_weight_range: [0.0, 0.001],
            shuffle_signal_columns: false,
            signed_background: false,
        }
    }
}

impl EnsembleConfig {
    /// Sets `k` and fills the multiplexed weights by cycling the reference
    /// weights.
    pub fn with_multiplexed(mut self, k: usize) -> Self {
        self.multiplexed = k;
        self.multiplexed_weights = REFERENCE_WEIGHTS.iter().copied().cycle().take(k).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        self.hr.validate()?;
        if self.measurements == 0 {
            return bad("measurements must be at least 1".into());
        }
        if self.neurons == 0 {
            return bad("neurons must be at least 1".into());
        }
        if self.multiplexed > self.signal_dominant || self.signal_dominant > self.neurons {
            return bad(format!(
                "need multiplexed <= signal_dominant <= neurons, got {} <= {} <= {}",
                self.multiplexed, self.signal_dominant, self.neurons
            ));
        }
        if self.multiplexed_weights.len() != self.multiplexed {
            return bad(format!(
                "multiplexed_weights has {} entries, expected {}",
                self.multiplexed_weights.len(),
                self.multiplexed
            ));
        }
        if self.multiplexed_weights.iter().any(|w| !w.is_finite()) {
            return bad("multiplexed_weights must be finite".into());
        }
        for (name, v) in [
            ("signal_noise_variance", self.signal_noise_variance),
            ("noise_column_variance", self.noise_column_variance),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be non-negative"));
            }
        }
        for (name, [lo, hi]) in [
            ("background_signal_weight_range", self.background_signal_weight_range),
            ("noise_column_weight_range", self.noise_column_weight_range),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("{name} must satisfy lo <= hi"));
            }
        }
        Ok(())
    }
}

/// The `M x N` mixing matrix with its column bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    matrix: DMatrix<f64>,
    signal_indices: Vec<usize>,
    noise_column_variance: f64,
    seeds: Vec<u64>,
}

impl Ensemble {
    pub fn from_parts(
        matrix: DMatrix<f64>,
        signal_indices: Vec<usize>,
        noise_column_variance: f64,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        let n = matrix.ncols();
        if let Some(&bad) = signal_indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!("signal index {bad} out of range for {n} columns")));
        }
        let mut seen = vec![false; n];
        for &i in &signal_indices {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("signal index {i} repeated")));
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("matrix has non-finite entries".into()));
        }
        Ok(Self { matrix, signal_indices, noise_column_variance, seeds })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Signal-dominant column indices, in block order (the first `k` carry
    /// the multiplexed signals).
    pub fn signal_indices(&self) -> &[usize] {
        &self.signal_indices
    }

    pub fn measurements(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn neurons(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn noise_column_variance(&self) -> f64 {
        self.noise_column_variance
    }

    /// Every seed that went into this matrix, in order of use.
    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn signal_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.neurons()];
        for &i in &self.signal_indices {
            mask[i] = true;
        }
        mask
    }
}

/// Coefficient vector `x` with its designated significant support.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub values: DVector<f64>,
    /// Sorted indices of the `k` multiplexed columns.
    pub significant_support: Vec<usize>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `x` with the significant support zeroed.
    pub fn background(&self) -> DVector<f64> {
        let mut v = self.values.clone();
        for &i in &self.significant_support {
            v[i] = 0.0;
        }
        v
    }

    /// `x` restricted to the significant support.
    pub fn significant(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.values.len());
        for &i in &self.significant_support {
            v[i] = self.values[i];
        }
        v
    }
}

fn normal(variance: f64) -> Normal<f64> {
    Normal::new(0.0, variance.sqrt()).expect("validated variance")
}

fn fill_gaussian<R: Rng>(col: &mut [f64], variance: f64, rng: &mut R) {
    let dist = normal(variance);
    for v in col {
        *v = dist.sample(rng);
    }
}

/// Builds the transmitter matrix `A`.
///
/// Signal-dominant column number `j` (in block order) is a sampled
/// Hindmarsh-Rose voltage trace started from a uniform point in `[-1, 1]³`
/// plus `N(0, signal_noise_variance)` noise. Every other column is i.i.d.
/// `N(0, noise_column_variance)`. Each column draws from its own stream of
/// `seed`.
pub fn build_ensemble(config: &EnsembleConfig, seed: u64) -> Result<Ensemble> {
    config.validate()?;
    let (m, n) = (config.measurements, config.neurons);
    let signal_indices: Vec<usize> = if config.shuffle_signal_columns {
        let mut rng = stream(seed, Purpose::Placement, 0);
        index::sample(&mut rng, n, config.signal_dominant).into_vec()
    } else {
        (0..config.signal_dominant).collect()
    };

    let mut matrix = DMatrix::zeros(m, n);
    for (ordinal, &col) in signal_indices.iter().enumerate() {
        let init = HrState::random(&mut stream(seed, Purpose::InitialCondition, ordinal as u64));
        let clean = hr::simulate_signal(&config.hr, init, m)?;
        let mut rng = stream(seed, Purpose::SignalNoise, ordinal as u64);
        let noisy = hr::add_gaussian_noise(&clean, config.signal_noise_variance, &mut rng)?;
        matrix.column_mut(col).copy_from_slice(noisy.samples());
    }

    let mut is_signal = vec![false; n];
    for &i in &signal_indices {
        is_signal[i] = true;
    }
    for col in (0..n).filter(|&c| !is_signal[c]) {
        let mut rng = stream(seed, Purpose::NoiseColumn, col as u64);
        fill_gaussian(matrix.column_mut(col).as_mut_slice(), config.noise_column_variance, &mut rng);
    }

    Ensemble::from_parts(matrix, signal_indices, config.noise_column_variance, vec![seed])
}

/// Builds `x`: the configured multiplexed weights on the first `k`
/// signal-dominant columns, uniform background weights elsewhere.
pub fn build_weight_vector(config: &EnsembleConfig, ensemble: &Ensemble, seed: u64) -> Result<WeightVector> {
    config.validate()?;
    if ensemble.neurons() != config.neurons {
        return Err(Error::DimensionMismatch { expected: config.neurons, found: ensemble.neurons() });
    }
    if ensemble.signal_indices().len() != config.signal_dominant {
        return Err(Error::DimensionMismatch {
            expected: config.signal_dominant,
            found: ensemble.signal_indices().len(),
        });
    }
    let uniform = |[lo, hi]: [f64; 2]| {
        // a degenerate range yields the constant lo
        Uniform::new_inclusive(lo, hi).expect("validated range")
    };
    let background = uniform(config.background_signal_weight_range);
    let far = uniform(config.noise_column_weight_range);

    let mut rng = stream(seed, Purpose::Weights, 0);
    let mask = ensemble.signal_mask();
    let mut values = DVector::zeros(config.neurons);
    for (i, v) in values.iter_mut().enumerate() {
        let mut w = if mask[i] { background.sample(&mut rng) } else { far.sample(&mut rng) };
        if config.signed_background && rng.random::<bool>() {
            w = -w;
        }
        *v = w;
    }

    let mut support: Vec<usize> = ensemble.signal_indices()[..config.multiplexed].to_vec();
    for (&i, &w) in support.iter().zip(&config.multiplexed_weights) {
        values[i] = w;
    }
    support.sort_unstable();
    Ok(WeightVector { values, significant_support: support })
}

/// The receiver's matrix `Â`.
///
/// Signal-dominant columns get independent `N(0, column_noise_variance)`
/// perturbations; all other columns are replaced by fresh draws with the
/// transmitter's noise variance.
pub fn perturb_ensemble(ensemble: &Ensemble, column_noise_variance: f64, seed: u64) -> Result<Ensemble> {
    if !(column_noise_variance >= 0.0) || !column_noise_variance.is_finite() {
        return Err(Error::InvalidParameter("column noise variance must be non-negative".into()));
    }
    let mut matrix = ensemble.matrix.clone();
    let mask = ensemble.signal_mask();
    for (col, &is_signal) in mask.iter().enumerate() {
        let mut c = matrix.column_mut(col);
        if is_signal {
            if column_noise_variance > 0.0 {
                let dist = normal(column_noise_variance);
                let mut rng = stream(seed, Purpose::Perturbation, col as u64);
                for v in c.iter_mut() {
                    *v += dist.sample(&mut rng);
                }
            }
        } else {
            let mut rng = stream(seed, Purpose::Redraw, col as u64);
            fill_gaussian(c.as_mut_slice(), ensemble.noise_column_variance, &mut rng);
        }
    }
    let mut seeds = ensemble.seeds.clone();
    seeds.push(seed);
    Ensemble::from_parts(matrix, ensemble.signal_indices.clone(), ensemble.noise_column_variance, seeds)
}

/// Euclidean norm of every column.
pub fn column_norms(matrix: &DMatrix<f64>) -> Vec<f64> {
    matrix.column_iter().map(|c| c.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EnsembleConfig {
        EnsembleConfig {
            neurons: 300,
            measurements: 40,
            signal_dominant: 12,
            hr: HrParams { transient: 50.0, ..HrParams::default() },
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn layout_of_default_sized_block() {
        let cfg = small();
        let e = build_ensemble(&cfg, 3).unwrap();
        assert_eq!(e.matrix().shape(), (40, 300));
        assert_eq!(e.signal_indices(), (0..12).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn pure_noise_columns_have_unit_variance() {
        let cfg = EnsembleConfig { signal_dominant: 0, ..EnsembleConfig::default() }.with_multiplexed(0);
        let e = build_ensemble(&cfg, 11).unwrap();
        let m = cfg.measurements as f64;
        let avg: f64 = e
            .matrix()
            .column_iter()
            .map(|c| {
                let mean = c.sum() / m;
                c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
            })
            .sum::<f64>()
            / cfg.neurons as f64;
        assert!((0.97..=1.03).contains(&avg), "{avg}");
    }

    #[test]
    fn minimal_shape() {
        let cfg = EnsembleConfig { neurons: 1, measurements: 1, signal_dominant: 0, ..Default::default() }
            .with_multiplexed(0);
        let e = build_ensemble(&cfg, 5).unwrap();
        assert_eq!(e.matrix().shape(), (1, 1));
        assert!(e.matrix()[(0, 0)].is_finite());
    }

    #[test]
    fn invalid_counts_are_rejected() {
        let cfg = EnsembleConfig { signal_dominant: 3, ..small() };
        assert!(build_ensemble(&cfg, 0).is_err());
        let cfg = EnsembleConfig { measurements: 0, ..small() };
        assert!(build_ensemble(&cfg, 0).is_err());
        let cfg = EnsembleConfig { multiplexed_weights: vec![1.0], ..small() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn weights_follow_reference_layout() {
        let cfg = small();
        let e = build_ensemble(&cfg, 3).unwrap();
        let w = build_weight_vector(&cfg, &e, 4).unwrap();
        assert_eq!(w.significant_support, vec![0, 1, 2, 3]);
        let got: Vec<f64> = w.significant_support.iter().map(|&i| w.values[i]).collect();
        assert_eq!(got, REFERENCE_WEIGHTS);
        for i in 4..cfg.neurons {
            assert!(w.values[i] >= 0.0 && w.values[i] < 0.02);
            if i >= cfg.signal_dominant {
                assert!(w.values[i] <= 0.001);
            }
        }
    }

    #[test]
    fn empty_support() {
        let cfg = small().with_multiplexed(0);
        let e = build_ensemble(&cfg, 3).unwrap();
        let w = build_weight_vector(&cfg, &e, 4).unwrap();
        assert!(w.significant_support.is_empty());
        assert!(w.values.iter().all(|v| v.abs() < 0.02));
    }

    #[test]
    fn shuffled_placement_keeps_support_in_signal_block() {
        let cfg = EnsembleConfig { shuffle_signal_columns: true, signed_background: true, ..small() };
        let e = build_ensemble(&cfg, 8).unwrap();
        let w = build_weight_vector(&cfg, &e, 9).unwrap();
        let mask = e.signal_mask();
        assert!(w.significant_support.iter().all(|&i| mask[i]));
        assert_ne!(e.signal_indices(), (0..12).collect::<Vec<_>>().as_slice());
        assert!(w.values.iter().any(|&v| v < 0.0));
    }

    #[test]
    fn zero_perturbation_keeps_signal_block() {
        let cfg = small();
        let a = build_ensemble(&cfg, 3).unwrap();
        let b = perturb_ensemble(&a, 0.0, 3).unwrap();
        for &i in a.signal_indices() {
            assert_eq!(a.matrix().column(i), b.matrix().column(i));
        }
        assert_ne!(a.matrix().column(50), b.matrix().column(50));
        assert_eq!(b.signal_indices(), a.signal_indices());
        assert_eq!(b.seeds(), &[3, 3]);
    }

    #[test]
    fn column_norm_cases() {
        let mut m = DMatrix::zeros(3, 2);
        m[(0, 1)] = 1.0;
        assert_eq!(column_norms(&m), vec![0.0, 1.0]);
    }
}
