//! The transmitted scalar stream `y = A x` and its signal/interference split.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::{Ensemble, WeightVector};
use crate::{Error, Result};

/// Where a measurement came from: the seeds of its matrix and weights.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub ensemble_seeds: Vec<u64>,
    pub weight_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: DVector<f64>,
    pub provenance: Provenance,
}

impl Measurement {
    pub fn new(y: DVector<f64>) -> Self {
        Self { y, provenance: Provenance::default() }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

fn product(matrix: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if matrix.ncols() != x.len() {
        return Err(Error::DimensionMismatch { expected: matrix.ncols(), found: x.len() });
    }
    Ok(matrix * x)
}

fn measurement(ensemble: &Ensemble, y: DVector<f64>) -> Measurement {
    Measurement {
        y,
        provenance: Provenance { ensemble_seeds: ensemble.seeds().to_vec(), weight_seed: None },
    }
}

/// `y = A x`.
pub fn multiplex(ensemble: &Ensemble, x: &WeightVector) -> Result<Measurement> {
    Ok(measurement(ensemble, product(ensemble.matrix(), &x.values)?))
}

/// `A x'` where `x'` is `x` with the significant support zeroed: everything
/// in `y` that is not one of the multiplexed signals.
pub fn interference_component(ensemble: &Ensemble, x: &WeightVector) -> Result<Measurement> {
    Ok(measurement(ensemble, product(ensemble.matrix(), &x.background())?))
}

/// `A x` restricted to the significant support.
pub fn signal_component(ensemble: &Ensemble, x: &WeightVector) -> Result<Measurement> {
    Ok(measurement(ensemble, product(ensemble.matrix(), &x.significant())?))
}

/// `10 log10(|A x_S|² / |A x_rest|²)` in decibels.
pub fn signal_to_interference_ratio(ensemble: &Ensemble, x: &WeightVector) -> Result<f64> {
    let signal = signal_component(ensemble, x)?.y.norm_squared();
    let interference = interference_component(ensemble, x)?.y.norm_squared();
    if interference == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(10.0 * (signal / interference).log10())
}
