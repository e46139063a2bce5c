use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::check_dims;
use crate::{Error, Result};

/// Condition number above which a selection counts as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmpStopping {
    /// Stop after this many selections.
    Sparsity(usize),
    /// Stop once `|r|₂` is at most this value.
    Residual(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpSolution {
    pub coefficients: DVector<f64>,
    /// Selected columns in selection order.
    pub selected: Vec<usize>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Orthogonal matching pursuit.
///
/// Each round picks the column with the largest normalized correlation
/// `|a_jᵀ r| / |a_j|`, refits all selected amplitudes by least squares and
/// updates the residual. Selection also ends when the residual vanishes.
pub fn solve_omp(matrix: &DMatrix<f64>, y: &DVector<f64>, stopping: OmpStopping) -> Result<OmpSolution> {
    check_dims(matrix, y)?;
    let (m, n) = matrix.shape();
    let cap = match stopping {
        OmpStopping::Sparsity(k) if k > m => {
            return Err(Error::InvalidParameter(format!("sparsity {k} exceeds measurement count {m}")));
        }
        OmpStopping::Sparsity(k) => k.min(n),
        OmpStopping::Residual(t) if !(t >= 0.0) => {
            return Err(Error::InvalidParameter("residual threshold must be non-negative".into()));
        }
        OmpStopping::Residual(_) => m.min(n),
    };
    let norms: Vec<f64> = matrix.column_iter().map(|c| c.norm()).collect();
    let y_norm = y.norm();
    let negligible = 1e-13 * y_norm;

    let mut selected: Vec<usize> = Vec::new();
    let mut taken = vec![false; n];
    let mut amplitudes = DVector::zeros(0);
    let mut residual = y.clone();
    let done = |r: f64, count: usize| match stopping {
        OmpStopping::Sparsity(_) => count >= cap || r <= negligible,
        OmpStopping::Residual(t) => count >= cap || r <= t.max(negligible),
    };

    while !done(residual.norm(), selected.len()) {
        let corr = matrix.tr_mul(&residual);
        let pick = (0..n)
            .filter(|&j| !taken[j] && norms[j] > 0.0)
            .map(|j| (j, corr[j].abs() / norms[j]))
            .fold(None, |best: Option<(usize, f64)>, (j, c)| match best {
                Some((_, b)) if b >= c => best,
                _ => Some((j, c)),
            });
        let Some((j, score)) = pick else { break };
        if score <= negligible {
            break;
        }
        taken[j] = true;
        selected.push(j);

        let sub = DMatrix::from_fn(m, selected.len(), |i, c| matrix[(i, selected[c])]);
        let svd = sub.clone().svd(true, true);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::RankDeficientSelection { condition });
        }
        amplitudes = svd.solve(y, 0.0).map_err(|e| Error::Format(e.to_string()))?;
        residual = y - &sub * &amplitudes;
    }

    let mut coefficients = DVector::zeros(n);
    for (&j, &v) in selected.iter().zip(amplitudes.iter()) {
        coefficients[j] = v;
    }
    Ok(OmpSolution { coefficients, residual_norm: residual.norm(), iterations: selected.len(), selected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_columns(m: usize, n: usize) -> DMatrix<f64> {
        let mut a = DMatrix::from_fn(m, n, |i, j| ((i * 31 + j * 17 + i * j) % 23) as f64 - 11.0);
        for mut c in a.column_iter_mut() {
            let s = c.norm();
            c /= s;
        }
        a
    }

    #[test]
    fn single_column_measurement() {
        let a = unit_columns(8, 20);
        let y = a.column(7) * 3.0;
        let s = solve_omp(&a, &y, OmpStopping::Sparsity(1)).unwrap();
        assert_eq!(s.selected, vec![7]);
        assert!((s.coefficients[7] - 3.0).abs() < 1e-12);
        assert!(s.residual_norm < 1e-12);
    }

    #[test]
    fn exact_fit_stops_early() {
        let a = unit_columns(8, 20);
        let y = a.column(7) * 3.0;
        let s = solve_omp(&a, &y, OmpStopping::Sparsity(4)).unwrap();
        assert_eq!(s.selected, vec![7]);
    }

    #[test]
    fn zero_measurement() {
        let a = unit_columns(8, 20);
        let s = solve_omp(&a, &DVector::zeros(8), OmpStopping::Sparsity(3)).unwrap();
        assert!(s.selected.is_empty());
        let s = solve_omp(&a, &DVector::zeros(8), OmpStopping::Residual(0.0)).unwrap();
        assert!(s.selected.is_empty());
    }

    #[test]
    fn residual_stopping() {
        let a = DMatrix::identity(4, 4);
        let y = DVector::from_vec(vec![4.0, 3.0, 0.2, 0.1]);
        let s = solve_omp(&a, &y, OmpStopping::Residual(0.5)).unwrap();
        assert_eq!(s.selected, vec![0, 1]);
        assert!(s.residual_norm <= 0.5);
    }

    #[test]
    fn nearly_collinear_columns_are_rank_deficient() {
        let delta = 5e-13;
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 1.0;
        a[(1, 1)] = delta;
        a[(2, 2)] = 1.0;
        let s = a.column(1).norm();
        a.column_mut(1).scale_mut(1.0 / s);
        let y = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert!(matches!(
            solve_omp(&a, &y, OmpStopping::Sparsity(2)),
            Err(Error::RankDeficientSelection { .. })
        ));
    }

    #[test]
    fn sparsity_above_measurements_is_rejected() {
        let a = unit_columns(3, 5);
        assert!(solve_omp(&a, &DVector::zeros(3), OmpStopping::Sparsity(4)).is_err());
    }
}
