//! Basis pursuit denoising,
//!
//! ```text
//! minimize |x|₁  subject to  |Â x − y|₂ ≤ η,
//! ```
//!
//! through the penalized form `½|Â z − y|² + λ|z|₁` on the column-normalized
//! matrix, so each `|x_j|` is weighted by the norm of its column. Each
//! penalized problem is solved by accelerated proximal gradient (FISTA with
//! adaptive restart) over a working set of columns that grows until the
//! optimality conditions hold on every column. The residual of the penalized solution is nondecreasing in `λ`, so an outer
//! bisection on `log λ` finds the weight where the constraint is active.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::check_dims;
use crate::{Error, Result};

/// Width of the accepted residual window below `η`.
const RESIDUAL_WINDOW: f64 = 0.01;
/// Relative slack on `|a_jᵀ r| ≤ λ` before a column joins the working set.
const KKT_SLACK: f64 = 1e-6;
/// Smallest penalty tried, relative to `|Âᵀ y|∞`.
const PENALTY_FLOOR: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpdnSettings {
    /// Residual bound `η`.
    pub eta: f64,
    /// Iteration cap for each proximal-gradient solve.
    pub max_iterations: usize,
    /// Relative iterate change that ends a proximal-gradient solve.
    pub convergence_tolerance: f64,
    /// First penalty weight tried, as a fraction of `|Âᵀ y|∞`.
    pub penalty_parameter: f64,
}

impl Default for BpdnSettings {
    fn default() -> Self {
        Self { eta: 0.0, max_iterations: 100_000, convergence_tolerance: 1e-8, penalty_parameter: 1e-2 }
    }
}

impl BpdnSettings {
    pub fn with_eta(eta: f64) -> Self {
        Self { eta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter("eta must be non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::InvalidParameter("convergence_tolerance must be positive".into()));
        }
        if !(self.penalty_parameter > 0.0 && self.penalty_parameter <= 1.0) {
            return Err(Error::InvalidParameter("penalty_parameter must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpdnSolution {
    /// `x*` in the scale of the input matrix.
    pub coefficients: DVector<f64>,
    pub residual_norm: f64,
    /// Total proximal-gradient iterations over all penalty weights.
    pub iterations: usize,
    /// Penalty weight of the returned solution (normalized columns).
    pub penalty: f64,
    pub converged: bool,
}

/// Distance from `y` to the range of `matrix`.
pub fn min_residual(matrix: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let (m, n) = matrix.shape();
    if m == 0 || n == 0 {
        return y.norm();
    }
    if m <= n {
        let gram = matrix * matrix.transpose();
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.amax();
        let cutoff = top * (m.max(n) as f64) * f64::EPSILON;
        let outside: f64 = eig
            .eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .filter(|(l, _)| **l <= cutoff)
            .map(|(_, u)| u.dot(y).powi(2))
            .sum();
        outside.sqrt()
    } else {
        let svd = matrix.clone().svd(true, false);
        let u = svd.u.as_ref().expect("requested U");
        let top = svd.singular_values.amax();
        let cutoff = top * (m as f64) * f64::EPSILON;
        // project explicitly; |y|² − Σ(u·y)² loses everything below √ε|y|
        let mut residual = y.clone();
        for (_, u) in svd.singular_values.iter().zip(u.column_iter()).filter(|(s, _)| **s > cutoff) {
            residual.axpy(-u.dot(&residual), &u, 1.0);
        }
        residual.norm()
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Penalized least squares on a fixed normalized matrix, warm-startable.
struct Lasso<'a> {
    a: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    tolerance: f64,
    max_iterations: usize,
}

struct LassoOutcome {
    iterations: usize,
    converged: bool,
}

impl Lasso<'_> {
    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut r = self.y.clone();
        for (j, &v) in z.iter().enumerate() {
            if v != 0.0 {
                r.axpy(-v, &self.a.column(j), 1.0);
            }
        }
        r
    }

    /// Columns outside `ws` violating `|a_jᵀ r| ≤ λ`, strongest first.
    fn violators(&self, z: &DVector<f64>, lambda: f64, in_ws: &[bool]) -> Vec<usize> {
        let corr = self.a.tr_mul(&self.residual(z));
        let limit = lambda * (1.0 + KKT_SLACK);
        let mut v: Vec<usize> = (0..corr.len()).filter(|&j| !in_ws[j] && corr[j].abs() > limit).collect();
        v.sort_by(|&i, &j| corr[j].abs().total_cmp(&corr[i].abs()).then(i.cmp(&j)));
        v
    }

    /// Solves at penalty `lambda`, starting from and overwriting `z`.
    fn solve(&self, lambda: f64, z: &mut DVector<f64>) -> LassoOutcome {
        let n = self.a.ncols();
        let mut in_ws = vec![false; n];
        let mut ws: Vec<usize> = Vec::new();
        for (j, &v) in z.iter().enumerate() {
            if v != 0.0 {
                in_ws[j] = true;
                ws.push(j);
            }
        }
        let mut outcome = LassoOutcome { iterations: 0, converged: true };
        let mut first = true;
        loop {
            let violators = self.violators(z, lambda, &in_ws);
            if violators.is_empty() && !(first && !ws.is_empty()) {
                return outcome;
            }
            first = false;
            let budget = ws.len().max(16);
            for &j in violators.iter().take(budget) {
                in_ws[j] = true;
                ws.push(j);
            }
            ws.sort_unstable();
            let (iters, converged) = self.solve_restricted(lambda, &ws, z);
            outcome.iterations += iters;
            if !converged {
                outcome.converged = false;
                return outcome;
            }
            if ws.len() == n {
                return outcome;
            }
        }
    }

    /// FISTA with gradient-based restart on the columns in `ws`.
    fn solve_restricted(&self, lambda: f64, ws: &[usize], z: &mut DVector<f64>) -> (usize, bool) {
        let m = self.a.nrows();
        let w = ws.len();
        let sub = DMatrix::from_fn(m, w, |i, c| self.a[(i, ws[c])]);
        let gram = sub.tr_mul(&sub);
        let b = sub.tr_mul(self.y);
        let lipschitz = SymmetricEigen::new(gram.clone()).eigenvalues.max().max(f64::MIN_POSITIVE);
        let step = 1.0 / lipschitz;
        let shrink = lambda * step;

        let mut x = DVector::from_fn(w, |c, _| z[ws[c]]);
        let mut v = x.clone();
        let mut t = 1.0f64;
        let mut grad = DVector::zeros(w);
        let mut converged = false;
        let mut iters = 0;
        while iters < self.max_iterations {
            iters += 1;
            grad.gemv(1.0, &gram, &v, 0.0);
            grad -= &b;
            let next = DVector::from_fn(w, |c, _| soft_threshold(v[c] - step * grad[c], shrink));
            let delta = &next - &x;
            let change = delta.norm();
            let restart = (&v - &next).dot(&delta) > 0.0;
            let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            v = if restart { next.clone() } else { &next + &delta * ((t - 1.0) / t_next) };
            t = t_next;
            x = next;
            if change <= self.tolerance * x.norm() {
                converged = true;
                break;
            }
        }
        z.fill(0.0);
        for (c, &j) in ws.iter().enumerate() {
            z[j] = x[c];
        }
        (iters, converged)
    }
}

/// Least-squares refit of `z` on its own support when that interpolates `y`
/// with an unchanged sign pattern.
fn polish(a: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Option<DVector<f64>> {
    let peak = z.amax();
    if peak == 0.0 {
        return None;
    }
    let support: Vec<usize> = (0..z.len()).filter(|&j| z[j].abs() > 1e-9 * peak).collect();
    if support.len() > a.nrows() {
        return None;
    }
    let sub = DMatrix::from_fn(a.nrows(), support.len(), |i, c| a[(i, support[c])]);
    let fit = sub.svd(true, true).solve(y, f64::EPSILON).ok()?;
    if support.iter().zip(fit.iter()).any(|(&j, &v)| v.signum() != z[j].signum()) {
        return None;
    }
    let mut out = DVector::zeros(z.len());
    for (&j, &v) in support.iter().zip(fit.iter()) {
        out[j] = v;
    }
    Some(out)
}

/// `min |z|₁` subject to `a z = y`, as a linear program over `z = u − v`
/// with `u, v ≥ 0`. Returns the minimizer and the simplex pivot count, or
/// `None` when the simplex gives up.
fn basis_pursuit(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, usize)> {
    let (m, n) = a.shape();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..m {
        let mut row = LinearExpr::empty();
        for j in 0..n {
            let v = a[(i, j)];
            if v != 0.0 {
                row.add(pos[j], v);
                row.add(neg[j], -v);
            }
        }
        lp.add_constraint(row, ComparisonOp::Eq, y[i]);
    }
    let solution = lp.solve().ok()?.into_solution().ok()?;
    let z = DVector::from_fn(n, |j, _| solution.var_value(pos[j]) - solution.var_value(neg[j]));
    Some((z, solution.stats().lp_iterations as usize))
}

/// Solves the basis pursuit denoising program for `matrix` and `y`.
///
/// Columns are scaled to unit norm internally (zero columns get a zero
/// coefficient) and the returned coefficients are mapped back to the
/// input scale. For `η > 0` the returned residual lies in
/// `[0.99 η, η]` unless the bisection bracket collapses first, in which case
/// the feasible end of the bracket is returned. `η = 0` is solved exactly
/// as a linear program, with continuation to a vanishing penalty as the
/// fallback; either way a least-squares refit on the identified support
/// removes the remaining round-off.
pub fn solve_bpdn(matrix: &DMatrix<f64>, y: &DVector<f64>, settings: &BpdnSettings) -> Result<BpdnSolution> {
    settings.validate()?;
    check_dims(matrix, y)?;
    let n = matrix.ncols();
    let eta = settings.eta;
    let y_norm = y.norm();
    if y_norm <= eta {
        return Ok(BpdnSolution {
            coefficients: DVector::zeros(n),
            residual_norm: y_norm,
            iterations: 0,
            penalty: f64::INFINITY,
            converged: true,
        });
    }

    let norms: Vec<f64> = matrix.column_iter().map(|c| c.norm()).collect();
    let mut a = matrix.clone();
    for (mut col, &s) in a.column_iter_mut().zip(&norms) {
        if s > 0.0 {
            col /= s;
        }
    }

    let floor = min_residual(&a, y);
    let abs_slack = 1e-9 * y_norm;
    if eta + abs_slack < floor {
        return Err(Error::InfeasibleEta { eta, min_residual: floor });
    }

    let to_input_scale = |z: &DVector<f64>| DVector::from_fn(n, |j, _| if norms[j] > 0.0 { z[j] / norms[j] } else { 0.0 });
    if eta == 0.0 {
        if let Some((z, pivots)) = basis_pursuit(&a, y) {
            let z = polish(&a, y, &z).unwrap_or(z);
            let coefficients = to_input_scale(&z);
            return Ok(BpdnSolution {
                residual_norm: super::residual_norm(matrix, &coefficients, y),
                coefficients,
                iterations: pivots,
                penalty: 0.0,
                converged: true,
            });
        }
    }

    let lasso = Lasso { a: &a, y, tolerance: settings.convergence_tolerance, max_iterations: settings.max_iterations };
    let lambda_max = a.tr_mul(y).amax();
    let mut total = 0usize;
    let mut z = DVector::zeros(n);
    let residual_of = |z: &DVector<f64>| lasso.residual(z).norm();
    let in_window = |r: f64| r <= eta && r >= (1.0 - RESIDUAL_WINDOW) * eta;

    // descend until the residual drops to η
    let mut hi = lambda_max;
    let mut lambda = settings.penalty_parameter * lambda_max;
    let mut feasible: Option<(f64, DVector<f64>, bool)> = None;
    let mut last_converged = true;
    while lambda >= PENALTY_FLOOR * lambda_max {
        let out = lasso.solve(lambda, &mut z);
        total += out.iterations;
        last_converged = out.converged;
        if residual_of(&z) <= eta {
            feasible = Some((lambda, z.clone(), out.converged));
            break;
        }
        hi = lambda;
        lambda /= 10.0;
    }

    let (penalty, z, converged) = match feasible {
        None => {
            // interpolation limit: η at or below what any positive penalty reaches
            match polish(&a, y, &z) {
                Some(p) if residual_of(&p) <= eta * (1.0 + settings.convergence_tolerance) + abs_slack => {
                    (0.0, p, last_converged)
                }
                _ => (lambda * 10.0, z, false),
            }
        }
        Some((mut lo, mut z_lo, mut lo_converged)) => {
            if !in_window(residual_of(&z_lo)) {
                let mut z = z_lo.clone();
                for _ in 0..MAX_BISECTIONS {
                    if hi / lo < 1.0 + 1e-12 {
                        break;
                    }
                    let mid = (lo * hi).sqrt();
                    let out = lasso.solve(mid, &mut z);
                    total += out.iterations;
                    let r = residual_of(&z);
                    if r > eta {
                        hi = mid;
                    } else {
                        lo = mid;
                        z_lo.copy_from(&z);
                        lo_converged = out.converged;
                        if in_window(r) {
                            break;
                        }
                    }
                }
            }
            (lo, z_lo, lo_converged)
        }
    };

    let coefficients = to_input_scale(&z);
    let solution = BpdnSolution {
        residual_norm: super::residual_norm(matrix, &coefficients, y),
        coefficients,
        iterations: total,
        penalty,
        converged,
    };
    if converged {
        Ok(solution)
    } else {
        Err(Error::MaxIterationsExceeded { best: Box::new(solution) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_interpolates() {
        let a = DMatrix::identity(5, 5);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.0, 0.5, 3.0]);
        let s = solve_bpdn(&a, &y, &BpdnSettings::with_eta(0.0)).unwrap();
        assert!((&s.coefficients - &y).amax() < 1e-10);
    }

    #[test]
    fn zero_measurement_gives_zero() {
        let a = DMatrix::from_fn(4, 9, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let s = solve_bpdn(&a, &DVector::zeros(4), &BpdnSettings::with_eta(0.0)).unwrap();
        assert_eq!(s.coefficients, DVector::zeros(9));
    }

    #[test]
    fn residual_lands_in_window() {
        let a = DMatrix::from_fn(6, 10, |i, j| ((i * 13 + j * 7) % 11) as f64 - 5.0);
        let y = DVector::from_fn(6, |i, _| (i as f64 * 0.7).sin() * 4.0);
        let eta = 0.3 * y.norm();
        let s = solve_bpdn(&a, &y, &BpdnSettings::with_eta(eta)).unwrap();
        assert!(s.residual_norm <= eta * (1.0 + 1e-8));
        assert!(s.residual_norm >= 0.99 * eta * (1.0 - 1e-8));
    }

    #[test]
    fn large_eta_returns_zero() {
        let a = DMatrix::identity(3, 3);
        let y = DVector::from_vec(vec![0.1, 0.1, 0.1]);
        let s = solve_bpdn(&a, &y, &BpdnSettings::with_eta(1.0)).unwrap();
        assert_eq!(s.coefficients, DVector::zeros(3));
    }

    #[test]
    fn infeasible_eta_is_reported() {
        // one column cannot explain a two-dimensional measurement
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            solve_bpdn(&a, &y, &BpdnSettings::with_eta(0.5)),
            Err(Error::InfeasibleEta { .. })
        ));
        assert!(solve_bpdn(&a, &y, &BpdnSettings::with_eta(1.0)).is_ok());
    }

    #[test]
    fn min_residual_of_tall_and_wide() {
        let tall = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![2.0, 3.0, 4.0]);
        assert!((min_residual(&tall, &y) - 5.0).abs() < 1e-12);
        let wide = DMatrix::from_fn(2, 4, |i, j| if i == 0 { j as f64 + 1.0 } else { 0.0 });
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!((min_residual(&wide, &y) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_columns_get_zero_coefficients() {
        let a = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, 2.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![4.0, 1.0]);
        let s = solve_bpdn(&a, &y, &BpdnSettings::with_eta(0.0)).unwrap();
        assert_eq!(s.coefficients[0], 0.0);
        assert!((s.coefficients[1] - 2.0).abs() < 1e-9);
        assert!((s.coefficients[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_settings() {
        let a = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        for s in [
            BpdnSettings { eta: -1.0, ..Default::default() },
            BpdnSettings { max_iterations: 0, ..Default::default() },
            BpdnSettings { convergence_tolerance: 0.0, ..Default::default() },
        ] {
            assert!(solve_bpdn(&a, &y, &s).is_err());
        }
        assert!(matches!(
            solve_bpdn(&a, &DVector::zeros(3), &BpdnSettings::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
