#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian(m: usize, n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn normalized(mut a: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in a.column_iter_mut() {
        let s = c.norm();
        c /= s;
    }
    a
}

/// `k` distinct indices below `n`, sorted.
pub fn random_support(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut s = rand::seq::index::sample(rng, n, k).into_vec();
    s.sort_unstable();
    s
}

/// Random amplitudes in `±[0.5, 1.5]` on `support`.
pub fn sparse_vector(n: usize, support: &[usize], rng: &mut impl Rng) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for &i in support {
        let mag: f64 = rng.random_range(0.5..1.5);
        x[i] = if rng.random::<bool>() { mag } else { -mag };
    }
    x
}

fn subsets(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if current.len() == k {
        out.push(current.clone());
        return;
    }
    for i in start..n {
        current.push(i);
        subsets(n, k, i + 1, current, out);
        current.pop();
    }
}

/// Smallest `|x|₁` over least-squares fits on every support of size at most
/// `max_support` whose residual is at most `tolerance`.
pub fn brute_force_min_l1(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    max_support: usize,
    tolerance: f64,
) -> Option<(f64, DVector<f64>)> {
    let n = a.ncols();
    let mut best: Option<(f64, DVector<f64>)> = None;
    if y.norm() <= tolerance {
        return Some((0.0, DVector::zeros(n)));
    }
    for k in 1..=max_support.min(n) {
        let mut all = Vec::new();
        subsets(n, k, 0, &mut Vec::new(), &mut all);
        for s in all {
            let sub = DMatrix::from_fn(a.nrows(), k, |i, c| a[(i, s[c])]);
            let Ok(fit) = sub.clone().svd(true, true).solve(y, 1e-14) else { continue };
            if (y - &sub * &fit).norm() > tolerance {
                continue;
            }
            let l1 = fit.abs().sum();
            if best.as_ref().is_none_or(|(b, _)| l1 < *b) {
                let mut x = DVector::zeros(n);
                for (c, &j) in s.iter().enumerate() {
                    x[j] = fit[c];
                }
                best = Some((l1, x));
            }
        }
    }
    best
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Sylvester Hadamard matrix of order `2^p`.
pub fn hadamard(p: u32) -> DMatrix<f64> {
    let mut h = DMatrix::from_element(1, 1, 1.0);
    for _ in 0..p {
        let n = h.nrows();
        h = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let v = h[(i % n, j % n)];
            if i >= n && j >= n {
                -v
            } else {
                v
            }
        });
    }
    h
}
