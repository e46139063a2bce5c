mod common;

use common::rng;
use nalgebra::{DMatrix, DVector};
use neuroplex::ensemble::{Ensemble, WeightVector};
use neuroplex::multiplex::{interference_component, multiplex, signal_component, signal_to_interference_ratio};
use neuroplex::pipeline::{recover, run_trial, transmit, PipelineConfig, TrialSeeds};
use neuroplex::recovery::residual_norm;
use proptest::prelude::*;
use rand::Rng;

fn random_ensemble(seed: u64, m: usize, n: usize) -> Ensemble {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(m, n, |_, _| r.random_range(-2.0..2.0));
    Ensemble::from_parts(a, vec![0, 1], 1.0, vec![seed]).unwrap()
}

fn weights(values: Vec<f64>, support: Vec<usize>) -> WeightVector {
    WeightVector { values: DVector::from_vec(values), significant_support: support }
}

#[test]
fn reference_signal_to_interference_ratio() {
    let cfg = PipelineConfig::default();
    let tx = transmit(&cfg.ensemble, &TrialSeeds::derive(42, 0)).unwrap();
    let sir = signal_to_interference_ratio(&tx.ensemble, &tx.weights).unwrap();
    assert!((sir - 7.475_281_943_477_452).abs() < 1e-9, "{sir:.17e}");
}

#[test]
fn threshold_window_at_reference_settings() {
    // The coefficients of the reference problem straddle the window
    // [0.1, 0.6], so a different T in it changes the recovered support in
    // every one of these trials.
    let cfg = PipelineConfig::default();
    let stable = (0..5)
        .filter(|&t| {
            let run = run_trial(&cfg, t as usize, &TrialSeeds::derive(42, t)).unwrap();
            !run.recovery.x_star.iter().any(|x| (0.1..0.6).contains(&x.abs()))
        })
        .count();
    assert_eq!(stable, 0);
}

#[test]
fn stored_residual_matches_recomputation() {
    let cfg = PipelineConfig::default();
    let run = run_trial(&cfg, 0, &TrialSeeds::derive(42, 0)).unwrap();
    let r = &run.recovery;
    let again = residual_norm(run.receiver.matrix(), &r.x_star, &run.transmission.measurement.y);
    assert!((again - r.residual_norm).abs() <= 1e-9 * again);
    assert!(r.residual_norm <= cfg.eta() * (1.0 + 1e-8));
    for (i, rec) in &r.reconstructions {
        assert_eq!(*rec, run.receiver.matrix().column(*i) * r.x_star[*i]);
    }
}

#[test]
fn receiver_without_perturbation_interpolates() {
    let cfg = PipelineConfig { receiver_noise_variance: 0.0, ..PipelineConfig::default() };
    assert_eq!(cfg.eta(), 0.0);
    let seeds = TrialSeeds::derive(42, 1);
    let tx = transmit(&cfg.ensemble, &seeds).unwrap();
    let a_hat = neuroplex::ensemble::perturb_ensemble(&tx.ensemble, 0.0, seeds.receiver).unwrap();
    let r = recover(&cfg, a_hat.matrix(), &tx.measurement.y).unwrap();
    assert!(r.converged);
    assert!(r.residual_norm < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplex_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let e = random_ensemble(seed, 7, 11);
        let mut r = rng(seed ^ 1);
        let x1: Vec<f64> = (0..11).map(|_| r.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..11).map(|_| r.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = multiplex(&e, &weights(mix, vec![])).unwrap().y;
        let rhs = multiplex(&e, &weights(x1, vec![])).unwrap().y * alpha + multiplex(&e, &weights(x2, vec![])).unwrap().y * beta;
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(lhs.norm()).max(1e-300));
    }

    #[test]
    fn multiplex_splits_into_signal_and_interference(seed in any::<u64>(), support in prop::collection::btree_set(0usize..11, 0..5)) {
        let e = random_ensemble(seed, 6, 11);
        let mut r = rng(seed ^ 2);
        let x = weights((0..11).map(|_| r.random_range(-1.0..1.0)).collect(), support.into_iter().collect());
        let y = multiplex(&e, &x).unwrap().y;
        let parts = interference_component(&e, &x).unwrap().y + signal_component(&e, &x).unwrap().y;
        for (a, b) in y.iter().zip(parts.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
