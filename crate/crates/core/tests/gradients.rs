mod common;

use common::*;
use icad::neural::{Activation, DenseLayer, Mlp};

#[test]
fn forward_matches_hand_computation() {
    // 2 -> 2 (elu) -> 1 (identity)
    let l1 = DenseLayer::new(2, 2, vec![1.0, -2.0, 0.5, 0.25], Some(vec![0.1, -0.3]), Activation::Elu).unwrap();
    let l2 = DenseLayer::new(2, 1, vec![2.0, -1.0], Some(vec![0.5]), Activation::Identity).unwrap();
    let net = Mlp::new(vec![l1, l2]).unwrap();
    let x = [0.3, 0.7];
    let a0: f64 = 1.0 * 0.3 - 2.0 * 0.7 + 0.1; // -1.0
    let a1: f64 = 0.5 * 0.3 + 0.25 * 0.7 - 0.3; // 0.025
    let h0 = a0.exp() - 1.0;
    let h1 = a1;
    let expected = 2.0 * h0 - h1 + 0.5;
    let got = net.predict(&x).unwrap();
    assert!((got[0] - expected).abs() < 1e-15, "{} vs {expected}", got[0]);
}

#[test]
fn sigmoid_forward_matches_logistic() {
    let l = DenseLayer::new(1, 1, vec![3.0], None, Activation::Sigmoid).unwrap();
    let net = Mlp::new(vec![l]).unwrap();
    let y = net.predict(&[0.5]).unwrap()[0];
    assert!((y - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-15);
}

#[test]
fn mlp_gradients_match_finite_differences() {
    for seed in 0..100 {
        for act in [Activation::Elu, Activation::Sigmoid, Activation::Identity] {
            let e = mlp_grad_error(seed, act);
            assert!(e < GRAD_TOLERANCE, "seed {seed} {act:?}: {e}");
        }
    }
}

#[test]
fn vae_gradients_match_finite_differences() {
    for seed in 0..100 {
        let e = vae_grad_error(seed, false);
        assert!(e < GRAD_TOLERANCE, "seed {seed}: {e}");
    }
}

#[test]
fn svdd_gradients_match_finite_differences() {
    for seed in 0..100 {
        let e = svdd_grad_error(seed, false);
        assert!(e < GRAD_TOLERANCE, "seed {seed}: {e}");
    }
}

#[test]
fn corrupted_gradients_are_caught() {
    for seed in 0..10 {
        assert!(vae_grad_error(seed, true) > GRAD_TOLERANCE);
        assert!(svdd_grad_error(seed, true) > GRAD_TOLERANCE);
    }
}
