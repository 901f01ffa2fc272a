use mpc_execution::models::{
    build_ladder, fill_covariance, trading_cost, FillProbability, LinearFillModel, OrderKind, Quote,
};
use mpc_execution::orderbook::Side;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Covariance of the nested fill indicators by direct enumeration: the
/// deepest filled level K has `P(K >= i) = pi_i`, and candidate `i` fills iff
/// `K >= i`.
fn enumerated(pi: &[f64]) -> DMatrix<f64> {
    let d = pi.len();
    // outcome k = 0..=d means candidates 0..k fill
    let prob: Vec<f64> = (0..=d)
        .map(|k| {
            let upper = if k == 0 { 1.0 } else { pi[k - 1] };
            let lower = if k == d { 0.0 } else { pi[k] };
            upper - lower
        })
        .collect();
    let indicator = |k: usize, i: usize| if i < k { 1.0 } else { 0.0 };
    let mean: Vec<f64> = (0..d).map(|i| (0..=d).map(|k| prob[k] * indicator(k, i)).sum()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        (0..=d)
            .map(|k| prob[k] * (indicator(k, i) - mean[i]) * (indicator(k, j) - mean[j]))
            .sum()
    })
}

fn descending(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut pi: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
    pi.sort_by(|a, b| b.total_cmp(a));
    pi
}

#[test]
fn covariance_matches_enumeration_and_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let d = rng.random_range(1..=12);
        let pi = descending(&mut rng, d);
        let s = fill_covariance(&pi);
        let e = enumerated(&pi);
        assert!((&s - &e).amax() <= 1e-12);
        assert_eq!(s, s.transpose());
        for i in 0..d {
            assert!((s[(i, i)] - pi[i] * (1.0 - pi[i])).abs() <= 1e-15);
        }
        assert!(SymmetricEigen::new(s).eigenvalues.min() >= -1e-10);
    }
}

#[test]
fn ladder_probabilities_and_costs() {
    let quote = Quote {
        bid: Some(1999),
        ask: Some(2001),
    };
    for side in [Side::Buy, Side::Sell] {
        let ladder = build_ladder(side, &quote, 11).unwrap();
        assert_eq!(ladder.iter().filter(|c| c.kind == OrderKind::Market).count(), 1);
        assert_eq!(ladder[0].kind, OrderKind::Market);
        let pi = LinearFillModel::default().probabilities(&ladder);
        assert_eq!(pi[0], 1.0);
        let c = trading_cost(&ladder, side, &quote).unwrap();
        assert_eq!(c[0], 0.5);
        assert_eq!(c[1], -0.5);
        for i in 1..11 {
            assert!(pi[i] < pi[i - 1] && c[i] < c[i - 1]);
        }
        let s = fill_covariance(&pi);
        assert!(s.row(0).iter().all(|&x| x == 0.0));
    }
}

proptest! {
    #[test]
    fn two_candidate_covariance(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (p1, p2) = if a >= b { (a, b) } else { (b, a) };
        let s = fill_covariance(&[p1, p2]);
        prop_assert_eq!(s[(0, 1)], p2 - p1 * p2);
        prop_assert_eq!(s[(1, 0)], p2 - p1 * p2);
    }
}
