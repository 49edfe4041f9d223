//! Counting checked against a literal simulation of the full
//! `2^t x N` register: controlled powers of the iterate, then a dense
//! inverse DFT on the counting register.

use std::f64::consts::PI;

use num_complex::Complex64;
use qdist_core::counting::{count_marked, outcome_distribution, CountingConfig, CountingMode};
use qdist_core::state::MarkedSet;
use rand::seq::SliceRandom;

/// Oracle sign flip, then inversion about the mean.
fn grover(v: &mut [Complex64], marked: &MarkedSet) {
    for &k in marked.iter() {
        v[k] = -v[k];
    }
    let mean = v.iter().sum::<Complex64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x = mean * 2.0 - *x;
    }
}

fn literal_outcome_distribution(marked: &MarkedSet, bits: u32) -> Vec<f64> {
    let n = marked.n_values();
    let m = 1usize << bits;
    let amp = Complex64::new(1.0 / ((n * m) as f64).sqrt(), 0.0);
    // rows[x] is the system register paired with |x> on the counting register.
    let mut rows: Vec<Vec<Complex64>> = vec![vec![amp; n]; m];
    for k in 0..bits {
        let power = 1usize << k;
        for (x, row) in rows.iter_mut().enumerate() {
            if x & power != 0 {
                for _ in 0..power {
                    grover(row, marked);
                }
            }
        }
    }
    let mut probs = vec![0.0; m];
    let norm = 1.0 / (m as f64).sqrt();
    for (y, p) in probs.iter_mut().enumerate() {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, row) in rows.iter().enumerate() {
                let angle = -2.0 * PI * ((x * y) % m) as f64 / m as f64;
                acc += row[j] * Complex64::from_polar(norm, angle);
            }
            *p += acc.norm_sqr();
        }
    }
    probs
}

fn random_marked(n: usize, r: usize, seed: u64) -> MarkedSet {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut qdist_core::rng_from_seed(seed));
    MarkedSet::new(n, idx[..r].iter().copied()).unwrap()
}

#[test]
fn outcome_distribution_matches_the_full_register() {
    for (n, bits) in [(8usize, 6u32), (16, 7), (5, 4)] {
        for r in 0..=n {
            let marked = random_marked(n, r, (n * 100 + r) as u64);
            let fast = outcome_distribution(&marked, bits).unwrap();
            let slow = literal_outcome_distribution(&marked, bits);
            let gap = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-10, "n = {n}, r = {r}: gap {gap}");
        }
    }
}

#[test]
fn default_precision_counts_exactly_in_deterministic_mode() {
    let mut rng = qdist_core::rng_from_seed(41);
    for n in [8usize, 16, 32] {
        let config = CountingConfig::default_for(n);
        for r in 0..=n {
            let marked = random_marked(n, r, r as u64);
            let est = count_marked(&marked, &config, &mut rng).unwrap();
            assert_eq!(est.estimate, r, "n = {n}");
            assert!((est.estimate_real - r as f64).abs() <= est.error_bound + 1e-12);
        }
    }
}

#[test]
fn complement_mirrors_the_estimate() {
    let mut rng = qdist_core::rng_from_seed(42);
    for n in [8usize, 12, 32] {
        let config = CountingConfig::default_for(n);
        for r in 0..=n {
            let a = random_marked(n, r, 7);
            let b = MarkedSet::from_predicate(n, |k| !a.contains(k)).unwrap();
            let ea = count_marked(&a, &config, &mut rng).unwrap();
            let eb = count_marked(&b, &config, &mut rng).unwrap();
            assert!((ea.estimate_real + eb.estimate_real - n as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn low_precision_stochastic_estimates_stay_within_the_bound_mostly() {
    // With t bits the standard bound holds with probability at least 8/pi^2.
    let n = 64;
    let config = CountingConfig {
        precision_bits: 5,
        mode: CountingMode::Stochastic,
    };
    let marked = random_marked(n, 13, 1);
    let mut rng = qdist_core::rng_from_seed(43);
    let trials = 2000;
    let within = (0..trials)
        .filter(|_| {
            let e = count_marked(&marked, &config, &mut rng).unwrap();
            (e.estimate_real - 13.0).abs() <= e.error_bound
        })
        .count();
    let rate = within as f64 / trials as f64;
    let floor = 8.0 / (PI * PI);
    let sigma = (floor * (1.0 - floor) / trials as f64).sqrt();
    assert!(rate >= floor - 3.0 * sigma, "rate {rate}");
}
