//! Spanning trees against exhaustive enumeration, and the Gaussian link
//! probabilities against sampling and quadrature.

mod common;

use common::{brute_force_max_tree, erf_quadrature, monte_carlo_pair, prufer_tree, random_weights};
use gridshare::affinity::{erf, prob_abs_diff_exceeds, prob_same_sign, PairStats};
use gridshare::clustering::max_spanning_tree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn prufer_decoding_covers_every_tree_once() {
    // Cayley: 4^2 = 16 distinct trees on four labels.
    let mut seen = std::collections::BTreeSet::new();
    for a in 0..4 {
        for b in 0..4 {
            seen.insert(prufer_tree(&[a, b], 4));
        }
    }
    assert_eq!(seen.len(), 16);
}

#[test]
fn kruskal_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let n = rng.random_range(1..=7);
        let w = random_weights(n, &mut rng);
        assert_eq!(max_spanning_tree(&w), brute_force_max_tree(&w), "case {case}: {w:?}");
    }
}

#[test]
fn kruskal_attains_the_optimum_under_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let mut w = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let x = rng.random_range(0..3) as f64;
                w[i][j] = x;
                w[j][i] = x;
            }
        }
        let weight = |t: &[(usize, usize)]| t.iter().map(|&(i, j)| w[i][j]).sum::<f64>();
        let tree = max_spanning_tree(&w);
        assert_eq!(tree.len(), n - 1);
        assert_eq!(weight(&tree), weight(&brute_force_max_tree(&w)));
    }
}

fn pairs() -> Vec<(PairStats, f64)> {
    vec![
        (PairStats { mu_i: 0.0, sigma_i: 1.0, mu_j: 0.0, sigma_j: 1.0 }, 0.5),
        (PairStats { mu_i: 120.0, sigma_i: 40.0, mu_j: -30.0, sigma_j: 25.0 }, 100.0),
        (PairStats { mu_i: -0.3, sigma_i: 0.2, mu_j: -0.1, sigma_j: 0.9 }, 0.05),
        (PairStats { mu_i: 2.0, sigma_i: 1.5, mu_j: 1.0, sigma_j: 0.5 }, 3.0),
        (PairStats { mu_i: -500.0, sigma_i: 300.0, mu_j: 400.0, sigma_j: 200.0 }, 0.0),
    ]
}

#[test]
fn probabilities_match_sampling() {
    for (k, (p, delta)) in pairs().into_iter().enumerate() {
        let (exceed, same) = monte_carlo_pair(&p, delta, 1_000_000, 40 + k as u64);
        let a = prob_abs_diff_exceeds(&p, delta);
        let b = prob_same_sign(p.mu_i, p.sigma_i, p.mu_j, p.sigma_j);
        assert!((a - exceed).abs() <= 2e-3, "pair {k}: {a} vs sampled {exceed}");
        assert!((b - same).abs() <= 2e-3, "pair {k}: {b} vs sampled {same}");
        // Complement computed from the opposite-sign events directly.
        let opposite = prob_same_sign(p.mu_i, p.sigma_i, -p.mu_j, p.sigma_j);
        assert!((b + opposite - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn erf_matches_quadrature() {
    let mut x = -6.0;
    while x <= 6.0 {
        assert!((erf(x) - erf_quadrature(x)).abs() <= 1e-7, "x = {x}");
        x += 0.05;
    }
}
