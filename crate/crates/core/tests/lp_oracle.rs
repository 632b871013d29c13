//! The simplex against brute-force vertex enumeration, and a KKT certificate
//! check on larger random programs.

mod common;

use common::{certify, random_small_lp, vertex_oracle};
use gridshare::solver::{solve_lp, LinearProgram, Status, VarId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_vertex_enumeration_on_small_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..600 {
        let lp = random_small_lp(&mut rng);
        let sol = solve_lp(&lp).unwrap();
        match vertex_oracle(&lp) {
            Some(best) => {
                assert_eq!(sol.status, Status::Optimal, "case {case}: oracle found {best}\n{lp}");
                assert!((sol.objective - best).abs() <= 1e-8 * (1.0 + best.abs()), "case {case}: {} vs {best}\n{lp}", sol.objective);
                assert!(lp.max_violation(&sol.values) <= 1e-9 * (1.0 + lp.rhs_norm_inf()));
                optimal += 1;
            }
            None => {
                assert_eq!(sol.status, Status::Infeasible, "case {case}\n{lp}");
                infeasible += 1;
            }
        }
    }
    assert!(optimal > 100 && infeasible > 10, "generator covers both outcomes: {optimal}/{infeasible}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn larger_programs_carry_optimality_certificates(seed in any::<u64>(), n in 5usize..40, m in 3usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lp = LinearProgram::new();
        let vars: Vec<VarId> = (0..n).map(|_| {
            let hi = if rng.random_bool(0.5) { f64::INFINITY } else { rng.random_range(1.0..10.0) };
            lp.add_var(rng.random_range(-3.0..3.0), 0.0, hi)
        }).collect();
        lp.add_le(vars.iter().map(|&v| (v, 1.0)).collect(), 100.0);
        // A known interior-ish point keeps every program feasible.
        let x0: Vec<f64> = (0..n).map(|j| if lp.upper[j].is_finite() { lp.upper[j] * 0.3 } else { 1.0 }).collect();
        for _ in 0..m {
            let mut coeffs = Vec::new();
            for &v in &vars {
                if rng.random_bool(0.4) { coeffs.push((v, rng.random_range(-2.0..2.0))); }
            }
            let at: f64 = coeffs.iter().map(|&(v, c)| c * x0[v.0]).sum();
            if rng.random_bool(0.3) { lp.add_eq(coeffs, at); } else { lp.add_le(coeffs, at + rng.random_range(0.0..3.0)); }
        }
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        certify(&lp, &sol.values, &sol.duals, 1e-7);
    }
}
