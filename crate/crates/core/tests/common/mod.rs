//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

use gridshare::affinity::PairStats;
use gridshare::clustering::AssociationMatrix;
use gridshare::model::{
    BaseStation, BatteryParams, CableModel, ConsumptionModel, GenerationModel, NetworkModel, PriceSchedule, Profiles,
};
use gridshare::solver::{LinearProgram, RowKind, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Solves the square system `a x = b` by partial-pivot elimination.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum over all basic feasible points, or `None` if no vertex is feasible.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Every constraint as `g·x ≤ h`.
    let mut g: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut dense = vec![0.0; n];
        for &(v, c) in &row.coeffs {
            dense[v.0] += c;
        }
        g.push((dense.clone(), row.rhs));
        if row.kind == RowKind::Eq {
            g.push((dense.iter().map(|c| -c).collect(), -row.rhs));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        g.push((e.clone(), -lp.lower[j]));
        if lp.upper[j].is_finite() {
            e[j] = 1.0;
            g.push((e, lp.upper[j]));
        }
    }
    let m = g.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&i| g[i].0.clone()).collect();
        let b = idx.iter().map(|&i| g[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = g.iter().all(|(row, h)| row.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() <= h + 1e-7);
            if feasible {
                let obj = lp.objective_value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < m - n + k {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn random_small_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=5);
    let mut lp = LinearProgram::new();
    let vars: Vec<VarId> = (0..n)
        .map(|_| {
            let lo = if rng.random_bool(0.7) { 0.0 } else { -(rng.random_range(0..4) as f64) };
            let hi = if rng.random_bool(0.5) { f64::INFINITY } else { lo + rng.random_range(1..8) as f64 };
            lp.add_var(rng.random_range(-5..=5) as f64, lo, hi)
        })
        .collect();
    // A cap on the total keeps the region bounded.
    lp.add_le(vars.iter().map(|&v| (v, 1.0)).collect(), 20.0);
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for &v in &vars {
            if rng.random_bool(0.8) {
                coeffs.push((v, rng.random_range(-4..=4) as f64));
            }
        }
        let rhs = rng.random_range(-6..=12) as f64;
        match rng.random_range(0..4) {
            0 => lp.add_eq(coeffs, rhs),
            1 => lp.add_ge(coeffs, rhs),
            _ => lp.add_le(coeffs, rhs),
        };
    }
    lp
}

/// Checks primal feasibility, dual sign conditions and a zero duality gap.
pub fn certify(lp: &LinearProgram, x: &[f64], y: &[f64], tol: f64) {
    assert!(lp.max_violation(x) <= 1e-9 * (1.0 + lp.rhs_norm_inf()), "primal residual");
    let n = lp.num_vars();
    let mut d = lp.objective.clone();
    for (i, row) in lp.rows.iter().enumerate() {
        if row.kind == RowKind::Le {
            assert!(y[i] <= tol, "≤ row {i} has positive multiplier {}", y[i]);
        }
        for &(v, c) in &row.coeffs {
            d[v.0] -= c * y[i];
        }
    }
    // Lagrangian dual value: b·y + Σ_j min over bounds of d_j x_j.
    let mut dual = lp.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum::<f64>();
    for j in 0..n {
        if d[j] > tol {
            assert!(lp.lower[j].is_finite(), "reduced cost pushes free variable {j} down");
            dual += d[j] * lp.lower[j];
        } else if d[j] < -tol {
            assert!(lp.upper[j].is_finite(), "reduced cost pushes variable {j} up without bound");
            dual += d[j] * lp.upper[j];
        } else {
            dual += d[j] * x[j];
        }
    }
    let primal = lp.objective_value(x);
    assert!((primal - dual).abs() <= 1e-7 * (1.0 + primal.abs()), "gap {primal} vs {dual}");
}

/// Decodes a Prüfer sequence over `n` labels into a sorted edge list.
pub fn prufer_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).unwrap();
        edges.push((leaf.min(v), leaf.max(v)));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort();
    edges
}

/// Heaviest spanning tree by enumerating all `n^(n-2)` labelled trees.
pub fn brute_force_max_tree(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = weights.len();
    if n < 2 {
        return Vec::new();
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = (f64::NEG_INFINITY, Vec::new());
    loop {
        let tree = prufer_tree(&seq, n);
        let w: f64 = tree.iter().map(|&(i, j)| weights[i][j]).sum();
        if w > best.0 {
            best = (w, tree);
        }
        let mut k = 0;
        while k < len && seq[k] == n - 1 {
            seq[k] = 0;
            k += 1;
        }
        if k == len {
            return best.1;
        }
        seq[k] += 1;
    }
}

/// Symmetric weights drawn uniformly from `[-1, 1)`; ties have probability 0.
pub fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let x = rng.random_range(-1.0..1.0);
            w[i][j] = x;
            w[j][i] = x;
        }
    }
    w
}

/// Sampled `P[|E_i − E_j| > δ]` and `P[same sign]` for independent normals.
pub fn monte_carlo_pair(pair: &PairStats, delta: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Normal::new(pair.mu_i, pair.sigma_i).unwrap();
    let b = Normal::new(pair.mu_j, pair.sigma_j).unwrap();
    let (mut exceed, mut same) = (0usize, 0usize);
    for _ in 0..draws {
        let (x, y) = (a.sample(&mut rng), b.sample(&mut rng));
        if (x - y).abs() > delta {
            exceed += 1;
        }
        if (x < 0.0) == (y < 0.0) {
            same += 1;
        }
    }
    (exceed as f64 / draws as f64, same as f64 / draws as f64)
}

/// `erf(x)` by composite Simpson quadrature of `2/√π·e^{−t²}`.
pub fn erf_quadrature(x: f64) -> f64 {
    let steps = 4000;
    let h = x / steps as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for k in 1..steps {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

/// A small network with random geometry, batteries, lines and profiles.
/// Prices are strictly ordered when `strict` is set.
pub fn random_instance(rng: &mut ChaCha8Rng, strict: bool) -> (NetworkModel, AssociationMatrix, Profiles) {
    let k = rng.random_range(1..=4);
    let n = rng.random_range(1..=5);
    let stations = (0..k)
        .map(|id| {
            let capacity_wh = rng.random_range(50.0..600.0);
            BaseStation {
                id,
                position: [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)],
                generation: GenerationModel::default(),
                consumption: ConsumptionModel::default(),
                battery: BatteryParams {
                    capacity_wh,
                    initial_wh: rng.random_range(0.0..=capacity_wh),
                    sell_threshold_wh: rng.random_range(0.0..=capacity_wh),
                },
            }
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if rng.random_bool(0.6) {
                edges.push((i, j));
            }
        }
    }
    let prices = if strict {
        let e = rng.random_range(0.0..0.3);
        let s = e + rng.random_range(0.0..0.3);
        let b = s + rng.random_range(0.0..0.3);
        PriceSchedule::flat(b + rng.random_range(0.01..0.5), b, s, e)
    } else {
        PriceSchedule::flat(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        )
    };
    let cells = |rng: &mut ChaCha8Rng, hi: f64| (0..k).map(|_| (0..n).map(|_| rng.random_range(0.0..hi)).collect()).collect();
    let profiles = Profiles { generation: cells(rng, 400.0), consumption: cells(rng, 300.0) };
    let net = NetworkModel {
        stations,
        slot_count: n,
        slot_duration_h: [1.0, 0.5, 2.0][rng.random_range(0..3)],
        cable: CableModel::default(),
        prices,
    };
    (net, AssociationMatrix::from_edges(k, &edges), profiles)
}
