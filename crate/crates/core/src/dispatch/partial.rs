//! Two-stage recourse dispatch: grid purchases are committed for the whole
//! horizon before generation is revealed, everything else adapts per scenario.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::program::{build_into, extract, BuildSpec, GridMode, Layout};
use super::{initial_levels, solve, DispatchContext, EnergySchedule};
use crate::model::Profiles;
use crate::solver::{LinearProgram, RowKind, Solution, VarId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// Exhaustive when the full set fits under the cap, sampled otherwise.
    #[default]
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// Generation matrices `[bs][slot]`, Wh.
    pub scenarios: Vec<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    /// `Exhaustive` or `Sampled`.
    pub mode: ScenarioMode,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn single(generation: Vec<Vec<f64>>) -> Self {
        Self { scenarios: vec![generation], weights: vec![1.0], mode: ScenarioMode::Exhaustive }
    }
}

/// Relative offsets of the `m`-point symmetric support.
pub fn support(d: f64, m: usize) -> Vec<f64> {
    if m <= 1 {
        return vec![0.0];
    }
    (0..m).map(|k| d * (2.0 * k as f64 / (m - 1) as f64 - 1.0)).collect()
}

/// Discretizes generation around `mean` with `m` equally likely offsets per
/// cell. Scenarios are ordered as a mixed-radix counter over cells taken
/// station-major, the last slot of the last station varying fastest.
pub fn enumerate_scenarios(
    mean: &[Vec<f64>],
    d: f64,
    m: usize,
    cap: usize,
    mode: ScenarioMode,
    rng: &mut ChaCha8Rng,
) -> Result<ScenarioSet> {
    if m == 0 || !(0.0..1.0).contains(&d) || cap == 0 {
        return Err(Error::InvalidConfig("scenario support needs m >= 1, 0 <= d < 1, cap >= 1".into()));
    }
    let k = mean.len();
    let n = mean.first().map_or(0, Vec::len);
    let cells = k * n;
    let offsets = support(d, m);
    let exact = u32::try_from(cells).ok().and_then(|c| m.checked_pow(c)).filter(|&c| c <= cap);
    let build = |digits: &dyn Fn(usize) -> usize| -> Vec<Vec<f64>> {
        (0..k).map(|i| (0..n).map(|t| mean[i][t] * (1.0 + offsets[digits(i * n + t)])).collect()).collect()
    };
    let exhaustive = match mode {
        ScenarioMode::Sampled => false,
        ScenarioMode::Auto => exact.is_some(),
        ScenarioMode::Exhaustive => {
            if exact.is_none() {
                return Err(Error::ScenarioExplosion { requested: (m as f64).powi(cells as i32), cap });
            }
            true
        }
    };
    if exhaustive {
        let total = exact.unwrap_or(1);
        let scenarios: Vec<_> = (0..total)
            .map(|s| {
                build(&|c| {
                    let mut v = s;
                    for _ in c + 1..cells {
                        v /= m;
                    }
                    v % m
                })
            })
            .collect();
        let w = 1.0 / total as f64;
        Ok(ScenarioSet { weights: vec![w; total], scenarios, mode: ScenarioMode::Exhaustive })
    } else {
        let scenarios: Vec<_> = (0..cap)
            .map(|_| {
                let draws: Vec<usize> = (0..cells).map(|_| rng.random_range(0..m)).collect();
                build(&|c| draws[c])
            })
            .collect();
        Ok(ScenarioSet { weights: vec![1.0 / cap as f64; cap], scenarios, mode: ScenarioMode::Sampled })
    }
}

/// Draws one realization from the same per-cell support.
pub fn sample_realization(mean: &[Vec<f64>], d: f64, m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let offsets = support(d, m);
    mean.iter()
        .map(|row| row.iter().map(|&a| a * (1.0 + offsets[rng.random_range(0..offsets.len())])).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialPlan {
    /// First-stage `q^g`, `[bs][slot]`.
    pub grid: Vec<Vec<f64>>,
    /// `Σ c^g q^g + Σ_m P_m Q_m`.
    pub objective: f64,
    pub expected_recourse: f64,
    /// Recourse schedule per scenario at the returned `grid`.
    pub recourse: Vec<EnergySchedule>,
    /// Master iterations (1 for the monolithic program).
    pub iterations: usize,
}

struct Recourse {
    /// Optimal value including any priced shortage.
    value: f64,
    /// Balance-row duals `[bs][slot]`.
    duals: Vec<Vec<f64>>,
    /// Unserved energy summed over the horizon, Wh.
    shortage: f64,
}

struct Incumbent {
    value: f64,
    grid: Vec<Vec<f64>>,
    expected: f64,
    schedules: Vec<EnergySchedule>,
    shortage: f64,
}

/// Shortage (Wh, summed over a scenario) below which a commitment counts as
/// serving every scenario.
const SHORTAGE_TOL: f64 = 1e-6;

fn recourse_spec<'a>(
    ctx: &'a DispatchContext<'a>,
    consumption: &'a [Vec<f64>],
    generation: &'a [Vec<f64>],
    grid: GridMode<'a>,
    shortage_price: Option<f64>,
    cost_scale: f64,
) -> BuildSpec<'a> {
    BuildSpec {
        ctx,
        slots: 0..ctx.net.slot_count,
        generation,
        consumption,
        initial: initial_levels(ctx.net),
        grid,
        zero_knowledge: false,
        shortage_price,
        cost_scale,
    }
}

fn balance_duals(sol: &Solution, layout: &Layout) -> Vec<Vec<f64>> {
    layout.cells.iter().map(|row| row.iter().map(|c| sol.duals[c.balance.0]).collect()).collect()
}

fn shortage(sol: &Solution, layout: &Layout) -> f64 {
    layout.cells.iter().flatten().filter_map(|c| c.shortage).map(|v| sol.value(v).max(0.0)).sum()
}

/// Solves one scenario at a fixed commitment with shortage priced at
/// `penalty` per Wh.
fn solve_recourse(
    ctx: &DispatchContext,
    consumption: &[Vec<f64>],
    generation: &[Vec<f64>],
    x: &[Vec<f64>],
    penalty: f64,
) -> Result<(Recourse, EnergySchedule)> {
    let spec = recourse_spec(ctx, consumption, generation, GridMode::Fixed(x), Some(penalty), 1.0);
    let mut lp = LinearProgram::new();
    let layout = build_into(&mut lp, &spec);
    let sol = solve(&lp, ctx.params, "recourse")?;
    let mut s = EnergySchedule::zeros(ctx.net.bs_count(), ctx.net.slot_count);
    extract(&sol, &layout, &spec, &mut s);
    let r = Recourse { value: sol.objective, duals: balance_duals(&sol, &layout), shortage: shortage(&sol, &layout) };
    Ok((r, s))
}

fn first_stage_cost(ctx: &DispatchContext, x: &[Vec<f64>]) -> f64 {
    let p = &ctx.net.prices;
    x.iter().map(|row| row.iter().enumerate().map(|(n, v)| p.c_g.at(n) * v).sum::<f64>()).sum()
}

/// Collapses identical scenarios into one with the summed weight. Returns the
/// merged set and, per original scenario, its index in it.
fn merge_duplicates(set: &ScenarioSet) -> (ScenarioSet, Vec<usize>) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut merged = ScenarioSet { scenarios: Vec::new(), weights: Vec::new(), mode: set.mode };
    let index = set
        .scenarios
        .iter()
        .zip(&set.weights)
        .map(|(s, &w)| {
            let key: Vec<u64> = s.iter().flatten().map(|v| v.to_bits()).collect();
            let u = *seen.entry(key).or_insert_with(|| {
                merged.scenarios.push(s.clone());
                merged.weights.push(0.0);
                merged.scenarios.len() - 1
            });
            merged.weights[u] += w;
            u
        })
        .collect();
    (merged, index)
}

/// Upper limit on epigraph variables in the decomposition master; larger
/// scenario sets share them round-robin.
const MAX_CUT_GROUPS: usize = 32;

struct Master {
    lp: LinearProgram,
    x: Vec<Vec<VarId>>,
    theta: Vec<VarId>,
    upper: Vec<Vec<f64>>,
    /// Cut rows by epigraph variable and coefficient bits; a repeated
    /// gradient only tightens the existing row.
    cuts: HashMap<Vec<u64>, usize>,
}

impl Master {
    fn solve(&mut self, params: &super::DispatchParams, centre: Option<(&[Vec<f64>], f64)>) -> Result<(Vec<Vec<f64>>, f64)> {
        for (i, row) in self.x.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                let hi = self.upper[i][t];
                let (lo, up) = match centre {
                    Some((c, delta)) => ((c[i][t] - delta).max(0.0), (c[i][t] + delta).min(hi)),
                    None => (0.0, hi),
                };
                self.lp.set_bounds(v, lo, up);
            }
        }
        let sol = solve(&self.lp, params, "first-stage master")?;
        let x = self.x.iter().map(|r| r.iter().map(|&v| sol.value(v).max(0.0)).collect()).collect();
        Ok((x, sol.objective))
    }

    /// `θ_g ≥ Q(x*) − π·(x − x*)`, stored as `−π·x − θ ≤ −Q(x*) − π·x*`.
    fn cut(&mut self, theta: VarId, value: f64, duals: &[Vec<f64>], at: &[Vec<f64>]) {
        let mut coeffs = Vec::new();
        let mut rhs = -value;
        for (i, row) in duals.iter().enumerate() {
            for (t, &pi) in row.iter().enumerate() {
                if pi != 0.0 {
                    coeffs.push((self.x[i][t], -pi));
                }
                rhs -= pi * at[i][t];
            }
        }
        coeffs.push((theta, -1.0));
        let key: Vec<u64> = coeffs.iter().flat_map(|&(v, c)| [v.0 as u64, c.to_bits()]).collect();
        match self.cuts.get(&key) {
            Some(&row) => {
                let r = &mut self.lp.rows[row];
                r.rhs = r.rhs.min(rhs);
            }
            None => {
                let row = self.lp.add_row(coeffs, RowKind::Le, rhs);
                self.cuts.insert(key, row.0);
            }
        }
    }
}

/// Solves the two-stage program by L-shaped decomposition with one epigraph
/// variable per scenario group and a box trust region around the incumbent.
/// Scenario subproblems price shortage at `shortage_penalty`, so every
/// subproblem solves and its cut bounds the hard-constrained recourse from
/// below. If the converged commitment still leaves a shortage the penalty was
/// not exact there; it is raised tenfold and the search resumes.
pub fn dispatch_partial(ctx: &DispatchContext, consumption: &[Vec<f64>], scenarios: &ScenarioSet) -> Result<PartialPlan> {
    if scenarios.is_empty() {
        return Err(Error::InvalidConfig("empty scenario set".into()));
    }
    let (merged, index) = merge_duplicates(scenarios);
    let scenarios = &merged;
    if scenarios.len() == 1 {
        let mut plan = dispatch_partial_monolithic(ctx, consumption, scenarios)?;
        plan.recourse = vec![plan.recourse[0].clone(); index.len()];
        return Ok(plan);
    }
    let net = ctx.net;
    let (k, n) = (net.bs_count(), net.slot_count);
    let prices = &net.prices;
    let count = scenarios.len();
    let groups = count.min(MAX_CUT_GROUPS);
    let group_of = |m: usize| m % groups;
    let mut group_weight = vec![0.0; groups];
    for (m, w) in scenarios.weights.iter().enumerate() {
        group_weight[group_of(m)] += w;
    }

    let max_revenue = (0..n).map(|t| prices.c_s.at(t).max(prices.c_e.at(t)).max(0.0)).fold(0.0, f64::max);
    let energy: f64 = initial_levels(net).iter().sum::<f64>()
        + (0..k)
            .flat_map(|i| (0..n).map(move |t| (i, t)))
            .map(|(i, t)| scenarios.scenarios.iter().map(|s| s[i][t]).fold(0.0, f64::max))
            .sum::<f64>();
    let theta_floor = -max_revenue * energy - 1.0;

    let mut lp = LinearProgram::new();
    let upper: Vec<Vec<f64>> = consumption.iter().map(|r| r.iter().map(|c| c.max(0.0)).collect()).collect();
    let x_vars: Vec<Vec<VarId>> =
        (0..k).map(|i| (0..n).map(|t| lp.add_var(prices.c_g.at(t), 0.0, upper[i][t])).collect()).collect();
    let theta: Vec<VarId> = group_weight.iter().map(|w| lp.add_var(1.0, theta_floor * w - 1.0, f64::INFINITY)).collect();
    let mut master = Master { lp, x: x_vars, theta, upper, cuts: HashMap::new() };

    // First trial point: the plan for the expected generation.
    let mut mean_gen = vec![vec![0.0; n]; k];
    for (s, w) in scenarios.scenarios.iter().zip(&scenarios.weights) {
        for i in 0..k {
            for t in 0..n {
                mean_gen[i][t] += w * s[i][t];
            }
        }
    }
    let mean_profiles = Profiles { generation: mean_gen, consumption: consumption.to_vec() };
    let mut trial: Vec<Vec<f64>> = super::dispatch_perfect(ctx, &mean_profiles)?.grid;
    for (row, up) in trial.iter_mut().zip(&master.upper) {
        for (v, u) in row.iter_mut().zip(up) {
            *v = v.clamp(0.0, *u);
        }
    }

    let tol = ctx.params.decomposition_tol;
    let scale = 1.0 + consumption.iter().flatten().fold(0.0, |a: f64, c| a.max(c.abs()));
    let max_delta = scale;
    let mut delta = 0.1 * scale;
    let mut penalty = ctx.params.shortage_penalty;
    let mut best: Option<Incumbent> = None;
    let mut predicted: Option<f64> = None;
    let mut lower = f64::NEG_INFINITY;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let x = trial;
        let results: Vec<(Recourse, EnergySchedule)> = scenarios
            .scenarios
            .par_iter()
            .map(|g| solve_recourse(ctx, consumption, g, &x, penalty))
            .collect::<Result<_>>()?;

        for gi in 0..groups {
            let mut value = 0.0;
            let mut duals = vec![vec![0.0; n]; k];
            for (m, (r, _)) in results.iter().enumerate().filter(|(m, _)| group_of(*m) == gi) {
                let w = scenarios.weights[m];
                value += w * r.value;
                for i in 0..k {
                    for t in 0..n {
                        duals[i][t] += w * r.duals[i][t];
                    }
                }
            }
            master.cut(master.theta[gi], value, &duals, &x);
        }

        let expected: f64 = results.iter().zip(&scenarios.weights).map(|(r, w)| w * r.0.value).sum();
        let value = first_stage_cost(ctx, &x) + expected;
        let shortage = results.iter().map(|r| r.0.shortage).fold(0.0, f64::max);
        let candidate = |results: Vec<(Recourse, EnergySchedule)>, x| Incumbent {
            value,
            grid: x,
            expected,
            schedules: results.into_iter().map(|r| r.1).collect(),
            shortage,
        };
        match &best {
            None => best = Some(candidate(results, x)),
            Some(b) => {
                let gain = b.value - value;
                if let Some(pred) = predicted {
                    let ratio = if pred > 0.0 { gain / pred } else { 0.0 };
                    if ratio >= 0.5 {
                        delta = (2.0 * delta).min(max_delta);
                    } else if ratio < 0.0 {
                        delta = (0.5 * delta).max(1e-6 * scale);
                    }
                }
                if gain > 0.0 {
                    best = Some(candidate(results, x));
                }
            }
        }
        let b = best.as_ref().expect("incumbent after the first trial");

        let (x_next, model) = master.solve(ctx.params, Some((&b.grid, delta)))?;
        let ub = b.value;
        let gap_tol = tol * (1.0 + ub.abs());
        predicted = Some(ub - model);
        if ub - model <= gap_tol {
            // No progress inside the box: confirm against the unrestricted model.
            let (x_global, global) = master.solve(ctx.params, None)?;
            lower = lower.max(global);
            log::debug!("decomposition iteration {iterations}: lower {lower:.9}, upper {ub:.9}, box {delta:.3e}");
            if ub - lower <= gap_tol {
                if b.shortage <= SHORTAGE_TOL {
                    break;
                }
                // The penalty is not exact here; earlier cuts stay valid
                // lower bounds for the steeper recourse.
                penalty *= 10.0;
                log::debug!("raising the shortage penalty to {penalty}");
                trial = b.grid.clone();
                best = None;
            } else {
                delta = (2.0 * delta).min(max_delta);
                trial = x_global;
            }
            predicted = None;
        } else {
            log::debug!("decomposition iteration {iterations}: model {model:.9}, upper {ub:.9}, box {delta:.3e}");
            trial = x_next;
        }
        if iterations >= ctx.params.decomposition_max_iterations {
            break;
        }
    }
    let Some(Incumbent { value: objective, grid, expected: expected_recourse, schedules: recourse, shortage }) = best else {
        return Err(Error::Infeasible { what: format!("two-stage ({iterations} decomposition iterations)") });
    };
    if shortage > SHORTAGE_TOL {
        return Err(Error::Infeasible {
            what: format!("two-stage (commitment still short by {shortage:.3e} Wh after {iterations} iterations)"),
        });
    }
    if iterations >= ctx.params.decomposition_max_iterations {
        log::warn!("decomposition stopped at the iteration limit, gap {:.3e}", objective - lower);
    }
    let recourse = index.iter().map(|&u| recourse[u].clone()).collect();
    Ok(PartialPlan { grid, objective, expected_recourse, recourse, iterations })
}

/// The deterministic equivalent as one program: shared `q^g` columns and a
/// weighted copy of the recourse block per scenario. Only practical for small
/// scenario sets; used to cross-check the decomposition.
pub fn dispatch_partial_monolithic(
    ctx: &DispatchContext,
    consumption: &[Vec<f64>],
    scenarios: &ScenarioSet,
) -> Result<PartialPlan> {
    if scenarios.is_empty() {
        return Err(Error::InvalidConfig("empty scenario set".into()));
    }
    let net = ctx.net;
    let (k, n) = (net.bs_count(), net.slot_count);
    let mut lp = LinearProgram::new();
    let x_vars: Vec<Vec<VarId>> =
        (0..k).map(|_| (0..n).map(|t| lp.add_nonneg(net.prices.c_g.at(t))).collect()).collect();
    let specs: Vec<BuildSpec> = scenarios
        .scenarios
        .iter()
        .zip(&scenarios.weights)
        .map(|(g, &w)| recourse_spec(ctx, consumption, g, GridMode::Shared(&x_vars), None, w))
        .collect();
    let layouts: Vec<Layout> = specs.iter().map(|s| build_into(&mut lp, s)).collect();
    let sol = solve(&lp, ctx.params, "deterministic equivalent")?;
    let grid: Vec<Vec<f64>> = x_vars.iter().map(|r| r.iter().map(|&v| sol.value(v).max(0.0)).collect()).collect();
    let recourse: Vec<EnergySchedule> = specs
        .iter()
        .zip(&layouts)
        .map(|(spec, layout)| {
            let mut s = EnergySchedule::zeros(k, n);
            extract(&sol, layout, spec, &mut s);
            s
        })
        .collect();
    let first = first_stage_cost(ctx, &grid);
    Ok(PartialPlan { objective: sol.objective, expected_recourse: sol.objective - first, grid, recourse, iterations: 1 })
}

/// Operates a committed plan on a realized generation profile. Shortfalls are
/// covered by topping up at the grid price and unused commitments are spilled,
/// so every realization yields a schedule; the committed energy is paid in full.
pub fn evaluate_plan(
    ctx: &DispatchContext,
    plan_grid: &[Vec<f64>],
    consumption: &[Vec<f64>],
    generation: &[Vec<f64>],
) -> Result<EnergySchedule> {
    let spec = recourse_spec(ctx, consumption, generation, GridMode::FixedWithTopUp(plan_grid), None, 1.0);
    let mut lp = LinearProgram::new();
    let layout = build_into(&mut lp, &spec);
    let sol = solve(&lp, ctx.params, "plan evaluation")?;
    let mut s = EnergySchedule::zeros(ctx.net.bs_count(), ctx.net.slot_count);
    extract(&sol, &layout, &spec, &mut s);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::child_rng;

    #[test]
    fn exhaustive_counts() {
        let mean = vec![vec![10.0; 3]; 3];
        let mut rng = child_rng(1, 0);
        let set = enumerate_scenarios(&mean, 0.2, 2, 4096, ScenarioMode::Auto, &mut rng).unwrap();
        assert_eq!(set.len(), 512);
        assert_eq!(set.mode, ScenarioMode::Exhaustive);
        assert!(set.weights.iter().all(|&w| w == 1.0 / 512.0));
        assert_eq!(set.scenarios[0], vec![vec![8.0; 3]; 3]);
        assert_eq!(set.scenarios[511], vec![vec![12.0; 3]; 3]);
        let mut distinct = set.scenarios.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        assert_eq!(distinct.len(), 512);
    }

    #[test]
    fn single_point_support() {
        let mean = vec![vec![3.0, 4.0]];
        let mut rng = child_rng(1, 0);
        let set = enumerate_scenarios(&mean, 0.2, 1, 4096, ScenarioMode::Auto, &mut rng).unwrap();
        assert_eq!(set.scenarios, vec![mean]);
        assert_eq!(set.weights, vec![1.0]);
    }

    #[test]
    fn sampling_above_cap() {
        let mean = vec![vec![1.0; 24]; 20];
        let mut rng = child_rng(1, 0);
        let set = enumerate_scenarios(&mean, 0.2, 2, 4096, ScenarioMode::Auto, &mut rng).unwrap();
        assert_eq!(set.len(), 4096);
        assert_eq!(set.mode, ScenarioMode::Sampled);
        assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let err = enumerate_scenarios(&mean, 0.2, 2, 4096, ScenarioMode::Exhaustive, &mut rng);
        assert!(matches!(err, Err(Error::ScenarioExplosion { .. })));
    }

    #[test]
    fn support_points() {
        assert_eq!(support(0.2, 2), vec![-0.2, 0.2]);
        let s = support(0.3, 3);
        assert!((s[0] + 0.3).abs() < 1e-15 && s[1].abs() < 1e-15 && (s[2] - 0.3).abs() < 1e-15);
    }
}
