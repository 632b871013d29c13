//! Seeded Monte Carlo experiments, parameter sweeps and the canned
//! small-network cases.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_network, AssociationMatrix, ClusteringMethod};
use crate::config::Config;
use crate::dispatch::{
    audit, dispatch_partial, dispatch_perfect, dispatch_zero, enumerate_scenarios, evaluate_plan, sample_realization,
    totals, AuditReport, DispatchContext, DispatchParams, EnergySchedule, Knowledge, SharingMode, Totals,
};
use crate::model::{build_network, BaseStation, NetworkModel, PriceSchedule, PriceSeries, Profiles};
use crate::rng::{child_rng, iteration_rng, STREAM_SCENARIOS};
use crate::{Error, Result};

/// How realized generation is drawn in each iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    /// Mean profiles plus clamped Gaussian noise.
    #[default]
    Gaussian,
    /// Generation from the discrete deviation support used by the recourse
    /// scenarios; consumption as in `Gaussian`.
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessParams {
    pub iterations: usize,
    pub realization: Realization,
    /// Draw a fresh placement in every iteration instead of reusing the
    /// configured one.
    pub resample_placement: bool,
}

impl Default for HarnessParams {
    fn default() -> Self {
        Self { iterations: 1000, realization: Realization::Gaussian, resample_placement: false }
    }
}

impl HarnessParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("harness.iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub sharing_mode: SharingMode,
    pub knowledge: Knowledge,
    /// `None` builds no lines.
    pub clustering: Option<ClusteringMethod>,
}

impl Strategy {
    pub fn new(sharing_mode: SharingMode, knowledge: Knowledge, clustering: Option<ClusteringMethod>) -> Self {
        Self { sharing_mode, knowledge, clustering }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sharing_mode.uses_links() && self.clustering.is_none() {
            return Err(Error::InvalidConfig(format!(
                "{} sharing needs a clustering method",
                self.sharing_mode.label()
            )));
        }
        Ok(())
    }

    pub fn clustering_label(&self) -> &'static str {
        self.clustering.map_or("none", ClusteringMethod::label)
    }
}

/// Means and standard errors over Monte Carlo iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub strategy: Strategy,
    pub iterations: usize,
    pub mean: Totals,
    pub std_error: Totals,
    /// Mean installed line length, km.
    pub cable_length_km: f64,
    pub link_count: f64,
    /// Worst residuals over every audited schedule.
    pub audit: AuditReport,
    /// Network cost per iteration, in iteration order.
    pub costs: Vec<f64>,
}

fn fields(t: &Totals) -> [f64; 6] {
    [t.cost, t.grid, t.shared_sg, t.extra, t.shared_lines, t.battery_use]
}

fn from_fields(f: [f64; 6]) -> Totals {
    Totals { cost: f[0], grid: f[1], shared_sg: f[2], extra: f[3], shared_lines: f[4], battery_use: f[5] }
}

struct Outcome {
    totals: Totals,
    audit: AuditReport,
    cable_km: f64,
    links: usize,
}

fn aggregate(strategy: Strategy, outcomes: &[&Outcome]) -> AggregateReport {
    let n = outcomes.len() as f64;
    let mut mean = [0.0; 6];
    for o in outcomes {
        for (m, v) in mean.iter_mut().zip(fields(&o.totals)) {
            *m += v / n;
        }
    }
    let mut se = [0.0; 6];
    if outcomes.len() > 1 {
        for o in outcomes {
            for ((s, v), m) in se.iter_mut().zip(fields(&o.totals)).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in se.iter_mut() {
            *s = (*s / (n - 1.0) / n).sqrt();
        }
    }
    let mut worst = AuditReport::default();
    for o in outcomes {
        worst.merge(&o.audit);
    }
    AggregateReport {
        strategy,
        iterations: outcomes.len(),
        mean: from_fields(mean),
        std_error: from_fields(se),
        cable_length_km: outcomes.iter().map(|o| o.cable_km).sum::<f64>() / n,
        link_count: outcomes.iter().map(|o| o.links as f64).sum::<f64>() / n,
        audit: worst,
        costs: outcomes.iter().map(|o| o.totals.cost).collect(),
    }
}

/// Per-network preparation shared by every iteration on that network: line
/// sets and committed recourse plans.
struct Prepared {
    net: NetworkModel,
    links: Vec<AssociationMatrix>,
    plans: Vec<Option<Vec<Vec<f64>>>>,
}

fn prepare(
    net: NetworkModel,
    links: Vec<AssociationMatrix>,
    strategies: &[Strategy],
    params: &DispatchParams,
    seed: u64,
) -> Result<Prepared> {
    let mean = net.mean_profiles();
    let mut plans = Vec::with_capacity(strategies.len());
    for (s, l) in strategies.iter().zip(&links) {
        plans.push(if s.knowledge == Knowledge::Partial {
            let ctx = DispatchContext { net: &net, links: l, mode: s.sharing_mode, params };
            let set = enumerate_scenarios(
                &mean.generation,
                params.deviation,
                params.support_points,
                params.scenario_cap,
                params.scenario_mode,
                &mut child_rng(seed, STREAM_SCENARIOS),
            )?;
            Some(dispatch_partial(&ctx, &mean.consumption, &set)?.grid)
        } else {
            None
        });
    }
    Ok(Prepared { net, links, plans })
}

/// Draws one realization of generation and consumption.
pub fn realize(net: &NetworkModel, realization: Realization, params: &DispatchParams, rng: &mut rand_chacha::ChaCha8Rng) -> Profiles {
    match realization {
        Realization::Gaussian => net.sample_profiles(rng),
        Realization::Discrete => {
            let mean = net.mean_profiles();
            let generation = sample_realization(&mean.generation, params.deviation, params.support_points, rng);
            Profiles { generation, consumption: net.sample_profiles(rng).consumption }
        }
    }
}

/// Produces the schedule a strategy operates on one realization.
pub fn run_strategy(
    ctx: &DispatchContext,
    knowledge: Knowledge,
    plan: Option<&[Vec<f64>]>,
    profiles: &Profiles,
) -> Result<EnergySchedule> {
    let schedule = match knowledge {
        Knowledge::Zero => dispatch_zero(ctx, profiles)?,
        Knowledge::Perfect => dispatch_perfect(ctx, profiles)?,
        Knowledge::Partial => {
            let plan = plan.ok_or_else(|| Error::InvalidConfig("partial knowledge needs a committed plan".into()))?;
            evaluate_plan(ctx, plan, &profiles.consumption, &profiles.generation)?
        }
    };
    Ok(schedule)
}

fn run_iteration(
    prep: &Prepared,
    strategies: &[Strategy],
    params: &DispatchParams,
    realization: Realization,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Outcome>> {
    let net = &prep.net;
    let profiles = realize(net, realization, params, rng);
    let strict = net.prices.strict_ordering(net.slot_count);
    let positions = net.positions();
    strategies
        .iter()
        .enumerate()
        .map(|(s, strategy)| {
            let links = &prep.links[s];
            let ctx = DispatchContext { net, links, mode: strategy.sharing_mode, params };
            let schedule = run_strategy(&ctx, strategy.knowledge, prep.plans[s].as_deref(), &profiles)?;
            let report = audit(&ctx, &profiles, &schedule);
            if !report.passes(false) {
                return Err(Error::Audit(format!("{report:?}")));
            }
            if strict && report.exclusivity > crate::dispatch::AUDIT_TOL {
                log::warn!(
                    "grid purchase and surplus sale overlap by {:.3e} Wh² ({} / {})",
                    report.exclusivity,
                    strategy.sharing_mode.label(),
                    strategy.knowledge.label()
                );
            }
            Ok(Outcome {
                totals: totals(&schedule, &net.prices),
                audit: report,
                cable_km: if strategy.sharing_mode.uses_links() { links.total_length(&positions) } else { 0.0 },
                links: if strategy.sharing_mode.uses_links() { links.edge_count() } else { 0 },
            })
        })
        .collect()
}

fn links_for(net: &NetworkModel, cfg: &Config, strategies: &[Strategy]) -> Vec<AssociationMatrix> {
    strategies
        .iter()
        .map(|s| match (s.sharing_mode.uses_links(), s.clustering) {
            (true, Some(m)) => cluster_network(net, &cfg.clustering, m),
            _ => AssociationMatrix::empty(net.bs_count()),
        })
        .collect()
}

fn with_iteration<T>(i: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Iteration { iteration: i, source: Box::new(e) })
}

/// Runs every strategy on the same realizations (common random numbers) and
/// returns one report per strategy, in the given order.
pub fn run_strategies(cfg: &Config, strategies: &[Strategy], iterations: usize, seed: u64) -> Result<Vec<AggregateReport>> {
    cfg.validate()?;
    for s in strategies {
        s.validate()?;
    }
    if iterations == 0 {
        return Err(Error::InvalidConfig("at least one iteration is required".into()));
    }
    let params = &cfg.dispatch;
    let realization = cfg.harness.realization;
    let outcomes: Vec<Vec<Outcome>> = if cfg.harness.resample_placement {
        (0..iterations)
            .into_par_iter()
            .map(|i| {
                let mut rng = iteration_rng(seed, i as u64);
                let mut local = cfg.clone();
                local.network.rng_seed = rand::Rng::random(&mut rng);
                let r = build_network(&local).and_then(|net| {
                    let links = links_for(&net, &local, strategies);
                    let prep = prepare(net, links, strategies, params, seed)?;
                    run_iteration(&prep, strategies, params, realization, &mut rng)
                });
                with_iteration(i, r)
            })
            .collect::<Result<_>>()?
    } else {
        let net = build_network(cfg)?;
        let links = links_for(&net, cfg, strategies);
        let prep = prepare(net, links, strategies, params, seed)?;
        run_prepared(&prep, strategies, params, realization, iterations, seed)?
    };
    Ok(collect_reports(strategies, &outcomes))
}

fn run_prepared(
    prep: &Prepared,
    strategies: &[Strategy],
    params: &DispatchParams,
    realization: Realization,
    iterations: usize,
    seed: u64,
) -> Result<Vec<Vec<Outcome>>> {
    (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = iteration_rng(seed, i as u64);
            with_iteration(i, run_iteration(prep, strategies, params, realization, &mut rng))
        })
        .collect()
}

fn collect_reports(strategies: &[Strategy], outcomes: &[Vec<Outcome>]) -> Vec<AggregateReport> {
    strategies
        .iter()
        .enumerate()
        .map(|(s, strategy)| {
            let column: Vec<&Outcome> = outcomes.iter().map(|o| &o[s]).collect();
            aggregate(*strategy, &column)
        })
        .collect()
}

/// Monte Carlo run of one strategy on the configured network.
pub fn run_monte_carlo(cfg: &Config, strategy: Strategy, iterations: usize, seed: u64) -> Result<AggregateReport> {
    Ok(run_strategies(cfg, &[strategy], iterations, seed)?.remove(0))
}

/// Runs strategies on a fixed network with explicitly given lines, one line
/// set per strategy.
pub fn run_on_network(
    net: &NetworkModel,
    runs: &[(Strategy, AssociationMatrix)],
    params: &DispatchParams,
    realization: Realization,
    iterations: usize,
    seed: u64,
) -> Result<Vec<AggregateReport>> {
    params.validate()?;
    let strategies: Vec<Strategy> = runs.iter().map(|r| r.0).collect();
    let links = runs.iter().map(|r| r.1.clone()).collect();
    let prep = prepare(net.clone(), links, &strategies, params, seed)?;
    let outcomes = run_prepared(&prep, &strategies, params, realization, iterations, seed)?;
    Ok(collect_reports(&strategies, &outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SharingRange,
    GridPrice,
    Deviation,
}

impl SweepParameter {
    pub fn label(self) -> &'static str {
        match self {
            Self::SharingRange => "sharing_range_km",
            Self::GridPrice => "grid_price",
            Self::Deviation => "deviation",
        }
    }

    pub fn apply(self, cfg: &mut Config, value: f64) {
        match self {
            Self::SharingRange => cfg.cable.sharing_range_km = value,
            Self::GridPrice => cfg.prices.c_g = PriceSeries::Flat(value),
            Self::Deviation => cfg.dispatch.deviation = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub mc_iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    /// `(value, reports in strategy order)`.
    pub rows: Vec<(f64, Vec<AggregateReport>)>,
}

/// One report per (value, strategy). Every value reuses the same seed, so
/// points along the sweep are paired as well.
pub fn sweep(spec: &SweepSpec, cfg: &Config, strategies: &[Strategy]) -> Result<SweepTable> {
    if spec.values.is_empty() || spec.mc_iterations == 0 {
        return Err(Error::InvalidConfig("sweep needs values and at least one iteration".into()));
    }
    let mut rows = Vec::with_capacity(spec.values.len());
    for &v in &spec.values {
        let mut local = cfg.clone();
        spec.parameter.apply(&mut local, v);
        rows.push((v, run_strategies(&local, strategies, spec.mc_iterations, spec.seed)?));
    }
    Ok(SweepTable { parameter: spec.parameter, rows })
}

pub const REPORT_HEADER: [&str; 20] = [
    "parameter",
    "value",
    "sharing_mode",
    "knowledge",
    "clustering",
    "iterations",
    "mean_cost",
    "se_cost",
    "mean_grid",
    "se_grid",
    "mean_shared_sg",
    "se_shared_sg",
    "mean_extra",
    "se_extra",
    "mean_shared_lines",
    "se_shared_lines",
    "mean_battery_use",
    "se_battery_use",
    "cable_length_km",
    "links",
];

fn report_record(parameter: &str, value: Option<f64>, r: &AggregateReport) -> Vec<String> {
    let mut rec = vec![
        parameter.to_string(),
        value.map_or(String::new(), |v| v.to_string()),
        r.strategy.sharing_mode.label().to_string(),
        r.strategy.knowledge.label().to_string(),
        r.strategy.clustering_label().to_string(),
        r.iterations.to_string(),
    ];
    for (m, s) in fields(&r.mean).into_iter().zip(fields(&r.std_error)) {
        rec.push(m.to_string());
        rec.push(s.to_string());
    }
    rec.push(r.cable_length_km.to_string());
    rec.push(r.link_count.to_string());
    rec
}

pub fn write_reports<W: Write>(out: W, reports: &[AggregateReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record(report_record("none", None, r))?;
    }
    w.flush()?;
    Ok(())
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        for (v, reports) in &self.rows {
            for r in reports {
                w.write_record(report_record(self.parameter.label(), Some(*v), r))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes the resolved configuration and run options next to the outputs.
pub fn write_manifest(dir: &Path, command: &str, cfg: &Config, seed: u64, iterations: usize) -> Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "seed": seed,
        "iterations": iterations,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// A small hand-built network with given lines.
#[derive(Debug, Clone)]
pub struct CannedCase {
    pub net: NetworkModel,
    pub links: AssociationMatrix,
}

/// Generation shares (of the peak consumption) of the three-station example.
pub const THREE_BS_SHARES: [f64; 3] = [1.5, 0.8, 0.6];

impl CannedCase {
    /// Three stations with identical consumption and peak generation at 150%,
    /// 80% and 60% of the peak consumption; stations 1 and 2 share a 2 km
    /// line, station 3 is isolated. Noise-free, batteries full at start.
    pub fn three_bs(cfg: &Config) -> Self {
        let positions = [[0.0, 0.0], [2.0, 0.0], [1.0, 4.0]];
        let peak = cfg.consumption.peak_power_w();
        let stations = positions
            .iter()
            .zip(THREE_BS_SHARES)
            .enumerate()
            .map(|(id, (&position, share))| {
                let mut generation = cfg.generation.clone();
                generation.panel_area_range_m2 = None;
                generation.noise_std_wh = 0.0;
                generation.panel_area_m2 =
                    share * peak / (generation.peak_irradiance_kw_m2 * 1000.0 * generation.efficiency);
                let mut consumption = cfg.consumption.clone();
                consumption.noise_std_wh = 0.0;
                let mut battery = cfg.battery.clone();
                battery.initial_wh = battery.capacity_wh;
                BaseStation { id, position, generation, consumption, battery }
            })
            .collect();
        let net = NetworkModel {
            stations,
            slot_count: cfg.network.slot_count,
            slot_duration_h: cfg.network.slot_duration_h,
            cable: cfg.cable.clone(),
            prices: cfg.prices.clone(),
        };
        Self { net, links: AssociationMatrix::from_edges(3, &[(0, 1)]) }
    }

    /// The three-station network over three 8-hour slots with traffic peaks at
    /// 12 h and 20 h, 800 Wh batteries starting at 100 Wh.
    pub fn three_slot() -> Self {
        let mut cfg = Config::default();
        cfg.network.slot_count = 3;
        cfg.network.slot_duration_h = 8.0;
        cfg.consumption.mode_times_h = [12.0, 20.0];
        cfg.battery.capacity_wh = 800.0;
        cfg.battery.sell_threshold_wh = 400.0;
        let mut case = Self::three_bs(&cfg);
        for s in &mut case.net.stations {
            s.battery.initial_wh = 100.0;
        }
        case
    }

    pub fn with_prices(&self, prices: PriceSchedule) -> Self {
        let mut c = self.clone();
        c.net.prices = prices;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeBsRow {
    pub grid_price: f64,
    /// Network cost per sharing mode, in `SharingMode::ALL` order.
    pub costs: [f64; 4],
    pub audits: [AuditReport; 4],
}

impl ThreeBsRow {
    pub fn cost(&self, mode: SharingMode) -> f64 {
        self.costs[SharingMode::ALL.iter().position(|&m| m == mode).unwrap()]
    }

    /// Relative saving of `mode` against no sharing.
    pub fn saving(&self, mode: SharingMode) -> f64 {
        let base = self.cost(SharingMode::NoSharing);
        (base - self.cost(mode)) / base + 0.0
    }
}

pub fn default_price_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.05).collect()
}

/// Perfect-knowledge costs of the four sharing modes on the three-station
/// example across grid prices.
pub fn replicate_three_bs(cfg: &Config, grid_prices: &[f64]) -> Result<Vec<ThreeBsRow>> {
    let case = CannedCase::three_bs(cfg);
    grid_prices
        .par_iter()
        .map(|&cg| {
            let mut prices = cfg.prices.clone();
            prices.c_g = PriceSeries::Flat(cg);
            let case = case.with_prices(prices);
            let profiles = case.net.mean_profiles();
            let mut costs = [0.0; 4];
            let mut audits = [AuditReport::default(); 4];
            for (k, mode) in SharingMode::ALL.into_iter().enumerate() {
                let ctx = DispatchContext { net: &case.net, links: &case.links, mode, params: &cfg.dispatch };
                let s = dispatch_perfect(&ctx, &profiles)?;
                costs[k] = totals(&s, &case.net.prices).cost;
                audits[k] = audit(&ctx, &profiles, &s);
            }
            Ok(ThreeBsRow { grid_price: cg, costs, audits })
        })
        .collect()
}

pub fn write_three_bs<W: Write>(out: W, rows: &[ThreeBsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "grid_price",
        "no_sharing",
        "sg_only",
        "physical_only",
        "hybrid",
        "saving_sg_only",
        "saving_physical_only",
        "saving_hybrid",
    ])?;
    for r in rows {
        let mut rec = vec![r.grid_price.to_string()];
        rec.extend(r.costs.iter().map(f64::to_string));
        for m in [SharingMode::SgOnly, SharingMode::PhysicalOnly, SharingMode::Hybrid] {
            rec.push(r.saving(m).to_string());
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Committed grid purchases of the recourse solution next to the average
/// perfect-knowledge purchases over realizations drawn from the same support.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentComparison {
    pub committed: Vec<Vec<f64>>,
    pub hindsight_mean: Vec<Vec<f64>>,
    pub scenario_count: usize,
    pub iterations: usize,
}

pub fn compare_commitment(
    case: &CannedCase,
    mode: SharingMode,
    params: &DispatchParams,
    iterations: usize,
    seed: u64,
) -> Result<CommitmentComparison> {
    let ctx = DispatchContext { net: &case.net, links: &case.links, mode, params };
    let mean = case.net.mean_profiles();
    let set = enumerate_scenarios(
        &mean.generation,
        params.deviation,
        params.support_points,
        params.scenario_cap,
        params.scenario_mode,
        &mut child_rng(seed, STREAM_SCENARIOS),
    )?;
    let plan = dispatch_partial(&ctx, &mean.consumption, &set)?;
    let grids: Vec<Vec<Vec<f64>>> = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = iteration_rng(seed, i as u64);
            let generation = sample_realization(&mean.generation, params.deviation, params.support_points, &mut rng);
            let profiles = Profiles { generation, consumption: mean.consumption.clone() };
            with_iteration(i, dispatch_perfect(&ctx, &profiles).map(|s| s.grid))
        })
        .collect::<Result<_>>()?;
    let (k, n) = (case.net.bs_count(), case.net.slot_count);
    let mut hindsight_mean = vec![vec![0.0; n]; k];
    for g in &grids {
        for i in 0..k {
            for t in 0..n {
                hindsight_mean[i][t] += g[i][t] / iterations as f64;
            }
        }
    }
    Ok(CommitmentComparison { committed: plan.grid, hindsight_mean, scenario_count: set.len(), iterations })
}

pub fn write_commitment<W: Write>(out: W, c: &CommitmentComparison) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bs", "slot", "committed_grid", "hindsight_mean_grid"])?;
    for (i, row) in c.committed.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            w.write_record([(i + 1).to_string(), (t + 1).to_string(), v.to_string(), c.hindsight_mean[i][t].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Schedule tables: one row per (station, slot), and one per (line, slot).
pub fn write_schedule<W: Write, V: Write>(stations: W, lines: V, s: &EnergySchedule) -> Result<()> {
    let mut w = csv::Writer::from_writer(stations);
    w.write_record(["bs", "slot", "q_g", "q_e", "q_b", "q_s", "q_beta", "battery"])?;
    for i in 0..s.bs_count() {
        for t in 0..s.slot_count() {
            w.write_record([
                (i + 1).to_string(),
                (t + 1).to_string(),
                s.grid[i][t].to_string(),
                s.extra[i][t].to_string(),
                s.buy[i][t].to_string(),
                s.sell[i][t].to_string(),
                s.battery_use[i][t].to_string(),
                s.battery[i][t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(lines);
    w.write_record(["from", "to", "slot", "q_fwd", "q_delivered"])?;
    for f in &s.flows {
        for t in 0..f.forward.len() {
            w.write_record([
                (f.from + 1).to_string(),
                (f.to + 1).to_string(),
                (t + 1).to_string(),
                f.forward[t].to_string(),
                f.delivered[t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
