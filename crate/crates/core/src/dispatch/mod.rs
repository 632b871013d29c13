//! Day-to-day energy management under zero, perfect and partial knowledge
//! of future renewable generation.

mod partial;
mod program;

pub use partial::{
    dispatch_partial, dispatch_partial_monolithic, enumerate_scenarios, evaluate_plan, sample_realization, support,
    PartialPlan, ScenarioMode, ScenarioSet,
};

use serde::{Deserialize, Serialize};

use crate::clustering::AssociationMatrix;
use crate::model::{NetworkModel, PriceSchedule, Profiles};
use crate::solver::{solve_lp_with, LinearProgram, SolverOptions, Status};
use crate::{Error, Result};
use program::{build_into, extract, BuildSpec, GridMode};

/// Which sharing channels a strategy may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    NoSharing,
    SgOnly,
    PhysicalOnly,
    Hybrid,
}

impl SharingMode {
    pub const ALL: [SharingMode; 4] = [Self::NoSharing, Self::SgOnly, Self::PhysicalOnly, Self::Hybrid];

    pub fn uses_market(self) -> bool {
        matches!(self, Self::SgOnly | Self::Hybrid)
    }

    pub fn uses_links(self) -> bool {
        matches!(self, Self::PhysicalOnly | Self::Hybrid)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::NoSharing => "no_sharing",
            Self::SgOnly => "sg_only",
            Self::PhysicalOnly => "physical_only",
            Self::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knowledge {
    Zero,
    Perfect,
    Partial,
}

impl Knowledge {
    pub fn label(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Perfect => "perfect",
            Self::Partial => "partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispatchParams {
    /// Chord segments per link and slot.
    pub loss_segments: usize,
    /// Per-slot link capacity; defaults to the sender's `B_max + α_max·τ`.
    pub link_cap_wh: Option<f64>,
    pub scenario_cap: usize,
    pub scenario_mode: ScenarioMode,
    /// Relative generation deviation `d` of the scenario support.
    pub deviation: f64,
    /// Number of support points `M`.
    pub support_points: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Price of unserved energy in the recourse subproblems, MU/Wh. Only
    /// commitments that leave no shortage in any scenario are accepted.
    pub shortage_penalty: f64,
    /// Relative gap at which the decomposition stops.
    pub decomposition_tol: f64,
    pub decomposition_max_iterations: usize,
}

impl Default for DispatchParams {
    fn default() -> Self {
        Self {
            loss_segments: 8,
            link_cap_wh: None,
            scenario_cap: 4096,
            scenario_mode: ScenarioMode::Auto,
            deviation: 0.2,
            support_points: 2,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            shortage_penalty: 1000.0,
            decomposition_tol: 1e-10,
            decomposition_max_iterations: 2000,
        }
    }
}

impl DispatchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.loss_segments >= 1
            && self.link_cap_wh.is_none_or(|c| c > 0.0)
            && self.scenario_cap >= 1
            && (0.0..1.0).contains(&self.deviation)
            && self.support_points >= 1
            && self.feasibility_tol > 0.0
            && self.optimality_tol > 0.0
            && self.shortage_penalty > 0.0
            && self.decomposition_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("dispatch parameters out of range".into()))
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            feasibility_tol: self.feasibility_tol,
            optimality_tol: self.optimality_tol,
            ..SolverOptions::default()
        }
    }
}

/// Everything fixed across the programs of one dispatch run.
#[derive(Debug, Clone, Copy)]
pub struct DispatchContext<'a> {
    pub net: &'a NetworkModel,
    pub links: &'a AssociationMatrix,
    pub mode: SharingMode,
    pub params: &'a DispatchParams,
}

/// Flows on one directed line.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkFlow {
    pub from: usize,
    pub to: usize,
    pub length_km: f64,
    /// `q^→` per slot, Wh.
    pub forward: Vec<f64>,
    /// `q^←` per slot, Wh.
    pub delivered: Vec<f64>,
}

impl LinkFlow {
    pub fn new(from: usize, to: usize, length_km: f64, slots: usize) -> Self {
        Self { from, to, length_km, forward: vec![0.0; slots], delivered: vec![0.0; slots] }
    }
}

/// All per-station, per-slot decisions (`[bs][slot]`, Wh).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySchedule {
    /// `q^g`
    pub grid: Vec<Vec<f64>>,
    /// `q^e`
    pub extra: Vec<Vec<f64>>,
    /// `q^b`
    pub buy: Vec<Vec<f64>>,
    /// `q^s`
    pub sell: Vec<Vec<f64>>,
    /// `q^β`
    pub battery_use: Vec<Vec<f64>>,
    /// `B(n)` at the end of each slot.
    pub battery: Vec<Vec<f64>>,
    /// Committed grid energy left unused when operating a fixed plan.
    pub spill: Vec<Vec<f64>>,
    pub flows: Vec<LinkFlow>,
}

impl EnergySchedule {
    pub fn zeros(k: usize, n: usize) -> Self {
        let z = || vec![vec![0.0; n]; k];
        Self {
            grid: z(),
            extra: z(),
            buy: z(),
            sell: z(),
            battery_use: z(),
            battery: z(),
            spill: z(),
            flows: Vec::new(),
        }
    }

    pub fn bs_count(&self) -> usize {
        self.grid.len()
    }

    pub fn slot_count(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }

    pub fn delivered_to(&self, i: usize, n: usize) -> f64 {
        self.flows.iter().filter(|f| f.to == i).map(|f| f.delivered[n]).sum()
    }

    pub fn forwarded_from(&self, i: usize, n: usize) -> f64 {
        self.flows.iter().filter(|f| f.from == i).map(|f| f.forward[n]).sum()
    }

    pub fn total(m: &[Vec<f64>]) -> f64 {
        m.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// `Ψ_i(n)`
    pub per_bs_slot: Vec<Vec<f64>>,
    pub per_bs: Vec<f64>,
    pub per_slot: Vec<f64>,
    pub total: f64,
}

/// `Ψ_i(n) = c^g q^g + c^b q^b − c^s q^s − c^e q^e`.
pub fn cost(schedule: &EnergySchedule, prices: &PriceSchedule) -> CostReport {
    let (k, n) = (schedule.bs_count(), schedule.slot_count());
    let per_bs_slot: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..n)
                .map(|t| {
                    prices.c_g.at(t) * schedule.grid[i][t] + prices.c_b.at(t) * schedule.buy[i][t]
                        - prices.c_s.at(t) * schedule.sell[i][t]
                        - prices.c_e.at(t) * schedule.extra[i][t]
                })
                .collect()
        })
        .collect();
    let per_bs: Vec<f64> = per_bs_slot.iter().map(|r| r.iter().sum()).collect();
    let per_slot: Vec<f64> = (0..n).map(|t| per_bs_slot.iter().map(|r| r[t]).sum()).collect();
    let total = per_bs.iter().sum();
    CostReport { per_bs_slot, per_bs, per_slot, total }
}

pub(crate) fn solve(lp: &LinearProgram, params: &DispatchParams, what: &str) -> Result<crate::solver::Solution> {
    let sol = solve_lp_with(lp, &params.solver_options()).map_err(|source| Error::Solver { what: what.into(), source })?;
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::Infeasible => Err(Error::Infeasible { what: what.into() }),
        Status::Unbounded => Err(Error::Unbounded { what: what.into() }),
    }
}

pub(crate) fn initial_levels(net: &NetworkModel) -> Vec<f64> {
    net.stations.iter().map(|s| s.battery.initial_wh).collect()
}

/// Myopic slot-by-slot operation: each slot's program sees only that slot's
/// generation and consumption, and surplus above the battery threshold is
/// sold at the end of the slot.
pub fn dispatch_zero(ctx: &DispatchContext, profiles: &Profiles) -> Result<EnergySchedule> {
    let net = ctx.net;
    let (k, n) = (net.bs_count(), net.slot_count);
    let mut schedule = EnergySchedule::zeros(k, n);
    let mut level = initial_levels(net);
    for slot in 0..n {
        let spec = BuildSpec {
            ctx,
            slots: slot..slot + 1,
            generation: &profiles.generation,
            consumption: &profiles.consumption,
            initial: level.clone(),
            grid: GridMode::Decision,
            zero_knowledge: true,
            shortage_price: None,
            cost_scale: 1.0,
        };
        let mut lp = LinearProgram::new();
        let layout = build_into(&mut lp, &spec);
        let sol = solve(&lp, ctx.params, "zero-knowledge slot")?;
        extract(&sol, &layout, &spec, &mut schedule);
        for (i, l) in level.iter_mut().enumerate() {
            *l = schedule.battery[i][slot];
        }
    }
    Ok(schedule)
}

/// Builds the full-horizon program with known generation and consumption.
pub fn perfect_program(ctx: &DispatchContext, profiles: &Profiles) -> LinearProgram {
    let spec = BuildSpec {
        ctx,
        slots: 0..ctx.net.slot_count,
        generation: &profiles.generation,
        consumption: &profiles.consumption,
        initial: initial_levels(ctx.net),
        grid: GridMode::Decision,
        zero_knowledge: false,
        shortage_price: None,
        cost_scale: 1.0,
    };
    let mut lp = LinearProgram::new();
    build_into(&mut lp, &spec);
    lp
}

/// One program over the whole horizon with generation known in advance.
pub fn dispatch_perfect(ctx: &DispatchContext, profiles: &Profiles) -> Result<EnergySchedule> {
    let net = ctx.net;
    let spec = BuildSpec {
        ctx,
        slots: 0..net.slot_count,
        generation: &profiles.generation,
        consumption: &profiles.consumption,
        initial: initial_levels(net),
        grid: GridMode::Decision,
        zero_knowledge: false,
        shortage_price: None,
        cost_scale: 1.0,
    };
    let mut lp = LinearProgram::new();
    let layout = build_into(&mut lp, &spec);
    let sol = solve(&lp, ctx.params, "perfect-knowledge")?;
    let mut schedule = EnergySchedule::zeros(net.bs_count(), net.slot_count);
    extract(&sol, &layout, &spec, &mut schedule);
    Ok(schedule)
}

/// Net battery drain in one slot: `q^β + q^s + Σ q^→ + q^e`.
fn drain(s: &EnergySchedule, i: usize, n: usize) -> f64 {
    s.battery_use[i][n] + s.sell[i][n] + s.forwarded_from(i, n) + s.extra[i][n]
}

/// Recomputes levels from the one-step recursion and checks them against
/// the stored trajectory within 1e-9 (relative to the energies involved).
pub fn battery_trajectory(schedule: &EnergySchedule, generation: &[Vec<f64>], initial: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (k, n) = (schedule.bs_count(), schedule.slot_count());
    let mut out = vec![vec![0.0; n]; k];
    for i in 0..k {
        let mut b = initial[i];
        for t in 0..n {
            b += generation[i][t] - drain(schedule, i, t);
            out[i][t] = b;
            let stored = schedule.battery[i][t];
            if (b - stored).abs() > 1e-9 * (1.0 + initial[i].abs() + generation[i][t].abs()) {
                return Err(Error::TrajectoryMismatch { bs: i, slot: t, stored, recomputed: b });
            }
        }
    }
    Ok(out)
}

/// The same levels from the cumulative-sum form `B(n) = B_0 + Σ_{t≤n}(α − drain)`.
pub fn cumulative_battery(schedule: &EnergySchedule, generation: &[Vec<f64>], initial: &[f64]) -> Vec<Vec<f64>> {
    (0..schedule.bs_count())
        .map(|i| {
            (0..schedule.slot_count())
                .map(|n| initial[i] + (0..=n).map(|t| generation[i][t] - drain(schedule, i, t)).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Worst-case residuals of the physical and bookkeeping invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AuditReport {
    pub balance: f64,
    pub market: f64,
    pub battery_low: f64,
    pub battery_high: f64,
    pub trajectory: f64,
    /// Largest `q^← − (q^→ − loss(q^→))` over links and slots.
    pub link_physics: f64,
    /// Largest `q^g·q^e`.
    pub exclusivity: f64,
    pub negativity: f64,
    /// Flows on pairs without a line, or market use when it is disabled.
    pub forbidden: f64,
}

pub const AUDIT_TOL: f64 = 1e-6;

impl AuditReport {
    /// Passes when every residual is within `AUDIT_TOL`. Exclusivity is only
    /// required when asked (strict price ordering).
    pub fn passes(&self, require_exclusivity: bool) -> bool {
        let core = [
            self.balance,
            self.market,
            self.battery_low,
            self.battery_high,
            self.trajectory,
            self.link_physics,
            self.negativity,
            self.forbidden,
        ];
        core.iter().all(|&r| r <= AUDIT_TOL) && (!require_exclusivity || self.exclusivity <= AUDIT_TOL)
    }

    pub fn merge(&mut self, o: &AuditReport) {
        self.balance = self.balance.max(o.balance);
        self.market = self.market.max(o.market);
        self.battery_low = self.battery_low.max(o.battery_low);
        self.battery_high = self.battery_high.max(o.battery_high);
        self.trajectory = self.trajectory.max(o.trajectory);
        self.link_physics = self.link_physics.max(o.link_physics);
        self.exclusivity = self.exclusivity.max(o.exclusivity);
        self.negativity = self.negativity.max(o.negativity);
        self.forbidden = self.forbidden.max(o.forbidden);
    }
}

pub fn audit(ctx: &DispatchContext, profiles: &Profiles, schedule: &EnergySchedule) -> AuditReport {
    let net = ctx.net;
    let (k, n) = (schedule.bs_count(), schedule.slot_count());
    let mut r = AuditReport::default();
    let initial = initial_levels(net);
    let recomputed = cumulative_battery(schedule, &profiles.generation, &initial);
    for i in 0..k {
        let bmax = net.stations[i].battery.capacity_wh;
        for t in 0..n {
            let supply = schedule.grid[i][t] + schedule.buy[i][t] + schedule.battery_use[i][t]
                + schedule.delivered_to(i, t)
                - schedule.spill[i][t];
            r.balance = r.balance.max((supply - profiles.consumption[i][t]).abs());
            r.battery_low = r.battery_low.max(-schedule.battery[i][t]);
            r.battery_high = r.battery_high.max(schedule.battery[i][t] - bmax);
            r.trajectory = r.trajectory.max((recomputed[i][t] - schedule.battery[i][t]).abs());
            r.exclusivity = r.exclusivity.max(schedule.grid[i][t] * schedule.extra[i][t]);
            for m in [&schedule.grid, &schedule.extra, &schedule.buy, &schedule.sell, &schedule.battery_use, &schedule.spill] {
                r.negativity = r.negativity.max(-m[i][t]);
            }
            if !ctx.mode.uses_market() {
                r.forbidden = r.forbidden.max(schedule.buy[i][t]).max(schedule.sell[i][t]);
            }
        }
    }
    for t in 0..n {
        let bought: f64 = (0..k).map(|i| schedule.buy[i][t]).sum();
        let sold: f64 = (0..k).map(|i| schedule.sell[i][t]).sum();
        r.market = r.market.max((bought - sold).abs());
    }
    for f in &schedule.flows {
        let allowed = ctx.mode.uses_links() && ctx.links.is_linked(f.from, f.to);
        for t in 0..n {
            if !allowed {
                r.forbidden = r.forbidden.max(f.forward[t]).max(f.delivered[t]);
            }
            let loss = crate::affinity::energy_loss(f.forward[t], f.length_km, &net.cable, net.slot_duration_h);
            r.link_physics = r.link_physics.max(f.delivered[t] - (f.forward[t] - loss));
            r.negativity = r.negativity.max(-f.forward[t]).max(-f.delivered[t]);
        }
    }
    r
}

/// Energy totals used by the reports.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Totals {
    pub cost: f64,
    pub grid: f64,
    pub shared_sg: f64,
    pub extra: f64,
    pub shared_lines: f64,
    pub battery_use: f64,
}

pub fn totals(schedule: &EnergySchedule, prices: &PriceSchedule) -> Totals {
    Totals {
        cost: cost(schedule, prices).total,
        grid: EnergySchedule::total(&schedule.grid),
        shared_sg: EnergySchedule::total(&schedule.buy),
        extra: EnergySchedule::total(&schedule.extra),
        shared_lines: schedule.flows.iter().flat_map(|f| f.delivered.iter()).sum(),
        battery_use: EnergySchedule::total(&schedule.battery_use),
    }
}
