//! Assembles the per-slot and horizon programs shared by every knowledge
//! mode, and reads schedules back out of their solutions.

use std::ops::Range;

use super::{DispatchContext, EnergySchedule, LinkFlow};
use crate::solver::{build_loss_segments, embed_link, LinearExpr, LinearProgram, LinkEmbedding, RowId, RowKind, Solution, VarId};

/// How grid purchases enter the balance rows.
#[derive(Debug, Clone, Copy)]
pub(crate) enum GridMode<'a> {
    /// `q^g` is a decision variable.
    Decision,
    /// `q^g` is fixed data (recourse subproblem).
    Fixed(&'a [Vec<f64>]),
    /// Fixed purchases plus a top-up at grid price and a free spill, so a
    /// committed plan can always be operated on a realization.
    FixedWithTopUp(&'a [Vec<f64>]),
    /// `q^g` refers to columns already in the program.
    Shared(&'a [Vec<VarId>]),
}

pub(crate) struct BuildSpec<'a> {
    pub ctx: &'a DispatchContext<'a>,
    pub slots: Range<usize>,
    pub generation: &'a [Vec<f64>],
    pub consumption: &'a [Vec<f64>],
    /// Battery level entering the first slot of `slots`.
    pub initial: Vec<f64>,
    pub grid: GridMode<'a>,
    /// Single-slot program with `X ≥ 0` in place of the battery window and
    /// without `q^e`.
    pub zero_knowledge: bool,
    /// Adds a per-balance-row shortage column at this price.
    pub shortage_price: Option<f64>,
    /// Multiplies every recourse price (scenario weight).
    pub cost_scale: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub grid: Option<VarId>,
    pub top_up: Option<VarId>,
    pub spill: Option<VarId>,
    pub shortage: Option<VarId>,
    pub buy: Option<VarId>,
    pub sell: Option<VarId>,
    pub beta: VarId,
    pub excess: Option<VarId>,
    /// `B(n)` in horizon programs, `X` in the zero-knowledge program.
    pub level: VarId,
    pub balance: RowId,
    pub battery: RowId,
}

pub(crate) struct FlowLayout {
    pub from: usize,
    pub to: usize,
    pub length_km: f64,
    pub per_slot: Vec<LinkEmbedding>,
}

pub(crate) struct Layout {
    pub slots: Range<usize>,
    pub cells: Vec<Vec<Cell>>,
    pub flows: Vec<FlowLayout>,
}

pub(crate) fn build_into(lp: &mut LinearProgram, spec: &BuildSpec) -> Layout {
    let ctx = spec.ctx;
    let net = ctx.net;
    let k = net.bs_count();
    let tau = net.slot_duration_h;
    let prices = &net.prices;
    let market = ctx.mode.uses_market();
    let scale = spec.cost_scale;
    debug_assert!(!spec.zero_knowledge || spec.slots.len() == 1);

    let unset = RowId(usize::MAX);
    let mut cells: Vec<Vec<Cell>> = Vec::with_capacity(k);
    for (i, st) in net.stations.iter().enumerate() {
        let mut row = Vec::with_capacity(spec.slots.len());
        for n in spec.slots.clone() {
            let tag = |lp: &mut LinearProgram, v: VarId, what: &str| lp.set_name(v, format!("{what}_{i}_{n}"));
            let grid = match spec.grid {
                GridMode::Decision => {
                    let v = lp.add_nonneg(prices.c_g.at(n) * scale);
                    tag(lp, v, "qg");
                    Some(v)
                }
                GridMode::Shared(vars) => Some(vars[i][n]),
                _ => None,
            };
            let (top_up, spill) = if let GridMode::FixedWithTopUp(_) = spec.grid {
                let t = lp.add_nonneg(prices.c_g.at(n) * scale);
                tag(lp, t, "topup");
                let s = lp.add_nonneg(0.0);
                tag(lp, s, "spill");
                (Some(t), Some(s))
            } else {
                (None, None)
            };
            let shortage = spec.shortage_price.map(|p| lp.add_nonneg(p));
            let (buy, sell) = if market {
                let b = lp.add_nonneg(prices.c_b.at(n) * scale);
                tag(lp, b, "qb");
                let s = lp.add_nonneg(-prices.c_s.at(n) * scale);
                tag(lp, s, "qs");
                (Some(b), Some(s))
            } else {
                (None, None)
            };
            let beta = lp.add_nonneg(0.0);
            tag(lp, beta, "qbeta");
            let (excess, level) = if spec.zero_knowledge {
                let x = lp.add_nonneg(0.0);
                tag(lp, x, "X");
                (None, x)
            } else {
                let e = lp.add_nonneg(-prices.c_e.at(n) * scale);
                tag(lp, e, "qe");
                let b = lp.add_var(0.0, 0.0, st.battery.capacity_wh);
                tag(lp, b, "B");
                (Some(e), b)
            };
            row.push(Cell {
                grid,
                top_up,
                spill,
                shortage,
                buy,
                sell,
                beta,
                excess,
                level,
                balance: unset,
                battery: unset,
            });
            if let Some(v) = shortage {
                lp.set_name(v, format!("short_{i}_{n}"));
            }
        }
        cells.push(row);
    }

    let mut flows = Vec::new();
    if ctx.mode.uses_links() {
        for (a, b) in ctx.links.edges() {
            let length_km = net.distance(a, b);
            for (from, to) in [(a, b), (b, a)] {
                let st = &net.stations[from];
                let cap = ctx.params.link_cap_wh.unwrap_or(st.battery.capacity_wh + st.generation.alpha_max_w() * tau);
                let per_slot = if cap > 0.0 {
                    let seg = build_loss_segments(length_km, cap, ctx.params.loss_segments, &net.cable, tau);
                    spec.slots.clone().map(|_| embed_link(lp, &seg)).collect()
                } else {
                    Vec::new()
                };
                flows.push(FlowLayout { from, to, length_km, per_slot });
            }
        }
    }

    for i in 0..k {
        for (local, n) in spec.slots.clone().enumerate() {
            let Cell { grid, top_up, spill, shortage, buy, sell, beta, excess, level, .. } = cells[i][local];

            let mut bal = LinearExpr::new();
            let mut rhs = spec.consumption[i][n];
            match spec.grid {
                GridMode::Fixed(x) | GridMode::FixedWithTopUp(x) => rhs -= x[i][n],
                _ => {}
            }
            for v in [grid, top_up, shortage, buy].into_iter().flatten() {
                bal.add(v, 1.0);
            }
            if let Some(s) = spill {
                bal.add(s, -1.0);
            }
            bal.add(beta, 1.0);
            for f in flows.iter().filter(|f| f.to == i && !f.per_slot.is_empty()) {
                bal.add_expr(&f.per_slot[local].delivered, 1.0);
            }
            cells[i][local].balance = lp.add_row(bal.terms, RowKind::Eq, rhs);

            let mut bat = LinearExpr::new();
            let mut rhs = spec.generation[i][n];
            bat.add(level, 1.0);
            if spec.zero_knowledge || local == 0 {
                rhs += spec.initial[i];
            } else {
                bat.add(cells[i][local - 1].level, -1.0);
            }
            bat.add(beta, 1.0);
            for v in [sell, excess].into_iter().flatten() {
                bat.add(v, 1.0);
            }
            for f in flows.iter().filter(|f| f.from == i && !f.per_slot.is_empty()) {
                bat.add_expr(&f.per_slot[local].forward, 1.0);
            }
            cells[i][local].battery = lp.add_row(bat.terms, RowKind::Eq, rhs);
        }
    }
    if market {
        for local in 0..spec.slots.len() {
            let mut coeffs = Vec::with_capacity(2 * k);
            for row in &cells {
                coeffs.push((row[local].buy.unwrap(), 1.0));
                coeffs.push((row[local].sell.unwrap(), -1.0));
            }
            lp.add_eq(coeffs, 0.0);
        }
    }
    Layout { slots: spec.slots.clone(), cells, flows }
}

fn val(sol: &Solution, v: Option<VarId>) -> f64 {
    v.map_or(0.0, |v| sol.value(v).max(0.0))
}

/// Copies a solved layout into `schedule`. Zero-knowledge layouts apply the
/// threshold rule `q^e = [X − B_th]⁺`, `B = X − q^e`.
pub(crate) fn extract(
    sol: &Solution,
    layout: &Layout,
    spec: &BuildSpec,
    schedule: &mut EnergySchedule,
) {
    let net = spec.ctx.net;
    for (i, row) in layout.cells.iter().enumerate() {
        for (local, n) in layout.slots.clone().enumerate() {
            let c = &row[local];
            let fixed = match spec.grid {
                GridMode::Fixed(x) | GridMode::FixedWithTopUp(x) => x[i][n],
                _ => 0.0,
            };
            schedule.grid[i][n] = fixed + val(sol, c.grid) + val(sol, c.top_up);
            schedule.spill[i][n] = val(sol, c.spill);
            schedule.buy[i][n] = val(sol, c.buy);
            schedule.sell[i][n] = val(sol, c.sell);
            schedule.battery_use[i][n] = val(sol, Some(c.beta));
            let level = sol.value(c.level).max(0.0);
            if spec.zero_knowledge {
                let th = net.stations[i].battery.sell_threshold_wh;
                let extra = (level - th).max(0.0);
                schedule.extra[i][n] = extra;
                schedule.battery[i][n] = level - extra;
            } else {
                schedule.extra[i][n] = val(sol, c.excess);
                schedule.battery[i][n] = level.min(net.stations[i].battery.capacity_wh);
            }
        }
    }
    for f in &layout.flows {
        let idx = match schedule.flows.iter().position(|g| g.from == f.from && g.to == f.to) {
            Some(p) => p,
            None => {
                schedule.flows.push(LinkFlow::new(f.from, f.to, f.length_km, schedule.slot_count()));
                schedule.flows.len() - 1
            }
        };
        for (local, n) in layout.slots.clone().enumerate() {
            if let Some(emb) = f.per_slot.get(local) {
                schedule.flows[idx].forward[n] = sol.eval(&emb.forward).max(0.0);
                schedule.flows[idx].delivered[n] = sol.eval(&emb.delivered).max(0.0);
            }
        }
    }
}
