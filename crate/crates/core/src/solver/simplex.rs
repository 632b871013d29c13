//! Bounded-variable revised primal simplex.
//!
//! The basis inverse is kept explicitly (column-major) and updated by
//! Gauss-Jordan pivots that touch only the nonzeros of the pivot row and
//! column. Dantzig pricing with a Harris ratio test is the default; after a
//! run of degenerate pivots the method falls back to Bland's rule until it
//! makes progress again. Nothing here depends on hashing or threads, so a
//! given program always produces the same bits.

use super::{LinearProgram, RowKind, Solution, SolverError, SolverOptions, Status};

const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 40;
const REFRESH_EVERY: usize = 100;
const MAX_REPAIRS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free column parked at zero.
    Zero,
}

enum Step {
    Flip,
    Pivot(usize),
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    opts: &'a SolverOptions,
    m: usize,
    n: usize,
    col_ptr: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// Column-major: `binv[c * m + i]` is entry (i, c) of B⁻¹.
    binv: Vec<f64>,
    y: Vec<f64>,
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    tol_scale: f64,
    iterations: usize,
    /// Columns whose phase-one ray was judged numerical, skipped by pricing
    /// until the next pivot.
    rejected: Vec<bool>,
    // scratch
    alpha: Vec<f64>,
    alpha_nz: Vec<usize>,
    rho: Vec<f64>,
}

pub fn solve_lp_with(program: &LinearProgram, opts: &SolverOptions) -> Result<Solution, SolverError> {
    program.validate()?;
    let mut s = Simplex::new(program, opts);
    s.run(program)
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();

        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(v, c) in &row.coeffs {
                if c != 0.0 {
                    counts[v.0 + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let nnz = col_ptr[n];
        let mut fill = col_ptr.clone();
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(v, c) in &row.coeffs {
                if c != 0.0 {
                    let k = fill[v.0];
                    col_row[k] = i;
                    col_val[k] = c;
                    fill[v.0] += 1;
                }
            }
        }
        // Merge duplicate entries of a column in the same row.
        let mut merged_ptr = vec![0usize; n + 1];
        let mut merged_row = Vec::with_capacity(nnz);
        let mut merged_val = Vec::with_capacity(nnz);
        for j in 0..n {
            let mut entries: Vec<(usize, f64)> =
                (col_ptr[j]..col_ptr[j + 1]).map(|k| (col_row[k], col_val[k])).collect();
            entries.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < entries.len() {
                let r = entries[k].0;
                let mut v = 0.0;
                while k < entries.len() && entries[k].0 == r {
                    v += entries[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    merged_row.push(r);
                    merged_val.push(v);
                }
            }
            merged_ptr[j + 1] = merged_row.len();
        }
        // Power-of-two row equilibration keeps every row's largest entry in
        // [0.5, 1) without introducing rounding.
        let mut row_max = vec![0.0f64; m];
        for (k, &r) in merged_row.iter().enumerate() {
            row_max[r] = row_max[r].max(merged_val[k].abs());
        }
        let row_scale: Vec<f64> =
            row_max.iter().map(|&a| if a > 0.0 { 2f64.powi(-(a.log2().floor() as i32) - 1) } else { 1.0 }).collect();
        for (k, &r) in merged_row.iter().enumerate() {
            merged_val[k] *= row_scale[r];
        }

        let mut lb = lp.lower.clone();
        let mut ub = lp.upper.clone();
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            state.push(if lb[j].is_finite() {
                State::Lower
            } else if ub[j].is_finite() {
                State::Upper
            } else {
                State::Zero
            });
        }
        for row in &lp.rows {
            lb.push(0.0);
            ub.push(match row.kind {
                RowKind::Le => f64::INFINITY,
                RowKind::Eq => 0.0,
            });
            state.push(State::Lower);
        }
        let rhs: Vec<f64> = lp.rows.iter().zip(&row_scale).map(|(r, s)| r.rhs * s).collect();
        // Tolerances are relative to the equilibrated data.
        let bound_max = lp.lower.iter().chain(&lp.upper).filter(|b| b.is_finite()).fold(0.0f64, |a, b| a.max(b.abs()));
        let tol_scale = 1.0 + rhs.iter().fold(bound_max, |a, r| a.max(r.abs()));

        let mut s = Self {
            opts,
            m,
            n,
            col_ptr: merged_ptr,
            col_row: merged_row,
            col_val: merged_val,
            art_row: Vec::new(),
            art_sign: Vec::new(),
            lb,
            ub,
            cost: Vec::new(),
            x: Vec::new(),
            state,
            basis: vec![usize::MAX; m],
            binv: vec![0.0; m * m],
            y: vec![0.0; m],
            rhs,
            row_scale,
            tol_scale,
            iterations: 0,
            rejected: Vec::new(),
            alpha: vec![0.0; m],
            alpha_nz: Vec::with_capacity(m),
            rho: vec![0.0; m],
        };
        s.x = (0..n + m)
            .map(|j| match s.state[j] {
                State::Lower => s.lb[j],
                State::Upper => s.ub[j],
                _ => 0.0,
            })
            .collect();
        s
    }

    fn total(&self) -> usize {
        self.n + self.m + self.art_row.len()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let a = j - self.n - self.m;
            f(self.art_row[a], self.art_sign[a]);
        }
    }

    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_col(j, |i, a| s += a * v[i]);
        s
    }

    /// Picks a diagonal starting basis: a column that appears only in its row
    /// when it can absorb the residual within bounds, otherwise the row's
    /// logical, otherwise a phase-one artificial.
    fn crash(&mut self) {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for j in 0..self.n {
            let xj = self.x[j];
            if xj != 0.0 {
                for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                    resid[self.col_row[k]] -= self.col_val[k] * xj;
                }
            }
        }
        let mut singleton: Vec<Option<usize>> = vec![None; m];
        let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); m];
        for j in 0..self.n {
            if self.col_ptr[j + 1] - self.col_ptr[j] == 1 {
                candidates[self.col_row[self.col_ptr[j]]].push(j);
            }
        }
        let tol = self.opts.feasibility_tol;
        for i in 0..m {
            for &j in &candidates[i] {
                let a = self.col_val[self.col_ptr[j]];
                let val = self.x[j] + resid[i] / a;
                if val >= self.lb[j] - tol && val <= self.ub[j] + tol && self.lb[j] < self.ub[j] {
                    singleton[i] = Some(j);
                    break;
                }
            }
        }
        for i in 0..m {
            let diag;
            if let Some(j) = singleton[i] {
                let a = self.col_val[self.col_ptr[j]];
                self.x[j] = (self.x[j] + resid[i] / a).clamp(self.lb[j], self.ub[j]);
                self.state[j] = State::Basic;
                self.basis[i] = j;
                diag = 1.0 / a;
            } else {
                let logical = self.n + i;
                let r = resid[i];
                if r >= self.lb[logical] - tol && r <= self.ub[logical] + tol {
                    self.x[logical] = r.clamp(self.lb[logical], self.ub[logical]);
                    self.state[logical] = State::Basic;
                    self.basis[i] = logical;
                    diag = 1.0;
                } else {
                    let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                    self.art_row.push(i);
                    self.art_sign.push(sign);
                    self.lb.push(0.0);
                    self.ub.push(f64::INFINITY);
                    self.x.push(r.abs());
                    self.state.push(State::Basic);
                    self.basis[i] = self.total() - 1;
                    diag = sign;
                }
            }
            self.binv[i * m + i] = diag;
        }
    }

    fn run(&mut self, lp: &LinearProgram) -> Result<Solution, SolverError> {
        self.crash();

        if !self.art_row.is_empty() {
            self.cost = vec![0.0; self.total()];
            for a in 0..self.art_row.len() {
                self.cost[self.n + self.m + a] = 1.0;
            }
            self.recompute_duals();
            match self.phase(true)? {
                PhaseEnd::Optimal => {}
                PhaseEnd::Unbounded => {
                    return Err(SolverError::NumericalFailure("phase one reported an unbounded ray".into()))
                }
            }
            let infeas: f64 = (self.n + self.m..self.total()).map(|j| self.x[j]).sum();
            if infeas > self.opts.feasibility_tol * self.tol_scale {
                return Ok(self.finish(lp, Status::Infeasible));
            }
            self.expel_artificials();
        }

        self.cost = vec![0.0; self.total()];
        self.cost[..self.n].copy_from_slice(&lp.objective);
        self.recompute_duals();
        match self.phase(false)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return Ok(self.finish(lp, Status::Unbounded)),
        }

        let viol = self.scaled_violation(lp);
        if viol > self.opts.feasibility_tol * self.tol_scale {
            return Err(SolverError::NumericalFailure(format!(
                "primal residual {viol:.3e} exceeds tolerance after refinement"
            )));
        }
        Ok(self.finish(lp, Status::Optimal))
    }

    fn finish(&self, lp: &LinearProgram, status: Status) -> Solution {
        let values = self.x[..self.n].to_vec();
        let objective = match status {
            Status::Optimal => lp.objective_value(&values),
            Status::Infeasible => f64::INFINITY,
            Status::Unbounded => f64::NEG_INFINITY,
        };
        let duals = self.y.iter().zip(&self.row_scale).map(|(y, s)| y * s).collect();
        Solution { status, values, objective, duals, iterations: self.iterations }
    }

    /// Pivots basic artificials out after phase one, then pins every
    /// artificial at zero.
    fn expel_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            let bv = self.basis[r];
            if !self.is_artificial(bv) {
                continue;
            }
            for c in 0..m {
                self.rho[c] = self.binv[c * m + r];
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n + m {
                if self.state[j] == State::Basic {
                    continue;
                }
                let v = self.col_dot(j, &self.rho).abs();
                if v > 1e-7 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.ftran(j);
                self.x[bv] = 0.0;
                self.state[bv] = State::Lower;
                self.pivot(r, j);
            }
        }
        for j in self.n + m..self.total() {
            self.ub[j] = 0.0;
            self.x[j] = 0.0;
        }
    }

    fn recompute_duals(&mut self) {
        let m = self.m;
        for c in 0..m {
            let col = &self.binv[c * m..(c + 1) * m];
            let mut s = 0.0;
            for i in 0..m {
                s += col[i] * self.cost[self.basis[i]];
            }
            self.y[c] = s;
        }
    }

    /// One round of iterative refinement of `y` against `Bᵀy = c_B`.
    fn refine_duals(&mut self) {
        let m = self.m;
        let mut resid = vec![0.0; m];
        for i in 0..m {
            let j = self.basis[i];
            resid[i] = self.cost[j] - self.col_dot(j, &self.y);
        }
        for c in 0..m {
            let col = &self.binv[c * m..(c + 1) * m];
            let mut s = 0.0;
            for i in 0..m {
                s += col[i] * resid[i];
            }
            self.y[c] += s;
        }
    }

    /// Refreshes basic values from `B x_B = b − N x_N` via one refinement step.
    fn refine_primal(&mut self) -> f64 {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for j in 0..self.total() {
            let xj = self.x[j];
            if xj != 0.0 {
                let mut acc = Vec::new();
                self.for_col(j, |i, a| acc.push((i, a)));
                for (i, a) in acc {
                    resid[i] -= a * xj;
                }
            }
        }
        let before = resid.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for c in 0..m {
            let rc = resid[c];
            if rc == 0.0 {
                continue;
            }
            let col = &self.binv[c * m..(c + 1) * m];
            for i in 0..m {
                self.x[self.basis[i]] += col[i] * rc;
            }
        }
        before
    }

    /// Rebuilds B⁻¹ from the basis columns. A column that has become
    /// dependent on the others is made nonbasic at its nearest bound and its
    /// row takes a logical instead.
    fn reinvert(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        let old = self.basis.clone();
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let mut dropped = Vec::new();
        for &j in &old {
            if let Some(p) = self.place(j, &assigned) {
                assigned[p] = true;
                new_basis[p] = j;
                self.update_inverse(p);
            } else {
                dropped.push(j);
            }
        }
        if !dropped.is_empty() {
            for j in dropped {
                let (lo, hi) = (self.lb[j], self.ub[j]);
                let (st, v) = if lo.is_finite() && (!hi.is_finite() || self.x[j] - lo <= hi - self.x[j]) {
                    (State::Lower, lo)
                } else if hi.is_finite() {
                    (State::Upper, hi)
                } else {
                    (State::Zero, 0.0)
                };
                self.state[j] = st;
                self.x[j] = v;
            }
            for i in 0..m {
                let logical = self.n + i;
                if self.state[logical] == State::Basic {
                    continue;
                }
                if let Some(p) = self.place(logical, &assigned) {
                    assigned[p] = true;
                    new_basis[p] = logical;
                    self.state[logical] = State::Basic;
                    self.update_inverse(p);
                }
            }
            if new_basis.contains(&usize::MAX) {
                return Err(SolverError::NumericalFailure("basis became singular".into()));
            }
        }
        self.basis = new_basis;
        Ok(())
    }

    /// Pivot position for column `j` among the unassigned rows of a partial
    /// reinversion, leaving its transformed column in `alpha`.
    fn place(&mut self, j: usize, assigned: &[bool]) -> Option<usize> {
        self.ftran(j);
        let mut best = None;
        let mut best_v = 1e-11;
        for &i in &self.alpha_nz {
            if !assigned[i] && self.alpha[i].abs() > best_v {
                best_v = self.alpha[i].abs();
                best = Some(i);
            }
        }
        best
    }

    /// `alpha = B⁻¹ a_j`, recording nonzero positions.
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        let mut entries = Vec::new();
        self.for_col(j, |i, a| entries.push((i, a)));
        for (k, a) in entries {
            let col = &self.binv[k * m..(k + 1) * m];
            for i in 0..m {
                self.alpha[i] += a * col[i];
            }
        }
        self.alpha_nz.clear();
        for i in 0..m {
            if self.alpha[i].abs() > 1e-14 {
                self.alpha_nz.push(i);
            } else {
                self.alpha[i] = 0.0;
            }
        }
    }

    /// Gauss-Jordan update of B⁻¹ for pivot row `r` using the current `alpha`.
    fn update_inverse(&mut self, r: usize) {
        let m = self.m;
        let ar = self.alpha[r];
        for c in 0..m {
            let pivot_entry = self.binv[c * m + r];
            if pivot_entry == 0.0 {
                continue;
            }
            let scaled = pivot_entry / ar;
            let col = &mut self.binv[c * m..(c + 1) * m];
            for &i in &self.alpha_nz {
                if i != r {
                    col[i] -= self.alpha[i] * scaled;
                }
            }
            col[r] = scaled;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let m = self.m;
        for c in 0..m {
            self.rho[c] = self.binv[c * m + r];
        }
        self.update_inverse(r);
        self.basis[r] = q;
        self.state[q] = State::Basic;
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.col_dot(j, &self.y)
    }

    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_mag = 0.0;
        for j in 0..self.total() {
            let st = self.state[j];
            if st == State::Basic || self.lb[j] == self.ub[j] || self.rejected.get(j).copied().unwrap_or(false) {
                continue;
            }
            let d = self.reduced_cost(j);
            let dir = match st {
                State::Lower if d < -tol => 1.0,
                State::Upper if d > tol => -1.0,
                State::Zero if d < -tol => 1.0,
                State::Zero if d > tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_mag {
                best_mag = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Option<(Step, f64)> {
        let amax = self.alpha_nz.iter().fold(0.0f64, |a, &i| a.max(self.alpha[i].abs()));
        let ptol = self.opts.pivot_tol * amax.max(1.0);
        let ftol = self.opts.feasibility_tol;
        let flip = self.ub[q] - self.lb[q];

        let mut row_choice: Option<(usize, f64)> = None;
        if bland {
            let mut best_t = f64::INFINITY;
            for &i in &self.alpha_nz {
                let g = -dir * self.alpha[i];
                let bv = self.basis[i];
                let t = if g < -ptol && self.lb[bv].is_finite() {
                    (self.x[bv] - self.lb[bv]) / -g
                } else if g > ptol && self.ub[bv].is_finite() {
                    (self.ub[bv] - self.x[bv]) / g
                } else {
                    continue;
                };
                let t = t.max(0.0);
                let better = match row_choice {
                    None => true,
                    Some((ri, _)) => t < best_t - 1e-12 || (t <= best_t + 1e-12 && bv < self.basis[ri]),
                };
                if better {
                    best_t = t;
                    row_choice = Some((i, t));
                }
            }
        } else {
            let mut theta_max = f64::INFINITY;
            for &i in &self.alpha_nz {
                let g = -dir * self.alpha[i];
                let bv = self.basis[i];
                let t = if g < -ptol && self.lb[bv].is_finite() {
                    (self.x[bv] - self.lb[bv] + ftol) / -g
                } else if g > ptol && self.ub[bv].is_finite() {
                    (self.ub[bv] - self.x[bv] + ftol) / g
                } else {
                    continue;
                };
                theta_max = theta_max.min(t);
            }
            if theta_max.is_finite() {
                let mut best_g = 0.0;
                for &i in &self.alpha_nz {
                    let g = -dir * self.alpha[i];
                    let bv = self.basis[i];
                    let t = if g < -ptol && self.lb[bv].is_finite() {
                        (self.x[bv] - self.lb[bv]) / -g
                    } else if g > ptol && self.ub[bv].is_finite() {
                        (self.ub[bv] - self.x[bv]) / g
                    } else {
                        continue;
                    };
                    if t <= theta_max && g.abs() > best_g {
                        best_g = g.abs();
                        row_choice = Some((i, t.max(0.0)));
                    }
                }
            }
        }

        match row_choice {
            Some((_, t)) if flip.is_finite() && flip <= t => Some((Step::Flip, flip)),
            Some((r, t)) => Some((Step::Pivot(r), t)),
            None if flip.is_finite() => Some((Step::Flip, flip)),
            None => None,
        }
    }

    /// Phase one cannot be unbounded, so a ray found there comes from pivot
    /// entries lost below tolerance: the column is set aside after one
    /// reinversion. Phase-two rays are confirmed on a fresh inverse.
    fn phase(&mut self, phase_one: bool) -> Result<PhaseEnd, SolverError> {
        self.rejected = vec![false; self.total()];
        let mut any_rejected = false;
        let mut ray_checked = false;
        let mut degenerate_run = 0usize;
        let mut since_refresh = 0usize;
        let mut bland = false;
        let mut repairs = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(SolverError::IterationLimit(self.opts.max_iterations));
            }
            if since_refresh >= REFRESH_EVERY {
                self.refresh()?;
                since_refresh = 0;
            }
            let entering = match self.price(bland) {
                Some(e) => e,
                None => {
                    // Confirm optimality against refreshed values before stopping.
                    self.refresh()?;
                    self.refine_duals();
                    self.clamp_basics();
                    if self.worst_basic().is_some() {
                        repairs += 1;
                        if repairs > MAX_REPAIRS || !self.dual_repair() {
                            return Err(SolverError::NumericalFailure("lost primal feasibility".into()));
                        }
                        continue;
                    }
                    match self.price(bland) {
                        Some(e) => e,
                        None => return Ok(PhaseEnd::Optimal),
                    }
                }
            };
            let (q, dir) = entering;
            let dq = self.reduced_cost(q);
            self.ftran(q);
            let Some((step, t)) = self.ratio_test(q, dir, bland) else {
                if !ray_checked {
                    ray_checked = true;
                    self.reinvert()?;
                    self.refresh()?;
                    since_refresh = 0;
                    continue;
                }
                if phase_one {
                    self.rejected[q] = true;
                    any_rejected = true;
                    ray_checked = false;
                    continue;
                }
                return Ok(PhaseEnd::Unbounded);
            };
            ray_checked = false;
            if any_rejected {
                self.rejected.iter_mut().for_each(|r| *r = false);
                any_rejected = false;
            }
            self.iterations += 1;
            since_refresh += 1;

            if t > DEGENERATE_STEP {
                degenerate_run = 0;
                bland = false;
            } else {
                degenerate_run += 1;
                if degenerate_run >= BLAND_AFTER {
                    bland = true;
                }
            }

            self.x[q] += dir * t;
            if t != 0.0 {
                for &i in &self.alpha_nz {
                    let bv = self.basis[i];
                    self.x[bv] -= dir * t * self.alpha[i];
                }
            }
            match step {
                Step::Flip => {
                    let (s, v) = if dir > 0.0 { (State::Upper, self.ub[q]) } else { (State::Lower, self.lb[q]) };
                    self.state[q] = s;
                    self.x[q] = v;
                }
                Step::Pivot(r) => {
                    let leaving = self.basis[r];
                    let g = -dir * self.alpha[r];
                    if g < 0.0 {
                        self.state[leaving] = State::Lower;
                        self.x[leaving] = self.lb[leaving];
                    } else {
                        self.state[leaving] = State::Upper;
                        self.x[leaving] = self.ub[leaving];
                    }
                    if !self.x[leaving].is_finite() {
                        // A free column only leaves on a zero step; park it at zero.
                        self.state[leaving] = State::Zero;
                        self.x[leaving] = 0.0;
                    }
                    let ar = self.alpha[r];
                    self.pivot(r, q);
                    let scale = dq / ar;
                    for c in 0..self.m {
                        self.y[c] += scale * self.rho[c];
                    }
                }
            }
        }
    }

    /// Recomputes duals and basic values; reinverts if the residual stays large.
    fn refresh(&mut self) -> Result<(), SolverError> {
        self.refine_primal();
        let after = self.refine_primal();
        if after > 1e-10 * self.tol_scale {
            self.reinvert()?;
            self.refine_primal();
            self.refine_primal();
        }
        self.recompute_duals();
        Ok(())
    }

    /// Bound violation of a basic variable, in equilibrated units.
    fn violation(&self, j: usize) -> f64 {
        (self.lb[j] - self.x[j]).max(self.x[j] - self.ub[j]).max(0.0)
    }

    /// Largest row or bound violation of the structural values, rows taken
    /// in equilibrated units.
    fn scaled_violation(&self, lp: &LinearProgram) -> f64 {
        let x = &self.x[..self.n];
        let mut worst = 0.0f64;
        for (row, s) in lp.rows.iter().zip(&self.row_scale) {
            let lhs: f64 = row.coeffs.iter().map(|&(v, c)| c * x[v.0]).sum();
            let viol = match row.kind {
                RowKind::Le => (lhs - row.rhs).max(0.0),
                RowKind::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol * s);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(lp.lower[j] - v).max(v - lp.upper[j]);
        }
        worst
    }

    /// The basis row whose variable is furthest outside its bounds, if any
    /// exceeds the tolerance.
    fn worst_basic(&self) -> Option<usize> {
        let tol = 0.1 * self.opts.feasibility_tol * self.tol_scale;
        let mut worst = None;
        let mut worst_v = tol;
        for i in 0..self.m {
            let v = self.violation(self.basis[i]);
            if v > worst_v {
                worst_v = v;
                worst = Some(i);
            }
        }
        worst
    }

    /// Dual simplex pivots that drive drifted basic variables back inside
    /// their bounds while keeping reduced costs dual feasible. Returns false
    /// when no pivot can repair a row.
    fn dual_repair(&mut self) -> bool {
        let m = self.m;
        for _ in 0..4 * m + 10 {
            let Some(r) = self.worst_basic() else {
                return true;
            };
            let bv = self.basis[r];
            let (target, up) = if self.x[bv] < self.lb[bv] { (self.lb[bv], true) } else { (self.ub[bv], false) };
            for c in 0..m {
                self.rho[c] = self.binv[c * m + r];
            }
            let rho = self.rho.clone();
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..self.total() {
                let st = self.state[j];
                if st == State::Basic || self.lb[j] == self.ub[j] || self.rejected.get(j).copied().unwrap_or(false) {
                    continue;
                }
                let a = self.col_dot(j, &rho);
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                // x_r moves by −a per unit increase of x_j.
                let raises = -a > 0.0;
                let ok = match st {
                    State::Lower => raises == up,
                    State::Upper => raises != up,
                    _ => true,
                };
                if !ok {
                    continue;
                }
                let ratio = self.reduced_cost(j).abs() / a.abs();
                if best.is_none_or(|(_, br, ba)| ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > ba)) {
                    best = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, _, _)) = best else {
                return false;
            };
            let dq = self.reduced_cost(q);
            self.ftran(q);
            let ar = self.alpha[r];
            let dx = -(target - self.x[bv]) / ar;
            self.x[q] += dx;
            for &i in &self.alpha_nz {
                let b = self.basis[i];
                self.x[b] -= dx * self.alpha[i];
            }
            self.x[bv] = target;
            self.state[bv] = if up { State::Lower } else { State::Upper };
            self.pivot(r, q);
            let scale = dq / ar;
            for c in 0..m {
                self.y[c] += scale * self.rho[c];
            }
            self.iterations += 1;
        }
        self.worst_basic().is_none()
    }

    fn clamp_basics(&mut self) {
        let tol = self.opts.feasibility_tol * self.tol_scale;
        for i in 0..self.m {
            let j = self.basis[i];
            let v = self.x[j];
            if v < self.lb[j] && v >= self.lb[j] - tol {
                self.x[j] = self.lb[j];
            } else if v > self.ub[j] && v <= self.ub[j] + tol {
                self.x[j] = self.ub[j];
            }
        }
    }
}
