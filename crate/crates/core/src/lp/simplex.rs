//! Bounded-variable revised simplex with a dense explicit basis inverse.
//!
//! Each row `i` gets a logical (slack) column `s_i` so that `a_i x + s_i = b_i`, with
//! `s_i ∈ [0, ∞)` for `≤`, `(-∞, 0]` for `≥` and `[0, 0]` for `=` rows. Rows whose
//! logical cannot absorb the initial residual receive an artificial column, which
//! phase one drives to zero.
//!
//! Pricing is Dantzig (largest reduced cost, lowest index on ties). After a run of
//! degenerate pivots the solver switches to Bland's rule until it makes progress,
//! which rules out cycling. All choices are index-ordered, so identical programs
//! give bitwise-identical answers.

use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Primal feasibility tolerance, relative to `1 + |bound|`.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Smallest admissible pivot element.
    pub pivot_tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Refactorise the basis inverse every this many pivots (0 disables).
    pub refactor_interval: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 200_000,
            degenerate_limit: 50,
            refactor_interval: 0,
        }
    }
}

/// An optimal basis, reusable as a warm start for the same program with extra rows
/// appended (and any objective).
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    num_structural: usize,
    num_rows: usize,
    head: Vec<usize>,
    at_upper: Vec<bool>,
    inverse: Vec<f64>,
}

impl Basis {
    pub fn num_rows(&self) -> usize {
        self.num_rows
    }
}

/// Solves `lp` from a cold start with default options.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions::default(), None)
}

/// Solves `lp`, optionally starting from a basis of a program that `lp` extends by
/// appended rows. Falls back to a cold start when the warm basis is not primal feasible.
pub fn solve_with(
    lp: &LinearProgram,
    options: &SolverOptions,
    warm: Option<&Basis>,
) -> Result<LpSolution, LpError> {
    if let Some(basis) = warm {
        let mut sx = Simplex::new(lp, options);
        if sx.load_basis(basis)? {
            match sx.optimise(lp) {
                Ok(sol) => return Ok(sol),
                Err(LpError::NumericalInstability { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let mut sx = Simplex::new(lp, options);
    match sx.cold_solve(lp) {
        Err(LpError::NumericalInstability { .. }) => {
            // Second attempt with frequent refactorisation.
            let mut careful = options.clone();
            careful.refactor_interval = 50;
            let mut sx = Simplex::new(lp, &careful);
            sx.cold_solve(lp)
        }
        other => other,
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    opts: &'a SolverOptions,
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    rhs: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    binv: Vec<f64>,
    first_artificial: usize,
    iterations: usize,
    since_refactor: usize,
    // scratch
    duals: Vec<f64>,
    alpha: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let n = lp.num_variables();
        let m = lp.num_constraints();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        for (i, c) in lp.constraints().iter().enumerate() {
            for &(v, a) in &c.terms {
                let col = &mut cols[v.0];
                match col.last_mut() {
                    Some((row, val)) if *row == i => *val += a,
                    _ => col.push((i, a)),
                }
            }
        }
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in lp.variables() {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for (i, c) in lp.constraints().iter().enumerate() {
            cols[n + i].push((i, 1.0));
            let (l, u) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
        }
        let mut objective = vec![0.0; n + m];
        for &(v, c) in &lp.objective().terms {
            objective[v.0] += c;
        }
        let rhs = lp.constraints().iter().map(|c| c.rhs).collect();
        let total = n + m;
        Self {
            opts,
            n,
            m,
            cols,
            lower,
            upper,
            cost: objective.clone(),
            objective,
            x: vec![0.0; total],
            rhs,
            head: Vec::new(),
            pos: vec![None; total],
            at_upper: vec![false; total],
            binv: Vec::new(),
            first_artificial: total,
            iterations: 0,
            since_refactor: 0,
            duals: vec![0.0; m],
            alpha: vec![0.0; m],
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else if self.lower[j].is_finite() {
            self.lower[j]
        } else if self.upper[j].is_finite() {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn place_nonbasic(&mut self, j: usize) {
        self.at_upper[j] = !self.lower[j].is_finite() && self.upper[j].is_finite();
        self.x[j] = self.nonbasic_value(j);
    }

    fn feas_tol(&self, bound: f64) -> f64 {
        self.opts.feasibility_tol * (1.0 + bound.abs())
    }

    fn cold_solve(&mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.place_nonbasic(j);
        }
        let mut residual = self.rhs.clone();
        for j in 0..n {
            let xj = self.x[j];
            if xj != 0.0 {
                for &(r, a) in &self.cols[j] {
                    residual[r] -= a * xj;
                }
            }
        }
        self.head = vec![usize::MAX; m];
        let mut diag = vec![1.0; m];
        for (i, &r) in residual.iter().enumerate() {
            let s = n + i;
            let (l, u) = (self.lower[s], self.upper[s]);
            if r >= l - self.feas_tol(l) && r <= u + self.feas_tol(u) {
                self.head[i] = s;
                self.pos[s] = Some(i);
                self.x[s] = r;
            } else {
                let bound = if r < l { l } else { u };
                self.at_upper[s] = bound == u && u.is_finite() && r > u;
                self.x[s] = bound;
                let sign = if r - bound > 0.0 { 1.0 } else { -1.0 };
                let art = self.cols.len();
                self.cols.push(vec![(i, sign)]);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.objective.push(0.0);
                self.x.push((r - bound).abs());
                self.pos.push(Some(i));
                self.at_upper.push(false);
                self.head[i] = art;
                diag[i] = sign;
            }
        }
        self.first_artificial = n + m;
        let total = self.cols.len();
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = 1.0 / diag[i];
        }

        if total > self.first_artificial {
            self.cost = vec![0.0; total];
            for j in self.first_artificial..total {
                self.cost[j] = 1.0;
            }
            self.run_phase()?;
            let infeasible = (self.first_artificial..total).any(|j| {
                let row = self.cols[j][0].0;
                self.x[j] > self.feas_tol(self.rhs[row])
            });
            if infeasible {
                return Ok(self.finish(lp, LpStatus::Infeasible));
            }
            for j in self.first_artificial..total {
                self.upper[j] = 0.0;
                if self.pos[j].is_none() {
                    self.at_upper[j] = false;
                    self.x[j] = 0.0;
                }
            }
            self.drive_out_artificials();
        }
        self.cost = self.objective.clone();
        self.optimise(lp)
    }

    /// Loads a warm basis. Returns `false` when it is not primal feasible for `lp`.
    fn load_basis(&mut self, basis: &Basis) -> Result<bool, LpError> {
        let (n, m) = (self.n, self.m);
        if basis.num_structural != n || basis.num_rows > m {
            return Err(LpError::BasisMismatch(format!(
                "basis has {} columns/{} rows, program has {}/{}",
                basis.num_structural, basis.num_rows, n, m
            )));
        }
        let m0 = basis.num_rows;
        self.head = basis.head.clone();
        for i in m0..m {
            self.head.push(n + i);
        }
        for (p, &j) in self.head.iter().enumerate() {
            self.pos[j] = Some(p);
        }
        for j in 0..n + m0 {
            self.at_upper[j] = basis.at_upper[j];
        }
        // Inverse of [[B, 0], [C, I]] is [[B⁻¹, 0], [-C B⁻¹, I]].
        let mut binv = vec![0.0; m * m];
        for r in 0..m0 {
            binv[r * m..r * m + m0].copy_from_slice(&basis.inverse[r * m0..(r + 1) * m0]);
        }
        if m > m0 {
            // coefficients of the new rows on the old basic columns, by basis position
            let mut c_rows = vec![vec![0.0; m0]; m - m0];
            for (p, &j) in basis.head.iter().enumerate() {
                for &(row, a) in &self.cols[j] {
                    if row >= m0 {
                        c_rows[row - m0][p] += a;
                    }
                }
            }
            for (k, crow) in c_rows.iter().enumerate() {
                let target = (m0 + k) * m;
                for (p, &c) in crow.iter().enumerate() {
                    if c != 0.0 {
                        for col in 0..m0 {
                            binv[target + col] -= c * basis.inverse[p * m0 + col];
                        }
                    }
                }
                binv[target + m0 + k] = 1.0;
            }
        }
        self.binv = binv;
        for j in 0..n + m {
            if self.pos[j].is_none() {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.recompute_basic_values();
        Ok(self.primal_infeasibility() == 0.0)
    }

    fn optimise(&mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let mut refinements = 0;
        loop {
            if let PhaseOutcome::Unbounded = self.run_phase()? {
                return Ok(self.finish(lp, LpStatus::Unbounded));
            }
            self.recompute_basic_values();
            let residual = self.primal_infeasibility().max(self.row_residual(lp));
            if residual == 0.0 {
                return Ok(self.finish(lp, LpStatus::Optimal));
            }
            refinements += 1;
            if refinements > 2 {
                return Err(LpError::NumericalInstability { residual });
            }
            self.refactor()?;
            self.recompute_basic_values();
            if self.primal_infeasibility() > 0.0 {
                let residual = self.primal_infeasibility();
                return Err(LpError::NumericalInstability { residual });
            }
        }
    }

    /// Largest basic bound violation beyond tolerance (0 when within tolerance).
    fn primal_infeasibility(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &j in &self.head {
            let v = self.x[j];
            let (l, u) = (self.lower[j], self.upper[j]);
            if v < l - self.feas_tol(l) {
                worst = worst.max((l - v) / (1.0 + l.abs()));
            }
            if v > u + self.feas_tol(u) {
                worst = worst.max((v - u) / (1.0 + u.abs()));
            }
        }
        worst
    }

    /// Relative row residual of the structural solution beyond tolerance (0 when within).
    fn row_residual(&self, lp: &LinearProgram) -> f64 {
        let viol = lp.max_relative_violation(&self.x[..self.n]);
        if viol <= self.opts.feasibility_tol {
            0.0
        } else {
            viol
        }
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.cols.len() {
            if self.pos[j].is_none() {
                let xj = self.x[j];
                if xj != 0.0 {
                    for &(row, a) in &self.cols[j] {
                        r[row] -= a * xj;
                    }
                }
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.head[p]] = v;
        }
    }

    /// Rebuilds the basis inverse from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (p, &j) in self.head.iter().enumerate() {
            for &(row, a) in &self.cols[j] {
                b[row * m + p] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = b[col * m + col].abs();
            for r in col + 1..m {
                let v = b[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(LpError::NumericalInstability { residual: best });
            }
            if piv != col {
                for k in 0..m {
                    b.swap(col * m + k, piv * m + k);
                    inv.swap(col * m + k, piv * m + k);
                }
            }
            let d = b[col * m + col];
            for k in 0..m {
                b[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = b[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            b[r * m + k] -= f * b[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        // `inv` is B⁻¹ with rows indexed by basis position.
        self.binv = inv;
        self.since_refactor = 0;
        Ok(())
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        self.duals.iter_mut().for_each(|y| *y = 0.0);
        for p in 0..m {
            let c = self.cost[self.head[p]];
            if c != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (y, b) in self.duals.iter_mut().zip(row) {
                    *y += c * b;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        for &(r, a) in &self.cols[j] {
            d -= self.duals[r] * a;
        }
        d
    }

    fn compute_alpha(&mut self, j: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|a| *a = 0.0);
        for &(r, a) in &self.cols[j] {
            for p in 0..m {
                let b = self.binv[p * m + r];
                if b != 0.0 {
                    self.alpha[p] += b * a;
                }
            }
        }
    }

    /// Chooses an entering column. Returns `(column, reduced cost)`.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols.len() {
            if self.pos[j].is_some() || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let eligible = if !self.lower[j].is_finite() && !self.upper[j].is_finite() {
                d.abs() > tol
            } else if self.at_upper[j] {
                d > tol
            } else {
                d < -tol
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            match best {
                Some((_, bd)) if bd.abs() >= d.abs() => {}
                _ => best = Some((j, d)),
            }
        }
        best
    }

    fn run_phase(&mut self) -> Result<PhaseOutcome, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(LpError::IterationLimit(self.opts.max_iterations));
            }
            if self.opts.refactor_interval > 0 && self.since_refactor >= self.opts.refactor_interval
            {
                self.refactor()?;
                self.recompute_basic_values();
            }
            self.compute_duals();
            let bland = degenerate >= self.opts.degenerate_limit;
            let Some((q, d)) = self.price(bland) else {
                return Ok(PhaseOutcome::Optimal);
            };
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            self.compute_alpha(q);

            let (leave, theta) = self.ratio_test(dir, bland);
            let flip = self.upper[q] - self.lower[q];
            let (step, leaving_row) = match leave {
                Some(r) if theta < flip => (theta, Some(r)),
                _ if flip.is_finite() => (flip, None),
                _ => return Ok(PhaseOutcome::Unbounded),
            };
            self.iterations += 1;
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            if step != 0.0 {
                for p in 0..self.m {
                    let a = self.alpha[p];
                    if a != 0.0 {
                        self.x[self.head[p]] -= step * dir * a;
                    }
                }
                self.x[q] += step * dir;
            }

            match leaving_row {
                Some(r) => self.pivot(q, r, dir),
                None => {
                    self.at_upper[q] = dir > 0.0;
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
            }
        }
    }

    /// Harris two-pass ratio test; Bland mode takes the lowest column index among ties.
    fn ratio_test(&self, dir: f64, bland: bool) -> (Option<usize>, f64) {
        let ptol = self.opts.pivot_tol;
        let mut relaxed = f64::INFINITY;
        let mut exact_min = f64::INFINITY;
        for p in 0..self.m {
            let delta = -dir * self.alpha[p];
            let j = self.head[p];
            if delta < -ptol && self.lower[j].is_finite() {
                let gap = self.x[j] - self.lower[j];
                relaxed = relaxed.min((gap + self.feas_tol(self.lower[j])) / -delta);
                exact_min = exact_min.min(gap.max(0.0) / -delta);
            } else if delta > ptol && self.upper[j].is_finite() {
                let gap = self.upper[j] - self.x[j];
                relaxed = relaxed.min((gap + self.feas_tol(self.upper[j])) / delta);
                exact_min = exact_min.min(gap.max(0.0) / delta);
            }
        }
        if !relaxed.is_finite() {
            return (None, f64::INFINITY);
        }
        let mut chosen: Option<(usize, f64, f64)> = None;
        for p in 0..self.m {
            let delta = -dir * self.alpha[p];
            let j = self.head[p];
            let t = if delta < -ptol && self.lower[j].is_finite() {
                (self.x[j] - self.lower[j]).max(0.0) / -delta
            } else if delta > ptol && self.upper[j].is_finite() {
                (self.upper[j] - self.x[j]).max(0.0) / delta
            } else {
                continue;
            };
            if bland {
                if t <= exact_min + 1e-12 {
                    match chosen {
                        Some((cp, _, _)) if self.head[cp] < j => {}
                        _ => chosen = Some((p, t, delta.abs())),
                    }
                }
            } else if t <= relaxed {
                match chosen {
                    Some((_, _, mag)) if mag >= delta.abs() => {}
                    _ => chosen = Some((p, t, delta.abs())),
                }
            }
        }
        chosen.map_or((None, f64::INFINITY), |(p, t, _)| (Some(p), t))
    }

    fn pivot(&mut self, q: usize, r: usize, dir: f64) {
        let leaving = self.head[r];
        let delta = -dir * self.alpha[r];
        if delta < 0.0 {
            self.x[leaving] = self.lower[leaving];
            self.at_upper[leaving] = false;
        } else {
            self.x[leaving] = self.upper[leaving];
            self.at_upper[leaving] = true;
        }
        if !self.lower[leaving].is_finite() && !self.upper[leaving].is_finite() {
            self.x[leaving] = 0.0;
        }
        self.pos[leaving] = None;
        self.head[r] = q;
        self.pos[q] = Some(r);
        self.at_upper[q] = false;
        self.update_inverse(r);
    }

    fn update_inverse(&mut self, r: usize) {
        let m = self.m;
        let piv = self.alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        pivot_row.iter_mut().for_each(|v| *v /= piv);
        for (p, row) in before.chunks_exact_mut(m).enumerate() {
            let a = self.alpha[p];
            if a != 0.0 {
                for (v, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= a * pr;
                }
            }
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let a = self.alpha[r + 1 + k];
            if a != 0.0 {
                for (v, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= a * pr;
                }
            }
        }
        self.since_refactor += 1;
    }

    /// Pivots zero-valued artificials out of the basis where a replacement exists.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.head[r] < self.first_artificial {
                continue;
            }
            let mut replacement = None;
            for j in 0..self.first_artificial {
                if self.pos[j].is_some() {
                    continue;
                }
                let mut a_rj = 0.0;
                for &(row, a) in &self.cols[j] {
                    a_rj += self.binv[r * m + row] * a;
                }
                if a_rj.abs() > 1e-7 {
                    replacement = Some(j);
                    break;
                }
            }
            if let Some(j) = replacement {
                self.compute_alpha(j);
                let art = self.head[r];
                self.pos[art] = None;
                self.x[art] = 0.0;
                self.at_upper[art] = false;
                self.head[r] = j;
                self.pos[j] = Some(r);
                self.update_inverse(r);
                self.recompute_basic_values();
            }
        }
    }

    fn finish(&mut self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let values: Vec<f64> = self.x[..self.n].to_vec();
        let objective = match status {
            LpStatus::Optimal => lp.evaluate_objective(&values),
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Infeasible => f64::NAN,
        };
        let basis = (status == LpStatus::Optimal
            && self.head.iter().all(|&j| j < self.first_artificial))
        .then(|| Basis {
            num_structural: self.n,
            num_rows: self.m,
            head: self.head.clone(),
            at_upper: self.at_upper[..self.n + self.m].to_vec(),
            inverse: std::mem::take(&mut self.binv),
        });
        LpSolution {
            status,
            values,
            objective,
            iterations: self.iterations,
            basis,
        }
    }
}
