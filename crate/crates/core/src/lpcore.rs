//! Self-contained linear-program solver.
//!
//! Bounded-variable primal simplex on a dense tableau with Bland's rule
//! for both entering and leaving variables, two-phase start with
//! artificial variables, and row/column equilibration. Problem sizes
//! here are thin (thousands of columns, tens of rows), so the dense
//! tableau is the simplest structure that stays fast.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_vars: usize,
    /// Minimization objective.
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    /// `f64::INFINITY` for an unbounded-above variable.
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(LpRow {
            coeffs,
            relation,
            rhs,
        });
    }

    fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars
            || self.lower.len() != self.num_vars
            || self.upper.len() != self.num_vars
        {
            return Err(LpError::BadProblem("vector lengths disagree".to_string()));
        }
        for j in 0..self.num_vars {
            if !self.objective[j].is_finite() {
                return Err(LpError::BadProblem(format!("objective[{j}] not finite")));
            }
            if !self.lower[j].is_finite() {
                return Err(LpError::BadProblem(format!("lower[{j}] must be finite")));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::BadProblem(format!("bounds crossed at var {j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::BadProblem(format!("rhs[{i}] not finite")));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.num_vars {
                    return Err(LpError::BadProblem(format!("row {i} references var {j}")));
                }
                if !a.is_finite() {
                    return Err(LpError::BadProblem(format!("coefficient in row {i} not finite")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual value per constraint row (sign convention: reduced cost
    /// = c - A'y).
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    BadProblem(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

const TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Dense row-major `B^-1 * A` over all columns.
    t: Vec<f64>,
    /// Basic variable values, one per row.
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    /// Current value of every nonbasic variable (its active bound).
    value: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Reduced-cost row for the active objective.
    rc: Vec<f64>,
    cost: Vec<f64>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    /// Reduced costs from scratch for the given cost vector:
    /// rc = cost - cost_B * T (T already is B^-1 A).
    fn reset_costs(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.rc.clone_from(&self.cost);
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (rc, &tv) in self.rc.iter_mut().zip(row) {
                    *rc -= cb * tv;
                }
            }
        }
    }

    fn objective_value(&self) -> f64 {
        let mut v = 0.0;
        for i in 0..self.rows {
            v += self.cost[self.basis[i]] * self.xb[i];
        }
        for j in 0..self.cols {
            if self.state[j] != VarState::Basic {
                v += self.cost[j] * self.value[j];
            }
        }
        v
    }

    /// One simplex iteration under Bland's rule. Returns false when optimal.
    fn step(&mut self) -> Result<bool, LpError> {
        // Entering: lowest-index eligible column.
        let mut entering = None;
        for j in 0..self.cols {
            match self.state[j] {
                VarState::AtLower if self.rc[j] < -TOL && self.upper[j] > self.lower[j] => {
                    entering = Some((j, 1.0));
                    break;
                }
                VarState::AtUpper if self.rc[j] > TOL && self.upper[j] > self.lower[j] => {
                    entering = Some((j, -1.0));
                    break;
                }
                _ => {}
            }
        }
        let Some((e, dir)) = entering else {
            return Ok(false);
        };

        // Ratio test: how far can the entering variable move?
        let own_limit = self.upper[e] - self.lower[e];
        let mut t_max = own_limit;
        let mut leaving: Option<(usize, bool)> = None; // (row, hits_lower)
        for i in 0..self.rows {
            let w = dir * self.at(i, e);
            let b = self.basis[i];
            let (limit, hits_lower) = if w > PIVOT_TOL {
                ((self.xb[i] - self.lower[b]) / w, true)
            } else if w < -PIVOT_TOL {
                ((self.upper[b] - self.xb[i]) / (-w), false)
            } else {
                continue;
            };
            if !limit.is_finite() {
                continue;
            }
            let limit = limit.max(0.0);
            let better = limit < t_max - TOL
                || (limit < t_max + TOL
                    && leaving.is_some_and(|(r, _)| b < self.basis[r]));
            if better {
                t_max = limit.min(t_max);
                leaving = Some((i, hits_lower));
            }
        }

        if t_max.is_infinite() {
            return Err(LpError::Numerical("unbounded direction".to_string()));
        }

        match leaving {
            None => {
                // Bound flip: entering moves across its whole range.
                for i in 0..self.rows {
                    let w = dir * self.at(i, e);
                    self.xb[i] -= t_max * w;
                }
                self.value[e] = if dir > 0.0 { self.upper[e] } else { self.lower[e] };
                self.state[e] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                Ok(true)
            }
            Some((r, hits_lower)) => {
                let pivot = self.at(r, e);
                if pivot.abs() < PIVOT_TOL {
                    return Err(LpError::Numerical(format!(
                        "singular pivot {pivot:e} at row {r}"
                    )));
                }
                // Move basic values along the direction.
                for i in 0..self.rows {
                    let w = dir * self.at(i, e);
                    self.xb[i] -= t_max * w;
                }
                let new_val = self.value[e] + dir * t_max;
                let out = self.basis[r];
                self.state[out] = if hits_lower { VarState::AtLower } else { VarState::AtUpper };
                self.value[out] = if hits_lower { self.lower[out] } else { self.upper[out] };
                self.basis[r] = e;
                self.state[e] = VarState::Basic;
                self.xb[r] = new_val;

                // Row-reduce the tableau and the reduced-cost row.
                let inv = 1.0 / pivot;
                let (before, rest) = self.t.split_at_mut(r * self.cols);
                let (prow, after) = rest.split_at_mut(self.cols);
                for v in prow.iter_mut() {
                    *v *= inv;
                }
                let reduce = |row: &mut [f64], factor: f64| {
                    if factor != 0.0 {
                        for (v, &p) in row.iter_mut().zip(prow.iter()) {
                            *v -= factor * p;
                        }
                    }
                };
                for row in before.chunks_exact_mut(self.cols) {
                    let factor = row[e];
                    reduce(row, factor);
                }
                for row in after.chunks_exact_mut(self.cols) {
                    let factor = row[e];
                    reduce(row, factor);
                }
                let factor = self.rc[e];
                if factor != 0.0 {
                    for (v, &p) in self.rc.iter_mut().zip(prow.iter()) {
                        *v -= factor * p;
                    }
                }
                Ok(true)
            }
        }
    }

    fn run(&mut self, max_iters: usize) -> Result<(), LpError> {
        for _ in 0..max_iters {
            if !self.step()? {
                return Ok(());
            }
        }
        Err(LpError::Numerical(format!(
            "iteration limit {max_iters} exceeded"
        )))
    }
}

/// Solve a bounded-variable LP. Deterministic: identical input produces
/// an identical pivot sequence and bit-identical output.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars;
    let m = problem.rows.len();

    // Equilibrate: row scale by max |a|, then column scale by max |r a|.
    let mut row_scale = vec![1.0f64; m];
    for (i, row) in problem.rows.iter().enumerate() {
        let mx = row
            .coeffs
            .iter()
            .map(|&(_, a)| a.abs())
            .fold(0.0f64, f64::max);
        if mx > 0.0 {
            row_scale[i] = 1.0 / mx;
        }
    }
    let mut col_scale = vec![1.0f64; n];
    {
        let mut col_max = vec![0.0f64; n];
        for (i, row) in problem.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_max[j] = col_max[j].max((row_scale[i] * a).abs());
            }
        }
        for j in 0..n {
            if col_max[j] > 0.0 {
                col_scale[j] = 1.0 / col_max[j];
            }
        }
    }

    // Columns: n structural, m slacks, then up to m artificials.
    let total = n + 2 * m;
    let mut dense = vec![0.0f64; m * total];
    for (i, row) in problem.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            dense[i * total + j] += row_scale[i] * a * col_scale[j];
        }
        dense[i * total + n + i] = 1.0;
    }

    let mut lower = vec![0.0f64; total];
    let mut upper = vec![0.0f64; total];
    for j in 0..n {
        lower[j] = problem.lower[j] / col_scale[j];
        upper[j] = problem.upper[j] / col_scale[j];
    }
    for (i, row) in problem.rows.iter().enumerate() {
        let (lo, hi) = match row.relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        lower[n + i] = lo;
        upper[n + i] = hi;
        // artificial bounds set below
        lower[n + m + i] = 0.0;
        upper[n + m + i] = 0.0;
    }

    // Start: structural and slack variables at their bound nearest zero.
    let mut state = vec![VarState::AtLower; total];
    let mut value = vec![0.0f64; total];
    for j in 0..n + m {
        if lower[j].is_finite() {
            state[j] = VarState::AtLower;
            value[j] = lower[j];
        } else {
            state[j] = VarState::AtUpper;
            value[j] = upper[j];
        }
    }

    // Residuals become artificial variable values.
    let mut basis = Vec::with_capacity(m);
    let mut xb = Vec::with_capacity(m);
    for i in 0..m {
        let mut r = row_scale[i] * problem.rows[i].rhs;
        for j in 0..n + m {
            let a = dense[i * total + j];
            if a != 0.0 {
                r -= a * value[j];
            }
        }
        let art = n + m + i;
        dense[i * total + art] = if r >= 0.0 { 1.0 } else { -1.0 };
        upper[art] = f64::INFINITY;
        state[art] = VarState::Basic;
        basis.push(art);
        xb.push(r.abs());
    }

    let mut tab = Tableau {
        rows: m,
        cols: total,
        t: dense,
        xb,
        basis,
        state,
        value,
        lower,
        upper,
        rc: vec![0.0; total],
        cost: vec![0.0; total],
    };

    let max_iters = 10_000 + 10 * (m + total);

    // Phase 1: minimize the artificial sum.
    let mut phase1 = vec![0.0f64; total];
    for j in n + m..total {
        phase1[j] = 1.0;
    }
    tab.reset_costs(phase1);
    tab.run(max_iters)?;
    let infeasibility = tab.objective_value();
    if infeasibility > 1e-7 {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![],
            objective: f64::NAN,
            duals: vec![],
        });
    }

    // Pin artificials at zero; drive basic ones out where possible.
    for j in n + m..total {
        tab.upper[j] = 0.0;
        if tab.state[j] != VarState::Basic {
            tab.state[j] = VarState::AtLower;
            tab.value[j] = 0.0;
        }
    }
    for r in 0..m {
        if tab.basis[r] >= n + m {
            let mut pivot_col = None;
            for j in 0..n + m {
                if tab.state[j] != VarState::Basic && tab.at(r, j).abs() > 1e-7 {
                    pivot_col = Some(j);
                    break;
                }
            }
            if let Some(e) = pivot_col {
                // Degenerate swap at step length zero: the artificial sits
                // at 0, so no basic value moves; the entering variable
                // becomes basic at the bound value it already holds.
                let out = tab.basis[r];
                let pivot = tab.at(r, e);
                tab.state[out] = VarState::AtLower;
                tab.value[out] = 0.0;
                let entering_value = tab.value[e];
                tab.basis[r] = e;
                tab.state[e] = VarState::Basic;
                tab.xb[r] = entering_value;
                let inv = 1.0 / pivot;
                for v in tab.t[r * total..(r + 1) * total].iter_mut() {
                    *v *= inv;
                }
                for i in 0..m {
                    if i == r {
                        continue;
                    }
                    let factor = tab.at(i, e);
                    if factor != 0.0 {
                        let (base, row_r) = if i < r {
                            let (a, b) = tab.t.split_at_mut(r * total);
                            (&mut a[i * total..(i + 1) * total], &b[..total])
                        } else {
                            let (a, b) = tab.t.split_at_mut(i * total);
                            (&mut b[..total], &a[r * total..(r + 1) * total])
                        };
                        for (v, &p) in base.iter_mut().zip(row_r.iter()) {
                            *v -= factor * p;
                        }
                    }
                }
            }
            // A redundant row keeps its artificial basic at zero with
            // bounds pinned to [0,0]; it can never move again.
        }
    }

    // Phase 2.
    let mut phase2 = vec![0.0f64; total];
    for j in 0..n {
        phase2[j] = problem.objective[j] * col_scale[j];
    }
    tab.reset_costs(phase2);
    match tab.run(max_iters) {
        Ok(()) => {}
        Err(LpError::Numerical(msg)) if msg.contains("unbounded") => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: vec![],
                objective: f64::NEG_INFINITY,
                duals: vec![],
            });
        }
        Err(e) => return Err(e),
    }

    // Unscale.
    let mut x = vec![0.0f64; n];
    for j in 0..n {
        let v = match tab.state[j] {
            VarState::Basic => {
                let r = tab.basis.iter().position(|&b| b == j).unwrap();
                tab.xb[r]
            }
            _ => tab.value[j],
        };
        x[j] = v * col_scale[j];
        // Snap within-tolerance bound violations onto the bound.
        if x[j] < problem.lower[j] {
            x[j] = problem.lower[j];
        }
        if x[j] > problem.upper[j] {
            x[j] = problem.upper[j];
        }
    }
    let mut duals = vec![0.0f64; m];
    for i in 0..m {
        duals[i] = -tab.rc[n + i] * row_scale[i];
    }
    let objective = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum::<f64>();

    let solution = LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        duals,
    };

    // Self-check against the original data: a failed certificate here is
    // a numerical breakdown, never a silently wrong answer.
    let report = certify_with(problem, &solution, 1e-6);
    if !report.pass {
        return Err(LpError::Numerical(format!(
            "optimality self-check failed: {}",
            report.messages.join("; ")
        )));
    }
    Ok(solution)
}

#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub pass: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub messages: Vec<String>,
}

/// Re-checks primal and dual feasibility plus the strong-duality gap of
/// an optimal solution against the original problem data.
pub fn certify(problem: &LpProblem, solution: &LpSolution) -> CertifyReport {
    certify_with(problem, solution, 1e-7)
}

fn certify_with(problem: &LpProblem, solution: &LpSolution, tol: f64) -> CertifyReport {
    let mut messages = Vec::new();
    if solution.status != LpStatus::Optimal {
        return CertifyReport {
            pass: false,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            duality_gap: f64::NAN,
            messages: vec!["solution is not optimal".to_string()],
        };
    }
    let x = &solution.x;
    let y = &solution.duals;

    let mut primal_residual = 0.0f64;
    for (i, row) in problem.rows.iter().enumerate() {
        let ax: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        let scale = 1.0 + row.rhs.abs();
        let violation = match row.relation {
            Relation::Le => (ax - row.rhs) / scale,
            Relation::Ge => (row.rhs - ax) / scale,
            Relation::Eq => (ax - row.rhs).abs() / scale,
        };
        if violation > primal_residual {
            primal_residual = violation;
        }
        if violation > tol {
            messages.push(format!("row {i} violated by {violation:e}"));
        }
        // Dual sign: Le rows need y <= 0, Ge rows y >= 0 (rc = c - A'y).
        let sign_violation = match row.relation {
            Relation::Le => y[i].max(0.0),
            Relation::Ge => (-y[i]).max(0.0),
            Relation::Eq => 0.0,
        };
        if sign_violation > tol {
            messages.push(format!("dual sign violated on row {i}: y = {}", y[i]));
        }
        // Complementary slackness.
        let slack = (ax - row.rhs).abs();
        if y[i].abs() > tol && slack / scale > tol && row.relation != Relation::Eq {
            messages.push(format!(
                "complementary slackness violated on row {i} (y = {}, slack = {slack:e})",
                y[i]
            ));
        }
    }
    for (j, &v) in x.iter().enumerate() {
        let lo = problem.lower[j];
        let hi = problem.upper[j];
        let scale = 1.0 + v.abs();
        if v < lo - tol * scale || v > hi + tol * scale {
            messages.push(format!("variable {j} out of bounds"));
        }
    }

    // Reduced costs and dual feasibility with respect to the bounds.
    let mut rc: Vec<f64> = problem.objective.clone();
    for (i, row) in problem.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            rc[j] -= a * y[i];
        }
    }
    let mut dual_residual = 0.0f64;
    let obj_scale = 1.0 + solution.objective.abs();
    for j in 0..problem.num_vars {
        let lo = problem.lower[j];
        let hi = problem.upper[j];
        let at_lower = x[j] - lo <= tol * (1.0 + lo.abs());
        let at_upper = hi.is_finite() && hi - x[j] <= tol * (1.0 + hi.abs());
        let violation = if at_lower && at_upper {
            0.0
        } else if at_lower {
            (-rc[j]).max(0.0)
        } else if at_upper {
            rc[j].max(0.0)
        } else {
            rc[j].abs()
        };
        let scaled = violation / obj_scale;
        if scaled > dual_residual {
            dual_residual = scaled;
        }
        if scaled > tol {
            messages.push(format!("reduced cost of var {j} violates optimality: {:e}", rc[j]));
        }
    }

    // Strong duality: dual objective = y'b + bound terms from reduced costs.
    let mut dual_obj: f64 = problem.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum();
    for j in 0..problem.num_vars {
        if rc[j] > 0.0 {
            dual_obj += rc[j] * problem.lower[j];
        } else if rc[j] < 0.0 && problem.upper[j].is_finite() {
            dual_obj += rc[j] * problem.upper[j];
        }
    }
    let duality_gap = (solution.objective - dual_obj).abs();
    if duality_gap > tol * (1.0 + solution.objective.abs()) {
        messages.push(format!("duality gap {duality_gap:e}"));
    }

    CertifyReport {
        pass: messages.is_empty(),
        primal_residual,
        dual_residual,
        duality_gap,
        messages,
    }
}
