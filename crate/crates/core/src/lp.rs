//! Dense two-phase primal simplex with Bland's pivoting rule.
//!
//! Programs are stated as
//!
//! ```text
//! minimize    c . v
//! subject to  A_eq v  = b_eq
//!             A_ub v <= b_ub
//!             lower <= v <= upper
//! ```
//!
//! and brought to standard form internally (bounds shifted, finite upper
//! bounds turned into rows, free variables split). The final basis is
//! re-solved against the original data so that primal values and dual
//! multipliers are accurate to working precision.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    /// `None` means unbounded below.
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    /// Defaults to `50 * (rows + cols)` of the standard form.
    pub max_iterations: Option<usize>,
}

impl LinearProgram {
    /// `minimize objective . v` with `v >= 0` and no constraints yet.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            lower: vec![Some(0.0); n],
            upper: vec![None; n],
            max_iterations: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn free(&mut self, var: usize) -> &mut Self {
        self.bounds(var, None, None)
    }

    fn check(&self) -> Result<(), String> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err("bound vectors must match the number of variables".into());
        }
        if self.a_eq.len() != self.b_eq.len() || self.a_ub.len() != self.b_ub.len() {
            return Err("constraint matrix and right-hand side lengths differ".into());
        }
        if self.a_eq.iter().chain(&self.a_ub).any(|r| r.len() != n) {
            return Err("constraint row length differs from number of variables".into());
        }
        let finite = self
            .objective
            .iter()
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_ub.iter().flatten())
            .chain(&self.b_eq)
            .chain(&self.b_ub)
            .chain(self.lower.iter().flatten())
            .chain(self.upper.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite coefficient".into());
        }
        for j in 0..n {
            if let (Some(l), Some(u)) = (self.lower[j], self.upper[j]) {
                if l > u {
                    return Err(format!("variable {j} has lower bound {l} above upper bound {u}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The program itself is malformed.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One multiplier per equality row, then one per inequality row. For a
    /// minimization, inequality multipliers are `<= 0`.
    pub dual: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub iterations: usize,
    pub message: Option<String>,
}

impl LpSolution {
    fn failed(status: LpStatus, iterations: usize, message: impl Into<String>) -> Self {
        Self {
            status,
            primal: Vec::new(),
            dual: Vec::new(),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            duality_gap: f64::NAN,
            primal_residual: f64::NAN,
            iterations,
            message: Some(message.into()),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Mapping of a standard-form column back to an original variable.
#[derive(Debug, Clone, Copy)]
enum StdCol {
    Var { var: usize, sign: f64 },
    Slack,
}

struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    cols: Vec<StdCol>,
    /// Slack column owned by each row, if any.
    row_slack: Vec<Option<usize>>,
    offsets: Vec<f64>,
    constant: f64,
    n_eq: usize,
    n_ub: usize,
}

fn to_standard_form(prog: &LinearProgram) -> StandardForm {
    let n = prog.num_vars();
    let mut cols = Vec::new();
    let mut offsets = vec![0.0; n];
    let mut var_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut bound_rows = Vec::new();
    for j in 0..n {
        match (prog.lower[j], prog.upper[j]) {
            (Some(l), u) => {
                offsets[j] = l;
                var_cols[j].push((cols.len(), 1.0));
                if let Some(u) = u {
                    bound_rows.push((cols.len(), u - l));
                }
                cols.push(StdCol::Var { var: j, sign: 1.0 });
            }
            (None, Some(u)) => {
                offsets[j] = u;
                var_cols[j].push((cols.len(), -1.0));
                cols.push(StdCol::Var { var: j, sign: -1.0 });
            }
            (None, None) => {
                var_cols[j].push((cols.len(), 1.0));
                cols.push(StdCol::Var { var: j, sign: 1.0 });
                var_cols[j].push((cols.len(), -1.0));
                cols.push(StdCol::Var { var: j, sign: -1.0 });
            }
        }
    }
    let n_struct = cols.len();
    let n_eq = prog.a_eq.len();
    let n_ub = prog.a_ub.len();
    let m = n_eq + n_ub + bound_rows.len();
    let n_slack = n_ub + bound_rows.len();
    let width = n_struct + n_slack;

    let mut a = vec![vec![0.0; width]; m];
    let mut b = vec![0.0; m];
    let mut row_slack = vec![None; m];

    let fill = |row: &mut Vec<f64>, src: &[f64], rhs: f64| -> f64 {
        let mut shift = 0.0;
        for (j, &v) in src.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            shift += v * offsets[j];
            for &(col, sign) in &var_cols[j] {
                row[col] += v * sign;
            }
        }
        rhs - shift
    };
    for i in 0..n_eq {
        b[i] = fill(&mut a[i], &prog.a_eq[i], prog.b_eq[i]);
    }
    for i in 0..n_ub {
        let r = n_eq + i;
        b[r] = fill(&mut a[r], &prog.a_ub[i], prog.b_ub[i]);
        let s = n_struct + i;
        a[r][s] = 1.0;
        row_slack[r] = Some(s);
        cols.push(StdCol::Slack);
    }
    for (k, &(col, rhs)) in bound_rows.iter().enumerate() {
        let r = n_eq + n_ub + k;
        a[r][col] = 1.0;
        b[r] = rhs;
        let s = n_struct + n_ub + k;
        a[r][s] = 1.0;
        row_slack[r] = Some(s);
        cols.push(StdCol::Slack);
    }

    let mut c = vec![0.0; width];
    let mut constant = 0.0;
    for j in 0..n {
        constant += prog.objective[j] * offsets[j];
        for &(col, sign) in &var_cols[j] {
            c[col] = prog.objective[j] * sign;
        }
    }
    StandardForm { a, b, c, cols, row_slack, offsets, constant, n_eq, n_ub }
}

struct Tableau {
    m: usize,
    /// Row stride: all columns plus the right-hand side.
    stride: usize,
    ncols: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    iterations: usize,
    limit: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.stride + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.stride + self.ncols]
    }

    fn pivot(&mut self, r: usize, e: usize, d: &mut [f64], obj: &mut f64) {
        let stride = self.stride;
        let piv = self.t[r * stride + e];
        {
            let row = &mut self.t[r * stride..(r + 1) * stride];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[e] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * stride..(r + 1) * stride].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * stride + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * stride..(i + 1) * stride];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            row[e] = 0.0;
        }
        let f = d[e];
        if f != 0.0 {
            for (dj, p) in d.iter_mut().zip(&pivot_row[..self.ncols]) {
                *dj -= f * p;
            }
            d[e] = 0.0;
            *obj += f * pivot_row[self.ncols];
        }
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = e;
        self.is_basic[e] = true;
        self.iterations += 1;
    }

    /// Reduced costs and objective value for cost vector `c` under the
    /// current basis.
    fn reduced_costs(&self, c: &[f64]) -> (Vec<f64>, f64) {
        let mut d = c.to_vec();
        let mut obj = 0.0;
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            obj += cb * self.rhs(i);
            for (j, dj) in d.iter_mut().enumerate() {
                *dj -= cb * self.at(i, j);
            }
        }
        (d, obj)
    }

    /// Bland's rule: lowest-index improving column enters; ratio-test ties go
    /// to the lowest-index basic variable.
    fn run(&mut self, d: &mut [f64], obj: &mut f64, allowed: &[bool]) -> Phase {
        loop {
            if self.iterations >= self.limit {
                return Phase::Limit;
            }
            let entering = (0..self.ncols).find(|&j| allowed[j] && !self.is_basic[j] && d[j] < -COST_TOL);
            let Some(e) = entering else {
                return Phase::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, e);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                            if (!tie && ratio < lr) || (tie && self.basis[i] < self.basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Phase::Unbounded;
            };
            self.pivot(r, e, d, obj);
        }
    }
}

/// Solves `prog`; the result is deterministic for a given program.
pub fn solve_lp(prog: &LinearProgram) -> LpSolution {
    if let Err(msg) = prog.check() {
        return LpSolution::failed(LpStatus::Invalid, 0, msg);
    }
    let sf = to_standard_form(prog);
    let m = sf.b.len();
    let n_std = sf.c.len();

    // Row flips so that every right-hand side is nonnegative.
    let flip: Vec<f64> = sf.b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();

    // Initial basis: own slack where its coefficient stays +1, else an artificial.
    let mut art_rows = Vec::new();
    let mut init_basis = vec![usize::MAX; m];
    for i in 0..m {
        match sf.row_slack[i] {
            Some(s) if flip[i] > 0.0 => init_basis[i] = s,
            _ => art_rows.push(i),
        }
    }
    let n_art = art_rows.len();
    let ncols = n_std + n_art;
    let stride = ncols + 1;
    let mut t = vec![0.0; m * stride];
    for i in 0..m {
        let row = &mut t[i * stride..(i + 1) * stride];
        for j in 0..n_std {
            row[j] = flip[i] * sf.a[i][j];
        }
        row[ncols] = flip[i] * sf.b[i];
    }
    for (k, &i) in art_rows.iter().enumerate() {
        t[i * stride + n_std + k] = 1.0;
        init_basis[i] = n_std + k;
    }
    let mut is_basic = vec![false; ncols];
    for &bv in &init_basis {
        is_basic[bv] = true;
    }
    let limit = prog.max_iterations.unwrap_or(50 * (m + n_std).max(1));
    let mut tab = Tableau { m, stride, ncols, t, basis: init_basis, is_basic, iterations: 0, limit };

    // Phase 1.
    let mut redundant = vec![false; m];
    if n_art > 0 {
        let mut c1 = vec![0.0; ncols];
        for v in &mut c1[n_std..] {
            *v = 1.0;
        }
        let (mut d, mut obj) = tab.reduced_costs(&c1);
        let allowed = vec![true; ncols];
        match tab.run(&mut d, &mut obj, &allowed) {
            Phase::Optimal => {}
            Phase::Limit => {
                return LpSolution::failed(LpStatus::IterationLimit, tab.iterations, "iteration limit in phase 1")
            }
            Phase::Unbounded => {
                return LpSolution::failed(LpStatus::Invalid, tab.iterations, "phase 1 reported unbounded")
            }
        }
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let infeas: f64 = (0..m).filter(|&i| tab.basis[i] >= n_std).map(|i| tab.rhs(i).abs()).sum();
        if infeas > 1e-8 * scale {
            return LpSolution::failed(
                LpStatus::Infeasible,
                tab.iterations,
                format!("phase 1 optimum {infeas:.3e} > 0"),
            );
        }
        // Drive remaining artificials out of the basis.
        let mut dummy_d = vec![0.0; ncols];
        let mut dummy_obj = 0.0;
        for i in 0..m {
            if tab.basis[i] < n_std {
                continue;
            }
            let col = (0..n_std)
                .filter(|&j| !tab.is_basic[j])
                .max_by(|&p, &q| tab.at(i, p).abs().total_cmp(&tab.at(i, q).abs()));
            match col {
                Some(j) if tab.at(i, j).abs() > PIVOT_TOL => {
                    tab.pivot(i, j, &mut dummy_d, &mut dummy_obj);
                }
                _ => redundant[i] = true,
            }
        }
    }

    // Phase 2.
    let mut c2 = vec![0.0; ncols];
    c2[..n_std].copy_from_slice(&sf.c);
    let (mut d, mut obj) = tab.reduced_costs(&c2);
    let mut allowed = vec![true; ncols];
    for v in &mut allowed[n_std..] {
        *v = false;
    }
    match tab.run(&mut d, &mut obj, &allowed) {
        Phase::Optimal => {}
        Phase::Limit => {
            return LpSolution::failed(LpStatus::IterationLimit, tab.iterations, "iteration limit in phase 2")
        }
        Phase::Unbounded => {
            return LpSolution::failed(LpStatus::Unbounded, tab.iterations, "objective unbounded below")
        }
    }

    // Basic solution from the tableau, then refined against the original data.
    let mut x_std = vec![0.0; n_std];
    for i in 0..m {
        if tab.basis[i] < n_std {
            x_std[tab.basis[i]] = tab.rhs(i);
        }
    }
    let mut y = vec![0.0; m];
    let rows: Vec<usize> = (0..m).filter(|&i| !redundant[i]).collect();
    if !rows.is_empty() {
        let k = rows.len();
        let bmat = DMatrix::from_fn(k, k, |r, col| sf.a[rows[r]][tab.basis[rows[col]]]);
        let lu = bmat.clone().lu();
        let rhs = DVector::from_fn(k, |r, _| sf.b[rows[r]]);
        let cb = DVector::from_fn(k, |r, _| sf.c[tab.basis[rows[r]]]);
        if let (Some(xb), Some(yb)) = (lu.solve(&rhs), bmat.transpose().lu().solve(&cb)) {
            if xb.iter().all(|v| *v >= -1e-7) {
                for (r, &i) in rows.iter().enumerate() {
                    x_std[tab.basis[i]] = xb[r].max(0.0);
                }
            }
            for (r, &i) in rows.iter().enumerate() {
                y[i] = yb[r];
            }
        } else {
            // Singular basis matrix: fall back to tableau duals via reduced costs.
            for i in 0..m {
                if !redundant[i] {
                    y[i] = flip[i] * tableau_dual(&tab, &sf, &flip, i);
                }
            }
        }
    }

    let mut primal = sf.offsets.clone();
    for (j, col) in sf.cols.iter().enumerate() {
        if let StdCol::Var { var, sign } = *col {
            primal[var] += sign * x_std[j];
        }
    }
    let objective: f64 = prog.objective.iter().zip(&primal).map(|(c, v)| c * v).sum();
    let dual_objective: f64 = sf.b.iter().zip(&y).map(|(b, y)| b * y).sum::<f64>() + sf.constant;

    let mut residual: f64 = 0.0;
    for (row, rhs) in prog.a_eq.iter().zip(&prog.b_eq) {
        let lhs: f64 = row.iter().zip(&primal).map(|(a, v)| a * v).sum();
        residual = residual.max((lhs - rhs).abs());
    }
    for (row, rhs) in prog.a_ub.iter().zip(&prog.b_ub) {
        let lhs: f64 = row.iter().zip(&primal).map(|(a, v)| a * v).sum();
        residual = residual.max(lhs - rhs);
    }
    for (j, v) in primal.iter().enumerate() {
        if let Some(l) = prog.lower[j] {
            residual = residual.max(l - v);
        }
        if let Some(u) = prog.upper[j] {
            residual = residual.max(v - u);
        }
    }

    let dual = y[..sf.n_eq + sf.n_ub].to_vec();
    LpSolution {
        status: LpStatus::Optimal,
        primal,
        dual,
        objective,
        dual_objective,
        duality_gap: objective - dual_objective,
        primal_residual: residual.max(0.0),
        iterations: tab.iterations,
        message: None,
    }
}

/// Dual multiplier of row `i` read off the final tableau. Only used when the
/// basis matrix cannot be factored.
fn tableau_dual(tab: &Tableau, sf: &StandardForm, flip: &[f64], i: usize) -> f64 {
    // y = c_B B^{-1}; column i of B^{-1} sits under the row's initial basic
    // column, which is either its slack or its artificial.
    let n_std = sf.c.len();
    let init_col = match sf.row_slack[i] {
        Some(s) if flip[i] > 0.0 => s,
        _ => {
            let k = (0..i).filter(|&r| !(sf.row_slack[r].is_some() && flip[r] > 0.0)).count();
            n_std + k
        }
    };
    (0..tab.m)
        .map(|r| {
            let bv = tab.basis[r];
            let cb = if bv < n_std { sf.c[bv] } else { 0.0 };
            cb * tab.at(r, init_col)
        })
        .sum()
}
