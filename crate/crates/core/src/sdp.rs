//! Small dense semidefinite programs in standard primal form
//!
//! ```text
//! minimize    <C, X>
//! subject to  <A_i, X> = b_i        i = 1..m
//!             X = diag(X_1, ..., X_k),  every X_j PSD
//! ```
//!
//! solved by a primal-dual interior point method (HKM search direction with
//! Mehrotra predictor-corrector). Nonnegative scalar variables are carried as
//! 1x1 blocks. The dual is `maximize b.y s.t. C - sum_i y_i A_i = Z, Z PSD`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Default cap on the summed dimension of the PSD blocks.
pub const DEFAULT_SDP_DIM_CAP: usize = 200;
pub const DEFAULT_SDP_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockSpec {
    Psd(usize),
    /// `n` independent nonnegative scalars.
    Nonneg(usize),
}

impl BlockSpec {
    pub fn size(&self) -> usize {
        match *self {
            BlockSpec::Psd(n) | BlockSpec::Nonneg(n) => n,
        }
    }
}

/// `coef * X[block][row][col]` with `row <= col` (upper triangle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

impl Term {
    pub fn new(block: usize, row: usize, col: usize, coef: f64) -> Self {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        Self { block, row, col, coef }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProgram {
    pub blocks: Vec<BlockSpec>,
    /// Minimized.
    pub objective: Vec<Term>,
    pub constraints: Vec<(Vec<Term>, f64)>,
    pub max_iterations: usize,
    pub dim_cap: usize,
}

impl Default for SdpProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl SdpProgram {
    pub fn new() -> Self {
        Self {
            blocks: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
            max_iterations: DEFAULT_SDP_MAX_ITER,
            dim_cap: DEFAULT_SDP_DIM_CAP,
        }
    }

    /// Adds a block and returns its index.
    pub fn add_block(&mut self, spec: BlockSpec) -> usize {
        self.blocks.push(spec);
        self.blocks.len() - 1
    }

    pub fn add_objective(&mut self, term: Term) {
        self.objective.push(term);
    }

    pub fn add_constraint(&mut self, terms: Vec<Term>, rhs: f64) {
        self.constraints.push((terms, rhs));
    }

    pub fn psd_dimension(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                BlockSpec::Psd(n) => *n,
                BlockSpec::Nonneg(_) => 0,
            })
            .sum()
    }

    fn check(&self) -> Result<(), String> {
        if self.psd_dimension() > self.dim_cap {
            return Err(format!("total PSD dimension {} exceeds cap {}", self.psd_dimension(), self.dim_cap));
        }
        let check_term = |t: &Term| -> Result<(), String> {
            let spec = self.blocks.get(t.block).ok_or(format!("unknown block {}", t.block))?;
            let n = spec.size();
            if t.row >= n || t.col >= n || t.row > t.col {
                return Err(format!("term ({}, {}) out of range for block {}", t.row, t.col, t.block));
            }
            if matches!(spec, BlockSpec::Nonneg(_)) && t.row != t.col {
                return Err(format!("off-diagonal term in nonnegative block {}", t.block));
            }
            if !t.coef.is_finite() {
                return Err("non-finite coefficient".into());
            }
            Ok(())
        };
        for t in &self.objective {
            check_term(t)?;
        }
        for (terms, rhs) in &self.constraints {
            if !rhs.is_finite() {
                return Err("non-finite right-hand side".into());
            }
            for t in terms {
                check_term(t)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    Invalid,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// One matrix per block; nonnegative blocks are returned as diagonal matrices.
    pub blocks: Vec<DMatrix<f64>>,
    pub dual_slack: Vec<DMatrix<f64>>,
    /// Multipliers of the equality constraints.
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub max_equality_residual: f64,
    pub min_eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub message: Option<String>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Value of `X[block][row][col]`.
    pub fn value(&self, block: usize, row: usize, col: usize) -> f64 {
        self.blocks[block][(row, col)]
    }

    fn invalid(msg: String) -> Self {
        Self {
            status: SdpStatus::Invalid,
            blocks: Vec::new(),
            dual_slack: Vec::new(),
            y: Vec::new(),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            relative_gap: f64::NAN,
            max_equality_residual: f64::NAN,
            min_eigenvalues: Vec::new(),
            iterations: 0,
            message: Some(msg),
        }
    }
}

/// Symmetric sparse matrix over one internal block: `(i, j, a_ij)`, `i <= j`.
#[derive(Debug, Clone, Default)]
struct SymSparse {
    entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    fn push(&mut self, i: usize, j: usize, v: f64) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == i && e.1 == j) {
            e.2 += v;
        } else {
            self.entries.push((i, j, v));
        }
    }

    /// `<A, M>` for a (not necessarily symmetric) dense `M`.
    fn inner(&self, m: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(i, j, v)| if i == j { v * m[(i, i)] } else { v * (m[(i, j)] + m[(j, i)]) }).sum()
    }

    fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += scale * v;
            if i != j {
                m[(j, i)] += scale * v;
            }
        }
    }

    /// `X * A` as a dense matrix.
    fn left_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let mut out = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.entries {
            // A has v at (i, j) and (j, i).
            for r in 0..n {
                out[(r, j)] += v * x[(r, i)];
            }
            if i != j {
                for r in 0..n {
                    out[(r, i)] += v * x[(r, j)];
                }
            }
        }
        out
    }

    fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v }).sum()
    }
}

/// Internal problem over PSD blocks only.
struct Internal {
    sizes: Vec<usize>,
    c: Vec<SymSparse>,
    /// `a[i]` is a list of `(block, matrix)`.
    a: Vec<Vec<(usize, SymSparse)>>,
    b: Vec<f64>,
    /// Constraints touching each block.
    touching: Vec<Vec<usize>>,
    /// Internal block range for each user block.
    user_map: Vec<(BlockSpec, usize)>,
}

fn lower(prog: &SdpProgram) -> Internal {
    let mut sizes = Vec::new();
    let mut user_map = Vec::new();
    for spec in &prog.blocks {
        user_map.push((*spec, sizes.len()));
        match *spec {
            BlockSpec::Psd(n) => sizes.push(n),
            BlockSpec::Nonneg(n) => sizes.extend(std::iter::repeat_n(1, n)),
        }
    }
    let locate = |t: &Term| -> (usize, usize, usize) {
        let (spec, start) = user_map[t.block];
        match spec {
            BlockSpec::Psd(_) => (start, t.row, t.col),
            BlockSpec::Nonneg(_) => (start + t.row, 0, 0),
        }
    };
    // coef * X_ij  ->  symmetric A with a_ij = a_ji = coef / 2 off the diagonal.
    let to_entry = |t: &Term| -> (usize, usize, usize, f64) {
        let (blk, i, j) = locate(t);
        let v = if i == j { t.coef } else { 0.5 * t.coef };
        (blk, i, j, v)
    };
    let mut c = vec![SymSparse::default(); sizes.len()];
    for t in &prog.objective {
        let (blk, i, j, v) = to_entry(t);
        c[blk].push(i, j, v);
    }
    let mut a = Vec::with_capacity(prog.constraints.len());
    let mut b = Vec::with_capacity(prog.constraints.len());
    let mut touching = vec![Vec::new(); sizes.len()];
    for (k, (terms, rhs)) in prog.constraints.iter().enumerate() {
        let mut per_block: Vec<(usize, SymSparse)> = Vec::new();
        for t in terms {
            let (blk, i, j, v) = to_entry(t);
            match per_block.iter_mut().find(|(bb, _)| *bb == blk) {
                Some((_, m)) => m.push(i, j, v),
                None => {
                    let mut m = SymSparse::default();
                    m.push(i, j, v);
                    per_block.push((blk, m));
                }
            }
        }
        per_block.sort_by_key(|(bb, _)| *bb);
        for (blk, _) in &per_block {
            touching[*blk].push(k);
        }
        a.push(per_block);
        b.push(*rhs);
    }
    Internal { sizes, c, a, b, touching, user_map }
}

impl Internal {
    fn apply_a(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.a.len(),
            self.a.iter().map(|parts| parts.iter().map(|(blk, m)| m.inner(&x[*blk])).sum::<f64>()),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (k, parts) in self.a.iter().enumerate() {
            if y[k] == 0.0 {
                continue;
            }
            for (blk, m) in parts {
                m.add_to(&mut out[*blk], y[k]);
            }
        }
        out
    }

    fn c_dense(&self) -> Vec<DMatrix<f64>> {
        self.sizes
            .iter()
            .zip(&self.c)
            .map(|(&n, c)| {
                let mut m = DMatrix::zeros(n, n);
                c.add_to(&mut m, 1.0);
                m
            })
            .collect()
    }

    fn total_dim(&self) -> usize {
        self.sizes.iter().sum()
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest step `alpha` keeping `x + alpha * d` PSD (infinite if `d` PSD).
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    if x.nrows() == 1 {
        return if d[(0, 0)] < 0.0 { -x[(0, 0)] / d[(0, 0)] } else { f64::INFINITY };
    }
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let mut s = &linv * d * linv.transpose();
    symmetrize(&mut s);
    let lmin = min_eig(&s);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 1 {
        return if m[(0, 0)] > 0.0 { Some(DMatrix::from_element(1, 1, 1.0 / m[(0, 0)])) } else { None };
    }
    let mut inv = Cholesky::new(m.clone())?.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

pub fn solve_sdp(prog: &SdpProgram) -> SdpSolution {
    if let Err(msg) = prog.check() {
        return SdpSolution::invalid(msg);
    }
    let p = lower(prog);
    let m = p.b.len();
    let nblk = p.sizes.len();
    let n_total = p.total_dim() as f64;
    let c = p.c_dense();
    let b = DVector::from_vec(p.b.clone());
    let b_norm = b.norm();
    let c_norm = frob(&c);

    // Starting point, scaled to the data.
    let mut a_norms = vec![0.0f64; m];
    for (k, parts) in p.a.iter().enumerate() {
        a_norms[k] = parts.iter().map(|(_, s)| s.norm_sq()).sum::<f64>().sqrt();
    }
    let mut xs: Vec<DMatrix<f64>> = Vec::with_capacity(nblk);
    let mut zs: Vec<DMatrix<f64>> = Vec::with_capacity(nblk);
    for (blk, &n) in p.sizes.iter().enumerate() {
        let nf = n as f64;
        let mut xi: f64 = 10.0f64.max(nf.sqrt());
        let mut eta: f64 = 10.0f64.max(nf.sqrt()).max(p.c[blk].norm_sq().sqrt());
        for &k in &p.touching[blk] {
            xi = xi.max(nf * (1.0 + b[k].abs()) / (1.0 + a_norms[k]));
            eta = eta.max(a_norms[k]);
        }
        xs.push(DMatrix::identity(n, n) * xi);
        zs.push(DMatrix::identity(n, n) * eta);
    }
    let mut y = DVector::zeros(m);

    let tol = 1e-9;
    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut message = None;
    let mut best_stall = 0;

    for iter in 0..prog.max_iterations {
        iterations = iter;
        let ax = p.apply_a(&xs);
        let rp = &b - &ax;
        let aty = p.apply_at(&y);
        let rd: Vec<DMatrix<f64>> = (0..nblk).map(|k| &c[k] - &zs[k] - &aty[k]).collect();
        let mu = inner(&xs, &zs) / n_total;
        let pobj = inner(&c, &xs);
        let dobj = b.dot(&y);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = frob(&rd) / (1.0 + c_norm);
        if rel_gap < tol && pinf < tol && dinf < tol {
            status = SdpStatus::Optimal;
            break;
        }
        if dobj > 1e10 * (1.0 + pobj.abs().min(1e10)) && dinf < 1e-6 && pinf > 1e-6 {
            status = SdpStatus::Infeasible;
            message = Some("dual objective diverges: primal infeasible".into());
            break;
        }

        let Some(zinv) = zs.iter().map(spd_inverse).collect::<Option<Vec<_>>>() else {
            message = Some("dual slack lost definiteness".into());
            break;
        };

        // Schur complement M_ij = <A_i, X A_j Z^-1>.
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for blk in 0..nblk {
            let touching = &p.touching[blk];
            if touching.is_empty() {
                continue;
            }
            let x = &xs[blk];
            let zi = &zinv[blk];
            let find = |k: usize| -> &SymSparse {
                &p.a[k].iter().find(|(bb, _)| *bb == blk).expect("block listed in touching").1
            };
            for (ti, &i) in touching.iter().enumerate() {
                let g = find(i).left_mul(x) * zi;
                for &j in &touching[ti..] {
                    let v = find(j).inner(&g);
                    schur[(i, j)] += v;
                    if i != j {
                        schur[(j, i)] += v;
                    }
                }
            }
        }
        let diag_max = (0..m).map(|i| schur[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-300);
        let chol = match Cholesky::new(schur.clone()) {
            Some(ch) => ch,
            None => {
                let mut reg = schur.clone();
                for i in 0..m {
                    reg[(i, i)] += 1e-12 * diag_max;
                }
                match Cholesky::new(reg) {
                    Some(ch) => ch,
                    None => {
                        message = Some("Schur complement not positive definite".into());
                        break;
                    }
                }
            }
        };

        // Direction for a given complementarity target term `rc_zinv = Rc Z^-1`.
        let direction = |rc_zinv: &[DMatrix<f64>]| -> (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
            let x_rd_zinv: Vec<DMatrix<f64>> = (0..nblk).map(|k| &xs[k] * &rd[k] * &zinv[k]).collect();
            let rhs = &rp - p.apply_a(rc_zinv) + p.apply_a(&x_rd_zinv);
            let dy = chol.solve(&rhs);
            let atdy = p.apply_at(&dy);
            let dz: Vec<DMatrix<f64>> = (0..nblk).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nblk)
                .map(|k| {
                    let mut d = &rc_zinv[k] - &xs[k] * &dz[k] * &zinv[k];
                    symmetrize(&mut d);
                    d
                })
                .collect();
            (dy, dx, dz)
        };
        let steps = |dx: &[DMatrix<f64>], dz: &[DMatrix<f64>]| -> (f64, f64) {
            let ap = (0..nblk).map(|k| max_step(&xs[k], &dx[k])).fold(f64::INFINITY, f64::min);
            let ad = (0..nblk).map(|k| max_step(&zs[k], &dz[k])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // Predictor.
        let rc_pred: Vec<DMatrix<f64>> = xs.iter().map(|x| -x.clone()).collect();
        let (_, dx_p, dz_p) = direction(&rc_pred);
        let (ap, ad) = steps(&dx_p, &dz_p);
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let x_aff: Vec<DMatrix<f64>> = (0..nblk).map(|k| &xs[k] + &dx_p[k] * ap).collect();
        let z_aff: Vec<DMatrix<f64>> = (0..nblk).map(|k| &zs[k] + &dz_p[k] * ad).collect();
        let mu_aff = inner(&x_aff, &z_aff) / n_total;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector: Rc = sigma mu I - XZ - dX_p dZ_p.
        let rc_corr: Vec<DMatrix<f64>> =
            (0..nblk).map(|k| &zinv[k] * (sigma * mu) - &xs[k] - &dx_p[k] * &dz_p[k] * &zinv[k]).collect();
        let (dy, dx, dz) = direction(&rc_corr);
        let (ap, ad) = steps(&dx, &dz);
        let gamma = 0.95;
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        for k in 0..nblk {
            xs[k] += &dx[k] * ap;
            zs[k] += &dz[k] * ad;
            symmetrize(&mut xs[k]);
            symmetrize(&mut zs[k]);
        }
        y += dy * ad;

        if ap < 1e-10 && ad < 1e-10 {
            best_stall += 1;
            if best_stall > 5 {
                message = Some("step lengths collapsed".into());
                break;
            }
        } else {
            best_stall = 0;
        }
    }

    // Final diagnostics.
    let ax = p.apply_a(&xs);
    let rp = &b - &ax;
    let max_res = rp.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let pobj = inner(&c, &xs);
    let dobj = b.dot(&y);
    let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    if status == SdpStatus::MaxIterations && rel_gap < 1e-6 && max_res < 1e-7 {
        // Stalled close to the optimum: accept at the looser precision.
        status = SdpStatus::Optimal;
    }

    let mut blocks = Vec::with_capacity(prog.blocks.len());
    let mut slacks = Vec::with_capacity(prog.blocks.len());
    let mut min_eigs = Vec::with_capacity(prog.blocks.len());
    for &(spec, start) in &p.user_map {
        match spec {
            BlockSpec::Psd(_) => {
                min_eigs.push(min_eig(&xs[start]));
                blocks.push(xs[start].clone());
                slacks.push(zs[start].clone());
            }
            BlockSpec::Nonneg(n) => {
                let xd = DMatrix::from_fn(n, n, |i, j| if i == j { xs[start + i][(0, 0)] } else { 0.0 });
                let zd = DMatrix::from_fn(n, n, |i, j| if i == j { zs[start + i][(0, 0)] } else { 0.0 });
                min_eigs.push((0..n).map(|i| xd[(i, i)]).fold(f64::INFINITY, f64::min));
                blocks.push(xd);
                slacks.push(zd);
            }
        }
    }
    if status == SdpStatus::Optimal && (max_res > 1e-6 || min_eigs.iter().any(|&e| e < -1e-7)) {
        status = SdpStatus::MaxIterations;
        message = Some("final point fails residual or eigenvalue check".into());
    }
    SdpSolution {
        status,
        blocks,
        dual_slack: slacks,
        y: y.iter().copied().collect(),
        objective: pobj,
        dual_objective: dobj,
        relative_gap: rel_gap,
        max_equality_residual: max_res,
        min_eigenvalues: min_eigs,
        iterations,
        message,
    }
}
