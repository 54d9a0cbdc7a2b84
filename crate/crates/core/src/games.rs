//! XOR games: a sign matrix `G` and an input distribution `mu`. Players
//! answer `a_x`, `b_y` in `{+1, -1}` and win when `a_x b_y = G(x, y)`; the
//! bias is `sum mu G a b`.

use serde::{Deserialize, Serialize};

use crate::bounds::{check_matrix, correlation_functional, sign_pairs, unit_vector_bound, BoundConfig};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram};
use crate::model::{BellFunctional, BoundClass};

/// Largest side enumerated by [`classical_bias`].
pub const CLASSICAL_ENUM_CAP: usize = 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XorGame {
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
}

impl XorGame {
    pub fn new(g: Vec<Vec<f64>>, mu: Vec<Vec<f64>>) -> Result<Self> {
        let game = Self { g, mu };
        game.check()?;
        Ok(game)
    }

    pub fn check(&self) -> Result<()> {
        let (nx, ny) = check_matrix(&self.g, true)?;
        if self.mu.len() != nx || self.mu.iter().any(|r| r.len() != ny) {
            return Err(Error::Shape("mu must have the same shape as G".into()));
        }
        if self.g.iter().flatten().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidInput("G entries must be exactly +1 or -1".into()));
        }
        if self.mu.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("mu entries must be finite and nonnegative".into()));
        }
        let total: f64 = self.mu.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("mu sums to {total}, expected 1")));
        }
        Ok(())
    }

    /// CHSH: `G(x, y) = -1` iff `x = y = 1`, uniform inputs.
    pub fn chsh() -> Self {
        Self { g: vec![vec![1.0, 1.0], vec![1.0, -1.0]], mu: vec![vec![0.25; 2]; 2] }
    }

    pub fn nx(&self) -> usize {
        self.g.len()
    }

    pub fn ny(&self) -> usize {
        self.g[0].len()
    }

    /// `mu(x,y) G(x,y)`.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.g.iter().zip(&self.mu).map(|(gr, mr)| gr.iter().zip(mr).map(|(g, m)| g * m).collect()).collect()
    }

    /// `sum mu G S` for a strategy correlation matrix `S`.
    pub fn bias_of(&self, s: &[Vec<f64>]) -> f64 {
        self.weights().iter().zip(s).map(|(w, r)| w.iter().zip(r).map(|(a, b)| a * b).sum::<f64>()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBias {
    pub bias: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Exact classical bias: enumerate the sign vectors of the smaller side and
/// answer greedily on the other.
pub fn classical_bias(game: &XorGame) -> Result<ClassicalBias> {
    game.check()?;
    let w = game.weights();
    let (nx, ny) = (game.nx(), game.ny());
    let transpose = ny < nx;
    let (rows, n_enum, n_greedy) = if transpose {
        let wt: Vec<Vec<f64>> = (0..ny).map(|y| (0..nx).map(|x| w[x][y]).collect()).collect();
        (wt, ny, nx)
    } else {
        (w, nx, ny)
    };
    if n_enum > CLASSICAL_ENUM_CAP {
        return Err(Error::ResourceLimit {
            what: "classical bias enumeration".into(),
            count: 1u128 << n_enum,
            cap: 1u128 << CLASSICAL_ENUM_CAP,
        });
    }
    let mut best = ClassicalBias { bias: f64::NEG_INFINITY, u: Vec::new(), v: Vec::new() };
    // Fixing the first enumerated sign to +1 loses nothing: (u, v) and
    // (-u, -v) play identically.
    for k in 0..1usize << (n_enum - 1) {
        let u: Vec<f64> = (0..n_enum).map(|i| if (k << 1) >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let mut total = 0.0;
        let mut v = Vec::with_capacity(n_greedy);
        for j in 0..n_greedy {
            let col: f64 = (0..n_enum).map(|i| rows[i][j] * u[i]).sum();
            v.push(if col >= 0.0 { 1.0 } else { -1.0 });
            total += col.abs();
        }
        if total > best.bias {
            best = ClassicalBias { bias: total, u, v };
        }
    }
    if transpose {
        std::mem::swap(&mut best.u, &mut best.v);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumBias {
    pub bias: f64,
    /// Gram matrix of the unit vectors `a_x` then `b_y`.
    pub gram: Vec<Vec<f64>>,
    pub relative_gap: f64,
    pub min_eigenvalue: f64,
}

/// Entangled bias by the unit-vector SDP.
pub fn quantum_bias(game: &XorGame, cfg: &BoundConfig) -> Result<QuantumBias> {
    game.check()?;
    let (bias, sol) = unit_vector_bound(&game.weights(), cfg)?;
    let x = &sol.blocks[0];
    let n = x.nrows();
    Ok(QuantumBias {
        bias,
        gram: (0..n).map(|i| (0..n).map(|j| x[(i, j)]).collect()).collect(),
        relative_gap: sol.relative_gap,
        min_eigenvalue: sol.min_eigenvalues[0],
    })
}

/// The correlation functional `B_xy = mu G`, with its local bound (the
/// classical bias) as normalization.
pub fn game_to_bell(game: &XorGame) -> Result<BellFunctional> {
    let bias = classical_bias(game)?.bias;
    Ok(correlation_functional(&game.weights(), BoundClass::Local, bias))
}

/// `G = sign(B)`, `mu = |B| / sum |B|` for a correlation functional given by
/// its coefficients `B_xy`.
pub fn correlation_to_game(beta: &[Vec<f64>]) -> Result<XorGame> {
    check_matrix(beta, false)?;
    let total: f64 = beta.iter().flatten().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Err(Error::Degenerate("all-zero functional has no game".into()));
    }
    let g = beta.iter().map(|r| r.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect()).collect();
    let mu = beta.iter().map(|r| r.iter().map(|v| v.abs() / total).collect()).collect();
    let mut game = XorGame { g, mu };
    renormalize(&mut game.mu);
    Ok(game)
}

/// [`correlation_to_game`] on the correlation part of a binary functional.
pub fn bell_to_game(functional: &BellFunctional) -> Result<XorGame> {
    correlation_to_game(&functional.correlation_part()?)
}

/// Pushes rounding error of a division by the total into the largest cell.
fn renormalize(mu: &mut [Vec<f64>]) {
    let total: f64 = mu.iter().flatten().sum();
    if let Some(m) = mu.iter_mut().flatten().max_by(|a, b| a.total_cmp(b)) {
        *m += 1.0 - total;
    }
}

/// Strategies in the convex hull of sign rank-ones: columns are the pairs
/// `(u, v)` with `u[0] = 1` and their negatives.
fn hull_columns(nx: usize, ny: usize, cfg: &BoundConfig) -> Result<Vec<Vec<f64>>> {
    let pairs = sign_pairs(nx, ny, cfg.vertex_cap)?;
    let mut cols = Vec::with_capacity(2 * pairs.len());
    for sign in [1.0, -1.0] {
        for (u, v) in &pairs {
            cols.push((0..nx).flat_map(|x| (0..ny).map(move |y| sign * u[x] * v[y])).collect());
        }
    }
    Ok(cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualBias {
    /// Largest common bias `beta` with `C(x,y) S(x,y) = beta` for all cells.
    pub beta: f64,
    /// `1 / beta`.
    pub value: f64,
}

/// Equal-bias characterization of `nu` on sign matrices: `nu(C) = 1/beta*`.
pub fn equal_bias_value(c: &[Vec<f64>], cfg: &BoundConfig) -> Result<EqualBias> {
    let (nx, ny) = check_matrix(c, true)?;
    if c.iter().flatten().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("zero matrix".into()));
    }
    let cols = hull_columns(nx, ny, cfg)?;
    let nc = cols.len();
    // Variables: weights, then beta (free).
    let mut obj = vec![0.0; nc + 1];
    obj[nc] = -1.0;
    let mut lp = LinearProgram::minimize(obj);
    lp.free(nc);
    for x in 0..nx {
        for y in 0..ny {
            let mut row: Vec<f64> = cols.iter().map(|s| c[x][y] * s[x * ny + y]).collect();
            row.push(-1.0);
            lp.add_eq(row, 0.0);
        }
    }
    let mut norm = vec![1.0; nc + 1];
    norm[nc] = 0.0;
    lp.add_eq(norm, 1.0);
    let sol = solve_lp(&lp);
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("equal-bias LP ended with status {:?}", sol.status)));
    }
    let beta = sol.primal[nc];
    if beta <= 1e-12 {
        return Err(Error::Degenerate(format!("no equal-bias strategy (beta* = {beta:.3e})")));
    }
    Ok(EqualBias { beta, value: 1.0 / beta })
}

/// `max_S min_{x,y} C(x,y) S(x,y)` over the convex hull of sign rank-ones:
/// the bias of `C` against its worst input distribution.
pub fn public_bias(c: &[Vec<f64>], cfg: &BoundConfig) -> Result<f64> {
    let (nx, ny) = check_matrix(c, true)?;
    let cols = hull_columns(nx, ny, cfg)?;
    let nc = cols.len();
    let mut obj = vec![0.0; nc + 1];
    obj[nc] = -1.0;
    let mut lp = LinearProgram::minimize(obj);
    lp.free(nc);
    for x in 0..nx {
        for y in 0..ny {
            let mut row: Vec<f64> = cols.iter().map(|s| -c[x][y] * s[x * ny + y]).collect();
            row.push(1.0);
            lp.add_le(row, 0.0);
        }
    }
    let mut norm = vec![1.0; nc + 1];
    norm[nc] = 0.0;
    lp.add_eq(norm, 1.0);
    let sol = solve_lp(&lp);
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("public-bias LP ended with status {:?}", sol.status)));
    }
    Ok(sol.primal[nc])
}
