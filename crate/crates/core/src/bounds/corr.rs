//! Norms of bare correlation matrices: `nu` over sign rank-ones and the
//! factorization norm `gamma2`.

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundConfig, BoundResult, Certificate, Engine, Quantity, SolverDiagnostics};
use crate::correlation::outcome_sign;
use crate::dist::Alphabets;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram};
use crate::model::{BellFunctional, BoundClass};
use crate::sdp::{solve_sdp, BlockSpec, SdpProgram, SdpSolution, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTerm {
    pub weight: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub(crate) fn check_matrix(c: &[Vec<f64>], bounded: bool) -> Result<(usize, usize)> {
    let nx = c.len();
    let ny = c.first().map_or(0, Vec::len);
    if nx == 0 || ny == 0 || c.iter().any(|r| r.len() != ny) {
        return Err(Error::Shape("correlation matrix must be a non-empty rectangle".into()));
    }
    if c.iter().flatten().any(|v| !v.is_finite() || (bounded && v.abs() > 1.0 + 1e-12)) {
        return Err(Error::InvalidInput("correlation entries must be finite and lie in [-1, 1]".into()));
    }
    Ok((nx, ny))
}

/// Sign vector pairs `(u, v)` with `u[0] = +1`; together with their negatives
/// these are all `2^(nx+ny)` sign rank-one matrices.
pub fn sign_pairs(nx: usize, ny: usize, cap: u128) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let total = 1u128.checked_shl((nx + ny) as u32).unwrap_or(u128::MAX);
    if nx + ny >= 127 || total > cap {
        return Err(Error::ResourceLimit { what: "sign rank-one matrices".into(), count: total, cap });
    }
    let signs = |n: usize, k: usize| -> Vec<f64> { (0..n).map(|i| outcome_sign((k >> i) & 1)).collect() };
    let mut out = Vec::with_capacity(1 << (nx + ny - 1));
    for kv in 0..1usize << ny {
        for ku in 0..1usize << (nx - 1) {
            out.push((signs(nx, ku << 1), signs(ny, kv)));
        }
    }
    Ok(out)
}

/// The binary-outcome functional `B[a,b,x,y] = ab * beta[x][y]`, which
/// evaluates to `sum beta * C` on any distribution with correlations `C`.
pub(crate) fn correlation_functional(beta: &[Vec<f64>], class: BoundClass, normalization: f64) -> BellFunctional {
    let (nx, ny) = (beta.len(), beta[0].len());
    let s = Alphabets::binary(nx, ny).expect("non-empty");
    let mut coeffs = vec![0.0; s.table_len()];
    for x in 0..nx {
        for y in 0..ny {
            for a in 0..2 {
                for b in 0..2 {
                    coeffs[s.index(a, b, x, y)] = outcome_sign(a) * outcome_sign(b) * beta[x][y];
                }
            }
        }
    }
    BellFunctional { alphabets: s, coeffs, claimed_bound_class: class, normalization }
}

fn bilinear(beta: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    beta.iter().zip(u).map(|(row, ux)| ux * row.iter().zip(v).map(|(b, vy)| b * vy).sum::<f64>()).sum()
}

pub fn nu_corr(c: &[Vec<f64>]) -> Result<BoundResult> {
    nu_corr_with(c, &BoundConfig::default())
}

/// `min sum |r_i|` subject to `sum r_i u_i v_i^T = C`.
pub fn nu_corr_with(c: &[Vec<f64>], cfg: &BoundConfig) -> Result<BoundResult> {
    let (nx, ny) = check_matrix(c, true)?;
    let pairs = sign_pairs(nx, ny, cfg.vertex_cap)?;
    let np = pairs.len();
    let mut lp = LinearProgram::minimize(vec![1.0; 2 * np]);
    for x in 0..nx {
        for y in 0..ny {
            let mut row = vec![0.0; 2 * np];
            for (j, (u, v)) in pairs.iter().enumerate() {
                row[j] = u[x] * v[y];
                row[np + j] = -u[x] * v[y];
            }
            lp.add_eq(row, c[x][y]);
        }
    }
    let sol = solve_lp(&lp);
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("nu_corr LP ended with status {:?}", sol.status)));
    }
    let terms: Vec<SignTerm> = pairs
        .iter()
        .enumerate()
        .map(|(j, (u, v))| SignTerm { weight: sol.primal[j] - sol.primal[np + j], u: u.clone(), v: v.clone() })
        .filter(|t| t.weight.abs() > 1e-13)
        .collect();
    let beta: Vec<Vec<f64>> = (0..nx).map(|x| sol.dual[x * ny..(x + 1) * ny].to_vec()).collect();
    let normalization = pairs.iter().map(|(u, v)| bilinear(&beta, u, v).abs()).fold(0.0, f64::max);
    let dual_value: f64 = (0..nx).map(|x| (0..ny).map(|y| beta[x][y] * c[x][y]).sum::<f64>()).sum();
    Ok(BoundResult {
        quantity: Quantity::NuCorr,
        value: sol.objective,
        epsilon: 0.0,
        primal_certificate: Certificate::SignDecomposition { terms },
        dual_certificate: correlation_functional(&beta, BoundClass::Local, normalization),
        dual_value,
        diagnostics: SolverDiagnostics {
            engine: Engine::Simplex,
            iterations: sol.iterations,
            rows: nx * ny,
            columns: 2 * np,
            primal_residual: sol.primal_residual,
            duality_gap: sol.duality_gap,
            min_eigenvalues: Vec::new(),
            dual_normalization: normalization,
        },
    })
}

/// `min sum |r_i|` subject to `1 <= C[x][y] * S[x][y] <= alpha` with
/// `S = sum r_i u_i v_i^T`.
pub fn nu_alpha(c: &[Vec<f64>], alpha: f64, cfg: &BoundConfig) -> Result<f64> {
    let (nx, ny) = check_matrix(c, false)?;
    if !(alpha >= 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be at least 1, got {alpha}")));
    }
    let pairs = sign_pairs(nx, ny, cfg.vertex_cap)?;
    let np = pairs.len();
    let mut lp = LinearProgram::minimize(vec![1.0; 2 * np]);
    for x in 0..nx {
        for y in 0..ny {
            let mut row = vec![0.0; 2 * np];
            for (j, (u, v)) in pairs.iter().enumerate() {
                row[j] = c[x][y] * u[x] * v[y];
                row[np + j] = -row[j];
            }
            lp.add_ge(row.clone(), 1.0);
            lp.add_le(row, alpha);
        }
    }
    let sol = solve_lp(&lp);
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("nu_alpha LP ended with status {:?}", sol.status)));
    }
    Ok(sol.objective)
}

/// `max sum beta[x][y] <a_x, b_y>` over unit vectors, i.e. over PSD
/// matrices of side `nx + ny` with unit diagonal.
pub(crate) fn unit_vector_bound(beta: &[Vec<f64>], cfg: &BoundConfig) -> Result<(f64, SdpSolution)> {
    let (nx, ny) = check_matrix(beta, false)?;
    let mut prog = SdpProgram::new();
    prog.dim_cap = cfg.sdp_dim_cap;
    prog.max_iterations = cfg.sdp_max_iterations;
    let g = prog.add_block(BlockSpec::Psd(nx + ny));
    for x in 0..nx {
        for y in 0..ny {
            if beta[x][y] != 0.0 {
                prog.add_objective(Term::new(g, x, nx + y, -beta[x][y]));
            }
        }
    }
    for i in 0..nx + ny {
        prog.add_constraint(vec![Term::new(g, i, i, 1.0)], 1.0);
    }
    let sol = solve_sdp(&prog);
    if !sol.is_optimal() {
        return Err(Error::Solver(format!(
            "unit-vector SDP ended with status {:?} (gap {:.2e})",
            sol.status, sol.relative_gap
        )));
    }
    Ok((-sol.objective, sol))
}

pub fn gamma2_corr(c: &[Vec<f64>]) -> Result<BoundResult> {
    gamma2_corr_with(c, &BoundConfig::default())
}

/// `min t` over PSD `X` of side `nx + ny` with `X[x][nx+y] = C[x][y]` and
/// every diagonal entry equal to `t`.
pub fn gamma2_corr_with(c: &[Vec<f64>], cfg: &BoundConfig) -> Result<BoundResult> {
    let (nx, ny) = check_matrix(c, true)?;
    let n = nx + ny;
    let mut prog = SdpProgram::new();
    prog.dim_cap = cfg.sdp_dim_cap;
    prog.max_iterations = cfg.sdp_max_iterations;
    let g = prog.add_block(BlockSpec::Psd(n));
    prog.add_objective(Term::new(g, 0, 0, 1.0));
    for x in 0..nx {
        for y in 0..ny {
            prog.add_constraint(vec![Term::new(g, x, nx + y, 1.0)], c[x][y]);
        }
    }
    for i in 1..n {
        prog.add_constraint(vec![Term::new(g, i, i, 1.0), Term::new(g, 0, 0, -1.0)], 0.0);
    }
    let sol = solve_sdp(&prog);
    if !sol.is_optimal() {
        return Err(Error::Solver(format!(
            "gamma2_corr SDP ended with status {:?} (gap {:.2e})",
            sol.status, sol.relative_gap
        )));
    }
    let beta: Vec<Vec<f64>> = (0..nx).map(|x| sol.y[x * ny..(x + 1) * ny].to_vec()).collect();
    let dual_value: f64 = (0..nx).map(|x| (0..ny).map(|y| beta[x][y] * c[x][y]).sum::<f64>()).sum();
    let normalization =
        if beta.iter().flatten().all(|v| v.abs() < 1e-14) { 0.0 } else { unit_vector_bound(&beta, cfg)?.0.abs() };
    let x = &sol.blocks[0];
    let matrix = (0..n).map(|i| (0..n).map(|j| x[(i, j)]).collect()).collect();
    Ok(BoundResult {
        quantity: Quantity::Gamma2Corr,
        value: sol.objective,
        epsilon: 0.0,
        primal_certificate: Certificate::Gram { matrix },
        dual_certificate: correlation_functional(&beta, BoundClass::NpaLevel1, normalization),
        dual_value,
        diagnostics: SolverDiagnostics {
            engine: Engine::InteriorPoint,
            iterations: sol.iterations,
            rows: prog.constraints.len(),
            columns: n,
            primal_residual: sol.max_equality_residual,
            duality_gap: sol.relative_gap,
            min_eigenvalues: sol.min_eigenvalues.clone(),
            dual_normalization: normalization,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    const CHSH: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, -1.0]];

    fn chsh() -> Vec<Vec<f64>> {
        CHSH.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn pairs_cover_all_rank_ones() {
        let p = sign_pairs(2, 3, 1000).unwrap();
        assert_eq!(p.len(), 16);
        assert!(p.iter().all(|(u, _)| u[0] == 1.0));
        assert!(sign_pairs(12, 12, 1000).is_err());
    }

    #[test]
    fn chsh_norms() {
        let r = nu_corr(&chsh()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-7);
        assert!((r.dual_value - 2.0).abs() < 1e-7);
        assert!(r.diagnostics.dual_normalization <= 1.0 + 1e-9);
        let g = gamma2_corr(&chsh()).unwrap();
        assert!((g.value - SQRT_2).abs() < 1e-5, "{}", g.value);
        assert!((g.dual_value - SQRT_2).abs() < 1e-5);
        assert!(g.diagnostics.dual_normalization <= 1.0 + 1e-5);
    }

    #[test]
    fn rank_one_sign_matrix() {
        let c = vec![vec![1.0, -1.0, 1.0], vec![-1.0, 1.0, -1.0]];
        assert!((nu_corr(&c).unwrap().value - 1.0).abs() < 1e-7);
        assert!((gamma2_corr(&c).unwrap().value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn alpha_program_on_chsh() {
        let cfg = BoundConfig::default();
        assert!((nu_alpha(&chsh(), 1.25, &cfg).unwrap() - 2.0).abs() < 1e-7);
        assert!((nu_alpha(&chsh(), 1.0, &cfg).unwrap() - 2.0).abs() < 1e-7);
    }
}
