use crate::bounds::{BoundConfig, BoundResult, Certificate, Engine, Quantity, SolverDiagnostics};
use crate::coords::ReducedLayout;
use crate::dist::{statistical_distance, Alphabets, ConditionalDistribution, TOL_RECON};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
use crate::model::{AffineModel, BellFunctional, BoundClass, CertifiedClass, Component};
use crate::vertex::{enumerate_local_vertices, LocalVertex};

const PRUNE: f64 = 1e-13;

pub fn nu_tilde(p: &ConditionalDistribution) -> Result<BoundResult> {
    nu_tilde_with(p, &BoundConfig::default())
}

pub fn nu_tilde_with(p: &ConditionalDistribution, cfg: &BoundConfig) -> Result<BoundResult> {
    p.validate().into_result()?;
    nu_tilde_unchecked(p, cfg)
}

/// Reduced coordinates of a vertex, without building its table.
fn vertex_coords(layout: &ReducedLayout, v: &LocalVertex) -> Vec<f64> {
    let s = layout.alphabets;
    let mut r = vec![0.0; layout.len()];
    r[ReducedLayout::NORM] = 1.0;
    for x in 0..s.nx {
        if v.lambda_a[x] + 1 < s.na {
            r[layout.alice(v.lambda_a[x], x)] = 1.0;
        }
    }
    for y in 0..s.ny {
        if v.lambda_b[y] + 1 < s.nb {
            r[layout.bob(v.lambda_b[y], y)] = 1.0;
        }
    }
    for x in 0..s.nx {
        for y in 0..s.ny {
            let (a, b) = (v.lambda_a[x], v.lambda_b[y]);
            if a + 1 < s.na && b + 1 < s.nb {
                r[layout.joint(a, b, x, y)] = 1.0;
            }
        }
    }
    r
}

fn lp_failure(sol: &LpSolution, what: &str) -> Error {
    match sol.status {
        LpStatus::Infeasible => Error::Internal(format!(
            "{what} LP reported infeasible for a validated non-signaling input; this indicates a validation bug"
        )),
        LpStatus::Unbounded => Error::Internal(format!("{what} LP reported unbounded")),
        _ => Error::Solver(format!(
            "{what} LP ended with status {:?}: {}",
            sol.status,
            sol.message.clone().unwrap_or_default()
        )),
    }
}

fn vertex_model(alphabets: Alphabets, vertices: &[LocalVertex], weights: &[f64]) -> AffineModel {
    let components = vertices
        .iter()
        .zip(weights)
        .filter(|(_, w)| w.abs() > PRUNE)
        .map(|(v, w)| (*w, Component::Vertex(v.clone())))
        .collect();
    AffineModel::new(alphabets, components, CertifiedClass::LocalDeterministic)
}

/// `nu~` without validating the input; `p` must lie in the non-signaling
/// affine space for the result to be meaningful.
pub(crate) fn nu_tilde_unchecked(p: &ConditionalDistribution, cfg: &BoundConfig) -> Result<BoundResult> {
    let s = p.alphabets();
    let layout = ReducedLayout::new(s);
    let vertices: Vec<LocalVertex> = enumerate_local_vertices(s, cfg.vertex_cap)?.collect();
    let nv = vertices.len();
    let coords: Vec<Vec<f64>> = vertices.iter().map(|v| vertex_coords(&layout, v)).collect();
    let target = layout.reduce(p);

    let mut lp = LinearProgram::minimize(vec![1.0; 2 * nv]);
    for (k, &rhs) in target.iter().enumerate() {
        let mut row = vec![0.0; 2 * nv];
        for (j, c) in coords.iter().enumerate() {
            row[j] = c[k];
            row[nv + j] = -c[k];
        }
        lp.add_eq(row, rhs);
    }
    let sol = solve_lp(&lp);
    if !sol.is_optimal() {
        return Err(lp_failure(&sol, "nu_tilde"));
    }
    let weights: Vec<f64> = (0..nv).map(|j| sol.primal[j] - sol.primal[nv + j]).collect();
    let model = vertex_model(s, &vertices, &weights);
    model.check(p, TOL_RECON)?;

    let y = &sol.dual[..layout.len()];
    let normalization =
        coords.iter().map(|c| c.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
    let dual_value: f64 = target.iter().zip(y).map(|(a, b)| a * b).sum();
    let functional = BellFunctional {
        alphabets: s,
        coeffs: layout.functional_to_table(y),
        claimed_bound_class: BoundClass::Local,
        normalization,
    };
    let value = sol.objective;
    if value < 1.0 - 1e-7 {
        return Err(Error::Internal(format!("nu_tilde value {value} below 1")));
    }
    Ok(BoundResult {
        quantity: Quantity::NuTilde,
        value,
        epsilon: 0.0,
        primal_certificate: Certificate::Affine { model },
        dual_certificate: functional,
        dual_value,
        diagnostics: SolverDiagnostics {
            engine: Engine::Simplex,
            iterations: sol.iterations,
            rows: layout.len(),
            columns: 2 * nv,
            primal_residual: sol.primal_residual,
            duality_gap: sol.duality_gap,
            min_eigenvalues: Vec::new(),
            dual_normalization: normalization,
        },
    })
}

pub fn nu_tilde_eps(p: &ConditionalDistribution, eps: f64) -> Result<BoundResult> {
    nu_tilde_eps_with(p, eps, &BoundConfig::default())
}

/// `min nu~(p')` over `p'` within statistical distance `eps` of `p`, as one
/// LP over vertex weights and per-cell slacks `s >= |p - p'|`.
pub fn nu_tilde_eps_with(p: &ConditionalDistribution, eps: f64, cfg: &BoundConfig) -> Result<BoundResult> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1), got {eps}")));
    }
    p.validate().into_result()?;
    let s = p.alphabets();
    let vertices: Vec<LocalVertex> = enumerate_local_vertices(s, cfg.vertex_cap)?.collect();
    let nv = vertices.len();
    let cells = s.table_len();
    let n = 2 * nv + cells;

    let mut objective = vec![0.0; n];
    objective[..2 * nv].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::minimize(objective);

    let mut norm = vec![0.0; n];
    norm[..nv].iter_mut().for_each(|c| *c = 1.0);
    norm[nv..2 * nv].iter_mut().for_each(|c| *c = -1.0);
    lp.add_eq(norm, 1.0);

    for x in 0..s.nx {
        for y in 0..s.ny {
            for a in 0..s.na {
                for b in 0..s.nb {
                    let cell = s.index(a, b, x, y);
                    let mut pp = vec![0.0; n];
                    for (j, v) in vertices.iter().enumerate() {
                        if v.lambda_a[x] == a && v.lambda_b[y] == b {
                            pp[j] = 1.0;
                            pp[nv + j] = -1.0;
                        }
                    }
                    let target = p.get(a, b, x, y);
                    // p' - s <= p
                    let mut row = pp.clone();
                    row[2 * nv + cell] = -1.0;
                    lp.add_le(row, target);
                    // p - p' <= s
                    let mut row: Vec<f64> = pp.iter().map(|v| -v).collect();
                    row[2 * nv + cell] = -1.0;
                    lp.add_le(row, -target);
                    // p' >= 0
                    lp.add_ge(pp, 0.0);
                }
            }
            let mut budget = vec![0.0; n];
            for a in 0..s.na {
                for b in 0..s.nb {
                    budget[2 * nv + s.index(a, b, x, y)] = 1.0;
                }
            }
            lp.add_le(budget, 2.0 * eps);
        }
    }
    let rows = lp.a_eq.len() + lp.a_ub.len();
    let sol = solve_lp(&lp);
    if !sol.is_optimal() {
        return Err(lp_failure(&sol, "nu_tilde_eps"));
    }
    let weights: Vec<f64> = (0..nv).map(|j| sol.primal[j] - sol.primal[nv + j]).collect();
    let model = vertex_model(s, &vertices, &weights);
    let perturbed = clipped(model.evaluate())?;
    let dist = statistical_distance(p, &perturbed)?;
    if dist > eps + TOL_RECON {
        return Err(Error::Mismatch { residual: dist - eps, tolerance: TOL_RECON });
    }
    model.check(&perturbed, TOL_RECON)?;

    // Dual certificate: the optimal functional of the perturbed point.
    let inner = nu_tilde_unchecked(&perturbed, cfg)?;
    Ok(BoundResult {
        quantity: Quantity::NuTildeEps,
        value: sol.objective,
        epsilon: eps,
        primal_certificate: Certificate::Affine { model },
        dual_value: inner.dual_value,
        diagnostics: SolverDiagnostics {
            engine: Engine::Simplex,
            iterations: sol.iterations,
            rows,
            columns: n,
            primal_residual: sol.primal_residual,
            duality_gap: sol.duality_gap,
            min_eigenvalues: Vec::new(),
            dual_normalization: inner.diagnostics.dual_normalization,
        },
        dual_certificate: inner.dual_certificate,
    })
}

/// Solver output rounded back into the simplex: entries within solver noise
/// below zero are set to zero.
pub(crate) fn clipped(d: ConditionalDistribution) -> Result<ConditionalDistribution> {
    let s = d.alphabets();
    let table: Vec<f64> = d.table().iter().map(|v| v.max(0.0)).collect();
    Ok(ConditionalDistribution::from_parts_unchecked(s, table))
}

pub fn dual_bell(p: &ConditionalDistribution, class: BoundClass) -> Result<BellFunctional> {
    dual_bell_with(p, class, &BoundConfig::default())
}

pub fn dual_bell_with(p: &ConditionalDistribution, class: BoundClass, cfg: &BoundConfig) -> Result<BellFunctional> {
    Ok(match class {
        BoundClass::Local => nu_tilde_with(p, cfg)?.dual_certificate,
        BoundClass::NpaLevel1 => crate::bounds::gamma2_tilde_1_with(p, cfg)?.dual_certificate,
    })
}
