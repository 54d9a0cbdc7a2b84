//! NPA level-1 relaxation of the quantum affine-model quantity.
//!
//! The moment matrix is indexed by the identity and the projectors
//! `E_a(x)`, `F_b(y)` for all but the last outcome of each input; the last
//! projector is eliminated through completeness. The index of `E_a(x)` and
//! `F_b(y)` coincides with the reduced-coordinate index of `pA(a|x)` and
//! `pB(b|y)`, so coordinate `k` lives at a fixed matrix entry.

use crate::bounds::local::clipped;
use crate::bounds::{BoundConfig, BoundResult, Certificate, Engine, Quantity, SolverDiagnostics};
use crate::coords::ReducedLayout;
use crate::dist::{statistical_distance, Alphabets, ConditionalDistribution, TOL_RECON};
use crate::error::{Error, Result};
use crate::model::{AffineModel, BellFunctional, BoundClass, CertifiedClass, Component};
use crate::sdp::{solve_sdp, BlockSpec, SdpProgram, SdpSolution, SdpStatus, Term};

/// Side of the moment matrix.
fn moment_dim(s: Alphabets) -> usize {
    1 + s.nx * (s.na - 1) + s.ny * (s.nb - 1)
}

/// Matrix entry holding each reduced coordinate, in coordinate order.
fn coordinate_entries(layout: &ReducedLayout) -> Vec<(usize, usize)> {
    let s = layout.alphabets;
    let mut out = vec![(0, 0); layout.len()];
    for x in 0..s.nx {
        for a in 0..s.na - 1 {
            out[layout.alice(a, x)] = (0, layout.alice(a, x));
        }
    }
    for y in 0..s.ny {
        for b in 0..s.nb - 1 {
            out[layout.bob(b, y)] = (0, layout.bob(b, y));
        }
    }
    for x in 0..s.nx {
        for y in 0..s.ny {
            for a in 0..s.na - 1 {
                for b in 0..s.nb - 1 {
                    out[layout.joint(a, b, x, y)] = (layout.alice(a, x), layout.bob(b, y));
                }
            }
        }
    }
    out
}

/// Projector idempotence and orthogonality rows for one moment block.
fn add_level1_structure(prog: &mut SdpProgram, layout: &ReducedLayout, block: usize) {
    let s = layout.alphabets;
    let d = moment_dim(s);
    for i in 1..d {
        prog.add_constraint(vec![Term::new(block, i, i, 1.0), Term::new(block, 0, i, -1.0)], 0.0);
    }
    for x in 0..s.nx {
        for a in 0..s.na - 1 {
            for a2 in a + 1..s.na - 1 {
                prog.add_constraint(vec![Term::new(block, layout.alice(a, x), layout.alice(a2, x), 1.0)], 0.0);
            }
        }
    }
    for y in 0..s.ny {
        for b in 0..s.nb - 1 {
            for b2 in b + 1..s.nb - 1 {
                prog.add_constraint(vec![Term::new(block, layout.bob(b, y), layout.bob(b2, y), 1.0)], 0.0);
            }
        }
    }
}

fn check_dim(s: Alphabets, cfg: &BoundConfig) -> Result<()> {
    let d = moment_dim(s);
    if 2 * d > cfg.sdp_dim_cap {
        return Err(Error::ResourceLimit {
            what: "NPA level-1 moment matrices".into(),
            count: 2 * d as u128,
            cap: cfg.sdp_dim_cap as u128,
        });
    }
    Ok(())
}

fn sdp_failure(sol: &SdpSolution, what: &str) -> Error {
    match sol.status {
        SdpStatus::Invalid => Error::Internal(format!("{what}: {}", sol.message.clone().unwrap_or_default())),
        _ => Error::Solver(format!(
            "{what} SDP ended with status {:?} after {} iterations (relative gap {:.2e}, residual {:.2e}){}",
            sol.status,
            sol.iterations,
            sol.relative_gap,
            sol.max_equality_residual,
            sol.message.as_ref().map(|m| format!(": {m}")).unwrap_or_default()
        )),
    }
}

/// Builds `t+ p+ - t- p-` from the two moment blocks.
fn moment_model(layout: &ReducedLayout, entries: &[(usize, usize)], sol: &SdpSolution) -> AffineModel {
    let s = layout.alphabets;
    let mut components = Vec::new();
    for (block, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let g = &sol.blocks[block];
        let t = g[(0, 0)];
        if t <= 1e-10 {
            continue;
        }
        let coords: Vec<f64> = entries.iter().map(|&(r, c)| g[(r, c)] / t).collect();
        let table = layout.expand(&coords);
        let dist = ConditionalDistribution::from_parts_unchecked(s, table);
        components.push((sign * t, Component::table(dist)));
    }
    AffineModel::new(s, components, CertifiedClass::NpaLevel1)
}

fn diagnostics(prog: &SdpProgram, sol: &SdpSolution, normalization: f64) -> SolverDiagnostics {
    SolverDiagnostics {
        engine: Engine::InteriorPoint,
        iterations: sol.iterations,
        rows: prog.constraints.len(),
        columns: prog.blocks.iter().map(|b| b.size()).sum(),
        primal_residual: sol.max_equality_residual,
        duality_gap: sol.relative_gap,
        min_eigenvalues: sol.min_eigenvalues.clone(),
        dual_normalization: normalization,
    }
}

pub fn gamma2_tilde_1(p: &ConditionalDistribution) -> Result<BoundResult> {
    gamma2_tilde_1_with(p, &BoundConfig::default())
}

pub fn gamma2_tilde_1_with(p: &ConditionalDistribution, cfg: &BoundConfig) -> Result<BoundResult> {
    p.validate().into_result()?;
    gamma2_unchecked(p, cfg)
}

fn gamma2_unchecked(p: &ConditionalDistribution, cfg: &BoundConfig) -> Result<BoundResult> {
    let s = p.alphabets();
    check_dim(s, cfg)?;
    let layout = ReducedLayout::new(s);
    let entries = coordinate_entries(&layout);
    let d = moment_dim(s);
    let target = layout.reduce(p);

    let mut prog = SdpProgram::new();
    prog.dim_cap = cfg.sdp_dim_cap;
    prog.max_iterations = cfg.sdp_max_iterations;
    let gp = prog.add_block(BlockSpec::Psd(d));
    let gm = prog.add_block(BlockSpec::Psd(d));
    prog.add_objective(Term::new(gp, 0, 0, 1.0));
    prog.add_objective(Term::new(gm, 0, 0, 1.0));
    // Data rows first so that their multipliers are y[..layout.len()].
    for (k, &(r, c)) in entries.iter().enumerate() {
        prog.add_constraint(vec![Term::new(gp, r, c, 1.0), Term::new(gm, r, c, -1.0)], target[k]);
    }
    add_level1_structure(&mut prog, &layout, gp);
    add_level1_structure(&mut prog, &layout, gm);

    let sol = solve_sdp(&prog);
    if !sol.is_optimal() {
        return Err(sdp_failure(&sol, "gamma2_tilde_1"));
    }
    let model = moment_model(&layout, &entries, &sol);
    model.check(p, TOL_RECON)?;

    let y = &sol.y[..layout.len()];
    let coeffs = layout.functional_to_table(y);
    let mut functional =
        BellFunctional { alphabets: s, coeffs, claimed_bound_class: BoundClass::NpaLevel1, normalization: f64::NAN };
    functional.normalization = npa_bound(&functional, cfg)?;
    let dual_value: f64 = target.iter().zip(y).map(|(a, b)| a * b).sum();
    let value = sol.objective;
    if value < 1.0 - 1e-7 {
        return Err(Error::Internal(format!("gamma2_tilde_1 value {value} below 1")));
    }
    Ok(BoundResult {
        quantity: Quantity::Gamma2Tilde1,
        value,
        epsilon: 0.0,
        primal_certificate: Certificate::Affine { model },
        diagnostics: diagnostics(&prog, &sol, functional.normalization),
        dual_certificate: functional,
        dual_value,
    })
}

pub fn gamma2_tilde_1_eps(p: &ConditionalDistribution, eps: f64) -> Result<BoundResult> {
    gamma2_tilde_1_eps_with(p, eps, &BoundConfig::default())
}

/// Level-1 relaxation of `min gamma2~(p')` over the `eps` ball, with the
/// ball and `p' >= 0` encoded through nonnegative slack scalars.
pub fn gamma2_tilde_1_eps_with(p: &ConditionalDistribution, eps: f64, cfg: &BoundConfig) -> Result<BoundResult> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1), got {eps}")));
    }
    p.validate().into_result()?;
    if eps == 0.0 {
        let mut r = gamma2_unchecked(p, cfg)?;
        r.quantity = Quantity::Gamma2Tilde1Eps;
        return Ok(r);
    }
    let s = p.alphabets();
    check_dim(s, cfg)?;
    let layout = ReducedLayout::new(s);
    let entries = coordinate_entries(&layout);
    let d = moment_dim(s);
    let cells = s.table_len();
    let pairs = s.nx * s.ny;

    let mut prog = SdpProgram::new();
    prog.dim_cap = cfg.sdp_dim_cap;
    prog.max_iterations = cfg.sdp_max_iterations;
    let gp = prog.add_block(BlockSpec::Psd(d));
    let gm = prog.add_block(BlockSpec::Psd(d));
    // Scalars: s | w_upper | w_lower | w_budget | w_nonneg.
    let sc = prog.add_block(BlockSpec::Nonneg(4 * cells + pairs));
    let slack = |c: usize| c;
    let w_upper = |c: usize| cells + c;
    let w_lower = |c: usize| 2 * cells + c;
    let w_budget = |xy: usize| 3 * cells + xy;
    let w_nonneg = |c: usize| 3 * cells + pairs + c;
    let scalar = |i: usize, coef: f64| Term::new(sc, i, i, coef);

    prog.add_objective(Term::new(gp, 0, 0, 1.0));
    prog.add_objective(Term::new(gm, 0, 0, 1.0));
    prog.add_constraint(vec![Term::new(gp, 0, 0, 1.0), Term::new(gm, 0, 0, -1.0)], 1.0);

    let perturbed_terms = |a: usize, b: usize, x: usize, y: usize, sign: f64| -> Vec<Term> {
        let mut terms = Vec::new();
        for (k, w) in layout.entry_weights(a, b, x, y) {
            let (r, c) = entries[k];
            terms.push(Term::new(gp, r, c, sign * w));
            terms.push(Term::new(gm, r, c, -sign * w));
        }
        terms
    };
    for x in 0..s.nx {
        for y in 0..s.ny {
            let mut budget = vec![scalar(w_budget(x * s.ny + y), 1.0)];
            for a in 0..s.na {
                for b in 0..s.nb {
                    let c = s.index(a, b, x, y);
                    let target = p.get(a, b, x, y);
                    let mut t = perturbed_terms(a, b, x, y, 1.0);
                    t.push(scalar(slack(c), -1.0));
                    t.push(scalar(w_upper(c), 1.0));
                    prog.add_constraint(t, target);

                    let mut t = perturbed_terms(a, b, x, y, -1.0);
                    t.push(scalar(slack(c), -1.0));
                    t.push(scalar(w_lower(c), 1.0));
                    prog.add_constraint(t, -target);

                    let mut t = perturbed_terms(a, b, x, y, 1.0);
                    t.push(scalar(w_nonneg(c), -1.0));
                    prog.add_constraint(t, 0.0);

                    budget.push(scalar(slack(c), 1.0));
                }
            }
            prog.add_constraint(budget, 2.0 * eps);
        }
    }
    add_level1_structure(&mut prog, &layout, gp);
    add_level1_structure(&mut prog, &layout, gm);

    let sol = solve_sdp(&prog);
    if !sol.is_optimal() {
        return Err(sdp_failure(&sol, "gamma2_tilde_1_eps"));
    }
    let model = moment_model(&layout, &entries, &sol);
    let perturbed = clipped(model.evaluate())?;
    let dist = statistical_distance(p, &perturbed)?;
    if dist > eps + 1e-6 {
        return Err(Error::Mismatch { residual: dist - eps, tolerance: 1e-6 });
    }
    let inner = gamma2_unchecked(&perturbed, cfg)?;
    Ok(BoundResult {
        quantity: Quantity::Gamma2Tilde1Eps,
        value: sol.objective,
        epsilon: eps,
        primal_certificate: Certificate::Affine { model },
        diagnostics: diagnostics(&prog, &sol, inner.diagnostics.dual_normalization),
        dual_certificate: inner.dual_certificate,
        dual_value: inner.dual_value,
    })
}

/// `max |B(p')|` over the NPA level-1 set, by two SDPs.
pub fn npa_bound(functional: &BellFunctional, cfg: &BoundConfig) -> Result<f64> {
    let s = functional.alphabets;
    let layout = ReducedLayout::new(s);
    let entries = coordinate_entries(&layout);
    let d = moment_dim(s);
    if d > cfg.sdp_dim_cap {
        return Err(Error::ResourceLimit {
            what: "NPA level-1 moment matrix".into(),
            count: d as u128,
            cap: cfg.sdp_dim_cap as u128,
        });
    }
    // Coefficients of B on the reduced coordinates.
    let mut beta = vec![0.0; layout.len()];
    for x in 0..s.nx {
        for y in 0..s.ny {
            for a in 0..s.na {
                for b in 0..s.nb {
                    let coef = functional.coeffs[s.index(a, b, x, y)];
                    for (k, w) in layout.entry_weights(a, b, x, y) {
                        beta[k] += coef * w;
                    }
                }
            }
        }
    }
    let mut best: f64 = 0.0;
    for sign in [1.0, -1.0] {
        let mut prog = SdpProgram::new();
        prog.dim_cap = cfg.sdp_dim_cap;
        prog.max_iterations = cfg.sdp_max_iterations;
        let g = prog.add_block(BlockSpec::Psd(d));
        for (k, &(r, c)) in entries.iter().enumerate() {
            if beta[k] != 0.0 {
                prog.add_objective(Term::new(g, r, c, -sign * beta[k]));
            }
        }
        prog.add_constraint(vec![Term::new(g, 0, 0, 1.0)], 1.0);
        add_level1_structure(&mut prog, &layout, g);
        let sol = solve_sdp(&prog);
        if !sol.is_optimal() {
            return Err(sdp_failure(&sol, "npa_bound"));
        }
        best = best.max(-sol.objective);
    }
    Ok(best)
}
