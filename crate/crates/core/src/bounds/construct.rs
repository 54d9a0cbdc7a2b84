//! Explicit affine-model constructions: the reduction from arbitrary
//! outcome alphabets to binary blocks, the `nu~` versus `gamma2~` gap check,
//! and the model induced by a `t`-bit protocol.

use serde::{Deserialize, Serialize};

use crate::bounds::{gamma2_tilde_1_with, nu_tilde_with, BoundConfig, GrothendieckInterval};
use crate::dist::{Alphabets, ConditionalDistribution, TOL_RECON};
use crate::error::{Error, Result};
use crate::model::{AffineModel, CertifiedClass, Component};
use crate::vertex::LocalVertex;

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Model over the alphabets extended by one dummy outcome per party.
    pub model: AffineModel,
    /// `p` with the dummy outcome appended at probability zero.
    pub extended_target: ConditionalDistribution,
    /// Binary blocks indexed `alpha * nb + beta`; outcome 0 stands for
    /// `alpha` (resp. `beta`), outcome 1 for the dummy.
    pub blocks: Vec<ConditionalDistribution>,
    /// L1 mass of each block's model (1 when blocks are kept as tables).
    pub block_masses: Vec<f64>,
    pub residual: f64,
}

/// Turns one binary block into an affine model over its own alphabets.
pub type Decomposer<'a> = dyn Fn(&ConditionalDistribution) -> Result<AffineModel> + 'a;

/// Splits `p` into `A*B` binary blocks plus three product corrections:
///
/// ```text
/// p' = sum_{alpha,beta} p_{alpha beta} - (B-1) p_A - (A-1) p_B - (AB-A-B+1) p_0
/// ```
///
/// where `p'` is `p` over the outcome sets extended by a dummy outcome.
/// Each block is handed to `decomposer` (if any), whose model is lifted back
/// to the extended alphabets; otherwise the block enters as a table.
pub fn quantum_to_local_decomposition(
    p: &ConditionalDistribution,
    decomposer: Option<&Decomposer>,
) -> Result<Decomposition> {
    p.validate().into_result()?;
    let s = p.alphabets();
    let (na, nb) = (s.na, s.nb);
    let ext = Alphabets { na: na + 1, nb: nb + 1, ..s };
    let binary = Alphabets::binary(s.nx, s.ny)?;
    let pa: Vec<Vec<f64>> = (0..s.nx).map(|x| (0..na).map(|a| p.alice_marginal(a, x)).collect()).collect();
    let pb: Vec<Vec<f64>> = (0..s.ny).map(|y| (0..nb).map(|b| p.bob_marginal(b, y)).collect()).collect();

    let mut components = Vec::new();
    let mut blocks = Vec::with_capacity(na * nb);
    let mut block_masses = Vec::with_capacity(na * nb);
    let mut all_local = true;
    for alpha in 0..na {
        for beta in 0..nb {
            let block = ConditionalDistribution::from_fn(binary, |a, b, x, y| {
                let joint = p.get(alpha, beta, x, y);
                match (a, b) {
                    (0, 0) => joint,
                    (0, 1) => pa[x][alpha] - joint,
                    (1, 0) => pb[y][beta] - joint,
                    _ => 1.0 - pa[x][alpha] - pb[y][beta] + joint,
                }
            })?;
            let report = block.validate();
            if !report.is_valid() {
                return Err(Error::Internal(format!(
                    "block ({alpha}, {beta}) fails validation: {}",
                    report.violations().join("; ")
                )));
            }
            match decomposer {
                Some(f) => {
                    let m = f(&block)?;
                    all_local &=
                        matches!(m.certified_class, CertifiedClass::Local | CertifiedClass::LocalDeterministic);
                    block_masses.push(m.mass());
                    for (q, c) in m.components {
                        components.push((q, lift(&c, binary, ext, alpha, beta)));
                    }
                }
                None => {
                    all_local = false;
                    block_masses.push(1.0);
                    components.push((1.0, lift(&Component::table(block.clone()), binary, ext, alpha, beta)));
                }
            }
            blocks.push(block);
        }
    }

    let dummy_a: Vec<Vec<f64>> = (0..s.nx).map(|_| unit(na + 1, na)).collect();
    let dummy_b: Vec<Vec<f64>> = (0..s.ny).map(|_| unit(nb + 1, nb)).collect();
    let pad = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.iter().copied().chain(std::iter::once(0.0)).collect()).collect()
    };
    let (fa, fb) = (na as f64, nb as f64);
    components.push((-(fb - 1.0), Component::Product { pa: pad(&pa), pb: dummy_b.clone() }));
    components.push((-(fa - 1.0), Component::Product { pa: dummy_a.clone(), pb: pad(&pb) }));
    components.push((-(fa * fb - fa - fb + 1.0), Component::Product { pa: dummy_a, pb: dummy_b }));

    let class = if all_local { CertifiedClass::Local } else { CertifiedClass::NpaLevel1 };
    let model = AffineModel::new(ext, components, class);
    let extended_target = p.pad_outcomes(1, 1);
    let residual = model.reconstruction_residual(&extended_target)?;
    Ok(Decomposition { model, extended_target, blocks, block_masses, residual })
}

fn unit(n: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[at] = 1.0;
    v
}

/// Maps binary outcome 0 to `alpha` / `beta` and outcome 1 to the dummy.
fn lift(c: &Component, binary: Alphabets, ext: Alphabets, alpha: usize, beta: usize) -> Component {
    let ma = |a: usize| if a == 0 { alpha } else { ext.na - 1 };
    let mb = |b: usize| if b == 0 { beta } else { ext.nb - 1 };
    match c {
        Component::Vertex(v) => Component::Vertex(LocalVertex {
            lambda_a: v.lambda_a.iter().map(|&a| ma(a)).collect(),
            lambda_b: v.lambda_b.iter().map(|&b| mb(b)).collect(),
        }),
        Component::Product { pa, pb } => {
            let lift_rows = |rows: &[Vec<f64>], n: usize, m: &dyn Fn(usize) -> usize| -> Vec<Vec<f64>> {
                rows.iter()
                    .map(|r| {
                        let mut out = vec![0.0; n];
                        for (i, v) in r.iter().enumerate() {
                            out[m(i)] += v;
                        }
                        out
                    })
                    .collect()
            };
            Component::Product { pa: lift_rows(pa, ext.na, &ma), pb: lift_rows(pb, ext.nb, &mb) }
        }
        Component::Table { .. } => {
            let mut table = vec![0.0; ext.table_len()];
            for x in 0..binary.nx {
                for y in 0..binary.ny {
                    for a in 0..2 {
                        for b in 0..2 {
                            table[ext.index(ma(a), mb(b), x, y)] += c.prob(a, b, x, y);
                        }
                    }
                }
            }
            Component::table(ConditionalDistribution::from_parts_unchecked(ext, table))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub nu: f64,
    pub gamma2_1: f64,
    pub ratio: f64,
    /// `(2 K_G + 1) gamma2`, the binary-outcome bound.
    pub bound_2k_plus_1: f64,
    /// `(2AB (K_G + 1) - 1) gamma2`, the general bound.
    pub bound_general: f64,
    /// Whichever of the two applies to the alphabets.
    pub applicable_bound: f64,
    pub holds: bool,
    /// Always true: the level-1 value is only a lower bound on `gamma2~`,
    /// so the check is one-sided.
    pub uses_relaxation: bool,
}

/// Compares `nu~(p)` with the Grothendieck-type upper bound in terms of the
/// level-1 value, using the upper end of the `K_G` interval.
pub fn gap_check(p: &ConditionalDistribution, cfg: &BoundConfig) -> Result<GapReport> {
    let nu = nu_tilde_with(p, cfg)?.value;
    let gamma = gamma2_tilde_1_with(p, cfg)?.value;
    let s = p.alphabets();
    let k = GrothendieckInterval::UPPER;
    let ab = (s.na * s.nb) as f64;
    let bound_2k_plus_1 = (2.0 * k + 1.0) * gamma;
    let bound_general = (2.0 * ab * (k + 1.0) - 1.0) * gamma;
    let applicable_bound = if s.is_binary() { bound_2k_plus_1 } else { bound_general };
    Ok(GapReport {
        nu,
        gamma2_1: gamma,
        ratio: nu / gamma,
        bound_2k_plus_1,
        bound_general,
        applicable_bound,
        holds: nu <= applicable_bound + 1e-4,
        uses_relaxation: true,
    })
}

/// The two-term model `p = 2^t p_l + (1 - 2^t) pA pB` induced by a `t`-bit
/// protocol whose message-guessing local simulation yields `p_l`. Its mass
/// is `2^(t+1) - 1`.
pub fn scaled_local_reconstruction(
    p: &ConditionalDistribution,
    t: u32,
    p_l: &ConditionalDistribution,
    pa: &[Vec<f64>],
    pb: &[Vec<f64>],
) -> Result<AffineModel> {
    p_l.validate().into_result()?;
    let prod = ConditionalDistribution::product(pa, pb)?;
    prod.validate().into_result()?;
    if p_l.alphabets() != p.alphabets() || prod.alphabets() != p.alphabets() {
        return Err(Error::Shape("protocol tables must share the target's alphabets".into()));
    }
    let scale = 2f64.powi(t as i32);
    let model = AffineModel::new(
        p.alphabets(),
        vec![
            (scale, Component::table(p_l.clone())),
            (1.0 - scale, Component::Product { pa: pa.to_vec(), pb: pb.to_vec() }),
        ],
        CertifiedClass::Local,
    );
    model.check(p, TOL_RECON)?;
    Ok(model)
}

/// `C = (2^t+1)/2 * (C/2^t) - (2^t-1)/2 * (-C/2^t)`, an affine combination
/// of two correlation matrices scaled into the `t`-bit range, with mass `2^t`.
pub fn symmetric_correlation_model(c: &[Vec<f64>], t: u32) -> Vec<(f64, Vec<Vec<f64>>)> {
    let k = 2f64.powi(t as i32);
    let scaled: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|v| v / k).collect()).collect();
    let negated = scaled.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    vec![(0.5 * (k + 1.0), scaled), (-0.5 * (k - 1.0), negated)]
}
