use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    domain, renormalize_estimates, stream_rng, Mixture, PlanKind, SignedParts, SimulationOutcome, SmpPlan, POOL_CAP,
};
use crate::correlation::outcome_sign;
use crate::dist::{Alphabets, ConditionalDistribution};
use crate::error::{Error, Result};
use crate::model::AffineModel;

const CHUNK: u64 = 8192;

fn check_shapes(model: &AffineModel, plan: &SmpPlan, target: Option<&ConditionalDistribution>) -> Result<()> {
    if model.alphabets != plan.alphabets {
        return Err(Error::Shape("plan and model alphabets differ".into()));
    }
    if let Some(t) = target {
        if t.alphabets() != model.alphabets {
            return Err(Error::Shape("target and model alphabets differ".into()));
        }
    }
    Ok(())
}

/// Occurrence counts `[x][y][a][b]` of `n` shared-randomness draws from one
/// side of the model. Draws are grouped in fixed chunks, each with its own
/// stream, so the counts do not depend on the thread schedule.
fn sample_counts(mix: &Mixture, s: Alphabets, seed: u64, dom: u64, sign: usize, n: u64) -> Vec<u64> {
    if mix.is_empty() {
        return vec![0; s.table_len()];
    }
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, dom, ((sign as u64) << 40) | chunk);
            let mut counts = vec![0u64; s.table_len()];
            let mut a = vec![0usize; s.nx];
            let mut b = vec![0usize; s.ny];
            let len = CHUNK.min(n - chunk * CHUNK);
            for _ in 0..len {
                mix.sample(s, &mut rng, &mut a, &mut b);
                for x in 0..s.nx {
                    for y in 0..s.ny {
                        counts[s.index(a[x], b[y], x, y)] += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; s.table_len()],
            |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(u, v)| *u += v);
                acc
            },
        )
}

fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Renormalizes the per-cell estimates, replays the referee and measures the
/// statistical distance of the empirical output law (the "no output" symbol
/// counts as error mass).
fn finish(plan: &SmpPlan, target: &ConditionalDistribution, flat_estimates: &[f64], seed: u64) -> SimulationOutcome {
    let s = plan.alphabets;
    let cells = s.na * s.nb;
    let mut estimates = vec![vec![Vec::new(); s.ny]; s.nx];
    let mut renormalized = vec![vec![Vec::new(); s.ny]; s.nx];
    let mut empirical = vec![vec![Vec::new(); s.ny]; s.nx];
    let mut distances = vec![vec![0.0; s.ny]; s.nx];
    for x in 0..s.nx {
        for y in 0..s.ny {
            let est: Vec<f64> = (0..cells).map(|k| flat_estimates[s.index(k / s.nb, k % s.nb, x, y)]).collect();
            let law = renormalize_estimates(&est);
            let mut rng = stream_rng(seed, domain::REFEREE, (x * s.ny + y) as u64);
            let mut counts = vec![0u64; cells + 1];
            for _ in 0..plan.replays {
                counts[categorical(&law, rng.random())] += 1;
            }
            let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / plan.replays as f64).collect();
            let slice = target.slice(x, y);
            let l1: f64 = (0..cells).map(|k| (emp[k] - slice[k]).abs()).sum::<f64>() + emp[cells];
            distances[x][y] = 0.5 * l1;
            estimates[x][y] = est;
            renormalized[x][y] = law;
            empirical[x][y] = emp;
        }
    }
    let empirical_distance = distances.iter().flatten().copied().fold(0.0, f64::max);
    SimulationOutcome {
        seed,
        plan: plan.clone(),
        estimates,
        renormalized,
        empirical,
        distances,
        empirical_distance,
        pool_deviation: None,
        pool_ok: None,
    }
}

/// Classical SMP protocol: `T` shared draws from each side, the referee's
/// estimate `P = (q+ N+ - q- N-) / T` per cell, renormalized and replayed.
pub fn run_smp_classical(
    model: &AffineModel,
    plan: &SmpPlan,
    target: &ConditionalDistribution,
    seed: u64,
) -> Result<SimulationOutcome> {
    check_shapes(model, plan, Some(target))?;
    let parts = SignedParts::from_model(model)?;
    let s = plan.alphabets;
    let plus = sample_counts(&parts.plus, s, seed, domain::TRIALS, 0, plan.trials);
    let minus = sample_counts(&parts.minus, s, seed, domain::TRIALS, 1, plan.trials);
    let t = plan.trials as f64;
    let est: Vec<f64> =
        plus.iter().zip(&minus).map(|(&np, &nm)| (parts.q_plus * np as f64 - parts.q_minus * nm as f64) / t).collect();
    Ok(finish(plan, target, &est, seed))
}

/// Quantum SMP protocol, simulated through the closed-form swap-test law:
/// the fingerprint overlap for cell `(a,b)` is the pool frequency `p~`, each
/// of `T` tests reports 1 with probability `(1 - p~^2)/2`, and the referee
/// takes `Q = sqrt(max(0, 1 - 2 Zbar))`. The two sides are combined as
/// `q+ Q+ - q- Q-`.
pub fn run_smp_quantum_sim(
    model: &AffineModel,
    plan: &SmpPlan,
    target: &ConditionalDistribution,
    seed: u64,
) -> Result<SimulationOutcome> {
    check_shapes(model, plan, Some(target))?;
    let parts = SignedParts::from_model(model)?;
    let s = plan.alphabets;
    let pool = plan.pool_size.ok_or_else(|| Error::InvalidInput("quantum simulation needs a pool size".into()))?;
    if pool > POOL_CAP {
        return Err(Error::ResourceLimit {
            what: "shared-randomness pool".into(),
            count: pool as u128,
            cap: POOL_CAP as u128,
        });
    }
    let cells = s.table_len();
    let mut overlaps = [vec![0.0; cells], vec![0.0; cells]];
    let mut deviation: f64 = 0.0;
    for sign in 0..2 {
        let mix = parts.mixture(sign);
        if mix.is_empty() {
            continue;
        }
        let counts = sample_counts(mix, s, seed, domain::POOL, sign, pool);
        let exact = mix.distribution(s);
        for (k, &c) in counts.iter().enumerate() {
            overlaps[sign][k] = c as f64 / pool as f64;
            deviation = deviation.max((overlaps[sign][k] - exact.table()[k]).abs());
        }
    }
    let est = swap_test_estimates(&parts, &overlaps, plan.trials, seed)?;
    let mut out = finish(plan, target, &est, seed);
    out.pool_deviation = Some(deviation);
    out.pool_ok = Some(deviation <= plan.delta / (2.0 * plan.lambda));
    Ok(out)
}

/// `1 - 2 Zbar` for one overlap and `T` tests; its mean is `overlap^2`.
pub fn swap_test_statistic(overlap: f64, trials: u64, rng: &mut impl Rng) -> Result<f64> {
    let p1 = ((1.0 - overlap * overlap) / 2.0).clamp(0.0, 1.0);
    let z = Binomial::new(trials, p1).map_err(|e| Error::Internal(format!("binomial law: {e}")))?.sample(rng);
    Ok(1.0 - 2.0 * z as f64 / trials as f64)
}

fn swap_test_estimates(parts: &SignedParts, overlaps: &[Vec<f64>; 2], trials: u64, seed: u64) -> Result<Vec<f64>> {
    let cells = overlaps[0].len();
    (0..cells)
        .into_par_iter()
        .map(|k| {
            let mut q = [0.0; 2];
            for (sign, qs) in q.iter_mut().enumerate() {
                if parts.weight(sign) == 0.0 {
                    continue;
                }
                let mut rng = stream_rng(seed, domain::SWAP_TEST, (sign * cells + k) as u64);
                *qs = swap_test_statistic(overlaps[sign][k], trials, &mut rng)?.max(0.0).sqrt();
            }
            Ok(parts.q_plus * q[0] - parts.q_minus * q[1])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanOutcome {
    pub seed: u64,
    pub trials: u64,
    pub replays: usize,
    /// Fraction of replays whose output sign differs from `C(x,y)`.
    pub error_rates: Vec<Vec<f64>>,
    pub max_error_rate: f64,
    /// Correlations reproduced by the model.
    pub model_correlations: Vec<Vec<f64>>,
}

/// Boolean SMP protocol: the referee averages `q+ a+ b+ - q- a- b-` over
/// `T'` shared draws and outputs its sign. Each replay is an independent run.
pub fn run_smp_boolean(c: &[Vec<f64>], model: &AffineModel, plan: &SmpPlan, seed: u64) -> Result<BooleanOutcome> {
    check_shapes(model, plan, None)?;
    let s = model.alphabets;
    if !s.is_binary() {
        return Err(Error::Unsupported("boolean protocol needs binary outcomes".into()));
    }
    if c.len() != s.nx || c.iter().any(|r| r.len() != s.ny) {
        return Err(Error::Shape("sign matrix shape differs from the model".into()));
    }
    if c.iter().flatten().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput("sign matrix entries must be +1 or -1".into()));
    }
    if plan.kind != PlanKind::Boolean {
        return Err(Error::InvalidInput("boolean protocol needs a boolean plan".into()));
    }
    let parts = SignedParts::from_model(model)?;
    let p = model.evaluate();
    let model_correlations: Vec<Vec<f64>> = (0..s.nx)
        .map(|x| {
            (0..s.ny)
                .map(|y| {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            acc += outcome_sign(a) * outcome_sign(b) * p.get(a, b, x, y);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let margin = 1.0 - 2.0 * plan.epsilon;
    for x in 0..s.nx {
        for y in 0..s.ny {
            if c[x][y] * model_correlations[x][y] < margin - 1e-7 {
                return Err(Error::Precondition(format!(
                    "model correlation {:.6} at ({x}, {y}) does not reach margin {margin:.6} with sign {}",
                    model_correlations[x][y], c[x][y]
                )));
            }
        }
    }

    let wrong: Vec<Vec<bool>> = (0..plan.replays as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, domain::BOOLEAN, r);
            let mut sums = vec![0.0; s.nx * s.ny];
            let mut a = vec![0usize; s.nx];
            let mut b = vec![0usize; s.ny];
            for sign in 0..2 {
                let mix = parts.mixture(sign);
                if mix.is_empty() {
                    continue;
                }
                let w = if sign == 0 { parts.q_plus } else { -parts.q_minus };
                for _ in 0..plan.trials {
                    mix.sample(s, &mut rng, &mut a, &mut b);
                    for x in 0..s.nx {
                        for y in 0..s.ny {
                            sums[x * s.ny + y] += w * outcome_sign(a[x]) * outcome_sign(b[y]);
                        }
                    }
                }
            }
            (0..s.nx * s.ny)
                .map(|k| {
                    let out = if sums[k] >= 0.0 { 1.0 } else { -1.0 };
                    out != c[k / s.ny][k % s.ny]
                })
                .collect()
        })
        .collect();
    let mut error_rates = vec![vec![0.0; s.ny]; s.nx];
    for run in &wrong {
        for (k, &w) in run.iter().enumerate() {
            if w {
                error_rates[k / s.ny][k % s.ny] += 1.0;
            }
        }
    }
    error_rates.iter_mut().flatten().for_each(|e| *e /= plan.replays as f64);
    let max_error_rate = error_rates.iter().flatten().copied().fold(0.0, f64::max);
    Ok(BooleanOutcome {
        seed,
        trials: plan.trials,
        replays: plan.replays,
        error_rates,
        max_error_rate,
        model_correlations,
    })
}
