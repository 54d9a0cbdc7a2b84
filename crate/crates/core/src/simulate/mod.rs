//! Monte-Carlo runs of the simultaneous-messages protocols built on a
//! two-sided affine model `p = q+ p+ - q- p-`.
//!
//! Shared randomness is a counter-based ChaCha stream keyed by the master
//! seed, a domain tag and an index (trial chunk, pool string, replay...), so
//! both parties derive the same draws and results do not depend on how work
//! is split across threads.

mod protocols;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{Alphabets, ConditionalDistribution};
use crate::error::{Error, Result};
use crate::model::{AffineModel, Component};

pub use protocols::{run_smp_boolean, run_smp_classical, run_smp_quantum_sim, swap_test_statistic, BooleanOutcome};

pub const DEFAULT_REPLAYS: usize = 10_000;
/// Largest shared-randomness pool the quantum simulation will allocate.
pub const POOL_CAP: u64 = 50_000_000;

/// `exp(-2 T beta^2 / width^2)`.
pub fn hoeffding_bound(trials: u64, beta: f64, range_width: f64) -> f64 {
    (-2.0 * trials as f64 * beta * beta / (range_width * range_width)).exp()
}

/// Clips negative estimates, rescales when the total exceeds one, and puts
/// the remaining mass on a trailing "no output" symbol.
pub fn renormalize_estimates(q: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = q.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = r.iter().sum();
    if total > 1.0 {
        r.iter_mut().for_each(|v| *v /= total);
    }
    let kept: f64 = r.iter().sum();
    r.push((1.0 - kept).max(0.0));
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    Classical,
    Quantum,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmpPlan {
    pub kind: PlanKind,
    /// Mass `q+ + q-` of the model.
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Samples per sign and input pair.
    pub trials: u64,
    pub beta: f64,
    /// Shared-randomness pool size (quantum plan only).
    pub pool_size: Option<u64>,
    pub alphabets: Alphabets,
    /// Referee replays used to build the empirical output distribution.
    pub replays: usize,
}

fn check_plan_args(lambda: f64, epsilon: f64, delta: f64) -> Result<()> {
    if !(lambda >= 1.0 - 1e-9) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("model mass must be at least 1, got {lambda}")));
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1/2), got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn ceil_count(v: f64) -> Result<u64> {
    if !v.is_finite() || v >= u64::MAX as f64 {
        return Err(Error::ResourceLimit { what: "trial count".into(), count: u128::MAX, cap: u64::MAX as u128 });
    }
    Ok((v.ceil() as u64).max(1))
}

impl SmpPlan {
    /// `beta = delta/(4AB)`, `T = ceil(8 (AB Lambda/delta)^2 ln(4AB/delta))`.
    pub fn classical(alphabets: Alphabets, lambda: f64, epsilon: f64, delta: f64) -> Result<Self> {
        check_plan_args(lambda, epsilon, delta)?;
        let ab = (alphabets.na * alphabets.nb) as f64;
        let trials = ceil_count(8.0 * (ab * lambda / delta).powi(2) * (4.0 * ab / delta).ln())?;
        Ok(Self {
            kind: PlanKind::Classical,
            lambda,
            epsilon,
            delta,
            trials,
            beta: delta / (4.0 * ab),
            pool_size: None,
            alphabets,
            replays: DEFAULT_REPLAYS,
        })
    }

    /// `beta = delta/(8AB)`, `T = ceil(2 (Lambda/beta)^4 ln(16AB/delta))`,
    /// `L = ceil(16 n Lambda^2 / delta^2)` with `n = ceil(log2(nx ny))`.
    pub fn quantum(alphabets: Alphabets, lambda: f64, epsilon: f64, delta: f64) -> Result<Self> {
        check_plan_args(lambda, epsilon, delta)?;
        let ab = (alphabets.na * alphabets.nb) as f64;
        let beta = delta / (8.0 * ab);
        let trials = ceil_count(2.0 * (lambda / beta).powi(4) * (16.0 * ab / delta).ln())?;
        let n = ((alphabets.nx * alphabets.ny) as f64).log2().ceil().max(1.0);
        let pool = ceil_count(16.0 * n * lambda * lambda / (delta * delta))?;
        Ok(Self {
            kind: PlanKind::Quantum,
            lambda,
            epsilon,
            delta,
            trials,
            beta,
            pool_size: Some(pool),
            alphabets,
            replays: DEFAULT_REPLAYS,
        })
    }

    /// `T' = ceil(4 (Lambda/(1-2 eps))^2 ln(1/delta))`.
    pub fn boolean(alphabets: Alphabets, lambda: f64, epsilon: f64, delta: f64) -> Result<Self> {
        check_plan_args(lambda, epsilon, delta)?;
        let margin = 1.0 - 2.0 * epsilon;
        let trials = ceil_count(4.0 * (lambda / margin).powi(2) * (1.0 / delta).ln())?;
        Ok(Self {
            kind: PlanKind::Boolean,
            lambda,
            epsilon,
            delta,
            trials,
            beta: margin,
            pool_size: None,
            alphabets,
            replays: DEFAULT_REPLAYS,
        })
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials.max(1);
        self
    }

    pub fn with_pool_size(mut self, pool: u64) -> Self {
        self.pool_size = Some(pool.max(1));
        self
    }

    pub fn with_replays(mut self, replays: usize) -> Self {
        self.replays = replays.max(1);
        self
    }

    /// Upper bound on the probability that one cell estimate misses by more
    /// than `beta`, from Hoeffding with range `q+ + q-`.
    pub fn per_cell_failure_bound(&self) -> f64 {
        2.0 * hoeffding_bound(self.trials, self.beta, self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub seed: u64,
    pub plan: SmpPlan,
    /// Raw estimates `P(a,b|x,y)`, indexed `[x][y][a*nb + b]`.
    pub estimates: Vec<Vec<Vec<f64>>>,
    /// Referee's output law after renormalization; last entry is "no output".
    pub renormalized: Vec<Vec<Vec<f64>>>,
    /// Frequencies over `replays` referee outputs, same layout.
    pub empirical: Vec<Vec<Vec<f64>>>,
    /// Statistical distance to the target per input pair.
    pub distances: Vec<Vec<f64>>,
    pub empirical_distance: f64,
    /// Largest `|p~ - p+-|` of the sampled pool (quantum runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_deviation: Option<f64>,
    /// Whether the pool met `|p~ - p+-| <= delta / (2 Lambda)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_ok: Option<bool>,
}

/// A sampleable model split into `q+ p+ - q- p-`, each side a mixture.
#[derive(Debug, Clone)]
pub(crate) struct SignedParts {
    pub q_plus: f64,
    pub q_minus: f64,
    pub plus: Mixture,
    pub minus: Mixture,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Mixture {
    pub components: Vec<Component>,
    /// Cumulative probabilities, last entry 1.
    pub cumulative: Vec<f64>,
}

impl Mixture {
    fn new(parts: Vec<(f64, Component)>) -> Self {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(parts.len());
        let mut components = Vec::with_capacity(parts.len());
        for (w, c) in parts {
            acc += w / total;
            cumulative.push(acc);
            components.push(c);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { components, cumulative }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Outcomes of both parties for every input under one shared draw.
    /// Product components use separate private streams for each party.
    pub fn sample(&self, s: Alphabets, rng: &mut ChaCha8Rng, a_out: &mut [usize], b_out: &mut [usize]) {
        let u: f64 = rng.random();
        let k = self.cumulative.partition_point(|&c| c <= u).min(self.components.len() - 1);
        match &self.components[k] {
            Component::Vertex(v) => {
                a_out.copy_from_slice(&v.lambda_a);
                b_out.copy_from_slice(&v.lambda_b);
            }
            Component::Product { pa, pb } => {
                // Alice's and Bob's private coins: independent draws from the
                // same stream, used only by their owner.
                for x in 0..s.nx {
                    a_out[x] = draw(&pa[x], rng.random());
                }
                for y in 0..s.ny {
                    b_out[y] = draw(&pb[y], rng.random());
                }
            }
            Component::Table { .. } => unreachable!("tables are rejected when the parts are built"),
        }
    }

    /// Exact mixture distribution.
    pub fn distribution(&self, s: Alphabets) -> ConditionalDistribution {
        let mut table = vec![0.0; s.table_len()];
        let mut prev = 0.0;
        for (c, &cum) in self.components.iter().zip(&self.cumulative) {
            let w = cum - prev;
            prev = cum;
            for x in 0..s.nx {
                for y in 0..s.ny {
                    for a in 0..s.na {
                        for b in 0..s.nb {
                            table[s.index(a, b, x, y)] += w * c.prob(a, b, x, y);
                        }
                    }
                }
            }
        }
        ConditionalDistribution::from_parts_unchecked(s, table)
    }
}

fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl SignedParts {
    pub fn from_model(model: &AffineModel) -> Result<Self> {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (q, c) in &model.components {
            if *q == 0.0 {
                continue;
            }
            if !c.is_sampleable() {
                return Err(Error::Precondition(
                    "model components must be local (vertices or products) to be sampled without communication".into(),
                ));
            }
            if *q > 0.0 {
                plus.push((*q, c.clone()));
            } else {
                minus.push((-q, c.clone()));
            }
        }
        let (q_plus, q_minus) = model.signed_masses();
        if plus.is_empty() {
            return Err(Error::Precondition("model has no positive part".into()));
        }
        Ok(Self { q_plus, q_minus, plus: Mixture::new(plus), minus: Mixture::new(minus) })
    }

    pub fn mixture(&self, sign: usize) -> &Mixture {
        if sign == 0 {
            &self.plus
        } else {
            &self.minus
        }
    }

    pub fn weight(&self, sign: usize) -> f64 {
        if sign == 0 {
            self.q_plus
        } else {
            self.q_minus
        }
    }
}

/// Domain tags separating the uses of shared randomness.
pub(crate) mod domain {
    pub const TRIALS: u64 = 1;
    pub const POOL: u64 = 2;
    pub const SWAP_TEST: u64 = 3;
    pub const REFEREE: u64 = 4;
    pub const BOOLEAN: u64 = 5;
}

pub(crate) fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 56) ^ index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_bound(10, 0.0, 1.0), 1.0);
        assert!((hoeffding_bound(200, 0.1, 1.0) - (-4.0f64).exp()).abs() < 1e-15);
        assert!((hoeffding_bound(200, 0.1, 1.0) - 0.018316).abs() < 1e-6);
        let b = hoeffding_bound(37, 0.2, 2.0);
        assert!((hoeffding_bound(74, 0.2, 2.0) - b * b).abs() < 1e-15);
    }

    #[test]
    fn renormalize_examples() {
        assert_eq!(renormalize_estimates(&[0.25, 0.75]), vec![0.25, 0.75, 0.0]);
        let r = renormalize_estimates(&[-0.2, 0.5, 0.3]);
        assert_eq!(&r[..3], &[0.0, 0.5, 0.3]);
        assert!((r[3] - 0.2).abs() < 1e-15);
        assert_eq!(renormalize_estimates(&[0.8, 0.8]), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn plan_numbers() {
        let s = Alphabets::binary(2, 2).unwrap();
        let c = SmpPlan::classical(s, 2.0, 0.0, 0.1).unwrap();
        assert_eq!(c.trials, 259_849);
        assert_eq!(c.beta, 0.00625);
        let b = SmpPlan::boolean(s, 2.0, 0.0, 0.05).unwrap();
        assert_eq!(b.trials, 48);
        assert_eq!(SmpPlan::boolean(s, 1.0, 0.0, 0.5).unwrap().trials, 3);
        let q = SmpPlan::quantum(s, 2.0, 0.0, 0.2).unwrap();
        assert_eq!(q.pool_size, Some(3200));
        assert_eq!(q.beta, 0.2 / 32.0);
        let expected = (2.0 * (2.0f64 / (0.2 / 32.0)).powi(4) * (320.0f64).ln()).ceil() as u64;
        assert_eq!(q.trials, expected);
        assert!(SmpPlan::classical(s, 0.5, 0.0, 0.1).is_err());
        assert!(SmpPlan::classical(s, 2.0, 0.0, 0.0).is_err());
    }
}
