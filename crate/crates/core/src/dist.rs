//! Bipartite conditional distributions `p(a,b|x,y)` and the checks that make
//! them physically meaningful (normalization, positivity, non-signaling).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility tolerance for validation of probability tables.
pub const TOL_FEAS: f64 = 1e-9;
/// Entrywise tolerance when an affine model is evaluated against its target.
pub const TOL_RECON: f64 = 1e-7;
/// Default cap on the number of local deterministic vertices enumerated.
pub const DEFAULT_VERTEX_CAP: u128 = 2_000_000;

/// Sizes of the input and outcome alphabets of both parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabets {
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub nb: usize,
}

impl Alphabets {
    pub fn new(nx: usize, ny: usize, na: usize, nb: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || na == 0 || nb == 0 {
            return Err(Error::Shape(format!(
                "all alphabet sizes must be at least 1 (nx={nx}, ny={ny}, na={na}, nb={nb})"
            )));
        }
        Ok(Self { nx, ny, na, nb })
    }

    /// Two inputs and two outcomes per party.
    pub fn binary(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 2, 2)
    }

    pub fn is_binary(&self) -> bool {
        self.na == 2 && self.nb == 2
    }

    /// Number of entries of the full table.
    pub fn table_len(&self) -> usize {
        self.nx * self.ny * self.na * self.nb
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((x * self.ny + y) * self.na + a) * self.nb + b
    }

    /// `na^nx * nb^ny`, saturating at `u128::MAX`.
    pub fn vertex_count(&self) -> u128 {
        let pow = |base: usize, exp: usize| -> u128 {
            let mut acc: u128 = 1;
            for _ in 0..exp {
                acc = acc.saturating_mul(base as u128);
            }
            acc
        };
        pow(self.na, self.nx).saturating_mul(pow(self.nb, self.ny))
    }

    /// Dimension of the affine hull of the non-signaling set.
    pub fn affine_dimension(&self) -> usize {
        self.nx * (self.na - 1) * self.ny * (self.nb - 1) + self.nx * (self.na - 1) + self.ny * (self.nb - 1)
    }
}

/// A table `p(a,b|x,y)`, stored flat in `[x][y][a][b]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    alphabets: Alphabets,
    table: Vec<f64>,
}

impl ConditionalDistribution {
    /// Builds a distribution from a flat `[x][y][a][b]` table. Entries in
    /// `[-TOL_FEAS, 0)` are clipped to zero; larger negative entries are kept
    /// so that [`validate`](Self::validate) can report them.
    pub fn new(alphabets: Alphabets, mut table: Vec<f64>) -> Result<Self> {
        if table.len() != alphabets.table_len() {
            return Err(Error::Shape(format!(
                "table has {} entries, alphabets require {}",
                table.len(),
                alphabets.table_len()
            )));
        }
        if let Some(pos) = table.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite entry at flat index {pos}")));
        }
        for v in table.iter_mut() {
            if *v < 0.0 && *v >= -TOL_FEAS {
                *v = 0.0;
            }
        }
        Ok(Self { alphabets, table })
    }

    /// Builds a table by evaluating `f(a, b, x, y)` on every cell.
    pub fn from_fn(alphabets: Alphabets, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut table = vec![0.0; alphabets.table_len()];
        for x in 0..alphabets.nx {
            for y in 0..alphabets.ny {
                for a in 0..alphabets.na {
                    for b in 0..alphabets.nb {
                        table[alphabets.index(a, b, x, y)] = f(a, b, x, y);
                    }
                }
            }
        }
        Self::new(alphabets, table)
    }

    /// Parses a nested `[x][y][a][b]` array.
    pub fn from_nested(alphabets: Alphabets, nested: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let shape_err = || {
            Error::Shape(format!(
                "nested table does not match nx={}, ny={}, na={}, nb={}",
                alphabets.nx, alphabets.ny, alphabets.na, alphabets.nb
            ))
        };
        if nested.len() != alphabets.nx {
            return Err(shape_err());
        }
        let mut table = Vec::with_capacity(alphabets.table_len());
        for row in nested {
            if row.len() != alphabets.ny {
                return Err(shape_err());
            }
            for block in row {
                if block.len() != alphabets.na {
                    return Err(shape_err());
                }
                for cell in block {
                    if cell.len() != alphabets.nb {
                        return Err(shape_err());
                    }
                    table.extend_from_slice(cell);
                }
            }
        }
        Self::new(alphabets, table)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let s = self.alphabets;
        (0..s.nx)
            .map(|x| {
                (0..s.ny)
                    .map(|y| (0..s.na).map(|a| (0..s.nb).map(|b| self.get(a, b, x, y)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    /// The PR box: `p(a,b|x,y) = 1/2` iff `a xor b = x and y`, for two binary inputs.
    pub fn pr_box() -> Self {
        let s = Alphabets { nx: 2, ny: 2, na: 2, nb: 2 };
        Self::from_fn(s, |a, b, x, y| if (a ^ b) == (x & y) { 0.5 } else { 0.0 }).expect("PR box table is well formed")
    }

    /// Uniform outcome distribution `1/(na*nb)` on every input pair.
    pub fn uniform(alphabets: Alphabets) -> Self {
        let v = 1.0 / (alphabets.na * alphabets.nb) as f64;
        Self { alphabets, table: vec![v; alphabets.table_len()] }
    }

    /// Product distribution `pa(a|x) * pb(b|y)` from row-stochastic marginals
    /// indexed `[x][a]` and `[y][b]`.
    pub fn product(pa: &[Vec<f64>], pb: &[Vec<f64>]) -> Result<Self> {
        let nx = pa.len();
        let ny = pb.len();
        let na = pa.first().map_or(0, Vec::len);
        let nb = pb.first().map_or(0, Vec::len);
        let s = Alphabets::new(nx, ny, na, nb)?;
        if pa.iter().any(|r| r.len() != na) || pb.iter().any(|r| r.len() != nb) {
            return Err(Error::Shape("ragged marginal tables".into()));
        }
        Self::from_fn(s, |a, b, x, y| pa[x][a] * pb[y][b])
    }

    pub fn alphabets(&self) -> Alphabets {
        self.alphabets
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[self.alphabets.index(a, b, x, y)]
    }

    /// Slice of the `na*nb` outcome probabilities for input pair `(x, y)`,
    /// in `[a][b]` order.
    pub fn slice(&self, x: usize, y: usize) -> &[f64] {
        let s = self.alphabets;
        let start = s.index(0, 0, x, y);
        &self.table[start..start + s.na * s.nb]
    }

    /// Alice's marginal `p(a|x)`, averaged over Bob's inputs (which agree for
    /// non-signaling tables).
    pub fn alice_marginal(&self, a: usize, x: usize) -> f64 {
        let s = self.alphabets;
        let total: f64 = (0..s.ny).map(|y| (0..s.nb).map(|b| self.get(a, b, x, y)).sum::<f64>()).sum();
        total / s.ny as f64
    }

    /// Bob's marginal `p(b|y)`, averaged over Alice's inputs.
    pub fn bob_marginal(&self, b: usize, y: usize) -> f64 {
        let s = self.alphabets;
        let total: f64 = (0..s.nx).map(|x| (0..s.na).map(|a| self.get(a, b, x, y)).sum::<f64>()).sum();
        total / s.nx as f64
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Entrywise linear combination `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        self.check_same_alphabets(other)?;
        let table = self.table.iter().zip(&other.table).map(|(p, q)| alpha * p + beta * q).collect();
        Self::new(self.alphabets, table)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_alphabets(other)?;
        Ok(self.table.iter().zip(&other.table).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
    }

    /// Adds `extra_a` / `extra_b` outcomes that never occur.
    pub fn pad_outcomes(&self, extra_a: usize, extra_b: usize) -> Self {
        let s = self.alphabets;
        let t = Alphabets { na: s.na + extra_a, nb: s.nb + extra_b, ..s };
        let mut table = vec![0.0; t.table_len()];
        for x in 0..s.nx {
            for y in 0..s.ny {
                for a in 0..s.na {
                    for b in 0..s.nb {
                        table[t.index(a, b, x, y)] = self.get(a, b, x, y);
                    }
                }
            }
        }
        Self { alphabets: t, table }
    }

    pub(crate) fn check_same_alphabets(&self, other: &Self) -> Result<()> {
        if self.alphabets != other.alphabets {
            return Err(Error::Shape(format!("alphabet mismatch: {:?} vs {:?}", self.alphabets, other.alphabets)));
        }
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(alphabets: Alphabets, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), alphabets.table_len());
        Self { alphabets, table }
    }
}

/// Outcome of [`validate`]: one flag and one worst-case violation per
/// constraint family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub normalized: bool,
    pub nonnegative: bool,
    pub non_signaling: bool,
    pub max_normalization_violation: f64,
    pub max_negativity: f64,
    pub max_signaling_alice: f64,
    pub max_signaling_bob: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.normalized && self.nonnegative && self.non_signaling
    }

    /// Human-readable list of violated constraint families.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.normalized {
            out.push(format!("normalization (max violation {:.3e})", self.max_normalization_violation));
        }
        if !self.nonnegative {
            out.push(format!("nonnegativity (most negative entry {:.3e})", -self.max_negativity));
        }
        if self.max_signaling_alice > TOL_FEAS {
            out.push(format!("non-signaling from Bob to Alice (max violation {:.3e})", self.max_signaling_alice));
        }
        if self.max_signaling_bob > TOL_FEAS {
            out.push(format!("non-signaling from Alice to Bob (max violation {:.3e})", self.max_signaling_bob));
        }
        out
    }

    pub(crate) fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("distribution fails validation: {}", self.violations().join("; "))))
        }
    }
}

pub fn validate(dist: &ConditionalDistribution) -> ValidationReport {
    let s = dist.alphabets;
    let max_negativity = dist.table.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);

    let mut max_norm: f64 = 0.0;
    for x in 0..s.nx {
        for y in 0..s.ny {
            let total: f64 = dist.slice(x, y).iter().sum();
            max_norm = max_norm.max((total - 1.0).abs());
        }
    }

    // Alice's marginal must not depend on y.
    let mut sig_alice: f64 = 0.0;
    for x in 0..s.nx {
        for a in 0..s.na {
            let marg: Vec<f64> = (0..s.ny).map(|y| (0..s.nb).map(|b| dist.get(a, b, x, y)).sum()).collect();
            let (lo, hi) = min_max(&marg);
            sig_alice = sig_alice.max(hi - lo);
        }
    }
    let mut sig_bob: f64 = 0.0;
    for y in 0..s.ny {
        for b in 0..s.nb {
            let marg: Vec<f64> = (0..s.nx).map(|x| (0..s.na).map(|a| dist.get(a, b, x, y)).sum()).collect();
            let (lo, hi) = min_max(&marg);
            sig_bob = sig_bob.max(hi - lo);
        }
    }

    ValidationReport {
        normalized: max_norm <= TOL_FEAS,
        nonnegative: max_negativity <= TOL_FEAS,
        non_signaling: sig_alice.max(sig_bob) <= TOL_FEAS,
        max_normalization_violation: max_norm,
        max_negativity,
        max_signaling_alice: sig_alice,
        max_signaling_bob: sig_bob,
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Total variation distance: the max over input pairs of half the L1
/// distance between the outcome distributions.
pub fn statistical_distance(p: &ConditionalDistribution, q: &ConditionalDistribution) -> Result<f64> {
    p.check_same_alphabets(q)?;
    let s = p.alphabets;
    let mut worst: f64 = 0.0;
    for x in 0..s.nx {
        for y in 0..s.ny {
            let l1: f64 = p.slice(x, y).iter().zip(q.slice(x, y)).map(|(a, b)| (a - b).abs()).sum();
            worst = worst.max(0.5 * l1);
        }
    }
    Ok(worst)
}

/// Mixes a binary distribution with its output-flipped copy, keeping the
/// correlations and zeroing both marginals.
pub fn symmetrize_marginals(dist: &ConditionalDistribution) -> Result<ConditionalDistribution> {
    let s = dist.alphabets;
    if !s.is_binary() {
        return Err(Error::Unsupported(format!(
            "marginal symmetrization needs binary outcomes, got na={}, nb={}",
            s.na, s.nb
        )));
    }
    ConditionalDistribution::from_fn(s, |a, b, x, y| 0.5 * (dist.get(a, b, x, y) + dist.get(1 - a, 1 - b, x, y)))
}
