//! Local deterministic strategies, the extreme points of the local polytope.

use serde::{Deserialize, Serialize};

use crate::correlation::outcome_sign;
use crate::dist::{Alphabets, ConditionalDistribution, DEFAULT_VERTEX_CAP};
use crate::error::{Error, Result};

/// A pair of response functions `lambda_a: X -> A`, `lambda_b: Y -> B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalVertex {
    pub lambda_a: Vec<usize>,
    pub lambda_b: Vec<usize>,
}

impl LocalVertex {
    /// The vertex with enumeration index `index` (see [`enumerate_local_vertices`]).
    pub fn from_index(alphabets: Alphabets, index: u128) -> Self {
        let alice_count = pow_u128(alphabets.na, alphabets.nx);
        let mut ka = index % alice_count;
        let mut kb = index / alice_count;
        let lambda_a = (0..alphabets.nx)
            .map(|_| {
                let d = (ka % alphabets.na as u128) as usize;
                ka /= alphabets.na as u128;
                d
            })
            .collect();
        let lambda_b = (0..alphabets.ny)
            .map(|_| {
                let d = (kb % alphabets.nb as u128) as usize;
                kb /= alphabets.nb as u128;
                d
            })
            .collect();
        Self { lambda_a, lambda_b }
    }

    #[inline]
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        if self.lambda_a[x] == a && self.lambda_b[y] == b {
            1.0
        } else {
            0.0
        }
    }

    pub fn to_distribution(&self, alphabets: Alphabets) -> ConditionalDistribution {
        let mut table = vec![0.0; alphabets.table_len()];
        for x in 0..alphabets.nx {
            for y in 0..alphabets.ny {
                table[alphabets.index(self.lambda_a[x], self.lambda_b[y], x, y)] = 1.0;
            }
        }
        ConditionalDistribution::from_parts_unchecked(alphabets, table)
    }

    /// Sign vectors `(u, v)` of a binary vertex under the `0 -> +1` convention.
    pub fn signs(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.lambda_a.iter().map(|&a| outcome_sign(a)).collect(),
            self.lambda_b.iter().map(|&b| outcome_sign(b)).collect(),
        )
    }
}

fn pow_u128(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

/// Cap on vertex enumeration, overridable through `NONSIG_VERTEX_CAP`.
pub fn vertex_cap_from_env() -> u128 {
    std::env::var("NONSIG_VERTEX_CAP").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_VERTEX_CAP)
}

pub fn check_vertex_cap(alphabets: Alphabets, cap: u128) -> Result<u128> {
    let count = alphabets.vertex_count();
    if count > cap {
        return Err(Error::ResourceLimit {
            what: format!(
                "local vertex enumeration for nx={}, ny={}, na={}, nb={}",
                alphabets.nx, alphabets.ny, alphabets.na, alphabets.nb
            ),
            count,
            cap,
        });
    }
    Ok(count)
}

/// All `na^nx * nb^ny` local deterministic vertices in lexicographic order:
/// Alice's function varies fastest, and within each function the value at
/// input 0 is the least significant digit.
pub fn enumerate_local_vertices(alphabets: Alphabets, cap: u128) -> Result<impl ExactSizeIterator<Item = LocalVertex>> {
    let count = check_vertex_cap(alphabets, cap)?;
    Ok((0..count as usize).map(move |k| LocalVertex::from_index(alphabets, k as u128)))
}
