//! Reduced (Collins–Gisin) coordinates of the non-signaling affine space.
//!
//! A non-signaling table is determined by its normalization, Alice's
//! marginals `p(a|x)` and Bob's marginals `p(b|y)` for all but the last
//! outcome, and the joint entries `p(a,b|x,y)` for all but the last outcome
//! of each party. The coordinate vector is laid out as
//!
//! ```text
//! [ 1 | pA(a|x) for x, a<na-1 | pB(b|y) for y, b<nb-1 | p(a,b|x,y) for x, y, a<na-1, b<nb-1 ]
//! ```
//!
//! The LP and SDP formulations use these coordinates so that their equality
//! constraints are linearly independent.

use crate::dist::{Alphabets, ConditionalDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReducedLayout {
    pub alphabets: Alphabets,
}

impl ReducedLayout {
    pub fn new(alphabets: Alphabets) -> Self {
        Self { alphabets }
    }

    /// `1 + nx(na-1) + ny(nb-1) + nx ny (na-1)(nb-1)`.
    pub fn len(&self) -> usize {
        1 + self.alphabets.affine_dimension()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub const NORM: usize = 0;

    #[inline]
    pub fn alice(&self, a: usize, x: usize) -> usize {
        let s = self.alphabets;
        debug_assert!(a + 1 < s.na);
        1 + x * (s.na - 1) + a
    }

    #[inline]
    pub fn bob(&self, b: usize, y: usize) -> usize {
        let s = self.alphabets;
        debug_assert!(b + 1 < s.nb);
        1 + s.nx * (s.na - 1) + y * (s.nb - 1) + b
    }

    #[inline]
    pub fn joint(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let s = self.alphabets;
        debug_assert!(a + 1 < s.na && b + 1 < s.nb);
        1 + s.nx * (s.na - 1) + s.ny * (s.nb - 1) + ((x * s.ny + y) * (s.na - 1) + a) * (s.nb - 1) + b
    }

    /// Coordinates of a (non-signaling) table. Marginals are averaged over
    /// the other party's inputs.
    pub fn reduce(&self, dist: &ConditionalDistribution) -> Vec<f64> {
        let s = self.alphabets;
        let mut out = vec![0.0; self.len()];
        let norm: f64 = dist.table().iter().sum::<f64>() / (s.nx * s.ny) as f64;
        out[Self::NORM] = norm;
        for x in 0..s.nx {
            for a in 0..s.na - 1 {
                out[self.alice(a, x)] = dist.alice_marginal(a, x);
            }
        }
        for y in 0..s.ny {
            for b in 0..s.nb - 1 {
                out[self.bob(b, y)] = dist.bob_marginal(b, y);
            }
        }
        for x in 0..s.nx {
            for y in 0..s.ny {
                for a in 0..s.na - 1 {
                    for b in 0..s.nb - 1 {
                        out[self.joint(a, b, x, y)] = dist.get(a, b, x, y);
                    }
                }
            }
        }
        out
    }

    /// Linear map from coordinates back to a full `[x][y][a][b]` table.
    pub fn expand(&self, coords: &[f64]) -> Vec<f64> {
        let s = self.alphabets;
        let mut table = vec![0.0; s.table_len()];
        for x in 0..s.nx {
            for y in 0..s.ny {
                for a in 0..s.na {
                    for b in 0..s.nb {
                        table[s.index(a, b, x, y)] = self.entry(coords, a, b, x, y);
                    }
                }
            }
        }
        table
    }

    /// Coefficients `w` such that `p(a,b|x,y) = sum_k w[k] * coords[k]` on
    /// the non-signaling space.
    pub fn entry_weights(&self, a: usize, b: usize, x: usize, y: usize) -> Vec<(usize, f64)> {
        let s = self.alphabets;
        let la = a + 1 == s.na;
        let lb = b + 1 == s.nb;
        let mut w = Vec::new();
        match (la, lb) {
            (false, false) => w.push((self.joint(a, b, x, y), 1.0)),
            (false, true) => {
                w.push((self.alice(a, x), 1.0));
                for bb in 0..s.nb - 1 {
                    w.push((self.joint(a, bb, x, y), -1.0));
                }
            }
            (true, false) => {
                w.push((self.bob(b, y), 1.0));
                for aa in 0..s.na - 1 {
                    w.push((self.joint(aa, b, x, y), -1.0));
                }
            }
            (true, true) => {
                w.push((Self::NORM, 1.0));
                for aa in 0..s.na - 1 {
                    w.push((self.alice(aa, x), -1.0));
                }
                for bb in 0..s.nb - 1 {
                    w.push((self.bob(bb, y), -1.0));
                }
                for aa in 0..s.na - 1 {
                    for bb in 0..s.nb - 1 {
                        w.push((self.joint(aa, bb, x, y), 1.0));
                    }
                }
            }
        }
        w
    }

    fn entry(&self, coords: &[f64], a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.entry_weights(a, b, x, y).into_iter().map(|(k, w)| w * coords[k]).sum()
    }

    /// Spreads a functional given on coordinates into full-table coefficients
    /// `B[a,b,x,y]` that agree with it on every non-signaling table.
    pub fn functional_to_table(&self, coeffs: &[f64]) -> Vec<f64> {
        let s = self.alphabets;
        let mut out = vec![0.0; s.table_len()];
        let cells = (s.nx * s.ny) as f64;
        for x in 0..s.nx {
            for y in 0..s.ny {
                for a in 0..s.na {
                    for b in 0..s.nb {
                        let mut v = coeffs[Self::NORM] / cells;
                        if a + 1 < s.na {
                            v += coeffs[self.alice(a, x)] / s.ny as f64;
                        }
                        if b + 1 < s.nb {
                            v += coeffs[self.bob(b, y)] / s.nx as f64;
                        }
                        if a + 1 < s.na && b + 1 < s.nb {
                            v += coeffs[self.joint(a, b, x, y)];
                        }
                        out[s.index(a, b, x, y)] = v;
                    }
                }
            }
        }
        out
    }
}
