//! Correlation representation `(C, M_A, M_B)` of binary-outcome
//! distributions and the affine basis of the non-signaling space.
//!
//! Outcome index 0 is read as `+1`, index 1 as `-1`, everywhere in the crate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{Alphabets, ConditionalDistribution, TOL_FEAS};
use crate::error::{Error, Result};

/// Sign carried by outcome index `i` of a binary alphabet.
#[inline]
pub fn outcome_sign(i: usize) -> f64 {
    if i == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRep {
    /// `C[x][y] = E(a*b | x, y)`.
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    /// `MA[x] = E(a | x)`.
    #[serde(rename = "MA")]
    pub ma: Vec<f64>,
    /// `MB[y] = E(b | y)`.
    #[serde(rename = "MB")]
    pub mb: Vec<f64>,
}

impl CorrelationRep {
    pub fn new(c: Vec<Vec<f64>>, ma: Vec<f64>, mb: Vec<f64>) -> Result<Self> {
        let rep = Self { c, ma, mb };
        rep.check_shape()?;
        Ok(rep)
    }

    /// Correlations with both marginals zero.
    pub fn from_correlations(c: Vec<Vec<f64>>) -> Result<Self> {
        let nx = c.len();
        let ny = c.first().map_or(0, Vec::len);
        Self::new(c, vec![0.0; nx], vec![0.0; ny])
    }

    pub fn nx(&self) -> usize {
        self.c.len()
    }

    pub fn ny(&self) -> usize {
        self.mb.len()
    }

    fn check_shape(&self) -> Result<()> {
        let nx = self.c.len();
        let ny = self.mb.len();
        if nx == 0 || ny == 0 || self.ma.len() != nx || self.c.iter().any(|r| r.len() != ny) {
            return Err(Error::Shape(format!(
                "correlation rep needs C[{nx}][{ny}], MA[{nx}], MB[{ny}]; got MA[{}] and rows {:?}",
                self.ma.len(),
                self.c.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        let finite = self.c.iter().flatten().chain(&self.ma).chain(&self.mb).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Shape("non-finite entry in correlation rep".into()));
        }
        Ok(())
    }

    /// Flattened `(C row-major, u, v)` coordinates.
    pub fn to_vector(&self) -> Vec<f64> {
        self.c.iter().flatten().chain(&self.ma).chain(&self.mb).copied().collect()
    }

    /// `1/4 (1 + ab C + a MA + b MB)` for signs `a, b`.
    #[inline]
    pub fn probability(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        let (sa, sb) = (outcome_sign(a), outcome_sign(b));
        0.25 * (1.0 + sa * sb * self.c[x][y] + sa * self.ma[x] + sb * self.mb[y])
    }

    /// Entrywise scaling of all three parts.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            c: self.c.iter().map(|r| r.iter().map(|v| k * v).collect()).collect(),
            ma: self.ma.iter().map(|v| k * v).collect(),
            mb: self.mb.iter().map(|v| k * v).collect(),
        }
    }
}

pub fn to_correlation_rep(dist: &ConditionalDistribution) -> Result<CorrelationRep> {
    let s = dist.alphabets();
    if !s.is_binary() {
        return Err(Error::Unsupported(format!(
            "correlation representation needs binary outcomes, got na={}, nb={}",
            s.na, s.nb
        )));
    }
    dist.validate().into_result()?;
    let mut c = vec![vec![0.0; s.ny]; s.nx];
    for (x, row) in c.iter_mut().enumerate() {
        for (y, cell) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    acc += outcome_sign(a) * outcome_sign(b) * dist.get(a, b, x, y);
                }
            }
            *cell = acc;
        }
    }
    let ma = (0..s.nx).map(|x| dist.alice_marginal(0, x) - dist.alice_marginal(1, x)).collect();
    let mb = (0..s.ny).map(|y| dist.bob_marginal(0, y) - dist.bob_marginal(1, y)).collect();
    Ok(CorrelationRep { c, ma, mb })
}

pub fn from_correlation_rep(rep: &CorrelationRep) -> Result<ConditionalDistribution> {
    rep.check_shape()?;
    let s = Alphabets::binary(rep.nx(), rep.ny())?;
    let mut table = vec![0.0; s.table_len()];
    for x in 0..s.nx {
        for y in 0..s.ny {
            for a in 0..2 {
                for b in 0..2 {
                    let v = rep.probability(a, b, x, y);
                    if v < -TOL_FEAS {
                        return Err(Error::InfeasibleRepresentation { a, b, x, y, value: v });
                    }
                    table[s.index(a, b, x, y)] = v.max(0.0);
                }
            }
        }
    }
    ConditionalDistribution::new(s, table)
}

/// The `nx*ny + nx + ny` vectors `p_{σπ}`, `p_{σ·}`, `p_{·π}` spanning the
/// `(C, u, v)` space: unit correlation at `(σ, π)`, unit Alice marginal at
/// `σ`, unit Bob marginal at `π`, in that order.
pub fn affine_basis(nx: usize, ny: usize) -> Result<Vec<CorrelationRep>> {
    Alphabets::binary(nx, ny)?;
    let zero = CorrelationRep { c: vec![vec![0.0; ny]; nx], ma: vec![0.0; nx], mb: vec![0.0; ny] };
    let mut out = Vec::with_capacity(nx * ny + nx + ny);
    for sigma in 0..nx {
        for pi in 0..ny {
            let mut v = zero.clone();
            v.c[sigma][pi] = 1.0;
            out.push(v);
        }
    }
    for sigma in 0..nx {
        let mut v = zero.clone();
        v.ma[sigma] = 1.0;
        out.push(v);
    }
    for pi in 0..ny {
        let mut v = zero.clone();
        v.mb[pi] = 1.0;
        out.push(v);
    }
    Ok(out)
}

/// Numerical rank of a set of `(C, u, v)` vectors.
pub fn rank_of(vectors: &[CorrelationRep]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = basis_matrix(vectors);
    m.rank(1e-10)
}

/// Least-squares residual of `target` against the span of `vectors`.
pub fn span_residual(vectors: &[CorrelationRep], target: &CorrelationRep) -> Result<f64> {
    let m = basis_matrix(vectors);
    let t = DVector::from_vec(target.to_vector());
    if t.len() != m.nrows() {
        return Err(Error::Shape("target dimension differs from basis dimension".into()));
    }
    let svd = m.clone().svd(true, true);
    let coef = svd.solve(&t, 1e-12).map_err(|e| Error::Internal(format!("least squares failed: {e}")))?;
    Ok((m * coef - t).norm())
}

fn basis_matrix(vectors: &[CorrelationRep]) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = vectors.iter().map(|v| DVector::from_vec(v.to_vector())).collect();
    DMatrix::from_columns(&cols)
}
