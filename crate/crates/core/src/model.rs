//! Affine models `p = sum_i q_i p_i` and linear (Bell) functionals on tables.

use serde::{Deserialize, Serialize};

use crate::dist::{Alphabets, ConditionalDistribution, TOL_FEAS};
use crate::error::{Error, Result};
use crate::vertex::{enumerate_local_vertices, LocalVertex};

/// Which set every component of a model is known to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertifiedClass {
    LocalDeterministic,
    Local,
    NpaLevel1,
}

/// One term of an affine model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Component {
    Vertex(LocalVertex),
    /// Independent outputs `pa[x][a] * pb[y][b]`.
    Product {
        pa: Vec<Vec<f64>>,
        pb: Vec<Vec<f64>>,
    },
    /// Arbitrary table; not directly sampleable.
    Table {
        #[serde(skip)]
        dist: Option<ConditionalDistribution>,
        p: Vec<Vec<Vec<Vec<f64>>>>,
    },
}

impl Component {
    pub fn table(dist: ConditionalDistribution) -> Self {
        Component::Table { p: dist.to_nested(), dist: Some(dist) }
    }

    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        match self {
            Component::Vertex(v) => v.prob(a, b, x, y),
            Component::Product { pa, pb } => pa[x][a] * pb[y][b],
            Component::Table { dist: Some(d), .. } => d.get(a, b, x, y),
            Component::Table { dist: None, p } => p[x][y][a][b],
        }
    }

    /// True when the component can be sampled with shared randomness only.
    pub fn is_sampleable(&self) -> bool {
        !matches!(self, Component::Table { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    pub alphabets: Alphabets,
    pub components: Vec<(f64, Component)>,
    pub certified_class: CertifiedClass,
}

impl AffineModel {
    pub fn new(alphabets: Alphabets, components: Vec<(f64, Component)>, certified_class: CertifiedClass) -> Self {
        Self { alphabets, components, certified_class }
    }

    /// `sum_i |q_i|`.
    pub fn mass(&self) -> f64 {
        self.components.iter().map(|(q, _)| q.abs()).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|(q, _)| q).sum()
    }

    /// Sum of positive and of negative weights, as `(q_plus, q_minus)` with
    /// both nonnegative.
    pub fn signed_masses(&self) -> (f64, f64) {
        self.components.iter().fold((0.0, 0.0), |(p, m), (q, _)| if *q >= 0.0 { (p + q, m) } else { (p, m - q) })
    }

    pub fn evaluate(&self) -> ConditionalDistribution {
        let s = self.alphabets;
        let mut table = vec![0.0; s.table_len()];
        for (q, comp) in &self.components {
            if *q == 0.0 {
                continue;
            }
            match comp {
                Component::Vertex(v) => {
                    for x in 0..s.nx {
                        for y in 0..s.ny {
                            table[s.index(v.lambda_a[x], v.lambda_b[y], x, y)] += q;
                        }
                    }
                }
                _ => {
                    for x in 0..s.nx {
                        for y in 0..s.ny {
                            for a in 0..s.na {
                                for b in 0..s.nb {
                                    table[s.index(a, b, x, y)] += q * comp.prob(a, b, x, y);
                                }
                            }
                        }
                    }
                }
            }
        }
        ConditionalDistribution::from_parts_unchecked(s, table)
    }

    /// Largest entrywise deviation of the evaluated model from `target`.
    pub fn reconstruction_residual(&self, target: &ConditionalDistribution) -> Result<f64> {
        self.evaluate().max_abs_diff(target)
    }

    /// Checks `sum q_i = 1` and reconstruction of `target` within `tol`.
    pub fn check(&self, target: &ConditionalDistribution, tol: f64) -> Result<()> {
        let sum_err = (self.weight_sum() - 1.0).abs();
        if sum_err > TOL_FEAS.max(tol) {
            return Err(Error::Mismatch { residual: sum_err, tolerance: TOL_FEAS.max(tol) });
        }
        let residual = self.reconstruction_residual(target)?;
        if residual > tol {
            return Err(Error::Mismatch { residual, tolerance: tol });
        }
        Ok(())
    }

    /// Drops components with `|q| <= threshold`.
    pub fn pruned(mut self, threshold: f64) -> Self {
        self.components.retain(|(q, _)| q.abs() > threshold);
        self
    }
}

/// Class over which a Bell functional's bound is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundClass {
    Local,
    NpaLevel1,
}

/// Linear functional `B(p) = sum B[a,b,x,y] p(a,b|x,y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    pub alphabets: Alphabets,
    /// Flat `[x][y][a][b]` coefficients.
    pub coeffs: Vec<f64>,
    pub claimed_bound_class: BoundClass,
    /// Max of `|B|` over the bound class as reported by the producing solver.
    pub normalization: f64,
}

impl BellFunctional {
    pub fn evaluate(&self, p: &ConditionalDistribution) -> Result<f64> {
        if p.alphabets() != self.alphabets {
            return Err(Error::Shape(format!(
                "functional over {:?} applied to distribution over {:?}",
                self.alphabets,
                p.alphabets()
            )));
        }
        Ok(self.coeffs.iter().zip(p.table()).map(|(c, v)| c * v).sum())
    }

    pub fn evaluate_vertex(&self, v: &LocalVertex) -> f64 {
        let s = self.alphabets;
        let mut acc = 0.0;
        for x in 0..s.nx {
            for y in 0..s.ny {
                acc += self.coeffs[s.index(v.lambda_a[x], v.lambda_b[y], x, y)];
            }
        }
        acc
    }

    /// `max |B(p)|` over all local deterministic vertices, i.e. over the
    /// local polytope.
    pub fn local_bound(&self, cap: u128) -> Result<f64> {
        Ok(enumerate_local_vertices(self.alphabets, cap)?.map(|v| self.evaluate_vertex(&v).abs()).fold(0.0, f64::max))
    }

    /// Correlation-space coefficients `B_xy` for binary alphabets, obtained
    /// by projecting onto the `a*b` pattern: `B_xy = 1/4 sum_ab ab B[a,b,x,y]`.
    pub fn correlation_part(&self) -> Result<Vec<Vec<f64>>> {
        let s = self.alphabets;
        if !s.is_binary() {
            return Err(Error::Unsupported("correlation part needs binary outcomes".into()));
        }
        use crate::correlation::outcome_sign;
        Ok((0..s.nx)
            .map(|x| {
                (0..s.ny)
                    .map(|y| {
                        let mut acc = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                acc += outcome_sign(a) * outcome_sign(b) * self.coeffs[s.index(a, b, x, y)];
                            }
                        }
                        0.25 * acc
                    })
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DEFAULT_VERTEX_CAP;

    #[test]
    fn functional_is_linear() {
        let s = Alphabets::binary(2, 2).unwrap();
        let coeffs: Vec<f64> = (0..16).map(|k| ((k * 7) % 5) as f64 - 2.0).collect();
        let f = BellFunctional { alphabets: s, coeffs, claimed_bound_class: BoundClass::Local, normalization: 1.0 };
        let p = ConditionalDistribution::pr_box();
        let q = ConditionalDistribution::uniform(s);
        let alpha = 0.3;
        let mix = p.combine(alpha, &q, 1.0 - alpha).unwrap();
        let lhs = f.evaluate(&mix).unwrap();
        let rhs = alpha * f.evaluate(&p).unwrap() + (1.0 - alpha) * f.evaluate(&q).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
        let v = LocalVertex::from_index(s, 5);
        assert_eq!(f.evaluate_vertex(&v), f.evaluate(&v.to_distribution(s)).unwrap());
        assert!(f.local_bound(DEFAULT_VERTEX_CAP).unwrap() >= f.evaluate_vertex(&v).abs());
    }

    #[test]
    fn model_evaluation_and_mass() {
        let s = Alphabets::binary(1, 1).unwrap();
        let v0 = LocalVertex { lambda_a: vec![0], lambda_b: vec![0] };
        let v1 = LocalVertex { lambda_a: vec![1], lambda_b: vec![1] };
        let m = AffineModel::new(
            s,
            vec![(1.5, Component::Vertex(v0)), (-0.5, Component::Vertex(v1))],
            CertifiedClass::LocalDeterministic,
        );
        assert_eq!(m.mass(), 2.0);
        assert_eq!(m.weight_sum(), 1.0);
        assert_eq!(m.signed_masses(), (1.5, 0.5));
        assert_eq!(m.evaluate().table(), &[1.5, 0.0, 0.0, -0.5]);
    }
}
