//! Communication lower bounds for bipartite non-signaling distributions.
//!
//! The crate computes the affine-model quantities `nu~` (local components,
//! by linear programming) and `gamma2~` (NPA level-1 components, by
//! semidefinite programming), their dual Bell functionals, XOR game biases,
//! and Monte-Carlo runs of the simultaneous-messages protocols that realise
//! the matching upper bounds.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod coords;
pub mod correlation;
pub mod dist;
pub mod error;
pub mod games;
pub mod io;
pub mod lp;
pub mod model;
pub mod sdp;
pub mod simulate;
pub mod vertex;

pub use correlation::{affine_basis, from_correlation_rep, to_correlation_rep, CorrelationRep};
pub use dist::{
    statistical_distance, symmetrize_marginals, validate, Alphabets, ConditionalDistribution, ValidationReport,
    DEFAULT_VERTEX_CAP, TOL_FEAS, TOL_RECON,
};
pub use error::{Error, Result};
pub use model::{AffineModel, BellFunctional, BoundClass, CertifiedClass, Component};
pub use vertex::{enumerate_local_vertices, LocalVertex};
