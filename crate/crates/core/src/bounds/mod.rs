//! The affine-model quantities, their dual certificates and the bit bounds
//! derived from them.
//!
//! * `nu_tilde`, `nu_tilde_eps`: minimum L1 mass of an affine model over
//!   local deterministic vertices, exactly or within an `eps` ball.
//! * `gamma2_tilde_1`, `gamma2_tilde_1_eps`: the same with NPA level-1
//!   components, a lower bound on the quantum version.
//! * `nu_corr`, `gamma2_corr`: the norms on correlation matrices alone.

mod construct;
mod corr;
mod local;
mod npa;

use serde::{Deserialize, Serialize};

use crate::model::{AffineModel, BellFunctional};
use crate::sdp::{DEFAULT_SDP_DIM_CAP, DEFAULT_SDP_MAX_ITER};
use crate::vertex::vertex_cap_from_env;

pub use construct::{
    gap_check, quantum_to_local_decomposition, scaled_local_reconstruction, symmetric_correlation_model, Decomposer,
    Decomposition, GapReport,
};
pub(crate) use corr::{check_matrix, correlation_functional, unit_vector_bound};
pub use corr::{gamma2_corr, gamma2_corr_with, nu_alpha, nu_corr, nu_corr_with, sign_pairs, SignTerm};
pub use local::{dual_bell, dual_bell_with, nu_tilde, nu_tilde_eps, nu_tilde_eps_with, nu_tilde_with};
pub use npa::{gamma2_tilde_1, gamma2_tilde_1_eps, gamma2_tilde_1_eps_with, gamma2_tilde_1_with, npa_bound};

/// Published rigorous bounds on Grothendieck's constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrothendieckInterval {
    pub lower: f64,
    pub upper: f64,
}

impl GrothendieckInterval {
    pub const LOWER: f64 = 1.67696;
    pub const UPPER: f64 = 1.78222;

    pub const fn get() -> Self {
        Self { lower: Self::LOWER, upper: Self::UPPER }
    }
}

/// Caps and solver limits shared by every bound computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConfig {
    pub vertex_cap: u128,
    pub sdp_dim_cap: usize,
    pub sdp_max_iterations: usize,
}

impl Default for BoundConfig {
    /// Reads the vertex cap from `NONSIG_VERTEX_CAP` when set.
    fn default() -> Self {
        Self {
            vertex_cap: vertex_cap_from_env(),
            sdp_dim_cap: DEFAULT_SDP_DIM_CAP,
            sdp_max_iterations: DEFAULT_SDP_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    NuTilde,
    NuTildeEps,
    Gamma2Tilde1,
    Gamma2Tilde1Eps,
    NuCorr,
    Gamma2Corr,
}

impl Quantity {
    pub fn is_nu_family(&self) -> bool {
        matches!(self, Quantity::NuTilde | Quantity::NuTildeEps | Quantity::NuCorr)
    }

    pub fn is_correlation_only(&self) -> bool {
        matches!(self, Quantity::NuCorr | Quantity::Gamma2Corr)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::NuTilde => "nu_tilde",
            Quantity::NuTildeEps => "nu_tilde_eps",
            Quantity::Gamma2Tilde1 => "gamma2_tilde_1",
            Quantity::Gamma2Tilde1Eps => "gamma2_tilde_1_eps",
            Quantity::NuCorr => "nu_corr",
            Quantity::Gamma2Corr => "gamma2_corr",
        }
    }
}

/// Primal witness of a bound value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certificate {
    /// `p' = sum q_i p_i`, the (possibly perturbed) target.
    Affine { model: AffineModel },
    /// `C = sum r_i u_i v_i^T` over sign vectors.
    SignDecomposition { terms: Vec<SignTerm> },
    /// PSD matrix with `X[x][nx+y] = C[x][y]` and diagonal equal to the value.
    Gram { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Simplex,
    InteriorPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub engine: Engine,
    pub iterations: usize,
    pub rows: usize,
    pub columns: usize,
    /// Largest equality-constraint violation of the primal solution.
    pub primal_residual: f64,
    /// Absolute LP gap or relative SDP gap.
    pub duality_gap: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub min_eigenvalues: Vec<f64>,
    /// Largest `|B|` over the bound class, checked independently.
    pub dual_normalization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub quantity: Quantity,
    pub value: f64,
    pub epsilon: f64,
    pub primal_certificate: Certificate,
    pub dual_certificate: BellFunctional,
    /// `B(p)` for the reported functional.
    pub dual_value: f64,
    pub diagnostics: SolverDiagnostics,
}

impl BoundResult {
    pub fn bits(&self) -> BitsReport {
        lower_bound_bits(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_pub: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_ent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_ent_corr: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Communication lower bounds implied by a bound value:
/// `log2(v) - 1` classical bits for the `nu` family, `log2(v)/2 - 1`
/// entangled qubits for the `gamma2` family, and `log2(v)` qubits for the
/// correlation-only `gamma2_corr`. Negative values are clamped to zero.
pub fn lower_bound_bits(result: &BoundResult) -> BitsReport {
    let v = result.value;
    let mut notes = Vec::new();
    let mut clamp = |name: &str, x: f64| {
        if x < 0.0 {
            notes.push(format!("{name} = {x:.6} clamped to 0"));
            0.0
        } else {
            x
        }
    };
    let l = v.max(f64::MIN_POSITIVE).log2();
    let mut out = BitsReport { r_pub: None, q_ent: None, q_ent_corr: None, notes: Vec::new() };
    if result.quantity.is_nu_family() {
        out.r_pub = Some(clamp("r_pub", l - 1.0));
    } else {
        out.q_ent = Some(clamp("q_ent", 0.5 * l - 1.0));
        if result.quantity == Quantity::Gamma2Corr {
            out.q_ent_corr = Some(clamp("q_ent_corr", l));
        }
    }
    out.notes = notes;
    out
}
