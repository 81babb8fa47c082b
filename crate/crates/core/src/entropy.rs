//! Entropies of the production chain, all in bits.
//!
//! - [`initial_entropy`]: `H(s₀)` of the labour allocation
//! - [`row_conditional_entropy`]: `H(s₁ | s₀ = i)`
//! - [`avg_conditional_entropy`]: `H(s₁ | s₀) = Σ_i w_i H(s₁ | s₀ = i)`
//! - [`entropy_rate`]: `H = −Σ_i Σ_j π*_i p_ij log₂ p_ij`, bounded by
//!   `0 ≤ H ≤ log₂ n`
//!
//! `0 · log₂ 0` is taken as exactly zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::StructureDiagnostics;
use crate::manifest::RunManifest;
use crate::markov::{StationaryDistribution, TransitionMatrix};
use crate::table_io::LabourVector;

/// Probabilities below this are treated as zero in entropy sums.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-300;
/// Allowed deviation of a probability vector's sum from one.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;
/// Slack on the upper bound `log₂ n` for [`normalized_percent`].
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("normalized entropy is undefined for a single sector")]
    UndefinedForSingleSector,
    #[error("entropy {bits} bits is outside [0, log2 n = {max}]")]
    OutOfRange { bits: f64, max: f64 },
    #[error("expected {expected} weights, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T, E = EntropyError> = std::result::Result<T, E>;

/// `−p log₂ p`, exact zero for negligible `p`.
#[inline]
pub fn surprisal_term(p: f64) -> f64 {
    if p < NEGLIGIBLE_PROBABILITY {
        0.0
    } else {
        -p * p.log2()
    }
}

pub fn check_distribution(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(EntropyError::NotADistribution("empty vector".into()));
    }
    if let Some(x) = q.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(EntropyError::NotADistribution(format!("entry {x}")));
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
        return Err(EntropyError::NotADistribution(format!(
            "entries sum to {sum}"
        )));
    }
    Ok(())
}

pub fn entropy_of_distribution(q: &[f64]) -> Result<f64> {
    check_distribution(q)?;
    Ok(q.iter().copied().map(surprisal_term).sum())
}

/// The labour allocation `π_i = ℓ_i / Σ_j ℓ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub pi: Vec<f64>,
}

impl InitialDistribution {
    pub fn from_labour(labour: &LabourVector) -> Self {
        Self {
            pi: labour.distribution(),
        }
    }
}

pub fn initial_entropy(labour: &LabourVector) -> f64 {
    let pi = InitialDistribution::from_labour(labour).pi;
    pi.into_iter().map(surprisal_term).sum()
}

pub fn row_conditional_entropy(p: &TransitionMatrix, i: usize) -> f64 {
    p.row(i).iter().copied().map(surprisal_term).sum()
}

pub fn row_conditional_entropies(p: &TransitionMatrix) -> Vec<f64> {
    (0..p.n()).map(|i| row_conditional_entropy(p, i)).collect()
}

/// `Σ_i w_i H(s₁ | s₀ = i)` for a distribution `w` over the current sector.
pub fn avg_conditional_entropy(p: &TransitionMatrix, w: &[f64]) -> Result<f64> {
    if w.len() != p.n() {
        return Err(EntropyError::DimensionMismatch {
            expected: p.n(),
            found: w.len(),
        });
    }
    check_distribution(w)?;
    Ok(w.iter()
        .enumerate()
        .map(|(i, wi)| wi * row_conditional_entropy(p, i))
        .sum())
}

/// Entropy rate of the stationary chain, evaluated as the full double sum.
pub fn entropy_rate(p: &TransitionMatrix, stationary: &StationaryDistribution) -> f64 {
    entropy_rate_with(p, &stationary.pi_star)
}

pub fn entropy_rate_with(p: &TransitionMatrix, pi_star: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, row) in p.rows().enumerate() {
        for &pij in row {
            if pij >= NEGLIGIBLE_PROBABILITY {
                total -= pi_star[i] * pij * pij.log2();
            }
        }
    }
    // -0.0 for deterministic chains
    total.max(0.0)
}

/// `100 · h / log₂ n`.
pub fn normalized_percent(bits: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(EntropyError::UndefinedForSingleSector);
    }
    let max = (n as f64).log2();
    if !(0.0..=max + BOUND_TOL).contains(&bits) {
        return Err(EntropyError::OutOfRange { bits, max });
    }
    Ok(100.0 * bits / max)
}

/// Relative effective number of output destinations, `2^(h_a − h_b)`.
pub fn compare_systems(h_a: f64, h_b: f64) -> f64 {
    (h_a - h_b).exp2()
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEntropy {
    pub sector: String,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    /// `power`, `direct` or `both`.
    pub method: String,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

/// Everything computed for one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub label: String,
    pub n: usize,
    pub h_rate_bits: f64,
    /// Omitted for a single sector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_initial_bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_cond_avg_bits: Option<f64>,
    pub h_cond_rows: Vec<RowEntropy>,
    pub stationary: Vec<f64>,
    pub structure: StructureDiagnostics,
    #[serde(default)]
    pub dropped_sectors: Vec<String>,
    pub solver: SolverSummary,
    #[serde(default)]
    pub warnings: Vec<String>,
}
