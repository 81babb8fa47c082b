//! Independent checks of the analytic entropies.
//!
//! - [`simulate_path`] / [`empirical_entropy_rate`]: Monte Carlo runs of the
//!   chain `s₀ → s₁ → ⋯ → s_k`; the mean surprisal per step estimates the
//!   entropy rate.
//! - [`exact_conditional_entropy_k`]: `H(s_k | s_{k−1}, …, s₀)` by full
//!   enumeration of all length-`k+1` sector sequences.
//! - [`convergence_trace`]: `H(s_k | s_{k−1})` along the evolving marginal.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{check_distribution, row_conditional_entropy, surprisal_term, EntropyError};
use crate::graph::{analyze_structure, SectorGraph};
use crate::markov::{stationary_direct, MarkovError, TransitionMatrix};
use crate::seed::rng_from_seed;

/// Enumeration limits for [`exact_conditional_entropy_k`].
pub const MAX_ENUM_SECTORS: usize = 8;
pub const MAX_ENUM_ORDER: usize = 6;
pub const MIN_EMPIRICAL_STEPS: usize = 10_000;
/// Batches used for the batch-means standard error.
pub const BATCHES: usize = 100;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration of {n}^{} sequences is too large (limits n <= {MAX_ENUM_SECTORS}, k <= {MAX_ENUM_ORDER})", .k + 1)]
    TooLarge { n: usize, k: usize },
    #[error("chain has period {period}; the marginal does not converge")]
    PeriodicChain { period: usize },
    #[error("at least {MIN_EMPIRICAL_STEPS} steps are required, got {0}")]
    TooFewSteps(usize),
    #[error("start distribution: {0}")]
    InvalidStart(#[from] EntropyError),
    #[error("start distribution has {found} entries, chain has {expected} sectors")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

fn check_start(p: &TransitionMatrix, s0_dist: &[f64]) -> Result<()> {
    if s0_dist.len() != p.n() {
        return Err(OracleError::DimensionMismatch {
            expected: p.n(),
            found: s0_dist.len(),
        });
    }
    check_distribution(s0_dist)?;
    Ok(())
}

/// Inverse-CDF sampler over the rows of a transition matrix.
struct RowSampler {
    n: usize,
    cumulative: Vec<f64>,
}

impl RowSampler {
    fn new(p: &TransitionMatrix) -> Self {
        let n = p.n();
        let mut cumulative = Vec::with_capacity(n * n);
        for row in p.rows() {
            cumulative.extend(cumulative_of(row));
        }
        Self { n, cumulative }
    }

    fn next(&self, state: usize, u: f64) -> usize {
        pick(&self.cumulative[state * self.n..(state + 1) * self.n], u)
    }
}

/// Running sums with the tail pinned at one, so `u ∈ [0, 1)` always lands
/// on an entry of positive probability.
fn cumulative_of(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = weights.iter().rposition(|&w| w > 0.0) {
        for x in &mut c[last..] {
            *x = 1.0;
        }
    }
    c
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.partition_point(|&c| c <= u)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledPath {
    pub states: Vec<usize>,
    pub seed: u64,
}

/// Draws `s₀` from `s0_dist` and then `k` transitions. Deterministic in
/// `seed`.
pub fn simulate_path(
    p: &TransitionMatrix,
    s0_dist: &[f64],
    k: usize,
    seed: u64,
) -> Result<SampledPath> {
    check_start(p, s0_dist)?;
    let mut rng = rng_from_seed(seed);
    let sampler = RowSampler::new(p);
    let mut state = pick(&cumulative_of(s0_dist), rng.gen::<f64>());
    let mut states = Vec::with_capacity(k + 1);
    states.push(state);
    for _ in 0..k {
        state = sampler.next(state, rng.gen::<f64>());
        states.push(state);
    }
    Ok(SampledPath { states, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub mean_bits: f64,
    /// Batch-means standard error of the mean.
    pub std_error: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Period of the chain. The mean is still a valid estimate when this
    /// exceeds one, but the caller should surface it.
    pub period: usize,
}

impl EmpiricalEstimate {
    pub fn periodic(&self) -> bool {
        self.period > 1
    }
}

/// Mean of `−log₂ p_{s_t s_{t+1}}` over one long path started uniformly,
/// after discarding the first 1% of steps.
pub fn empirical_entropy_rate(
    p: &TransitionMatrix,
    steps: usize,
    seed: u64,
) -> Result<EmpiricalEstimate> {
    if steps < MIN_EMPIRICAL_STEPS {
        return Err(OracleError::TooFewSteps(steps));
    }
    let n = p.n();
    let period = analyze_structure(&SectorGraph::from_transitions(p)).period;
    let surprisal: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let pij = p.get(i, j);
            if pij > 0.0 {
                -pij.log2()
            } else {
                0.0
            }
        })
        .collect();

    let mut rng = rng_from_seed(seed);
    let sampler = RowSampler::new(p);
    let mut state = rng.gen_range(0..n);
    let burn_in = steps / 100;
    for _ in 0..burn_in {
        state = sampler.next(state, rng.gen::<f64>());
    }

    let kept = steps - burn_in;
    let batch_len = kept / BATCHES;
    let mut batch_means = Vec::with_capacity(BATCHES);
    let mut batch_sum = 0.0;
    let mut in_batch = 0;
    let mut total = 0.0;
    for _ in 0..kept {
        let next = sampler.next(state, rng.gen::<f64>());
        let s = surprisal[state * n + next];
        total += s;
        if batch_means.len() < BATCHES {
            batch_sum += s;
            in_batch += 1;
            if in_batch == batch_len {
                batch_means.push(batch_sum / batch_len as f64);
                batch_sum = 0.0;
                in_batch = 0;
            }
        }
        state = next;
    }
    let mean_bits = total / kept as f64;
    let b = batch_means.len() as f64;
    let batch_mean = batch_means.iter().sum::<f64>() / b;
    let var = batch_means
        .iter()
        .map(|m| (m - batch_mean).powi(2))
        .sum::<f64>()
        / (b - 1.0);
    Ok(EmpiricalEstimate {
        mean_bits,
        std_error: (var / b).sqrt(),
        steps,
        burn_in,
        seed,
        period,
    })
}

/// Distribution of `s_k` for `s₀ ~ s0_dist`: `s0_distᵀ Pᵏ`.
pub fn marginal_at(p: &TransitionMatrix, s0_dist: &[f64], k: usize) -> Vec<f64> {
    let mut v = s0_dist.to_vec();
    for _ in 0..k {
        v = p.step(&v);
    }
    v
}

/// Exact `H(s_k | s_{k−1}, …, s₀)` by enumerating every sequence
/// `(s₀, …, s_k)` and its joint probability, then summing
/// `−P(s₀…s_k) log₂ [P(s₀…s_k) / P(s₀…s_{k−1})]`.
///
/// Order `k = 0` gives `H(s₀)`.
pub fn exact_conditional_entropy_k(p: &TransitionMatrix, s0_dist: &[f64], k: usize) -> Result<f64> {
    let n = p.n();
    if n > MAX_ENUM_SECTORS || k > MAX_ENUM_ORDER {
        return Err(OracleError::TooLarge { n, k });
    }
    check_start(p, s0_dist)?;
    if k == 0 {
        return Ok(s0_dist.iter().copied().map(surprisal_term).sum());
    }
    // joint[idx] for sequences of the current length, idx in base n with the
    // oldest state most significant
    let mut joint = s0_dist.to_vec();
    for _ in 1..k {
        joint = extend(&joint, p);
    }
    let prefix = joint;
    let full = extend(&prefix, p);
    let mut h = 0.0;
    for (q, &pp) in prefix.iter().enumerate() {
        if pp <= 0.0 {
            continue;
        }
        for &pf in &full[q * n..(q + 1) * n] {
            if pf > 0.0 {
                h -= pf * (pf / pp).log2();
            }
        }
    }
    Ok(h.max(0.0))
}

fn extend(joint: &[f64], p: &TransitionMatrix) -> Vec<f64> {
    let n = p.n();
    let mut out = Vec::with_capacity(joint.len() * n);
    for (idx, &pr) in joint.iter().enumerate() {
        let last = idx % n;
        out.extend(p.row(last).iter().map(|&pij| pr * pij));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub k_values: Vec<usize>,
    pub h_cond_at_k: Vec<f64>,
    pub h_rate: f64,
}

impl ConvergenceTrace {
    /// CSV `k,h_cond,h_rate`, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,h_cond,h_rate\n");
        for (k, h) in self.k_values.iter().zip(&self.h_cond_at_k) {
            let _ = writeln!(out, "{k},{h:?},{:?}", self.h_rate);
        }
        out
    }
}

/// `H(s_k | s_{k−1}) = Σ_i μ_{k−1,i} H(s₁ | s₀ = i)` with
/// `μ_{k−1} = s0_distᵀ P^{k−1}`, for `k = 1..=k_max`, alongside the
/// analytic entropy rate.
pub fn convergence_trace(
    p: &TransitionMatrix,
    s0_dist: &[f64],
    k_max: usize,
) -> Result<ConvergenceTrace> {
    check_start(p, s0_dist)?;
    let period = analyze_structure(&SectorGraph::from_transitions(p)).period;
    if period > 1 {
        return Err(OracleError::PeriodicChain { period });
    }
    let stationary = stationary_direct(p)?;
    let h_rate = crate::entropy::entropy_rate(p, &stationary);
    let rows: Vec<f64> = (0..p.n()).map(|i| row_conditional_entropy(p, i)).collect();
    let mut marginal = s0_dist.to_vec();
    let mut k_values = Vec::with_capacity(k_max);
    let mut h_cond_at_k = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k > 1 {
            marginal = p.step(&marginal);
        }
        k_values.push(k);
        h_cond_at_k.push(marginal.iter().zip(&rows).map(|(m, h)| m * h).sum());
    }
    Ok(ConvergenceTrace {
        k_values,
        h_cond_at_k,
        h_rate,
    })
}
