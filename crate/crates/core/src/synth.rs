//! Random sparse economies for the scaling study.
//!
//! With every sector linked to exactly `d` others by equal weights, every
//! row of the transition matrix has entropy `log₂ d`, and so does the
//! stationary average. Taking `d = round(log₂ n)` makes the entropy grow
//! like `log₂ log₂ n`.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::entropy_rate;
use crate::graph::{build_graph, strongly_connected_components};
use crate::markov::{build_transitions, solve_stationary, MarkovError, Solver};
use crate::seed::{derive_seed, rng_from_seed};
use crate::table_io::FlowMatrix;

pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no strongly connected economy found in {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphModel {
    /// Each sector delivers to exactly `d` distinct sectors.
    FixedOutdegree(usize),
    /// Each edge present independently with probability `q`.
    ErdosRenyi(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    Equal,
    /// Each row's weights drawn from a symmetric Dirichlet(alpha).
    Dirichlet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub model: GraphModel,
    pub weights: Weights,
    pub self_loops: bool,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SynthError::InvalidConfig("n must be positive".into()));
        }
        let targets = self.targets();
        match self.model {
            GraphModel::FixedOutdegree(d) if d == 0 || d > targets => {
                return Err(SynthError::InvalidConfig(format!(
                    "out-degree {d} must lie in 1..={targets}"
                )))
            }
            GraphModel::ErdosRenyi(q) if !(q > 0.0 && q <= 1.0) => {
                return Err(SynthError::InvalidConfig(format!(
                    "edge probability {q} must lie in (0, 1]"
                )))
            }
            _ => {}
        }
        if let Weights::Dirichlet(alpha) = self.weights {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(SynthError::InvalidConfig(format!(
                    "Dirichlet alpha {alpha} must be positive"
                )));
            }
        }
        Ok(())
    }

    fn targets(&self) -> usize {
        if self.self_loops {
            self.n
        } else {
            self.n - 1
        }
    }
}

fn sample_successors(cfg: &SynthConfig, i: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    // candidate index c maps to sector c, skipping i when loops are excluded
    let to_sector = |c: usize| if !cfg.self_loops && c >= i { c + 1 } else { c };
    let mut out: Vec<usize> = match cfg.model {
        GraphModel::FixedOutdegree(d) => sample(rng, cfg.targets(), d)
            .into_iter()
            .map(to_sector)
            .collect(),
        GraphModel::ErdosRenyi(q) => (0..cfg.targets())
            .filter(|_| rng.gen_bool(q))
            .map(to_sector)
            .collect(),
    };
    out.sort_unstable();
    out
}

fn row_weights(weights: Weights, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match weights {
        Weights::Equal => vec![1.0; k],
        Weights::Dirichlet(alpha) => {
            let gamma = Gamma::new(alpha, 1.0).expect("validated alpha");
            // underflow to zero would delete an edge
            (0..k)
                .map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE))
                .collect()
        }
    }
}

/// Samples a strongly connected economy, resampling up to
/// [`MAX_ATTEMPTS`] times. Sector labels are `S1..Sn`.
pub fn generate_economy(cfg: &SynthConfig) -> Result<FlowMatrix> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = rng_from_seed(cfg.seed);
    for _ in 0..MAX_ATTEMPTS {
        let successors: Vec<Vec<usize>> = (0..n)
            .map(|i| sample_successors(cfg, i, &mut rng))
            .collect();
        let graph = crate::graph::SectorGraph::from_adjacency(successors.clone());
        let components = strongly_connected_components(&graph);
        if components.len() != 1 || successors.iter().any(Vec::is_empty) {
            continue;
        }
        let mut rows = vec![vec![0.0; n]; n];
        for (i, out) in successors.iter().enumerate() {
            let w = row_weights(cfg.weights, out.len(), &mut rng);
            for (&j, wj) in out.iter().zip(w) {
                rows[i][j] = wj;
            }
        }
        let flows = FlowMatrix::from_rows(rows).expect("generated flows are valid");
        debug_assert_eq!(strongly_connected_components(&build_graph(&flows)).len(), 1);
        return Ok(flows);
    }
    Err(SynthError::GenerationFailed {
        attempts: MAX_ATTEMPTS,
    })
}

/// Entropy rate of a flow table with the direct stationary solver.
pub fn economy_entropy(flows: &FlowMatrix) -> Result<f64> {
    let p = build_transitions(flows)?;
    let s = solve_stationary(&p, Solver::Direct)?;
    Ok(entropy_rate(&p, &s.distribution))
}

/// `round(log₂ n)`, at least one.
pub fn scaling_outdegree(n: usize) -> usize {
    ((n as f64).log2().round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub d: usize,
    pub mean_bits: f64,
    pub sd_bits: f64,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions {
    pub weights: Weights,
    pub self_loops: bool,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            weights: Weights::Equal,
            self_loops: true,
        }
    }
}

/// For each `n`, `replicates` fixed-out-degree economies with
/// `d = round(log₂ n)`; mean and sample standard deviation of their entropy
/// rates. Replicate `r` of size `n` uses seed `derive_seed(seed, n·2³² + r)`.
pub fn scaling_experiment(
    n_values: &[usize],
    replicates: usize,
    seed: u64,
    options: ScalingOptions,
) -> Result<Vec<ScalingRow>> {
    if replicates == 0 {
        return Err(SynthError::InvalidConfig(
            "replicates must be at least 1".into(),
        ));
    }
    if n_values.is_empty() || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SynthError::InvalidConfig(
            "n values must be non-empty and ascending".into(),
        ));
    }
    n_values
        .iter()
        .map(|&n| {
            let d = scaling_outdegree(n).min(if options.self_loops {
                n
            } else {
                n.saturating_sub(1)
            });
            let entropies = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let cfg = SynthConfig {
                        n,
                        model: GraphModel::FixedOutdegree(d),
                        weights: options.weights,
                        self_loops: options.self_loops,
                        seed: derive_seed(seed, ((n as u64) << 32) | r as u64),
                    };
                    economy_entropy(&generate_economy(&cfg)?)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = entropies.iter().sum::<f64>() / replicates as f64;
            let sd = if replicates > 1 {
                (entropies.iter().map(|h| (h - mean).powi(2)).sum::<f64>()
                    / (replicates - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            Ok(ScalingRow {
                n,
                d,
                mean_bits: mean,
                sd_bits: sd,
                replicates,
                seed,
            })
        })
        .collect()
}

/// CSV `n,d,mean_bits,sd_bits,replicates,seed`.
pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("n,d,mean_bits,sd_bits,replicates,seed\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:?},{:?},{},{}\n",
            r.n, r.d, r.mean_bits, r.sd_bits, r.replicates, r.seed
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, model: GraphModel) -> SynthConfig {
        SynthConfig {
            n,
            model,
            weights: Weights::Equal,
            self_loops: true,
            seed: 1,
        }
    }

    #[test]
    fn complete_graph_is_maximal() {
        let f = generate_economy(&cfg(6, GraphModel::FixedOutdegree(6))).unwrap();
        assert!(f.rows().all(|r| r.iter().all(|&x| x == 1.0)));
        assert!((economy_entropy(&f).unwrap() - 6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn outdegree_one_yields_a_single_cycle() {
        let f = generate_economy(&cfg(4, GraphModel::FixedOutdegree(1))).unwrap();
        let g = build_graph(&f);
        assert_eq!(g.edge_count(), 4);
        assert!(g.edges().all(|(i, j)| i != j));
        assert_eq!(economy_entropy(&f).unwrap(), 0.0);
    }

    #[test]
    fn outdegree_one_fails_when_cycles_are_too_rare() {
        // a random functional graph on 40 nodes is almost never one 40-cycle
        let err = generate_economy(&cfg(40, GraphModel::FixedOutdegree(1))).unwrap_err();
        assert!(matches!(
            err,
            SynthError::GenerationFailed {
                attempts: MAX_ATTEMPTS
            }
        ));
    }

    #[test]
    fn fixed_outdegree_eight_on_369_sectors_is_three_bits() {
        let f = generate_economy(&cfg(369, GraphModel::FixedOutdegree(8))).unwrap();
        assert!(f
            .rows()
            .all(|r| r.iter().filter(|&&x| x > 0.0).count() == 8));
        assert!((economy_entropy(&f).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_self_loops_when_excluded() {
        let mut c = cfg(30, GraphModel::FixedOutdegree(5));
        c.self_loops = false;
        let f = generate_economy(&c).unwrap();
        assert!((0..30).all(|i| f.get(i, i) == 0.0));
    }

    #[test]
    fn erdos_renyi_is_strongly_connected() {
        let f = generate_economy(&cfg(50, GraphModel::ErdosRenyi(0.1))).unwrap();
        assert_eq!(strongly_connected_components(&build_graph(&f)).len(), 1);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(generate_economy(&cfg(5, GraphModel::FixedOutdegree(0))).is_err());
        assert!(generate_economy(&cfg(5, GraphModel::FixedOutdegree(6))).is_err());
        assert!(generate_economy(&cfg(5, GraphModel::ErdosRenyi(0.0))).is_err());
        let mut c = cfg(5, GraphModel::FixedOutdegree(5));
        c.self_loops = false;
        assert!(generate_economy(&c).is_err());
        c.self_loops = true;
        c.weights = Weights::Dirichlet(-1.0);
        assert!(generate_economy(&c).is_err());
        assert!(scaling_experiment(&[64, 16], 1, 0, ScalingOptions::default()).is_err());
        assert!(scaling_experiment(&[16], 0, 0, ScalingOptions::default()).is_err());
    }

    #[test]
    fn scaling_rows_follow_log_outdegree() {
        let rows = scaling_experiment(&[16, 64, 256], 2, 9, ScalingOptions::default()).unwrap();
        let d: Vec<usize> = rows.iter().map(|r| r.d).collect();
        assert_eq!(d, vec![4, 6, 8]);
        for (r, expect) in rows.iter().zip([2.0, 6f64.log2(), 3.0]) {
            assert!((r.mean_bits - expect).abs() < 1e-12, "{r:?}");
            assert!(r.sd_bits < 1e-12);
        }
        assert!(scaling_csv(&rows).starts_with("n,d,mean_bits,sd_bits,replicates,seed\n16,4,"));
    }

    #[test]
    fn generation_is_deterministic() {
        let c = SynthConfig {
            weights: Weights::Dirichlet(1.0),
            ..cfg(20, GraphModel::FixedOutdegree(3))
        };
        assert_eq!(generate_economy(&c).unwrap(), generate_economy(&c).unwrap());
    }
}
