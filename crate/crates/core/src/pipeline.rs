//! Flow table → basic core → transition matrix → entropy report.

use thiserror::Error;

use crate::entropy::{
    avg_conditional_entropy, entropy_rate, normalized_percent, row_conditional_entropies,
    surprisal_term, EntropyError, EntropyReport, RowEntropy, SolverSummary, BOUND_TOL,
};
use crate::graph::{analyze_structure, build_graph, restrict_to_basic, StructureDiagnostics};
use crate::markov::{
    build_transitions, close_with_households, solve_stationary, MarkovError, Solver,
    TransitionMatrix,
};
use crate::table_io::{FlowMatrix, LabourVector, TableError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

impl PipelineError {
    /// Input problems (unreadable, malformed or inconsistent files and
    /// options) as opposed to structural or numerical failures of the chain.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Self::Table(_)
                | Self::InvalidOption(_)
                | Self::Markov(MarkovError::DimensionMismatch { .. })
                | Self::Markov(MarkovError::InvalidWage)
                | Self::Markov(MarkovError::Table(_))
        )
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Default)]
pub struct PrepareOptions {
    pub drop_diagonal: bool,
    /// Zero out flows strictly below this value before building the graph.
    pub prune_below: Option<f64>,
    /// Wage bundle for the household closure; requires a labour vector.
    pub wage: Option<Vec<f64>>,
}

/// The chain on the basic core of a table.
#[derive(Debug, Clone)]
pub struct PreparedChain {
    pub flows: FlowMatrix,
    pub transitions: TransitionMatrix,
    /// Diagnostics of the table before restriction.
    pub structure: StructureDiagnostics,
    pub dropped_sectors: Vec<String>,
    /// Labour restricted to the core (zero for the household sector), if
    /// any labour was given and some of it falls on the core.
    pub labour: Option<LabourVector>,
    pub warnings: Vec<String>,
}

/// Diagnostics of the (optionally pruned / diagonal-free) table, plus the
/// warnings the analysis would raise.
pub fn inspect(
    flows: &FlowMatrix,
    options: &PrepareOptions,
) -> Result<(StructureDiagnostics, Vec<String>)> {
    let flows = adjust(flows, options)?;
    let structure = analyze_structure(&build_graph(&flows));
    let warnings = structure_warnings(&flows, &structure);
    Ok((structure, warnings))
}

fn adjust(flows: &FlowMatrix, options: &PrepareOptions) -> Result<FlowMatrix> {
    let mut flows = flows.clone();
    if options.drop_diagonal {
        flows = flows.without_diagonal();
    }
    if let Some(threshold) = options.prune_below {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(PipelineError::InvalidOption(format!(
                "prune threshold {threshold} must be finite and nonnegative"
            )));
        }
        flows = flows.pruned_below(threshold);
    }
    Ok(flows)
}

fn structure_warnings(flows: &FlowMatrix, s: &StructureDiagnostics) -> Vec<String> {
    let mut warnings = Vec::new();
    if !s.strongly_connected {
        let names: Vec<&str> = s
            .dropped
            .iter()
            .map(|&i| flows.labels()[i].name.as_str())
            .collect();
        warnings.push(format!(
            "table is reducible ({} strongly connected components); restricting to the largest ({} sectors), dropping: {}",
            s.component_count,
            s.largest_scc.len(),
            names.join(", ")
        ));
    }
    if s.period > 1 {
        warnings.push(format!(
            "basic core is periodic (period {}); stationary distribution computed by window averaging",
            s.period
        ));
    }
    warnings
}

/// Applies the table options and household closure, restricts to the
/// largest strongly connected component, and builds the transition matrix.
pub fn prepare_chain(
    flows: &FlowMatrix,
    labour: Option<&LabourVector>,
    options: &PrepareOptions,
) -> Result<PreparedChain> {
    let mut flows = adjust(flows, options)?;
    if let Some(l) = labour {
        if l.len() != flows.n() {
            return Err(TableError::LengthMismatch {
                expected: flows.n(),
                found: l.len(),
            }
            .into());
        }
    }
    let mut labour_values = labour.map(|l| l.values().to_vec());
    if let Some(wage) = &options.wage {
        let l = labour.ok_or_else(|| {
            PipelineError::InvalidOption("household closure needs a labour vector".into())
        })?;
        flows = close_with_households(&flows, l, wage)?;
        if let Some(v) = labour_values.as_mut() {
            v.push(0.0);
        }
    }

    let structure = analyze_structure(&build_graph(&flows));
    let mut warnings = structure_warnings(&flows, &structure);
    let dropped_sectors = structure
        .dropped
        .iter()
        .map(|&i| flows.labels()[i].name.clone())
        .collect();
    let core = restrict_to_basic(&flows, &structure);
    let transitions = build_transitions(&core)?;

    let labour = match labour_values {
        Some(v) => {
            let kept: Vec<f64> = if structure.strongly_connected {
                v
            } else {
                structure.largest_scc.iter().map(|&i| v[i]).collect()
            };
            match LabourVector::new(kept) {
                Ok(l) => Some(l),
                Err(_) => {
                    warnings
                        .push("labour vector has no mass on the basic core; H(s0) omitted".into());
                    None
                }
            }
        }
        None => None,
    };

    Ok(PreparedChain {
        flows: core,
        transitions,
        structure,
        dropped_sectors,
        labour,
        warnings,
    })
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub prepare: PrepareOptions,
    pub solver: Solver,
    pub label: String,
}

pub fn analyze_table(
    flows: &FlowMatrix,
    labour: Option<&LabourVector>,
    options: &AnalysisOptions,
) -> Result<EntropyReport> {
    let chain = prepare_chain(flows, labour, &options.prepare)?;
    let p = &chain.transitions;
    let n = p.n();
    let solution = solve_stationary(p, options.solver)?;
    let h_rate = entropy_rate(p, &solution.distribution);
    let max = (n as f64).log2();
    if h_rate > max + BOUND_TOL {
        return Err(EntropyError::OutOfRange { bits: h_rate, max }.into());
    }
    let h_percent = if n >= 2 {
        Some(normalized_percent(h_rate, n)?)
    } else {
        None
    };

    let h_cond_rows = row_conditional_entropies(p)
        .into_iter()
        .zip(p.labels())
        .map(|(bits, sector)| RowEntropy {
            sector: sector.clone(),
            bits,
        })
        .collect();

    let (h_initial_bits, h_cond_avg_bits) = match &chain.labour {
        Some(l) => {
            let pi = l.distribution();
            let h0 = pi.iter().copied().map(surprisal_term).sum();
            (Some(h0), Some(avg_conditional_entropy(p, &pi)?))
        }
        None => (None, None),
    };

    Ok(EntropyReport {
        manifest: None,
        label: options.label.clone(),
        n,
        h_rate_bits: h_rate,
        h_percent,
        h_initial_bits,
        h_cond_avg_bits,
        h_cond_rows,
        stationary: solution.distribution.pi_star.clone(),
        structure: chain.structure,
        dropped_sectors: chain.dropped_sectors,
        solver: SolverSummary {
            method: options.solver.as_str().to_string(),
            residual: solution.distribution.residual,
            cross_check: solution.cross_check,
            iterations: (solution.distribution.iterations > 0)
                .then_some(solution.distribution.iterations),
        },
        warnings: chain.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> FlowMatrix {
        FlowMatrix::from_rows(vec![
            vec![0.0, 2.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn demo_report() {
        let r = analyze_table(&demo(), None, &AnalysisOptions::default()).unwrap();
        assert_eq!(r.n, 3);
        assert!((r.h_rate_bits - 0.9370927081530444).abs() < 1e-12);
        assert!(r.warnings.is_empty());
        assert!(r.solver.cross_check.unwrap() < 1e-9);
        assert_eq!(r.h_cond_rows.len(), 3);
    }

    #[test]
    fn reducible_table_is_restricted_with_warning() {
        let f = FlowMatrix::from_rows(vec![
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.0, 1.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0, 3.0],
            vec![0.0, 4.0, 0.0, 1.0],
        ])
        .unwrap();
        let labour = LabourVector::new(vec![5.0, 1.0, 1.0, 2.0]).unwrap();
        let r = analyze_table(&f, Some(&labour), &AnalysisOptions::default()).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.dropped_sectors, vec!["S1"]);
        assert_eq!(r.warnings.len(), 1);
        // labour (1, 1, 2) on the core
        let h0 = r.h_initial_bits.unwrap();
        assert!((h0 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn dead_end_core_is_not_basic() {
        let f = FlowMatrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let err = analyze_table(&f, None, &AnalysisOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Markov(MarkovError::NonBasicSector { .. })
        ));
        assert!(!err.is_input_error());
    }

    #[test]
    fn household_closure_joins_the_core() {
        // Without households S2 only receives; with them it feeds households.
        let f = FlowMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let labour = LabourVector::new(vec![2.0, 3.0]).unwrap();
        let options = AnalysisOptions {
            prepare: PrepareOptions {
                wage: Some(vec![0.0, 1.0]),
                ..Default::default()
            },
            ..Default::default()
        };
        let r = analyze_table(&f, Some(&labour), &options).unwrap();
        assert_eq!(r.n, 3);
        assert!(r.structure.strongly_connected);
        assert_eq!(r.h_cond_rows[2].sector, "Households");
    }

    #[test]
    fn wage_without_labour_is_an_option_error() {
        let options = AnalysisOptions {
            prepare: PrepareOptions {
                wage: Some(vec![1.0, 1.0, 1.0]),
                ..Default::default()
            },
            ..Default::default()
        };
        let err = analyze_table(&demo(), None, &options).unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn diagonal_and_pruning_options() {
        let f = FlowMatrix::from_rows(vec![vec![8.0, 1.0], vec![1.0, 1e-9]]).unwrap();
        let with = analyze_table(&f, None, &AnalysisOptions::default()).unwrap();
        let without = analyze_table(
            &f,
            None,
            &AnalysisOptions {
                prepare: PrepareOptions {
                    drop_diagonal: true,
                    ..Default::default()
                },
                solver: Solver::Direct,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(with.h_rate_bits > 0.0);
        assert_eq!(without.h_rate_bits, 0.0);
        let (_, warnings) = inspect(
            &f,
            &PrepareOptions {
                drop_diagonal: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(warnings.iter().any(|w| w.contains("period 2")));
        let pruned = inspect(
            &f,
            &PrepareOptions {
                prune_below: Some(1e-6),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(pruned.0.strongly_connected);
    }
}
