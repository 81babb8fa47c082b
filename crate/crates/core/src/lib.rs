//! Entropy-rate complexity of input-output production networks.
//!
//! An input-output table of cross-sectoral flows `f_ij` is read as a Markov
//! chain over sectors: a unit of sector `i`'s output is forwarded to sector
//! `j` with probability `p_ij = f_ij / Σ_j f_ij`. The complexity of the
//! economy is the entropy rate of that chain,
//!
//! ```text
//! H = -Σ_i Σ_j π_i p_ij log₂ p_ij
//! ```
//!
//! where `π` is the stationary distribution. The crate is organised as a
//! pipeline:
//!
//! - [`table_io`]: flow tables, labour vectors, report rendering
//! - [`graph`]: strong connectivity, period, basic-core extraction
//! - [`markov`]: transition matrix, stationary distribution (two solvers),
//!   household closure
//! - [`entropy`]: every entropy quantity and the [`entropy::EntropyReport`]
//! - [`oracle`]: Monte Carlo and brute-force checks of the analytic values
//! - [`synth`]: random sparse economies for the scaling study
//! - [`pipeline`]: the end-to-end analysis used by the CLI
//! - [`cli`]: subcommands, run manifests, exit codes

pub mod cli;
pub mod entropy;
pub mod graph;
pub mod manifest;
pub mod markov;
pub mod oracle;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod table_io;

pub use entropy::EntropyReport;
pub use graph::{SectorGraph, StructureDiagnostics};
pub use markov::{StationaryDistribution, TransitionMatrix};
pub use table_io::{FlowMatrix, LabourVector, SectorLabel};
