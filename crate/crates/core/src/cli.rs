//! Subcommands of the `ioentropy` binary.
//!
//! [`run`] parses arguments and returns the captured output streams and
//! exit code, so the whole CLI can be driven in-process. Results go to
//! stdout, warnings and errors to stderr.
//!
//! Exit codes: `0` success, `1` input or usage error (unreadable or
//! malformed files, bad options), `2` structural problem (reducible or
//! periodic table for `validate`; a chain the computation cannot proceed
//! on for the other commands).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::entropy::{bits_to_nats, compare_systems, entropy_rate, EntropyReport};
use crate::graph::restrict_to_basic;
use crate::manifest::{current_timestamp, RunManifest};
use crate::markov::{build_transitions, solve_stationary, Solver};
use crate::oracle::{convergence_trace, empirical_entropy_rate, OracleError};
use crate::pipeline::{
    analyze_table, inspect, prepare_chain, AnalysisOptions, PipelineError, PrepareOptions,
};
use crate::synth::{scaling_csv, scaling_experiment, ScalingOptions, SynthError, Weights};
use crate::table_io::{
    parse_labour_vector, parse_sector_values, read_flow_file, write_reports, FlowTable,
    LabourVector, ReportFormat, TableError, WriteOptions,
};

pub const FORMAT_ENV: &str = "IOENTROPY_FORMAT";

#[derive(Debug, Parser)]
#[command(
    name = "ioentropy",
    version,
    about = "Entropy-rate complexity of input-output tables"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that the table's sectors form an irreducible, aperiodic chain
    Validate(ValidateArgs),
    /// Compute the entropy rate and supporting entropies of a table
    Analyze(AnalyzeArgs),
    /// Compare two JSON reports: bit difference and 2^difference
    Compare(CompareArgs),
    /// Monte Carlo estimate of the entropy rate
    Simulate(SimulateArgs),
    /// H(s_k | s_{k-1}) along the evolving sector distribution
    Trace(TraceArgs),
    /// Entropy of random sparse economies with out-degree round(log2 n)
    Synth(SynthArgs),
    /// Re-run the command recorded in an output's manifest
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Flow table (.csv or .json)
    flow: PathBuf,
    /// Exclude intra-sector (diagonal) flows
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    drop_diagonal: bool,
    /// Treat flows strictly below this value as zero
    #[arg(long)]
    prune_below: Option<f64>,
}

impl TableArgs {
    fn flags(&self) -> Vec<(&'static str, String)> {
        let mut flags = vec![("drop-diagonal", self.drop_diagonal.to_string())];
        if let Some(x) = self.prune_below {
            flags.push(("prune-below", format!("{x:?}")));
        }
        flags
    }

    fn prepare(&self) -> PrepareOptions {
        PrepareOptions {
            drop_diagonal: self.drop_diagonal,
            prune_below: self.prune_below,
            wage: None,
        }
    }
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, value_enum, env = FORMAT_ENV, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Labour requirements per sector (JSON object or `name;value` lines)
    #[arg(long)]
    labour: Option<PathBuf>,
    /// Real wage bundle per sector; closes the economy with a household sector
    #[arg(long)]
    wage: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Solver::Both)]
    solver: Solver,
    #[arg(long, value_enum, env = FORMAT_ENV, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    /// Show per-sector conditional entropies in the table output
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    rows: bool,
    /// Row label in the report (defaults to the file stem)
    #[arg(long)]
    label: Option<String>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Earlier / reference report (JSON)
    a: PathBuf,
    /// Later / compared report (JSON)
    b: PathBuf,
    #[arg(long, value_enum, env = FORMAT_ENV, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, default_value_t = 1_000_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report entropies in nats instead of bits
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    nats: bool,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, default_value_t = 50)]
    kmax: usize,
    /// Start from the labour allocation instead of the uniform distribution
    #[arg(long)]
    labour: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightKind {
    Equal,
    Dirichlet,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Ascending sector counts, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = WeightKind::Equal)]
    weights: WeightKind,
    /// Dirichlet concentration (only with --weights dirichlet)
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    self_loops: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// A previous output containing a manifest
    output: PathBuf,
    /// Compare the replayed output with the file instead of printing it
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    check: bool,
}

/// Captured result of one CLI invocation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String, warnings: &[String]) -> Self {
        Self {
            stdout,
            stderr: warning_lines(warnings),
            code: 0,
        }
    }

    fn fail(code: i32, message: impl std::fmt::Display) -> Self {
        Self {
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
            code,
        }
    }
}

fn warning_lines(warnings: &[String]) -> String {
    warnings.iter().map(|w| format!("warning: {w}\n")).collect()
}

/// Runs the CLI on `args` (without the program name) with the manifest
/// timestamp from [`current_timestamp`].
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    run_at(
        args.into_iter().map(Into::into).collect(),
        current_timestamp(),
    )
}

/// Runs the CLI with a fixed manifest timestamp.
pub fn run_at(args: Vec<String>, timestamp: u64) -> Outcome {
    let argv = std::iter::once("ioentropy".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Outcome {
                        stdout: text,
                        stderr: String::new(),
                        code: 0,
                    }
                }
                _ => Outcome {
                    stdout: String::new(),
                    stderr: text,
                    code: 1,
                },
            };
        }
    };
    match cli.command {
        Command::Validate(a) => cmd_validate(a, timestamp),
        Command::Analyze(a) => cmd_analyze(a, timestamp),
        Command::Compare(a) => cmd_compare(a, timestamp),
        Command::Simulate(a) => cmd_simulate(a, timestamp),
        Command::Trace(a) => cmd_trace(a, timestamp),
        Command::Synth(a) => cmd_synth(a, timestamp),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn pipeline_exit(e: &PipelineError) -> i32 {
    if e.is_input_error() {
        1
    } else {
        2
    }
}

fn read_table(path: &Path) -> Result<FlowTable, Outcome> {
    read_flow_file(path).map_err(|e| Outcome::fail(1, format!("{}: {e}", path.display())))
}

fn read_labour(path: &Path, table: &FlowTable) -> Result<LabourVector, Outcome> {
    let file = std::fs::File::open(path)
        .map_err(|e| Outcome::fail(1, format!("{}: {e}", path.display())))?;
    parse_labour_vector(file, table.flows.labels())
        .map_err(|e| Outcome::fail(1, format!("{}: {e}", path.display())))
}

fn with_manifest_comment(manifest: &RunManifest, body: &str) -> String {
    format!("# manifest: {}\n{body}", manifest.to_json_line())
}

#[derive(Serialize)]
struct ValidateDocument<'a> {
    manifest: &'a RunManifest,
    sectors: Vec<String>,
    structure: &'a crate::graph::StructureDiagnostics,
    dropped_sectors: Vec<String>,
    warnings: &'a [String],
}

fn cmd_validate(a: ValidateArgs, timestamp: u64) -> Outcome {
    let table = match read_table(&a.table.flow) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let mut flags = a.table.flags();
    flags.push(("format", a.format.as_str().to_string()));
    let manifest = RunManifest::new(
        "validate",
        vec![path_str(&a.table.flow)],
        flags,
        None,
        timestamp,
    );

    let (structure, mut warnings) = match inspect(&table.flows, &a.table.prepare()) {
        Ok(x) => x,
        Err(e) => return Outcome::fail(pipeline_exit(&e), e),
    };
    let core = restrict_to_basic(&table.flows, &structure);
    if let Err(e) = build_transitions(&core) {
        warnings.push(e.to_string());
    }
    let names = table.flows.names();
    let dropped: Vec<String> = structure
        .dropped
        .iter()
        .map(|&i| names[i].clone())
        .collect();

    let stdout = match a.format {
        ReportFormat::Json => {
            let doc = ValidateDocument {
                manifest: &manifest,
                sectors: names.clone(),
                structure: &structure,
                dropped_sectors: dropped.clone(),
                warnings: &warnings,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table | ReportFormat::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# manifest: {}", manifest.to_json_line());
            let _ = writeln!(s, "sectors             {}", names.len());
            let _ = writeln!(s, "strongly_connected  {}", structure.strongly_connected);
            let _ = writeln!(s, "components          {}", structure.component_count);
            let _ = writeln!(s, "period              {}", structure.period);
            let _ = writeln!(s, "largest_scc         {}", structure.largest_scc.len());
            let dropped_text = if dropped.is_empty() {
                "-".to_string()
            } else {
                dropped.join(", ")
            };
            let _ = writeln!(s, "dropped             {dropped_text}");
            s
        }
    };
    Outcome {
        stdout,
        stderr: warning_lines(&warnings),
        code: if warnings.is_empty() { 0 } else { 2 },
    }
}

fn cmd_analyze(a: AnalyzeArgs, timestamp: u64) -> Outcome {
    let table = match read_table(&a.table.flow) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let labour = match &a.labour {
        Some(path) => match read_labour(path, &table) {
            Ok(l) => Some(l),
            Err(o) => return o,
        },
        None => table.labour.clone(),
    };
    let wage = match &a.wage {
        Some(path) => {
            let parsed = std::fs::File::open(path)
                .map_err(TableError::from)
                .and_then(|f| parse_sector_values(f, table.flows.labels()));
            match parsed {
                Ok(w) => Some(w),
                Err(e) => return Outcome::fail(1, format!("{}: {e}", path.display())),
            }
        }
        None => None,
    };
    let label = a.label.clone().unwrap_or_else(|| {
        a.table
            .flow
            .file_stem()
            .map_or_else(|| "table".to_string(), |s| s.to_string_lossy().into_owned())
    });

    let mut flags = a.table.flags();
    if let Some(p) = &a.labour {
        flags.push(("labour", path_str(p)));
    }
    if let Some(p) = &a.wage {
        flags.push(("wage", path_str(p)));
    }
    flags.push(("solver", a.solver.as_str().to_string()));
    flags.push(("format", a.format.as_str().to_string()));
    flags.push(("rows", a.rows.to_string()));
    flags.push(("label", label.clone()));
    let manifest = RunManifest::new(
        "analyze",
        vec![path_str(&a.table.flow)],
        flags,
        None,
        timestamp,
    );

    let mut prepare = a.table.prepare();
    prepare.wage = wage;
    let options = AnalysisOptions {
        prepare,
        solver: a.solver,
        label,
    };
    let mut report = match analyze_table(&table.flows, labour.as_ref(), &options) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(pipeline_exit(&e), e),
    };
    report.manifest = Some(manifest);
    let warnings = report.warnings.clone();
    Outcome::ok(
        write_reports(
            std::slice::from_ref(&report),
            a.format,
            WriteOptions { rows: a.rows },
        ),
        &warnings,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ReportSide {
    label: String,
    n: u64,
    h_rate_bits: f64,
}

#[derive(Serialize)]
struct ComparisonDocument<'a> {
    manifest: &'a RunManifest,
    from: ReportSide,
    to: ReportSide,
    delta_bits: f64,
    ratio: f64,
}

fn read_report_side(path: &Path) -> Result<ReportSide, Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Outcome::fail(1, format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Outcome::fail(1, format!("{}: incompatible report: {e}", path.display())))?;
    let field = |name: &str| {
        value.get(name).ok_or_else(|| {
            Outcome::fail(
                1,
                format!("{}: incompatible report: missing `{name}`", path.display()),
            )
        })
    };
    let h = field("h_rate_bits")?
        .as_f64()
        .filter(|h| h.is_finite())
        .ok_or_else(|| {
            Outcome::fail(
                1,
                format!(
                    "{}: incompatible report: `h_rate_bits` is not a number",
                    path.display()
                ),
            )
        })?;
    let n = field("n")?.as_u64().ok_or_else(|| {
        Outcome::fail(
            1,
            format!(
                "{}: incompatible report: `n` is not an integer",
                path.display()
            ),
        )
    })?;
    let label = value
        .get("label")
        .and_then(|l| l.as_str())
        .map_or_else(|| path_str(path), str::to_string);
    Ok(ReportSide {
        label,
        n,
        h_rate_bits: h,
    })
}

fn cmd_compare(a: CompareArgs, timestamp: u64) -> Outcome {
    let (from, to) = match (read_report_side(&a.a), read_report_side(&a.b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(o), _) | (_, Err(o)) => return o,
    };
    let manifest = RunManifest::new(
        "compare",
        vec![path_str(&a.a), path_str(&a.b)],
        vec![("format", a.format.as_str().to_string())],
        None,
        timestamp,
    );
    let delta = to.h_rate_bits - from.h_rate_bits;
    let ratio = compare_systems(to.h_rate_bits, from.h_rate_bits);
    let stdout = match a.format {
        ReportFormat::Json => {
            let doc = ComparisonDocument {
                manifest: &manifest,
                from,
                to,
                delta_bits: delta,
                ratio,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => with_manifest_comment(
            &manifest,
            &format!(
                "from,to,from_bits,to_bits,delta_bits,ratio\n{},{},{:?},{:?},{delta:?},{ratio:?}\n",
                csv_field(&from.label),
                csv_field(&to.label),
                from.h_rate_bits,
                to.h_rate_bits
            ),
        ),
        ReportFormat::Table => with_manifest_comment(
            &manifest,
            &format!(
                "from             to                 ΔH [bits]    2^ΔH\n{:<16} {:<16} {delta:>11.3} {ratio:>7.3}\n",
                from.label, to.label
            ),
        ),
    };
    Outcome::ok(stdout, &[])
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn oracle_exit(e: &OracleError) -> i32 {
    match e {
        OracleError::TooFewSteps(_)
        | OracleError::InvalidStart(_)
        | OracleError::DimensionMismatch { .. } => 1,
        _ => 2,
    }
}

fn cmd_simulate(a: SimulateArgs, timestamp: u64) -> Outcome {
    let table = match read_table(&a.table.flow) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let mut flags = a.table.flags();
    flags.push(("steps", a.steps.to_string()));
    flags.push(("seed", a.seed.to_string()));
    flags.push(("nats", a.nats.to_string()));
    let manifest = RunManifest::new(
        "simulate",
        vec![path_str(&a.table.flow)],
        flags,
        Some(a.seed),
        timestamp,
    );

    let chain = match prepare_chain(&table.flows, None, &a.table.prepare()) {
        Ok(c) => c,
        Err(e) => return Outcome::fail(pipeline_exit(&e), e),
    };
    let p = &chain.transitions;
    let analytic = match solve_stationary(p, Solver::Both) {
        Ok(s) => entropy_rate(p, &s.distribution),
        Err(e) => return Outcome::fail(2, e),
    };
    let est = match empirical_entropy_rate(p, a.steps, a.seed) {
        Ok(e) => e,
        Err(e) => return Outcome::fail(oracle_exit(&e), e),
    };
    let mut warnings = chain.warnings.clone();
    if est.periodic() {
        warnings.push(format!(
            "chain is periodic (period {}); estimate flagged",
            est.period
        ));
    }
    let z = if est.std_error > 0.0 {
        (est.mean_bits - analytic) / est.std_error
    } else {
        0.0
    };
    let (unit, scale): (&str, fn(f64) -> f64) = if a.nats {
        ("nats", bits_to_nats)
    } else {
        ("bits", |x| x)
    };
    let body = format!(
        "steps,burn_in,seed,unit,empirical,std_error,analytic,z_score,period\n{},{},{},{unit},{:?},{:?},{:?},{z:?},{}\n",
        est.steps,
        est.burn_in,
        est.seed,
        scale(est.mean_bits),
        scale(est.std_error),
        scale(analytic),
        est.period
    );
    Outcome::ok(with_manifest_comment(&manifest, &body), &warnings)
}

fn cmd_trace(a: TraceArgs, timestamp: u64) -> Outcome {
    let table = match read_table(&a.table.flow) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let labour = match &a.labour {
        Some(path) => match read_labour(path, &table) {
            Ok(l) => Some(l),
            Err(o) => return o,
        },
        None => None,
    };
    let mut flags = a.table.flags();
    flags.push(("kmax", a.kmax.to_string()));
    if let Some(p) = &a.labour {
        flags.push(("labour", path_str(p)));
    }
    let manifest = RunManifest::new(
        "trace",
        vec![path_str(&a.table.flow)],
        flags,
        None,
        timestamp,
    );

    let chain = match prepare_chain(&table.flows, labour.as_ref(), &a.table.prepare()) {
        Ok(c) => c,
        Err(e) => return Outcome::fail(pipeline_exit(&e), e),
    };
    let n = chain.transitions.n();
    let start = match (&a.labour, &chain.labour) {
        (Some(_), Some(l)) => l.distribution(),
        (Some(_), None) => return Outcome::fail(1, "labour vector has no mass on the basic core"),
        _ => vec![1.0 / n as f64; n],
    };
    match convergence_trace(&chain.transitions, &start, a.kmax) {
        Ok(trace) => Outcome::ok(
            with_manifest_comment(&manifest, &trace.to_csv()),
            &chain.warnings,
        ),
        Err(e) => Outcome::fail(oracle_exit(&e), e),
    }
}

fn cmd_synth(a: SynthArgs, timestamp: u64) -> Outcome {
    let weights = match a.weights {
        WeightKind::Equal => Weights::Equal,
        WeightKind::Dirichlet => Weights::Dirichlet(a.alpha),
    };
    let n_text: Vec<String> = a.n.iter().map(usize::to_string).collect();
    let flags = vec![
        ("n", n_text.join(",")),
        ("replicates", a.replicates.to_string()),
        ("seed", a.seed.to_string()),
        ("weights", format!("{:?}", a.weights).to_lowercase()),
        ("alpha", format!("{:?}", a.alpha)),
        ("self-loops", a.self_loops.to_string()),
    ];
    let manifest = RunManifest::new("synth", vec![], flags, Some(a.seed), timestamp);
    let options = ScalingOptions {
        weights,
        self_loops: a.self_loops,
    };
    match scaling_experiment(&a.n, a.replicates, a.seed, options) {
        Ok(rows) => Outcome::ok(with_manifest_comment(&manifest, &scaling_csv(&rows)), &[]),
        Err(e @ SynthError::InvalidConfig(_)) => Outcome::fail(1, e),
        Err(e) => Outcome::fail(2, e),
    }
}

fn cmd_replay(a: ReplayArgs) -> Outcome {
    let text = match std::fs::read_to_string(&a.output) {
        Ok(t) => t,
        Err(e) => return Outcome::fail(1, format!("{}: {e}", a.output.display())),
    };
    let Some(manifest) = RunManifest::extract(&text) else {
        return Outcome::fail(1, format!("{}: no manifest found", a.output.display()));
    };
    let outcome = run_at(manifest.args.clone(), manifest.timestamp);
    if !a.check {
        return outcome;
    }
    if outcome.code != 0 && outcome.code != 2 {
        return outcome;
    }
    if outcome.stdout == text {
        Outcome::ok(format!("reproduced {}\n", a.output.display()), &[])
    } else {
        Outcome::fail(
            2,
            format!(
                "{}: replay differs from recorded output",
                a.output.display()
            ),
        )
    }
}

/// Reads back a report written with `--format json`.
pub fn parse_report(json: &str) -> Result<EntropyReport, serde_json::Error> {
    serde_json::from_str(json)
}
