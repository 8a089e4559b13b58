//! The `genet` command-line front end.
//!
//! Every subcommand reads files, calls into the library and writes one
//! machine-readable artifact (JSON or CSV) to `--out` or stdout.
//! Diagnostics go to stderr. Exit codes: 0 success, 1 domain error (the
//! error code is printed first on stderr), 2 usage error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use crate::cost::{
    aggregate_raw_samples, cost_report, ingest_benchmark, parse_network_latency, CostError, CostReport,
    LatencyTable,
};
use crate::nas::{
    fit_pseudo_gradients, ingest_trials, plan_trials, predict_accuracy, run_search, winner_report_json,
    write_trials, NasError, PerturbationRanges, PseudoGradientTable, ResolutionOutcome, SearchConfig,
};
use crate::rank::{load_kernel, stage_report, RankError};
use crate::structure::{parse_document, parse_structure, validate_structure, NetworkStructure, StructureError};

#[derive(Debug, Parser)]
#[command(name = "genet", version, about = "GPU-efficient network design toolkit")]
pub struct Cli {
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Human-readable output instead of JSON/CSV.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Seed for the random generator; required by `plan` and `search`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a structure document and list every violated invariant.
    Validate { structure: PathBuf },
    /// FLOPs, parameters and optionally estimated latency of a structure.
    Cost {
        structure: PathBuf,
        /// Input resolution; defaults to the document's own.
        #[arg(long)]
        resolution: Option<u32>,
        #[arg(long, value_name = "CSV")]
        latency_table: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        batch: u32,
        /// Whole-network reference latencies shown next to the estimate
        /// with --pretty.
        #[arg(long, value_name = "CSV")]
        reference: Option<PathBuf>,
    },
    /// Reduce raw timing samples to a benchmark table with a trimmed mean.
    BenchAggregate { raw_samples: PathBuf },
    /// Plan random single-super-block perturbations of a master network.
    Plan {
        master: PathBuf,
        #[command(flatten)]
        ranges: RangeArgs,
    },
    /// Fit pseudo-gradients from trials with measured accuracies.
    Fit {
        master: PathBuf,
        trials: PathBuf,
        #[arg(long)]
        master_accuracy: f64,
    },
    /// Predict accuracies of candidate structures.
    Predict {
        gradients: PathBuf,
        master: PathBuf,
        #[arg(required = true)]
        candidates: Vec<PathBuf>,
    },
    /// Sample candidates and pick the best one per resolution under a
    /// latency budget.
    Search {
        master: PathBuf,
        gradients: PathBuf,
        latency_table: PathBuf,
        #[arg(long, value_name = "MS")]
        budget: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [192, 224, 256])]
        resolutions: Vec<u32>,
        #[arg(long, default_value_t = 1000)]
        candidates: usize,
        #[arg(long, default_value_t = 64)]
        batch: u32,
        #[command(flatten)]
        ranges: RangeArgs,
    },
    /// Singular-value spectra of every `.kt01` kernel in a directory.
    Spectrum { kernel_dir: PathBuf },
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [3, 5])]
    pub kernels: Vec<u32>,
    #[arg(long, value_delimiter = ',', num_args = 1, default_values_t = [0.5, 2.0], value_name = "LO,HI")]
    pub width_factor: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-2, 2], value_name = "LO,HI")]
    pub depth_delta: Vec<i32>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5])]
    pub bl_ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 6.0, 9.0])]
    pub dw_ratios: Vec<f64>,
    #[arg(long, default_value_t = 9)]
    pub samples: usize,
    /// Draw body block types from {XX, BL, DW}.
    #[arg(long)]
    pub allow_type_switch: bool,
}

impl RangeArgs {
    fn to_ranges(&self) -> Result<PerturbationRanges, CliError> {
        let pair = |v: &[f64], name: &str| match v {
            [lo, hi] => Ok((*lo, *hi)),
            _ => Err(CliError::Usage(format!("--{name} takes exactly two values LO,HI"))),
        };
        let depth = match self.depth_delta[..] {
            [lo, hi] => (lo, hi),
            _ => return Err(CliError::Usage("--depth-delta takes exactly two values LO,HI".into())),
        };
        Ok(PerturbationRanges {
            kernel_choices: self.kernels.iter().copied().collect(),
            width_factor: pair(&self.width_factor, "width-factor")?,
            depth_delta: depth,
            bl_ratios: self.bl_ratios.clone(),
            dw_ratios: self.dw_ratios.clone(),
            samples_per_superblock: self.samples,
            allow_type_switch: self.allow_type_switch,
        })
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain { code: &'static str, message: String },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }
}

fn domain(code: &'static str, message: impl ToString) -> CliError {
    CliError::Domain {
        code,
        message: message.to_string(),
    }
}

impl From<StructureError> for CliError {
    fn from(e: StructureError) -> Self {
        domain(e.code(), e)
    }
}

impl From<CostError> for CliError {
    fn from(e: CostError) -> Self {
        domain(e.code(), e)
    }
}

impl From<NasError> for CliError {
    fn from(e: NasError) -> Self {
        domain(e.code(), e)
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        domain(e.code(), e)
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| domain("IO_ERROR", format!("{}: {e}", path.display())))
}

fn load_structure(path: &Path) -> Result<NetworkStructure, CliError> {
    Ok(parse_structure(&read_text(path)?)?)
}

fn load_table(path: &Path) -> Result<LatencyTable, CliError> {
    Ok(ingest_benchmark(&read_text(path)?)?)
}

fn json_text(value: Value) -> String {
    let mut s = serde_json::to_string_pretty(&value).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// What a command produced: the artifact text and whether it should still
/// exit non-zero after writing it.
struct Output {
    text: String,
    failure: Option<CliError>,
    notes: Vec<String>,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Output {
            text,
            failure: None,
            notes: Vec::new(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };

    let result = execute(&cli).and_then(|output| {
        for note in &output.notes {
            let _ = writeln!(stderr, "note: {note}");
        }
        match &cli.out {
            Some(path) => std::fs::write(path, &output.text)
                .map_err(|e| domain("IO_ERROR", format!("{}: {e}", path.display())))?,
            None => stdout
                .write_all(output.text.as_bytes())
                .map_err(|e| domain("IO_ERROR", e))?,
        }
        match output.failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    });

    match result {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => {
                    let _ = writeln!(stderr, "error: {msg}");
                }
                CliError::Domain { code, message } => {
                    let _ = writeln!(stderr, "{code}");
                    let _ = writeln!(stderr, "{message}");
                }
            }
            e.exit_code()
        }
    }
}

fn require_seed(cli: &Cli, command: &str) -> Result<u64, CliError> {
    cli.seed
        .ok_or_else(|| CliError::Usage(format!("`{command}` requires --seed <U64>")))
}

fn execute(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Validate { structure } => cmd_validate(structure, cli.pretty),
        Command::Cost {
            structure,
            resolution,
            latency_table,
            batch,
            reference,
        } => cmd_cost(structure, *resolution, latency_table.as_deref(), *batch, reference.as_deref(), cli.pretty),
        Command::BenchAggregate { raw_samples } => Ok(aggregate_raw_samples(&read_text(raw_samples)?)?.into()),
        Command::Plan { master, ranges } => {
            let seed = require_seed(cli, "plan")?;
            let master = load_structure(master)?;
            let trials = plan_trials(&master, &ranges.to_ranges()?, seed)?;
            Ok(write_trials(&trials).into())
        }
        Command::Fit {
            master,
            trials,
            master_accuracy,
        } => {
            let master = load_structure(master)?;
            let trials = ingest_trials(&read_text(trials)?)?;
            let table = fit_pseudo_gradients(&master, *master_accuracy, &trials)?;
            Ok(if cli.pretty {
                pretty_gradients(&table)
            } else {
                table.to_json()
            }
            .into())
        }
        Command::Predict {
            gradients,
            master,
            candidates,
        } => cmd_predict(gradients, master, candidates, cli.pretty),
        Command::Search {
            master,
            gradients,
            latency_table,
            budget,
            resolutions,
            candidates,
            batch,
            ranges,
        } => {
            let seed = require_seed(cli, "search")?;
            let config = SearchConfig {
                latency_budget_ms: *budget,
                resolutions: resolutions.iter().copied().collect::<BTreeSet<_>>(),
                num_candidates: *candidates,
                seed,
                ranges: ranges.to_ranges()?,
                batch: *batch,
            };
            cmd_search(master, gradients, latency_table, &config, cli.pretty)
        }
        Command::Spectrum { kernel_dir } => cmd_spectrum(kernel_dir),
    }
}

fn cmd_validate(path: &Path, pretty: bool) -> Result<Output, CliError> {
    let net = parse_document(&read_text(path)?)?;
    let violations = validate_structure(&net);
    let text = if pretty {
        if violations.is_empty() {
            format!("{}: ok\n", net.name)
        } else {
            violations.iter().map(|v| format!("{v}\n")).collect()
        }
    } else {
        let list = violations
            .iter()
            .map(|v| {
                let mut m = Map::new();
                m.insert("index".into(), v.index.map_or(Value::Null, Value::from));
                m.insert("message".into(), Value::from(v.message.clone()));
                m.insert("rule".into(), Value::from(v.rule.code()));
                Value::Object(m)
            })
            .collect();
        json_text(Value::Array(list))
    };
    let failure = violations
        .first()
        .map(|v| domain(v.rule.code(), format!("{} violation(s); first: {v}", violations.len())));
    Ok(Output {
        text,
        failure,
        notes: Vec::new(),
    })
}

fn cmd_cost(
    path: &Path,
    resolution: Option<u32>,
    latency_table: Option<&Path>,
    batch: u32,
    reference: Option<&Path>,
    pretty: bool,
) -> Result<Output, CliError> {
    let net = load_structure(path)?;
    let resolution = resolution.unwrap_or(net.resolution);
    let table = latency_table.map(load_table).transpose()?;
    let report = cost_report(&net, resolution, table.as_ref().map(|t| (t, batch)))?;
    let mut notes = Vec::new();
    if !report.extrapolated.is_empty() {
        notes.push(format!(
            "latency clamped at the table edge for super-block(s) {:?}",
            report.extrapolated
        ));
    }
    let text = if pretty {
        let reference = reference
            .map(|p| read_text(p).and_then(|t| Ok(parse_network_latency(&t)?)))
            .transpose()?;
        pretty_cost(&net.name, &report, reference.as_deref())
    } else {
        json_text(serde_json::to_value(&report).expect("report always serializes"))
    };
    Ok(Output {
        text,
        failure: None,
        notes,
    })
}

fn pretty_cost(name: &str, report: &CostReport, reference: Option<&[crate::cost::NetworkLatency]>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{name} @ {}", report.resolution);
    let _ = writeln!(s, "  FLOPs   {:>10.3} G", report.flops as f64 / 1e9);
    let _ = writeln!(s, "  params  {:>10.3} M", report.params as f64 / 1e6);
    if let Some(lat) = report.latency_ms_per_image {
        let _ = writeln!(s, "  latency {:>10.4} ms/image (batch {})", lat, report.batch);
    }
    if let Some(rows) = reference {
        let _ = writeln!(s, "\n  {:<24} {:>7} {:>6} {:>12}", "reference", "top-1", "batch", "ms/image");
        for r in rows {
            let _ = writeln!(
                s,
                "  {:<24} {:>6.1}% {:>6} {:>12.4}",
                r.model,
                r.acc * 100.0,
                r.batch,
                r.latency_ms
            );
        }
    }
    s
}

fn pretty_gradients(table: &PseudoGradientTable) -> String {
    let mut s = format!("master accuracy {}\n", table.master_accuracy);
    let _ = writeln!(
        s,
        "{:>5} {:>4} {:>6} {:>6} {:>12} {:>12} {:>4} {:>10}",
        "index", "type", "kernel", "ratio", "g1", "g2", "n", "rms"
    );
    for e in &table.entries {
        let _ = writeln!(
            s,
            "{:>5} {:>4} {:>6} {:>6} {:>12.6e} {:>12.6e} {:>4} {:>10.3e}{}",
            e.index,
            e.block_type.as_str(),
            e.kernel.map_or("*".into(), |k| k.to_string()),
            e.ratio.map_or("*".into(), |r| r.to_string()),
            e.g1,
            e.g2,
            e.n,
            e.rms,
            if e.singular { "  singular" } else { "" }
        );
    }
    s
}

fn cmd_predict(gradients: &Path, master: &Path, candidates: &[PathBuf], pretty: bool) -> Result<Output, CliError> {
    let table = PseudoGradientTable::from_json(&read_text(gradients)?)?;
    let master = load_structure(master)?;
    let mut rows = Vec::with_capacity(candidates.len());
    for path in candidates {
        let candidate = load_structure(path)?;
        let acc = predict_accuracy(&table, &master, &candidate)?;
        rows.push((candidate.name, acc));
    }
    let text = if pretty {
        rows.iter().map(|(name, acc)| format!("{name:<32} {acc:.6}\n")).collect()
    } else {
        let list = rows
            .into_iter()
            .map(|(name, acc)| {
                let mut m = Map::new();
                m.insert("name".into(), Value::from(name));
                m.insert("predicted_accuracy".into(), Value::from(acc));
                Value::Object(m)
            })
            .collect();
        json_text(Value::Array(list))
    };
    Ok(text.into())
}

fn cmd_search(
    master: &Path,
    gradients: &Path,
    latency_table: &Path,
    config: &SearchConfig,
    pretty: bool,
) -> Result<Output, CliError> {
    let master = load_structure(master)?;
    let table = PseudoGradientTable::from_json(&read_text(gradients)?)?;
    let lat = load_table(latency_table)?;
    let outcomes = run_search(&master, &table, &lat, config)?;

    let infeasible: Vec<u32> = outcomes
        .iter()
        .filter(|o| o.result.is_err())
        .map(|o| o.resolution)
        .collect();
    let mut notes = Vec::new();
    let failure = if infeasible.len() == outcomes.len() {
        Some(NasError::NoFeasibleCandidate { resolution: infeasible[0] }.into())
    } else {
        if !infeasible.is_empty() {
            notes.push(format!("no feasible candidate at resolution(s) {infeasible:?}"));
        }
        None
    };
    let text = if pretty {
        pretty_search(&outcomes, config)
    } else {
        winner_report_json(&outcomes, config)
    };
    Ok(Output { text, failure, notes })
}

fn pretty_search(outcomes: &[ResolutionOutcome], config: &SearchConfig) -> String {
    let mut s = format!(
        "budget {} ms/image, batch {}, {} candidates, seed {}\n",
        config.latency_budget_ms, config.batch, config.num_candidates, config.seed
    );
    for o in outcomes {
        match &o.result {
            Ok(w) => {
                let _ = writeln!(
                    s,
                    "\n@{}: {} (#{}), predicted {:.4}, {:.4} ms, {} feasible",
                    o.resolution, w.structure.name, w.candidate_index, w.predicted_accuracy, w.estimated_latency_ms,
                    w.feasible_count
                );
                for b in &w.structure.superblocks {
                    let _ = writeln!(
                        s,
                        "  {:<4} d={:<2} c={:<5} s={} k={} r={}",
                        b.block_type.as_str(),
                        b.depth,
                        b.width,
                        b.stride,
                        b.kernel,
                        b.ratio
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(s, "\n@{}: {}", o.resolution, e.code());
            }
        }
    }
    s
}

fn cmd_spectrum(dir: &Path) -> Result<Output, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| domain("IO_ERROR", format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("kt01"))
        })
        .collect();
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if paths.is_empty() {
        return Err(domain("NO_KERNELS", format!("no .kt01 files in {}", dir.display())));
    }
    let kernels = paths.iter().map(load_kernel).collect::<Result<Vec<_>, _>>()?;
    Ok(stage_report(&kernels)?.into())
}
