//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::census::{census, CensusOptions};
use crate::config::apply_config_file;
use crate::enumeration::{
    complex_upper_bound, count_connected_oracle, count_forests, count_trees, count_unicyclic,
    exact_count, expected_components, naive_upper_bound, BipartiteShape, OracleBudget,
};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, ExperimentConfig, ExperimentKind, Status};
use crate::logreal::{BigCount, LogReal};
use crate::numeric::{
    delta, epsilon_prime, giant_excess_prediction, giant_order_prediction, poisson_lambda,
    poisson_nu, tree_order_threshold, CriticalParams,
};
use crate::sampler::sample;
use crate::selftest;

pub const SEED_VAR: &str = "BIPHASE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "biphase", version, about = "Components of the random bipartite graph G(n,n,p) near p = 1/n")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for experiments (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact counts of connected bipartite graphs and forests.
    Count {
        #[command(subcommand)]
        what: CountCommand,
    },
    /// Expected number of components of shape (i, j, ell) at p = (1+eps)/n.
    Expect {
        #[arg(long)]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long)]
        i: u64,
        #[arg(long)]
        j: u64,
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
        /// Constant of the complex bound, used when no exact count exists.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Scalar quantities of the near-critical regime.
    Scalar {
        #[command(subcommand)]
        what: ScalarCommand,
    },
    /// Draw one sample and print its component census.
    Sample {
        #[arg(long)]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        /// Defaults to $BIPHASE_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the edge list ("u v" per line) to this file.
        #[arg(long)]
        dump_edges: Option<PathBuf>,
        /// Largest order kept in the shape map (default: ceil(n^(2/3))).
        #[arg(long)]
        order_cap: Option<u64>,
        /// Leave lone vertices out of Y(-1).
        #[arg(long)]
        exclude_singletons: bool,
    },
    /// Run a Monte Carlo experiment.
    Experiment(ExperimentArgs),
    /// Run the oracle-equivalence checks.
    Selftest,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// One of: poisson_trees, poisson_unicyclic, no_large_tree, no_complex,
    /// giant, excess, small_vertex_counts, subcritical_tail, coupling.
    name: String,
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum CountCommand {
    /// Spanning trees of K_{i,j}.
    Trees {
        #[arg(long)]
        i: u64,
        #[arg(long)]
        j: u64,
    },
    /// Connected unicyclic graphs on classes of sizes i, j.
    Unicyclic {
        #[arg(long)]
        i: u64,
        #[arg(long)]
        j: u64,
    },
    /// Rooted spanning forests of K_{i,j} with s + t trees.
    Forest {
        #[arg(long)]
        i: u64,
        #[arg(long)]
        j: u64,
        #[arg(long)]
        s: u64,
        #[arg(long)]
        t: u64,
    },
    /// Connected m-edge spanning subgraphs of K_{i,j}, by enumeration.
    Oracle {
        #[arg(long)]
        i: u64,
        #[arg(long)]
        j: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        max_slots: Option<u64>,
        #[arg(long)]
        max_subsets: Option<u128>,
    },
    /// Upper bounds on connected graphs of excess ell >= 1.
    Bound {
        #[arg(long)]
        i: u64,
        #[arg(long)]
        j: u64,
        #[arg(long)]
        ell: i64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
}

#[derive(Debug, Subcommand)]
enum ScalarCommand {
    Delta {
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
    },
    EpsPrime {
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
    },
    Lambda {
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
    },
    Nu {
        #[arg(long)]
        u1: f64,
        #[arg(long)]
        u2: f64,
    },
    Threshold {
        #[arg(long)]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
    },
    Giant {
        #[arg(long)]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
    },
    Excess {
        #[arg(long)]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
    },
}

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_VAR}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Config(format!("output failed: {e}"))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(out, "{text}").map_err(io_err)
}

fn emit_csv(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Config(format!("csv output failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush().map_err(io_err)
}

fn emit_count(format: Format, out: &mut dyn Write, count: &BigCount) -> Result<()> {
    match format {
        Format::Text => writeln!(out, "{count}").map_err(io_err),
        Format::Json => emit_json(out, &json!({ "count": count })),
        Format::Csv => emit_csv(out, &["count"], &[vec![count.to_string()]]),
    }
}

fn emit_log_real(format: Format, out: &mut dyn Write, key: &str, value: &LogReal, extra: serde_json::Value) -> Result<()> {
    match format {
        Format::Text => {
            writeln!(out, "ln = {}", value.ln()).map_err(io_err)?;
            writeln!(out, "value = {}", value.to_scientific()).map_err(io_err)
        }
        Format::Json => {
            let mut v = json!({ key: value, "ln": value.ln(), "scientific": value.to_scientific() });
            if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
                obj.extend(more);
            }
            emit_json(out, &v)
        }
        Format::Csv => emit_csv(
            out,
            &["ln", "scientific"],
            &[vec![value.ln().to_string(), value.to_scientific()]],
        ),
    }
}

fn emit_scalar(format: Format, out: &mut dyn Write, name: &str, value: f64) -> Result<()> {
    match format {
        Format::Text => writeln!(out, "{value}").map_err(io_err),
        Format::Json => emit_json(out, &json!({ name: value })),
        Format::Csv => emit_csv(out, &[name], &[vec![value.to_string()]]),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let format = cli.format;
    match &cli.command {
        Command::Count { what } => {
            let count = match *what {
                CountCommand::Trees { i, j } => count_trees(i, j)?,
                CountCommand::Unicyclic { i, j } => count_unicyclic(i, j),
                CountCommand::Forest { i, j, s, t } => count_forests(i, j, s, t)?,
                CountCommand::Oracle { i, j, m, max_slots, max_subsets } => {
                    let mut budget = OracleBudget::default();
                    if let Some(s) = max_slots {
                        budget.max_slots = s;
                    }
                    if let Some(s) = max_subsets {
                        budget.max_subsets = s;
                    }
                    count_connected_oracle(i, j, m, &budget)?
                }
                CountCommand::Bound { i, j, ell, c } => {
                    let bound = complex_upper_bound(i, j, ell, c)?;
                    let naive = naive_upper_bound(i, j, ell)?;
                    emit_log_real(format, out, "bound", &bound, json!({ "naive": naive, "c": c }))?;
                    return Ok(EXIT_OK);
                }
            };
            emit_count(format, out, &count)?;
        }
        Command::Expect { n, eps, i, j, ell, c } => {
            let params = CriticalParams::new(*n, *eps)?;
            let shape = BipartiteShape::new(*i, *j, *ell)?;
            let (count, source) = match exact_count(&shape) {
                Some(count) => (count.to_log_real(), "exact"),
                None => (complex_upper_bound(*i, *j, *ell, *c)?, "bound"),
            };
            let e = expected_components(*n, params.p, &shape, &count)?;
            emit_log_real(format, out, "expected", &e, json!({ "count_source": source }))?;
        }
        Command::Scalar { what } => {
            let (name, value) = match *what {
                ScalarCommand::Delta { eps } => ("delta", delta(eps)?),
                ScalarCommand::EpsPrime { eps } => ("eps_prime", epsilon_prime(eps)?),
                ScalarCommand::Lambda { r1, r2 } => ("lambda", poisson_lambda(r1, r2)?),
                ScalarCommand::Nu { u1, u2 } => ("nu", poisson_nu(u1, u2)?),
                ScalarCommand::Threshold { n, eps, alpha } => ("threshold", tree_order_threshold(n, eps, alpha)?),
                ScalarCommand::Giant { n, eps } => ("giant_order", giant_order_prediction(n, eps)?),
                ScalarCommand::Excess { n, eps } => ("giant_excess", giant_excess_prediction(n, eps)?),
            };
            emit_scalar(format, out, name, value)?;
        }
        Command::Sample { n, eps, seed, dump_edges, order_cap, exclude_singletons } => {
            let params = CriticalParams::new(*n, *eps)?;
            let seed = match seed {
                Some(s) => *s,
                None => env_seed()?.unwrap_or(0),
            };
            let g = sample(*n, params.p, seed)?;
            if let Some(path) = dump_edges {
                let file = File::create(path)
                    .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
                let mut w = BufWriter::new(file);
                g.dump_edges(&mut w).map_err(io_err)?;
                w.flush().map_err(io_err)?;
            }
            let mut opts = CensusOptions::new(*n, *eps);
            if let Some(cap) = order_cap {
                opts.order_cap = *cap;
            }
            opts.include_singletons = !exclude_singletons;
            let c = census(&g, opts);
            match format {
                Format::Csv => {
                    let rows: Vec<Vec<String>> = c
                        .shape_map
                        .iter()
                        .map(|(&(i, j, l), &k)| vec![i.to_string(), j.to_string(), l.to_string(), k.to_string()])
                        .collect();
                    emit_csv(out, &["i", "j", "ell", "count"], &rows)?;
                }
                _ => emit_json(out, &json!({ "seed": seed, "p": params.p, "edges": g.total_edges(), "census": c }))?,
            }
        }
        Command::Experiment(args) => return run_experiment_command(args, cli, out),
        Command::Selftest => {
            let lines = selftest::run_all()?;
            match format {
                Format::Json => emit_json(out, &lines)?,
                Format::Csv => emit_csv(
                    out,
                    &["name", "passed", "detail"],
                    &lines
                        .iter()
                        .map(|l| vec![l.name.clone(), l.passed.to_string(), l.detail.clone()])
                        .collect::<Vec<_>>(),
                )?,
                Format::Text => {
                    for l in &lines {
                        let mark = if l.passed { "PASS" } else { "FAIL" };
                        writeln!(out, "{mark} {}: {}", l.name, l.detail).map_err(io_err)?;
                    }
                }
            }
            if lines.iter().any(|l| !l.passed) {
                return Ok(EXIT_FAILED);
            }
        }
    }
    Ok(EXIT_OK)
}

fn run_experiment_command(args: &ExperimentArgs, cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let kind: ExperimentKind = args.name.parse()?;
    let mut config = ExperimentConfig::for_kind(kind);
    if let Some(seed) = env_seed()? {
        config.master_seed = seed;
    }
    if let Some(path) = &args.config {
        apply_config_file(&mut config, path)?;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = run_experiment(kind, &config, threads)?;
    match cli.format {
        Format::Csv => report.write_csv(out)?,
        _ => emit_json(out, &report)?,
    }
    Ok(if report.status == Status::Fail { EXIT_FAILED } else { EXIT_OK })
}
