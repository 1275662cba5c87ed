use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use hklab::bounds::{ConstantsLedger, DEFAULT_LAMBDA};
use hklab::experiment::{run, to_json_string, ExperimentConfig};
use hklab::graph::io::load_graph;
use hklab::metric::AdaptedMetric;

/// Heat-kernel laboratory: run experiments, print constant ledgers, check metrics.
#[derive(Parser)]
#[command(name = "hklab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of an experiment configuration and write its reports.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output` or `hklab-out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (results do not depend on it).
        #[arg(long, env = "HKLAB_THREADS")]
        threads: Option<usize>,
    },
    /// Print every constant of the Gaussian bound with its formula.
    Ledger {
        #[arg(long)]
        gamma: f64,
        #[arg(long = "A", id = "A")]
        a_const: f64,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        /// Lower bound on the speed measure.
        #[arg(long, default_value_t = 1.0)]
        c_theta: f64,
    },
    /// Check that a metric is adapted to a graph.
    CheckMetric {
        graph: PathBuf,
        /// Edge lengths overriding the canonical metric.
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Number of worst vertices and edges to list.
        #[arg(long, default_value_t = 5)]
        worst: usize,
    },
}

fn run_command(config_path: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<ExitCode> {
    let config = ExperimentConfig::load(config_path)?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out = out
        .or_else(|| config.output.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("hklab-out"));
    let summary = run(&config, base, &out)?;
    log::info!("wrote {} files to {}", summary.files.len() + 1, out.display());
    for notice in &summary.notices {
        eprintln!("note: {notice}");
    }
    let t = &summary.tally;
    println!(
        "{} checks: {} passed, {} failed, {} not applicable; reports in {}",
        t.checks,
        t.passed,
        t.failed,
        t.not_applicable,
        out.display()
    );
    Ok(ExitCode::from(summary.exit_code as u8))
}

fn ledger_command(gamma: f64, a_const: f64, lambda: f64, c_theta: f64) -> Result<ExitCode> {
    let ledger = ConstantsLedger::build(gamma, a_const, c_theta, lambda)?;
    print!("{}", to_json_string(&ledger.to_json())?);
    Ok(ExitCode::SUCCESS)
}

fn check_metric_command(graph: &Path, metric: Option<&Path>, worst: usize) -> Result<ExitCode> {
    let g = load_graph(graph).with_context(|| format!("loading {}", graph.display()))?;
    let m = match metric {
        Some(p) => AdaptedMetric::load(&g, p).with_context(|| format!("loading {}", p.display()))?,
        None => AdaptedMetric::canonical(&g),
    };
    let report = m.verify();
    let mut edges: Vec<_> = report.edge_slack.iter().collect();
    edges.sort_by(|a, b| a.slack.total_cmp(&b.slack));
    edges.truncate(worst);
    let out = json!({
        "provenance": report.provenance,
        "passed": report.passed,
        "vertices": g.len(),
        "edges": g.edge_count(),
        "worst_vertices": report.worst_vertices(worst),
        "worst_edges": edges,
    });
    print!("{}", to_json_string(&out)?);
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads } => run_command(&config, out, threads),
        Command::Ledger { gamma, a_const, lambda, c_theta } => ledger_command(gamma, a_const, lambda, c_theta),
        Command::CheckMetric { graph, metric, worst } => check_metric_command(&graph, metric.as_deref(), worst),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
