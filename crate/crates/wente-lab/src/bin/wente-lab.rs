//! Batch driver for the verification suites.
//!
//! Subcommands: validate-solver | random-suite | dyadic-audit |
//! counterexample | lorentz-check | all. Each run writes one CSV per
//! experiment plus a plain-text summary (one criterion per line) and exits
//! with code 0 iff every criterion passed.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wente_lab::suites::{
    run_all, run_counterexample, run_dyadic_audit, run_lorentz_check, run_random_suite,
    run_solver_validation, ExperimentConfig, SuiteReport,
};

#[derive(Parser)]
#[command(name = "wente-lab", about = "Verification suites for weighted Wente inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// RNG seed; a fixed seed gives byte-identical CSV output.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Dyadic levels resolved by the grid.
    #[arg(long, global = true, default_value_t = 8)]
    grid_levels: u32,

    /// Radial nodes per dyadic level.
    #[arg(long, global = true, default_value_t = 16)]
    nodes_per_level: u32,

    /// Equispaced angles.
    #[arg(long, global = true, default_value_t = 128)]
    n_theta: usize,

    /// Random (a, b) pairs per suite.
    #[arg(long, global = true, default_value_t = 100)]
    samples: usize,

    /// Comma-separated alpha list for the divergence sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    alpha_list: Option<Vec<f64>>,

    /// Weight exponent used by single-beta runs.
    #[arg(long, global = true, default_value_t = 0.5)]
    beta: f64,

    /// Output directory for CSV artifacts and the summary report.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// key=value file overriding pass/fail caps.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact solutions, oracle equivalence, refinement order.
    ValidateSolver,
    /// Seeded random pairs: sup constant, weighted ratios, Lorentz ratios.
    RandomSuite,
    /// Per-level inequality audit and the decomposition contract.
    DyadicAudit,
    /// The glued extremal family: closed forms and the divergence sweep.
    Counterexample,
    /// Lorentz closed forms and the weight comparison.
    LorentzCheck,
    /// Everything.
    All,
}

fn parse_overrides(path: &PathBuf) -> std::io::Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            if let Ok(val) = v.trim().parse::<f64>() {
                map.insert(k.trim().to_string(), val);
            } else {
                eprintln!("warning: ignoring malformed config line: {line}");
            }
        }
    }
    Ok(map)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let overrides = match &cli.config {
        Some(path) => match parse_overrides(path) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error reading config {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => BTreeMap::new(),
    };

    let mut cfg = ExperimentConfig {
        seed: cli.seed,
        n_theta: cli.n_theta,
        levels: cli.grid_levels,
        nodes_per_level: cli.nodes_per_level,
        samples: cli.samples,
        beta: cli.beta,
        overrides,
        ..ExperimentConfig::default()
    };
    if let Some(list) = cli.alpha_list {
        cfg.alpha_list = list;
    }

    let result = match cli.command {
        Command::ValidateSolver => run_solver_validation(&cfg),
        Command::RandomSuite => run_random_suite(&cfg),
        Command::DyadicAudit => run_dyadic_audit(&cfg),
        Command::Counterexample => run_counterexample(&cfg),
        Command::LorentzCheck => run_lorentz_check(&cfg),
        Command::All => run_all(&cfg),
    };

    let report: SuiteReport = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let text = report.render_text();
    print!("{text}");
    let overall = report.overall();
    println!(
        "overall: {}",
        if overall { "PASS" } else { "FAIL" }
    );

    if let Some(dir) = cli.out {
        if let Err(e) = std::fs::create_dir_all(&dir) {
            eprintln!("error creating {}: {e}", dir.display());
            return ExitCode::from(2);
        }
        for (name, contents) in report.artifacts.iter() {
            if let Err(e) = std::fs::write(dir.join(name), contents) {
                eprintln!("error writing {name}: {e}");
                return ExitCode::from(2);
            }
        }
        let mut summary = text;
        summary.push_str(&format!(
            "overall: {}\n",
            if overall { "PASS" } else { "FAIL" }
        ));
        if let Err(e) = std::fs::write(dir.join("summary.txt"), summary) {
            eprintln!("error writing summary: {e}");
            return ExitCode::from(2);
        }
    }

    if overall {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
