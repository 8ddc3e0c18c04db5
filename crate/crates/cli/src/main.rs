//! `khessian`: run solver, limit and audit pipelines from a TOML config.
//!
//! Exit codes: 0 success, 1 audit failure, 2 config error, 3 solver failure.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod plots;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Mode, RunConfig};
use run::{Outcome, RunError};

#[derive(Parser)]
#[command(name = "khessian", version, about = "Solvers and estimate audits for the complex k-Hessian equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweeps of the symmetric-function inequalities.
    CheckInequalities(Common),
    /// Radial exterior solves with the full estimate audit per (eps, R) cell.
    SolveRadial(Common),
    /// Solves on a Reinhardt grid around a ball or ellipsoid hole.
    SolveReinhardt(Common),
    /// Monotonicity and Cauchy tables over the eps and R lists.
    LimitStudy(Common),
    /// Audits a radial CSV export.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Radial CSV to audit; overrides `audit.input`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Refinement study against an exact solution.
    Manufactured(Common),
    /// Runs the mode named in the config.
    Run(Common),
    /// Checks a config and prints its derived constants.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Writes plot data and gnuplot scripts for the run in `--out`.
    Plots {
        /// Directory of a finished run.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<RunConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn set_threads(common: &Common) {
    if let Some(n) = common.threads {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn execute(common: &Common, mode: Option<Mode>, input: Option<PathBuf>) -> Result<Outcome, RunError> {
    set_threads(common);
    let mut cfg = load(common)?;
    if input.is_some() {
        cfg.audit.input = input;
    }
    let mode = match mode.or(cfg.mode) {
        Some(m) => m,
        None => {
            return Err(RunError::Config(config::ConfigError::Invalid(vec![config::Violation {
                parameter: "mode".into(),
                value: "(unset)".into(),
                admissible: "one of check-inequalities, solve-radial, solve-reinhardt, limit-study, audit, manufactured".into(),
            }])))
        }
    };
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("khessian-out").join(mode.label()));
    let outcome = run::run(&cfg, mode, &out)?;
    match outcome {
        Outcome::Passed => println!("{}: all audits passed; artifacts in {}", mode.label(), out.display()),
        Outcome::AuditFailed => println!("{}: audit failures; full reports in {}", mode.label(), out.display()),
    }
    Ok(outcome)
}

fn validate(common: &Common, mode: Option<Mode>) -> Result<Outcome, RunError> {
    let cfg = load(common)?;
    let mode = mode.or(cfg.mode).unwrap_or(Mode::SolveRadial);
    print!("[derived]\n{}", cfg.derived());
    cfg.validate(mode)?;
    println!("config_hash = {}\nvalid for {}", cfg.hash(mode), mode.label());
    Ok(Outcome::Passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CheckInequalities(c) => execute(&c, Some(Mode::CheckInequalities), None),
        Command::SolveRadial(c) => execute(&c, Some(Mode::SolveRadial), None),
        Command::SolveReinhardt(c) => execute(&c, Some(Mode::SolveReinhardt), None),
        Command::LimitStudy(c) => execute(&c, Some(Mode::LimitStudy), None),
        Command::Audit { common, input } => execute(&common, Some(Mode::Audit), input),
        Command::Manufactured(c) => execute(&c, Some(Mode::Manufactured), None),
        Command::Run(c) => execute(&c, None, None),
        Command::Validate { common, mode } => validate(&common, mode),
        Command::Plots { out } => plots::export_plots(&out).map(|files| {
            if files.is_empty() {
                println!("no plottable data in {} (empty audit): no plot files written", out.display());
            } else {
                println!("wrote {} plot files to {}", files.len(), out.join("plots").display());
            }
            Outcome::Passed
        }),
    };
    match result {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let RunError::Solver {
                source: khessian::Error::NonConvergence { history, .. },
                ..
            } = &e
            {
                let tail: Vec<String> = history.iter().rev().take(5).rev().map(|r| format!("{r:e}")).collect();
                eprintln!("last residuals: {}", tail.join(", "));
            }
            ExitCode::from(e.exit_code())
        }
    }
}
