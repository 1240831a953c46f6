//! `hoconc` — concolic testing for higher-order programs.
//!
//! Exit codes: 0 no bug found within budget; 1 bug found (or corpus
//! expectation unmet); 2 usage or parse error; 3 solver or environment
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use hoconc::corpus::{load_corpus, run_corpus};
use hoconc::search::{path_tree_dot, run_full, Report, SearchConfig};
use hoconc::solver::SolverConfig;
use hoconc_core::lang::parse_program;

#[derive(Parser)]
#[command(name = "hoconc", version, about = "Concolic tester for higher-order programs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// SMT solver executable (default: autodetect z3/cvc5/cvc4, then the
    /// bundled hoconc-minismt; HOCONC_SOLVER overrides).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Maximum concolic iterations per program.
    #[arg(long, default_value_t = 10_000)]
    max_iters: u64,
    /// Wall-clock budget per program, in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Evaluation fuel per run.
    #[arg(long, default_value_t = 1_000_000)]
    fuel: u64,
    /// Search seed; runs with equal seed and configuration are
    /// byte-identical (the search is deterministic).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the predicted path of every solver-backed candidate.
    #[arg(long)]
    verify_predictions: bool,
    /// Treat stuck states (type errors) as bugs, not just (error).
    #[arg(long)]
    count_stuck_as_bug: bool,
    /// Per-query solver timeout, in seconds.
    #[arg(long, default_value_t = 10)]
    solver_timeout: u64,
}

impl CommonFlags {
    fn to_config(&self) -> SearchConfig {
        SearchConfig {
            max_iterations: self.max_iters,
            wall_clock_budget: Duration::from_secs(self.timeout),
            fuel_per_run: self.fuel,
            seed: self.seed,
            solver: SolverConfig {
                command: self.solver.clone(),
                args: Vec::new(),
                timeout: Duration::from_secs(self.solver_timeout),
            },
            debug_verify_prediction: self.verify_predictions,
            count_stuck_as_bug: self.count_stuck_as_bug,
            ..SearchConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Search one program for an input that triggers (error).
    Test {
        /// Program file in `(inputs ...) (main ...)` syntax.
        file: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
        /// Write the JSONL iteration trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the explored path tree as DOT to this file.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Run every annotated `.sexp` program in a directory.
    Corpus {
        dir: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
        /// Run programs concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write per-program JSONL traces and DOT trees into this directory.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        /// Add a wall-clock column to the summary (not byte-stable).
        #[arg(long)]
        timings: bool,
    },
}

fn cmd_test(
    file: &PathBuf,
    flags: &CommonFlags,
    trace: Option<&PathBuf>,
    dot: Option<&PathBuf>,
) -> ExitCode {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("hoconc: cannot read {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    let program = match parse_program(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("hoconc: {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    let cfg = flags.to_config();
    let output = match run_full(&program, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("hoconc: {e}");
            return ExitCode::from(3);
        }
    };
    if let Some(path) = trace {
        let mut text = String::new();
        for rec in &output.records {
            text.push_str(&serde_json::to_string(rec).expect("record serializes"));
            text.push('\n');
        }
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("hoconc: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if let Some(path) = dot {
        if let Err(e) = std::fs::write(path, path_tree_dot(&output.records)) {
            eprintln!("hoconc: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if cfg.debug_verify_prediction && output.stats.prediction_violations > 0 {
        eprintln!(
            "hoconc: {} prediction violation(s) detected",
            output.stats.prediction_violations
        );
    }
    print!("{}", hoconc::report::render(&program, &output.report));
    match output.report {
        Report::BugFound { .. } => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    }
}

fn cmd_corpus(
    dir: &Path,
    flags: &CommonFlags,
    jobs: usize,
    trace_dir: Option<&PathBuf>,
    timings: bool,
) -> ExitCode {
    let entries = match load_corpus(dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("hoconc: {e}");
            return ExitCode::from(2);
        }
    };
    let cfg = flags.to_config();
    let outcome = match run_corpus(&entries, &cfg, jobs, trace_dir.map(|p| p.as_path())) {
        Ok(o) => o,
        Err(hoconc::corpus::CorpusError::Solver(e)) => {
            eprintln!("hoconc: {e}");
            return ExitCode::from(3);
        }
        Err(e) => {
            eprintln!("hoconc: {e}");
            return ExitCode::from(2);
        }
    };
    if timings {
        print!("{}", outcome.timed_summary());
    }
    print!("{}", outcome.machine_summary());
    if outcome.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Cmd::Test { file, flags, trace, dot } => {
            cmd_test(file, flags, trace.as_ref(), dot.as_ref())
        }
        Cmd::Corpus { dir, flags, jobs, trace_dir, timings } => {
            cmd_corpus(dir, flags, *jobs, trace_dir.as_ref(), *timings)
        }
    }
}
