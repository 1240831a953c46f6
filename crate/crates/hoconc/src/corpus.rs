//! Corpus harness: run every annotated program in a directory and compare
//! verdicts against expectations.
//!
//! Programs are `.sexp` files with a leading annotation comment:
//!
//! ```text
//! ;; expect: bug          — the search must report a counterexample
//! ;; expect: no-bug       — the search must exhaust or hit its budget
//! ;; max-iters: 200       — optional per-program iteration cap
//! ```

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use hoconc_core::lang::{parse_program, Program};

use crate::search::{path_tree_dot, run_full, Report, RunOutput, RunStats, SearchConfig};
use crate::solver::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Bug,
    NoBug,
}

impl Expectation {
    pub fn name(self) -> &'static str {
        match self {
            Expectation::Bug => "bug",
            Expectation::NoBug => "no-bug",
        }
    }

    fn met_by(self, report: &Report) -> bool {
        match self {
            Expectation::Bug => matches!(report, Report::BugFound { .. }),
            Expectation::NoBug => {
                matches!(report, Report::Exhausted { .. } | Report::BudgetExceeded { .. })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub path: PathBuf,
    pub expect: Expectation,
    pub max_iters: Option<u64>,
    pub program: Program,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: missing `;; expect: bug|no-bug` annotation")]
    MissingAnnotation { path: String },
    #[error("{path}: {message}")]
    BadProgram { path: String, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Scan a directory for annotated `.sexp` programs, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let rd = std::fs::read_dir(dir)
        .map_err(|source| CorpusError::Io { path: dir.display().to_string(), source })?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("sexp"))
        .collect();
    files.sort();
    let mut entries = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path)
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        let mut expect = None;
        let mut max_iters = None;
        for line in text.lines() {
            let Some(rest) = line.trim().strip_prefix(";;") else {
                if line.trim().is_empty() {
                    continue;
                }
                break;
            };
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("expect:") {
                expect = match v.trim() {
                    "bug" => Some(Expectation::Bug),
                    "no-bug" => Some(Expectation::NoBug),
                    _ => None,
                };
            } else if let Some(v) = rest.strip_prefix("max-iters:") {
                max_iters = v.trim().parse::<u64>().ok();
            }
        }
        let expect = expect
            .ok_or_else(|| CorpusError::MissingAnnotation { path: path.display().to_string() })?;
        let program = parse_program(&text).map_err(|e| CorpusError::BadProgram {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("program")
            .to_string();
        entries.push(CorpusEntry { name, path, expect, max_iters, program });
    }
    Ok(entries)
}

#[derive(Debug)]
pub struct CorpusRow {
    pub name: String,
    pub expect: Expectation,
    pub report: Report,
    pub seconds: f64,
    pub pass: bool,
    pub output: RunOutput,
}

#[derive(Debug)]
pub struct CorpusOutcome {
    pub rows: Vec<CorpusRow>,
    pub stats: RunStats,
    pub all_pass: bool,
}

impl CorpusOutcome {
    /// Deterministic summary (no timings): byte-identical across runs with
    /// the same seed and configuration.
    pub fn machine_summary(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(7);
        out.push_str(&format!(
            "{:<width$}  {:<8}  {:<16}  {:>10}  {}\n",
            "program", "expect", "verdict", "iterations", "status"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:<8}  {:<16}  {:>10}  {}\n",
                row.name,
                row.expect.name(),
                row.report.verdict_name(),
                row.report.iterations(),
                if row.pass { "ok" } else { "FAIL" }
            ));
        }
        out.push_str(&format!(
            "{} program(s), {} passed, {} failed\n",
            self.rows.len(),
            self.rows.iter().filter(|r| r.pass).count(),
            self.rows.iter().filter(|r| !r.pass).count()
        ));
        out
    }

    /// Summary with a seconds column; inherently not byte-stable.
    pub fn timed_summary(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(7);
        for row in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:<8}  {:<16}  {:>10}  {:>8.2}s  {}\n",
                row.name,
                row.expect.name(),
                row.report.verdict_name(),
                row.report.iterations(),
                row.seconds,
                if row.pass { "ok" } else { "FAIL" }
            ));
        }
        out
    }
}

fn run_entry(entry: &CorpusEntry, base: &SearchConfig) -> Result<CorpusRow, CorpusError> {
    let mut cfg = base.clone();
    if let Some(n) = entry.max_iters {
        cfg.max_iterations = n;
    }
    let started = Instant::now();
    let output = run_full(&entry.program, &cfg)?;
    let seconds = started.elapsed().as_secs_f64();
    let pass = entry.expect.met_by(&output.report);
    Ok(CorpusRow {
        name: entry.name.clone(),
        expect: entry.expect,
        report: output.report.clone(),
        seconds,
        pass,
        output,
    })
}

/// Run every corpus entry (optionally with `jobs` worker threads) and
/// optionally write per-program JSONL traces and DOT trees into
/// `trace_dir`.
pub fn run_corpus(
    entries: &[CorpusEntry],
    cfg: &SearchConfig,
    jobs: usize,
    trace_dir: Option<&Path>,
) -> Result<CorpusOutcome, CorpusError> {
    let jobs = jobs.max(1);
    let results: Vec<Option<Result<CorpusRow, CorpusError>>> =
        (0..entries.len()).map(|_| None).collect();
    let results = Mutex::new(results);
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(entries.len().max(1)) {
            // Interpreter recursion wants room beyond the default stack.
            let builder = std::thread::Builder::new().stack_size(16 * 1024 * 1024);
            builder
                .spawn_scoped(scope, || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= entries.len() {
                        break;
                    }
                    let row = run_entry(&entries[i], cfg);
                    results.lock().unwrap()[i] = Some(row);
                })
                .expect("spawn corpus worker");
        }
    });

    let mut rows = Vec::with_capacity(entries.len());
    let mut stats = RunStats::default();
    for slot in results.into_inner().unwrap() {
        let row = slot.expect("worker filled every slot")?;
        stats.absorb(&row.output.stats);
        rows.push(row);
    }

    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)
            .map_err(|source| CorpusError::Io { path: dir.display().to_string(), source })?;
        for row in &rows {
            let jsonl = dir.join(format!("{}.jsonl", row.name));
            let mut text = String::new();
            for rec in &row.output.records {
                text.push_str(&serde_json::to_string(rec).expect("record serializes"));
                text.push('\n');
            }
            std::fs::write(&jsonl, text)
                .map_err(|source| CorpusError::Io { path: jsonl.display().to_string(), source })?;
            let dot = dir.join(format!("{}.dot", row.name));
            std::fs::write(&dot, path_tree_dot(&row.output.records))
                .map_err(|source| CorpusError::Io { path: dot.display().to_string(), source })?;
        }
    }

    let all_pass = rows.iter().all(|r| r.pass);
    Ok(CorpusOutcome { rows, stats, all_pass })
}
