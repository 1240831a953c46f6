//! Driving an external SMT-LIB solver process: one process per query,
//! script over stdin, verdict and model from stdout.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use hoconc_core::smt::{self, Query, SatResult};
use wait_timeout::ChildExt;

/// Environment variable overriding solver discovery.
pub const SOLVER_ENV: &str = "HOCONC_SOLVER";

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Explicit solver executable; when unset, `HOCONC_SOLVER` and then
    /// `PATH` (z3, cvc5, cvc4) are probed, falling back to the bundled
    /// `hoconc-minismt` next to the current executable.
    pub command: Option<PathBuf>,
    /// Extra arguments. For known solvers the right stdin-mode flags are
    /// inferred; use this to override.
    pub args: Vec<String>,
    /// Per-query wall-clock timeout; expiry yields `Unknown`.
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { command: None, args: Vec::new(), timeout: Duration::from_secs(10) }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("could not launch solver `{command}`: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("no SMT solver found (probed {probed}); install z3 or set {SOLVER_ENV}")]
    NotFound { probed: String },
    #[error("solver protocol error: {0}")]
    Protocol(String),
}

/// A resolved solver: executable plus stdin-mode arguments.
#[derive(Debug, Clone)]
pub struct Solver {
    pub command: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
}

fn stdin_args_for(command: &Path) -> Vec<String> {
    let base = command.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    match base {
        "z3" => vec!["-in".to_string()],
        // cvc5/cvc4 read stdin when no input file is given.
        "cvc5" | "cvc4" => vec!["--lang".to_string(), "smt2".to_string()],
        _ => Vec::new(),
    }
}

fn find_in_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        let candidate = dir.join(name);
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}

fn bundled_minismt() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let mut dir = exe.parent()?.to_path_buf();
    // Test binaries live one level down (target/debug/deps); search upward a
    // couple of levels for the sibling solver binary.
    for _ in 0..3 {
        let candidate = dir.join("hoconc-minismt");
        if candidate.is_file() {
            return Some(candidate);
        }
        dir = dir.parent()?.to_path_buf();
    }
    None
}

impl Solver {
    /// Resolve the solver executable once per search.
    pub fn resolve(cfg: &SolverConfig) -> Result<Solver, SolverError> {
        let mut probed = Vec::new();
        let command = if let Some(cmd) = &cfg.command {
            Some(cmd.clone())
        } else if let Some(env) = std::env::var_os(SOLVER_ENV) {
            Some(PathBuf::from(env))
        } else {
            let mut found = None;
            for name in ["z3", "cvc5", "cvc4"] {
                probed.push(name.to_string());
                if let Some(p) = find_in_path(name) {
                    found = Some(p);
                    break;
                }
            }
            if found.is_none() {
                probed.push("bundled hoconc-minismt".to_string());
                found = bundled_minismt();
            }
            found
        };
        let command = command.ok_or_else(|| SolverError::NotFound { probed: probed.join(", ") })?;
        let args = if cfg.args.is_empty() { stdin_args_for(&command) } else { cfg.args.clone() };
        Ok(Solver { command, args, timeout: cfg.timeout })
    }

    /// Run one query in a fresh solver process.
    pub fn solve(&self, query: &Query) -> Result<SatResult, SolverError> {
        let script = smt::to_script(query);
        self.solve_script(&script)
    }

    pub fn solve_script(&self, script: &str) -> Result<SatResult, SolverError> {
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SolverError::Spawn {
                command: self.command.display().to_string(),
                source,
            })?;

        // Feed the script and close stdin so the solver sees EOF.
        if let Some(mut stdin) = child.stdin.take() {
            let _ = stdin.write_all(script.as_bytes());
        }

        // Read stdout on a helper thread so a filled pipe can never block
        // the timeout wait.
        let mut stdout = child.stdout.take().expect("stdout was piped");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });

        let timed_out = match child
            .wait_timeout(self.timeout)
            .map_err(|source| SolverError::Spawn {
                command: self.command.display().to_string(),
                source,
            })? {
            Some(_status) => false,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                true
            }
        };
        let output = reader.join().unwrap_or_default();
        if timed_out {
            return Ok(SatResult::Unknown(format!(
                "timeout after {:?}",
                self.timeout
            )));
        }
        smt::parse_solver_output(&output).map_err(|e| SolverError::Protocol(e.message))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hoconc_core::path::{Path as CPath, PathConstraint};
    use hoconc_core::smt::encode;
    use hoconc_core::trace::{Trace, TraceOp};

    fn bundled() -> Solver {
        let cfg = SolverConfig {
            command: Some(bundled_minismt().expect("bundled solver built")),
            ..SolverConfig::default()
        };
        Solver::resolve(&cfg).unwrap()
    }

    fn fo(outcome: bool, trace: Trace) -> CPath {
        CPath(vec![PathConstraint::FirstOrder { outcome, trace }])
    }

    #[test]
    fn sat_with_model() {
        let solver = bundled();
        let t = Trace::op(TraceOp::NumEq, Trace::var("x"), Trace::lit(3));
        let q = encode(&fo(true, t), &hoconc_core::canonical::Store::new());
        match solver.solve(&q).unwrap() {
            SatResult::Sat(m) => assert_eq!(m.get("x"), Some(&3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsat_on_conflict() {
        let solver = bundled();
        let t3 = Trace::op(TraceOp::NumEq, Trace::var("x"), Trace::lit(3));
        let t4 = Trace::op(TraceOp::NumEq, Trace::var("x"), Trace::lit(4));
        let path = CPath(vec![
            PathConstraint::FirstOrder { outcome: true, trace: t3 },
            PathConstraint::FirstOrder { outcome: true, trace: t4 },
        ]);
        let q = encode(&path, &hoconc_core::canonical::Store::new());
        assert_eq!(solver.solve(&q).unwrap(), SatResult::Unsat);
    }

    #[test]
    fn nonlinear_never_claims_sat_for_impossible() {
        let solver = bundled();
        let square = Trace::op(
            TraceOp::NumEq,
            Trace::op(TraceOp::Mul, Trace::var("x"), Trace::var("x")),
            Trace::lit(2),
        );
        let q = encode(&fo(true, square), &hoconc_core::canonical::Store::new());
        match solver.solve(&q).unwrap() {
            SatResult::Unsat | SatResult::Unknown(_) => {}
            SatResult::Sat(m) => panic!("x*x = 2 cannot have an integer model: {m:?}"),
        }
    }

    #[test]
    fn failed_branch_conflicting_with_required_value_is_unsat() {
        // A recorded failing clause test, (= (+ k 1) (* k 2)) = 0, pins
        // k != 1; requiring (= k 1) on top must come back unsat, never sat.
        let solver = bundled();
        let clause_test = Trace::op(
            TraceOp::NumEq,
            Trace::op(TraceOp::Add, Trace::var("k"), Trace::lit(1)),
            Trace::op(TraceOp::Mul, Trace::var("k"), Trace::lit(2)),
        );
        let requirement = Trace::op(TraceOp::NumEq, Trace::var("k"), Trace::lit(1));
        let path = CPath(vec![
            PathConstraint::Branch {
                label: hoconc_core::canonical::Label(0),
                outcome: false,
                trace: clause_test,
            },
            PathConstraint::FirstOrder { outcome: true, trace: requirement },
        ]);
        let q = encode(&path, &hoconc_core::canonical::Store::new());
        assert_eq!(solver.solve(&q).unwrap(), SatResult::Unsat);
    }

    #[test]
    fn timeout_maps_to_unknown() {
        let solver = Solver {
            command: PathBuf::from("/bin/sh"),
            args: vec!["-c".into(), "sleep 5".into()],
            timeout: Duration::from_millis(100),
        };
        match solver.solve_script("(check-sat)").unwrap() {
            SatResult::Unknown(reason) => assert!(reason.contains("timeout"), "{reason}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spawn_failure_is_reported() {
        let solver = Solver {
            command: PathBuf::from("/nonexistent/solver"),
            args: vec![],
            timeout: Duration::from_secs(1),
        };
        assert!(matches!(solver.solve_script("(check-sat)"), Err(SolverError::Spawn { .. })));
    }
}
