//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one PASS/FAIL line. The shipped corpus is run once (with
//! prediction verification on) and shared across criteria; the determinism
//! criterion re-runs it and compares bytes.

use std::collections::{BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use hoconc::corpus::{load_corpus, run_corpus, CorpusEntry, CorpusOutcome, Expectation};
use hoconc::search::{run_full, seed_store, Report, SearchConfig};
use hoconc::solver::{Solver, SolverConfig};
use hoconc_core::canonical::{check_proper, fingerprint, reify_all, IdSource};
use hoconc_core::evolve::{enumerate_mutations, EvolvePolicy, MutationRule};
use hoconc_core::gen::{random_program, Rng};
use hoconc_core::interp::{eval_user, BugKind, Outcome};
use hoconc_core::lang::parse_program;
use hoconc_core::machine::concolic_eval;
use hoconc_core::smt::{apply_model, verify_model, SatResult};

const BUG_ITERATION_BOUND: u64 = 5_000;
const PER_PROGRAM_SECONDS: f64 = 60.0;
const CORPUS_TOTAL_SECONDS: f64 = 300.0;
const MODEL_SAMPLE_TARGET: u64 = 1_000;
const RANDOM_PROGRAMS: usize = 120;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn acceptance_config() -> SearchConfig {
    SearchConfig {
        max_iterations: BUG_ITERATION_BOUND,
        wall_clock_budget: Duration::from_secs(60),
        debug_verify_prediction: true,
        ..SearchConfig::default()
    }
}

struct SharedRun {
    entries: Vec<CorpusEntry>,
    outcome: CorpusOutcome,
    elapsed: Duration,
}

fn shared() -> &'static SharedRun {
    static SHARED: OnceLock<SharedRun> = OnceLock::new();
    SHARED.get_or_init(|| {
        let entries = load_corpus(&fixtures_dir()).expect("fixture corpus loads");
        let started = Instant::now();
        let outcome =
            run_corpus(&entries, &acceptance_config(), 1, None).expect("corpus run completes");
        let elapsed = started.elapsed();
        SharedRun { entries, outcome, elapsed }
    })
}

fn pass(name: &str, detail: String) {
    println!("ACCEPTANCE {name}: PASS ({detail})");
}

/// Corpus bug-finding: every `expect: bug` fixture reports a bug within the
/// iteration and time bounds, every `expect: no-bug` fixture exhausts or
/// hits its budget, the corpus covers all mutation rules, and the whole run
/// stays under five minutes.
#[test]
fn criterion_corpus_bug_finding() {
    let shared = shared();
    let bug_fixtures: Vec<_> =
        shared.entries.iter().filter(|e| e.expect == Expectation::Bug).collect();
    assert!(
        bug_fixtures.len() >= 10,
        "need at least 10 bug fixtures, have {}",
        bug_fixtures.len()
    );
    for name in ["sum-gate", "call-site-variant"] {
        assert!(
            bug_fixtures.iter().any(|e| e.name == name),
            "required fixture `{name}` missing"
        );
    }

    let mut failures = Vec::new();
    let mut trail_rules: BTreeSet<&'static str> = BTreeSet::new();
    for row in &shared.outcome.rows {
        if !row.pass {
            failures.push(format!("{}: verdict {}", row.name, row.report.verdict_name()));
        }
        match (&row.expect, &row.report) {
            (Expectation::Bug, Report::BugFound { iterations, trail, .. }) => {
                if *iterations > BUG_ITERATION_BOUND {
                    failures.push(format!("{}: {iterations} iterations", row.name));
                }
                if row.seconds > PER_PROGRAM_SECONDS {
                    failures.push(format!("{}: {:.1}s", row.name, row.seconds));
                }
                for r in trail {
                    trail_rules.insert(r.name());
                }
            }
            (Expectation::NoBug, r) => {
                assert!(
                    matches!(r, Report::Exhausted { .. } | Report::BudgetExceeded { .. }),
                    "{}: unexpected verdict",
                    row.name
                );
            }
            _ => {}
        }
    }
    for rule in MutationRule::ALL {
        if !trail_rules.contains(rule.name()) {
            failures.push(format!("mutation rule `{}` not exercised on any winning trail", rule.name()));
        }
    }
    if shared.elapsed.as_secs_f64() > CORPUS_TOTAL_SECONDS {
        failures.push(format!("corpus took {:.1}s", shared.elapsed.as_secs_f64()));
    }
    assert!(failures.is_empty(), "corpus failures:\n{}", failures.join("\n"));
    pass(
        "corpus-bug-finding",
        format!(
            "{} fixtures, {} bug / {} no-bug, all rules on winning trails, {:.1}s total",
            shared.outcome.rows.len(),
            bug_fixtures.len(),
            shared.outcome.rows.len() - bug_fixtures.len(),
            shared.elapsed.as_secs_f64()
        ),
    );
}

/// Soundness: every reported bug — across the corpus and across ≥100
/// randomly generated programs — replays to an explicit error under the
/// plain evaluator. Zero tolerance.
#[test]
fn criterion_soundness() {
    let shared = shared();
    let mut corpus_bugs = 0;
    for row in &shared.outcome.rows {
        if let Report::BugFound { replay_confirmed, store, .. } = &row.report {
            corpus_bugs += 1;
            assert!(*replay_confirmed, "{}: replay not confirmed", row.name);
            // Independent re-replay, not trusting the driver's flag.
            let entry = shared.entries.iter().find(|e| e.name == row.name).unwrap();
            let reified =
                reify_all(store, entry.program.inputs.iter().map(|(n, _)| n.clone())).unwrap();
            let outcome = eval_user(&entry.program, &reified, 8_000_000);
            assert!(
                matches!(outcome, Outcome::Bug { kind: BugKind::ExplicitError, .. }),
                "{}: independent replay gave {outcome:?}",
                row.name
            );
        }
    }

    let mut cfg = acceptance_config();
    cfg.max_iterations = 60;
    cfg.wall_clock_budget = Duration::from_secs(10);
    let mut random_bugs = 0;
    let mut ran = 0;
    let mut seed = 0u64;
    while ran < RANDOM_PROGRAMS {
        seed += 1;
        let program = random_program(&mut Rng::new(seed.wrapping_mul(0x9E37_79B9) | 1));
        ran += 1;
        let out = run_full(&program, &cfg).expect("search runs");
        if let Report::BugFound { store, replay_confirmed, .. } = &out.report {
            random_bugs += 1;
            assert!(replay_confirmed, "random program seed {seed}: replay not confirmed");
            let reified =
                reify_all(store, program.inputs.iter().map(|(n, _)| n.clone())).unwrap();
            let outcome = eval_user(&program, &reified, 8_000_000);
            assert!(
                matches!(outcome, Outcome::Bug { kind: BugKind::ExplicitError, .. }),
                "random program seed {seed}: independent replay gave {outcome:?}"
            );
        }
    }
    assert!(ran >= 100, "need at least 100 random programs, ran {ran}");
    assert!(random_bugs > 0, "random suite found no bugs at all; generator too tame");
    pass(
        "soundness",
        format!(
            "{corpus_bugs} corpus bugs + {random_bugs}/{ran} random-program bugs all replayed"
        ),
    );
}

/// Concolic property: with prediction verification on, every solver-backed
/// candidate executed during the corpus runs follows a path whose
/// first-order and branch constraints extend its prediction. Zero
/// violations.
#[test]
fn criterion_concolic_property() {
    let shared = shared();
    let stats = &shared.outcome.stats;
    assert!(stats.prediction_checks > 0, "no solver-backed candidates were checked");
    assert_eq!(
        stats.prediction_violations, 0,
        "{} prediction violation(s)",
        stats.prediction_violations
    );
    pass(
        "concolic-property",
        format!("{} solver-backed candidates verified, 0 violations", stats.prediction_checks),
    );
}

/// Encoder oracle: for at least 1000 satisfiable queries sampled from
/// corpus-program runs, re-evaluating every asserted constraint under the
/// model reproduces the recorded outcomes exactly. Zero violations.
#[test]
fn criterion_encoder_oracle() {
    let shared = shared();
    let mut checked = shared.outcome.stats.model_checks;
    let mut violations = shared.outcome.stats.model_violations;

    // The search solves lazily, so supplement the driver's checks by
    // exhaustively solving every solver-backed candidate along a bounded
    // exploration of each corpus program.
    let solver = Solver::resolve(&SolverConfig::default()).expect("solver resolves");
    let policy = EvolvePolicy::default();
    'outer: for entry in &shared.entries {
        let ids = IdSource::new();
        let mut frontier = VecDeque::new();
        let mut seen = std::collections::HashSet::new();
        let seed = seed_store(&entry.program, &ids);
        seen.insert(fingerprint(&seed, &entry.program.inputs));
        frontier.push_back(seed);
        let mut explored = 0;
        while let Some(store) = frontier.pop_front() {
            if explored >= 400 {
                break;
            }
            explored += 1;
            let (_, path) = concolic_eval(&entry.program, &store, 1_000_000);
            for cand in enumerate_mutations(&store, &path, &policy, &ids) {
                let Some(query) = &cand.query else {
                    let fp = fingerprint(&cand.store, &entry.program.inputs);
                    if seen.insert(fp) {
                        frontier.push_back(cand.store);
                    }
                    continue;
                };
                if let SatResult::Sat(model) = solver.solve(query).expect("solver runs") {
                    if let Ok(updated) = apply_model(&cand.store, &model) {
                        checked += 1;
                        if verify_model(&cand.predicted, &updated).is_err() {
                            violations += 1;
                        }
                        let fp = fingerprint(&updated, &entry.program.inputs);
                        if seen.insert(fp) {
                            frontier.push_back(updated);
                        }
                    }
                }
            }
            if checked >= MODEL_SAMPLE_TARGET && violations == 0 {
                break 'outer;
            }
        }
    }

    assert!(
        checked >= MODEL_SAMPLE_TARGET,
        "only {checked} satisfiable models sampled (need {MODEL_SAMPLE_TARGET})"
    );
    assert_eq!(violations, 0, "{violations} model mismatch(es)");
    pass("encoder-oracle", format!("{checked} models re-checked by trace evaluation, 0 mismatches"));
}

/// Properness closure: every store the search ever enqueued passed the
/// properness check. Zero violations.
#[test]
fn criterion_properness_closure() {
    let shared = shared();
    let stats = &shared.outcome.stats;
    assert!(stats.properness_checks > 0);
    assert_eq!(stats.properness_violations, 0);
    // Belt and braces: the stores reported as counterexamples are proper.
    for row in &shared.outcome.rows {
        if let Report::BugFound { store, .. } = &row.report {
            assert!(check_proper(store).is_ok(), "{}: improper counterexample store", row.name);
        }
    }
    pass(
        "properness-closure",
        format!("{} enqueue-time checks, 0 violations", stats.properness_checks),
    );
}

/// Determinism: two corpus runs with identical seed and configuration
/// produce byte-identical summaries and traces.
#[test]
fn criterion_determinism() {
    let shared = shared();
    let rerun =
        run_corpus(&shared.entries, &acceptance_config(), 1, None).expect("corpus re-runs");
    assert_eq!(
        shared.outcome.machine_summary(),
        rerun.machine_summary(),
        "summaries differ between identical runs"
    );
    let serialize = |outcome: &CorpusOutcome| -> Vec<String> {
        outcome
            .rows
            .iter()
            .flat_map(|row| {
                row.output.records.iter().map(|r| serde_json::to_string(r).expect("serializes"))
            })
            .collect()
    };
    let a = serialize(&shared.outcome);
    let b = serialize(&rerun);
    assert_eq!(a, b, "iteration traces differ between identical runs");
    pass("determinism", format!("{} trace records byte-identical across two runs", a.len()));
}

/// Micro-walkthrough regression: the negate-simple fixture logs exactly
/// `[first-order 0 (= x 3)]` on its first iteration and reports the bug
/// with x = 3 within three iterations.
#[test]
fn criterion_micro_walkthrough() {
    let program = parse_program(
        &std::fs::read_to_string(fixtures_dir().join("negate-simple.sexp")).unwrap(),
    )
    .unwrap();
    let out = run_full(&program, &acceptance_config()).expect("search runs");
    let first = &out.records[0];
    assert_eq!(first.path.len(), 1, "first iteration must log exactly one constraint");
    let c = &first.path[0];
    assert_eq!(c.kind, "first-order");
    assert_eq!(c.outcome, Some(0));
    assert_eq!(c.trace.as_deref(), Some("(= x 3)"));
    match &out.report {
        Report::BugFound { iterations, reified, replay_confirmed, .. } => {
            assert!(*iterations <= 3, "took {iterations} iterations");
            assert!(replay_confirmed);
            assert_eq!(
                reified.get("x"),
                Some(&hoconc_core::interp::UserValue::Num(3)),
                "counterexample must pin x = 3"
            );
        }
        other => panic!("expected a bug report, got {other:?}"),
    }
    pass("micro-walkthrough", "first path is [first-order 0 (= x 3)], bug at x = 3".to_string());
}
