//! The concolic search loop: seed default inputs, run the machine, grow the
//! frontier with every legal mutation, solve the solver-backed ones, and
//! repeat breadth-first until a replay-confirmed bug or a budget limit.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use hoconc_core::canonical::{
    check_proper, fingerprint, print_store, reify_all, IdSource, Store,
};
use hoconc_core::evolve::{enumerate_mutations, EvolvePolicy, MutationRule};
use hoconc_core::interp::{eval_user, BugKind, Outcome, UserValue};
use hoconc_core::lang::{Ident, InputSort, Program};
use hoconc_core::machine::{concolic_eval, COutcome};
use hoconc_core::path::{verify_prediction, Inspected, Path, PathConstraint};
use hoconc_core::smt::{apply_model, verify_model, SatResult};
use serde::Serialize;

use crate::solver::{Solver, SolverConfig, SolverError};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub max_iterations: u64,
    pub wall_clock_budget: Duration,
    pub fuel_per_run: u64,
    pub frontier_cap: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub policy: EvolvePolicy,
    /// Assert the concolic property on every solver-backed candidate.
    pub debug_verify_prediction: bool,
    /// Treat stuck states as search targets, not just explicit errors.
    pub count_stuck_as_bug: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_iterations: 10_000,
            wall_clock_budget: Duration::from_secs(60),
            fuel_per_run: 1_000_000,
            frontier_cap: 10_000,
            seed: 0,
            solver: SolverConfig::default(),
            policy: EvolvePolicy::default(),
            debug_verify_prediction: false,
            count_stuck_as_bug: false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Report {
    BugFound {
        store: Store,
        reified: BTreeMap<Ident, UserValue>,
        iterations: u64,
        replay_confirmed: bool,
        trail: Vec<MutationRule>,
    },
    Exhausted {
        iterations: u64,
    },
    BudgetExceeded {
        iterations: u64,
    },
}

impl Report {
    pub fn iterations(&self) -> u64 {
        match self {
            Report::BugFound { iterations, .. }
            | Report::Exhausted { iterations }
            | Report::BudgetExceeded { iterations } => *iterations,
        }
    }

    pub fn verdict_name(&self) -> &'static str {
        match self {
            Report::BugFound { .. } => "bug",
            Report::Exhausted { .. } => "exhausted",
            Report::BudgetExceeded { .. } => "budget-exceeded",
        }
    }
}

/// Counters the acceptance criteria audit: model re-checks, prediction
/// checks, and properness checks must show zero violations.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub iterations: u64,
    pub solver_calls: u64,
    pub solver_sat: u64,
    pub solver_unsat: u64,
    pub solver_unknown: u64,
    pub model_checks: u64,
    pub model_violations: u64,
    pub prediction_checks: u64,
    pub prediction_violations: u64,
    pub properness_checks: u64,
    pub properness_violations: u64,
    pub improper_model_drops: u64,
    pub enqueued: u64,
    pub deduped: u64,
    pub pruned_by_cap: u64,
    /// Rule tags of executed (dequeued and run) candidates, counting
    /// truncate-prefix alongside the rule it composed with.
    pub rules_executed: BTreeMap<&'static str, u64>,
}

impl RunStats {
    pub fn absorb(&mut self, other: &RunStats) {
        self.iterations += other.iterations;
        self.solver_calls += other.solver_calls;
        self.solver_sat += other.solver_sat;
        self.solver_unsat += other.solver_unsat;
        self.solver_unknown += other.solver_unknown;
        self.model_checks += other.model_checks;
        self.model_violations += other.model_violations;
        self.prediction_checks += other.prediction_checks;
        self.prediction_violations += other.prediction_violations;
        self.properness_checks += other.properness_checks;
        self.properness_violations += other.properness_violations;
        self.improper_model_drops += other.improper_model_drops;
        self.enqueued += other.enqueued;
        self.deduped += other.deduped;
        self.pruned_by_cap += other.pruned_by_cap;
        for (k, v) in &other.rules_executed {
            *self.rules_executed.entry(k).or_insert(0) += v;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintRecord {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inspected: Option<String>,
}

pub fn constraint_record(c: &PathConstraint) -> ConstraintRecord {
    match c {
        PathConstraint::FirstOrder { outcome, trace } => ConstraintRecord {
            kind: "first-order",
            label: None,
            outcome: Some(*outcome as u8),
            trace: Some(trace.to_string()),
            inspected: None,
        },
        PathConstraint::Test { label, inspected } => ConstraintRecord {
            kind: "test",
            label: Some(label.0),
            outcome: None,
            trace: None,
            inspected: Some(match inspected {
                Inspected::Number(tv) => format!("{tv}"),
                Inspected::FunctionValue => "function".to_string(),
            }),
        },
        PathConstraint::Branch { label, outcome, trace } => ConstraintRecord {
            kind: "branch",
            label: Some(label.0),
            outcome: Some(*outcome as u8),
            trace: Some(trace.to_string()),
            inspected: None,
        },
    }
}

/// Audit record for one enumerated candidate.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub rule: &'static str,
    pub prefix_len: usize,
    pub labels: Vec<u64>,
    /// What became of the candidate: enqueued, dup, unsat, unknown,
    /// improper, or capped.
    pub fate: &'static str,
}

/// One line of the JSONL iteration trace.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<&'static str>,
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<&'static str>,
    pub store: String,
    pub path: Vec<ConstraintRecord>,
    pub outcome: String,
    pub candidates: Vec<AuditRecord>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub stats: RunStats,
    pub records: Vec<IterationRecord>,
}

struct Pending {
    store: Store,
    predicted: Path,
    rule: Option<MutationRule>,
    truncated: bool,
    solver_verdict: Option<&'static str>,
    solver_backed: bool,
    trail: Vec<MutationRule>,
}

/// Initial store: number inputs at 0, function inputs at the simplest
/// canonical function.
pub fn seed_store(p: &Program, ids: &IdSource) -> Store {
    let mut store = Store::new();
    for (name, sort) in &p.inputs {
        match sort {
            InputSort::Number => store.set_number(name.clone(), 0),
            InputSort::Function => {
                store.set_function(name.clone(), hoconc_core::canonical::default_fn(ids))
            }
        }
    }
    store
}

fn outcome_text(o: &COutcome) -> String {
    match o {
        COutcome::Value(v) => format!("value {}", v.print()),
        COutcome::Bug { kind: BugKind::ExplicitError, at } => format!("error at {at}"),
        COutcome::Bug { kind: BugKind::Stuck, at } => format!("stuck at {at}"),
        COutcome::FuelExhausted => "fuel-exhausted".to_string(),
    }
}

/// Run the concolic loop and return just the report.
pub fn run(p: &Program, cfg: &SearchConfig) -> Result<Report, SolverError> {
    run_full(p, cfg).map(|out| out.report)
}

/// Run the concolic loop, also returning audit counters and the full
/// iteration trace.
pub fn run_full(p: &Program, cfg: &SearchConfig) -> Result<RunOutput, SolverError> {
    let solver = Solver::resolve(&cfg.solver)?;
    let ids = IdSource::new();
    let start = Instant::now();
    let mut stats = RunStats::default();
    let mut records = Vec::new();

    let mut frontier: VecDeque<Pending> = VecDeque::new();
    let mut seen: HashSet<String> = HashSet::new();

    let seed = seed_store(p, &ids);
    seen.insert(fingerprint(&seed, &p.inputs));
    frontier.push_back(Pending {
        store: seed,
        predicted: Path::new(),
        rule: None,
        truncated: false,
        solver_verdict: None,
        solver_backed: false,
        trail: Vec::new(),
    });

    let mut iterations: u64 = 0;
    while let Some(cand) = frontier.pop_front() {
        if iterations >= cfg.max_iterations || start.elapsed() > cfg.wall_clock_budget {
            return Ok(RunOutput {
                report: Report::BudgetExceeded { iterations },
                stats,
                records,
            });
        }
        iterations += 1;
        stats.iterations = iterations;

        let (outcome, path) = concolic_eval(p, &cand.store, cfg.fuel_per_run);

        if cand.solver_backed && cfg.debug_verify_prediction {
            stats.prediction_checks += 1;
            if !verify_prediction(&cand.predicted, &path) {
                stats.prediction_violations += 1;
            }
        }

        for rule in cand.rule.iter() {
            *stats.rules_executed.entry(rule.name()).or_insert(0) += 1;
            if cand.truncated {
                *stats.rules_executed.entry(MutationRule::TruncatePrefix.name()).or_insert(0) +=
                    1;
            }
        }

        let is_target = outcome.is_explicit_error()
            || (cfg.count_stuck_as_bug
                && matches!(outcome, COutcome::Bug { kind: BugKind::Stuck, .. }));

        let mut record = IterationRecord {
            iteration: iterations,
            rule: cand.rule.map(|r| r.name()),
            truncated: cand.truncated,
            solver: cand.solver_verdict,
            store: print_store(&cand.store, &p.inputs),
            path: path.0.iter().map(constraint_record).collect(),
            outcome: outcome_text(&outcome),
            candidates: Vec::new(),
        };

        if is_target {
            let reified = reify_all(&cand.store, p.inputs.iter().map(|(n, _)| n.clone()))
                .unwrap_or_default();
            let replay = eval_user(p, &reified, cfg.fuel_per_run.saturating_mul(4));
            let replay_confirmed = matches!(
                (&outcome, &replay),
                (
                    COutcome::Bug { kind: BugKind::ExplicitError, .. },
                    Outcome::Bug { kind: BugKind::ExplicitError, .. },
                ) | (
                    COutcome::Bug { kind: BugKind::Stuck, .. },
                    Outcome::Bug { kind: BugKind::Stuck, .. },
                )
            );
            records.push(record);
            return Ok(RunOutput {
                report: Report::BugFound {
                    store: cand.store,
                    reified,
                    iterations,
                    replay_confirmed,
                    trail: cand.trail,
                },
                stats,
                records,
            });
        }

        for c in enumerate_mutations(&cand.store, &path, &cfg.policy, &ids) {
            let audit_rule = c.rule.name();
            let labels: Vec<u64> = c.audit.labels_touched.iter().map(|l| l.0).collect();
            let prefix_len = c.audit.prefix_len;
            let push_audit = |fate: &'static str| AuditRecord {
                rule: audit_rule,
                prefix_len,
                labels: labels.clone(),
                fate,
            };

            let (store, solver_verdict, solver_backed) = match &c.query {
                None => (c.store, None, false),
                Some(q) => {
                    stats.solver_calls += 1;
                    match solver.solve(q)? {
                        SatResult::Sat(model) => {
                            stats.solver_sat += 1;
                            match apply_model(&c.store, &model) {
                                Ok(updated) => {
                                    stats.model_checks += 1;
                                    if verify_model(&c.predicted, &updated).is_err() {
                                        stats.model_violations += 1;
                                        record.candidates.push(push_audit("model-mismatch"));
                                        continue;
                                    }
                                    (updated, Some("sat"), true)
                                }
                                Err(_) => {
                                    stats.improper_model_drops += 1;
                                    record.candidates.push(push_audit("improper"));
                                    continue;
                                }
                            }
                        }
                        SatResult::Unsat => {
                            stats.solver_unsat += 1;
                            record.candidates.push(push_audit("unsat"));
                            continue;
                        }
                        SatResult::Unknown(_) => {
                            stats.solver_unknown += 1;
                            record.candidates.push(push_audit("unknown"));
                            continue;
                        }
                    }
                }
            };

            stats.properness_checks += 1;
            if check_proper(&store).is_err() {
                stats.properness_violations += 1;
                record.candidates.push(push_audit("improper"));
                continue;
            }

            let fp = fingerprint(&store, &p.inputs);
            if !seen.insert(fp) {
                stats.deduped += 1;
                record.candidates.push(push_audit("dup"));
                continue;
            }

            let mut trail = cand.trail.clone();
            if c.truncated {
                trail.push(MutationRule::TruncatePrefix);
            }
            trail.push(c.rule);

            if frontier.len() >= cfg.frontier_cap {
                frontier.pop_front();
                stats.pruned_by_cap += 1;
            }
            frontier.push_back(Pending {
                store,
                predicted: c.predicted,
                rule: Some(c.rule),
                truncated: c.truncated,
                solver_verdict,
                solver_backed,
                trail,
            });
            stats.enqueued += 1;
            record.candidates.push(push_audit("enqueued"));
        }

        records.push(record);
    }

    Ok(RunOutput { report: Report::Exhausted { iterations }, stats, records })
}

/// Render the explored paths as a DOT tree (one root, one edge per
/// constraint, leaves annotated with outcomes).
pub fn path_tree_dot(records: &[IterationRecord]) -> String {
    #[derive(Default)]
    struct Node {
        children: Vec<(String, usize)>,
        outcomes: Vec<String>,
    }
    let mut nodes: Vec<Node> = vec![Node::default()];
    for rec in records {
        let mut at = 0usize;
        for c in &rec.path {
            let edge = match c.kind {
                "first-order" => format!(
                    "fo {} {}",
                    c.outcome.unwrap_or_default(),
                    c.trace.clone().unwrap_or_default()
                ),
                "test" => format!(
                    "test l{} {}",
                    c.label.unwrap_or_default(),
                    c.inspected.clone().unwrap_or_default()
                ),
                _ => format!(
                    "branch l{} {} {}",
                    c.label.unwrap_or_default(),
                    c.outcome.unwrap_or_default(),
                    c.trace.clone().unwrap_or_default()
                ),
            };
            let next = nodes[at].children.iter().find(|(e, _)| *e == edge).map(|(_, i)| *i);
            at = match next {
                Some(i) => i,
                None => {
                    let idx = nodes.len();
                    nodes.push(Node::default());
                    nodes[at].children.push((edge, idx));
                    idx
                }
            };
        }
        let outcome = rec.outcome.clone();
        if !nodes[at].outcomes.contains(&outcome) {
            nodes[at].outcomes.push(outcome);
        }
    }
    let mut out = String::from("digraph paths {\n  node [shape=box, fontname=\"monospace\"];\n");
    for (i, node) in nodes.iter().enumerate() {
        let label = if i == 0 {
            "start".to_string()
        } else if node.outcomes.is_empty() {
            String::new()
        } else {
            node.outcomes.join("\\n")
        };
        out.push_str(&format!("  n{} [label=\"{}\"];\n", i, label.replace('"', "'")));
        for (edge, child) in &node.children {
            out.push_str(&format!(
                "  n{} -> n{} [label=\"{}\"];\n",
                i,
                child,
                edge.replace('"', "'")
            ));
        }
    }
    out.push_str("}\n");
    out
}
