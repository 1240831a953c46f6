//! Input evolution: enumerate every legal next input from a completed run.
//!
//! Four families of mutations, each applied to prefixes of the recorded
//! path (cutting off a suffix refocuses the search on an earlier decision):
//!
//! * negate the last first-order constraint and ask the solver for numbers
//!   that flip that user-program conditional;
//! * when a prefix ends with a canonical conditional that fell through to
//!   its else branch, grow that conditional with a new clause — a
//!   `procedure?` test when it inspected a function, an equality test on
//!   the inspected value's trace when it inspected a number — with every
//!   legal clause body;
//! * rewrite the tail of a conditional's constraint group as if one of its
//!   existing clauses had been taken, and ask the solver for numbers
//!   consistent with that choice (targeted branch constraint modification).
//!
//! Every candidate carries the path it predicts the next run will follow
//! (up to test constraints) — the concolic property checked by the search.

use alloc::string::String;
use alloc::vec::Vec;

use crate::canonical::{
    default_dispatch, default_fn, depth_of_loc, dispatch_at, find_dispatch, scope_at,
    with_dispatch_rewritten, BranchBody, CallArg, Clause, ClauseTest, IdSource, Label, Store,
};
use crate::lang::Ident;
use crate::path::{scan_blocks, Block, Inspected, Path, PathConstraint};
use crate::smt::{any_of_traces, encode, Formula, Query};
use crate::trace::{Trace, TraceOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationRule {
    TruncatePrefix,
    NegateLastTrue,
    NegateLastFalse,
    AddBranchProc,
    AddBranchEqOnElse,
    AddBranchEqMulti,
    RetargetBranch,
}

impl MutationRule {
    pub fn name(self) -> &'static str {
        match self {
            MutationRule::TruncatePrefix => "truncate-prefix",
            MutationRule::NegateLastTrue => "negate-last-true",
            MutationRule::NegateLastFalse => "negate-last-false",
            MutationRule::AddBranchProc => "add-branch-proc",
            MutationRule::AddBranchEqOnElse => "add-branch-eq-else",
            MutationRule::AddBranchEqMulti => "add-branch-eq-multi",
            MutationRule::RetargetBranch => "retarget-branch",
        }
    }

    pub const ALL: [MutationRule; 7] = [
        MutationRule::TruncatePrefix,
        MutationRule::NegateLastTrue,
        MutationRule::NegateLastFalse,
        MutationRule::AddBranchProc,
        MutationRule::AddBranchEqOnElse,
        MutationRule::AddBranchEqMulti,
        MutationRule::RetargetBranch,
    ];
}

/// Caps that bound structural growth; candidates past a cap are pruned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvolvePolicy {
    pub max_dispatch_depth: usize,
    pub max_clauses_per_dispatch: usize,
}

impl Default for EvolvePolicy {
    fn default() -> Self {
        EvolvePolicy { max_dispatch_depth: 4, max_clauses_per_dispatch: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateAudit {
    pub prefix_len: usize,
    pub labels_touched: Vec<Label>,
}

/// A mutated store, the path it predicts, and how it was produced.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub store: Store,
    pub predicted: Path,
    pub rule: MutationRule,
    /// Solver query that must be satisfiable (and applied) before running
    /// this candidate. `None` for pure structural growth.
    pub query: Option<Query>,
    /// True when the candidate was built from a proper prefix of the path.
    pub truncated: bool,
    pub audit: CandidateAudit,
}

/// All legal clause bodies for a hole with the given variables in scope:
/// a fresh concolic number (mapped to 0 in the returned store), the default
/// canonical function, each variable in scope, and a call to each function
/// in scope with a fresh-number or in-scope argument, dispatching on the
/// result.
pub fn evolve_bodies(
    scope_vars: &[Ident],
    scope_procs: &[Ident],
    store: &Store,
    ids: &IdSource,
) -> Vec<(BranchBody, Store)> {
    let mut out = Vec::new();

    let fresh = ids.fresh_concvar();
    let mut with_fresh = store.clone();
    with_fresh.set_number(fresh.clone(), 0);
    out.push((BranchBody::ConcVar(fresh), with_fresh));

    out.push((BranchBody::Fn(alloc::boxed::Box::new(default_fn(ids))), store.clone()));

    for v in scope_vars {
        out.push((BranchBody::Var(v.clone()), store.clone()));
    }

    for g in scope_procs {
        let arg_fresh = ids.fresh_concvar();
        let result = ids.fresh_result();
        let mut s = store.clone();
        s.set_number(arg_fresh.clone(), 0);
        out.push((
            BranchBody::LetCall {
                callee: g.clone(),
                arg: CallArg::ConcVar(arg_fresh),
                result: result.clone(),
                then: alloc::boxed::Box::new(default_dispatch(result, ids)),
            },
            s,
        ));
        for a in scope_vars {
            let result = ids.fresh_result();
            out.push((
                BranchBody::LetCall {
                    callee: g.clone(),
                    arg: CallArg::Var(a.clone()),
                    result: result.clone(),
                    then: alloc::boxed::Box::new(default_dispatch(result, ids)),
                },
                store.clone(),
            ));
        }
    }
    out
}

/// How deep a dispatch nests inside the given clause body (0 when the body
/// has no nested dispatch).
fn body_depth(b: &BranchBody) -> usize {
    match b {
        BranchBody::Var(_) | BranchBody::ConcVar(_) => 0,
        BranchBody::Fn(f) => crate::canonical::dispatch_depth(&f.body),
        BranchBody::LetCall { then, .. } => crate::canonical::dispatch_depth(then),
    }
}

struct Enumerator<'a> {
    store: &'a Store,
    path: &'a Path,
    policy: &'a EvolvePolicy,
    ids: &'a IdSource,
    blocks: Vec<Block>,
    out: Vec<Candidate>,
}

impl<'a> Enumerator<'a> {
    fn truncate_candidates(&mut self) {
        for prefix_len in 0..self.path.len() {
            self.out.push(Candidate {
                store: self.store.clone(),
                predicted: self.path.prefix(prefix_len),
                rule: MutationRule::TruncatePrefix,
                query: None,
                truncated: true,
                audit: CandidateAudit { prefix_len, labels_touched: Vec::new() },
            });
        }
    }

    fn negate_candidates(&mut self) {
        for prefix_len in 1..=self.path.len() {
            let PathConstraint::FirstOrder { outcome, trace } = &self.path.0[prefix_len - 1]
            else {
                continue;
            };
            let mut predicted = self.path.prefix(prefix_len);
            let flipped = !*outcome;
            predicted.0[prefix_len - 1] =
                PathConstraint::FirstOrder { outcome: flipped, trace: trace.clone() };
            let query = encode(&predicted, self.store);
            self.out.push(Candidate {
                store: self.store.clone(),
                predicted,
                rule: if flipped {
                    MutationRule::NegateLastTrue
                } else {
                    MutationRule::NegateLastFalse
                },
                query: Some(query),
                truncated: prefix_len < self.path.len(),
                audit: CandidateAudit { prefix_len, labels_touched: Vec::new() },
            });
        }
    }

    fn add_branch_candidates(&mut self) {
        for bi in 0..self.blocks.len() {
            let block = self.blocks[bi].clone();
            if !block.took_else() {
                continue;
            }
            let Some((loc, dispatch)) = find_dispatch(self.store, block.label) else {
                continue;
            };
            let (rule, test) = match (&block.inspected, dispatch.clauses.is_empty()) {
                (Inspected::FunctionValue, true) => {
                    (MutationRule::AddBranchProc, ClauseTest::IsProc)
                }
                (Inspected::Number(tv), true) => {
                    (MutationRule::AddBranchEqOnElse, ClauseTest::EqTrace(tv.trace.clone()))
                }
                (Inspected::Number(tv), false) => {
                    (MutationRule::AddBranchEqMulti, ClauseTest::EqTrace(tv.trace.clone()))
                }
                // A conditional with clauses that inspected a function either
                // took its procedure? clause or got stuck on an equality
                // test, so an else-taken block cannot arise here.
                (Inspected::FunctionValue, false) => continue,
            };
            if dispatch.clauses.len() >= self.policy.max_clauses_per_dispatch {
                continue;
            }
            let prefix_len = block.branches.last().map(|(i, ..)| i + 1).unwrap_or(0);
            let (vars, mut procs) = scope_at(self.store, &loc);
            if matches!(test, ClauseTest::IsProc) && !procs.contains(&dispatch.scrutinee) {
                procs.push(dispatch.scrutinee.clone());
            }
            debug_assert!(vars.contains(&dispatch.scrutinee));

            let depth_here = depth_of_loc(&loc);
            for (body, grown_store) in evolve_bodies(&vars, &procs, self.store, self.ids) {
                if depth_here + body_depth(&body) > self.policy.max_dispatch_depth {
                    continue;
                }
                let new_label = self.ids.fresh_label();
                let new_store = with_dispatch_rewritten(&grown_store, &loc, |d| {
                    let mut out = d.clone();
                    out.clauses.push(Clause {
                        label: new_label,
                        test: test.clone(),
                        body: body.clone(),
                    });
                    out
                });
                let predicted_trace = match &test {
                    ClauseTest::IsProc => Trace::lit(1),
                    ClauseTest::EqTrace(t) => {
                        let Inspected::Number(tv) = &block.inspected else { unreachable!() };
                        Trace::op(TraceOp::NumEq, tv.trace.clone(), t.clone())
                    }
                };
                let mut predicted = self.path.prefix(prefix_len);
                *predicted.0.last_mut().unwrap() = PathConstraint::Branch {
                    label: new_label,
                    outcome: true,
                    trace: predicted_trace,
                };
                self.out.push(Candidate {
                    store: new_store,
                    predicted,
                    rule,
                    query: None,
                    truncated: prefix_len < self.path.len(),
                    audit: CandidateAudit {
                        prefix_len,
                        labels_touched: alloc::vec![block.label, new_label],
                    },
                });
            }
        }
    }

    fn retarget_candidates(&mut self) {
        for bi in 0..self.blocks.len() {
            let block = self.blocks[bi].clone();
            if !block.closed {
                continue;
            }
            let Inspected::Number(tv) = block.inspected.clone() else {
                continue;
            };
            let Some((loc, _)) = find_dispatch(self.store, block.label) else {
                continue;
            };
            let dispatch = dispatch_at(self.store, &loc).unwrap().clone();
            let taken = block
                .branches
                .last()
                .filter(|(_, l, o, _)| *o && *l != block.label)
                .map(|(_, l, _, _)| *l);
            let targets: Vec<(usize, Label)> = dispatch
                .clauses
                .iter()
                .enumerate()
                .filter_map(|(i, c)| match &c.test {
                    ClauseTest::EqTrace(_) if Some(c.label) != taken => Some((i, c.label)),
                    _ => None,
                })
                .collect();
            if targets.is_empty() {
                continue;
            }
            let block_end = block.branches.last().map(|(i, ..)| i + 1).unwrap_or(0);
            let truncated = block_end < self.path.len();

            // Predicted branch traces mirror what the machine will log: the
            // scrutinee's trace compared against each clause's test trace.
            let clause_trace = |i: usize| -> Trace {
                match &dispatch.clauses[i].test {
                    ClauseTest::IsProc => Trace::lit(0),
                    ClauseTest::EqTrace(t) => {
                        Trace::op(TraceOp::NumEq, tv.trace.clone(), t.clone())
                    }
                }
            };

            // One candidate forcing "some test succeeds", with the choice
            // left to the solver; the prediction stops at the test
            // constraint since the clause taken is not determined.
            if targets.len() >= 2 {
                let success_traces: Vec<Trace> =
                    targets.iter().map(|(i, _)| clause_trace(*i)).collect();
                let predicted = self.path.prefix(block.test_index + 1);
                let mut query = encode(&predicted, self.store);
                query.push(Formula::Truthy(any_of_traces(&success_traces).unwrap()));
                self.out.push(Candidate {
                    store: self.store.clone(),
                    predicted,
                    rule: MutationRule::RetargetBranch,
                    query: Some(query),
                    truncated,
                    audit: CandidateAudit {
                        prefix_len: block.test_index + 1,
                        labels_touched: targets.iter().map(|(_, l)| *l).collect(),
                    },
                });
            }

            // Per-clause candidates: clauses before the target fail, the
            // target succeeds.
            for (i, label) in &targets {
                let mut predicted = self.path.prefix(block.test_index + 1);
                for j in 0..*i {
                    predicted.0.push(PathConstraint::Branch {
                        label: dispatch.clauses[j].label,
                        outcome: false,
                        trace: clause_trace(j),
                    });
                }
                predicted.0.push(PathConstraint::Branch {
                    label: *label,
                    outcome: true,
                    trace: clause_trace(*i),
                });
                let query = encode(&predicted, self.store);
                self.out.push(Candidate {
                    store: self.store.clone(),
                    predicted,
                    rule: MutationRule::RetargetBranch,
                    query: Some(query),
                    truncated,
                    audit: CandidateAudit {
                        prefix_len: block.test_index + 1,
                        labels_touched: alloc::vec![block.label, *label],
                    },
                });
            }
        }
    }
}

/// Enumerate all candidate next inputs from a completed run, in a fixed
/// deterministic order: truncations (shortest prefix first), negations,
/// branch additions, retargetings. An empty result is a dead end.
pub fn enumerate_mutations(
    store: &Store,
    path: &Path,
    policy: &EvolvePolicy,
    ids: &IdSource,
) -> Vec<Candidate> {
    // The run may have been interrupted mid-dispatch (bug or fuel); the
    // final unclosed block simply yields no block-level candidates.
    let blocks = scan_blocks(path, false).unwrap_or_default();
    let mut e = Enumerator { store, path, policy, ids, blocks, out: Vec::new() };
    e.truncate_candidates();
    e.negate_candidates();
    e.add_branch_candidates();
    e.retarget_candidates();
    e.out
}

/// Render a rule trail as a compact string for reports.
pub fn trail_to_string(trail: &[MutationRule]) -> String {
    let mut out = String::new();
    for (i, r) in trail.iter().enumerate() {
        if i > 0 {
            out.push_str(" -> ");
        }
        out.push_str(r.name());
    }
    out
}
