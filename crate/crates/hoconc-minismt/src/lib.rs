//! A small SMT-LIB 2 solver for the quantifier-free integer fragment:
//! conjunctions of (in)equalities over `+ - * ite` terms with `Int`
//! constants, as produced by concolic path-constraint encoders.
//!
//! Verdict discipline: `sat` answers always come with a model that has been
//! checked against every assertion by evaluation; `unsat` is answered only
//! with a proof (a ground-false assertion after propagating forced
//! equalities, complementary literals, or conflicting forced values);
//! everything else is `unknown`. Model search walks a deterministic
//! candidate grid seeded from the constants in the script, preferring
//! small-magnitude values, with partial-evaluation pruning.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hoconc_core::sexp::{parse_all, Sexp, SexpKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Int(i64),
    Var(String),
    App(Op, Vec<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
    Distinct,
    Not,
    And,
    Or,
    Ite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(BTreeMap<String, i64>),
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptError(pub String);

impl std::fmt::Display for ScriptError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn op_of(sym: &str) -> Option<Op> {
    Some(match sym {
        "+" => Op::Add,
        "-" => Op::Sub,
        "*" => Op::Mul,
        "=" => Op::Eq,
        "<=" => Op::Le,
        "<" => Op::Lt,
        ">=" => Op::Ge,
        ">" => Op::Gt,
        "distinct" => Op::Distinct,
        "not" => Op::Not,
        "and" => Op::And,
        "or" => Op::Or,
        "ite" => Op::Ite,
        _ => return None,
    })
}

fn term_of(form: &Sexp) -> Result<Term, ScriptError> {
    match &form.kind {
        SexpKind::Int(n) => Ok(Term::Int(*n)),
        SexpKind::Sym(s) => match s.as_str() {
            "true" => Ok(Term::Int(1)),
            "false" => Ok(Term::Int(0)),
            _ => Ok(Term::Var(s.clone())),
        },
        SexpKind::List(items) => {
            let head = items
                .first()
                .and_then(|h| h.as_sym())
                .ok_or_else(|| ScriptError(format!("bad term at {}", form.pos)))?;
            let op = op_of(head)
                .ok_or_else(|| ScriptError(format!("unsupported operator `{head}`")))?;
            let mut args = Vec::with_capacity(items.len() - 1);
            for a in &items[1..] {
                args.push(term_of(a)?);
            }
            // Unary minus.
            if op == Op::Sub && args.len() == 1 {
                return Ok(Term::App(Op::Sub, vec![Term::Int(0), args.remove(0)]));
            }
            Ok(Term::App(op, args))
        }
        SexpKind::Str(_) => Err(ScriptError(format!("string in term at {}", form.pos))),
    }
}

/// Evaluate a term under a (possibly partial) assignment. `None` means the
/// value is not determined: an unassigned variable or arithmetic overflow.
/// Booleans are 1/0; and/or short-circuit through undetermined operands
/// when one side already decides them.
fn eval(term: &Term, env: &BTreeMap<String, i64>) -> Option<i64> {
    match term {
        Term::Int(n) => Some(*n),
        Term::Var(x) => env.get(x).copied(),
        Term::App(op, args) => match op {
            Op::Add | Op::Sub | Op::Mul => {
                let mut acc = eval(args.first()?, env)?;
                for a in &args[1..] {
                    let v = eval(a, env)?;
                    acc = match op {
                        Op::Add => acc.checked_add(v)?,
                        Op::Sub => acc.checked_sub(v)?,
                        Op::Mul => acc.checked_mul(v)?,
                        _ => unreachable!(),
                    };
                }
                Some(acc)
            }
            Op::Eq => {
                let first = eval(args.first()?, env)?;
                for a in &args[1..] {
                    if eval(a, env)? != first {
                        return Some(0);
                    }
                }
                Some(1)
            }
            Op::Le | Op::Lt | Op::Ge | Op::Gt => {
                let l = eval(&args[0], env)?;
                let r = eval(&args[1], env)?;
                Some(match op {
                    Op::Le => (l <= r) as i64,
                    Op::Lt => (l < r) as i64,
                    Op::Ge => (l >= r) as i64,
                    Op::Gt => (l > r) as i64,
                    _ => unreachable!(),
                })
            }
            Op::Distinct => {
                let mut seen = Vec::new();
                for a in args {
                    let v = eval(a, env)?;
                    if seen.contains(&v) {
                        return Some(0);
                    }
                    seen.push(v);
                }
                Some(1)
            }
            Op::Not => Some((eval(&args[0], env)? == 0) as i64),
            Op::And => {
                let mut undecided = false;
                for a in args {
                    match eval(a, env) {
                        Some(0) => return Some(0),
                        Some(_) => {}
                        None => undecided = true,
                    }
                }
                if undecided {
                    None
                } else {
                    Some(1)
                }
            }
            Op::Or => {
                let mut undecided = false;
                for a in args {
                    match eval(a, env) {
                        Some(0) => {}
                        Some(_) => return Some(1),
                        None => undecided = true,
                    }
                }
                if undecided {
                    None
                } else {
                    Some(0)
                }
            }
            Op::Ite => {
                let c = eval(&args[0], env)?;
                if c != 0 {
                    eval(&args[1], env)
                } else {
                    eval(&args[2], env)
                }
            }
        },
    }
}

/// Rewrite boolean structure so comparisons surface as atoms:
/// `(not (= (ite C 1 0) 0))` becomes `C`, `(= (ite C 1 0) 0)` becomes
/// `(not C)`, and double negations cancel.
fn simplify(term: &Term) -> Term {
    match term {
        Term::App(Op::Not, args) if args.len() == 1 => {
            let inner = simplify(&args[0]);
            match inner {
                Term::App(Op::Not, mut inner2) if inner2.len() == 1 => inner2.remove(0),
                other => Term::App(Op::Not, vec![other]),
            }
        }
        Term::App(Op::Eq, args) if args.len() == 2 => {
            let l = simplify(&args[0]);
            let r = simplify(&args[1]);
            // (= (ite C 1 0) 0) <=> (not C); (= (ite C 1 0) 1) <=> C.
            if let (Term::App(Op::Ite, ite_args), Term::Int(k)) = (&l, &r) {
                if ite_args.len() == 3
                    && ite_args[1] == Term::Int(1)
                    && ite_args[2] == Term::Int(0)
                {
                    if *k == 0 {
                        return simplify(&Term::App(Op::Not, vec![ite_args[0].clone()]));
                    }
                    if *k == 1 {
                        return ite_args[0].clone();
                    }
                }
            }
            Term::App(Op::Eq, vec![l, r])
        }
        Term::App(op, args) => Term::App(*op, args.iter().map(simplify).collect()),
        _ => term.clone(),
    }
}

/// Split a term into conjunct literals.
fn conjuncts(term: &Term, out: &mut Vec<Term>) {
    match term {
        Term::App(Op::And, args) => {
            for a in args {
                conjuncts(a, out);
            }
        }
        _ => out.push(term.clone()),
    }
}

/// Forced assignment from a literal of the shape (= var const) or
/// (= const var).
fn forced_binding(lit: &Term) -> Option<(String, i64)> {
    if let Term::App(Op::Eq, args) = lit {
        if args.len() == 2 {
            match (&args[0], &args[1]) {
                (Term::Var(x), Term::Int(n)) | (Term::Int(n), Term::Var(x)) => {
                    return Some((x.clone(), *n))
                }
                _ => {}
            }
        }
    }
    None
}

fn collect_consts(term: &Term, out: &mut Vec<i64>) {
    match term {
        Term::Int(n) => {
            if !out.contains(n) {
                out.push(*n);
            }
        }
        Term::Var(_) => {}
        Term::App(_, args) => {
            for a in args {
                collect_consts(a, out);
            }
        }
    }
}

fn collect_vars(term: &Term, out: &mut Vec<String>) {
    match term {
        Term::Var(x) => {
            if !out.iter().any(|v| v == x) {
                out.push(x.clone());
            }
        }
        Term::Int(_) => {}
        Term::App(_, args) => {
            for a in args {
                collect_vars(a, out);
            }
        }
    }
}

pub struct Problem {
    pub declared: Vec<String>,
    pub asserts: Vec<Term>,
}

impl Problem {
    pub fn solve(&self, node_budget: u64) -> Verdict {
        let mut literals = Vec::new();
        for a in &self.asserts {
            conjuncts(&simplify(a), &mut literals);
        }

        // Propagate forced equalities to a fixpoint.
        let mut forced: BTreeMap<String, i64> = BTreeMap::new();
        loop {
            let mut changed = false;
            for lit in &literals {
                if let Some(v) = eval(lit, &forced) {
                    if v == 0 {
                        return Verdict::Unsat;
                    }
                    continue;
                }
                if let Some((x, n)) = forced_binding(lit) {
                    match forced.get(&x) {
                        Some(old) if *old != n => return Verdict::Unsat,
                        Some(_) => {}
                        None => {
                            forced.insert(x, n);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // Complementary literals: C asserted together with (not C).
        for (i, a) in literals.iter().enumerate() {
            for b in &literals[i + 1..] {
                let complementary = match (a, b) {
                    (Term::App(Op::Not, inner), other) if inner.len() == 1 => inner[0] == *other,
                    (other, Term::App(Op::Not, inner)) if inner.len() == 1 => inner[0] == *other,
                    _ => false,
                };
                if complementary {
                    return Verdict::Unsat;
                }
            }
        }

        // Model search over a deterministic candidate grid.
        let mut vars: Vec<String> = Vec::new();
        for lit in &literals {
            collect_vars(lit, &mut vars);
        }
        for d in &self.declared {
            if !vars.contains(d) {
                vars.push(d.clone());
            }
        }
        let free: Vec<String> = vars.iter().filter(|v| !forced.contains_key(*v)).cloned().collect();

        let mut candidates: Vec<i64> = Vec::new();
        for lit in &literals {
            collect_consts(lit, &mut candidates);
        }
        let base: Vec<i64> = candidates.clone();
        for c in base {
            for d in [-1i64, 1] {
                if let Some(v) = c.checked_add(d) {
                    if !candidates.contains(&v) {
                        candidates.push(v);
                    }
                }
            }
            if let Some(v) = c.checked_neg() {
                if !candidates.contains(&v) {
                    candidates.push(v);
                }
            }
        }
        for v in -16i64..=16 {
            if !candidates.contains(&v) {
                candidates.push(v);
            }
        }
        // Small models first; deterministic tie-break on sign.
        candidates.sort_by_key(|v| (v.unsigned_abs(), *v < 0));
        candidates.truncate(64);

        let mut env = forced.clone();
        let mut budget = node_budget;
        if self.search(&free, 0, &candidates, &mut env, &literals, &mut budget) {
            let mut model = BTreeMap::new();
            for v in &self.declared {
                model.insert(v.clone(), env.get(v).copied().unwrap_or(0));
            }
            // Final full check against the original assertions.
            let complete: BTreeMap<String, i64> = {
                let mut m = env.clone();
                for v in &vars {
                    m.entry(v.clone()).or_insert(0);
                }
                m
            };
            if self.asserts.iter().all(|a| eval(a, &complete) == Some(1)) {
                for (k, v) in &complete {
                    model.entry(k.clone()).or_insert(*v);
                }
                return Verdict::Sat(model);
            }
            return Verdict::Unknown;
        }
        Verdict::Unknown
    }

    fn search(
        &self,
        free: &[String],
        at: usize,
        candidates: &[i64],
        env: &mut BTreeMap<String, i64>,
        literals: &[Term],
        budget: &mut u64,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        if at == free.len() {
            return literals.iter().all(|l| eval(l, env) == Some(1));
        }
        for v in candidates {
            env.insert(free[at].clone(), *v);
            // Prune when any literal is already determined false.
            let contradicted = literals.iter().any(|l| eval(l, env) == Some(0));
            if !contradicted && self.search(free, at + 1, candidates, env, literals, budget) {
                return true;
            }
            if *budget == 0 {
                break;
            }
        }
        env.remove(&free[at]);
        false
    }
}

/// Run a full SMT-LIB script and render the reply text.
pub fn run_script(script: &str) -> Result<String, ScriptError> {
    let forms = parse_all(script).map_err(|e| ScriptError(format!("parse error: {e}")))?;
    let mut problem = Problem { declared: Vec::new(), asserts: Vec::new() };
    let mut out = String::new();
    let mut last: Option<Verdict> = None;
    for form in &forms {
        let items = match form.as_list() {
            Some(items) if !items.is_empty() => items,
            _ => return Err(ScriptError(format!("bad command at {}", form.pos))),
        };
        match items[0].as_sym() {
            Some("set-logic") | Some("set-option") | Some("set-info") | Some("push")
            | Some("pop") | Some("reset") => {}
            Some("declare-const") if items.len() == 3 => {
                if let Some(name) = items[1].as_sym() {
                    problem.declared.push(name.to_string());
                }
            }
            Some("declare-fun") if items.len() == 4 => {
                // Only zero-arity Int functions, i.e. constants.
                if let Some(name) = items[1].as_sym() {
                    problem.declared.push(name.to_string());
                }
            }
            Some("assert") if items.len() == 2 => {
                problem.asserts.push(term_of(&items[1])?);
            }
            Some("check-sat") => {
                let verdict = problem.solve(2_000_000);
                match &verdict {
                    Verdict::Sat(_) => out.push_str("sat\n"),
                    Verdict::Unsat => out.push_str("unsat\n"),
                    Verdict::Unknown => out.push_str("unknown\n"),
                }
                last = Some(verdict);
            }
            Some("get-model") => match &last {
                Some(Verdict::Sat(model)) => {
                    out.push_str("(\n");
                    for (name, value) in model {
                        let rendered = if *value < 0 {
                            format!("(- {})", value.unsigned_abs())
                        } else {
                            format!("{value}")
                        };
                        let _ = writeln!(out, "  (define-fun {name} () Int {rendered})");
                    }
                    out.push_str(")\n");
                }
                _ => out.push_str("(error \"model is not available\")\n"),
            },
            Some("exit") => break,
            Some(cmd) => return Err(ScriptError(format!("unsupported command `{cmd}`"))),
            None => return Err(ScriptError(format!("bad command at {}", form.pos))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(script: &str) -> String {
        run_script(script).unwrap()
    }

    #[test]
    fn pins_an_equality() {
        let reply = solve(
            "(set-logic QF_NIA)(declare-const x Int)(assert (not (= (ite (= x 3) 1 0) 0)))(check-sat)(get-model)(exit)",
        );
        assert!(reply.starts_with("sat\n"), "{reply}");
        assert!(reply.contains("(define-fun x () Int 3)"), "{reply}");
    }

    #[test]
    fn detects_conflicting_equalities() {
        let reply = solve(
            "(declare-const x Int)(assert (= x 3))(assert (= x 4))(check-sat)(get-model)(exit)",
        );
        assert!(reply.starts_with("unsat\n"), "{reply}");
        assert!(reply.contains("error"), "{reply}");
    }

    #[test]
    fn detects_complementary_literals() {
        let reply = solve(
            "(declare-const x Int)(assert (= (ite (= x 1) 1 0) 0))(assert (not (= (ite (= x 1) 1 0) 0)))(check-sat)(exit)",
        );
        assert!(reply.starts_with("unsat\n"), "{reply}");
    }

    #[test]
    fn nonlinear_square_is_never_sat_when_impossible() {
        // x^2 = -1 has no integer solution; exhausting the grid is not an
        // unsat proof, so the honest answer is unknown.
        let reply = solve(
            "(declare-const x Int)(assert (= (* x x) (- 1)))(check-sat)(exit)",
        );
        assert!(reply.starts_with("unknown\n") || reply.starts_with("unsat\n"), "{reply}");
        assert!(!reply.starts_with("sat"), "{reply}");
    }

    #[test]
    fn solves_small_nonlinear_systems() {
        let reply = solve(
            "(declare-const x Int)(declare-const y Int)(assert (= (* x y) 12))(assert (< x y))(assert (not (= x 1)))(check-sat)(get-model)(exit)",
        );
        assert!(reply.starts_with("sat\n"), "{reply}");
    }

    #[test]
    fn negative_values_print_in_smt_syntax() {
        let reply = solve(
            "(declare-const x Int)(assert (= (+ x 5) 0))(check-sat)(get-model)(exit)",
        );
        assert!(reply.contains("(define-fun x () Int (- 5))"), "{reply}");
    }

    #[test]
    fn unconstrained_declared_variables_default() {
        let reply = solve(
            "(declare-const a Int)(declare-const b Int)(assert (= a 2))(check-sat)(get-model)(exit)",
        );
        assert!(reply.contains("(define-fun a () Int 2)"));
        assert!(reply.contains("(define-fun b () Int 0)"));
    }

    #[test]
    fn prefers_small_magnitude_models() {
        let reply =
            solve("(declare-const x Int)(assert (not (= x 0)))(check-sat)(get-model)(exit)");
        assert!(reply.contains("(define-fun x () Int 1)"), "{reply}");
    }

    #[test]
    fn disjunction_via_arithmetic_or() {
        // The retargeting encoding: not((ite(c1) ... product)) pattern.
        let reply = solve(
            "(declare-const x Int)(assert (not (= (ite (= (* (ite (= (ite (= x 3) 1 0) 0) 1 0) (ite (= (ite (= x 7) 1 0) 0) 1 0)) 0) 1 0) 0)))(check-sat)(get-model)(exit)",
        );
        assert!(reply.starts_with("sat\n"), "{reply}");
        let ok = reply.contains("Int 3)") || reply.contains("Int 7)");
        assert!(ok, "{reply}");
    }

    #[test]
    fn ground_contradiction_is_unsat() {
        let reply = solve("(assert (= 1 2))(check-sat)(exit)");
        assert!(reply.starts_with("unsat\n"), "{reply}");
    }

    #[test]
    fn empty_query_is_sat() {
        let reply = solve("(set-logic QF_NIA)(check-sat)(get-model)(exit)");
        assert!(reply.starts_with("sat\n"), "{reply}");
    }
}
