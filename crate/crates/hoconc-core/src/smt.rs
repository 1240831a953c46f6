//! Encoding paths into SMT queries, parsing solver models, and writing
//! solutions back into stores.
//!
//! A query asserts (i) every first-order constraint of the path, (ii) every
//! branch constraint's trace, positively when the test succeeded and negated
//! when it failed, and (iii) one disjointness constraint per pair of
//! equality tests in each dispatch of the store, so clause tests keep
//! pinning distinct values. Truthiness is `≠ 0`; comparison traces become
//! 0/1 integers through `ite`, so traces compose uniformly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::canonical::{check_proper, BranchBody, ClauseTest, Dispatch, Store, Violation};
use crate::lang::Ident;
use crate::path::{Path, PathConstraint};
use crate::sexp::{self, Sexp, SexpKind};
use crate::trace::{trace_eval, Trace};

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// The trace evaluates to a nonzero value.
    Truthy(Trace),
    /// The trace evaluates to zero.
    Falsy(Trace),
    /// The two traces evaluate to distinct integers.
    IntNe(Trace, Trace),
}

/// An SMT query over integer-sorted concolic variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Query {
    /// Declared variables in first-occurrence order.
    pub decls: Vec<Ident>,
    pub formulas: Vec<Formula>,
}

impl Query {
    pub fn push(&mut self, f: Formula) {
        let mut vars = Vec::new();
        match &f {
            Formula::Truthy(t) | Formula::Falsy(t) => t.collect_vars(&mut vars),
            Formula::IntNe(a, b) => {
                a.collect_vars(&mut vars);
                b.collect_vars(&mut vars);
            }
        }
        for v in vars {
            if !self.decls.contains(&v) {
                self.decls.push(v);
            }
        }
        self.formulas.push(f);
    }

    pub fn is_trivially_empty(&self) -> bool {
        self.formulas.is_empty()
    }
}

fn for_each_dispatch(d: &Dispatch, visit: &mut impl FnMut(&Dispatch)) {
    visit(d);
    for clause in &d.clauses {
        match &clause.body {
            BranchBody::Fn(inner) => for_each_dispatch(&inner.body, visit),
            BranchBody::LetCall { then, .. } => for_each_dispatch(then, visit),
            BranchBody::Var(_) | BranchBody::ConcVar(_) => {}
        }
    }
}

/// Build the query for a path under a store.
pub fn encode(path: &Path, store: &Store) -> Query {
    let mut q = Query::default();
    for c in &path.0 {
        match c {
            PathConstraint::FirstOrder { outcome, trace }
            | PathConstraint::Branch { outcome, trace, .. } => {
                if *outcome {
                    q.push(Formula::Truthy(trace.clone()));
                } else {
                    q.push(Formula::Falsy(trace.clone()));
                }
            }
            PathConstraint::Test { .. } => {}
        }
    }
    // Disjointness for every dispatch in the store, exercised or not.
    for f in store.functions.values() {
        for_each_dispatch(&f.body, &mut |d| {
            let tests: Vec<&Trace> = d
                .clauses
                .iter()
                .filter_map(|c| match &c.test {
                    ClauseTest::EqTrace(t) => Some(t),
                    ClauseTest::IsProc => None,
                })
                .collect();
            for i in 0..tests.len() {
                for j in (i + 1)..tests.len() {
                    q.push(Formula::IntNe(tests[i].clone(), tests[j].clone()));
                }
            }
        });
    }
    q
}

fn int_term(t: &Trace, out: &mut String) {
    match t {
        Trace::Var(x) => out.push_str(x),
        Trace::Lit(n) => {
            if *n < 0 {
                out.push_str(&format!("(- {})", n.unsigned_abs()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Trace::Neg(inner) => {
            out.push_str("(ite (= ");
            int_term(inner, out);
            out.push_str(" 0) 1 0)");
        }
        Trace::Op { op, lhs, rhs } => {
            use crate::trace::TraceOp::*;
            match op {
                Add | Sub | Mul => {
                    out.push('(');
                    out.push_str(match op {
                        Add => "+",
                        Sub => "-",
                        Mul => "*",
                        _ => unreachable!(),
                    });
                    out.push(' ');
                    int_term(lhs, out);
                    out.push(' ');
                    int_term(rhs, out);
                    out.push(')');
                }
                NumEq | Le | Lt => {
                    out.push_str("(ite (");
                    out.push_str(match op {
                        NumEq => "=",
                        Le => "<=",
                        Lt => "<",
                        _ => unreachable!(),
                    });
                    out.push(' ');
                    int_term(lhs, out);
                    out.push(' ');
                    int_term(rhs, out);
                    out.push_str(") 1 0)");
                }
            }
        }
    }
}

fn formula_term(f: &Formula) -> String {
    let mut s = String::new();
    match f {
        Formula::Truthy(t) => {
            s.push_str("(not (= ");
            int_term(t, &mut s);
            s.push_str(" 0))");
        }
        Formula::Falsy(t) => {
            s.push_str("(= ");
            int_term(t, &mut s);
            s.push_str(" 0)");
        }
        Formula::IntNe(a, b) => {
            s.push_str("(not (= ");
            int_term(a, &mut s);
            s.push(' ');
            int_term(b, &mut s);
            s.push_str("))");
        }
    }
    s
}

/// Render the query as a complete SMT-LIB 2 script. Deterministic: equal
/// queries produce byte-identical text.
pub fn to_script(q: &Query) -> String {
    let mut out = String::from("(set-option :produce-models true)\n(set-logic QF_NIA)\n");
    for v in &q.decls {
        out.push_str(&format!("(declare-const {v} Int)\n"));
    }
    for f in &q.formulas {
        out.push_str(&format!("(assert {})\n", formula_term(f)));
    }
    out.push_str("(check-sat)\n(get-model)\n(exit)\n");
    out
}

pub type Model = BTreeMap<Ident, i64>;

#[derive(Debug, Clone, PartialEq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolError {
    pub message: String,
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unparseable solver output: {}", self.message)
    }
}

fn model_int(form: &Sexp) -> Option<i64> {
    match &form.kind {
        SexpKind::Int(n) => Some(*n),
        SexpKind::List(items) => {
            // Negative integers may print as (- 3).
            if items.len() == 2 && items[0].as_sym() == Some("-") {
                items[1].as_int().and_then(|n| n.checked_neg())
            } else {
                None
            }
        }
        _ => None,
    }
}

fn collect_model(forms: &[Sexp], model: &mut Model) {
    for form in forms {
        match &form.kind {
            SexpKind::List(items) => {
                if items.first().and_then(|h| h.as_sym()) == Some("define-fun") && items.len() >= 5
                {
                    if let (Some(name), Some(value)) = (items[1].as_sym(), model_int(&items[4])) {
                        model.insert(name.to_string(), value);
                    }
                } else {
                    // `(model ...)` wrapper or a bare list of define-funs.
                    collect_model(items, model);
                }
            }
            SexpKind::Sym(_) | SexpKind::Int(_) | SexpKind::Str(_) => {}
        }
    }
}

/// Parse solver stdout: a `sat`/`unsat`/`unknown` verdict, followed (for
/// sat) by a `get-model` response in either the `(model ...)` or bare-list
/// shape. `(error ...)` forms after a non-sat verdict are ignored.
pub fn parse_solver_output(out: &str) -> Result<SatResult, ProtocolError> {
    let mut consumed = 0;
    for line in out.lines() {
        consumed += line.len() + 1;
        match line.trim() {
            "" => continue,
            "sat" => {
                let tail = &out[consumed.min(out.len())..];
                let forms = sexp::parse_all(tail)
                    .map_err(|e| ProtocolError { message: format!("bad model sexp: {e}") })?;
                let mut model = Model::new();
                collect_model(&forms, &mut model);
                return Ok(SatResult::Sat(model));
            }
            "unsat" => return Ok(SatResult::Unsat),
            "unknown" => return Ok(SatResult::Unknown(String::from("solver returned unknown"))),
            other => return Err(ProtocolError { message: format!("unexpected line `{other}`") }),
        }
    }
    Err(ProtocolError { message: String::from("no verdict in output") })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApplyModelError {
    /// The updated store violates properness — an encoder bug, since the
    /// query asserts disjointness.
    ImproperResult(Vec<Violation>),
}

impl fmt::Display for ApplyModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApplyModelError::ImproperResult(vs) => {
                write!(f, "model produces an improper store ({} violation(s))", vs.len())
            }
        }
    }
}

/// Write a model's number assignments into the store. Bindings absent from
/// the model are unchanged; function bindings are untouched.
pub fn apply_model(store: &Store, model: &Model) -> Result<Store, ApplyModelError> {
    let mut out = store.clone();
    for (name, value) in model {
        out.numbers.insert(name.clone(), *value);
    }
    match check_proper(&out) {
        Ok(()) => Ok(out),
        Err(vs) => Err(ApplyModelError::ImproperResult(vs)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMismatch {
    pub constraint: String,
    pub detail: String,
}

impl fmt::Display for ModelMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model does not reproduce {}: {}", self.constraint, self.detail)
    }
}

/// The encoder's anti-bug check: under the updated store, re-evaluate every
/// asserted constraint of the path with `trace_eval` and verify it
/// reproduces the recorded outcome exactly.
pub fn verify_model(path: &Path, updated: &Store) -> Result<(), ModelMismatch> {
    for c in &path.0 {
        match c {
            PathConstraint::FirstOrder { outcome, trace }
            | PathConstraint::Branch { outcome, trace, .. } => {
                match trace_eval(trace, &updated.numbers) {
                    Ok(v) => {
                        if (v != 0) != *outcome {
                            return Err(ModelMismatch {
                                constraint: format!("{c}"),
                                detail: format!("trace evaluates to {v}"),
                            });
                        }
                    }
                    Err(e) => {
                        return Err(ModelMismatch {
                            constraint: format!("{c}"),
                            detail: format!("{e}"),
                        })
                    }
                }
            }
            PathConstraint::Test { .. } => {}
        }
    }
    Ok(())
}

/// The "scrutinee satisfies one of these equality tests" trace used by
/// targeted branch modification: or(e₁..eₖ) as ¬(¬e₁·¬e₂·…·¬eₖ), valid
/// because equality tests evaluate to 0/1.
pub fn any_of_traces(tests: &[Trace]) -> Option<Trace> {
    let mut product: Option<Trace> = None;
    for t in tests {
        let negated = Trace::negation(t.clone());
        product = Some(match product {
            None => negated,
            Some(p) => Trace::op(crate::trace::TraceOp::Mul, p, negated),
        });
    }
    product.map(Trace::negation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{CanonicalFn, Clause, IdSource, Label};
    use crate::trace::TraceOp;

    fn eq_x_3() -> Trace {
        Trace::op(TraceOp::NumEq, Trace::var("x"), Trace::lit(3))
    }

    #[test]
    fn encode_negated_first_order() {
        let path =
            Path(alloc::vec![PathConstraint::FirstOrder { outcome: false, trace: eq_x_3() }]);
        let q = encode(&path, &Store::new());
        assert_eq!(q.decls, alloc::vec!["x".to_string()]);
        assert_eq!(q.formulas, alloc::vec![Formula::Falsy(eq_x_3())]);
        let script = to_script(&q);
        assert_eq!(
            script,
            "(set-option :produce-models true)\n(set-logic QF_NIA)\n(declare-const x Int)\n(assert (= (ite (= x 3) 1 0) 0))\n(check-sat)\n(get-model)\n(exit)\n"
        );
    }

    #[test]
    fn encode_disjointness_alone() {
        let ids = IdSource::new();
        let t1 = Trace::var("a");
        let t2 = Trace::lit(5);
        let mut store = Store::new();
        store.set_number("a", 1);
        store.set_function(
            "f",
            CanonicalFn {
                param: "z".into(),
                body: Dispatch {
                    scrutinee: "z".into(),
                    clauses: alloc::vec![
                        Clause {
                            label: ids.fresh_label(),
                            test: ClauseTest::EqTrace(t1.clone()),
                            body: BranchBody::Var("z".into()),
                        },
                        Clause {
                            label: ids.fresh_label(),
                            test: ClauseTest::EqTrace(t2.clone()),
                            body: BranchBody::Var("z".into()),
                        },
                    ],
                    else_label: ids.fresh_label(),
                },
            },
        );
        let q = encode(&Path::new(), &store);
        assert_eq!(q.formulas, alloc::vec![Formula::IntNe(t1, t2)]);
        assert!(to_script(&q).contains("(assert (not (= a 5)))"));
    }

    #[test]
    fn encode_positive_branch_trace() {
        let t = Trace::op(
            TraceOp::NumEq,
            Trace::var("r"),
            Trace::op(TraceOp::Mul, Trace::var("Y"), Trace::lit(2)),
        );
        let path = Path(alloc::vec![PathConstraint::Branch {
            label: Label(4),
            outcome: true,
            trace: t.clone()
        }]);
        let q = encode(&path, &Store::new());
        assert_eq!(q.formulas, alloc::vec![Formula::Truthy(t)]);
        assert_eq!(q.decls, alloc::vec!["r".to_string(), "Y".to_string()]);
        assert!(to_script(&q).contains("(assert (not (= (ite (= r (* Y 2)) 1 0) 0)))"));
    }

    #[test]
    fn parse_model_shapes() {
        let z3_style = "sat\n(model\n  (define-fun x () Int 3)\n  (define-fun y () Int (- 4))\n)\n";
        match parse_solver_output(z3_style).unwrap() {
            SatResult::Sat(m) => {
                assert_eq!(m.get("x"), Some(&3));
                assert_eq!(m.get("y"), Some(&-4));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bare = "sat\n((define-fun x () Int -3))\n";
        match parse_solver_output(bare).unwrap() {
            SatResult::Sat(m) => assert_eq!(m.get("x"), Some(&-3)),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(parse_solver_output("unsat\n(error \"no model\")\n").unwrap(), SatResult::Unsat);
        assert!(matches!(parse_solver_output("unknown\n").unwrap(), SatResult::Unknown(_)));
        assert!(parse_solver_output("garbage\n").is_err());
        assert!(parse_solver_output("").is_err());
    }

    #[test]
    fn apply_model_updates_numbers_only() {
        let mut store = Store::new();
        store.set_number("x", 0);
        store.set_number("y", 9);
        let mut model = Model::new();
        model.insert("x".to_string(), 3);
        let updated = apply_model(&store, &model).unwrap();
        assert_eq!(updated.numbers["x"], 3);
        assert_eq!(updated.numbers["y"], 9);
    }

    #[test]
    fn apply_model_rejects_collisions() {
        // Two equality tests whose values collide after the update.
        let ids = IdSource::new();
        let mut store = Store::new();
        store.set_number("a", 1);
        store.set_function(
            "f",
            CanonicalFn {
                param: "z".into(),
                body: Dispatch {
                    scrutinee: "z".into(),
                    clauses: alloc::vec![
                        Clause {
                            label: ids.fresh_label(),
                            test: ClauseTest::EqTrace(Trace::var("a")),
                            body: BranchBody::Var("z".into()),
                        },
                        Clause {
                            label: ids.fresh_label(),
                            test: ClauseTest::EqTrace(Trace::lit(5)),
                            body: BranchBody::Var("z".into()),
                        },
                    ],
                    else_label: ids.fresh_label(),
                },
            },
        );
        assert!(check_proper(&store).is_ok());
        let mut model = Model::new();
        model.insert("a".to_string(), 5);
        assert!(matches!(apply_model(&store, &model), Err(ApplyModelError::ImproperResult(_))));
    }

    #[test]
    fn verify_model_catches_mismatches() {
        let path =
            Path(alloc::vec![PathConstraint::FirstOrder { outcome: true, trace: eq_x_3() }]);
        let mut good = Store::new();
        good.set_number("x", 3);
        assert!(verify_model(&path, &good).is_ok());
        let mut bad = Store::new();
        bad.set_number("x", 4);
        assert!(verify_model(&path, &bad).is_err());
    }

    #[test]
    fn any_of_traces_is_boolean_or() {
        let tests = [eq_x_3(), Trace::op(TraceOp::NumEq, Trace::var("x"), Trace::lit(7))];
        let disj = any_of_traces(&tests).unwrap();
        let eval = |x: i64| {
            let mut env = BTreeMap::new();
            env.insert("x".to_string(), x);
            trace_eval(&disj, &env).unwrap()
        };
        assert_eq!(eval(3), 1);
        assert_eq!(eval(7), 1);
        assert_eq!(eval(5), 0);
        assert!(any_of_traces(&[]).is_none());
    }
}
