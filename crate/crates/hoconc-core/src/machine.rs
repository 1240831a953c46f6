//! The concolic machine: evaluates a program under a store while logging
//! the path constraints that describe the control-flow decisions taken.
//!
//! The machine mirrors the plain evaluator's call-by-value semantics but
//! carries every first-order value as a [`TracedValue`]. Instrumentation is
//! interpreter-side: user-program conditionals log a first-order constraint
//! per evaluated test, and applying a canonical function input logs one
//! test constraint plus a branch constraint per evaluated clause — the same
//! observable path a source-to-source translation would produce.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::canonical::{BranchBody, CallArg, CanonicalFn, ClauseTest, Dispatch, Store};
use crate::interp::{BugKind, MAX_EVAL_DEPTH};
use crate::lang::{print_expr, Expr, Ident, PrimOp, Program};
use crate::path::{Inspected, Path, PathConstraint};
use crate::trace::{trace_eval, Trace, TraceOp, TracedValue};

#[derive(Debug, Clone)]
pub enum ConcValue {
    Traced(TracedValue),
    Fn(Arc<FnValue>),
}

#[derive(Debug)]
pub enum FnValue {
    User { param: Ident, body: Expr, env: CEnv },
    Canonical { func: Arc<CanonicalFn>, env: CEnv },
}

impl ConcValue {
    pub fn traced(value: i64, trace: Trace) -> ConcValue {
        ConcValue::Traced(TracedValue::new(value, trace))
    }

    pub fn print(&self) -> String {
        match self {
            ConcValue::Traced(tv) => format!("{tv}"),
            ConcValue::Fn(f) => match &**f {
                FnValue::User { param, body, .. } => {
                    format!("(lambda ({param}) {})", print_expr(body))
                }
                FnValue::Canonical { func, .. } => format!("<canonical {}>", func.param),
            },
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CEnv(Option<Arc<CEnvNode>>);

#[derive(Debug)]
struct CEnvNode {
    name: Ident,
    value: ConcValue,
    rest: CEnv,
}

impl CEnv {
    pub fn empty() -> CEnv {
        CEnv(None)
    }

    pub fn bind(&self, name: Ident, value: ConcValue) -> CEnv {
        CEnv(Some(Arc::new(CEnvNode { name, value, rest: self.clone() })))
    }

    pub fn lookup(&self, name: &str) -> Option<&ConcValue> {
        let mut cur = self;
        while let Some(node) = &cur.0 {
            if node.name == name {
                return Some(&node.value);
            }
            cur = &node.rest;
        }
        None
    }
}

/// Outcome of a concolic run; first-order results keep their traces.
#[derive(Debug, Clone)]
pub enum COutcome {
    Value(ConcValue),
    Bug { kind: BugKind, at: String },
    FuelExhausted,
}

impl COutcome {
    pub fn is_explicit_error(&self) -> bool {
        matches!(self, COutcome::Bug { kind: BugKind::ExplicitError, .. })
    }

    pub fn is_bug(&self) -> bool {
        matches!(self, COutcome::Bug { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicError {
    pub at: String,
}

enum Halt {
    Error { at: String },
    Stuck { at: String },
    Fuel,
}

type MRes = Result<ConcValue, Halt>;

/// Apply a primitive to already-evaluated operands. Predicates dispatch on
/// the value's tag and yield literal-traced booleans; arithmetic and
/// comparisons recompute the number and build the operation trace; `not`
/// builds a negation trace. Arithmetic on a function is a dynamic error.
pub fn prim_apply(op: PrimOp, args: &[ConcValue]) -> Result<ConcValue, DynamicError> {
    debug_assert_eq!(args.len(), op.arity());
    let traced = |v: &ConcValue| match v {
        ConcValue::Traced(tv) => Some(tv.clone()),
        ConcValue::Fn(_) => None,
    };
    match op {
        PrimOp::IsProcedure => Ok(match args[0] {
            ConcValue::Fn(_) => ConcValue::traced(1, Trace::lit(1)),
            ConcValue::Traced(_) => ConcValue::traced(0, Trace::lit(0)),
        }),
        PrimOp::IsInteger => Ok(match args[0] {
            ConcValue::Traced(_) => ConcValue::traced(1, Trace::lit(1)),
            ConcValue::Fn(_) => ConcValue::traced(0, Trace::lit(0)),
        }),
        PrimOp::Not => match traced(&args[0]) {
            Some(tv) => {
                let value = if tv.value == 0 { 1 } else { 0 };
                Ok(ConcValue::traced(value, Trace::negation(tv.trace)))
            }
            None => Err(DynamicError { at: format!("(not {})", args[0].print()) }),
        },
        PrimOp::Add | PrimOp::Sub | PrimOp::Mul | PrimOp::NumEq | PrimOp::Le | PrimOp::Lt => {
            let (Some(l), Some(r)) = (traced(&args[0]), traced(&args[1])) else {
                return Err(DynamicError {
                    at: format!("({} {} {})", op.symbol(), args[0].print(), args[1].print()),
                });
            };
            let value = match op {
                PrimOp::Add => l.value.checked_add(r.value),
                PrimOp::Sub => l.value.checked_sub(r.value),
                PrimOp::Mul => l.value.checked_mul(r.value),
                PrimOp::NumEq => Some((l.value == r.value) as i64),
                PrimOp::Le => Some((l.value <= r.value) as i64),
                PrimOp::Lt => Some((l.value < r.value) as i64),
                _ => unreachable!(),
            };
            let Some(value) = value else {
                return Err(DynamicError {
                    at: format!("({} {} {}) overflowed", op.symbol(), l.value, r.value),
                });
            };
            let op = TraceOp::from_prim(op).unwrap();
            Ok(ConcValue::traced(value, Trace::op(op, l.trace, r.trace)))
        }
    }
}

struct Machine<'a> {
    store: &'a Store,
    path: Vec<PathConstraint>,
    fuel: u64,
}

impl<'a> Machine<'a> {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.fuel == 0 {
            return Err(Halt::Fuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn log(&mut self, c: PathConstraint) {
        self.path.push(c);
    }

    /// Trace coherence: every traced value the machine constructs satisfies
    /// value = trace_eval(trace) under the store's numbers.
    fn check_coherence(&self, v: &ConcValue) {
        if cfg!(debug_assertions) {
            if let ConcValue::Traced(tv) = v {
                debug_assert_eq!(
                    trace_eval(&tv.trace, &self.store.numbers),
                    Ok(tv.value),
                    "trace out of sync with concrete value"
                );
            }
        }
    }

    fn eval(&mut self, e: &Expr, env: &CEnv, depth: usize) -> MRes {
        self.tick()?;
        if depth > MAX_EVAL_DEPTH {
            return Err(Halt::Fuel);
        }
        match e {
            Expr::Int(n) => Ok(ConcValue::traced(*n, Trace::lit(*n))),
            Expr::Var(x) => match env.lookup(x) {
                Some(v) => Ok(v.clone()),
                None => Err(Halt::Stuck { at: format!("unbound variable `{x}`") }),
            },
            Expr::Input(x) => self.input_value(x),
            Expr::Lambda { param, body } => Ok(ConcValue::Fn(Arc::new(FnValue::User {
                param: param.clone(),
                body: (**body).clone(),
                env: env.clone(),
            }))),
            Expr::App { func, arg } => {
                let f = self.eval(func, env, depth + 1)?;
                let a = self.eval(arg, env, depth + 1)?;
                self.apply(f, a, depth)
            }
            Expr::Let { name, rhs, body } => {
                let v = self.eval(rhs, env, depth + 1)?;
                let inner = env.bind(name.clone(), v);
                self.eval(body, &inner, depth + 1)
            }
            Expr::Cond { clauses, else_body } => {
                for (test, body) in clauses {
                    match self.eval(test, env, depth + 1)? {
                        ConcValue::Traced(tv) => {
                            self.log(PathConstraint::FirstOrder {
                                outcome: tv.value != 0,
                                trace: tv.trace.clone(),
                            });
                            if tv.value != 0 {
                                return self.eval(body, env, depth + 1);
                            }
                        }
                        ConcValue::Fn(_) => {
                            return Err(Halt::Stuck {
                                at: format!("closure in test position: {}", print_expr(test)),
                            })
                        }
                    }
                }
                self.eval(else_body, env, depth + 1)
            }
            Expr::Prim { op, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, env, depth + 1)?);
                }
                match prim_apply(*op, &vals) {
                    Ok(v) => {
                        self.check_coherence(&v);
                        Ok(v)
                    }
                    Err(e) => Err(Halt::Stuck { at: e.at }),
                }
            }
            Expr::Error => Err(Halt::Error { at: String::from("(error)") }),
        }
    }

    fn input_value(&mut self, x: &Ident) -> MRes {
        if let Some(n) = self.store.numbers.get(x) {
            return Ok(ConcValue::traced(*n, Trace::var(x.clone())));
        }
        if let Some(f) = self.store.functions.get(x) {
            return Ok(ConcValue::Fn(Arc::new(FnValue::Canonical {
                func: Arc::new(f.clone()),
                env: CEnv::empty(),
            })));
        }
        Err(Halt::Stuck { at: format!("input `{x}` is not bound in the store") })
    }

    fn apply(&mut self, f: ConcValue, arg: ConcValue, depth: usize) -> MRes {
        self.tick()?;
        match f {
            ConcValue::Traced(tv) => {
                Err(Halt::Stuck { at: format!("applying the number {}", tv.value) })
            }
            ConcValue::Fn(fv) => match &*fv {
                FnValue::User { param, body, env } => {
                    let inner = env.bind(param.clone(), arg);
                    self.eval(body, &inner, depth + 1)
                }
                FnValue::Canonical { func, env } => {
                    let inner = env.bind(func.param.clone(), arg);
                    self.eval_dispatch(&func.body, &inner, depth + 1)
                }
            },
        }
    }

    fn eval_dispatch(&mut self, d: &Dispatch, env: &CEnv, depth: usize) -> MRes {
        if depth > MAX_EVAL_DEPTH {
            return Err(Halt::Fuel);
        }
        let scrutinee = match env.lookup(&d.scrutinee) {
            Some(v) => v.clone(),
            None => return Err(Halt::Stuck { at: format!("unbound scrutinee `{}`", d.scrutinee) }),
        };
        let inspected = match &scrutinee {
            ConcValue::Traced(tv) => Inspected::Number(tv.clone()),
            ConcValue::Fn(_) => Inspected::FunctionValue,
        };
        self.log(PathConstraint::Test { label: d.else_label, inspected });
        for clause in &d.clauses {
            self.tick()?;
            let result = self.clause_test(&clause.test, &scrutinee)?;
            self.log(PathConstraint::Branch {
                label: clause.label,
                outcome: result.value != 0,
                trace: result.trace.clone(),
            });
            if result.value != 0 {
                return self.eval_branch_body(&clause.body, env, depth);
            }
        }
        self.log(PathConstraint::Branch {
            label: d.else_label,
            outcome: true,
            trace: Trace::lit(1),
        });
        Ok(ConcValue::traced(0, Trace::lit(0)))
    }

    fn clause_test(&mut self, test: &ClauseTest, scrutinee: &ConcValue) -> Result<TracedValue, Halt> {
        match test {
            ClauseTest::IsProc => Ok(match scrutinee {
                ConcValue::Fn(_) => TracedValue::new(1, Trace::lit(1)),
                ConcValue::Traced(_) => TracedValue::new(0, Trace::lit(0)),
            }),
            ClauseTest::EqTrace(t) => {
                let ConcValue::Traced(tv) = scrutinee else {
                    return Err(Halt::Stuck {
                        at: format!("(= {} {t})", scrutinee.print()),
                    });
                };
                let rhs = trace_eval(t, &self.store.numbers)
                    .map_err(|e| Halt::Stuck { at: format!("{e}") })?;
                Ok(TracedValue::new(
                    (tv.value == rhs) as i64,
                    Trace::op(TraceOp::NumEq, tv.trace.clone(), t.clone()),
                ))
            }
        }
    }

    fn eval_branch_body(&mut self, b: &BranchBody, env: &CEnv, depth: usize) -> MRes {
        match b {
            BranchBody::Var(x) => match env.lookup(x) {
                Some(v) => Ok(v.clone()),
                None => Err(Halt::Stuck { at: format!("unbound variable `{x}`") }),
            },
            BranchBody::ConcVar(x) => match self.store.numbers.get(x) {
                Some(n) => Ok(ConcValue::traced(*n, Trace::var(x.clone()))),
                None => Err(Halt::Stuck { at: format!("concolic variable `{x}` unbound") }),
            },
            BranchBody::Fn(inner) => Ok(ConcValue::Fn(Arc::new(FnValue::Canonical {
                func: Arc::new((**inner).clone()),
                env: env.clone(),
            }))),
            BranchBody::LetCall { callee, arg, result, then } => {
                let f = match env.lookup(callee) {
                    Some(v) => v.clone(),
                    None => {
                        return Err(Halt::Stuck { at: format!("unbound callee `{callee}`") })
                    }
                };
                let a = match arg {
                    CallArg::Var(x) => match env.lookup(x) {
                        Some(v) => v.clone(),
                        None => {
                            return Err(Halt::Stuck { at: format!("unbound argument `{x}`") })
                        }
                    },
                    CallArg::ConcVar(x) => match self.store.numbers.get(x) {
                        Some(n) => ConcValue::traced(*n, Trace::var(x.clone())),
                        None => {
                            return Err(Halt::Stuck {
                                at: format!("concolic variable `{x}` unbound"),
                            })
                        }
                    },
                };
                let r = self.apply(f, a, depth + 1)?;
                let inner = env.bind(result.clone(), r);
                self.eval_dispatch(then, &inner, depth + 1)
            }
        }
    }
}

/// Run `p` under `σ` with the given fuel, producing the outcome and the
/// path constraints in evaluation order. Deterministic; every label in the
/// path occurs in `σ`. The caller is responsible for `σ` being proper and
/// covering the program's inputs.
pub fn concolic_eval(p: &Program, store: &Store, fuel: u64) -> (COutcome, Path) {
    let mut m = Machine { store, path: Vec::new(), fuel };
    let outcome = match m.eval(&p.main, &CEnv::empty(), 0) {
        Ok(v) => COutcome::Value(v),
        Err(Halt::Error { at }) => COutcome::Bug { kind: BugKind::ExplicitError, at },
        Err(Halt::Stuck { at }) => COutcome::Bug { kind: BugKind::Stuck, at },
        Err(Halt::Fuel) => COutcome::FuelExhausted,
    };
    (outcome, Path(m.path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{default_fn, IdSource};
    use crate::lang::parse_program;
    use crate::trace::trace_to_sexp;

    fn number_store(pairs: &[(&str, i64)]) -> Store {
        let mut s = Store::new();
        for (k, v) in pairs {
            s.set_number(*k, *v);
        }
        s
    }

    #[test]
    fn prim_apply_cases() {
        let ids = IdSource::new();
        let f = ConcValue::Fn(Arc::new(FnValue::Canonical {
            func: Arc::new(default_fn(&ids)),
            env: CEnv::empty(),
        }));
        match prim_apply(PrimOp::IsProcedure, core::slice::from_ref(&f)).unwrap() {
            ConcValue::Traced(tv) => {
                assert_eq!(tv.value, 1);
                assert_eq!(tv.trace, Trace::lit(1));
            }
            other => panic!("unexpected {other:?}"),
        }

        // Add on traced values recomputes through the trace.
        let x = ConcValue::traced(2, Trace::var("x"));
        let three = ConcValue::traced(3, Trace::lit(3));
        match prim_apply(PrimOp::Add, &[x, three]).unwrap() {
            ConcValue::Traced(tv) => {
                assert_eq!(tv.value, 5);
                assert_eq!(trace_to_sexp(&tv.trace), "(+ x 3)");
                let numbers = number_store(&[("x", 2)]).numbers;
                assert_eq!(trace_eval(&tv.trace, &numbers), Ok(5));
            }
            other => panic!("unexpected {other:?}"),
        }

        let four = ConcValue::traced(4, Trace::lit(4));
        assert!(prim_apply(PrimOp::Mul, &[four, f]).is_err());
    }

    #[test]
    fn user_cond_logs_first_order_constraints() {
        let p = parse_program("(inputs (x number)) (main (cond ((= x 3) (error)) (else 0)))")
            .unwrap();
        let store = number_store(&[("x", 0)]);
        let (outcome, path) = concolic_eval(&p, &store, 1000);
        match outcome {
            COutcome::Value(ConcValue::Traced(tv)) => assert_eq!(tv.value, 0),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(path.0.len(), 1);
        match &path.0[0] {
            PathConstraint::FirstOrder { outcome, trace } => {
                assert!(!outcome);
                assert_eq!(trace_to_sexp(trace), "(= x 3)");
            }
            other => panic!("unexpected constraint {other}"),
        }
    }

    #[test]
    fn default_canonical_function_logs_one_block() {
        let ids = IdSource::new();
        let p = parse_program("(inputs (f function)) (main (f 7))").unwrap();
        let mut store = Store::new();
        let f = default_fn(&ids);
        let else_label = f.body.else_label;
        store.set_function("f", f);
        let (outcome, path) = concolic_eval(&p, &store, 1000);
        match outcome {
            COutcome::Value(ConcValue::Traced(tv)) => assert_eq!(tv.value, 0),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(path.0.len(), 2);
        match &path.0[0] {
            PathConstraint::Test { label, inspected } => {
                assert_eq!(*label, else_label);
                match inspected {
                    Inspected::Number(tv) => {
                        assert_eq!(tv.value, 7);
                        assert_eq!(tv.trace, Trace::lit(7));
                    }
                    other => panic!("unexpected inspected {other}"),
                }
            }
            other => panic!("unexpected constraint {other}"),
        }
        match &path.0[1] {
            PathConstraint::Branch { label, outcome, trace } => {
                assert_eq!(*label, else_label);
                assert!(*outcome);
                assert_eq!(*trace, Trace::lit(1));
            }
            other => panic!("unexpected constraint {other}"),
        }
    }

    #[test]
    fn zero_fuel_exhausts_immediately() {
        let p = parse_program("(inputs) (main 0)").unwrap();
        let (outcome, path) = concolic_eval(&p, &Store::new(), 0);
        assert!(matches!(outcome, COutcome::FuelExhausted));
        assert!(path.is_empty());
    }

    #[test]
    fn explicit_error_reaches_the_top() {
        let p = parse_program("(inputs) (main (error))").unwrap();
        let (outcome, path) = concolic_eval(&p, &Store::new(), 10);
        assert!(outcome.is_explicit_error());
        assert!(path.is_empty());
    }

    #[test]
    fn traces_flow_through_arithmetic() {
        let p = parse_program(
            "(inputs (x number) (y number)) (main (cond ((= (+ (* x 2) y) 10) (error)) (else 0)))",
        )
        .unwrap();
        let store = number_store(&[("x", 3), ("y", 4)]);
        let (outcome, path) = concolic_eval(&p, &store, 1000);
        assert!(outcome.is_explicit_error(), "3*2+4 = 10 takes the error branch");
        match &path.0[0] {
            PathConstraint::FirstOrder { outcome, trace } => {
                assert!(outcome);
                assert_eq!(trace_to_sexp(trace), "(= (+ (* x 2) y) 10)");
            }
            other => panic!("unexpected {other}"),
        }
    }
}
