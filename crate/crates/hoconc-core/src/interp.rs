//! Reference call-by-value evaluator for the user language.
//!
//! This is the replay oracle: every counterexample the search reports is
//! re-run here, with its inputs reified to plain user-language values, and
//! must reproduce the explicit `(error)`. It is deliberately simple — no
//! traces, no logging.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;

use crate::lang::{print_expr, Expr, Ident, PrimOp, Program};

/// Recursion depth cap shared by both evaluators. Fixed (fuel-independent)
/// so that raising fuel never turns a finished outcome into an overflow,
/// and small enough that interpreter frames fit a default thread stack.
pub const MAX_EVAL_DEPTH: usize = 400;

#[derive(Debug, Clone)]
pub enum UserValue {
    Num(i64),
    Closure(Arc<ClosureData>),
}

#[derive(Debug, Clone)]
pub struct ClosureData {
    pub param: Ident,
    pub body: Expr,
    pub env: Env,
}

impl UserValue {
    pub fn closure(param: Ident, body: Expr, env: Env) -> UserValue {
        UserValue::Closure(Arc::new(ClosureData { param, body, env }))
    }

    /// Print as user-language syntax (closures as lambda terms).
    pub fn print(&self) -> String {
        match self {
            UserValue::Num(n) => format!("{n}"),
            UserValue::Closure(c) => {
                format!("(lambda ({}) {})", c.param, print_expr(&c.body))
            }
        }
    }
}

/// Structural equality on results: numbers by value, closures by shape.
impl PartialEq for UserValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (UserValue::Num(a), UserValue::Num(b)) => a == b,
            (UserValue::Closure(a), UserValue::Closure(b)) => {
                a.param == b.param && a.body == b.body
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Env(Option<Arc<EnvNode>>);

#[derive(Debug)]
pub struct EnvNode {
    name: Ident,
    value: UserValue,
    rest: Env,
}

impl Env {
    pub fn empty() -> Env {
        Env(None)
    }

    pub fn bind(&self, name: Ident, value: UserValue) -> Env {
        Env(Some(Arc::new(EnvNode { name, value, rest: self.clone() })))
    }

    pub fn lookup(&self, name: &str) -> Option<&UserValue> {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BugKind {
    ExplicitError,
    Stuck,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Value(UserValue),
    Bug { kind: BugKind, at: String },
    FuelExhausted,
}

impl Outcome {
    pub fn is_explicit_error(&self) -> bool {
        matches!(self, Outcome::Bug { kind: BugKind::ExplicitError, .. })
    }
}

enum Halt {
    Error { at: String },
    Stuck { at: String },
    Fuel,
}

struct Interp<'a> {
    bindings: &'a BTreeMap<Ident, UserValue>,
    fuel: u64,
    /// Number of cond clause tests evaluated; the independent oracle for
    /// the machine's first-order constraint count.
    tests_evaluated: u64,
}

type IRes = Result<UserValue, Halt>;

impl<'a> Interp<'a> {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.fuel == 0 {
            return Err(Halt::Fuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn eval(&mut self, e: &Expr, env: &Env, depth: usize) -> IRes {
        self.tick()?;
        if depth > MAX_EVAL_DEPTH {
            return Err(Halt::Fuel);
        }
        match e {
            Expr::Int(n) => Ok(UserValue::Num(*n)),
            Expr::Var(x) => match env.lookup(x) {
                Some(v) => Ok(v.clone()),
                None => Err(Halt::Stuck { at: format!("unbound variable `{x}`") }),
            },
            Expr::Input(x) => match self.bindings.get(x) {
                Some(v) => Ok(v.clone()),
                None => Err(Halt::Stuck { at: format!("unbound input `{x}`") }),
            },
            Expr::Lambda { param, body } => {
                Ok(UserValue::closure(param.clone(), (**body).clone(), env.clone()))
            }
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
                    let tv = self.eval(test, env, depth + 1)?;
                    self.tests_evaluated += 1;
                    match tv {
                        UserValue::Num(n) => {
                            if n != 0 {
                                return self.eval(body, env, depth + 1);
                            }
                        }
                        UserValue::Closure(_) => {
                            return Err(Halt::Stuck {
                                at: format!("closure in test position: {}", print_expr(test)),
                            })
                        }
                    }
                }
                self.eval(else_body, env, depth + 1)
            }
            Expr::Prim { op, args } => {
                let mut vals = alloc::vec::Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, env, depth + 1)?);
                }
                self.prim(*op, &vals)
            }
            Expr::Error => Err(Halt::Error { at: String::from("(error)") }),
        }
    }

    fn apply(&mut self, f: UserValue, a: UserValue, depth: usize) -> IRes {
        self.tick()?;
        match f {
            UserValue::Closure(c) => {
                let inner = c.env.bind(c.param.clone(), a);
                self.eval(&c.body, &inner, depth + 1)
            }
            UserValue::Num(n) => Err(Halt::Stuck { at: format!("applying the number {n}") }),
        }
    }

    fn prim(&self, op: PrimOp, vals: &[UserValue]) -> IRes {
        let stuck = |at: String| Err(Halt::Stuck { at });
        let num = |v: &UserValue| match v {
            UserValue::Num(n) => Some(*n),
            UserValue::Closure(_) => None,
        };
        match op {
            PrimOp::IsProcedure => Ok(UserValue::Num(match vals[0] {
                UserValue::Closure(_) => 1,
                UserValue::Num(_) => 0,
            })),
            PrimOp::IsInteger => Ok(UserValue::Num(match vals[0] {
                UserValue::Num(_) => 1,
                UserValue::Closure(_) => 0,
            })),
            PrimOp::Not => match num(&vals[0]) {
                Some(n) => Ok(UserValue::Num(if n == 0 { 1 } else { 0 })),
                None => stuck(format!("(not {})", vals[0].print())),
            },
            PrimOp::Add | PrimOp::Sub | PrimOp::Mul | PrimOp::NumEq | PrimOp::Le | PrimOp::Lt => {
                let (Some(l), Some(r)) = (num(&vals[0]), num(&vals[1])) else {
                    return stuck(format!(
                        "({} {} {})",
                        op.symbol(),
                        vals[0].print(),
                        vals[1].print()
                    ));
                };
                let out = match op {
                    PrimOp::Add => l.checked_add(r),
                    PrimOp::Sub => l.checked_sub(r),
                    PrimOp::Mul => l.checked_mul(r),
                    PrimOp::NumEq => Some(if l == r { 1 } else { 0 }),
                    PrimOp::Le => Some(if l <= r { 1 } else { 0 }),
                    PrimOp::Lt => Some(if l < r { 1 } else { 0 }),
                    _ => unreachable!(),
                };
                match out {
                    Some(n) => Ok(UserValue::Num(n)),
                    None => stuck(format!("({} {l} {r}) overflowed", op.symbol())),
                }
            }
        }
    }
}

/// Evaluate `p.main` under `bindings` with at most `fuel` reduction steps.
/// All failure modes are `Outcome` variants; the result is deterministic,
/// and any non-`FuelExhausted` outcome is stable under larger fuel.
pub fn eval_user(p: &Program, bindings: &BTreeMap<Ident, UserValue>, fuel: u64) -> Outcome {
    eval_user_counting(p, bindings, fuel).0
}

/// Like [`eval_user`], additionally reporting how many cond clause tests
/// were evaluated. Used as an independent count oracle against the concolic
/// machine's first-order constraints.
pub fn eval_user_counting(
    p: &Program,
    bindings: &BTreeMap<Ident, UserValue>,
    fuel: u64,
) -> (Outcome, u64) {
    let mut interp = Interp { bindings, fuel, tests_evaluated: 0 };
    let outcome = match interp.eval(&p.main, &Env::empty(), 0) {
        Ok(v) => Outcome::Value(v),
        Err(Halt::Error { at }) => Outcome::Bug { kind: BugKind::ExplicitError, at },
        Err(Halt::Stuck { at }) => Outcome::Bug { kind: BugKind::Stuck, at },
        Err(Halt::Fuel) => Outcome::FuelExhausted,
    };
    (outcome, interp.tests_evaluated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use alloc::string::ToString;

    fn run(src: &str, fuel: u64) -> Outcome {
        let p = parse_program(src).unwrap();
        eval_user(&p, &BTreeMap::new(), fuel)
    }

    #[test]
    fn beta_reduction() {
        assert_eq!(run("(inputs) (main ((lambda (y) y) 42))", 100), Outcome::Value(UserValue::Num(42)));
    }

    #[test]
    fn else_error_is_an_explicit_bug() {
        let out = run("(inputs) (main (cond (else (error))))", 100);
        assert!(out.is_explicit_error(), "{out:?}");
    }

    #[test]
    fn input_function_that_probes_then_errors() {
        // f = (lambda (g) (cond ((procedure? g) (cond ((= (g 1) 5) (error)) (else 0))) (else 1)))
        // applied to (lambda (w) 5): hand-stepping the substitution semantics
        // gives (error) after the inner call returns 5.
        let p = parse_program(
            "(inputs (f function)) (main (f (lambda (w) 5)))",
        )
        .unwrap();
        let f_src = parse_program(
            "(inputs) (main (lambda (g) (cond ((procedure? g) (cond ((= (g 1) 5) (error)) (else 0))) (else 1))))",
        )
        .unwrap();
        let mut bindings = BTreeMap::new();
        let f = match eval_user(&f_src, &BTreeMap::new(), 10) {
            Outcome::Value(v) => v,
            other => panic!("setup failed: {other:?}"),
        };
        bindings.insert("f".to_string(), f);
        let out = eval_user(&p, &bindings, 1000);
        assert!(out.is_explicit_error(), "{out:?}");
    }

    #[test]
    fn stuck_states_are_flagged() {
        let out = run("(inputs) (main (3 4))", 100);
        assert!(matches!(out, Outcome::Bug { kind: BugKind::Stuck, .. }), "{out:?}");
        let out = run("(inputs) (main (+ 1 (lambda (x) x)))", 100);
        assert!(matches!(out, Outcome::Bug { kind: BugKind::Stuck, .. }), "{out:?}");
        let out = run("(inputs) (main (cond ((lambda (x) x) 1) (else 0)))", 100);
        assert!(matches!(out, Outcome::Bug { kind: BugKind::Stuck, .. }), "{out:?}");
    }

    #[test]
    fn fuel_exhaustion_and_monotonicity() {
        let omega = "(inputs) (main ((lambda (x) (x x)) (lambda (x) (x x))))";
        assert_eq!(run(omega, 1000), Outcome::FuelExhausted);
        // A finished outcome never changes when fuel increases.
        let src = "(inputs) (main ((lambda (y) (* y y)) 6))";
        let at_small = run(src, 50);
        assert_eq!(at_small, Outcome::Value(UserValue::Num(36)));
        assert_eq!(run(src, 5_000), at_small);
    }

    #[test]
    fn determinism() {
        let src = "(inputs) (main (cond ((= (+ 2 2) 4) 9) (else (error))))";
        assert_eq!(run(src, 100), run(src, 100));
        assert_eq!(run(src, 100), Outcome::Value(UserValue::Num(9)));
    }
}
