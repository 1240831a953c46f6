//! Expression traces: symbolic expressions over concolic variables that
//! record how a concrete number was computed from the program's inputs.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use core::fmt;

use crate::lang::{Ident, PrimOp};

/// Binary operators that may appear in a trace. Predicates and comparisons
/// yield 1/0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceOp {
    Add,
    Sub,
    Mul,
    NumEq,
    Le,
    Lt,
}

impl TraceOp {
    pub fn symbol(self) -> &'static str {
        match self {
            TraceOp::Add => "+",
            TraceOp::Sub => "-",
            TraceOp::Mul => "*",
            TraceOp::NumEq => "=",
            TraceOp::Le => "<=",
            TraceOp::Lt => "<",
        }
    }

    pub fn from_prim(op: PrimOp) -> Option<TraceOp> {
        Some(match op {
            PrimOp::Add => TraceOp::Add,
            PrimOp::Sub => TraceOp::Sub,
            PrimOp::Mul => TraceOp::Mul,
            PrimOp::NumEq => TraceOp::NumEq,
            PrimOp::Le => TraceOp::Le,
            PrimOp::Lt => TraceOp::Lt,
            PrimOp::Not | PrimOp::IsProcedure | PrimOp::IsInteger => return None,
        })
    }
}

/// A trace is a variable, a literal, a boolean negation, or an operation on
/// two sub-traces. Sub-traces are shared, so cloning is cheap.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Trace {
    Var(Ident),
    Lit(i64),
    Neg(Arc<Trace>),
    Op { op: TraceOp, lhs: Arc<Trace>, rhs: Arc<Trace> },
}

impl Trace {
    pub fn var(name: impl Into<Ident>) -> Trace {
        Trace::Var(name.into())
    }

    pub fn lit(n: i64) -> Trace {
        Trace::Lit(n)
    }

    pub fn negation(t: Trace) -> Trace {
        Trace::Neg(Arc::new(t))
    }

    pub fn op(op: TraceOp, lhs: Trace, rhs: Trace) -> Trace {
        Trace::Op { op, lhs: Arc::new(lhs), rhs: Arc::new(rhs) }
    }

    /// Collect the variables of the trace into `out` in first-occurrence
    /// order (left to right).
    pub fn collect_vars(&self, out: &mut alloc::vec::Vec<Ident>) {
        match self {
            Trace::Var(x) => {
                if !out.iter().any(|v| v == x) {
                    out.push(x.clone());
                }
            }
            Trace::Lit(_) => {}
            Trace::Neg(t) => t.collect_vars(out),
            Trace::Op { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trace::Var(x) => write!(f, "{x}"),
            Trace::Lit(n) => write!(f, "{n}"),
            Trace::Neg(t) => write!(f, "(not {t})"),
            Trace::Op { op, lhs, rhs } => write!(f, "({} {lhs} {rhs})", op.symbol()),
        }
    }
}

/// A concrete integer paired with the trace that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracedValue {
    pub value: i64,
    pub trace: Trace,
}

impl TracedValue {
    pub fn new(value: i64, trace: Trace) -> Self {
        TracedValue { value, trace }
    }

    pub fn lit(n: i64) -> Self {
        TracedValue { value: n, trace: Trace::Lit(n) }
    }
}

impl fmt::Display for TracedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} {}>", self.value, self.trace)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceError {
    UnboundVar(Ident),
    Overflow,
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceError::UnboundVar(x) => write!(f, "trace variable `{x}` is unbound"),
            TraceError::Overflow => write!(f, "trace evaluation overflowed"),
        }
    }
}

fn bool_int(b: bool) -> i64 {
    if b {
        1
    } else {
        0
    }
}

/// Evaluate a trace under a number assignment. Negation maps 0 to 1 and any
/// other value to 0; comparisons yield 1/0; arithmetic is exact (checked)
/// 64-bit integer arithmetic.
pub fn trace_eval(t: &Trace, numbers: &BTreeMap<Ident, i64>) -> Result<i64, TraceError> {
    match t {
        Trace::Var(x) => numbers.get(x).copied().ok_or_else(|| TraceError::UnboundVar(x.clone())),
        Trace::Lit(n) => Ok(*n),
        Trace::Neg(inner) => Ok(bool_int(trace_eval(inner, numbers)? == 0)),
        Trace::Op { op, lhs, rhs } => {
            let l = trace_eval(lhs, numbers)?;
            let r = trace_eval(rhs, numbers)?;
            match op {
                TraceOp::Add => l.checked_add(r).ok_or(TraceError::Overflow),
                TraceOp::Sub => l.checked_sub(r).ok_or(TraceError::Overflow),
                TraceOp::Mul => l.checked_mul(r).ok_or(TraceError::Overflow),
                TraceOp::NumEq => Ok(bool_int(l == r)),
                TraceOp::Le => Ok(bool_int(l <= r)),
                TraceOp::Lt => Ok(bool_int(l < r)),
            }
        }
    }
}

/// Render as an s-expression; same as `Display`, named for call sites that
/// serialize constraints.
pub fn trace_to_sexp(t: &Trace) -> String {
    t.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    fn no_vars() -> BTreeMap<Ident, i64> {
        BTreeMap::new()
    }

    #[test]
    fn literal_evaluates_to_itself() {
        assert_eq!(trace_eval(&Trace::lit(7), &no_vars()), Ok(7));
    }

    #[test]
    fn double_negation_booleanizes() {
        // not(not(5)) = not(0) = 1: double negation turns a nonzero number
        // into 1 and leaves 0 at 0.
        let t = Trace::negation(Trace::negation(Trace::lit(5)));
        assert_eq!(trace_eval(&t, &no_vars()), Ok(1));
        let z = Trace::negation(Trace::negation(Trace::lit(0)));
        assert_eq!(trace_eval(&z, &no_vars()), Ok(0));
    }

    #[test]
    fn multiplication_reads_the_store() {
        let t = Trace::op(TraceOp::Mul, Trace::var("X"), Trace::lit(2));
        let mut env = BTreeMap::new();
        env.insert("X".to_string(), 3);
        assert_eq!(trace_eval(&t, &env), Ok(6));
    }

    #[test]
    fn unbound_variable_errors() {
        let t = Trace::var("missing");
        assert_eq!(trace_eval(&t, &no_vars()), Err(TraceError::UnboundVar("missing".into())));
    }

    #[test]
    fn comparisons_yield_unit_booleans() {
        let env = no_vars();
        for (op, l, r, want) in [
            (TraceOp::NumEq, 3, 3, 1),
            (TraceOp::NumEq, 3, 4, 0),
            (TraceOp::Le, 3, 3, 1),
            (TraceOp::Lt, 3, 3, 0),
            (TraceOp::Lt, 2, 3, 1),
        ] {
            let t = Trace::op(op, Trace::lit(l), Trace::lit(r));
            assert_eq!(trace_eval(&t, &env), Ok(want));
        }
    }

    #[test]
    fn overflow_is_an_error() {
        let t = Trace::op(TraceOp::Mul, Trace::lit(i64::MAX), Trace::lit(2));
        assert_eq!(trace_eval(&t, &no_vars()), Err(TraceError::Overflow));
    }

    #[test]
    fn display_is_sexp() {
        let t = Trace::op(TraceOp::NumEq, Trace::op(TraceOp::Add, Trace::var("x"), Trace::lit(1)), Trace::lit(10));
        assert_eq!(trace_to_sexp(&t), "(= (+ x 1) 10)");
        assert_eq!(Trace::negation(Trace::var("y")).to_string(), "(not y)");
    }
}
