//! Canonical function inputs and the store.
//!
//! A store is the complete input to one concolic run: every declared input
//! is bound to an integer or a canonical function. Canonical functions are
//! lambdas over a labeled multi-way conditional that dispatches on the
//! innermost-bound variable; clause tests check `procedure?` or equality
//! against a trace, clause bodies return a variable, a fresh concolic
//! number, a nested canonical function, or call a function in scope and
//! dispatch on the result. The else branch always returns 0.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::interp::UserValue;
use crate::lang::{Expr, Ident, PrimOp};
use crate::trace::{trace_eval, Trace, TraceError};

/// A branch label, unique within one store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u64);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

/// Source of fresh labels and fresh names. One instance per search; a single
/// monotone atomic counter backs every kind, so ids never collide.
#[derive(Debug, Default)]
pub struct IdSource {
    next: AtomicU64,
}

impl IdSource {
    pub fn new() -> Self {
        IdSource { next: AtomicU64::new(0) }
    }

    fn reserve(&self) -> u64 {
        self.next.fetch_add(1, Ordering::Relaxed)
    }

    pub fn fresh_label(&self) -> Label {
        Label(self.reserve())
    }

    /// Fresh concolic number variable. The `$` prefix is rejected by the
    /// program parser, so these can never collide with declared inputs.
    pub fn fresh_concvar(&self) -> Ident {
        format!("$k{}", self.reserve())
    }

    pub fn fresh_param(&self) -> Ident {
        format!("z{}", self.reserve())
    }

    pub fn fresh_result(&self) -> Ident {
        format!("r{}", self.reserve())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalFn {
    pub param: Ident,
    pub body: Dispatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub scrutinee: Ident,
    pub clauses: Vec<Clause>,
    pub else_label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub label: Label,
    pub test: ClauseTest,
    pub body: BranchBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseTest {
    IsProc,
    EqTrace(Trace),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallArg {
    Var(Ident),
    ConcVar(Ident),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BranchBody {
    /// Return a variable in scope (a parameter or a call result).
    Var(Ident),
    /// Return the value of a concolic number variable.
    ConcVar(Ident),
    /// Return a nested canonical function.
    Fn(Box<CanonicalFn>),
    /// Call a function in scope and dispatch on the result.
    LetCall { callee: Ident, arg: CallArg, result: Ident, then: Box<Dispatch> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    Number(i64),
    Function(CanonicalFn),
}

/// Map from concolic variable to integer or canonical function.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Store {
    pub numbers: BTreeMap<Ident, i64>,
    pub functions: BTreeMap<Ident, CanonicalFn>,
}

impl Store {
    pub fn new() -> Store {
        Store::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.numbers.contains_key(name) || self.functions.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<Binding> {
        if let Some(n) = self.numbers.get(name) {
            return Some(Binding::Number(*n));
        }
        self.functions.get(name).map(|f| Binding::Function(f.clone()))
    }

    pub fn set_number(&mut self, name: impl Into<Ident>, value: i64) {
        self.numbers.insert(name.into(), value);
    }

    pub fn set_function(&mut self, name: impl Into<Ident>, f: CanonicalFn) {
        self.functions.insert(name.into(), f);
    }
}

/// The simplest canonical function: one else branch returning 0.
pub fn default_fn(ids: &IdSource) -> CanonicalFn {
    let param = ids.fresh_param();
    CanonicalFn {
        param: param.clone(),
        body: Dispatch { scrutinee: param, clauses: Vec::new(), else_label: ids.fresh_label() },
    }
}

/// An else-only dispatch on `scrutinee` with a fresh label.
pub fn default_dispatch(scrutinee: Ident, ids: &IdSource) -> Dispatch {
    Dispatch { scrutinee, clauses: Vec::new(), else_label: ids.fresh_label() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnboundConcVar { input: Ident, var: Ident },
    DuplicateLabel(Label),
    NonDisjointTests { else_label: Label, value: i64 },
    TraceEval { else_label: Label, error: TraceError },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnboundConcVar { input, var } => {
                write!(f, "function `{input}` uses concolic variable `{var}` with no number binding")
            }
            Violation::DuplicateLabel(l) => write!(f, "label {l} occurs more than once"),
            Violation::NonDisjointTests { else_label, value } => {
                write!(f, "dispatch {else_label} has two equality tests for value {value}")
            }
            Violation::TraceEval { else_label, error } => {
                write!(f, "dispatch {else_label}: test trace does not evaluate: {error}")
            }
        }
    }
}

fn each_dispatch<'a>(f: &'a CanonicalFn, visit: &mut impl FnMut(&'a Dispatch)) {
    fn walk<'a>(d: &'a Dispatch, visit: &mut impl FnMut(&'a Dispatch)) {
        visit(d);
        for clause in &d.clauses {
            match &clause.body {
                BranchBody::Fn(inner) => walk(&inner.body, visit),
                BranchBody::LetCall { then, .. } => walk(then, visit),
                BranchBody::Var(_) | BranchBody::ConcVar(_) => {}
            }
        }
    }
    walk(&f.body, visit)
}

fn concvars_of_fn(f: &CanonicalFn, out: &mut BTreeSet<Ident>) {
    each_dispatch(f, &mut |d| {
        for clause in &d.clauses {
            if let ClauseTest::EqTrace(t) = &clause.test {
                let mut vars = Vec::new();
                t.collect_vars(&mut vars);
                out.extend(vars);
            }
            match &clause.body {
                BranchBody::ConcVar(x) => {
                    out.insert(x.clone());
                }
                BranchBody::LetCall { arg: CallArg::ConcVar(x), .. } => {
                    out.insert(x.clone());
                }
                _ => {}
            }
        }
    });
}

/// Check the three properness conditions: concolic variables inside
/// functions are number-bound, labels are globally unique, and the equality
/// tests of each dispatch pin pairwise distinct values.
pub fn check_proper(store: &Store) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let mut seen_labels = BTreeSet::new();
    for (input, f) in &store.functions {
        let mut used = BTreeSet::new();
        concvars_of_fn(f, &mut used);
        for var in used {
            if !store.numbers.contains_key(&var) {
                violations.push(Violation::UnboundConcVar { input: input.clone(), var });
            }
        }
        each_dispatch(f, &mut |d| {
            for label in d.clauses.iter().map(|c| c.label).chain([d.else_label]) {
                if !seen_labels.insert(label) {
                    violations.push(Violation::DuplicateLabel(label));
                }
            }
            let mut values = BTreeSet::new();
            for clause in &d.clauses {
                if let ClauseTest::EqTrace(t) = &clause.test {
                    match trace_eval(t, &store.numbers) {
                        Ok(v) => {
                            if !values.insert(v) {
                                violations.push(Violation::NonDisjointTests {
                                    else_label: d.else_label,
                                    value: v,
                                });
                            }
                        }
                        Err(error) => violations
                            .push(Violation::TraceEval { else_label: d.else_label, error }),
                    }
                }
            }
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReifyError {
    NotBound(Ident),
    Trace(TraceError),
}

impl fmt::Display for ReifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReifyError::NotBound(x) => write!(f, "`{x}` is not bound in the store"),
            ReifyError::Trace(e) => write!(f, "{e}"),
        }
    }
}

fn reify_dispatch(d: &Dispatch, numbers: &BTreeMap<Ident, i64>) -> Result<Expr, ReifyError> {
    let mut clauses = Vec::with_capacity(d.clauses.len());
    for clause in &d.clauses {
        let test = match &clause.test {
            ClauseTest::IsProc => Expr::Prim {
                op: PrimOp::IsProcedure,
                args: alloc::vec![Expr::Var(d.scrutinee.clone())],
            },
            ClauseTest::EqTrace(t) => {
                let v = trace_eval(t, numbers).map_err(ReifyError::Trace)?;
                Expr::Prim {
                    op: PrimOp::NumEq,
                    args: alloc::vec![Expr::Var(d.scrutinee.clone()), Expr::Int(v)],
                }
            }
        };
        let body = reify_body(&clause.body, numbers)?;
        clauses.push((test, body));
    }
    Ok(Expr::Cond { clauses, else_body: Box::new(Expr::Int(0)) })
}

fn reify_body(b: &BranchBody, numbers: &BTreeMap<Ident, i64>) -> Result<Expr, ReifyError> {
    match b {
        BranchBody::Var(x) => Ok(Expr::Var(x.clone())),
        BranchBody::ConcVar(x) => {
            let v = numbers.get(x).ok_or_else(|| ReifyError::NotBound(x.clone()))?;
            Ok(Expr::Int(*v))
        }
        BranchBody::Fn(inner) => Ok(reify_fn_expr(inner, numbers)?),
        BranchBody::LetCall { callee, arg, result, then } => {
            let arg_expr = match arg {
                CallArg::Var(x) => Expr::Var(x.clone()),
                CallArg::ConcVar(x) => {
                    let v = numbers.get(x).ok_or_else(|| ReifyError::NotBound(x.clone()))?;
                    Expr::Int(*v)
                }
            };
            Ok(Expr::Let {
                name: result.clone(),
                rhs: Box::new(Expr::App {
                    func: Box::new(Expr::Var(callee.clone())),
                    arg: Box::new(arg_expr),
                }),
                body: Box::new(reify_dispatch(then, numbers)?),
            })
        }
    }
}

fn reify_fn_expr(f: &CanonicalFn, numbers: &BTreeMap<Ident, i64>) -> Result<Expr, ReifyError> {
    Ok(Expr::Lambda { param: f.param.clone(), body: Box::new(reify_dispatch(&f.body, numbers)?) })
}

/// Turn a store binding into a plain user-language value: numbers stay
/// numbers, canonical functions expand into nested cond/let terms with every
/// trace evaluated down to an integer literal.
pub fn reify(store: &Store, name: &str) -> Result<UserValue, ReifyError> {
    match store.get(name) {
        None => Err(ReifyError::NotBound(name.to_string())),
        Some(Binding::Number(n)) => Ok(UserValue::Num(n)),
        Some(Binding::Function(f)) => {
            let body = reify_dispatch(&f.body, &store.numbers)?;
            Ok(UserValue::closure(f.param.clone(), body, crate::interp::Env::empty()))
        }
    }
}

/// Reify every name in `names` (typically a program's declared inputs).
pub fn reify_all(
    store: &Store,
    names: impl IntoIterator<Item = Ident>,
) -> Result<BTreeMap<Ident, UserValue>, ReifyError> {
    let mut out = BTreeMap::new();
    for name in names {
        let v = reify(store, &name)?;
        out.insert(name, v);
    }
    Ok(out)
}

/// One step on the path from a canonical function's root dispatch to a
/// nested dispatch: enter clause `i`'s body, which is either a nested
/// function or a let-call continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddrStep {
    IntoFn(usize),
    IntoLet(usize),
}

/// Address of a dispatch inside a store, usable for in-place rewriting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchLoc {
    pub input: Ident,
    pub steps: Vec<AddrStep>,
}

/// Find the dispatch whose else branch or clause carries `label`.
pub fn find_dispatch(store: &Store, label: Label) -> Option<(DispatchLoc, &Dispatch)> {
    fn walk<'a>(
        d: &'a Dispatch,
        label: Label,
        steps: &mut Vec<AddrStep>,
    ) -> Option<(Vec<AddrStep>, &'a Dispatch)> {
        if d.else_label == label || d.clauses.iter().any(|c| c.label == label) {
            return Some((steps.clone(), d));
        }
        for (i, clause) in d.clauses.iter().enumerate() {
            match &clause.body {
                BranchBody::Fn(inner) => {
                    steps.push(AddrStep::IntoFn(i));
                    if let Some(hit) = walk(&inner.body, label, steps) {
                        return Some(hit);
                    }
                    steps.pop();
                }
                BranchBody::LetCall { then, .. } => {
                    steps.push(AddrStep::IntoLet(i));
                    if let Some(hit) = walk(then, label, steps) {
                        return Some(hit);
                    }
                    steps.pop();
                }
                BranchBody::Var(_) | BranchBody::ConcVar(_) => {}
            }
        }
        None
    }
    for (input, f) in &store.functions {
        let mut steps = Vec::new();
        if let Some((steps, d)) = walk(&f.body, label, &mut steps) {
            return Some((DispatchLoc { input: input.clone(), steps }, d));
        }
    }
    None
}

pub fn dispatch_at<'a>(store: &'a Store, loc: &DispatchLoc) -> Option<&'a Dispatch> {
    let mut d = &store.functions.get(&loc.input)?.body;
    for step in &loc.steps {
        d = match step {
            AddrStep::IntoFn(i) => match &d.clauses.get(*i)?.body {
                BranchBody::Fn(inner) => &inner.body,
                _ => return None,
            },
            AddrStep::IntoLet(i) => match &d.clauses.get(*i)?.body {
                BranchBody::LetCall { then, .. } => then,
                _ => return None,
            },
        };
    }
    Some(d)
}

/// A copy of `store` where the dispatch at `loc` is replaced by
/// `rewrite(old)`. Panics if the address is stale; addresses are only used
/// on the store they were computed from.
pub fn with_dispatch_rewritten(
    store: &Store,
    loc: &DispatchLoc,
    rewrite: impl FnOnce(&Dispatch) -> Dispatch,
) -> Store {
    fn go(d: &Dispatch, steps: &[AddrStep], rewrite: impl FnOnce(&Dispatch) -> Dispatch) -> Dispatch {
        match steps.first() {
            None => rewrite(d),
            Some(step) => {
                let mut out = d.clone();
                let i = match step {
                    AddrStep::IntoFn(i) | AddrStep::IntoLet(i) => *i,
                };
                match (&mut out.clauses[i].body, step) {
                    (BranchBody::Fn(inner), AddrStep::IntoFn(_)) => {
                        inner.body = go(&inner.body, &steps[1..], rewrite);
                    }
                    (BranchBody::LetCall { then, .. }, AddrStep::IntoLet(_)) => {
                        **then = go(then, &steps[1..], rewrite);
                    }
                    _ => panic!("stale dispatch address"),
                }
                out
            }
        }
    }
    let mut out = store.clone();
    let f = out.functions.get_mut(&loc.input).expect("stale dispatch address");
    f.body = go(&f.body, &loc.steps, rewrite);
    out
}

/// Variables in scope at (clause bodies of) the dispatch at `loc`, outermost
/// first, and the subset known to be functions because an enclosing clause
/// tested them with `procedure?`.
pub fn scope_at(store: &Store, loc: &DispatchLoc) -> (Vec<Ident>, Vec<Ident>) {
    let f = store.functions.get(&loc.input).expect("stale dispatch address");
    let mut vars = alloc::vec![f.param.clone()];
    let mut procs = Vec::new();
    let mut d = &f.body;
    for step in &loc.steps {
        let i = match step {
            AddrStep::IntoFn(i) | AddrStep::IntoLet(i) => *i,
        };
        let clause = &d.clauses[i];
        if matches!(clause.test, ClauseTest::IsProc) && !procs.contains(&d.scrutinee) {
            procs.push(d.scrutinee.clone());
        }
        match (&clause.body, step) {
            (BranchBody::Fn(inner), AddrStep::IntoFn(_)) => {
                vars.push(inner.param.clone());
                d = &inner.body;
            }
            (BranchBody::LetCall { result, then, .. }, AddrStep::IntoLet(_)) => {
                vars.push(result.clone());
                d = then;
            }
            _ => panic!("stale dispatch address"),
        }
    }
    (vars, procs)
}

/// Nesting depth of dispatches under `d` (a dispatch with no nested bodies
/// has depth 1).
pub fn dispatch_depth(d: &Dispatch) -> usize {
    1 + d
        .clauses
        .iter()
        .map(|c| match &c.body {
            BranchBody::Fn(inner) => dispatch_depth(&inner.body),
            BranchBody::LetCall { then, .. } => dispatch_depth(then),
            BranchBody::Var(_) | BranchBody::ConcVar(_) => 0,
        })
        .max()
        .unwrap_or(0)
}

/// Depth of the dispatch at `loc` counted from the function root (root = 1).
pub fn depth_of_loc(loc: &DispatchLoc) -> usize {
    1 + loc.steps.len()
}

struct Canonicalizer {
    labels: BTreeMap<Label, usize>,
    vars: BTreeMap<Ident, usize>,
}

impl Canonicalizer {
    fn label(&mut self, l: Label) -> usize {
        let next = self.labels.len();
        *self.labels.entry(l).or_insert(next)
    }

    fn var(&mut self, v: &Ident) -> usize {
        let next = self.vars.len();
        *self.vars.entry(v.clone()).or_insert(next)
    }

    fn trace(&mut self, t: &Trace, numbers: &BTreeMap<Ident, i64>, out: &mut String) {
        match t {
            Trace::Var(x) => {
                let id = self.var(x);
                let val = numbers.get(x).copied().unwrap_or(0);
                out.push_str(&format!("$({id}={val})"));
            }
            Trace::Lit(n) => out.push_str(&n.to_string()),
            Trace::Neg(inner) => {
                out.push_str("(not ");
                self.trace(inner, numbers, out);
                out.push(')');
            }
            Trace::Op { op, lhs, rhs } => {
                out.push('(');
                out.push_str(op.symbol());
                out.push(' ');
                self.trace(lhs, numbers, out);
                out.push(' ');
                self.trace(rhs, numbers, out);
                out.push(')');
            }
        }
    }

    fn dispatch(&mut self, d: &Dispatch, numbers: &BTreeMap<Ident, i64>, out: &mut String) {
        out.push_str(&format!("(cond#{}", self.label(d.else_label)));
        for clause in &d.clauses {
            out.push_str(&format!(" [#{} ", self.label(clause.label)));
            match &clause.test {
                ClauseTest::IsProc => out.push_str("proc?"),
                ClauseTest::EqTrace(t) => {
                    out.push_str("= ");
                    self.trace(t, numbers, out);
                }
            }
            out.push_str(" -> ");
            self.body(&clause.body, numbers, out);
            out.push(']');
        }
        out.push(')');
    }

    fn body(&mut self, b: &BranchBody, numbers: &BTreeMap<Ident, i64>, out: &mut String) {
        match b {
            BranchBody::Var(x) => out.push_str(&format!("v{}", self.var(x))),
            BranchBody::ConcVar(x) => {
                let id = self.var(x);
                let val = numbers.get(x).copied().unwrap_or(0);
                out.push_str(&format!("$({id}={val})"));
            }
            BranchBody::Fn(f) => {
                out.push_str(&format!("(lambda v{} ", self.var(&f.param)));
                self.dispatch(&f.body, numbers, out);
                out.push(')');
            }
            BranchBody::LetCall { callee, arg, result, then } => {
                out.push_str(&format!("(let v{} = (v{} ", self.var(result), self.var(callee)));
                match arg {
                    CallArg::Var(x) => out.push_str(&format!("v{}", self.var(x))),
                    CallArg::ConcVar(x) => {
                        let id = self.var(x);
                        let val = numbers.get(x).copied().unwrap_or(0);
                        out.push_str(&format!("$({id}={val})"));
                    }
                }
                out.push_str(") ");
                self.dispatch(then, numbers, out);
                out.push(')');
            }
        }
    }
}

/// A canonical structural print of the store, with labels and internal
/// variable names renumbered in traversal order. Two stores that differ only
/// in fresh-name or label choices print identically; stores that behave
/// differently (different structure, values, or trace shapes) do not. Used
/// as the search's dedup fingerprint.
pub fn fingerprint(store: &Store, declared: &[(Ident, crate::lang::InputSort)]) -> String {
    let mut c = Canonicalizer { labels: BTreeMap::new(), vars: BTreeMap::new() };
    let mut out = String::new();
    for (name, _) in declared {
        out.push_str(name);
        out.push('=');
        match store.get(name) {
            Some(Binding::Number(n)) => out.push_str(&n.to_string()),
            Some(Binding::Function(f)) => {
                out.push_str(&format!("(lambda v{} ", c.var(&f.param)));
                c.dispatch(&f.body, &store.numbers, &mut out);
                out.push(')');
            }
            None => out.push('?'),
        }
        out.push(';');
    }
    out
}

/// Human-readable store print used in reports: each input in user-language
/// syntax via reification.
pub fn print_store(store: &Store, declared: &[(Ident, crate::lang::InputSort)]) -> String {
    let mut out = String::new();
    for (name, _) in declared {
        if !out.is_empty() {
            out.push('\n');
        }
        match reify(store, name) {
            Ok(v) => out.push_str(&format!("{name} = {}", v.print())),
            Err(e) => out.push_str(&format!("{name} = <unreifiable: {e}>")),
        }
    }
    out
}
