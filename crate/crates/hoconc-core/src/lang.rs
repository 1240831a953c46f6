//! The user language: abstract syntax, textual parser, printer, and scope
//! utilities.
//!
//! Programs are written as two s-expression forms:
//!
//! ```text
//! (inputs (x number) (f function) ...)
//! (main <expr>)
//! ```
//!
//! `(if a b c)` is surface sugar for a one-clause `cond`. Input names are the
//! program's concolic variables; binders may not shadow them, so an
//! identifier's role (input vs. local) is fixed at parse time.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::sexp::{self, Pos, Sexp, SexpKind};

pub type Ident = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
    NumEq,
    Le,
    Lt,
    Not,
    IsProcedure,
    IsInteger,
}

impl PrimOp {
    pub fn arity(self) -> usize {
        match self {
            PrimOp::Not | PrimOp::IsProcedure | PrimOp::IsInteger => 1,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PrimOp::Add => "+",
            PrimOp::Sub => "-",
            PrimOp::Mul => "*",
            PrimOp::NumEq => "=",
            PrimOp::Le => "<=",
            PrimOp::Lt => "<",
            PrimOp::Not => "not",
            PrimOp::IsProcedure => "procedure?",
            PrimOp::IsInteger => "integer?",
        }
    }

    pub fn from_symbol(sym: &str) -> Option<PrimOp> {
        Some(match sym {
            "+" => PrimOp::Add,
            "-" => PrimOp::Sub,
            "*" => PrimOp::Mul,
            "=" => PrimOp::NumEq,
            "<=" => PrimOp::Le,
            "<" => PrimOp::Lt,
            "not" => PrimOp::Not,
            "procedure?" => PrimOp::IsProcedure,
            "integer?" => PrimOp::IsInteger,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    /// A lexically bound variable (lambda parameter or let binding).
    Var(Ident),
    /// A free occurrence of a declared program input (a concolic variable).
    Input(Ident),
    Lambda { param: Ident, body: Box<Expr> },
    App { func: Box<Expr>, arg: Box<Expr> },
    Let { name: Ident, rhs: Box<Expr>, body: Box<Expr> },
    Cond { clauses: Vec<(Expr, Expr)>, else_body: Box<Expr> },
    Prim { op: PrimOp, args: Vec<Expr> },
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSort {
    Number,
    Function,
}

impl fmt::Display for InputSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSort::Number => write!(f, "number"),
            InputSort::Function => write!(f, "function"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub inputs: Vec<(Ident, InputSort)>,
    pub main: Expr,
}

impl Program {
    pub fn input_sort(&self, name: &str) -> Option<InputSort> {
        self.inputs.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}: {}", self.pos, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for ScopeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scope error at {}: {}", self.pos, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramError {
    Parse(ParseError),
    Scope(ScopeError),
}

impl fmt::Display for ProgramError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProgramError::Parse(e) => e.fmt(f),
            ProgramError::Scope(e) => e.fmt(f),
        }
    }
}

impl From<ParseError> for ProgramError {
    fn from(e: ParseError) -> Self {
        ProgramError::Parse(e)
    }
}

impl From<ScopeError> for ProgramError {
    fn from(e: ScopeError) -> Self {
        ProgramError::Scope(e)
    }
}

const KEYWORDS: &[&str] =
    &["lambda", "let", "cond", "else", "if", "error", "inputs", "main", "number", "function"];

fn is_valid_ident(name: &str) -> bool {
    if name.is_empty() || KEYWORDS.contains(&name) || PrimOp::from_symbol(name).is_some() {
        return false;
    }
    let mut bytes = name.bytes();
    let first = bytes.next().unwrap();
    if first.is_ascii_digit() || first == b'$' || first == b'-' {
        return false;
    }
    name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'?' | b'!'))
}

struct ProgramParser {
    inputs: Vec<(Ident, InputSort)>,
}

impl ProgramParser {
    fn err(pos: Pos, message: impl Into<String>) -> ProgramError {
        ProgramError::Parse(ParseError { pos, message: message.into() })
    }

    fn scope_err(pos: Pos, message: impl Into<String>) -> ProgramError {
        ProgramError::Scope(ScopeError { pos, message: message.into() })
    }

    fn ident(form: &Sexp) -> Result<Ident, ProgramError> {
        match form.as_sym() {
            Some(s) if is_valid_ident(s) => Ok(s.to_string()),
            Some(s) => Err(Self::err(form.pos, format!("`{s}` is not a valid identifier"))),
            None => Err(Self::err(form.pos, "expected an identifier")),
        }
    }

    fn parse_inputs(&mut self, form: &Sexp) -> Result<(), ProgramError> {
        let items = form
            .as_list()
            .filter(|_| form.is_form("inputs"))
            .ok_or_else(|| Self::err(form.pos, "expected `(inputs (name number|function) ...)`"))?;
        for decl in &items[1..] {
            let parts = decl
                .as_list()
                .ok_or_else(|| Self::err(decl.pos, "expected `(name number|function)`"))?;
            if parts.len() != 2 {
                return Err(Self::err(decl.pos, "expected `(name number|function)`"));
            }
            let name = Self::ident(&parts[0])?;
            let sort = match parts[1].as_sym() {
                Some("number") => InputSort::Number,
                Some("function") => InputSort::Function,
                _ => return Err(Self::err(parts[1].pos, "input sort must be `number` or `function`")),
            };
            if self.inputs.iter().any(|(n, _)| *n == name) {
                return Err(Self::scope_err(parts[0].pos, format!("duplicate input `{name}`")));
            }
            self.inputs.push((name, sort));
        }
        Ok(())
    }

    fn binder(&self, form: &Sexp) -> Result<Ident, ProgramError> {
        let name = Self::ident(form)?;
        if self.inputs.iter().any(|(n, _)| *n == name) {
            return Err(Self::scope_err(form.pos, format!("binder `{name}` shadows an input")));
        }
        Ok(name)
    }

    fn parse_expr(&self, form: &Sexp, bound: &mut Vec<Ident>) -> Result<Expr, ProgramError> {
        match &form.kind {
            SexpKind::Int(n) => Ok(Expr::Int(*n)),
            SexpKind::Str(_) => Err(Self::err(form.pos, "strings are not part of the language")),
            SexpKind::Sym(name) => {
                if bound.iter().any(|b| b == name) {
                    Ok(Expr::Var(name.clone()))
                } else if self.inputs.iter().any(|(n, _)| n == name) {
                    Ok(Expr::Input(name.clone()))
                } else {
                    Err(Self::scope_err(form.pos, format!("unbound variable `{name}`")))
                }
            }
            SexpKind::List(items) => self.parse_list(form.pos, items, bound),
        }
    }

    fn parse_list(
        &self,
        pos: Pos,
        items: &[Sexp],
        bound: &mut Vec<Ident>,
    ) -> Result<Expr, ProgramError> {
        let head = match items.first() {
            None => return Err(Self::err(pos, "empty application")),
            Some(h) => h,
        };
        match head.as_sym() {
            Some("lambda") => {
                if items.len() != 3 {
                    return Err(Self::err(pos, "expected `(lambda (x) body)`"));
                }
                let params = items[1]
                    .as_list()
                    .ok_or_else(|| Self::err(items[1].pos, "expected a parameter list"))?;
                if params.len() != 1 {
                    return Err(Self::err(items[1].pos, "lambda takes exactly one parameter"));
                }
                let param = self.binder(&params[0])?;
                bound.push(param.clone());
                let body = self.parse_expr(&items[2], bound)?;
                bound.pop();
                Ok(Expr::Lambda { param, body: Box::new(body) })
            }
            Some("let") => {
                if items.len() != 3 {
                    return Err(Self::err(pos, "expected `(let ((x e)) body)`"));
                }
                let binds = items[1]
                    .as_list()
                    .ok_or_else(|| Self::err(items[1].pos, "expected `((x e))`"))?;
                if binds.len() != 1 {
                    return Err(Self::err(items[1].pos, "let takes exactly one binding"));
                }
                let pair = binds[0]
                    .as_list()
                    .ok_or_else(|| Self::err(binds[0].pos, "expected `(x e)`"))?;
                if pair.len() != 2 {
                    return Err(Self::err(binds[0].pos, "expected `(x e)`"));
                }
                let name = self.binder(&pair[0])?;
                let rhs = self.parse_expr(&pair[1], bound)?;
                bound.push(name.clone());
                let body = self.parse_expr(&items[2], bound)?;
                bound.pop();
                Ok(Expr::Let { name, rhs: Box::new(rhs), body: Box::new(body) })
            }
            Some("cond") => {
                let mut clauses = Vec::new();
                let mut else_body = None;
                for (i, clause) in items[1..].iter().enumerate() {
                    let parts = clause
                        .as_list()
                        .ok_or_else(|| Self::err(clause.pos, "expected `(test body)`"))?;
                    if parts.len() != 2 {
                        return Err(Self::err(clause.pos, "expected `(test body)`"));
                    }
                    if parts[0].as_sym() == Some("else") {
                        if i + 2 != items.len() {
                            return Err(Self::err(clause.pos, "`else` must be the last clause"));
                        }
                        else_body = Some(self.parse_expr(&parts[1], bound)?);
                    } else {
                        let test = self.parse_expr(&parts[0], bound)?;
                        let body = self.parse_expr(&parts[1], bound)?;
                        clauses.push((test, body));
                    }
                }
                match else_body {
                    Some(e) => Ok(Expr::Cond { clauses, else_body: Box::new(e) }),
                    None => Err(Self::err(pos, "cond requires a final `(else body)` clause")),
                }
            }
            Some("if") => {
                if items.len() != 4 {
                    return Err(Self::err(pos, "expected `(if test then else)`"));
                }
                let test = self.parse_expr(&items[1], bound)?;
                let then = self.parse_expr(&items[2], bound)?;
                let els = self.parse_expr(&items[3], bound)?;
                Ok(Expr::Cond { clauses: alloc::vec![(test, then)], else_body: Box::new(els) })
            }
            Some("error") => {
                if items.len() != 1 {
                    return Err(Self::err(pos, "expected `(error)`"));
                }
                Ok(Expr::Error)
            }
            Some(sym) if PrimOp::from_symbol(sym).is_some() => {
                let op = PrimOp::from_symbol(sym).unwrap();
                if items.len() - 1 != op.arity() {
                    return Err(Self::err(
                        pos,
                        format!("`{sym}` takes {} argument(s), got {}", op.arity(), items.len() - 1),
                    ));
                }
                let args = items[1..]
                    .iter()
                    .map(|a| self.parse_expr(a, bound))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Expr::Prim { op, args })
            }
            _ => {
                if items.len() != 2 {
                    return Err(Self::err(pos, "application takes exactly one operand"));
                }
                let func = self.parse_expr(&items[0], bound)?;
                let arg = self.parse_expr(&items[1], bound)?;
                Ok(Expr::App { func: Box::new(func), arg: Box::new(arg) })
            }
        }
    }
}

/// Parse a program from its textual form.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let forms = sexp::parse_all(text)
        .map_err(|e| ProgramError::Parse(ParseError { pos: e.pos, message: e.message }))?;
    if forms.len() != 2 || !forms[0].is_form("inputs") || !forms[1].is_form("main") {
        let pos = forms.first().map(|f| f.pos).unwrap_or(Pos { line: 1, col: 1 });
        return Err(ProgramParser::err(pos, "expected `(inputs ...)` followed by `(main <expr>)`"));
    }
    let mut parser = ProgramParser { inputs: Vec::new() };
    parser.parse_inputs(&forms[0])?;
    let main_items = forms[1].as_list().unwrap();
    if main_items.len() != 2 {
        return Err(ProgramParser::err(forms[1].pos, "expected `(main <expr>)`"));
    }
    let mut bound = Vec::new();
    let main = parser.parse_expr(&main_items[1], &mut bound)?;
    Ok(Program { inputs: parser.inputs, main })
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(n) => out.push_str(&n.to_string()),
        Expr::Var(x) | Expr::Input(x) => out.push_str(x),
        Expr::Lambda { param, body } => {
            out.push_str("(lambda (");
            out.push_str(param);
            out.push_str(") ");
            write_expr(out, body);
            out.push(')');
        }
        Expr::App { func, arg } => {
            out.push('(');
            write_expr(out, func);
            out.push(' ');
            write_expr(out, arg);
            out.push(')');
        }
        Expr::Let { name, rhs, body } => {
            out.push_str("(let ((");
            out.push_str(name);
            out.push(' ');
            write_expr(out, rhs);
            out.push_str(")) ");
            write_expr(out, body);
            out.push(')');
        }
        Expr::Cond { clauses, else_body } => {
            out.push_str("(cond");
            for (test, body) in clauses {
                out.push_str(" (");
                write_expr(out, test);
                out.push(' ');
                write_expr(out, body);
                out.push(')');
            }
            out.push_str(" (else ");
            write_expr(out, else_body);
            out.push_str("))");
        }
        Expr::Prim { op, args } => {
            out.push('(');
            out.push_str(op.symbol());
            for a in args {
                out.push(' ');
                write_expr(out, a);
            }
            out.push(')');
        }
        Expr::Error => out.push_str("(error)"),
    }
}

/// Print an expression in the surface syntax. `print_expr` and
/// [`parse_program`] round-trip: re-parsing a printed program yields a
/// structurally equal tree.
pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::from("(inputs");
    for (name, sort) in &p.inputs {
        out.push_str(&format!(" ({name} {sort})"));
    }
    out.push_str(")\n(main ");
    write_expr(&mut out, &p.main);
    out.push(')');
    out
}

/// The input (concolic-variable) names occurring in `e`.
pub fn free_inputs(e: &Expr) -> BTreeSet<Ident> {
    fn walk(e: &Expr, acc: &mut BTreeSet<Ident>) {
        match e {
            Expr::Input(x) => {
                acc.insert(x.clone());
            }
            Expr::Int(_) | Expr::Var(_) | Expr::Error => {}
            Expr::Lambda { body, .. } => walk(body, acc),
            Expr::App { func, arg } => {
                walk(func, acc);
                walk(arg, acc);
            }
            Expr::Let { rhs, body, .. } => {
                walk(rhs, acc);
                walk(body, acc);
            }
            Expr::Cond { clauses, else_body } => {
                for (t, b) in clauses {
                    walk(t, acc);
                    walk(b, acc);
                }
                walk(else_body, acc);
            }
            Expr::Prim { args, .. } => {
                for a in args {
                    walk(a, acc);
                }
            }
        }
    }
    let mut acc = BTreeSet::new();
    walk(e, &mut acc);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_input_identity() {
        let p = parse_program("(inputs (x number)) (main x)").unwrap();
        assert_eq!(p.inputs, vec![("x".to_string(), InputSort::Number)]);
        assert_eq!(p.main, Expr::Input("x".into()));
    }

    #[test]
    fn closed_beta_redex() {
        let p = parse_program("(inputs) (main ((lambda (y) y) 4))").unwrap();
        assert_eq!(
            p.main,
            Expr::App {
                func: Box::new(Expr::Lambda {
                    param: "y".into(),
                    body: Box::new(Expr::Var("y".into()))
                }),
                arg: Box::new(Expr::Int(4)),
            }
        );
    }

    #[test]
    fn function_input_cond_reprints_identically() {
        let src = "(inputs (f function)) (main (cond ((= (f 0) 1) (error)) (else 0)))";
        let p = parse_program(src).unwrap();
        match &p.main {
            Expr::Cond { clauses, .. } => {
                assert_eq!(clauses.len(), 1);
                match &clauses[0].0 {
                    Expr::Prim { op: PrimOp::NumEq, args } => {
                        assert!(matches!(&args[0], Expr::App { .. }));
                        assert_eq!(args[1], Expr::Int(1));
                    }
                    other => panic!("unexpected test: {other:?}"),
                }
            }
            other => panic!("expected cond, got {other:?}"),
        }
        let reparsed = parse_program(&print_program(&p)).unwrap();
        assert_eq!(reparsed, p);
    }

    #[test]
    fn if_desugars_to_one_clause_cond() {
        let a = parse_program("(inputs (a number)) (main (if a 1 2))").unwrap();
        let b = parse_program("(inputs (a number)) (main (cond (a 1) (else 2)))").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn print_basics() {
        assert_eq!(print_expr(&Expr::Int(0)), "0");
        let id = Expr::Lambda { param: "x".into(), body: Box::new(Expr::Var("x".into())) };
        assert_eq!(print_expr(&id), "(lambda (x) x)");
    }

    #[test]
    fn shadowing_an_input_is_rejected() {
        let err = parse_program("(inputs (x number)) (main (lambda (x) x))").unwrap_err();
        assert!(matches!(err, ProgramError::Scope(_)), "{err}");
        let err = parse_program("(inputs (x number)) (main (let ((x 1)) x))").unwrap_err();
        assert!(matches!(err, ProgramError::Scope(_)), "{err}");
    }

    #[test]
    fn unbound_variable_is_a_scope_error() {
        let err = parse_program("(inputs) (main y)").unwrap_err();
        match err {
            ProgramError::Scope(e) => assert!(e.message.contains("unbound"), "{e}"),
            other => panic!("expected scope error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_inputs_rejected() {
        assert!(parse_program("(inputs (x number) (x function)) (main x)").is_err());
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_program("(inputs)\n(main (lambda x x))").unwrap_err();
        match err {
            ProgramError::Parse(e) => assert_eq!(e.pos.line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_prim_arity_rejected() {
        assert!(parse_program("(inputs (x number)) (main (+ x))").is_err());
        assert!(parse_program("(inputs (x number)) (main (not x x))").is_err());
    }

    #[test]
    fn free_inputs_cases() {
        let closed = parse_program("(inputs) (main ((lambda (y) y) 4))").unwrap();
        assert!(free_inputs(&closed.main).is_empty());
        let p = parse_program("(inputs (x number)) (main x)").unwrap();
        assert_eq!(free_inputs(&p.main).into_iter().collect::<Vec<_>>(), vec!["x".to_string()]);
        let ho = parse_program(
            "(inputs (f function)) (main (cond ((= (+ (f (lambda (x) (+ x 1))) (f (lambda (x) (* x 2)))) 10) (f (lambda (x) (error)))) (else 0)))",
        )
        .unwrap();
        assert_eq!(free_inputs(&ho.main).into_iter().collect::<Vec<_>>(), vec!["f".to_string()]);
    }

    #[test]
    fn dollar_names_are_reserved() {
        assert!(parse_program("(inputs ($k0 number)) (main $k0)").is_err());
    }
}
