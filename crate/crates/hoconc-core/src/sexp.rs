//! A small s-expression reader shared by the program parser, the SMT model
//! parser, and the bundled solver.
//!
//! Atoms are symbols, 64-bit integers, or double-quoted strings; `;` starts a
//! line comment. Every node carries the line/column where it started.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SexpKind {
    Sym(String),
    Int(i64),
    Str(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sexp {
    pub kind: SexpKind,
    pub pos: Pos,
}

impl Sexp {
    pub fn as_sym(&self) -> Option<&str> {
        match &self.kind {
            SexpKind::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match &self.kind {
            SexpKind::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match &self.kind {
            SexpKind::List(items) => Some(items),
            _ => None,
        }
    }

    /// True for a list whose head is the symbol `head`.
    pub fn is_form(&self, head: &str) -> bool {
        matches!(self.as_list().and_then(|l| l.first()), Some(h) if h.as_sym() == Some(head))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SexpError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for SexpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

struct Reader<'a> {
    src: &'a [u8],
    at: usize,
    line: u32,
    col: u32,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader { src: src.as_bytes(), at: 0, line: 1, col: 1 }
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.at).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.at += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn skip_trivia(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.bump();
            } else if b == b';' {
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                return;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, SexpError> {
        self.skip_trivia();
        let pos = self.pos();
        match self.peek() {
            None => Err(SexpError { pos, message: String::from("unexpected end of input") }),
            Some(b'(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        Some(b')') => {
                            self.bump();
                            return Ok(Sexp { kind: SexpKind::List(items), pos });
                        }
                        None => {
                            return Err(SexpError {
                                pos,
                                message: String::from("unclosed parenthesis"),
                            })
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(b')') => Err(SexpError { pos, message: String::from("unexpected `)`") }),
            Some(b'"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => {
                            return Err(SexpError {
                                pos,
                                message: String::from("unterminated string"),
                            })
                        }
                        Some(b'"') => break,
                        Some(b'\\') => match self.bump() {
                            Some(c) => s.push(c as char),
                            None => {
                                return Err(SexpError {
                                    pos,
                                    message: String::from("unterminated string escape"),
                                })
                            }
                        },
                        Some(c) => s.push(c as char),
                    }
                }
                Ok(Sexp { kind: SexpKind::Str(s), pos })
            }
            Some(_) => {
                let mut atom = String::new();
                while let Some(b) = self.peek() {
                    if b.is_ascii_whitespace() || b == b'(' || b == b')' || b == b';' || b == b'"' {
                        break;
                    }
                    atom.push(b as char);
                    self.bump();
                }
                let kind = match parse_int_atom(&atom) {
                    Some(n) => SexpKind::Int(n),
                    None => SexpKind::Sym(atom),
                };
                Ok(Sexp { kind, pos })
            }
        }
    }
}

fn parse_int_atom(atom: &str) -> Option<i64> {
    let digits = atom.strip_prefix('-').unwrap_or(atom);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    atom.parse::<i64>().ok()
}

/// Read every s-expression in `src`.
pub fn parse_all(src: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut reader = Reader::new(src);
    let mut out = Vec::new();
    loop {
        reader.skip_trivia();
        if reader.peek().is_none() {
            return Ok(out);
        }
        out.push(reader.read()?);
    }
}
