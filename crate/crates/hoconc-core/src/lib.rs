//! Core engine for concolic testing of higher-order functional programs.
//!
//! The pieces fit together as a loop: a program with declared inputs is
//! evaluated by the concolic machine under a [`canonical::Store`] that maps
//! every input to an integer or a canonical function. The run produces a
//! [`path::Path`] of constraints describing the control-flow decisions taken.
//! [`evolve::enumerate_mutations`] turns a finished run into candidate next
//! inputs — negated branches, grown canonical functions, retargeted clauses —
//! some of which carry an SMT query built by [`smt::encode`]. A search driver
//! (in the companion crate) solves the queries, applies the models, and keeps
//! going until a run hits `(error)`, which is then replay-verified with the
//! plain [`interp`] evaluator.
//!
//! This crate is `no_std` (with `alloc`) and does no IO; process management,
//! file formats, and the CLI live in the `hoconc` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod canonical;
pub mod evolve;
pub mod gen;
pub mod interp;
pub mod lang;
pub mod machine;
pub mod path;
pub mod sexp;
pub mod smt;
pub mod trace;

pub use lang::{parse_program, print_expr, print_program, Expr, PrimOp, Program};
pub use path::{paths_equivalent, verify_prediction, Path, PathConstraint};
