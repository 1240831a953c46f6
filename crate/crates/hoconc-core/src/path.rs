//! Path constraints: the log of control-flow decisions one concolic run
//! takes, and the equivalence notion used to check predicted paths.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::canonical::Label;
use crate::trace::{Trace, TracedValue};

/// What a canonical conditional inspected: a traced number or a function.
#[derive(Debug, Clone, PartialEq)]
pub enum Inspected {
    Number(TracedValue),
    FunctionValue,
}

impl fmt::Display for Inspected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inspected::Number(tv) => write!(f, "{tv}"),
            Inspected::FunctionValue => write!(f, "<function>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathConstraint {
    /// A user-program conditional test: its boolean outcome and the trace of
    /// the tested value.
    FirstOrder { outcome: bool, trace: Trace },
    /// A canonical conditional (identified by its else label) started
    /// inspecting a value.
    Test { label: Label, inspected: Inspected },
    /// One clause test of a canonical conditional: whether it succeeded and
    /// the trace of the test result. Taking the else branch logs outcome 1
    /// with trace 1 under the else label.
    Branch { label: Label, outcome: bool, trace: Trace },
}

impl PathConstraint {
    pub fn first_order(outcome: bool, trace: Trace) -> Self {
        PathConstraint::FirstOrder { outcome, trace }
    }

    pub fn counts_for_equivalence(&self) -> bool {
        !matches!(self, PathConstraint::Test { .. })
    }
}

impl fmt::Display for PathConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathConstraint::FirstOrder { outcome, trace } => {
                write!(f, "(first-order {} {trace})", *outcome as u8)
            }
            PathConstraint::Test { label, inspected } => {
                write!(f, "(test {label} {inspected})")
            }
            PathConstraint::Branch { label, outcome, trace } => {
                write!(f, "(branch {label} {} {trace})", *outcome as u8)
            }
        }
    }
}

/// The ordered list of path constraints from one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Path(pub Vec<PathConstraint>);

impl Path {
    pub fn new() -> Path {
        Path(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, len: usize) -> Path {
        Path(self.0[..len].to_vec())
    }

    pub fn print(&self) -> String {
        let mut out = String::from("[");
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("{c}"));
        }
        out.push(']');
        out
    }
}

/// A contiguous `Test` + `Branch`* group logged by one execution of a
/// canonical conditional, as seen in a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Index of the `Test` constraint in the path.
    pub test_index: usize,
    pub label: Label,
    pub inspected: Inspected,
    /// (index, label, outcome, trace) of each branch constraint.
    pub branches: Vec<(usize, Label, bool, Trace)>,
    /// True when the block ends with a succeeding branch.
    pub closed: bool,
}

impl Block {
    /// Whether the block took the else branch (its final succeeding branch
    /// constraint reuses the test's label).
    pub fn took_else(&self) -> bool {
        self.closed
            && self
                .branches
                .last()
                .map(|(_, l, o, _)| *l == self.label && *o)
                .unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathShapeError {
    BranchOutsideBlock { index: usize },
    InterruptedBlock { index: usize },
    UnclosedBlock { test_index: usize },
}

impl fmt::Display for PathShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathShapeError::BranchOutsideBlock { index } => {
                write!(f, "branch constraint at {index} outside any test block")
            }
            PathShapeError::InterruptedBlock { index } => {
                write!(f, "constraint at {index} interrupts an open test block")
            }
            PathShapeError::UnclosedBlock { test_index } => {
                write!(f, "block opened at {test_index} never takes a branch")
            }
        }
    }
}

/// Scan a path into blocks, checking the block-shape invariant: every
/// execution of a canonical conditional contributes one contiguous group of
/// one `Test`, zero or more failing `Branch` constraints, and one final
/// succeeding `Branch`. Clause tests are primitive, and a succeeding clause
/// logs its branch constraint before its body runs, so nothing can
/// interleave inside a group. The last block may be unclosed only when
/// `complete` is false (the run stopped mid-dispatch: a bug or fuel
/// exhaustion).
pub fn scan_blocks(path: &Path, complete: bool) -> Result<Vec<Block>, PathShapeError> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut open: Option<Block> = None;
    for (i, c) in path.0.iter().enumerate() {
        match c {
            PathConstraint::FirstOrder { .. } => {
                if open.is_some() {
                    return Err(PathShapeError::InterruptedBlock { index: i });
                }
            }
            PathConstraint::Test { label, inspected } => {
                if open.is_some() {
                    return Err(PathShapeError::InterruptedBlock { index: i });
                }
                open = Some(Block {
                    test_index: i,
                    label: *label,
                    inspected: inspected.clone(),
                    branches: Vec::new(),
                    closed: false,
                });
            }
            PathConstraint::Branch { label, outcome, trace } => match open.as_mut() {
                None => return Err(PathShapeError::BranchOutsideBlock { index: i }),
                Some(b) => {
                    b.branches.push((i, *label, *outcome, trace.clone()));
                    if *outcome {
                        b.closed = true;
                        blocks.push(open.take().unwrap());
                    }
                }
            },
        }
    }
    if let Some(b) = open {
        if complete {
            return Err(PathShapeError::UnclosedBlock { test_index: b.test_index });
        }
        blocks.push(b);
    }
    Ok(blocks)
}

fn equivalence_view(path: &Path) -> impl Iterator<Item = &PathConstraint> {
    path.0.iter().filter(|c| c.counts_for_equivalence())
}

/// Two paths are equivalent when their first-order and branch constraints
/// agree component-wise; test constraints are ignored.
pub fn paths_equivalent(a: &Path, b: &Path) -> bool {
    let mut xs = equivalence_view(a);
    let mut ys = equivalence_view(b);
    loop {
        match (xs.next(), ys.next()) {
            (None, None) => return true,
            (Some(x), Some(y)) if x == y => {}
            _ => return false,
        }
    }
}

/// True when `predicted` is equivalent to some prefix of `actual` — the
/// check behind the concolic property: a solver-backed candidate's run must
/// follow the control-flow path its mutation predicted.
pub fn verify_prediction(predicted: &Path, actual: &Path) -> bool {
    let want: Vec<&PathConstraint> = equivalence_view(predicted).collect();
    let mut got = equivalence_view(actual);
    for w in want {
        match got.next() {
            Some(g) if g == w => {}
            _ => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Trace;

    fn fo(outcome: bool, n: i64) -> PathConstraint {
        PathConstraint::FirstOrder { outcome, trace: Trace::lit(n) }
    }

    fn test_c(l: u64) -> PathConstraint {
        PathConstraint::Test { label: Label(l), inspected: Inspected::FunctionValue }
    }

    fn br(l: u64, outcome: bool) -> PathConstraint {
        PathConstraint::Branch { label: Label(l), outcome, trace: Trace::lit(1) }
    }

    #[test]
    fn equivalence_ignores_tests() {
        let a = Path(alloc::vec![fo(true, 1), br(0, true)]);
        let mut with_test = a.clone();
        with_test.0.insert(1, test_c(0));
        assert!(paths_equivalent(&a, &a));
        assert!(paths_equivalent(&a, &with_test));
        let mut flipped = a.clone();
        flipped.0[1] = br(0, false);
        assert!(!paths_equivalent(&a, &flipped));
    }

    #[test]
    fn prediction_is_prefix_equivalence() {
        let actual = Path(alloc::vec![test_c(0), br(1, false), br(0, true), fo(false, 2)]);
        assert!(verify_prediction(&Path::new(), &actual));
        assert!(verify_prediction(&actual, &actual));
        let pred = Path(alloc::vec![br(1, false), br(0, true)]);
        assert!(verify_prediction(&pred, &actual));
        let wrong = Path(alloc::vec![br(1, true)]);
        assert!(!verify_prediction(&wrong, &actual));
        let too_long = Path(alloc::vec![br(1, false), br(0, true), fo(false, 2), fo(true, 3)]);
        assert!(!verify_prediction(&too_long, &actual));
    }

    #[test]
    fn block_scanner_accepts_wellformed_paths() {
        let p = Path(alloc::vec![
            test_c(0),
            br(1, false),
            br(0, true),
            fo(false, 7),
            test_c(5),
            br(5, true),
        ]);
        let blocks = scan_blocks(&p, true).unwrap();
        assert_eq!(blocks.len(), 2);
        assert!(blocks[0].took_else());
        assert_eq!(blocks[0].branches.len(), 2);
        assert!(blocks[1].took_else());
    }

    #[test]
    fn block_scanner_rejects_malformed_paths() {
        let p = Path(alloc::vec![br(0, true)]);
        assert!(matches!(
            scan_blocks(&p, true),
            Err(PathShapeError::BranchOutsideBlock { index: 0 })
        ));
        let unclosed = Path(alloc::vec![test_c(0), br(1, false)]);
        assert!(scan_blocks(&unclosed, true).is_err());
        // ... but an interrupted run may end mid-block.
        let blocks = scan_blocks(&unclosed, false).unwrap();
        assert_eq!(blocks.len(), 1);
        assert!(!blocks[0].closed);
    }

    #[test]
    fn blocks_are_strictly_contiguous() {
        // A succeeding clause logs its branch before the clause body runs,
        // so another block's constraints can never appear inside a group.
        let interleaved = Path(alloc::vec![
            test_c(0),
            br(2, false),
            test_c(5),
            br(5, true),
            br(0, true),
        ]);
        assert!(matches!(
            scan_blocks(&interleaved, true),
            Err(PathShapeError::InterruptedBlock { index: 2 })
        ));
        let fo_inside = Path(alloc::vec![test_c(0), fo(true, 1), br(0, true)]);
        assert!(scan_blocks(&fo_inside, true).is_err());
    }
}
