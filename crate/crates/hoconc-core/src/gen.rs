//! Seeded random generation of small programs and input stores, for
//! fuzz-style test suites. Deterministic: the same seed always yields the
//! same program.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::canonical::{check_proper, default_fn, IdSource, Store};
use crate::evolve::{enumerate_mutations, EvolvePolicy};
use crate::lang::{Expr, InputSort, Program};
use crate::machine::concolic_eval;
use crate::trace::TraceOp;

/// xorshift64* — tiny, deterministic, good enough for test-case generation.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n.max(1)
    }

    pub fn chance(&mut self, percent: u64) -> bool {
        self.below(100) < percent
    }

    fn small_int(&mut self) -> i64 {
        self.below(21) as i64 - 10
    }
}

struct ProgramGen<'a> {
    rng: &'a mut Rng,
    numbers: Vec<String>,
    functions: Vec<String>,
}

impl<'a> ProgramGen<'a> {
    fn numeric(&mut self, depth: usize) -> Expr {
        if depth == 0 {
            return match self.rng.below(3) {
                0 if !self.numbers.is_empty() => {
                    let i = self.rng.below(self.numbers.len() as u64) as usize;
                    Expr::Input(self.numbers[i].clone())
                }
                _ => Expr::Int(self.rng.small_int()),
            };
        }
        match self.rng.below(6) {
            0 | 1 => {
                let op = match self.rng.below(3) {
                    0 => crate::lang::PrimOp::Add,
                    1 => crate::lang::PrimOp::Sub,
                    _ => crate::lang::PrimOp::Mul,
                };
                Expr::Prim {
                    op,
                    args: alloc::vec![self.numeric(depth - 1), self.numeric(depth - 1)],
                }
            }
            2 if !self.functions.is_empty() => {
                let i = self.rng.below(self.functions.len() as u64) as usize;
                Expr::App {
                    func: alloc::boxed::Box::new(Expr::Input(self.functions[i].clone())),
                    arg: alloc::boxed::Box::new(self.argument(depth - 1)),
                }
            }
            _ => self.numeric(0),
        }
    }

    fn argument(&mut self, depth: usize) -> Expr {
        if self.rng.chance(40) {
            // A lambda argument the input may call back.
            let param = format!("w{}", self.rng.below(1000));
            let body = if self.rng.chance(25) {
                Expr::Error
            } else {
                // Use the parameter in a small arithmetic body.
                Expr::Prim {
                    op: if self.rng.chance(50) {
                        crate::lang::PrimOp::Add
                    } else {
                        crate::lang::PrimOp::Mul
                    },
                    args: alloc::vec![Expr::Var(param.clone()), Expr::Int(self.rng.small_int())],
                }
            };
            Expr::Lambda { param, body: alloc::boxed::Box::new(body) }
        } else {
            self.numeric(depth)
        }
    }

    fn test(&mut self, depth: usize) -> Expr {
        let op = match self.rng.below(3) {
            0 => crate::lang::PrimOp::NumEq,
            1 => crate::lang::PrimOp::Le,
            _ => crate::lang::PrimOp::Lt,
        };
        let t = Expr::Prim {
            op,
            args: alloc::vec![self.numeric(depth), self.numeric(depth)],
        };
        if self.rng.chance(15) {
            Expr::Prim { op: crate::lang::PrimOp::Not, args: alloc::vec![t] }
        } else {
            t
        }
    }

    fn body(&mut self, depth: usize) -> Expr {
        if depth == 0 {
            return if self.rng.chance(30) { Expr::Error } else { self.numeric(1) };
        }
        match self.rng.below(4) {
            0 => Expr::Cond {
                clauses: alloc::vec![(self.test(depth - 1), self.body(depth - 1))],
                else_body: alloc::boxed::Box::new(self.body(depth - 1)),
            },
            1 => {
                let name = format!("v{}", self.rng.below(1000));
                Expr::Let {
                    name: name.clone(),
                    rhs: alloc::boxed::Box::new(self.numeric(depth - 1)),
                    body: alloc::boxed::Box::new(Expr::Prim {
                        op: crate::lang::PrimOp::Add,
                        args: alloc::vec![Expr::Var(name), self.body(depth - 1)],
                    }),
                }
            }
            2 if self.rng.chance(35) => Expr::Error,
            _ => self.numeric(depth),
        }
    }
}

/// A random program: up to two number inputs, up to two function inputs, a
/// conditional-and-arithmetic body with reachable `(error)` sites.
pub fn random_program(rng: &mut Rng) -> Program {
    let n_numbers = rng.below(3);
    let n_functions = rng.below(3);
    let numbers: Vec<String> = (0..n_numbers).map(|i| format!("x{i}")).collect();
    let functions: Vec<String> = (0..n_functions).map(|i| format!("f{i}")).collect();
    let mut inputs: Vec<(String, InputSort)> = Vec::new();
    for n in &numbers {
        inputs.push((n.clone(), InputSort::Number));
    }
    for f in &functions {
        inputs.push((f.clone(), InputSort::Function));
    }
    let mut g = ProgramGen { rng, numbers, functions };
    let depth = 2 + g.rng.below(2) as usize;
    let main = Expr::Cond {
        clauses: alloc::vec![(g.test(depth), g.body(depth))],
        else_body: alloc::boxed::Box::new(g.body(depth - 1)),
    };
    Program { inputs, main }
}

/// The all-defaults store for a program: numbers at 0, functions at the
/// simplest canonical function.
pub fn seed_store(p: &Program, ids: &IdSource) -> Store {
    let mut store = Store::new();
    for (name, sort) in &p.inputs {
        match sort {
            InputSort::Number => store.set_number(name.clone(), 0),
            InputSort::Function => store.set_function(name.clone(), default_fn(ids)),
        }
    }
    store
}

/// A random proper store for `p`, produced the way the search would: start
/// from the defaults and walk a short chain of structural mutations, then
/// perturb some numbers (re-checking properness).
pub fn random_store(p: &Program, rng: &mut Rng, ids: &IdSource) -> Store {
    let mut store = seed_store(p, ids);
    let policy = EvolvePolicy { max_dispatch_depth: 3, max_clauses_per_dispatch: 3 };
    let steps = rng.below(4);
    for _ in 0..steps {
        let (_, path) = concolic_eval(p, &store, 50_000);
        let structural: Vec<_> = enumerate_mutations(&store, &path, &policy, ids)
            .into_iter()
            .filter(|c| c.query.is_none() && !matches!(c.rule, crate::evolve::MutationRule::TruncatePrefix))
            .collect();
        if structural.is_empty() {
            break;
        }
        let pick = rng.below(structural.len() as u64) as usize;
        store = structural[pick].store.clone();
    }
    // Random number perturbation, kept only if the store stays proper.
    let keys: Vec<String> = store.numbers.keys().cloned().collect();
    for k in keys {
        if rng.chance(50) {
            let mut tweaked = store.clone();
            tweaked.set_number(k, rng.small_int());
            if check_proper(&tweaked).is_ok() {
                store = tweaked;
            }
        }
    }
    store
}

/// A random trace operator, for low-level fuzzing.
pub fn random_trace_op(rng: &mut Rng) -> TraceOp {
    match rng.below(6) {
        0 => TraceOp::Add,
        1 => TraceOp::Sub,
        2 => TraceOp::Mul,
        3 => TraceOp::NumEq,
        4 => TraceOp::Le,
        _ => TraceOp::Lt,
    }
}
