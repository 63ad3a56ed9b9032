//! Loop fission for a small imperative WHILE language.
//!
//! The pipeline: parse source text into an AST, compute data-flow
//! matrices over the `{0, 1, inf}` semiring, build a per-loop
//! dependence graph, condense its strongly connected components,
//! take the saturated covering induced by the condensation sources,
//! and rebuild each split loop as a sequence or `parallel` block.
//! A deterministic interpreter with effect logging provides
//! differential checking of every transformation, and an emitter
//! produces self-contained C with OpenMP pragmas.

pub mod ast;
pub mod dfg;
pub mod emit;
pub mod fission;
pub mod fuzz;
pub mod interp;
pub mod parser;

pub use ast::{Command, Expression, Program, VarId, VarSet};
pub use dfg::{corr, dfg_of, mat_add, mat_mul, DfgMatrix, SemiWeight};
pub use fission::{
    dependence_graph, fission_program, merge_by_cost, rebuild, source_closures, verify_covering,
    Covering, DepGraph, FissionMode, FissionOptions, FissionReport,
};
pub use interp::{differential_check, exec, EffectLog, RunResult, RunStatus, State, Verdict};
pub use parser::{parse_program, parse_program_with_parallel, pretty_print, SourceError};
