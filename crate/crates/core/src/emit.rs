//! C emission and DOT export.
//!
//! [`emit_c`] turns a program (possibly containing `parallel` blocks)
//! into one self-contained C99 file: globals for every program
//! variable, a `kernel` function for the program body, OpenMP pragmas
//! around `parallel` blocks, and a `main` that runs the kernel and
//! prints one decimal checksum per variable in name order. The
//! printed lines are the contract for comparing an original program
//! against its fissioned form after compilation.

use crate::ast::{Command, Expression, Program, VarId, VarSet};
use crate::fission::{Condensation, DepGraph};
use crate::parser::{command_summary, expr_to_string};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One `section` per parallel branch.
    Sections,
    /// One `single nowait` work unit per branch inside a shared
    /// parallel region.
    SingleNowait,
}

#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub strategy: Strategy,
    /// Declared extent of every array in the program.
    pub array_extents: BTreeMap<VarId, i64>,
    pub scalar_type: String,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            strategy: Strategy::Sections,
            array_extents: BTreeMap::new(),
            scalar_type: "int64_t".to_string(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EmitError {
    #[error("no array size hint for `{0}`")]
    MissingExtent(VarId),
    #[error("`{0}` is used both as a scalar and as an array")]
    KindConflict(VarId),
    #[error(
        "array `{0}` is written by more than one parallel branch; refusing to privatize arrays"
    )]
    ArrayPrivatization(VarId),
    #[error("`use` occurs in more than one branch of a parallel block")]
    MultipleUseBranches,
}

const C_RESERVED: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "main", "kernel", "printf",
];

/// Maps program variables to C identifiers, renaming past C keywords
/// and the emitter's own symbols.
struct Namer {
    map: BTreeMap<VarId, VarId>,
    taken: BTreeSet<String>,
}

impl Namer {
    fn new(vars: &VarSet) -> Namer {
        let mut taken: BTreeSet<String> = C_RESERVED.iter().map(|s| s.to_string()).collect();
        let mut map = BTreeMap::new();
        for v in vars.iter() {
            let mut name = v.to_string();
            while taken.contains(&name) {
                name.push_str("_v");
            }
            taken.insert(name.clone());
            map.insert(v.clone(), VarId::new(&name).expect("renamed identifier"));
        }
        Namer { map, taken }
    }

    fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        while self.taken.contains(&name) {
            name.push('_');
        }
        self.taken.insert(name.clone());
        name
    }

    fn of(&self, v: &VarId) -> VarId {
        self.map.get(v).cloned().unwrap_or_else(|| v.clone())
    }
}

fn rename_expr(e: &Expression, map: &BTreeMap<VarId, VarId>) -> Expression {
    match e {
        Expression::Var(v) => Expression::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
        Expression::Index(t, idx) => Expression::Index(
            map.get(t).cloned().unwrap_or_else(|| t.clone()),
            Box::new(rename_expr(idx, map)),
        ),
        Expression::Lit(n) => Expression::Lit(*n),
        Expression::Unary(op, inner) => Expression::Unary(*op, Box::new(rename_expr(inner, map))),
        Expression::Binary(op, l, r) => Expression::Binary(
            *op,
            Box::new(rename_expr(l, map)),
            Box::new(rename_expr(r, map)),
        ),
    }
}

fn rename_cmd(c: &Command, map: &BTreeMap<VarId, VarId>) -> Command {
    let name = |v: &VarId| map.get(v).cloned().unwrap_or_else(|| v.clone());
    match c {
        Command::Assign(x, e) => Command::Assign(name(x), rename_expr(e, map)),
        Command::ArrayAssign(t, idx, rhs) => {
            Command::ArrayAssign(name(t), rename_expr(idx, map), rename_expr(rhs, map))
        }
        Command::If {
            cond,
            then_branch,
            else_branch,
        } => Command::If {
            cond: rename_expr(cond, map),
            then_branch: Box::new(rename_cmd(then_branch, map)),
            else_branch: Box::new(rename_cmd(else_branch, map)),
        },
        Command::While { cond, body } => Command::While {
            cond: rename_expr(cond, map),
            body: Box::new(rename_cmd(body, map)),
        },
        Command::Use(args) => Command::Use(args.iter().map(name).collect()),
        Command::Skip => Command::Skip,
        Command::Seq(items) => Command::Seq(items.iter().map(|c| rename_cmd(c, map)).collect()),
        Command::Parallel(items) => {
            Command::Parallel(items.iter().map(|c| rename_cmd(c, map)).collect())
        }
    }
}

/// Names appearing in subscript position anywhere in the command.
fn subscripted_names(c: &Command, out: &mut BTreeSet<VarId>) {
    fn expr(e: &Expression, out: &mut BTreeSet<VarId>) {
        match e {
            Expression::Index(t, idx) => {
                out.insert(t.clone());
                expr(idx, out);
            }
            Expression::Unary(_, inner) => expr(inner, out),
            Expression::Binary(_, l, r) => {
                expr(l, out);
                expr(r, out);
            }
            Expression::Var(_) | Expression::Lit(_) => {}
        }
    }
    match c {
        Command::Assign(_, e) => expr(e, out),
        Command::ArrayAssign(t, idx, rhs) => {
            out.insert(t.clone());
            expr(idx, out);
            expr(rhs, out);
        }
        Command::If {
            cond,
            then_branch,
            else_branch,
        } => {
            expr(cond, out);
            subscripted_names(then_branch, out);
            subscripted_names(else_branch, out);
        }
        Command::While { cond, body } => {
            expr(cond, out);
            subscripted_names(body, out);
        }
        Command::Use(_) | Command::Skip => {}
        Command::Seq(items) | Command::Parallel(items) => {
            for item in items {
                subscripted_names(item, out);
            }
        }
    }
}

/// Names read or written as a scalar (use arguments excluded: those
/// observe either kind).
fn scalar_names(c: &Command, out: &mut BTreeSet<VarId>) {
    fn expr(e: &Expression, out: &mut BTreeSet<VarId>) {
        match e {
            Expression::Var(v) => {
                out.insert(v.clone());
            }
            Expression::Index(_, idx) => expr(idx, out),
            Expression::Unary(_, inner) => expr(inner, out),
            Expression::Binary(_, l, r) => {
                expr(l, out);
                expr(r, out);
            }
            Expression::Lit(_) => {}
        }
    }
    match c {
        Command::Assign(x, e) => {
            out.insert(x.clone());
            expr(e, out);
        }
        Command::ArrayAssign(_, idx, rhs) => {
            expr(idx, out);
            expr(rhs, out);
        }
        Command::If {
            cond,
            then_branch,
            else_branch,
        } => {
            expr(cond, out);
            scalar_names(then_branch, out);
            scalar_names(else_branch, out);
        }
        Command::While { cond, body } => {
            expr(cond, out);
            scalar_names(body, out);
        }
        Command::Use(_) | Command::Skip => {}
        Command::Seq(items) | Command::Parallel(items) => {
            for item in items {
                scalar_names(item, out);
            }
        }
    }
}

fn collect_parallels<'a>(c: &'a Command, out: &mut Vec<&'a Command>) {
    match c {
        Command::Parallel(items) => {
            out.push(c);
            for item in items {
                collect_parallels(item, out);
            }
        }
        Command::If {
            then_branch,
            else_branch,
            ..
        } => {
            collect_parallels(then_branch, out);
            collect_parallels(else_branch, out);
        }
        Command::While { body, .. } => collect_parallels(body, out),
        Command::Seq(items) => {
            for item in items {
                collect_parallels(item, out);
            }
        }
        Command::Assign(..) | Command::ArrayAssign(..) | Command::Use(_) | Command::Skip => {}
    }
}

/// Scalars written by two or more branches, in name order.
fn shared_scalar_writes(
    branches: &[Command],
    arrays: &BTreeSet<VarId>,
) -> Result<Vec<VarId>, EmitError> {
    let outs: Vec<VarSet> = branches.iter().map(|b| b.vars_out()).collect();
    let mut counts: BTreeMap<VarId, usize> = BTreeMap::new();
    for o in &outs {
        for v in o.iter() {
            *counts.entry(v.clone()).or_default() += 1;
        }
    }
    let mut shared = Vec::new();
    for (v, n) in counts {
        if n >= 2 {
            if arrays.contains(&v) {
                return Err(EmitError::ArrayPrivatization(v));
            }
            shared.push(v);
        }
    }
    Ok(shared)
}

struct Emitter<'o> {
    opts: &'o EmitOptions,
    arrays: BTreeSet<VarId>,
    extents: BTreeMap<VarId, i64>,
    sink: String,
    fold_acc: String,
    fold_idx: String,
    out: String,
}

impl Emitter<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn pragma(&mut self, text: &str) {
        self.out.push_str("#pragma omp ");
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn stmt(&mut self, c: &Command, depth: usize) -> Result<(), EmitError> {
        match c {
            Command::Skip => self.line(depth, ";"),
            Command::Assign(x, e) => {
                let text = format!("{x} = {};", expr_to_string(e));
                self.line(depth, &text);
            }
            Command::ArrayAssign(t, idx, rhs) => {
                let text = format!("{t}[{}] = {};", expr_to_string(idx), expr_to_string(rhs));
                self.line(depth, &text);
            }
            Command::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let text = format!("if ({}) {{", expr_to_string(cond));
                self.line(depth, &text);
                self.stmt(then_branch, depth + 1)?;
                if matches!(**else_branch, Command::Skip) {
                    self.line(depth, "}");
                } else {
                    self.line(depth, "} else {");
                    self.stmt(else_branch, depth + 1)?;
                    self.line(depth, "}");
                }
            }
            Command::While { cond, body } => {
                let text = format!("while ({}) {{", expr_to_string(cond));
                self.line(depth, &text);
                self.stmt(body, depth + 1)?;
                self.line(depth, "}");
            }
            Command::Use(args) => {
                for a in args {
                    if self.arrays.contains(a) {
                        let extent = self.extents[a];
                        let (idx, sink) = (self.fold_idx.clone(), self.sink.clone());
                        let text = format!(
                            "for (int64_t {idx} = 0; {idx} < {extent}; {idx}++) {{ {sink} = {sink} * 31u + (uint64_t){a}[{idx}]; }}"
                        );
                        self.line(depth, &text);
                    } else {
                        let sink = self.sink.clone();
                        let text = format!("{sink} = {sink} * 31u + (uint64_t){a};");
                        self.line(depth, &text);
                    }
                }
            }
            Command::Seq(items) => {
                for item in items {
                    self.stmt(item, depth)?;
                }
            }
            Command::Parallel(branches) => self.parallel(branches, depth)?,
        }
        Ok(())
    }

    fn parallel(&mut self, branches: &[Command], depth: usize) -> Result<(), EmitError> {
        let shared = shared_scalar_writes(branches, &self.arrays)?;
        // per-branch copies of every shared scalar, written back after
        // the region; the transformation guarantees the copies agree
        let scalar_type = self.opts.scalar_type.clone();
        for (bi, _) in branches.iter().enumerate() {
            for v in &shared {
                let text = format!("{scalar_type} {v}__b{bi} = {v};");
                self.line(depth, &text);
            }
        }
        match self.opts.strategy {
            Strategy::Sections => {
                self.pragma("parallel sections");
                self.line(depth, "{");
                for (bi, branch) in branches.iter().enumerate() {
                    self.pragma("section");
                    self.line(depth + 1, "{");
                    self.branch_body(branch, bi, &shared, depth + 2)?;
                    self.line(depth + 1, "}");
                }
                self.line(depth, "}");
            }
            Strategy::SingleNowait => {
                self.pragma("parallel");
                self.line(depth, "{");
                for (bi, branch) in branches.iter().enumerate() {
                    self.pragma("single nowait");
                    self.line(depth + 1, "{");
                    self.branch_body(branch, bi, &shared, depth + 2)?;
                    self.line(depth + 1, "}");
                }
                self.line(depth, "}");
            }
        }
        for v in &shared {
            let owner = branches
                .iter()
                .position(|b| b.vars_out().contains(v))
                .expect("a shared variable has a writing branch");
            let text = format!("{v} = {v}__b{owner};");
            self.line(depth, &text);
        }
        Ok(())
    }

    fn branch_body(
        &mut self,
        branch: &Command,
        bi: usize,
        shared: &[VarId],
        depth: usize,
    ) -> Result<(), EmitError> {
        let map: BTreeMap<VarId, VarId> = shared
            .iter()
            .map(|v| {
                (
                    v.clone(),
                    VarId::new(&format!("{v}__b{bi}")).expect("renamed identifier"),
                )
            })
            .collect();
        let renamed = rename_cmd(branch, &map);
        self.stmt(&renamed, depth)
    }
}

/// Emits a complete C99 translation unit for the program.
pub fn emit_c(p: &Program, opts: &EmitOptions) -> Result<String, EmitError> {
    let occ = p.body.vars_occ();

    let mut subscripted = BTreeSet::new();
    subscripted_names(&p.body, &mut subscripted);
    let mut scalar_use = BTreeSet::new();
    scalar_names(&p.body, &mut scalar_use);
    if let Some(conflict) = subscripted.intersection(&scalar_use).next() {
        return Err(EmitError::KindConflict(conflict.clone()));
    }

    let mut arrays: BTreeSet<VarId> = subscripted;
    for v in occ.iter() {
        if opts.array_extents.contains_key(v) {
            arrays.insert(v.clone());
        }
    }
    for t in &arrays {
        if !opts.array_extents.contains_key(t) {
            return Err(EmitError::MissingExtent(t.clone()));
        }
    }

    // validate every parallel block before emitting anything
    let mut parallels = Vec::new();
    collect_parallels(&p.body, &mut parallels);
    for node in &parallels {
        let Command::Parallel(branches) = node else {
            unreachable!()
        };
        shared_scalar_writes(branches, &arrays)?;
        if branches.iter().filter(|b| b.contains_use()).count() >= 2 {
            return Err(EmitError::MultipleUseBranches);
        }
    }

    let mut namer = Namer::new(&occ);
    let sink = namer.fresh("use_sink");
    let fold_acc = namer.fresh("fold_h");
    let fold_idx = namer.fresh("fold_k");
    let body = rename_cmd(&p.body, &namer.map);
    let arrays: BTreeSet<VarId> = arrays.iter().map(|v| namer.of(v)).collect();
    let extents: BTreeMap<VarId, i64> = opts
        .array_extents
        .iter()
        .map(|(v, &e)| (namer.of(v), e))
        .collect();

    let mut em = Emitter {
        opts,
        arrays,
        extents,
        sink,
        fold_acc,
        fold_idx,
        out: String::new(),
    };

    em.line(0, "#include <stdint.h>");
    em.line(0, "#include <stdio.h>");
    em.line(0, "");
    // variables sorted by source name; globals zero-initialize
    let mut ordered: Vec<&VarId> = occ.iter().collect();
    ordered.sort();
    for v in &ordered {
        let c = namer.of(v);
        if em.arrays.contains(&c) {
            let extent = em.extents[&c];
            let ty = &opts.scalar_type;
            let text = format!("static {ty} {c}[{extent}];");
            em.line(0, &text);
        } else {
            let ty = &opts.scalar_type;
            let text = format!("static {ty} {c} = 0;");
            em.line(0, &text);
        }
    }
    let sink = em.sink.clone();
    let text = format!("static volatile uint64_t {sink} = 0;");
    em.line(0, &text);
    em.line(0, "");
    em.line(0, "static void kernel(void) {");
    em.stmt(&body, 1)?;
    em.line(0, "}");
    em.line(0, "");
    em.line(0, "int main(void) {");
    em.line(1, "kernel();");
    for v in &ordered {
        let c = namer.of(v);
        if em.arrays.contains(&c) {
            let extent = em.extents[&c];
            let (acc, idx) = (em.fold_acc.clone(), em.fold_idx.clone());
            let text = format!(
                "{{ uint64_t {acc} = 0; for (int64_t {idx} = 0; {idx} < {extent}; {idx}++) {{ {acc} = {acc} * 31u + (uint64_t){c}[{idx}]; }} printf(\"%llu\\n\", (unsigned long long){acc}); }}"
            );
            em.line(1, &text);
        } else {
            let text = format!("printf(\"%llu\\n\", (unsigned long long)(uint64_t){c});");
            em.line(1, &text);
        }
    }
    let text = format!("printf(\"%llu\\n\", (unsigned long long){sink});");
    em.line(1, &text);
    em.line(1, "return 0;");
    em.line(0, "}");
    Ok(em.out)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering of a dependence graph, one dotted cluster per
/// strongly connected component, statements labeled 1-based.
pub fn dot_dependence(g: &DepGraph, comps: &[Vec<usize>]) -> String {
    let mut out = String::new();
    out.push_str("digraph dependence {\n  node [shape=box];\n");
    for (ci, comp) in comps.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{ci} {{");
        let _ = writeln!(out, "    style=dotted;");
        let members: Vec<String> = comp.iter().map(|v| (v + 1).to_string()).collect();
        let _ = writeln!(out, "    label=\"{{{}}}\";", members.join(","));
        for &v in comp {
            let _ = writeln!(
                out,
                "    s{} [label=\"{}: {}\"];",
                v + 1,
                v + 1,
                dot_escape(&command_summary(&g.stmts[v]))
            );
        }
        out.push_str("  }\n");
    }
    for &(i, j) in &g.edges {
        let _ = writeln!(out, "  s{} -> s{};", i + 1, j + 1);
    }
    out.push_str("}\n");
    out
}

/// DOT rendering of the condensation, nodes labeled with their
/// statement sets.
pub fn dot_condensation(comps: &[Vec<usize>], dag: &Condensation) -> String {
    let mut out = String::new();
    out.push_str("digraph condensation {\n  node [shape=box];\n");
    for (ci, comp) in comps.iter().enumerate() {
        let members: Vec<String> = comp.iter().map(|v| (v + 1).to_string()).collect();
        let _ = writeln!(out, "  c{ci} [label=\"{{{}}}\"];", members.join(","));
    }
    for &(i, j) in &dag.edges {
        let _ = writeln!(out, "  c{i} -> c{j};");
    }
    out.push_str("}\n");
    out
}
