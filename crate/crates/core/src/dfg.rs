//! Data-flow graphs: square matrices over the semiring
//! `({0, 1, inf}, max, *)`, indexed by the variables occurring in a
//! command.
//!
//! An entry `(x, y)` describes how the entry value of `x` reaches the
//! exit value of `y`: `inf` is dependence, `1` is propagation of an
//! untouched value, `0` is reinitialization or no flow. Matrices are
//! identified with their embeddings: extending the index adds `1` on
//! the new diagonal positions and `0` elsewhere, so matrices over
//! different variable sets align automatically.

use crate::ast::{Command, Expression, VarId, VarSet};
use std::fmt;
use std::ops::{Add, Mul};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum SemiWeight {
    #[default]
    Zero,
    One,
    Inf,
}

impl Add for SemiWeight {
    type Output = SemiWeight;

    fn add(self, rhs: SemiWeight) -> SemiWeight {
        self.max(rhs)
    }
}

impl Mul for SemiWeight {
    type Output = SemiWeight;

    fn mul(self, rhs: SemiWeight) -> SemiWeight {
        if self == SemiWeight::Zero || rhs == SemiWeight::Zero {
            SemiWeight::Zero
        } else {
            self.max(rhs)
        }
    }
}

impl fmt::Display for SemiWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiWeight::Zero => f.write_str("0"),
            SemiWeight::One => f.write_str("1"),
            SemiWeight::Inf => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DfgError {
    #[error("`parallel` commands have no data-flow graph")]
    ParallelCommand,
}

/// Dense square matrix of [`SemiWeight`] indexed by an ordered
/// variable set. Rows are sources (entry values), columns targets
/// (exit values).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfgMatrix {
    index: VarSet,
    entries: Vec<SemiWeight>,
}

impl DfgMatrix {
    /// The 0x0 matrix; the identity under embedding.
    pub fn empty() -> DfgMatrix {
        DfgMatrix {
            index: VarSet::new(),
            entries: Vec::new(),
        }
    }

    pub fn identity(index: VarSet) -> DfgMatrix {
        let n = index.len();
        let mut m = DfgMatrix {
            index,
            entries: vec![SemiWeight::Zero; n * n],
        };
        for i in 0..n {
            m.entries[i * n + i] = SemiWeight::One;
        }
        m
    }

    fn zeros(index: VarSet) -> DfgMatrix {
        let n = index.len();
        DfgMatrix {
            index,
            entries: vec![SemiWeight::Zero; n * n],
        }
    }

    /// Builds a matrix from explicit rows; row and column order follow
    /// the index. Panics on a shape mismatch.
    pub fn from_rows(index: VarSet, rows: Vec<Vec<SemiWeight>>) -> DfgMatrix {
        let n = index.len();
        assert_eq!(rows.len(), n, "row count must match the index");
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "column count must match the index");
            entries.extend(row);
        }
        DfgMatrix { index, entries }
    }

    pub fn index(&self) -> &VarSet {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    fn at(&self, i: usize, j: usize) -> SemiWeight {
        self.entries[i * self.index.len() + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut SemiWeight {
        let n = self.index.len();
        &mut self.entries[i * n + j]
    }

    /// Entry for a pair of variables, embedding-aware: variables
    /// outside the index behave as identity rows/columns.
    pub fn get(&self, x: &VarId, y: &VarId) -> SemiWeight {
        match (self.index.index_of(x), self.index.index_of(y)) {
            (Some(i), Some(j)) => self.at(i, j),
            _ => {
                if x == y {
                    SemiWeight::One
                } else {
                    SemiWeight::Zero
                }
            }
        }
    }

    /// Re-expresses the matrix over `target`, which must contain every
    /// indexed variable. Fresh variables embed as identity.
    pub fn reindexed(&self, target: &VarSet) -> DfgMatrix {
        let mut out = DfgMatrix::identity(target.clone());
        let positions: Vec<usize> = self
            .index
            .iter()
            .map(|v| {
                target
                    .index_of(v)
                    .expect("reindex target must contain the matrix index")
            })
            .collect();
        for (i, &ti) in positions.iter().enumerate() {
            for (j, &tj) in positions.iter().enumerate() {
                *out.at_mut(ti, tj) = self.at(i, j);
            }
        }
        out
    }

    /// Equality up to embedding: both matrices extended to the union
    /// of their indices.
    pub fn aligned_eq(&self, other: &DfgMatrix) -> bool {
        let union = self.index.union(&other.index);
        self.reindexed(&union).entries == other.reindexed(&union).entries
    }

    /// Aligned text table with variable names on both axes.
    pub fn to_table(&self) -> String {
        let mut width = 3;
        for v in self.index.iter() {
            width = width.max(v.as_str().len());
        }
        let mut out = String::new();
        out.push_str(&" ".repeat(width + 1));
        for v in self.index.iter() {
            out.push_str(&format!("{:>w$} ", v, w = width));
        }
        out.push('\n');
        for (i, v) in self.index.iter().enumerate() {
            out.push_str(&format!("{:>w$} ", v, w = width));
            for j in 0..self.dim() {
                out.push_str(&format!("{:>w$} ", self.at(i, j).to_string(), w = width));
            }
            out.push('\n');
        }
        out
    }

    /// CSV form: header row of variable names, one row per source
    /// variable, cells in `{0, 1, inf}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.index.iter().map(|v| v.as_str()).collect();
        out.push(',');
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, v) in self.index.iter().enumerate() {
            out.push_str(v.as_str());
            for j in 0..self.dim() {
                out.push(',');
                out.push_str(&self.at(i, j).to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Pointwise max over the union index.
pub fn mat_add(a: &DfgMatrix, b: &DfgMatrix) -> DfgMatrix {
    let union = a.index.union(&b.index);
    let mut left = a.reindexed(&union);
    let right = b.reindexed(&union);
    for (l, r) in left.entries.iter_mut().zip(right.entries.iter()) {
        *l = *l + *r;
    }
    left
}

/// Semiring matrix product over the union index:
/// `(a*b)(x, z) = max over y of a(x, y) * b(y, z)`.
pub fn mat_mul(a: &DfgMatrix, b: &DfgMatrix) -> DfgMatrix {
    let union = a.index.union(&b.index);
    let left = a.reindexed(&union);
    let right = b.reindexed(&union);
    let n = union.len();
    let mut out = DfgMatrix::zeros(union);
    for i in 0..n {
        for k in 0..n {
            let w = left.at(i, k);
            if w == SemiWeight::Zero {
                continue;
            }
            for j in 0..n {
                *out.at_mut(i, j) = out.at(i, j) + w * right.at(k, j);
            }
        }
    }
    out
}

/// Guard correction: every variable occurring in `e` flows with `inf`
/// into every variable of `outs`. No diagonal entries of its own.
pub fn corr(e: &Expression, outs: &VarSet) -> DfgMatrix {
    let guard_vars = e.vars_occ();
    let index = guard_vars.union(outs);
    let mut m = DfgMatrix::zeros(index);
    for x in guard_vars.iter() {
        for y in outs.iter() {
            let i = m.index.index_of(x).unwrap();
            let j = m.index.index_of(y).unwrap();
            *m.at_mut(i, j) = SemiWeight::Inf;
        }
    }
    m
}

/// Index for the DFG of `c`: occurring variables in syntactic order,
/// with the effect pseudo-variable inserted at the first `use`.
pub(crate) fn occ_with_effect(c: &Command) -> VarSet {
    fn walk(c: &Command, out: &mut VarSet) {
        match c {
            Command::Use(args) => {
                for a in args {
                    out.insert(a.clone());
                }
                out.insert(VarId::effect());
            }
            Command::Assign(x, e) => {
                out.insert(x.clone());
                out.extend_from(&e.vars_occ());
            }
            Command::ArrayAssign(t, idx, rhs) => {
                out.insert(t.clone());
                out.extend_from(&idx.vars_occ());
                out.extend_from(&rhs.vars_occ());
            }
            Command::If {
                cond,
                then_branch,
                else_branch,
            } => {
                out.extend_from(&cond.vars_occ());
                walk(then_branch, out);
                walk(else_branch, out);
            }
            Command::While { cond, body } => {
                out.extend_from(&cond.vars_occ());
                walk(body, out);
            }
            Command::Skip => {}
            Command::Seq(items) | Command::Parallel(items) => {
                for item in items {
                    walk(item, out);
                }
            }
        }
    }
    let mut out = VarSet::new();
    walk(c, &mut out);
    out
}

/// Builds the data-flow graph of a `parallel`-free command.
pub fn dfg_of(c: &Command) -> Result<DfgMatrix, DfgError> {
    let m = build(c)?;
    // fix the index to syntactic occurrence order for deterministic output
    Ok(m.reindexed(&occ_with_effect(c)))
}

fn build(c: &Command) -> Result<DfgMatrix, DfgError> {
    match c {
        Command::Skip => Ok(DfgMatrix::empty()),
        Command::Assign(x, e) => {
            let index = occ_with_effect(c);
            // a literal self-copy leaves the value untouched: propagation
            if *e == Expression::Var(x.clone()) {
                return Ok(DfgMatrix::identity(index));
            }
            let rhs_vars = e.vars_occ();
            let mut m = DfgMatrix::zeros(index);
            let xi = m.index.index_of(x).unwrap();
            for (i, v) in m.index.clone().iter().enumerate() {
                if v != x {
                    *m.at_mut(i, i) = SemiWeight::One;
                }
                if rhs_vars.contains(v) {
                    *m.at_mut(i, xi) = SemiWeight::Inf;
                }
            }
            Ok(m)
        }
        Command::ArrayAssign(t, idx, rhs) => {
            let index = occ_with_effect(c);
            let read = idx.vars_occ().union(&rhs.vars_occ());
            let mut m = DfgMatrix::zeros(index);
            let ti = m.index.index_of(t).unwrap();
            for (i, v) in m.index.clone().iter().enumerate() {
                if v != t {
                    *m.at_mut(i, i) = SemiWeight::One;
                }
                if read.contains(v) {
                    *m.at_mut(i, ti) = SemiWeight::Inf;
                }
            }
            Ok(m)
        }
        Command::Use(args) => {
            let index = occ_with_effect(c);
            let mut m = DfgMatrix::zeros(index);
            let eff = VarId::effect();
            let ei = m.index.index_of(&eff).unwrap();
            *m.at_mut(ei, ei) = SemiWeight::Inf;
            for a in args {
                let i = m.index.index_of(a).unwrap();
                *m.at_mut(i, i) = SemiWeight::One;
                *m.at_mut(i, ei) = SemiWeight::Inf;
            }
            Ok(m)
        }
        Command::Seq(items) => {
            let mut acc = DfgMatrix::empty();
            for item in items {
                let next = build(item)?;
                acc = mat_mul(&acc, &next);
            }
            Ok(acc)
        }
        Command::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let d1 = build(then_branch)?;
            let d2 = build(else_branch)?;
            let outs = then_branch.vars_out().union(&else_branch.vars_out());
            Ok(mat_add(&mat_add(&d1, &d2), &corr(cond, &outs)))
        }
        Command::While { cond, body } => {
            // guard correction only; no transitive closure of the body
            let d = build(body)?;
            Ok(mat_add(&d, &corr(cond, &body.vars_out())))
        }
        Command::Parallel(_) => Err(DfgError::ParallelCommand),
    }
}
