//! Abstract syntax for the WHILE language and the syntactic
//! variable-set functions: modified (`vars_out`), used (`vars_in`)
//! and occurring (`vars_occ`) variables of a command.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

/// Name of the pseudo-variable that threads ordering between `use`
/// statements through the dataflow analysis. Reserved: rejected by
/// the parser in source programs.
pub const EFFECT_VAR: &str = "__effect";

/// An identifier. Clones share the underlying string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(Arc<str>);

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid variable name `{name}`")]
pub struct InvalidVarName {
    pub name: String,
}

impl VarId {
    /// Validates `[A-Za-z_][A-Za-z0-9_]*` and rejects the reserved
    /// effect name.
    pub fn new(name: &str) -> Result<VarId, InvalidVarName> {
        let mut chars = name.chars();
        let head_ok = chars
            .next()
            .map(|c| c.is_ascii_alphabetic() || c == '_')
            .unwrap_or(false);
        if !head_ok || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') || name == EFFECT_VAR {
            return Err(InvalidVarName {
                name: name.to_string(),
            });
        }
        Ok(VarId(Arc::from(name)))
    }

    /// The effect pseudo-variable, only constructible here.
    pub fn effect() -> VarId {
        VarId(Arc::from(EFFECT_VAR))
    }

    pub fn is_effect(&self) -> bool {
        &*self.0 == EFFECT_VAR
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "!",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expression {
    Var(VarId),
    /// `t[e]`: one subscript level, the index is an arbitrary expression.
    Index(VarId, Box<Expression>),
    Lit(i64),
    Unary(UnOp, Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Command {
    Assign(VarId, Expression),
    /// `t[e1] = e2`
    ArrayAssign(VarId, Expression, Expression),
    If {
        cond: Expression,
        then_branch: Box<Command>,
        else_branch: Box<Command>,
    },
    While {
        cond: Expression,
        body: Box<Command>,
    },
    Use(Vec<VarId>),
    Skip,
    Seq(Vec<Command>),
    /// Output-only: produced by the fission pass, never present in
    /// source programs.
    Parallel(Vec<Command>),
}

/// A program is a top-level statement sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub body: Command,
}

impl Program {
    pub fn new(stmts: Vec<Command>) -> Program {
        Program {
            body: Command::Seq(stmts),
        }
    }

    /// Top-level statements.
    pub fn stmts(&self) -> &[Command] {
        match &self.body {
            Command::Seq(items) => items,
            _ => std::slice::from_ref(&self.body),
        }
    }
}

/// An ordered set of variables. Iteration follows first insertion,
/// which everywhere in this crate means first syntactic occurrence,
/// so downstream matrices and reports are deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarSet(IndexSet<VarId>);

impl VarSet {
    pub fn new() -> VarSet {
        VarSet::default()
    }

    pub fn insert(&mut self, v: VarId) -> bool {
        self.0.insert(v)
    }

    pub fn contains(&self, v: &VarId) -> bool {
        self.0.contains(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VarId> {
        self.0.iter()
    }

    pub fn get_index(&self, i: usize) -> Option<&VarId> {
        self.0.get_index(i)
    }

    pub fn index_of(&self, v: &VarId) -> Option<usize> {
        self.0.get_index_of(v)
    }

    pub fn extend_from(&mut self, other: &VarSet) {
        for v in other.iter() {
            self.insert(v.clone());
        }
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    pub fn intersects(&self, other: &VarSet) -> bool {
        self.iter().any(|v| other.contains(v))
    }

    /// A copy sorted by name, for report output.
    pub fn sorted_by_name(&self) -> VarSet {
        let mut names: Vec<&VarId> = self.iter().collect();
        names.sort();
        names.into_iter().cloned().collect()
    }
}

impl FromIterator<VarId> for VarSet {
    fn from_iter<T: IntoIterator<Item = VarId>>(iter: T) -> VarSet {
        let mut s = VarSet::new();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, v) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

impl Expression {
    /// Variables occurring in the expression, in syntactic order.
    /// For `t[e]` the array name comes before the index variables.
    pub fn vars_occ(&self) -> VarSet {
        let mut out = VarSet::new();
        self.collect_occ(&mut out);
        out
    }

    fn collect_occ(&self, out: &mut VarSet) {
        match self {
            Expression::Var(v) => {
                out.insert(v.clone());
            }
            Expression::Index(t, e) => {
                out.insert(t.clone());
                e.collect_occ(out);
            }
            Expression::Lit(_) => {}
            Expression::Unary(_, e) => e.collect_occ(out),
            Expression::Binary(_, l, r) => {
                l.collect_occ(out);
                r.collect_occ(out);
            }
        }
    }
}

impl Command {
    /// Variables modified by the command. An array write modifies the
    /// array name as a whole.
    pub fn vars_out(&self) -> VarSet {
        let mut out = VarSet::new();
        self.collect_out(&mut out);
        out
    }

    fn collect_out(&self, out: &mut VarSet) {
        match self {
            Command::Assign(x, _) => {
                out.insert(x.clone());
            }
            Command::ArrayAssign(t, _, _) => {
                out.insert(t.clone());
            }
            Command::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.collect_out(out);
                else_branch.collect_out(out);
            }
            Command::While { body, .. } => body.collect_out(out),
            Command::Use(_) | Command::Skip => {}
            Command::Seq(items) | Command::Parallel(items) => {
                for c in items {
                    c.collect_out(out);
                }
            }
        }
    }

    /// Variables used by the command. Guard variables of `if` and
    /// `while` count as used; the target of a plain assignment does
    /// not, unless it occurs in the right-hand side.
    pub fn vars_in(&self) -> VarSet {
        let mut out = VarSet::new();
        self.collect_in(&mut out);
        out
    }

    fn collect_in(&self, out: &mut VarSet) {
        match self {
            Command::Assign(_, e) => e.collect_occ(out),
            Command::ArrayAssign(_, idx, rhs) => {
                idx.collect_occ(out);
                rhs.collect_occ(out);
            }
            Command::If {
                cond,
                then_branch,
                else_branch,
            } => {
                cond.collect_occ(out);
                then_branch.collect_in(out);
                else_branch.collect_in(out);
            }
            Command::While { cond, body } => {
                cond.collect_occ(out);
                body.collect_in(out);
            }
            Command::Use(args) => {
                for a in args {
                    out.insert(a.clone());
                }
            }
            Command::Skip => {}
            Command::Seq(items) | Command::Parallel(items) => {
                for c in items {
                    c.collect_in(out);
                }
            }
        }
    }

    /// All variables occurring in the command.
    pub fn vars_occ(&self) -> VarSet {
        let mut out = VarSet::new();
        self.collect_occ(&mut out);
        out
    }

    fn collect_occ(&self, out: &mut VarSet) {
        match self {
            Command::Assign(x, e) => {
                out.insert(x.clone());
                e.collect_occ(out);
            }
            Command::ArrayAssign(t, idx, rhs) => {
                out.insert(t.clone());
                idx.collect_occ(out);
                rhs.collect_occ(out);
            }
            Command::If {
                cond,
                then_branch,
                else_branch,
            } => {
                cond.collect_occ(out);
                then_branch.collect_occ(out);
                else_branch.collect_occ(out);
            }
            Command::While { cond, body } => {
                cond.collect_occ(out);
                body.collect_occ(out);
            }
            Command::Use(args) => {
                for a in args {
                    out.insert(a.clone());
                }
            }
            Command::Skip => {}
            Command::Seq(items) | Command::Parallel(items) => {
                for c in items {
                    c.collect_occ(out);
                }
            }
        }
    }

    /// True if a `use` statement occurs anywhere in the command.
    pub fn contains_use(&self) -> bool {
        match self {
            Command::Use(_) => true,
            Command::Assign(..) | Command::ArrayAssign(..) | Command::Skip => false,
            Command::If {
                then_branch,
                else_branch,
                ..
            } => then_branch.contains_use() || else_branch.contains_use(),
            Command::While { body, .. } => body.contains_use(),
            Command::Seq(items) | Command::Parallel(items) => {
                items.iter().any(|c| c.contains_use())
            }
        }
    }

    /// True if a `parallel` node occurs anywhere in the command.
    pub fn contains_parallel(&self) -> bool {
        match self {
            Command::Parallel(_) => true,
            Command::Assign(..) | Command::ArrayAssign(..) | Command::Skip | Command::Use(_) => {
                false
            }
            Command::If {
                then_branch,
                else_branch,
                ..
            } => then_branch.contains_parallel() || else_branch.contains_parallel(),
            Command::While { body, .. } => body.contains_parallel(),
            Command::Seq(items) => items.iter().any(|c| c.contains_parallel()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> VarId {
        VarId::new(name).unwrap()
    }

    fn names(s: &VarSet) -> Vec<String> {
        s.iter().map(|v| v.to_string()).collect()
    }

    #[test]
    fn var_names_are_validated() {
        assert!(VarId::new("x1").is_ok());
        assert!(VarId::new("_tmp").is_ok());
        assert!(VarId::new("").is_err());
        assert!(VarId::new("1x").is_err());
        assert!(VarId::new("a-b").is_err());
        assert!(VarId::new(EFFECT_VAR).is_err());
        assert!(VarId::effect().is_effect());
    }

    #[test]
    fn out_of_assignment_is_target_only() {
        // x = y + 1 modifies exactly {x}
        let c = Command::Assign(
            v("x"),
            Expression::Binary(
                BinOp::Add,
                Box::new(Expression::Var(v("y"))),
                Box::new(Expression::Lit(1)),
            ),
        );
        assert_eq!(names(&c.vars_out()), ["x"]);
        assert_eq!(names(&c.vars_in()), ["y"]);
    }

    #[test]
    fn skip_has_empty_sets() {
        assert!(Command::Skip.vars_out().is_empty());
        assert!(Command::Skip.vars_in().is_empty());
        assert!(Command::Skip.vars_occ().is_empty());
    }

    #[test]
    fn array_write_modifies_array_name() {
        // t[e1] = e2 modifies {t}; index and rhs variables are used
        let c = Command::ArrayAssign(
            v("t"),
            Expression::Var(v("i")),
            Expression::Index(v("u"), Box::new(Expression::Var(v("j")))),
        );
        assert_eq!(names(&c.vars_out()), ["t"]);
        assert_eq!(names(&c.vars_in()), ["i", "u", "j"]);
        assert_eq!(names(&c.vars_occ()), ["t", "i", "u", "j"]);
    }

    #[test]
    fn conditional_in_includes_guard() {
        let c = Command::If {
            cond: Expression::Var(v("e")),
            then_branch: Box::new(Command::Assign(v("a"), Expression::Var(v("b")))),
            else_branch: Box::new(Command::Skip),
        };
        assert_eq!(names(&c.vars_in()), ["e", "b"]);
        assert_eq!(names(&c.vars_out()), ["a"]);
    }

    #[test]
    fn multi_operand_assignment_in() {
        // x1 = x1 + y1 + x2 + i uses all four
        let e = Expression::Binary(
            BinOp::Add,
            Box::new(Expression::Binary(
                BinOp::Add,
                Box::new(Expression::Binary(
                    BinOp::Add,
                    Box::new(Expression::Var(v("x1"))),
                    Box::new(Expression::Var(v("y1"))),
                )),
                Box::new(Expression::Var(v("x2"))),
            )),
            Box::new(Expression::Var(v("i"))),
        );
        let c = Command::Assign(v("x1"), e);
        assert_eq!(names(&c.vars_in()), ["x1", "y1", "x2", "i"]);
    }

    #[test]
    fn occ_of_three_assignments() {
        // x = x + 1; y = y; z = 0 occurs {x, y, z}
        let seq = Command::Seq(vec![
            Command::Assign(
                v("x"),
                Expression::Binary(
                    BinOp::Add,
                    Box::new(Expression::Var(v("x"))),
                    Box::new(Expression::Lit(1)),
                ),
            ),
            Command::Assign(v("y"), Expression::Var(v("y"))),
            Command::Assign(v("z"), Expression::Lit(0)),
        ]);
        assert_eq!(names(&seq.vars_occ()), ["x", "y", "z"]);
        assert!(Expression::Lit(5).vars_occ().is_empty());
    }

    #[test]
    fn seq_sets_are_unions_of_elements() {
        let a = Command::Assign(v("a"), Expression::Var(v("b")));
        let b = Command::Use(vec![v("c")]);
        let seq = Command::Seq(vec![a.clone(), b.clone()]);
        assert_eq!(
            names(&seq.vars_in()),
            names(&a.vars_in().union(&b.vars_in()))
        );
        assert_eq!(
            names(&seq.vars_out()),
            names(&a.vars_out().union(&b.vars_out()))
        );
        assert_eq!(
            names(&seq.vars_occ()),
            names(&a.vars_occ().union(&b.vars_occ()))
        );
    }

    #[test]
    fn in_and_out_are_subsets_of_occ() {
        let c = Command::While {
            cond: Expression::Binary(
                BinOp::Ne,
                Box::new(Expression::Var(v("i"))),
                Box::new(Expression::Var(v("j"))),
            ),
            body: Box::new(Command::Seq(vec![
                Command::ArrayAssign(v("s"), Expression::Var(v("i")), Expression::Var(v("x"))),
                Command::Use(vec![v("x")]),
            ])),
        };
        let occ = c.vars_occ();
        assert!(c.vars_in().iter().all(|v| occ.contains(v)));
        assert!(c.vars_out().iter().all(|v| occ.contains(v)));
    }

    #[test]
    fn equal_commands_yield_identical_ordered_sets() {
        let mk = || {
            Command::Seq(vec![
                Command::Assign(v("q"), Expression::Var(v("r"))),
                Command::Assign(v("p"), Expression::Var(v("q"))),
            ])
        };
        assert_eq!(names(&mk().vars_occ()), names(&mk().vars_occ()));
        assert_eq!(names(&mk().vars_occ()), ["q", "r", "p"]);
    }
}
