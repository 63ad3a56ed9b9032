//! Loop fission: per-loop dependence graphs, strongly connected
//! components, condensation, saturated coverings, and loop
//! reconstruction.
//!
//! A loop body is a list of statements. Statement `i` depends on
//! statement `j` when a value `j` writes can reach something `i`
//! reads, either through the loop's data-flow matrix or by direct
//! write/read overlap. One rebuilt loop per source component of the
//! condensation, closed under dependence edges, reproduces the whole
//! body across the generated loops with duplication only where chains
//! share producers.

use crate::ast::{Command, Expression, Program, VarId, VarSet};
use crate::dfg::{dfg_of, DfgError, SemiWeight};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FissionError {
    #[error("expected a while loop")]
    NotALoop,
    #[error(transparent)]
    Dfg(#[from] DfgError),
}

/// Dependence graph of one loop. Vertices are the top-level body
/// statements in program order; edge `(i, j)` means statement `i`
/// depends on statement `j`. Indices are 0-based internally and
/// printed 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepGraph {
    pub cond: Expression,
    pub stmts: Vec<Command>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl DepGraph {
    pub fn len(&self) -> usize {
        self.stmts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }
}

/// `vars_in` extended so that a statement containing `use` also
/// carries the effect pseudo-variable.
pub fn in_star(c: &Command) -> VarSet {
    let mut s = c.vars_in();
    if c.contains_use() {
        s.insert(VarId::effect());
    }
    s
}

/// `vars_out` extended the same way; `use` chains through the effect
/// variable and therefore counts as producing it.
pub fn out_star(c: &Command) -> VarSet {
    let mut s = c.vars_out();
    if c.contains_use() {
        s.insert(VarId::effect());
    }
    s
}

/// Builds the dependence graph of a while loop, with the write/read
/// overlap augmentation enabled.
pub fn dependence_graph(loop_cmd: &Command) -> Result<DepGraph, FissionError> {
    dependence_graph_opts(loop_cmd, true)
}

/// Like [`dependence_graph`], with the augmentation rule switchable.
///
/// Rule (a): `i` depends on `j` when some `x` written by `j` flows
/// with `inf` into some `y` read by `i` in the loop matrix (body
/// composition plus guard correction). The matrix conflates entry and
/// exit values of a variable, so a kill-then-read inside one
/// iteration (`x = z + 1; use(x)`) leaves no `inf` path; rule (b)
/// adds an edge on plain write/read overlap to keep those chains.
///
/// Independently of both, two structural rules keep the rebuilt
/// loops faithful:
///
/// * every statement depends on every statement that modifies a guard
///   variable, realizing the guard correction at statement level; a
///   statement reading only loop-invariant variables would otherwise
///   split off into a loop that never advances the guard;
/// * statements writing a common variable depend on each other, so
///   the per-iteration write order of a multiply-written variable
///   survives in whichever loop carries it. Without this, two dead
///   stores to the same variable could land in different loops, each
///   ending with a different final value.
pub fn dependence_graph_opts(
    loop_cmd: &Command,
    augmentation: bool,
) -> Result<DepGraph, FissionError> {
    let Command::While { cond, body } = loop_cmd else {
        return Err(FissionError::NotALoop);
    };
    let stmts: Vec<Command> = match body.as_ref() {
        Command::Seq(items) => items.clone(),
        other => vec![other.clone()],
    };
    let m = dfg_of(loop_cmd)?;
    let ins: Vec<VarSet> = stmts.iter().map(in_star).collect();
    let outs: Vec<VarSet> = stmts.iter().map(out_star).collect();
    let guard_vars = cond.vars_occ();
    let guard_writers: Vec<usize> = (0..stmts.len())
        .filter(|&j| outs[j].intersects(&guard_vars))
        .collect();
    let mut edges = BTreeSet::new();
    for i in 0..stmts.len() {
        for j in 0..stmts.len() {
            let flows = outs[j]
                .iter()
                .any(|x| ins[i].iter().any(|y| m.get(x, y) == SemiWeight::Inf));
            if flows
                || (augmentation && outs[j].intersects(&ins[i]))
                || (i != j && outs[j].intersects(&outs[i]))
            {
                edges.insert((i, j));
            }
        }
        for &j in &guard_writers {
            edges.insert((i, j));
        }
    }
    // a statement observing effects must not be duplicated: every
    // statement that transitively depends on a use-carrying statement
    // joins one component with it, so exactly one generated loop
    // replays the observations, in order
    let carriers: Vec<usize> = (0..stmts.len())
        .filter(|&k| stmts[k].contains_use())
        .collect();
    if let Some(&anchor) = carriers.first() {
        let mut observing = vec![false; stmts.len()];
        for &c in &carriers {
            observing[c] = true;
        }
        loop {
            let mut changed = false;
            for &(i, j) in &edges {
                if observing[j] && !observing[i] {
                    observing[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for k in (0..stmts.len()).filter(|&k| observing[k]) {
            if k != anchor {
                edges.insert((anchor, k));
                edges.insert((k, anchor));
            }
        }
    }
    Ok(DepGraph {
        cond: cond.clone(),
        stmts,
        edges,
    })
}

/// Strongly connected components, ordered by smallest member;
/// members ascending.
pub fn sccs(g: &DepGraph) -> Vec<Vec<usize>> {
    struct Tarjan<'a> {
        g: &'a DepGraph,
        index: usize,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        comps: Vec<Vec<usize>>,
    }

    impl Tarjan<'_> {
        fn connect(&mut self, v: usize) {
            self.idx[v] = Some(self.index);
            self.low[v] = self.index;
            self.index += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            let succs: Vec<usize> = self.g.successors(v).collect();
            for w in succs {
                if self.idx[w].is_none() {
                    self.connect(w);
                    self.low[v] = self.low[v].min(self.low[w]);
                } else if self.on_stack[w] {
                    self.low[v] = self.low[v].min(self.idx[w].unwrap());
                }
            }
            if self.low[v] == self.idx[v].unwrap() {
                let mut comp = Vec::new();
                loop {
                    let w = self.stack.pop().expect("tarjan stack underflow");
                    self.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                self.comps.push(comp);
            }
        }
    }

    let n = g.len();
    let mut t = Tarjan {
        g,
        index: 0,
        idx: vec![None; n],
        low: vec![0; n],
        stack: Vec::new(),
        on_stack: vec![false; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if t.idx[v].is_none() {
            t.connect(v);
        }
    }
    let mut comps = t.comps;
    comps.sort_by_key(|c| c[0]);
    comps
}

/// The acyclic quotient graph: vertices are component indices into the
/// ordered partition, edges those dependence edges whose endpoints lie
/// in distinct components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    pub edges: BTreeSet<(usize, usize)>,
}

pub fn condensation(g: &DepGraph, parts: &[Vec<usize>]) -> Condensation {
    let mut comp_of = vec![usize::MAX; g.len()];
    for (ci, comp) in parts.iter().enumerate() {
        for &v in comp {
            comp_of[v] = ci;
        }
    }
    let mut edges = BTreeSet::new();
    for &(i, j) in &g.edges {
        let (ci, cj) = (comp_of[i], comp_of[j]);
        if ci != cj {
            edges.insert((ci, cj));
        }
    }
    let dag = Condensation { edges };
    assert!(
        is_acyclic(parts.len(), &dag.edges),
        "condensation of a dependence graph must be acyclic"
    );
    dag
}

fn is_acyclic(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    // Kahn's algorithm: all vertices must drain
    let mut indeg = vec![0usize; n];
    for &(_, j) in edges {
        indeg[j] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &(i, j) in edges.range((v, 0)..(v + 1, 0)) {
            debug_assert_eq!(i, v);
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push(j);
            }
        }
    }
    seen == n
}

/// A family of statement-index subsets covering the whole body, each
/// closed under outgoing dependence edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Covering {
    pub subgraphs: Vec<Vec<usize>>,
}

impl Covering {
    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    /// Total statement duplication: sum of subset sizes minus body size.
    pub fn duplicated(&self, n: usize) -> usize {
        let total: usize = self.subgraphs.iter().map(|s| s.len()).sum();
        total.saturating_sub(n)
    }
}

impl fmt::Display for Covering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, sub) in self.subgraphs.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{{")?;
            for (m, v) in sub.iter().enumerate() {
                if m > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", v + 1)?;
            }
            write!(f, "}}")?;
        }
        Ok(())
    }
}

/// One subgraph per source component (in-degree zero in the
/// condensation): all statements of the components reachable from it
/// along dependence edges. The result is a saturated covering.
pub fn source_closures(parts: &[Vec<usize>], dag: &Condensation) -> Covering {
    let ncomp = parts.len();
    let mut indeg = vec![0usize; ncomp];
    for &(_, j) in &dag.edges {
        indeg[j] += 1;
    }
    let mut subgraphs = Vec::new();
    for source in 0..ncomp {
        if indeg[source] != 0 {
            continue;
        }
        let mut reached = vec![false; ncomp];
        let mut stack = vec![source];
        reached[source] = true;
        while let Some(c) = stack.pop() {
            for &(i, j) in dag.edges.range((c, 0)..(c + 1, 0)) {
                debug_assert_eq!(i, c);
                if !reached[j] {
                    reached[j] = true;
                    stack.push(j);
                }
            }
        }
        let mut stmts: Vec<usize> = (0..ncomp)
            .filter(|&c| reached[c])
            .flat_map(|c| parts[c].iter().copied())
            .collect();
        stmts.sort_unstable();
        subgraphs.push(stmts);
    }
    Covering { subgraphs }
}

/// Why a covering fails [`verify_covering`]. Positions print 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoveringViolation {
    Uncovered {
        vertex: usize,
    },
    CrossingEdge {
        edge: (usize, usize),
        subgraph: usize,
    },
}

impl fmt::Display for CoveringViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoveringViolation::Uncovered { vertex } => {
                write!(f, "vertex {} uncovered", vertex + 1)
            }
            CoveringViolation::CrossingEdge { edge, subgraph } => write!(
                f,
                "edge ({},{}) leaves subgraph {}",
                edge.0 + 1,
                edge.1 + 1,
                subgraph + 1
            ),
        }
    }
}

/// Checks both covering clauses: every vertex appears somewhere, and
/// every subgraph is closed under outgoing edges.
pub fn verify_covering(g: &DepGraph, c: &Covering) -> Result<(), CoveringViolation> {
    let mut covered = vec![false; g.len()];
    for sub in &c.subgraphs {
        for &v in sub {
            covered[v] = true;
        }
    }
    if let Some(vertex) = covered.iter().position(|&ok| !ok) {
        return Err(CoveringViolation::Uncovered { vertex });
    }
    for (k, sub) in c.subgraphs.iter().enumerate() {
        let members: BTreeSet<usize> = sub.iter().copied().collect();
        for &v in sub {
            for j in g.successors(v) {
                if !members.contains(&j) {
                    return Err(CoveringViolation::CrossingEdge {
                        edge: (v, j),
                        subgraph: k,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Merges covering subsets until the duplication ratio (duplicated
/// statements over body size) drops to `max_dup_ratio`. Each step
/// merges the pair with the largest intersection, ties resolved by
/// smallest pair of positions; the union replaces the earlier
/// position. Unions of saturated sets stay saturated.
pub fn merge_by_cost(c: Covering, g: &DepGraph, max_dup_ratio: f64) -> Covering {
    let n = g.len();
    if n == 0 {
        return c;
    }
    let mut subs = c.subgraphs;
    while subs.len() >= 2 {
        let dup: usize = subs.iter().map(|s| s.len()).sum::<usize>() - n;
        if dup as f64 / n as f64 <= max_dup_ratio {
            break;
        }
        let mut best: Option<(usize, (usize, usize))> = None;
        for i in 0..subs.len() {
            let si: BTreeSet<usize> = subs[i].iter().copied().collect();
            for (j, sj) in subs.iter().enumerate().skip(i + 1) {
                let inter = sj.iter().filter(|v| si.contains(v)).count();
                if best.map(|(b, _)| inter > b).unwrap_or(true) {
                    best = Some((inter, (i, j)));
                }
            }
        }
        let (_, (i, j)) = best.expect("at least one pair");
        let merged: BTreeSet<usize> = subs[i].iter().chain(subs[j].iter()).copied().collect();
        subs[i] = merged.into_iter().collect();
        subs.remove(j);
    }
    Covering { subgraphs: subs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FissionMode {
    Seq,
    Par,
}

/// Rebuilds a loop from a covering: one loop per subgraph with the
/// original guard and the subgraph's statements in program order.
/// Returns the combined command (`Seq` or `Parallel`, or the single
/// loop for a one-subgraph covering) and the privatized set: the
/// variables written by more than one generated loop, sorted by name.
///
/// The `Seq` form is the bare loop sequence; it preserves the
/// original semantics only when each loop runs on private copies of
/// the privatized set. [`fission_program`] inserts the save/reset
/// statements that realize this on a shared store.
pub fn rebuild(
    loop_cmd: &Command,
    c: &Covering,
    mode: FissionMode,
) -> Result<(Command, VarSet), FissionError> {
    let Command::While { cond, body } = loop_cmd else {
        return Err(FissionError::NotALoop);
    };
    let stmts: Vec<Command> = match body.as_ref() {
        Command::Seq(items) => items.clone(),
        other => vec![other.clone()],
    };
    let loops: Vec<Command> = c
        .subgraphs
        .iter()
        .map(|sub| Command::While {
            cond: cond.clone(),
            body: Box::new(Command::Seq(
                sub.iter().map(|&i| stmts[i].clone()).collect(),
            )),
        })
        .collect();
    let privatized = privatized_vars(&loops);
    let combined = match (loops.len(), mode) {
        (1, _) => loops.into_iter().next().unwrap(),
        (_, FissionMode::Seq) => Command::Seq(loops),
        (_, FissionMode::Par) => Command::Parallel(loops),
    };
    Ok((combined, privatized))
}

fn privatized_vars(loops: &[Command]) -> VarSet {
    let outs: Vec<VarSet> = loops.iter().map(out_star).collect();
    let mut all = VarSet::new();
    for o in &outs {
        all.extend_from(o);
    }
    all.iter()
        .filter(|v| outs.iter().filter(|o| o.contains(v)).count() >= 2)
        .cloned()
        .collect::<VarSet>()
        .sorted_by_name()
}

fn array_write_targets(c: &Command, out: &mut BTreeSet<VarId>) {
    match c {
        Command::ArrayAssign(t, _, _) => {
            out.insert(t.clone());
        }
        Command::If {
            then_branch,
            else_branch,
            ..
        } => {
            array_write_targets(then_branch, out);
            array_write_targets(else_branch, out);
        }
        Command::While { body, .. } => array_write_targets(body, out),
        Command::Seq(items) | Command::Parallel(items) => {
            for item in items {
                array_write_targets(item, out);
            }
        }
        Command::Assign(..) | Command::Use(_) | Command::Skip => {}
    }
}

/// The explicit form of running each generated loop from the pre-loop
/// state on a sequential store: save every privatized scalar, and
/// reset it before each writing loop after the first. A loop that
/// reads a privatized variable also writes it (its writers are in the
/// closure), so non-writing loops never touch it, and the last
/// writing loop leaves the final value, on which all writers agree.
/// Returns `None` when an array is privatized, which has no
/// in-language expression (no whole-array assignment).
fn seq_with_privatization(
    loops: &[Command],
    privatized: &VarSet,
    array_targets: &BTreeSet<VarId>,
    taken: &mut BTreeSet<VarId>,
    fresh: &mut usize,
) -> Option<Vec<Command>> {
    if privatized.iter().any(|v| array_targets.contains(v)) {
        return None;
    }
    let suffix = loop {
        let k = *fresh;
        *fresh += 1;
        let clash = privatized.iter().any(|v| {
            taken.contains(&VarId::new(&format!("{v}__pre{k}")).expect("valid temp name"))
        });
        if !clash {
            break k;
        }
    };
    let outs: Vec<VarSet> = loops.iter().map(out_star).collect();
    let temps: Vec<(VarId, VarId)> = privatized
        .iter()
        .map(|v| {
            let temp = VarId::new(&format!("{v}__pre{suffix}")).expect("valid temp name");
            taken.insert(temp.clone());
            (v.clone(), temp)
        })
        .collect();
    let mut out = Vec::new();
    for (v, temp) in &temps {
        out.push(Command::Assign(temp.clone(), Expression::Var(v.clone())));
    }
    let mut seen_writer: BTreeSet<&VarId> = BTreeSet::new();
    for (k, generated) in loops.iter().enumerate() {
        for (v, temp) in &temps {
            if !outs[k].contains(v) {
                continue;
            }
            if !seen_writer.insert(v) {
                out.push(Command::Assign(v.clone(), Expression::Var(temp.clone())));
            }
        }
        out.push(generated.clone());
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FissionOptions {
    pub mode: FissionMode,
    /// When set, covering subsets are merged until the duplication
    /// ratio drops to this bound.
    pub max_dup_ratio: Option<f64>,
    /// The write/read overlap edge rule; on by default.
    pub augmentation: bool,
}

impl Default for FissionOptions {
    fn default() -> Self {
        FissionOptions {
            mode: FissionMode::Par,
            max_dup_ratio: None,
            augmentation: true,
        }
    }
}

/// Analysis record for one loop encountered by [`fission_program`].
#[derive(Debug, Clone)]
pub struct LoopReport {
    /// Statement path in the tree at analysis time, 1-based, e.g. `3`
    /// or `3.then.2`.
    pub loc: String,
    pub graph: DepGraph,
    pub components: Vec<Vec<usize>>,
    pub condensation: Condensation,
    pub covering: Covering,
    /// Whether the loop was replaced in the output. Normally this is
    /// `covering.len() > 1`; a sequential-mode split is abandoned
    /// (flag off, covering kept) when an array would need
    /// privatization.
    pub split: bool,
    pub duplicated: usize,
    pub privatized: VarSet,
    /// The loop as analyzed (inner loops already transformed).
    pub original: Command,
    /// Generated loops, in covering order; empty when not split.
    pub rebuilt: Vec<Command>,
}

#[derive(Debug, Clone, Default)]
pub struct FissionReport {
    pub loops: Vec<LoopReport>,
}

impl FissionReport {
    pub fn split_count(&self) -> usize {
        self.loops.iter().filter(|l| l.split).count()
    }
}

struct Walk<'o> {
    opts: &'o FissionOptions,
    report: FissionReport,
    /// Every name in the program plus temps created so far, so
    /// privatization temps stay fresh.
    taken: BTreeSet<VarId>,
    fresh: usize,
}

/// Applies loop fission to every while loop of a `parallel`-free
/// program, innermost first, so a fissioned inner loop contributes
/// several sibling statements before the enclosing loop is analyzed.
/// Loops whose condensation has a single source are left untouched.
///
/// In `Par` mode only loops not enclosed by another loop become
/// `parallel` blocks; nested splits stay sequential so enclosing
/// analyses see `parallel`-free bodies. Sequential splits privatize
/// shared scalars through save/reset temporaries; a loop whose
/// covering would privatize an array is left unsplit in sequential
/// form (the parallel form handles it through branch-private state).
pub fn fission_program(
    p: &Program,
    opts: &FissionOptions,
) -> Result<(Program, FissionReport), FissionError> {
    let mut walk = Walk {
        opts,
        report: FissionReport::default(),
        taken: p.body.vars_occ().iter().cloned().collect(),
        fresh: 0,
    };
    let mut path = Vec::new();
    let body = transform(p.body.clone(), &mut path, false, &mut walk)?;
    let body = match body {
        Command::Seq(items) => Command::Seq(items),
        other => Command::Seq(vec![other]),
    };
    Ok((Program { body }, walk.report))
}

fn transform(
    cmd: Command,
    path: &mut Vec<String>,
    inside_loop: bool,
    walk: &mut Walk,
) -> Result<Command, FissionError> {
    match cmd {
        Command::Seq(items) => {
            let mut out = Vec::with_capacity(items.len());
            for (k, item) in items.into_iter().enumerate() {
                let was_loop = matches!(item, Command::While { .. });
                path.push((k + 1).to_string());
                let t = transform(item, path, inside_loop, walk)?;
                path.pop();
                match t {
                    // a split loop rebuilt sequentially becomes
                    // sibling statements of this body
                    Command::Seq(mut loops) if was_loop => out.append(&mut loops),
                    other => out.push(other),
                }
            }
            Ok(Command::Seq(out))
        }
        Command::If {
            cond,
            then_branch,
            else_branch,
        } => {
            path.push("then".to_string());
            let then_branch = transform(*then_branch, path, inside_loop, walk)?;
            path.pop();
            path.push("else".to_string());
            let else_branch = transform(*else_branch, path, inside_loop, walk)?;
            path.pop();
            Ok(Command::If {
                cond,
                then_branch: Box::new(then_branch),
                else_branch: Box::new(else_branch),
            })
        }
        Command::While { cond, body } => {
            let body = transform(*body, path, true, walk)?;
            let loop_cmd = Command::While {
                cond,
                body: Box::new(body),
            };
            split_loop(loop_cmd, path, inside_loop, walk)
        }
        other => Ok(other),
    }
}

fn split_loop(
    loop_cmd: Command,
    path: &[String],
    inside_loop: bool,
    walk: &mut Walk,
) -> Result<Command, FissionError> {
    let graph = dependence_graph_opts(&loop_cmd, walk.opts.augmentation)?;
    let components = sccs(&graph);
    let dag = condensation(&graph, &components);
    let mut covering = source_closures(&components, &dag);
    if let Err(violation) = verify_covering(&graph, &covering) {
        panic!("source closures produced an invalid covering: {violation}");
    }
    if let Some(ratio) = walk.opts.max_dup_ratio {
        covering = merge_by_cost(covering, &graph, ratio);
        if let Err(violation) = verify_covering(&graph, &covering) {
            panic!("cost merge produced an invalid covering: {violation}");
        }
    }
    let duplicated = covering.duplicated(graph.len());
    // nested splits stay sequential so the enclosing loop can still
    // be analyzed
    let mode = if inside_loop {
        FissionMode::Seq
    } else {
        walk.opts.mode
    };
    let mut split = covering.len() > 1;
    let (result, privatized, rebuilt) = if split {
        let (combined, privatized) = rebuild(&loop_cmd, &covering, mode)?;
        let loops = match &combined {
            Command::Seq(loops) | Command::Parallel(loops) => loops.clone(),
            single => vec![single.clone()],
        };
        match mode {
            FissionMode::Par => (combined, privatized, loops),
            FissionMode::Seq => {
                let mut arrays = BTreeSet::new();
                array_write_targets(&loop_cmd, &mut arrays);
                match seq_with_privatization(
                    &loops,
                    &privatized,
                    &arrays,
                    &mut walk.taken,
                    &mut walk.fresh,
                ) {
                    Some(stmts) => (Command::Seq(stmts), privatized, loops),
                    None => {
                        // a privatized array has no sequential form
                        split = false;
                        (loop_cmd.clone(), VarSet::new(), Vec::new())
                    }
                }
            }
        }
    } else {
        (loop_cmd.clone(), VarSet::new(), Vec::new())
    };
    walk.report.loops.push(LoopReport {
        loc: path.join("."),
        graph,
        components,
        condensation: dag,
        covering,
        split,
        duplicated,
        privatized,
        original: loop_cmd,
        rebuilt,
    });
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn v(name: &str) -> VarId {
        VarId::new(name).unwrap()
    }

    fn first_loop(src: &str) -> Command {
        let p = parse_program(src).unwrap();
        p.stmts()
            .iter()
            .find(|c| matches!(c, Command::While { .. }))
            .expect("program has a loop")
            .clone()
    }

    /// Edge set given 1-based statement pairs.
    fn edges1(pairs: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
        pairs.iter().map(|&(i, j)| (i - 1, j - 1)).collect()
    }

    fn parts1(parts: &[&[usize]]) -> Vec<Vec<usize>> {
        parts
            .iter()
            .map(|p| p.iter().map(|&i| i - 1).collect())
            .collect()
    }

    const RUNNING_EXAMPLE: &str = "j = 1000000
x1 = 1
i = 1
while i != j do {
  x1 = x1 + y1 + x2 + i
  y1 = y1 + i
  y2 = y2 * y1
  s[i] = x1
  x2 = x1 + s[i]
  u[i] = y2
  t[i] = y2 * y2
  i = i + 1
}
use(x1)
";

    /// Brute-force mutual-reachability partition, independent of the
    /// Tarjan implementation.
    fn scc_oracle(g: &DepGraph) -> Vec<Vec<usize>> {
        let n = g.len();
        let mut reach = vec![vec![false; n]; n];
        for &(i, j) in &g.edges {
            reach[i][j] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
                }
            }
        }
        let mut assigned = vec![false; n];
        let mut comps = Vec::new();
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let comp: Vec<usize> = (i..n)
                .filter(|&j| i == j || (reach[i][j] && reach[j][i]))
                .collect();
            for &j in &comp {
                assigned[j] = true;
            }
            comps.push(comp);
        }
        comps
    }

    #[test]
    fn running_example_graph_and_partition() {
        let loop_cmd = first_loop(RUNNING_EXAMPLE);
        let g = dependence_graph(&loop_cmd).unwrap();
        let expected = edges1(&[
            (7, 3),
            (1, 2),
            (3, 2),
            (6, 3),
            (4, 1),
            (5, 1),
            (5, 4),
            (1, 5),
            (1, 8),
            (2, 8),
            (8, 8),
        ]);
        assert!(
            g.edges.is_superset(&expected),
            "missing edges: {:?}",
            expected.difference(&g.edges).collect::<Vec<_>>()
        );
        let parts = sccs(&g);
        assert_eq!(parts, parts1(&[&[1, 4, 5], &[2], &[3], &[6], &[7], &[8]]));
        assert_eq!(parts, scc_oracle(&g));
    }

    #[test]
    fn running_example_closures_match_transformed_loops() {
        let loop_cmd = first_loop(RUNNING_EXAMPLE);
        let g = dependence_graph(&loop_cmd).unwrap();
        let parts = sccs(&g);
        let dag = condensation(&g, &parts);
        let cov = source_closures(&parts, &dag);
        assert_eq!(
            cov.subgraphs,
            parts1(&[&[1, 2, 4, 5, 8], &[2, 3, 6, 8], &[2, 3, 7, 8]])
        );
        verify_covering(&g, &cov).unwrap();
        assert_eq!(cov.duplicated(g.len()), 5);
    }

    #[test]
    fn running_example_condensation_respects_definition() {
        let loop_cmd = first_loop(RUNNING_EXAMPLE);
        let g = dependence_graph(&loop_cmd).unwrap();
        let parts = sccs(&g);
        let dag = condensation(&g, &parts);
        // recompute by definition
        let mut comp_of = vec![0usize; g.len()];
        for (ci, comp) in parts.iter().enumerate() {
            for &s in comp {
                comp_of[s] = ci;
            }
        }
        let expected: BTreeSet<(usize, usize)> = g
            .edges
            .iter()
            .filter(|(i, j)| comp_of[*i] != comp_of[*j])
            .map(|&(i, j)| (comp_of[i], comp_of[j]))
            .collect();
        assert_eq!(dag.edges, expected);
        // the arrows of the dotted-rectangle picture, as component pairs
        for pair in [(0, 1), (0, 5), (1, 5), (2, 1), (3, 2), (4, 2)] {
            assert!(
                dag.edges.contains(&pair),
                "missing condensation edge {pair:?}"
            );
        }
    }

    #[test]
    fn self_dependent_counter_has_self_loop() {
        let g = dependence_graph(&first_loop("while i != j do { i = i + 1 }")).unwrap();
        assert_eq!(g.edges, edges1(&[(1, 1)]));
    }

    #[test]
    fn kill_then_use_needs_augmentation() {
        let loop_cmd = first_loop("while i != j do { x = z + 1\nuse(x)\ni = i + 1 }");
        let with = dependence_graph_opts(&loop_cmd, true).unwrap();
        assert!(
            with.edges.contains(&(1, 0)),
            "use must depend on its producer"
        );
        let without = dependence_graph_opts(&loop_cmd, false).unwrap();
        assert!(
            !without.edges.contains(&(1, 0)),
            "the matrix alone misses the kill-then-read chain"
        );
    }

    #[test]
    fn scc_of_cycle_and_edgeless_graph() {
        let mk = |n: usize, edges: &[(usize, usize)]| DepGraph {
            cond: Expression::Lit(1),
            stmts: vec![Command::Skip; n],
            edges: edges.iter().copied().collect(),
        };
        let edgeless = mk(3, &[]);
        assert_eq!(sccs(&edgeless), vec![vec![0], vec![1], vec![2]]);
        let cycle = mk(2, &[(0, 1), (1, 0)]);
        assert_eq!(sccs(&cycle), vec![vec![0, 1]]);
        let chain = mk(3, &[(0, 1), (1, 2)]);
        let parts = sccs(&chain);
        let dag = condensation(&chain, &parts);
        assert_eq!(dag.edges, [(0, 1), (1, 2)].into_iter().collect());
        let single = condensation(&cycle, &sccs(&cycle));
        assert!(single.edges.is_empty());
    }

    #[test]
    fn covering_violations_are_reported() {
        let g = DepGraph {
            cond: Expression::Lit(1),
            stmts: vec![Command::Skip; 2],
            edges: [(0, 1), (1, 0)].into_iter().collect(),
        };
        let missing = Covering {
            subgraphs: vec![vec![0]],
        };
        assert_eq!(
            verify_covering(&g, &missing),
            Err(CoveringViolation::Uncovered { vertex: 1 })
        );
        let crossing = Covering {
            subgraphs: vec![vec![0], vec![1]],
        };
        let err = verify_covering(&g, &crossing).unwrap_err();
        assert!(matches!(err, CoveringViolation::CrossingEdge { .. }));
        assert_eq!(err.to_string(), "edge (1,2) leaves subgraph 1");
    }

    #[test]
    fn two_chains_split_around_shared_counter() {
        let g = dependence_graph(&first_loop(
            "while i != n do { a = a + i\nb = b + i\ni = i + 1 }",
        ))
        .unwrap();
        let parts = sccs(&g);
        let cov = source_closures(&parts, &condensation(&g, &parts));
        assert_eq!(cov.subgraphs, parts1(&[&[1, 3], &[2, 3]]));
        verify_covering(&g, &cov).unwrap();
    }

    #[test]
    fn single_source_keeps_one_subgraph() {
        let g = dependence_graph(&first_loop(
            "while i != n do { a = a + i\nb = b + a\ni = i + 1 }",
        ))
        .unwrap();
        let parts = sccs(&g);
        let cov = source_closures(&parts, &condensation(&g, &parts));
        assert_eq!(cov.len(), 1);
        assert_eq!(cov.subgraphs[0], vec![0, 1, 2]);
    }

    #[test]
    fn merge_by_cost_reaches_the_two_loop_cover() {
        let loop_cmd = first_loop(RUNNING_EXAMPLE);
        let g = dependence_graph(&loop_cmd).unwrap();
        let parts = sccs(&g);
        let cov = source_closures(&parts, &condensation(&g, &parts));
        let merged = merge_by_cost(cov.clone(), &g, 0.5);
        assert_eq!(
            merged.subgraphs,
            parts1(&[&[1, 2, 4, 5, 8], &[2, 3, 6, 7, 8]])
        );
        verify_covering(&g, &merged).unwrap();
        // ratio 1 leaves this covering alone (duplication 5/8)
        assert_eq!(merge_by_cost(cov.clone(), &g, 1.0), cov);
        // a single subgraph is never merged further
        let single = Covering {
            subgraphs: vec![(0..g.len()).collect()],
        };
        assert_eq!(merge_by_cost(single.clone(), &g, 0.0), single);
    }

    #[test]
    fn rebuild_produces_covering_loops_and_privatized_set() {
        let loop_cmd = first_loop(RUNNING_EXAMPLE);
        let g = dependence_graph(&loop_cmd).unwrap();
        let parts = sccs(&g);
        let cov = source_closures(&parts, &condensation(&g, &parts));
        let (par, privatized) = rebuild(&loop_cmd, &cov, FissionMode::Par).unwrap();
        let Command::Parallel(branches) = &par else {
            panic!("expected parallel");
        };
        assert_eq!(branches.len(), 3);
        let names: Vec<String> = privatized.iter().map(|v| v.to_string()).collect();
        assert_eq!(names, ["i", "y1", "y2"]);
        // statements of each branch keep original order
        let Command::While { body, .. } = &branches[0] else {
            panic!()
        };
        let Command::Seq(items) = body.as_ref() else {
            panic!()
        };
        assert_eq!(items.len(), 5);
        assert!(matches!(&items[0], Command::Assign(x, _) if x == &v("x1")));
        assert!(matches!(&items[4], Command::Assign(x, _) if x == &v("i")));

        // trivial covering reproduces the loop unchanged
        let whole = Covering {
            subgraphs: vec![(0..g.len()).collect()],
        };
        let (same, none) = rebuild(&loop_cmd, &whole, FissionMode::Par).unwrap();
        assert_eq!(same, loop_cmd);
        assert!(none.is_empty());

        // the merged two-loop cover privatizes i and y1 only
        let merged = merge_by_cost(cov, &g, 0.5);
        let (_, priv2) = rebuild(&loop_cmd, &merged, FissionMode::Par).unwrap();
        let names2: Vec<String> = priv2.iter().map(|v| v.to_string()).collect();
        assert_eq!(names2, ["i", "y1"]);
    }

    #[test]
    fn fission_program_splits_only_loops_with_multiple_sources() {
        let p = parse_program(RUNNING_EXAMPLE).unwrap();
        let (out, report) = fission_program(&p, &FissionOptions::default()).unwrap();
        assert_eq!(report.loops.len(), 1);
        assert!(report.loops[0].split);
        assert_eq!(report.loops[0].loc, "4");
        assert_eq!(out.stmts().len(), 5);
        assert!(matches!(&out.stmts()[3], Command::Parallel(b) if b.len() == 3));

        let flat = parse_program("x = 1\ny = x + 2").unwrap();
        let (same, rep) = fission_program(&flat, &FissionOptions::default()).unwrap();
        assert_eq!(same, flat);
        assert!(rep.loops.is_empty());
    }

    #[test]
    fn seq_mode_splices_generated_loops_into_the_body() {
        let p = parse_program(RUNNING_EXAMPLE).unwrap();
        let opts = FissionOptions {
            mode: FissionMode::Seq,
            ..FissionOptions::default()
        };
        let (out, report) = fission_program(&p, &opts).unwrap();
        // 3 prologue statements, 3 saves of {i, y1, y2}, 3 loops with
        // resets before each later writer (i and y1 before the second
        // loop, all three before the third), trailing use
        assert_eq!(out.stmts().len(), 15);
        let loops: Vec<usize> = out
            .stmts()
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Command::While { .. }))
            .map(|(k, _)| k)
            .collect();
        assert_eq!(loops, vec![6, 9, 13]);
        assert!(matches!(
            &out.stmts()[3],
            Command::Assign(t, Expression::Var(v2)) if t.as_str() == "i__pre0" && v2 == &v("i")
        ));
        assert!(matches!(
            &out.stmts()[7],
            Command::Assign(t, Expression::Var(v2)) if t == &v("i") && v2.as_str() == "i__pre0"
        ));
        assert_eq!(report.loops[0].rebuilt.len(), 3);
    }

    #[test]
    fn seq_mode_leaves_array_privatizing_loops_unsplit() {
        // the shared array write lands in both closures, which has no
        // sequential save/reset form
        let src = "i = 0
while i != 4 do {
  s[i] = i
  a = a + s[i]
  b = b - s[i]
  i = i + 1
}
";
        let p = parse_program(src).unwrap();
        let seq_opts = FissionOptions {
            mode: FissionMode::Seq,
            ..FissionOptions::default()
        };
        let (seq_out, seq_rep) = fission_program(&p, &seq_opts).unwrap();
        assert_eq!(seq_out, p, "seq mode must fall back to the original loop");
        assert!(!seq_rep.loops[0].split);
        assert_eq!(seq_rep.loops[0].covering.len(), 2);
        // par mode still splits: branch-private state covers arrays
        let (par_out, par_rep) = fission_program(&p, &FissionOptions::default()).unwrap();
        assert!(par_rep.loops[0].split);
        assert!(par_out.body.contains_parallel());
        let names: Vec<String> = par_rep.loops[0]
            .privatized
            .iter()
            .map(|v| v.to_string())
            .collect();
        assert_eq!(names, ["i", "s"]);
    }

    #[test]
    fn nested_split_loops_stay_sequential_in_par_mode() {
        let src = "t = 0
while t != 2 do {
  p = 0
  while p != 3 do {
    a = a + p
    b = b + p
    p = p + 1
  }
  t = t + 1
}
";
        let p = parse_program(src).unwrap();
        let (out, report) = fission_program(&p, &FissionOptions::default()).unwrap();
        assert!(!out.body.contains_parallel());
        let inner = report.loops.iter().find(|l| l.loc == "2.2").unwrap();
        assert!(inner.split);
        // the outer body holds the save, the two inner loops with a
        // reset between them, and the original statements
        let Command::While { body, .. } = &out.stmts()[1] else {
            panic!()
        };
        let Command::Seq(items) = body.as_ref() else {
            panic!()
        };
        assert_eq!(items.len(), 6);
        assert_eq!(
            items
                .iter()
                .filter(|c| matches!(c, Command::While { .. }))
                .count(),
            2
        );
    }
}
