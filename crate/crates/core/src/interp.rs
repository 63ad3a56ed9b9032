//! Reference interpreter: big-step evaluation with 64-bit wrapping
//! arithmetic, an iteration fuel budget, effect logging for `use`,
//! and the differential checker that compares a program against its
//! fissioned forms.

use crate::ast::{BinOp, Command, Expression, Program, UnOp, VarId};
use crate::fission::{fission_program, out_star, FissionMode, FissionOptions, LoopReport};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Value = i64;

/// Interpreter store. A name is either a scalar or an array within
/// one run; both default to 0. Arrays are sparse maps over signed
/// indices, negative indices are runtime errors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct State {
    pub scalars: BTreeMap<VarId, Value>,
    pub arrays: BTreeMap<VarId, BTreeMap<Value, Value>>,
}

impl State {
    pub fn new() -> State {
        State::default()
    }

    pub fn set_scalar(&mut self, v: VarId, value: Value) {
        self.scalars.insert(v, value);
    }

    pub fn set_array_elem(&mut self, v: VarId, index: Value, value: Value) {
        self.arrays.entry(v).or_default().insert(index, value);
    }

    fn scalar(&self, v: &VarId) -> Result<Value, String> {
        if self.arrays.contains_key(v) {
            return Err(format!("variable `{v}` is an array, read as a scalar"));
        }
        Ok(self.scalars.get(v).copied().unwrap_or(0))
    }

    fn array_elem(&self, v: &VarId, index: Value) -> Result<Value, String> {
        if self.scalars.contains_key(v) {
            return Err(format!("variable `{v}` is a scalar, read as an array"));
        }
        if index < 0 {
            return Err(format!("negative index {index} into array `{v}`"));
        }
        Ok(self
            .arrays
            .get(v)
            .and_then(|m| m.get(&index))
            .copied()
            .unwrap_or(0))
    }

    /// Rendered value of one variable, zero entries elided.
    pub fn render_var(&self, v: &VarId) -> String {
        if let Some(map) = self.arrays.get(v) {
            let cells: Vec<String> = map
                .iter()
                .filter(|(_, &val)| val != 0)
                .map(|(k, val)| format!("{k}:{val}"))
                .collect();
            format!("{{{}}}", cells.join(", "))
        } else {
            self.scalars.get(v).copied().unwrap_or(0).to_string()
        }
    }

    /// `name = value` lines sorted by name, zero values elided.
    pub fn render_lines(&self) -> Vec<String> {
        let mut names: BTreeSet<&VarId> = self.scalars.keys().collect();
        names.extend(self.arrays.keys());
        let mut out = Vec::new();
        for name in names {
            if let Some(map) = self.arrays.get(name) {
                for (k, val) in map {
                    if *val != 0 {
                        out.push(format!("{name}[{k}] = {val}"));
                    }
                }
            } else {
                let val = self.scalars[name];
                if val != 0 {
                    out.push(format!("{name} = {val}"));
                }
            }
        }
        out
    }
}

/// True when `var` holds the same value in both states, treating
/// missing entries and explicit zeros alike.
pub fn state_var_eq(a: &State, b: &State, var: &VarId) -> bool {
    let norm_array = |s: &State| -> Option<BTreeMap<Value, Value>> {
        s.arrays.get(var).map(|m| {
            m.iter()
                .filter(|(_, &v)| v != 0)
                .map(|(&k, &v)| (k, v))
                .collect()
        })
    };
    match (norm_array(a), norm_array(b)) {
        (Some(x), Some(y)) => x == y,
        (None, None) => {
            a.scalars.get(var).copied().unwrap_or(0) == b.scalars.get(var).copied().unwrap_or(0)
        }
        (Some(x), None) => x.is_empty() && b.scalars.get(var).copied().unwrap_or(0) == 0,
        (None, Some(y)) => y.is_empty() && a.scalars.get(var).copied().unwrap_or(0) == 0,
    }
}

/// One executed `use`: argument names with their observed values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UseEvent {
    pub args: Vec<(VarId, Value)>,
}

impl fmt::Display for UseEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "use(")?;
        for (k, (name, value)) in self.args.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        write!(f, ")")
    }
}

/// Ordered record of `use` observations; append-only, execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EffectLog {
    pub events: Vec<UseEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    FuelExhausted,
    RuntimeError(String),
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Completed => f.write_str("completed"),
            RunStatus::FuelExhausted => f.write_str("fuel-exhausted"),
            RunStatus::RuntimeError(detail) => write!(f, "runtime-error: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub state: State,
    pub log: EffectLog,
    pub status: RunStatus,
}

enum Halt {
    Fuel,
    Error(String),
}

/// Observer called with every command before it executes.
type Hook<'h> = &'h mut (dyn FnMut(&Command, &State) + 'h);

struct Cx<'h> {
    fuel: u64,
    log: EffectLog,
    written: BTreeSet<VarId>,
    hook: Option<Hook<'h>>,
}

fn eval(e: &Expression, st: &State) -> Result<Value, String> {
    match e {
        Expression::Lit(n) => Ok(*n),
        Expression::Var(v) => st.scalar(v),
        Expression::Index(t, idx) => {
            let i = eval(idx, st)?;
            st.array_elem(t, i)
        }
        Expression::Unary(op, inner) => {
            let v = eval(inner, st)?;
            Ok(match op {
                UnOp::Neg => v.wrapping_neg(),
                UnOp::Not => (v == 0) as i64,
            })
        }
        Expression::Binary(op, l, r) => {
            // && and || short-circuit like C
            match op {
                BinOp::And => {
                    return Ok(if eval(l, st)? == 0 {
                        0
                    } else {
                        (eval(r, st)? != 0) as i64
                    });
                }
                BinOp::Or => {
                    return Ok(if eval(l, st)? != 0 {
                        1
                    } else {
                        (eval(r, st)? != 0) as i64
                    });
                }
                _ => {}
            }
            let a = eval(l, st)?;
            let b = eval(r, st)?;
            Ok(match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                BinOp::Div => {
                    if b == 0 {
                        return Err("division by zero".to_string());
                    }
                    a.wrapping_div(b)
                }
                BinOp::Rem => {
                    if b == 0 {
                        return Err("modulo by zero".to_string());
                    }
                    a.wrapping_rem(b)
                }
                BinOp::Eq => (a == b) as i64,
                BinOp::Ne => (a != b) as i64,
                BinOp::Lt => (a < b) as i64,
                BinOp::Le => (a <= b) as i64,
                BinOp::Gt => (a > b) as i64,
                BinOp::Ge => (a >= b) as i64,
                BinOp::And | BinOp::Or => unreachable!("short-circuited above"),
            })
        }
    }
}

fn use_value(st: &State, v: &VarId) -> Value {
    // arrays observed through a deterministic fold over nonzero entries
    if let Some(map) = st.arrays.get(v) {
        let mut h: i64 = 0;
        for (k, val) in map {
            if *val != 0 {
                h = h.wrapping_mul(31).wrapping_add(*k);
                h = h.wrapping_mul(31).wrapping_add(*val);
            }
        }
        h
    } else {
        st.scalars.get(v).copied().unwrap_or(0)
    }
}

fn run_cmd(cmd: &Command, st: &mut State, cx: &mut Cx) -> Result<(), Halt> {
    if let Some(hook) = cx.hook.as_mut() {
        hook(cmd, st);
    }
    match cmd {
        Command::Skip => Ok(()),
        Command::Assign(x, e) => {
            if st.arrays.contains_key(x) {
                return Err(Halt::Error(format!(
                    "variable `{x}` is an array, assigned as a scalar"
                )));
            }
            let v = eval(e, st).map_err(Halt::Error)?;
            st.set_scalar(x.clone(), v);
            cx.written.insert(x.clone());
            Ok(())
        }
        Command::ArrayAssign(t, idx, rhs) => {
            if st.scalars.contains_key(t) {
                return Err(Halt::Error(format!(
                    "variable `{t}` is a scalar, assigned as an array"
                )));
            }
            let i = eval(idx, st).map_err(Halt::Error)?;
            if i < 0 {
                return Err(Halt::Error(format!("negative index {i} into array `{t}`")));
            }
            let v = eval(rhs, st).map_err(Halt::Error)?;
            st.set_array_elem(t.clone(), i, v);
            cx.written.insert(t.clone());
            Ok(())
        }
        Command::If {
            cond,
            then_branch,
            else_branch,
        } => {
            if eval(cond, st).map_err(Halt::Error)? != 0 {
                run_cmd(then_branch, st, cx)
            } else {
                run_cmd(else_branch, st, cx)
            }
        }
        Command::While { cond, body } => {
            while eval(cond, st).map_err(Halt::Error)? != 0 {
                if cx.fuel == 0 {
                    return Err(Halt::Fuel);
                }
                cx.fuel -= 1;
                run_cmd(body, st, cx)?;
            }
            Ok(())
        }
        Command::Use(args) => {
            let values = args.iter().map(|a| (a.clone(), use_value(st, a))).collect();
            cx.log.events.push(UseEvent { args: values });
            Ok(())
        }
        Command::Seq(items) => {
            for item in items {
                run_cmd(item, st, cx)?;
            }
            Ok(())
        }
        Command::Parallel(branches) => {
            // each branch runs on a private copy of the pre-state;
            // writes merge afterwards and must agree across writers
            let pre = st.clone();
            let parent_written = std::mem::take(&mut cx.written);
            let mut runs: Vec<(State, BTreeSet<VarId>)> = Vec::with_capacity(branches.len());
            for branch in branches {
                let mut branch_state = pre.clone();
                cx.written = BTreeSet::new();
                let r = run_cmd(branch, &mut branch_state, cx);
                let written = std::mem::take(&mut cx.written);
                match r {
                    Ok(()) => runs.push((branch_state, written)),
                    Err(halt) => {
                        cx.written = parent_written;
                        return Err(halt);
                    }
                }
            }
            cx.written = parent_written;
            let mut merged: BTreeSet<VarId> = BTreeSet::new();
            for (branch_state, written) in &runs {
                for var in written {
                    if !merged.insert(var.clone()) {
                        // another branch already wrote it: values must agree
                        if !state_var_eq(st, branch_state, var) {
                            return Err(Halt::Error(format!(
                                "parallel-race: variable `{var}` differs across branches ({} vs {})",
                                st.render_var(var),
                                branch_state.render_var(var)
                            )));
                        }
                        continue;
                    }
                    if let Some(map) = branch_state.arrays.get(var) {
                        if st.scalars.contains_key(var) {
                            return Err(Halt::Error(format!(
                                "parallel-race: variable `{var}` used as scalar and array"
                            )));
                        }
                        st.arrays.insert(var.clone(), map.clone());
                    } else {
                        if st.arrays.contains_key(var) {
                            return Err(Halt::Error(format!(
                                "parallel-race: variable `{var}` used as scalar and array"
                            )));
                        }
                        st.scalars.insert(var.clone(), branch_state.scalars[var]);
                    }
                    cx.written.insert(var.clone());
                }
            }
            Ok(())
        }
    }
}

fn run<'h>(cmd: &Command, init: State, fuel: u64, hook: Option<Hook<'h>>) -> RunResult {
    let mut st = init;
    let mut cx = Cx {
        fuel,
        log: EffectLog::default(),
        written: BTreeSet::new(),
        hook,
    };
    let status = match run_cmd(cmd, &mut st, &mut cx) {
        Ok(()) => RunStatus::Completed,
        Err(Halt::Fuel) => RunStatus::FuelExhausted,
        Err(Halt::Error(detail)) => RunStatus::RuntimeError(detail),
    };
    RunResult {
        state: st,
        log: cx.log,
        status,
    }
}

/// Executes a command from `init` with an iteration budget: each loop
/// iteration consumes one unit of fuel.
pub fn exec(cmd: &Command, init: State, fuel: u64) -> RunResult {
    run(cmd, init, fuel, None)
}

/// Like [`exec`], calling `hook` with every command before it runs.
pub fn exec_with_hook(
    cmd: &Command,
    init: State,
    fuel: u64,
    hook: &mut dyn FnMut(&Command, &State),
) -> RunResult {
    run(cmd, init, fuel, Some(hook))
}

/// Differential verdict; a failure carries the first mismatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok(DiffStats),
    Fail(DiffFailure),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffStats {
    pub loops_analyzed: usize,
    pub loops_split: usize,
    pub per_loop_checks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffFailure {
    /// `state`, `effects`, `per-loop` or `run`.
    pub kind: &'static str,
    pub variable: Option<String>,
    /// Index into the split loops involved, if any.
    pub loop_index: Option<usize>,
    pub expected: Option<String>,
    pub actual: Option<String>,
    pub message: String,
}

impl fmt::Display for DiffFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

fn run_failure(which: &str, status: &RunStatus) -> Verdict {
    Verdict::Fail(DiffFailure {
        kind: "run",
        variable: None,
        loop_index: None,
        expected: None,
        actual: None,
        message: format!("{which} run did not complete: {status}"),
    })
}

/// Checks of agreement between a generated loop and the loop it came
/// from, capped per split so loops revisited inside an outer loop do
/// not rerun the comparison unboundedly.
const PER_LOOP_CHECK_CAP: usize = 4;

/// Runs `p` as written and under fission in both sequential and
/// parallel modes from the same initial state, and checks that
/// (i) the final value of every variable occurring in `p` agrees
/// across the three runs, (ii) the effect logs agree, and (iii) each
/// generated loop, run alone from the state in force when the split
/// group is reached, reproduces the original loop's final values for
/// every variable it writes.
pub fn differential_check(
    p: &Program,
    max_dup_ratio: Option<f64>,
    init: &State,
    fuel: u64,
) -> Verdict {
    let seq_opts = FissionOptions {
        mode: FissionMode::Seq,
        max_dup_ratio,
        augmentation: true,
    };
    let par_opts = FissionOptions {
        mode: FissionMode::Par,
        ..seq_opts
    };
    let (seq_p, report) = match fission_program(p, &seq_opts) {
        Ok(r) => r,
        Err(e) => {
            return Verdict::Fail(DiffFailure {
                kind: "run",
                variable: None,
                loop_index: None,
                expected: None,
                actual: None,
                message: format!("fission failed: {e}"),
            });
        }
    };
    let (par_p, _) = fission_program(p, &par_opts).expect("fission succeeded in seq mode");

    let orig = exec(&p.body, init.clone(), fuel);
    if !orig.status.is_completed() {
        return run_failure("original", &orig.status);
    }

    let splits: Vec<&LoopReport> = report.loops.iter().filter(|l| l.split).collect();
    let mut check_counts = vec![0usize; splits.len()];
    let mut per_loop_failure: Option<DiffFailure> = None;
    let mut per_loop_checks = 0usize;

    let mut hook = |cmd: &Command, st: &State| {
        if per_loop_failure.is_some() || !matches!(cmd, Command::While { .. }) {
            return;
        }
        for (si, split) in splits.iter().enumerate() {
            if check_counts[si] >= PER_LOOP_CHECK_CAP || &split.rebuilt[0] != cmd {
                continue;
            }
            check_counts[si] += 1;
            per_loop_checks += 1;
            let whole = exec(&split.original, st.clone(), fuel);
            if !whole.status.is_completed() {
                per_loop_failure = Some(DiffFailure {
                    kind: "per-loop",
                    variable: None,
                    loop_index: Some(si),
                    expected: None,
                    actual: None,
                    message: format!("original loop did not complete: {}", whole.status),
                });
                return;
            }
            for (li, generated) in split.rebuilt.iter().enumerate() {
                let alone = exec(generated, st.clone(), fuel);
                if !alone.status.is_completed() {
                    per_loop_failure = Some(DiffFailure {
                        kind: "per-loop",
                        variable: None,
                        loop_index: Some(si),
                        expected: None,
                        actual: None,
                        message: format!(
                            "generated loop {} did not complete: {}",
                            li + 1,
                            alone.status
                        ),
                    });
                    return;
                }
                for var in out_star(generated).iter() {
                    if var.is_effect() {
                        continue;
                    }
                    if !state_var_eq(&whole.state, &alone.state, var) {
                        per_loop_failure = Some(DiffFailure {
                            kind: "per-loop",
                            variable: Some(var.to_string()),
                            loop_index: Some(si),
                            expected: Some(whole.state.render_var(var)),
                            actual: Some(alone.state.render_var(var)),
                            message: format!(
                                "loop {} disagrees with its source loop on `{var}`",
                                li + 1
                            ),
                        });
                        return;
                    }
                }
            }
        }
    };
    let seq_run = exec_with_hook(&seq_p.body, init.clone(), fuel, &mut hook);
    if let Some(failure) = per_loop_failure {
        return Verdict::Fail(failure);
    }
    if !seq_run.status.is_completed() {
        return run_failure("sequential transformed", &seq_run.status);
    }
    let par_run = exec(&par_p.body, init.clone(), fuel);
    if !par_run.status.is_completed() {
        return run_failure("parallel transformed", &par_run.status);
    }

    for (tag, transformed) in [("seq", &seq_run), ("par", &par_run)] {
        for var in p.body.vars_occ().iter() {
            if !state_var_eq(&orig.state, &transformed.state, var) {
                return Verdict::Fail(DiffFailure {
                    kind: "state",
                    variable: Some(var.to_string()),
                    loop_index: None,
                    expected: Some(orig.state.render_var(var)),
                    actual: Some(transformed.state.render_var(var)),
                    message: format!("`{var}` differs between original and {tag} run"),
                });
            }
        }
        if orig.log != transformed.log {
            let idx = orig
                .log
                .events
                .iter()
                .zip(&transformed.log.events)
                .position(|(a, b)| a != b)
                .unwrap_or_else(|| orig.log.events.len().min(transformed.log.events.len()));
            return Verdict::Fail(DiffFailure {
                kind: "effects",
                variable: None,
                loop_index: None,
                expected: orig.log.events.get(idx).map(|e| e.to_string()),
                actual: transformed.log.events.get(idx).map(|e| e.to_string()),
                message: format!("effect logs diverge at event {idx} in the {tag} run"),
            });
        }
    }

    Verdict::Ok(DiffStats {
        loops_analyzed: report.loops.len(),
        loops_split: splits.len(),
        per_loop_checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn v(name: &str) -> VarId {
        VarId::new(name).unwrap()
    }

    fn run_src(src: &str) -> RunResult {
        let p = parse_program(src).unwrap();
        exec(&p.body, State::new(), 1_000_000)
    }

    #[test]
    fn skip_leaves_state_untouched() {
        let r = run_src("skip");
        assert_eq!(r.status, RunStatus::Completed);
        assert!(r.state.scalars.is_empty() && r.state.arrays.is_empty());
        assert!(r.log.events.is_empty());
    }

    #[test]
    fn loop_counts_and_arrays_fill() {
        let r = run_src("i = 0\nwhile i != 5 do { s[i] = i * 2; i = i + 1 }");
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.state.scalars[&v("i")], 5);
        assert_eq!(r.state.arrays[&v("s")][&4], 8);
    }

    #[test]
    fn division_and_modulo_by_zero_fail() {
        let r = run_src("x = 1 / y");
        assert!(matches!(r.status, RunStatus::RuntimeError(ref d) if d.contains("division")));
        let r = run_src("x = 1 % y");
        assert!(matches!(r.status, RunStatus::RuntimeError(ref d) if d.contains("modulo")));
    }

    #[test]
    fn negative_array_index_fails() {
        let r = run_src("t[0 - 1] = 2");
        assert!(matches!(r.status, RunStatus::RuntimeError(ref d) if d.contains("negative")));
    }

    #[test]
    fn scalar_array_kind_conflict_fails() {
        let r = run_src("x = 1\nx[0] = 2");
        assert!(matches!(r.status, RunStatus::RuntimeError(_)));
        let r = run_src("t[0] = 1\ny = t");
        assert!(matches!(r.status, RunStatus::RuntimeError(_)));
    }

    #[test]
    fn fuel_exhaustion_is_reported() {
        let p = parse_program("while 1 == 1 do { x = x + 1 }").unwrap();
        let r = exec(&p.body, State::new(), 10);
        assert_eq!(r.status, RunStatus::FuelExhausted);
        assert_eq!(r.state.scalars[&v("x")], 10);
    }

    #[test]
    fn arithmetic_wraps_deterministically() {
        let r = run_src("x = 9223372036854775807\nx = x + 1");
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.state.scalars[&v("x")], i64::MIN);
    }

    #[test]
    fn short_circuit_guards_division() {
        let r = run_src("d = 0\nif d != 0 && 10 / d > 1 then { x = 1 } else { x = 2 }");
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.state.scalars[&v("x")], 2);
    }

    #[test]
    fn use_logs_values_in_order() {
        let r = run_src("x = 3\nuse(x)\nx = 4\nuse(x, y)");
        assert_eq!(r.log.events.len(), 2);
        assert_eq!(r.log.events[0].args, vec![(v("x"), 3)]);
        assert_eq!(r.log.events[1].args, vec![(v("x"), 4), (v("y"), 0)]);
        assert_eq!(r.log.events[1].to_string(), "use(x=4, y=0)");
    }

    #[test]
    fn parallel_merges_agreeing_writes() {
        let src = "i = 0\nparallel {\n  i = i + 1\n} {\n  i = i + 1\n}";
        let p = crate::parser::parse_program_with_parallel(src).unwrap();
        let r = exec(&p.body, State::new(), 100);
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.state.scalars[&v("i")], 1);
    }

    #[test]
    fn parallel_disagreeing_writes_race() {
        let src = "parallel {\n  x = 1\n} {\n  x = 2\n}";
        let p = crate::parser::parse_program_with_parallel(src).unwrap();
        let r = exec(&p.body, State::new(), 100);
        assert!(
            matches!(r.status, RunStatus::RuntimeError(ref d) if d.contains("parallel-race")),
            "got {:?}",
            r.status
        );
    }

    #[test]
    fn parallel_branches_see_the_pre_state() {
        // the second branch reads x as it was before the block
        let src = "x = 5\nparallel {\n  x = 7\n} {\n  y = x + 1\n}";
        let p = crate::parser::parse_program_with_parallel(src).unwrap();
        let r = exec(&p.body, State::new(), 100);
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.state.scalars[&v("x")], 7);
        assert_eq!(r.state.scalars[&v("y")], 6);
    }

    #[test]
    fn parallel_effect_logs_concatenate_in_branch_order() {
        let src = "a = 1\nb = 2\nparallel {\n  use(a)\n  c = 1\n} {\n  d = b\n}";
        let p = crate::parser::parse_program_with_parallel(src).unwrap();
        let r = exec(&p.body, State::new(), 100);
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.log.events.len(), 1);
        assert_eq!(r.log.events[0].args, vec![(v("a"), 1)]);
    }

    const SMALL_RUNNING_EXAMPLE: &str = "j = 10
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

    #[test]
    fn differential_check_passes_on_the_running_example() {
        let p = parse_program(SMALL_RUNNING_EXAMPLE).unwrap();
        let verdict = differential_check(&p, None, &State::new(), 1_000_000);
        let Verdict::Ok(stats) = verdict else {
            panic!("differential check failed: {verdict:?}");
        };
        assert_eq!(stats.loops_analyzed, 1);
        assert_eq!(stats.loops_split, 1);
        assert!(stats.per_loop_checks >= 1);
    }

    #[test]
    fn differential_check_passes_with_cost_merge() {
        let p = parse_program(SMALL_RUNNING_EXAMPLE).unwrap();
        let verdict = differential_check(&p, Some(0.5), &State::new(), 1_000_000);
        assert!(verdict.is_ok(), "{verdict:?}");
    }

    #[test]
    fn unsplit_program_is_trivially_ok() {
        let p =
            parse_program("i = 0\nwhile i != 4 do { a = a + i\nb = b + a\ni = i + 1 }").unwrap();
        let verdict = differential_check(&p, None, &State::new(), 10_000);
        let Verdict::Ok(stats) = verdict else {
            panic!("{verdict:?}");
        };
        assert_eq!(stats.loops_split, 0);
    }

    #[test]
    fn transformed_runs_agree_from_nonzero_initial_states() {
        let p = parse_program(SMALL_RUNNING_EXAMPLE).unwrap();
        let mut init = State::new();
        init.set_scalar(v("y1"), 3);
        init.set_scalar(v("y2"), -2);
        init.set_array_elem(v("s"), 2, 11);
        let verdict = differential_check(&p, None, &init, 1_000_000);
        assert!(verdict.is_ok(), "{verdict:?}");
    }

    #[test]
    fn render_lines_are_sorted_and_sparse() {
        let r = run_src("b = 2\na = 0\nt[3] = 7\nt[1] = 0");
        assert_eq!(r.state.render_lines(), vec!["b = 2", "t[3] = 7"]);
    }
}
