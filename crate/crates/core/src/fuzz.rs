//! Deterministic random program generation for differential testing.
//!
//! Generated loops always terminate: each gets a fresh counter
//! starting at zero, a `counter != bound` guard, and exactly one
//! unconditional `counter = counter + 1` in its body; nothing else
//! writes the counter or the bound. Array indices are built from
//! counters and nonnegative literals under `+` and `*`, so they stay
//! nonnegative, and division only ever has a nonzero literal divisor.

use crate::ast::{BinOp, Command, Expression, Program, UnOp, VarId};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Upper bound on statements per loop body.
    pub max_stmts: usize,
    /// Loop nesting depth.
    pub max_depth: usize,
    /// Scalar pool size.
    pub num_vars: usize,
    /// Array pool size.
    pub num_arrays: usize,
    /// Upper bound on iterations of any single loop.
    pub max_iterations: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_stmts: 8,
            max_depth: 2,
            num_vars: 5,
            num_arrays: 2,
            max_iterations: 6,
        }
    }
}

struct Gen<'c> {
    rng: ChaCha8Rng,
    cfg: &'c GenConfig,
    scalars: Vec<VarId>,
    arrays: Vec<VarId>,
    /// Active loop counters, readable anywhere.
    counters: Vec<VarId>,
    /// Active counters and bounds, never written by generated code.
    reserved: Vec<VarId>,
    fresh: usize,
}

/// Negative values print through unary minus, so the generated tree
/// matches what parsing its own text produces.
fn lit(n: i64) -> Expression {
    if n < 0 {
        Expression::Unary(UnOp::Neg, Box::new(Expression::Lit(-n)))
    } else {
        Expression::Lit(n)
    }
}

/// Generates the same program for the same seed and configuration.
pub fn random_program(seed: u64, cfg: &GenConfig) -> Program {
    let scalars = (0..cfg.num_vars.max(1))
        .map(|k| VarId::new(&format!("v{k}")).unwrap())
        .collect();
    let arrays = (0..cfg.num_arrays)
        .map(|k| VarId::new(&format!("t{k}")).unwrap())
        .collect();
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg,
        scalars,
        arrays,
        counters: Vec::new(),
        reserved: Vec::new(),
        fresh: 0,
    };
    let mut stmts = Vec::new();
    for _ in 0..g.rng.gen_range(1..=3) {
        stmts.push(g.plain_assign());
    }
    for _ in 0..g.rng.gen_range(1..=3) {
        let depth = g.rng.gen_range(1..=g.cfg.max_depth.max(1));
        stmts.extend(g.gen_loop(depth));
    }
    if g.rng.gen_bool(0.7) {
        stmts.push(g.gen_use());
    }
    Program::new(stmts)
}

impl Gen<'_> {
    fn pick_scalar(&mut self) -> VarId {
        self.scalars[self.rng.gen_range(0..self.scalars.len())].clone()
    }

    /// Scalars cluster in two halves so independent chains show up
    /// often enough for interesting splits.
    fn pick_near(&mut self, target: &VarId) -> VarId {
        let half = (self.scalars.len() / 2).max(1);
        let ti = self.scalars.iter().position(|v| v == target).unwrap_or(0);
        let from_cluster = self.rng.gen_bool(0.8);
        let range = if (ti < half) == from_cluster {
            0..half
        } else {
            half.min(self.scalars.len() - 1)..self.scalars.len()
        };
        self.scalars[self.rng.gen_range(range)].clone()
    }

    fn writable_scalar(&mut self) -> VarId {
        loop {
            let v = self.pick_scalar();
            if !self.reserved.contains(&v) {
                return v;
            }
        }
    }

    fn plain_assign(&mut self) -> Command {
        let target = self.writable_scalar();
        let rhs = self.gen_expr(2, &target);
        Command::Assign(target, rhs)
    }

    fn gen_use(&mut self) -> Command {
        let mut args = vec![self.pick_scalar()];
        if self.rng.gen_bool(0.3) {
            let second = self.pick_scalar();
            if second != args[0] {
                args.push(second);
            }
        }
        Command::Use(args)
    }

    fn gen_index(&mut self) -> Expression {
        let lit = |g: &mut Self| Expression::Lit(g.rng.gen_range(0..=g.cfg.max_iterations));
        match (self.counters.is_empty(), self.rng.gen_range(0..4)) {
            (false, 0) | (false, 1) => {
                Expression::Var(self.counters[self.rng.gen_range(0..self.counters.len())].clone())
            }
            (false, 2) => {
                let c = self.counters[self.rng.gen_range(0..self.counters.len())].clone();
                Expression::Binary(
                    BinOp::Add,
                    Box::new(Expression::Var(c)),
                    Box::new(lit(self)),
                )
            }
            _ => lit(self),
        }
    }

    fn gen_expr(&mut self, depth: usize, target: &VarId) -> Expression {
        if depth == 0 || self.rng.gen_bool(0.35) {
            return match self.rng.gen_range(0..5) {
                0 => lit(self.rng.gen_range(-8..=8)),
                1 if !self.counters.is_empty() => Expression::Var(
                    self.counters[self.rng.gen_range(0..self.counters.len())].clone(),
                ),
                2 if !self.arrays.is_empty() => {
                    let t = self.arrays[self.rng.gen_range(0..self.arrays.len())].clone();
                    Expression::Index(t, Box::new(self.gen_index()))
                }
                _ => Expression::Var(self.pick_near(target)),
            };
        }
        match self.rng.gen_range(0..8) {
            0 => Expression::Unary(UnOp::Neg, Box::new(self.gen_expr(depth - 1, target))),
            1 => Expression::Binary(
                BinOp::Div,
                Box::new(self.gen_expr(depth - 1, target)),
                Box::new(Expression::Lit(self.rng.gen_range(2..=6))),
            ),
            2 => Expression::Binary(
                BinOp::Rem,
                Box::new(self.gen_expr(depth - 1, target)),
                Box::new(Expression::Lit(self.rng.gen_range(2..=6))),
            ),
            3 | 4 => Expression::Binary(
                BinOp::Add,
                Box::new(self.gen_expr(depth - 1, target)),
                Box::new(self.gen_expr(depth - 1, target)),
            ),
            5 => Expression::Binary(
                BinOp::Sub,
                Box::new(self.gen_expr(depth - 1, target)),
                Box::new(self.gen_expr(depth - 1, target)),
            ),
            _ => Expression::Binary(
                BinOp::Mul,
                Box::new(self.gen_expr(depth - 1, target)),
                Box::new(self.gen_expr(depth - 1, target)),
            ),
        }
    }

    fn gen_cond(&mut self) -> Expression {
        let lhs = self.pick_scalar();
        let op = match self.rng.gen_range(0..4) {
            0 => BinOp::Lt,
            1 => BinOp::Le,
            2 => BinOp::Gt,
            _ => BinOp::Ne,
        };
        Expression::Binary(
            op,
            Box::new(Expression::Var(lhs)),
            Box::new(lit(self.rng.gen_range(-4..=4))),
        )
    }

    fn gen_if(&mut self) -> Command {
        let cond = self.gen_cond();
        let then_branch = Command::Seq(
            (0..self.rng.gen_range(1..=2))
                .map(|_| self.simple_stmt())
                .collect(),
        );
        let else_branch = if self.rng.gen_bool(0.5) {
            Command::Seq(vec![self.simple_stmt()])
        } else {
            Command::Skip
        };
        Command::If {
            cond,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        }
    }

    fn array_write(&mut self) -> Command {
        let t = self.arrays[self.rng.gen_range(0..self.arrays.len())].clone();
        let idx = self.gen_index();
        let seed = self.pick_scalar();
        let rhs = self.gen_expr(1, &seed);
        Command::ArrayAssign(t, idx, rhs)
    }

    fn simple_stmt(&mut self) -> Command {
        if !self.arrays.is_empty() && self.rng.gen_bool(0.3) {
            self.array_write()
        } else {
            self.plain_assign()
        }
    }

    fn gen_stmt(&mut self, depth: usize) -> Vec<Command> {
        match self.rng.gen_range(0..10) {
            0..=3 => vec![self.plain_assign()],
            4..=5 if !self.arrays.is_empty() => vec![self.array_write()],
            6 => vec![self.gen_if()],
            7 => vec![self.gen_use()],
            8 if depth > 1 => self.gen_loop(depth - 1),
            _ => vec![self.plain_assign()],
        }
    }

    /// A terminating loop: bound assignment (sometimes), counter
    /// reset, and the while command.
    fn gen_loop(&mut self, depth: usize) -> Vec<Command> {
        let counter = VarId::new(&format!("i{}", self.fresh)).unwrap();
        let bound_var = VarId::new(&format!("n{}", self.fresh)).unwrap();
        self.fresh += 1;
        let iterations = self.rng.gen_range(1..=self.cfg.max_iterations);
        let mut prologue = Vec::new();
        let bound = if self.rng.gen_bool(0.5) {
            prologue.push(Command::Assign(
                bound_var.clone(),
                Expression::Lit(iterations),
            ));
            self.reserved.push(bound_var.clone());
            Expression::Var(bound_var.clone())
        } else {
            Expression::Lit(iterations)
        };
        prologue.push(Command::Assign(counter.clone(), Expression::Lit(0)));
        self.reserved.push(counter.clone());
        self.counters.push(counter.clone());

        let mut body = Vec::new();
        for _ in 0..self.rng.gen_range(1..self.cfg.max_stmts.max(2)) {
            body.extend(self.gen_stmt(depth));
        }
        let update = Command::Assign(
            counter.clone(),
            Expression::Binary(
                BinOp::Add,
                Box::new(Expression::Var(counter.clone())),
                Box::new(Expression::Lit(1)),
            ),
        );
        let at = self.rng.gen_range(0..=body.len());
        body.insert(at, update);

        self.counters.pop();
        self.reserved.retain(|v| v != &counter && v != &bound_var);

        let guard = Expression::Binary(
            BinOp::Ne,
            Box::new(Expression::Var(counter)),
            Box::new(bound),
        );
        prologue.push(Command::While {
            cond: guard,
            body: Box::new(Command::Seq(body)),
        });
        prologue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{exec, RunStatus, State};
    use crate::parser::{parse_program, pretty_print};

    #[test]
    fn same_seed_same_program() {
        let cfg = GenConfig::default();
        for seed in 0..20 {
            let a = random_program(seed, &cfg);
            let b = random_program(seed, &cfg);
            assert_eq!(a, b);
            assert_eq!(pretty_print(&a), pretty_print(&b));
        }
    }

    #[test]
    fn generated_programs_parse_back_and_roundtrip() {
        let cfg = GenConfig::default();
        for seed in 0..50 {
            let p = random_program(seed, &cfg);
            let printed = pretty_print(&p);
            let back = parse_program(&printed)
                .unwrap_or_else(|e| panic!("seed {seed} did not reparse: {e}\n{printed}"));
            assert_eq!(back, p, "seed {seed} changed shape across print/parse");
        }
    }

    #[test]
    fn generated_programs_terminate_within_fuel() {
        let cfg = GenConfig {
            max_stmts: 6,
            max_depth: 3,
            max_iterations: 8,
            ..GenConfig::default()
        };
        // depth 3 at 8 iterations each needs at most 8 + 8^2 + k*8^3 fuel
        for seed in 0..50 {
            let p = random_program(seed, &cfg);
            let r = exec(&p.body, State::new(), 1_000_000);
            assert!(
                matches!(r.status, RunStatus::Completed),
                "seed {seed}: {:?}",
                r.status
            );
        }
    }

    #[test]
    fn generated_programs_are_parallel_free() {
        let cfg = GenConfig::default();
        for seed in 0..50 {
            assert!(!random_program(seed, &cfg).body.contains_parallel());
        }
    }
}
