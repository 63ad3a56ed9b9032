//! `whilec`: analyze, transform, run, check, and emit WHILE-language
//! programs.
//!
//! Exit codes: 0 success, 1 a differential verdict failed, 2 usage or
//! parse errors, 3 runtime errors (interpreter failures, missing
//! hints, I/O).

use clap::{Parser, Subcommand, ValueEnum};
use fission_core::ast::{Program, VarId};
use fission_core::dfg::dfg_of;
use fission_core::emit::{dot_condensation, dot_dependence, emit_c, EmitOptions, Strategy};
use fission_core::fission::{fission_program, FissionMode, FissionOptions, FissionReport};
use fission_core::fuzz::{random_program, GenConfig};
use fission_core::interp::{differential_check, exec, State, Verdict};
use fission_core::parser::{parse_program, parse_program_with_parallel, pretty_print};
use rayon::prelude::*;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VERDICT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "whilec",
    version,
    about = "Loop fission for WHILE programs: analyze, split, run, check, emit C"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Seq,
    Par,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Sections,
    SingleNowait,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the canonical form of a program.
    Fmt {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print data-flow matrices for each top-level statement and the
    /// whole program; optionally write per-loop DOT graphs.
    Analyze {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
        /// Directory for dependence/condensation DOT files.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Split loops and print (or write) the transformed program.
    Fission {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Par)]
        mode: ModeArg,
        /// Merge covering subsets until duplication/body-size drops
        /// to this ratio.
        #[arg(long)]
        max_dup_ratio: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Directory for dependence/condensation DOT files.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Print a per-loop analysis summary to stderr.
        #[arg(long)]
        report: bool,
    },
    /// Interpret a program and print the final state and effect log.
    Run {
        input: PathBuf,
        /// Initial bindings, `x=3` or `t[0]=5`; repeatable.
        #[arg(long = "init")]
        init: Vec<String>,
        #[arg(long, default_value_t = 10_000_000)]
        fuel: u64,
    },
    /// Differential check: original vs fissioned (both modes).
    Diff {
        input: PathBuf,
        #[arg(long)]
        max_dup_ratio: Option<f64>,
        #[arg(long = "init")]
        init: Vec<String>,
        #[arg(long, default_value_t = 10_000_000)]
        fuel: u64,
        #[arg(long)]
        json: bool,
    },
    /// Differential checks over generated programs.
    Fuzz {
        /// Inclusive seed range `A..B`; default from FISSION_SEED or
        /// `0..99`.
        #[arg(long)]
        seeds: Option<String>,
        /// Directory for failing programs.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 12)]
        max_stmts: usize,
        #[arg(long, default_value_t = 3)]
        max_depth: usize,
        #[arg(long, default_value_t = 8)]
        max_iterations: i64,
        #[arg(long, default_value_t = 5)]
        vars: usize,
        #[arg(long, default_value_t = 2)]
        arrays: usize,
        #[arg(long, default_value_t = 10_000_000)]
        fuel: u64,
        #[arg(long)]
        max_dup_ratio: Option<f64>,
    },
    /// Translate a program to self-contained C99 with OpenMP pragmas.
    EmitC {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Sections)]
        strategy: StrategyArg,
        /// Array extent, `name=extent`; repeatable.
        #[arg(long = "array")]
        arrays: Vec<String>,
        #[arg(long, default_value = "int64_t")]
        scalar_type: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn usage_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn runtime_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

fn read_source(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| runtime_error(format!("cannot read {}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, CliError> {
    let src = read_source(path)?;
    parse_program(&src).map_err(|e| usage_error(format!("{}:{e}", path.display())))
}

fn load_program_with_parallel(path: &Path) -> Result<Program, CliError> {
    let src = read_source(path)?;
    parse_program_with_parallel(&src).map_err(|e| usage_error(format!("{}:{e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| runtime_error(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_inits(specs: &[String]) -> Result<State, CliError> {
    let mut state = State::new();
    for spec in specs {
        let (lhs, rhs) = spec
            .split_once('=')
            .ok_or_else(|| usage_error(format!("bad --init `{spec}`, expected name=value")))?;
        let value: i64 = rhs
            .trim()
            .parse()
            .map_err(|_| usage_error(format!("bad --init value in `{spec}`")))?;
        let lhs = lhs.trim();
        if let Some((name, idx)) = lhs.split_once('[') {
            let idx = idx
                .strip_suffix(']')
                .and_then(|s| s.parse::<i64>().ok())
                .ok_or_else(|| usage_error(format!("bad --init index in `{spec}`")))?;
            if idx < 0 {
                return Err(usage_error(format!("negative --init index in `{spec}`")));
            }
            let var = VarId::new(name)
                .map_err(|e| usage_error(format!("bad --init name in `{spec}`: {e}")))?;
            state.set_array_elem(var, idx, value);
        } else {
            let var = VarId::new(lhs)
                .map_err(|e| usage_error(format!("bad --init name in `{spec}`: {e}")))?;
            state.set_scalar(var, value);
        }
    }
    Ok(state)
}

fn write_dot_files(dir: &Path, report: &FissionReport) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| runtime_error(format!("cannot create {}: {e}", dir.display())))?;
    for (k, lp) in report.loops.iter().enumerate() {
        let base = format!("loop{}_{}", k + 1, lp.loc.replace('.', "_"));
        let dep = dot_dependence(&lp.graph, &lp.components);
        let cond = dot_condensation(&lp.components, &lp.condensation);
        std::fs::write(dir.join(format!("{base}.dot")), dep)
            .map_err(|e| runtime_error(format!("cannot write DOT: {e}")))?;
        std::fs::write(dir.join(format!("{base}_condensation.dot")), cond)
            .map_err(|e| runtime_error(format!("cannot write DOT: {e}")))?;
    }
    Ok(())
}

fn print_report(report: &FissionReport) {
    for lp in &report.loops {
        let parts: Vec<String> = lp
            .components
            .iter()
            .map(|c| {
                let m: Vec<String> = c.iter().map(|v| (v + 1).to_string()).collect();
                format!("{{{}}}", m.join(","))
            })
            .collect();
        eprintln!(
            "loop @{}: {} statements, sccs {}, covering {}, split={}, duplicated={}, privatized={}",
            lp.loc,
            lp.graph.len(),
            parts.join(" "),
            lp.covering,
            lp.split,
            lp.duplicated,
            lp.privatized
        );
    }
}

fn fission_opts(mode: ModeArg, max_dup_ratio: Option<f64>) -> FissionOptions {
    FissionOptions {
        mode: match mode {
            ModeArg::Seq => FissionMode::Seq,
            ModeArg::Par => FissionMode::Par,
        },
        max_dup_ratio,
        augmentation: true,
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, CliError> {
    match cmd {
        Cmd::Fmt { input, output } => {
            let p = load_program_with_parallel(&input)?;
            write_output(output.as_deref(), &pretty_print(&p))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Analyze { input, format, dot } => {
            let p = load_program(&input)?;
            let mut out = String::new();
            let render = |c: &fission_core::ast::Command| -> Result<String, CliError> {
                let m = dfg_of(c).map_err(|e| runtime_error(e.to_string()))?;
                Ok(match format {
                    FormatArg::Table => m.to_table(),
                    FormatArg::Csv => m.to_csv(),
                })
            };
            for (k, stmt) in p.stmts().iter().enumerate() {
                out.push_str(&format!("# statement {}\n", k + 1));
                out.push_str(&render(stmt)?);
                out.push('\n');
            }
            out.push_str("# program\n");
            out.push_str(&render(&p.body)?);
            print!("{out}");
            if let Some(dir) = dot {
                let (_, report) = fission_program(&p, &FissionOptions::default())
                    .map_err(|e| runtime_error(e.to_string()))?;
                write_dot_files(&dir, &report)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Fission {
            input,
            mode,
            max_dup_ratio,
            output,
            dot,
            report,
        } => {
            let p = load_program(&input)?;
            let opts = fission_opts(mode, max_dup_ratio);
            let (transformed, rep) =
                fission_program(&p, &opts).map_err(|e| runtime_error(e.to_string()))?;
            if report {
                print_report(&rep);
            }
            if let Some(dir) = dot {
                write_dot_files(&dir, &rep)?;
            }
            write_output(output.as_deref(), &pretty_print(&transformed))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run { input, init, fuel } => {
            let p = load_program_with_parallel(&input)?;
            let init = parse_inits(&init)?;
            let r = exec(&p.body, init, fuel);
            for line in r.state.render_lines() {
                println!("{line}");
            }
            if !r.log.events.is_empty() {
                println!("-- effects --");
                for event in &r.log.events {
                    println!("{event}");
                }
            }
            if !r.status.is_completed() {
                eprintln!("error: {}", r.status);
                return Ok(ExitCode::from(EXIT_RUNTIME));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Diff {
            input,
            max_dup_ratio,
            init,
            fuel,
            json,
        } => {
            let p = load_program(&input)?;
            let init = parse_inits(&init)?;
            let verdict = differential_check(&p, max_dup_ratio, &init, fuel);
            print_verdict(&verdict, json);
            Ok(if verdict.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERDICT)
            })
        }
        Cmd::Fuzz {
            seeds,
            out,
            json,
            max_stmts,
            max_depth,
            max_iterations,
            vars,
            arrays,
            fuel,
            max_dup_ratio,
        } => {
            let range = seed_range(seeds.as_deref())?;
            let cfg = GenConfig {
                max_stmts,
                max_depth,
                num_vars: vars,
                num_arrays: arrays,
                max_iterations,
            };
            let results: Vec<(u64, Verdict)> = range
                .clone()
                .into_par_iter()
                .map(|seed| {
                    let p = random_program(seed, &cfg);
                    (
                        seed,
                        differential_check(&p, max_dup_ratio, &State::new(), fuel),
                    )
                })
                .collect();
            let failures: Vec<&(u64, Verdict)> =
                results.iter().filter(|(_, v)| !v.is_ok()).collect();
            if let Some(dir) = &out {
                if !failures.is_empty() {
                    std::fs::create_dir_all(dir).map_err(|e| {
                        runtime_error(format!("cannot create {}: {e}", dir.display()))
                    })?;
                    for (seed, _) in &failures {
                        let p = random_program(*seed, &cfg);
                        std::fs::write(dir.join(format!("seed_{seed}.whl")), pretty_print(&p))
                            .map_err(|e| runtime_error(format!("cannot write program: {e}")))?;
                    }
                }
            }
            if json {
                let fail_json: Vec<_> = failures
                    .iter()
                    .map(|(seed, v)| {
                        let mut obj = verdict_json(v);
                        obj["seed"] = json!(seed);
                        obj
                    })
                    .collect();
                println!(
                    "{}",
                    json!({
                        "seeds": [range.start(), range.end()],
                        "checked": results.len(),
                        "ok": results.len() - failures.len(),
                        "failures": fail_json,
                    })
                );
            } else {
                println!(
                    "checked {} seeds ({}..{}), {} ok, {} failing",
                    results.len(),
                    range.start(),
                    range.end(),
                    results.len() - failures.len(),
                    failures.len()
                );
                for (seed, v) in &failures {
                    if let Verdict::Fail(f) = v {
                        println!("seed {seed}: {f}");
                    }
                }
            }
            Ok(if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERDICT)
            })
        }
        Cmd::EmitC {
            input,
            strategy,
            arrays,
            scalar_type,
            output,
        } => {
            let p = load_program_with_parallel(&input)?;
            let mut opts = EmitOptions {
                strategy: match strategy {
                    StrategyArg::Sections => Strategy::Sections,
                    StrategyArg::SingleNowait => Strategy::SingleNowait,
                },
                scalar_type,
                ..EmitOptions::default()
            };
            for spec in &arrays {
                let (name, extent) = spec.split_once('=').ok_or_else(|| {
                    usage_error(format!("bad --array `{spec}`, expected name=extent"))
                })?;
                let extent: i64 = extent
                    .trim()
                    .parse()
                    .map_err(|_| usage_error(format!("bad --array extent in `{spec}`")))?;
                let var = VarId::new(name.trim())
                    .map_err(|e| usage_error(format!("bad --array name in `{spec}`: {e}")))?;
                opts.array_extents.insert(var, extent);
            }
            let c = emit_c(&p, &opts).map_err(|e| runtime_error(e.to_string()))?;
            write_output(output.as_deref(), &c)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn seed_range(arg: Option<&str>) -> Result<std::ops::RangeInclusive<u64>, CliError> {
    let spec = match arg {
        Some(s) => s.to_string(),
        None => std::env::var("FISSION_SEED").unwrap_or_else(|_| "0..99".to_string()),
    };
    parse_seed_range(&spec).ok_or_else(|| {
        usage_error(format!(
            "bad seed range `{spec}`, expected N or A..B (inclusive)"
        ))
    })
}

fn parse_seed_range(spec: &str) -> Option<std::ops::RangeInclusive<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().ok()?;
        let b: u64 = b.trim().parse().ok()?;
        (a <= b).then_some(a..=b)
    } else {
        let n: u64 = spec.trim().parse().ok()?;
        Some(n..=n)
    }
}

fn verdict_json(v: &Verdict) -> serde_json::Value {
    match v {
        Verdict::Ok(stats) => json!({
            "verdict": "ok",
            "loops": stats.loops_analyzed,
            "splits": stats.loops_split,
            "per_loop_checks": stats.per_loop_checks,
        }),
        Verdict::Fail(f) => json!({
            "verdict": "mismatch",
            "kind": f.kind,
            "variable": f.variable,
            "loop_index": f.loop_index,
            "expected": f.expected,
            "actual": f.actual,
            "message": f.message,
        }),
    }
}

fn print_verdict(v: &Verdict, as_json: bool) {
    if as_json {
        println!("{}", verdict_json(v));
        return;
    }
    match v {
        Verdict::Ok(stats) => {
            println!("verdict: ok");
            println!(
                "loops analyzed: {}, split: {}, per-loop checks: {}",
                stats.loops_analyzed, stats.loops_split, stats.per_loop_checks
            );
        }
        Verdict::Fail(f) => {
            println!("verdict: mismatch");
            println!("kind: {}", f.kind);
            if let Some(var) = &f.variable {
                println!("variable: {var}");
            }
            if let Some(expected) = &f.expected {
                println!("expected: {expected}");
            }
            if let Some(actual) = &f.actual {
                println!("actual: {actual}");
            }
            println!("detail: {}", f.message);
        }
    }
}
