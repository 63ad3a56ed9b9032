//! End-to-end checks of the `whilec` binary: exit codes, golden
//! output, and format stability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn whilec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whilec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn corpus(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn fission_output_matches_the_golden_file() {
    let out = whilec(&["fission", &corpus("fig4.whl"), "--mode=par"]);
    assert!(out.status.success());
    let golden = std::fs::read_to_string(corpus("golden/fig4_fission_par.whl")).unwrap();
    assert_eq!(stdout(&out), golden);
}

#[test]
fn cost_merged_fission_matches_its_golden_file() {
    let out = whilec(&[
        "fission",
        &corpus("appendix_c.whl"),
        "--mode=par",
        "--max-dup-ratio=0.5",
    ]);
    assert!(out.status.success());
    let golden = std::fs::read_to_string(corpus("golden/appendix_c_fission_par.whl")).unwrap();
    assert_eq!(stdout(&out), golden);
}

#[test]
fn fmt_is_idempotent_on_its_own_output() {
    let once = whilec(&["fmt", &corpus("3mm_while.whl")]);
    assert!(once.status.success());
    let dir = tempfile::tempdir().unwrap();
    let formatted: PathBuf = dir.path().join("canonical.whl");
    std::fs::write(&formatted, stdout(&once)).unwrap();
    let twice = whilec(&["fmt", formatted.to_str().unwrap()]);
    assert!(twice.status.success());
    assert_eq!(stdout(&once), stdout(&twice));
}

#[test]
fn run_prints_sorted_state_and_effects() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("p.whl");
    std::fs::write(&prog, "b = a + 2\ns[1] = b * 2\nuse(b)\n").unwrap();
    let out = whilec(&["run", prog.to_str().unwrap(), "--init", "a=3"]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "a = 3\nb = 5\ns[1] = 10\n-- effects --\nuse(b=5)\n"
    );
}

#[test]
fn diff_reports_ok_with_exit_zero() {
    let out = whilec(&["diff", &corpus("fig4_small.whl")]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("verdict: ok"));
    let json = whilec(&["diff", &corpus("fig4_small.whl"), "--json"]);
    assert!(json.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(value["verdict"], "ok");
    assert_eq!(value["splits"], 1);
}

#[test]
fn fuzz_range_passes_with_exit_zero() {
    let out = whilec(&["fuzz", "--seeds", "0..19", "--json"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["checked"], 20);
    assert_eq!(value["ok"], 20);
}

#[test]
fn fission_seed_env_sets_the_default_range() {
    let out = Command::new(env!("CARGO_BIN_EXE_whilec"))
        .args(["fuzz", "--json"])
        .env("FISSION_SEED", "5..9")
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["seeds"], serde_json::json!([5, 9]));
    assert_eq!(value["checked"], 5);
}

#[test]
fn parse_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.whl");
    std::fs::write(&bad, "x = ?\n").unwrap();
    let out = whilec(&["fmt", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = whilec(&["run", dir.path().join("absent.whl").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn run_reports_runtime_errors_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("p.whl");
    std::fs::write(&prog, "x = 1 / y\n").unwrap();
    let out = whilec(&["run", prog.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn analyze_emits_matrices_and_dot_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = whilec(&[
        "analyze",
        &corpus("fig1.whl"),
        "--format=csv",
        "--dot",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# statement 1"));
    assert!(text.contains("# program"));
    assert!(text.contains(",x,y,z"));
    assert!(text.contains("x,inf,0,0"));

    let dotdir = tempfile::tempdir().unwrap();
    let out = whilec(&[
        "fission",
        &corpus("fig4.whl"),
        "--dot",
        dotdir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let dep = std::fs::read_to_string(dotdir.path().join("loop1_4.dot")).unwrap();
    assert!(dep.contains("label=\"{1,4,5}\";"));
    assert!(std::fs::metadata(dotdir.path().join("loop1_4_condensation.dot")).is_ok());
}

#[test]
fn emit_c_is_deterministic_and_needs_extents() {
    let args = [
        "emit-c",
        &corpus("fig4_small.whl"),
        "--array",
        "s=16",
        "--array",
        "u=16",
        "--array",
        "t=16",
    ];
    let a = whilec(&args);
    let b = whilec(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("int main(void)"));

    let missing = whilec(&["emit-c", &corpus("fig4_small.whl")]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn emit_c_accepts_fission_output_with_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let split = dir.path().join("split.whl");
    let out = whilec(&[
        "fission",
        &corpus("fig4_small.whl"),
        "--mode=par",
        "-o",
        split.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let c = whilec(&[
        "emit-c",
        split.to_str().unwrap(),
        "--array",
        "s=16",
        "--array",
        "u=16",
        "--array",
        "t=16",
    ]);
    assert!(c.status.success());
    assert!(stdout(&c).contains("#pragma omp parallel sections"));
}

#[test]
fn fission_rejects_parallel_input() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("par.whl");
    std::fs::write(&prog, "parallel {\n  x = 1\n} {\n  y = 2\n}\n").unwrap();
    let out = whilec(&["fission", prog.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
