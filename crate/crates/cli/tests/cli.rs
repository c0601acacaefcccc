use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(name),
    )
    .unwrap()
}

fn landau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landau"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dump_matches_golden_files() {
    let cases: &[(&str, &[&str], &str)] = &[
        ("kepler.landau", &["--actions"], "kepler.actions"),
        ("spacecraft.landau", &["--actions"], "spacecraft.actions"),
        ("discard.landau", &["--actions"], "discard.actions"),
        ("kepler.landau", &["--diff"], "kepler.diff"),
        (
            "migration.landau",
            &["--actions", "-D", "N=4", "-D", "k=2"],
            "migration_n4_k2.actions",
        ),
        (
            "migration.landau",
            &["--plan", "-D", "N=4", "-D", "k=2"],
            "migration_n4_k2.plan",
        ),
    ];
    for (src, flags, gold) in cases {
        let file = corpus(src);
        let mut args = vec!["dump", path_str(&file)];
        args.extend_from_slice(flags);
        let o = landau(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(stdout(&o), golden(gold), "{gold}");
    }
}

#[test]
fn build_emits_c_and_lir() {
    let file = corpus("kepler.landau");
    let o = landau(&["build", path_str(&file)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("void kepler(double *ret, double E, double e)"));
    let o = landau(&["build", path_str(&file), "--emit", "lir"]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).contains("for "));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.c");
    let o = landau(&["build", path_str(&file), "-o", path_str(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("#include <math.h>"));
}

#[test]
fn run_prints_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in.json");
    std::fs::write(&inputs, r#"{"E": 0.5, "e": 0.1}"#).unwrap();
    let file = corpus("kepler.landau");
    let o = landau(&["run", path_str(&file), "--inputs", path_str(&inputs)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row: Vec<f64> = v["kepler"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(row.len(), 3);
    assert!((row[0] - (0.5 - 0.1 * 0.5f64.sin())).abs() < 1e-15);
    assert!((row[1] - (1.0 - 0.1 * 0.5f64.cos())).abs() < 1e-15);
    assert!((row[2] + 0.5f64.sin()).abs() < 1e-15);
}

#[test]
fn run_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = corpus("kepler.landau");
    let missing = dir.path().join("absent.json");
    let o = landau(&["run", path_str(&file), "--inputs", path_str(&missing)]);
    assert_eq!(code(&o), 2);

    let partial = dir.path().join("partial.json");
    std::fs::write(&partial, r#"{"E": 0.5}"#).unwrap();
    let o = landau(&["run", path_str(&file), "--inputs", path_str(&partial)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`e`"), "{}", stderr(&o));

    let o = landau(&["build", path_str(&dir.path().join("nope.landau"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not found"));

    let o = landau(&["stats", path_str(&file), "-D", "N"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn check_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let file = corpus("spacecraft.landau");
    let o = landau(&[
        "check",
        path_str(&file),
        "--points",
        "3",
        "--report",
        path_str(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(
        stdout(&o).ends_with("checked 126 entries at 3 points, 0 failed\n"),
        "{}",
        stdout(&o)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("point,cell,param,ad,fd,relerr,pass\n"));
    assert_eq!(text.lines().count(), 127);
}

#[test]
fn check_failure_exits_3() {
    let file = corpus("kepler.landau");
    let o = landau(&[
        "check",
        path_str(&file),
        "--tol",
        "0",
        "--step",
        "0.1",
        "--points",
        "2",
    ]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("FAIL"));
    assert!(stderr(&o).contains("exceed tolerance"));
}

#[test]
fn check_rejects_bad_step() {
    let file = corpus("kepler.landau");
    let o = landau(&["check", path_str(&file), "--step", "0", "--points", "1"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("invalid finite-difference step"));
}

#[test]
fn stats_reports_migration_density() {
    let file = corpus("migration.landau");
    let o = landau(&["stats", path_str(&file), "-D", "N=100", "-D", "k=10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("p_dot ' p0"))
        .unwrap()
        .to_string();
    assert!(line.contains("1000") && line.contains("10000"), "{line}");
}

#[test]
fn dump_without_selector_is_an_input_error() {
    let file = corpus("kepler.landau");
    let o = landau(&["dump", path_str(&file)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compile_errors_exit_1_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.landau");
    std::fs::write(
        &f,
        "#lang landau\nreal f(real x) {\n  if (x > 0) {\n    f = x\n  }\n}\n",
    )
    .unwrap();
    let o = landau(&["build", path_str(&f)]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(
        err.contains("bad.landau:3:") && err.contains("real in condition"),
        "{err}"
    );
}
