use jetlab_cli::{run, SCHEMA};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")
}

fn prob(name: &str) -> String {
    problems().join(name).to_string_lossy().into_owned()
}

fn jetlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_jetlab"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .env_remove("JETLAB_SEED")
        .output()
        .expect("binary runs")
}

#[test]
fn documented_invocations() {
    let kdv = prob("kdv.prob");
    let out = jetlab(&[
        "check-symmetry",
        "--problem",
        &kdv,
        "--characteristic",
        "eta_uxx",
        "--mode",
        "nonclassical",
        "--order",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    let out = jetlab(&["split-eps", "--problem", &kdv, "--characteristic", "eta_uxx", "--order", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let eq1 = text.lines().find(|l| l.starts_with("eps^1:")).expect("eps^1 line");
    assert!(eq1.contains("3*u2^2*eta1[5]"), "{eq1}");
    assert!(eq1.contains("4*u1*u3*eta1[5]"), "{eq1}");
    assert!(text.contains("prolongation of eta0 on rhs1: -u5"));

    let out = jetlab(&["verify-solution", "--problem", &kdv, "--solution", "example1", "--order", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn exit_codes() {
    let t = prob("transport.prob");
    let pass = jetlab(&["check-symmetry", "--problem", &t, "--characteristic", "eta_uxx", "--mode", "nonclassical"]);
    assert_eq!(pass.status.code(), Some(0));
    let fail = jetlab(&["check-symmetry", "--problem", &t, "--characteristic", "eta_uxx", "--mode", "classical"]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("witness"));

    let missing = jetlab(&["check-symmetry", "--problem", "no/such.prob", "--characteristic", "x"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(missing.stdout.is_empty());
    assert!(!missing.stderr.is_empty());
    let unknown = jetlab(&["check-symmetry", "--problem", &t, "--characteristic", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
    let bad_mode = jetlab(&["check-symmetry", "--problem", &t, "--characteristic", "eta_uxx", "--mode", "lie"]);
    assert_eq!(bad_mode.status.code(), Some(2));
    let bad_flag = jetlab(&["frobnicate"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let dir = std::env::temp_dir().join(format!("jetlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let off_domain = dir.join("off_domain.prob");
    std::fs::write(&off_domain, "[pde]\nname = t\nrhs0 = u1\n[solution s]\nu0 = sqrt(-1 - x^2)\n").unwrap();
    let out = jetlab(&["verify-solution", "--problem", off_domain.to_str().unwrap(), "--solution", "s"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));

    let syntax = dir.join("syntax.prob");
    std::fs::write(&syntax, "[pde]\nname = t\nrhs0 = u*(u1\n").unwrap();
    let out = jetlab(&["check-symmetry", "--problem", syntax.to_str().unwrap(), "--characteristic", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn json_report_shape() {
    let out = run(["--json", "verify-invariance", "--problem", &prob("example2.prob"), "--solution", "example2"]);
    assert_eq!(out.code, 0);
    let v: Value = serde_json::from_str(&out.stdout).expect("valid JSON");
    assert_eq!(v["schema"], SCHEMA);
    assert_eq!(v["tool"], "jetlab");
    assert_eq!(v["command"], "verify-invariance");
    assert_eq!(v["problem"], "kdv");
    assert_eq!(v["seed"], 42);
    assert_eq!(v["verdict"], "PASS");
    assert!(v.get("timing_ms").is_none());
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks[0]["children"].as_array().unwrap().len(), 2);

    let timed = run(["--json", "--timing", "selfcheck", "--cases", "2"]);
    let v: Value = serde_json::from_str(&timed.stdout).unwrap();
    assert!(v["timing_ms"].is_number());
}

#[test]
fn reports_are_deterministic() {
    let args = ["--json", "verify-solution", "--problem", &prob("example3.prob"), "--solution", "example3"];
    let a = run(args);
    let b = run(args);
    assert_eq!(a.stdout, b.stdout);
    let reseeded = run([
        "--json",
        "--seed",
        "7",
        "verify-solution",
        "--problem",
        &prob("example3.prob"),
        "--solution",
        "example3",
    ]);
    let v: Value = serde_json::from_str(&reseeded.stdout).unwrap();
    assert_eq!(v["seed"], 7);
}

#[test]
fn policy_flags_reach_the_checks() {
    let p = prob("kdv.prob");
    let loose =
        run(["--json", "--samples", "30", "verify-solution", "--problem", &p, "--solution", "example1_printed"]);
    let v: Value = serde_json::from_str(&loose.stdout).unwrap();
    assert_eq!(loose.code, 1);
    assert_eq!(v["verdict"], "FAIL");
    let huge_tol = run(["--tol", "1", "verify-solution", "--problem", &p, "--solution", "example1_printed"]);
    assert_eq!(huge_tol.code, 0, "{}", huge_tol.stdout);
}

#[test]
fn scan_flags() {
    let p = prob("example3.prob");
    let out = run([
        "--json",
        "scan-residual",
        "--problem",
        &p,
        "--solution",
        "example3",
        "--eps",
        "0.1,0.01,0.001",
        "--grid",
        "t=1..2; x=-1..0; n=5",
    ]);
    assert_eq!(out.code, 0, "{}{}", out.stdout, out.stderr);
    let v: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["details"]["rows"].as_array().unwrap().len(), 3);
    assert!(v["details"]["slope"].as_f64().unwrap() >= 1.9);
    let narrow = run(["scan-residual", "--problem", &p, "--solution", "example3", "--eps", "0.1,0.05"]);
    assert_eq!(narrow.code, 2);
}

/// Reports are compared as pretty-printed text without the path-dependent
/// argument list. Set JETLAB_BLESS=1 to rewrite the stored files.
fn golden(file: &str, args: &[&str]) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = run(full);
    let mut v: Value = serde_json::from_str(&out.stdout).expect("valid JSON");
    v.as_object_mut().unwrap().remove("args");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(file);
    let text = serde_json::to_string_pretty(&v).unwrap() + "\n";
    if std::env::var_os("JETLAB_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let stored = std::fs::read_to_string(&path).expect("golden file");
    assert!(text == stored, "report for {file} changed:\n{text}");
}

#[test]
fn golden_example1() {
    let p = prob("kdv.prob");
    golden("example1_solution.json", &["verify-solution", "--problem", &p, "--solution", "example1", "--order", "1"]);
    golden("example1_reduce.json", &["reduce", "--problem", &p, "--ansatz", "example1"]);
}

#[test]
fn golden_example2() {
    let p = prob("example2.prob");
    golden("example2_solution.json", &["verify-solution", "--problem", &p, "--solution", "example2"]);
    golden("example2_invariance.json", &["verify-invariance", "--problem", &p, "--solution", "example2"]);
}

#[test]
fn golden_example3() {
    let p = prob("example3.prob");
    golden("example3_solution.json", &["verify-solution", "--problem", &p, "--solution", "example3"]);
    golden("example3_invariance.json", &["verify-invariance", "--problem", &p, "--solution", "example3"]);
}
