use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn blyap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blyap"))
        .args(args)
        .output()
        .expect("binary runs")
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
fn validate_reports_cycle() {
    let ex = fixture("ex41.json");
    let out = blyap(&["validate", path_str(&ex)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("m = 2, r = 2"), "{text}");
    assert!(text.contains("c = (5, 2)"), "{text}");
    assert!(text.contains("cyclic: yes"), "{text}");

    let out = blyap(&["validate", path_str(&fixture("ex42.json"))]);
    assert!(stdout(&out).contains("cyclic: no"));
}

#[test]
fn validate_names_negative_entry() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"Q": [[-1, 1], [1, -1]], "Omega": [[[-1, 2], [3, -1]], [[-1, -0.5], [1, -2]]]}"#,
    )
    .unwrap();
    let out = blyap(&["validate", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("negative off-diagonal"), "{err}");
    assert!(err.contains("(0,1)") || err.contains("(1,2)"), "{err}");
}

#[test]
fn missing_file_is_io_error() {
    let out = blyap(&["validate", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(3));
    let out = blyap(&["bounds", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn syntax_error_is_user_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"Q\": [[-1, 1],\n [1, -1]], \"Omega\": [").unwrap();
    let out = blyap(&["validate", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn unknown_fields_need_lax() {
    let dir = TempDir::new().unwrap();
    let doc = dir.path().join("extra.json");
    fs::write(
        &doc,
        r#"{"Q": [[-1, 1], [1, -1]], "Omega": [[[1]], [[2]]], "note": "x"}"#,
    )
    .unwrap();
    assert_eq!(blyap(&["validate", path_str(&doc)]).status.code(), Some(2));
    assert_eq!(
        blyap(&["validate", path_str(&doc), "--lax"]).status.code(),
        Some(0)
    );
}

#[test]
fn bounds_table_for_three_state_model() {
    let out = blyap(&["bounds", path_str(&fixture("ex42.json"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for v in ["0.5725", "0.6442", "0.7475"] {
        assert!(text.contains(v), "{v} missing from\n{text}");
    }
    assert!(!text.contains("omega_L*"));
}

#[test]
fn bounds_with_star_writes_json() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("report.json");
    let out = blyap(&[
        "bounds",
        path_str(&fixture("ex41.json")),
        "--star",
        "--samples",
        "20000",
        "--seed",
        "3",
        "--json",
        path_str(&json),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for v in ["0.6107", "0.6867", "0.6964", "omega_L*"] {
        assert!(text.contains(v), "{v} missing from\n{text}");
    }
    let report = blyap::report::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    let star = report.star.unwrap();
    assert_eq!(star.samples, 20000);
    assert_eq!(star.seed, 3);
    assert!((star.omega_lower_star - 0.6577).abs() < 0.005);
    assert!(report.timings_ms.is_none());
}

#[test]
fn star_on_non_cyclic_model_is_rejected() {
    let out = blyap(&["bounds", path_str(&fixture("ex42.json")), "--star"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("environment not cyclic"));
}

#[test]
fn scalar_model_columns_agree() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("r.json");
    let out = blyap(&[
        "bounds",
        path_str(&fixture("scalar.json")),
        "--json",
        path_str(&json),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let b = blyap::report::from_json(&fs::read_to_string(&json).unwrap())
        .unwrap()
        .bounds;
    for v in [b.omega_lower, b.omega_lower_alt, b.omega_upper] {
        assert!((v - b.growth_term).abs() < 1e-12);
    }
    assert!(stdout(&out).contains("extinct almost surely"));
}

#[test]
fn tiny_simulation_writes_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("series.csv");
    let out = blyap(&[
        "simulate",
        path_str(&fixture("ex41.json")),
        "--jumps",
        "10",
        "--paths",
        "10",
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("omega_sim"));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,cesaro_mean,ci95_halfwidth");
    assert_eq!(lines.len(), 11);
    assert!(lines[10].starts_with("10,"));
    assert!(!text.contains('\r'));
}

#[test]
fn bad_entry_is_user_error() {
    let ex = fixture("ex41.json");
    let out = blyap(&[
        "simulate",
        path_str(&ex),
        "--entry",
        "3,1",
        "--jumps",
        "5",
        "--paths",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("entry"), "{}", stderr(&out));
    let out = blyap(&["simulate", path_str(&ex), "--entry", "one,two"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulation_output_is_reproducible_across_threads() {
    let dir = TempDir::new().unwrap();
    let ex = fixture("cyclic3.json");
    let run = |tag: &str, threads: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let json = dir.path().join(format!("{tag}.json"));
        let out = blyap(&[
            "simulate",
            path_str(&ex),
            "--paths",
            "50",
            "--jumps",
            "300",
            "--seed",
            "5",
            "--record-every",
            "7",
            "--threads",
            threads,
            "--csv",
            path_str(&csv),
            "--json",
            path_str(&json),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        (fs::read(&csv).unwrap(), fs::read(&json).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn star_json_is_reproducible_across_threads() {
    let dir = TempDir::new().unwrap();
    let ex = fixture("ex41.json");
    let run = |threads: &str| {
        let json = dir.path().join(format!("t{threads}.json"));
        let out = blyap(&[
            "bounds",
            path_str(&ex),
            "--star",
            "--samples",
            "3000",
            "--threads",
            threads,
            "--json",
            path_str(&json),
        ]);
        assert_eq!(out.status.code(), Some(0));
        fs::read(&json).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn timings_are_opt_in() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("t.json");
    let out = blyap(&[
        "bounds",
        path_str(&fixture("ex41.json")),
        "--timings",
        "--json",
        path_str(&json),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = blyap::report::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    let t = report.timings_ms.unwrap();
    assert!(t.contains_key("prepare") && t.contains_key("bounds"));
}
