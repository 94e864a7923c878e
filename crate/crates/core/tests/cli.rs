use std::path::Path;
use std::process::{Command, Output};

use overlapstat::overlap::p_marginal_r0;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overlapstat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows (after the `#` header block and the column line).
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn header_value(text: &str, key: &str) -> String {
    let prefix = format!("# {key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} header"))
        .to_string()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn probs_moving_minimum_of_two() {
    let out = run(&[
        "probs", "--r", "1", "--m", "2", "--n", "2", "--i", "1", "--j", "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("# formula: tie-prob-below, tie-prob-diagonal, tie-prob-above"));
    let values: Vec<String> = rows(&text)
        .iter()
        .map(|r| format!("{}/{}", r[2], r[3]))
        .collect();
    assert_eq!(values, ["1/3", "1/3", "1/3", "0/1"]);
}

#[test]
fn probs_nested_samples_marginals() {
    let out = run(&[
        "probs", "--r", "0", "--m", "2", "--n", "3", "--i", "1", "--j", "2",
    ]);
    let text = stdout(&out);
    let expected: Vec<String> = (1..=3)
        .map(|k| p_marginal_r0(1, 2, k, 3).to_string())
        .collect();
    assert_eq!(header_value(&text, "row_sums"), expected.join(" "));
}

#[test]
fn invalid_index_is_a_config_error() {
    let out = run(&[
        "probs", "--r", "1", "--m", "2", "--n", "2", "--i", "0", "--j", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["probs", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        run(&["density", "--spec", "1,2,2,1,1", "--model", "power:-1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn probs_json_is_versioned() {
    let out = run(&["probs", "--spec", "1,2,2,2,2", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["tie_mass"], serde_json::json!({"num": "1", "den": "3"}));
}

#[test]
fn density_atom_and_mass() {
    let out = run(&[
        "density",
        "--spec",
        "1,2,2,1,1",
        "--part",
        "atom",
        "--grid",
        "3",
    ]);
    let text = stdout(&out);
    let mid = rows(&text).into_iter().find(|r| r[0] == "0.5").unwrap();
    assert!((num(&mid[1]) - 0.25).abs() < 1e-12);
    assert!((num(&header_value(&text, "total_mass")) - 1.0).abs() < 1e-6);

    let out = run(&[
        "density",
        "--spec",
        "0,3,3,2,2",
        "--model",
        "exponential",
        "--grid",
        "5",
    ]);
    let text = stdout(&out);
    let grid = rows(&text);
    assert_eq!(grid.len(), 25);
    assert!(grid.iter().all(|r| num(&r[2]) == 0.0));
}

#[test]
fn regress_curves() {
    let text = stdout(&run(&["regress", "--item", "i", "--grid", "9"]));
    assert_eq!(header_value(&text, "formula"), "r1-max-given-max");
    for r in rows(&text) {
        let y = num(&r[1]);
        assert!((num(&r[2]) - (0.5 + y * y / 3.0)).abs() < 1e-10);
    }
    let text = stdout(&run(&[
        "regress",
        "--spec",
        "0,2,2,1,1",
        "--model",
        "logistic",
        "--grid",
        "9",
    ]));
    for r in rows(&text) {
        assert!((num(&r[2]) - num(&r[1])).abs() < 1e-9);
    }
    let text = stdout(&run(&["regress", "--lemma", "adjacent:3,4", "--grid", "9"]));
    for r in rows(&text) {
        let x = num(&r[1]);
        assert!((num(&r[2]) - (x - x * x / 4.0)).abs() < 1e-10);
    }
    let out = run(&[
        "regress",
        "--spec",
        "0,2,4,1,2",
        "--model",
        "cb:1,4",
        "--direction",
        "ec",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn reconstruct_examples_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // uniform example for the minimum, with an analytic derivative column
    let mut csv = String::from("x,value,derivative\n");
    for g in 1..100 {
        let x = g as f64 / 100.0;
        let _ = std::fmt::Write::write_fmt(
            &mut csv,
            format_args!(
                "{x},{},{}\n",
                (1.0 - (1.0 - x).powi(3)) / 3.0,
                (1.0 - x).powi(2)
            ),
        );
    }
    let input = write(dir.path(), "g.csv", &csv);
    let out_path = dir.path().join("cdf.csv");
    let out = run(&[
        "reconstruct",
        "--method",
        "min",
        "--n",
        "4",
        "--m",
        "2",
        "--input",
        &input,
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cdf = std::fs::read_to_string(&out_path).unwrap();
    for r in rows(&cdf) {
        assert!((num(&r[2]) - num(&r[1])).abs() < 1e-12);
    }
    let diag: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("cdf.csv.diagnostics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(diag["diagnostics"]["nondecreasing"], true);

    // power example h = x^(a+1) / (i a + 1), F = x^a
    let mut csv = String::from("x,value\n");
    for g in 1..200 {
        let x = g as f64 / 200.0;
        let _ = std::fmt::Write::write_fmt(&mut csv, format_args!("{x},{}\n", x.powi(3) / 5.0));
    }
    let input = write(dir.path(), "h.csv", &csv);
    let out = run(&[
        "reconstruct",
        "--method",
        "adjacent",
        "--i",
        "2",
        "--b",
        "1",
        "--input-kind",
        "h",
        "--input",
        &input,
    ]);
    assert_eq!(out.status.code(), Some(0));
    for r in rows(&stdout(&out)) {
        let x = num(&r[1]);
        assert!((num(&r[2]) - x * x).abs() < 1e-4, "{r:?}");
    }

    // regress -> reconstruct round trip without derivative information
    let curve = stdout(&run(&["regress", "--lemma", "min:2,3", "--grid", "999"]));
    let input = write(dir.path(), "round.csv", &curve);
    let out = run(&[
        "reconstruct",
        "--method",
        "min",
        "--n",
        "3",
        "--m",
        "2",
        "--input",
        &input,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let worst = rows(&stdout(&out))
        .iter()
        .map(|r| (num(&r[2]) - num(&r[1])).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "round trip error {worst}");

    // g' outside (0, 1]
    let bad = write(
        dir.path(),
        "bad.csv",
        "x,value\n0.1,0.2\n0.2,0.4\n0.3,0.6\n",
    );
    let out = run(&[
        "reconstruct",
        "--method",
        "min",
        "--n",
        "3",
        "--m",
        "2",
        "--input",
        &bad,
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_is_deterministic_and_honours_zmax() {
    let args = [
        "verify",
        "--spec",
        "1,2,2,1,1",
        "--reps",
        "100000",
        "--seed",
        "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["verdict"], "pass");
    let strict = run(&[
        "verify",
        "--spec",
        "1,2,2,1,1",
        "--reps",
        "100000",
        "--seed",
        "7",
        "--zmax",
        "0.01",
    ]);
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn default_suite_passes() {
    let out = run(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"command": "probs", "r": 1, "m": 2, "n": 2, "i": 2, "j": 2, "format": "json"}"#,
    );
    let doc: serde_json::Value =
        serde_json::from_slice(&run(&["probs", "--config", &cfg]).stdout).unwrap();
    assert_eq!(doc["tie_mass"], serde_json::json!({"num": "1", "den": "3"}));
    let doc: serde_json::Value =
        serde_json::from_slice(&run(&["probs", "--config", &cfg, "--j", "1"]).stdout).unwrap();
    assert_eq!(doc["spec"]["j"], 1);
    let bad = write(dir.path(), "bad.json", r#"{"r": 1, "colour": "blue"}"#);
    assert_eq!(run(&["probs", "--config", &bad]).status.code(), Some(2));
    assert_eq!(run(&["density", "--config", &cfg]).status.code(), Some(2));
}
