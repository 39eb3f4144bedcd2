//! Black-box tests of the `chi2w` binary: exit codes, output formats, and
//! determinism of the sweep and sampling commands.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chi2w(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chi2w"))
        .args(args)
        .env_remove("CHI2W_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).expect("write fixture");
    path.to_string_lossy().into_owned()
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn density_emits_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "pair.csv", "lambda,shift\n1,0\n1,0\n");
    let out = chi2w(&["density", "--spectrum", &spec, "--x", "0:10:101"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 101);

    // Equal unit pair: the density at the left edge is exactly 1/2 and the
    // distribution is exp(1/2)-shaped.
    let first: Vec<f64> = lines[0].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 0.5).abs() < 1e-9, "pdf(0) = {}", first[1]);
    assert!(first[2].abs() < 1e-9);
    let mut prev_cdf = -1.0;
    for line in &lines {
        let row: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row.len(), 3);
        assert!(row[1] >= 0.0);
        assert!(row[2] >= prev_cdf - 1e-12);
        prev_cdf = row[2];
    }
    let last: Vec<f64> = lines[100].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[2] - (1.0 - (-5.0f64).exp())).abs() < 1e-7);
}

#[test]
fn density_rejects_malformed_input_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "bad.csv", "lambda,shift\nnot-a-number,0\n");
    let out = chi2w(&["density", "--spectrum", &spec, "--x", "0:1:5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let ok = write(dir.path(), "ok.csv", "lambda,shift\n1,0\n1,0\n");
    let out = chi2w(&["density", "--spectrum", &ok, "--x", "0:1"]);
    assert_eq!(out.status.code(), Some(2), "malformed grid spec");

    let out = chi2w(&["density", "--spectrum", &ok, "--x", "5:1:10"]);
    assert_eq!(out.status.code(), Some(2), "reversed grid range");
}

#[test]
fn density_reports_unreachable_accuracy_with_code_3() {
    // An absurdly far grid end makes the inversion integrand oscillate
    // faster than the panel budget can resolve across the whole real leg;
    // that must surface as an error rather than silently degraded rows.
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spread.csv", "lambda,shift\n1,0\n0.01,0\n0.01,0\n");
    let out = chi2w(&["density", "--spectrum", &spec, "--x", "0:200000:4"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bounds_single_component_is_unbounded_yet_sound() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "one.csv", "lambda,shift\n1,0\n");
    let out = chi2w(&["bounds", "--spectrum", &spec]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], "chi2w-report/1");
    assert_eq!(doc["measured"]["kind"], "unbounded");
    let entries = doc["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    let t1 = &entries[0];
    assert_eq!(t1["name"], "theorem1_lower");
    assert_eq!(t1["applicable"], false);
    assert_eq!(t1["verdict"], "not_applicable");
    let stat = entries
        .iter()
        .find(|e| e["name"] == "statulyavichus_lower")
        .unwrap();
    assert_eq!(stat["verdict"], "pass");
    assert!(stat["margin"].is_null(), "vacuous margin must be null");
}

#[test]
fn bounds_multi_component_report_is_sound() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "trio.csv", "lambda,shift\n2,0\n1,0\n0.5,0\n");
    let out = chi2w(&["bounds", "--spectrum", &spec]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["measured"]["kind"], "finite");
    for e in doc["entries"].as_array().unwrap() {
        assert_ne!(e["verdict"], "fail", "{e}");
    }
}

#[test]
fn verify_is_deterministic_and_reports_tallies() {
    let args = [
        "verify", "--count", "5", "--n", "3:6", "--weights", "equal", "--shifts", "zero",
        "--seed", "7",
    ];
    let first = chi2w(&args);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let second = chi2w(&args);
    assert_eq!(first.stdout, second.stdout);

    let doc: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(doc["schema"], "chi2w-verify/1");
    assert_eq!(doc["sweep"]["count"], 5);
    assert_eq!(doc["sweep"]["seed"], 7);
    let tallies = doc["tallies"].as_array().unwrap();
    assert_eq!(tallies.len(), 6);
    assert_eq!(tallies[0]["name"], "theorem1_lower");
    assert_eq!(tallies[0]["pass"], 5);
    assert_eq!(doc["failures"].as_array().unwrap().len(), 0);

    // The summary table lands on stderr, leaving stdout as pure JSON.
    let table = String::from_utf8_lossy(&first.stderr);
    assert!(table.contains("theorem1_lower"));
}

#[test]
fn verify_single_component_sweep_is_vacuously_sound() {
    let out = chi2w(&["verify", "--count", "1", "--n", "1:1", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let tallies = doc["tallies"].as_array().unwrap();
    let t1 = &tallies[0];
    assert_eq!(t1["name"], "theorem1_lower");
    assert_eq!(t1["not_applicable"], 1);
    let stat = tallies
        .iter()
        .find(|t| t["name"] == "statulyavichus_lower")
        .unwrap();
    assert_eq!(stat["pass"], 1, "lower bound holds vacuously");
}

#[test]
fn verify_rejects_bad_flags_with_code_2() {
    let out = chi2w(&["verify", "--count", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = chi2w(&["verify", "--count", "1", "--weights", "zipf"]);
    assert_eq!(out.status.code(), Some(2));
    let out = chi2w(&["verify", "--count", "1", "--n", "5:3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = chi2w(&["verify", "--count", "1", "--shifts", "gaussian:-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_identity_and_diagonal_with_mean() {
    let dir = tempfile::tempdir().unwrap();
    let eye = write(dir.path(), "eye.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let out = chi2w(&["decompose", "--cov", &eye]);
    assert_eq!(out.status.code(), Some(0));
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "lambda,shift");
    assert_eq!(&lines[1..], &["1,0", "1,0", "1,0"]);

    let cov = write(dir.path(), "diag.csv", "4,0\n0,1\n");
    let mean = write(dir.path(), "mean.csv", "2\n0\n");
    let out = chi2w(&["decompose", "--cov", &cov, "--mean", &mean]);
    assert_eq!(out.status.code(), Some(0));
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "lambda,shift");
    assert_eq!(lines.len(), 3);
    let row1: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    let row2: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row1[0], 4.0);
    assert!((row1[1].abs() - 1.0).abs() < 1e-12, "unit shift, got {}", row1[1]);
    assert_eq!(row2[0], 1.0);
    assert_eq!(row2[1], 0.0);
}

#[test]
fn decompose_output_feeds_bounds_unmodified() {
    let dir = tempfile::tempdir().unwrap();
    let cov = write(dir.path(), "cov.csv", "2,0.5\n0.5,1\n");
    let mean = write(dir.path(), "mean.csv", "1\n-1\n");
    let out = chi2w(&["decompose", "--cov", &cov, "--mean", &mean]);
    assert_eq!(out.status.code(), Some(0));
    let spectrum = write(
        dir.path(),
        "spectrum.csv",
        &String::from_utf8_lossy(&out.stdout),
    );
    let out = chi2w(&["bounds", "--spectrum", &spectrum]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["measured"]["kind"], "finite");
}

#[test]
fn decompose_rejects_bad_matrices_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let asym = write(dir.path(), "asym.csv", "1,0.9\n0.1,1\n");
    let out = chi2w(&["decompose", "--cov", &asym]);
    assert_eq!(out.status.code(), Some(2));

    let indef = write(dir.path(), "indef.csv", "1,2\n2,1\n");
    let out = chi2w(&["decompose", "--cov", &indef]);
    assert_eq!(out.status.code(), Some(2));

    let ragged = write(dir.path(), "ragged.csv", "1,0\n0\n");
    let out = chi2w(&["decompose", "--cov", &ragged]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_emits_deterministic_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "pair.csv", "lambda,shift\n1,0.5\n0.5,0\n# offset=0.25\n");
    let out = chi2w(&["sample", "--spectrum", &spec, "--count", "1000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 1000);
    for line in &lines {
        let v: f64 = line.parse().unwrap();
        assert!(v >= 0.25, "samples respect the offset, got {v}");
    }
    let again = chi2w(&["sample", "--spectrum", &spec, "--count", "1000", "--seed", "3"]);
    assert_eq!(out.stdout, again.stdout);

    let shifted_seed = chi2w(&["sample", "--spectrum", &spec, "--count", "1000", "--seed", "4"]);
    assert_ne!(out.stdout, shifted_seed.stdout);
}

/// Closing the read end of a stdout pipe must terminate the process quietly
/// (death by SIGPIPE, as for any stream filter), never with a panic message.
#[cfg(unix)]
#[test]
fn density_pipe_closed_early_exits_quietly() {
    use std::io::{BufRead, BufReader};
    use std::os::unix::process::ExitStatusExt;
    use std::process::Stdio;

    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "one.csv", "lambda,shift\n1,0\n");
    // Far more rows than a pipe buffer holds, so the writer must block on a
    // full pipe and then take the signal once the reader is gone.
    let mut child = Command::new(env!("CARGO_BIN_EXE_chi2w"))
        .args(["density", "--spectrum", &spec, "--x", "0:100:200001"])
        .env_remove("CHI2W_THREADS")
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");

    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .expect("one row arrives");
    assert!(first.starts_with("0,"), "unexpected first row: {first}");
    // Dropping the handle above closed our end; the child's next write fails.
    let status = child.wait().expect("child reaped");
    assert_eq!(status.signal(), Some(13), "expected SIGPIPE, got {status:?}");

    let mut err = String::new();
    std::io::Read::read_to_string(child.stderr.as_mut().unwrap(), &mut err).unwrap();
    assert!(
        !err.contains("panic"),
        "stderr should stay quiet on a closed pipe, got: {err}"
    );
}
