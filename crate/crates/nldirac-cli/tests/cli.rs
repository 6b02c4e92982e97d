//! Black-box tests of the `nldirac` binary: exit codes, artifact sets,
//! schema headers, config handling, and the run-record checksum contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nldirac"))
}

/// Fresh output directory under the cargo-managed tmp root.
fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).expect("clear stale test dir");
    }
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (signal?)")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    let bytes = fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path)
        .expect("read artifact")
        .lines()
        .next()
        .expect("nonempty artifact")
        .to_string()
}

// -- exit codes --------------------------------------------------------------

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        // Frequency outside (0, m) is rejected before any solve.
        &["wave", "--omega", "1.1"],
        &["wave", "--omega", "-0.2"],
        // --omega and --omega-range exclude each other.
        &["spectrum", "--omega", "0.9", "--omega-range", "0.9:0.95:3"],
        // vk needs a frequency range, limit an epsilon list.
        &["vk", "--n", "3", "--k", "1", "--omega", "0.9"],
        &["limit"],
        // Malformed range syntax.
        &["vk", "--n", "3", "--k", "1", "--omega-range", "0.95:0.9:5"],
        &["vk", "--n", "3", "--k", "1", "--omega-range", "0.9-0.95-5"],
        // Inadmissible model: no admissible (n, k) has n = 4.
        &["wave", "--n", "4", "--omega", "0.9"],
        // Unknown subcommand.
        &["frobnicate"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(
            exit_code(&out),
            2,
            "args {:?}: expected usage exit 2, got {} (stderr: {})",
            args,
            exit_code(&out),
            stderr_text(&out)
        );
    }
}

#[test]
fn unknown_config_key_exits_2_with_line_number() {
    let dir = out_dir("cli_bad_key");
    fs::create_dir_all(&dir).unwrap();
    let conf = dir.join("bad.conf");
    fs::write(&conf, "[run]\ncommand = wave\n\n[model]\nbogus = 3\n").unwrap();
    let out = run(&["wave", "--config", conf.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_text(&out));
    let err = stderr_text(&out);
    assert!(err.contains("line 5"), "should name the offending line: {err}");
    assert!(err.contains("bogus"), "should name the offending key: {err}");
}

#[test]
fn config_command_mismatch_exits_2() {
    let dir = out_dir("cli_mismatch");
    fs::create_dir_all(&dir).unwrap();
    let conf = dir.join("other.conf");
    fs::write(&conf, "[run]\ncommand = vk\n").unwrap();
    let out = run(&["wave", "--omega", "0.9", "--config", conf.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_text(&out));
}

#[test]
fn numerical_failure_exits_1() {
    // An unreachable residual bound turns a perfectly good solve into a
    // reported numerical failure.
    let dir = out_dir("cli_tight");
    fs::create_dir_all(&dir).unwrap();
    let conf = dir.join("tight.conf");
    fs::write(&conf, "[tolerances]\nnewton = 1e-18\n").unwrap();
    let out = run(&[
        "wave",
        "--omega",
        "0.9",
        "--grid-n",
        "150",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1, "stderr: {}", stderr_text(&out));
    let err = stderr_text(&out);
    assert!(err.starts_with("error:"), "hard failures report on stderr: {err}");
}

// -- artifact sets -----------------------------------------------------------

#[test]
fn wave_success_writes_checked_artifacts() {
    let dir = out_dir("cli_wave_ok");
    let out = run(&[
        "wave",
        "--k",
        "2",
        "--omega",
        "0.9",
        "--grid-n",
        "200",
        "--rmax",
        "15",
        "--svg",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("artifacts written"), "stdout: {stdout}");

    // Expected artifact set, nothing more.
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["run_record.json", "summary.json", "wave_profile.csv", "wave_profile.svg"]
    );

    // Versioned CSV schema header.
    assert_eq!(first_line(&dir.join("wave_profile.csv")), "# schema=wave_profile/1");

    // Summary carries the frequency, the config snapshot, and its text form.
    let summary = read_json(&dir.join("summary.json"));
    assert_eq!(summary["schema"], "wave_summary/1");
    assert!((summary["omega"].as_f64().unwrap() - 0.9).abs() < 1e-15);
    assert_eq!(summary["config"]["n"], 1);
    assert_eq!(summary["config"]["k"], 2);
    assert!(summary["config_text"].as_str().unwrap().contains("[model]"));
    // The polished profile solves the discrete system to near rounding.
    assert!(summary["residual_norm"].as_f64().unwrap() < 1e-11);

    // The run record lists every other artifact with its checksum and size.
    let record = read_json(&dir.join("run_record.json"));
    assert_eq!(record["schema"], "run_record/1");
    let artifacts = record["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 3);
    for a in artifacts {
        let path = dir.join(a["path"].as_str().unwrap());
        let bytes = fs::read(&path).expect("listed artifact exists");
        assert_eq!(bytes.len() as u64, a["bytes"].as_u64().unwrap());
        let digest = format!("{:x}", Sha256::digest(&bytes));
        assert_eq!(digest, a["sha256"].as_str().unwrap(), "{}", path.display());
    }
}

#[test]
fn summary_config_reproduces_the_run() {
    // Run once from flags, then re-run from the embedded config snapshot:
    // the data artifact must come out bit-identical.
    let dir1 = out_dir("cli_rt1");
    let out = run(&[
        "wave",
        "--omega",
        "0.92",
        "--grid-n",
        "180",
        "--rmax",
        "14",
        "--out",
        dir1.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let summary = read_json(&dir1.join("summary.json"));
    let config_text = summary["config_text"].as_str().unwrap();
    let dir2 = out_dir("cli_rt2");
    fs::create_dir_all(&dir2).unwrap();
    let conf = dir2.join("replay.conf");
    fs::write(&conf, config_text).unwrap();

    let out = run(&[
        "wave",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        dir2.join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    assert_eq!(
        fs::read(dir1.join("wave_profile.csv")).unwrap(),
        fs::read(dir2.join("out").join("wave_profile.csv")).unwrap(),
        "replayed config must reproduce the profile bytes"
    );
}

#[test]
fn nls_reports_absent_eigenvalue_for_subcritical_power() {
    let dir = out_dir("cli_nls_k1");
    let out = run(&[
        "nls",
        "--k",
        "1",
        "--grid-n",
        "200",
        "--rmax",
        "15",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let summary = read_json(&dir.join("nls_lambda.json"));
    assert_eq!(summary["schema"], "nls_lambda/1");
    assert_eq!(summary["present"], false);
    assert!(summary["lambda"].is_null());
}

#[test]
fn spectrum_counts_cover_the_whole_matrix() {
    let dir = out_dir("cli_spec_counts");
    let out = run(&[
        "spectrum",
        "--omega",
        "0.98",
        "--grid-n",
        "120",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    assert_eq!(first_line(&dir.join("spectrum.csv")), "# schema=spectrum/1");

    let summary = read_json(&dir.join("summary.json"));
    let counts = &summary["counts"];
    let total: u64 = ["point_real", "point_imaginary_gap", "essential_band_artifact", "unresolved"]
        .iter()
        .map(|key| counts[*key].as_u64().unwrap())
        .sum();
    // The linearization acts on 4 real components per node.
    assert_eq!(total, 4 * 120);
    let edge = summary["band_edge"].as_f64().unwrap();
    assert!((edge - (1.0 - 0.98)).abs() < 1e-12);
}
