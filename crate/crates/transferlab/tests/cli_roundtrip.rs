//! End-to-end checks of the command-line binary: output files, formats,
//! exit codes, environment fallbacks, and determinism across thread counts.

use std::path::Path;
use std::process::{Command, Output};

use transferlab::classify::Thresholds;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transferlab"))
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    cmd.env_remove("TRANSFERLAB_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary should launch")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

#[test]
fn operator_writes_exact_doubling_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "operator",
            "--gallery",
            "deterministic_doubling",
            "--grid",
            "4",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let path = tmp.path().join("deterministic_doubling/N4/operator.mtx");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "ULAM 1 4 8 exact_preimage");
    let triplets: Vec<Vec<&str>> = lines.map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(triplets.len(), 8);
    for t in &triplets {
        assert_eq!(t.len(), 3);
        assert_eq!(t[2], "0.5");
    }
}

#[test]
fn missing_system_file_exits_2() {
    let out = run(
        &["operator", "--system", "/nonexistent/definitely_missing.json"],
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("system spec not found"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn unknown_gallery_id_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["classify", "--gallery", "no_such_system", "--out", tmp.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
}

#[test]
fn densities_writes_components_and_absorption() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "densities",
            "--gallery",
            "two_sink_additive",
            "--grid",
            "64",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let dir = tmp.path().join("two_sink_additive/N64");
    let meta = read_json(&dir.join("decomposition.json"));
    let comps = meta["components"].as_array().unwrap();
    assert_eq!(comps.len(), 2);
    for (ci, comp) in comps.iter().enumerate() {
        assert!(comp["period"].is_u64());
        let csv = std::fs::read_to_string(dir.join(format!("component_{ci}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "cell,value");
        assert_eq!(lines.count(), 64);
    }
    // Transient cells exist between the sinks, so the absorption table is
    // written and parses as one row per transient cell.
    assert_eq!(meta["absorption_matrix_file"], "absorption.csv");
    let absorption = std::fs::read_to_string(dir.join("absorption.csv")).unwrap();
    let mut lines = absorption.lines();
    assert_eq!(lines.next().unwrap(), "cell,component_0,component_1");
    let n_rows = lines.count();
    assert_eq!(n_rows, meta["transient_cells"].as_array().unwrap().len());
    assert!(n_rows > 0);
}

#[test]
fn densities_warns_when_mass_escapes_to_an_atom() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "densities",
            "--gallery",
            "mult_contraction",
            "--grid",
            "256",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    let err = stderr(&out);
    assert!(
        err.contains("WARNING") && err.contains("against (S)"),
        "stderr: {err}"
    );
}

#[test]
fn classify_writes_report_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "classify",
            "--gallery",
            "deterministic_doubling",
            "--grid",
            "32,64",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("hierarchy_ok=true"));
    let report = read_json(&tmp.path().join("deterministic_doubling/classification.json"));
    assert_eq!(report["system_id"], "deterministic_doubling");
    assert_eq!(report["ladder"], serde_json::json!([32, 64]));
    assert_eq!(report["hierarchy_ok"], true);
    let probes = report["probes"].as_array().unwrap();
    assert!(probes.len() >= 8);
    for p in probes {
        assert!(p["class_tag"].is_string());
        assert!(p["verdict"].is_string());
        assert!(p["certificate"].is_object());
    }
}

#[test]
fn threshold_file_overrides_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    // Lower the exact-path concentration cutoff below the value delta_min
    // produces for the doubling map (c_exact(1/16) = 1/16 = 0.0625), turning
    // its (C) verdict from for to against.
    let mut th = serde_json::to_value(Thresholds::default()).unwrap();
    th["c_exact_against"] = serde_json::json!(0.05);
    let th_path = tmp.path().join("thresholds.json");
    std::fs::write(&th_path, serde_json::to_string(&th).unwrap()).unwrap();
    let out = run(
        &[
            "classify",
            "--gallery",
            "deterministic_doubling",
            "--grid",
            "32,64",
            "--out",
            tmp.path().to_str().unwrap(),
            "--threshold-file",
            th_path.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report = read_json(&tmp.path().join("deterministic_doubling/classification.json"));
    let c_probe = report["probes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["class_tag"] == "C")
        .expect("C probe present");
    assert_eq!(c_probe["verdict"], "evidence_against");
}

#[test]
fn basins_with_zero_samples_still_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "basins",
            "--gallery",
            "two_sink_additive",
            "--grid",
            "32",
            "--samples",
            "0",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report = read_json(&tmp.path().join("two_sink_additive/N32/basins.json"));
    assert_eq!(report["n_samples"], 0);
}

#[test]
fn correlate_doubling_flattens_within_log2_n() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "correlate",
            "--gallery",
            "deterministic_doubling",
            "--grid",
            "64",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let dir = tmp.path().join("deterministic_doubling/N64");
    let csv = std::fs::read_to_string(dir.join("correlation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,value");
    for line in lines {
        let (n, value) = line.split_once(',').unwrap();
        let n: usize = n.parse().unwrap();
        let value: f64 = value.parse().unwrap();
        if n >= 6 {
            assert!(value.abs() < 1e-12, "C_{n} = {value}");
        }
    }
    let fit = read_json(&dir.join("correlation_fit.json"));
    assert!(fit["rho"].as_f64().unwrap() < 0.7);
}

#[test]
fn gallery_list_names_every_entry() {
    let out = run(&["gallery", "list"], &[]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 15, "gallery listing:\n{text}");
    for id in [
        "bernoulli_convolution",
        "rotations_rational",
        "additive_pinned_zero",
        "direct_sum_expanding_contracting",
        "deterministic_doubling",
    ] {
        assert!(text.contains(id), "missing {id} in listing");
    }
}

#[test]
fn gallery_export_round_trips_through_operator() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("exported");
    let out = run(
        &["gallery", "export", "bernoulli_convolution"],
        &[("TRANSFERLAB_OUT", out_dir.to_str().unwrap())],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let spec = out_dir.join("bernoulli_convolution.json");
    assert!(spec.exists());

    // Building from the exported file and from the built-in entry must give
    // byte-identical operators (the file stem doubles as the system id).
    let a_dir = tmp.path().join("a");
    let b_dir = tmp.path().join("b");
    let out_a = run(
        &[
            "operator",
            "--system",
            spec.to_str().unwrap(),
            "--grid",
            "16",
            "--out",
            a_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out_a), 0, "stderr: {}", stderr(&out_a));
    let out_b = run(
        &[
            "operator",
            "--gallery",
            "bernoulli_convolution",
            "--grid",
            "16",
            "--out",
            b_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out_b), 0);
    let a = std::fs::read(a_dir.join("bernoulli_convolution/N16/operator.mtx")).unwrap();
    let b = std::fs::read(b_dir.join("bernoulli_convolution/N16/operator.mtx")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn out_flag_overrides_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("env_dir");
    let flag_dir = tmp.path().join("flag_dir");

    // Environment fallback alone.
    let out = run(
        &["operator", "--gallery", "deterministic_doubling", "--grid", "8"],
        &[("TRANSFERLAB_OUT", env_dir.to_str().unwrap())],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(env_dir.join("deterministic_doubling/N8/operator.mtx").exists());

    // Explicit --out wins over the environment.
    let out = run(
        &[
            "operator",
            "--gallery",
            "deterministic_doubling",
            "--grid",
            "16",
            "--out",
            flag_dir.to_str().unwrap(),
        ],
        &[("TRANSFERLAB_OUT", env_dir.to_str().unwrap())],
    );
    assert_eq!(code(&out), 0);
    assert!(flag_dir.join("deterministic_doubling/N16/operator.mtx").exists());
    assert!(!env_dir.join("deterministic_doubling/N16").exists());
}

#[test]
fn thread_count_does_not_change_classification_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let dir = tmp.path().join(format!("t{threads}"));
        let out = run(
            &[
                "classify",
                "--gallery",
                "expanding_ifs_23",
                "--grid",
                "32,64",
                "--threads",
                threads,
                "--out",
                dir.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
        outputs.push(std::fs::read(dir.join("expanding_ifs_23/classification.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
