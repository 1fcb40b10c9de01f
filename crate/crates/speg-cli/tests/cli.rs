//! End-to-end checks of the command-line surface: exit codes, file
//! outputs, and determinism of the CSV traces.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_speg")
}

fn acc_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acc.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("speg-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn build_sets_writes_ladder_and_reports_nesting() {
    let dir = tempdir("build");
    let ladder = dir.join("ladder.json");
    let out = run(&[
        "build-sets",
        "--config",
        acc_config().to_str().unwrap(),
        "--out",
        ladder.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("horizon 8"));
    assert!(!stdout.contains("VIOLATED"));
    assert!(ladder.exists());

    // Governing through the written ladder: protected state.
    let out = run(&[
        "govern",
        "--ladder",
        ladder.to_str().unwrap(),
        "--config",
        acc_config().to_str().unwrap(),
        "--x",
        "15,0",
        "--u-nom",
        "0",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("govern prints JSON");
    assert_eq!(doc["k_star"], serde_json::json!(9));

    // Extension state: hardest brake, depth 5. Also dump the assembled QP.
    let qp_dump = dir.join("qp.json");
    let out = run(&[
        "govern",
        "--ladder",
        ladder.to_str().unwrap(),
        "--config",
        acc_config().to_str().unwrap(),
        "--x",
        "15,-4",
        "--dump-qp",
        qp_dump.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["k_star"], serde_json::json!(5));
    let u = doc["u"][0].as_f64().unwrap();
    assert!((u - (-2.0)).abs() < 1e-6);

    let qp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&qp_dump).unwrap()).unwrap();
    assert_eq!(qp["dim"], serde_json::json!(11)); // one input + ten slacks
    assert!(qp["rows"].as_array().unwrap().len() > 11);
    assert_eq!(qp["H"].as_array().unwrap().len(), 11);
    assert_eq!(qp["f"].as_array().unwrap().len(), 11);
}

#[test]
fn malformed_state_is_an_input_error() {
    let dir = tempdir("badx");
    let ladder = dir.join("ladder.json");
    let out = run(&[
        "build-sets",
        "--config",
        acc_config().to_str().unwrap(),
        "--out",
        ladder.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&[
        "govern",
        "--ladder",
        ladder.to_str().unwrap(),
        "--config",
        acc_config().to_str().unwrap(),
        "--x",
        "fifteen,zero",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unstable_feedback_is_a_validation_error() {
    let dir = tempdir("schur");
    let text = std::fs::read_to_string(acc_config()).unwrap();
    let bad = text.replace("k = [[0.2842, 0.8056]]", "k = [[0.0, 0.0]]");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, bad).unwrap();
    let out = run(&[
        "build-sets",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("ladder.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("spectral radius"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_is_deterministic_and_self_describing() {
    let dir = tempdir("sim");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for out_path in [&a, &b] {
        let out = run(&[
            "simulate",
            "--config",
            acc_config().to_str().unwrap(),
            "--x0",
            "15,-4",
            "--w",
            "constant:-1",
            "--steps",
            "8",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text_a = std::fs::read_to_string(&a).unwrap();
    let text_b = std::fs::read_to_string(&b).unwrap();
    assert_eq!(text_a, text_b, "same inputs must give byte-identical traces");
    let header = text_a.lines().next().unwrap();
    assert_eq!(header, "t,x1,x2,u_nom1,u1,w1,k_star,eps0,eps1,eps2,eps3,eps4,eps5,eps6,eps7,eps8,eps9,in_X0,in_Xinf");
    assert_eq!(text_a.lines().count(), 9); // header + 8 steps
}

#[test]
fn reproduce_acc_emits_bundle_with_all_gates_passing() {
    let dir = tempdir("repro");
    let out = run(&["reproduce-acc", "--out-dir", dir.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout: {stdout}");
    for file in ["case1.csv", "case2.csv", "case3.csv", "summary.txt"] {
        assert!(dir.join(file).exists(), "missing {file}");
    }
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(!summary.contains("FAIL"), "summary: {summary}");
    assert!(summary.lines().count() >= 7);
}

#[test]
fn verify_reports_full_agreement() {
    let out = run(&[
        "verify",
        "--config",
        acc_config().to_str().unwrap(),
        "--samples",
        "40",
        "--seed",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("agreement 40/40"), "{stdout}");
    assert!(stdout.contains("series mean"));
}
