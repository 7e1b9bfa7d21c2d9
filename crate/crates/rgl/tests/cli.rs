use std::fs;
use std::process::Command;

fn rgl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rgl"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = rgl().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn every_subcommand_passes_with_defaults() {
    for cmd in ["equiv", "approx", "bench", "train", "oracle"] {
        let (code, stdout, stderr) = run(&[cmd]);
        assert_eq!(code, 0, "{cmd}: {stderr}");
        assert!(stdout.starts_with("suite,instance,cell,n,T,algorithm,metric,value,tolerance,status,note\n"));
    }
}

#[test]
fn mutation_fails_the_equivalence_suite() {
    let (code, stdout, _) = run(&["equiv", "--mutate"]);
    assert_eq!(code, 1);
    assert!(stdout.lines().any(|l| l.contains("rel_dev_vs_bptt") && l.contains(",fail,")));
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let path = dir.path().join(format!("equiv-{threads}.csv"));
        let out = rgl()
            .args(["equiv", "--seed", "17", "--out", path.to_str().unwrap()])
            .env("RGL_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let (_, other, _) = run(&["equiv", "--seed", "18"]);
    assert_ne!(other.as_bytes(), outputs[0].as_slice());
}

#[test]
fn json_summary_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("net.json"),
        r#"{"n": 1, "cell": "leaky_tanh", "params": {"leak": [0.0]},
            "synapses": [{"pre": 0, "post": 0, "w": 1.0}], "input_weights": [{"pre": 0, "post": 0, "w": 1.0}],
            "readout": {"kind": "static", "outputs": 1, "weights": [[1.0]], "biases": [0.0]}, "seed": 0}"#,
    )
    .unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"network": "net.json", "task": "TeacherStudent", "algorithms": ["bptt", "rtrl", "eprop", "eprop-readout", "lsnn", "morder(2)"],
            "T": 6, "trials": 2, "learning_rate": 0.0, "iterations": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("train.json");
    let (code, _, stderr) =
        run(&["train", "--config", config.to_str().unwrap(), "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["summary"]["pass"], true);
    let rows = doc["rows"].as_array().unwrap();
    // With a zero rate both update modes see the same losses.
    assert!(rows.iter().any(|r| r["metric"] == "zero_rate_loss_curves_differ" && r["value"] == 0.0));
    assert!(rows.iter().any(|r| r["algorithm"] == "bptt" && r["status"] == "skipped"));
}

#[test]
fn spiking_fd_rows_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{"random": {"cell": "lif", "n": 4}, "task": {"SinePattern": {}}, "algorithms": ["bptt"], "T": 10, "trials": 2}"#,
    )
    .unwrap();
    let (code, stdout, _) = run(&["equiv", "--config", config.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout.matches("skipped: non-differentiable").count(), 2);
}

#[test]
fn bad_input_is_an_error() {
    let (code, _, stderr) = run(&["equiv", "--config", "/nonexistent/config.json"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("reading"));
    let out = rgl().arg("equiv").env("RGL_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
