use std::io::Write;
use std::process::{Command, Output, Stdio};

use hyperswitch::{Sequence, SimpleGraph};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hyperswitch"));
    c.env_remove("HYPERSWITCH_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn params_example() {
    let o = run(&["params", "--n", "6", "--d", "2", "--k", "3"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["params"]["M"], 4);
    assert_eq!(v["params"]["r"], 9);
    assert_eq!(v["params"]["m"], 0);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn enumerate_forced_instance() {
    let o = run(&["enumerate", "--n", "4", "--d", "3", "--k", "3"]);
    assert_eq!(code(&o), 0);
    let graphs = SimpleGraph::parse_edge_lists(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(graphs.len(), 1);
    assert_eq!(graphs[0].edge_count(), 4);
}

#[test]
fn validation_errors_exit_one() {
    let o = run(&["params", "--n", "5", "--d", "2", "--k", "3"]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
    let o = run(&["params", "--n", "6", "--d", "2", "--k", "2"]);
    assert_eq!(code(&o), 1);
    let o = run(&["params", "--n", "6", "--d", "2"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn randomized_commands_need_a_seed() {
    for cmd in ["sample-x", "sample-y", "pipeline", "events", "phi", "fb-audit"] {
        let o = run(&[cmd, "--n", "6", "--d", "2", "--k", "3"]);
        assert_eq!(code(&o), 1, "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    }
    let o = bin()
        .args(["sample-x", "--n", "6", "--d", "2", "--k", "3"])
        .env("HYPERSWITCH_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["seed"], 9);
}

#[test]
fn guard_exits_two() {
    let o = run(&["enumerate", "--n", "12", "--d", "3", "--k", "3", "--ceiling", "1000"]);
    assert_eq!(code(&o), 2);
    let o = run(&["double-count", "--n", "9", "--d", "3", "--k", "3", "--ceiling", "1000"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sample_text_round_trips() {
    let o = run(&[
        "sample-y", "--n", "12", "--d", "3", "--k", "3", "--seed", "5", "--format", "edgelist",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let seq = Sequence::parse_text(&text).unwrap();
    assert!(seq.is_regular());
    assert_eq!(seq.to_text(), text);
}

#[test]
fn pipeline_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut docs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("r{i}.json"));
        let hnm = dir.path().join(format!("h{i}.txt"));
        let o = run(&[
            "pipeline",
            "--n",
            "60",
            "--d",
            "4",
            "--k",
            "3",
            "--seed",
            "11",
            "--mode",
            "resample",
            "--out",
            out.to_str().unwrap(),
            "--hnm-out",
            hnm.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
        docs.push((std::fs::read(&out).unwrap(), std::fs::read_to_string(&hnm).unwrap()));
    }
    assert_eq!(docs[0], docs[1]);
    let v: serde_json::Value = serde_json::from_slice(&docs[0].0).unwrap();
    assert_eq!(v["result"]["status"], "ok");
    assert_eq!(v["result"]["seed"], 11);
    let h = SimpleGraph::parse_edge_list(&docs[0].1).unwrap();
    assert_eq!(h.edge_count(), 4);
}

#[test]
fn edgelist_rejected_for_reports() {
    let o = run(&[
        "double-count",
        "--n",
        "6",
        "--d",
        "1",
        "--k",
        "3",
        "--format",
        "edgelist",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn uniformity_exit_reflects_p_value() {
    let base = [
        "uniformity",
        "--n",
        "6",
        "--d",
        "2",
        "--k",
        "3",
        "--seed",
        "42",
        "--N",
        "auto",
    ];
    let o = run(&[&base[..], &["--sampler", "reference"]].concat());
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["sample_size"], 20000);
    assert_eq!(v["classes"], 75);
    let o = run(&[&base[..], &["--sampler", "biased"]].concat());
    assert_eq!(code(&o), 3);
    let o = run(&[&base[..9], &["--N", "100"]].concat());
    assert_eq!(code(&o), 1);
}

#[test]
fn hamilton_reads_stdin() {
    let mut child = bin()
        .arg("hamilton")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"khg 3 6 3\n1 2 3\n3 4 5\n5 6 1\nkhg 3 6 2\n1 2 3\n4 5 6\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["graphs"][0]["found"], true);
    assert_eq!(v["graphs"][1]["found"], false);
}

#[test]
fn audits_pass_on_small_instance() {
    let o = run(&[
        "fb-audit", "--n", "60", "--d", "4", "--k", "3", "--seed", "3", "--N", "200",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["forward_violations"], 0);
    let o = run(&["double-count", "--n", "6", "--d", "1", "--k", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["identity_holds"], true);
    let o = run(&[
        "phi",
        "--n",
        "99",
        "--d",
        "4",
        "--k",
        "3",
        "--seed",
        "1",
        "--N",
        "2000",
        "--multiples",
        "2,3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["tails"].as_array().unwrap().len(), 2);
}
