use std::path::Path;
use std::process::{Command, Output};

use branchruin::format::read_tree_file;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_branchruin"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_and_convert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("zd.txt");
    let js = dir.path().join("zd.json");
    let back = dir.path().join("back.txt");
    assert!(run(&["tree", "gen", "--tree", "zd:2", "--depth", "8", "--out", p(&text)]).status.success());
    assert!(run(&["tree", "convert", p(&text), "--to", "json", "--out", p(&js)]).status.success());
    assert!(run(&["tree", "convert", p(&js), "--to", "text", "--out", p(&back)]).status.success());
    let a = read_tree_file(&text).unwrap();
    let b = read_tree_file(&back).unwrap();
    assert_eq!(a.tree.parents(), b.tree.parents());
    assert_eq!(a.tree.level_sizes(), vec![1, 1, 2, 4, 4, 8, 8, 8, 8]);
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&js).unwrap()).unwrap();
    assert_eq!(j["depth_cap"], 8);
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.txt");
    std::fs::write(&f, "branchruin-tree v1\n0 -1\n1 0\n2 3\n3 1\n").unwrap();
    let o = run(&["flow", "conductance", "--tree", p(&f), "--scheme", "unit"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn weight_columns_drive_the_file_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("path.txt");
    // Unit weights on a path of length 4: c(e) = Ψ/(1-ψ) with ψ(k) = (k-1)/k, so c ≡ 1.
    std::fs::write(&f, "branchruin-tree v1\n0 -1\n1 0 1 1\n2 1 1 1\n3 2 1 1\n4 3 1 1\n").unwrap();
    let o = run(&["--json", "flow", "conductance", "--tree", p(&f), "--scheme", "file"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = json(&o)["result"].as_array().unwrap().clone();
    let last = rows.last().unwrap().as_array().unwrap();
    assert_eq!(last[0], 4);
    assert!((last[1].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let o = run(&["flow", "conductance", "--tree", "path", "--depth", "8", "--scheme", "file"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["analyze", "rt"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["--threads", "0", "analyze", "br", "--tree", "path", "--depth", "1024"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "phase", "--tree", "zd:4"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"tree": "zd:4", "sweep": {"deltas": []}}"#).unwrap();
    let o = run(&["sweep", "phase", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"));
}

#[test]
fn analyze_reports_and_diagnostics() {
    let o = run(&["--json", "analyze", "brr", "--tree", "zd:4", "--depth", "4096"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["version"].as_str().unwrap().starts_with("branchruin "));
    assert!((v["result"]["value"].as_f64().unwrap() - 2.0).abs() <= 0.2);

    let o = run(&["--json", "analyze", "br", "--tree", "regular:2", "--depth", "1024"]);
    assert!((json(&o)["result"]["value"].as_f64().unwrap() - 2.0).abs() <= 0.1);

    let o = run(&["analyze", "critical", "--tree", "path", "--depth", "1024", "--delta-c", "1"]);
    assert!(stdout(&o).contains("recurrent criterion met"));

    // An outward-biased walk on a path never makes Ψ small.
    let o = run(&["analyze", "rt", "--tree", "path", "--depth", "1024", "--scheme", "biased", "--beta", "0.5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("inf"));
}

#[test]
fn simulate_commands() {
    let o = run(&[
        "--json",
        "--seed",
        "5",
        "simulate",
        "walk",
        "--tree",
        "zd:4",
        "--delta",
        "8",
        "--stop",
        "depth:50,budget:100000",
        "--replicas",
        "40",
    ]);
    let v = json(&o);
    assert_eq!(v["result"]["escaped"], 0);
    assert_eq!(v["result"]["runs"], 40);

    let o = run(&[
        "--json",
        "simulate",
        "percolation",
        "--tree",
        "zd:4",
        "--depth",
        "512",
        "--mode",
        "level",
        "--delta",
        "1",
        "--trials",
        "50",
    ]);
    let v = json(&o);
    assert!(v["result"]["survived"].as_u64().unwrap() > 0);

    let o = run(&[
        "--json",
        "simulate",
        "percolation",
        "--tree",
        "zd:2",
        "--depth",
        "12",
        "--mode",
        "ccp",
        "--delta",
        "1",
        "--trials",
        "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn flow_commands() {
    let o =
        run(&["--json", "flow", "proptrans", "--tree", "zd:4", "--depth", "1024", "--delta", "1", "--lambda", "1.5"]);
    assert!(o.status.success());
    let r = &json(&o)["result"];
    assert_eq!(r["energy_within_bound"], true);
    assert_eq!(r["prefix_within_bound"], true);
    assert!(r.get("warning").is_none());

    let o = run(&["--json", "flow", "proptrans", "--tree", "zd:4", "--depth", "1024", "--delta", "1", "--lambda", "3"]);
    assert!(json(&o)["result"]["warning"].is_string());

    let o = run(&["--json", "flow", "energy", "--tree", "zd:4", "--depth", "1024", "--delta", "1"]);
    assert!(json(&o)["result"].as_array().unwrap().len() >= 4);
}

#[test]
fn sweep_is_deterministic_and_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"tree": "zd:4", "seed": 11, "sweep": {"deltas": [0.5, 8.0], "rt_depth": 1024, "walk_depth": 40,
            "walk_replicas": 30, "walk_budget": 100000, "percolation_depth": 256, "percolation_trials": 50,
            "conductance_depths": [64, 256]}}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["sweep", "phase", "--config", p(&cfg), "--out", p(&a)]).status.success());
    assert!(run(&["--threads", "1", "sweep", "phase", "--config", p(&cfg), "--out", p(&b)]).status.success());
    let ja = std::fs::read(a.with_extension("json")).unwrap();
    assert_eq!(ja, std::fs::read(b.with_extension("json")).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["config"]["seed"], 11);
    assert!(v["version"].is_string());
    assert!(v["cells"][0]["seed"].is_u64());
    let csv = std::fs::read_to_string(a.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn phase_sweep_on_zd4() {
    let o = run(&["--json", "sweep", "phase", "--tree", "zd:4", "--deltas", "0.5,1,2,3,4,6,8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    for cell in v["cells"].as_array().unwrap() {
        let delta = cell["delta"].as_f64().unwrap();
        let rt = cell["rt"].as_f64().unwrap();
        let esc = cell["escape_frequency"].as_f64().unwrap();
        assert!(cell["errors"].as_array().unwrap().is_empty());
        if delta <= 3.0 {
            assert!((rt - 2.0 / delta).abs() <= 0.1 * 2.0 / delta, "delta {delta}: rt {rt}");
        }
        if delta <= 1.0 {
            assert!(esc > 0.0, "delta {delta}");
        }
        if delta >= 4.0 {
            assert_eq!(esc, 0.0, "delta {delta}");
        }
    }
}
