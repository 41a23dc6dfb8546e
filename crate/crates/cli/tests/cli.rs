use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spreadtime"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn homogeneous_spec(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "homog.json",
        r#"{"groups":[{"size":100,"infectivity":1.0,"susceptibility":1.0,"seeds":1}],"rates":[[4.14e-4]],"rate_units":"per_hour"}"#,
    )
}

fn small_spec(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "small.json",
        r#"{"groups":[{"size":5,"infectivity":1.0,"susceptibility":1.0,"seeds":1},
                      {"size":5,"infectivity":1.0,"susceptibility":1.0,"seeds":0}],
            "rates":[[3.0,1.0],[1.0,0.3]]}"#,
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn cdf_grid_and_determinism() {
    let dir = TempDir::new().unwrap();
    let spec = small_spec(&dir);
    let out = dir.path().join("cdf.csv");
    let args = [
        "cdf",
        "--spec",
        s(&spec),
        "--alpha",
        "0.9",
        "--t",
        "0,0.5,2",
        "--out",
        s(&out),
    ];
    stdout(&run(&args));
    let first = fs::read_to_string(&out).unwrap();
    assert_eq!(first.lines().next(), Some("t,cdf,survival"));
    let rows = csv_rows(&first);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0);
    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cdf.json")).unwrap()).unwrap();
    assert_eq!(sidecar["command"], "cdf");
    assert!(sidecar["version"].is_string());
    stdout(&run(&args));
    assert_eq!(fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn guarantee_table() {
    let dir = TempDir::new().unwrap();
    let spec = homogeneous_spec(&dir);
    let text = stdout(&run(&[
        "guarantee",
        "--spec",
        s(&spec),
        "--alpha",
        "0.9",
        "--beta",
        "0.5,0.99",
        "--seeds",
        "1,10,20,95",
    ]));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 8);
    let g = |seeds: &str, beta: &str| -> f64 {
        rows.iter().find(|r| r[2] == seeds && r[1] == beta).unwrap()[3]
            .parse()
            .unwrap()
    };
    for (seeds, want) in [("1", 278.0), ("10", 137.0), ("20", 113.0)] {
        let got = g(seeds, "0.99");
        assert!((got / want - 1.0).abs() < 0.1, "{seeds}: {got}");
        assert!(g(seeds, "0.5") < got);
    }
    let trivial = rows.iter().find(|r| r[2] == "95").unwrap();
    assert_eq!(trivial[3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(trivial[5].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn plan_modes() {
    let dir = TempDir::new().unwrap();
    let spec = homogeneous_spec(&dir);
    let base = [
        "plan",
        "--spec",
        s(&spec),
        "--alpha",
        "0.9",
        "--beta",
        "0.99",
    ];
    let seeds: Value = serde_json::from_str(&stdout(&run(&[
        &base[..],
        &["--t-bound", "278", "--mode", "seeds"],
    ]
    .concat())))
    .unwrap();
    assert_eq!(seeds["answer"]["total_seeds"], 1);

    let rate: Value = serde_json::from_str(&stdout(&run(&[
        &base[..],
        &["--t-bound", "138.69763183646757", "--mode", "rate"],
    ]
    .concat())))
    .unwrap();
    let gamma = rate["answer"]["rate_scale"].as_f64().unwrap();
    assert!((gamma - 2.0).abs() < 1e-6, "{gamma}");

    let o = run(&[&base[..], &["--t-bound", "1", "--mode", "seeds"]].concat());
    assert_eq!(o.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "infeasible");
}

#[test]
fn invalid_spec_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        &dir,
        "bad.json",
        r#"{"groups":[{"size":3,"infectivity":1.5,"susceptibility":1.0,"seeds":1}],"rates":[[1.0]]}"#,
    );
    let o = run(&["moments", "--spec", s(&bad), "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "invalid_spec");
    assert_eq!(err["violations"][0]["kind"], "infectivity_out_of_range");

    let o = run(&[
        "moments",
        "--spec",
        s(&dir.path().join("missing.json")),
        "--alpha",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_reports_ks() {
    let dir = TempDir::new().unwrap();
    let spec = small_spec(&dir);
    let out = dir.path().join("samples.csv");
    let args = [
        "simulate",
        "--spec",
        s(&spec),
        "--alpha",
        "1",
        "--replications",
        "4000",
        "--rng-seed",
        "3",
        "--out",
        s(&out),
    ];
    stdout(&run(&args));
    let samples = fs::read_to_string(&out).unwrap();
    assert_eq!(samples.lines().count(), 4001);
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("samples.json")).unwrap())
            .unwrap();
    let ks = meta["summary"]["ks_distance"].as_f64().unwrap();
    let crit = meta["summary"]["ks_critical_99"].as_f64().unwrap();
    assert!(ks < crit, "{ks} vs {crit}");
    stdout(&run(&args));
    assert_eq!(fs::read_to_string(&out).unwrap(), samples);
}

#[test]
fn trace_generation_and_estimation() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "sparse.json",
        r#"{"groups":[{"size":5,"infectivity":1.0,"susceptibility":1.0,"seeds":1},
                      {"size":5,"infectivity":1.0,"susceptibility":1.0,"seeds":0}],
            "rates":[[0.05,0.02],[0.02,0.01]]}"#,
    );
    let trace = dir.path().join("trace.csv");
    let grouping = dir.path().join("groups.csv");
    stdout(&run(&[
        "gen-trace",
        "--spec",
        s(&spec),
        "--horizon",
        "2000",
        "--duration-mean",
        "600",
        "--rng-seed",
        "4",
        "--grouping-out",
        s(&grouping),
        "--out",
        s(&trace),
    ]));
    let est: Value = serde_json::from_str(&stdout(&run(&[
        "estimate",
        "--trace",
        s(&trace),
        "--grouping",
        s(&grouping),
        "--transfer-time",
        "30",
        "--horizon",
        "7200000",
    ])))
    .unwrap();
    let r = &est["rates"];
    assert!((r[0][0].as_f64().unwrap() / 0.05 - 1.0).abs() < 0.1);
    assert!((r[1][1].as_f64().unwrap() / 0.01 - 1.0).abs() < 0.25);
    assert_eq!(r[0][1], r[1][0]);
    let psi = est["groups"][0]["susceptibility"].as_f64().unwrap();
    assert!(psi > 0.0 && psi <= 1.0);

    let o = run(&["estimate", "--trace", s(&trace), "--transfer-time", "1e9"]);
    assert_eq!(o.status.code(), Some(3));

    let broken = write(&dir, "broken.csv", "node_a,node_b,start_s,end_s\na,b,1,x\n");
    let o = run(&["estimate", "--trace", s(&broken), "--transfer-time", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["line"], 2);
}

#[test]
fn hetero_sweep_rows() {
    let text = stdout(&run(&[
        "hetero-sweep",
        "--mean-rate",
        "1",
        "--n",
        "10",
        "--alpha",
        "0.3,1",
        "--beta",
        "0.9",
        "--grid-min",
        "0",
        "--grid-max",
        "4",
        "--grid-points",
        "3",
    ]));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 18);
    let f = |x: &str| x.parse::<f64>().unwrap();
    let cell = rows
        .iter()
        .find(|r| f(&r[0]) == 0.3 && f(&r[1]) == 2.0 && f(&r[2]) == 2.0)
        .unwrap();
    assert_eq!(cell[4], "0");
    // seed in the faster group with a slow second group
    let fast = rows
        .iter()
        .find(|r| f(&r[0]) == 0.3 && f(&r[1]) == 4.0 && f(&r[2]) == 0.0)
        .unwrap();
    assert_eq!(fast[4], "1");
}

#[test]
fn oracle_agrees() {
    let text = stdout(&run(&[
        "oracle", "--n", "50", "--lambda", "0.2", "--format", "json",
    ]));
    let doc: Value = serde_json::from_str(&text).unwrap();
    for row in doc["rows"].as_array().unwrap() {
        if let Some(d) = row["rel_diff"].as_f64() {
            assert!(d < 1e-8, "{row}");
        }
    }
}

#[test]
fn contribution_table() {
    let dir = TempDir::new().unwrap();
    let spec = small_spec(&dir);
    let rows = csv_rows(&stdout(&run(&[
        "contribution",
        "--spec",
        s(&spec),
        "--alpha",
        "0.9",
        "--beta",
        "0.99",
    ])));
    assert_eq!(rows.len(), 2);
    let ratio = |i: usize| rows[i][5].parse::<f64>().unwrap();
    assert!(ratio(0) > ratio(1));
}
