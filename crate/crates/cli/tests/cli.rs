//! End-to-end runs of the `invmm` binary on temporary configs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use invmm_cli::parse_config;

const ABM: &str = "\
kind = abm
sigma = 0.05
s0 = 1
A = 1500
k = 100
T = 1
gamma = 1
eta = 0.0001
strategy = linear_penalty, exponential
seed = 11
n_steps = 1000
n_paths = 200
";

fn invmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invmm")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn quotes_prints_one_row_per_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ABM);
    let text = stdout(&invmm(&["quotes", "--config", &cfg, "--q", "-2"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("strategy,belief,sweep,value,delta_ask,delta_bid,spread"));
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "linear_penalty");
    // Short inventory: half-spread 1/k + eta, skewed by 2 eta q toward buying.
    let (ask, bid): (f64, f64) = (fields[4].parse().unwrap(), fields[5].parse().unwrap());
    assert!((ask - 0.0105).abs() < 1e-9 && (bid - 0.0097).abs() < 1e-9, "{ask} {bid}");
    assert!(lines[2].starts_with("exponential,"));
}

#[test]
fn path_writes_every_grid_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = ABM.replace("strategy = linear_penalty, exponential", "strategy = linear");
    let cfg = write_config(dir.path(), &body);
    stdout(&invmm(&["path", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out.join("path.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,s,ask,bid,q,x,pnl");
    assert_eq!(lines.len(), 1002);
    assert!(lines[1].starts_with("0.000000,1.000000,"));
    assert!(lines[1001].starts_with("1.000000,"));
}

#[test]
fn path_without_order_flow_keeps_inventory_and_cash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = ABM
        .replace("A = 1500", "A = 0")
        .replace("strategy = linear_penalty, exponential", "strategy = linear")
        + "q0 = 3\nx0 = -2.5\n";
    let cfg = write_config(dir.path(), &body);
    stdout(&invmm(&["path", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out.join("path.csv")).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[4], f[5]), ("3", "-2.500000"), "{line}");
    }
}

#[test]
fn table_writes_manifest_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), ABM);
    let args =
        ["table", "--config", &cfg, "--seed", "5", "--paths", "50", "--out", out.to_str().unwrap()];
    stdout(&invmm(&args));

    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("strategy,belief,sweep,value,n,mean,std_dev,sharpe"));
    assert!(lines[1].starts_with("linear_penalty,model,,,50,"));

    let manifest = parse_config(&fs::read_to_string(out.join("manifest.cfg")).unwrap()).unwrap();
    let mut expected = parse_config(ABM).unwrap();
    expected.seed = 5;
    expected.n_paths = 50;
    expected.output_dir = out.clone();
    assert_eq!(manifest, expected);
}

#[test]
fn table_can_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &format!("{ABM}table_format = json\n"));
    stdout(&invmm(&["table", "--config", &cfg, "--paths", "20", "--out", out.to_str().unwrap()]));
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("table.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["strategy"], "exponential");
    assert_eq!(rows[1]["n"], 20);
}

#[test]
fn ode_dumps_the_value_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = ABM.replace("strategy = linear_penalty, exponential", "strategy = ode_exponential")
        + "q_max = 5\node_steps = 100\n";
    let cfg = write_config(dir.path(), &body);
    stdout(&invmm(&["ode", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out.join("ode.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,q,v");
    assert_eq!(lines.len(), 1 + 101 * 11);
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(last[2].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn bad_value_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &ABM.replace("k = 100", "k = fast"));
    let out = invmm(&["quotes", "--config", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn empty_config_names_a_missing_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = invmm(&["table", "--config", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn missing_config_file_fails_cleanly() {
    let out = invmm(&["ode", "--config", "/nonexistent/run.cfg"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: reading"));
}
