//! End-to-end runs of the `rsplab` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn rsplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsplab")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn config_path(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_owned()
}

const SMALL_MAP: &str = r#"
[params]
eta_c = 0.32
eta_s = 0.3
eta_d = 0.7

[sweep]
target = { rate = 0.01 }

[[sweep.axes]]
param = "sigma_sc"
min = 0.2
max = 0.2
points = 1

[[sweep.axes]]
param = "sigma_dsc"
min = 0.1
max = 0.1
points = 1
"#;

#[test]
fn curve_writes_three_protocols_per_grid_point() {
    let out = rsplab(&["curve", "--config", &config_path("curves.toml")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("protocol,"));
    assert_eq!(lines.count(), 600);
}

#[test]
fn single_cell_map_has_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "map.toml", SMALL_MAP);
    let csv = dir.path().join("map.csv");
    let out = rsplab(&["map", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "sigma_sc,sigma_dsc,winner,alpha_sq_used,metric");
    assert!(stdout(&out).is_empty());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let verify = write(&dir, "v.toml", "seed = 11\n[verify]\ntuples = 6\n");
    for (cmd, cfg) in [("map", config_path("sigma-map-eta03.toml")), ("verify", verify)] {
        let one = rsplab(&[cmd, "--config", &cfg, "--jobs", "1"]);
        let many = rsplab(&[cmd, "--config", &cfg, "--jobs", "8"]);
        assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
        assert_eq!(one.stdout, many.stdout, "{cmd}");
    }
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "v.toml", "seed = 1\n[verify]\ntuples = 2\n");
    let a = rsplab(&["verify", "--config", &cfg]);
    let b = rsplab(&["verify", "--config", &cfg, "--seed", "1"]);
    let c = rsplab(&["verify", "--config", &cfg, "--seed", "2"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn under_truncation_fails_verification() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "v.toml", "[verify]\ntuples = 3\nalpha_sq_range = [0.5, 0.5]\n");
    let out = rsplab(&["verify", "--config", &cfg, "--cutoff", "3"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stdout(&out).contains("truncat"), "{}", stdout(&out));
}

#[test]
fn empty_campaign_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "v.toml", "[verify]\ntuples = 0\n");
    let out = rsplab(&["verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty campaign"), "{}", stderr(&out));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let bad_eta = write(&dir, "a.toml", &SMALL_MAP.replace("eta_d = 0.7", "eta_d = 1.7"));
    let out = rsplab(&["map", "--config", &bad_eta]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("eta_d"), "{}", stderr(&out));

    let none = write(&dir, "b.toml", &SMALL_MAP.replace("[sweep]", "[sweep]\nprotocols = []"));
    let out = rsplab(&["map", "--config", &none]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no protocols selected"), "{}", stderr(&out));

    let unknown = write(&dir, "c.toml", "[params]\neta_q = 1.0\n");
    assert_eq!(rsplab(&["curve", "--config", &unknown]).status.code(), Some(1));

    let missing = dir.path().join("absent.toml");
    assert_eq!(rsplab(&["curve", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(rsplab(&["bogus"]).status.code(), Some(1));
}

#[test]
fn qkd_reports_bell_pairs_and_detuned_chains() {
    let out = rsplab(&["qkd", "--config", &config_path("qkd.toml")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1 + 3 * 4);

    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "q.toml", "[qkd]\nalphas = [0.3]\nswap_counts = [1]\nxi = 0.1\n");
    let out = rsplab(&["qkd", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let fidelity: f64 = row[5].parse().unwrap();
    assert!(fidelity < 1.0 - 1e-6, "{fidelity}");
}
