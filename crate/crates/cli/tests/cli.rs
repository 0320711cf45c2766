use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bnnpn::blueprints::{gen_function_mapper, table_sign, ValueDomain};
use bnnpn::io::{read_csv, read_json, read_native, read_pnml, write_native};

fn bnnpn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnnpn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn analyze_prints_size_table_and_presets() {
    let dir = tempfile::tempdir().unwrap();
    let o = bnnpn(&["analyze"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("Sign function"));
    assert!(out.contains("Full PN BNN Model"));
    assert!(out.contains("KWS6 134x377"));
    assert!(out.contains("1.130"));

    let o = bnnpn(&["analyze", "--format", "csv", "--arch", "tiny:2:2,1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("estimate_1e9")).count(), 10);
    assert!(out.lines().any(|l| l.starts_with("size,Sign function,")));

    let o = bnnpn(&["analyze", "--arch", "broken"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn generate_and_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = bnnpn(&["generate", "--out", "net.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("net.txt")).unwrap();
    let (net, ports) = read_native(&text).unwrap();
    assert_eq!(write_native(&net, &ports).unwrap(), text);

    let o = bnnpn(&["export", "net.txt", "--format", "pnml", "--out", "net.pnml"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let back = read_pnml(&fs::read_to_string(dir.path().join("net.pnml")).unwrap()).unwrap();
    assert_eq!(back, net);

    let o = bnnpn(&["export", "net.txt", "--format", "dot"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("digraph"));

    let o = bnnpn(&["export", "net.txt", "--format", "csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_writes_one_row_per_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[run]\nepochs = 1\nseeds = [3]\n");
    let o = bnnpn(&["simulate", &cfg, "--out", "sim"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sim/metrics.csv")).unwrap();
    let rows = read_csv(&csv, 2, 2).unwrap();
    assert_eq!(rows.len(), 4);
    let json = read_json(&fs::read_to_string(dir.path().join("sim/metrics.json")).unwrap()).unwrap();
    assert_eq!(json, rows);
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let exact = write(dir.path(), "a.toml", "[run]\nepochs = 2\nseeds = [1, 2]\n");
    let o = bnnpn(&["compare", &exact, "--out", "cmp.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 mismatches"));
    assert!(dir.path().join("cmp.json").exists());

    let native = write(dir.path(), "b.toml", "[run]\nepochs = 2\nseeds = [1]\nmode = \"native-float\"\n");
    let o = bnnpn(&["compare", &native], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_tiers_and_net_files() {
    let dir = tempfile::tempdir().unwrap();
    for tier in ["segment", "system"] {
        let o = bnnpn(&["verify", "--tier", tier], dir.path());
        assert_eq!(o.status.code(), Some(0), "{tier}: {}", stdout(&o));
    }
    let o = bnnpn(&["verify", "--tier", "system", "--out", "sys.json"], dir.path());
    assert!(stdout(&o).contains("reversible"));
    let report = fs::read_to_string(dir.path().join("sys.json")).unwrap();
    assert!(report.contains("\"Violated\"") || report.contains("\"violated\""));

    let sign = gen_function_mapper("sign", &table_sign(&ValueDomain::ternary())).unwrap();
    let net = write(dir.path(), "sign.net", &write_native(&sign.net, &sign.ports).unwrap());
    let o = bnnpn(&["verify", &net], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let tiny = write(dir.path(), "tiny.toml", "[run]\nstate_budget = 3\n");
    let o = bnnpn(&["verify", &tiny, "--tier", "segment"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));

    let corrupt = write(dir.path(), "bad.net", "bnnpn-net 1\nPLACES\np std \"p\"\nARCS\nin p nowhere\n");
    assert_eq!(bnnpn(&["verify", &corrupt], dir.path()).status.code(), Some(3));
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "[run]\nepohcs = 1\n");
    let o = bnnpn(&["simulate", &unknown], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epohcs"));
    assert_eq!(bnnpn(&["generate", "missing.toml"], dir.path()).status.code(), Some(3));
    let invalid = write(dir.path(), "v.toml", "[network]\nhidden = 0\n");
    assert_eq!(bnnpn(&["generate", &invalid], dir.path()).status.code(), Some(3));
}
