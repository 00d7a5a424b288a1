use std::path::Path;

use kmfg_cli::{run, EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, OUT_DIR_ENV, SCHEMA_VERSION};
use serde_json::Value;

fn kmfg(args: &[&str]) -> i32 {
    run(std::iter::once("kmfg").chain(args.iter().copied()))
}

fn report(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn out(dir: &tempfile::TempDir) -> String {
    dir.path().join("out").display().to_string()
}

#[test]
fn missing_required_flag_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kmfg(&["forward-spectrum", "--out", &out(&dir)]), EXIT_INVALID);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_values_are_rejected_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let o = out(&dir);
    for args in [
        vec!["mfg-rc", "--k", "1", "--sigma=-2", "--out", &o],
        vec!["mfg-rc", "--k", "1", "--r-lo", "1.5", "--r-hi", "1.0", "--out", &o],
        vec!["forward-simulate", "--nx", "7", "--out", &o],
        vec!["forward-spectrum", "--k", "9", "--out", &o],
        vec!["mfg-picard", "--damping", "1.5", "--out", &o],
        vec!["no-such-command"],
        vec!["forward-spectrum", "--k", "1", "--bogus", "3", "--out", &o],
    ] {
        assert_eq!(kmfg(&args), EXIT_INVALID, "{args:?}");
    }
    assert!(!dir.path().join("out").exists());
}

#[test]
fn spectrum_report_embeds_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let o = out(&dir);
    assert_eq!(kmfg(&["forward-spectrum", "--k", "1,2", "--sigma", "0.8", "--out", &o]), EXIT_OK);
    let r = report(Path::new(&o), "forward-spectrum");
    assert_eq!(r["schema_version"], SCHEMA_VERSION);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["config"]["model"]["sigma"], 0.8);
    assert_eq!(r["config"]["model"]["p"], 20);
    assert_eq!(r["config"]["k"], serde_json::json!([1, 2]));
    assert_eq!(r["result"]["modes"][0]["stable"], false);
    let csv = std::fs::read_to_string(Path::new(&o).join("forward-spectrum-spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,re,im"));
    // 20 eigenvalues per mode
    assert_eq!(lines.count(), 40);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let o = out(&dir);
    std::fs::write(&cfg, format!("# shared\nsigma = 1.5\nk = 2\nr_lo = 0.4\nout = {o}\n")).unwrap();
    let cfg = cfg.display().to_string();
    assert_eq!(kmfg(&["forward-spectrum", "--config", &cfg, "--sigma", "0.9"]), EXIT_OK);
    let r = report(Path::new(&o), "forward-spectrum");
    assert_eq!(r["config"]["model"]["sigma"], 0.9);
    assert_eq!(r["config"]["k"], serde_json::json!([2]));

    std::fs::write(dir.path().join("bad.cfg"), "nonsense_key = 1\n").unwrap();
    let bad = dir.path().join("bad.cfg").display().to_string();
    assert_eq!(kmfg(&["forward-spectrum", "--config", &bad, "--k", "1"]), EXIT_INVALID);
}

#[test]
fn environment_selects_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    std::env::set_var(OUT_DIR_ENV, &target);
    let code = kmfg(&["mfg-spectrum", "--k", "1", "--r", "1.2"]);
    std::env::remove_var(OUT_DIR_ENV);
    assert_eq!(code, EXIT_OK);
    let r = report(&target, "mfg-spectrum");
    assert_eq!(r["result"]["modes"][0]["verdict"]["verdict"], "stable");
}

#[test]
fn numerical_failure_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = out(&dir);
    // both ends stable: bisection has nothing to find
    assert_eq!(
        kmfg(&["forward-sigma-c", "--k", "1", "--sigma-lo", "2.0", "--sigma-hi", "2.5", "--out", &o]),
        EXIT_NUMERICAL
    );
    let r = report(Path::new(&o), "forward-sigma-c");
    assert_eq!(r["status"], "numerical_failure");
    assert_eq!(r["error"]["kind"], "invalid_bracket");
    assert_eq!(r["config"]["sigma_lo"], 2.0);

    // below the critical cost the decoupling does not exist
    assert_eq!(kmfg(&["mfg-bvp", "--k", "1", "--r", "0.8", "--out", &o]), EXIT_NUMERICAL);
    assert_eq!(report(Path::new(&o), "mfg-bvp")["error"]["kind"], "on_axis_eigenvalue");
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = out(d);
        assert_eq!(kmfg(&["mfg-bvp", "--k", "1", "--r", "1.4", "--p", "22", "--seed", "7", "--out", &o]), EXIT_OK);
        let sim = [
            "forward-simulate",
            "--sigma",
            "0.8",
            "--nx",
            "16",
            "--nu",
            "16",
            "--t-final",
            "4",
            "--eps",
            "0.1",
            "--record-every",
            "20",
            "--out",
            &o,
        ];
        assert_eq!(kmfg(&sim), EXIT_OK);
    }
    for file in ["mfg-bvp-trajectory.csv", "forward-simulate-trajectory.csv", "forward-simulate-marginals.csv"] {
        let x = std::fs::read(a.path().join("out").join(file)).unwrap();
        let y = std::fs::read(b.path().join("out").join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
    let strip = |d: &tempfile::TempDir| {
        let mut r = report(&d.path().join("out"), "mfg-bvp");
        r["config"]["out_dir"] = Value::Null;
        r
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(kmfg(&["--help"]), EXIT_OK);
    assert_eq!(kmfg(&["mfg-rc", "--help"]), EXIT_OK);
}
