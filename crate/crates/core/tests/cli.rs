use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "problem": {"kind": "random_rendezvous", "n": 5, "d": 1},
  "graph": {"kind": "g1"},
  "gamma": "auto",
  "seed": 11,
  "audit": {"adversaries": [4, 5], "target": 1, "kappa": 60, "delta_ladder": [1.0, 1e4],
            "eavesdropper_channel": [1, 2], "attack": true},
  "advise": {"synthetic": {"n": 2, "eta": 0.5, "l": 1.0, "q1": 1.0, "q2": 1.0, "q3": 1.0,
                           "r_r": 0.5, "r_p": 0.5, "n_bar": 2}}
}"#;

fn ppsd(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ppsd"));
    cmd.args(args).env_remove("PPSD_OUT_DIR");
    if let Some(p) = env_out {
        cmd.env("PPSD_OUT_DIR", p);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_is_byte_identical_across_invocations_and_sidecar_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    for out in [&a, &b] {
        let o = ppsd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("run.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("run.csv")).unwrap());

    let side = a.join("run.json");
    let o = ppsd(&["run", "--quiet", "--config", side.to_str().unwrap(), "--out", c.to_str().unwrap()], None);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(csv_a, fs::read(c.join("run.csv")).unwrap());

    let stdout = String::from_utf8(ppsd(&["run", "--config", &cfg, "--out", a.to_str().unwrap()], None).stdout).unwrap();
    assert!(stdout.contains("final residual") && stdout.contains("fitted lambda"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let base = tmp.path().join("base");
    let other = tmp.path().join("other");
    ppsd(&["run", "-q", "--config", &cfg, "--out", base.to_str().unwrap()], None);
    ppsd(&["run", "-q", "--config", &cfg, "--out", other.to_str().unwrap(), "--seed", "12"], None);
    assert_ne!(fs::read(base.join("run.csv")).unwrap(), fs::read(other.join("run.csv")).unwrap());
    let side: serde_json::Value = serde_json::from_slice(&fs::read(other.join("run.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 12);
}

#[test]
fn missing_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"problem": {"kind": "random_rendezvous", "n": 5, "d": 1}, "graph": {"kind": "g1"}}"#);
    let o = ppsd(&["run", "--config", &cfg, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));

    let o = ppsd(&["run", "--config", "/nonexistent/cfg.json"], None);
    assert_eq!(o.status.code(), Some(2));

    let mismatched = CONFIG.replace("\"n\": 5", "\"n\": 4");
    let cfg = write_config(tmp.path(), &mismatched);
    let o = ppsd(&["run", "--config", &cfg, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    // Valid config, but agent 2 never sends, so the graph is not strongly connected.
    let text = CONFIG.replace(r#"{"kind": "g1"}"#, r#"{"kind": "edges", "n": 5, "edges": [[2,1],[3,1],[4,3],[5,4],[1,5]]}"#);
    let cfg = write_config(tmp.path(), &text);
    let o = ppsd(&["run", "--config", &cfg, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn out_dir_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let env_dir = tmp.path().join("from_env");
    let o = ppsd(&["compare", "-q", "--config", &cfg], Some(&env_dir));
    assert!(o.status.success());
    let csv = fs::read_to_string(env_dir.join("compare.csv")).unwrap();
    assert!(csv.starts_with("k,ppsd_residual,pushpull_residual\n"));
}

#[test]
fn audit_and_advise_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("o");
    let o = ppsd(&["privacy-audit", "-q", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let audit: serde_json::Value = serde_json::from_slice(&fs::read(out.join("audit.json")).unwrap()).unwrap();
    let kinds: Vec<&str> = audit["audits"].as_array().unwrap().iter().map(|a| a["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["coalition_sweep", "eavesdropper_sweep", "inference_attack"]);
    for a in &audit["audits"].as_array().unwrap()[..2] {
        assert_eq!(a["result"]["passes"], a["result"]["total"]);
    }
    assert!(out.join("gradients.csv").exists() && out.join("attacker_view.csv").exists());

    let o = ppsd(&["advise", "-q", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    let advice: serde_json::Value = serde_json::from_slice(&fs::read(out.join("advice.json")).unwrap()).unwrap();
    assert!(advice["advice"]["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn surrounded_target_is_reported_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let text = CONFIG.replace("\"adversaries\": [4, 5]", "\"adversaries\": [2, 3, 4, 5]");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("o");
    let o = ppsd(&["privacy-audit", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("every neighbor"));
}
