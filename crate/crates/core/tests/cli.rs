use std::path::Path;
use std::process::{Command, Output};

fn hopres(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopres"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn limits_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = hopres(dir.path(), &["limits", "--d", "1", "--q", "d1(psi)", "--q0", "zero", "--out", "lim"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    let v = json(&dir.path().join("lim.json"));
    assert_eq!(v["schema"], 1);
    assert_eq!(v["result"]["case"], "III");
    assert_eq!(v["result"]["gamma"], "3/2");
    let l = v["result"]["L"][0].as_f64().unwrap();
    assert!(l > 0.0);
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(dir.path().join("lim.csv")).unwrap();
    assert!(csv.starts_with("quantity,re,im\nL,"), "{csv}");
}

#[test]
fn resonances_rerun_is_bit_identical_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "resonances", "--q0", "zero", "--q", "psi", "--law", "rademacher", "--N", "20", "--seed", "7", "--box",
            "-3,3,-3,0.5", "--out", out,
        ]
    };
    assert!(hopres(dir.path(), &args("a")).status.success());
    let mut b = args("b");
    b.extend(["--workers", "1"]);
    assert!(hopres(dir.path(), &b).status.success());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
    let v = json(&dir.path().join("a.json"));
    assert!(!v["result"]["resonances"].as_array().unwrap().is_empty());

    let r = hopres(dir.path(), &["replay", "a.json"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
    assert!(String::from_utf8_lossy(&r.stdout).contains("identical"));
}

#[test]
fn replay_reports_differences() {
    let dir = tempfile::tempdir().unwrap();
    assert!(hopres(dir.path(), &["profile-info", "--q", "d2(psi)", "--points", "11", "--out", "p"]).status.success());
    let path = dir.path().join("p.json");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"vanishing_order\": 2"));
    std::fs::write(&path, text.replace("\"vanishing_order\": 2", "\"vanishing_order\": 3")).unwrap();
    let r = hopres(dir.path(), &["replay", "p.json"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stdout).contains("$.result.vanishing_order"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# Case III constants\nsubcommand = limits\nq = d1(psi)\nq0 = zero\nd = 1\n",
    )
    .unwrap();
    let out = hopres(dir.path(), &["limits", "--config", "run.cfg", "--q", "psi", "--out", "c"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("c.json"));
    assert_eq!(v["config"]["q"], "psi");
    assert_eq!(v["result"]["case"], "I");
    // A config written for another subcommand is rejected.
    let out = hopres(dir.path(), &["hnorm", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["limits", "--bogus", "1"],
        vec!["no-such-command"],
        vec!["limits", "--q", "psi("],
        vec!["resonances", "--q", "psi", "--N", "10"],
        vec!["hw-tail", "--q", "psi", "--N", "8", "--M", "10", "--seed", "1"],
    ] {
        let out = hopres(dir.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(hopres(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn hnorm_and_hw_tail_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = hopres(dir.path(), &["hnorm", "--q", "psi", "--N", "4,8", "--seed", "3", "--s", "2", "--out", "h"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("h.json"));
    for row in v["result"]["rows"].as_array().unwrap() {
        assert!(row["rel_gap"].as_f64().unwrap() < 1e-6);
    }
    let out = hopres(
        dir.path(),
        &["hw-tail", "--q", "psi", "--N", "8", "--M", "200", "--seed", "1", "--out", "t"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.starts_with("t,t2,empirical_p,wilson_lo,wilson_hi\n"));
    assert!(csv.lines().count() > 2);
}
