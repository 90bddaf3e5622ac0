use std::path::Path;
use std::process::Command;

fn slowbeat(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_slowbeat")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path) -> String {
    let cfg = r#"{"participants": 3, "seed": 4,
        "blocks": {"duration_s": 60, "probe_gap_s": [8, 12]}}"#;
    let p = dir.join("config.json");
    std::fs::write(&p, cfg).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_features_stats_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();
    slowbeat(&["simulate", "--config", &cfg, "--out", out_s, "--signals"]);
    let logs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    assert_eq!(logs.len(), 15);
    assert!(out.join("p00_1_EG_ecg.csv").exists());

    // features recomputed from the logs equal the table written by simulate
    let table = tmp.path().join("table.csv");
    slowbeat(&["features", out_s, "--out", table.to_str().unwrap()]);
    assert_eq!(std::fs::read(&table).unwrap(), std::fs::read(out.join("features.csv")).unwrap());

    let contrasts = tmp.path().join("contrasts.json");
    std::fs::write(
        &contrasts,
        r#"{"contrasts":[{"name":"hr","column":"hr_bpm_norm","a":"DSG","b":"DSGR","test":"paired_t"}]}"#,
    )
    .unwrap();
    let res = slowbeat(&["stats", table.to_str().unwrap(), contrasts.to_str().unwrap()]);
    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("name,column,a,b,test,n,"));
    assert!(lines.next().unwrap().starts_with("hr,hr_bpm_norm,DSG,DSGR,paired_t,3,0,"));

    for l in &logs {
        slowbeat(&["replay", l.to_str().unwrap()]);
    }

    let beats = slowbeat(&["detect", out.join("p00_1_EG_ecg.csv").to_str().unwrap()]);
    let text = String::from_utf8(beats.stdout).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["t"].is_f64() && first["amp"].is_f64());
    assert!(text.lines().count() > 50);
}

#[test]
fn replay_rejects_a_tampered_log() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("run");
    slowbeat(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--fidelity", "beat-level", "--no-training"]);
    let log = out.join("p00_0_EG.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    // move one beat by a millisecond
    let k = text.find(r#"{"type":"beat","t":"#).unwrap() + r#"{"type":"beat","t":"#.len();
    let end = k + text[k..].find(',').unwrap();
    let t: f64 = text[k..end].parse().unwrap();
    let tampered = format!("{}{}{}", &text[..k], t + 0.001, &text[end..]);
    std::fs::write(&log, tampered).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_slowbeat")).args(["replay", log.to_str().unwrap()]).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("replay differs"));
}

#[test]
fn bad_config_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("c.json");
    std::fs::write(&p, r#"{"participants": 1}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_slowbeat"))
        .args(["simulate", "--config", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2"));
}
