use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
replications = 2

[workload]
type1_counts = [2, 3]

[sensitivity]
weights = [0.0, 0.5, 1.0]

[hops]
type1_counts = [1, 2]
worst_node_limit = 20000
"#;

fn vfc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vfc")).args(args).output().unwrap()
}

fn run(verb: &str, cfg: &Path, out: &Path) -> std::process::Output {
    vfc(&[verb, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    for (verb, file) in [
        ("run-cases", "results.csv"),
        ("sensitivity", "sensitivity.csv"),
        ("penalty", "penalty.csv"),
        ("hops", "hops.csv"),
    ] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        assert!(run(verb, &cfg, &a).status.success(), "{verb}");
        assert!(run(verb, &cfg, &b).status.success(), "{verb}");
        let x = std::fs::read(a.join(file)).unwrap();
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{verb}");
        assert!(x.len() > 50);
    }
    let text = std::fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    // 3 cases x 2 kinds x 2 seeds x 2 counts x 2 solvers
    assert_eq!(text.lines().count(), 1 + 48);
    let sens = std::fs::read_to_string(dir.path().join("a/sensitivity.csv")).unwrap();
    assert_eq!(sens.lines().count(), 1 + 6);
}

#[test]
fn seed_offset_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run("run-cases", &cfg, &a).status.success());
    let o = vfc(&["run-cases", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed-offset", "5"]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("results.csv")).unwrap(), std::fs::read(b.join("results.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "replications = 0\n").unwrap();
    assert_eq!(run("run-cases", &bad, dir.path()).status.code(), Some(2));
    assert_eq!(run("run-cases", &dir.path().join("missing.toml"), dir.path()).status.code(), Some(2));

    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    // output directory blocked by a regular file
    let blocker = dir.path().join("blocked");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(run("hops", &cfg, &blocker.join("sub")).status.code(), Some(4));

    let counts = dir.path().join("counts.csv");
    std::fs::write(&counts, "site_id,flow_id,interval_minutes,timestamp,count\n").unwrap();
    let o = vfc(&["traffic", "--counts", counts.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    // a cluster with no camera-capable nodes cannot host any stream
    let none = dir.path().join("none.toml");
    std::fs::write(&none, format!("{SMALL}\n[cluster]\ncamera_fraction = 0.0\n")).unwrap();
    assert_eq!(run("hops", &none, &dir.path().join("n")).status.code(), Some(3));
}

#[test]
fn traffic_verb_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    let mut text = String::from("site_id,flow_id,interval_minutes,timestamp,count\n");
    for i in 0..24 {
        text.push_str(&format!("s1,nb,15,{},{}\n", i * 900, 100 + (i * 13) % 40));
        text.push_str(&format!("s1,sb,15,{},{}\n", i * 900, 300 + (i * 7) % 30));
    }
    std::fs::write(&counts, text).unwrap();
    let out = dir.path().join("out");
    let o = vfc(&["traffic", "--counts", counts.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = std::fs::read_to_string(out.join("traffic_report.csv")).unwrap();
    assert!(rep.starts_with("flow_id,slope,intercept,r_value,p_value,std_err"));
    assert_eq!(rep.lines().count(), 3);
    assert!(out.join("los.csv").exists() && out.join("capacity.csv").exists());
}
