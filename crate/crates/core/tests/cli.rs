use std::path::Path;
use std::process::{Command, Output};

fn ethdaq(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ethdaq"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ETHDAQ_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PAIR: &str = r#"
name = "pair"

[run]
duration_ms = 5.0

[[switches]]
name = "sw"
ports = 2

[[hosts]]
name = "a"

[[hosts]]
name = "b"

[[links]]
a = "a"
b = "sw:0"

[[links]]
a = "b"
b = "sw:1"

[[sources]]
name = "ab"
host = "a"
load = 0.3
destinations = [{ host = "b" }]
"#;

#[test]
fn list_names_every_canned_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = ethdaq(&["list"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for e in ethdaq::scenario::catalog() {
        let line = text.lines().find(|l| l.starts_with(e.name)).unwrap();
        assert!(line.contains(e.golden), "{line}");
    }
}

#[test]
fn run_file_writes_reports_to_default_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pair.toml"), PAIR).unwrap();
    let o = ethdaq(&["run", "pair.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("conservation_violations = 0"));
    for f in ["summary.csv", "flows.csv", "latency.csv"] {
        assert!(dir.path().join("out/pair").join(f).exists(), "{f}");
    }
}

#[test]
fn out_dir_env_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pair.toml"), PAIR).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ethdaq"))
        .args(["run", "pair.toml"])
        .current_dir(dir.path())
        .env("ETHDAQ_OUT_DIR", "reports")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("reports/pair/summary.csv").exists());
}

#[test]
fn invalid_file_exits_1_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = PAIR.replace("b = \"sw:1\"", "b = \"core:1\"");
    std::fs::write(dir.path().join("bad.toml"), bad).unwrap();
    for cmd in ["run", "validate"] {
        let o = ethdaq(&[cmd, "bad.toml"], dir.path());
        assert_eq!(o.status.code(), Some(1));
        let err = stderr(&o);
        assert!(err.contains("line 23") && err.contains("core:1"), "{err}");
    }
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_scenario_exits_1_listing_known_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = ethdaq(&["run", "no_such_thing"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fc_congestion"));
}

#[test]
fn bad_param_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pair.toml"), PAIR).unwrap();
    for p in ["sources.zz.load=0.1", "noequals", "sources.ab.load=2.0"] {
        let o = ethdaq(&["run", "pair.toml", "--param", p], dir.path());
        assert_eq!(o.status.code(), Some(1), "{p}: {}", stderr(&o));
    }
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pair.toml"), PAIR).unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let o = ethdaq(&["run", "pair.toml", "--out", "blocker/sub"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn validate_and_show_canned_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let o = ethdaq(&["validate", "vlan_suite"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches(": ok").count(), 6);
    let o = ethdaq(&["show", "fc_congestion"], dir.path());
    let text = stdout(&o);
    let body = text.split_once('\n').unwrap().1;
    assert_eq!(ethdaq::scenario::parse(body).unwrap().name, "fc_congestion");
}

#[test]
fn congestion_at_half_load_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let o = ethdaq(
        &[
            "run",
            "fc_congestion",
            "--alpha",
            "0.5",
            "--out",
            "o",
            "--param",
            "run.duration_ms=50",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("switch_drops = 0") && text.contains("host_drops = 0"), "{text}");
    let flows = std::fs::read_to_string(dir.path().join("o/flows.csv")).unwrap();
    assert!(flows.lines().count() > 3);
}

#[test]
fn seed_flag_changes_poisson_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let poisson = PAIR.replace("load = 0.3", "load = 0.3\npattern = \"poisson\"");
    std::fs::write(dir.path().join("p.toml"), poisson).unwrap();
    let sent = |seed: &str, out: &str| {
        let o = ethdaq(&["run", "p.toml", "--seed", seed, "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join(out).join("flows.csv")).unwrap()
    };
    assert_eq!(sent("1", "a"), sent("1", "b"));
    assert_ne!(sent("1", "a"), sent("2", "c"));
}
