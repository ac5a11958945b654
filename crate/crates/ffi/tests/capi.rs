use std::ffi::{c_char, CStr, CString};
use std::ptr;

use ethdaq_ffi::*;

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

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ethdaq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut EthdaqScenario {
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { ethdaq_scenario_parse(c(text).as_ptr(), &mut sc) }, EthdaqStatus::Ok);
    sc
}

fn value(run: *const EthdaqRun, point: usize, key: &str) -> Result<f64, EthdaqStatus> {
    let mut v = f64::NAN;
    match unsafe { ethdaq_run_value(run, point, c(key).as_ptr(), &mut v) } {
        EthdaqStatus::Ok => Ok(v),
        s => Err(s),
    }
}

#[test]
fn parse_run_and_read_summary() {
    let sc = parse(PAIR);
    assert_eq!(unsafe { ethdaq_scenario_count(sc) }, 1);
    let dir = tempfile::tempdir().unwrap();
    let out = c(dir.path().to_str().unwrap());
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { ethdaq_scenario_run(sc, 0, out.as_ptr(), &mut run) }, EthdaqStatus::Ok);
    assert!(ethdaq_last_error().is_null());
    assert_eq!(unsafe { ethdaq_run_points(run) }, 1);
    let sent = value(run, 0, "frames_sent").unwrap();
    assert!(sent > 0.0);
    assert_eq!(value(run, 0, "frames_delivered").unwrap(), sent);
    assert_eq!(value(run, 0, "conservation_violations").unwrap(), 0.0);
    assert!(dir.path().join("summary.csv").exists());

    assert_eq!(value(run, 0, "no_such_key"), Err(EthdaqStatus::NotFound));
    assert!(last_error().contains("no_such_key"));
    assert_eq!(value(run, 3, "frames_sent"), Err(EthdaqStatus::NotFound));
    unsafe {
        ethdaq_run_free(run);
        ethdaq_scenario_free(sc);
    }
}

#[test]
fn text_output_reports_required_size() {
    let sc = parse(PAIR);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { ethdaq_scenario_run(sc, 0, ptr::null(), &mut run) }, EthdaqStatus::Ok);
    let key = c("frames_sent");
    let mut need = 0usize;
    let mut small = [0 as c_char; 1];
    let s = unsafe { ethdaq_run_text(run, 0, key.as_ptr(), small.as_mut_ptr(), small.len(), &mut need) };
    assert_eq!(s, EthdaqStatus::BufferTooSmall);
    assert!(need > 1);
    let mut buf = vec![0 as c_char; need];
    let s = unsafe { ethdaq_run_text(run, 0, key.as_ptr(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(s, EthdaqStatus::Ok);
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert_eq!(text.parse::<f64>().unwrap(), value(run, 0, "frames_sent").unwrap());
    unsafe {
        ethdaq_run_free(run);
        ethdaq_scenario_free(sc);
    }
}

#[test]
fn render_round_trips_through_parse() {
    let sc = parse(PAIR);
    let mut need = 0;
    let s = unsafe { ethdaq_scenario_render(sc, 0, ptr::null_mut(), 0, &mut need) };
    assert_eq!(s, EthdaqStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; need];
    assert_eq!(
        unsafe { ethdaq_scenario_render(sc, 0, buf.as_mut_ptr(), need, ptr::null_mut()) },
        EthdaqStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    let again = parse(&text);
    let mut name = [0 as c_char; 16];
    assert_eq!(
        unsafe { ethdaq_scenario_name(again, 0, name.as_mut_ptr(), 16, ptr::null_mut()) },
        EthdaqStatus::Ok
    );
    assert_eq!(unsafe { CStr::from_ptr(name.as_ptr()) }.to_str().unwrap(), "pair");
    unsafe {
        ethdaq_scenario_free(sc);
        ethdaq_scenario_free(again);
    }
}

#[test]
fn set_param_changes_the_run_and_rejects_bad_keys() {
    let sc = parse(PAIR);
    let set = |k: &str, v: &str| unsafe { ethdaq_scenario_set_param(sc, c(k).as_ptr(), c(v).as_ptr()) };
    assert_eq!(set("sources.ab.load", "0"), EthdaqStatus::Ok);
    assert_eq!(set("switches.nope.ports", "4"), EthdaqStatus::Param);
    assert!(last_error().contains("switches.nope.ports"));
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { ethdaq_scenario_run(sc, 0, ptr::null(), &mut run) }, EthdaqStatus::Ok);
    assert_eq!(value(run, 0, "frames_sent").unwrap(), 0.0);
    unsafe {
        ethdaq_run_free(run);
        ethdaq_scenario_free(sc);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(
            ethdaq_scenario_load(c("no_such_scenario").as_ptr(), &mut sc),
            EthdaqStatus::UnknownScenario
        );
        assert!(last_error().contains("saturation_sweep"));
        assert_eq!(ethdaq_scenario_load(ptr::null(), &mut sc), EthdaqStatus::NullArgument);
        assert_eq!(ethdaq_scenario_parse(c("name = 3").as_ptr(), &mut sc), EthdaqStatus::Invalid);
        let bad = PAIR.replace("load = 0.3", "load = 1.5");
        assert_eq!(ethdaq_scenario_parse(c(&bad).as_ptr(), &mut sc), EthdaqStatus::Invalid);
        assert!(last_error().contains("load"), "{}", last_error());
        assert_eq!(ethdaq_scenario_parse(c(PAIR).as_ptr(), &mut sc), EthdaqStatus::Ok);
        assert_eq!(
            ethdaq_scenario_set_param(sc, c("sources.ab.load").as_ptr(), c("1.5").as_ptr()),
            EthdaqStatus::Ok
        );
        let mut run = ptr::null_mut();
        assert_eq!(ethdaq_scenario_run(sc, 0, ptr::null(), &mut run), EthdaqStatus::Invalid);
        assert!(last_error().contains("sources[0].load"), "{}", last_error());
        assert!(run.is_null());
        assert_eq!(ethdaq_scenario_run(sc, 1, ptr::null(), &mut run), EthdaqStatus::NotFound);
        ethdaq_scenario_free(sc);
        assert_eq!(ethdaq_scenario_count(ptr::null()), 0);
        ethdaq_scenario_free(ptr::null_mut());
        ethdaq_run_free(ptr::null_mut());
    }
}

#[test]
fn canned_scenarios_load_by_name() {
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { ethdaq_scenario_load(c("vlan_suite").as_ptr(), &mut sc) }, EthdaqStatus::Ok);
    assert_eq!(unsafe { ethdaq_scenario_count(sc) }, 6);
    unsafe { ethdaq_scenario_free(sc) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ethdaq.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct EthdaqScenario EthdaqScenario;"));
    assert!(header.contains("ETHDAQ_STATUS_OK = 0"));
}
