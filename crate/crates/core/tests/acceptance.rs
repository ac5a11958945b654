//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every canned scenario is run twice into separate directories; the first
//! run feeds the per-criterion checks and the pair feeds the determinism
//! check. Run with `cargo test --test acceptance -- --nocapture` to see the
//! report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ethdaq::metrics::MetricSet;
use ethdaq::scenario::{apply_param, builtin, catalog, run_doc, Outcome};
use ethdaq::sim::SimTime;

const LINE_BYTES_PER_S: f64 = 125e6;

struct EntryRun {
    outcomes: BTreeMap<String, Outcome>,
    elapsed: Duration,
    identical: Result<(), String>,
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn compare(a: &Path, b: &Path) -> Result<(), String> {
    let (fa, fb) = (files(a), files(b));
    if fa.keys().ne(fb.keys()) {
        return Err("different file sets".into());
    }
    for (k, v) in &fa {
        if fb[k] != *v {
            return Err(format!("{} differs", k.display()));
        }
    }
    if fa.is_empty() {
        return Err("no output".into());
    }
    Ok(())
}

fn run_entry(name: &str, root: &Path) -> EntryRun {
    let docs = builtin(name).unwrap();
    let t = Instant::now();
    let mut outcomes = BTreeMap::new();
    for d in &docs {
        let o = run_doc(d, Some(&root.join("a").join(&d.name))).unwrap_or_else(|e| panic!("{}: {e}", d.name));
        outcomes.insert(d.name.clone(), o);
    }
    let elapsed = t.elapsed();
    for d in &docs {
        run_doc(d, Some(&root.join("b").join(&d.name))).unwrap();
    }
    EntryRun {
        outcomes,
        elapsed,
        identical: compare(&root.join("a"), &root.join("b")),
    }
}

fn u(m: &MetricSet, key: &str) -> u64 {
    m.summary(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn goodput(m: &MetricSet, label: &str) -> f64 {
    m.goodput_fraction(m.find_flow(label).unwrap_or_else(|| panic!("no flow {label}")))
}

fn flow_lost(m: &MetricSet, label: &str) -> u64 {
    m.flow(m.find_flow(label).unwrap()).dropped()
}

/// Largest uniform scale at which every receiver stays within its line:
/// the receiver with the largest offered sum saturates first.
fn congestion_onset(shares: &[(&str, f64)]) -> f64 {
    let mut per_rx: BTreeMap<&str, f64> = BTreeMap::new();
    for (rx, s) in shares {
        *per_rx.entry(rx).or_default() += s;
    }
    1.0 / per_rx.values().cloned().fold(0.0, f64::max)
}

/// Highest class first, each class takes what it offers up to what is left.
fn water_fill(offered: &[f64], capacity: f64) -> Vec<f64> {
    let mut left = capacity;
    let mut out = vec![0.0; offered.len()];
    for c in (0..offered.len()).rev() {
        out[c] = offered[c].min(left);
        left -= out[c];
    }
    out
}

/// Goodput of sender flows `s0/r`..`s7/r` summed per class of two.
fn class_goodput(m: &MetricSet) -> Vec<f64> {
    (0..4)
        .map(|c| goodput(m, &format!("s{}/r", 2 * c)) + goodput(m, &format!("s{}/r", 2 * c + 1)))
        .collect()
}

struct Report {
    lines: Vec<(u32, bool, String)>,
}

impl Report {
    fn check(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        println!("[{}] {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((id, ok, name.to_string()));
    }
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let names: Vec<&str> = catalog().iter().map(|e| e.name).collect();
    let runs: BTreeMap<&str, EntryRun> = std::thread::scope(|s| {
        let handles: Vec<_> = names
            .iter()
            .map(|&n| {
                let root = tmp.path().join(n);
                (n, s.spawn(move || run_entry(n, &root)))
            })
            .collect();
        handles.into_iter().map(|(n, h)| (n, h.join().unwrap())).collect()
    });
    let one = |entry: &str, doc: &str| -> &Outcome { &runs[entry].outcomes[doc] };
    println!();
    let mut r = Report { lines: vec![] };

    let fc_shares = [("A", 1.0), ("A", 0.3), ("B", 0.7), ("A", 0.5), ("C", 0.5)];
    let onset = congestion_onset(&fc_shares);

    // 1
    let th = one("fc_threshold", "fc_threshold");
    let alpha = th.result_f64("bisect.threshold").unwrap_or(f64::NAN);
    let secs = runs["fc_threshold"].elapsed.as_secs_f64();
    r.check(
        1,
        "congestion threshold",
        (alpha - 0.556).abs() <= 0.01 && secs < 30.0,
        format!(
            "loss onset alpha = {alpha:.4} (oracle {onset:.4}, want 0.556 +- 0.01), {} probes in {secs:.1} s",
            th.points.len()
        ),
    );

    // 2
    let base = builtin("fc_congestion").unwrap().remove(0);
    let off = apply_param(&base, "fc", "false").unwrap();
    let m = run_doc(&off, None).unwrap().points.remove(0).metrics;
    let (yb, zc) = (goodput(&m, "y/B"), goodput(&m, "z/C"));
    let lost = flow_lost(&m, "y/B") + flow_lost(&m, "z/C");
    r.check(
        2,
        "HOL-freedom",
        (yb - 0.7).abs() <= 0.005 && (zc - 0.5).abs() <= 0.005 && lost == 0,
        format!("fc off, alpha 1: Y->B {yb:.4}, Z->C {zc:.4}, lost on those flows {lost}"),
    );

    // 3
    let m = one("fc_congestion", "fc_congestion").metrics();
    let (yb, zc) = (goodput(m, "y/B"), goodput(m, "z/C"));
    let (eb, ec) = (0.7 * onset, 0.5 * onset);
    let drops = u(m, "switch_drops");
    r.check(
        3,
        "FC congestion spreading",
        drops == 0 && (yb - eb).abs() <= 0.01 && (zc - ec).abs() <= 0.01,
        format!("Y->B {yb:.4} (oracle {eb:.4}), Z->C {zc:.4} (oracle {ec:.4}), switch drops {drops}"),
    );

    // 4
    let m = one("dead_node", "dead_node").metrics();
    let window = SimTime::from_millis(5);
    let last = |label: &str| {
        let id = m.find_flow(label).unwrap();
        m.throughput(id, window).last().map_or(f64::NAN, |(_, b)| b / LINE_BYTES_PER_S)
    };
    let (tb, tc) = (last("y/B"), last("z/C"));
    let drops = u(m, "switch_drops");
    r.check(
        4,
        "dead node",
        tb < 0.01 && tc < 0.01 && drops == 0,
        format!("final-window throughput B {tb:.5}, C {tc:.5} of line, switch drops {drops}"),
    );

    // 5
    let m = one("qos_wrr", "qos_wrr").metrics();
    let got = class_goodput(m);
    let weights = [10.0, 20.0, 30.0, 40.0];
    let total: f64 = weights.iter().sum();
    let dev = got.iter().zip(weights).map(|(g, w)| (g - w / total).abs()).fold(0.0, f64::max);
    r.check(
        5,
        "QoS WRR",
        dev <= 0.02,
        format!("class shares {:.4?} of line, max deviation {dev:.4}", got),
    );

    // 6
    let o = one("qos_strict", "qos_strict");
    let mut worst = 0.0f64;
    for p in &o.points {
        let a = p.value.unwrap();
        let want = water_fill(&[0.25 * a; 4], 1.0);
        let got = class_goodput(&p.metrics);
        worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(worst, f64::max);
    }
    r.check(
        6,
        "QoS strict",
        worst <= 0.02 && !o.points.is_empty(),
        format!("{} sweep points, max deviation from water-fill {worst:.4}", o.points.len()),
    );

    // 7
    let probe = |doc: &str| one("mac_probe", doc).result_f64("probe.learned").unwrap_or(f64::NAN) as u64;
    let ideal: Vec<(u64, u64)> = [70, 1000, 4096]
        .iter()
        .map(|&c| (c, probe(&format!("mac_probe_ideal_{c}"))))
        .collect();
    let rows = [
        "linear_octets_45",
        "linear_octets_34",
        "linear_octets_23",
        "random_octets_345",
        "mixed",
    ];
    let want_rows = [4096, 70, 70, 4096, 4096];
    let bucket: Vec<u64> = rows.iter().map(|r| probe(&format!("mac_probe_bucket_{r}"))).collect();
    r.check(
        7,
        "MAC probe",
        ideal.iter().all(|(c, l)| c == l) && bucket == want_rows,
        format!("ideal (capacity, learned) {ideal:?}; hash-bucket rows {bucket:?}"),
    );

    // 8
    let o = one("aging", "aging");
    let floods = |aging: f64| {
        o.points
            .iter()
            .find(|p| p.value == Some(aging))
            .map(|p| u(&p.metrics, "floods_after_warmup"))
    };
    let (long, short) = (floods(300_000.0), floods(25.0));
    r.check(
        8,
        "aging",
        long == Some(0) && short.is_some_and(|f| f > 0),
        format!("floods after warm-up: {long:?} at 300 s, {short:?} at 25 ms"),
    );

    // 9
    let mut leaks = 0;
    let mut frames = u64::MAX;
    for doc in ["vlan_single", "vlan_disjoint", "vlan_overlapping"] {
        let m = one("vlan_suite", doc).metrics();
        leaks += u(m, "vlan_leaks") + u(m, "vlan_violations");
        frames = frames.min(u(m, "frames_sent"));
    }
    let part = one("vlan_suite", "vlan_partition");
    let vlan1 = |m: &MetricSet| {
        let ids: Vec<String> = m
            .flows_table()
            .rows()
            .iter()
            .filter(|r| ["h0", "h1", "h2", "h3"].contains(&r[1].as_str()))
            .map(|r| r[0].clone())
            .collect();
        let t = m.latency_table();
        t.rows()
            .iter()
            .filter(|r| ids.contains(&r[0]))
            .map(|r| r.join(","))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let ref_lat = vlan1(&part.points[0].metrics);
    let same = part.points.iter().all(|p| vlan1(&p.metrics) == ref_lat) && !ref_lat.is_empty();
    let v2_sent: Vec<u64> = part
        .points
        .iter()
        .map(|p| p.metrics.flow(p.metrics.find_flow("v2/h5").unwrap()).sent)
        .collect();
    let storm = u(one("vlan_suite", "vlan_loop").metrics(), "storm");
    let calm = u(one("vlan_suite", "vlan_loop_separated").metrics(), "storm");
    r.check(
        9,
        "VLAN suite",
        leaks == 0 && frames >= 1_000_000 && same && storm == 1 && calm == 0,
        format!(
            "{leaks} boundary violations, >= {frames} frames per layout; VLAN1 latency identical across VLAN2 sends {v2_sent:?}: {same}; storm {storm} without separation, {calm} with"
        ),
    );

    // 10
    let o = one("saturation_sweep", "saturation_sweep");
    let stats = |m: &MetricSet| {
        let t = m.totals();
        let loss = t.dropped() as f64 / t.sent as f64;
        let lats: Vec<f64> = m
            .flows()
            .filter(|(i, _)| !i.label.starts_with("hello_"))
            .filter_map(|(i, _)| m.steady_mean_latency_ns(i.id))
            .collect();
        (loss, lats.iter().sum::<f64>() / lats.len() as f64)
    };
    let low = stats(&o.points[0].metrics).1;
    let mut ok = !o.points.is_empty();
    let mut cells = vec![];
    for p in &o.points {
        let v = p.value.unwrap();
        let (loss, lat) = stats(&p.metrics);
        cells.push(format!("{v}:{loss:.3}/{:.1}x", lat / low));
        if v <= 0.6 + 1e-9 {
            ok &= loss == 0.0 && lat <= 2.0 * low;
        } else if v >= 0.7 - 1e-9 {
            ok &= loss > 0.0 && lat >= 10.0 * low;
        }
    }
    let (full_loss, _) = stats(one("saturation_sweep", "saturation_full_fabric").metrics());
    r.check(
        10,
        "saturation sweep",
        ok && full_loss < 1e-6,
        format!(
            "load:loss/latency-vs-low [{}]; full fabric at 95%: loss {full_loss:.2e}",
            cells.join(" ")
        ),
    );

    // 11
    let m = one("trunk_balance", "trunk_balance").metrics();
    let census: Vec<u64> = m
        .summary("sw.sw1.trunk0.census")
        .unwrap()
        .split(' ')
        .map(|c| c.parse().unwrap())
        .collect();
    let conns = u(m, "sw.sw1.trunk0.connections");
    let reorders: u64 = runs
        .values()
        .flat_map(|e| e.outcomes.values())
        .flat_map(|o| o.points.iter())
        .map(|p| u(&p.metrics, "reorders"))
        .sum();
    r.check(
        11,
        "trunking",
        reorders == 0 && conns == 1600 && census.iter().all(|&c| c.abs_diff(800) <= 40),
        format!("{conns} connections split {census:?}; reorders over all runs {reorders}"),
    );

    // 12
    let m = one("dataflow_e2e", "dataflow_e2e").metrics();
    let (inj, term) = (u(m, "df.events_injected"), u(m, "df.events_terminal"));
    let t = m.totals();
    let rate = m.summary_f64("df.flush_rate_hz").unwrap_or(f64::NAN);
    let clear = u(m, "df.clear_complete");
    r.check(
        12,
        "dataflow end-to-end",
        inj > 0 && inj == term && t.dropped() == 0 && (rate - 300.0).abs() <= 30.0 && clear == 1,
        format!(
            "{term}/{inj} events terminal, {} frames lost of {}, flush rate {rate:.1} Hz, clear complete {clear}",
            t.dropped(),
            t.sent
        ),
    );

    // 13
    let bad: Vec<String> = runs
        .iter()
        .filter_map(|(n, e)| e.identical.as_ref().err().map(|why| format!("{n}: {why}")))
        .collect();
    let slowest = runs
        .iter()
        .max_by_key(|(_, e)| e.elapsed)
        .map(|(n, e)| (*n, e.elapsed.as_secs_f64()))
        .unwrap();
    r.check(
        13,
        "determinism",
        bad.is_empty() && slowest.1 < 60.0,
        format!(
            "{} canned scenarios run twice, mismatches {bad:?}; slowest {} at {:.1} s",
            runs.len(),
            slowest.0,
            slowest.1
        ),
    );

    let failed: Vec<String> = r
        .lines
        .iter()
        .filter(|(_, ok, _)| !ok)
        .map(|(i, _, n)| format!("{i} {n}"))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn oracles_match_hand_values() {
    let onset = congestion_onset(&[("A", 1.0), ("A", 0.3), ("B", 0.7), ("A", 0.5), ("C", 0.5)]);
    assert!((onset - 0.5556).abs() < 1e-4);
    assert!((0.7 * onset - 0.3889).abs() < 1e-4 && (0.5 * onset - 0.2778).abs() < 1e-4);
    assert_eq!(water_fill(&[0.5; 4], 1.0), vec![0.0, 0.0, 0.5, 0.5]);
    assert_eq!(
        water_fill(&[0.3; 4], 1.0).iter().map(|x| (x * 10.0f64).round()).collect::<Vec<_>>(),
        vec![1.0, 3.0, 3.0, 3.0]
    );
}
