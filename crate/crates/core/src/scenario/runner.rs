use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{apply_param, validate, ExperimentKind, ScenarioDoc, ScenarioError};
use crate::metrics::{fixed, write_atomic, CsvTable, MetricSet};
use crate::net::Simulation;

/// One simulation inside an experiment.
#[derive(Debug, Clone)]
pub struct Point {
    /// Value of the experiment parameter, absent for a plain run.
    pub value: Option<f64>,
    pub metrics: MetricSet,
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub kind: ExperimentKind,
    pub param: Option<String>,
    pub points: Vec<Point>,
    /// Experiment-level results such as `bisect.threshold`.
    pub results: BTreeMap<String, String>,
}

impl Outcome {
    /// Metrics of the first (for a plain run, the only) simulation.
    pub fn metrics(&self) -> &MetricSet {
        &self.points[0].metrics
    }

    pub fn result_f64(&self, key: &str) -> Option<f64> {
        self.results.get(key)?.parse().ok()
    }
}

/// Builds and runs `doc` once, ignoring its experiment section.
pub fn run_once(doc: &ScenarioDoc) -> Result<MetricSet, ScenarioError> {
    let mut sim = Simulation::new(doc).map_err(|e| ScenarioError::single("", e.0))?;
    sim.run()?;
    Ok(sim.world.metrics)
}

/// Chooses the output directory: explicit flag, then the document, then
/// `$ETHDAQ_OUT_DIR/<name>`, then `out/<name>`.
pub fn resolve_out_dir(explicit: Option<&Path>, doc: &ScenarioDoc) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &doc.output_dir {
        return PathBuf::from(p);
    }
    match std::env::var_os("ETHDAQ_OUT_DIR") {
        Some(base) if !base.is_empty() => PathBuf::from(base).join(&doc.name),
        _ => PathBuf::from("out").join(&doc.name),
    }
}

fn label(v: f64) -> String {
    format!("{v}")
}

fn with_value(doc: &ScenarioDoc, param: &str, v: f64) -> Result<ScenarioDoc, ScenarioError> {
    apply_param(doc, param, &label(v))
}

fn run_many(docs: Vec<ScenarioDoc>) -> Result<Vec<MetricSet>, ScenarioError> {
    let n = docs.len();
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<MetricSet, ScenarioError>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = run_once(&docs[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect()
}

fn lost(m: &MetricSet) -> u64 {
    let t = m.totals();
    t.dropped_switch + t.dropped_host
}

/// Runs the experiment described by `doc`. When `out` is given the reports
/// are written there.
pub fn run_doc(doc: &ScenarioDoc, out: Option<&Path>) -> Result<Outcome, ScenarioError> {
    let issues = validate(doc);
    if !issues.is_empty() {
        return Err(ScenarioError::Invalid(issues));
    }
    let e = &doc.experiment;
    let param = e.param.clone();
    let mut results = BTreeMap::new();
    let points = match e.kind {
        ExperimentKind::Single => vec![Point {
            value: None,
            metrics: run_once(doc)?,
        }],
        ExperimentKind::Sweep => {
            let p = param.as_deref().unwrap_or_default();
            let docs = e.values.iter().map(|&v| with_value(doc, p, v)).collect::<Result<Vec<_>, _>>()?;
            run_many(docs)?
                .into_iter()
                .zip(&e.values)
                .map(|(metrics, &v)| Point { value: Some(v), metrics })
                .collect()
        }
        ExperimentKind::Bisect => {
            let p = param.as_deref().unwrap_or_default();
            let (mut lo, mut hi) = (e.lo.unwrap_or(0.0), e.hi.unwrap_or(1.0));
            let res = e.resolution.unwrap_or(0.01);
            let mut points = vec![];
            let probe = |v: f64, points: &mut Vec<Point>| -> Result<bool, ScenarioError> {
                let metrics = run_once(&with_value(doc, p, v)?)?;
                let ok = lost(&metrics) == 0;
                points.push(Point { value: Some(v), metrics });
                Ok(ok)
            };
            let threshold = if probe(hi, &mut points)? {
                Some(hi)
            } else if !probe(lo, &mut points)? {
                None
            } else {
                while hi - lo > res {
                    let mid = 0.5 * (lo + hi);
                    if probe(mid, &mut points)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(lo)
            };
            results.insert("bisect.threshold".into(), threshold.map_or("none".into(), fixed));
            points
        }
        ExperimentKind::MacProbe => {
            let metrics = run_once(doc)?;
            let source = e.measure_source.as_deref().unwrap_or_default();
            let listener = e.listener.as_deref().unwrap_or_default();
            let s = doc.sources.iter().find(|s| s.name == source).expect("validated");
            let pattern = s.destinations[0].pattern.expect("validated");
            let flow = metrics
                .find_flow(&format!("{source}/{}", pattern.label()))
                .ok_or_else(|| ScenarioError::single("experiment.measure_source", "measuring flow not found"))?;
            let host = doc.hosts.iter().position(|h| h.name == listener).expect("validated") as u32;
            let sent = metrics.flow(flow).sent;
            let flooded = metrics.host_received(host, flow);
            results.insert("probe.sent".into(), sent.to_string());
            results.insert("probe.flooded".into(), flooded.to_string());
            results.insert("probe.learned".into(), sent.saturating_sub(flooded).to_string());
            vec![Point { value: None, metrics }]
        }
    };
    let outcome = Outcome {
        name: doc.name.clone(),
        kind: e.kind,
        param,
        points,
        results,
    };
    if let Some(dir) = out {
        write_outcome(&outcome, dir)?;
    }
    Ok(outcome)
}

fn write_outcome(o: &Outcome, dir: &Path) -> Result<(), ScenarioError> {
    let param = o.param.as_deref().unwrap_or("value");
    match o.kind {
        ExperimentKind::Single | ExperimentKind::MacProbe => o.points[0].metrics.export_csv(dir)?,
        ExperimentKind::Sweep | ExperimentKind::Bisect => {
            let mut long = CsvTable::new(&[param, "key", "value"]);
            for p in &o.points {
                let v = label(p.value.unwrap_or_default());
                p.metrics.export_csv(&dir.join(format!("{}={v}", param.replace('*', "all"))))?;
                for (k, val) in p.metrics.summary_entries() {
                    long.row(vec![v.clone(), k.to_string(), val.to_string()]);
                }
            }
            let name = if o.kind == ExperimentKind::Sweep {
                "sweep.csv"
            } else {
                "bisect.csv"
            };
            write_atomic(&dir.join(name), &long.render())?;
        }
    }
    if !o.results.is_empty() {
        let mut t = CsvTable::new(&["key", "value"]);
        for (k, v) in &o.results {
            t.row(vec![k.clone(), v.clone()]);
        }
        write_atomic(&dir.join("results.csv"), &t.render())?;
    }
    Ok(())
}
