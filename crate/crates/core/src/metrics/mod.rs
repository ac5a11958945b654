//! Per-flow counters, latency histograms, throughput series and CSV export.

mod export;
mod histogram;

use std::collections::{BTreeMap, HashMap};

pub use export::{fixed, write_atomic, CsvTable, ExportError};
pub use histogram::{LatencyHistogram, LATENCY_BIN_NS};

use crate::ether::{wire_time, MacAddress};
use crate::sim::{Fault, SimTime};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowInfo {
    pub id: u32,
    /// Unique name used to look the flow up.
    pub label: String,
    pub src: String,
    pub dst: String,
}

/// Delivered bytes per window, keyed by window start.
#[derive(Debug, Clone, Default)]
pub struct Series {
    bins: BTreeMap<u64, u64>,
}

impl Series {
    pub fn add(&mut self, window_start_ns: u64, bytes: u64) {
        *self.bins.entry(window_start_ns).or_insert(0) += bytes;
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.bins.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Clone, Default)]
pub struct FlowStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped_switch: u64,
    pub dropped_host: u64,
    /// Extra copies created by flooding or multicast.
    pub replicated: u64,
    /// Copies discarded by design: address filters, VLAN rejects, a
    /// destination behind the ingress port.
    pub filtered: u64,
    pub delivered_bytes: u64,
    pub latency: LatencyHistogram,
    pub series: Series,
    /// Receiver wire time of frames delivered after warm-up.
    pub steady_wire_ns: u64,
    pub steady_frames: u64,
    pub steady_latency_sum_ns: u128,
}

impl FlowStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_switch + self.dropped_host
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRow {
    pub event_id: u64,
    pub state: &'static str,
    pub t_lvl1: Option<SimTime>,
    pub t_decision: Option<SimTime>,
    pub t_built: Option<SimTime>,
    pub t_cleared: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRow {
    pub link: String,
    pub direction: &'static str,
    pub frames: u64,
    pub bytes: u64,
    pub pause_ns: u64,
    pub pause_signals: u64,
    pub ignored_pauses: u64,
}

/// All measurements of one run.
#[derive(Debug, Clone)]
pub struct MetricSet {
    flows: Vec<(FlowInfo, FlowStats)>,
    pub warmup_end: SimTime,
    pub end: SimTime,
    pub series_window: SimTime,
    summary: BTreeMap<String, String>,
    pub events: Vec<EventRow>,
    pub links: Vec<LinkRow>,
    pub switches: CsvTable,
    /// Frames received per (host, flow).
    pub host_rx: BTreeMap<(u32, u32), u64>,
    last_seq: HashMap<(u32, u32, MacAddress, MacAddress), u64>,
    pub reorders: u64,
}

impl MetricSet {
    pub fn new(warmup_end: SimTime, end: SimTime, series_window: SimTime) -> Self {
        MetricSet {
            flows: vec![],
            warmup_end,
            end,
            series_window: if series_window == SimTime::ZERO {
                SimTime::from_millis(1)
            } else {
                series_window
            },
            summary: BTreeMap::new(),
            events: vec![],
            links: vec![],
            switches: CsvTable::new(&[]),
            host_rx: BTreeMap::new(),
            last_seq: HashMap::new(),
            reorders: 0,
        }
    }

    pub fn add_flow(&mut self, label: impl Into<String>, src: impl Into<String>, dst: impl Into<String>) -> u32 {
        let id = self.flows.len() as u32;
        self.flows.push((
            FlowInfo {
                id,
                label: label.into(),
                src: src.into(),
                dst: dst.into(),
            },
            FlowStats::default(),
        ));
        id
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn flow(&self, id: u32) -> &FlowStats {
        &self.flows[id as usize].1
    }

    pub fn flow_mut(&mut self, id: u32) -> &mut FlowStats {
        &mut self.flows[id as usize].1
    }

    pub fn flow_info(&self, id: u32) -> &FlowInfo {
        &self.flows[id as usize].0
    }

    pub fn flows(&self) -> impl Iterator<Item = (&FlowInfo, &FlowStats)> {
        self.flows.iter().map(|(i, s)| (i, s))
    }

    pub fn find_flow(&self, label: &str) -> Option<u32> {
        self.flows.iter().find(|(i, _)| i.label == label).map(|(i, _)| i.id)
    }

    /// Records a frame handed to the application of `host`.
    #[allow(clippy::too_many_arguments)]
    pub fn record_delivery(
        &mut self,
        flow: u32,
        host: u32,
        src: MacAddress,
        dst: MacAddress,
        seq: u64,
        size_bytes: u32,
        injected_at: SimTime,
        now: SimTime,
        rx_speed_bps: u64,
    ) -> Result<(), Fault> {
        let latency = now
            .checked_sub(injected_at)
            .ok_or_else(|| Fault::new(format!("negative latency for flow {flow}")))?;
        let window = self.series_window.as_nanos();
        let warm = now >= self.warmup_end;
        let s = &mut self.flows[flow as usize].1;
        s.delivered += 1;
        s.delivered_bytes += size_bytes as u64;
        s.latency.record(latency);
        s.series.add(now.as_nanos() / window * window, size_bytes as u64);
        if warm {
            s.steady_frames += 1;
            s.steady_latency_sum_ns += latency.as_nanos() as u128;
            s.steady_wire_ns += wire_time(size_bytes, rx_speed_bps).map_or(0, SimTime::as_nanos);
        }
        *self.host_rx.entry((host, flow)).or_insert(0) += 1;
        let last = self.last_seq.entry((flow, host, src, dst)).or_insert(0);
        if seq < *last {
            self.reorders += 1;
        } else {
            *last = seq;
        }
        Ok(())
    }

    pub fn host_received(&self, host: u32, flow: u32) -> u64 {
        self.host_rx.get(&(host, flow)).copied().unwrap_or(0)
    }

    fn steady_window(&self) -> SimTime {
        self.end.saturating_sub(self.warmup_end)
    }

    /// Delivered wire time after warm-up as a fraction of the receiver line.
    pub fn goodput_fraction(&self, flow: u32) -> f64 {
        let w = self.steady_window().as_nanos();
        if w == 0 {
            return 0.0;
        }
        self.flow(flow).steady_wire_ns as f64 / w as f64
    }

    /// Bytes per second in each series window after warm-up.
    pub fn throughput(&self, flow: u32, window: SimTime) -> Vec<(u64, f64)> {
        let base = self.series_window.as_nanos();
        let w = window.as_nanos().max(base) / base * base;
        let mut out: BTreeMap<u64, u64> = BTreeMap::new();
        let start = self.warmup_end.as_nanos().div_ceil(w) * w;
        let mut t = start;
        while t + w <= self.end.as_nanos() {
            out.insert(t, 0);
            t += w;
        }
        for (ws, bytes) in self.flow(flow).series.iter() {
            let k = ws / w * w;
            if let Some(v) = out.get_mut(&k) {
                *v += bytes;
            }
        }
        out.into_iter().map(|(k, b)| (k, b as f64 / (w as f64 * 1e-9))).collect()
    }

    /// `(dropped_switch + dropped_host) / sent`, absent when nothing was sent.
    pub fn loss_rate(&self, flow: u32) -> Option<f64> {
        let s = self.flow(flow);
        (s.sent > 0).then(|| s.dropped() as f64 / s.sent as f64)
    }

    /// Mean latency of frames delivered after warm-up.
    pub fn steady_mean_latency_ns(&self, flow: u32) -> Option<f64> {
        let s = self.flow(flow);
        (s.steady_frames > 0).then(|| s.steady_latency_sum_ns as f64 / s.steady_frames as f64)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.summary.insert(key.into(), value.into());
    }

    pub fn set_u64(&mut self, key: impl Into<String>, value: u64) {
        self.set(key, value.to_string());
    }

    pub fn set_f64(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, fixed(value));
    }

    pub fn summary(&self, key: &str) -> Option<&str> {
        self.summary.get(key).map(String::as_str)
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary(key)?.parse().ok()
    }

    pub fn summary_entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.summary.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn totals(&self) -> FlowStats {
        let mut t = FlowStats::default();
        for (_, s) in &self.flows {
            t.sent += s.sent;
            t.delivered += s.delivered;
            t.dropped_switch += s.dropped_switch;
            t.dropped_host += s.dropped_host;
            t.replicated += s.replicated;
            t.filtered += s.filtered;
        }
        t
    }

    pub fn flows_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["flow_id", "src", "dst", "sent", "delivered", "dropped_switch", "dropped_host"]);
        for (i, s) in &self.flows {
            t.row(vec![
                i.id.to_string(),
                i.src.clone(),
                i.dst.clone(),
                s.sent.to_string(),
                s.delivered.to_string(),
                s.dropped_switch.to_string(),
                s.dropped_host.to_string(),
            ]);
        }
        t
    }

    pub fn latency_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["flow_id", "bin_start_ns", "count"]);
        for (i, s) in &self.flows {
            for (start, count) in s.latency.dense() {
                t.row(vec![i.id.to_string(), start.to_string(), count.to_string()]);
            }
        }
        t
    }

    pub fn series_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["flow_id", "window_start_ns", "bytes"]);
        for (i, s) in &self.flows {
            for (start, bytes) in s.series.iter() {
                t.row(vec![i.id.to_string(), start.to_string(), bytes.to_string()]);
            }
        }
        t
    }

    pub fn events_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["event_id", "state", "t_lvl1", "t_decision", "t_built", "t_cleared"]);
        let opt = |x: Option<SimTime>| x.map_or(String::new(), |t| t.as_nanos().to_string());
        for e in &self.events {
            t.row(vec![
                e.event_id.to_string(),
                e.state.to_string(),
                opt(e.t_lvl1),
                opt(e.t_decision),
                opt(e.t_built),
                opt(e.t_cleared),
            ]);
        }
        t
    }

    pub fn links_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "link",
            "direction",
            "frames",
            "bytes",
            "pause_ns",
            "pause_signals",
            "ignored_pauses",
        ]);
        for l in &self.links {
            t.row(vec![
                l.link.clone(),
                l.direction.to_string(),
                l.frames.to_string(),
                l.bytes.to_string(),
                l.pause_ns.to_string(),
                l.pause_signals.to_string(),
                l.ignored_pauses.to_string(),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["key", "value"]);
        for (k, v) in &self.summary {
            t.row(vec![k.clone(), v.clone()]);
        }
        t
    }

    /// Writes every report into `dir`.
    pub fn export_csv(&self, dir: &std::path::Path) -> Result<(), ExportError> {
        std::fs::create_dir_all(dir).map_err(|e| ExportError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let files = [
            ("flows.csv", self.flows_table()),
            ("latency.csv", self.latency_table()),
            ("series.csv", self.series_table()),
            ("events.csv", self.events_table()),
            ("links.csv", self.links_table()),
            ("switches.csv", self.switches.clone()),
            ("summary.csv", self.summary_table()),
        ];
        for (name, table) in files {
            write_atomic(&dir.join(name), &table.render())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mac(v: u64) -> MacAddress {
        MacAddress::from_u64(v)
    }

    fn set() -> (MetricSet, u32) {
        let mut m = MetricSet::new(SimTime::from_millis(1), SimTime::from_millis(11), SimTime::from_millis(1));
        let f = m.add_flow("a/b", "a", "b");
        (m, f)
    }

    #[test]
    fn loss_rate_absent_without_traffic() {
        let (mut m, f) = set();
        assert_eq!(m.loss_rate(f), None);
        m.flow_mut(f).sent = 9;
        m.flow_mut(f).dropped_switch = 3;
        m.flow_mut(f).dropped_host = 1;
        assert!((m.loss_rate(f).unwrap() - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn goodput_counts_only_after_warmup() {
        let (mut m, f) = set();
        let t = |us| SimTime::from_micros(us);
        m.record_delivery(f, 0, mac(1), mac(2), 0, 1518, t(0), t(500), 1_000_000_000)
            .unwrap();
        for k in 0..10 {
            m.record_delivery(f, 0, mac(1), mac(2), k + 1, 1518, t(1000), t(1000 + k), 1_000_000_000)
                .unwrap();
        }
        // ten 12 304 ns frames in a 10 ms window
        assert!((m.goodput_fraction(f) - 10.0 * 12_304.0 / 1e7).abs() < 1e-12);
        assert_eq!(m.flow(f).delivered, 11);
        assert_eq!(m.host_received(0, f), 11);
    }

    #[test]
    fn reorders_are_detected_per_connection() {
        let (mut m, f) = set();
        let now = SimTime::from_millis(2);
        for seq in [1, 2, 4, 3, 5] {
            m.record_delivery(f, 0, mac(1), mac(2), seq, 64, SimTime::ZERO, now, 1).unwrap();
        }
        m.record_delivery(f, 0, mac(7), mac(2), 0, 64, SimTime::ZERO, now, 1).unwrap();
        assert_eq!(m.reorders, 1);
    }

    #[test]
    fn broadcast_copies_are_ordered_per_receiver() {
        let (mut m, f) = set();
        let now = SimTime::from_millis(2);
        for (host, seq) in [(0, 1), (0, 2), (1, 1), (1, 2)] {
            m.record_delivery(f, host, mac(1), MacAddress::BROADCAST, seq, 64, SimTime::ZERO, now, 1)
                .unwrap();
        }
        assert_eq!(m.reorders, 0);
    }

    #[test]
    fn negative_latency_is_a_fault() {
        let (mut m, f) = set();
        let err = m.record_delivery(f, 0, mac(1), mac(2), 0, 64, SimTime::from_nanos(5), SimTime::from_nanos(4), 1);
        assert!(err.is_err());
    }

    #[test]
    fn flat_series_for_constant_delivery() {
        let (mut m, f) = set();
        for k in 0..11_000u64 {
            let t = SimTime::from_micros(k);
            m.record_delivery(f, 0, mac(1), mac(2), k, 125, t, t, 1_000_000_000).unwrap();
        }
        let tp = m.throughput(f, SimTime::from_millis(1));
        assert_eq!(tp.len(), 10);
        assert!(tp.iter().all(|&(_, r)| (r - 125e6).abs() < 1.0), "{tp:?}");
    }

    #[test]
    fn empty_run_exports_header_only_files() {
        let m = MetricSet::new(SimTime::ZERO, SimTime::from_millis(1), SimTime::from_millis(1));
        let dir = tempfile::tempdir().unwrap();
        m.export_csv(dir.path()).unwrap();
        let flows = std::fs::read_to_string(dir.path().join("flows.csv")).unwrap();
        assert_eq!(flows, "flow_id,src,dst,sent,delivered,dropped_switch,dropped_host\n");
        let lat = std::fs::read_to_string(dir.path().join("latency.csv")).unwrap();
        assert_eq!(lat, "flow_id,bin_start_ns,count\n");
    }
}
