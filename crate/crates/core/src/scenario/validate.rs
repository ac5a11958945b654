use std::collections::{BTreeSet, HashMap, HashSet};

use super::{apply_param, ExperimentKind, Issue, ScenarioDoc};
use crate::config::{split_port_ref, MacTableMode, SchedulerKind};
use crate::ether::{MAX_FRAME_BYTES, MIN_FRAME_BYTES};
use crate::net::{Endpoint, World};
use crate::switch::DEFAULT_VLAN;

struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            line: None,
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.push(path, message);
        }
    }
}

fn fraction(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

/// Every problem in `doc`, in document order. Empty means valid.
pub fn validate(doc: &ScenarioDoc) -> Vec<Issue> {
    let mut v = Issues(vec![]);
    let r = &doc.run;
    v.check(
        r.duration_ms.is_finite() && r.duration_ms > 0.0,
        "run.duration_ms",
        "must be positive",
    );
    v.check(
        r.warmup_fraction.is_finite() && (0.0..1.0).contains(&r.warmup_fraction),
        "run.warmup_fraction",
        "must be in [0, 1)",
    );
    v.check(r.series_window_us > 0, "run.series_window_us", "must be positive");
    v.check(
        r.load_scale.is_finite() && r.load_scale >= 0.0,
        "run.load_scale",
        "must be non-negative",
    );

    let mut names: HashSet<&str> = HashSet::new();
    let mut ports_of: HashMap<&str, u16> = HashMap::new();
    for (i, s) in doc.switches.iter().enumerate() {
        let p = format!("switches[{i}]");
        v.check(
            !s.name.is_empty() && !s.name.contains(':'),
            format!("{p}.name"),
            "must be non-empty and free of ':'",
        );
        v.check(names.insert(&s.name), format!("{p}.name"), format!("duplicate name {:?}", s.name));
        ports_of.insert(&s.name, s.ports);
        v.check((1..=1024).contains(&s.ports), format!("{p}.ports"), "must be in 1..=1024");
        v.check(
            (1..=8).contains(&s.priority_classes),
            format!("{p}.priority_classes"),
            "must be in 1..=8",
        );
        if s.scheduler == SchedulerKind::Wrr {
            let classes = s.priority_classes as usize;
            v.check(
                s.wrr_weights.len() == classes && s.wrr_weights.iter().all(|&w| w > 0),
                format!("{p}.wrr_weights"),
                format!("needs {classes} positive weights"),
            );
        }
        v.check(
            s.fabric_capacity_fraction.is_finite() && s.fabric_capacity_fraction > 0.0 && s.fabric_capacity_fraction <= 1.0,
            format!("{p}.fabric_capacity_fraction"),
            "must be in (0, 1]",
        );
        v.check(
            s.xon_fraction > 0.0 && s.xon_fraction < s.xoff_fraction && s.xoff_fraction <= 1.0,
            format!("{p}.xon_fraction"),
            "need 0 < xon_fraction < xoff_fraction <= 1",
        );
        let classes = if s.scheduler == SchedulerKind::Fifo {
            1
        } else {
            s.priority_classes.max(1) as u64
        };
        v.check(
            s.egress_buffer_bytes / classes >= MAX_FRAME_BYTES as u64,
            format!("{p}.egress_buffer_bytes"),
            "must hold at least one maximum frame per class",
        );
        v.check(
            s.ingress_buffer_bytes >= MAX_FRAME_BYTES as u64,
            format!("{p}.ingress_buffer_bytes"),
            "must hold at least one maximum frame",
        );
        v.check(
            s.fabric_buffer_bytes >= MAX_FRAME_BYTES as u64,
            format!("{p}.fabric_buffer_bytes"),
            "must hold at least one maximum frame",
        );
        let m = &s.mac_table;
        v.check(
            m.aging_time_ms.is_finite() && m.aging_time_ms > 0.0,
            format!("{p}.mac_table.aging_time_ms"),
            "must be positive",
        );
        if let Some(si) = m.scan_interval_ms {
            v.check(
                si.is_finite() && si > 0.0,
                format!("{p}.mac_table.scan_interval_ms"),
                "must be positive",
            );
        }
        match m.mode {
            MacTableMode::Ideal => v.check(m.capacity > 0, format!("{p}.mac_table.capacity"), "must be positive"),
            MacTableMode::HashBucket => {
                v.check(
                    !m.key_bytes.is_empty() && m.key_bytes.iter().all(|&b| b < 6),
                    format!("{p}.mac_table.key_bytes"),
                    "must list octet indices in 0..6",
                );
                v.check(m.bucket_count > 0, format!("{p}.mac_table.bucket_count"), "must be positive");
                v.check(m.bucket_depth > 0, format!("{p}.mac_table.bucket_depth"), "must be positive");
            }
        }
        let mut in_trunk = HashSet::new();
        for (t, members) in s.trunks.iter().enumerate() {
            v.check(!members.is_empty(), format!("{p}.trunks[{t}]"), "must not be empty");
            for &m in members {
                v.check(m < s.ports, format!("{p}.trunks[{t}]"), format!("port {m} out of range"));
                v.check(
                    in_trunk.insert(m),
                    format!("{p}.trunks[{t}]"),
                    format!("port {m} is in more than one trunk"),
                );
            }
        }
        for (k, e) in s.static_entries.iter().enumerate() {
            v.check(e.port < s.ports, format!("{p}.static_entries[{k}].port"), "out of range");
        }
    }

    let mut host_ix: HashMap<&str, usize> = HashMap::new();
    for (i, h) in doc.hosts.iter().enumerate() {
        let p = format!("hosts[{i}]");
        v.check(
            !h.name.is_empty() && !h.name.contains(':'),
            format!("{p}.name"),
            "must be non-empty and free of ':'",
        );
        v.check(names.insert(&h.name), format!("{p}.name"), format!("duplicate name {:?}", h.name));
        host_ix.insert(&h.name, i);
        v.check(h.sockets >= 1, format!("{p}.sockets"), "must be at least 1");
        v.check(
            h.lazy_sockets.iter().all(|&s| s < h.sockets),
            format!("{p}.lazy_sockets"),
            "socket index out of range",
        );
        v.check(
            h.nic_tx_bytes >= MAX_FRAME_BYTES as u64,
            format!("{p}.nic_tx_bytes"),
            "must hold at least one maximum frame",
        );
        v.check(
            h.nic_rx_bytes >= MAX_FRAME_BYTES as u64,
            format!("{p}.nic_rx_bytes"),
            "must hold at least one maximum frame",
        );
        if let Some(k) = h.kernel_rate_mbytes {
            v.check(k.is_finite() && k > 0.0, format!("{p}.kernel_rate_mbytes"), "must be positive");
        }
        if let Some(mac) = h.mac {
            v.check(!mac.is_multicast(), format!("{p}.mac"), "must be a unicast address");
        }
    }

    let endpoint_ok = |s: &str| -> Result<(), String> {
        if host_ix.contains_key(s) {
            return Ok(());
        }
        match split_port_ref(s) {
            Some((sw, port)) => match ports_of.get(sw) {
                Some(&n) if port < n => Ok(()),
                Some(&n) => Err(format!("port {port} out of range on switch {sw:?} with {n} ports")),
                None => Err(format!("references undefined switch {sw:?} in {s:?}")),
            },
            None => Err(format!("references undefined host {s:?}")),
        }
    };
    let mut used = HashSet::new();
    for (i, l) in doc.links.iter().enumerate() {
        let p = format!("links[{i}]");
        for (end, name) in [("a", &l.a), ("b", &l.b)] {
            match endpoint_ok(name) {
                Ok(()) => v.check(
                    used.insert(name.clone()),
                    format!("{p}.{end}"),
                    format!("{name:?} is already attached to a link"),
                ),
                Err(e) => v.push(format!("{p}.{end}"), e),
            }
        }
        v.check(l.speed_mbps > 0, format!("{p}.speed_mbps"), "must be positive");
    }

    let mut defined: BTreeSet<u16> = BTreeSet::from([DEFAULT_VLAN]);
    for (i, vl) in doc.vlans.iter().enumerate() {
        let p = format!("vlans[{i}]");
        v.check((1..=4094).contains(&vl.id), format!("{p}.id"), "must be in 1..=4094");
        v.check(
            vl.id == DEFAULT_VLAN || defined.insert(vl.id),
            format!("{p}.id"),
            format!("VLAN {} defined twice", vl.id),
        );
        for (kind, list) in [("untagged", &vl.untagged), ("tagged", &vl.tagged)] {
            for (k, m) in list.iter().enumerate() {
                if let Err(e) = endpoint_ok(m) {
                    v.push(format!("{p}.{kind}[{k}]"), e);
                }
            }
        }
    }
    let vlan_ok = |id: u16| defined.contains(&id);

    for (i, s) in doc.sources.iter().enumerate() {
        let p = format!("sources[{i}]");
        let host = host_ix.get(s.host.as_str()).map(|&h| &doc.hosts[h]);
        v.check(
            host.is_some(),
            format!("{p}.host"),
            format!("references undefined host {:?}", s.host),
        );
        v.check(fraction(s.load), format!("{p}.load"), "must be in [0, 1]");
        v.check(
            (MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&s.frame_bytes),
            format!("{p}.frame_bytes"),
            format!("must be in {MIN_FRAME_BYTES}..={MAX_FRAME_BYTES}"),
        );
        v.check(s.priority <= 7, format!("{p}.priority"), "must be in 0..=7");
        if let Some(id) = s.vlan {
            v.check(vlan_ok(id), format!("{p}.vlan"), format!("VLAN {id} is not defined"));
        }
        v.check(
            s.start_us.is_finite() && s.start_us >= 0.0,
            format!("{p}.start_us"),
            "must be non-negative",
        );
        if let Some(stop) = s.stop_us {
            v.check(stop > s.start_us, format!("{p}.stop_us"), "must be after start_us");
        }
        if let Some(h) = host {
            v.check(s.socket < h.sockets.max(1), format!("{p}.socket"), "socket index out of range");
        }
        v.check(!s.destinations.is_empty(), format!("{p}.destinations"), "must not be empty");
        for (k, d) in s.destinations.iter().enumerate() {
            let dp = format!("{p}.destinations[{k}]");
            let set = d.host.is_some() as u8 + d.mac.is_some() as u8 + d.pattern.is_some() as u8;
            v.check(set == 1, dp.clone(), "needs exactly one of host, mac, pattern");
            if let Some(h) = &d.host {
                v.check(
                    host_ix.contains_key(h.as_str()),
                    format!("{dp}.host"),
                    format!("references undefined host {h:?}"),
                );
            }
            if let Some(c) = d.count {
                v.check((1..=65536).contains(&c), format!("{dp}.count"), "must be in 1..=65536");
            }
            if let Some(w) = d.weight {
                v.check(w.is_finite() && w >= 0.0, format!("{dp}.weight"), "must be non-negative");
            }
        }
    }

    let df_roles = doc.hosts.iter().any(|h| h.role.is_dataflow());
    if let Some(df) = &doc.dataflow {
        v.check(
            df.lvl1_rate_hz.is_finite() && df.lvl1_rate_hz > 0.0,
            "dataflow.lvl1_rate_hz",
            "must be positive",
        );
        v.check(fraction(df.accept_fraction), "dataflow.accept_fraction", "must be in [0, 1]");
        v.check(
            df.roi_min_robs >= 1 && df.roi_min_robs <= df.roi_max_robs,
            "dataflow.roi_min_robs",
            "need 1 <= roi_min_robs <= roi_max_robs",
        );
        v.check(df.roi_max_rounds >= 1, "dataflow.roi_max_rounds", "must be at least 1");
        v.check(
            df.l2pu_credits >= 1 && df.sfi_credits >= 1,
            "dataflow.l2pu_credits",
            "credits must be at least 1",
        );
        v.check(df.clear_batch_size >= 1, "dataflow.clear_batch_size", "must be at least 1");
        v.check(df.clear_timeout_us > 0.0, "dataflow.clear_timeout_us", "must be positive");
        v.check(df.request_timeout_us > 0.0, "dataflow.request_timeout_us", "must be positive");
        v.check(
            df.fragment_bytes > 0 && df.detail_record_bytes > 0,
            "dataflow.fragment_bytes",
            "must be positive",
        );
        v.check(df.clear_group.is_multicast(), "dataflow.clear_group", "must be a multicast address");
        v.check(df.control_priority <= 7, "dataflow.control_priority", "must be in 0..=7");
        v.check(!df.stages.is_empty(), "dataflow.stages", "must not be empty");
        for (k, s) in df.stages.iter().enumerate() {
            v.check(
                vlan_ok(s.lvl2_vlan),
                format!("dataflow.stages[{k}].lvl2_vlan"),
                format!("VLAN {} is not defined", s.lvl2_vlan),
            );
            v.check(
                vlan_ok(s.eb_vlan),
                format!("dataflow.stages[{k}].eb_vlan"),
                format!("VLAN {} is not defined", s.eb_vlan),
            );
        }
        if let Some(c) = df.clear_vlan {
            v.check(vlan_ok(c), "dataflow.clear_vlan", format!("VLAN {c} is not defined"));
        }
    }
    if df_roles {
        let stages = doc.dataflow.as_ref().map_or(1, |d| d.stages.len());
        for (i, h) in doc.hosts.iter().enumerate() {
            if h.role.is_dataflow() {
                v.check(
                    (h.stage as usize) < stages,
                    format!("hosts[{i}].stage"),
                    format!("only {stages} stages are defined"),
                );
            }
        }
    }

    check_experiment(doc, &host_ix, &mut v);

    if v.0.is_empty() {
        match World::build(doc) {
            Ok(w) => check_connectivity(doc, &w, &mut v),
            Err(e) => v.push("", e.0),
        }
    }
    v.0
}

fn check_experiment(doc: &ScenarioDoc, host_ix: &HashMap<&str, usize>, v: &mut Issues) {
    let e = &doc.experiment;
    let param_ok = |v: &mut Issues, x: f64| {
        if let Some(p) = &e.param {
            if let Err(err) = apply_param(doc, p, &x.to_string()) {
                v.push("experiment.param", err.to_string());
                return false;
            }
        }
        true
    };
    match e.kind {
        ExperimentKind::Single => {}
        ExperimentKind::Sweep => {
            v.check(e.param.is_some(), "experiment.param", "a sweep needs a parameter");
            v.check(!e.values.is_empty(), "experiment.values", "a sweep needs values");
            if let Some(&x) = e.values.first() {
                param_ok(v, x);
            }
        }
        ExperimentKind::Bisect => {
            v.check(e.param.is_some(), "experiment.param", "a bisection needs a parameter");
            match (e.lo, e.hi, e.resolution) {
                (Some(lo), Some(hi), Some(res)) => {
                    v.check(lo < hi, "experiment.lo", "must be below hi");
                    v.check(res > 0.0, "experiment.resolution", "must be positive");
                    param_ok(v, lo);
                }
                _ => v.push("experiment", "a bisection needs lo, hi and resolution"),
            }
        }
        ExperimentKind::MacProbe => {
            match &e.measure_source {
                Some(name) => match doc.sources.iter().find(|s| &s.name == name) {
                    Some(s) => v.check(
                        s.destinations.len() == 1 && s.destinations[0].pattern.is_some(),
                        "experiment.measure_source",
                        "the measuring source needs exactly one pattern destination",
                    ),
                    None => v.push("experiment.measure_source", format!("references undefined source {name:?}")),
                },
                None => v.push("experiment.measure_source", "a probe needs a measuring source"),
            }
            match &e.listener {
                Some(name) => v.check(
                    host_ix.contains_key(name.as_str()),
                    "experiment.listener",
                    format!("references undefined host {name:?}"),
                ),
                None => v.push("experiment.listener", "a probe needs a listener host"),
            }
        }
    }
}

/// Each VLAN's member hosts must reach each other through switches joined
/// by links carrying that VLAN.
fn check_connectivity(doc: &ScenarioDoc, w: &World, v: &mut Issues) {
    let n = w.switches.len();
    for (i, vl) in doc.vlans.iter().enumerate() {
        let id = vl.id;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut touched = BTreeSet::new();
        for slot in &w.links {
            match (slot.a, slot.b) {
                (Endpoint::Port { sw: s1, port: p1 }, Endpoint::Port { sw: s2, port: p2 }) => {
                    let (s1, s2) = (s1 as usize, s2 as usize);
                    if w.switches[s1].vlans.is_member(p1, id) && w.switches[s2].vlans.is_member(p2, id) {
                        let (a, b) = (find(&mut parent, s1), find(&mut parent, s2));
                        parent[a] = b;
                    }
                }
                (Endpoint::Host(_), Endpoint::Port { sw, port }) | (Endpoint::Port { sw, port }, Endpoint::Host(_))
                    if w.switches[sw as usize].vlans.is_member(port, id) =>
                {
                    touched.insert(sw as usize);
                }
                _ => {}
            }
        }
        let roots: BTreeSet<usize> = touched.iter().map(|&s| find(&mut parent, s)).collect();
        v.check(
            roots.len() <= 1,
            format!("vlans[{i}]"),
            format!("VLAN {id} members are split across {} disconnected switch groups", roots.len()),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DestinationConfig, HostConfig, LinkConfig, RunConfig, SourceConfig, SwitchConfig, VlanConfig};

    fn two_switches() -> ScenarioDoc {
        let mut d = ScenarioDoc::new("t", RunConfig::new(1.0));
        d.switches = vec![SwitchConfig::new("s1", 2), SwitchConfig::new("s2", 2)];
        d.hosts = vec![HostConfig::new("a"), HostConfig::new("b")];
        d.links = vec![
            LinkConfig::new("a", "s1:0", 1000),
            LinkConfig::new("b", "s2:0", 1000),
            LinkConfig::new("s1:1", "s2:1", 1000),
        ];
        d
    }

    #[test]
    fn vlan_split_by_missing_uplink_membership_is_reported() {
        let mut d = two_switches();
        d.vlans = vec![VlanConfig {
            id: 10,
            name: None,
            untagged: vec!["a".into(), "b".into()],
            tagged: vec![],
        }];
        let issues = validate(&d);
        assert_eq!(issues.len(), 1, "{issues:?}");
        assert!(issues[0].message.contains("VLAN 10"));
        d.vlans[0].tagged = vec!["s1:1".into(), "s2:1".into()];
        assert!(validate(&d).is_empty());
    }

    #[test]
    fn undefined_vlan_on_a_source_is_reported() {
        let mut d = two_switches();
        let mut s = SourceConfig::new("x", "a", 0.5, vec![DestinationConfig::host("b")]);
        s.vlan = Some(77);
        d.sources = vec![s];
        let issues = validate(&d);
        assert_eq!(issues[0].path, "sources[0].vlan");
    }

    #[test]
    fn all_issues_are_collected() {
        let mut d = two_switches();
        d.links[0].b = "s9:0".into();
        d.links[1].a = "nobody".into();
        d.run.warmup_fraction = 2.0;
        assert_eq!(validate(&d).len(), 3);
    }
}
