use super::{ExperimentConfig, ExperimentKind, ScenarioDoc};
use crate::config::{
    AddressPattern, DataflowConfig, DestinationConfig, Emulation, HostConfig, HostRole, LinkConfig, MacTableConfig, RunConfig,
    SchedulerKind, SourceConfig, StageVlans, StaticEntryConfig, SwitchConfig, TrafficPattern, VlanConfig,
};
use crate::ether::{wire_time, MacAddress, GE_BPS};

/// A canned scenario.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// Report that carries the headline result.
    pub golden: &'static str,
    pub build: fn() -> Vec<ScenarioDoc>,
}

pub fn catalog() -> &'static [CatalogEntry] {
    CATALOG
}

/// Documents of the named entry.
pub fn builtin(name: &str) -> Option<Vec<ScenarioDoc>> {
    CATALOG.iter().find(|e| e.name == name).map(|e| (e.build)())
}

const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "saturation_sweep",
        description: "all-to-all Poisson load on 16 gigabit ports against a fabric at 66% of aggregate, plus a full-speed fabric at 95% load",
        golden: "sweep.csv",
        build: saturation_sweep,
    },
    CatalogEntry {
        name: "mac_probe",
        description: "learned-address census for ideal tables of 70, 1000 and 4096 entries and a hash-bucket table under five address families",
        golden: "results.csv",
        build: mac_probe,
    },
    CatalogEntry {
        name: "aging",
        description: "30 Hz request-reply pair under 300 s and 25 ms aging times; counts floods after warm-up",
        golden: "sweep.csv",
        build: || vec![aging()],
    },
    CatalogEntry {
        name: "qos_strict",
        description: "eight senders in four priority classes into one port with a strict-priority scheduler, swept over offered load",
        golden: "sweep.csv",
        build: || vec![qos(SchedulerKind::Strict)],
    },
    CatalogEntry {
        name: "qos_wrr",
        description: "eight saturating senders in four priority classes into one port with WRR weights 10/20/30/40",
        golden: "flows.csv",
        build: || vec![qos(SchedulerKind::Wrr)],
    },
    CatalogEntry {
        name: "fc_congestion",
        description: "three senders overloading one receiver at 1.8x its line; alpha scales all loads, flow control on",
        golden: "flows.csv",
        build: || vec![fc_congestion(true)],
    },
    CatalogEntry {
        name: "fc_threshold",
        description: "bisection over alpha for the onset of loss in fc_congestion with flow control off",
        golden: "results.csv",
        build: || vec![fc_threshold()],
    },
    CatalogEntry {
        name: "dead_node",
        description: "fc_congestion with the shared receiver never draining; PAUSE spreads and starves the other receivers",
        golden: "series.csv",
        build: || vec![dead_node()],
    },
    CatalogEntry {
        name: "vlan_suite",
        description: "broadcast containment in single, disjoint and overlapping VLAN layouts, a two-VLAN partition sweep and a two-switch loop with and without VLAN separation",
        golden: "latency.csv",
        build: vlan_suite,
    },
    CatalogEntry {
        name: "trunk_balance",
        description: "1600 connections over a two-link gigabit trunk between two 40-port Fast Ethernet switches",
        golden: "summary.csv",
        build: || vec![trunk_balance()],
    },
    CatalogEntry {
        name: "dataflow_e2e",
        description: "request-response dataflow with 160 ROBs on four concentrators, 8 L2PUs and 4 SFIs at a 1 kHz LVL1 rate",
        golden: "events.csv",
        build: || vec![dataflow_e2e()],
    },
    CatalogEntry {
        name: "two_stage",
        description: "two-stage dataflow with separate LVL2 and event-building central switches and 160 ROBs",
        golden: "summary.csv",
        build: || vec![two_stage()],
    },
];

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Hosts `names` on consecutive ports of `sw` from `first`.
fn attach(doc: &mut ScenarioDoc, sw: &str, first: u16, names: &[String], speed: u64) {
    for (i, n) in names.iter().enumerate() {
        doc.hosts.push(HostConfig::new(n.clone()));
        doc.links
            .push(LinkConfig::new(n.clone(), format!("{sw}:{}", first + i as u16), speed));
    }
}

fn no_fc(doc: &mut ScenarioDoc) {
    for s in &mut doc.switches {
        s.fc_enabled = false;
    }
    for h in &mut doc.hosts {
        h.fc_enabled = false;
    }
}

/// One broadcast per host at start-up so switches learn otherwise silent
/// receivers; bulk traffic starts after `START_US`.
fn announce(doc: &mut ScenarioDoc, hosts: &[&str]) {
    for h in hosts {
        let mut s = SourceConfig::new(format!("hello_{h}"), *h, 0.1, vec![DestinationConfig::mac(MacAddress::BROADCAST)]);
        s.frame_bytes = 64;
        s.max_frames = Some(1);
        doc.sources.push(s);
    }
}

const START_US: f64 = 100.0;

fn starting(mut s: SourceConfig) -> SourceConfig {
    s.start_us = START_US;
    s
}

fn to(host: &str) -> DestinationConfig {
    DestinationConfig::host(host)
}

pub(crate) fn fc_congestion(fc: bool) -> ScenarioDoc {
    let mut d = ScenarioDoc::new("fc_congestion", RunConfig::new(200.0));
    d.description = "X, Y and Z share receiver A; Y and Z also feed B and C".into();
    d.switches = vec![SwitchConfig::new("sw", 6)];
    let hosts: Vec<String> = ["X", "Y", "Z", "A", "B", "C"].map(String::from).to_vec();
    attach(&mut d, "sw", 0, &hosts, 1000);
    d.sources = vec![
        starting(SourceConfig::new("x", "X", 1.0, vec![to("A")])),
        starting(SourceConfig::new("y", "Y", 1.0, vec![to("A").weighted(0.3), to("B").weighted(0.7)])),
        starting(SourceConfig::new("z", "Z", 1.0, vec![to("A").weighted(0.5), to("C").weighted(0.5)])),
    ];
    announce(&mut d, &["A", "B", "C"]);
    d.experiment = ExperimentConfig {
        param: Some("run.load_scale".into()),
        lo: Some(0.3),
        hi: Some(1.0),
        resolution: Some(0.005),
        ..Default::default()
    };
    if !fc {
        no_fc(&mut d);
    }
    d
}

fn fc_threshold() -> ScenarioDoc {
    let mut d = fc_congestion(false);
    d.name = "fc_threshold".into();
    d.run.duration_ms = 1000.0;
    d.experiment.kind = ExperimentKind::Bisect;
    d
}

fn dead_node() -> ScenarioDoc {
    let mut d = fc_congestion(true);
    d.name = "dead_node".into();
    d.description = "receiver A never drains its queue".into();
    d.run.duration_ms = 100.0;
    d.experiment = ExperimentConfig::default();
    d.hosts[3].emulation = Emulation::Dead;
    d
}

fn qos(kind: SchedulerKind) -> ScenarioDoc {
    let wrr = kind == SchedulerKind::Wrr;
    let mut d = ScenarioDoc::new(if wrr { "qos_wrr" } else { "qos_strict" }, RunConfig::new(100.0));
    let mut sw = SwitchConfig::new("sw", 9);
    sw.scheduler = kind;
    if wrr {
        sw.wrr_weights = vec![10, 20, 30, 40];
    }
    d.switches = vec![sw];
    attach(&mut d, "sw", 0, &names("s", 8), 1000);
    attach(&mut d, "sw", 8, &["r".to_string()], 1000);
    let load = if wrr { 0.25 } else { 0.125 };
    for i in 0..8 {
        let mut s = SourceConfig::new(format!("s{i}"), format!("s{i}"), load, vec![to("r")]);
        s.priority = 2 * (i as u8 / 2);
        d.sources.push(starting(s));
    }
    announce(&mut d, &["r"]);
    no_fc(&mut d);
    if !wrr {
        d.experiment = ExperimentConfig {
            kind: ExperimentKind::Sweep,
            param: Some("run.load_scale".into()),
            values: vec![0.4, 0.8, 1.2, 1.6, 2.0, 3.0, 4.0],
            ..Default::default()
        };
    }
    d
}

fn mac(last: u8) -> MacAddress {
    MacAddress([0x02, 0, 0, 0, 0xaa, last])
}

fn probe_doc(name: &str, table: MacTableConfig, pattern: AddressPattern) -> ScenarioDoc {
    let mut d = ScenarioDoc::new(name, RunConfig::new(20.0));
    let mut sw = SwitchConfig::new("sw", 3);
    sw.mac_table = table;
    sw.static_entries = vec![StaticEntryConfig {
        mac: mac(1),
        port: 0,
        vlan: 1,
    }];
    d.switches = vec![sw];
    attach(&mut d, "sw", 0, &["requester".into(), "server".into(), "listener".into()], 1000);
    d.hosts[0].mac = Some(mac(1));
    d.hosts[1].mac = Some(mac(2));
    d.hosts[1].role = HostRole::Reflector;
    d.hosts[2].mac = Some(mac(3));
    d.hosts[2].promiscuous = true;
    for (src, start) in [("learn", 0.0), ("measure", 10_000.0)] {
        let mut s = SourceConfig::new(src, "requester", 0.5, vec![DestinationConfig::pattern(pattern, 4096)]);
        s.frame_bytes = 64;
        s.start_us = start;
        s.max_frames = Some(4096);
        d.sources.push(s);
    }
    d.experiment = ExperimentConfig {
        kind: ExperimentKind::MacProbe,
        measure_source: Some("measure".into()),
        listener: Some("listener".into()),
        ..Default::default()
    };
    d
}

fn mac_probe() -> Vec<ScenarioDoc> {
    let mut docs: Vec<ScenarioDoc> = [70, 1000, 4096]
        .into_iter()
        .map(|c| {
            probe_doc(
                &format!("mac_probe_ideal_{c}"),
                MacTableConfig::ideal(c),
                AddressPattern::LinearOctets45,
            )
        })
        .collect();
    for p in AddressPattern::ALL {
        docs.push(probe_doc(
            &format!("mac_probe_bucket_{}", p.label()),
            MacTableConfig::hash_bucket(vec![4, 5], 256, 70),
            p,
        ));
    }
    docs
}

fn aging() -> ScenarioDoc {
    let mut d = ScenarioDoc::new("aging", RunConfig::new(1000.0));
    d.switches = vec![SwitchConfig::new("sw", 2)];
    attach(&mut d, "sw", 0, &["requester".into(), "server".into()], 1000);
    d.hosts[1].role = HostRole::Reflector;
    let frame_ns = wire_time(64, GE_BPS).expect("valid frame").as_nanos() as f64;
    let mut s = SourceConfig::new("poll", "requester", frame_ns * 30.0 / 1e9, vec![to("server")]);
    s.frame_bytes = 64;
    d.sources = vec![s];
    d.experiment = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        param: Some("switches.*.mac_table.aging_time_ms".into()),
        values: vec![300_000.0, 25.0],
        ..Default::default()
    };
    d
}

fn vlan(id: u16, untagged: &[&str], tagged: &[&str]) -> VlanConfig {
    VlanConfig {
        id,
        name: None,
        untagged: untagged.iter().map(|s| s.to_string()).collect(),
        tagged: tagged.iter().map(|s| s.to_string()).collect(),
    }
}

fn broadcaster(name: &str, host: &str, vlan: u16) -> SourceConfig {
    let mut s = SourceConfig::new(name, host, 1.0, vec![DestinationConfig::mac(MacAddress::BROADCAST)]);
    s.frame_bytes = 64;
    s.vlan = Some(vlan);
    s
}

fn containment(name: &str, vlans: Vec<VlanConfig>, sources: Vec<SourceConfig>) -> ScenarioDoc {
    let mut d = ScenarioDoc::new(name, RunConfig::new(700.0));
    d.switches = vec![SwitchConfig::new("sw", 8)];
    attach(&mut d, "sw", 0, &names("h", 8), 1000);
    d.vlans = vlans;
    d.sources = sources;
    no_fc(&mut d);
    d
}

fn vlan_suite() -> Vec<ScenarioDoc> {
    let single = containment(
        "vlan_single",
        vec![vlan(10, &["h0", "h1", "h2", "h3"], &[])],
        vec![broadcaster("b10", "h0", 10)],
    );
    let disjoint = containment(
        "vlan_disjoint",
        vec![vlan(10, &["h0", "h1", "h2", "h3"], &[]), vlan(20, &["h4", "h5", "h6", "h7"], &[])],
        vec![broadcaster("b10", "h0", 10), broadcaster("b20", "h7", 20)],
    );
    let overlapping = containment(
        "vlan_overlapping",
        vec![
            vlan(10, &["h0", "h1", "h2", "h3"], &["h4"]),
            vlan(20, &["h4", "h5", "h6", "h7"], &["h3"]),
        ],
        vec![broadcaster("b10", "h0", 10), broadcaster("b20", "h7", 20)],
    );

    let mut part = ScenarioDoc::new("vlan_partition", RunConfig::new(50.0));
    part.switches = vec![SwitchConfig::new("sw", 8)];
    attach(&mut part, "sw", 0, &names("h", 8), 1000);
    part.vlans = vec![vlan(20, &["h4", "h5", "h6", "h7"], &[])];
    let mut v1 = SourceConfig::new("v1", "h0", 0.3, vec![to("h1"), to("h2")]);
    v1.pattern = TrafficPattern::Poisson;
    let mut v2 = SourceConfig::new("v2", "h4", 0.5, vec![to("h5"), to("h6")]);
    v2.pattern = TrafficPattern::Poisson;
    part.sources = vec![starting(v1), starting(v2)];
    announce(&mut part, &["h1", "h2", "h5", "h6"]);
    part.experiment = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        param: Some("sources.v2.load".into()),
        values: vec![0.0, 0.5, 1.0],
        ..Default::default()
    };

    let mut looped = ScenarioDoc::new("vlan_loop", RunConfig::new(10.0));
    looped.switches = vec![SwitchConfig::new("s1", 3), SwitchConfig::new("s2", 3)];
    looped.hosts = vec![HostConfig::new("a"), HostConfig::new("b")];
    looped.links = vec![
        LinkConfig::new("a", "s1:0", 1000),
        LinkConfig::new("b", "s2:0", 1000),
        LinkConfig::new("s1:1", "s2:1", 1000),
        LinkConfig::new("s1:2", "s2:2", 1000),
    ];
    let mut once = SourceConfig::new("once", "a", 0.1, vec![DestinationConfig::mac(MacAddress::BROADCAST)]);
    once.frame_bytes = 64;
    once.max_frames = Some(1);
    looped.sources = vec![once];
    let mut separated = looped.clone();
    separated.name = "vlan_loop_separated".into();
    separated.vlans = vec![vlan(10, &["a", "b", "s1:1", "s2:1"], &[]), vlan(20, &["s1:2", "s2:2"], &[])];

    vec![single, disjoint, overlapping, part, looped, separated]
}

fn saturation(name: &str, fabric: f64) -> ScenarioDoc {
    let mut d = ScenarioDoc::new(name, RunConfig::new(200.0));
    let mut sw = SwitchConfig::new("sw", 16);
    sw.fabric_capacity_fraction = fabric;
    sw.egress_buffer_bytes = 4 << 20;
    d.switches = vec![sw];
    let hosts = names("n", 16);
    attach(&mut d, "sw", 0, &hosts, 1000);
    for h in &hosts {
        let dests = hosts.iter().filter(|o| *o != h).map(|o| to(o)).collect();
        let mut s = SourceConfig::new(h.clone(), h.clone(), 1.0, dests);
        s.pattern = TrafficPattern::Poisson;
        d.sources.push(starting(s));
    }
    let all: Vec<&str> = hosts.iter().map(String::as_str).collect();
    announce(&mut d, &all);
    no_fc(&mut d);
    d
}

fn saturation_sweep() -> Vec<ScenarioDoc> {
    let mut sweep = saturation("saturation_sweep", 0.66);
    sweep.experiment = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        param: Some("run.load_scale".into()),
        values: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
        ..Default::default()
    };
    let mut full = saturation("saturation_full_fabric", 1.0);
    full.run.load_scale = 0.95;
    vec![sweep, full]
}

fn trunk_balance() -> ScenarioDoc {
    let mut d = ScenarioDoc::new("trunk_balance", RunConfig::new(50.0));
    for s in ["sw1", "sw2"] {
        let mut sw = SwitchConfig::new(s, 42);
        sw.trunks = vec![vec![40, 41]];
        d.switches.push(sw);
    }
    let (a, b) = (names("a", 40), names("b", 40));
    attach(&mut d, "sw1", 0, &a, 100);
    attach(&mut d, "sw2", 0, &b, 100);
    d.links.push(LinkConfig::new("sw1:40", "sw2:40", 1000));
    d.links.push(LinkConfig::new("sw1:41", "sw2:41", 1000));
    let listeners: Vec<&str> = b.iter().map(String::as_str).collect();
    announce(&mut d, &listeners);
    for h in &a {
        let mut s = SourceConfig::new(h.clone(), h.clone(), 0.2, b.iter().map(|t| to(t)).collect());
        s.start_us = 1000.0;
        d.sources.push(s);
    }
    d
}

fn dataflow_e2e() -> ScenarioDoc {
    let mut d = ScenarioDoc::new("dataflow_e2e", RunConfig::new(1000.0));
    d.switches.push(SwitchConfig::new("central", 19));
    let mut rob = 0;
    for c in 0..4 {
        let sw = format!("conc{c}");
        d.switches.push(SwitchConfig::new(sw.clone(), 41));
        let robs = names("rob", rob + 40)[rob..].to_vec();
        rob += 40;
        attach(&mut d, &sw, 0, &robs, 100);
        d.links.push(LinkConfig::new(format!("{sw}:40"), format!("central:{c}"), 1000));
    }
    let central: Vec<(String, HostRole)> = [
        ("l2sv".to_string(), HostRole::L2sv),
        ("dfm".into(), HostRole::Dfm),
        ("prob".into(), HostRole::Prob),
    ]
    .into_iter()
    .chain(names("l2pu", 8).into_iter().map(|n| (n, HostRole::L2pu)))
    .chain(names("sfi", 4).into_iter().map(|n| (n, HostRole::Sfi)))
    .collect();
    let central_names: Vec<String> = central.iter().map(|(n, _)| n.clone()).collect();
    attach(&mut d, "central", 4, &central_names, 1000);
    for h in &mut d.hosts {
        h.role = central.iter().find(|(n, _)| *n == h.name).map_or(HostRole::Rob, |(_, r)| *r);
    }
    let robs = names("rob", 160);
    let uplinks: Vec<String> = (0..4).flat_map(|c| [format!("conc{c}:40"), format!("central:{c}")]).collect();
    let mut l2_untagged: Vec<String> = robs.clone();
    l2_untagged.extend(["prob", "l2sv", "dfm"].map(String::from));
    l2_untagged.extend(names("l2pu", 8));
    let mut eb_tagged = robs;
    eb_tagged.extend(["prob", "dfm"].map(String::from));
    eb_tagged.extend(uplinks.iter().cloned());
    d.vlans = vec![
        VlanConfig {
            id: 2,
            name: Some("lvl2".into()),
            untagged: l2_untagged,
            tagged: uplinks,
        },
        VlanConfig {
            id: 3,
            name: Some("eb".into()),
            untagged: names("sfi", 4),
            tagged: eb_tagged,
        },
    ];
    d.dataflow = Some(DataflowConfig::default());
    d
}

fn two_stage() -> ScenarioDoc {
    let mut d = ScenarioDoc::new("two_stage", RunConfig::new(200.0));
    d.switches.push(SwitchConfig::new("lvl2", 16));
    d.switches.push(SwitchConfig::new("eb", 16));
    let mut all_robs = vec![];
    for c in 0..4u16 {
        let sw = format!("conc{c}");
        d.switches.push(SwitchConfig::new(sw.clone(), 42));
        let robs = names("rob", 40 * (c as usize + 1))[40 * c as usize..].to_vec();
        attach(&mut d, &sw, 0, &robs, 100);
        all_robs.extend(robs);
        d.links.push(LinkConfig::new(format!("{sw}:40"), format!("lvl2:{c}"), 1000));
        d.links.push(LinkConfig::new(format!("{sw}:41"), format!("eb:{c}"), 1000));
    }
    d.links.push(LinkConfig::new("lvl2:4", "eb:4", 1000));
    let l2pu: Vec<String> = names("l2pu", 8);
    let sfi: Vec<String> = names("sfi", 4);
    let lvl2_hosts: Vec<String> = ["l2sv".to_string(), "prob".into()]
        .into_iter()
        .chain(l2pu.iter().cloned())
        .collect();
    attach(&mut d, "lvl2", 5, &lvl2_hosts, 1000);
    let eb_hosts: Vec<String> = ["dfm".to_string()].into_iter().chain(sfi.iter().cloned()).collect();
    attach(&mut d, "eb", 5, &eb_hosts, 1000);
    for h in &mut d.hosts {
        h.role = match h.name.as_str() {
            "l2sv" => HostRole::L2sv,
            "prob" => HostRole::Prob,
            "dfm" => HostRole::Dfm,
            n if n.starts_with("l2pu") => HostRole::L2pu,
            n if n.starts_with("sfi") => HostRole::Sfi,
            _ => HostRole::Rob,
        };
        let k: usize = h.name.trim_start_matches(|c: char| c.is_ascii_alphabetic()).parse().unwrap_or(0);
        if (h.role == HostRole::L2pu && k >= 4) || (h.role == HostRole::Sfi && k >= 2) {
            h.stage = 1;
        }
    }
    let s = |v: &[&str]| -> Vec<String> { v.iter().map(|x| x.to_string()).collect() };
    let lvl2_up: Vec<String> = (0..4).flat_map(|c| [format!("conc{c}:40"), format!("lvl2:{c}")]).collect();
    let eb_up: Vec<String> = (0..4).flat_map(|c| [format!("conc{c}:41"), format!("eb:{c}")]).collect();
    let inter = s(&["lvl2:4", "eb:4"]);
    let cat = |parts: &[&[String]]| -> Vec<String> { parts.iter().flat_map(|p| p.iter().cloned()).collect() };
    let members =
        |pred: &dyn Fn(&HostConfig) -> bool| -> Vec<String> { d.hosts.iter().filter(|h| pred(h)).map(|h| h.name.clone()).collect() };
    let stage0_l2pu = members(&|h| h.role == HostRole::L2pu && h.stage == 0);
    let stage1_l2pu = members(&|h| h.role == HostRole::L2pu && h.stage == 1);
    let stage0_sfi = members(&|h| h.role == HostRole::Sfi && h.stage == 0);
    let stage1_sfi = members(&|h| h.role == HostRole::Sfi && h.stage == 1);
    let rp = cat(&[&all_robs, &s(&["prob"])]);
    d.vlans = vec![
        VlanConfig {
            id: 2,
            name: Some("lvl2_a".into()),
            untagged: cat(&[&rp, &s(&["l2sv", "dfm"]), &stage0_l2pu]),
            tagged: cat(&[&lvl2_up, &inter]),
        },
        VlanConfig {
            id: 3,
            name: Some("eb_a".into()),
            untagged: stage0_sfi,
            tagged: cat(&[&rp, &s(&["dfm"]), &eb_up, &inter]),
        },
        VlanConfig {
            id: 4,
            name: Some("lvl2_b".into()),
            untagged: stage1_l2pu,
            tagged: cat(&[&rp, &s(&["l2sv"]), &lvl2_up]),
        },
        VlanConfig {
            id: 5,
            name: Some("eb_b".into()),
            untagged: stage1_sfi,
            tagged: cat(&[&rp, &s(&["dfm"]), &eb_up, &inter]),
        },
    ];
    d.dataflow = Some(DataflowConfig {
        stages: vec![StageVlans { lvl2_vlan: 2, eb_vlan: 3 }, StageVlans { lvl2_vlan: 4, eb_vlan: 5 }],
        ..Default::default()
    });
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{parse, render, validate};

    #[test]
    fn every_canned_document_is_valid_and_renders() {
        for e in catalog() {
            for doc in (e.build)() {
                let issues = validate(&doc);
                assert!(issues.is_empty(), "{}: {issues:?}", doc.name);
                assert_eq!(parse(&render(&doc)).unwrap(), doc, "{}", doc.name);
            }
        }
    }

    #[test]
    fn two_stage_census_matches_declaration() {
        let d = two_stage();
        let count = |r: HostRole| d.hosts.iter().filter(|h| h.role == r).count();
        assert_eq!(count(HostRole::Rob), 160);
        assert_eq!((count(HostRole::L2pu), count(HostRole::Sfi)), (8, 4));
        assert_eq!(d.dataflow.as_ref().unwrap().stages.len(), 2);
        let w = crate::net::World::build(&d).unwrap();
        assert_eq!(w.rob_hosts().len(), 160);
    }
}
