use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use super::{DataflowRt, DestState, Endpoint, Host, LinkSlot, SourceState, World, STREAM_L2PU, STREAM_LVL1, STREAM_SOURCE, STREAM_TRUNK};
use crate::config::{split_port_ref, HostRole};
use crate::dataflow::{Dfm, L2pu, L2puParams, L2sv, MsgKind, Rob, Sfi};
use crate::ether::{Dir, Link, MacAddress, VlanTag};
use crate::metrics::MetricSet;
use crate::net::Actor;
use crate::scenario::ScenarioDoc;
use crate::sim::{RngStream, SimTime};
use crate::switch::{Switch, VlanMap};
use crate::traffic::{pattern_addresses, SourceModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct BuildError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, BuildError> {
    Err(BuildError(msg.into()))
}

fn default_mac(index: usize) -> MacAddress {
    let [hi, lo] = ((index + 1) as u16).to_be_bytes();
    MacAddress([0x02, 0, 0, 0, hi, lo])
}

fn secs(ms: f64) -> SimTime {
    SimTime::from_secs_f64(ms / 1e3)
}

impl World {
    pub fn build(doc: &ScenarioDoc) -> Result<World, BuildError> {
        let duration = secs(doc.run.duration_ms);
        if duration == SimTime::ZERO {
            return err("run.duration_ms must be positive");
        }
        let warmup_end = SimTime::from_secs_f64(duration.as_secs_f64() * doc.run.warmup_fraction.clamp(0.0, 1.0));
        let window = SimTime::from_micros(doc.run.series_window_us.max(1));
        let mut metrics = MetricSet::new(warmup_end, duration, window);

        let mut host_ix = HashMap::new();
        let mut hosts = Vec::with_capacity(doc.hosts.len());
        for (i, h) in doc.hosts.iter().enumerate() {
            if host_ix.insert(h.name.clone(), i).is_some() {
                return err(format!("duplicate host name {:?}", h.name));
            }
            hosts.push(Host::new(h.clone(), h.mac.unwrap_or_else(|| default_mac(i))));
        }
        let mut sw_ix = HashMap::new();
        for (i, s) in doc.switches.iter().enumerate() {
            if host_ix.contains_key(&s.name) || sw_ix.insert(s.name.clone(), i).is_some() {
                return err(format!("duplicate switch name {:?}", s.name));
            }
        }

        let resolve = |s: &str| -> Result<Endpoint, BuildError> {
            if let Some(&h) = host_ix.get(s) {
                return Ok(Endpoint::Host(h as u32));
            }
            if let Some((sw, port)) = split_port_ref(s) {
                if let Some(&k) = sw_ix.get(sw) {
                    if port >= doc.switches[k].ports {
                        return err(format!("{s}: switch {sw} has {} ports", doc.switches[k].ports));
                    }
                    return Ok(Endpoint::Port { sw: k as u32, port });
                }
            }
            err(format!("unknown endpoint {s:?}"))
        };

        let mut sw_ports: Vec<Vec<Option<(u32, Dir)>>> = doc.switches.iter().map(|s| vec![None; s.ports as usize]).collect();
        let mut line_rates: Vec<Vec<u64>> = doc.switches.iter().map(|s| vec![0; s.ports as usize]).collect();
        let mut links = Vec::with_capacity(doc.links.len());
        for (l, lc) in doc.links.iter().enumerate() {
            let a = resolve(&lc.a)?;
            let b = resolve(&lc.b)?;
            let fc = |e: Endpoint| match e {
                Endpoint::Host(h) => doc.hosts[h as usize].fc_enabled,
                Endpoint::Port { sw, .. } => doc.switches[sw as usize].fc_enabled,
            };
            let speed = lc.speed_mbps.saturating_mul(1_000_000);
            let mut link = Link::new(speed, SimTime::from_nanos(lc.propagation_ns), fc(a) && fc(b))
                .map_err(|e| BuildError(format!("link {}-{}: {e}", lc.a, lc.b)))?;
            if let Some(r) = lc.reaction_ns {
                link = link.with_reaction_latency(SimTime::from_nanos(r));
            }
            for (end, dir, name) in [(a, Dir::AtoB, &lc.a), (b, Dir::BtoA, &lc.b)] {
                match end {
                    Endpoint::Host(h) => {
                        let host = &mut hosts[h as usize];
                        if host.link.is_some() {
                            return err(format!("host {name} is attached to more than one link"));
                        }
                        host.link = Some((l as u32, dir));
                        host.line_bps = speed;
                    }
                    Endpoint::Port { sw, port } => {
                        let slot = &mut sw_ports[sw as usize][port as usize];
                        if slot.is_some() {
                            return err(format!("port {name} is attached to more than one link"));
                        }
                        *slot = Some((l as u32, dir));
                        line_rates[sw as usize][port as usize] = speed;
                    }
                }
            }
            links.push(LinkSlot {
                name: format!("{}-{}", lc.a, lc.b),
                link,
                a,
                b,
            });
        }

        // A host name in a VLAN member list stands for the switch port it is cabled to.
        let port_of = |member: &str| -> Result<(usize, u16), BuildError> {
            match resolve(member)? {
                Endpoint::Port { sw, port } => Ok((sw as usize, port)),
                Endpoint::Host(h) => {
                    let (l, _) = hosts[h as usize]
                        .link
                        .ok_or_else(|| BuildError(format!("VLAN member {member} has no link")))?;
                    let slot = &links[l as usize];
                    match (slot.a, slot.b) {
                        (Endpoint::Port { sw, port }, _) | (_, Endpoint::Port { sw, port }) => Ok((sw as usize, port)),
                        _ => err(format!("VLAN member {member} is not attached to a switch")),
                    }
                }
            }
        };
        let mut vlans: Vec<VlanMap> = doc.switches.iter().map(|s| VlanMap::new(s.ports)).collect();
        let mut explicit_untagged = BTreeSet::new();
        let mut has_tagged = BTreeSet::new();
        for v in &doc.vlans {
            if v.id == 0 || v.id >= 4095 {
                return err(format!("VLAN id {} out of range", v.id));
            }
            for m in &v.untagged {
                let (sw, port) = port_of(m)?;
                if !explicit_untagged.insert((sw, port)) {
                    return err(format!("{m} is untagged in more than one VLAN"));
                }
                vlans[sw].set_untagged(port, v.id);
            }
            for m in &v.tagged {
                let (sw, port) = port_of(m)?;
                has_tagged.insert((sw, port));
                vlans[sw].add_tagged(port, v.id);
            }
        }
        for &(sw, port) in has_tagged.difference(&explicit_untagged) {
            vlans[sw].remove_default(port);
        }
        for host in hosts.iter_mut() {
            let Some((l, _)) = host.link else { continue };
            let slot = &links[l as usize];
            if let (Endpoint::Port { sw, port }, _) | (_, Endpoint::Port { sw, port }) = (slot.a, slot.b) {
                let map = &vlans[sw as usize];
                host.pvid = map.pvid(port);
                host.tagged_vlans = map.vlans_of(port).into_iter().filter(|&v| map.egress_tagged(port, v)).collect();
            }
        }

        let mut switches = Vec::with_capacity(doc.switches.len());
        for (k, (cfg, map)) in doc.switches.iter().zip(vlans).enumerate() {
            for t in &cfg.trunks {
                if let Some(&p) = t.iter().find(|&&p| p >= cfg.ports) {
                    return err(format!("switch {}: trunk port {p} out of range", cfg.name));
                }
            }
            let mut sw = Switch::new(cfg.clone(), map, &line_rates[k], doc.seed, STREAM_TRUNK + ((k as u64) << 8));
            sw.warmup_end = warmup_end;
            for (p, slot) in sw_ports[k].iter().enumerate() {
                if slot.is_none() {
                    sw.port_up[p] = false;
                    for t in sw.trunks.iter_mut() {
                        t.set_up(p as u16, false);
                    }
                }
            }
            switches.push(sw);
        }

        let mut sources = Vec::with_capacity(doc.sources.len());
        let mut flow_vlan = vec![];
        for (i, sc) in doc.sources.iter().enumerate() {
            let Some(&h) = host_ix.get(&sc.host) else {
                return err(format!("source {}: unknown host {:?}", sc.name, sc.host));
            };
            let host = &hosts[h];
            if host.link.is_none() {
                return err(format!("source {}: host {} has no link", sc.name, sc.host));
            }
            if sc.destinations.is_empty() {
                return err(format!("source {} has no destinations", sc.name));
            }
            let mut dests = vec![];
            let mut flows = vec![];
            let mut weights = vec![];
            for d in &sc.destinations {
                let (state, label) = match (&d.host, d.mac, d.pattern) {
                    (Some(name), None, None) => {
                        let Some(&t) = host_ix.get(name) else {
                            return err(format!("source {}: unknown destination host {name:?}", sc.name));
                        };
                        (DestState::Fixed(hosts[t].mac), name.clone())
                    }
                    (None, Some(mac), None) => (DestState::Fixed(mac), mac.to_string()),
                    (None, None, Some(p)) => {
                        let count = d.count.unwrap_or(1).max(1);
                        (DestState::Cycle(pattern_addresses(p, count, doc.seed), 0), p.label().to_string())
                    }
                    _ => {
                        return err(format!(
                            "source {}: each destination needs exactly one of host, mac, pattern",
                            sc.name
                        ))
                    }
                };
                dests.push(state);
                flows.push(metrics.add_flow(format!("{}/{label}", sc.name), sc.host.clone(), label));
                weights.push(d.weight.unwrap_or(1.0).max(0.0));
            }
            let load = (sc.load * doc.run.load_scale).clamp(0.0, 1.0);
            let vlan = sc.vlan.unwrap_or(host.pvid);
            for &f in &flows {
                flow_vlan.resize(f as usize + 1, None);
                flow_vlan[f as usize] = Some(vlan);
            }
            let tag = if host.tagged_vlans.contains(&vlan) || sc.priority > 0 {
                Some(VlanTag::new(vlan, sc.priority).map_err(|e| BuildError(format!("source {}: {e}", sc.name)))?)
            } else {
                None
            };
            let model = SourceModel::new(
                sc.pattern,
                load,
                sc.frame_bytes,
                host.line_bps,
                weights,
                RngStream::new(doc.seed, STREAM_SOURCE + i as u64),
            );
            sources.push(SourceState {
                name: sc.name.clone(),
                host: h as u32,
                model,
                dests,
                flows,
                seq: HashMap::new(),
                pending: None,
                emitted: 0,
                max_frames: sc.max_frames,
                start: SimTime::from_secs_f64(sc.start_us.max(0.0) / 1e6),
                stop: sc
                    .stop_us
                    .map_or(duration, |us| SimTime::from_secs_f64(us.max(0.0) / 1e6))
                    .min(duration),
                frame_bytes: sc.frame_bytes,
                tag,
                socket: sc.socket,
            });
        }

        for host in hosts.iter_mut() {
            if host.cfg.role == HostRole::Reflector {
                host.reply_flow = Some(metrics.add_flow(format!("{}/reply", host.cfg.name), host.cfg.name.clone(), "*"));
            }
        }

        let df = build_dataflow(doc, &mut hosts, &mut metrics, duration)?;

        Ok(World {
            seed: doc.seed,
            duration,
            warmup_end,
            switches,
            sw_ports,
            hosts,
            links,
            sources,
            metrics,
            df,
            flow_vlan,
            vlan_leaks: 0,
            vlan_checked: 0,
        })
    }
}

fn build_dataflow(
    doc: &ScenarioDoc,
    hosts: &mut [Host],
    metrics: &mut MetricSet,
    duration: SimTime,
) -> Result<Option<DataflowRt>, BuildError> {
    let of = |role: HostRole| -> Vec<usize> {
        hosts
            .iter()
            .enumerate()
            .filter(|(_, h)| h.cfg.role == role)
            .map(|(i, _)| i)
            .collect()
    };
    if !hosts.iter().any(|h| h.cfg.role.is_dataflow()) {
        return Ok(None);
    }
    let cfg = doc.dataflow.clone().unwrap_or_default();
    let one = |role: HostRole, name: &str| -> Result<usize, BuildError> {
        match of(role)[..] {
            [h] => Ok(h),
            _ => err(format!("the dataflow needs exactly one {name} host")),
        }
    };
    let l2sv = one(HostRole::L2sv, "l2sv")?;
    let dfm = one(HostRole::Dfm, "dfm")?;
    let prob = one(HostRole::Prob, "prob")?;
    let robs: Arc<[usize]> = of(HostRole::Rob).into();
    let l2pus = of(HostRole::L2pu);
    let sfis = of(HostRole::Sfi);
    if robs.is_empty() || l2pus.is_empty() || sfis.is_empty() {
        return err("the dataflow needs at least one rob, l2pu and sfi host");
    }
    if cfg.lvl1_rate_hz <= 0.0 {
        return err("dataflow.lvl1_rate_hz must be positive");
    }
    if cfg.stages.is_empty() {
        return err("dataflow.stages must not be empty");
    }
    let stages: Vec<Option<crate::config::StageVlans>> = hosts.iter().map(|h| cfg.stages.get(h.cfg.stage as usize).cloned()).collect();
    let stage = |h: usize| -> Result<crate::config::StageVlans, BuildError> {
        stages[h].ok_or_else(|| BuildError(format!("host {}: stage {} is not defined", doc.hosts[h].name, doc.hosts[h].stage)))
    };
    let prio = cfg.control_priority;
    let timeout = SimTime::from_secs_f64(cfg.request_timeout_us / 1e6);
    let params = L2puParams {
        credits: cfg.l2pu_credits,
        timeout,
        max_retries: cfg.max_retries,
        request_bytes: cfg.request_bytes,
        detail_bytes: cfg.detail_record_bytes,
        accept_fraction: cfg.accept_fraction,
        decision_delay: SimTime::from_nanos(cfg.l2pu_decision_ns),
        max_rounds: cfg.roi_max_rounds,
        priority: prio,
    };
    let mut l2pu_targets = vec![];
    for (k, &h) in l2pus.iter().enumerate() {
        let vlan = stage(h)?.lvl2_vlan;
        l2pu_targets.push((h, vlan));
        let rng = RngStream::new(doc.seed, STREAM_L2PU + k as u64);
        hosts[h].actor = Actor::L2pu(Box::new(L2pu::new(h, l2sv, prob, robs.clone(), vlan, params.clone(), rng)));
    }
    let mut sfi_targets = vec![];
    for &h in &sfis {
        let vlan = stage(h)?.eb_vlan;
        sfi_targets.push((h, vlan));
        hosts[h].actor = Actor::Sfi(Sfi::new(
            h,
            dfm,
            prob,
            robs.clone(),
            vlan,
            cfg.sfi_credits,
            timeout,
            cfg.max_retries,
            cfg.request_bytes,
            prio,
        ));
    }
    let first = cfg.stages[0];
    hosts[l2sv].actor = Actor::L2sv(L2sv::new(l2sv, l2pu_targets, cfg.l2pu_max_events, (dfm, first.lvl2_vlan), prio));
    let period = SimTime::from_secs_f64(cfg.clear_timeout_us / 1e6).max(SimTime::from_nanos(1));
    let clear_vlan = cfg.clear_vlan.unwrap_or(first.eb_vlan);
    hosts[dfm].actor = Actor::Dfm(Dfm::new(
        dfm,
        sfi_targets,
        cfg.sfi_max_events,
        cfg.clear_batch_size,
        period,
        clear_vlan,
        prio,
    ));
    let service = SimTime::from_nanos(cfg.rob_service_ns);
    for (i, &h) in robs.iter().enumerate() {
        hosts[h].actor = Actor::Rob(Rob::new(h, i as u16, service, cfg.fragment_bytes));
    }
    hosts[prob].actor = Actor::Rob(Rob::new_prob(prob, service, cfg.detail_record_bytes));

    let mut flows = [0u32; 8];
    for (f, label) in flows.iter_mut().zip(MsgKind::LABELS) {
        *f = metrics.add_flow(format!("dataflow/{label}"), "*", "*");
    }
    let stop = match cfg.lvl1_stop_ms {
        Some(ms) => secs(ms),
        None => duration.saturating_sub(secs(cfg.drain_ms)),
    };
    Ok(Some(DataflowRt {
        rng: RngStream::new(doc.seed, STREAM_LVL1),
        robs,
        prob,
        l2sv,
        dfm,
        next_event: 1,
        stop,
        flows,
        actions: vec![],
        log: Default::default(),
        cfg,
    }))
}
