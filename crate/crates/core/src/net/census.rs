use super::{Actor, Engine, Ev, World};
use crate::ether::Dir;
use crate::metrics::CsvTable;
use crate::metrics::{EventRow, LinkRow};
use crate::sim::RunSummary;

/// Frame accounting at the end of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Census {
    /// Frames still on a wire, in a switch or in a host queue, per flow.
    pub in_flight: Vec<u64>,
    /// Flows whose counters do not balance, with the imbalance.
    pub violations: Vec<(u32, i128)>,
}

impl Census {
    pub fn take(world: &World, eng: &Engine<Ev>) -> Census {
        let mut in_flight = vec![0u64; world.metrics.flow_count()];
        for (_, ev) in eng.pending() {
            match ev {
                Ev::Arrive { frame, .. } | Ev::Forward { frame, .. } => in_flight[frame.flow_id as usize] += 1,
                _ => {}
            }
        }
        for sw in &world.switches {
            for q in sw.queued_copies() {
                in_flight[q.frame.flow_id as usize] += 1;
            }
            if let Some(f) = &sw.fabric {
                for e in f.iter() {
                    in_flight[e.frame.flow_id as usize] += 1;
                }
            }
        }
        for h in &world.hosts {
            for f in h.tx.iter().chain(h.rx.iter()) {
                in_flight[f.flow_id as usize] += 1;
            }
        }
        let mut violations = vec![];
        for (info, s) in world.metrics.flows() {
            let lhs = s.sent as i128 + s.replicated as i128;
            let rhs = (s.delivered + s.filtered + s.dropped_switch + s.dropped_host + in_flight[info.id as usize]) as i128;
            if lhs != rhs {
                violations.push((info.id, lhs - rhs));
            }
        }
        Census { in_flight, violations }
    }
}

impl World {
    /// Fills the summary, link, switch and event tables after a run.
    pub(super) fn finalize(&mut self, eng: &Engine<Ev>, run: RunSummary) {
        let census = Census::take(self, eng);
        let end = self.duration;
        let m = &mut self.metrics;
        m.set_u64("events_processed", run.events_processed);
        m.set_u64("final_time_ns", run.final_time.as_nanos());
        m.set_u64("conservation_violations", census.violations.len() as u64);
        let t = m.totals();
        m.set_u64("frames_sent", t.sent);
        m.set_u64("frames_delivered", t.delivered);
        m.set_u64("frames_filtered", t.filtered);
        m.set_u64("frames_replicated", t.replicated);
        m.set_u64("switch_drops", t.dropped_switch);
        m.set_u64("host_drops", t.dropped_host);
        m.set_u64("frames_in_flight", census.in_flight.iter().sum());
        let reorders = m.reorders;
        m.set_u64("reorders", reorders);

        let mut vlan_violations = 0;
        let mut vlan_rejects = 0;
        let mut floods = 0;
        let mut switch_rx = 0u64;
        let mut switches = CsvTable::new(&[
            "switch",
            "rx_frames",
            "forwarded",
            "copies",
            "tx_frames",
            "rejected",
            "filtered",
            "floods",
            "floods_after_warmup",
            "group_forwards",
            "dropped_egress",
            "dropped_ingress",
            "dropped_fabric",
            "dropped_trunk",
            "pause_requests",
            "max_held_bytes",
            "mac_entries",
        ]);
        for sw in &self.switches {
            let s = &sw.stats;
            vlan_violations += s.vlan_violations;
            vlan_rejects += sw.vlans.violations;
            floods += s.floods_after_warmup;
            switch_rx += s.rx_frames;
            let name = sw.name().to_string();
            m.set_u64(format!("sw.{name}.mac_entries"), sw.mac_table.len() as u64);
            m.set_u64(format!("sw.{name}.drops"), s.dropped());
            m.set_u64(format!("sw.{name}.max_held_bytes"), s.max_held_bytes);
            for (k, tr) in sw.trunks.iter().enumerate() {
                let census: Vec<String> = tr.census().iter().map(|c| c.to_string()).collect();
                m.set(format!("sw.{name}.trunk{k}.census"), census.join(" "));
                m.set_u64(format!("sw.{name}.trunk{k}.connections"), tr.connections() as u64);
            }
            switches.row(
                [
                    s.rx_frames,
                    s.forwarded,
                    s.copies,
                    s.tx_frames,
                    s.rejected,
                    s.filtered,
                    s.floods,
                    s.floods_after_warmup,
                    s.group_forwards,
                    s.dropped_egress,
                    s.dropped_ingress,
                    s.dropped_fabric,
                    s.dropped_trunk,
                    s.pause_requests,
                    s.max_held_bytes,
                    sw.mac_table.len() as u64,
                ]
                .iter()
                .fold(vec![name], |mut row, v| {
                    row.push(v.to_string());
                    row
                }),
            );
        }
        m.switches = switches;
        m.set_u64("vlan_violations", vlan_violations);
        m.set_u64("vlan_rejects", vlan_rejects);
        m.set_u64("vlan_leaks", self.vlan_leaks);
        m.set_u64("vlan_checked_frames", self.vlan_checked);
        m.set_u64("floods_after_warmup", floods);
        // Without a forwarding loop a frame reaches each switch at most once.
        let host_tx: u64 = self.hosts.iter().map(|h| h.stats.tx_frames).sum();
        m.set_u64("storm", (switch_rx > host_tx * self.switches.len() as u64) as u64);

        m.links.clear();
        for slot in &self.links {
            for (dir, label) in [(Dir::AtoB, "a_to_b"), (Dir::BtoA, "b_to_a")] {
                let d = slot.link.direction(dir);
                m.links.push(LinkRow {
                    link: slot.name.clone(),
                    direction: label,
                    frames: d.frames_sent,
                    bytes: d.bytes_sent,
                    pause_ns: slot.link.pause_time(dir, end).as_nanos(),
                    pause_signals: d.pause_signals,
                    ignored_pauses: d.ignored_pauses,
                });
            }
        }

        let ids: Vec<u32> = (0..m.flow_count() as u32).collect();
        for id in ids {
            let label = m.flow_info(id).label.clone();
            let s = m.flow(id);
            let (sent, delivered, dropped) = (s.sent, s.delivered, s.dropped());
            m.set_u64(format!("flow.{label}.sent"), sent);
            m.set_u64(format!("flow.{label}.delivered"), delivered);
            m.set_u64(format!("flow.{label}.dropped"), dropped);
            let goodput = m.goodput_fraction(id);
            m.set_f64(format!("flow.{label}.goodput"), goodput);
            if let Some(l) = m.loss_rate(id) {
                m.set_f64(format!("flow.{label}.loss"), l);
            }
            if let Some(l) = m.steady_mean_latency_ns(id) {
                m.set_f64(format!("flow.{label}.latency_ns"), l);
            }
        }

        let mut host_drops_rx = 0;
        for h in &self.hosts {
            host_drops_rx += h.stats.dropped_rx + h.stats.dropped_socket;
        }
        m.set_u64("host_rx_drops", host_drops_rx);

        let Some(df) = self.df.as_ref() else {
            return;
        };
        let log = &df.log;
        let mut terminal = 0u64;
        let mut built = 0u64;
        let mut errors = 0u64;
        let mut accepted = 0u64;
        m.events.clear();
        for (id, r) in log.iter() {
            terminal += r.state.is_terminal() as u64;
            built += r.t_built.is_some() as u64;
            errors += r.failed as u64;
            accepted += r.accepted as u64;
            m.events.push(EventRow {
                event_id: id,
                state: r.state.label(),
                t_lvl1: Some(r.t_lvl1),
                t_decision: r.t_decision,
                t_built: r.t_built,
                t_cleared: r.t_cleared,
            });
        }
        m.set_u64("df.events_injected", log.len() as u64);
        m.set_u64("df.events_terminal", terminal);
        m.set_u64("df.events_accepted", accepted);
        m.set_u64("df.events_built", built);
        m.set_u64("df.events_error", errors);
        m.set_u64(
            "df.events_rejected",
            log.iter()
                .filter(|(_, r)| r.t_decision.is_some() && !r.accepted && !r.failed)
                .count() as u64,
        );
        let lo = self.warmup_end;
        let hi = df.stop;
        let flushes_in = log.flushes.iter().filter(|(t, _)| *t >= lo && *t < hi).count();
        m.set_u64("df.flushes", log.flushes.len() as u64);
        if hi > lo {
            m.set_f64("df.flush_rate_hz", flushes_in as f64 / (hi - lo).as_secs_f64());
        }

        let mut clear_ok = true;
        let mut details_ok = true;
        let mut l2pu_out = 0;
        let mut sfi_out = 0;
        let mut timeouts = 0;
        for h in &self.hosts {
            match &h.actor {
                Actor::Rob(r) if r.is_prob() => {
                    for (id, rec) in log.iter() {
                        if rec.accepted && r.details.get(&id).copied().unwrap_or(0) != 1 {
                            details_ok = false;
                        }
                    }
                }
                Actor::Rob(r) => {
                    for (id, rec) in log.iter() {
                        if rec.t_cleared.is_some() && r.holds(id) {
                            clear_ok = false;
                        }
                    }
                }
                Actor::L2pu(p) => {
                    l2pu_out = l2pu_out.max(p.max_outstanding_requests());
                    timeouts += p.timeouts();
                }
                Actor::Sfi(s) => {
                    sfi_out = sfi_out.max(s.max_outstanding_requests());
                    timeouts += s.timeouts();
                }
                Actor::L2sv(s) => {
                    m.set_u64("df.l2sv_max_queue", s.max_queue as u64);
                    m.set_u64("df.l2sv_max_outstanding", s.max_outstanding as u64);
                }
                Actor::Dfm(d) => {
                    m.set_u64("df.dfm_max_queue", d.max_queue as u64);
                    m.set_u64("df.dfm_max_outstanding", d.max_outstanding as u64);
                    m.set_u64("df.dfm_pending_clears", d.pending_clears() as u64);
                }
                Actor::None => {}
            }
        }
        m.set_u64("df.clear_complete", clear_ok as u64);
        m.set_u64("df.prob_details_ok", details_ok as u64);
        m.set_u64("df.l2pu_max_outstanding_requests", l2pu_out as u64);
        m.set_u64("df.sfi_max_outstanding_requests", sfi_out as u64);
        m.set_u64("df.request_timeouts", timeouts);
    }
}
