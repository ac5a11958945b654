//! Store-and-forward Ethernet switch.
//!
//! A frame is admitted by the VLAN filter, its source is learned, the
//! destination is resolved to one port, a trunk member, or a flood set, and
//! after the forwarding latency (and the optional shared fabric server) one
//! copy per egress port is offered to that port's class queues. When the
//! switch propagates flow control, a full egress holds the copy at the
//! ingress and congested queues pause every ingress feeding them.
//!
//! The switch itself never touches links; it reports what the owner must do
//! through [`SwEffect`]s.

mod egress;
mod mac_table;
mod trunk;
mod vlan;

use std::collections::{BTreeSet, VecDeque};

use smallvec::SmallVec;

pub use egress::{priority_class, EgressQueues};
pub use mac_table::{LearnOutcome, LogicalPort, MacTable, MacTableEntry};
pub use trunk::TrunkGroup;
pub use vlan::{Admit, VlanMap, DEFAULT_VLAN};

use crate::config::{IngressMode, SwitchConfig};
use crate::ether::{wire_time, Frame};
use crate::sim::{RngStream, SimTime};

pub type PortSet = SmallVec<[u16; 8]>;

#[derive(Debug, Clone)]
pub struct QueuedFrame {
    pub frame: Box<Frame>,
    pub ingress: u16,
    pub vlan: u16,
}

/// Reasons an ingress port is paused upstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Holder {
    Egress { port: u16, class: u8 },
    Fabric,
    OwnBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropSite {
    Egress,
    Ingress,
    Fabric,
    Trunk,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwEffect {
    /// Egress port may have a frame to send.
    Kick(u16),
    /// Ask the peer on `port` to stop (`on`) or restart.
    Pause {
        port: u16,
        on: bool,
    },
    Drop {
        flow: u32,
        site: DropSite,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngressDecision {
    Reject,
    Filter,
    /// Destination trunk has no live member.
    TrunkDown,
    Forward {
        vlan: u16,
        ports: PortSet,
        flooded: bool,
    },
}

#[derive(Debug, Clone, Default)]
pub struct SwitchStats {
    pub rx_frames: u64,
    pub rejected: u64,
    pub filtered: u64,
    pub forwarded: u64,
    pub copies: u64,
    pub tx_frames: u64,
    pub dropped_egress: u64,
    pub dropped_ingress: u64,
    pub dropped_fabric: u64,
    pub dropped_trunk: u64,
    pub floods: u64,
    pub floods_after_warmup: u64,
    pub group_forwards: u64,
    /// Copies sent on a port outside the frame's VLAN.
    pub vlan_violations: u64,
    pub pause_requests: u64,
    pub max_held_bytes: u64,
}

impl SwitchStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_egress + self.dropped_ingress + self.dropped_fabric + self.dropped_trunk
    }
}

#[derive(Debug, Clone)]
pub struct EgressPort {
    pub queues: EgressQueues<QueuedFrame>,
    /// Bytes queued per class per ingress.
    contrib: Vec<Vec<u64>>,
    congested: Vec<bool>,
    refill_rr: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IngressPort {
    /// Indexed by egress port (VOQ mode).
    voq: Vec<VecDeque<QueuedFrame>>,
    /// Copies waiting in arrival order with their egress port (shared mode).
    fifo: VecDeque<(u16, QueuedFrame)>,
    pub held_bytes: u64,
    pub holders: BTreeSet<Holder>,
    pub pause_requested: bool,
    fabric_bytes: u64,
}

impl IngressPort {
    pub fn held_frames(&self) -> usize {
        self.voq.iter().map(VecDeque::len).sum::<usize>() + self.fifo.len()
    }
}

#[derive(Debug, Clone)]
pub struct FabricEntry {
    pub frame: Box<Frame>,
    pub ingress: u16,
    pub vlan: u16,
    pub ports: PortSet,
}

/// Shared FIFO server draining at a fraction of the aggregate line rate.
#[derive(Debug, Clone)]
pub struct Fabric {
    pub rate_bps: u64,
    pub buffer_bytes: u64,
    queue: VecDeque<FabricEntry>,
    bytes: u64,
    pub busy: bool,
    congested: bool,
}

impl Fabric {
    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn iter(&self) -> impl Iterator<Item = &FabricEntry> {
        self.queue.iter()
    }

    pub fn head_service_time(&self) -> Option<SimTime> {
        self.queue
            .front()
            .map(|e| wire_time(e.frame.size_bytes, self.rate_bps).expect("positive fabric rate"))
    }
}

#[derive(Debug, Clone)]
pub struct Switch {
    pub cfg: SwitchConfig,
    pub mac_table: MacTable,
    pub vlans: VlanMap,
    pub trunks: Vec<TrunkGroup>,
    port_trunk: Vec<Option<u16>>,
    pub egress: Vec<EgressPort>,
    pub ingress: Vec<IngressPort>,
    pub fabric: Option<Fabric>,
    /// Ports with a link attached; floods skip the others.
    pub port_up: Vec<bool>,
    mc_next_free: SimTime,
    pub warmup_end: SimTime,
    pub stats: SwitchStats,
}

impl Switch {
    /// `line_rates` gives each port's line rate for the fabric capacity.
    pub fn new(cfg: SwitchConfig, vlans: VlanMap, line_rates: &[u64], rng_seed: u64, rng_base: u64) -> Self {
        let n = cfg.ports as usize;
        let mut mac_table = MacTable::new(&cfg.mac_table);
        for s in &cfg.static_entries {
            let port = LogicalPort::Port(s.port);
            mac_table.add_static(s.mac, s.vlan, port);
        }
        let mut port_trunk = vec![None; n];
        let trunks = cfg
            .trunks
            .iter()
            .enumerate()
            .map(|(t, members)| {
                for &m in members {
                    port_trunk[m as usize] = Some(t as u16);
                }
                TrunkGroup::new(members.clone(), RngStream::new(rng_seed, rng_base + t as u64))
            })
            .collect();
        let egress = (0..n)
            .map(|_| {
                let queues = EgressQueues::new(cfg.scheduler, cfg.priority_classes, &cfg.wrr_weights, cfg.egress_buffer_bytes);
                let classes = queues.classes();
                EgressPort {
                    queues,
                    contrib: vec![vec![0; n]; classes],
                    congested: vec![false; classes],
                    refill_rr: 0,
                }
            })
            .collect();
        let ingress = (0..n)
            .map(|_| IngressPort {
                voq: (0..n).map(|_| VecDeque::new()).collect(),
                ..Default::default()
            })
            .collect();
        let fabric = (cfg.fabric_capacity_fraction < 1.0).then(|| {
            let total: u64 = line_rates.iter().sum();
            Fabric {
                rate_bps: ((total as f64) * cfg.fabric_capacity_fraction).round().max(1.0) as u64,
                buffer_bytes: cfg.fabric_buffer_bytes,
                queue: VecDeque::new(),
                bytes: 0,
                busy: false,
                congested: false,
            }
        });
        Switch {
            cfg,
            mac_table,
            vlans,
            trunks,
            port_trunk,
            egress,
            ingress,
            fabric,
            port_up: vec![true; n],
            mc_next_free: SimTime::ZERO,
            warmup_end: SimTime::ZERO,
            stats: SwitchStats::default(),
        }
    }

    pub fn name(&self) -> &str {
        &self.cfg.name
    }

    pub fn ports(&self) -> u16 {
        self.cfg.ports
    }

    fn fc_active(&self) -> bool {
        self.cfg.fc_enabled && self.cfg.fc_propagation
    }

    pub fn logical_port(&self, port: u16) -> LogicalPort {
        match self.port_trunk[port as usize] {
            Some(t) => LogicalPort::Trunk(t),
            None => LogicalPort::Port(port),
        }
    }

    pub fn trunk_of(&self, port: u16) -> Option<u16> {
        self.port_trunk[port as usize]
    }

    /// VLAN admission, learning and destination lookup.
    pub fn ingress_decide(&mut self, frame: &Frame, in_port: u16, now: SimTime) -> IngressDecision {
        self.stats.rx_frames += 1;
        let vlan = match self.vlans.admit(frame.tag, in_port) {
            Admit::Accept(v) => v,
            Admit::Reject => {
                self.stats.rejected += 1;
                return IngressDecision::Reject;
            }
        };
        let in_logical = self.logical_port(in_port);
        self.mac_table.learn(frame.src, vlan, in_logical, now);

        let known = if frame.dst.is_multicast() {
            None
        } else {
            self.mac_table.lookup(frame.dst, vlan)
        };
        let mut ports = PortSet::new();
        let flooded = match known {
            Some(out) if out == in_logical => {
                self.stats.filtered += 1;
                return IngressDecision::Filter;
            }
            Some(LogicalPort::Port(p)) => {
                ports.push(p);
                false
            }
            Some(LogicalPort::Trunk(t)) => {
                match self.trunks[t as usize].select(frame.src, frame.dst) {
                    Some(p) => ports.push(p),
                    None => {
                        self.stats.dropped_trunk += 1;
                        return IngressDecision::TrunkDown;
                    }
                }
                false
            }
            None => {
                let mut trunk_done: SmallVec<[u16; 2]> = SmallVec::new();
                let members: PortSet = self.vlans.members(vlan).iter().copied().collect();
                for p in members {
                    if p == in_port || !self.port_up[p as usize] {
                        continue;
                    }
                    match self.port_trunk[p as usize] {
                        Some(t) => {
                            if LogicalPort::Trunk(t) == in_logical || trunk_done.contains(&t) {
                                continue;
                            }
                            trunk_done.push(t);
                            if let Some(m) = self.trunks[t as usize].select(frame.src, frame.dst) {
                                ports.push(m);
                            }
                        }
                        None => ports.push(p),
                    }
                }
                if frame.dst.is_multicast() {
                    self.stats.group_forwards += 1;
                } else {
                    self.stats.floods += 1;
                    if now >= self.warmup_end {
                        self.stats.floods_after_warmup += 1;
                    }
                }
                true
            }
        };
        if ports.is_empty() {
            self.stats.filtered += 1;
            return IngressDecision::Filter;
        }
        self.stats.forwarded += 1;
        IngressDecision::Forward { vlan, ports, flooded }
    }

    /// Release time of a flooded or group frame under the multicast rate cap.
    pub fn multicast_gate(&mut self, now: SimTime) -> SimTime {
        match self.cfg.multicast_rate_cap {
            Some(rate) if rate > 0.0 => {
                let at = self.mc_next_free.max(now);
                self.mc_next_free = at + SimTime::from_secs_f64(1.0 / rate);
                at
            }
            _ => now,
        }
    }

    /// Enters the fabric server. Returns true when the server was idle and
    /// the caller must schedule its completion.
    pub fn fabric_push(&mut self, entry: FabricEntry, fx: &mut Vec<SwEffect>) -> bool {
        let fc = self.fc_active();
        let xoff = self.cfg.xoff_fraction;
        let Some(fab) = self.fabric.as_mut() else {
            panic!("fabric_push on a switch without fabric server");
        };
        let size = entry.frame.size_bytes as u64;
        if fab.bytes + size > fab.buffer_bytes {
            self.stats.dropped_fabric += 1;
            fx.push(SwEffect::Drop {
                flow: entry.frame.flow_id,
                site: DropSite::Fabric,
            });
            return false;
        }
        let ingress = entry.ingress;
        fab.bytes += size;
        fab.queue.push_back(entry);
        self.ingress[ingress as usize].fabric_bytes += size;
        if fc && fab.bytes as f64 > xoff * fab.buffer_bytes as f64 {
            fab.congested = true;
        }
        let congested = fab.congested;
        let start = !fab.busy;
        fab.busy = true;
        if congested {
            self.add_holder(ingress, Holder::Fabric, fx);
        }
        start
    }

    /// Completes service of the fabric head. Returns the entry and whether
    /// another service must be scheduled.
    pub fn fabric_pop(&mut self, fx: &mut Vec<SwEffect>) -> (FabricEntry, bool) {
        let xon = self.cfg.xon_fraction;
        let fab = self.fabric.as_mut().expect("fabric server");
        let e = fab.queue.pop_front().expect("fabric completion with empty queue");
        let size = e.frame.size_bytes as u64;
        fab.bytes -= size;
        fab.busy = !fab.queue.is_empty();
        let more = fab.busy;
        let release = fab.congested && (fab.bytes as f64) < xon * fab.buffer_bytes as f64;
        if release {
            fab.congested = false;
        }
        self.ingress[e.ingress as usize].fabric_bytes -= size;
        if release {
            for i in 0..self.ingress.len() as u16 {
                self.remove_holder(i, Holder::Fabric, fx);
            }
        }
        (e, more)
    }

    /// Offers one copy to `port`'s class queue.
    pub fn admit_to_egress(&mut self, port: u16, item: QueuedFrame, fx: &mut Vec<SwEffect>) {
        self.stats.copies += 1;
        let i = item.ingress as usize;
        let e = port as usize;
        let class = self.egress[e].queues.class_for(item.frame.priority());
        let size = item.frame.size_bytes;
        let shared = self.cfg.ingress_mode == IngressMode::SharedFifo;
        let must_wait = if shared {
            !self.ingress[i].fifo.is_empty()
        } else {
            !self.ingress[i].voq[e].is_empty()
        };
        if !must_wait && self.egress[e].queues.has_room(class, size) {
            self.push_egress(port, class, item, fx);
            fx.push(SwEffect::Kick(port));
            return;
        }
        if shared || self.fc_active() {
            let limit = self.cfg.ingress_buffer_bytes;
            let ing = &mut self.ingress[i];
            if ing.held_bytes + size as u64 > limit {
                self.stats.dropped_ingress += 1;
                fx.push(SwEffect::Drop {
                    flow: item.frame.flow_id,
                    site: DropSite::Ingress,
                });
                return;
            }
            ing.held_bytes += size as u64;
            self.stats.max_held_bytes = self.stats.max_held_bytes.max(ing.held_bytes);
            if shared {
                ing.fifo.push_back((port, item));
            } else {
                ing.voq[e].push_back(item);
            }
            if self.fc_active() && self.egress[e].congested[class] {
                self.add_holder(i as u16, Holder::Egress { port, class: class as u8 }, fx);
            }
            self.check_own_buffer(i as u16, fx);
            return;
        }
        self.stats.dropped_egress += 1;
        fx.push(SwEffect::Drop {
            flow: item.frame.flow_id,
            site: DropSite::Egress,
        });
    }

    fn push_egress(&mut self, port: u16, class: usize, item: QueuedFrame, fx: &mut Vec<SwEffect>) {
        let fc = self.fc_active();
        let xoff = self.cfg.xoff_fraction;
        let i = item.ingress;
        let size = item.frame.size_bytes;
        let eg = &mut self.egress[port as usize];
        eg.contrib[class][i as usize] += size as u64;
        eg.queues.push(class, size, item).unwrap_or_else(|_| unreachable!("room checked"));
        if !fc {
            return;
        }
        let limit = eg.queues.capacity() / eg.queues.classes() as u64;
        if !eg.congested[class] && eg.queues.class_bytes(class) as f64 > xoff * limit as f64 {
            eg.congested[class] = true;
            let feeders: Vec<u16> = (0..eg.contrib[class].len() as u16)
                .filter(|&j| eg.contrib[class][j as usize] > 0)
                .collect();
            for j in feeders {
                self.add_holder(j, Holder::Egress { port, class: class as u8 }, fx);
            }
        } else if eg.congested[class] {
            self.add_holder(i, Holder::Egress { port, class: class as u8 }, fx);
        }
    }

    /// Takes the next frame for transmission on `port` and refills the
    /// egress from held copies.
    pub fn dequeue(&mut self, port: u16, fx: &mut Vec<SwEffect>) -> Option<QueuedFrame> {
        let xon = self.cfg.xon_fraction;
        let eg = &mut self.egress[port as usize];
        let item = eg.queues.select()?;
        let class = eg.queues.class_for(item.frame.priority());
        eg.contrib[class][item.ingress as usize] -= item.frame.size_bytes as u64;
        let limit = eg.queues.capacity() / eg.queues.classes() as u64;
        let release = eg.congested[class] && (eg.queues.class_bytes(class) as f64) < xon * limit as f64;
        if release {
            eg.congested[class] = false;
        }
        self.stats.tx_frames += 1;
        if !self.vlans.is_member(port, item.vlan) {
            self.stats.vlan_violations += 1;
        }
        self.refill(port, fx);
        if release {
            let h = Holder::Egress { port, class: class as u8 };
            for i in 0..self.ingress.len() as u16 {
                self.remove_holder(i, h, fx);
            }
        }
        Some(item)
    }

    fn refill(&mut self, port: u16, fx: &mut Vec<SwEffect>) {
        let n = self.ingress.len();
        if self.cfg.ingress_mode == IngressMode::SharedFifo {
            for k in 0..n {
                let i = (self.egress[port as usize].refill_rr + k) % n;
                while let Some((e, head)) = self.ingress[i].fifo.front() {
                    let e = *e;
                    let eq = &self.egress[e as usize].queues;
                    let class = eq.class_for(head.frame.priority());
                    if !eq.has_room(class, head.frame.size_bytes) {
                        break;
                    }
                    let (_, item) = self.ingress[i].fifo.pop_front().expect("head");
                    self.ingress[i].held_bytes -= item.frame.size_bytes as u64;
                    self.push_egress(e, class, item, fx);
                    fx.push(SwEffect::Kick(e));
                }
                self.check_own_buffer(i as u16, fx);
            }
            let eg = &mut self.egress[port as usize];
            eg.refill_rr = (eg.refill_rr + 1) % n;
            return;
        }
        let e = port as usize;
        let start = self.egress[e].refill_rr;
        for k in 0..n {
            let i = (start + k) % n;
            let mut moved = false;
            while let Some(head) = self.ingress[i].voq[e].front() {
                let class = self.egress[e].queues.class_for(head.frame.priority());
                if !self.egress[e].queues.has_room(class, head.frame.size_bytes) {
                    break;
                }
                let item = self.ingress[i].voq[e].pop_front().expect("head");
                self.ingress[i].held_bytes -= item.frame.size_bytes as u64;
                self.push_egress(port, class, item, fx);
                moved = true;
            }
            if moved {
                self.check_own_buffer(i as u16, fx);
                self.egress[e].refill_rr = (i + 1) % n;
            }
        }
    }

    fn check_own_buffer(&mut self, i: u16, fx: &mut Vec<SwEffect>) {
        if !self.cfg.fc_enabled {
            return;
        }
        let limit = self.cfg.ingress_buffer_bytes as f64;
        let held = self.ingress[i as usize].held_bytes as f64;
        if held > self.cfg.xoff_fraction * limit {
            self.add_holder(i, Holder::OwnBuffer, fx);
        } else if held < self.cfg.xon_fraction * limit {
            self.remove_holder(i, Holder::OwnBuffer, fx);
        }
    }

    fn add_holder(&mut self, i: u16, h: Holder, fx: &mut Vec<SwEffect>) {
        if self.ingress[i as usize].holders.insert(h) {
            self.update_pause(i, fx);
        }
    }

    fn remove_holder(&mut self, i: u16, h: Holder, fx: &mut Vec<SwEffect>) {
        if self.ingress[i as usize].holders.remove(&h) {
            self.update_pause(i, fx);
        }
    }

    fn update_pause(&mut self, i: u16, fx: &mut Vec<SwEffect>) {
        let ing = &mut self.ingress[i as usize];
        let want = !ing.holders.is_empty();
        if want != ing.pause_requested {
            ing.pause_requested = want;
            if want {
                self.stats.pause_requests += 1;
            }
            fx.push(SwEffect::Pause { port: i, on: want });
        }
    }

    /// Copies waiting in egress queues and ingress holds.
    pub fn queued_copies(&self) -> impl Iterator<Item = &QueuedFrame> {
        let eg = self.egress.iter().flat_map(|e| e.queues.iter());
        let voq = self.ingress.iter().flat_map(|i| i.voq.iter().flat_map(|q| q.iter()));
        let fifo = self.ingress.iter().flat_map(|i| i.fifo.iter().map(|(_, q)| q));
        eg.chain(voq).chain(fifo)
    }

    pub fn egress_bytes(&self, port: u16) -> u64 {
        self.egress[port as usize].queues.bytes()
    }

    pub fn egress_has_frames(&self, port: u16) -> bool {
        !self.egress[port as usize].queues.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SchedulerKind;
    use crate::ether::{MacAddress, GE_BPS};

    fn switch(ports: u16, f: impl FnOnce(&mut SwitchConfig)) -> Switch {
        let mut cfg = SwitchConfig::new("sw", ports);
        f(&mut cfg);
        let vl = VlanMap::new(ports);
        Switch::new(cfg, vl, &vec![GE_BPS; ports as usize], 1, 0)
    }

    fn frame(src: u64, dst: u64, size: u32) -> Frame {
        let mut f = Frame::data(MacAddress::from_u64(src), MacAddress::from_u64(dst), size).unwrap();
        f.flow_id = src as u32;
        f
    }

    fn q(f: Frame, ingress: u16) -> QueuedFrame {
        QueuedFrame {
            frame: Box::new(f),
            ingress,
            vlan: 1,
        }
    }

    #[test]
    fn unknown_destination_floods_vlan_except_ingress() {
        let mut sw = switch(5, |_| {});
        match sw.ingress_decide(&frame(1, 2, 64), 0, SimTime::ZERO) {
            IngressDecision::Forward { ports, flooded, .. } => {
                assert!(flooded);
                assert_eq!(ports.as_slice(), &[1, 2, 3, 4]);
            }
            d => panic!("{d:?}"),
        }
        assert_eq!(sw.stats.floods, 1);
    }

    #[test]
    fn learned_destination_is_forwarded_to_one_port() {
        let mut sw = switch(5, |_| {});
        sw.ingress_decide(&frame(2, 1, 64), 3, SimTime::ZERO);
        match sw.ingress_decide(&frame(1, 2, 64), 0, SimTime::ZERO) {
            IngressDecision::Forward { ports, flooded, .. } => {
                assert!(!flooded);
                assert_eq!(ports.as_slice(), &[3]);
            }
            d => panic!("{d:?}"),
        }
        // destination behind the ingress port is filtered
        assert_eq!(sw.ingress_decide(&frame(5, 2, 64), 3, SimTime::ZERO), IngressDecision::Filter);
    }

    #[test]
    fn trunk_counts_as_one_port_when_flooding() {
        let mut sw = switch(5, |c| c.trunks = vec![vec![3, 4]]);
        match sw.ingress_decide(&frame(1, 2, 64), 0, SimTime::ZERO) {
            IngressDecision::Forward { ports, .. } => {
                assert_eq!(ports.len(), 3);
                assert!(ports.contains(&1) && ports.contains(&2));
            }
            d => panic!("{d:?}"),
        }
        // arriving on a trunk member never floods back into the trunk
        match sw.ingress_decide(&frame(9, 2, 64), 4, SimTime::ZERO) {
            IngressDecision::Forward { ports, .. } => assert_eq!(ports.as_slice(), &[0, 1, 2]),
            d => panic!("{d:?}"),
        }
        assert_eq!(sw.mac_table.lookup(MacAddress::from_u64(9), 1), Some(LogicalPort::Trunk(0)));
    }

    #[test]
    fn full_egress_without_fc_drops() {
        let mut sw = switch(3, |c| {
            c.fc_enabled = false;
            c.egress_buffer_bytes = 3000;
        });
        let mut fx = vec![];
        sw.admit_to_egress(2, q(frame(1, 2, 1500), 0), &mut fx);
        sw.admit_to_egress(2, q(frame(1, 2, 1500), 0), &mut fx);
        sw.admit_to_egress(2, q(frame(1, 2, 1500), 0), &mut fx);
        assert_eq!(sw.stats.dropped_egress, 1);
        assert!(fx.contains(&SwEffect::Drop {
            flow: 1,
            site: DropSite::Egress
        }));
    }

    #[test]
    fn full_egress_with_fc_holds_pauses_and_refills_in_order() {
        let mut sw = switch(3, |c| c.egress_buffer_bytes = 10 * 1000);
        let mut fx = vec![];
        for k in 0..14u64 {
            let mut f = frame(1, 2, 1000);
            f.seq = k;
            sw.admit_to_egress(2, q(f, 0), &mut fx);
        }
        assert_eq!(sw.stats.dropped(), 0);
        assert!(fx.contains(&SwEffect::Pause { port: 0, on: true }));
        assert_eq!(sw.ingress[0].held_frames(), 4);
        let mut seqs = vec![];
        fx.clear();
        while let Some(item) = sw.dequeue(2, &mut fx) {
            seqs.push(item.frame.seq);
        }
        assert_eq!(seqs, (0..14).collect::<Vec<_>>());
        assert!(fx.contains(&SwEffect::Pause { port: 0, on: false }));
        assert!(!sw.ingress[0].pause_requested);
    }

    #[test]
    fn congestion_pauses_every_contributor_and_only_them() {
        let mut sw = switch(5, |c| c.egress_buffer_bytes = 10_000);
        let mut fx = vec![];
        for k in 0..9 {
            sw.admit_to_egress(4, q(frame(1, 9, 1000), (k % 3) as u16), &mut fx);
        }
        for i in 0..3 {
            assert!(sw.ingress[i].pause_requested, "ingress {i}");
        }
        assert!(!sw.ingress[3].pause_requested);
        // a new feeder joining while congested is paused as well
        sw.admit_to_egress(4, q(frame(1, 9, 64), 3), &mut fx);
        assert!(sw.ingress[3].pause_requested);
    }

    #[test]
    fn voq_does_not_block_other_egress() {
        let mut sw = switch(3, |c| c.egress_buffer_bytes = 2000);
        let mut fx = vec![];
        for _ in 0..4 {
            sw.admit_to_egress(1, q(frame(1, 2, 1000), 0), &mut fx);
        }
        assert!(sw.ingress[0].held_frames() > 0);
        fx.clear();
        sw.admit_to_egress(2, q(frame(1, 3, 1000), 0), &mut fx);
        assert_eq!(fx.first(), Some(&SwEffect::Kick(2)));
        assert_eq!(sw.egress_bytes(2), 1000);
    }

    #[test]
    fn shared_fifo_blocks_behind_congested_head() {
        let mut sw = switch(3, |c| {
            c.egress_buffer_bytes = 2000;
            c.ingress_mode = IngressMode::SharedFifo;
        });
        let mut fx = vec![];
        for _ in 0..3 {
            sw.admit_to_egress(1, q(frame(1, 2, 1000), 0), &mut fx);
        }
        sw.admit_to_egress(2, q(frame(1, 3, 1000), 0), &mut fx);
        assert_eq!(sw.egress_bytes(2), 0, "head-of-line blocked");
        sw.dequeue(1, &mut fx);
        assert_eq!(sw.egress_bytes(2), 1000);
    }

    #[test]
    fn strict_scheduler_wired_into_switch() {
        let mut sw = switch(2, |c| {
            c.scheduler = SchedulerKind::Strict;
            c.fc_enabled = false;
        });
        let mut fx = vec![];
        let low = frame(1, 2, 100);
        let high = frame(3, 2, 100).with_tag(Some(crate::ether::VlanTag::new(1, 7).unwrap()));
        sw.admit_to_egress(1, q(low, 0), &mut fx);
        sw.admit_to_egress(1, q(high, 0), &mut fx);
        assert_eq!(sw.dequeue(1, &mut fx).unwrap().frame.flow_id, 3);
    }

    #[test]
    fn fabric_server_rate_and_overflow() {
        let mut sw = switch(4, |c| {
            c.fabric_capacity_fraction = 0.5;
            c.fabric_buffer_bytes = 3000;
            c.fc_enabled = false;
        });
        let fab = sw.fabric.as_ref().unwrap();
        assert_eq!(fab.rate_bps, 2 * GE_BPS);
        let mut fx = vec![];
        let entry = |src| FabricEntry {
            frame: Box::new(frame(src, 2, 1500)),
            ingress: 0,
            vlan: 1,
            ports: PortSet::from_slice(&[1]),
        };
        assert!(sw.fabric_push(entry(1), &mut fx));
        assert!(!sw.fabric_push(entry(2), &mut fx));
        assert!(!sw.fabric_push(entry(3), &mut fx));
        assert_eq!(sw.stats.dropped_fabric, 1);
        assert_eq!(sw.fabric.as_ref().unwrap().head_service_time(), Some(SimTime::from_nanos(6080)));
        let (e, more) = sw.fabric_pop(&mut fx);
        assert_eq!(e.frame.flow_id, 1);
        assert!(more);
    }

    #[test]
    fn multicast_cap_spaces_releases() {
        let mut sw = switch(2, |c| c.multicast_rate_cap = Some(1000.0));
        let t0 = SimTime::from_micros(10);
        assert_eq!(sw.multicast_gate(t0), t0);
        assert_eq!(sw.multicast_gate(t0), t0 + SimTime::from_millis(1));
        let mut free = switch(2, |_| {});
        assert_eq!(free.multicast_gate(t0), t0);
        assert_eq!(free.multicast_gate(t0), t0);
    }
}
