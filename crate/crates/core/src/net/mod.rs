//! The simulated network: hosts, switches and links wired together and
//! driven by the event engine.

mod build;
mod census;
mod host;

use std::sync::Arc;

pub use build::BuildError;
pub use census::Census;
pub use host::{Actor, Host, HostStats, Sent};

use crate::config::DataflowConfig;
use crate::dataflow::{Action, Ctx, EventLog, Message, Target};
use crate::ether::{Dir, Frame, Link, MacAddress, VlanTag};
use crate::metrics::MetricSet;
use crate::scenario::ScenarioDoc;
use crate::sim::{ActorId, Engine, Fault, Handler, RngStream, RunSummary, SimError, SimTime};
use crate::switch::{FabricEntry, PortSet, QueuedFrame, SwEffect, Switch};
use crate::traffic::SourceModel;

pub(crate) const STREAM_SOURCE: u64 = 1 << 32;
pub(crate) const STREAM_TRUNK: u64 = 2 << 32;
pub(crate) const STREAM_LVL1: u64 = 3 << 32;
pub(crate) const STREAM_L2PU: u64 = 4 << 32;

const SWITCH_ACTORS: u32 = 1 << 24;
const LINK_ACTORS: u32 = 2 << 24;
const SOURCE_ACTORS: u32 = 3 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Host(u32),
    Port { sw: u32, port: u16 },
}

#[derive(Debug, Clone)]
pub struct LinkSlot {
    pub name: String,
    pub link: Link,
    pub a: Endpoint,
    pub b: Endpoint,
}

impl LinkSlot {
    pub fn sender(&self, dir: Dir) -> Endpoint {
        match dir {
            Dir::AtoB => self.a,
            Dir::BtoA => self.b,
        }
    }

    pub fn receiver(&self, dir: Dir) -> Endpoint {
        self.sender(dir.reverse())
    }
}

#[derive(Debug)]
pub enum Ev {
    TxDone {
        link: u32,
        dir: Dir,
    },
    Arrive {
        link: u32,
        dir: Dir,
        frame: Box<Frame>,
    },
    PauseApply {
        link: u32,
        dir: Dir,
        on: bool,
    },
    Forward {
        sw: u32,
        in_port: u16,
        vlan: u16,
        ports: PortSet,
        frame: Box<Frame>,
    },
    FabricDone {
        sw: u32,
    },
    AgeScan {
        sw: u32,
    },
    RxDone {
        host: u32,
    },
    SourceFire {
        source: u32,
    },
    HostRetry {
        host: u32,
    },
    ActorTimer {
        host: u32,
        token: u64,
    },
    Lvl1,
}

#[derive(Debug, Clone)]
enum DestState {
    Fixed(MacAddress),
    Cycle(Vec<MacAddress>, usize),
}

#[derive(Debug, Clone)]
struct SourceState {
    name: String,
    host: u32,
    model: SourceModel,
    dests: Vec<DestState>,
    flows: Vec<u32>,
    seq: std::collections::HashMap<MacAddress, u64>,
    pending: Option<Box<Frame>>,
    emitted: u64,
    max_frames: Option<u64>,
    start: SimTime,
    stop: SimTime,
    frame_bytes: u32,
    tag: Option<VlanTag>,
    socket: u16,
}

#[derive(Debug)]
struct DataflowRt {
    cfg: DataflowConfig,
    log: EventLog,
    rng: RngStream,
    robs: Arc<[usize]>,
    prob: usize,
    l2sv: usize,
    dfm: usize,
    next_event: u64,
    stop: SimTime,
    flows: [u32; 8],
    actions: Vec<Action>,
}

/// All simulated state of one run.
#[derive(Debug)]
pub struct World {
    pub seed: u64,
    pub duration: SimTime,
    pub warmup_end: SimTime,
    pub switches: Vec<Switch>,
    sw_ports: Vec<Vec<Option<(u32, Dir)>>>,
    pub hosts: Vec<Host>,
    pub links: Vec<LinkSlot>,
    sources: Vec<SourceState>,
    pub metrics: MetricSet,
    df: Option<DataflowRt>,
    /// VLAN of each generated flow, indexed by flow id.
    flow_vlan: Vec<Option<u16>>,
    /// Frames of a VLAN-bound flow that reached a host outside that VLAN.
    vlan_leaks: u64,
    vlan_checked: u64,
}

fn sched(eng: &mut Engine<Ev>, at: SimTime, target: ActorId, ev: Ev) -> Result<(), Fault> {
    eng.schedule(at, target, ev).map(|_| ()).map_err(|e| Fault::new(e.to_string()))
}

impl World {
    pub fn host_index(&self, name: &str) -> Option<usize> {
        self.hosts.iter().position(|h| h.cfg.name == name)
    }

    pub fn switch_index(&self, name: &str) -> Option<usize> {
        self.switches.iter().position(|s| s.name() == name)
    }

    pub fn event_log(&self) -> Option<&EventLog> {
        self.df.as_ref().map(|d| &d.log)
    }

    /// Host indices of the readout buffers, in declaration order.
    pub fn rob_hosts(&self) -> Vec<usize> {
        self.df.as_ref().map_or(vec![], |d| d.robs.to_vec())
    }

    pub fn prob_host(&self) -> Option<usize> {
        self.df.as_ref().map(|d| d.prob)
    }

    pub fn lvl1_stop(&self) -> Option<SimTime> {
        self.df.as_ref().map(|d| d.stop)
    }

    fn start(&mut self, eng: &mut Engine<Ev>) -> Result<(), Fault> {
        for (i, h) in self.hosts.iter_mut().enumerate() {
            if h.cfg.emulation == crate::config::Emulation::Dead {
                h.rx_paused = true;
                if let Some((l, out)) = h.link {
                    let data_dir = out.reverse();
                    if let Some(at) = self.links[l as usize].link.request_pause(data_dir, true, SimTime::ZERO) {
                        sched(
                            eng,
                            at,
                            host_actor(i),
                            Ev::PauseApply {
                                link: l,
                                dir: data_dir,
                                on: true,
                            },
                        )?;
                    }
                }
            }
        }
        for (sw, s) in self.switches.iter().enumerate() {
            let aging = s.mac_table.aging_time();
            let scan = match s.cfg.mac_table.scan_interval_ms {
                Some(ms) => SimTime::from_secs_f64(ms / 1e3),
                None => SimTime::from_nanos(aging.as_nanos() / 4).min(SimTime::from_secs(1)),
            };
            if scan > SimTime::ZERO && scan < self.duration {
                sched(eng, scan, switch_actor(sw), Ev::AgeScan { sw: sw as u32 })?;
            }
        }
        for (i, s) in self.sources.iter().enumerate() {
            if s.start < s.stop && s.model.load() > 0.0 {
                sched(eng, s.start, ActorId(SOURCE_ACTORS | i as u32), Ev::SourceFire { source: i as u32 })?;
            }
        }
        if let Some(df) = self.df.as_mut() {
            let first = lvl1_gap(df);
            if first < df.stop {
                sched(eng, first, ActorId::GLOBAL, Ev::Lvl1)?;
            }
            let dfm = df.dfm;
            self.with_actor(eng, dfm, |a, ctx| {
                if let Actor::Dfm(d) = a {
                    d.start(ctx)
                }
            })?;
        }
        Ok(())
    }

    fn transmit(&mut self, eng: &mut Engine<Ev>, l: u32, dir: Dir, frame: Box<Frame>) -> Result<(), Fault> {
        let now = eng.now();
        let slot = &mut self.links[l as usize];
        let d = slot
            .link
            .transmit(dir, &frame, now)
            .map_err(|e| Fault::new(format!("link {}: {e}", slot.name)))?;
        let target = ActorId(LINK_ACTORS | l);
        sched(eng, d.arrive_at, target, Ev::Arrive { link: l, dir, frame })?;
        sched(eng, d.tx_done_at, target, Ev::TxDone { link: l, dir })
    }

    fn kick_sender(&mut self, eng: &mut Engine<Ev>, l: u32, dir: Dir) -> Result<(), Fault> {
        match self.links[l as usize].sender(dir) {
            Endpoint::Host(h) => self.host_kick(eng, h as usize),
            Endpoint::Port { sw, port } => self.switch_kick(eng, sw as usize, port),
        }
    }

    fn switch_kick(&mut self, eng: &mut Engine<Ev>, sw: usize, port: u16) -> Result<(), Fault> {
        let Some((l, dir)) = self.sw_ports[sw][port as usize] else {
            return Ok(());
        };
        if !self.links[l as usize].link.can_transmit(dir, eng.now()) {
            return Ok(());
        }
        let mut fx = Vec::new();
        if let Some(QueuedFrame { mut frame, vlan, .. }) = self.switches[sw].dequeue(port, &mut fx) {
            frame.tag = if self.switches[sw].vlans.egress_tagged(port, vlan) {
                Some(VlanTag::new(vlan, frame.priority()).map_err(|e| Fault::new(e.to_string()))?)
            } else {
                None
            };
            self.transmit(eng, l, dir, frame)?;
        }
        self.apply_effects(eng, sw, fx)
    }

    fn apply_effects(&mut self, eng: &mut Engine<Ev>, sw: usize, fx: Vec<SwEffect>) -> Result<(), Fault> {
        let now = eng.now();
        for e in fx {
            match e {
                SwEffect::Kick(p) => self.switch_kick(eng, sw, p)?,
                SwEffect::Pause { port, on } => {
                    if let Some((l, out)) = self.sw_ports[sw][port as usize] {
                        let data_dir = out.reverse();
                        if let Some(at) = self.links[l as usize].link.request_pause(data_dir, on, now) {
                            sched(
                                eng,
                                at,
                                switch_actor(sw),
                                Ev::PauseApply {
                                    link: l,
                                    dir: data_dir,
                                    on,
                                },
                            )?;
                        }
                    }
                }
                SwEffect::Drop { flow, .. } => self.metrics.flow_mut(flow).dropped_switch += 1,
            }
        }
        Ok(())
    }

    fn arrive(&mut self, eng: &mut Engine<Ev>, l: u32, dir: Dir, frame: Box<Frame>) -> Result<(), Fault> {
        let slot = &mut self.links[l as usize];
        slot.link.record_delivery(dir);
        match slot.receiver(dir) {
            Endpoint::Host(h) => self.host_receive(eng, h as usize, frame),
            Endpoint::Port { sw, port } => self.switch_receive(eng, sw as usize, port, frame),
        }
    }

    fn switch_receive(&mut self, eng: &mut Engine<Ev>, sw: usize, port: u16, frame: Box<Frame>) -> Result<(), Fault> {
        use crate::switch::IngressDecision as D;
        let now = eng.now();
        let s = &mut self.switches[sw];
        match s.ingress_decide(&frame, port, now) {
            D::Reject | D::Filter => self.metrics.flow_mut(frame.flow_id).filtered += 1,
            D::TrunkDown => self.metrics.flow_mut(frame.flow_id).dropped_switch += 1,
            D::Forward { vlan, ports, flooded } => {
                let release = if flooded { s.multicast_gate(now) } else { now };
                let at = release + SimTime::from_nanos(s.cfg.forwarding_latency_ns);
                let ev = Ev::Forward {
                    sw: sw as u32,
                    in_port: port,
                    vlan,
                    ports,
                    frame,
                };
                sched(eng, at, switch_actor(sw), ev)?;
            }
        }
        Ok(())
    }

    fn forward(
        &mut self,
        eng: &mut Engine<Ev>,
        sw: usize,
        in_port: u16,
        vlan: u16,
        ports: PortSet,
        frame: Box<Frame>,
    ) -> Result<(), Fault> {
        if self.switches[sw].fabric.is_none() {
            return self.expand(eng, sw, in_port, vlan, ports, frame);
        }
        let mut fx = Vec::new();
        let entry = FabricEntry {
            frame,
            ingress: in_port,
            vlan,
            ports,
        };
        let s = &mut self.switches[sw];
        if s.fabric_push(entry, &mut fx) {
            let t = s.fabric.as_ref().and_then(|f| f.head_service_time()).expect("queued entry");
            sched(eng, eng.now() + t, switch_actor(sw), Ev::FabricDone { sw: sw as u32 })?;
        }
        self.apply_effects(eng, sw, fx)
    }

    fn fabric_done(&mut self, eng: &mut Engine<Ev>, sw: usize) -> Result<(), Fault> {
        let mut fx = Vec::new();
        let s = &mut self.switches[sw];
        let (e, more) = s.fabric_pop(&mut fx);
        if more {
            let t = s.fabric.as_ref().and_then(|f| f.head_service_time()).expect("queued entry");
            sched(eng, eng.now() + t, switch_actor(sw), Ev::FabricDone { sw: sw as u32 })?;
        }
        self.apply_effects(eng, sw, fx)?;
        self.expand(eng, sw, e.ingress, e.vlan, e.ports, e.frame)
    }

    fn expand(&mut self, eng: &mut Engine<Ev>, sw: usize, in_port: u16, vlan: u16, ports: PortSet, frame: Box<Frame>) -> Result<(), Fault> {
        let n = ports.len();
        if n > 1 {
            self.metrics.flow_mut(frame.flow_id).replicated += n as u64 - 1;
        }
        let mut fx = Vec::new();
        let mut frame = Some(frame);
        for (k, &p) in ports.iter().enumerate() {
            let f = if k + 1 == n {
                frame.take().expect("last copy")
            } else {
                Box::new(frame.as_deref().expect("original").clone())
            };
            let item = QueuedFrame {
                frame: f,
                ingress: in_port,
                vlan,
            };
            self.switches[sw].admit_to_egress(p, item, &mut fx);
        }
        self.apply_effects(eng, sw, fx)
    }

    fn source_fire(&mut self, eng: &mut Engine<Ev>, i: usize) -> Result<(), Fault> {
        let now = eng.now();
        let target = ActorId(SOURCE_ACTORS | i as u32);
        let src_mac = self.hosts[self.sources[i].host as usize].mac;
        let s = &mut self.sources[i];
        if now >= s.stop || s.max_frames.is_some_and(|m| s.emitted >= m) {
            return Ok(());
        }
        let frame = match s.pending.take() {
            Some(f) => f,
            None => {
                let k = s.model.pick();
                let dst = match &mut s.dests[k] {
                    DestState::Fixed(m) => *m,
                    DestState::Cycle(v, c) => {
                        let m = v[*c];
                        *c = (*c + 1) % v.len();
                        m
                    }
                };
                let seq = s.seq.entry(dst).or_insert(0);
                *seq += 1;
                let mut f = Frame::data(src_mac, dst, s.frame_bytes).map_err(|e| Fault::new(format!("source {}: {e}", s.name)))?;
                f.tag = s.tag;
                f.flow_id = s.flows[k];
                f.seq = *seq;
                f.socket = s.socket;
                Box::new(f)
            }
        };
        let h = s.host as usize;
        match self.host_send(eng, h, frame)? {
            Sent::Accepted => {
                let s = &mut self.sources[i];
                s.emitted += 1;
                let next = s.model.next_after(now);
                if next < s.stop && !s.max_frames.is_some_and(|m| s.emitted >= m) {
                    sched(eng, next, target, Ev::SourceFire { source: i as u32 })?;
                }
            }
            Sent::RetryLater(f) => {
                let backoff = SimTime::from_nanos(self.hosts[h].cfg.send_retry_backoff_ns.max(1));
                let s = &mut self.sources[i];
                s.pending = Some(f);
                s.model.blocked();
                sched(eng, now + backoff, target, Ev::SourceFire { source: i as u32 })?;
            }
        }
        Ok(())
    }

    fn lvl1(&mut self, eng: &mut Engine<Ev>) -> Result<(), Fault> {
        let now = eng.now();
        let Some(df) = self.df.as_mut() else {
            return Ok(());
        };
        let id = df.next_event;
        df.next_event += 1;
        df.log.lvl1(id, now);
        let n_robs = df.robs.len();
        let hi = df.cfg.roi_max_robs.min(n_robs).max(1);
        let lo = df.cfg.roi_min_robs.clamp(1, hi);
        let k = df.rng.range_inclusive(lo, hi);
        let roi: Vec<u16> = df.rng.sample_distinct(n_robs, k).into_iter().map(|r| r as u16).collect();
        let next = now + lvl1_gap(df);
        let stop = df.stop;
        let robs = df.robs.clone();
        let l2sv = df.l2sv;
        for &h in robs.iter() {
            if let Actor::Rob(r) = &mut self.hosts[h].actor {
                r.insert(id);
            }
        }
        self.with_actor(eng, l2sv, |a, ctx| {
            if let Actor::L2sv(s) = a {
                s.on_lvl1(id, roi, ctx)
            }
        })?;
        if next < stop {
            sched(eng, next, ActorId::GLOBAL, Ev::Lvl1)?;
        }
        Ok(())
    }

    /// Runs `f` on the actor of host `h` and carries out its actions.
    fn with_actor(&mut self, eng: &mut Engine<Ev>, h: usize, f: impl FnOnce(&mut Actor, &mut Ctx)) -> Result<(), Fault> {
        let now = eng.now();
        let Some(df) = self.df.as_mut() else {
            return Ok(());
        };
        let mut actor = std::mem::take(&mut self.hosts[h].actor);
        let mut actions = std::mem::take(&mut df.actions);
        {
            let mut ctx = Ctx {
                now,
                me: h,
                actions: &mut actions,
                log: &mut df.log,
            };
            f(&mut actor, &mut ctx);
        }
        self.hosts[h].actor = actor;
        for a in actions.drain(..) {
            match a {
                Action::Send { to, msg } => self.send_message(eng, h, to, msg)?,
                Action::Timer { delay, token } => {
                    sched(eng, now + delay, host_actor(h), Ev::ActorTimer { host: h as u32, token })?;
                }
            }
        }
        if let Some(df) = self.df.as_mut() {
            df.actions = actions;
        }
        Ok(())
    }

    fn send_message(&mut self, eng: &mut Engine<Ev>, h: usize, to: Target, msg: Message) -> Result<(), Fault> {
        let df = self.df.as_ref().expect("dataflow runtime");
        let dst = match to {
            Target::Host(t) => self.hosts[t].mac,
            Target::Group => df.cfg.clear_group,
        };
        let flow = df.flows[msg.kind.label_index()];
        let host = &mut self.hosts[h];
        let tag = host.send_tag(msg.vlan, msg.priority).map_err(|e| Fault::new(e.to_string()))?;
        let sizes = crate::dataflow::fragment_sizes(msg.bytes);
        let count = sizes.len() as u16;
        let msg = Arc::new(msg);
        for (i, size) in sizes.into_iter().enumerate() {
            host.proto_seq += 1;
            let frame = Frame {
                src: host.mac,
                dst,
                tag,
                size_bytes: size,
                kind: crate::ether::FrameKind::Protocol,
                flow_id: flow,
                seq: host.proto_seq,
                injected_at: SimTime::ZERO,
                socket: 0,
                app: Some(crate::ether::AppFragment {
                    msg: msg.clone(),
                    index: i as u16,
                    count,
                }),
            };
            host.outbox.push_back(Box::new(frame));
        }
        self.flush_outbox(eng, h)
    }
}

fn lvl1_gap(df: &mut DataflowRt) -> SimTime {
    let mean = 1e9 / df.cfg.lvl1_rate_hz.max(1e-9);
    let ns = match df.cfg.lvl1_pattern {
        crate::config::TrafficPattern::Cbr => mean,
        crate::config::TrafficPattern::Poisson => df.rng.exp(mean),
    };
    SimTime::from_nanos(ns.round().max(1.0) as u64)
}

fn host_actor(h: usize) -> ActorId {
    ActorId(h as u32)
}

fn switch_actor(sw: usize) -> ActorId {
    ActorId(SWITCH_ACTORS | sw as u32)
}

impl Handler<Ev> for World {
    fn handle(&mut self, eng: &mut Engine<Ev>, _target: ActorId, ev: Ev) -> Result<(), Fault> {
        match ev {
            Ev::TxDone { link, dir } => self.kick_sender(eng, link, dir),
            Ev::Arrive { link, dir, frame } => self.arrive(eng, link, dir, frame),
            Ev::PauseApply { link, dir, on } => {
                self.links[link as usize].link.apply_pause(dir, on, eng.now());
                if on {
                    Ok(())
                } else {
                    self.kick_sender(eng, link, dir)
                }
            }
            Ev::Forward {
                sw,
                in_port,
                vlan,
                ports,
                frame,
            } => self.forward(eng, sw as usize, in_port, vlan, ports, frame),
            Ev::FabricDone { sw } => self.fabric_done(eng, sw as usize),
            Ev::AgeScan { sw } => {
                let now = eng.now();
                let s = &mut self.switches[sw as usize];
                s.mac_table.age_scan(now);
                let scan = match s.cfg.mac_table.scan_interval_ms {
                    Some(ms) => SimTime::from_secs_f64(ms / 1e3),
                    None => SimTime::from_nanos(s.mac_table.aging_time().as_nanos() / 4).min(SimTime::from_secs(1)),
                };
                sched(eng, now + scan, switch_actor(sw as usize), Ev::AgeScan { sw })
            }
            Ev::RxDone { host } => self.rx_done(eng, host as usize),
            Ev::SourceFire { source } => self.source_fire(eng, source as usize),
            Ev::HostRetry { host } => {
                self.hosts[host as usize].retry_pending = false;
                self.flush_outbox(eng, host as usize)
            }
            Ev::ActorTimer { host, token } => self.with_actor(eng, host as usize, |a, ctx| a.on_timer(token, ctx)),
            Ev::Lvl1 => self.lvl1(eng),
        }
    }

    fn actor_name(&self, actor: ActorId) -> String {
        let idx = (actor.0 & (SWITCH_ACTORS - 1)) as usize;
        match actor.0 {
            u32::MAX => "lvl1".to_string(),
            x if x < SWITCH_ACTORS => format!("host {}", self.hosts.get(idx).map_or("?", |h| &h.cfg.name)),
            x if x < LINK_ACTORS => format!("switch {}", self.switches.get(idx).map_or("?", |s| s.name())),
            x if x < SOURCE_ACTORS => format!("link {}", self.links.get(idx).map_or("?", |l| &l.name)),
            _ => format!("source {}", self.sources.get(idx).map_or("?", |s| &s.name)),
        }
    }
}

/// Engine plus world for one scenario run.
pub struct Simulation {
    pub engine: Engine<Ev>,
    pub world: World,
}

impl Simulation {
    pub fn new(doc: &ScenarioDoc) -> Result<Self, BuildError> {
        let world = World::build(doc)?;
        let mut engine = Engine::new();
        let mut sim_world = world;
        sim_world
            .start(&mut engine)
            .map_err(|f| BuildError(format!("start-up failed: {}", f.0)))?;
        Ok(Simulation { engine, world: sim_world })
    }

    /// Runs to the configured duration and finalizes the metrics.
    pub fn run(&mut self) -> Result<RunSummary, SimError> {
        let end = self.world.duration;
        let summary = self.engine.run_until(end, &mut self.world)?;
        self.world.finalize(&self.engine, summary);
        Ok(summary)
    }
}
