use std::collections::VecDeque;
use std::sync::Arc;

use super::{host_actor, sched, Ev, World};
use crate::config::{Emulation, HostConfig, HostRole};
use crate::dataflow::{Ctx, Dfm, L2pu, L2sv, Message, Reassembly, Rob, Sfi};
use crate::ether::{Dir, EtherError, Frame, FrameKind, MacAddress, VlanTag};
use crate::sim::{Engine, Fault, SimTime};

/// Dataflow application running on a host.
#[derive(Debug, Default)]
pub enum Actor {
    #[default]
    None,
    L2sv(L2sv),
    L2pu(Box<L2pu>),
    Rob(Rob),
    Dfm(Dfm),
    Sfi(Sfi),
}

impl Actor {
    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        match self {
            Actor::None => {}
            Actor::L2sv(a) => a.on_message(msg, ctx),
            Actor::L2pu(a) => a.on_message(msg, ctx),
            Actor::Rob(a) => a.on_message(msg, ctx),
            Actor::Dfm(a) => a.on_message(msg, ctx),
            Actor::Sfi(a) => a.on_message(msg, ctx),
        }
    }

    pub fn on_timer(&mut self, token: u64, ctx: &mut Ctx) {
        match self {
            Actor::None | Actor::L2sv(_) => {}
            Actor::L2pu(a) => a.on_timer(token, ctx),
            Actor::Rob(a) => a.on_timer(token, ctx),
            Actor::Dfm(a) => a.on_timer(token, ctx),
            Actor::Sfi(a) => a.on_timer(token, ctx),
        }
    }
}

/// Outcome of handing a frame to the NIC.
#[derive(Debug)]
pub enum Sent {
    Accepted,
    RetryLater(Box<Frame>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostStats {
    pub tx_frames: u64,
    pub rx_frames: u64,
    pub delivered: u64,
    pub filtered: u64,
    pub dropped_rx: u64,
    pub dropped_socket: u64,
    pub retry_later: u64,
    pub pause_requests: u64,
}

#[derive(Debug)]
pub struct Host {
    pub cfg: HostConfig,
    pub mac: MacAddress,
    /// Attached link and the direction this host transmits on.
    pub link: Option<(u32, Dir)>,
    pub line_bps: u64,
    /// VLANs the attached switch port carries tagged.
    pub tagged_vlans: Vec<u16>,
    pub pvid: u16,
    pub(super) tx: VecDeque<Box<Frame>>,
    pub(super) tx_bytes: u64,
    pub(super) rx: VecDeque<Box<Frame>>,
    pub(super) rx_bytes: u64,
    pub(super) rx_busy: bool,
    pub(super) rx_paused: bool,
    pub(super) socket_bytes: Vec<u64>,
    pub(super) outbox: VecDeque<Box<Frame>>,
    pub(super) retry_pending: bool,
    pub(super) reply_flow: Option<u32>,
    pub(super) reply_seq: u64,
    pub(super) proto_seq: u64,
    pub(super) reassembly: Reassembly,
    pub actor: Actor,
    pub stats: HostStats,
}

impl Host {
    pub fn new(cfg: HostConfig, mac: MacAddress) -> Self {
        let sockets = cfg.sockets.max(1) as usize;
        Host {
            cfg,
            mac,
            link: None,
            line_bps: 0,
            tagged_vlans: vec![],
            pvid: crate::switch::DEFAULT_VLAN,
            tx: VecDeque::new(),
            tx_bytes: 0,
            rx: VecDeque::new(),
            rx_bytes: 0,
            rx_busy: false,
            rx_paused: false,
            socket_bytes: vec![0; sockets],
            outbox: VecDeque::new(),
            retry_pending: false,
            reply_flow: None,
            reply_seq: 0,
            proto_seq: 0,
            reassembly: Reassembly::default(),
            actor: Actor::None,
            stats: HostStats::default(),
        }
    }

    /// Tag for a frame sent in `vlan`.
    pub fn send_tag(&self, vlan: u16, priority: u8) -> Result<Option<VlanTag>, EtherError> {
        if self.tagged_vlans.contains(&vlan) || priority > 0 {
            VlanTag::new(vlan, priority).map(Some)
        } else {
            Ok(None)
        }
    }

    fn drain_time(&self, frame: &Frame) -> SimTime {
        let service = if self.cfg.emulation == Emulation::Slowed {
            self.cfg.service_ns
        } else {
            0
        };
        let kernel = self
            .cfg
            .kernel_rate_mbytes
            .filter(|r| *r > 0.0)
            .map_or(0, |r| (frame.size_bytes as f64 * 1e3 / r).round() as u64);
        SimTime::from_nanos(service.max(kernel))
    }

    /// Frames and bytes held in the NIC and the outbox.
    pub fn queued(&self) -> impl Iterator<Item = &Frame> {
        self.tx.iter().chain(self.rx.iter()).chain(self.outbox.iter()).map(|f| &**f)
    }

    pub fn rx_queue_bytes(&self) -> u64 {
        self.rx_bytes
    }

    fn xoff(&self) -> u64 {
        (self.cfg.nic_rx_bytes as f64 * 0.8) as u64
    }

    fn xon(&self) -> u64 {
        (self.cfg.nic_rx_bytes as f64 * 0.5) as u64
    }
}

impl World {
    pub(super) fn host_send(&mut self, eng: &mut Engine<Ev>, h: usize, mut frame: Box<Frame>) -> Result<Sent, Fault> {
        let host = &mut self.hosts[h];
        if host.link.is_none() {
            return Err(Fault::new("host has no link"));
        }
        let size = frame.size_bytes as u64;
        if host.tx_bytes + size > host.cfg.nic_tx_bytes {
            host.stats.retry_later += 1;
            return Ok(Sent::RetryLater(frame));
        }
        frame.injected_at = eng.now();
        self.metrics.flow_mut(frame.flow_id).sent += 1;
        host.stats.tx_frames += 1;
        host.tx_bytes += size;
        host.tx.push_back(frame);
        self.host_kick(eng, h)?;
        Ok(Sent::Accepted)
    }

    pub(super) fn host_kick(&mut self, eng: &mut Engine<Ev>, h: usize) -> Result<(), Fault> {
        let host = &mut self.hosts[h];
        let Some((l, dir)) = host.link else {
            return Ok(());
        };
        if !self.links[l as usize].link.can_transmit(dir, eng.now()) {
            return Ok(());
        }
        let Some(frame) = host.tx.pop_front() else {
            return Ok(());
        };
        host.tx_bytes -= frame.size_bytes as u64;
        self.transmit(eng, l, dir, frame)?;
        self.flush_outbox(eng, h)
    }

    pub(super) fn flush_outbox(&mut self, eng: &mut Engine<Ev>, h: usize) -> Result<(), Fault> {
        while let Some(f) = self.hosts[h].outbox.pop_front() {
            if let Sent::RetryLater(f) = self.host_send(eng, h, f)? {
                let host = &mut self.hosts[h];
                host.outbox.push_front(f);
                if !host.retry_pending {
                    host.retry_pending = true;
                    let at = eng.now() + SimTime::from_nanos(host.cfg.send_retry_backoff_ns.max(1));
                    sched(eng, at, host_actor(h), Ev::HostRetry { host: h as u32 })?;
                }
                break;
            }
        }
        Ok(())
    }

    fn host_pause(&mut self, eng: &mut Engine<Ev>, h: usize, on: bool) -> Result<(), Fault> {
        let host = &mut self.hosts[h];
        host.rx_paused = on;
        if !host.cfg.fc_enabled {
            return Ok(());
        }
        let Some((l, out)) = host.link else {
            return Ok(());
        };
        host.stats.pause_requests += on as u64;
        let data_dir = out.reverse();
        if let Some(at) = self.links[l as usize].link.request_pause(data_dir, on, eng.now()) {
            sched(
                eng,
                at,
                host_actor(h),
                Ev::PauseApply {
                    link: l,
                    dir: data_dir,
                    on,
                },
            )?;
        }
        Ok(())
    }

    pub(super) fn host_receive(&mut self, eng: &mut Engine<Ev>, h: usize, frame: Box<Frame>) -> Result<(), Fault> {
        let host = &mut self.hosts[h];
        host.stats.rx_frames += 1;
        if let Some(&Some(v)) = self.flow_vlan.get(frame.flow_id as usize) {
            self.vlan_checked += 1;
            if host.pvid != v && !host.tagged_vlans.contains(&v) {
                self.vlan_leaks += 1;
            }
        }
        let accept = frame.dst == host.mac || frame.dst.is_multicast() || host.cfg.promiscuous || host.cfg.role == HostRole::Reflector;
        if !accept {
            host.stats.filtered += 1;
            self.metrics.flow_mut(frame.flow_id).filtered += 1;
            return Ok(());
        }
        let size = frame.size_bytes as u64;
        if host.rx_bytes + size > host.cfg.nic_rx_bytes {
            host.stats.dropped_rx += 1;
            self.metrics.flow_mut(frame.flow_id).dropped_host += 1;
            return Ok(());
        }
        if host.cfg.emulation == Emulation::Dead {
            host.rx_bytes += size;
            host.rx.push_back(frame);
            return Ok(());
        }
        let drain = host.drain_time(&frame);
        if drain == SimTime::ZERO && host.rx.is_empty() {
            return self.deliver(eng, h, *frame);
        }
        host.rx_bytes += size;
        host.rx.push_back(frame);
        let start = !host.rx_busy;
        let pause = !host.rx_paused && host.rx_bytes > host.xoff();
        if start {
            host.rx_busy = true;
            let drain = host.drain_time(host.rx.front().expect("queued"));
            sched(eng, eng.now() + drain, host_actor(h), Ev::RxDone { host: h as u32 })?;
        }
        if pause {
            self.host_pause(eng, h, true)?;
        }
        Ok(())
    }

    pub(super) fn rx_done(&mut self, eng: &mut Engine<Ev>, h: usize) -> Result<(), Fault> {
        let host = &mut self.hosts[h];
        let Some(frame) = host.rx.pop_front() else {
            host.rx_busy = false;
            return Ok(());
        };
        host.rx_bytes -= frame.size_bytes as u64;
        let resume = host.rx_paused && host.rx_bytes <= host.xon();
        match host.rx.front() {
            Some(next) => {
                let drain = host.drain_time(next);
                sched(eng, eng.now() + drain, host_actor(h), Ev::RxDone { host: h as u32 })?;
            }
            None => host.rx_busy = false,
        }
        if resume {
            self.host_pause(eng, h, false)?;
        }
        self.deliver(eng, h, *frame)
    }

    fn deliver(&mut self, eng: &mut Engine<Ev>, h: usize, frame: Frame) -> Result<(), Fault> {
        let now = eng.now();
        let host = &mut self.hosts[h];
        let size = frame.size_bytes as u64;
        let socket = (frame.socket as usize).min(host.socket_bytes.len() - 1);
        if host.cfg.lazy_sockets.contains(&(socket as u16)) {
            if host.socket_bytes[socket] + size > host.cfg.socket_bytes {
                host.stats.dropped_socket += 1;
                self.metrics.flow_mut(frame.flow_id).dropped_host += 1;
                return Ok(());
            }
            host.socket_bytes[socket] += size;
        }
        host.stats.delivered += 1;
        let line = host.line_bps;
        self.metrics.record_delivery(
            frame.flow_id,
            h as u32,
            frame.src,
            frame.dst,
            frame.seq,
            frame.size_bytes,
            frame.injected_at,
            now,
            line,
        )?;
        let host = &mut self.hosts[h];
        if let Some(frag) = &frame.app {
            if let Some(msg) = host.reassembly.push(&frag.msg, frag.count) {
                return self.dispatch(eng, h, msg);
            }
            return Ok(());
        }
        if host.cfg.role == HostRole::Reflector && frame.kind == FrameKind::Data && !frame.dst.is_multicast() {
            if let Some(flow) = host.reply_flow {
                host.reply_seq += 1;
                let mut reply = frame.clone();
                reply.src = frame.dst;
                reply.dst = frame.src;
                reply.flow_id = flow;
                reply.seq = host.reply_seq;
                reply.socket = 0;
                host.outbox.push_back(Box::new(reply));
                return self.flush_outbox(eng, h);
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, eng: &mut Engine<Ev>, h: usize, msg: Arc<Message>) -> Result<(), Fault> {
        self.with_actor(eng, h, |a, ctx| a.on_message(&msg, ctx))
    }
}
