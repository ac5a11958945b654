use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use super::{clear_bytes, Action, ClearBatch, CreditGate, Ctx, Message, MsgKind, Target, Verdict};
use crate::sim::{RngStream, SimTime};

/// `source` value of responses coming from the pseudo-ROB.
pub const PROB_SOURCE: u16 = u16::MAX;

const ASSIGN_BYTES: u32 = 128;
const SMALL_BYTES: u32 = 64;
const DECIDE: u64 = 1 << 63;
const FLUSH: u64 = 0;

#[derive(Debug, Clone, Copy)]
struct Pending {
    event: u64,
    target: u16,
    attempt: u32,
}

enum Timeout {
    Stale,
    Retried,
    GaveUp(u64),
}

/// Credit-limited request issuing with timeout and retry.
#[derive(Debug, Clone)]
struct Requester {
    gate: CreditGate,
    backlog: VecDeque<Pending>,
    outstanding: HashMap<u64, Pending>,
    next_token: u64,
    timeout: SimTime,
    max_retries: u32,
    bytes: u32,
    vlan: u16,
    priority: u8,
    requests: u64,
    timeouts: u64,
}

impl Requester {
    fn new(credits: usize, timeout: SimTime, max_retries: u32, bytes: u32, vlan: u16, priority: u8) -> Self {
        Requester {
            gate: CreditGate::new(credits),
            backlog: VecDeque::new(),
            outstanding: HashMap::new(),
            next_token: 1,
            timeout,
            max_retries,
            bytes,
            vlan,
            priority,
            requests: 0,
            timeouts: 0,
        }
    }

    fn enqueue(&mut self, event: u64, target: u16) {
        self.backlog.push_back(Pending { event, target, attempt: 0 });
    }

    fn pump(&mut self, ctx: &mut Ctx, host_of: impl Fn(u16) -> usize) {
        while !self.backlog.is_empty() && self.gate.try_acquire() {
            let p = self.backlog.pop_front().expect("non-empty");
            let token = self.next_token;
            self.next_token += 1;
            self.outstanding.insert(token, p);
            self.requests += 1;
            let kind = MsgKind::DataRequest { event: p.event, token };
            ctx.send(host_of(p.target), kind, self.bytes, self.vlan, self.priority);
            ctx.timer(self.timeout, token);
        }
    }

    fn on_response(&mut self, token: u64) -> Option<Pending> {
        let p = self.outstanding.remove(&token)?;
        self.gate.release();
        Some(p)
    }

    fn on_timeout(&mut self, token: u64) -> Timeout {
        let Some(p) = self.outstanding.remove(&token) else {
            return Timeout::Stale;
        };
        self.gate.release();
        self.timeouts += 1;
        if p.attempt < self.max_retries {
            self.backlog.push_front(Pending {
                attempt: p.attempt + 1,
                ..p
            });
            Timeout::Retried
        } else {
            Timeout::GaveUp(p.event)
        }
    }
}

/// Supervisor: assigns triggered events to the least busy processing unit.
#[derive(Debug, Clone)]
pub struct L2sv {
    pub host: usize,
    l2pus: Vec<(usize, u16)>,
    outstanding: Vec<usize>,
    max_events: usize,
    queue: VecDeque<(u64, Vec<u16>)>,
    owner: HashMap<u64, usize>,
    dfm: (usize, u16),
    priority: u8,
    pub assigned: u64,
    pub max_queue: usize,
    pub max_outstanding: usize,
}

impl L2sv {
    /// `l2pus` and `dfm` pair a host with the VLAN used to reach it.
    pub fn new(host: usize, l2pus: Vec<(usize, u16)>, max_events: usize, dfm: (usize, u16), priority: u8) -> Self {
        let n = l2pus.len();
        L2sv {
            host,
            l2pus,
            outstanding: vec![0; n],
            max_events: max_events.max(1),
            queue: VecDeque::new(),
            owner: HashMap::new(),
            dfm,
            priority,
            assigned: 0,
            max_queue: 0,
            max_outstanding: 0,
        }
    }

    pub fn outstanding(&self) -> &[usize] {
        &self.outstanding
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn on_lvl1(&mut self, event: u64, robs: Vec<u16>, ctx: &mut Ctx) {
        self.queue.push_back((event, robs));
        self.max_queue = self.max_queue.max(self.queue.len());
        self.drain(ctx);
    }

    fn drain(&mut self, ctx: &mut Ctx) {
        while let Some(k) = self.pick() {
            let Some((event, robs)) = self.queue.pop_front() else {
                return;
            };
            self.outstanding[k] += 1;
            self.max_outstanding = self.max_outstanding.max(self.outstanding[k]);
            self.owner.insert(event, k);
            self.assigned += 1;
            ctx.log.assigned(event);
            let (host, vlan) = self.l2pus[k];
            ctx.send(host, MsgKind::RoiAssign { event, robs }, ASSIGN_BYTES, vlan, self.priority);
        }
    }

    fn pick(&self) -> Option<usize> {
        if self.queue.is_empty() {
            return None;
        }
        (0..self.l2pus.len())
            .filter(|&k| self.outstanding[k] < self.max_events)
            .min_by_key(|&k| (self.outstanding[k], k))
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        if let MsgKind::Decision { event, verdict } = msg.kind {
            if let Some(k) = self.owner.remove(&event) {
                self.outstanding[k] -= 1;
            }
            let (dfm, vlan) = self.dfm;
            ctx.send(dfm, MsgKind::Decision { event, verdict }, SMALL_BYTES, vlan, self.priority);
            self.drain(ctx);
        }
    }
}

#[derive(Debug, Clone)]
struct L2Event {
    rounds: VecDeque<Vec<u16>>,
    awaiting: usize,
    failed: bool,
}

#[derive(Debug, Clone)]
pub struct L2puParams {
    pub credits: usize,
    pub timeout: SimTime,
    pub max_retries: u32,
    pub request_bytes: u32,
    pub detail_bytes: u32,
    pub accept_fraction: f64,
    pub decision_delay: SimTime,
    pub max_rounds: usize,
    pub priority: u8,
}

/// Processing unit: collects the RoI fragments round by round, then decides.
#[derive(Debug, Clone)]
pub struct L2pu {
    pub host: usize,
    l2sv: usize,
    prob: usize,
    robs: Arc<[usize]>,
    vlan: u16,
    p: L2puParams,
    req: Requester,
    rng: RngStream,
    events: HashMap<u64, L2Event>,
    pub decisions: u64,
    pub error_responses: u64,
}

impl L2pu {
    pub fn new(host: usize, l2sv: usize, prob: usize, robs: Arc<[usize]>, vlan: u16, p: L2puParams, rng: RngStream) -> Self {
        let req = Requester::new(p.credits, p.timeout, p.max_retries, p.request_bytes, vlan, p.priority);
        L2pu {
            host,
            l2sv,
            prob,
            robs,
            vlan,
            p,
            req,
            rng,
            events: HashMap::new(),
            decisions: 0,
            error_responses: 0,
        }
    }

    pub fn max_outstanding_requests(&self) -> usize {
        self.req.gate.max_outstanding
    }

    pub fn requests(&self) -> u64 {
        self.req.requests
    }

    pub fn timeouts(&self) -> u64 {
        self.req.timeouts
    }

    pub fn active_events(&self) -> usize {
        self.events.len()
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        match &msg.kind {
            MsgKind::RoiAssign { event, robs } => {
                let k = self.rng.range_inclusive(1, self.p.max_rounds.min(robs.len()).max(1));
                let rounds = split_rounds(robs, k);
                self.events.insert(
                    *event,
                    L2Event {
                        rounds: rounds.into(),
                        awaiting: 0,
                        failed: false,
                    },
                );
                self.start_round(*event, ctx);
            }
            MsgKind::DataResponse { token, ok, .. } => {
                if let Some(p) = self.req.on_response(*token) {
                    if !ok {
                        self.error_responses += 1;
                        if let Some(e) = self.events.get_mut(&p.event) {
                            e.failed = true;
                        }
                    }
                    self.piece_done(p.event, ctx);
                }
            }
            _ => {}
        }
        self.pump(ctx);
    }

    pub fn on_timer(&mut self, token: u64, ctx: &mut Ctx) {
        if token & DECIDE != 0 {
            self.decide(token & !DECIDE, ctx);
            return;
        }
        match self.req.on_timeout(token) {
            Timeout::Stale | Timeout::Retried => {}
            Timeout::GaveUp(event) => {
                if let Some(e) = self.events.get_mut(&event) {
                    e.failed = true;
                }
                self.piece_done(event, ctx);
            }
        }
        self.pump(ctx);
    }

    fn pump(&mut self, ctx: &mut Ctx) {
        let robs = self.robs.clone();
        let prob = self.prob;
        self.req.pump(ctx, |t| if t == PROB_SOURCE { prob } else { robs[t as usize] });
    }

    fn start_round(&mut self, event: u64, ctx: &mut Ctx) {
        let Some(e) = self.events.get_mut(&event) else {
            return;
        };
        match e.rounds.pop_front() {
            Some(round) => {
                e.awaiting = round.len();
                for r in round {
                    self.req.enqueue(event, r);
                }
            }
            None => ctx.timer(self.p.decision_delay, DECIDE | event),
        }
    }

    fn piece_done(&mut self, event: u64, ctx: &mut Ctx) {
        let Some(e) = self.events.get_mut(&event) else {
            return;
        };
        e.awaiting -= 1;
        if e.awaiting == 0 {
            self.start_round(event, ctx);
        }
    }

    fn decide(&mut self, event: u64, ctx: &mut Ctx) {
        let Some(e) = self.events.remove(&event) else {
            return;
        };
        let verdict = if e.failed {
            Verdict::Error
        } else if self.rng.bernoulli(self.p.accept_fraction) {
            Verdict::Accept
        } else {
            Verdict::Reject
        };
        self.decisions += 1;
        ctx.log.decided(event, verdict, ctx.now);
        if verdict == Verdict::Accept {
            ctx.send(
                self.prob,
                MsgKind::Detail { event },
                self.p.detail_bytes,
                self.vlan,
                self.p.priority,
            );
        }
        ctx.send(
            self.l2sv,
            MsgKind::Decision { event, verdict },
            SMALL_BYTES,
            self.vlan,
            self.p.priority,
        );
    }
}

/// Splits `robs` into `k` contiguous rounds of nearly equal size.
pub fn split_rounds(robs: &[u16], k: usize) -> Vec<Vec<u16>> {
    let k = k.clamp(1, robs.len().max(1));
    let base = robs.len() / k;
    let extra = robs.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut i = 0;
    for r in 0..k {
        let n = base + usize::from(r < extra);
        out.push(robs[i..i + n].to_vec());
        i += n;
    }
    out
}

/// Readout buffer (or the pseudo-ROB holding detail records). Requests are
/// served in arrival order, one per service time.
#[derive(Debug, Clone)]
pub struct Rob {
    pub host: usize,
    source: u16,
    buffer: HashSet<u64>,
    pub erased: Vec<u64>,
    service: SimTime,
    response_bytes: u32,
    busy_until: SimTime,
    pending: HashMap<u64, (usize, u64, u64, u16, u8)>,
    next_timer: u64,
    pub served: u64,
    pub error_responses: u64,
    /// Detail records received per event (pseudo-ROB only).
    pub details: HashMap<u64, u32>,
}

impl Rob {
    pub fn new(host: usize, index: u16, service: SimTime, fragment_bytes: u32) -> Self {
        Rob {
            host,
            source: index,
            buffer: HashSet::new(),
            erased: vec![],
            service,
            response_bytes: fragment_bytes,
            busy_until: SimTime::ZERO,
            pending: HashMap::new(),
            next_timer: 1,
            served: 0,
            error_responses: 0,
            details: HashMap::new(),
        }
    }

    pub fn new_prob(host: usize, service: SimTime, detail_bytes: u32) -> Self {
        Rob::new(host, PROB_SOURCE, service, detail_bytes)
    }

    pub fn is_prob(&self) -> bool {
        self.source == PROB_SOURCE
    }

    pub fn insert(&mut self, event: u64) {
        self.buffer.insert(event);
    }

    pub fn holds(&self, event: u64) -> bool {
        self.buffer.contains(&event)
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        match &msg.kind {
            MsgKind::DataRequest { event, token } => {
                let start = self.busy_until.max(ctx.now);
                self.busy_until = start + self.service;
                let t = self.next_timer;
                self.next_timer += 1;
                self.pending.insert(t, (msg.from, *token, *event, msg.vlan, msg.priority));
                ctx.timer(self.busy_until - ctx.now, t);
            }
            MsgKind::Detail { event } if self.is_prob() => {
                *self.details.entry(*event).or_insert(0) += 1;
                self.buffer.insert(*event);
            }
            MsgKind::Clear { events } => {
                for e in events {
                    self.buffer.remove(e);
                    self.erased.push(*e);
                }
            }
            _ => {}
        }
    }

    pub fn on_timer(&mut self, token: u64, ctx: &mut Ctx) {
        let Some((to, req, event, vlan, priority)) = self.pending.remove(&token) else {
            return;
        };
        let ok = self.buffer.contains(&event);
        self.served += 1;
        let bytes = if ok {
            self.response_bytes
        } else {
            self.error_responses += 1;
            SMALL_BYTES
        };
        let kind = MsgKind::DataResponse {
            event,
            token: req,
            ok,
            source: self.source,
        };
        ctx.send(to, kind, bytes, vlan, priority);
    }
}

/// Dataflow manager: hands accepted events to builders and batches clears.
#[derive(Debug, Clone)]
pub struct Dfm {
    pub host: usize,
    sfis: Vec<(usize, u16)>,
    outstanding: Vec<usize>,
    max_events: usize,
    queue: VecDeque<u64>,
    owner: HashMap<u64, usize>,
    batch: ClearBatch,
    period: SimTime,
    clear_vlan: u16,
    priority: u8,
    pub flushes: u64,
    pub cleared: u64,
    pub max_queue: usize,
    pub max_outstanding: usize,
}

impl Dfm {
    pub fn new(
        host: usize,
        sfis: Vec<(usize, u16)>,
        max_events: usize,
        batch: usize,
        period: SimTime,
        clear_vlan: u16,
        priority: u8,
    ) -> Self {
        let n = sfis.len();
        Dfm {
            host,
            sfis,
            outstanding: vec![0; n],
            max_events: max_events.max(1),
            queue: VecDeque::new(),
            owner: HashMap::new(),
            batch: ClearBatch::new(batch),
            period,
            clear_vlan,
            priority,
            flushes: 0,
            cleared: 0,
            max_queue: 0,
            max_outstanding: 0,
        }
    }

    pub fn start(&mut self, ctx: &mut Ctx) {
        ctx.timer(self.period, FLUSH);
    }

    pub fn pending_clears(&self) -> usize {
        self.batch.len()
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        match msg.kind {
            MsgKind::Decision { event, verdict } => match verdict {
                Verdict::Accept => {
                    self.queue.push_back(event);
                    self.max_queue = self.max_queue.max(self.queue.len());
                    self.assign(ctx);
                }
                Verdict::Reject | Verdict::Error => self.batch_clear(event, ctx),
            },
            MsgKind::EndOfEvent { event, .. } => {
                if let Some(k) = self.owner.remove(&event) {
                    self.outstanding[k] -= 1;
                }
                self.batch_clear(event, ctx);
                self.assign(ctx);
            }
            _ => {}
        }
    }

    pub fn on_timer(&mut self, _token: u64, ctx: &mut Ctx) {
        if !self.batch.is_empty() {
            self.flush(ctx);
        }
        ctx.timer(self.period, FLUSH);
    }

    fn assign(&mut self, ctx: &mut Ctx) {
        while !self.queue.is_empty() {
            let Some(k) = (0..self.sfis.len())
                .filter(|&k| self.outstanding[k] < self.max_events)
                .min_by_key(|&k| (self.outstanding[k], k))
            else {
                return;
            };
            let event = self.queue.pop_front().expect("non-empty");
            self.outstanding[k] += 1;
            self.max_outstanding = self.max_outstanding.max(self.outstanding[k]);
            self.owner.insert(event, k);
            let (host, vlan) = self.sfis[k];
            ctx.send(host, MsgKind::Build { event }, SMALL_BYTES, vlan, self.priority);
        }
    }

    fn batch_clear(&mut self, event: u64, ctx: &mut Ctx) {
        if self.batch.push(event) {
            self.flush(ctx);
        }
    }

    fn flush(&mut self, ctx: &mut Ctx) {
        let events = self.batch.take();
        self.flushes += 1;
        self.cleared += events.len() as u64;
        ctx.log.cleared(&events, ctx.now);
        let msg = Message {
            from: ctx.me,
            bytes: clear_bytes(events.len()),
            kind: MsgKind::Clear { events },
            vlan: self.clear_vlan,
            priority: self.priority,
        };
        ctx.actions.push(Action::Send { to: Target::Group, msg });
    }
}

#[derive(Debug, Clone)]
struct SfiEvent {
    awaiting: usize,
    failed: bool,
}

/// Event builder: collects every fragment of an accepted event.
#[derive(Debug, Clone)]
pub struct Sfi {
    pub host: usize,
    dfm: usize,
    prob: usize,
    robs: Arc<[usize]>,
    vlan: u16,
    priority: u8,
    req: Requester,
    events: HashMap<u64, SfiEvent>,
    pub built: u64,
    pub failed: u64,
}

impl Sfi {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        host: usize,
        dfm: usize,
        prob: usize,
        robs: Arc<[usize]>,
        vlan: u16,
        credits: usize,
        timeout: SimTime,
        max_retries: u32,
        request_bytes: u32,
        priority: u8,
    ) -> Self {
        Sfi {
            host,
            dfm,
            prob,
            robs,
            vlan,
            priority,
            req: Requester::new(credits, timeout, max_retries, request_bytes, vlan, 0),
            events: HashMap::new(),
            built: 0,
            failed: 0,
        }
    }

    pub fn max_outstanding_requests(&self) -> usize {
        self.req.gate.max_outstanding
    }

    pub fn requests(&self) -> u64 {
        self.req.requests
    }

    pub fn timeouts(&self) -> u64 {
        self.req.timeouts
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        match msg.kind {
            MsgKind::Build { event } => {
                self.events.insert(
                    event,
                    SfiEvent {
                        awaiting: self.robs.len() + 1,
                        failed: false,
                    },
                );
                for r in 0..self.robs.len() as u16 {
                    self.req.enqueue(event, r);
                }
                self.req.enqueue(event, PROB_SOURCE);
            }
            MsgKind::DataResponse { token, ok, .. } => {
                if let Some(p) = self.req.on_response(token) {
                    if !ok {
                        if let Some(e) = self.events.get_mut(&p.event) {
                            e.failed = true;
                        }
                    }
                    self.piece_done(p.event, ctx);
                }
            }
            _ => {}
        }
        self.pump(ctx);
    }

    pub fn on_timer(&mut self, token: u64, ctx: &mut Ctx) {
        if let Timeout::GaveUp(event) = self.req.on_timeout(token) {
            if let Some(e) = self.events.get_mut(&event) {
                e.failed = true;
            }
            self.piece_done(event, ctx);
        }
        self.pump(ctx);
    }

    fn pump(&mut self, ctx: &mut Ctx) {
        let robs = self.robs.clone();
        let prob = self.prob;
        self.req.pump(ctx, |t| if t == PROB_SOURCE { prob } else { robs[t as usize] });
    }

    fn piece_done(&mut self, event: u64, ctx: &mut Ctx) {
        let Some(e) = self.events.get_mut(&event) else {
            return;
        };
        e.awaiting -= 1;
        if e.awaiting > 0 {
            return;
        }
        let ok = !e.failed;
        self.events.remove(&event);
        if ok {
            self.built += 1;
        } else {
            self.failed += 1;
        }
        ctx.log.built(event, ok, ctx.now);
        ctx.send(self.dfm, MsgKind::EndOfEvent { event, ok }, SMALL_BYTES, self.vlan, self.priority);
    }
}
