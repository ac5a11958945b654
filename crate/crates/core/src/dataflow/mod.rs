//! Request-response readout protocol: trigger assignment, RoI collection,
//! event building and buffer clearing.
//!
//! Actors are plain state machines. They receive [`Message`]s and timer
//! tokens and answer with [`Action`]s; the network world turns those into
//! frames.

mod actors;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use actors::{split_rounds, Dfm, L2pu, L2puParams, L2sv, Rob, Sfi, PROB_SOURCE};

use crate::ether::{MAX_FRAME_BYTES, MIN_FRAME_BYTES};
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MsgKind {
    RoiAssign {
        event: u64,
        robs: Vec<u16>,
    },
    DataRequest {
        event: u64,
        token: u64,
    },
    /// `ok` is false for an unknown or cleared event.
    DataResponse {
        event: u64,
        token: u64,
        ok: bool,
        source: u16,
    },
    Decision {
        event: u64,
        verdict: Verdict,
    },
    Detail {
        event: u64,
    },
    Build {
        event: u64,
    },
    EndOfEvent {
        event: u64,
        ok: bool,
    },
    Clear {
        events: Vec<u64>,
    },
}

impl MsgKind {
    pub fn label(&self) -> &'static str {
        match self {
            MsgKind::RoiAssign { .. } => "roi_assign",
            MsgKind::DataRequest { .. } => "data_request",
            MsgKind::DataResponse { .. } => "data_response",
            MsgKind::Decision { .. } => "decision",
            MsgKind::Detail { .. } => "detail",
            MsgKind::Build { .. } => "build",
            MsgKind::EndOfEvent { .. } => "end_of_event",
            MsgKind::Clear { .. } => "clear",
        }
    }

    pub const LABELS: [&'static str; 8] = [
        "roi_assign",
        "data_request",
        "data_response",
        "decision",
        "detail",
        "build",
        "end_of_event",
        "clear",
    ];

    pub fn label_index(&self) -> usize {
        Self::LABELS.iter().position(|l| *l == self.label()).expect("label listed")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    /// Sending host index.
    pub from: usize,
    pub kind: MsgKind,
    pub bytes: u32,
    pub vlan: u16,
    pub priority: u8,
}

/// Frame sizes carrying a message of `bytes`: full frames plus a remainder
/// padded to the minimum frame.
pub fn fragment_sizes(bytes: u32) -> Vec<u32> {
    let mut out = vec![MAX_FRAME_BYTES; (bytes / MAX_FRAME_BYTES) as usize];
    let rest = bytes % MAX_FRAME_BYTES;
    if rest > 0 || out.is_empty() {
        out.push(rest.max(MIN_FRAME_BYTES));
    }
    out
}

/// Size of a clear message listing `n` events.
pub fn clear_bytes(n: usize) -> u32 {
    (18 + 8 * n as u32).max(MIN_FRAME_BYTES)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Host(usize),
    Group,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Send { to: Target, msg: Message },
    Timer { delay: SimTime, token: u64 },
}

/// Bounds the number of outstanding requests of one requester.
#[derive(Debug, Clone)]
pub struct CreditGate {
    credits: usize,
    outstanding: usize,
    pub max_outstanding: usize,
}

impl CreditGate {
    pub fn new(credits: usize) -> Self {
        CreditGate {
            credits: credits.max(1),
            outstanding: 0,
            max_outstanding: 0,
        }
    }

    pub fn try_acquire(&mut self) -> bool {
        if self.outstanding >= self.credits {
            return false;
        }
        self.outstanding += 1;
        self.max_outstanding = self.max_outstanding.max(self.outstanding);
        true
    }

    pub fn release(&mut self) {
        debug_assert!(self.outstanding > 0);
        self.outstanding = self.outstanding.saturating_sub(1);
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding
    }
}

/// Event ids waiting to be cleared.
#[derive(Debug, Clone)]
pub struct ClearBatch {
    size: usize,
    pending: Vec<u64>,
}

impl ClearBatch {
    pub fn new(size: usize) -> Self {
        ClearBatch {
            size: size.max(1),
            pending: vec![],
        }
    }

    /// Adds an id; true when the batch is full.
    pub fn push(&mut self, id: u64) -> bool {
        self.pending.push(id);
        self.pending.len() >= self.size
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn take(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.pending)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventState {
    AtLvl1,
    AtL2,
    Accepted,
    Rejected,
    Built,
    Cleared,
    Error,
}

impl EventState {
    pub fn label(self) -> &'static str {
        match self {
            EventState::AtLvl1 => "at_lvl1",
            EventState::AtL2 => "at_l2",
            EventState::Accepted => "accepted",
            EventState::Rejected => "rejected",
            EventState::Built => "built",
            EventState::Cleared => "cleared",
            EventState::Error => "error",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, EventState::Cleared | EventState::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub state: EventState,
    pub t_lvl1: SimTime,
    pub t_decision: Option<SimTime>,
    pub t_built: Option<SimTime>,
    pub t_cleared: Option<SimTime>,
    pub accepted: bool,
    /// Lost a request after all retries or failed building.
    pub failed: bool,
}

/// Lifecycle of every triggered event.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: BTreeMap<u64, EventRecord>,
    pub flushes: Vec<(SimTime, usize)>,
}

impl EventLog {
    pub fn lvl1(&mut self, id: u64, now: SimTime) {
        self.events.insert(
            id,
            EventRecord {
                state: EventState::AtLvl1,
                t_lvl1: now,
                t_decision: None,
                t_built: None,
                t_cleared: None,
                accepted: false,
                failed: false,
            },
        );
    }

    fn with(&mut self, id: u64, f: impl FnOnce(&mut EventRecord)) {
        if let Some(r) = self.events.get_mut(&id) {
            f(r);
        }
    }

    pub fn assigned(&mut self, id: u64) {
        self.with(id, |r| r.state = EventState::AtL2);
    }

    pub fn decided(&mut self, id: u64, verdict: Verdict, now: SimTime) {
        self.with(id, |r| {
            r.t_decision = Some(now);
            match verdict {
                Verdict::Accept => {
                    r.accepted = true;
                    r.state = EventState::Accepted;
                }
                Verdict::Reject => r.state = EventState::Rejected,
                Verdict::Error => {
                    r.failed = true;
                    r.state = EventState::Error;
                }
            }
        });
    }

    pub fn built(&mut self, id: u64, ok: bool, now: SimTime) {
        self.with(id, |r| {
            if ok {
                r.t_built = Some(now);
                r.state = EventState::Built;
            } else {
                r.failed = true;
                r.state = EventState::Error;
            }
        });
    }

    pub fn cleared(&mut self, ids: &[u64], now: SimTime) {
        self.flushes.push((now, ids.len()));
        for &id in ids {
            self.with(id, |r| {
                r.t_cleared = Some(now);
                if !r.failed {
                    r.state = EventState::Cleared;
                }
            });
        }
    }

    pub fn get(&self, id: u64) -> Option<&EventRecord> {
        self.events.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &EventRecord)> {
        self.events.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Everything an actor may touch while handling an input.
pub struct Ctx<'a> {
    pub now: SimTime,
    pub me: usize,
    pub actions: &'a mut Vec<Action>,
    pub log: &'a mut EventLog,
}

impl Ctx<'_> {
    pub fn send(&mut self, to: usize, kind: MsgKind, bytes: u32, vlan: u16, priority: u8) {
        let msg = Message {
            from: self.me,
            kind,
            bytes,
            vlan,
            priority,
        };
        self.actions.push(Action::Send { to: Target::Host(to), msg });
    }

    pub fn timer(&mut self, delay: SimTime, token: u64) {
        self.actions.push(Action::Timer { delay, token });
    }
}

/// Reassembles message fragments per sender message.
#[derive(Debug, Clone, Default)]
pub struct Reassembly {
    partial: BTreeMap<usize, (Arc<Message>, u16)>,
}

impl Reassembly {
    /// Feeds one fragment; returns the message once all fragments arrived.
    pub fn push(&mut self, msg: &Arc<Message>, count: u16) -> Option<Arc<Message>> {
        if count <= 1 {
            return Some(msg.clone());
        }
        let key = Arc::as_ptr(msg) as usize;
        let e = self.partial.entry(key).or_insert_with(|| (msg.clone(), 0));
        e.1 += 1;
        if e.1 == count {
            self.partial.remove(&key).map(|(m, _)| m)
        } else {
            None
        }
    }

    pub fn in_progress(&self) -> usize {
        self.partial.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fragment_sizes_examples() {
        assert_eq!(fragment_sizes(1000), vec![1000]);
        assert_eq!(fragment_sizes(10), vec![64]);
        assert_eq!(fragment_sizes(1518), vec![1518]);
        assert_eq!(fragment_sizes(1519), vec![1518, 64]);
        assert_eq!(fragment_sizes(4000), vec![1518, 1518, 964]);
    }

    #[test]
    fn clear_sizes() {
        assert_eq!(clear_bytes(1), 64);
        assert_eq!(clear_bytes(64), 530);
    }

    #[test]
    fn credit_gate_bounds_outstanding() {
        let mut g = CreditGate::new(2);
        assert!(g.try_acquire());
        assert!(g.try_acquire());
        assert!(!g.try_acquire());
        g.release();
        assert!(g.try_acquire());
        assert_eq!(g.max_outstanding, 2);
    }

    #[test]
    fn batch_reports_full() {
        let mut b = ClearBatch::new(3);
        assert!(!b.push(1));
        assert!(!b.push(2));
        assert!(b.push(3));
        assert_eq!(b.take(), vec![1, 2, 3]);
        assert!(b.is_empty());
    }

    #[test]
    fn event_log_lifecycle() {
        let mut l = EventLog::default();
        let t = SimTime::from_micros;
        l.lvl1(1, t(0));
        l.assigned(1);
        l.decided(1, Verdict::Accept, t(5));
        l.built(1, true, t(9));
        l.cleared(&[1], t(10));
        let r = l.get(1).unwrap();
        assert_eq!(r.state, EventState::Cleared);
        assert_eq!(r.t_built, Some(t(9)));
        l.lvl1(2, t(1));
        l.decided(2, Verdict::Error, t(3));
        l.cleared(&[2], t(10));
        assert_eq!(l.get(2).unwrap().state, EventState::Error);
        assert_eq!(l.flushes.len(), 2);
    }

    proptest! {
        #[test]
        fn fragments_cover_message(bytes in 1u32..20_000) {
            let f = fragment_sizes(bytes);
            let total: u32 = f.iter().sum();
            prop_assert!(total >= bytes);
            prop_assert!(total - bytes < MIN_FRAME_BYTES);
            prop_assert!(f.iter().all(|s| (MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(s)));
        }

        #[test]
        fn gate_never_exceeds_credits(credits in 1usize..8, ops in prop::collection::vec(any::<bool>(), 0..200)) {
            let mut g = CreditGate::new(credits);
            for acquire in ops {
                if acquire {
                    g.try_acquire();
                } else if g.outstanding() > 0 {
                    g.release();
                }
                prop_assert!(g.outstanding() <= credits);
            }
        }
    }
}
