use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

use super::SimTime;

/// Opaque identifier of the actor (host, switch, link, ...) an event targets.
/// Only used for diagnostics; routing is carried by the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActorId(pub u32);

impl ActorId {
    pub const GLOBAL: ActorId = ActorId(u32::MAX);
}

/// Unique within one engine; equal to the scheduling sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u64);

/// Unrecoverable model error raised by an event handler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault(pub String);

impl Fault {
    pub fn new(msg: impl Into<String>) -> Self {
        Fault(msg.into())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot schedule at {at} which is before now ({now})")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("fatal model error in {actor} at {at}: {message}")]
    Fault { actor: String, at: SimTime, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub events_processed: u64,
    pub final_time: SimTime,
}

pub trait Handler<P> {
    fn handle(&mut self, engine: &mut Engine<P>, target: ActorId, payload: P) -> Result<(), Fault>;

    fn actor_name(&self, actor: ActorId) -> String {
        format!("actor#{}", actor.0)
    }
}

struct Entry<P> {
    fire_at: SimTime,
    seq: u64,
    target: ActorId,
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// BinaryHeap is a max-heap: reverse so the smallest (fire_at, seq) pops first.
impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

/// Single-threaded event loop. Events fire in `(fire_at, seq)` order.
pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<P>>,
    cancelled: HashSet<u64>,
    scheduled: u64,
    cancelled_count: u64,
    processed: u64,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            scheduled: 0,
            cancelled_count: 0,
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, fire_at: SimTime, target: ActorId, payload: P) -> Result<EventId, SimError> {
        if fire_at < self.now {
            return Err(SimError::ScheduleInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.scheduled += 1;
        self.heap.push(Entry {
            fire_at,
            seq,
            target,
            payload,
        });
        Ok(EventId(seq))
    }

    /// Schedules `delay` after now; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, target: ActorId, payload: P) -> EventId {
        let at = self.now + delay;
        self.schedule(at, target, payload).expect("relative schedule is never in the past")
    }

    /// Returns false if the event already fired, was already cancelled, or is unknown.
    pub fn cancel(&mut self, id: EventId) -> bool {
        if id.0 >= self.next_seq || self.cancelled.contains(&id.0) {
            return false;
        }
        if !self.heap.iter().any(|e| e.seq == id.0) {
            return false;
        }
        self.cancelled.insert(id.0);
        self.cancelled_count += 1;
        true
    }

    /// Cheaper variant of [`cancel`](Self::cancel) for ids the caller knows are pending.
    pub fn cancel_pending(&mut self, id: EventId) {
        if id.0 < self.next_seq && self.cancelled.insert(id.0) {
            self.cancelled_count += 1;
        }
    }

    pub fn events_scheduled(&self) -> u64 {
        self.scheduled
    }

    pub fn events_cancelled(&self) -> u64 {
        self.cancelled_count
    }

    pub fn events_processed(&self) -> u64 {
        self.processed
    }

    pub fn events_pending(&self) -> u64 {
        (self.heap.len() - self.cancelled.len()) as u64
    }

    /// Live (non-cancelled) pending payloads, in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = (SimTime, &P)> {
        self.heap
            .iter()
            .filter(|e| !self.cancelled.contains(&e.seq))
            .map(|e| (e.fire_at, &e.payload))
    }

    pub fn next_fire_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.fire_at)
    }

    pub fn run_until<H: Handler<P>>(&mut self, t_end: SimTime, handler: &mut H) -> Result<RunSummary, SimError> {
        let start = self.processed;
        while let Some(top) = self.heap.peek() {
            if top.fire_at > t_end {
                break;
            }
            let e = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&e.seq) {
                continue;
            }
            debug_assert!(e.fire_at >= self.now);
            self.now = e.fire_at;
            self.processed += 1;
            if let Err(Fault(message)) = handler.handle(self, e.target, e.payload) {
                return Err(SimError::Fault {
                    actor: handler.actor_name(e.target),
                    at: self.now,
                    message,
                });
            }
        }
        if t_end > self.now {
            self.now = t_end;
        }
        Ok(RunSummary {
            events_processed: self.processed - start,
            final_time: self.now,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Recorder {
        seen: Vec<(SimTime, u32)>,
        spawn_at: Option<SimTime>,
        fail_on: Option<u32>,
    }

    impl Handler<u32> for Recorder {
        fn handle(&mut self, engine: &mut Engine<u32>, _target: ActorId, payload: u32) -> Result<(), Fault> {
            assert!(self.seen.last().is_none_or(|&(t, _)| t <= engine.now()));
            self.seen.push((engine.now(), payload));
            if Some(payload) == self.fail_on {
                return Err(Fault::new("boom"));
            }
            if let Some(at) = self.spawn_at.take() {
                engine.schedule(at, ActorId(0), 99).unwrap();
            }
            Ok(())
        }

        fn actor_name(&self, actor: ActorId) -> String {
            format!("node-{}", actor.0)
        }
    }

    fn recorder() -> Recorder {
        Recorder {
            seen: vec![],
            spawn_at: None,
            fail_on: None,
        }
    }

    #[test]
    fn now_is_zero_before_run() {
        let e: Engine<u32> = Engine::new();
        assert_eq!(e.now(), SimTime::ZERO);
    }

    #[test]
    fn schedule_at_zero_fires_first() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_nanos(5), ActorId(0), 2).unwrap();
        e.schedule(SimTime::ZERO, ActorId(0), 1).unwrap();
        let mut r = recorder();
        e.run_until(SimTime::from_nanos(10), &mut r).unwrap();
        assert_eq!(r.seen[0], (SimTime::ZERO, 1));
    }

    #[test]
    fn same_time_events_fire_in_schedule_order() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_nanos(2), ActorId(0), 20).unwrap();
        e.schedule(SimTime::from_nanos(1), ActorId(0), 10).unwrap();
        e.schedule(SimTime::from_nanos(2), ActorId(0), 21).unwrap();
        let mut r = recorder();
        let s = e.run_until(SimTime::from_nanos(100), &mut r).unwrap();
        let order: Vec<u32> = r.seen.iter().map(|x| x.1).collect();
        assert_eq!(order, vec![10, 20, 21]);
        assert_eq!(s.events_processed, 3);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut e = Engine::new();
        let mut r = recorder();
        e.run_until(SimTime::from_nanos(10), &mut r).unwrap();
        let err = e.schedule(SimTime::from_nanos(9), ActorId(0), 1).unwrap_err();
        assert!(matches!(err, SimError::ScheduleInPast { .. }));
    }

    #[test]
    fn empty_run_advances_to_end() {
        let mut e: Engine<u32> = Engine::new();
        let s = e.run_until(SimTime::from_nanos(1_000_000), &mut recorder()).unwrap();
        assert_eq!(s.events_processed, 0);
        assert_eq!(s.final_time, SimTime::from_nanos(1_000_000));
    }

    #[test]
    fn pending_later_events_leave_now_at_t_end() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_nanos(50), ActorId(0), 1).unwrap();
        e.run_until(SimTime::from_nanos(20), &mut recorder()).unwrap();
        assert_eq!(e.now(), SimTime::from_nanos(20));
        assert_eq!(e.events_pending(), 1);
    }

    #[test]
    fn handler_sees_event_time_and_can_schedule() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_nanos(7), ActorId(0), 1).unwrap();
        let mut r = recorder();
        r.spawn_at = Some(SimTime::from_nanos(7));
        e.run_until(SimTime::from_nanos(8), &mut r).unwrap();
        assert_eq!(r.seen, vec![(SimTime::from_nanos(7), 1), (SimTime::from_nanos(7), 99)]);
    }

    #[test]
    fn cancelled_events_do_not_fire_and_are_accounted() {
        let mut e = Engine::new();
        let a = e.schedule(SimTime::from_nanos(1), ActorId(0), 1).unwrap();
        e.schedule(SimTime::from_nanos(2), ActorId(0), 2).unwrap();
        e.schedule(SimTime::from_nanos(30), ActorId(0), 3).unwrap();
        assert!(e.cancel(a));
        assert!(!e.cancel(a));
        let mut r = recorder();
        e.run_until(SimTime::from_nanos(10), &mut r).unwrap();
        assert_eq!(r.seen.len(), 1);
        assert_eq!(
            e.events_processed(),
            e.events_scheduled() - e.events_cancelled() - e.events_pending()
        );
    }

    #[test]
    fn fault_names_the_actor() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_nanos(3), ActorId(4), 13).unwrap();
        let mut r = recorder();
        r.fail_on = Some(13);
        let err = e.run_until(SimTime::from_nanos(10), &mut r).unwrap_err();
        match err {
            SimError::Fault { actor, at, .. } => {
                assert_eq!(actor, "node-4");
                assert_eq!(at, SimTime::from_nanos(3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
