//! Per-port egress queues and schedulers.

use std::collections::VecDeque;

use crate::config::SchedulerKind;
use crate::ether::MAX_FRAME_BYTES;

/// Maps an 802.1p priority (0..=7) onto one of `classes` traffic classes.
pub fn priority_class(priority: u8, classes: u8) -> usize {
    let classes = classes.max(1) as usize;
    (priority.min(7) as usize * classes) / 8
}

#[derive(Debug, Clone)]
enum Sched {
    Fifo,
    Strict,
    Drr {
        quantum: Vec<u64>,
        deficit: Vec<u64>,
        current: usize,
        fresh: bool,
    },
}

/// Byte-bounded class queues with a scheduler. Each class gets an equal
/// share of the buffer; the FIFO scheduler has a single class.
#[derive(Debug, Clone)]
pub struct EgressQueues<T> {
    queues: Vec<VecDeque<(u32, T)>>,
    bytes: Vec<u64>,
    class_limit: u64,
    capacity: u64,
    total: u64,
    sched: Sched,
}

impl<T> EgressQueues<T> {
    /// `weights` is only used by WRR and must hold one positive weight per class.
    pub fn new(kind: SchedulerKind, classes: u8, weights: &[u32], capacity_bytes: u64) -> Self {
        let n = match kind {
            SchedulerKind::Fifo => 1,
            _ => classes.max(1) as usize,
        };
        let sched = match kind {
            SchedulerKind::Fifo => Sched::Fifo,
            SchedulerKind::Strict => Sched::Strict,
            SchedulerKind::Wrr => {
                let w: Vec<u64> = (0..n).map(|i| weights.get(i).copied().unwrap_or(1).max(1) as u64).collect();
                let min_w = *w.iter().min().expect("at least one class");
                let unit = (MAX_FRAME_BYTES as u64).div_ceil(min_w);
                Sched::Drr {
                    quantum: w.iter().map(|x| x * unit).collect(),
                    deficit: vec![0; n],
                    current: 0,
                    fresh: false,
                }
            }
        };
        EgressQueues {
            queues: (0..n).map(|_| VecDeque::new()).collect(),
            bytes: vec![0; n],
            class_limit: capacity_bytes / n as u64,
            capacity: capacity_bytes,
            total: 0,
            sched,
        }
    }

    pub fn classes(&self) -> usize {
        self.queues.len()
    }

    /// Queue index for a frame of `priority` given `configured` classes.
    pub fn class_for(&self, priority: u8) -> usize {
        if self.queues.len() == 1 {
            0
        } else {
            priority_class(priority, self.queues.len() as u8)
        }
    }

    pub fn has_room(&self, class: usize, bytes: u32) -> bool {
        self.bytes[class] + bytes as u64 <= self.class_limit
    }

    /// Fails with the item when the class queue is full.
    pub fn push(&mut self, class: usize, bytes: u32, item: T) -> Result<(), T> {
        if !self.has_room(class, bytes) {
            return Err(item);
        }
        self.queues[class].push_back((bytes, item));
        self.bytes[class] += bytes as u64;
        self.total += bytes as u64;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0 && self.queues.iter().all(VecDeque::is_empty)
    }

    pub fn len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn bytes(&self) -> u64 {
        self.total
    }

    pub fn class_bytes(&self, class: usize) -> u64 {
        self.bytes[class]
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Occupancy of the fullest class relative to its limit.
    pub fn fill(&self) -> f64 {
        if self.class_limit == 0 {
            return 1.0;
        }
        self.bytes.iter().copied().max().unwrap_or(0) as f64 / self.class_limit as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.queues.iter().flat_map(|q| q.iter().map(|(_, t)| t))
    }

    fn take(&mut self, class: usize) -> Option<(u32, T)> {
        let (b, t) = self.queues[class].pop_front()?;
        self.bytes[class] -= b as u64;
        self.total -= b as u64;
        Some((b, t))
    }

    /// Removes the next item to transmit; `None` only when every queue is empty.
    pub fn select(&mut self) -> Option<T> {
        match &mut self.sched {
            Sched::Fifo => self.take(0).map(|x| x.1),
            Sched::Strict => {
                let c = (0..self.queues.len()).rev().find(|&c| !self.queues[c].is_empty())?;
                self.take(c).map(|x| x.1)
            }
            Sched::Drr { .. } => self.select_drr(),
        }
    }

    fn select_drr(&mut self) -> Option<T> {
        if self.queues.iter().all(VecDeque::is_empty) {
            return None;
        }
        let n = self.queues.len();
        loop {
            let Sched::Drr {
                quantum,
                deficit,
                current,
                fresh,
            } = &mut self.sched
            else {
                unreachable!()
            };
            let c = *current;
            let Some(&(head, _)) = self.queues[c].front() else {
                deficit[c] = 0;
                *current = (c + 1) % n;
                *fresh = false;
                continue;
            };
            if !*fresh {
                deficit[c] += quantum[c];
                *fresh = true;
            }
            if head as u64 <= deficit[c] {
                deficit[c] -= head as u64;
                if self.queues[c].len() == 1 {
                    deficit[c] = 0;
                    *current = (c + 1) % n;
                    *fresh = false;
                }
                return self.take(c).map(|x| x.1);
            }
            *current = (c + 1) % n;
            *fresh = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn priority_mapping() {
        assert_eq!(priority_class(0, 4), 0);
        assert_eq!(priority_class(1, 4), 0);
        assert_eq!(priority_class(2, 4), 1);
        assert_eq!(priority_class(7, 4), 3);
        assert_eq!(priority_class(7, 8), 7);
        assert_eq!(priority_class(5, 1), 0);
    }

    #[test]
    fn fifo_keeps_arrival_order_across_priorities() {
        let mut q = EgressQueues::new(SchedulerKind::Fifo, 4, &[], 10_000);
        for (i, prio) in [0u8, 7, 3].into_iter().enumerate() {
            let c = q.class_for(prio);
            q.push(c, 100, i).unwrap();
        }
        assert_eq!(q.select(), Some(0));
        assert_eq!(q.select(), Some(1));
        assert_eq!(q.select(), Some(2));
        assert_eq!(q.select(), None);
    }

    #[test]
    fn strict_serves_highest_class_first() {
        let mut q = EgressQueues::new(SchedulerKind::Strict, 4, &[], 10_000);
        q.push(q.class_for(0), 100, "low").unwrap();
        q.push(q.class_for(7), 100, "high").unwrap();
        assert_eq!(q.select(), Some("high"));
        assert_eq!(q.select(), Some("low"));
    }

    #[test]
    fn class_buffers_are_bounded() {
        let mut q = EgressQueues::new(SchedulerKind::Strict, 4, &[], 4 * 1518);
        q.push(0, 1518, 1).unwrap();
        assert_eq!(q.push(0, 64, 2), Err(2));
        assert!(q.push(1, 1518, 3).is_ok());
        assert_eq!(q.bytes(), 3036);
    }

    fn drr_shares(weights: &[u32], sizes: &[u32], rounds: usize) -> Vec<f64> {
        let n = weights.len();
        let mut q = EgressQueues::new(SchedulerKind::Wrr, n as u8, weights, u64::MAX / 2);
        let mut sent = vec![0u64; n];
        for (c, &size) in sizes.iter().enumerate().take(n) {
            for _ in 0..4 {
                q.push(c, size, c).unwrap();
            }
        }
        for _ in 0..rounds {
            let c = q.select().unwrap();
            sent[c] += sizes[c] as u64;
            q.push(c, sizes[c], c).unwrap();
        }
        let total: u64 = sent.iter().sum();
        sent.iter().map(|&s| s as f64 / total as f64).collect()
    }

    #[test]
    fn wrr_byte_shares_follow_weights() {
        let s = drr_shares(&[10, 20, 30, 40], &[1518; 4], 200_000);
        for (got, want) in s.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 0.005, "{s:?}");
        }
    }

    #[test]
    fn wrr_shares_are_frame_size_independent() {
        let s = drr_shares(&[1, 1], &[64, 1518], 100_000);
        assert!((s[0] - 0.5).abs() < 0.01, "{s:?}");
    }

    proptest! {
        #[test]
        fn drr_shares_match_weights(
            weights in prop::collection::vec(1u32..50, 2..5),
            size_seed in prop::collection::vec(64u32..=1518, 5),
        ) {
            let sizes: Vec<u32> = size_seed[..weights.len()].to_vec();
            let s = drr_shares(&weights, &sizes, 60_000);
            let wsum: u32 = weights.iter().sum();
            for (c, w) in weights.iter().enumerate() {
                let want = *w as f64 / wsum as f64;
                prop_assert!((s[c] - want).abs() < 0.02, "class {c}: {} vs {want}", s[c]);
            }
        }

        #[test]
        fn schedulers_are_work_conserving(
            kind in prop::sample::select(vec![SchedulerKind::Fifo, SchedulerKind::Strict, SchedulerKind::Wrr]),
            ops in prop::collection::vec((any::<bool>(), 0u8..8, 64u32..=1518), 1..300),
        ) {
            let mut q = EgressQueues::new(kind, 4, &[1, 2, 3, 4], 1 << 20);
            let mut bytes = 0u64;
            for (push, prio, size) in ops {
                if push {
                    let c = q.class_for(prio);
                    if q.push(c, size, size).is_ok() {
                        bytes += size as u64;
                    }
                } else {
                    let nonempty = !q.is_empty();
                    let got = q.select();
                    prop_assert_eq!(got.is_some(), nonempty);
                    if let Some(s) = got {
                        bytes -= s as u64;
                    }
                }
                prop_assert_eq!(q.bytes(), bytes);
                prop_assert!(q.bytes() <= q.capacity());
            }
        }
    }
}
