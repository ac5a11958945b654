//! Forwarding database with aging and two capacity models.
//!
//! `Ideal` holds up to `capacity` dynamic entries. `HashBucket` places an
//! entry in the bucket selected by the big-endian value of the configured
//! key octets modulo the bucket count; a bucket holds at most `depth`
//! entries. Address families that only vary outside the key octets all land
//! in one bucket, which is the capacity pathology the probe exposes.
//! A full table or bucket silently refuses new addresses.

use std::collections::HashMap;

use crate::config::{MacTableConfig, MacTableMode};
use crate::ether::MacAddress;
use crate::sim::SimTime;

/// A physical port or a trunk group acting as one port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicalPort {
    Port(u16),
    Trunk(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacTableEntry {
    pub addr: MacAddress,
    pub port: LogicalPort,
    pub vlan: u16,
    pub last_seen: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnOutcome {
    Learned,
    Refreshed,
    Moved,
    Refused,
    /// Group addresses are never learned as sources.
    Ignored,
    Static,
}

#[derive(Debug, Clone)]
enum Storage {
    Ideal {
        capacity: usize,
        entries: HashMap<(MacAddress, u16), MacTableEntry>,
    },
    Buckets {
        key_bytes: Vec<usize>,
        depth: usize,
        buckets: Vec<Vec<MacTableEntry>>,
        len: usize,
    },
}

#[derive(Debug, Clone)]
pub struct MacTable {
    storage: Storage,
    statics: HashMap<(MacAddress, u16), LogicalPort>,
    aging_time: SimTime,
    pub refused: u64,
    pub evicted: u64,
    pub moves: u64,
}

impl MacTable {
    pub fn new(cfg: &MacTableConfig) -> Self {
        let storage = match cfg.mode {
            MacTableMode::Ideal => Storage::Ideal {
                capacity: cfg.capacity,
                entries: HashMap::new(),
            },
            MacTableMode::HashBucket => Storage::Buckets {
                key_bytes: cfg.key_bytes.clone(),
                depth: cfg.bucket_depth,
                buckets: vec![Vec::new(); cfg.bucket_count.max(1)],
                len: 0,
            },
        };
        MacTable {
            storage,
            statics: HashMap::new(),
            aging_time: SimTime::from_secs_f64(cfg.aging_time_ms * 1e-3),
            refused: 0,
            evicted: 0,
            moves: 0,
        }
    }

    pub fn aging_time(&self) -> SimTime {
        self.aging_time
    }

    pub fn add_static(&mut self, addr: MacAddress, vlan: u16, port: LogicalPort) {
        self.statics.insert((addr, vlan), port);
    }

    /// Bucket index of `addr` in hash-bucket mode.
    pub fn bucket_of(&self, addr: MacAddress) -> Option<usize> {
        match &self.storage {
            Storage::Buckets { key_bytes, buckets, .. } => Some(bucket_index(addr, key_bytes, buckets.len())),
            Storage::Ideal { .. } => None,
        }
    }

    /// Learns `addr` on `port`, refreshing `last_seen`.
    pub fn learn(&mut self, addr: MacAddress, vlan: u16, port: LogicalPort, now: SimTime) -> LearnOutcome {
        if addr.is_multicast() {
            return LearnOutcome::Ignored;
        }
        if self.statics.contains_key(&(addr, vlan)) {
            return LearnOutcome::Static;
        }
        let outcome = match &mut self.storage {
            Storage::Ideal { capacity, entries } => {
                if let Some(e) = entries.get_mut(&(addr, vlan)) {
                    e.last_seen = now;
                    if e.port != port {
                        e.port = port;
                        LearnOutcome::Moved
                    } else {
                        LearnOutcome::Refreshed
                    }
                } else if entries.len() < *capacity {
                    entries.insert(
                        (addr, vlan),
                        MacTableEntry {
                            addr,
                            port,
                            vlan,
                            last_seen: now,
                        },
                    );
                    LearnOutcome::Learned
                } else {
                    LearnOutcome::Refused
                }
            }
            Storage::Buckets {
                key_bytes,
                depth,
                buckets,
                len,
            } => {
                let n = buckets.len();
                let bucket = &mut buckets[bucket_index(addr, key_bytes, n)];
                if let Some(e) = bucket.iter_mut().find(|e| e.addr == addr && e.vlan == vlan) {
                    e.last_seen = now;
                    if e.port != port {
                        e.port = port;
                        LearnOutcome::Moved
                    } else {
                        LearnOutcome::Refreshed
                    }
                } else if bucket.len() < *depth {
                    bucket.push(MacTableEntry {
                        addr,
                        port,
                        vlan,
                        last_seen: now,
                    });
                    *len += 1;
                    LearnOutcome::Learned
                } else {
                    LearnOutcome::Refused
                }
            }
        };
        match outcome {
            LearnOutcome::Refused => self.refused += 1,
            LearnOutcome::Moved => self.moves += 1,
            _ => {}
        }
        outcome
    }

    pub fn lookup(&self, addr: MacAddress, vlan: u16) -> Option<LogicalPort> {
        if let Some(p) = self.statics.get(&(addr, vlan)) {
            return Some(*p);
        }
        self.entry(addr, vlan).map(|e| e.port)
    }

    pub fn entry(&self, addr: MacAddress, vlan: u16) -> Option<&MacTableEntry> {
        match &self.storage {
            Storage::Ideal { entries, .. } => entries.get(&(addr, vlan)),
            Storage::Buckets { key_bytes, buckets, .. } => buckets[bucket_index(addr, key_bytes, buckets.len())]
                .iter()
                .find(|e| e.addr == addr && e.vlan == vlan),
        }
    }

    /// Removes every dynamic entry idle for longer than the aging time.
    pub fn age_scan(&mut self, now: SimTime) -> usize {
        let aging = self.aging_time;
        let stale = |e: &MacTableEntry| now.saturating_sub(e.last_seen) > aging;
        let evicted = match &mut self.storage {
            Storage::Ideal { entries, .. } => {
                let before = entries.len();
                entries.retain(|_, e| !stale(e));
                before - entries.len()
            }
            Storage::Buckets { buckets, len, .. } => {
                let mut n = 0;
                for b in buckets.iter_mut() {
                    let before = b.len();
                    b.retain(|e| !stale(e));
                    n += before - b.len();
                }
                *len -= n;
                n
            }
        };
        self.evicted += evicted as u64;
        evicted
    }

    /// Number of dynamic entries.
    pub fn len(&self) -> usize {
        match &self.storage {
            Storage::Ideal { entries, .. } => entries.len(),
            Storage::Buckets { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clears dynamic entries; static entries stay.
    pub fn clear(&mut self) {
        match &mut self.storage {
            Storage::Ideal { entries, .. } => entries.clear(),
            Storage::Buckets { buckets, len, .. } => {
                buckets.iter_mut().for_each(Vec::clear);
                *len = 0;
            }
        }
    }

    /// Whether every dynamic entry satisfies the capacity bound of its model.
    pub fn within_capacity(&self) -> bool {
        match &self.storage {
            Storage::Ideal { capacity, entries } => entries.len() <= *capacity,
            Storage::Buckets { depth, buckets, .. } => buckets.iter().all(|b| b.len() <= *depth),
        }
    }
}

fn bucket_index(addr: MacAddress, key_bytes: &[usize], bucket_count: usize) -> usize {
    let o = addr.octets();
    let key = key_bytes.iter().fold(0u64, |acc, &i| (acc << 8) | o[i.min(5)] as u64);
    (key % bucket_count as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AddressPattern;
    use crate::traffic::pattern_addresses;

    const P1: LogicalPort = LogicalPort::Port(1);
    const P2: LogicalPort = LogicalPort::Port(2);

    fn mac(v: u64) -> MacAddress {
        MacAddress::from_u64(v)
    }

    #[test]
    fn learn_then_lookup_and_move() {
        let mut t = MacTable::new(&MacTableConfig::ideal(10));
        assert_eq!(t.learn(mac(5), 1, P1, SimTime::ZERO), LearnOutcome::Learned);
        assert_eq!(t.lookup(mac(5), 1), Some(P1));
        assert_eq!(t.lookup(mac(5), 2), None, "learning is per VLAN");
        assert_eq!(t.learn(mac(5), 1, P1, SimTime::from_nanos(3)), LearnOutcome::Refreshed);
        assert_eq!(t.learn(mac(5), 1, P2, SimTime::from_nanos(4)), LearnOutcome::Moved);
        assert_eq!(t.lookup(mac(5), 1), Some(P2));
        assert_eq!(t.entry(mac(5), 1).unwrap().last_seen, SimTime::from_nanos(4));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn group_sources_are_not_learned() {
        let mut t = MacTable::new(&MacTableConfig::ideal(10));
        assert_eq!(t.learn(MacAddress::BROADCAST, 1, P1, SimTime::ZERO), LearnOutcome::Ignored);
        assert!(t.is_empty());
    }

    #[test]
    fn ideal_capacity_refuses_new_entries() {
        let mut t = MacTable::new(&MacTableConfig::ideal(1000));
        for i in 0..4096u64 {
            t.learn(mac(0x1000 + i), 1, P1, SimTime::ZERO);
        }
        assert_eq!(t.len(), 1000);
        assert_eq!(t.refused, 3096);
        // First-come entries are the ones kept.
        assert!(t.lookup(mac(0x1000), 1).is_some());
        assert!(t.lookup(mac(0x1000 + 4095), 1).is_none());
    }

    #[test]
    fn static_entries_do_not_consume_capacity() {
        let mut t = MacTable::new(&MacTableConfig::ideal(1));
        t.add_static(mac(1), 1, P2);
        assert_eq!(t.learn(mac(1), 1, P1, SimTime::ZERO), LearnOutcome::Static);
        assert_eq!(t.learn(mac(2), 1, P1, SimTime::ZERO), LearnOutcome::Learned);
        assert_eq!(t.lookup(mac(1), 1), Some(P2));
        assert_eq!(t.len(), 1);
    }

    fn census(pattern: AddressPattern) -> usize {
        let mut t = MacTable::new(&MacTableConfig::hash_bucket(vec![4, 5], 256, 70));
        for a in pattern_addresses(pattern, 4096, 7) {
            t.learn(a, 1, P1, SimTime::ZERO);
        }
        assert!(t.within_capacity());
        t.len()
    }

    #[test]
    fn hash_bucket_pathology_depends_on_varying_octets() {
        assert_eq!(census(AddressPattern::LinearOctets45), 4096);
        assert_eq!(census(AddressPattern::LinearOctets34), 70);
        assert_eq!(census(AddressPattern::LinearOctets23), 70);
        assert_eq!(census(AddressPattern::RandomOctets345), 4096);
        assert_eq!(census(AddressPattern::Mixed), 4096);
    }

    #[test]
    fn bucket_index_uses_only_key_octets() {
        let t = MacTable::new(&MacTableConfig::hash_bucket(vec![4, 5], 256, 4));
        let a = MacAddress([0, 1, 2, 3, 4, 5]);
        let b = MacAddress([9, 9, 9, 9, 4, 5]);
        assert_eq!(t.bucket_of(a), t.bucket_of(b));
        assert_eq!(t.bucket_of(a), Some(((4u64 << 8 | 5) % 256) as usize));
    }

    #[test]
    fn aging_evicts_idle_entries_only() {
        let mut cfg = MacTableConfig::ideal(10);
        cfg.aging_time_ms = 300_000.0;
        let mut t = MacTable::new(&cfg);
        t.learn(mac(1), 1, P1, SimTime::ZERO);
        t.learn(mac(2), 1, P1, SimTime::ZERO);
        t.learn(mac(2), 1, P1, SimTime::from_secs(200));
        assert_eq!(t.age_scan(SimTime::from_secs(300)), 0, "exactly the aging time is kept");
        assert_eq!(t.age_scan(SimTime::from_secs(301)), 1);
        assert!(t.lookup(mac(1), 1).is_none());
        assert!(t.lookup(mac(2), 1).is_some());
    }

    #[test]
    fn frequently_refreshed_entry_never_ages() {
        let mut cfg = MacTableConfig::ideal(10);
        cfg.aging_time_ms = 300_000.0;
        let mut t = MacTable::new(&cfg);
        let mut now = SimTime::ZERO;
        for _ in 0..10_000 {
            t.learn(mac(7), 1, P1, now);
            now += SimTime::from_micros(100);
            assert_eq!(t.age_scan(now), 0);
        }
    }

    #[test]
    fn short_aging_against_30hz_refresh_evicts() {
        let mut cfg = MacTableConfig::ideal(10);
        cfg.aging_time_ms = 30.0;
        let mut t = MacTable::new(&cfg);
        t.learn(mac(7), 1, P1, SimTime::ZERO);
        // next refresh would come 33.3 ms later
        assert_eq!(t.age_scan(SimTime::from_micros(33_333)), 1);
    }

    #[test]
    fn hash_bucket_aging_keeps_len_consistent() {
        let mut cfg = MacTableConfig::hash_bucket(vec![5], 16, 4);
        cfg.aging_time_ms = 1.0;
        let mut t = MacTable::new(&cfg);
        for i in 0..40 {
            t.learn(mac(i), 1, P1, SimTime::ZERO);
        }
        assert_eq!(t.len(), 40);
        t.learn(mac(3), 1, P1, SimTime::from_millis(2));
        assert_eq!(t.age_scan(SimTime::from_millis(2)), 39);
        assert_eq!(t.len(), 1);
    }
}
