//! Link aggregation with sticky random per-connection member choice.

use std::collections::HashMap;

use crate::ether::MacAddress;
use crate::sim::RngStream;

#[derive(Debug, Clone)]
pub struct TrunkGroup {
    members: Vec<u16>,
    up: Vec<bool>,
    assignment: HashMap<(MacAddress, MacAddress), usize>,
    rng: RngStream,
    pub dropped: u64,
}

impl TrunkGroup {
    pub fn new(members: Vec<u16>, rng: RngStream) -> Self {
        let up = vec![true; members.len()];
        TrunkGroup {
            members,
            up,
            assignment: HashMap::new(),
            rng,
            dropped: 0,
        }
    }

    pub fn members(&self) -> &[u16] {
        &self.members
    }

    pub fn contains(&self, port: u16) -> bool {
        self.members.contains(&port)
    }

    pub fn set_up(&mut self, port: u16, up: bool) {
        if let Some(i) = self.members.iter().position(|&p| p == port) {
            self.up[i] = up;
        }
    }

    /// Physical port for the `(src, dst)` connection. An existing mapping to
    /// an up member is reused; otherwise an up member is drawn uniformly.
    pub fn select(&mut self, src: MacAddress, dst: MacAddress) -> Option<u16> {
        if let Some(&i) = self.assignment.get(&(src, dst)) {
            if self.up[i] {
                return Some(self.members[i]);
            }
        }
        let live: Vec<usize> = (0..self.members.len()).filter(|&i| self.up[i]).collect();
        if live.is_empty() {
            self.dropped += 1;
            return None;
        }
        let i = live[self.rng.below(live.len())];
        self.assignment.insert((src, dst), i);
        Some(self.members[i])
    }

    /// Connections currently mapped to each member, in member order.
    pub fn census(&self) -> Vec<usize> {
        let mut n = vec![0; self.members.len()];
        for &i in self.assignment.values() {
            n[i] += 1;
        }
        n
    }

    pub fn connections(&self) -> usize {
        self.assignment.len()
    }
}
