//! Traffic sources: inter-departure timing, destination choice and the
//! address families used for table probing.

use std::collections::HashSet;

use crate::config::{AddressPattern, TrafficPattern};
use crate::ether::{wire_time, MacAddress};
use crate::sim::{RngStream, SimTime};

const PREFIX: [u8; 3] = [0x00, 0x10, 0x20];
const FILL: u8 = 0x30;

/// `count` distinct unicast addresses of the given family, deterministic
/// in `seed`.
pub fn pattern_addresses(pattern: AddressPattern, count: usize, seed: u64) -> Vec<MacAddress> {
    let linear = |i: usize, hi: usize| -> MacAddress {
        let [a, b] = (i as u16).to_be_bytes();
        let mut o = [PREFIX[0], PREFIX[1], PREFIX[2], FILL, FILL, FILL];
        o[hi] = a;
        o[hi + 1] = b;
        MacAddress(o)
    };
    let mut rng = RngStream::new(seed, 0x7061_7474);
    let mut random = |n: usize, taken: &mut HashSet<MacAddress>| -> Vec<MacAddress> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let r = rng.next_u64().to_be_bytes();
            let m = MacAddress([PREFIX[0], PREFIX[1], PREFIX[2], r[5], r[6], r[7]]);
            if taken.insert(m) {
                out.push(m);
            }
        }
        out
    };
    match pattern {
        AddressPattern::LinearOctets45 => (0..count).map(|i| linear(i, 4)).collect(),
        AddressPattern::LinearOctets34 => (0..count).map(|i| linear(i, 3)).collect(),
        AddressPattern::LinearOctets23 => (0..count).map(|i| linear(i, 2)).collect(),
        AddressPattern::RandomOctets345 => random(count, &mut HashSet::new()),
        AddressPattern::Mixed => {
            let lin: Vec<MacAddress> = (0..count / 2).map(|i| linear(i, 4)).collect();
            let mut taken: HashSet<MacAddress> = lin.iter().copied().collect();
            let rnd = random(count - lin.len(), &mut taken);
            lin.into_iter().chain(rnd).collect()
        }
    }
}

/// Departure process of one source.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pattern: TrafficPattern,
    load: f64,
    frame_time_ns: f64,
    nominal_ns: Option<f64>,
    weights: Vec<f64>,
    current: Vec<f64>,
    rng: RngStream,
}

impl SourceModel {
    /// `load` is the fraction of `line_bps` this source occupies.
    pub fn new(pattern: TrafficPattern, load: f64, frame_bytes: u32, line_bps: u64, weights: Vec<f64>, rng: RngStream) -> Self {
        let frame_time_ns = wire_time(frame_bytes, line_bps).map_or(0.0, |t| t.as_nanos() as f64);
        let n = weights.len();
        SourceModel {
            pattern,
            load,
            frame_time_ns,
            nominal_ns: None,
            weights,
            current: vec![0.0; n],
            rng,
        }
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    /// Mean time between departures.
    pub fn mean_gap_ns(&self) -> f64 {
        self.frame_time_ns / self.load
    }

    /// Next departure after a frame was accepted at `accepted_at`.
    pub fn next_after(&mut self, accepted_at: SimTime) -> SimTime {
        let now = accepted_at.as_nanos() as f64;
        match self.pattern {
            TrafficPattern::Cbr => {
                let base = match self.nominal_ns {
                    Some(n) if n >= now - 1.0 => n,
                    _ => now,
                };
                let next = base + self.mean_gap_ns();
                self.nominal_ns = Some(next);
                SimTime::from_nanos(next.round().max(now) as u64)
            }
            TrafficPattern::Poisson => {
                let idle = self.frame_time_ns * (1.0 / self.load - 1.0);
                let gap = self.frame_time_ns + if idle > 0.0 { self.rng.exp(idle) } else { 0.0 };
                SimTime::from_nanos((now + gap).round() as u64)
            }
        }
    }

    /// The NIC refused a frame; the constant-rate schedule restarts from the
    /// next accepted frame.
    pub fn blocked(&mut self) {
        self.nominal_ns = None;
    }

    /// Index of the next destination. Constant-rate sources interleave by
    /// smooth weighted round robin, Poisson sources draw at random.
    pub fn pick(&mut self) -> usize {
        let n = self.weights.len();
        if n <= 1 {
            return 0;
        }
        let total: f64 = self.weights.iter().sum();
        match self.pattern {
            TrafficPattern::Cbr => {
                let mut best = 0;
                for i in 0..n {
                    self.current[i] += self.weights[i];
                    if self.current[i] > self.current[best] {
                        best = i;
                    }
                }
                self.current[best] -= total;
                best
            }
            TrafficPattern::Poisson => {
                let mut x = self.rng.uniform() * total;
                for (i, w) in self.weights.iter().enumerate() {
                    if x < *w {
                        return i;
                    }
                    x -= w;
                }
                n - 1
            }
        }
    }
}
