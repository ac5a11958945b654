use std::collections::BTreeMap;

use crate::sim::SimTime;

pub const LATENCY_BIN_NS: u64 = 300;

/// Per-packet latency histogram with 300 ns bins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LatencyHistogram {
    bins: BTreeMap<u64, u64>,
    count: u64,
    sum_ns: u128,
}

impl LatencyHistogram {
    pub fn bin_index(latency: SimTime) -> u64 {
        latency.as_nanos() / LATENCY_BIN_NS
    }

    pub fn record(&mut self, latency: SimTime) {
        *self.bins.entry(Self::bin_index(latency)).or_insert(0) += 1;
        self.count += 1;
        self.sum_ns += latency.as_nanos() as u128;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Exact mean of the recorded latencies.
    pub fn mean_ns(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_ns as f64 / self.count as f64)
    }

    /// Mean computed from bin midpoints only.
    pub fn binned_mean_ns(&self) -> Option<f64> {
        (self.count > 0).then(|| {
            let s: f64 = self
                .bins
                .iter()
                .map(|(b, c)| (*b as f64 + 0.5) * LATENCY_BIN_NS as f64 * *c as f64)
                .sum();
            s / self.count as f64
        })
    }

    pub fn bin(&self, index: u64) -> u64 {
        self.bins.get(&index).copied().unwrap_or(0)
    }

    /// `(bin_start_ns, count)` from the first to the last occupied bin,
    /// including empty bins in between.
    pub fn dense(&self) -> Vec<(u64, u64)> {
        let (Some((&lo, _)), Some((&hi, _))) = (self.bins.first_key_value(), self.bins.last_key_value()) else {
            return vec![];
        };
        (lo..=hi).map(|b| (b * LATENCY_BIN_NS, self.bin(b))).collect()
    }

    pub fn quantile_ns(&self, q: f64) -> Option<u64> {
        if self.count == 0 {
            return None;
        }
        let target = ((q.clamp(0.0, 1.0) * self.count as f64).ceil() as u64).max(1);
        let mut acc = 0;
        for (b, c) in &self.bins {
            acc += c;
            if acc >= target {
                return Some(b * LATENCY_BIN_NS);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bin_boundaries() {
        assert_eq!(LatencyHistogram::bin_index(SimTime::ZERO), 0);
        assert_eq!(LatencyHistogram::bin_index(SimTime::from_nanos(299)), 0);
        assert_eq!(LatencyHistogram::bin_index(SimTime::from_nanos(300)), 1);
    }

    #[test]
    fn dense_fills_gaps_in_ascending_order() {
        let mut h = LatencyHistogram::default();
        h.record(SimTime::from_nanos(650));
        h.record(SimTime::from_nanos(1500));
        h.record(SimTime::from_nanos(610));
        assert_eq!(h.dense(), vec![(600, 2), (900, 0), (1200, 0), (1500, 1)]);
        assert!(LatencyHistogram::default().dense().is_empty());
    }

    #[test]
    fn quantiles() {
        let mut h = LatencyHistogram::default();
        for ns in [100, 400, 700, 1000] {
            h.record(SimTime::from_nanos(ns));
        }
        assert_eq!(h.quantile_ns(0.5), Some(300));
        assert_eq!(h.quantile_ns(1.0), Some(900));
    }

    proptest! {
        #[test]
        fn binned_mean_within_one_bin(lats in prop::collection::vec(0u64..10_000_000, 1..200)) {
            let mut h = LatencyHistogram::default();
            for &l in &lats {
                h.record(SimTime::from_nanos(l));
            }
            let exact = lats.iter().sum::<u64>() as f64 / lats.len() as f64;
            prop_assert!((h.binned_mean_ns().unwrap() - exact).abs() <= LATENCY_BIN_NS as f64);
            prop_assert_eq!(h.count(), lats.len() as u64);
            prop_assert_eq!(h.dense().iter().map(|x| x.1).sum::<u64>(), lats.len() as u64);
        }
    }
}
