//! Latency histograms exported by the metrics endpoint.

use serde::Serialize;

/// Upper bucket edges in milliseconds; the last bucket is open.
pub const BUCKETS_MS: [f64; 12] = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 5000.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub count: u64,
    pub sum_ms: f64,
    pub max_ms: f64,
    /// Per-bucket counts, one more than [`BUCKETS_MS`] for the overflow.
    pub buckets: Vec<u64>,
}

impl Default for Histogram {
    fn default() -> Self {
        Histogram {
            count: 0,
            sum_ms: 0.0,
            max_ms: 0.0,
            buckets: vec![0; BUCKETS_MS.len() + 1],
        }
    }
}

impl Histogram {
    pub fn record(&mut self, ms: f64) {
        self.count += 1;
        self.sum_ms += ms;
        self.max_ms = self.max_ms.max(ms);
        let i = BUCKETS_MS.iter().position(|&b| ms <= b).unwrap_or(BUCKETS_MS.len());
        self.buckets[i] += 1;
    }

    pub fn mean_ms(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_ms / self.count as f64)
    }

    /// Upper edge of the bucket holding the `q` quantile; infinite when it
    /// falls in the overflow bucket.
    pub fn quantile_bound_ms(&self, q: f64) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let want = (q.clamp(0.0, 1.0) * self.count as f64).ceil().max(1.0) as u64;
        let mut seen = 0;
        for (i, &c) in self.buckets.iter().enumerate() {
            seen += c;
            if seen >= want {
                return Some(BUCKETS_MS.get(i).copied().unwrap_or(f64::INFINITY));
            }
        }
        Some(f64::INFINITY)
    }
}
