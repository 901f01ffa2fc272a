use crate::orderbook::{BookEvent, EventKind, Nanos};

use super::MarketDataError;

/// Cumulative traded volume sampled at bucket boundaries.
///
/// `cumulative[k]` is the volume executed strictly before `boundaries[k]`, so
/// the first entry is always zero and the last is the window total.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeProfile {
    pub boundaries: Vec<Nanos>,
    pub cumulative: Vec<f64>,
}

impl VolumeProfile {
    /// Build from window start, bucket width and bucket count.
    pub fn empty(start: Nanos, bucket_ns: Nanos, buckets: usize) -> Self {
        VolumeProfile {
            boundaries: (0..=buckets as u64).map(|k| start + k * bucket_ns).collect(),
            cumulative: vec![0.0; buckets + 1],
        }
    }

    pub fn buckets(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn terminal(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Fraction of the terminal volume traded by boundary `k`.
    pub fn fraction(&self, k: usize) -> f64 {
        self.cumulative[k] / self.terminal()
    }

    /// A profile that grows linearly; VWAP over it is TWAP.
    pub fn linear(buckets: usize) -> Self {
        VolumeProfile {
            boundaries: (0..=buckets as u64).collect(),
            cumulative: (0..=buckets).map(|k| k as f64).collect(),
        }
    }
}

/// Volume-weighted execution price (in ticks) over `[start, start + buckets *
/// bucket_ns)`, together with the cumulative volume profile on the same
/// buckets.
pub fn accumulate_vwap(
    events: &[BookEvent],
    start: Nanos,
    bucket_ns: Nanos,
    buckets: usize,
) -> Result<(f64, VolumeProfile), MarketDataError> {
    let mut profile = VolumeProfile::empty(start, bucket_ns, buckets);
    let end = start + bucket_ns * buckets as u64;
    let mut per_bucket = vec![0.0; buckets];
    let (mut notional, mut volume) = (0.0, 0.0);
    for ev in events {
        if ev.kind != EventKind::Execute || ev.timestamp < start || ev.timestamp >= end {
            continue;
        }
        let qty = ev.quantity as f64;
        notional += ev.price as f64 * qty;
        volume += qty;
        per_bucket[((ev.timestamp - start) / bucket_ns) as usize] += qty;
    }
    let mut acc = 0.0;
    for (k, v) in per_bucket.iter().enumerate() {
        acc += v;
        profile.cumulative[k + 1] = acc;
    }
    if volume == 0.0 {
        return Err(MarketDataError::NoTrades);
    }
    Ok((notional / volume, profile))
}
