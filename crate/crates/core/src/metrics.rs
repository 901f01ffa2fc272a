//! Slippage against arrival, market VWAP and schedule prices, schedule
//! deviation statistics, and aggregation over episodes.
//!
//! Every slippage is in basis points and signed so that positive means the
//! trader did worse.

use std::io::Write;

use crate::exec::{EpisodeResult, PolicyKind};
use crate::orderbook::Side;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no fills")]
    NoFills,
    #[error("reference price must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("improvement undefined when the policy's slippage is zero")]
    ZeroDenominator,
    #[error("empty input")]
    EmptyInput,
    #[error("missing mid at step {0}")]
    MissingMid(usize),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for MetricsError {
    fn from(e: std::io::Error) -> Self {
        MetricsError::Io(e.to_string())
    }
}

impl From<csv::Error> for MetricsError {
    fn from(e: csv::Error) -> Self {
        MetricsError::Io(e.to_string())
    }
}

/// `10000 * phi * (p_fwap - p_ref) / p_ref`.
pub fn slippage(p_fwap: Option<f64>, p_ref: f64, side: Side) -> Result<f64, MetricsError> {
    let p = p_fwap.ok_or(MetricsError::NoFills)?;
    if !(p_ref > 0.0) {
        return Err(MetricsError::NonPositiveReference(p_ref));
    }
    Ok(1e4 * side.sign() * (p - p_ref) / p_ref)
}

/// Price of the schedule executed exactly at each step's mid:
/// `sum_t (s_{t+1} - s_t) mid_t / Q`.
pub fn swap_price(schedule: &[f64], mids: &[f64]) -> Result<f64, MetricsError> {
    let steps = schedule.len().checked_sub(1).filter(|&n| n > 0).ok_or(MetricsError::EmptyInput)?;
    let total = schedule[steps] - schedule[0];
    let mut acc = 0.0;
    for t in 0..steps {
        let mid = *mids.get(t).ok_or(MetricsError::MissingMid(t))?;
        acc += (schedule[t + 1] - schedule[t]) * mid;
    }
    Ok(acc / total)
}

/// Percent improvement of a policy over a baseline,
/// `100 (z_base - z_policy) / |z_policy|`.
pub fn improvement(z_base: f64, z_policy: f64) -> Result<f64, MetricsError> {
    if z_policy == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    Ok(100.0 * (z_base - z_policy) / z_policy.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeviationStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    pub count: usize,
}

impl DeviationStats {
    pub fn variance(&self) -> f64 {
        self.std * self.std
    }
}

/// Statistics of all per-step deviations pooled across episodes.
pub fn deviation_stats<'a, I>(series: I) -> Result<DeviationStats, MetricsError>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut all: Vec<f64> = series.into_iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    all.sort_by(f64::total_cmp);
    let mid = all.len() / 2;
    let median = if all.len() % 2 == 1 {
        all[mid]
    } else {
        (all[mid - 1] + all[mid]) / 2.0
    };
    Ok(DeviationStats {
        mean,
        std: var.sqrt(),
        median,
        count: all.len(),
    })
}

/// The three slippages of one episode; `None` when the episode has no fills
/// (or the market had no trades, for VWAP).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub z_arrival: Option<f64>,
    pub z_vwap: Option<f64>,
    pub z_schedule: Option<f64>,
}

impl EpisodeMetrics {
    pub fn of(r: &EpisodeResult) -> Self {
        let z = |p: Option<f64>| p.and_then(|p| slippage(r.p_fwap, p, r.side).ok());
        EpisodeMetrics {
            z_arrival: z(Some(r.p0)),
            z_vwap: z(r.p_vwap),
            z_schedule: z(Some(r.p_swap)),
        }
    }
}

/// Mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Summary { mean, stderr, n }
    }
}

/// Aggregate over the episodes of one policy on one schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub policy: PolicyKind,
    pub schedule: String,
    pub episodes: usize,
    pub z_arrival: Summary,
    pub z_vwap: Summary,
    pub z_schedule: Summary,
    /// `epsilon_t` for `t = 1..=T`, pooled.
    pub deviation: DeviationStats,
    pub m_hat: Summary,
    pub v_hat: Summary,
    pub completion: Summary,
    /// Episodes that finished short of the parent quantity.
    pub incomplete: usize,
    /// Episodes without a single fill, left out of the slippage summaries.
    pub no_fills: usize,
    pub max_violation: f64,
}

impl MetricsReport {
    pub fn build(policy: PolicyKind, schedule: &str, episodes: &[EpisodeResult]) -> Result<Self, MetricsError> {
        if episodes.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let per: Vec<EpisodeMetrics> = episodes.iter().map(EpisodeMetrics::of).collect();
        let pick = |f: fn(&EpisodeMetrics) -> Option<f64>| Summary::of(&per.iter().filter_map(f).collect::<Vec<_>>());
        let m_hat: Vec<f64> = episodes.iter().flat_map(|r| r.m_hat()).collect();
        let v_hat: Vec<f64> = episodes.iter().flat_map(|r| r.v_hat()).collect();
        let completion: Vec<f64> = episodes.iter().map(|r| r.completion).collect();
        Ok(MetricsReport {
            policy,
            schedule: schedule.to_string(),
            episodes: episodes.len(),
            z_arrival: pick(|m| m.z_arrival),
            z_vwap: pick(|m| m.z_vwap),
            z_schedule: pick(|m| m.z_schedule),
            deviation: deviation_stats(episodes.iter().map(|r| &r.epsilon[1..]))?,
            m_hat: Summary::of(&m_hat),
            v_hat: Summary::of(&v_hat),
            completion: Summary::of(&completion),
            incomplete: episodes.iter().filter(|r| r.completion < 1.0 - 1e-9).count(),
            no_fills: episodes.iter().filter(|r| r.p_fwap.is_none()).count(),
            max_violation: episodes.iter().map(EpisodeResult::max_violation).fold(0.0, f64::max),
        })
    }

    /// `(metric, summary)` rows in report order.
    pub fn rows(&self) -> Vec<(&'static str, Summary)> {
        let d = self.deviation;
        let plain = |v: f64, n: usize| Summary {
            mean: v,
            stderr: f64::NAN,
            n,
        };
        vec![
            ("z_arrival_bps", self.z_arrival),
            ("z_vwap_bps", self.z_vwap),
            ("z_schedule_bps", self.z_schedule),
            ("eps_mean", plain(d.mean, d.count)),
            ("eps_std", plain(d.std, d.count)),
            ("eps_median", plain(d.median, d.count)),
            ("m_hat", self.m_hat),
            ("v_hat", self.v_hat),
            ("completion", self.completion),
            ("incomplete", plain(self.incomplete as f64, self.episodes)),
            ("no_fills", plain(self.no_fills as f64, self.episodes)),
            ("max_violation", plain(self.max_violation, self.episodes)),
        ]
    }
}

pub const REPORT_HEADER: [&str; 6] = ["policy", "schedule", "metric", "mean", "stderr", "n"];

/// One row per (policy, schedule, metric).
pub fn write_reports<W: Write>(w: W, reports: &[MetricsReport]) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_HEADER)?;
    for r in reports {
        for (metric, s) in r.rows() {
            out.write_record([
                r.policy.name(),
                &r.schedule,
                metric,
                &fmt(s.mean),
                &fmt(s.stderr),
                &s.n.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Fixed formatting so reports are byte-stable.
pub(crate) fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slippage_sign_and_scale() {
        assert!((slippage(Some(100.1), 100.0, Side::Buy).unwrap() - 10.0).abs() < 1e-9);
        assert!((slippage(Some(100.1), 100.0, Side::Sell).unwrap() + 10.0).abs() < 1e-9);
        assert_eq!(slippage(Some(100.0), 100.0, Side::Buy).unwrap(), 0.0);
        assert_eq!(slippage(None, 100.0, Side::Buy), Err(MetricsError::NoFills));
        assert_eq!(slippage(Some(1.0), 0.0, Side::Buy), Err(MetricsError::NonPositiveReference(0.0)));
    }

    #[test]
    fn swap_prices() {
        assert_eq!(swap_price(&[0.0, 50.0, 100.0], &[100.0, 100.0]).unwrap(), 100.0);
        assert_eq!(swap_price(&[0.0, 50.0, 100.0], &[100.0, 102.0]).unwrap(), 101.0);
        assert_eq!(swap_price(&[0.0, 50.0, 100.0], &[100.0]), Err(MetricsError::MissingMid(1)));
    }

    #[test]
    fn improvements() {
        assert!((improvement(6.75, 4.53).unwrap() - 49.0066).abs() < 1e-3);
        assert!((improvement(19.15, 16.98).unwrap() - 12.7797).abs() < 1e-3);
        assert_eq!(improvement(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(improvement(3.0, 0.0), Err(MetricsError::ZeroDenominator));
    }

    #[test]
    fn deviation_examples() {
        let zeros = [0.0; 4];
        let s = deviation_stats([&zeros[..]]).unwrap();
        assert_eq!((s.mean, s.std, s.median), (0.0, 0.0, 0.0));
        let pm = [-1.0, 1.0];
        let s = deviation_stats([&pm[..]]).unwrap();
        assert_eq!((s.mean, s.std, s.median), (0.0, 1.0, 0.0));
        assert_eq!(deviation_stats(std::iter::empty::<&[f64]>()), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn summaries() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(Summary::of(&[]).mean.is_nan());
    }
}
