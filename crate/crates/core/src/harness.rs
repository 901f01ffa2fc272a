//! Experiment harness: configuration, episode fleets on a worker pool,
//! policy comparisons, parameter sweeps and CSV output.
//!
//! Every episode's market is a pure function of `(seed, instrument, day)`,
//! so fleets that differ only in policy or parameters see identical markets.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::{run_episode, EpisodeResult, ExecConfig, ExecError, MpcConfig, ParentOrder, PolicyKind};
use crate::marketdata::{
    accumulate_vwap, generate_market, MarketDataError, MarketSession, SyntheticMarketConfig, VolumeProfile,
};
use crate::metrics::{fmt, improvement, write_reports, EpisodeMetrics, MetricsError, MetricsReport, Summary};
use crate::orderbook::{FillRule, Nanos, Side};
use crate::schedule::{Schedule, ScheduleError, ScheduleKind};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("episode {instrument}/{day} ({policy}): {source}")]
    Episode {
        instrument: usize,
        day: usize,
        policy: PolicyKind,
        source: ExecError,
    },
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

impl HarnessError {
    /// 1 for configuration problems, 2 for anything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    /// Almgren-Chriss urgency over the whole horizon, `psi * T`.
    pub psi_t: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            kind: ScheduleKind::Twap,
            psi_t: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { kind: PolicyKind::Mpc }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    /// Replay this `.l3e` file for every episode instead of generating.
    pub file: Option<PathBuf>,
    /// Previous session for the VWAP profile when replaying a file. Without
    /// it VWAP falls back to a flat profile.
    pub prior_file: Option<PathBuf>,
    pub synthetic: SyntheticMarketConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodesConfig {
    pub instruments: usize,
    pub days: usize,
    /// Flip the side every day (and every instrument).
    pub alternate_sides: bool,
    pub first_side: Side,
    pub seed: u64,
    /// Point the synthetic drift against the trader: up for buys, down for
    /// sells, with the configured magnitude.
    pub adverse_drift: bool,
}

impl Default for EpisodesConfig {
    fn default() -> Self {
        EpisodesConfig {
            instruments: 1,
            days: 20,
            alternate_sides: true,
            first_side: Side::Buy,
            seed: 0,
            adverse_drift: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecSection {
    pub notional: f64,
    pub interval_secs: f64,
    pub steps: usize,
    pub latency_ms: f64,
    pub fill_rule: FillRule,
    pub min_order: f64,
}

impl Default for ExecSection {
    fn default() -> Self {
        ExecSection {
            notional: 10_000.0,
            interval_secs: 300.0,
            steps: 78,
            latency_ms: 10.0,
            fill_rule: FillRule::Penetration,
            min_order: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Also write a per-step trace.
    pub trace: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            workers: 0,
            trace: false,
        }
    }
}

/// Full run description; every section is optional in the file and defaults
/// to the baseline parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: ScheduleConfig,
    pub policy: PolicyConfig,
    pub mpc: MpcConfig,
    pub market: MarketConfig,
    pub episodes: EpisodesConfig,
    pub exec: ExecSection,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.mpc.validate().or_else(bad)?;
        if self.episodes.instruments == 0 || self.episodes.days == 0 {
            return bad("need at least one instrument and one day".into());
        }
        let e = &self.exec;
        if e.steps == 0 || !(e.interval_secs > 0.0) || !(e.notional >= 0.0) || !(e.latency_ms >= 0.0) {
            return bad("exec: need steps >= 1, interval > 0, notional >= 0, latency >= 0".into());
        }
        if !(self.schedule.psi_t >= 0.0) {
            return bad(format!("schedule: psi_t {}", self.schedule.psi_t));
        }
        if self.market.file.is_none() {
            self.market.synthetic.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            let horizon = e.interval_secs * e.steps as f64;
            if self.market.synthetic.duration_secs + 1e-9 < horizon {
                return bad(format!(
                    "market session ({} s) shorter than the horizon ({horizon} s)",
                    self.market.synthetic.duration_secs
                ));
            }
        }
        Ok(())
    }

    pub fn exec_config(&self) -> ExecConfig {
        ExecConfig {
            latency_ns: (self.exec.latency_ms * 1e6).round() as Nanos,
            fill_rule: self.exec.fill_rule,
            min_order: self.exec.min_order,
        }
    }

    pub fn parent(&self, side: Side) -> ParentOrder {
        ParentOrder {
            notional: self.exec.notional,
            steps: self.exec.steps,
            interval_ns: (self.exec.interval_secs * 1e9).round() as Nanos,
            ..ParentOrder::new(side)
        }
    }
}

/// One parent order of a fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub instrument: usize,
    pub day: usize,
    pub side: Side,
    pub market_seed: u64,
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Market seed for an instrument on a day; `day` may be -1 for the session
/// before the first.
pub fn market_seed(seed: u64, instrument: usize, day: i64) -> u64 {
    mix(mix(mix(seed) ^ instrument as u64) ^ day as u64)
}

pub fn plan(cfg: &EpisodesConfig) -> Vec<EpisodeSpec> {
    let mut out = Vec::with_capacity(cfg.instruments * cfg.days);
    for instrument in 0..cfg.instruments {
        for day in 0..cfg.days {
            let flip = cfg.alternate_sides && (day + instrument) % 2 == 1;
            let side = if flip { cfg.first_side.opposite() } else { cfg.first_side };
            out.push(EpisodeSpec {
                instrument,
                day,
                side,
                market_seed: market_seed(cfg.seed, instrument, day as i64),
            });
        }
    }
    out
}

/// A policy plus optimizer settings to run on every episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub policy: PolicyKind,
    pub mpc: MpcConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub spec: EpisodeSpec,
    pub result: EpisodeResult,
}

/// Runs episodes on a pool of `cfg.output.workers` threads, with each
/// episode's market built once and shared by all variants.
pub struct Fleet {
    cfg: RunConfig,
    file: Option<Arc<MarketSession>>,
    prior_profile: Option<VolumeProfile>,
    pool: rayon::ThreadPool,
}

impl Fleet {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let file = match &cfg.market.file {
            Some(p) => Some(Arc::new(MarketSession::load(p)?)),
            None => None,
        };
        let parent = cfg.parent(Side::Buy);
        let prior_profile = match &cfg.market.prior_file {
            Some(p) => Some(profile_of(&MarketSession::load(p)?, &parent)?),
            None => None,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.output.workers)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(Fleet {
            cfg,
            file,
            prior_profile,
            pool,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn synthetic(&self, spec: &EpisodeSpec, seed: u64) -> SyntheticMarketConfig {
        let mut m = self.cfg.market.synthetic.clone();
        m.seed = seed;
        if self.cfg.episodes.adverse_drift {
            m.drift = m.drift.abs() * spec.side.sign();
        }
        m
    }

    /// The episode's session and the schedule it should follow.
    pub fn market(&self, spec: &EpisodeSpec) -> Result<(Arc<MarketSession>, Schedule)> {
        let parent = self.cfg.parent(spec.side);
        let sc = &self.cfg.schedule;
        let session = match &self.file {
            Some(s) => s.clone(),
            None => Arc::new(generate_market(&self.synthetic(spec, spec.market_seed))?.session),
        };
        let schedule = match sc.kind {
            ScheduleKind::Twap => Schedule::twap(parent.quantity, parent.steps)?,
            ScheduleKind::Ac => Schedule::almgren_chriss(parent.quantity, parent.steps, sc.psi_t / parent.steps as f64)?,
            ScheduleKind::Vwap => {
                let profile = match (&self.file, &self.prior_profile) {
                    (Some(_), Some(p)) => p.clone(),
                    (Some(_), None) => VolumeProfile::linear(parent.steps),
                    (None, _) => {
                        let seed = market_seed(self.cfg.episodes.seed, spec.instrument, spec.day as i64 - 1);
                        let prior = generate_market(&self.synthetic(spec, seed))?.session;
                        profile_of(&prior, &parent)?
                    }
                };
                Schedule::vwap(parent.quantity, &profile)?
            }
        };
        Ok((session, schedule))
    }

    /// All variants on all planned episodes; `out[v][e]`.
    pub fn run(&self, variants: &[Variant]) -> Result<Vec<Vec<EpisodeRun>>> {
        let specs = plan(&self.cfg.episodes);
        let exec = self.cfg.exec_config();
        let per_episode: Vec<Vec<EpisodeRun>> = self.pool.install(|| {
            specs
                .par_iter()
                .map(|spec| -> Result<Vec<EpisodeRun>> {
                    let (session, schedule) = self.market(spec)?;
                    let parent = self.cfg.parent(spec.side);
                    variants
                        .iter()
                        .map(|v| {
                            run_episode(v.policy, &session, &parent, &schedule, &v.mpc, &exec)
                                .map(|result| EpisodeRun { spec: *spec, result })
                                .map_err(|source| HarnessError::Episode {
                                    instrument: spec.instrument,
                                    day: spec.day,
                                    policy: v.policy,
                                    source,
                                })
                        })
                        .collect()
                })
                .collect::<Result<_>>()
        })?;
        let mut out: Vec<Vec<EpisodeRun>> = variants.iter().map(|_| Vec::with_capacity(specs.len())).collect();
        for runs in per_episode {
            for (v, run) in runs.into_iter().enumerate() {
                out[v].push(run);
            }
        }
        Ok(out)
    }
}

fn profile_of(session: &MarketSession, parent: &ParentOrder) -> Result<VolumeProfile> {
    match accumulate_vwap(&session.events, parent.start_ns, parent.interval_ns, parent.steps) {
        Ok((_, profile)) => Ok(profile),
        Err(MarketDataError::NoTrades) => Ok(VolumeProfile::linear(parent.steps)),
        Err(e) => Err(e.into()),
    }
}

fn results(runs: &[EpisodeRun]) -> Vec<EpisodeResult> {
    runs.iter().map(|r| r.result.clone()).collect()
}

/// Output of `run`.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub runs: Vec<EpisodeRun>,
    pub report: MetricsReport,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let fleet = Fleet::new(cfg.clone())?;
    let variant = Variant {
        policy: cfg.policy.kind,
        mpc: cfg.mpc.clone(),
    };
    let runs = fleet.run(&[variant])?.remove(0);
    let report = MetricsReport::build(cfg.policy.kind, cfg.schedule.kind.name(), &results(&runs))?;
    Ok(RunOutput { runs, report })
}

/// One row of a comparison against the first policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub policy: PolicyKind,
    pub metric: &'static str,
    pub baseline: f64,
    pub value: f64,
    /// `None` when the policy's mean slippage is exactly zero.
    pub improvement: Option<f64>,
    /// Share of paired episodes where the policy beat the baseline.
    pub win_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub baseline: PolicyKind,
    pub reports: Vec<MetricsReport>,
    pub rows: Vec<ImprovementRow>,
    /// `metrics[p][e]` for policy `p` and episode `e`.
    pub metrics: Vec<Vec<EpisodeMetrics>>,
    pub runs: Vec<Vec<EpisodeRun>>,
}

type Pick = fn(&EpisodeMetrics) -> Option<f64>;

const METRICS: [(&str, Pick); 3] = [
    ("z_arrival_bps", |m| m.z_arrival),
    ("z_vwap_bps", |m| m.z_vwap),
    ("z_schedule_bps", |m| m.z_schedule),
];

fn win_rate(base: &[EpisodeMetrics], other: &[EpisodeMetrics], pick: Pick) -> f64 {
    let pairs: Vec<(f64, f64)> = base.iter().zip(other).filter_map(|(b, o)| Some((pick(b)?, pick(o)?))).collect();
    if pairs.is_empty() {
        return f64::NAN;
    }
    pairs.iter().filter(|(b, o)| o < b).count() as f64 / pairs.len() as f64
}

/// Run every policy on the same episodes; the first is the baseline.
pub fn compare(cfg: &RunConfig, policies: &[PolicyKind]) -> Result<Comparison> {
    if policies.len() < 2 {
        return Err(HarnessError::Config("compare needs at least two policies".into()));
    }
    let fleet = Fleet::new(cfg.clone())?;
    let variants: Vec<Variant> = policies
        .iter()
        .map(|&policy| Variant {
            policy,
            mpc: cfg.mpc.clone(),
        })
        .collect();
    let runs = fleet.run(&variants)?;
    let reports = policies
        .iter()
        .zip(&runs)
        .map(|(&p, r)| MetricsReport::build(p, cfg.schedule.kind.name(), &results(r)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let metrics: Vec<Vec<EpisodeMetrics>> = runs
        .iter()
        .map(|r| r.iter().map(|e| EpisodeMetrics::of(&e.result)).collect())
        .collect();
    let mut rows = Vec::new();
    for (k, &policy) in policies.iter().enumerate().skip(1) {
        for (metric, pick) in METRICS {
            let summary = |i: usize| Summary::of(&metrics[i].iter().filter_map(pick).collect::<Vec<_>>()).mean;
            let (baseline, value) = (summary(0), summary(k));
            rows.push(ImprovementRow {
                policy,
                metric,
                baseline,
                value,
                improvement: improvement(baseline, value).ok(),
                win_rate: win_rate(&metrics[0], &metrics[k], pick),
            });
        }
    }
    Ok(Comparison {
        baseline: policies[0],
        reports,
        rows,
        metrics,
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Beta,
    Gamma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
        }
    }

    fn apply(self, mpc: &MpcConfig, value: f64) -> MpcConfig {
        let mut m = mpc.clone();
        match self {
            SweepParam::Beta => m.beta = value,
            SweepParam::Gamma => m.gamma = value,
        }
        m
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "beta" => Ok(SweepParam::Beta),
            "gamma" => Ok(SweepParam::Gamma),
            other => Err(format!("unknown sweep parameter {other:?} (beta, gamma)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Pooled population variance of `epsilon_t`.
    pub var_eps: f64,
    pub mean_m_hat: f64,
    pub mean_v_hat: f64,
    pub report: MetricsReport,
    /// Improvement over the crossing baseline for each slippage metric.
    pub improvement: [Option<f64>; 3],
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub param: SweepParam,
    pub baseline: MetricsReport,
    pub rows: Vec<SweepRow>,
}

/// Run the configured optimizing policy at each value of `param`, plus the
/// crossing baseline, on the same episodes.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport> {
    if values.len() < 2 {
        return Err(HarnessError::Config("a sweep needs at least two values".into()));
    }
    let policy = cfg.policy.kind;
    if policy == PolicyKind::Crossing {
        return Err(HarnessError::Config("sweeps need an optimizing policy (mpc or mpc-oracle)".into()));
    }
    for &v in values {
        param
            .apply(&cfg.mpc, v)
            .validate()
            .map_err(|e| HarnessError::Config(format!("{} = {v}: {e}", param.name())))?;
    }
    let fleet = Fleet::new(cfg.clone())?;
    let mut variants = vec![Variant {
        policy: PolicyKind::Crossing,
        mpc: cfg.mpc.clone(),
    }];
    variants.extend(values.iter().map(|&v| Variant {
        policy,
        mpc: param.apply(&cfg.mpc, v),
    }));
    let runs = fleet.run(&variants)?;
    let schedule = cfg.schedule.kind.name();
    let baseline = MetricsReport::build(PolicyKind::Crossing, schedule, &results(&runs[0]))?;
    let rows = values
        .iter()
        .zip(&runs[1..])
        .map(|(&value, r)| -> Result<SweepRow> {
            let report = MetricsReport::build(policy, schedule, &results(r))?;
            let imp = |b: Summary, p: Summary| improvement(b.mean, p.mean).ok();
            Ok(SweepRow {
                value,
                var_eps: report.deviation.variance(),
                mean_m_hat: report.m_hat.mean,
                mean_v_hat: report.v_hat.mean,
                improvement: [
                    imp(baseline.z_arrival, report.z_arrival),
                    imp(baseline.z_vwap, report.z_vwap),
                    imp(baseline.z_schedule, report.z_schedule),
                ],
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { param, baseline, rows })
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Buy => "buy",
        Side::Sell => "sell",
    }
}

/// One row per episode.
pub fn write_episodes<W: Write>(w: W, runs: &[EpisodeRun]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "instrument",
        "day",
        "side",
        "policy",
        "market_seed",
        "shares",
        "filled",
        "completion",
        "p0",
        "p_fwap",
        "p_swap",
        "p_vwap",
        "z_arrival_bps",
        "z_vwap_bps",
        "z_schedule_bps",
        "max_violation",
    ])?;
    for run in runs {
        let r = &run.result;
        let m = EpisodeMetrics::of(r);
        out.write_record([
            run.spec.instrument.to_string(),
            run.spec.day.to_string(),
            side_name(run.spec.side).to_string(),
            r.policy.name().to_string(),
            run.spec.market_seed.to_string(),
            r.total_shares.to_string(),
            r.filled_shares().to_string(),
            fmt(r.completion),
            fmt(r.p0),
            opt(r.p_fwap),
            fmt(r.p_swap),
            opt(r.p_vwap),
            opt(m.z_arrival),
            opt(m.z_vwap),
            opt(m.z_schedule),
            format!("{:.3e}", r.max_violation()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per decision step.
pub fn write_trace<W: Write>(w: W, runs: &[EpisodeRun]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "instrument",
        "day",
        "policy",
        "t",
        "q",
        "s",
        "s_next",
        "epsilon",
        "mid_ticks",
        "spread_ticks",
        "m_hat",
        "v_hat",
        "slack",
        "submitted_shares",
        "violation",
    ])?;
    for run in runs {
        let r = &run.result;
        for st in &r.steps {
            out.write_record([
                run.spec.instrument.to_string(),
                run.spec.day.to_string(),
                r.policy.name().to_string(),
                st.t.to_string(),
                fmt(st.q),
                fmt(st.s),
                fmt(st.s_next),
                fmt(r.epsilon[st.t]),
                fmt(st.mid),
                fmt(st.spread),
                fmt(st.m_hat),
                fmt(st.v_hat),
                fmt(st.slack),
                st.shares.iter().sum::<u64>().to_string(),
                format!("{:.3e}", st.violations.map_or(0.0, |v| v.max()).max(st.submitted_excess)),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_comparison<W: Write>(w: W, c: &Comparison) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["baseline", "policy", "metric", "baseline_mean", "policy_mean", "improvement_pct", "win_rate"])?;
    for row in &c.rows {
        out.write_record([
            c.baseline.name(),
            row.policy.name(),
            row.metric,
            &fmt(row.baseline),
            &fmt(row.value),
            &opt(row.improvement),
            &fmt(row.win_rate),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(w: W, s: &SweepReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "param",
        "value",
        "var_eps",
        "mean_m_hat",
        "mean_v_hat",
        "z_arrival_bps",
        "z_vwap_bps",
        "z_schedule_bps",
        "improvement_arrival_pct",
        "improvement_vwap_pct",
        "improvement_schedule_pct",
        "completion",
        "max_violation",
    ])?;
    for row in &s.rows {
        let r = &row.report;
        out.write_record([
            s.param.name().to_string(),
            fmt(row.value),
            fmt(row.var_eps),
            fmt(row.mean_m_hat),
            fmt(row.mean_v_hat),
            fmt(r.z_arrival.mean),
            fmt(r.z_vwap.mean),
            fmt(r.z_schedule.mean),
            opt(row.improvement[0]),
            opt(row.improvement[1]),
            opt(row.improvement[2]),
            fmt(r.completion.mean),
            format!("{:.3e}", r.max_violation),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Write `name` under `dir`, creating the directory.
pub fn output_file(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir)?;
    Ok(fs::File::create(dir.join(name))?)
}

/// Standard outputs of a run: `episodes.csv`, `metrics.csv` and optionally
/// `trace.csv`. Returns the paths written.
pub fn write_run(dir: &Path, out: &RunOutput, trace: bool) -> Result<Vec<PathBuf>> {
    let mut paths = vec![dir.join("episodes.csv"), dir.join("metrics.csv")];
    write_episodes(output_file(dir, "episodes.csv")?, &out.runs)?;
    write_reports(output_file(dir, "metrics.csv")?, std::slice::from_ref(&out.report))?;
    if trace {
        write_trace(output_file(dir, "trace.csv")?, &out.runs)?;
        paths.push(dir.join("trace.csv"));
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = RunConfig::from_toml("[mpc]\nbeta = 2.0\ntypo = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let cfg = RunConfig::from_toml("[mpc]\nbeta = 2.0\n[schedule]\nkind = \"almgren-chriss\"\n").unwrap();
        assert_eq!(cfg.mpc.beta, 2.0);
        assert_eq!(cfg.schedule.kind, ScheduleKind::Ac);
    }

    #[test]
    fn plan_alternates_and_seeds_are_stable() {
        let cfg = EpisodesConfig {
            instruments: 2,
            days: 3,
            ..Default::default()
        };
        let p = plan(&cfg);
        assert_eq!(p.len(), 6);
        let sides: Vec<Side> = p.iter().map(|s| s.side).collect();
        assert_eq!(sides[..3], [Side::Buy, Side::Sell, Side::Buy]);
        assert_eq!(sides[3..], [Side::Sell, Side::Buy, Side::Sell]);
        assert_eq!(plan(&cfg), p);
        let seeds: std::collections::HashSet<u64> = p.iter().map(|s| s.market_seed).collect();
        assert_eq!(seeds.len(), 6);
        assert_ne!(market_seed(0, 0, -1), market_seed(0, 0, 0));
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.market.synthetic.duration_secs = 60.0;
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let cfg = RunConfig {
            mpc: MpcConfig {
                beta: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
