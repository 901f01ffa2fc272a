use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpc_execution::exec::PolicyKind;
use mpc_execution::harness::{
    compare, output_file, run, sweep, write_comparison, write_episodes, write_run, write_sweep, HarnessError,
    RunConfig, SweepParam,
};
use mpc_execution::marketdata::generate_market;
use mpc_execution::metrics::write_reports;
use mpc_execution::schedule::ScheduleKind;

/// Model-predictive-control execution experiments on simulated order books.
#[derive(Parser)]
#[command(name = "mpcx", version)]
struct Cli {
    /// TOML run configuration; missing keys take the baseline defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session and write it as `.l3e`.
    GenMarket(GenMarket),
    /// Run one policy over the configured episodes.
    Run(RunArgs),
    /// Sweep beta or gamma with paired markets.
    Sweep(SweepArgs),
    /// Run several policies on the same episodes; the first is the baseline.
    Compare(CompareArgs),
    /// Print the CSV reports found in an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, env = "MPCX_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, env = "MPCX_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    instruments: Option<usize>,
    #[arg(long)]
    schedule: Option<ScheduleArg>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    /// Replay this `.l3e` session instead of generating markets.
    #[arg(long)]
    market: Option<PathBuf>,
    /// Point the synthetic drift against the trader.
    #[arg(long)]
    adverse_drift: bool,
    /// Drift of the synthetic mid, ticks per hour.
    #[arg(long, allow_hyphen_values = true)]
    drift: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScheduleArg {
    Twap,
    Vwap,
    Ac,
}

#[derive(Args)]
struct GenMarket {
    #[command(flatten)]
    common: Common,
    /// Output file; defaults to `market.l3e` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    duration_secs: Option<f64>,
    /// Also write a CSV mirror next to the binary file.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Write a per-step trace as well.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long)]
    policy: Option<PolicyKind>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "crossing,mpc")]
    policies: Vec<PolicyKind>,
    /// Exit with status 3 unless every policy beats the baseline's schedule
    /// slippage by at least `--min-improvement` percent.
    #[arg(long)]
    assert: bool,
    #[arg(long, default_value_t = 0.0)]
    min_improvement: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding the CSV outputs.
    #[arg(long, env = "MPCX_OUT_DIR", default_value = "out")]
    dir: PathBuf,
}

fn load_config(path: Option<&Path>, c: &Common) -> Result<RunConfig, HarnessError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &c.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(w) = c.workers {
        cfg.output.workers = w;
    }
    if let Some(s) = c.seed {
        cfg.episodes.seed = s;
        cfg.market.synthetic.seed = s;
    }
    if let Some(d) = c.days {
        cfg.episodes.days = d;
    }
    if let Some(n) = c.instruments {
        cfg.episodes.instruments = n;
    }
    if let Some(s) = c.schedule {
        cfg.schedule.kind = match s {
            ScheduleArg::Twap => ScheduleKind::Twap,
            ScheduleArg::Vwap => ScheduleKind::Vwap,
            ScheduleArg::Ac => ScheduleKind::Ac,
        };
    }
    if let Some(b) = c.beta {
        cfg.mpc.beta = b;
    }
    if let Some(g) = c.gamma {
        cfg.mpc.gamma = g;
    }
    if let Some(x) = c.xi {
        cfg.mpc.xi = x;
    }
    if let Some(m) = &c.market {
        cfg.market.file = Some(m.clone());
    }
    if c.adverse_drift {
        cfg.episodes.adverse_drift = true;
    }
    if let Some(d) = c.drift {
        cfg.market.synthetic.drift = d;
    }
    Ok(cfg)
}

fn gen_market(config: Option<&Path>, a: &GenMarket) -> Result<(), HarnessError> {
    let mut cfg = load_config(config, &a.common)?;
    if let Some(d) = a.duration_secs {
        cfg.market.synthetic.duration_secs = d;
    }
    let m = generate_market(&cfg.market.synthetic).map_err(|e| match e {
        mpc_execution::marketdata::MarketDataError::InvalidConfig(m) => HarnessError::Config(m),
        other => other.into(),
    })?;
    let path = a.out.clone().unwrap_or_else(|| cfg.output.dir.join("market.l3e"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    m.session.save(&path)?;
    println!("{} events -> {}", m.session.events.len(), path.display());
    if a.csv {
        let mut csv = path.clone().into_os_string();
        csv.push(".csv");
        m.session.save_csv(Path::new(&csv))?;
        println!("csv mirror -> {}", Path::new(&csv).display());
    }
    Ok(())
}

fn run_cmd(config: Option<&Path>, a: &RunArgs) -> Result<(), HarnessError> {
    let mut cfg = load_config(config, &a.common)?;
    if let Some(p) = a.policy {
        cfg.policy.kind = p;
    }
    cfg.output.trace |= a.trace;
    let out = run(&cfg)?;
    for p in write_run(&cfg.output.dir, &out, cfg.output.trace)? {
        println!("wrote {}", p.display());
    }
    let r = &out.report;
    println!(
        "{} {}: {} episodes, z_schedule {:.3} bps, completion {:.4}, max violation {:.2e}",
        r.policy, r.schedule, r.episodes, r.z_schedule.mean, r.completion.mean, r.max_violation
    );
    Ok(())
}

fn sweep_cmd(config: Option<&Path>, a: &SweepArgs) -> Result<(), HarnessError> {
    let mut cfg = load_config(config, &a.common)?;
    if let Some(p) = a.policy {
        cfg.policy.kind = p;
    }
    let s = sweep(&cfg, a.param, &a.values)?;
    let dir = &cfg.output.dir;
    write_sweep(output_file(dir, "sweep.csv")?, &s)?;
    println!("wrote {}", dir.join("sweep.csv").display());
    for row in &s.rows {
        println!(
            "{} = {}: Var(eps) {:.4}, mean m_hat {:.4}, z_schedule {:.3} bps",
            a.param.name(),
            row.value,
            row.var_eps,
            row.mean_m_hat,
            row.report.z_schedule.mean
        );
    }
    Ok(())
}

/// Ok(true) when every assertion holds.
fn compare_cmd(config: Option<&Path>, a: &CompareArgs) -> Result<bool, HarnessError> {
    let cfg = load_config(config, &a.common)?;
    let c = compare(&cfg, &a.policies)?;
    let dir = &cfg.output.dir;
    write_comparison(output_file(dir, "compare.csv")?, &c)?;
    write_reports(output_file(dir, "metrics.csv")?, &c.reports)?;
    let all: Vec<_> = c.runs.iter().flatten().cloned().collect();
    write_episodes(output_file(dir, "episodes.csv")?, &all)?;
    println!("wrote compare.csv, metrics.csv, episodes.csv in {}", dir.display());
    let mut ok = true;
    for row in &c.rows {
        let imp = row.improvement.map_or("n/a".to_string(), |v| format!("{v:.2}%"));
        println!(
            "{} vs {} {}: {:.3} -> {:.3} bps ({imp}, wins {:.0}%)",
            row.policy,
            c.baseline,
            row.metric,
            row.baseline,
            row.value,
            100.0 * row.win_rate
        );
        if row.metric == "z_schedule_bps" {
            let pass = row.value < row.baseline && row.improvement.is_some_and(|v| v >= a.min_improvement);
            if a.assert && !pass {
                eprintln!("assertion failed: {} does not beat {} on z_schedule", row.policy, c.baseline);
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn report_cmd(a: &ReportArgs) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    let mut found = false;
    for name in ["metrics.csv", "compare.csv", "sweep.csv", "episodes.csv"] {
        let path = a.dir.join(name);
        if !path.exists() {
            continue;
        }
        found = true;
        let mut rd = csv::Reader::from_path(&path)?;
        let mut rows = vec![rd.headers()?.iter().map(str::to_string).collect::<Vec<_>>()];
        for rec in rd.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r.get(j).map_or(0, String::len)).max().unwrap_or(0))
            .collect();
        let printed = (|| -> std::io::Result<()> {
            writeln!(out, "== {}", path.display())?;
            for r in &rows {
                let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
                writeln!(out, "{}", line.join("  "))?;
            }
            writeln!(out)
        })();
        match printed {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            other => other?,
        }
    }
    if !found {
        return Err(HarnessError::Io(format!("no reports in {}", a.dir.display())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let config = cli.config.as_deref();
    let outcome = match &cli.command {
        Command::GenMarket(a) => gen_market(config, a).map(|_| true),
        Command::Run(a) => run_cmd(config, a).map(|_| true),
        Command::Sweep(a) => sweep_cmd(config, a).map(|_| true),
        Command::Compare(a) => compare_cmd(config, a),
        Command::Report(a) => report_cmd(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
