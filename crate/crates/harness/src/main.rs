#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use lobmm::config::{parse_override, ExperimentConfig};
use lobmm::data::DayStore;
use lobmm::report::{find_results, format_pnl, read_results, Grid};
use lobmm::run::{backtest, benchmark, checkpoint_config, ensure_dir, train};
use lobmm_core::agent::load_checkpoint;
use lobmm_core::env::segment_price_events_from;
use lobmm_core::market_data::{load_day, synth_days, write_day, SynthParams};

#[derive(Parser)]
#[command(
    name = "lobmm",
    version,
    about = "Limit-order-book market-making simulator and RL harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic trading days.
    Synth(SynthArgs),
    /// Load day files and report their shape.
    Validate(ValidateArgs),
    /// Count price events in one day.
    Segment(SegmentArgs),
    /// Train an agent; writes a checkpoint and training log.
    Train(ExpArgs),
    /// Evaluate a checkpoint on the test days.
    Backtest(BacktestArgs),
    /// Buy-and-hold return over the test days.
    Benchmark(ExpArgs),
    /// Render results grids from backtest outputs.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First date, YYYY-MM-DD.
    #[arg(long, default_value = "2020-01-01")]
    start_date: NaiveDate,
    /// Seconds per day.
    #[arg(long, default_value_t = 86_400)]
    seconds: u32,
    #[arg(long, default_value_t = 8000.0)]
    start_price: f64,
    /// Per-second log-midpoint standard deviation.
    #[arg(long, default_value_t = 3e-5)]
    volatility: f64,
    /// Per-second pull toward the opening price.
    #[arg(long, default_value_t = 0.0)]
    mean_reversion: f64,
    /// Per-second log-midpoint drift.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    #[arg(long, default_value_t = 1)]
    spread_ticks: u32,
    /// Gzip the day files.
    #[arg(long)]
    gz: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Day files, or directories of them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Day file.
    #[arg(long)]
    day: PathBuf,
    /// Price band half-width as a fraction of the midpoint.
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    /// Snapshot index to start from.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Write the step boundaries to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct ExpArgs {
    /// Experiment config (sectioned key = value, TOML syntax).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of day files.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Training days, e.g. 2020-01-04..2020-01-11.
    #[arg(long)]
    train: Option<String>,
    /// Test days, e.g. 2020-01-12..2020-02-10.
    #[arg(long)]
    test: Option<String>,
    /// Test days to leave out, comma separated.
    #[arg(long, value_delimiter = ',')]
    skip_days: Vec<NaiveDate>,
    /// a2c or ppo.
    #[arg(long)]
    algo: Option<String>,
    /// Reward function name.
    #[arg(long)]
    reward: Option<String>,
    /// Feature set, 1 to 6.
    #[arg(long = "set")]
    feature_set: Option<u8>,
    /// time or price.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    total_steps: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Act greedily during backtests instead of sampling.
    #[arg(long)]
    greedy: bool,
    /// Any config key, as section.key=value; repeatable.
    #[arg(long = "param", value_parser = parse_override)]
    params: Vec<(String, String)>,
}

impl ExpArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        let mut put = |k: &str, v: String| o.push((k.to_string(), v));
        let quote = |s: &str| format!("{s:?}");
        if let Some(v) = &self.data {
            put("data.dir", quote(&v.display().to_string()));
        }
        if let Some(v) = &self.train {
            put("data.train", quote(v));
        }
        if let Some(v) = &self.test {
            put("data.test", quote(v));
        }
        if !self.skip_days.is_empty() {
            let list: Vec<String> = self.skip_days.iter().map(|d| quote(&d.to_string())).collect();
            put("data.skip_days", format!("[{}]", list.join(", ")));
        }
        if let Some(v) = &self.algo {
            put("learner.algorithm", quote(v));
        }
        if let Some(v) = &self.reward {
            put("env.reward", quote(v));
        }
        if let Some(v) = self.feature_set {
            put("env.feature_set", v.to_string());
        }
        if let Some(v) = &self.mode {
            put("env.mode", quote(v));
        }
        if let Some(v) = self.seed {
            put("run.seed", v.to_string());
        }
        if let Some(v) = self.total_steps {
            put("learner.total_steps", v.to_string());
        }
        if let Some(v) = self.workers {
            put("learner.workers", v.to_string());
        }
        if let Some(v) = &self.out {
            put("run.out", quote(&v.display().to_string()));
        }
        if self.greedy {
            put("run.greedy", "true".into());
        }
        o.extend(self.params.iter().cloned());
        o
    }

    fn resolve(&self, base: Option<String>) -> Result<ExperimentConfig> {
        let text = match (&self.config, base) {
            (Some(p), _) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            (None, Some(b)) => b,
            (None, None) => String::new(),
        };
        Ok(ExperimentConfig::load(&text, &self.overrides())?)
    }
}

#[derive(Args)]
struct BacktestArgs {
    /// Trained checkpoint; its embedded config is the base unless --config is given.
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    exp: ExpArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory searched recursively for results.csv files.
    #[arg(long, default_value = "runs")]
    results: PathBuf,
    /// Where to write report.csv and report.txt; defaults to --results.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Segment(a) => cmd_segment(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Backtest(a) => cmd_backtest(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    if a.days == 0 {
        bail!("--days must be at least 1");
    }
    if !(2..=86_400).contains(&a.seconds) {
        bail!("--seconds must lie in 2..=86400");
    }
    let params = SynthParams {
        date: a.start_date,
        seconds: a.seconds,
        start_price: a.start_price,
        volatility: a.volatility,
        mean_reversion: a.mean_reversion,
        drift: a.drift,
        spread_ticks: a.spread_ticks,
        ..SynthParams::default()
    };
    ensure_dir(&a.out)?;
    for day in synth_days(a.seed, &params, a.days) {
        let ext = if a.gz { "csv.gz" } else { "csv" };
        let path = a.out.join(format!("{}.{ext}", day.date()));
        write_day(&day, &path)?;
        println!("{}  {} snapshots  {}", day.date(), day.len(), path.display());
    }
    Ok(())
}

fn day_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let n = f.to_string_lossy();
                    n.ends_with(".csv") || n.ends_with(".csv.gz")
                })
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let files = day_files(&a.paths)?;
    if files.is_empty() {
        bail!("no day files found");
    }
    let mut failed = 0;
    println!("date        snapshots  gaps  first_mid   last_mid    min_spread  file");
    for f in &files {
        match load_day(f) {
            Ok(day) => {
                let snaps = day.snapshots();
                let gaps = snaps
                    .windows(2)
                    .filter(|w| w[1].timestamp - w[0].timestamp > 1000)
                    .count();
                let min_spread = snaps.iter().map(|s| s.spread()).fold(f64::INFINITY, f64::min);
                println!(
                    "{}  {:>9}  {:>4}  {:>10.2}  {:>10.2}  {:>10.4}  {}",
                    day.date(),
                    day.len(),
                    gaps,
                    day.first_midpoint(),
                    day.last_midpoint(),
                    min_spread,
                    f.display()
                );
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", f.display());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} files failed validation", files.len());
    }
    Ok(())
}

fn cmd_segment(a: &SegmentArgs) -> Result<()> {
    if !(a.beta > 0.0) {
        bail!("--beta must be positive");
    }
    let day = load_day(&a.day).with_context(|| format!("loading {}", a.day.display()))?;
    if a.start >= day.len() {
        bail!("--start {} is past the last snapshot {}", a.start, day.len() - 1);
    }
    let seg = segment_price_events_from(&day, a.beta, a.start);
    let lens: Vec<usize> = seg.boundaries.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = lens.clone();
    sorted.sort_unstable();
    let mean = if lens.is_empty() {
        0.0
    } else {
        lens.iter().sum::<usize>() as f64 / lens.len() as f64
    };
    println!("date              {}", day.date());
    println!("snapshots         {}", day.len());
    println!("beta              {}", a.beta);
    println!("events            {}", seg.steps());
    println!("mean_snapshots    {mean:.3}");
    println!(
        "median_snapshots  {}",
        sorted.get(sorted.len() / 2).copied().unwrap_or(0)
    );
    println!("max_snapshots     {}", sorted.last().copied().unwrap_or(0));
    println!("tail_truncated    {}", seg.tail_truncated);
    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["step", "start", "end", "start_mid", "end_mid"])?;
        let snaps = day.snapshots();
        for (i, b) in seg.boundaries.windows(2).enumerate() {
            w.write_record([
                i.to_string(),
                b[0].to_string(),
                b[1].to_string(),
                snaps[b[0]].midpoint().to_string(),
                snaps[b[1]].midpoint().to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn open_store(cfg: &ExperimentConfig) -> Result<DayStore> {
    DayStore::open(&cfg.data.dir).with_context(|| format!("indexing {}", cfg.data.dir.display()))
}

fn cmd_train(a: &ExpArgs) -> Result<()> {
    let cfg = a.resolve(None)?;
    let store = open_store(&cfg)?;
    let outcome = train(&cfg, &store)?;
    let last = outcome.log.last();
    println!(
        "trained {} updates, {} steps; checkpoint {}",
        last.map(|r| r.update_idx).unwrap_or(0),
        last.map(|r| r.steps).unwrap_or(0),
        outcome.checkpoint.display()
    );
    Ok(())
}

fn cmd_backtest(a: &BacktestArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let base = checkpoint_config(&ck)?.to_toml();
    let cfg = a.exp.resolve(Some(base))?;
    let store = open_store(&cfg)?;
    let rows = backtest(&cfg, &store, &ck.net)?;
    for r in &rows {
        let extra = r
            .compounded_pct
            .map(|c| format!("  compounded {}", format_pnl(c)))
            .unwrap_or_default();
        println!(
            "{:<10}  {:>10}  trades {:>6}{extra}",
            r.date,
            format_pnl(r.return_pct),
            r.trades
        );
    }
    println!("results in {}", cfg.run.out.join("results.csv").display());
    Ok(())
}

fn cmd_benchmark(a: &ExpArgs) -> Result<()> {
    let cfg = a.resolve(None)?;
    let store = open_store(&cfg)?;
    let pct = benchmark(&cfg, &store)?;
    ensure_dir(&cfg.run.out)?;
    let path = cfg.run.out.join("benchmark.csv");
    let mut f = std::fs::File::create(&path)?;
    f.write_all(cfg.echo().as_bytes())?;
    writeln!(f, "strategy,test_days,return_pct")?;
    writeln!(f, "buy_and_hold,{},{pct}", cfg.data.test)?;
    println!("buy-and-hold {}%", format_pnl(pct));
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let files = find_results(&a.results)?;
    if files.is_empty() {
        bail!("no results.csv under {}", a.results.display());
    }
    let mut rows = Vec::new();
    for f in &files {
        let file = std::fs::File::open(f).with_context(|| format!("opening {}", f.display()))?;
        rows.extend(read_results(file).with_context(|| format!("reading {}", f.display()))?);
    }
    let grid = Grid::from_rows(&rows);
    let out: &Path = a.out.as_deref().unwrap_or(&a.results);
    ensure_dir(out)?;
    std::fs::write(out.join("report.csv"), grid.to_csv()?)?;
    let text = grid.to_text();
    std::fs::write(out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}
