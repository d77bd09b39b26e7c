//! Training, backtesting and benchmark pipelines.

use std::borrow::Borrow;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lobmm_core::agent::{
    act, load_checkpoint, save_checkpoint, write_training_log, ActorCritic, AgentError, Checkpoint, EnvRotation,
    TrainLogRow, Trainer,
};
use lobmm_core::env::{write_episode_summaries, EnvConfig, Environment, EpisodeSummary};
use lobmm_core::exchange::{write_trade_log, Action, Fill};
use lobmm_core::market_data::TradingDay;

use crate::config::ExperimentConfig;
use crate::data::{DayStore, PreparedDay};
use crate::report::{total_row, write_results, ResultRow};
use crate::HarnessError;

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

/// Seed for worker `w` on day slot `d`.
fn env_seed(base: u64, w: usize, d: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(((w as u64) << 32) | d as u64)
        .wrapping_add(1)
}

/// Checkpoint carrying the resolved config.
pub fn checkpoint_for(net: ActorCritic, cfg: &ExperimentConfig) -> Checkpoint {
    Checkpoint {
        net,
        meta: serde_json::json!({ "config": cfg.to_toml() }),
    }
}

/// The config a checkpoint was trained with.
pub fn checkpoint_config(ck: &Checkpoint) -> Result<ExperimentConfig, HarnessError> {
    let text = ck
        .meta
        .get("config")
        .and_then(|v| v.as_str())
        .ok_or_else(|| HarnessError::Config("checkpoint carries no config".into()))?;
    ExperimentConfig::load(text, &[])
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<TrainLogRow>,
    pub checkpoint: PathBuf,
    pub net: ActorCritic,
}

/// One lockstep worker per `learner.workers`, each rotating over all
/// training days.
pub fn build_workers(
    cfg: &ExperimentConfig,
    days: &[PreparedDay],
) -> Result<Vec<EnvRotation<Environment>>, HarnessError> {
    let env_cfg = cfg.env_config()?;
    let workers = cfg.learner_config()?.workers;
    (0..workers)
        .map(|w| {
            let envs = days
                .iter()
                .enumerate()
                .map(|(d, p)| {
                    let c = EnvConfig {
                        seed: env_seed(cfg.run.seed, w, d),
                        ..env_cfg.clone()
                    };
                    Environment::with_cache(c, p.day.clone(), p.cache.clone(), p.stats.clone())
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(EnvRotation::new(envs, env_seed(cfg.run.seed, w, usize::MAX >> 32))?)
        })
        .collect()
}

/// Trains on the configured days; writes `training_log.csv`,
/// `checkpoint.ckpt` and `config.toml` under `run.out`.
pub fn train(cfg: &ExperimentConfig, store: &DayStore) -> Result<TrainOutcome, HarnessError> {
    let idx = store.select(&cfg.data.train, &[]);
    if idx.is_empty() {
        return Err(HarnessError::Config(format!(
            "no data days in train range {:?}",
            cfg.data.train.to_string()
        )));
    }
    let days = store.prepare(&idx)?;
    let workers = build_workers(cfg, &days)?;
    let out = &cfg.run.out;
    ensure_dir(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;

    let mut trainer = Trainer::new(cfg.learner_config()?, workers)?;
    let every = cfg.run.checkpoint_every;
    let log = trainer.train(|row, net| {
        if every > 0 && row.update_idx % every == 0 {
            let path = out.join(format!("checkpoint_{:06}.ckpt", row.update_idx));
            save_checkpoint(path, &checkpoint_for(net.clone(), cfg))?;
        }
        Ok::<(), AgentError>(())
    })?;

    let mut w = create(&out.join("training_log.csv"))?;
    w.write_all(cfg.echo().as_bytes())?;
    write_training_log(&log, &mut w)?;
    w.flush()?;
    let net = trainer.into_network();
    let checkpoint = out.join("checkpoint.ckpt");
    save_checkpoint(&checkpoint, &checkpoint_for(net.clone(), cfg))?;
    Ok(TrainOutcome { log, checkpoint, net })
}

/// One full out-of-sample episode.
#[derive(Debug, Clone)]
pub struct DayRun {
    pub summary: EpisodeSummary,
    pub trades: Vec<Fill>,
    pub episode_reward: f64,
}

/// Runs `net` over one day from the end of the warm-up to the close.
pub fn run_day(
    cfg: &ExperimentConfig,
    net: &ActorCritic,
    day: &PreparedDay,
    seed: u64,
) -> Result<DayRun, HarnessError> {
    let env_cfg = EnvConfig {
        random_start: false,
        seed,
        ..cfg.env_config()?
    };
    let mut env = Environment::with_cache(env_cfg, day.day.clone(), day.cache.clone(), day.stats.clone())?;
    if env.observation_len() != net.config().input {
        return Err(AgentError::Dim {
            expected: net.config().input,
            got: env.observation_len(),
        }
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = env.reset()?;
    loop {
        let (probs, _) = net.forward(&obs.data)?;
        let a = Action::from_index(act(&probs, &mut rng, cfg.run.greedy)).expect("policy emits valid indices");
        let r = env.step(a)?;
        obs = r.observation;
        if r.done {
            break;
        }
    }
    Ok(DayRun {
        summary: env.summary(),
        trades: env.trade_log().to_vec(),
        episode_reward: env.episode_reward(),
    })
}

fn result_row(cfg: &ExperimentConfig, s: &EpisodeSummary) -> ResultRow {
    ResultRow {
        reward: s.reward_fn.clone(),
        feature_set: s.feature_set,
        algorithm: cfg.learner.algorithm.clone(),
        mode: s.mode.clone(),
        date: s.date.to_string(),
        return_pct: s.daily_return_pct,
        compounded_pct: None,
        trades: s.trades,
        steps: s.steps,
        max_drawdown_pct: s.max_drawdown_pct,
    }
}

/// Evaluates `net` on every test day; writes `results.csv`,
/// `episode_summary.csv` and `trades_<date>.csv` under `run.out`. Returns the
/// per-day rows followed by the total row.
pub fn backtest(cfg: &ExperimentConfig, store: &DayStore, net: &ActorCritic) -> Result<Vec<ResultRow>, HarnessError> {
    let idx = store.select(&cfg.data.test, &cfg.data.skip_days);
    if idx.is_empty() {
        return Err(HarnessError::Config(format!(
            "no data days in test range {:?}",
            cfg.data.test.to_string()
        )));
    }
    let days = store.prepare(&idx)?;
    let runs = days
        .par_iter()
        .zip(idx.par_iter())
        .map(|(d, &i)| run_day(cfg, net, d, env_seed(cfg.run.seed, 0, i)))
        .collect::<Result<Vec<_>, _>>()?;

    let out = &cfg.run.out;
    ensure_dir(out)?;
    let echo = cfg.echo();
    for r in &runs {
        let mut w = create(&out.join(format!("trades_{}.csv", r.summary.date)))?;
        w.write_all(echo.as_bytes())?;
        write_trade_log(&r.trades, &mut w)?;
        w.flush()?;
    }
    let summaries: Vec<EpisodeSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let mut w = create(&out.join("episode_summary.csv"))?;
    w.write_all(echo.as_bytes())?;
    write_episode_summaries(&summaries, &mut w)?;
    w.flush()?;

    let mut rows: Vec<ResultRow> = summaries.iter().map(|s| result_row(cfg, s)).collect();
    rows.extend(total_row(&rows));
    write_results(&rows, &echo, create(&out.join("results.csv"))?)?;
    Ok(rows)
}

/// Loads a checkpoint and its embedded config.
pub fn load_trained(path: &Path) -> Result<(ActorCritic, ExperimentConfig), HarnessError> {
    let ck = load_checkpoint(path)?;
    let cfg = checkpoint_config(&ck)?;
    Ok((ck.net, cfg))
}

/// Buy-and-hold return over days in order: the last day's closing midpoint
/// against the first day's opening midpoint, in percent.
pub fn buy_and_hold_pct<D: Borrow<TradingDay>>(days: &[D]) -> Result<f64, HarnessError> {
    let (Some(first), Some(last)) = (days.first(), days.last()) else {
        return Err(HarnessError::Config("buy-and-hold needs at least one day".into()));
    };
    Ok((last.borrow().last_midpoint() / first.borrow().first_midpoint() - 1.0) * 100.0)
}

/// Buy-and-hold over the configured test days.
pub fn benchmark(cfg: &ExperimentConfig, store: &DayStore) -> Result<f64, HarnessError> {
    let idx = store.select(&cfg.data.test, &cfg.data.skip_days);
    let (Some(&a), Some(&b)) = (idx.first(), idx.last()) else {
        return Err(HarnessError::Config("buy-and-hold needs at least one test day".into()));
    };
    let first = store.load(a)?;
    let last = if a == b { first.clone() } else { store.load(b)? };
    buy_and_hold_pct(&[first, last])
}
