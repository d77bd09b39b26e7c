//! Episodic market-making environment over one trading day.
//!
//! Each agent step applies one action at the current snapshot, then walks
//! forward through the underlying one-second snapshots taking no further
//! action. At every snapshot walked the exchange matches open orders and the
//! reward function is evaluated; the step reward is the sum. A time-event
//! step walks a fixed number of snapshots; a price-event step walks until the
//! midpoint leaves a band around the step's opening midpoint. When the day
//! runs out the inventory is flattened and the episode ends.

mod segment;
mod summary;

pub use segment::{breaches, price_band, segment_price_events, segment_price_events_from, PriceSegmentation};
pub use summary::{episode_summary_header, write_episode_summaries, EpisodeSummary};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exchange::{Action, ExchangeConfig, ExchangeState, Fill};
use crate::features::{
    agent_state, build_observation, env_row_into, FeatureError, FeatureHistory, FeatureSet, IndicatorCache,
    Observation, ENV_DIM, LAST_REWARD, WINDOW,
};
use crate::market_data::{NormalizationStats, TradingDay};
use crate::rewards::{Reward, RewardContext, RewardFn, RewardParams};

/// Snapshots skipped before the first actionable step so the longest
/// indicator window is full.
pub const DEFAULT_WARMUP: usize = 1800;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("day has {len} snapshots, need more than {warmup} warm-up snapshots plus one step")]
    DayTooShort { len: usize, warmup: usize },
    #[error("step called after the episode finished")]
    StepAfterDone,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("invalid event mode: {0}")]
    Mode(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventMode {
    /// Walk a fixed number of snapshots per step.
    Time { action_repeats: usize },
    /// Walk until the midpoint leaves `m * (1 +/- beta)`.
    Price { beta: f64 },
}

impl EventMode {
    pub fn time() -> Self {
        EventMode::Time { action_repeats: 5 }
    }

    pub fn price() -> Self {
        EventMode::Price { beta: 1e-4 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventMode::Time { .. } => "time",
            EventMode::Price { .. } => "price",
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        match *self {
            EventMode::Time { action_repeats: 0 } => Err(EnvError::Mode("action_repeats must be at least 1".into())),
            EventMode::Price { beta } if !(beta > 0.0) => Err(EnvError::Mode("beta must be positive".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EventMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventMode {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "time" => Ok(Self::time()),
            "price" => Ok(Self::price()),
            other => Err(EnvError::Mode(format!("{other:?}, expected time or price"))),
        }
    }
}

/// When the observation window advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryCadence {
    /// One row per underlying snapshot.
    Snapshot,
    /// One row per agent step.
    Step,
}

impl HistoryCadence {
    pub fn name(self) -> &'static str {
        match self {
            HistoryCadence::Snapshot => "snapshot",
            HistoryCadence::Step => "step",
        }
    }
}

impl FromStr for HistoryCadence {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snapshot" => Ok(Self::Snapshot),
            "step" => Ok(Self::Step),
            other => Err(EnvError::Mode(format!("cadence {other:?}, expected snapshot or step"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub feature_set: FeatureSet,
    pub reward: RewardFn,
    pub reward_params: RewardParams,
    pub mode: EventMode,
    pub random_start: bool,
    pub seed: u64,
    pub exchange: ExchangeConfig,
    /// Daily PnL target scaling the realized PnL feature.
    pub rho: f64,
    pub warmup: usize,
    pub window: usize,
    pub cadence: HistoryCadence,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            feature_set: FeatureSet::new(1).expect("valid set"),
            reward: RewardFn::TradeCompletion,
            reward_params: RewardParams::default(),
            mode: EventMode::time(),
            random_start: true,
            seed: 0,
            exchange: ExchangeConfig::default(),
            rho: 0.01,
            warmup: DEFAULT_WARMUP,
            window: WINDOW,
            cadence: HistoryCadence::Snapshot,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub midpoint: f64,
    /// Signed inventory in lots.
    pub inventory: f64,
    pub rpnl_total: f64,
    pub fills: Vec<Fill>,
    pub snapshots_consumed: usize,
    /// Snapshot index the step ended on.
    pub cursor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    day: Arc<TradingDay>,
    cache: Arc<IndicatorCache>,
    stats: Arc<NormalizationStats>,
    ex: ExchangeState,
    reward: Reward,
    history: FeatureHistory,
    rng: ChaCha8Rng,
    row: Vec<f64>,
    cursor: usize,
    start: usize,
    done: bool,
    last_action: Option<Action>,
    rpnl_prev: f64,
    steps: usize,
    consumed: usize,
    episode_reward: f64,
    trade_log: Vec<Fill>,
    peak_mtm: f64,
    max_drawdown: f64,
}

impl Environment {
    pub fn new(cfg: EnvConfig, day: Arc<TradingDay>, stats: Arc<NormalizationStats>) -> Result<Self, EnvError> {
        let cache = Arc::new(IndicatorCache::new(day.snapshots()));
        Self::with_cache(cfg, day, cache, stats)
    }

    /// Like [`new`](Self::new) with a shared indicator cache for `day`.
    pub fn with_cache(
        cfg: EnvConfig,
        day: Arc<TradingDay>,
        cache: Arc<IndicatorCache>,
        stats: Arc<NormalizationStats>,
    ) -> Result<Self, EnvError> {
        cfg.mode.validate()?;
        if stats.len() != ENV_DIM {
            return Err(FeatureError::LengthMismatch {
                expected: ENV_DIM,
                got: stats.len(),
            }
            .into());
        }
        if day.len() < cfg.warmup + 2 {
            return Err(EnvError::DayTooShort {
                len: day.len(),
                warmup: cfg.warmup,
            });
        }
        Ok(Self {
            ex: ExchangeState::new(cfg.exchange),
            reward: Reward::new(cfg.reward, cfg.reward_params),
            history: FeatureHistory::new(cfg.window),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            row: vec![0.0; ENV_DIM],
            cursor: cfg.warmup,
            start: cfg.warmup,
            done: true,
            last_action: None,
            rpnl_prev: 0.0,
            steps: 0,
            consumed: 0,
            episode_reward: 0.0,
            trade_log: Vec::new(),
            peak_mtm: 0.0,
            max_drawdown: 0.0,
            cfg,
            day,
            cache,
            stats,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn day(&self) -> &TradingDay {
        &self.day
    }

    pub fn exchange(&self) -> &ExchangeState {
        &self.ex
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn trade_log(&self) -> &[Fill] {
        &self.trade_log
    }

    pub fn episode_reward(&self) -> f64 {
        self.episode_reward
    }

    /// Observation length: `window * width + agent state`.
    pub fn observation_len(&self) -> usize {
        self.cfg.window * self.cfg.feature_set.width() + crate::features::AGENT_DIM
    }

    /// Reseeds the start-index generator.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Starts a new episode and returns its first observation.
    pub fn reset(&mut self) -> Result<Observation, EnvError> {
        let last = self.day.len() - 1;
        self.start = if self.cfg.random_start {
            self.rng.random_range(self.cfg.warmup..last)
        } else {
            self.cfg.warmup
        };
        self.cursor = self.start;
        self.ex.reset();
        self.reward.reset();
        self.history.clear();
        self.done = false;
        self.last_action = None;
        self.rpnl_prev = 0.0;
        self.steps = 0;
        self.consumed = 0;
        self.episode_reward = 0.0;
        self.trade_log.clear();
        self.peak_mtm = 0.0;
        self.max_drawdown = 0.0;
        self.push_row(self.start, 0.0);
        self.observe()
    }

    fn push_row(&mut self, t: usize, last_reward: f64) {
        env_row_into(self.day.snapshots(), &self.cache, t, last_reward, &mut self.row);
        self.history.push(&self.row);
    }

    fn observe(&self) -> Result<Observation, EnvError> {
        let mid = self.day.snapshots()[self.cursor].midpoint();
        let a = agent_state(&self.ex, mid, self.last_action, self.cfg.rho);
        Ok(build_observation(
            &self.cfg.feature_set,
            &self.stats,
            &self.history,
            &a,
        )?)
    }

    /// Matches and scores snapshot `k`, returning its reward.
    fn advance_to(&mut self, k: usize, fills: &mut Vec<Fill>) -> f64 {
        let snaps = self.day.snapshots();
        let s = &snaps[k];
        fills.extend(self.ex.match_step(s));
        let m = s.midpoint();
        let ctx = RewardContext {
            inv: self.ex.net_lots(),
            dm: m / snaps[k - 1].midpoint() - 1.0,
            rpnl_step: self.ex.step_realized(),
            rpnl_total: self.ex.realized_pnl(),
            rpnl_prev: self.rpnl_prev,
            matched_count: self.ex.executions_this_step(),
            half_spread: m / s.best_bid() - 1.0,
        };
        let r = self.reward.evaluate(&ctx);
        self.rpnl_prev = self.ex.realized_pnl();
        self.ex.begin_snapshot();
        self.cursor = k;
        self.consumed += 1;
        self.track_drawdown(m);
        if self.cfg.cadence == HistoryCadence::Snapshot {
            self.push_row(k, r);
        }
        r
    }

    fn track_drawdown(&mut self, mid: f64) {
        let mtm = self.ex.mark_to_market(mid);
        self.peak_mtm = self.peak_mtm.max(mtm);
        self.max_drawdown = self.max_drawdown.max(self.peak_mtm - mtm);
    }

    /// Takes one agent step.
    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let snaps_len = self.day.len();
        let last = snaps_len - 1;
        let t0 = self.cursor;
        let consumed0 = self.consumed;
        self.ex.begin_snapshot();
        let mut fills = self.ex.apply_action(action, &self.day.snapshots()[t0]);
        self.last_action = Some(action);
        let mut reward = 0.0;
        match self.cfg.mode {
            EventMode::Time { action_repeats } => {
                let end = (t0 + action_repeats).min(last);
                for k in t0 + 1..=end {
                    reward += self.advance_to(k, &mut fills);
                }
            }
            EventMode::Price { beta } => {
                let band = price_band(self.day.snapshots()[t0].midpoint(), beta);
                for k in t0 + 1..=last {
                    reward += self.advance_to(k, &mut fills);
                    if breaches(self.day.snapshots()[k].midpoint(), band) {
                        break;
                    }
                }
            }
        }
        self.steps += 1;
        if self.cursor == last {
            reward += self.finish_episode(&mut fills);
        }
        if self.cfg.cadence == HistoryCadence::Step {
            self.push_row(self.cursor, reward);
        } else if self.done {
            self.history.set_last(LAST_REWARD, reward);
        }
        self.episode_reward += reward;
        self.trade_log.extend(fills.iter().cloned());
        let mid = self.day.snapshots()[self.cursor].midpoint();
        Ok(StepResult {
            observation: self.observe()?,
            reward,
            done: self.done,
            info: StepInfo {
                midpoint: mid,
                inventory: self.ex.net_lots(),
                rpnl_total: self.ex.realized_pnl(),
                fills,
                snapshots_consumed: self.consumed - consumed0,
                cursor: self.cursor,
            },
        })
    }

    /// Forces a flatten at the last snapshot and scores it as one more
    /// reward event.
    fn finish_episode(&mut self, fills: &mut Vec<Fill>) -> f64 {
        let s = &self.day.snapshots()[self.cursor];
        self.ex.begin_snapshot();
        fills.extend(self.ex.flatten_all(s));
        let m = s.midpoint();
        let ctx = RewardContext {
            inv: self.ex.net_lots(),
            dm: 0.0,
            rpnl_step: self.ex.step_realized(),
            rpnl_total: self.ex.realized_pnl(),
            rpnl_prev: self.rpnl_prev,
            matched_count: self.ex.executions_this_step(),
            half_spread: m / s.best_bid() - 1.0,
        };
        let r = self.reward.evaluate(&ctx);
        self.rpnl_prev = self.ex.realized_pnl();
        self.ex.begin_snapshot();
        self.track_drawdown(m);
        self.done = true;
        r
    }

    /// Totals for the episode so far.
    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            date: self.day.date(),
            mode: self.cfg.mode.name().to_string(),
            reward_fn: self.cfg.reward.name().to_string(),
            feature_set: self.cfg.feature_set.id(),
            steps: self.steps,
            trades: self.trade_log.len(),
            daily_return_pct: self.ex.realized_pnl() * 100.0,
            max_drawdown_pct: self.max_drawdown * 100.0,
        }
    }
}
