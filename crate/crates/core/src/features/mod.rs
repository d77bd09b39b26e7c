//! Environment state features, agent state features, feature-set selection,
//! and windowed observation assembly.
//!
//! The environment row has 189 entries in a fixed layout:
//!
//! | range     | group          | contents                                   |
//! |-----------|----------------|--------------------------------------------|
//! | 0..40     | LOB quantity   | notional per level, bids 0..19 then asks   |
//! | 40..60    | LOB imbalances | depth-cumulative imbalance per level       |
//! | 60..180   | order flow     | C bid, C ask, L bid, L ask, M bid, M ask   |
//! | 180..183  | indicators     | trade flow imbalance, 5/15/30 min          |
//! | 183..186  | indicators     | custom RSI, 5/15/30 min                    |
//! | 186       | indicators     | spread                                     |
//! | 187       | indicators     | log midpoint change                        |
//! | 188       | indicators     | last reward                                |

mod agent_state;
mod indicators;
mod observation;

pub use agent_state::{agent_state, order_completion, AGENT_DIM};
pub use indicators::{crsi_ratio, custom_rsi, tfi_ratio, trade_flow_imbalance, IndicatorCache, INDICATOR_WINDOWS};
pub use observation::{build_observation, FeatureHistory, Observation, WINDOW};

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::market_data::{fit_normalizer, DataError, LobSnapshot, NormalizationStats, TradingDay, ASK, BID, LEVELS};

pub const ENV_DIM: usize = 189;

pub const LOB_NOTIONAL: std::ops::Range<usize> = 0..40;
pub const LOB_IMBALANCE: std::ops::Range<usize> = 40..60;
pub const ORDER_FLOW: std::ops::Range<usize> = 60..180;
pub const INDICATORS: std::ops::Range<usize> = 180..189;
pub const TFI: usize = 180;
pub const CRSI: usize = 183;
pub const SPREAD: usize = 186;
pub const MID_CHANGE: usize = 187;
pub const LAST_REWARD: usize = 188;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown feature set {0:?}, expected 1..=6")]
    UnknownSet(String),
}

/// Notional of every visible level, bids then asks.
pub fn lob_notional(s: &LobSnapshot) -> [f64; 2 * LEVELS] {
    let mut out = [0.0; 2 * LEVELS];
    for i in 0..LEVELS {
        out[i] = s.bids[i].notional();
        out[LEVELS + i] = s.asks[i].notional();
    }
    out
}

/// `(cumAsk_i - cumBid_i) / (cumAsk_i + cumBid_i)` over depth-cumulative
/// notionals; 0 where both sides are empty.
pub fn lob_imbalance(s: &LobSnapshot) -> [f64; LEVELS] {
    let mut out = [0.0; LEVELS];
    let (mut cb, mut ca) = (0.0, 0.0);
    for (i, o) in out.iter_mut().enumerate() {
        cb += s.bids[i].notional();
        ca += s.asks[i].notional();
        let d = ca + cb;
        *o = if d > 0.0 { ((ca - cb) / d).clamp(-1.0, 1.0) } else { 0.0 };
    }
    out
}

/// Cancel, limit and market notionals in the order C bid, C ask, L bid,
/// L ask, M bid, M ask.
pub fn order_flow(s: &LobSnapshot) -> [f64; 6 * LEVELS] {
    let mut out = [0.0; 6 * LEVELS];
    let blocks = [
        &s.cancel_notional[BID],
        &s.cancel_notional[ASK],
        &s.limit_notional[BID],
        &s.limit_notional[ASK],
        &s.market_notional[BID],
        &s.market_notional[ASK],
    ];
    for (k, b) in blocks.into_iter().enumerate() {
        out[k * LEVELS..(k + 1) * LEVELS].copy_from_slice(b);
    }
    out
}

/// Spread, log midpoint change and the reward passthrough.
pub fn scalar_features(s: &LobSnapshot, prev: Option<&LobSnapshot>, last_reward: f64) -> [f64; 3] {
    let dm = prev.map_or(0.0, |p| s.midpoint().ln() - p.midpoint().ln());
    [s.best_ask() - s.best_bid(), dm, last_reward]
}

/// Writes the 189-entry environment row for snapshot `t` of `snaps`, whose
/// indicators come from `cache`.
pub fn env_row_into(snaps: &[LobSnapshot], cache: &IndicatorCache, t: usize, last_reward: f64, out: &mut [f64]) {
    assert_eq!(out.len(), ENV_DIM, "row buffer length");
    let s = &snaps[t];
    out[LOB_NOTIONAL].copy_from_slice(&lob_notional(s));
    out[LOB_IMBALANCE].copy_from_slice(&lob_imbalance(s));
    out[ORDER_FLOW].copy_from_slice(&order_flow(s));
    out[TFI..TFI + 3].copy_from_slice(&cache.tfi(t));
    out[CRSI..CRSI + 3].copy_from_slice(&cache.crsi(t));
    let prev = t.checked_sub(1).map(|p| &snaps[p]);
    out[SPREAD..].copy_from_slice(&scalar_features(s, prev, last_reward));
}

/// Precomputed per-day state for fast environment rows.
#[derive(Debug, Clone)]
pub struct DayFeatures<'a> {
    day: &'a TradingDay,
    cache: IndicatorCache,
}

impl<'a> DayFeatures<'a> {
    pub fn new(day: &'a TradingDay) -> Self {
        Self {
            day,
            cache: IndicatorCache::new(day.snapshots()),
        }
    }

    pub fn day(&self) -> &'a TradingDay {
        self.day
    }

    /// Writes the 189-entry environment row for snapshot `t`.
    pub fn row_into(&self, t: usize, last_reward: f64, out: &mut [f64]) {
        env_row_into(self.day.snapshots(), &self.cache, t, last_reward, out);
    }

    pub fn row(&self, t: usize, last_reward: f64) -> Vec<f64> {
        let mut v = vec![0.0; ENV_DIM];
        self.row_into(t, last_reward, &mut v);
        v
    }
}

/// Fits environment feature statistics over three prior days. The reward
/// passthrough gets identity statistics since it depends on the policy.
pub fn fit_env_normalizer<D: Borrow<TradingDay>>(days: &[D]) -> Result<NormalizationStats, DataError> {
    let mut row = vec![0.0; ENV_DIM];
    let mut stats = fit_normalizer(days, |day, sink| {
        let f = DayFeatures::new(day);
        for t in 0..day.len() {
            f.row_into(t, 0.0, &mut row);
            sink(&row);
        }
    })?;
    stats.set_identity(LAST_REWARD);
    Ok(stats)
}

/// Feature groups that may make up the environment part of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    LobQuantity,
    OrderFlow,
    LobImbalances,
    Indicators,
}

/// One of the six observation feature combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    id: u8,
    /// Whether the indicator group carries the last-reward passthrough.
    pub include_reward: bool,
}

impl FeatureSet {
    pub fn new(id: u8) -> Result<Self, FeatureError> {
        if (1..=6).contains(&id) {
            Ok(Self {
                id,
                include_reward: true,
            })
        } else {
            Err(FeatureError::UnknownSet(id.to_string()))
        }
    }

    pub fn with_reward(mut self, include: bool) -> Self {
        self.include_reward = include;
        self
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn groups(&self) -> &'static [Group] {
        use Group::*;
        match self.id {
            1 => &[LobQuantity, OrderFlow, LobImbalances, Indicators],
            2 => &[LobImbalances, Indicators],
            3 => &[LobQuantity, LobImbalances, Indicators],
            4 => &[LobQuantity, Indicators],
            5 => &[LobQuantity, OrderFlow, Indicators],
            _ => &[OrderFlow, Indicators],
        }
    }

    /// Environment row columns selected by this set, in row order.
    pub fn columns(&self) -> Vec<usize> {
        let g = self.groups();
        let mut cols = Vec::with_capacity(ENV_DIM);
        let mut add = |group: Group, range: std::ops::Range<usize>| {
            if g.contains(&group) {
                cols.extend(range);
            }
        };
        add(Group::LobQuantity, LOB_NOTIONAL);
        add(Group::LobImbalances, LOB_IMBALANCE);
        add(Group::OrderFlow, ORDER_FLOW);
        let end = if self.include_reward {
            INDICATORS.end
        } else {
            LAST_REWARD
        };
        add(Group::Indicators, INDICATORS.start..end);
        cols
    }

    pub fn width(&self) -> usize {
        self.columns().len()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let t = t.strip_prefix("set").or_else(|| t.strip_prefix("Set")).unwrap_or(t);
        t.trim()
            .parse::<u8>()
            .ok()
            .and_then(|id| Self::new(id).ok())
            .ok_or_else(|| FeatureError::UnknownSet(s.to_string()))
    }
}
