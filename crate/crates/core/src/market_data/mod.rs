//! Per-second limit order book snapshots grouped into UTC trading days.
//!
//! A [`LobSnapshot`] carries the visible 20 levels on each side plus the
//! order and trade flow that accumulated since the previous snapshot. Days
//! are loaded from CSV ([`load_day`]), synthesized ([`synth_day`]), and
//! z-score normalized against the three preceding days ([`fit_normalizer`]).

mod io;
mod normalize;
mod synth;

pub use io::{csv_header, load_day, peek_date, read_day, write_day, write_day_to};
pub use normalize::{fit_normalizer, normalize, normalize_into, NormalizationStats, CLIP_BOUND};
pub use synth::{synth_day, synth_days, SynthParams};

use chrono::{DateTime, NaiveDate};
use thiserror::Error;

/// Number of visible price levels per side.
pub const LEVELS: usize = 20;

/// Index of the bid side in the per-side flow arrays.
pub const BID: usize = 0;
/// Index of the ask side in the per-side flow arrays.
pub const ASK: usize = 1;

const MS_PER_DAY: i64 = 86_400_000;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: {message}")]
    Invariant { row: usize, message: String },
    #[error("trading day needs at least 2 snapshots, got {0}")]
    TooShort(usize),
    #[error("normalizer needs exactly 3 prior days, got {0}")]
    WrongDayCount(usize),
    #[error("feature extractor produced no vectors")]
    EmptyFeatures,
    #[error("feature length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// One visible price level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Level {
    pub price: f64,
    pub qty: f64,
}

impl Level {
    pub fn new(price: f64, qty: f64) -> Self {
        Self { price, qty }
    }

    pub fn notional(&self) -> f64 {
        self.price * self.qty
    }
}

/// Timestamped two-sided book state with inter-snapshot flow aggregates.
///
/// Flow arrays are indexed `[side][level]` with [`BID`]/[`ASK`] and hold
/// currency notionals accumulated since the previous snapshot. Market flow on
/// the bid side is seller-initiated (it hits bids); on the ask side it is
/// buyer-initiated.
#[derive(Debug, Clone, PartialEq)]
pub struct LobSnapshot {
    pub timestamp: i64,
    pub bids: [Level; LEVELS],
    pub asks: [Level; LEVELS],
    pub cancel_notional: [[f64; LEVELS]; 2],
    pub limit_notional: [[f64; LEVELS]; 2],
    pub market_notional: [[f64; LEVELS]; 2],
    pub buy_notional: f64,
    pub sell_notional: f64,
}

impl LobSnapshot {
    /// A snapshot with the given books and no flow.
    pub fn quiet(timestamp: i64, bids: [Level; LEVELS], asks: [Level; LEVELS]) -> Self {
        Self {
            timestamp,
            bids,
            asks,
            cancel_notional: [[0.0; LEVELS]; 2],
            limit_notional: [[0.0; LEVELS]; 2],
            market_notional: [[0.0; LEVELS]; 2],
            buy_notional: 0.0,
            sell_notional: 0.0,
        }
    }

    /// Evenly spaced book around `best_bid`/`best_ask` with a flat quantity.
    pub fn ladder(timestamp: i64, best_bid: f64, best_ask: f64, tick: f64, qty: f64) -> Self {
        let bids = std::array::from_fn(|i| Level::new(best_bid - tick * i as f64, qty));
        let asks = std::array::from_fn(|i| Level::new(best_ask + tick * i as f64, qty));
        Self::quiet(timestamp, bids, asks)
    }

    pub fn best_bid(&self) -> f64 {
        self.bids[0].price
    }

    pub fn best_ask(&self) -> f64 {
        self.asks[0].price
    }

    pub fn midpoint(&self) -> f64 {
        (self.bids[0].price + self.asks[0].price) * 0.5
    }

    pub fn spread(&self) -> f64 {
        self.asks[0].price - self.bids[0].price
    }

    /// Checks the book and flow invariants, returning a description of the
    /// first violation.
    pub fn check(&self) -> Result<(), String> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        for i in 0..LEVELS {
            let (b, a) = (self.bids[i], self.asks[i]);
            if !b.price.is_finite() || !a.price.is_finite() || b.price <= 0.0 || a.price <= 0.0 {
                return Err(format!("non-positive or non-finite price at level {i}"));
            }
            if !finite_nonneg(b.qty) || !finite_nonneg(a.qty) {
                return Err(format!("negative or non-finite quantity at level {i}"));
            }
            if i > 0 {
                if b.price >= self.bids[i - 1].price {
                    return Err(format!("bid prices not strictly decreasing at level {i}"));
                }
                if a.price <= self.asks[i - 1].price {
                    return Err(format!("ask prices not strictly increasing at level {i}"));
                }
            }
        }
        if self.best_bid() >= self.best_ask() {
            return Err(format!(
                "crossed book: best bid {} >= best ask {}",
                self.best_bid(),
                self.best_ask()
            ));
        }
        let flows = [&self.cancel_notional, &self.limit_notional, &self.market_notional];
        if !flows.iter().flat_map(|f| f.iter().flatten()).all(|&v| finite_nonneg(v)) {
            return Err("negative or non-finite flow notional".into());
        }
        if !finite_nonneg(self.buy_notional) || !finite_nonneg(self.sell_notional) {
            return Err("negative or non-finite trade notional".into());
        }
        Ok(())
    }
}

/// An ordered, validated sequence of snapshots within one UTC date.
#[derive(Debug, Clone, PartialEq)]
pub struct TradingDay {
    date: NaiveDate,
    snapshots: Vec<LobSnapshot>,
}

impl TradingDay {
    /// Validates every snapshot and the day-level ordering invariants. The
    /// date is taken from the first timestamp. Row numbers in errors are
    /// 1-based snapshot positions.
    pub fn new(snapshots: Vec<LobSnapshot>) -> Result<Self, DataError> {
        if snapshots.len() < 2 {
            return Err(DataError::TooShort(snapshots.len()));
        }
        let date = utc_date(snapshots[0].timestamp).ok_or_else(|| DataError::Invariant {
            row: 1,
            message: "timestamp out of range".into(),
        })?;
        let day_start = date
            .and_hms_opt(0, 0, 0)
            .expect("midnight is valid")
            .and_utc()
            .timestamp_millis();
        for (i, s) in snapshots.iter().enumerate() {
            let row = i + 1;
            s.check().map_err(|message| DataError::Invariant { row, message })?;
            if s.timestamp < day_start || s.timestamp >= day_start + MS_PER_DAY {
                return Err(DataError::Invariant {
                    row,
                    message: format!("timestamp {} outside UTC date {date}", s.timestamp),
                });
            }
            if i > 0 && s.timestamp <= snapshots[i - 1].timestamp {
                return Err(DataError::Invariant {
                    row,
                    message: "timestamps not strictly increasing".into(),
                });
            }
        }
        Ok(Self { date, snapshots })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn snapshots(&self) -> &[LobSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn first_midpoint(&self) -> f64 {
        self.snapshots[0].midpoint()
    }

    pub fn last_midpoint(&self) -> f64 {
        self.snapshots[self.snapshots.len() - 1].midpoint()
    }
}

fn utc_date(ts_ms: i64) -> Option<NaiveDate> {
    DateTime::from_timestamp_millis(ts_ms).map(|t| t.date_naive())
}

/// Milliseconds since the epoch of `date` at midnight UTC.
pub fn day_start_ms(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight is valid")
        .and_utc()
        .timestamp_millis()
}
