//! Reward functions over a per-snapshot [`RewardContext`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Denominator floor for the differential Sharpe ratio, applied to the
/// variance estimate `B - A^2`.
pub const DSR_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
#[error("unknown reward function {0:?}; expected one of: {names}", names = RewardFn::NAMES.join(", "))]
pub struct UnknownReward(pub String);

/// Inputs shared by every reward function for one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardContext {
    /// Signed inventory in lots.
    pub inv: f64,
    /// Simple midpoint return since the previous snapshot.
    pub dm: f64,
    /// PnL realized during this snapshot, net of fees.
    pub rpnl_step: f64,
    pub rpnl_total: f64,
    pub rpnl_prev: f64,
    /// Limit orders completely filled during this snapshot.
    pub matched_count: usize,
    /// `m / best_bid - 1`.
    pub half_spread: f64,
}

impl RewardContext {
    /// Inventory times midpoint return.
    pub fn upnl(&self) -> f64 {
        self.inv * self.dm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Dampening applied to unrealized PnL in the asymmetric rewards.
    pub eta_damp: f64,
    /// Ceiling on realized gains.
    pub kappa: f64,
    /// Profit target multiplier for trade completion.
    pub epsilon_tc: f64,
    /// Loss threshold for trade completion.
    pub varpi: f64,
    /// EMA rate of the differential Sharpe ratio moments.
    pub dsr_eta: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            eta_damp: 0.35,
            kappa: 0.0015,
            epsilon_tc: 2.0,
            varpi: 0.00075,
            dsr_eta: 0.01,
        }
    }
}

/// Exponential moment estimates for the differential Sharpe ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DsrState {
    pub a: f64,
    pub b: f64,
}

pub fn upnl(ctx: &RewardContext) -> f64 {
    ctx.upnl()
}

pub fn upnl_with_fills(ctx: &RewardContext) -> f64 {
    ctx.upnl() + ctx.rpnl_step
}

/// Dampened downside only, realized PnL, plus half the spread per fill.
pub fn asym(ctx: &RewardContext, p: &RewardParams) -> f64 {
    let psi = ctx.matched_count as f64 * ctx.half_spread;
    (p.eta_damp * ctx.upnl()).min(0.0) + ctx.rpnl_step + psi
}

/// Dampened downside only plus realized PnL capped at `kappa`.
pub fn asym_ceiling(ctx: &RewardContext, p: &RewardParams) -> f64 {
    (p.eta_damp * ctx.upnl()).min(0.0) + ctx.rpnl_step.min(p.kappa)
}

pub fn realized_pnl_change(ctx: &RewardContext) -> f64 {
    ctx.rpnl_total - ctx.rpnl_prev
}

/// +1 at or above the profit target, -1 at or below the loss threshold,
/// otherwise the realized PnL itself.
pub fn trade_completion(ctx: &RewardContext, p: &RewardParams) -> f64 {
    let r = ctx.rpnl_step;
    if r >= p.epsilon_tc * p.varpi {
        1.0
    } else if r <= -p.varpi {
        -1.0
    } else {
        r
    }
}

/// Differential Sharpe ratio of return `r` against the previous moments,
/// and the updated moments.
pub fn differential_sharpe(r: f64, state: DsrState, eta: f64) -> (f64, DsrState) {
    let DsrState { a, b } = state;
    let da = r - a;
    let db = r * r - b;
    let var = b - a * a;
    let dsr = if var > DSR_VARIANCE_FLOOR {
        (b * da - 0.5 * a * db) / var.powf(1.5)
    } else {
        0.0
    };
    (
        dsr,
        DsrState {
            a: a + eta * da,
            b: b + eta * db,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardFn {
    Upnl,
    UpnlFills,
    Asym,
    AsymCeiling,
    RpnlChange,
    TradeCompletion,
    Dsr,
}

impl RewardFn {
    pub const ALL: [RewardFn; 7] = [
        RewardFn::Upnl,
        RewardFn::UpnlFills,
        RewardFn::Asym,
        RewardFn::AsymCeiling,
        RewardFn::RpnlChange,
        RewardFn::TradeCompletion,
        RewardFn::Dsr,
    ];

    pub const NAMES: [&'static str; 7] = [
        "upnl",
        "upnl_fills",
        "asym",
        "asym_ceiling",
        "rpnl_change",
        "trade_completion",
        "dsr",
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

impl fmt::Display for RewardFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardFn {
    type Err = UnknownReward;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Self::NAMES
            .iter()
            .position(|n| *n == key)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| UnknownReward(s.to_string()))
    }
}

/// A reward function together with its parameters and running state.
#[derive(Debug, Clone)]
pub struct Reward {
    pub kind: RewardFn,
    pub params: RewardParams,
    dsr: DsrState,
}

impl Reward {
    pub fn new(kind: RewardFn, params: RewardParams) -> Self {
        Self {
            kind,
            params,
            dsr: DsrState::default(),
        }
    }

    pub fn reset(&mut self) {
        self.dsr = DsrState::default();
    }

    pub fn dsr_state(&self) -> DsrState {
        self.dsr
    }

    pub fn evaluate(&mut self, ctx: &RewardContext) -> f64 {
        let p = &self.params;
        match self.kind {
            RewardFn::Upnl => upnl(ctx),
            RewardFn::UpnlFills => upnl_with_fills(ctx),
            RewardFn::Asym => asym(ctx, p),
            RewardFn::AsymCeiling => asym_ceiling(ctx, p),
            RewardFn::RpnlChange => realized_pnl_change(ctx),
            RewardFn::TradeCompletion => trade_completion(ctx, p),
            RewardFn::Dsr => {
                let (r, next) = differential_sharpe(ctx.upnl(), self.dsr, p.dsr_eta);
                self.dsr = next;
                r
            }
        }
    }
}
