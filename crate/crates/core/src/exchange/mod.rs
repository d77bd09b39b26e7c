//! Deterministic execution simulator for a single market maker.
//!
//! The agent holds at most one limit order per side. A new order joins the
//! back of its price level: the level's resting notional at placement is the
//! queue ahead of it, and only aggressive flow at or through the order price
//! depletes that queue before the order itself fills. Completed fills become
//! equal-sized inventory lots which are netted FIFO; realized PnL is kept in
//! fractional (percentage) terms, net of fees on both legs.

mod action;
mod log;

pub use action::{decode_action, quote_levels, Action, Instruction, QuoteTarget, N_ACTIONS};
pub use log::{trade_log_header, write_trade_log};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{LobSnapshot, ASK, BID, LEVELS};

#[derive(Debug, Error, PartialEq)]
pub enum ExchangeError {
    #[error("unknown action id {0}, expected 1..=17")]
    UnknownAction(u8),
    #[error("price level {0} out of range")]
    LevelOutOfRange(usize),
}

/// Fees as a fraction of notional; negative is a rebate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeSchedule {
    pub maker: f64,
    pub taker: f64,
}

impl Default for FeeSchedule {
    fn default() -> Self {
        Self {
            maker: -0.00025,
            taker: 0.00075,
        }
    }
}

impl FeeSchedule {
    pub fn rate(&self, role: Role) -> f64 {
        match role {
            Role::Maker => self.maker,
            Role::Taker => self.taker,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeConfig {
    /// Units per order; every lot has this size.
    pub order_size: f64,
    /// Maximum inventory in lots.
    pub max_inventory: usize,
    pub fees: FeeSchedule,
    /// Per-transaction adverse price adjustment when flattening.
    pub slippage: f64,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            order_size: 1.0,
            max_inventory: 10,
            fees: FeeSchedule::default(),
            slippage: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    fn book_index(self) -> usize {
        match self {
            Side::Bid => BID,
            Side::Ask => ASK,
        }
    }

    fn trade(self) -> TradeSide {
        match self {
            Side::Bid => TradeSide::Buy,
            Side::Ask => TradeSide::Sell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TradeSide {
    Buy,
    Sell,
}

impl TradeSide {
    pub fn as_str(self) -> &'static str {
        match self {
            TradeSide::Buy => "buy",
            TradeSide::Sell => "sell",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Maker,
    Taker,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Maker => "maker",
            Role::Taker => "taker",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LotSide {
    Long,
    Short,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenOrder {
    pub side: Side,
    pub price: f64,
    pub size: f64,
    /// Notional resting ahead of the order.
    pub queue_ahead: f64,
    /// Units filled so far.
    pub executed: f64,
    pub level_at_placement: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryLot {
    pub side: LotSide,
    pub entry_price: f64,
    pub quantity: f64,
    pub entry_time: i64,
    /// Fee rate of the opening leg, charged when the lot is closed.
    pub entry_fee: f64,
}

/// One execution as recorded in the trade log.
#[derive(Debug, Clone, PartialEq)]
pub struct Fill {
    pub ts_ms: i64,
    pub action_id: u8,
    pub side: TradeSide,
    pub price: f64,
    pub qty: f64,
    pub role: Role,
    /// Fee rate of this leg scaled by its size in lots.
    pub fee: f64,
    /// PnL realized by the lots this fill closed.
    pub rpnl: f64,
    /// Signed inventory in lots after the fill.
    pub inventory_after: f64,
}

#[derive(Debug, Clone)]
pub struct ExchangeState {
    cfg: ExchangeConfig,
    open_bid: Option<OpenOrder>,
    open_ask: Option<OpenOrder>,
    long: VecDeque<InventoryLot>,
    short: VecDeque<InventoryLot>,
    realized_pnl: f64,
    step_realized: f64,
    executions_this_step: usize,
    fees_paid: f64,
    current_action: u8,
}

impl ExchangeState {
    pub fn new(cfg: ExchangeConfig) -> Self {
        Self {
            cfg,
            open_bid: None,
            open_ask: None,
            long: VecDeque::new(),
            short: VecDeque::new(),
            realized_pnl: 0.0,
            step_realized: 0.0,
            executions_this_step: 0,
            fees_paid: 0.0,
            current_action: Action::NO_ACTION.id(),
        }
    }

    pub fn config(&self) -> &ExchangeConfig {
        &self.cfg
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.cfg);
    }

    fn eps(&self) -> f64 {
        1e-12 * self.cfg.order_size
    }

    /// Clears the per-snapshot realized PnL and execution counters.
    pub fn begin_snapshot(&mut self) {
        self.step_realized = 0.0;
        self.executions_this_step = 0;
    }

    pub fn open_order(&self, side: Side) -> Option<&OpenOrder> {
        match side {
            Side::Bid => self.open_bid.as_ref(),
            Side::Ask => self.open_ask.as_ref(),
        }
    }

    fn slot(&mut self, side: Side) -> &mut Option<OpenOrder> {
        match side {
            Side::Bid => &mut self.open_bid,
            Side::Ask => &mut self.open_ask,
        }
    }

    pub fn lots(&self, side: LotSide) -> &VecDeque<InventoryLot> {
        match side {
            LotSide::Long => &self.long,
            LotSide::Short => &self.short,
        }
    }

    /// Long inventory in lots.
    pub fn long_lots(&self) -> f64 {
        self.long.iter().map(|l| l.quantity).sum::<f64>() / self.cfg.order_size
    }

    /// Short inventory in lots.
    pub fn short_lots(&self) -> f64 {
        self.short.iter().map(|l| l.quantity).sum::<f64>() / self.cfg.order_size
    }

    /// Signed inventory in lots, positive when long.
    pub fn net_lots(&self) -> f64 {
        self.long_lots() - self.short_lots()
    }

    fn net_units(&self) -> f64 {
        self.long.iter().map(|l| l.quantity).sum::<f64>() - self.short.iter().map(|l| l.quantity).sum::<f64>()
    }

    pub fn is_flat(&self) -> bool {
        self.long.is_empty() && self.short.is_empty()
    }

    pub fn realized_pnl(&self) -> f64 {
        self.realized_pnl
    }

    pub fn step_realized(&self) -> f64 {
        self.step_realized
    }

    /// Limit orders completely filled since [`begin_snapshot`](Self::begin_snapshot).
    pub fn executions_this_step(&self) -> usize {
        self.executions_this_step
    }

    pub fn fees_paid(&self) -> f64 {
        self.fees_paid
    }

    /// Quantity-weighted average entry price of one side's lots.
    pub fn average_price(&self, side: LotSide) -> Option<f64> {
        let lots = self.lots(side);
        let qty: f64 = lots.iter().map(|l| l.quantity).sum();
        (qty > 0.0).then(|| lots.iter().map(|l| l.entry_price * l.quantity).sum::<f64>() / qty)
    }

    /// Unrealized PnL of the open position against `mid`, netting the long
    /// and short average prices.
    pub fn unrealized_pnl(&self, mid: f64) -> f64 {
        let short = self.average_price(LotSide::Short).map_or(0.0, |p| p / mid - 1.0);
        let long = self.average_price(LotSide::Long).map_or(0.0, |p| mid / p - 1.0);
        short + long
    }

    /// Realized PnL plus every open lot marked at `mid`, weighted by lot size.
    pub fn mark_to_market(&self, mid: f64) -> f64 {
        let sz = self.cfg.order_size;
        let long: f64 = self
            .long
            .iter()
            .map(|l| l.quantity / sz * (mid - l.entry_price) / l.entry_price)
            .sum();
        let short: f64 = self
            .short
            .iter()
            .map(|l| l.quantity / sz * (l.entry_price - mid) / mid)
            .sum();
        self.realized_pnl + long + short
    }

    /// Whether a full fill on `side` would push inventory past the limit.
    pub fn at_capacity(&self, side: Side) -> bool {
        let cap = self.cfg.max_inventory as f64 * self.cfg.order_size;
        let net = self.net_units();
        match side {
            Side::Bid => net + self.cfg.order_size > cap + self.eps(),
            Side::Ask => net - self.cfg.order_size < -cap - self.eps(),
        }
    }

    /// Applies one agent action at `snapshot`.
    pub fn apply_action(&mut self, action: Action, snapshot: &LobSnapshot) -> Vec<Fill> {
        self.current_action = action.id();
        match decode_action(action, snapshot) {
            Instruction::Hold => Vec::new(),
            Instruction::Quote { bid, ask } => {
                let mut fills = Vec::new();
                for (side, target) in [(Side::Bid, bid), (Side::Ask, ask)] {
                    // Levels come from the decoded table and are always in range.
                    if let Ok(Some(f)) = self.place_or_modify(side, target.level, snapshot) {
                        fills.push(f);
                    }
                }
                fills
            }
            Instruction::Flatten => self.flatten_all(snapshot),
        }
    }

    /// Places or moves the order on `side` to `level` of `snapshot`.
    ///
    /// Reposting at the same price keeps queue priority. Moving a partially
    /// filled order books the filled units as inventory (the returned fill)
    /// and re-queues the remainder behind the new level's resting notional.
    /// A side whose full fill would exceed the inventory limit is not quoted
    /// and any order on it is cancelled.
    pub fn place_or_modify(
        &mut self,
        side: Side,
        level: usize,
        snapshot: &LobSnapshot,
    ) -> Result<Option<Fill>, ExchangeError> {
        if level >= LEVELS {
            return Err(ExchangeError::LevelOutOfRange(level));
        }
        if self.at_capacity(side) {
            return Ok(self.cancel(side, snapshot.timestamp));
        }
        let book = match side {
            Side::Bid => &snapshot.bids,
            Side::Ask => &snapshot.asks,
        };
        let target = book[level];
        if let Some(o) = self.open_order(side) {
            if o.price == target.price {
                return Ok(None);
            }
        }
        let converted = self.cancel(side, snapshot.timestamp);
        *self.slot(side) = Some(OpenOrder {
            side,
            price: target.price,
            size: self.cfg.order_size,
            queue_ahead: target.notional(),
            executed: 0.0,
            level_at_placement: level,
        });
        Ok(converted)
    }

    /// Removes the order on `side`; filled units become inventory.
    pub fn cancel(&mut self, side: Side, ts_ms: i64) -> Option<Fill> {
        let order = self.slot(side).take()?;
        (order.executed > self.eps())
            .then(|| self.execute(side.trade(), order.price, order.executed, Role::Maker, ts_ms))
    }

    /// Matches open orders against the aggressive flow in `snapshot`.
    pub fn match_step(&mut self, snapshot: &LobSnapshot) -> Vec<Fill> {
        let mut fills = Vec::new();
        for side in [Side::Bid, Side::Ask] {
            let cap_room = self.fill_room(side);
            let eps = self.eps();
            let Some(order) = self.slot(side).as_mut() else {
                continue;
            };
            let flow = aggressive_flow(snapshot, side, order.price);
            if flow <= 0.0 {
                continue;
            }
            let depleted = order.queue_ahead.min(flow);
            order.queue_ahead -= depleted;
            let left = flow - depleted;
            if left <= 0.0 {
                continue;
            }
            let room = (cap_room - order.executed).max(0.0);
            let units = (left / order.price).min(order.size - order.executed).min(room);
            if units <= eps {
                continue;
            }
            order.executed += units;
            if order.executed >= order.size - eps {
                let done = self.slot(side).take().expect("order present");
                self.executions_this_step += 1;
                fills.push(self.execute(side.trade(), done.price, done.size, Role::Maker, snapshot.timestamp));
            }
        }
        fills
    }

    /// Units a fill on `side` may add before the inventory limit binds.
    fn fill_room(&self, side: Side) -> f64 {
        let cap = self.cfg.max_inventory as f64 * self.cfg.order_size;
        let net = self.net_units();
        match side {
            Side::Bid => cap - net,
            Side::Ask => cap + net,
        }
    }

    /// Cancels both orders and closes every lot at market, oldest first, with
    /// the price worsening by the slippage factor on each successive lot.
    pub fn flatten_all(&mut self, snapshot: &LobSnapshot) -> Vec<Fill> {
        let ts = snapshot.timestamp;
        let mut fills: Vec<Fill> = [Side::Bid, Side::Ask]
            .into_iter()
            .filter_map(|s| self.cancel(s, ts))
            .collect();
        let mid = snapshot.midpoint();
        let xi = self.cfg.slippage;
        let mut price = mid;
        while let Some(lot) = self.long.front() {
            price *= 1.0 - xi;
            let qty = lot.quantity;
            fills.push(self.execute(TradeSide::Sell, price, qty, Role::Taker, ts));
        }
        let mut price = mid;
        while let Some(lot) = self.short.front() {
            price *= 1.0 + xi;
            let qty = lot.quantity;
            fills.push(self.execute(TradeSide::Buy, price, qty, Role::Taker, ts));
        }
        fills
    }

    /// Books an execution: nets opposing lots FIFO, realizing PnL net of
    /// both legs' fees, and opens a lot with any remainder.
    pub fn execute(&mut self, side: TradeSide, price: f64, qty: f64, role: Role, ts_ms: i64) -> Fill {
        let sz = self.cfg.order_size;
        let eps = self.eps();
        let exit_fee = self.cfg.fees.rate(role);
        let (opposite, same, lot_side) = match side {
            TradeSide::Buy => (&mut self.short, &mut self.long, LotSide::Long),
            TradeSide::Sell => (&mut self.long, &mut self.short, LotSide::Short),
        };
        let mut remaining = qty;
        let mut realized = 0.0;
        let mut fees = 0.0;
        while remaining > eps {
            let Some(front) = opposite.front_mut() else {
                break;
            };
            let matched = front.quantity.min(remaining);
            let weight = matched / sz;
            let fee = front.entry_fee + exit_fee;
            let leg = match side {
                // closing a long: sold at `price`, bought at entry
                TradeSide::Sell => ((price - front.entry_price) - fee * front.entry_price) / front.entry_price,
                // covering a short
                TradeSide::Buy => ((front.entry_price - price) - fee * price) / price,
            };
            realized += weight * leg;
            fees += weight * fee;
            front.quantity -= matched;
            remaining -= matched;
            if front.quantity <= eps {
                opposite.pop_front();
            }
        }
        if remaining > eps {
            same.push_back(InventoryLot {
                side: lot_side,
                entry_price: price,
                quantity: remaining,
                entry_time: ts_ms,
                entry_fee: exit_fee,
            });
        }
        self.realized_pnl += realized;
        self.step_realized += realized;
        self.fees_paid += fees;
        Fill {
            ts_ms,
            action_id: self.current_action,
            side,
            price,
            qty,
            role,
            fee: qty / sz * exit_fee,
            rpnl: realized,
            inventory_after: self.net_lots(),
        }
    }
}

/// Market notional that traded at or through `price` against `side`:
/// sells at or below a bid, buys at or above an ask.
fn aggressive_flow(s: &LobSnapshot, side: Side, price: f64) -> f64 {
    let idx = side.book_index();
    match side {
        Side::Bid => (0..LEVELS)
            .filter(|&i| s.bids[i].price <= price)
            .map(|i| s.market_notional[idx][i])
            .sum(),
        Side::Ask => (0..LEVELS)
            .filter(|&i| s.asks[i].price >= price)
            .map(|i| s.market_notional[idx][i])
            .sum(),
    }
}

#[cfg(test)]
mod tests;
