//! Synthetic per-second trading days.
//!
//! The midpoint follows a mean-reverting walk in log space, snapped to the
//! tick grid. Each second every visible level receives independent market,
//! cancel and limit flow and its quantity is updated from that flow, so the
//! emitted quantities and flow aggregates always reconcile.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{day_start_ms, Level, LobSnapshot, TradingDay, ASK, BID, LEVELS};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub date: NaiveDate,
    /// Seconds simulated; one snapshot per second minus gaps.
    pub seconds: u32,
    /// Probability that a second's snapshot is missing.
    pub gap_prob: f64,
    pub start_price: f64,
    pub tick: f64,
    pub spread_ticks: u32,
    /// Per-second standard deviation of the latent log midpoint.
    pub volatility: f64,
    /// Per-second pull of the latent log midpoint toward the day's opening price.
    pub mean_reversion: f64,
    /// Per-second drift of the latent log midpoint.
    pub drift: f64,
    /// Mean units resting on a newly exposed level.
    pub level_qty: f64,
    pub min_qty: f64,
    /// Probability of a market print on level 0 in one second; deeper levels
    /// scale by `trade_decay` per level.
    pub trade_prob: f64,
    pub trade_decay: f64,
    /// Mean notional of one market print (exponentially distributed).
    pub trade_notional: f64,
    pub limit_prob: f64,
    pub limit_notional: f64,
    pub cancel_prob: f64,
    /// A cancel removes a uniform fraction in `[0, cancel_frac)` of the level.
    pub cancel_frac: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            date: NaiveDate::from_ymd_opt(2020, 1, 4).expect("valid date"),
            seconds: 86_400,
            gap_prob: 10.0 / 86_400.0,
            start_price: 8000.0,
            tick: 0.5,
            spread_ticks: 1,
            volatility: 3.0e-5,
            mean_reversion: 0.0,
            drift: 0.0,
            level_qty: 2.0,
            min_qty: 0.05,
            trade_prob: 0.25,
            trade_decay: 0.6,
            trade_notional: 2_000.0,
            limit_prob: 0.3,
            limit_notional: 3_000.0,
            cancel_prob: 0.1,
            cancel_frac: 0.2,
        }
    }
}

impl SynthParams {
    /// Probability of a market print at `level` in one second.
    pub fn trade_prob_at(&self, level: usize) -> f64 {
        self.trade_prob * self.trade_decay.powi(level as i32)
    }

    fn validate(&self) {
        assert!(self.seconds >= 2, "need at least two seconds");
        assert!(self.seconds <= 86_400, "a day has at most 86,400 seconds");
        assert!(self.tick > 0.0 && self.start_price > 0.0, "prices must be positive");
        assert!(self.spread_ticks >= 1, "spread must be at least one tick");
        assert!(self.volatility >= 0.0 && self.mean_reversion >= 0.0);
        assert!(self.min_qty > 0.0 && self.level_qty > 0.0);
        assert!((0.0..1.0).contains(&self.gap_prob));
    }
}

struct Book {
    bid_ticks: i64,
    bid_qty: [f64; LEVELS],
    ask_qty: [f64; LEVELS],
    flows: Flows,
}

#[derive(Clone, Copy, Default)]
struct Flows {
    cancel: [[f64; LEVELS]; 2],
    limit: [[f64; LEVELS]; 2],
    market: [[f64; LEVELS]; 2],
}

impl Book {
    fn price(&self, side: usize, level: usize, p: &SynthParams) -> f64 {
        let t = match side {
            BID => self.bid_ticks - level as i64,
            _ => self.bid_ticks + p.spread_ticks as i64 + level as i64,
        };
        t as f64 * p.tick
    }

    fn qty_mut(&mut self, side: usize) -> &mut [f64; LEVELS] {
        if side == BID {
            &mut self.bid_qty
        } else {
            &mut self.ask_qty
        }
    }

    /// Moves the best bid to `new_bid` ticks, shifting both ladders and their
    /// pending flow. Newly exposed levels get fresh liquidity, recorded as
    /// limit flow.
    fn shift_to(&mut self, new_bid: i64, p: &SynthParams, rng: &mut ChaCha8Rng) {
        let k = new_bid - self.bid_ticks;
        if k == 0 {
            return;
        }
        // A bid move of +k ticks shifts bid levels deeper by k and ask levels
        // shallower by k.
        for (side, offset) in [(BID, k), (ASK, -k)] {
            let old_qty = *self.qty_mut(side);
            let old_flow = (self.flows.cancel[side], self.flows.limit[side], self.flows.market[side]);
            for j in 0..LEVELS {
                let src = j as i64 - offset;
                if (0..LEVELS as i64).contains(&src) {
                    let s = src as usize;
                    self.qty_mut(side)[j] = old_qty[s];
                    self.flows.cancel[side][j] = old_flow.0[s];
                    self.flows.limit[side][j] = old_flow.1[s];
                    self.flows.market[side][j] = old_flow.2[s];
                } else {
                    self.qty_mut(side)[j] = f64::NAN;
                    self.flows.cancel[side][j] = 0.0;
                    self.flows.limit[side][j] = 0.0;
                    self.flows.market[side][j] = 0.0;
                }
            }
        }
        self.bid_ticks = new_bid;
        for side in [BID, ASK] {
            for j in 0..LEVELS {
                if self.qty_mut(side)[j].is_nan() {
                    let q = p.min_qty + p.level_qty * rng.random_range(0.5..1.5);
                    self.qty_mut(side)[j] = q;
                    self.flows.limit[side][j] += q * self.price(side, j, p);
                }
            }
        }
    }

    fn add_flow(&mut self, p: &SynthParams, rng: &mut ChaCha8Rng) {
        for side in [BID, ASK] {
            for j in 0..LEVELS {
                let px = self.price(side, j, p);
                let mut notional = self.qty_mut(side)[j] * px;

                let market = if rng.random_bool(p.trade_prob_at(j).clamp(0.0, 1.0)) {
                    let e: f64 = Exp1.sample(rng);
                    e * p.trade_notional
                } else {
                    0.0
                };
                notional -= market;

                let cancel = if rng.random_bool(p.cancel_prob) {
                    notional.max(0.0) * rng.random_range(0.0..p.cancel_frac)
                } else {
                    0.0
                };
                notional -= cancel;

                let mut limit = if rng.random_bool(p.limit_prob) {
                    let e: f64 = Exp1.sample(rng);
                    e * p.limit_notional
                } else {
                    0.0
                };
                notional += limit;

                let floor = p.min_qty * px;
                if notional < floor {
                    limit += floor - notional;
                    notional = floor;
                }
                self.qty_mut(side)[j] = notional / px;
                self.flows.market[side][j] += market;
                self.flows.cancel[side][j] += cancel;
                self.flows.limit[side][j] += limit;
            }
        }
    }

    fn emit(&mut self, ts: i64, p: &SynthParams) -> LobSnapshot {
        let bids = std::array::from_fn(|i| Level::new(self.price(BID, i, p), self.bid_qty[i]));
        let asks = std::array::from_fn(|i| Level::new(self.price(ASK, i, p), self.ask_qty[i]));
        let f = std::mem::take(&mut self.flows);
        LobSnapshot {
            timestamp: ts,
            bids,
            asks,
            cancel_notional: f.cancel,
            limit_notional: f.limit,
            market_notional: f.market,
            buy_notional: f.market[ASK].iter().sum(),
            sell_notional: f.market[BID].iter().sum(),
        }
    }
}

fn bid_ticks_for(mid: f64, p: &SynthParams) -> i64 {
    ((mid / p.tick) - p.spread_ticks as f64 * 0.5).round() as i64
}

/// Generates one deterministic trading day.
///
/// # Panics
/// On parameters outside their valid ranges (callers validate at parse time).
pub fn synth_day(seed: u64, params: &SynthParams) -> TradingDay {
    params.validate();
    let p = params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = p.start_price.ln();
    let mut log_mid = anchor;
    let mut book = Book {
        bid_ticks: bid_ticks_for(p.start_price, p),
        bid_qty: [0.0; LEVELS],
        ask_qty: [0.0; LEVELS],
        flows: Flows::default(),
    };
    for side in [BID, ASK] {
        for j in 0..LEVELS {
            book.qty_mut(side)[j] = p.min_qty + p.level_qty * rng.random_range(0.5..1.5);
        }
    }

    let t0 = day_start_ms(p.date);
    let mut snapshots = Vec::with_capacity(p.seconds as usize);
    for sec in 0..p.seconds {
        if sec > 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_mid += p.mean_reversion * (anchor - log_mid) + p.drift + p.volatility * z;
            let target = bid_ticks_for(log_mid.exp(), p).max(LEVELS as i64 + 1);
            book.shift_to(target, p, &mut rng);
        }
        book.add_flow(p, &mut rng);
        // The first and last seconds are always emitted so the day spans its range.
        let skip = sec > 0 && sec + 1 < p.seconds && rng.random_bool(p.gap_prob);
        if !skip {
            snapshots.push(book.emit(t0 + sec as i64 * 1000, p));
        }
    }
    TradingDay::new(snapshots).expect("generator output satisfies snapshot invariants")
}

/// Consecutive days; each day opens at the previous day's closing midpoint.
pub fn synth_days(seed: u64, params: &SynthParams, count: usize) -> Vec<TradingDay> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let day = synth_day(seeder.random(), &p);
        p.start_price = day.last_midpoint();
        p.date = p.date.succ_opt().expect("date in range");
        out.push(day);
    }
    out
}
