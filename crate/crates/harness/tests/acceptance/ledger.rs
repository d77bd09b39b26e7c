use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lobmm_core::env::{EnvConfig, Environment, EventMode, HistoryCadence};
use lobmm_core::exchange::{Action, ExchangeConfig, ExchangeState, Fill, Role, Side, TradeSide, N_ACTIONS};
use lobmm_core::features::{FeatureSet, ENV_DIM};
use lobmm_core::market_data::{synth_day, LobSnapshot, NormalizationStats, SynthParams, ASK, BID};

use crate::{ensure, Outcome};

/// One open position unit in the replayer: +1 long, -1 short.
struct Lot {
    dir: f64,
    price: f64,
    qty: f64,
    fee_rate: f64,
}

/// Recomputes realized PnL from a trade log by scanning every open lot for
/// the oldest one facing the fill.
struct Replayer {
    cfg: ExchangeConfig,
    lots: Vec<Lot>,
    realized: f64,
}

impl Replayer {
    fn new(cfg: ExchangeConfig) -> Self {
        Self {
            cfg,
            lots: Vec::new(),
            realized: 0.0,
        }
    }

    fn rate(&self, role: Role) -> f64 {
        match role {
            Role::Maker => self.cfg.fees.maker,
            Role::Taker => self.cfg.fees.taker,
        }
    }

    fn net_lots(&self) -> f64 {
        self.lots.iter().map(|l| l.dir * l.qty).sum::<f64>() / self.cfg.order_size
    }

    /// Realized PnL of one fill.
    fn apply(&mut self, f: &Fill) -> f64 {
        let dir = match f.side {
            TradeSide::Buy => 1.0,
            TradeSide::Sell => -1.0,
        };
        let rate = self.rate(f.role);
        let eps = 1e-12 * self.cfg.order_size;
        let mut left = f.qty;
        let mut pnl = 0.0;
        while left > eps {
            let Some(i) = self.lots.iter().position(|l| l.dir == -dir) else {
                break;
            };
            let lot = &mut self.lots[i];
            let q = lot.qty.min(left);
            let fees = lot.fee_rate + rate;
            let per_unit = if dir < 0.0 {
                (f.price - lot.price - fees * lot.price) / lot.price
            } else {
                (lot.price - f.price - fees * f.price) / f.price
            };
            pnl += q / self.cfg.order_size * per_unit;
            lot.qty -= q;
            left -= q;
            if lot.qty <= eps {
                self.lots.remove(i);
            }
        }
        if left > eps {
            self.lots.push(Lot {
                dir,
                price: f.price,
                qty: left,
                fee_rate: rate,
            });
        }
        self.realized += pnl;
        pnl
    }
}

fn day_params(i: u64) -> SynthParams {
    let base = SynthParams {
        date: SynthParams::default().date + chrono::Days::new(i),
        seconds: 1_200,
        ..SynthParams::default()
    };
    match i % 3 {
        0 => base,
        1 => SynthParams {
            spread_ticks: 6,
            mean_reversion: 0.02,
            volatility: 1e-4,
            level_qty: 0.2,
            trade_prob: 0.6,
            trade_notional: 5_000.0,
            ..base
        },
        _ => SynthParams {
            volatility: 2e-4,
            level_qty: 0.5,
            trade_prob: 0.5,
            trade_notional: 4_000.0,
            ..base
        },
    }
}

pub fn random_episodes() -> Outcome {
    let stats = Arc::new(NormalizationStats::identity(ENV_DIM));
    let cfg = ExchangeConfig::default();
    let mut envs: Vec<Environment> = (0..6u64)
        .map(|i| {
            let env_cfg = EnvConfig {
                feature_set: FeatureSet::new(2).expect("set 2"),
                mode: if i % 2 == 0 {
                    EventMode::time()
                } else {
                    EventMode::price()
                },
                random_start: true,
                seed: i,
                warmup: 20,
                window: 1,
                cadence: HistoryCadence::Step,
                exchange: cfg,
                ..EnvConfig::default()
            };
            Environment::new(env_cfg, Arc::new(synth_day(40 + i, &day_params(i))), stats.clone()).expect("env")
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cap = cfg.max_inventory as f64;
    let (mut fills, mut round_trips, mut peak) = (0usize, 0usize, 0.0f64);
    for ep in 0..10_000 {
        let env = &mut envs[ep % 6];
        env.reset().expect("reset");
        // A per-episode flatten rate varies how long positions are held.
        let flatten_rate = rng.random_range(0.0..0.1);
        loop {
            let a = if rng.random_bool(flatten_rate) {
                Action::FLATTEN
            } else {
                Action::from_index(rng.random_range(0..N_ACTIONS - 1)).expect("valid")
            };
            let r = env.step(a).expect("step");
            ensure(r.info.inventory.abs() <= cap + 1e-9, || {
                format!("episode {ep}: inventory {} exceeds {cap}", r.info.inventory)
            })?;
            peak = peak.max(r.info.inventory.abs());
            if r.done {
                break;
            }
        }
        let mut replay = Replayer::new(cfg);
        for (i, f) in env.trade_log().iter().enumerate() {
            let pnl = replay.apply(f);
            ensure((pnl - f.rpnl).abs() <= 1e-10, || {
                format!("episode {ep} fill {i}: simulator {} vs replay {pnl}", f.rpnl)
            })?;
            let net = replay.net_lots();
            ensure((net - f.inventory_after).abs() <= 1e-9, || {
                format!("episode {ep} fill {i}: inventory {} vs replay {net}", f.inventory_after)
            })?;
            ensure(f.inventory_after.abs() <= cap + 1e-9, || {
                format!("episode {ep}: inventory over {cap}")
            })?;
            round_trips += usize::from(f.rpnl != 0.0);
        }
        fills += env.trade_log().len();
        let (sim, rep) = (env.exchange().realized_pnl(), replay.realized);
        ensure((sim - rep).abs() <= 1e-10, || {
            format!("episode {ep}: simulator RPnL {sim} vs replay {rep}")
        })?;
        ensure(env.exchange().is_flat() && replay.lots.is_empty(), || {
            format!("episode {ep}: not flat at the end")
        })?;
    }
    ensure(round_trips > 1_000, || {
        format!("only {round_trips} closing fills; the check is too weak")
    })?;
    Ok(format!(
        "10000 episodes, {fills} fills, {round_trips} closing, peak inventory {peak:.0}"
    ))
}

fn book(best_bid: f64, best_ask: f64) -> LobSnapshot {
    let mut s = LobSnapshot::ladder(0, best_bid, best_ask, 0.5, 1.0);
    s.bids[0].qty = 0.0;
    s.asks[0].qty = 0.0;
    s
}

pub fn scripted_round_trips() -> Outcome {
    let mut ex = ExchangeState::new(ExchangeConfig::default());

    // Maker in at 10000, maker out at 10010.
    let mut s = book(10_000.0, 10_001.0);
    ex.place_or_modify(Side::Bid, 0, &s).map_err(|e| e.to_string())?;
    s.market_notional[BID][0] = 20_000.0;
    let f = ex.match_step(&s);
    ensure(f.len() == 1 && f[0].role == Role::Maker, || {
        format!("entry fills {f:?}")
    })?;
    ex.begin_snapshot();
    let mut s = book(10_009.0, 10_010.0);
    ex.place_or_modify(Side::Ask, 0, &s).map_err(|e| e.to_string())?;
    s.market_notional[ASK][0] = 20_000.0;
    ex.match_step(&s);
    let maker = ex.step_realized();
    ensure(maker == 0.0015, || {
        format!("maker round trip realized {maker}, want 0.0015")
    })?;
    ensure(ex.is_flat(), || "position left open".into())?;

    // Maker in at 10000, flattened at a 10000 midpoint.
    let mut ex = ExchangeState::new(ExchangeConfig::default());
    let mut s = book(10_000.0, 10_001.0);
    ex.place_or_modify(Side::Bid, 0, &s).map_err(|e| e.to_string())?;
    s.market_notional[BID][0] = 20_000.0;
    ex.match_step(&s);
    ex.begin_snapshot();
    ex.apply_action(Action::FLATTEN, &book(9_999.75, 10_000.25));
    let flat = ex.step_realized();
    ensure(flat == -0.0006, || format!("flatten realized {flat}, want -0.0006"))?;
    Ok(format!("round trip {maker}, flatten {flat}"))
}
