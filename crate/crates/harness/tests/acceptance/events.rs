use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lobmm_core::env::{segment_price_events, EnvConfig, Environment, EventMode, HistoryCadence};
use lobmm_core::exchange::{Action, Fill, N_ACTIONS};
use lobmm_core::features::{FeatureSet, ENV_DIM};
use lobmm_core::market_data::{synth_day, NormalizationStats, SynthParams, TradingDay};
use lobmm_core::rewards::RewardFn;

use crate::{ensure, Outcome};

const BETA: f64 = 1e-4;

fn env_config(mode: EventMode, warmup: usize) -> EnvConfig {
    EnvConfig {
        feature_set: FeatureSet::new(2).expect("set 2"),
        mode,
        random_start: false,
        warmup,
        window: 1,
        cadence: HistoryCadence::Step,
        ..EnvConfig::default()
    }
}

fn identity() -> Arc<NormalizationStats> {
    Arc::new(NormalizationStats::identity(ENV_DIM))
}

/// Snapshot indices the price-event stepper starts and ends its steps at.
fn stepper_boundaries(day: Arc<TradingDay>) -> Vec<usize> {
    let mut env = Environment::new(env_config(EventMode::Price { beta: BETA }, 0), day, identity()).expect("env");
    env.reset().expect("reset");
    let mut boundaries = vec![env.cursor()];
    loop {
        let r = env.step(Action::NO_ACTION).expect("step");
        boundaries.push(r.info.cursor);
        if r.done {
            return boundaries;
        }
    }
}

pub fn price_event_equivalence() -> Outcome {
    let mut total_events = 0usize;
    for d in 0..50u64 {
        let params = SynthParams {
            date: SynthParams::default().date + chrono::Days::new(d),
            ..SynthParams::default()
        };
        let day = Arc::new(synth_day(1_000 + d, &params));
        let seg = segment_price_events(&day, BETA);
        let steps = stepper_boundaries(day.clone());
        ensure(steps == seg.boundaries, || {
            let at = steps.iter().zip(&seg.boundaries).position(|(a, b)| a != b);
            format!("day {d}: stepper and segmentation diverge at boundary {at:?}")
        })?;
        total_events += seg.events();
    }
    let mean = total_events as f64 / 50.0;
    ensure((2_000.0..=20_000.0).contains(&mean), || {
        format!("mean {mean:.0} events/day outside [2000, 20000]")
    })?;
    Ok(format!("50 days identical, mean {mean:.0} events/day"))
}

fn active_params(seed_offset: u64) -> SynthParams {
    SynthParams {
        date: SynthParams::default().date + chrono::Days::new(seed_offset),
        seconds: 3_000,
        spread_ticks: 4,
        volatility: 6e-5,
        mean_reversion: 0.01,
        level_qty: 0.3,
        trade_prob: 0.6,
        trade_notional: 4_000.0,
        ..SynthParams::default()
    }
}

fn fills_without_action(fills: &[Fill]) -> Vec<Fill> {
    fills
        .iter()
        .map(|f| Fill {
            action_id: 0,
            ..f.clone()
        })
        .collect()
}

pub fn mode_identity() -> Outcome {
    let warmup = 20;
    let mut trades = 0;
    for case in 0..10u64 {
        let day = Arc::new(synth_day(500 + case, &active_params(case)));
        let reward = RewardFn::ALL[case as usize % RewardFn::ALL.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(case);

        let mut price = Environment::new(
            EnvConfig {
                reward,
                ..env_config(EventMode::Price { beta: BETA }, warmup)
            },
            day.clone(),
            identity(),
        )
        .expect("env");
        price.reset().expect("reset");
        let mut script = Vec::new();
        let mut price_reward = 0.0;
        loop {
            let a = Action::from_index(rng.random_range(0..N_ACTIONS)).expect("valid");
            script.push((price.cursor(), a));
            let r = price.step(a).expect("step");
            price_reward += r.reward;
            if r.done {
                break;
            }
        }

        let mut time = Environment::new(
            EnvConfig {
                reward,
                ..env_config(EventMode::Time { action_repeats: 1 }, warmup)
            },
            day.clone(),
            identity(),
        )
        .expect("env");
        time.reset().expect("reset");
        let mut next = script.iter().peekable();
        let mut time_reward = 0.0;
        loop {
            let a = match next.peek() {
                Some((at, a)) if *at == time.cursor() => {
                    next.next();
                    *a
                }
                _ => Action::NO_ACTION,
            };
            let r = time.step(a).expect("step");
            time_reward += r.reward;
            if r.done {
                break;
            }
        }

        let (pp, tp) = (price.exchange().realized_pnl(), time.exchange().realized_pnl());
        ensure(pp == tp, || {
            format!("case {case}: price-mode PnL {pp} vs time-mode {tp}")
        })?;
        ensure(
            fills_without_action(price.trade_log()) == fills_without_action(time.trade_log()),
            || format!("case {case}: trade logs differ"),
        )?;
        ensure(
            (price_reward - time_reward).abs() <= 1e-9 * price_reward.abs().max(1.0),
            || format!("case {case} ({reward}): episode reward {price_reward} vs {time_reward}"),
        )?;
        trades += price.trade_log().len();
    }
    Ok(format!("10 days, {trades} fills, PnL identical"))
}
