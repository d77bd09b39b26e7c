use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lobmm_core::rewards::{differential_sharpe, DsrState, Reward, RewardContext, RewardFn, RewardParams};

use crate::{ensure, Outcome};

const ETA_DAMP: f64 = 0.35;
const KAPPA: f64 = 0.0015;
const EPSILON: f64 = 2.0;
const VARPI: f64 = 0.00075;
const DSR_ETA: f64 = 0.01;

/// Straight-line evaluation of every reward from the raw context fields.
fn oracle(kind: RewardFn, c: &RewardContext, a: f64, b: f64) -> f64 {
    let upnl = c.inv * c.dm;
    match kind {
        RewardFn::Upnl => upnl,
        RewardFn::UpnlFills => upnl + c.rpnl_step,
        RewardFn::Asym => {
            let damped = if ETA_DAMP * upnl < 0.0 { ETA_DAMP * upnl } else { 0.0 };
            damped + c.rpnl_step + c.matched_count as f64 * c.half_spread
        }
        RewardFn::AsymCeiling => {
            let damped = if ETA_DAMP * upnl < 0.0 { ETA_DAMP * upnl } else { 0.0 };
            let capped = if c.rpnl_step > KAPPA { KAPPA } else { c.rpnl_step };
            damped + capped
        }
        RewardFn::RpnlChange => c.rpnl_total - c.rpnl_prev,
        RewardFn::TradeCompletion => {
            if c.rpnl_step >= EPSILON * VARPI {
                1.0
            } else if c.rpnl_step <= -VARPI {
                -1.0
            } else {
                c.rpnl_step
            }
        }
        RewardFn::Dsr => {
            let var = b - a * a;
            if var <= 1e-12 {
                0.0
            } else {
                (b * (upnl - a) - 0.5 * a * (upnl * upnl - b)) / (var * var.sqrt())
            }
        }
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> RewardContext {
    let rpnl_step = match rng.random_range(0..6) {
        0 => 0.0,
        1 => 0.0015,
        2 => -0.00075,
        _ => rng.random_range(-0.004..0.004),
    };
    let rpnl_prev = rng.random_range(-0.05..0.05);
    RewardContext {
        inv: rng.random_range(-10..=10) as f64,
        dm: rng.random_range(-5e-4..5e-4),
        rpnl_step,
        rpnl_total: rpnl_prev + rpnl_step,
        rpnl_prev,
        matched_count: rng.random_range(0..3),
        half_spread: rng.random_range(1e-5..1e-3),
    }
}

pub fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = RewardParams::default();
    let mut worst: f64 = 0.0;
    for kind in RewardFn::ALL {
        for i in 0..1000 {
            let c = random_context(&mut rng);
            let a = rng.random_range(-1e-3..1e-3);
            let b = a * a + rng.random_range(0.0..1e-5);
            let got = match kind {
                RewardFn::Dsr => differential_sharpe(c.inv * c.dm, DsrState { a, b }, DSR_ETA).0,
                _ => Reward::new(kind, params).evaluate(&c),
            };
            let want = oracle(kind, &c, a, b);
            let err = (got - want).abs();
            ensure(err <= 1e-12, || format!("{kind} context {i}: {got} vs oracle {want}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("7 x 1000 contexts, max abs error {worst:.1e}"))
}

pub fn dsr_stream() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut reward = Reward::new(RewardFn::Dsr, RewardParams::default());
        let (mut a, mut b) = (0.0f64, 0.0f64);
        let (mut cum_got, mut cum_want) = (0.0f64, 0.0f64);
        let scale = 10f64.powi(-(seed as i32 % 3) - 3);
        for t in 0..10_000 {
            let inv = rng.random_range(-10..=10) as f64;
            let dm = rng.random_range(-1.0..1.0) * scale;
            let c = RewardContext {
                inv,
                dm,
                rpnl_step: 0.0,
                rpnl_total: 0.0,
                rpnl_prev: 0.0,
                matched_count: 0,
                half_spread: 0.0,
            };
            let got = reward.evaluate(&c);
            let r = inv * dm;
            let var = b - a * a;
            let want = if var > 1e-12 {
                (b * (r - a) - 0.5 * a * (r * r - b)) / var.powi(3).sqrt()
            } else {
                0.0
            };
            a += DSR_ETA * (r - a);
            b += DSR_ETA * (r * r - b);
            if t == 0 {
                ensure(got == 0.0, || format!("stream {seed}: first step gave {got}"))?;
            }
            let err = (got - want).abs() / want.abs().max(1.0);
            ensure(err <= 1e-9, || {
                format!("stream {seed} step {t}: {got} vs oracle {want}")
            })?;
            worst = worst.max(err);
            cum_got += got;
            cum_want += want;
            ensure(
                cum_got.signum() == cum_want.signum() || cum_got.abs().max(cum_want.abs()) < 1e-9,
                || format!("stream {seed} step {t}: cumulative sign differs"),
            )?;
        }
    }
    Ok(format!(
        "5 streams x 10000 steps, max error {worst:.1e}, first step exactly 0"
    ))
}
