use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lobmm_core::agent::{
    evaluate, log_softmax, loss_and_grad, ActorCritic, Algorithm, Batch, EnvRotation, LearnerConfig, LossCoefs,
    NetConfig, Objective, RlEnv, Trainer,
};
use lobmm_core::env::{EnvConfig, Environment, EventMode};
use lobmm_core::exchange::N_ACTIONS;
use lobmm_core::features::{fit_env_normalizer, FeatureSet};
use lobmm_core::market_data::{synth_days, SynthParams};
use lobmm_core::rewards::RewardFn;

use crate::{ensure, Outcome};

const TINY: NetConfig = NetConfig {
    input: 3,
    hidden: 3,
    head_hidden: 2,
    actions: N_ACTIONS,
};
const CLIP: f64 = 0.2;
/// Draws with a ReLU input or PPO ratio this close to a kink are redrawn.
const KINK_MARGIN: f64 = 1e-2;

/// `W x + b` for the dense layer starting at `off`.
fn affine(p: &[f64], off: usize, rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..rows)
        .map(|r| p[off + rows * cols + r] + (0..cols).map(|c| p[off + r * cols + c] * x[c]).sum::<f64>())
        .collect()
}

/// Smallest distance of any ReLU input from zero, recomputed from
/// the flat parameter layout.
fn relu_margin(p: &[f64], x: &[f64]) -> f64 {
    let (i, h, k, a) = (TINY.input, TINY.hidden, TINY.head_hidden, TINY.actions);
    let trunk = 0;
    let actor_hidden = trunk + h * i + h;
    let actor_out = actor_hidden + k * h + k;
    let critic_hidden = actor_out + a * k + a;
    let z1 = affine(p, trunk, h, x);
    let h1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
    let za = affine(p, actor_hidden, k, &h1);
    let zc = affine(p, critic_hidden, k, &h1);
    z1.iter()
        .chain(&za)
        .chain(&zc)
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min)
}

struct Draw {
    net: ActorCritic,
    obs: Array2<f64>,
    actions: Vec<usize>,
    old: Vec<f64>,
    adv: Vec<f64>,
    ret: Vec<f64>,
    margin: f64,
}

impl Draw {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let n = ActorCritic::zeros(TINY).num_params();
        let net = ActorCritic::from_params(TINY, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("net");
        let rows = 6;
        let obs = Array2::from_shape_fn((rows, TINY.input), |_| rng.random_range(-2.0..2.0));
        let logits = net.forward_batch(obs.view()).expect("forward").logits;
        let actions: Vec<usize> = (0..rows).map(|_| rng.random_range(0..N_ACTIONS)).collect();
        let mut margin = f64::INFINITY;
        let mut old = Vec::with_capacity(rows);
        for r in 0..rows {
            let logp = log_softmax(logits.row(r).as_slice().expect("contiguous"))[actions[r]];
            // Off-policy shift so that some ratios leave the clip band.
            let o = logp + rng.random_range(-0.5..0.5);
            let ratio = (logp - o).exp();
            margin = margin
                .min((ratio - 1.0 - CLIP).abs())
                .min((ratio - 1.0 + CLIP).abs())
                .min(relu_margin(net.params(), obs.row(r).as_slice().expect("contiguous")));
            old.push(o);
        }
        Self {
            net,
            obs,
            actions,
            old,
            adv: (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect(),
            ret: (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect(),
            margin,
        }
    }

    fn gradient_error(&self, objective: Objective) -> f64 {
        let batch = Batch {
            obs: self.obs.view(),
            actions: &self.actions,
            advantages: &self.adv,
            returns: &self.ret,
            old_logp: &self.old,
        };
        let coefs = LossCoefs {
            value: 0.5,
            entropy: 0.05,
        };
        let mut grad = vec![0.0; self.net.num_params()];
        loss_and_grad(&self.net, &batch, objective, coefs, Some(&mut grad)).expect("loss");
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for (i, &g) in grad.iter().enumerate() {
            let shifted = |d: f64| {
                let mut p = self.net.clone();
                p.params_mut()[i] += d;
                loss_and_grad(&p, &batch, objective, coefs, None).expect("loss").total
            };
            // Fourth-order central difference.
            let fd = (8.0 * (shifted(h) - shifted(-h)) - (shifted(2.0 * h) - shifted(-2.0 * h))) / (12.0 * h);
            worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-6));
        }
        worst
    }
}

pub fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut redrawn = 0;
    for (name, objective) in [("a2c", Objective::A2c), ("ppo", Objective::Ppo { clip: CLIP })] {
        let mut accepted = 0;
        while accepted < 100 {
            let draw = Draw::new(&mut rng);
            if draw.margin < KINK_MARGIN {
                redrawn += 1;
                continue;
            }
            let e = draw.gradient_error(objective);
            ensure(e < 1e-4, || format!("{name} draw {accepted}: relative error {e:.2e}"))?;
            worst = worst.max(e);
            accepted += 1;
        }
    }
    Ok(format!(
        "82 parameters, 2 x 100 draws ({redrawn} redrawn near a kink), worst relative error {worst:.1e}"
    ))
}

/// Mean-reverting day with a spread wide enough that a maker round trip
/// clears the trade-completion profit target.
fn crafted_params() -> SynthParams {
    SynthParams {
        seconds: 1_500,
        gap_prob: 0.0,
        spread_ticks: 20,
        volatility: 1e-4,
        mean_reversion: 0.05,
        level_qty: 0.2,
        trade_prob: 0.5,
        trade_notional: 4_000.0,
        ..SynthParams::default()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Welch's t statistic for `mean(a) > mean(b)`.
fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let se = (variance(a) / a.len() as f64 + variance(b) / b.len() as f64).sqrt();
    (mean(a) - mean(b)) / se
}

/// One-sided 5% critical value of Student's t at 19 degrees of freedom, the
/// smallest Welch degrees of freedom two samples of 20 can have.
const T_CRIT: f64 = 1.729;
const EVAL_EPISODES: usize = 20;

fn random_policy(env: &mut Environment, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..EVAL_EPISODES)
        .map(|_| {
            RlEnv::reset(env).expect("reset");
            let mut total = 0.0;
            loop {
                let (_, r, done) = RlEnv::step(env, rng.random_range(0..N_ACTIONS)).expect("step");
                total += r;
                if done {
                    return total;
                }
            }
        })
        .collect()
}

pub fn smoke_test() -> Outcome {
    let days = synth_days(7, &crafted_params(), 4);
    let stats = Arc::new(fit_env_normalizer(&days[..3]).map_err(|e| e.to_string())?);
    let day = Arc::new(days[3].clone());
    let env_cfg = EnvConfig {
        feature_set: FeatureSet::new(2).expect("set 2"),
        reward: RewardFn::TradeCompletion,
        mode: EventMode::Time { action_repeats: 5 },
        warmup: 60,
        window: 10,
        ..EnvConfig::default()
    };
    let env = |seed: u64| {
        Environment::new(
            EnvConfig {
                seed,
                ..env_cfg.clone()
            },
            day.clone(),
            stats.clone(),
        )
        .expect("env")
    };
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let cfg = LearnerConfig {
            total_steps: 50_000,
            learning_rate: 1e-3,
            seed,
            ..LearnerConfig::for_algorithm(Algorithm::A2c)
        };
        let workers = (0..cfg.workers as u64)
            .map(|w| EnvRotation::new(vec![env(seed * 100 + w)], seed * 100 + w + 50).expect("rotation"))
            .collect();
        let mut trainer = Trainer::new(cfg, workers).map_err(|e| e.to_string())?;
        trainer.train(|_, _| Ok(())).map_err(|e| e.to_string())?;
        let net = trainer.into_network();

        // Both policies see the same sequence of episode starts.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let learned = evaluate(&net, &mut env(999 + seed), EVAL_EPISODES, true, &mut rng).map_err(|e| e.to_string())?;
        let random = random_policy(&mut env(999 + seed), &mut rng);
        let t = welch_t(&learned, &random);
        let line = format!(
            "seed {seed}: {:.2} vs random {:.2} (t = {t:.2})",
            mean(&learned),
            mean(&random)
        );
        ensure(t > T_CRIT, || line.clone())?;
        lines.push(line);
    }
    Ok(lines.join("; "))
}
