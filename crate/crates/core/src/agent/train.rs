use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::advantage::{compute_advantages, standardize, AdvantageMode};
use super::loss::{loss_and_grad, Batch, LossCoefs, LossStats, Objective};
use super::network::{ActorCritic, NetConfig};
use super::optim::Adam;
use super::AgentError;
use crate::env::Environment;
use crate::exchange::Action;

/// Episodic environment with a discrete action space, as seen by a learner.
pub trait RlEnv: Send {
    fn obs_len(&self) -> usize;
    fn reset(&mut self) -> Result<Vec<f64>, AgentError>;
    /// Returns the next observation, the reward and whether the episode ended.
    fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool), AgentError>;
}

impl RlEnv for Environment {
    fn obs_len(&self) -> usize {
        self.observation_len()
    }

    fn reset(&mut self) -> Result<Vec<f64>, AgentError> {
        Ok(Environment::reset(self)?.data)
    }

    fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool), AgentError> {
        let action = Action::from_index(action).map_err(|e| AgentError::Env(e.to_string()))?;
        let r = Environment::step(self, action)?;
        Ok((r.observation.data, r.reward, r.done))
    }
}

/// Several environments (typically one per trading day); each episode runs on
/// one of them, picked uniformly at random.
#[derive(Debug, Clone)]
pub struct EnvRotation<E> {
    envs: Vec<E>,
    rng: ChaCha8Rng,
    active: usize,
}

impl<E: RlEnv> EnvRotation<E> {
    pub fn new(envs: Vec<E>, seed: u64) -> Result<Self, AgentError> {
        let first = envs.first().ok_or_else(|| AgentError::Env("no environments".into()))?;
        let len = first.obs_len();
        if let Some(e) = envs.iter().find(|e| e.obs_len() != len) {
            return Err(AgentError::Dim {
                expected: len,
                got: e.obs_len(),
            });
        }
        Ok(Self {
            envs,
            rng: ChaCha8Rng::seed_from_u64(seed),
            active: 0,
        })
    }

    pub fn active(&self) -> usize {
        self.active
    }
}

impl<E: RlEnv> RlEnv for EnvRotation<E> {
    fn obs_len(&self) -> usize {
        self.envs[0].obs_len()
    }

    fn reset(&mut self) -> Result<Vec<f64>, AgentError> {
        self.active = self.rng.random_range(0..self.envs.len());
        self.envs[self.active].reset()
    }

    fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool), AgentError> {
        self.envs[self.active].step(action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    A2c,
    Ppo,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::A2c => "a2c",
            Algorithm::Ppo => "ppo",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a2c" => Ok(Algorithm::A2c),
            "ppo" => Ok(Algorithm::Ppo),
            _ => Err(AgentError::Config(format!(
                "unknown algorithm '{s}' (expected a2c or ppo)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Rollout length per worker between updates.
    pub k_steps: usize,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub workers: usize,
    /// Environment transitions summed over workers.
    pub total_steps: u64,
    /// PPO passes over each rollout.
    pub epochs: usize,
    /// PPO minibatches per epoch.
    pub minibatches: usize,
    pub standardize_advantages: bool,
    pub max_grad_norm: Option<f64>,
    pub hidden: usize,
    pub head_hidden: usize,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn a2c() -> Self {
        Self {
            algorithm: Algorithm::A2c,
            gamma: 0.99,
            learning_rate: 3e-4,
            k_steps: 40,
            gae_lambda: 0.97,
            clip_epsilon: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            workers: 4,
            total_steps: 1_000_000,
            epochs: 4,
            minibatches: 4,
            standardize_advantages: false,
            max_grad_norm: Some(0.5),
            hidden: 256,
            head_hidden: 64,
            seed: 0,
        }
    }

    pub fn ppo() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            k_steps: 256,
            standardize_advantages: true,
            ..Self::a2c()
        }
    }

    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::A2c => Self::a2c(),
            Algorithm::Ppo => Self::ppo(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.clip_epsilon > 0.0) {
            return bad("clip_epsilon must be positive");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.k_steps == 0 || self.workers == 0 || self.epochs == 0 || self.minibatches == 0 {
            return bad("k_steps, workers, epochs and minibatches must be positive");
        }
        if self.hidden == 0 || self.head_hidden == 0 {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    pub fn advantage_mode(&self) -> AdvantageMode {
        match self.algorithm {
            Algorithm::A2c => AdvantageMode::KStep,
            Algorithm::Ppo => AdvantageMode::Gae {
                lambda: self.gae_lambda,
            },
        }
    }

    pub fn objective(&self) -> Objective {
        match self.algorithm {
            Algorithm::A2c => Objective::A2c,
            Algorithm::Ppo => Objective::Ppo {
                clip: self.clip_epsilon,
            },
        }
    }

    pub fn coefs(&self) -> LossCoefs {
        LossCoefs {
            value: self.value_coef,
            entropy: self.entropy_coef,
        }
    }

    pub fn net_config(&self, input: usize) -> NetConfig {
        NetConfig {
            input,
            hidden: self.hidden,
            head_hidden: self.head_hidden,
            actions: crate::exchange::N_ACTIONS,
        }
    }
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self::a2c()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub update_idx: u64,
    pub steps: u64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean reward of the most recent completed episodes, if any.
    pub mean_episode_reward: Option<f64>,
}

pub fn training_log_header() -> [&'static str; 6] {
    [
        "update_idx",
        "steps",
        "policy_loss",
        "value_loss",
        "entropy",
        "mean_episode_reward",
    ]
}

pub fn write_training_log<W: Write>(rows: &[TrainLogRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(training_log_header())?;
    for r in rows {
        w.write_record([
            r.update_idx.to_string(),
            r.steps.to_string(),
            r.policy_loss.to_string(),
            r.value_loss.to_string(),
            r.entropy.to_string(),
            r.mean_episode_reward.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Draws an action from `probs`, or takes the most likely one when `greedy`.
pub fn act<R: Rng + ?Sized>(probs: &[f64], rng: &mut R, greedy: bool) -> usize {
    if greedy {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        return best;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Runs `episodes` full episodes and returns their total rewards.
pub fn evaluate<E: RlEnv + ?Sized, R: Rng + ?Sized>(
    net: &ActorCritic,
    env: &mut E,
    episodes: usize,
    greedy: bool,
    rng: &mut R,
) -> Result<Vec<f64>, AgentError> {
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset()?;
        let mut total = 0.0;
        loop {
            let (probs, _) = net.forward(&obs)?;
            let (next, r, done) = env.step(act(&probs, rng, greedy))?;
            total += r;
            obs = next;
            if done {
                break;
            }
        }
        out.push(total);
    }
    Ok(out)
}

const RECENT_EPISODES: usize = 10;

/// Next observation, reward and done flag of one environment step.
type Transition = (Vec<f64>, f64, bool);

/// Synchronous actor-critic learner over lockstep environments.
#[derive(Debug)]
pub struct Trainer<E> {
    cfg: LearnerConfig,
    net: ActorCritic,
    opt: Adam,
    envs: Vec<E>,
    obs: Vec<Vec<f64>>,
    episode_acc: Vec<f64>,
    recent: VecDeque<f64>,
    episodes: usize,
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
}

impl<E: RlEnv> Trainer<E> {
    /// Orthogonally initialized network seeded from `cfg.seed`.
    pub fn new(cfg: LearnerConfig, envs: Vec<E>) -> Result<Self, AgentError> {
        let input = envs.first().map(|e| e.obs_len()).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = ActorCritic::orthogonal(cfg.net_config(input), &mut rng);
        Self::build(cfg, envs, net, rng)
    }

    pub fn with_network(cfg: LearnerConfig, envs: Vec<E>, net: ActorCritic) -> Result<Self, AgentError> {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::build(cfg, envs, net, rng)
    }

    fn build(cfg: LearnerConfig, mut envs: Vec<E>, net: ActorCritic, rng: ChaCha8Rng) -> Result<Self, AgentError> {
        cfg.validate()?;
        if envs.len() != cfg.workers {
            return Err(AgentError::Config(format!(
                "{} environments for {} workers",
                envs.len(),
                cfg.workers
            )));
        }
        for e in &envs {
            if e.obs_len() != net.config().input {
                return Err(AgentError::Dim {
                    expected: net.config().input,
                    got: e.obs_len(),
                });
            }
        }
        let obs = envs.iter_mut().map(|e| e.reset()).collect::<Result<Vec<_>, _>>()?;
        let opt = Adam::new(net.num_params(), cfg.learning_rate, cfg.max_grad_norm);
        Ok(Self {
            episode_acc: vec![0.0; envs.len()],
            recent: VecDeque::with_capacity(RECENT_EPISODES),
            episodes: 0,
            steps: 0,
            updates: 0,
            cfg,
            net,
            opt,
            envs,
            obs,
            rng,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn network(&self) -> &ActorCritic {
        &self.net
    }

    pub fn into_network(self) -> ActorCritic {
        self.net
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn completed_episodes(&self) -> usize {
        self.episodes
    }

    /// Trains until `total_steps`, calling `on_update` after every update.
    pub fn train<F>(&mut self, mut on_update: F) -> Result<Vec<TrainLogRow>, AgentError>
    where
        F: FnMut(&TrainLogRow, &ActorCritic) -> Result<(), AgentError>,
    {
        let mut log = Vec::new();
        while self.steps < self.cfg.total_steps {
            let row = self.update()?;
            on_update(&row, &self.net)?;
            log.push(row);
        }
        Ok(log)
    }

    /// Collects one rollout from every worker and applies the update.
    pub fn update(&mut self) -> Result<TrainLogRow, AgentError> {
        let rollout = self.collect()?;
        let stats = match self.cfg.algorithm {
            Algorithm::A2c => self.a2c_update(&rollout)?,
            Algorithm::Ppo => self.ppo_update(&rollout)?,
        };
        self.updates += 1;
        let mean = (!self.recent.is_empty()).then(|| self.recent.iter().sum::<f64>() / self.recent.len() as f64);
        Ok(TrainLogRow {
            update_idx: self.updates,
            steps: self.steps,
            policy_loss: stats.policy,
            value_loss: stats.value,
            entropy: stats.entropy,
            mean_episode_reward: mean,
        })
    }

    pub(crate) fn collect(&mut self) -> Result<Rollout, AgentError> {
        let w = self.envs.len();
        let k = self.cfg.k_steps;
        let d = self.net.config().input;
        let n = k * w;
        let mut r = Rollout {
            obs: Array2::zeros((n, d)),
            actions: vec![0; n],
            logp: vec![0.0; n],
            values: vec![0.0; n],
            rewards: vec![0.0; n],
            dones: vec![false; n],
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        for t in 0..k {
            let mut x = Array2::zeros((w, d));
            for (i, o) in self.obs.iter().enumerate() {
                x.row_mut(i).assign(&ndarray::ArrayView1::from(o.as_slice()));
            }
            let cache = self.net.forward_batch(x.view())?;
            let mut actions = Vec::with_capacity(w);
            for i in 0..w {
                let logp = super::network::log_softmax(cache.logits.row(i).as_slice().expect("contiguous"));
                let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
                let a = act(&probs, &mut self.rng, false);
                let j = t * w + i;
                r.actions[j] = a;
                r.logp[j] = logp[a];
                r.values[j] = cache.values[i];
                actions.push(a);
            }
            r.obs.slice_mut(ndarray::s![t * w..(t + 1) * w, ..]).assign(&x);

            let results: Vec<Result<Transition, AgentError>> = self
                .envs
                .par_iter_mut()
                .zip(actions.par_iter())
                .map(|(env, &a)| {
                    let (obs, reward, done) = env.step(a)?;
                    let obs = if done { env.reset()? } else { obs };
                    Ok((obs, reward, done))
                })
                .collect();
            for (i, res) in results.into_iter().enumerate() {
                let (obs, reward, done) = res?;
                let j = t * w + i;
                r.rewards[j] = reward;
                r.dones[j] = done;
                self.episode_acc[i] += reward;
                if done {
                    if self.recent.len() == RECENT_EPISODES {
                        self.recent.pop_front();
                    }
                    self.recent.push_back(self.episode_acc[i]);
                    self.episode_acc[i] = 0.0;
                    self.episodes += 1;
                }
                self.obs[i] = obs;
            }
            self.steps += w as u64;
        }

        let mut x = Array2::zeros((w, d));
        for (i, o) in self.obs.iter().enumerate() {
            x.row_mut(i).assign(&ndarray::ArrayView1::from(o.as_slice()));
        }
        let bootstrap = self.net.forward_batch(x.view())?.values;

        r.advantages = vec![0.0; n];
        r.returns = vec![0.0; n];
        let mode = self.cfg.advantage_mode();
        for i in 0..w {
            let idx: Vec<usize> = (0..k).map(|t| t * w + i).collect();
            let rewards: Vec<f64> = idx.iter().map(|&j| r.rewards[j]).collect();
            let values: Vec<f64> = idx.iter().map(|&j| r.values[j]).collect();
            let dones: Vec<bool> = idx.iter().map(|&j| r.dones[j]).collect();
            let (adv, ret) = compute_advantages(&rewards, &values, &dones, Some(bootstrap[i]), self.cfg.gamma, mode)?;
            for (t, &j) in idx.iter().enumerate() {
                r.advantages[j] = adv[t];
                r.returns[j] = ret[t];
            }
        }
        if self.cfg.standardize_advantages {
            standardize(&mut r.advantages);
        }
        Ok(r)
    }

    fn apply(&mut self, batch: &Batch<'_>) -> Result<LossStats, AgentError> {
        let mut grad = vec![0.0; self.net.num_params()];
        let stats = loss_and_grad(
            &self.net,
            batch,
            self.cfg.objective(),
            self.cfg.coefs(),
            Some(&mut grad),
        )?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(AgentError::NonFinite(format!(
                "gradient entry {i} at update {} (loss {stats:?})",
                self.updates + 1
            )));
        }
        self.opt.step(self.net.params_mut(), &mut grad);
        Ok(stats)
    }

    fn a2c_update(&mut self, r: &Rollout) -> Result<LossStats, AgentError> {
        let batch = Batch {
            obs: r.obs.view(),
            actions: &r.actions,
            advantages: &r.advantages,
            returns: &r.returns,
            old_logp: &r.logp,
        };
        self.apply(&batch)
    }

    fn ppo_update(&mut self, r: &Rollout) -> Result<LossStats, AgentError> {
        let n = r.actions.len();
        let mb = n.div_ceil(self.cfg.minibatches);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut sum = LossStats::default();
        let mut count = 0.0;
        for _ in 0..self.cfg.epochs {
            idx.shuffle(&mut self.rng);
            for chunk in idx.chunks(mb) {
                let obs = r.obs.select(Axis(0), chunk);
                let pick = |v: &[f64]| chunk.iter().map(|&j| v[j]).collect::<Vec<f64>>();
                let actions: Vec<usize> = chunk.iter().map(|&j| r.actions[j]).collect();
                let (adv, ret, old) = (pick(&r.advantages), pick(&r.returns), pick(&r.logp));
                let batch = Batch {
                    obs: obs.view(),
                    actions: &actions,
                    advantages: &adv,
                    returns: &ret,
                    old_logp: &old,
                };
                let s = self.apply(&batch)?;
                sum.total += s.total;
                sum.policy += s.policy;
                sum.value += s.value;
                sum.entropy += s.entropy;
                sum.clip_fraction += s.clip_fraction;
                count += 1.0;
            }
        }
        Ok(LossStats {
            total: sum.total / count,
            policy: sum.policy / count,
            value: sum.value / count,
            entropy: sum.entropy / count,
            clip_fraction: sum.clip_fraction / count,
        })
    }
}

#[derive(Debug)]
pub(crate) struct Rollout {
    pub(crate) obs: Array2<f64>,
    pub(crate) actions: Vec<usize>,
    pub(crate) logp: Vec<f64>,
    pub(crate) values: Vec<f64>,
    pub(crate) rewards: Vec<f64>,
    pub(crate) dones: Vec<bool>,
    pub(crate) advantages: Vec<f64>,
    pub(crate) returns: Vec<f64>,
}
