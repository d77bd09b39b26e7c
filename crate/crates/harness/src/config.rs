//! Experiment configuration: sectioned `key = value` files (TOML syntax)
//! with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use lobmm_core::agent::{Algorithm, LearnerConfig};
use lobmm_core::env::{EnvConfig, EventMode};
use lobmm_core::exchange::{ExchangeConfig, FeeSchedule};
use lobmm_core::features::FeatureSet;
use lobmm_core::rewards::{RewardFn, RewardParams};

use crate::HarnessError;

/// Inclusive range of trading dates; empty selects nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DayRange {
    pub bounds: Option<(NaiveDate, NaiveDate)>,
}

impl DayRange {
    pub fn new(first: NaiveDate, last: NaiveDate) -> Self {
        Self {
            bounds: Some((first, last)),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.bounds.is_some_and(|(a, b)| a <= d && d <= b)
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_none()
    }

    pub fn overlaps(&self, other: &DayRange) -> bool {
        match (self.bounds, other.bounds) {
            (Some((a, b)), Some((c, d))) => a <= d && c <= b,
            _ => false,
        }
    }
}

impl FromStr for DayRange {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::default());
        }
        let date = |t: &str| {
            NaiveDate::parse_from_str(t.trim(), "%Y-%m-%d")
                .map_err(|e| HarnessError::Config(format!("bad date {t:?} in range {s:?}: {e}")))
        };
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (date(a)?, date(b)?),
            None => (date(s)?, date(s)?),
        };
        if b < a {
            return Err(HarnessError::Config(format!("range {s:?} ends before it starts")));
        }
        Ok(Self::new(a, b))
    }
}

impl TryFrom<String> for DayRange {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DayRange> for String {
    fn from(r: DayRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for DayRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bounds {
            None => Ok(()),
            Some((a, b)) if a == b => write!(f, "{a}"),
            Some((a, b)) => write!(f, "{a}..{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Directory of day files (`*.csv` or `*.csv.gz`).
    pub dir: PathBuf,
    pub train: DayRange,
    pub test: DayRange,
    /// Test days left out of results and the benchmark.
    pub skip_days: Vec<NaiveDate>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data"),
            train: DayRange::default(),
            test: DayRange::default(),
            skip_days: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    /// `time` or `price`.
    pub mode: String,
    pub action_repeats: usize,
    pub beta: f64,
    pub feature_set: u8,
    pub include_reward: bool,
    pub reward: String,
    pub random_start: bool,
    pub warmup: usize,
    pub window: usize,
    /// `snapshot` or `step`.
    pub cadence: String,
    pub rho: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        Self {
            mode: "time".into(),
            action_repeats: 5,
            beta: 1e-4,
            feature_set: 1,
            include_reward: true,
            reward: e.reward.name().into(),
            random_start: e.random_start,
            warmup: e.warmup,
            window: e.window,
            cadence: e.cadence.name().into(),
            rho: e.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub eta_damp: f64,
    pub kappa: f64,
    pub epsilon_tc: f64,
    pub varpi: f64,
    pub dsr_eta: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        let p = RewardParams::default();
        Self {
            eta_damp: p.eta_damp,
            kappa: p.kappa,
            epsilon_tc: p.epsilon_tc,
            varpi: p.varpi,
            dsr_eta: p.dsr_eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeSection {
    pub order_size: f64,
    pub max_inventory: usize,
    pub maker_fee: f64,
    pub taker_fee: f64,
    pub slippage: f64,
}

impl Default for ExchangeSection {
    fn default() -> Self {
        let e = ExchangeConfig::default();
        Self {
            order_size: e.order_size,
            max_inventory: e.max_inventory,
            maker_fee: e.fees.maker,
            taker_fee: e.fees.taker,
            slippage: e.slippage,
        }
    }
}

/// Learner settings; `k_steps` and `standardize_advantages` default per
/// algorithm when left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub algorithm: String,
    pub gamma: f64,
    pub learning_rate: f64,
    pub k_steps: Option<usize>,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub workers: usize,
    pub total_steps: u64,
    pub epochs: usize,
    pub minibatches: usize,
    pub standardize_advantages: Option<bool>,
    /// Zero disables gradient clipping.
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub head_hidden: usize,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let l = LearnerConfig::a2c();
        Self {
            algorithm: l.algorithm.name().into(),
            gamma: l.gamma,
            learning_rate: l.learning_rate,
            k_steps: None,
            gae_lambda: l.gae_lambda,
            clip_epsilon: l.clip_epsilon,
            value_coef: l.value_coef,
            entropy_coef: l.entropy_coef,
            workers: l.workers,
            total_steps: l.total_steps,
            epochs: l.epochs,
            minibatches: l.minibatches,
            standardize_advantages: None,
            max_grad_norm: l.max_grad_norm.unwrap_or(0.0),
            hidden: l.hidden,
            head_hidden: l.head_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
    /// Backtest with the most likely action instead of sampling.
    pub greedy: bool,
    /// Write an intermediate checkpoint every this many updates; 0 disables.
    pub checkpoint_every: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs"),
            greedy: false,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub env: EnvSection,
    pub reward: RewardSection,
    pub exchange: ExchangeSection,
    pub learner: LearnerSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    /// Parses a config, applies `section.key = value` overrides, fills
    /// algorithm defaults and validates.
    pub fn load(text: &str, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        for (key, value) in overrides {
            set_path(&mut table, key, parse_value(value))?;
        }
        let mut cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::load(&text, overrides)
    }

    /// Fills per-algorithm defaults and checks every field.
    pub fn resolve(&mut self) -> Result<(), HarnessError> {
        let algo: Algorithm = self.learner.algorithm.parse()?;
        self.learner.algorithm = algo.name().into();
        let base = LearnerConfig::for_algorithm(algo);
        self.learner.k_steps.get_or_insert(base.k_steps);
        self.learner
            .standardize_advantages
            .get_or_insert(base.standardize_advantages);
        self.learner_config()?.validate()?;
        self.env_config()?;
        if self.data.train.overlaps(&self.data.test) {
            return Err(HarnessError::Config(format!(
                "train days {} overlap test days {}",
                self.data.train, self.data.test
            )));
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Result<Algorithm, HarnessError> {
        Ok(self.learner.algorithm.parse()?)
    }

    pub fn reward_fn(&self) -> Result<RewardFn, HarnessError> {
        Ok(self.env.reward.parse()?)
    }

    pub fn feature_set(&self) -> Result<FeatureSet, HarnessError> {
        Ok(FeatureSet::new(self.env.feature_set)?.with_reward(self.env.include_reward))
    }

    pub fn event_mode(&self) -> Result<EventMode, HarnessError> {
        match self.env.mode.trim().to_ascii_lowercase().as_str() {
            "time" => Ok(EventMode::Time {
                action_repeats: self.env.action_repeats,
            }),
            "price" => Ok(EventMode::Price { beta: self.env.beta }),
            other => Err(HarnessError::Config(format!(
                "unknown mode {other:?}, expected time or price"
            ))),
        }
    }

    pub fn env_config(&self) -> Result<EnvConfig, HarnessError> {
        let e = &self.env;
        if e.window == 0 {
            return Err(HarnessError::Config("window must be positive".into()));
        }
        if !(e.rho > 0.0) {
            return Err(HarnessError::Config("rho must be positive".into()));
        }
        let x = &self.exchange;
        if !(x.order_size > 0.0) || x.max_inventory == 0 || !(x.slippage >= 0.0) {
            return Err(HarnessError::Config(
                "order_size and max_inventory must be positive, slippage non-negative".into(),
            ));
        }
        let r = &self.reward;
        Ok(EnvConfig {
            feature_set: self.feature_set()?,
            reward: self.reward_fn()?,
            reward_params: RewardParams {
                eta_damp: r.eta_damp,
                kappa: r.kappa,
                epsilon_tc: r.epsilon_tc,
                varpi: r.varpi,
                dsr_eta: r.dsr_eta,
            },
            mode: self.event_mode()?,
            random_start: e.random_start,
            seed: self.run.seed,
            exchange: ExchangeConfig {
                order_size: x.order_size,
                max_inventory: x.max_inventory,
                fees: FeeSchedule {
                    maker: x.maker_fee,
                    taker: x.taker_fee,
                },
                slippage: x.slippage,
            },
            rho: e.rho,
            warmup: e.warmup,
            window: e.window,
            cadence: e.cadence.parse()?,
        })
    }

    pub fn learner_config(&self) -> Result<LearnerConfig, HarnessError> {
        let l = &self.learner;
        let algorithm: Algorithm = l.algorithm.parse()?;
        let base = LearnerConfig::for_algorithm(algorithm);
        Ok(LearnerConfig {
            algorithm,
            gamma: l.gamma,
            learning_rate: l.learning_rate,
            k_steps: l.k_steps.unwrap_or(base.k_steps),
            gae_lambda: l.gae_lambda,
            clip_epsilon: l.clip_epsilon,
            value_coef: l.value_coef,
            entropy_coef: l.entropy_coef,
            workers: l.workers,
            total_steps: l.total_steps,
            epochs: l.epochs,
            minibatches: l.minibatches,
            standardize_advantages: l.standardize_advantages.unwrap_or(base.standardize_advantages),
            max_grad_norm: (l.max_grad_norm > 0.0).then_some(l.max_grad_norm),
            hidden: l.hidden,
            head_hidden: l.head_hidden,
            seed: self.run.seed,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The resolved config as `# `-prefixed lines for artifact headers.
    pub fn echo(&self) -> String {
        self.to_toml()
            .lines()
            .map(|l| {
                if l.is_empty() {
                    "#".to_string()
                } else {
                    format!("# {l}")
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }

    /// Recovers a config from [`echo`](Self::echo) output at the top of `text`.
    pub fn from_echo(text: &str) -> Result<Self, HarnessError> {
        let body: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
            .collect::<Vec<_>>()
            .join("\n");
        Self::load(&body, &[])
    }
}

/// TOML literal when it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), HarnessError> {
    let mut parts: Vec<&str> = key.split('.').map(str::trim).collect();
    let last = parts.pop().filter(|k| !k.is_empty());
    let (Some(last), false) = (last, parts.is_empty()) else {
        return Err(HarnessError::Config(format!(
            "override {key:?} must look like section.key"
        )));
    };
    let mut t = table;
    for p in parts {
        t = t
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("{p:?} in {key:?} is not a section")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Splits `section.key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected section.key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
