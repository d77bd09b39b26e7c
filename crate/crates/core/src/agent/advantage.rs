use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdvantageMode {
    /// Discounted rewards to the end of the rollout plus the bootstrapped
    /// value, minus the value estimate.
    KStep,
    /// Generalized advantage estimation.
    Gae { lambda: f64 },
}

/// Advantages and returns for one environment's rollout.
///
/// `dones[t]` marks that the episode ended with transition `t`, which stops
/// both bootstrapping and accumulation across the boundary. `bootstrap` is
/// the value of the state after the last transition.
pub fn compute_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: Option<f64>,
    gamma: f64,
    mode: AdvantageMode,
) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(AgentError::Dim {
            expected: n,
            got: values.len().min(dones.len()),
        });
    }
    let last_done = dones.last().copied().unwrap_or(true);
    let bootstrap = match bootstrap {
        Some(v) => v,
        None if last_done => 0.0,
        None => return Err(AgentError::MissingBootstrap),
    };
    let mut adv = vec![0.0; n];
    match mode {
        AdvantageMode::KStep => {
            let mut ret = bootstrap;
            for t in (0..n).rev() {
                let live = if dones[t] { 0.0 } else { 1.0 };
                ret = rewards[t] + gamma * live * ret;
                adv[t] = ret - values[t];
            }
        }
        AdvantageMode::Gae { lambda } => {
            let mut next_value = bootstrap;
            let mut acc = 0.0;
            for t in (0..n).rev() {
                let live = if dones[t] { 0.0 } else { 1.0 };
                let delta = rewards[t] + gamma * next_value * live - values[t];
                acc = delta + gamma * lambda * live * acc;
                adv[t] = acc;
                next_value = values[t];
            }
        }
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales to zero mean and unit standard deviation.
pub fn standardize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    for x in xs {
        *x = (*x - mean) / (sd + 1e-8);
    }
}
