use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::network::{log_softmax, ActorCritic};
use super::AgentError;

/// Policy objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// `log pi(a|s) * A`.
    A2c,
    /// Clipped probability-ratio surrogate.
    Ppo { clip: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefs {
    pub value: f64,
    pub entropy: f64,
}

impl Default for LossCoefs {
    fn default() -> Self {
        Self {
            value: 0.5,
            entropy: 0.01,
        }
    }
}

/// A minibatch of transitions.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub obs: ArrayView2<'a, f64>,
    pub actions: &'a [usize],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
    /// Log-probabilities under the policy that collected the data.
    pub old_logp: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio was clipped.
    pub clip_fraction: f64,
}

/// `min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)` and its derivative
/// with respect to `ratio`.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, f64) {
    let plain = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if plain <= clipped {
        (plain, adv)
    } else {
        (clipped, 0.0)
    }
}

/// Mean loss over the batch; when `grad` is given, its gradient with respect
/// to the parameters is accumulated into it.
///
/// `loss = policy + value_coef * mean((R - V)^2) - entropy_coef * mean(H)`
/// with `policy = -mean(log pi(a|s) A)` for A2C or the negated clipped
/// surrogate for PPO.
pub fn loss_and_grad(
    net: &ActorCritic,
    batch: &Batch<'_>,
    objective: Objective,
    coefs: LossCoefs,
    grad: Option<&mut [f64]>,
) -> Result<LossStats, AgentError> {
    let n = batch.obs.nrows();
    if [
        batch.actions.len(),
        batch.advantages.len(),
        batch.returns.len(),
        batch.old_logp.len(),
    ]
    .iter()
    .any(|&l| l != n)
    {
        return Err(AgentError::Dim {
            expected: n,
            got: batch.actions.len(),
        });
    }
    let cache = net.forward_batch(batch.obs)?;
    let k = net.config().actions;
    let inv_n = 1.0 / n as f64;
    let mut dlogits = Array2::<f64>::zeros((n, k));
    let mut dvalues = vec![0.0; n];
    let mut stats = LossStats::default();
    let mut clipped = 0usize;

    for i in 0..n {
        let z = cache.logits.row(i);
        let logp = log_softmax(z.as_slice().expect("contiguous"));
        let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let ent = -p.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();

        // d(policy term)/d(log pi(a|s))
        let dlogp = match objective {
            Objective::A2c => {
                stats.policy -= logp[a] * adv * inv_n;
                -adv * inv_n
            }
            Objective::Ppo { clip } => {
                let ratio = (logp[a] - batch.old_logp[i]).exp();
                if (ratio - 1.0).abs() > clip {
                    clipped += 1;
                }
                let (s, ds) = clipped_surrogate(ratio, adv, clip);
                stats.policy -= s * inv_n;
                -ds * ratio * inv_n
            }
        };
        let v = cache.values[i];
        let err = v - batch.returns[i];
        stats.value += err * err * inv_n;
        stats.entropy += ent * inv_n;
        dvalues[i] = coefs.value * 2.0 * err * inv_n;

        let mut row = dlogits.row_mut(i);
        for j in 0..k {
            let onehot = if j == a { 1.0 } else { 0.0 };
            // d log pi(a)/dz_j = 1[j=a] - p_j ; dH/dz_j = -p_j (log p_j + H)
            row[j] = dlogp * (onehot - p[j]) + coefs.entropy * inv_n * p[j] * (logp[j] + ent);
        }
    }
    stats.total = stats.policy + coefs.value * stats.value - coefs.entropy * stats.entropy;
    stats.clip_fraction = clipped as f64 * inv_n;
    if !stats.total.is_finite() {
        return Err(AgentError::NonFinite(format!("loss {stats:?}")));
    }
    if let Some(g) = grad {
        net.backward(batch.obs, &cache, &dlogits, &dvalues, g);
    }
    Ok(stats)
}
