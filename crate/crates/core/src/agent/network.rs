use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AgentError;

/// Layer sizes of the actor-critic MLP: a shared ReLU trunk layer, then one
/// ReLU hidden layer per head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    pub actions: usize,
}

impl NetConfig {
    pub fn new(input: usize) -> Self {
        Self {
            input,
            hidden: 256,
            head_hidden: 64,
            actions: crate::exchange::N_ACTIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

impl Dense {
    fn end(&self) -> usize {
        self.b + self.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    trunk: Dense,
    actor_hidden: Dense,
    actor_out: Dense,
    critic_hidden: Dense,
    critic_out: Dense,
}

impl Layout {
    fn new(c: &NetConfig) -> Self {
        let mut off = 0;
        let mut dense = |rows: usize, cols: usize| {
            let d = Dense {
                w: off,
                b: off + rows * cols,
                rows,
                cols,
            };
            off = d.end();
            d
        };
        Self {
            trunk: dense(c.hidden, c.input),
            actor_hidden: dense(c.head_hidden, c.hidden),
            actor_out: dense(c.actions, c.head_hidden),
            critic_hidden: dense(c.head_hidden, c.hidden),
            critic_out: dense(1, c.head_hidden),
        }
    }

    fn total(&self) -> usize {
        self.critic_out.end()
    }
}

/// Intermediate activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    h1: Array2<f64>,
    ha: Array2<f64>,
    hc: Array2<f64>,
    pub logits: Array2<f64>,
    pub values: Vec<f64>,
}

/// Actor-critic MLP over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    cfg: NetConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl ActorCritic {
    pub fn zeros(cfg: NetConfig) -> Self {
        let layout = Layout::new(&cfg);
        Self {
            cfg,
            params: vec![0.0; layout.total()],
            layout,
        }
    }

    /// Orthogonal weights with gain sqrt(2) on hidden layers, 0.01 on the
    /// policy output and 1 on the value output; zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(cfg: NetConfig, rng: &mut R) -> Self {
        let mut net = Self::zeros(cfg);
        let l = net.layout;
        let hidden_gain = 2f64.sqrt();
        for (d, gain) in [
            (l.trunk, hidden_gain),
            (l.actor_hidden, hidden_gain),
            (l.actor_out, 0.01),
            (l.critic_hidden, hidden_gain),
            (l.critic_out, 1.0),
        ] {
            let w = orthogonal_matrix(d.rows, d.cols, gain, rng);
            net.params[d.w..d.b].copy_from_slice(&w);
        }
        net
    }

    pub fn from_params(cfg: NetConfig, params: Vec<f64>) -> Result<Self, AgentError> {
        let layout = Layout::new(&cfg);
        if params.len() != layout.total() {
            return Err(AgentError::Dim {
                expected: layout.total(),
                got: params.len(),
            });
        }
        Ok(Self { cfg, layout, params })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn w(&self, d: Dense) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((d.rows, d.cols), &self.params[d.w..d.b]).expect("layout shape")
    }

    fn b(&self, d: Dense) -> &[f64] {
        &self.params[d.b..d.end()]
    }

    fn dense(&self, x: &ArrayView2<'_, f64>, d: Dense, relu: bool) -> Array2<f64> {
        let mut y = x.dot(&self.w(d).t());
        let b = self.b(d);
        for mut row in y.rows_mut() {
            for (v, &bi) in row.iter_mut().zip(b) {
                *v += bi;
                if relu && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        y
    }

    /// Batched forward pass over rows of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache, AgentError> {
        if x.ncols() != self.cfg.input {
            return Err(AgentError::Dim {
                expected: self.cfg.input,
                got: x.ncols(),
            });
        }
        let l = self.layout;
        let h1 = self.dense(&x, l.trunk, true);
        let ha = self.dense(&h1.view(), l.actor_hidden, true);
        let logits = self.dense(&ha.view(), l.actor_out, false);
        let hc = self.dense(&h1.view(), l.critic_hidden, true);
        let values = self.dense(&hc.view(), l.critic_out, false).iter().copied().collect();
        Ok(ForwardCache {
            h1,
            ha,
            hc,
            logits,
            values,
        })
    }

    /// Action probabilities and state value for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, f64), AgentError> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("row shape");
        let c = self.forward_batch(x)?;
        let probs = softmax(c.logits.row(0).as_slice().expect("contiguous"));
        Ok((probs, c.values[0]))
    }

    /// Accumulates parameter gradients into `grad` given loss gradients with
    /// respect to the logits and values of a forward pass over `x`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        cache: &ForwardCache,
        dlogits: &Array2<f64>,
        dvalues: &[f64],
        grad: &mut [f64],
    ) {
        let l = self.layout;
        let n = x.nrows();
        let dv = ArrayView2::from_shape((n, 1), dvalues).expect("value grad shape");

        let mut dh1 = Array2::<f64>::zeros((n, self.cfg.hidden));
        let mut dha = self.linear_backward(&cache.ha.view(), dlogits.view(), l.actor_out, grad);
        relu_mask(&mut dha, &cache.ha);
        dh1 += &self.linear_backward(&cache.h1.view(), dha.view(), l.actor_hidden, grad);
        let mut dhc = self.linear_backward(&cache.hc.view(), dv, l.critic_out, grad);
        relu_mask(&mut dhc, &cache.hc);
        dh1 += &self.linear_backward(&cache.h1.view(), dhc.view(), l.critic_hidden, grad);
        relu_mask(&mut dh1, &cache.h1);
        self.accumulate(&x, dh1.view(), l.trunk, grad);
    }

    fn accumulate(&self, x: &ArrayView2<'_, f64>, dy: ArrayView2<'_, f64>, d: Dense, grad: &mut [f64]) {
        let (gw, gb) = grad[d.w..d.end()].split_at_mut(d.rows * d.cols);
        let mut gw = ArrayViewMut2::from_shape((d.rows, d.cols), gw).expect("layout shape");
        general_mat_mul(1.0, &dy.t(), x, 1.0, &mut gw);
        for (g, s) in gb.iter_mut().zip(dy.sum_axis(Axis(0))) {
            *g += s;
        }
    }

    /// Accumulates the layer's gradients and returns the input gradient.
    fn linear_backward(
        &self,
        x: &ArrayView2<'_, f64>,
        dy: ArrayView2<'_, f64>,
        d: Dense,
        grad: &mut [f64],
    ) -> Array2<f64> {
        self.accumulate(x, dy, d, grad);
        dy.dot(&self.w(d))
    }
}

fn relu_mask(dy: &mut Array2<f64>, act: &Array2<f64>) {
    dy.zip_mut_with(act, |g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let ls = log_softmax(logits);
    ls.into_iter().map(f64::exp).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Row-major `rows x cols` matrix with orthonormal rows (or columns, when
/// taller than wide) scaled by `gain`.
pub fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vs.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vs {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            vs.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows <= cols { vs[r][c] } else { vs[c][r] };
        }
    }
    out
}
