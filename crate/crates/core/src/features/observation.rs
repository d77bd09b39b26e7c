use std::collections::VecDeque;

use crate::market_data::NormalizationStats;

use super::{FeatureError, FeatureSet, AGENT_DIM, ENV_DIM};

/// Number of lagged environment rows in an observation.
pub const WINDOW: usize = 100;

/// Bound applied to the scaled realized PnL entry of the agent state.
const RPNL_CLIP: f64 = 10.0;

/// Ring buffer of the most recent raw environment rows, oldest first.
#[derive(Debug, Clone)]
pub struct FeatureHistory {
    rows: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl FeatureHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            rows: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    /// Appends a row, evicting the oldest when full.
    pub fn push(&mut self, row: &[f64]) {
        let mut slot = if self.rows.len() == self.capacity {
            self.rows.pop_front().unwrap_or_default()
        } else {
            Vec::with_capacity(row.len())
        };
        slot.clear();
        slot.extend_from_slice(row);
        self.rows.push_back(slot);
    }

    /// Overwrites one entry of the newest row.
    pub fn set_last(&mut self, index: usize, value: f64) {
        if let Some(r) = self.rows.back_mut() {
            r[index] = value;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(Vec::as_slice)
    }
}

/// A flattened `lags x width` window, newest row last, followed by the agent
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub lags: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn window(&self) -> &[f64] {
        &self.data[..self.lags * self.width]
    }

    pub fn row(&self, lag: usize) -> &[f64] {
        &self.data[lag * self.width..(lag + 1) * self.width]
    }

    pub fn agent_state(&self) -> &[f64] {
        &self.data[self.lags * self.width..]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Selects, normalizes and stacks the history into an observation, padding
/// missing early lags with zero rows.
pub fn build_observation(
    set: &FeatureSet,
    stats: &NormalizationStats,
    history: &FeatureHistory,
    agent_state: &[f64; AGENT_DIM],
) -> Result<Observation, FeatureError> {
    if stats.len() != ENV_DIM {
        return Err(FeatureError::LengthMismatch {
            expected: ENV_DIM,
            got: stats.len(),
        });
    }
    let cols = set.columns();
    let width = cols.len();
    let lags = history.capacity();
    let mut data = vec![0.0; lags * width + AGENT_DIM];
    let pad = lags.saturating_sub(history.len());
    for (k, row) in history.iter().enumerate() {
        if row.len() != ENV_DIM {
            return Err(FeatureError::LengthMismatch {
                expected: ENV_DIM,
                got: row.len(),
            });
        }
        let out = &mut data[(pad + k) * width..(pad + k + 1) * width];
        for (o, &c) in out.iter_mut().zip(&cols) {
            *o = stats.z(c, row[c]);
        }
    }
    let tail = &mut data[lags * width..];
    tail.copy_from_slice(agent_state);
    tail[1] = tail[1].clamp(-RPNL_CLIP, RPNL_CLIP);
    Ok(Observation { lags, width, data })
}
