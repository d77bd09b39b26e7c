use crate::market_data::LobSnapshot;

/// Indicator windows in seconds: 5, 15 and 30 minutes.
pub const INDICATOR_WINDOWS: [i64; 3] = [300, 900, 1800];

/// `(up - dwn) / (up + dwn)`, 0 when there was no trading.
pub fn tfi_ratio(up: f64, dwn: f64) -> f64 {
    let d = up + dwn;
    if d > 0.0 {
        ((up - dwn) / d).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// `(gain - |loss|) / (gain + |loss|)`, 0 when the price never moved.
pub fn crsi_ratio(gain: f64, loss: f64) -> f64 {
    let loss = loss.abs();
    let d = gain + loss;
    if d > 0.0 {
        ((gain - loss) / d).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn in_window(ts: i64, now: i64, window_s: i64) -> bool {
    ts > now - window_s * 1000 && ts <= now
}

/// Trade flow imbalance at the last snapshot of `history` over each window.
pub fn trade_flow_imbalance(history: &[LobSnapshot], windows: &[i64]) -> Vec<f64> {
    let Some(last) = history.last() else {
        return vec![0.0; windows.len()];
    };
    windows
        .iter()
        .map(|&w| {
            let (mut up, mut dwn) = (0.0, 0.0);
            for s in history
                .iter()
                .rev()
                .take_while(|s| in_window(s.timestamp, last.timestamp, w))
            {
                up += s.buy_notional;
                dwn += s.sell_notional;
            }
            tfi_ratio(up, dwn)
        })
        .collect()
}

/// Custom RSI at the last snapshot of `history` over each window, from simple
/// midpoint returns of the snapshots inside the window.
pub fn custom_rsi(history: &[LobSnapshot], windows: &[i64]) -> Vec<f64> {
    let Some(last) = history.last() else {
        return vec![0.0; windows.len()];
    };
    windows
        .iter()
        .map(|&w| {
            let (mut gain, mut loss) = (0.0, 0.0);
            for k in (1..history.len()).rev() {
                if !in_window(history[k].timestamp, last.timestamp, w) {
                    break;
                }
                let r = history[k].midpoint() / history[k - 1].midpoint() - 1.0;
                if r > 0.0 {
                    gain += r;
                } else if r < 0.0 {
                    loss += r;
                }
            }
            crsi_ratio(gain, loss)
        })
        .collect()
}

/// Prefix sums of one nonnegative series plus a count of nonzero entries,
/// so empty windows come out exactly zero.
#[derive(Debug, Clone)]
struct Prefix {
    sum: Vec<f64>,
    nonzero: Vec<u32>,
}

impl Prefix {
    fn new(xs: impl Iterator<Item = f64>) -> Self {
        let mut sum = vec![0.0];
        let mut nonzero = vec![0];
        for x in xs {
            sum.push(sum.last().unwrap() + x);
            nonzero.push(nonzero.last().unwrap() + u32::from(x != 0.0));
        }
        Self { sum, nonzero }
    }

    /// Sum over indices `lo..=hi`.
    fn range(&self, lo: usize, hi: usize) -> f64 {
        if self.nonzero[hi + 1] == self.nonzero[lo] {
            0.0
        } else {
            (self.sum[hi + 1] - self.sum[lo]).max(0.0)
        }
    }
}

/// Per-day windowed sums giving O(1) trade flow imbalance and custom RSI at
/// any snapshot index.
#[derive(Debug, Clone)]
pub struct IndicatorCache {
    buy: Prefix,
    sell: Prefix,
    gain: Prefix,
    loss: Prefix,
    /// First index inside each window, per snapshot.
    starts: [Vec<u32>; 3],
}

impl IndicatorCache {
    pub fn new(snaps: &[LobSnapshot]) -> Self {
        let returns: Vec<f64> = (0..snaps.len())
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    snaps[k].midpoint() / snaps[k - 1].midpoint() - 1.0
                }
            })
            .collect();
        let starts = INDICATOR_WINDOWS.map(|w| {
            let mut out = Vec::with_capacity(snaps.len());
            let mut lo = 0;
            for s in snaps {
                while !in_window(snaps[lo].timestamp, s.timestamp, w) {
                    lo += 1;
                }
                out.push(lo as u32);
            }
            out
        });
        Self {
            buy: Prefix::new(snaps.iter().map(|s| s.buy_notional)),
            sell: Prefix::new(snaps.iter().map(|s| s.sell_notional)),
            gain: Prefix::new(returns.iter().map(|&r| r.max(0.0))),
            loss: Prefix::new(returns.iter().map(|&r| (-r).max(0.0))),
            starts,
        }
    }

    pub fn tfi(&self, t: usize) -> [f64; 3] {
        std::array::from_fn(|k| {
            let lo = self.starts[k][t] as usize;
            tfi_ratio(self.buy.range(lo, t), self.sell.range(lo, t))
        })
    }

    pub fn crsi(&self, t: usize) -> [f64; 3] {
        std::array::from_fn(|k| {
            // the first snapshot of the day has no return
            let lo = (self.starts[k][t] as usize).max(1);
            if lo > t {
                return 0.0;
            }
            crsi_ratio(self.gain.range(lo, t), self.loss.range(lo, t))
        })
    }
}
