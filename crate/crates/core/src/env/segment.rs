use crate::market_data::TradingDay;

/// Inclusive midpoint band `(lower, upper)` around `m`.
pub fn price_band(m: f64, beta: f64) -> (f64, f64) {
    (m * (1.0 - beta), m * (1.0 + beta))
}

pub fn breaches(m: f64, band: (f64, f64)) -> bool {
    m < band.0 || m > band.1
}

/// Step boundaries of a price-event walk over a day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceSegmentation {
    /// Snapshot indices where steps begin and end, starting with the walk's
    /// first index and ending with the last index visited.
    pub boundaries: Vec<usize>,
    /// Whether the final segment ran into the end of the day without a breach.
    pub tail_truncated: bool,
}

impl PriceSegmentation {
    /// Number of steps the walk takes.
    pub fn steps(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    /// Number of band breaches.
    pub fn events(&self) -> usize {
        self.steps() - usize::from(self.tail_truncated)
    }
}

/// Segments a day into price events from its first snapshot.
pub fn segment_price_events(day: &TradingDay, beta: f64) -> PriceSegmentation {
    segment_price_events_from(day, beta, 0)
}

/// Segments a day into price events starting at snapshot `start`: each step
/// ends at the first snapshot whose midpoint leaves the band set at the
/// step's opening snapshot, or at the day's last snapshot.
pub fn segment_price_events_from(day: &TradingDay, beta: f64, start: usize) -> PriceSegmentation {
    let snaps = day.snapshots();
    let last = snaps.len() - 1;
    let mut boundaries = vec![start];
    let mut band = price_band(snaps[start].midpoint(), beta);
    for (k, s) in snaps.iter().enumerate().skip(start + 1) {
        let m = s.midpoint();
        if breaches(m, band) {
            boundaries.push(k);
            band = price_band(m, beta);
        }
    }
    let tail_truncated = *boundaries.last().expect("nonempty") != last;
    if tail_truncated {
        boundaries.push(last);
    }
    PriceSegmentation {
        boundaries,
        tail_truncated,
    }
}
