use std::borrow::Borrow;

use super::{DataError, TradingDay};

/// Z-scores are clipped to `[-CLIP_BOUND, CLIP_BOUND]`.
pub const CLIP_BOUND: f64 = 10.0;

/// Per-feature population mean and standard deviation.
///
/// A feature whose fit values were all identical has `std == 0` and is
/// degenerate: it normalizes to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub clip_bound: f64,
}

impl NormalizationStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, DataError> {
        if mean.len() != std.len() {
            return Err(DataError::LengthMismatch {
                expected: mean.len(),
                got: std.len(),
            });
        }
        Ok(Self {
            mean,
            std,
            clip_bound: CLIP_BOUND,
        })
    }

    /// Mean 0, std 1: z-scoring reduces to clipping.
    pub fn identity(len: usize) -> Self {
        Self {
            mean: vec![0.0; len],
            std: vec![1.0; len],
            clip_bound: CLIP_BOUND,
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.std[i] == 0.0
    }

    /// Replaces feature `i` with identity statistics.
    pub fn set_identity(&mut self, i: usize) {
        self.mean[i] = 0.0;
        self.std[i] = 1.0;
    }

    /// Z-score of a single feature value.
    #[inline]
    pub fn z(&self, i: usize, x: f64) -> f64 {
        let sd = self.std[i];
        if sd == 0.0 {
            return 0.0;
        }
        ((x - self.mean[i]) / sd).clamp(-self.clip_bound, self.clip_bound)
    }
}

/// Streaming Welford accumulator that also tracks whether a column ever
/// changed, so constant columns come out with exactly `mean = c, std = 0`.
struct Moments {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    first: Vec<f64>,
    constant: Vec<bool>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            first: vec![0.0; dim],
            constant: vec![true; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        if self.n == 1 {
            self.first.copy_from_slice(x);
        }
        for (j, &v) in x.iter().enumerate() {
            let d = v - self.mean[j];
            self.mean[j] += d / n;
            self.m2[j] += d * (v - self.mean[j]);
            if v != self.first[j] {
                self.constant[j] = false;
            }
        }
    }

    fn finish(self) -> NormalizationStats {
        let n = self.n as f64;
        let mut mean = self.mean;
        let mut std: Vec<f64> = self.m2.iter().map(|m2| (m2 / n).max(0.0).sqrt()).collect();
        for j in 0..mean.len() {
            if self.constant[j] {
                mean[j] = self.first[j];
                std[j] = 0.0;
            }
        }
        NormalizationStats {
            mean,
            std,
            clip_bound: CLIP_BOUND,
        }
    }
}

/// Fits z-score statistics over every vector the extractor emits for the
/// three prior days.
///
/// The extractor is called once per day and pushes feature vectors into the
/// provided sink; all vectors must share one length.
pub fn fit_normalizer<D, F>(days: &[D], mut extractor: F) -> Result<NormalizationStats, DataError>
where
    D: Borrow<TradingDay>,
    F: FnMut(&TradingDay, &mut dyn FnMut(&[f64])),
{
    if days.len() != 3 {
        return Err(DataError::WrongDayCount(days.len()));
    }
    let mut acc: Option<Moments> = None;
    let mut mismatch: Option<(usize, usize)> = None;
    for day in days {
        extractor(day.borrow(), &mut |x: &[f64]| {
            if mismatch.is_some() {
                return;
            }
            let m = acc.get_or_insert_with(|| Moments::new(x.len()));
            if x.len() != m.mean.len() {
                mismatch = Some((m.mean.len(), x.len()));
                return;
            }
            m.push(x);
        });
    }
    if let Some((expected, got)) = mismatch {
        return Err(DataError::LengthMismatch { expected, got });
    }
    match acc {
        Some(m) if m.n > 0 => Ok(m.finish()),
        _ => Err(DataError::EmptyFeatures),
    }
}

/// `(x - mean) / std`, clipped to the stats' bound; degenerate features map to 0.
pub fn normalize(stats: &NormalizationStats, x: &[f64]) -> Result<Vec<f64>, DataError> {
    let mut out = vec![0.0; x.len()];
    normalize_into(stats, x, &mut out)?;
    Ok(out)
}

pub fn normalize_into(stats: &NormalizationStats, x: &[f64], out: &mut [f64]) -> Result<(), DataError> {
    if x.len() != stats.len() || out.len() != stats.len() {
        return Err(DataError::LengthMismatch {
            expected: stats.len(),
            got: x.len().min(out.len()),
        });
    }
    for (i, (o, &v)) in out.iter_mut().zip(x).enumerate() {
        *o = stats.z(i, v);
    }
    Ok(())
}
