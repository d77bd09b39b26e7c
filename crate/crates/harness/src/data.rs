//! Day files on disk and per-day preparation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;

use lobmm_core::features::{fit_env_normalizer, IndicatorCache};
use lobmm_core::market_data::{load_day, peek_date, NormalizationStats, TradingDay};

use crate::config::DayRange;
use crate::HarnessError;

/// Number of preceding days the normalizer for a target day is fitted on.
pub const NORMALIZER_DAYS: usize = 3;

/// A day with the precomputed pieces every environment on it shares.
#[derive(Debug, Clone)]
pub struct PreparedDay {
    pub day: Arc<TradingDay>,
    pub cache: Arc<IndicatorCache>,
    pub stats: Arc<NormalizationStats>,
}

/// Source of trading days ordered by date.
#[derive(Debug, Clone)]
pub enum DayStore {
    Files(Vec<(NaiveDate, PathBuf)>),
    Memory(Vec<Arc<TradingDay>>),
}

fn is_day_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".csv") || name.ends_with(".csv.gz")
}

impl DayStore {
    /// Indexes every `*.csv` and `*.csv.gz` file in `dir` by the date of its
    /// first snapshot.
    pub fn open(dir: &Path) -> Result<Self, HarnessError> {
        let io = |e| HarnessError::Io {
            path: dir.display().to_string(),
            source: e,
        };
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let p = entry.map_err(io)?.path();
            if p.is_file() && is_day_file(&p) {
                paths.push(p);
            }
        }
        let mut files = paths
            .into_par_iter()
            .map(|p| Ok((peek_date(&p)?, p)))
            .collect::<Result<Vec<_>, HarnessError>>()?;
        files.sort();
        if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(HarnessError::Config(format!(
                "{} and {} hold the same date {}",
                w[0].1.display(),
                w[1].1.display(),
                w[0].0
            )));
        }
        Ok(Self::Files(files))
    }

    pub fn from_days(mut days: Vec<TradingDay>) -> Result<Self, HarnessError> {
        days.sort_by_key(|d| d.date());
        if let Some(w) = days.windows(2).find(|w| w[0].date() == w[1].date()) {
            return Err(HarnessError::Config(format!("duplicate date {}", w[0].date())));
        }
        Ok(Self::Memory(days.into_iter().map(Arc::new).collect()))
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Files(f) => f.len(),
            Self::Memory(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        match self {
            Self::Files(f) => f[i].0,
            Self::Memory(d) => d[i].date(),
        }
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.len()).map(|i| self.date(i)).collect()
    }

    pub fn load(&self, i: usize) -> Result<Arc<TradingDay>, HarnessError> {
        match self {
            Self::Files(f) => Ok(Arc::new(load_day(&f[i].1)?)),
            Self::Memory(d) => Ok(d[i].clone()),
        }
    }

    /// Indices of days inside `range` and not listed in `skip`.
    pub fn select(&self, range: &DayRange, skip: &[NaiveDate]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| range.contains(self.date(i)) && !skip.contains(&self.date(i)))
            .collect()
    }

    /// Loads the target days and fits each one's normalizer on the three
    /// days before it.
    pub fn prepare(&self, targets: &[usize]) -> Result<Vec<PreparedDay>, HarnessError> {
        for &i in targets {
            if i < NORMALIZER_DAYS {
                return Err(HarnessError::Config(format!(
                    "day {} needs {NORMALIZER_DAYS} earlier days for its normalizer",
                    self.date(i)
                )));
            }
        }
        let mut needed: Vec<usize> = targets.iter().flat_map(|&i| i - NORMALIZER_DAYS..=i).collect();
        needed.sort_unstable();
        needed.dedup();
        let loaded = needed
            .par_iter()
            .map(|&i| Ok((i, self.load(i)?)))
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let get = |i: usize| -> Arc<TradingDay> {
            loaded
                .iter()
                .find(|(j, _)| *j == i)
                .map(|(_, d)| d.clone())
                .expect("loaded above")
        };
        targets
            .par_iter()
            .map(|&i| {
                let prior: Vec<Arc<TradingDay>> = (i - NORMALIZER_DAYS..i).map(get).collect();
                let stats = fit_env_normalizer(&prior)?;
                let day = get(i);
                Ok(PreparedDay {
                    cache: Arc::new(IndicatorCache::new(day.snapshots())),
                    stats: Arc::new(stats),
                    day,
                })
            })
            .collect()
    }
}
