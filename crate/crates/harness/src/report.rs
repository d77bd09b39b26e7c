//! Backtest result rows, aggregation and the results grid.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lobmm_core::rewards::RewardFn;

use crate::HarnessError;

/// Date label of the aggregate row.
pub const TOTAL: &str = "total";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub reward: String,
    pub feature_set: u8,
    pub algorithm: String,
    pub mode: String,
    /// Trading date, or [`TOTAL`] for the aggregate row.
    pub date: String,
    /// Daily return; on the total row the sum of daily returns.
    pub return_pct: f64,
    /// Compounded daily returns; total row only.
    pub compounded_pct: Option<f64>,
    pub trades: usize,
    pub steps: usize,
    pub max_drawdown_pct: f64,
}

impl ResultRow {
    pub fn is_total(&self) -> bool {
        self.date == TOTAL
    }
}

/// Sum of daily percentages.
pub fn total_return_pct(daily: &[f64]) -> f64 {
    daily.iter().sum()
}

/// Daily percentages compounded into one percentage.
pub fn compounded_return_pct(daily: &[f64]) -> f64 {
    (daily.iter().map(|r| 1.0 + r / 100.0).product::<f64>() - 1.0) * 100.0
}

/// The aggregate row over per-day rows of one experiment.
pub fn total_row(days: &[ResultRow]) -> Option<ResultRow> {
    let first = days.first()?;
    let daily: Vec<f64> = days.iter().map(|r| r.return_pct).collect();
    Some(ResultRow {
        date: TOTAL.into(),
        return_pct: total_return_pct(&daily),
        compounded_pct: Some(compounded_return_pct(&daily)),
        trades: days.iter().map(|r| r.trades).sum(),
        steps: days.iter().map(|r| r.steps).sum(),
        max_drawdown_pct: days.iter().map(|r| r.max_drawdown_pct).fold(0.0, f64::max),
        ..first.clone()
    })
}

/// Writes rows after a `#`-prefixed header block.
pub fn write_results<W: Write>(rows: &[ResultRow], echo: &str, mut out: W) -> Result<(), HarnessError> {
    out.write_all(echo.as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    rdr.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

/// Every `results.csv` below `dir`, in path order.
pub fn find_results(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = std::fs::read_dir(&d).map_err(|e| HarnessError::Io {
            path: d.display().to_string(),
            source: e,
        })?;
        for entry in entries {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "results.csv") {
                found.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Two decimals; negatives wrapped in parentheses, e.g. `(-12.05)`.
pub fn format_pnl(v: f64) -> String {
    let s = format!("{v:.2}");
    if s.starts_with('-') && s != "-0.00" {
        format!("({s})")
    } else {
        s.trim_start_matches('-').to_string()
    }
}

/// Formatted cell; missing results stay blank.
pub fn format_cell(v: Option<f64>) -> String {
    v.map(format_pnl).unwrap_or_default()
}

/// Total returns keyed by mode, then reward, then (algorithm, feature set).
/// Returns by reward for one (algorithm, feature set) column.
type Column = BTreeMap<String, f64>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid {
    cells: BTreeMap<String, BTreeMap<(String, u8), Column>>,
}

fn reward_rank(name: &str) -> usize {
    RewardFn::NAMES
        .iter()
        .position(|n| *n == name)
        .unwrap_or(RewardFn::NAMES.len())
}

impl Grid {
    /// Builds the grid from total rows; later rows for the same cell win.
    pub fn from_rows(rows: &[ResultRow]) -> Self {
        let mut g = Self::default();
        for r in rows.iter().filter(|r| r.is_total()) {
            g.cells
                .entry(r.mode.clone())
                .or_default()
                .entry((r.algorithm.clone(), r.feature_set))
                .or_default()
                .insert(r.reward.clone(), r.return_pct);
        }
        g
    }

    pub fn modes(&self) -> Vec<&str> {
        self.cells.keys().map(String::as_str).collect()
    }

    pub fn get(&self, mode: &str, reward: &str, algorithm: &str, set: u8) -> Option<f64> {
        self.cells
            .get(mode)?
            .get(&(algorithm.to_string(), set))?
            .get(reward)
            .copied()
    }

    fn columns(&self, mode: &str) -> Vec<(String, u8)> {
        self.cells
            .get(mode)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    fn rewards(&self, mode: &str) -> Vec<String> {
        let mut set: BTreeSet<String> = BTreeSet::new();
        if let Some(m) = self.cells.get(mode) {
            for col in m.values() {
                set.extend(col.keys().cloned());
            }
        }
        let mut v: Vec<String> = set.into_iter().collect();
        v.sort_by_key(|r| (reward_rank(r), r.clone()));
        v
    }

    /// Header plus one row per reward function for `mode`.
    pub fn table(&self, mode: &str) -> Vec<Vec<String>> {
        let cols = self.columns(mode);
        let mut header = vec!["reward".to_string()];
        header.extend(cols.iter().map(|(a, s)| format!("{a} set{s}")));
        let mut out = vec![header];
        for reward in self.rewards(mode) {
            let mut row = vec![reward.clone()];
            row.extend(cols.iter().map(|(a, s)| format_cell(self.get(mode, &reward, a, *s))));
            out.push(row);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for mode in self.modes() {
            for (i, row) in self.table(mode).into_iter().enumerate() {
                let lead = if i == 0 { "mode" } else { mode };
                w.write_record(std::iter::once(lead.to_string()).chain(row))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Right-aligned text tables, one per mode.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for mode in self.modes() {
            let table = self.table(mode);
            let ncols = table[0].len();
            let widths: Vec<usize> = (0..ncols)
                .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
                .collect();
            out.push_str(&format!("{mode}-event total return (%)\n"));
            for row in &table {
                let cells: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (s, &w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                    .collect();
                out.push_str(cells.join("  ").trim_end());
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}
