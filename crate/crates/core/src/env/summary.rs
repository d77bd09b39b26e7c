use std::io::Write;

use chrono::NaiveDate;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub date: NaiveDate,
    pub mode: String,
    pub reward_fn: String,
    pub feature_set: u8,
    pub steps: usize,
    pub trades: usize,
    pub daily_return_pct: f64,
    pub max_drawdown_pct: f64,
}

pub fn episode_summary_header() -> [&'static str; 8] {
    [
        "date",
        "mode",
        "reward_fn",
        "feature_set",
        "steps",
        "trades",
        "daily_return_pct",
        "max_drawdown_pct",
    ]
}

pub fn write_episode_summaries(rows: &[EpisodeSummary], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(episode_summary_header())?;
    for r in rows {
        w.write_record([
            r.date.to_string(),
            r.mode.clone(),
            r.reward_fn.clone(),
            r.feature_set.to_string(),
            r.steps.to_string(),
            r.trades.to_string(),
            r.daily_return_pct.to_string(),
            r.max_drawdown_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
