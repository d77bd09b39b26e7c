//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

#![allow(clippy::needless_range_loop)]

mod events;
mod learning;
mod ledger;
mod normalization;
mod rewards;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Outcome detail of a criterion that ran to completion.
pub type Outcome = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn report_format() -> Outcome {
    let got = lobmm::report::format_pnl(-12.05);
    ensure(got == "(-12.05)", || format!("format_pnl(-12.05) = {got:?}"))?;
    let positive = lobmm::report::format_pnl(17.61);
    ensure(positive == "17.61", || format!("format_pnl(17.61) = {positive:?}"))?;
    Ok(format!("-12.05 renders as {got}"))
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "reward oracles",
        budget: Some(Duration::from_secs(1)),
        run: rewards::oracles,
    },
    Criterion {
        id: 2,
        name: "differential Sharpe stream",
        budget: None,
        run: rewards::dsr_stream,
    },
    Criterion {
        id: 3,
        name: "price-event equivalence and density",
        budget: Some(Duration::from_secs(30)),
        run: events::price_event_equivalence,
    },
    Criterion {
        id: 4,
        name: "execution ledger",
        budget: None,
        run: ledger::random_episodes,
    },
    Criterion {
        id: 5,
        name: "fee and slippage arithmetic",
        budget: None,
        run: ledger::scripted_round_trips,
    },
    Criterion {
        id: 6,
        name: "gradient checks",
        budget: Some(Duration::from_secs(60)),
        run: learning::gradient_checks,
    },
    Criterion {
        id: 7,
        name: "learning smoke test",
        budget: Some(Duration::from_secs(15 * 60)),
        run: learning::smoke_test,
    },
    Criterion {
        id: 8,
        name: "event-mode accounting identity",
        budget: None,
        run: events::mode_identity,
    },
    Criterion {
        id: 9,
        name: "normalization",
        budget: None,
        run: normalization::known_moments,
    },
    Criterion {
        id: 10,
        name: "table formatting",
        budget: None,
        run: report_format,
    },
];

fn main() -> ExitCode {
    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let elapsed = t.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!(
                "took {:.1}s, budget {:.0}s",
                elapsed.as_secs_f64(),
                b.as_secs_f64()
            )),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("{tag} {:>2} {} ({:.2}s): {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
