use std::io::Write;

use super::Fill;

pub fn trade_log_header() -> [&'static str; 9] {
    [
        "ts_ms",
        "action_id",
        "side",
        "price",
        "qty",
        "role",
        "fee",
        "rpnl_step",
        "inventory_after",
    ]
}

/// Writes fills as trade-log CSV rows under a header.
pub fn write_trade_log<'a>(fills: impl IntoIterator<Item = &'a Fill>, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trade_log_header())?;
    for f in fills {
        w.write_record([
            f.ts_ms.to_string(),
            f.action_id.to_string(),
            f.side.as_str().to_string(),
            f.price.to_string(),
            f.qty.to_string(),
            f.role.as_str().to_string(),
            f.fee.to_string(),
            f.rpnl.to_string(),
            f.inventory_after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
