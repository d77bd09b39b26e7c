use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{utc_date, DataError, Level, LobSnapshot, TradingDay, LEVELS};

const COLUMNS: usize = 1 + 10 * LEVELS + 2;

/// Column names in file order.
pub fn csv_header() -> Vec<String> {
    let mut cols = vec!["ts_ms".to_string()];
    for group in [
        "bid_px",
        "bid_qty",
        "ask_px",
        "ask_qty",
        "cancel_bid",
        "cancel_ask",
        "limit_bid",
        "limit_ask",
        "market_bid",
        "market_ask",
    ] {
        cols.extend((0..LEVELS).map(|i| format!("{group}_{i}")));
    }
    cols.push("buy_notional".into());
    cols.push("sell_notional".into());
    cols
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads and validates one trading day. Files ending in `.gz` are
/// decompressed transparently.
pub fn load_day(path: impl AsRef<Path>) -> Result<TradingDay, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    read_day(reader)
}

/// Date of a day file, read from its first snapshot only.
pub fn peek_date(path: impl AsRef<Path>) -> Result<NaiveDate, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut record = csv::StringRecord::new();
    let parse_err = |message: String| DataError::Parse { row: 1, message };
    if !rdr.read_record(&mut record).map_err(|e| parse_err(e.to_string()))? {
        return Err(DataError::TooShort(0));
    }
    let ts: i64 = record
        .get(0)
        .unwrap_or_default()
        .parse()
        .map_err(|e| parse_err(format!("ts_ms: {e}")))?;
    utc_date(ts).ok_or_else(|| parse_err(format!("timestamp {ts} out of range")))
}

/// Parses a day from any CSV source.
pub fn read_day(reader: impl Read) -> Result<TradingDay, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| DataError::Parse {
        row: 0,
        message: e.to_string(),
    })?;
    let expected = csv_header();
    if header.len() != COLUMNS || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(DataError::Parse {
            row: 0,
            message: format!("header does not match the {COLUMNS}-column snapshot schema"),
        });
    }

    let mut snapshots = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0;
    loop {
        row += 1;
        match rdr.read_record(&mut record) {
            Ok(true) => snapshots.push(parse_record(&record, row)?),
            Ok(false) => break,
            Err(e) => {
                return Err(DataError::Parse {
                    row,
                    message: e.to_string(),
                })
            }
        }
    }
    TradingDay::new(snapshots)
}

fn parse_record(record: &csv::StringRecord, row: usize) -> Result<LobSnapshot, DataError> {
    if record.len() != COLUMNS {
        return Err(DataError::Parse {
            row,
            message: format!("expected {COLUMNS} columns, found {}", record.len()),
        });
    }
    let field = |i: usize| -> Result<f64, DataError> {
        record[i].parse::<f64>().map_err(|_| DataError::Parse {
            row,
            message: format!("column {i}: invalid number {:?}", &record[i]),
        })
    };
    let timestamp = record[0].parse::<i64>().map_err(|_| DataError::Parse {
        row,
        message: format!("invalid timestamp {:?}", &record[0]),
    })?;

    let block = |b: usize| -> Result<[f64; LEVELS], DataError> {
        let mut out = [0.0; LEVELS];
        for (i, v) in out.iter_mut().enumerate() {
            *v = field(1 + b * LEVELS + i)?;
        }
        Ok(out)
    };
    let (bid_px, bid_qty, ask_px, ask_qty) = (block(0)?, block(1)?, block(2)?, block(3)?);
    Ok(LobSnapshot {
        timestamp,
        bids: std::array::from_fn(|i| Level::new(bid_px[i], bid_qty[i])),
        asks: std::array::from_fn(|i| Level::new(ask_px[i], ask_qty[i])),
        cancel_notional: [block(4)?, block(5)?],
        limit_notional: [block(6)?, block(7)?],
        market_notional: [block(8)?, block(9)?],
        buy_notional: field(COLUMNS - 2)?,
        sell_notional: field(COLUMNS - 1)?,
    })
}

/// Writes a day in the snapshot CSV schema, gzip-compressed when the path
/// ends in `.gz`.
pub fn write_day(day: &TradingDay, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_day_to(day, &mut enc).map_err(|e| io_err(path, e))?;
        enc.finish().and_then(|mut w| w.flush()).map_err(|e| io_err(path, e))
    } else {
        let mut w = BufWriter::new(file);
        write_day_to(day, &mut w).map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))
    }
}

pub fn write_day_to(day: &TradingDay, out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    let mut fields: Vec<String> = Vec::with_capacity(COLUMNS);
    for s in day.snapshots() {
        fields.clear();
        fields.push(s.timestamp.to_string());
        fields.extend(s.bids.iter().map(|l| l.price.to_string()));
        fields.extend(s.bids.iter().map(|l| l.qty.to_string()));
        fields.extend(s.asks.iter().map(|l| l.price.to_string()));
        fields.extend(s.asks.iter().map(|l| l.qty.to_string()));
        for flow in [&s.cancel_notional, &s.limit_notional, &s.market_notional] {
            for side in flow {
                fields.extend(side.iter().map(|v| v.to_string()));
            }
        }
        fields.push(s.buy_notional.to_string());
        fields.push(s.sell_notional.to_string());
        w.write_record(&fields)?;
    }
    w.flush()
}
