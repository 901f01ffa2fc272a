//! Event streams: the on-disk format, a synthetic market generator and
//! traded-volume accumulation.

pub mod codec;
pub mod generator;
pub mod volume;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::orderbook::{BookError, BookEvent, Nanos, OrderBook};

pub use codec::{parse_event, encode_event, FileHeader};
pub use generator::{generate_market, GeneratedMarket, SyntheticMarketConfig};
pub use volume::{accumulate_vwap, VolumeProfile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarketDataError {
    #[error("truncated record: expected {expected} bytes, got {got}")]
    TruncatedRecord { expected: usize, got: usize },
    #[error("unknown event kind code {0:#04x}")]
    UnknownKind(u8),
    #[error("unknown side code {0:#04x}")]
    UnknownSide(u8),
    #[error("zero quantity")]
    ZeroQuantity,
    #[error("non-positive price {0}")]
    NonPositivePrice(i64),
    #[error("replace fields set on a non-replace record")]
    UnexpectedReplaceFields,
    #[error("bad file header: {0}")]
    BadHeader(&'static str),
    #[error("malformed csv line {line}")]
    CsvField { line: usize },
    #[error("no executions in window")]
    NoTrades,
    #[error("invalid market config: {0}")]
    InvalidConfig(String),
    #[error("stream rejected by the book: {0}")]
    Book(#[from] BookError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MarketDataError {
    fn from(e: std::io::Error) -> Self {
        MarketDataError::Io(e.to_string())
    }
}

/// One trading session's public event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSession {
    pub tick_size: f64,
    pub session_end_ns: Nanos,
    pub events: Vec<BookEvent>,
}

impl MarketSession {
    pub fn header(&self) -> FileHeader {
        FileHeader {
            tick_size: self.tick_size,
            session_end_ns: self.session_end_ns,
        }
    }

    pub fn load(path: &Path) -> Result<Self, MarketDataError> {
        let file = File::open(path)?;
        let (header, events) = codec::read_l3e(BufReader::new(file))?;
        Ok(MarketSession {
            tick_size: header.tick_size,
            session_end_ns: header.session_end_ns,
            events,
        })
    }

    /// The CSV mirror has no header block, so tick size and session end come
    /// from the caller.
    pub fn load_csv(path: &Path, tick_size: f64, session_end_ns: Nanos) -> Result<Self, MarketDataError> {
        let events = codec::read_csv(BufReader::new(File::open(path)?))?;
        Ok(MarketSession {
            tick_size,
            session_end_ns,
            events,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), MarketDataError> {
        let file = File::create(path)?;
        codec::write_l3e(BufWriter::new(file), &self.header(), &self.events)
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), MarketDataError> {
        codec::write_csv(BufWriter::new(File::create(path)?), &self.events)
    }

    /// Replay the whole stream and return the final mid in ticks; this is the
    /// session close used by the oracle rollout.
    pub fn closing_mid(&self) -> Result<Option<f64>, MarketDataError> {
        let mut book = OrderBook::new(self.tick_size);
        for ev in &self.events {
            book.apply(ev)?;
        }
        Ok(book.mid_ticks())
    }
}
