//! `.l3e` binary event files and their `.l3e.csv` mirror.
//!
//! A file is a 24-byte header followed by fixed-width 58-byte records, all
//! little-endian:
//!
//! ```text
//! header   magic "L3EV" | version u16 | record_len u16 | tick_size f64 | session_end_ns u64
//! record   kind u8 | ts u64 | order_id u64 | side u8 | price i64 | qty u64
//!          | new_order_id u64 | new_price i64 | new_qty u64
//! ```
//!
//! Kind codes follow ITCH letters: `A` add, `E` execute, `X` cancel,
//! `D` delete, `U` replace. Side is `B` or `S`. The three `new_*` fields are
//! zero except on replace records.

use std::io::{BufRead, Read, Write};

use crate::orderbook::{BookEvent, EventKind, Nanos, Side};

use super::MarketDataError;

pub const MAGIC: &[u8; 4] = b"L3EV";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const RECORD_LEN: usize = 58;

pub const CSV_HEADER: &str = "kind,ts,order_id,side,price,qty,new_order_id,new_price,new_qty";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FileHeader {
    pub tick_size: f64,
    pub session_end_ns: Nanos,
}

fn kind_code(kind: EventKind) -> u8 {
    match kind {
        EventKind::Add => b'A',
        EventKind::Execute => b'E',
        EventKind::Cancel => b'X',
        EventKind::Delete => b'D',
        EventKind::Replace => b'U',
    }
}

fn kind_from_code(code: u8) -> Result<EventKind, MarketDataError> {
    Ok(match code {
        b'A' => EventKind::Add,
        b'E' => EventKind::Execute,
        b'X' => EventKind::Cancel,
        b'D' => EventKind::Delete,
        b'U' => EventKind::Replace,
        other => return Err(MarketDataError::UnknownKind(other)),
    })
}

fn side_code(side: Side) -> u8 {
    match side {
        Side::Buy => b'B',
        Side::Sell => b'S',
    }
}

fn side_from_code(code: u8) -> Result<Side, MarketDataError> {
    match code {
        b'B' => Ok(Side::Buy),
        b'S' => Ok(Side::Sell),
        other => Err(MarketDataError::UnknownSide(other)),
    }
}

/// Field-level validity shared by the binary and CSV decoders.
pub fn validate_event(ev: &BookEvent) -> Result<(), MarketDataError> {
    match ev.kind {
        EventKind::Add | EventKind::Execute | EventKind::Cancel if ev.quantity == 0 => {
            return Err(MarketDataError::ZeroQuantity)
        }
        EventKind::Replace if ev.new_quantity == 0 => return Err(MarketDataError::ZeroQuantity),
        _ => {}
    }
    if ev.kind == EventKind::Add && ev.price <= 0 {
        return Err(MarketDataError::NonPositivePrice(ev.price));
    }
    if ev.kind == EventKind::Replace && ev.new_price <= 0 {
        return Err(MarketDataError::NonPositivePrice(ev.new_price));
    }
    if ev.kind != EventKind::Replace && (ev.new_order_id != 0 || ev.new_price != 0 || ev.new_quantity != 0) {
        return Err(MarketDataError::UnexpectedReplaceFields);
    }
    Ok(())
}

pub fn encode_event(ev: &BookEvent) -> [u8; RECORD_LEN] {
    let mut out = [0u8; RECORD_LEN];
    out[0] = kind_code(ev.kind);
    out[1..9].copy_from_slice(&ev.timestamp.to_le_bytes());
    out[9..17].copy_from_slice(&ev.order_id.to_le_bytes());
    out[17] = side_code(ev.side);
    out[18..26].copy_from_slice(&ev.price.to_le_bytes());
    out[26..34].copy_from_slice(&ev.quantity.to_le_bytes());
    out[34..42].copy_from_slice(&ev.new_order_id.to_le_bytes());
    out[42..50].copy_from_slice(&ev.new_price.to_le_bytes());
    out[50..58].copy_from_slice(&ev.new_quantity.to_le_bytes());
    out
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

fn i64_at(bytes: &[u8], at: usize) -> i64 {
    i64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

/// Decode exactly one record.
pub fn parse_event(bytes: &[u8]) -> Result<BookEvent, MarketDataError> {
    if bytes.len() != RECORD_LEN {
        return Err(MarketDataError::TruncatedRecord {
            expected: RECORD_LEN,
            got: bytes.len(),
        });
    }
    let ev = BookEvent {
        kind: kind_from_code(bytes[0])?,
        timestamp: u64_at(bytes, 1),
        order_id: u64_at(bytes, 9),
        side: side_from_code(bytes[17])?,
        price: i64_at(bytes, 18),
        quantity: u64_at(bytes, 26),
        new_order_id: u64_at(bytes, 34),
        new_price: i64_at(bytes, 42),
        new_quantity: u64_at(bytes, 50),
    };
    validate_event(&ev)?;
    Ok(ev)
}

pub fn write_l3e<W: Write>(mut w: W, header: &FileHeader, events: &[BookEvent]) -> Result<(), MarketDataError> {
    let mut head = [0u8; HEADER_LEN];
    head[0..4].copy_from_slice(MAGIC);
    head[4..6].copy_from_slice(&VERSION.to_le_bytes());
    head[6..8].copy_from_slice(&(RECORD_LEN as u16).to_le_bytes());
    head[8..16].copy_from_slice(&header.tick_size.to_le_bytes());
    head[16..24].copy_from_slice(&header.session_end_ns.to_le_bytes());
    w.write_all(&head)?;
    for ev in events {
        w.write_all(&encode_event(ev))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_l3e<R: Read>(mut r: R) -> Result<(FileHeader, Vec<BookEvent>), MarketDataError> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|_| MarketDataError::BadHeader("file shorter than header"))?;
    if &head[0..4] != MAGIC {
        return Err(MarketDataError::BadHeader("bad magic"));
    }
    if u16::from_le_bytes([head[4], head[5]]) != VERSION {
        return Err(MarketDataError::BadHeader("unsupported version"));
    }
    if u16::from_le_bytes([head[6], head[7]]) as usize != RECORD_LEN {
        return Err(MarketDataError::BadHeader("unexpected record length"));
    }
    let header = FileHeader {
        tick_size: f64::from_le_bytes(head[8..16].try_into().expect("8 bytes")),
        session_end_ns: u64_at(&head, 16),
    };
    if !(header.tick_size > 0.0) {
        return Err(MarketDataError::BadHeader("tick size must be positive"));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let mut events = Vec::with_capacity(body.len() / RECORD_LEN);
    let mut chunks = body.chunks_exact(RECORD_LEN);
    for chunk in &mut chunks {
        events.push(parse_event(chunk)?);
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        return Err(MarketDataError::TruncatedRecord {
            expected: RECORD_LEN,
            got: rest.len(),
        });
    }
    Ok((header, events))
}

/// CSV mirror: one header line, then one line per record with the binary
/// field order. Kind and side use their letter codes.
pub fn write_csv<W: Write>(mut w: W, events: &[BookEvent]) -> Result<(), MarketDataError> {
    writeln!(w, "{CSV_HEADER}")?;
    for ev in events {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            kind_code(ev.kind) as char,
            ev.timestamp,
            ev.order_id,
            side_code(ev.side) as char,
            ev.price,
            ev.quantity,
            ev.new_order_id,
            ev.new_price,
            ev.new_quantity
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<BookEvent>, MarketDataError> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(MarketDataError::BadHeader("missing csv header")),
    }
    let mut events = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let bad = || MarketDataError::CsvField { line: n + 2 };
        if fields.len() != 9 {
            return Err(bad());
        }
        let code = |s: &str| -> Result<u8, MarketDataError> {
            match s.as_bytes() {
                [c] => Ok(*c),
                _ => Err(bad()),
            }
        };
        let ev = BookEvent {
            kind: kind_from_code(code(fields[0])?)?,
            timestamp: fields[1].parse().map_err(|_| bad())?,
            order_id: fields[2].parse().map_err(|_| bad())?,
            side: side_from_code(code(fields[3])?)?,
            price: fields[4].parse().map_err(|_| bad())?,
            quantity: fields[5].parse().map_err(|_| bad())?,
            new_order_id: fields[6].parse().map_err(|_| bad())?,
            new_price: fields[7].parse().map_err(|_| bad())?,
            new_quantity: fields[8].parse().map_err(|_| bad())?,
        };
        validate_event(&ev)?;
        events.push(ev);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn add_round_trip() {
        let ev = BookEvent::add(0, 1, Side::Buy, 100, 50);
        let bytes = encode_event(&ev);
        assert_eq!(parse_event(&bytes).unwrap(), ev);
        assert_eq!(bytes[0], b'A');
    }

    #[test]
    fn rejects_malformed() {
        let mut bytes = encode_event(&BookEvent::add(0, 1, Side::Buy, 100, 50));
        bytes[0] = 0xFF;
        assert_eq!(parse_event(&bytes), Err(MarketDataError::UnknownKind(0xFF)));

        let bytes = encode_event(&BookEvent::add(0, 1, Side::Buy, 100, 50));
        assert!(matches!(
            parse_event(&bytes[..40]),
            Err(MarketDataError::TruncatedRecord { got: 40, .. })
        ));

        let mut bytes = encode_event(&BookEvent::execute(0, 1, Side::Buy, 100, 5));
        bytes[26..34].copy_from_slice(&0u64.to_le_bytes());
        assert_eq!(parse_event(&bytes), Err(MarketDataError::ZeroQuantity));

        let mut bytes = encode_event(&BookEvent::add(0, 1, Side::Buy, 100, 5));
        bytes[17] = b'Q';
        assert_eq!(parse_event(&bytes), Err(MarketDataError::UnknownSide(b'Q')));
    }

    #[test]
    fn file_and_csv_round_trip() {
        let events = vec![
            BookEvent::add(0, 1, Side::Buy, 100, 50),
            BookEvent::add(0, 2, Side::Sell, 102, 40),
            BookEvent::execute(5, 1, Side::Buy, 100, 10),
            BookEvent::cancel(6, 2, Side::Sell, 102, 10),
            BookEvent::replace(7, 2, Side::Sell, 102, 3, 103, 30),
            BookEvent::delete(8, 3, Side::Sell, 103),
        ];
        let header = FileHeader {
            tick_size: 0.01,
            session_end_ns: 1_000,
        };
        let mut buf = Vec::new();
        write_l3e(&mut buf, &header, &events).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + events.len() * RECORD_LEN);
        let (h, back) = read_l3e(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, events);

        let mut csv = Vec::new();
        write_csv(&mut csv, &events).unwrap();
        assert_eq!(read_csv(&csv[..]).unwrap(), events);

        // a partial trailing record is reported, not silently dropped
        assert!(matches!(
            read_l3e(&buf[..buf.len() - 3]),
            Err(MarketDataError::TruncatedRecord { .. })
        ));
        assert!(matches!(read_l3e(&b"NOPE"[..]), Err(MarketDataError::BadHeader(_))));
    }

    pub(crate) fn arb_event() -> impl Strategy<Value = BookEvent> {
        let side = prop_oneof![Just(Side::Buy), Just(Side::Sell)];
        (0u8..5, any::<u64>(), any::<u64>(), side, 1i64..i64::MAX, 1u64..u64::MAX, any::<u64>(), 1i64..i64::MAX)
            .prop_map(|(k, ts, id, side, price, qty, new_id, new_price)| match k {
                0 => BookEvent::add(ts, id, side, price, qty),
                1 => BookEvent::execute(ts, id, side, price, qty),
                2 => BookEvent::cancel(ts, id, side, price, qty),
                3 => BookEvent::delete(ts, id, side, price),
                _ => BookEvent::replace(ts, id, side, price, new_id, new_price, qty),
            })
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(ev in arb_event()) {
            let bytes = encode_event(&ev);
            let parsed = parse_event(&bytes).unwrap();
            prop_assert_eq!(parsed, ev);
            prop_assert_eq!(encode_event(&parsed), bytes);
        }

        #[test]
        fn parse_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..80)) {
            let _ = parse_event(&bytes);
        }
    }
}
