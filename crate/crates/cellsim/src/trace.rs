//! Packet-event logs and per-connection trace assembly.
//!
//! Input is a normalized CSV (one packet event per line), not a raw
//! capture: the producer is expected to have filtered to the relevant
//! port and flattened TCP headers to the columns below.

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Required header line of a packet log.
pub const LOG_HEADER: &str = "timestamp,conn_key,direction,seq,payload_len,flags,ack";

/// Direction of a captured segment relative to the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    ToClient,
    ToServer,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::ToClient => "toClient",
            Direction::ToServer => "toServer",
        })
    }
}

impl FromStr for Direction {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "toClient" => Ok(Direction::ToClient),
            "toServer" => Ok(Direction::ToServer),
            _ => Err(()),
        }
    }
}

/// TCP flag subset carried by the log (`|`-joined in the CSV).
#[derive(
    Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct TcpFlags {
    pub syn: bool,
    pub ack: bool,
    pub fin: bool,
    pub rst: bool,
}

impl TcpFlags {
    pub const SYN: TcpFlags = TcpFlags { syn: true, ack: false, fin: false, rst: false };

    pub fn syn_ack() -> TcpFlags {
        TcpFlags { syn: true, ack: true, ..TcpFlags::default() }
    }

    pub fn ack_only() -> TcpFlags {
        TcpFlags { ack: true, ..TcpFlags::default() }
    }
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.syn {
            parts.push("SYN");
        }
        if self.ack {
            parts.push("ACK");
        }
        if self.fin {
            parts.push("FIN");
        }
        if self.rst {
            parts.push("RST");
        }
        f.write_str(&parts.join("|"))
    }
}

impl FromStr for TcpFlags {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        let mut flags = TcpFlags::default();
        if s.is_empty() {
            return Ok(flags);
        }
        for part in s.split('|') {
            match part {
                "SYN" => flags.syn = true,
                "ACK" => flags.ack = true,
                "FIN" => flags.fin = true,
                "RST" => flags.rst = true,
                _ => return Err(()),
            }
        }
        Ok(flags)
    }
}

/// One captured segment event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PacketRecord {
    pub timestamp: SimTime,
    pub conn_key: String,
    pub direction: Direction,
    /// Byte offset in the server byte stream.
    pub seq: u64,
    pub payload_len: u64,
    pub flags: TcpFlags,
    /// Byte offset acknowledged by this segment.
    pub ack: u64,
}

impl PacketRecord {
    /// Server data segment: payload flowing toward the client.
    pub fn is_server_data(&self) -> bool {
        self.direction == Direction::ToClient && self.payload_len > 0
    }

    /// Pure acknowledgment from the client: no payload, ACK set.
    pub fn is_pure_client_ack(&self) -> bool {
        self.direction == Direction::ToServer && self.payload_len == 0 && self.flags.ack
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line 1: expected header `{LOG_HEADER}`, found {found:?}")]
    BadHeader { found: String },
    #[error("line {line}: expected 7 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid {field}: {value:?}")]
    BadField { line: usize, field: &'static str, value: String },
}

/// Parses a packet log. The header line is required unless the input is
/// entirely empty. Records are returned in file order.
pub fn parse_packet_log(input: &str) -> Result<Vec<PacketRecord>, ParseError> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, header)) if header.trim_end() == LOG_HEADER => {}
        Some((_, header)) => {
            return Err(ParseError::BadHeader { found: header.to_string() });
        }
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(ParseError::FieldCount { line: line_no, found: fields.len() });
        }
        let bad = |field: &'static str, value: &str| ParseError::BadField {
            line: line_no,
            field,
            value: value.to_string(),
        };

        let ts: f64 =
            fields[0].parse().ok().filter(|v: &f64| *v >= 0.0).ok_or_else(|| bad("timestamp", fields[0]))?;
        let direction: Direction = fields[2].parse().map_err(|_| bad("direction", fields[2]))?;
        let seq: u64 = fields[3].parse().map_err(|_| bad("seq", fields[3]))?;
        let payload_len: i64 = fields[4].parse().map_err(|_| bad("payload_len", fields[4]))?;
        if payload_len < 0 {
            return Err(bad("payload_len", fields[4]));
        }
        let flags: TcpFlags = fields[5].parse().map_err(|_| bad("flags", fields[5]))?;
        let ack: u64 = fields[6].parse().map_err(|_| bad("ack", fields[6]))?;

        records.push(PacketRecord {
            timestamp: SimTime::from_secs_f64(ts),
            conn_key: fields[1].to_string(),
            direction,
            seq,
            payload_len: payload_len as u64,
            flags,
            ack,
        });
    }
    Ok(records)
}

/// Renders records in the documented CSV layout, header included.
pub fn write_packet_log(records: &[PacketRecord]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.timestamp, r.conn_key, r.direction, r.seq, r.payload_len, r.flags, r.ack
        ));
    }
    out
}

/// All events of one client-server TCP connection, anchored at SYN receipt.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionTrace {
    pub conn_key: String,
    /// Timestamp of the first toServer SYN.
    pub start_time: SimTime,
    /// Records sorted by timestamp.
    pub records: Vec<PacketRecord>,
    /// Time from SYN (toServer) to the first SYN+ACK (toClient); absent
    /// when the handshake never completed inside the capture.
    pub syn_to_synack_rtt: Option<SimTime>,
}

impl ConnectionTrace {
    pub fn end_time(&self) -> SimTime {
        self.records.last().map(|r| r.timestamp).unwrap_or(self.start_time)
    }

    pub fn syn_to_synack_rtt_ms(&self) -> Option<f64> {
        self.syn_to_synack_rtt.map(SimTime::as_millis_f64)
    }
}

/// Result of grouping records into traces. Connections captured
/// mid-stream (first toServer record without SYN, or no toServer record
/// at all) are dropped and counted rather than failing the run.
#[derive(Debug, Clone)]
pub struct AssemblyReport {
    pub traces: Vec<ConnectionTrace>,
    pub dropped: usize,
}

/// Groups records by connection key and anchors each trace at its SYN.
/// Insensitive to input order: records are sorted by timestamp (full
/// record content breaks ties) and traces come out sorted by start time
/// and key.
pub fn assemble_connections(records: Vec<PacketRecord>) -> AssemblyReport {
    let mut by_key: BTreeMap<String, Vec<PacketRecord>> = BTreeMap::new();
    for r in records {
        by_key.entry(r.conn_key.clone()).or_default().push(r);
    }

    let mut traces = Vec::new();
    let mut dropped = 0usize;
    for (conn_key, mut recs) in by_key {
        recs.sort();
        let first_to_server = recs.iter().find(|r| r.direction == Direction::ToServer);
        let syn = match first_to_server {
            Some(r) if r.flags.syn => r.clone(),
            _ => {
                dropped += 1;
                continue;
            }
        };
        let start_time = syn.timestamp;
        let syn_to_synack_rtt = recs
            .iter()
            .find(|r| {
                r.direction == Direction::ToClient
                    && r.flags.syn
                    && r.flags.ack
                    && r.timestamp >= start_time
            })
            .map(|r| r.timestamp - start_time);
        traces.push(ConnectionTrace { conn_key, start_time, records: recs, syn_to_synack_rtt });
    }
    traces.sort_by(|a, b| (a.start_time, &a.conn_key).cmp(&(b.start_time, &b.conn_key)));
    AssemblyReport { traces, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_input_is_empty() {
        assert!(parse_packet_log("").unwrap().is_empty());
    }

    #[test]
    fn single_syn_line_parses() {
        let log = format!("{LOG_HEADER}\n0.000000,c1,toServer,0,0,SYN,0\n");
        let recs = parse_packet_log(&log).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].flags.syn);
        assert!(!recs[0].flags.ack);
        assert_eq!(recs[0].timestamp, SimTime::ZERO);
    }

    #[test]
    fn negative_payload_is_an_error() {
        let log = format!("{LOG_HEADER}\n0.000000,c1,toServer,0,-3,SYN,0\n");
        match parse_packet_log(&log) {
            Err(ParseError::BadField { line: 2, field: "payload_len", .. }) => {}
            other => panic!("expected payload_len error, got {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_an_error() {
        let log = "0.000000,c1,toServer,0,0,SYN,0\n";
        assert!(matches!(parse_packet_log(log), Err(ParseError::BadHeader { .. })));
    }

    #[test]
    fn groups_by_key_and_drops_mid_stream_connections() {
        let log = format!(
            "{LOG_HEADER}\n\
             0.000000,a,toServer,0,0,SYN,0\n\
             0.010000,b,toServer,0,0,SYN,0\n\
             0.020000,c,toServer,100,1460,ACK,0\n"
        );
        let report = assemble_connections(parse_packet_log(&log).unwrap());
        assert_eq!(report.traces.len(), 2);
        assert_eq!(report.dropped, 1);
    }

    #[test]
    fn handshake_rtt_is_syn_to_synack() {
        let log = format!(
            "{LOG_HEADER}\n\
             0.000000,a,toServer,0,0,SYN,0\n\
             0.070000,a,toClient,0,0,SYN|ACK,1\n\
             0.140000,a,toServer,0,0,ACK,1\n"
        );
        let report = assemble_connections(parse_packet_log(&log).unwrap());
        assert_eq!(report.traces[0].syn_to_synack_rtt_ms(), Some(70.0));
    }

    #[test]
    fn incomplete_handshake_has_no_rtt() {
        let log = format!("{LOG_HEADER}\n0.000000,a,toServer,0,0,SYN,0\n");
        let report = assemble_connections(parse_packet_log(&log).unwrap());
        assert_eq!(report.traces[0].syn_to_synack_rtt, None);
    }

    fn arb_record() -> impl Strategy<Value = PacketRecord> {
        (
            0u64..10_000_000,
            0usize..3,
            prop_oneof![Just(Direction::ToClient), Just(Direction::ToServer)],
            0u64..1_000_000,
            0u64..3000,
            (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()),
            0u64..1_000_000,
        )
            .prop_map(|(us, key, direction, seq, payload_len, (syn, ack, fin, rst), acked)| {
                PacketRecord {
                    timestamp: SimTime::from_micros(us),
                    conn_key: format!("k{key}"),
                    direction,
                    seq,
                    payload_len,
                    flags: TcpFlags { syn, ack, fin, rst },
                    ack: acked,
                }
            })
    }

    proptest! {
        /// Serializing parsed records and re-parsing yields identical records.
        #[test]
        fn round_trip(records in proptest::collection::vec(arb_record(), 0..40)) {
            let text = write_packet_log(&records);
            let reparsed = parse_packet_log(&text).unwrap();
            prop_assert_eq!(records, reparsed);
        }

        /// Assembly does not depend on input order.
        #[test]
        fn assembly_is_order_insensitive(
            records in proptest::collection::vec(arb_record(), 0..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let baseline = assemble_connections(records.clone());
            let mut shuffled = records;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let again = assemble_connections(shuffled);
            prop_assert_eq!(baseline.dropped, again.dropped);
            prop_assert_eq!(baseline.traces, again.traces);
        }
    }
}
