//! Optional event log of one simulation run (`events/v1`).

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogKind {
    Send,
    Drop,
    Deliver,
    Ack,
    Rto,
    EpochChange,
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogKind::Send => "send",
            LogKind::Drop => "drop",
            LogKind::Deliver => "deliver",
            LogKind::Ack => "ack",
            LogKind::Rto => "rto",
            LogKind::EpochChange => "epoch-change",
        })
    }
}

/// One timestamped record. `off`/`len` describe the downlink byte range
/// (for `ack`, `off` is the acknowledged offset). `cwnd` and `in_flight`
/// are the sender's view when the record was written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: SimTime,
    pub kind: LogKind,
    pub conn: usize,
    pub off: u64,
    pub len: u32,
    pub retx: bool,
    pub cwnd: u64,
    pub in_flight: u64,
    pub epoch: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub records: Vec<LogRecord>,
}

impl EventLog {
    /// Text rendering: a version line followed by one CSV row per record.
    pub fn to_text(&self) -> String {
        let mut out = String::from("events/v1\n");
        out.push_str("time_us,kind,conn,off,len,retx,cwnd,in_flight,epoch\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.t.as_micros(),
                r.kind,
                r.conn,
                r.off,
                r.len,
                u8::from(r.retx),
                r.cwnd,
                r.in_flight,
                r.epoch
            ));
        }
        out
    }
}
