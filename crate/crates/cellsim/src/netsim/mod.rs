//! Deterministic discrete-event simulation of a bidirectional link
//! governed by an emulation schedule, carrying a simplified
//! loss-reactive TCP.
//!
//! One simulation is one single-threaded event loop. All randomness
//! comes from one seeded generator, so identical inputs and seed yield
//! identical results. Only server data segments are subject to loss;
//! handshake control, client requests, and ACKs always get through,
//! which keeps loss attribution single-sided.

mod engine;
mod log;
mod queue;
mod workload;

pub use engine::{run_app, AppEvent, Application, ConnId, Control, MarkId, QueueKind};
pub use log::{EventLog, LogKind, LogRecord};
pub use workload::{run_static, ConnPlan, Exchange, StaticResult};

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Delayed-ACK policy of the simulated client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayedAck {
    /// ACK every second segment immediately; a lone segment waits at
    /// most `max_delay_ms`.
    Every2 { max_delay_ms: u64 },
    /// ACK every segment on arrival.
    Immediate,
}

impl Default for DelayedAck {
    fn default() -> Self {
        DelayedAck::Every2 { max_delay_ms: 40 }
    }
}

/// Transport and handshake parameters of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mss: u32,
    /// Initial congestion window, in segments.
    pub icw_segments: u32,
    /// Receive window advertised by both sides, in bytes.
    pub rwnd: u32,
    /// Multiplicative-decrease factor applied on loss detection.
    pub beta: f64,
    pub dupack_threshold: u32,
    pub rto_initial_ms: u64,
    pub delayed_ack: DelayedAck,
    /// Extra handshake round trips after TCP's one (0 = no TLS).
    pub tls_rtts: u32,
    pub seed: u64,
    /// Simulated-time budget; exceeding it flags the run unconverged.
    pub time_limit_ms: u64,
    pub record_events: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mss: 1460,
            icw_segments: 10,
            rwnd: 65_535,
            beta: 0.7,
            dupack_threshold: 3,
            rto_initial_ms: 1000,
            delayed_ack: DelayedAck::default(),
            tls_rtts: 2,
            seed: 0,
            time_limit_ms: 3_600_000,
            record_events: false,
        }
    }
}

impl SimConfig {
    pub fn with_seed(&self, seed: u64) -> SimConfig {
        SimConfig { seed, ..self.clone() }
    }

    pub fn time_limit(&self) -> SimTime {
        SimTime::from_millis(self.time_limit_ms)
    }
}

/// Per-connection accounting of one finished simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnStats {
    pub opened_at: SimTime,
    pub handshake_done: Option<SimTime>,
    /// In-order wire bytes delivered to the client.
    pub bytes_delivered: u64,
    /// Wire bytes the server was asked to send on this connection.
    pub stream_total: u64,
    pub uplink_sent: u64,
    pub uplink_delivered: u64,
    pub segments_sent: u64,
    pub retransmits: u64,
    pub drops: u64,
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// False when the time limit cut the run short.
    pub converged: bool,
    pub end_time: SimTime,
    pub conns: Vec<ConnStats>,
    /// Delivery time of every fired milestone mark.
    pub marks: BTreeMap<MarkId, SimTime>,
    pub events: Option<EventLog>,
}
