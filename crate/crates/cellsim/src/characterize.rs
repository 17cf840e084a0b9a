//! Window slicing, retransmission clusters, percentile distributions,
//! and connection classification.
//!
//! Traces are sliced into fixed windows (70 ms by default, the median
//! handshake RTT of the networks this models). Four characteristics are
//! extracted per window: data segments, payload bytes, retransmitted
//! segments, and the mean lapse between pure client ACKs. A window with
//! at least one retransmission is a cluster event; gaps between
//! consecutive cluster events drive the condition classification.

use crate::stats;
use crate::time::SimTime;
use crate::trace::ConnectionTrace;
use crate::{Percentiles, Scalar};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default analysis window length.
pub const WINDOW_MS: u64 = 70;
pub const WINDOW: SimTime = SimTime::from_millis(WINDOW_MS);

/// Gap thresholds (ms) separating the condition classes. Boundaries are
/// half-open: exactly 250 ms classifies as Median, exactly 750 ms as Good.
pub const POOR_GAP_MS: f64 = 250.0;
pub const GOOD_GAP_MS: f64 = 750.0;

#[derive(Debug, Error)]
pub enum CharacterizeError {
    #[error("no lossy traces")]
    NoLossyTraces,
    #[error("need at least 3 connections for correlation, found {found}")]
    TooFewConnections { found: usize },
}

/// The four per-window characteristics of one connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    /// Window `i` covers `[i*70ms, (i+1)*70ms)` from connection start.
    pub window_index: u32,
    /// Server data segments observed in the window.
    pub segments: u32,
    /// Server payload bytes observed in the window.
    pub bytes: u64,
    /// Server data segments whose byte range was previously transmitted.
    pub retransmissions: u32,
    /// Mean time between consecutive pure client ACKs inside the window;
    /// absent when the window holds fewer than two such ACKs.
    pub ack_lapse_ms: Option<f64>,
}

impl WindowMetrics {
    /// Per-window retransmission rate; defined only when the window
    /// carried data segments.
    pub fn retx_rate(&self) -> Option<f64> {
        (self.segments > 0).then(|| f64::from(self.retransmissions) / f64::from(self.segments))
    }

    /// Window payload bytes expressed as bytes per second.
    pub fn throughput_bps(&self, window_ms: u64) -> f64 {
        self.bytes as f64 / (window_ms as f64 / 1e3)
    }
}

/// Set of disjoint, merged byte ranges already transmitted by the server.
#[derive(Debug, Default)]
struct ByteRanges {
    /// start -> end (exclusive)
    ranges: BTreeMap<u64, u64>,
}

impl ByteRanges {
    fn overlaps(&self, start: u64, end: u64) -> bool {
        if start >= end {
            return false;
        }
        self.ranges
            .range(..end)
            .next_back()
            .map(|(_, &prev_end)| prev_end > start)
            .unwrap_or(false)
    }

    fn insert(&mut self, start: u64, end: u64) {
        if start >= end {
            return;
        }
        let mut start = start;
        let mut end = end;
        // absorb any range that touches [start, end)
        while let Some((&s, &e)) = self
            .ranges
            .range(..=end)
            .next_back()
            .filter(|(_, &e)| e >= start)
        {
            start = start.min(s);
            end = end.max(e);
            self.ranges.remove(&s);
        }
        self.ranges.insert(start, end);
    }
}

/// Slices a trace into default-length windows.
pub fn slice_windows(trace: &ConnectionTrace) -> Vec<WindowMetrics> {
    slice_windows_with(trace, WINDOW)
}

/// Slices a trace into windows of `window` length. Windows cover
/// `[start_time, last record]`; interior empty windows are emitted with
/// zero counts, trailing ones are not. A server data segment counts as a
/// retransmission iff its byte range overlaps anything previously sent.
pub fn slice_windows_with(trace: &ConnectionTrace, window: SimTime) -> Vec<WindowMetrics> {
    assert!(window > SimTime::ZERO);
    if trace.records.is_empty() {
        return Vec::new();
    }
    let span = trace.end_time().saturating_sub(trace.start_time);
    let n_windows = (span.as_micros() / window.as_micros()) as u32 + 1;

    let mut out: Vec<WindowMetrics> = (0..n_windows)
        .map(|i| WindowMetrics {
            window_index: i,
            segments: 0,
            bytes: 0,
            retransmissions: 0,
            ack_lapse_ms: None,
        })
        .collect();

    let mut sent = ByteRanges::default();
    let mut ack_times: Vec<Vec<SimTime>> = vec![Vec::new(); n_windows as usize];
    for rec in &trace.records {
        let Some(offset) = rec.timestamp.checked_sub(trace.start_time) else {
            continue; // before the SYN anchor
        };
        let idx = (offset.as_micros() / window.as_micros()) as usize;
        if rec.is_server_data() {
            let (start, end) = (rec.seq, rec.seq + rec.payload_len);
            let w = &mut out[idx];
            w.segments += 1;
            w.bytes += rec.payload_len;
            if sent.overlaps(start, end) {
                w.retransmissions += 1;
            }
            sent.insert(start, end);
        } else if rec.is_pure_client_ack() {
            ack_times[idx].push(rec.timestamp);
        }
    }
    for (idx, times) in ack_times.iter().enumerate() {
        if times.len() >= 2 {
            let total: u64 = times.windows(2).map(|w| (w[1] - w[0]).as_micros()).sum();
            out[idx].ack_lapse_ms = Some(total as f64 / 1e3 / (times.len() - 1) as f64);
        }
    }
    out
}

/// One window in which the server retransmitted at least one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterEvent {
    pub window_index: u32,
    /// Window end, in ms from connection start.
    pub event_time_ms: f64,
    pub retransmissions: u32,
    pub retx_rate: f64,
}

/// Emits one cluster event per window with retransmissions, placed at
/// the window's end.
pub fn detect_clusters(windows: &[WindowMetrics]) -> Vec<ClusterEvent> {
    detect_clusters_with(windows, WINDOW_MS)
}

pub fn detect_clusters_with(windows: &[WindowMetrics], window_ms: u64) -> Vec<ClusterEvent> {
    windows
        .iter()
        .filter(|w| w.retransmissions >= 1)
        .map(|w| ClusterEvent {
            window_index: w.window_index,
            event_time_ms: (u64::from(w.window_index) + 1) as f64 * window_ms as f64,
            retransmissions: w.retransmissions,
            retx_rate: w.retx_rate().unwrap_or(0.0),
        })
        .collect()
}

/// Time gaps between consecutive cluster events, in ms. Each gap is at
/// least one window long by construction.
pub fn cluster_gaps_ms(events: &[ClusterEvent]) -> Vec<f64> {
    events.windows(2).map(|w| w[1].event_time_ms - w[0].event_time_ms).collect()
}

/// Network-quality class built from fixed percentile picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityClass {
    Good,
    Fair,
    Passable,
    Poor,
}

impl QualityClass {
    pub const ALL: [QualityClass; 4] =
        [QualityClass::Good, QualityClass::Fair, QualityClass::Passable, QualityClass::Poor];
}

impl fmt::Display for QualityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QualityClass::Good => "good",
            QualityClass::Fair => "fair",
            QualityClass::Passable => "passable",
            QualityClass::Poor => "poor",
        })
    }
}

impl FromStr for QualityClass {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "good" => Ok(QualityClass::Good),
            "fair" => Ok(QualityClass::Fair),
            "passable" => Ok(QualityClass::Passable),
            "poor" => Ok(QualityClass::Poor),
            _ => Err(()),
        }
    }
}

/// Loss-frequency class keyed on the median gap between clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionClass {
    Good,
    Median,
    Poor,
}

impl ConditionClass {
    pub const ALL: [ConditionClass; 3] =
        [ConditionClass::Good, ConditionClass::Median, ConditionClass::Poor];
}

impl fmt::Display for ConditionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionClass::Good => "good",
            ConditionClass::Median => "median",
            ConditionClass::Poor => "poor",
        })
    }
}

impl FromStr for ConditionClass {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "good" => Ok(ConditionClass::Good),
            "median" => Ok(ConditionClass::Median),
            "poor" => Ok(ConditionClass::Poor),
            _ => Err(()),
        }
    }
}

/// Classifies a connection by the nearest-rank median of its inter-cluster
/// gaps: `< 250 ms` Poor, `[250, 750)` Median, `>= 750 ms` Good. Returns
/// `None` for lossless or single-loss connections, which are excluded
/// from condition distributions.
pub fn classify_condition(events: &[ClusterEvent]) -> Option<ConditionClass> {
    if events.len() < 2 {
        return None;
    }
    let mut gaps = cluster_gaps_ms(events);
    stats::sort_sample(&mut gaps);
    let median = stats::nearest_rank(&gaps, 0.5);
    Some(if median < POOR_GAP_MS {
        ConditionClass::Poor
    } else if median < GOOD_GAP_MS {
        ConditionClass::Median
    } else {
        ConditionClass::Good
    })
}

/// Per-window-index percentile series of the four characteristics, plus
/// the standalone handshake RTT distribution.
///
/// Gap samples are attributed to the window index of the earlier cluster
/// of the pair. Retransmission rates are sampled only from windows that
/// carried data segments; throughput from every window a connection was
/// alive; ACK lapse wherever defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDistributions {
    pub window_ms: u64,
    /// Fraction of all input traces with at least one retransmission.
    pub lossy_fraction: f64,
    #[serde(with = "window_map")]
    pub retx_rate: BTreeMap<u32, Percentiles>,
    #[serde(with = "window_map")]
    pub gap_ms: BTreeMap<u32, Percentiles>,
    #[serde(rename = "throughput_Bps", with = "window_map")]
    pub throughput_bps: BTreeMap<u32, Percentiles>,
    #[serde(with = "window_map")]
    pub ack_rtt_ms: BTreeMap<u32, Percentiles>,
    /// Handshake RTT samples (ms) across all traces with a complete
    /// handshake, sorted ascending.
    pub handshake_rtt_ms: Vec<f64>,
}

/// JSON maps need string keys; this keeps window indices numeric in
/// memory and stringly in the file.
mod window_map {
    use crate::Percentiles;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<u32, Percentiles>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let stringly: BTreeMap<String, &Percentiles> =
            map.iter().map(|(k, v)| (k.to_string(), v)).collect();
        stringly.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<u32, Percentiles>, D::Error> {
        let stringly: BTreeMap<String, Percentiles> = BTreeMap::deserialize(d)?;
        stringly
            .into_iter()
            .map(|(k, v)| {
                k.parse::<u32>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("bad window index {k:?}")))
            })
            .collect()
    }
}

const DIST_VERSION: &str = "dist/v1";

#[derive(Serialize, Deserialize)]
struct VersionedDist {
    version: String,
    #[serde(flatten)]
    dist: MetricDistributions,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported version {found:?}, expected {expected:?}")]
    Version { found: String, expected: &'static str },
}

impl MetricDistributions {
    /// Highest window index present in any metric series.
    pub fn max_window(&self) -> u32 {
        [&self.retx_rate, &self.gap_ms, &self.throughput_bps, &self.ack_rtt_ms]
            .iter()
            .filter_map(|m| m.keys().next_back().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.retx_rate.is_empty()
            && self.gap_ms.is_empty()
            && self.throughput_bps.is_empty()
            && self.ack_rtt_ms.is_empty()
    }

    /// Every percentile series is monotone in level.
    pub fn is_monotone(&self) -> bool {
        [&self.retx_rate, &self.gap_ms, &self.throughput_bps, &self.ack_rtt_ms]
            .iter()
            .all(|m| m.values().all(Percentiles::is_monotone))
    }

    pub fn handshake_median_ms(&self) -> Option<f64> {
        (!self.handshake_rtt_ms.is_empty())
            .then(|| stats::nearest_rank(&self.handshake_rtt_ms, 0.5))
    }

    pub fn to_json(&self) -> String {
        let v = VersionedDist { version: DIST_VERSION.to_string(), dist: self.clone() };
        serde_json::to_string_pretty(&v).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let v: VersionedDist = serde_json::from_str(text)?;
        if v.version != DIST_VERSION {
            return Err(FormatError::Version { found: v.version, expected: DIST_VERSION });
        }
        Ok(v.dist)
    }
}

/// Looks up the percentile entry for `window`, falling back to the
/// nearest earlier observed window (or the earliest later one when the
/// series starts after `window`). Panics on an empty series; schedule
/// builders validate non-emptiness first.
pub fn series_value_at(series: &BTreeMap<u32, Percentiles>, window: u32) -> Percentiles {
    if let Some((_, p)) = series.range(..=window).next_back() {
        return *p;
    }
    *series.values().next().expect("empty metric series")
}

/// Fraction of traces that retransmitted at least once.
pub fn lossy_fraction(traces: &[ConnectionTrace]) -> f64 {
    if traces.is_empty() {
        return 0.0;
    }
    let lossy = traces.iter().filter(|t| is_lossy(t)).count();
    lossy as f64 / traces.len() as f64
}

pub fn is_lossy(trace: &ConnectionTrace) -> bool {
    slice_windows(trace).iter().any(|w| w.retransmissions > 0)
}

/// Builds percentile distributions over the lossy subset of `traces`.
/// The handshake RTT distribution spans all traces with a complete
/// handshake, lossy or not.
pub fn build_distributions(
    traces: &[ConnectionTrace],
) -> Result<MetricDistributions, CharacterizeError> {
    let per_trace: Vec<Vec<WindowMetrics>> = traces.iter().map(slice_windows).collect();
    build_from_windows(traces, &per_trace)
}

fn build_from_windows(
    traces: &[ConnectionTrace],
    per_trace: &[Vec<WindowMetrics>],
) -> Result<MetricDistributions, CharacterizeError> {
    let mut retx: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut gaps: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut thr: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut ack: BTreeMap<u32, Vec<f64>> = BTreeMap::new();

    let mut lossy = 0usize;
    for windows in per_trace {
        let clusters = detect_clusters(windows);
        if clusters.is_empty() {
            continue;
        }
        lossy += 1;
        for w in windows {
            if let Some(rate) = w.retx_rate() {
                retx.entry(w.window_index).or_default().push(rate);
            }
            thr.entry(w.window_index).or_default().push(w.throughput_bps(WINDOW_MS));
            if let Some(lapse) = w.ack_lapse_ms {
                ack.entry(w.window_index).or_default().push(lapse);
            }
        }
        for pair in clusters.windows(2) {
            let gap = pair[1].event_time_ms - pair[0].event_time_ms;
            gaps.entry(pair[0].window_index).or_default().push(gap);
        }
    }
    if lossy == 0 {
        return Err(CharacterizeError::NoLossyTraces);
    }

    let fold = |m: BTreeMap<u32, Vec<f64>>| -> BTreeMap<u32, Percentiles> {
        m.into_iter().map(|(w, mut v)| (w, Percentiles::from_samples(&mut v))).collect()
    };

    let mut handshake: Vec<f64> =
        traces.iter().filter_map(ConnectionTrace::syn_to_synack_rtt_ms).collect();
    stats::sort_sample(&mut handshake);

    Ok(MetricDistributions {
        window_ms: WINDOW_MS,
        lossy_fraction: lossy_fraction(traces),
        retx_rate: fold(retx),
        gap_ms: fold(gaps),
        throughput_bps: fold(thr),
        ack_rtt_ms: fold(ack),
        handshake_rtt_ms: handshake,
    })
}

/// Splits traces into condition classes; unclassifiable traces (fewer
/// than two cluster events) are omitted.
pub fn split_by_condition(traces: &[ConnectionTrace]) -> BTreeMap<ConditionClass, Vec<ConnectionTrace>> {
    let mut out: BTreeMap<ConditionClass, Vec<ConnectionTrace>> = BTreeMap::new();
    for t in traces {
        let clusters = detect_clusters(&slice_windows(t));
        if let Some(class) = classify_condition(&clusters) {
            out.entry(class).or_default().push(t.clone());
        }
    }
    out
}

/// Per-connection loss/latency figures feeding the correlation analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnLossLatency {
    pub total_retx_rate: f64,
    pub min_rtt_ms: f64,
    pub max_rtt_ms: f64,
    pub avg_rtt_ms: f64,
    pub connect_time_ms: f64,
}

/// Pearson correlation of lifetime loss against each latency figure.
/// `None` marks an undefined coefficient (constant series).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossLatencyCorrelation {
    pub vs_min_rtt: Option<f64>,
    pub vs_max_rtt: Option<f64>,
    pub vs_avg_rtt: Option<f64>,
    pub vs_connect_time: Option<f64>,
}

pub fn loss_latency_correlation(
    rows: &[ConnLossLatency],
) -> Result<LossLatencyCorrelation, CharacterizeError> {
    if rows.len() < 3 {
        return Err(CharacterizeError::TooFewConnections { found: rows.len() });
    }
    let loss: Vec<Scalar> = rows.iter().map(|r| r.total_retx_rate).collect();
    let against = |f: fn(&ConnLossLatency) -> f64| {
        let series: Vec<Scalar> = rows.iter().map(f).collect();
        stats::pearson(&loss, &series)
    };
    Ok(LossLatencyCorrelation {
        vs_min_rtt: against(|r| r.min_rtt_ms),
        vs_max_rtt: against(|r| r.max_rtt_ms),
        vs_avg_rtt: against(|r| r.avg_rtt_ms),
        vs_connect_time: against(|r| r.connect_time_ms),
    })
}

/// Derives correlation rows from traces: lifetime retransmission rate,
/// ACK-lapse min/max/mean as the RTT figures, and the handshake time.
/// Traces lacking either an ACK-lapse sample or a handshake are skipped.
pub fn conn_loss_latency_rows(traces: &[ConnectionTrace]) -> Vec<ConnLossLatency> {
    traces
        .iter()
        .filter_map(|t| {
            let windows = slice_windows(t);
            let (segs, retx) = windows
                .iter()
                .fold((0u64, 0u64), |(s, r), w| (s + u64::from(w.segments), r + u64::from(w.retransmissions)));
            let lapses: Vec<f64> = windows.iter().filter_map(|w| w.ack_lapse_ms).collect();
            let connect = t.syn_to_synack_rtt_ms()?;
            if segs == 0 || lapses.is_empty() {
                return None;
            }
            Some(ConnLossLatency {
                total_retx_rate: retx as f64 / segs as f64,
                min_rtt_ms: lapses.iter().copied().fold(f64::INFINITY, f64::min),
                max_rtt_ms: lapses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                avg_rtt_ms: lapses.iter().sum::<f64>() / lapses.len() as f64,
                connect_time_ms: connect,
            })
        })
        .collect()
}
