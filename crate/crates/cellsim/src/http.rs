//! Browser- and server-side application models for h1 and h2 page loads.
//!
//! h1 opens up to six connections per hostname and keeps one outstanding
//! response per connection; an idle connection picks the next queued
//! object. h2 opens one connection per hostname, requests every stream
//! up front, and the server interleaves responses round-robin, one MSS
//! of payload per stream turn. All subresources become requestable when
//! the base HTML finishes (flat discovery), and the page load time is
//! the last byte of the last object.

use crate::netsim::{
    run_app, AppEvent, Application, ConnId, Control, MarkId, QueueKind, SimConfig, SimResult,
};
use crate::pages::PageSpec;
use crate::schedule::EmulationSchedule;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error(transparent)]
    Page(#[from] crate::pages::PageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    H1,
    H2,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::H1 => "h1",
            Protocol::H2 => "h2",
        })
    }
}

impl FromStr for Protocol {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "h1" | "http1" | "http/1.1" => Ok(Protocol::H1),
            "h2" | "http2" | "http/2" => Ok(Protocol::H2),
            _ => Err(()),
        }
    }
}

/// Application-protocol parameters of a page load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// Parallel connections per hostname for h1 (browsers use six).
    pub h1_max_conns_per_host: u32,
    /// Connections per hostname for h2 (always one in browsers).
    pub h2_conns_per_host: u32,
    /// DATA frame header bytes (h2).
    pub frame_header_bytes: u32,
    /// Flat approximation of a compressed HEADERS frame (h2), charged
    /// once per stream in each direction.
    pub headers_frame_bytes: u32,
    /// h1 request size: fits in one segment.
    pub h1_request_bytes: u32,
    /// Resolution latency charged to each hostname's first connection.
    pub dns_latency_ms: f64,
}

impl ProtocolConfig {
    pub fn h1() -> Self {
        ProtocolConfig {
            protocol: Protocol::H1,
            h1_max_conns_per_host: 6,
            h2_conns_per_host: 1,
            frame_header_bytes: 9,
            headers_frame_bytes: 32,
            h1_request_bytes: 300,
            dns_latency_ms: 0.0,
        }
    }

    pub fn h2() -> Self {
        ProtocolConfig { protocol: Protocol::H2, ..ProtocolConfig::h1() }
    }

    pub fn for_protocol(p: Protocol) -> Self {
        match p {
            Protocol::H1 => ProtocolConfig::h1(),
            Protocol::H2 => ProtocolConfig::h2(),
        }
    }

    fn request_bytes(&self) -> u64 {
        match self.protocol {
            Protocol::H1 => u64::from(self.h1_request_bytes),
            Protocol::H2 => u64::from(self.headers_frame_bytes),
        }
    }
}

/// Timing of one fetched object (the base HTML is object id "html").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTiming {
    pub id: String,
    pub hostname: String,
    pub size: u64,
    pub conn: usize,
    pub request_ms: Option<f64>,
    pub first_byte_ms: Option<f64>,
    pub last_byte_ms: Option<f64>,
}

/// Per-connection accounting of one page load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnSummary {
    pub conn: usize,
    pub hostname: String,
    pub opened_ms: f64,
    pub handshake_done_ms: Option<f64>,
    pub bytes_delivered: u64,
    pub retransmissions: u64,
}

/// Outcome of one simulated page load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageLoadResult {
    pub page: String,
    pub protocol: Protocol,
    pub converged: bool,
    /// Last byte of the last object (base HTML included).
    pub plt_ms: f64,
    pub connections_opened: usize,
    pub base_html: ObjectTiming,
    pub objects: Vec<ObjectTiming>,
    pub connections: Vec<ConnSummary>,
}

impl PageLoadResult {
    pub fn total_retransmissions(&self) -> u64 {
        self.connections.iter().map(|c| c.retransmissions).sum()
    }

    /// One CSV row per object plus a trailing summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "row,id,hostname,size,conn,request_ms,first_byte_ms,last_byte_ms\n",
        );
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
        for o in std::iter::once(&self.base_html).chain(&self.objects) {
            out.push_str(&format!(
                "object,{},{},{},{},{},{},{}\n",
                o.id,
                o.hostname,
                o.size,
                o.conn,
                fmt_opt(o.request_ms),
                fmt_opt(o.first_byte_ms),
                fmt_opt(o.last_byte_ms),
            ));
        }
        out.push_str(&format!(
            "summary,{},{},{},{},plt_ms={:.3},retx={},converged={}\n",
            self.page,
            self.protocol,
            self.base_html.size + self.objects.iter().map(|o| o.size).sum::<u64>(),
            self.connections_opened,
            self.plt_ms,
            self.total_retransmissions(),
            self.converged,
        ));
        out
    }
}

const KIND_REQUEST: u64 = 0;
const KIND_FIRST: u64 = 1;
const KIND_LAST: u64 = 2;

/// Object index 0 is the base HTML; embedded objects start at 1.
fn mark(obj: usize, kind: u64) -> MarkId {
    ((obj as u64) << 2) | kind
}

fn unmark(m: MarkId) -> (usize, u64) {
    ((m >> 2) as usize, m & 0b11)
}

struct Browser<'p> {
    page: &'p PageSpec,
    proto: &'p ProtocolConfig,
    mss: u32,
    /// host index per connection id.
    conn_host: Vec<usize>,
    /// handshake completed; requests may be sent.
    conn_ready: Vec<bool>,
    /// h1: object currently outstanding on each connection.
    conn_busy: Vec<Option<usize>>,
    /// per-host queue of not-yet-requested object indices (1-based).
    host_queue: Vec<VecDeque<usize>>,
    /// per-host open connections.
    host_conns: Vec<Vec<ConnId>>,
    dns_paid: Vec<bool>,
    request_at: Vec<Option<SimTime>>,
    obj_conn: Vec<usize>,
    discovered: bool,
}

impl<'p> Browser<'p> {
    fn new(page: &'p PageSpec, proto: &'p ProtocolConfig, mss: u32) -> Self {
        let hosts = page.hostnames.len();
        Browser {
            page,
            proto,
            mss,
            conn_host: Vec::new(),
            conn_ready: Vec::new(),
            conn_busy: Vec::new(),
            host_queue: vec![VecDeque::new(); hosts],
            host_conns: vec![Vec::new(); hosts],
            dns_paid: vec![false; hosts],
            request_at: vec![None; page.objects.len() + 1],
            obj_conn: vec![0; page.objects.len() + 1],
            discovered: false,
        }
    }

    fn host_index(&self, hostname: &str) -> usize {
        self.page
            .hostnames
            .iter()
            .position(|h| h == hostname)
            .expect("page validated: hostname known")
    }

    fn queue_kind(&self) -> QueueKind {
        match self.proto.protocol {
            Protocol::H1 => QueueKind::Fifo,
            Protocol::H2 => QueueKind::RoundRobin {
                frame_header: self.proto.frame_header_bytes,
                headers_bytes: self.proto.headers_frame_bytes,
                turn_payload: self.mss,
            },
        }
    }

    fn open_conn(&mut self, host: usize, ctl: &mut Control) -> ConnId {
        let dns = if self.dns_paid[host] {
            SimTime::ZERO
        } else {
            self.dns_paid[host] = true;
            SimTime::from_millis_f64(self.proto.dns_latency_ms)
        };
        let id = ctl.open_connection(dns, self.queue_kind());
        debug_assert_eq!(id, self.conn_host.len());
        self.conn_host.push(host);
        self.conn_ready.push(false);
        self.conn_busy.push(None);
        self.host_conns[host].push(id);
        id
    }

    fn send_request(&mut self, conn: ConnId, obj: usize, ctl: &mut Control) {
        self.request_at[obj] = Some(ctl.now());
        self.obj_conn[obj] = conn;
        self.conn_busy[conn] = Some(obj);
        ctl.send_request(conn, self.proto.request_bytes(), mark(obj, KIND_REQUEST));
    }

    /// h1: hand the next queued object of this connection's host to it.
    fn assign_next(&mut self, conn: ConnId, ctl: &mut Control) {
        let host = self.conn_host[conn];
        if let Some(obj) = self.host_queue[host].pop_front() {
            self.send_request(conn, obj, ctl);
        } else {
            self.conn_busy[conn] = None;
        }
    }

    /// h2: request every queued object of this host on its connection.
    fn drain_host_h2(&mut self, conn: ConnId, ctl: &mut Control) {
        let host = self.conn_host[conn];
        while let Some(obj) = self.host_queue[host].pop_front() {
            self.request_at[obj] = Some(ctl.now());
            self.obj_conn[obj] = conn;
            ctl.send_request(conn, self.proto.request_bytes(), mark(obj, KIND_REQUEST));
        }
    }

    /// Base HTML finished: every object becomes requestable at once.
    fn discover(&mut self, ctl: &mut Control) {
        self.discovered = true;
        for (i, o) in self.page.objects.iter().enumerate() {
            let host = self.host_index(&o.hostname);
            self.host_queue[host].push_back(i + 1);
        }
        for host in 0..self.page.hostnames.len() {
            let queued = self.host_queue[host].len();
            if queued == 0 {
                continue;
            }
            let target = match self.proto.protocol {
                Protocol::H1 => queued.min(self.proto.h1_max_conns_per_host as usize),
                Protocol::H2 => self.proto.h2_conns_per_host as usize,
            };
            while self.host_conns[host].len() < target {
                self.open_conn(host, ctl);
            }
            // established idle connections (the base connection) pick up
            // work immediately; fresh ones start on their Connected event
            let ready: Vec<ConnId> = self.host_conns[host]
                .iter()
                .copied()
                .filter(|&c| self.conn_ready[c] && self.conn_busy[c].is_none())
                .collect();
            for conn in ready {
                match self.proto.protocol {
                    Protocol::H1 => self.assign_next(conn, ctl),
                    Protocol::H2 => self.drain_host_h2(conn, ctl),
                }
            }
        }
    }
}

impl Application for Browser<'_> {
    fn start(&mut self, ctl: &mut Control) {
        let base_host = 0;
        let conn = self.open_conn(base_host, ctl);
        debug_assert_eq!(conn, 0);
    }

    fn on_event(&mut self, ev: AppEvent, ctl: &mut Control) {
        match ev {
            AppEvent::Connected { conn } => {
                self.conn_ready[conn] = true;
                if conn == 0 && !self.discovered {
                    self.send_request(conn, 0, ctl);
                    return;
                }
                match self.proto.protocol {
                    Protocol::H1 => self.assign_next(conn, ctl),
                    Protocol::H2 => self.drain_host_h2(conn, ctl),
                }
            }
            AppEvent::RequestArrived { conn, request } => {
                let (obj, kind) = unmark(request);
                debug_assert_eq!(kind, KIND_REQUEST);
                let payload = if obj == 0 {
                    self.page.html_size
                } else {
                    self.page.objects[obj - 1].size
                };
                ctl.respond(conn, payload, mark(obj, KIND_FIRST), mark(obj, KIND_LAST));
            }
            AppEvent::Delivered { conn, mark: m } => {
                let (obj, kind) = unmark(m);
                if kind != KIND_LAST {
                    return;
                }
                if obj == 0 {
                    self.conn_busy[conn] = None;
                    self.discover(ctl);
                } else if self.proto.protocol == Protocol::H1 {
                    self.assign_next(conn, ctl);
                }
            }
        }
    }
}

/// Simulates one full page load and reports per-object timings.
pub fn load_page(
    page: &PageSpec,
    proto: &ProtocolConfig,
    schedule: &EmulationSchedule,
    cfg: &SimConfig,
    seed: u64,
) -> Result<PageLoadResult, HttpError> {
    page.validate()?;
    let cfg = cfg.with_seed(seed);
    let mut browser = Browser::new(page, proto, cfg.mss);
    let sim = run_app(schedule, &cfg, &mut browser);
    Ok(assemble_result(page, proto, browser, sim))
}

/// Runs one page load with event recording and returns the `events/v1`
/// text log. The seed is taken from `cfg`.
pub fn load_page_events(
    page: &PageSpec,
    proto: &ProtocolConfig,
    schedule: &EmulationSchedule,
    cfg: &SimConfig,
) -> Result<String, HttpError> {
    page.validate()?;
    let mut cfg = cfg.clone();
    cfg.record_events = true;
    let mut browser = Browser::new(page, proto, cfg.mss);
    let sim = run_app(schedule, &cfg, &mut browser);
    Ok(sim.events.expect("recording enabled").to_text())
}

fn assemble_result(
    page: &PageSpec,
    proto: &ProtocolConfig,
    browser: Browser<'_>,
    sim: SimResult,
) -> PageLoadResult {
    let ms = |t: Option<&SimTime>| t.map(|t| t.as_millis_f64());
    let timing = |obj: usize| -> ObjectTiming {
        let (id, hostname, size) = if obj == 0 {
            ("html".to_string(), page.hostnames[0].clone(), page.html_size)
        } else {
            let o = &page.objects[obj - 1];
            (o.id.clone(), o.hostname.clone(), o.size)
        };
        ObjectTiming {
            id,
            hostname,
            size,
            conn: browser.obj_conn[obj],
            request_ms: browser.request_at[obj].map(|t| t.as_millis_f64()),
            first_byte_ms: ms(sim.marks.get(&mark(obj, KIND_FIRST))),
            last_byte_ms: ms(sim.marks.get(&mark(obj, KIND_LAST))),
        }
    };

    let base_html = timing(0);
    let objects: Vec<ObjectTiming> = (1..=page.objects.len()).map(timing).collect();
    let all_delivered =
        base_html.last_byte_ms.is_some() && objects.iter().all(|o| o.last_byte_ms.is_some());
    let converged = sim.converged && all_delivered;
    let plt_ms = if converged {
        objects
            .iter()
            .chain(std::iter::once(&base_html))
            .filter_map(|o| o.last_byte_ms)
            .fold(0.0, f64::max)
    } else {
        sim.end_time.as_millis_f64()
    };

    let connections: Vec<ConnSummary> = sim
        .conns
        .iter()
        .enumerate()
        .map(|(i, c)| ConnSummary {
            conn: i,
            hostname: page.hostnames[browser.conn_host[i]].clone(),
            opened_ms: c.opened_at.as_millis_f64(),
            handshake_done_ms: c.handshake_done.map(|t| t.as_millis_f64()),
            bytes_delivered: c.bytes_delivered,
            retransmissions: c.retransmits,
        })
        .collect();

    PageLoadResult {
        page: page.name.clone(),
        protocol: proto.protocol,
        converged,
        plt_ms,
        connections_opened: connections.len(),
        base_html,
        objects,
        connections,
    }
}

/// Wire bytes of one h2 stream (headers block plus framed payload).
fn h2_stream_wire(size: u64, proto: &ProtocolConfig, mss: u32) -> u64 {
    let frames = size.div_ceil(u64::from(mss));
    u64::from(proto.headers_frame_bytes) + size + frames * u64::from(proto.frame_header_bytes)
}

/// Analytic count of bytes the servers can push in the first round trip
/// after discovery, without simulation. h1 sums, per active connection,
/// `min(icw, first object, rwnd)`; h2 takes `min(icw, rwnd, queued wire
/// bytes)` once per hostname.
pub fn first_flight_report(page: &PageSpec, proto: &ProtocolConfig, cfg: &SimConfig) -> u64 {
    let icw = u64::from(cfg.icw_segments) * u64::from(cfg.mss);
    let rwnd = u64::from(cfg.rwnd);
    let mut total = 0u64;
    for host in &page.hostnames {
        let objs: Vec<&crate::pages::ObjectSpec> =
            page.objects.iter().filter(|o| &o.hostname == host).collect();
        if objs.is_empty() {
            continue;
        }
        match proto.protocol {
            Protocol::H1 => {
                let conns = objs.len().min(proto.h1_max_conns_per_host as usize);
                for o in objs.iter().take(conns) {
                    total += icw.min(rwnd).min(o.size);
                }
            }
            Protocol::H2 => {
                let wire: u64 = objs.iter().map(|o| h2_stream_wire(o.size, proto, cfg.mss)).sum();
                total += icw.min(rwnd).min(wire);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pages::{preset_page, shard, PagePreset, ShardStrategy, SynthParams};

    fn lossless_rtt100() -> EmulationSchedule {
        EmulationSchedule::constant(120_000, 50.0, 1e12)
    }

    fn tcp_only() -> SimConfig {
        SimConfig { tls_rtts: 0, ..SimConfig::default() }
    }

    fn tiny_page(count: usize, size: u64) -> PageSpec {
        crate::pages::synth_page(&SynthParams {
            name: "tiny".into(),
            count,
            law: crate::pages::SizeLaw::Uniform { bytes: size },
            html_size: 1024,
            total: None,
        })
        .unwrap()
    }

    /// Hand-traced: a base-HTML-only page over a lossless RTT-100 link
    /// with a TCP-only handshake loads in exactly two round trips.
    #[test]
    fn base_only_page_loads_in_200ms() {
        let page = tiny_page(0, 1);
        let r = load_page(&page, &ProtocolConfig::h1(), &lossless_rtt100(), &tcp_only(), 1)
            .unwrap();
        assert!(r.converged);
        assert!((r.plt_ms - 200.0).abs() <= 1.0, "plt {}", r.plt_ms);
        assert_eq!(r.connections_opened, 1);
    }

    /// Seven equal objects over h1 on one host: six connections, and the
    /// seventh object's request departs only after a connection frees.
    #[test]
    fn h1_seventh_object_waits() {
        let page = tiny_page(7, 4 * 1460);
        let r = load_page(&page, &ProtocolConfig::h1(), &lossless_rtt100(), &tcp_only(), 1)
            .unwrap();
        assert_eq!(r.connections_opened, 6);
        let mut requests: Vec<f64> = r.objects.iter().filter_map(|o| o.request_ms).collect();
        requests.sort_by(f64::total_cmp);
        let first_done = r
            .objects
            .iter()
            .filter_map(|o| o.last_byte_ms)
            .fold(f64::INFINITY, f64::min);
        assert!(
            requests[6] >= first_done,
            "seventh request at {} before any completion at {first_done}",
            requests[6]
        );
        // one outstanding response per connection at all times
        for c in &r.connections {
            let on_conn: Vec<&ObjectTiming> =
                r.objects.iter().filter(|o| o.conn == c.conn).collect();
            let mut spans: Vec<(f64, f64)> = on_conn
                .iter()
                .map(|o| (o.request_ms.unwrap(), o.last_byte_ms.unwrap()))
                .collect();
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in spans.windows(2) {
                assert!(w[1].0 >= w[0].1, "overlapping responses on one connection");
            }
        }
    }

    #[test]
    fn h2_uses_one_connection_per_host() {
        let page = tiny_page(25, 2000);
        let r = load_page(&page, &ProtocolConfig::h2(), &lossless_rtt100(), &tcp_only(), 1)
            .unwrap();
        assert_eq!(r.connections_opened, 1);

        let sharded = shard(&page, ShardStrategy::RoundRobin { hosts: 5 }).unwrap();
        let r = load_page(&sharded, &ProtocolConfig::h2(), &lossless_rtt100(), &tcp_only(), 1)
            .unwrap();
        assert_eq!(r.connections_opened, 5);
    }

    /// Every object's first byte arrives after the base HTML completes.
    #[test]
    fn discovery_orders_first_bytes() {
        let page = tiny_page(10, 3000);
        for proto in [ProtocolConfig::h1(), ProtocolConfig::h2()] {
            let r = load_page(&page, &proto, &lossless_rtt100(), &tcp_only(), 1).unwrap();
            let base_done = r.base_html.last_byte_ms.unwrap();
            for o in &r.objects {
                assert!(o.first_byte_ms.unwrap() >= base_done);
            }
        }
    }

    /// Byte conservation: connection payloads equal object bytes plus
    /// request/frame overhead.
    #[test]
    fn byte_conservation() {
        let page = tiny_page(9, 2500);
        let cfg = tcp_only();
        for proto in [ProtocolConfig::h1(), ProtocolConfig::h2()] {
            let mut browser = Browser::new(&page, &proto, cfg.mss);
            let sim = run_app(&lossless_rtt100(), &cfg, &mut browser);
            let delivered: u64 = sim.conns.iter().map(|c| c.bytes_delivered).sum();
            let expected: u64 = match proto.protocol {
                Protocol::H1 => page.total_bytes(),
                Protocol::H2 => {
                    h2_stream_wire(page.html_size, &proto, cfg.mss)
                        + page
                            .objects
                            .iter()
                            .map(|o| h2_stream_wire(o.size, &proto, cfg.mss))
                            .sum::<u64>()
                }
            };
            assert_eq!(delivered, expected, "{}", proto.protocol);
            let uplink: u64 = sim.conns.iter().map(|c| c.uplink_delivered).sum();
            let requests = (page.objects.len() + 1) as u64;
            assert_eq!(uplink, requests * proto.request_bytes());
        }
    }

    /// With no loss and equal RTT, multiplexing wins on a many-small-
    /// object page: fewer round trips than six-wide request queues.
    #[test]
    fn h2_beats_h1_on_small_objects_lossless() {
        let page = preset_page(PagePreset::P365x1K);
        let cfg = SimConfig::default(); // TLS on, as in the experiments
        let sched = lossless_rtt100();
        let h1 = load_page(&page, &ProtocolConfig::h1(), &sched, &cfg, 1).unwrap();
        let h2 = load_page(&page, &ProtocolConfig::h2(), &sched, &cfg, 1).unwrap();
        assert!(h2.plt_ms < h1.plt_ms, "h2 {} vs h1 {}", h2.plt_ms, h1.plt_ms);
    }

    /// First-flight accounting over the preset pages.
    #[test]
    fn first_flight_numbers() {
        let cfg = SimConfig::default();
        let p365 = preset_page(PagePreset::P365x1K);
        assert_eq!(first_flight_report(&p365, &ProtocolConfig::h1(), &cfg), 6 * 1024);
        assert_eq!(first_flight_report(&p365, &ProtocolConfig::h2(), &cfg), 14_600);
        let p10 = preset_page(PagePreset::P10x435K);
        assert_eq!(first_flight_report(&p10, &ProtocolConfig::h1(), &cfg), 87_600);
        assert_eq!(first_flight_report(&p10, &ProtocolConfig::h2(), &cfg), 14_600);
    }

    #[test]
    fn unknown_host_is_an_error() {
        let mut page = tiny_page(1, 100);
        page.objects[0].hostname = "nope.example".into();
        let r = load_page(&page, &ProtocolConfig::h1(), &lossless_rtt100(), &tcp_only(), 1);
        assert!(r.is_err());
    }

    #[test]
    fn unconverged_flag_propagates() {
        let page = tiny_page(1, 1460);
        let schedule = EmulationSchedule::absorbing(60_000, 50.0, 1e9);
        let cfg = SimConfig { time_limit_ms: 90_000, ..tcp_only() };
        let r = load_page(&page, &ProtocolConfig::h1(), &schedule, &cfg, 1).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn csv_has_one_row_per_object() {
        let page = tiny_page(3, 1000);
        let r = load_page(&page, &ProtocolConfig::h2(), &lossless_rtt100(), &tcp_only(), 1)
            .unwrap();
        let csv = r.to_csv();
        let objects = csv.lines().filter(|l| l.starts_with("object,")).count();
        assert_eq!(objects, 4); // base html + 3
        assert_eq!(csv.lines().filter(|l| l.starts_with("summary,")).count(), 1);
    }

    /// Identical seeds give identical results end to end.
    #[test]
    fn load_page_is_deterministic() {
        let page = preset_page(PagePreset::P10x435K);
        let mut sched = lossless_rtt100();
        for (i, e) in sched.epochs.iter_mut().enumerate() {
            if i % 5 == 2 {
                e.loss_active = true;
                e.loss_rate = 0.2;
            }
        }
        let a = load_page(&page, &ProtocolConfig::h2(), &sched, &SimConfig::default(), 7)
            .unwrap();
        let b = load_page(&page, &ProtocolConfig::h2(), &sched, &SimConfig::default(), 7)
            .unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
