//! The event loop: link transit, TCP sender/receiver state machines,
//! and the application callback surface.

use super::log::{EventLog, LogKind, LogRecord};
use super::queue::{fifo_wire_bytes, stream_wire_bytes, FifoQueue, RrQueue, SendQueue};
use super::{ConnStats, DelayedAck, SimConfig, SimResult};
use crate::schedule::{EmulationSchedule, LinkEpoch};
use crate::time::SimTime;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

pub type ConnId = usize;
pub type MarkId = u64;

/// Server send-scheduling flavor of one connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueKind {
    /// Whole responses, one after another.
    Fifo,
    /// Frame-interleaved streams: `frame_header` bytes per data frame,
    /// `headers_bytes` once per stream, `turn_payload` payload per turn.
    RoundRobin { frame_header: u32, headers_bytes: u32, turn_payload: u32 },
}

/// Callbacks the simulation makes into the application model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppEvent {
    /// Handshake (TCP plus configured TLS round trips) finished; the
    /// client may send requests on this connection.
    Connected { conn: ConnId },
    /// A client request reached the server.
    RequestArrived { conn: ConnId, request: MarkId },
    /// The in-order delivered prefix reached a registered mark.
    Delivered { conn: ConnId, mark: MarkId },
}

/// The application model driving a simulation.
pub trait Application {
    fn start(&mut self, ctl: &mut Control);
    fn on_event(&mut self, ev: AppEvent, ctl: &mut Control);
}

/// Action buffer handed to application callbacks.
pub struct Control {
    now: SimTime,
    next_conn: usize,
    actions: Vec<Action>,
}

impl Control {
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Opens a connection whose SYN departs after `delay` (DNS latency
    /// and the like). Returns the connection id immediately.
    pub fn open_connection(&mut self, delay: SimTime, queue: QueueKind) -> ConnId {
        let id = self.next_conn;
        self.next_conn += 1;
        self.actions.push(Action::Open { conn: id, delay, queue });
        id
    }

    /// Queues `bytes` of client request data; `request` fires at the
    /// server once the last byte arrives.
    pub fn send_request(&mut self, conn: ConnId, bytes: u64, request: MarkId) {
        debug_assert!(bytes > 0);
        self.actions.push(Action::Request { conn, bytes, request });
    }

    /// Queues a server response of `payload` bytes. `first`/`last` fire
    /// at the client when the respective payload byte has been delivered
    /// in order.
    pub fn respond(&mut self, conn: ConnId, payload: u64, first: MarkId, last: MarkId) {
        debug_assert!(payload > 0);
        self.actions.push(Action::Respond { conn, payload, first, last });
    }
}

enum Action {
    Open { conn: ConnId, delay: SimTime, queue: QueueKind },
    Request { conn: ConnId, bytes: u64, request: MarkId },
    Respond { conn: ConnId, payload: u64, first: MarkId, last: MarkId },
}

#[derive(Debug, Clone, Copy)]
enum UpSeg {
    Syn,
    HandshakeCtl,
    Data { off: u64, len: u32 },
    Ack { ack_to: u64 },
}

#[derive(Debug, Clone, Copy)]
enum DownSeg {
    SynAck,
    HandshakeCtl,
    Data { off: u64, len: u32 },
}

enum EvKind {
    Open { conn: ConnId },
    UpArrive { conn: ConnId, seg: UpSeg },
    DownArrive { conn: ConnId, seg: DownSeg },
    AckTimer { conn: ConnId, gen: u32 },
    RtoTimer { conn: ConnId, gen: u32 },
    /// Tail loss probe: fires before the full timeout and retransmits
    /// one segment without collapsing the window.
    TlpTimer { conn: ConnId, gen: u32 },
}

struct Ev {
    at: SimTime,
    seq: u64,
    kind: EvKind,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// One direction of the link: a serialization queue plus a FIFO clamp so
/// deliveries never reorder when the delay shrinks across epochs.
#[derive(Debug, Default)]
struct LinkDir {
    busy_until: SimTime,
    last_delivery: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    SlowStart,
    CongestionAvoidance,
    Recovery,
}

struct Sender {
    cwnd: f64,
    ssthresh: f64,
    phase: Phase,
    snd_una: u64,
    snd_next: u64,
    /// Highest offset ever transmitted; anything below is a retransmit.
    high_sent: u64,
    dup_acks: u32,
    recovery_point: u64,
    /// While set, partial acks below `recovery_point` retransmit the
    /// next hole (ack-paced loss recovery, shared by the dupack and
    /// timeout paths).
    loss_retx_active: bool,
    /// One hole retransmission outstanding at a time: no further hole is
    /// sent until the ack covers this offset. Keeps a timeout that turns
    /// out spurious from re-sending the whole window.
    retx_until: u64,
    /// Congestion-avoidance state: window before the last reduction (in
    /// segments) and when the reduction happened. Regrowth follows the
    /// cubic curve in real time, so recovery speed does not depend on a
    /// queue-inflated round-trip time.
    cubic_wmax_seg: f64,
    cubic_epoch: Option<SimTime>,
    /// Smoothed RTT estimate (ms); None until the first sample.
    srtt_ms: Option<f64>,
    /// Mean deviation and its per-round-trip held maximum; the held
    /// value keeps the timeout above sudden queue-delay jumps for a full
    /// round instead of decaying mid-flight.
    mdev_ms: f64,
    mdev_max_ms: f64,
    var_hold_until: u64,
    /// Base timeout: max(initial, srtt + 4*mdev_max), doubled per backoff.
    rto_base: SimTime,
    rto_backoff: u32,
    rto_gen: u32,
    rto_armed: bool,
    /// One probe per ack cycle; reset when the ack point advances.
    tlp_used: bool,
    /// Send times of in-flight fresh segments: (covered-through offset,
    /// send time). Entries above a retransmission are dropped (Karn's
    /// rule) since their acknowledgment time becomes ambiguous.
    rtt_samples: VecDeque<(u64, SimTime)>,
    retx: VecDeque<(u64, u32)>,
    queue: SendQueue,
    /// Wire bytes pulled from the queue into the stream so far.
    committed: u64,
    retransmit_count: u64,
    drop_count: u64,
    segments_sent: u64,
}

/// Scaling constant of the cubic window curve, in segments per cubic
/// second.
const CUBIC_C: f64 = 0.4;

impl Sender {
    /// Congestion-avoidance window target (in segments) at time `now`:
    /// the cubic curve `C*(t - K)^3 + w_max` anchored at the last
    /// reduction, floored by the Reno-friendly estimate so small-window
    /// flows keep linear-per-RTT growth through the cubic plateau.
    fn cubic_target_seg(&self, now: SimTime, beta: f64) -> Option<f64> {
        let epoch = self.cubic_epoch?;
        let t = (now - epoch).as_secs_f64();
        let k = (self.cubic_wmax_seg * (1.0 - beta) / CUBIC_C).cbrt();
        let cubic = CUBIC_C * (t - k).powi(3) + self.cubic_wmax_seg;
        let friendly = self.srtt_ms.map(|srtt| {
            let rtt_s = (srtt / 1e3).max(1e-3);
            self.cubic_wmax_seg * beta + 3.0 * (1.0 - beta) / (1.0 + beta) * t / rtt_s
        });
        Some(friendly.map_or(cubic, |f| cubic.max(f)))
    }

    fn note_reduction(&mut self, now: SimTime, mss: f64) {
        self.cubic_wmax_seg = self.cwnd / mss;
        self.cubic_epoch = Some(now);
    }

    fn rto_cur(&self) -> SimTime {
        SimTime(self.rto_base.0 << self.rto_backoff.min(16))
    }

    fn take_rtt_sample(&mut self, sample_ms: f64, floor: SimTime, acked_to: u64) {
        match self.srtt_ms {
            None => {
                self.srtt_ms = Some(sample_ms);
                self.mdev_ms = sample_ms / 2.0;
                self.mdev_max_ms = self.mdev_ms;
                self.var_hold_until = self.snd_next;
            }
            Some(srtt) => {
                let dev = (srtt - sample_ms).abs();
                self.mdev_ms = 0.75 * self.mdev_ms + 0.25 * dev;
                self.mdev_max_ms = self.mdev_max_ms.max(self.mdev_ms).max(dev);
                self.srtt_ms = Some(0.875 * srtt + 0.125 * sample_ms);
                if acked_to >= self.var_hold_until {
                    self.mdev_max_ms = self.mdev_ms;
                    self.var_hold_until = self.snd_next;
                }
            }
        }
        let est = SimTime::from_millis_f64(self.srtt_ms.unwrap() + 4.0 * self.mdev_max_ms);
        self.rto_base = est.max(floor);
    }
}

#[derive(Default)]
struct Receiver {
    rcv_next: u64,
    /// Out-of-order byte ranges beyond `rcv_next` (disjoint, merged).
    ooo: BTreeMap<u64, u64>,
    pending_segs: u32,
    ack_gen: u32,
    ack_armed: bool,
    marks: BTreeMap<u64, Vec<MarkId>>,
}

enum AckDisposition {
    InOrder,
    OutOfOrder,
    GapFilled,
    Duplicate,
}

impl Receiver {
    fn on_data(&mut self, off: u64, len: u32) -> AckDisposition {
        let end = off + u64::from(len);
        if end <= self.rcv_next {
            return AckDisposition::Duplicate;
        }
        if off > self.rcv_next {
            self.insert_ooo(off, end);
            return AckDisposition::OutOfOrder;
        }
        self.rcv_next = end;
        let mut filled = false;
        while let Some((&s, &e)) = self.ooo.iter().next() {
            if s > self.rcv_next {
                break;
            }
            self.rcv_next = self.rcv_next.max(e);
            self.ooo.remove(&s);
            filled = true;
        }
        if filled {
            AckDisposition::GapFilled
        } else {
            AckDisposition::InOrder
        }
    }

    fn insert_ooo(&mut self, mut s: u64, mut e: u64) {
        while let Some((&ps, &pe)) = self.ooo.range(..=e).next_back() {
            if pe < s {
                break;
            }
            s = s.min(ps);
            e = e.max(pe);
            self.ooo.remove(&ps);
        }
        self.ooo.insert(s, e);
    }

    fn fired_marks(&mut self) -> Vec<MarkId> {
        let mut out = Vec::new();
        while let Some((&off, _)) = self.marks.iter().next() {
            if off > self.rcv_next {
                break;
            }
            out.extend(self.marks.remove(&off).unwrap());
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum ConnState {
    Opening { tls_left: u32 },
    Established,
}

struct Conn {
    opened_at: SimTime,
    state: ConnState,
    handshake_done: Option<SimTime>,
    /// Client request bytes appended (and immediately transmitted).
    up_sent: u64,
    /// Server-side in-order receive offset of the uplink stream.
    up_rcv_next: u64,
    up_marks: BTreeMap<u64, Vec<MarkId>>,
    /// Total wire bytes enqueued for the server to send.
    enqueued_total: u64,
    snd: Sender,
    rcv: Receiver,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    schedule: &'a EmulationSchedule,
    now: SimTime,
    seq: u64,
    heap: BinaryHeap<Reverse<Ev>>,
    up: LinkDir,
    down: LinkDir,
    conns: Vec<Conn>,
    rng: ChaCha8Rng,
    mark_times: BTreeMap<MarkId, SimTime>,
    pending_app: Vec<AppEvent>,
    log: Option<EventLog>,
    last_epoch: Option<u32>,
    hit_limit: bool,
}

/// Runs `app` against the schedule until quiescence or the time limit.
pub fn run_app<A: Application>(
    schedule: &EmulationSchedule,
    cfg: &SimConfig,
    app: &mut A,
) -> SimResult {
    assert!(!schedule.epochs.is_empty(), "empty schedule");
    let mut engine = Engine {
        cfg,
        schedule,
        now: SimTime::ZERO,
        seq: 0,
        heap: BinaryHeap::new(),
        up: LinkDir::default(),
        down: LinkDir::default(),
        conns: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        mark_times: BTreeMap::new(),
        pending_app: Vec::new(),
        log: cfg.record_events.then(EventLog::default),
        last_epoch: None,
        hit_limit: false,
    };
    engine.run(app)
}

impl<'a> Engine<'a> {
    fn run<A: Application>(&mut self, app: &mut A) -> SimResult {
        let mut ctl = Control { now: SimTime::ZERO, next_conn: 0, actions: Vec::new() };
        app.start(&mut ctl);
        self.apply_actions(ctl);

        let limit = self.cfg.time_limit();
        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.at > limit {
                self.hit_limit = true;
                break;
            }
            debug_assert!(ev.at >= self.now, "time went backwards");
            self.now = ev.at;
            self.note_epoch();
            match ev.kind {
                EvKind::Open { conn } => self.handle_open(conn),
                EvKind::UpArrive { conn, seg } => self.handle_up(conn, seg),
                EvKind::DownArrive { conn, seg } => self.handle_down(conn, seg),
                EvKind::AckTimer { conn, gen } => self.handle_ack_timer(conn, gen),
                EvKind::RtoTimer { conn, gen } => self.handle_rto_timer(conn, gen),
                EvKind::TlpTimer { conn, gen } => self.handle_tlp_timer(conn, gen),
            }
            self.dispatch_app(app);
        }

        SimResult {
            converged: !self.hit_limit,
            end_time: self.now,
            conns: self
                .conns
                .iter()
                .map(|c| ConnStats {
                    opened_at: c.opened_at,
                    handshake_done: c.handshake_done,
                    bytes_delivered: c.rcv.rcv_next,
                    stream_total: c.enqueued_total,
                    uplink_sent: c.up_sent,
                    uplink_delivered: c.up_rcv_next,
                    segments_sent: c.snd.segments_sent,
                    retransmits: c.snd.retransmit_count,
                    drops: c.snd.drop_count,
                })
                .collect(),
            marks: std::mem::take(&mut self.mark_times),
            events: self.log.take(),
        }
    }

    fn dispatch_app<A: Application>(&mut self, app: &mut A) {
        while !self.pending_app.is_empty() {
            let events = std::mem::take(&mut self.pending_app);
            let mut ctl =
                Control { now: self.now, next_conn: self.conns.len(), actions: Vec::new() };
            for ev in events {
                app.on_event(ev, &mut ctl);
            }
            self.apply_actions(ctl);
        }
    }

    fn apply_actions(&mut self, mut ctl: Control) {
        for action in ctl.actions.drain(..) {
            match action {
                Action::Open { conn, delay, queue } => {
                    debug_assert_eq!(conn, self.conns.len(), "connection ids are sequential");
                    let c = self.new_conn(queue);
                    self.conns.push(c);
                    self.push(self.now + delay, EvKind::Open { conn });
                }
                Action::Request { conn, bytes, request } => self.client_send(conn, bytes, request),
                Action::Respond { conn, payload, first, last } => {
                    let c = &mut self.conns[conn];
                    let wire = match &mut c.snd.queue {
                        SendQueue::Fifo(q) => {
                            q.push(payload, first, last);
                            fifo_wire_bytes(payload)
                        }
                        SendQueue::RoundRobin(q) => {
                            let wire = stream_wire_bytes(
                                payload,
                                q.headers_bytes,
                                q.frame_header,
                                q.turn_payload,
                            );
                            q.add_stream(payload, first, last);
                            wire
                        }
                    };
                    c.enqueued_total += wire;
                    self.pump(conn);
                }
            }
        }
    }

    fn new_conn(&self, queue: QueueKind) -> Conn {
        let q = match queue {
            QueueKind::Fifo => SendQueue::Fifo(FifoQueue::default()),
            QueueKind::RoundRobin { frame_header, headers_bytes, turn_payload } => {
                SendQueue::RoundRobin(RrQueue::new(frame_header, headers_bytes, turn_payload))
            }
        };
        Conn {
            opened_at: self.now,
            state: ConnState::Opening { tls_left: self.cfg.tls_rtts },
            handshake_done: None,
            up_sent: 0,
            up_rcv_next: 0,
            up_marks: BTreeMap::new(),
            enqueued_total: 0,
            snd: Sender {
                cwnd: f64::from(self.cfg.icw_segments) * f64::from(self.cfg.mss),
                ssthresh: f64::from(self.cfg.rwnd),
                phase: Phase::SlowStart,
                snd_una: 0,
                snd_next: 0,
                high_sent: 0,
                dup_acks: 0,
                recovery_point: 0,
                loss_retx_active: false,
                retx_until: 0,
                cubic_wmax_seg: 0.0,
                cubic_epoch: None,
                srtt_ms: None,
                mdev_ms: 0.0,
                mdev_max_ms: 0.0,
                var_hold_until: 0,
                rto_base: SimTime::from_millis(self.cfg.rto_initial_ms),
                rto_backoff: 0,
                rto_gen: 0,
                rto_armed: false,
                tlp_used: false,
                rtt_samples: VecDeque::new(),
                retx: VecDeque::new(),
                queue: q,
                committed: 0,
                retransmit_count: 0,
                drop_count: 0,
                segments_sent: 0,
            },
            rcv: Receiver::default(),
        }
    }

    fn push(&mut self, at: SimTime, kind: EvKind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Ev { at, seq, kind }));
    }

    fn epoch(&self) -> &'a LinkEpoch {
        self.schedule.epoch_at(self.now)
    }

    fn note_epoch(&mut self) {
        let idx = self.epoch().index;
        if self.last_epoch != Some(idx) {
            self.last_epoch = Some(idx);
            self.log(LogKind::EpochChange, usize::MAX, 0, 0, false, 0, 0);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn log(
        &mut self,
        kind: LogKind,
        conn: usize,
        off: u64,
        len: u32,
        retx: bool,
        cwnd: u64,
        in_flight: u64,
    ) {
        let epoch = self.schedule.epoch_at(self.now).index;
        if let Some(log) = &mut self.log {
            log.records.push(LogRecord {
                t: self.now,
                kind,
                conn,
                off,
                len,
                retx,
                cwnd,
                in_flight,
                epoch,
            });
        }
    }

    /// Delivery time through one link direction: wait for the serializer,
    /// serialize at the epoch's bandwidth, propagate at the epoch's
    /// one-way delay, never overtaking an earlier delivery. Parameters
    /// are read at entry time.
    fn link_transit(&mut self, up: bool, bytes: u64) -> SimTime {
        let epoch = *self.epoch();
        let dir = if up { &mut self.up } else { &mut self.down };
        let start = self.now.max(dir.busy_until);
        let end = if bytes == 0 {
            start
        } else {
            start + SimTime::from_secs_f64(bytes as f64 / epoch.bandwidth_bps)
        };
        dir.busy_until = end;
        let deliver =
            (end + SimTime::from_millis_f64(epoch.one_way_delay_ms)).max(dir.last_delivery);
        dir.last_delivery = deliver;
        deliver
    }

    // ---- client side ----------------------------------------------------

    fn handle_open(&mut self, conn: ConnId) {
        self.conns[conn].opened_at = self.now;
        let at = self.link_transit(true, 0);
        self.push(at, EvKind::UpArrive { conn, seg: UpSeg::Syn });
    }

    fn client_send(&mut self, conn: ConnId, bytes: u64, request: MarkId) {
        let start = {
            let c = &mut self.conns[conn];
            debug_assert!(c.handshake_done.is_some(), "request before handshake completion");
            let start = c.up_sent;
            c.up_sent += bytes;
            c.up_marks.entry(start + bytes).or_default().push(request);
            start
        };
        let mss = u64::from(self.cfg.mss);
        let mut off = start;
        while off < start + bytes {
            let len = mss.min(start + bytes - off) as u32;
            let at = self.link_transit(true, u64::from(len));
            self.push(at, EvKind::UpArrive { conn, seg: UpSeg::Data { off, len } });
            off += u64::from(len);
        }
    }

    fn send_client_ack(&mut self, conn: ConnId) {
        let ack_to = {
            let r = &mut self.conns[conn].rcv;
            r.pending_segs = 0;
            r.ack_armed = false;
            r.ack_gen += 1;
            r.rcv_next
        };
        let at = self.link_transit(true, 0);
        self.push(at, EvKind::UpArrive { conn, seg: UpSeg::Ack { ack_to } });
    }

    fn handle_down(&mut self, conn: ConnId, seg: DownSeg) {
        match seg {
            DownSeg::SynAck | DownSeg::HandshakeCtl => {
                let tls_left = match self.conns[conn].state {
                    ConnState::Opening { tls_left } => tls_left,
                    ConnState::Established => return,
                };
                if tls_left == 0 {
                    self.conns[conn].state = ConnState::Established;
                    self.conns[conn].handshake_done = Some(self.now);
                    self.pending_app.push(AppEvent::Connected { conn });
                } else {
                    self.conns[conn].state = ConnState::Opening { tls_left: tls_left - 1 };
                    let at = self.link_transit(true, 0);
                    self.push(at, EvKind::UpArrive { conn, seg: UpSeg::HandshakeCtl });
                }
            }
            DownSeg::Data { off, len } => {
                let (cwnd, in_flight) = {
                    let s = &self.conns[conn].snd;
                    (s.cwnd as u64, s.snd_next - s.snd_una)
                };
                self.log(LogKind::Deliver, conn, off, len, false, cwnd, in_flight);
                let disposition = self.conns[conn].rcv.on_data(off, len);
                for mark in self.conns[conn].rcv.fired_marks() {
                    self.mark_times.insert(mark, self.now);
                    self.pending_app.push(AppEvent::Delivered { conn, mark });
                }
                enum AckPlan {
                    Now,
                    Arm(SimTime),
                    Wait,
                }
                let plan = match (disposition, self.cfg.delayed_ack) {
                    (AckDisposition::InOrder, DelayedAck::Immediate) => AckPlan::Now,
                    (AckDisposition::InOrder, DelayedAck::Every2 { max_delay_ms }) => {
                        let r = &mut self.conns[conn].rcv;
                        r.pending_segs += 1;
                        if r.pending_segs >= 2 {
                            AckPlan::Now
                        } else if r.ack_armed {
                            AckPlan::Wait
                        } else {
                            r.ack_armed = true;
                            r.ack_gen += 1;
                            AckPlan::Arm(SimTime::from_millis(max_delay_ms))
                        }
                    }
                    // out-of-order data, gap fills, and stale duplicates
                    // are acknowledged immediately
                    (_, _) => AckPlan::Now,
                };
                match plan {
                    AckPlan::Now => self.send_client_ack(conn),
                    AckPlan::Arm(delay) => {
                        let gen = self.conns[conn].rcv.ack_gen;
                        self.push(self.now + delay, EvKind::AckTimer { conn, gen });
                    }
                    AckPlan::Wait => {}
                }
            }
        }
    }

    fn handle_ack_timer(&mut self, conn: ConnId, gen: u32) {
        {
            let r = &self.conns[conn].rcv;
            if !r.ack_armed || r.ack_gen != gen {
                return;
            }
        }
        self.send_client_ack(conn);
    }

    // ---- server side ----------------------------------------------------

    fn handle_up(&mut self, conn: ConnId, seg: UpSeg) {
        match seg {
            UpSeg::Syn | UpSeg::HandshakeCtl => {
                let at = self.link_transit(false, 0);
                let reply = if matches!(seg, UpSeg::Syn) {
                    DownSeg::SynAck
                } else {
                    DownSeg::HandshakeCtl
                };
                self.push(at, EvKind::DownArrive { conn, seg: reply });
            }
            UpSeg::Data { off, len } => {
                let fired = {
                    let c = &mut self.conns[conn];
                    debug_assert_eq!(off, c.up_rcv_next, "uplink is in-order by construction");
                    c.up_rcv_next = c.up_rcv_next.max(off + u64::from(len));
                    let mut fired = Vec::new();
                    while let Some((&end, _)) = c.up_marks.iter().next() {
                        if end > c.up_rcv_next {
                            break;
                        }
                        fired.extend(c.up_marks.remove(&end).unwrap());
                    }
                    fired
                };
                for request in fired {
                    self.pending_app.push(AppEvent::RequestArrived { conn, request });
                }
            }
            UpSeg::Ack { ack_to } => self.handle_server_ack(conn, ack_to),
        }
    }

    fn handle_server_ack(&mut self, conn: ConnId, ack_to: u64) {
        let mss = f64::from(self.cfg.mss);
        let rwnd = f64::from(self.cfg.rwnd);
        {
            let s = &mut self.conns[conn].snd;
            if ack_to > s.snd_una {
                let acked = (ack_to - s.snd_una) as f64;
                s.snd_una = ack_to;
                debug_assert!(s.snd_una <= s.snd_next);
                s.dup_acks = 0;
                s.rto_backoff = 0;
                s.tlp_used = false;
                let mut newest_acked = None;
                while let Some(&(end, sent_at)) = s.rtt_samples.front() {
                    if end > ack_to {
                        break;
                    }
                    newest_acked = Some(sent_at);
                    s.rtt_samples.pop_front();
                }
                if let Some(sent_at) = newest_acked {
                    let sample = (self.now - sent_at).as_millis_f64();
                    s.take_rtt_sample(
                        sample,
                        SimTime::from_millis(self.cfg.rto_initial_ms),
                        ack_to,
                    );
                }
                if s.loss_retx_active {
                    if ack_to >= s.recovery_point {
                        s.loss_retx_active = false;
                        if s.phase == Phase::Recovery {
                            s.phase = Phase::CongestionAvoidance;
                        }
                    } else if ack_to >= s.retx_until {
                        // partial ack past the last hole retransmission:
                        // send the next hole
                        let len = (u64::from(self.cfg.mss)).min(s.snd_next - s.snd_una) as u32;
                        s.retx.push_back((s.snd_una, len));
                        s.retx_until = s.snd_una + u64::from(len);
                    }
                }
                match s.phase {
                    Phase::Recovery => {} // window frozen until recovery exits
                    Phase::SlowStart => {
                        s.cwnd = (s.cwnd + acked).min(rwnd);
                        if s.cwnd >= s.ssthresh {
                            s.phase = Phase::CongestionAvoidance;
                        }
                    }
                    Phase::CongestionAvoidance => {
                        let grown = match s.cubic_target_seg(self.now, self.cfg.beta) {
                            Some(target_seg) => s.cwnd.max(target_seg * mss),
                            None => s.cwnd + mss * acked / s.cwnd,
                        };
                        s.cwnd = grown.min(rwnd);
                    }
                }
            } else if ack_to == s.snd_una && s.snd_next > s.snd_una {
                s.dup_acks += 1;
                // early retransmit: with fewer than four segments
                // outstanding the usual threshold can never be met, so it
                // shrinks to (outstanding - 1)
                let outstanding =
                    (s.snd_next - s.snd_una).div_ceil(u64::from(self.cfg.mss)) as u32;
                let threshold = if outstanding < 4 {
                    self.cfg.dupack_threshold.min(outstanding.saturating_sub(1)).max(1)
                } else {
                    self.cfg.dupack_threshold
                };
                if s.dup_acks >= threshold && s.phase != Phase::Recovery {
                    // fast retransmit with multiplicative decrease
                    s.note_reduction(self.now, mss);
                    s.ssthresh = (self.cfg.beta * s.cwnd).max(mss);
                    s.cwnd = s.ssthresh;
                    s.phase = Phase::Recovery;
                    s.recovery_point = s.snd_next;
                    s.loss_retx_active = true;
                    let len = (u64::from(self.cfg.mss)).min(s.snd_next - s.snd_una) as u32;
                    s.retx.push_back((s.snd_una, len));
                    s.retx_until = s.snd_una + u64::from(len);
                }
            }
        }
        let (cwnd, in_flight) = {
            let s = &self.conns[conn].snd;
            (s.cwnd as u64, s.snd_next - s.snd_una)
        };
        self.log(LogKind::Ack, conn, ack_to, 0, false, cwnd, in_flight);
        // the timer restarts on every ack, duplicates included: any ack
        // is evidence the network is still moving
        self.reset_rto(conn);
        self.pump(conn);
    }

    fn handle_rto_timer(&mut self, conn: ConnId, gen: u32) {
        {
            let s = &self.conns[conn].snd;
            if !s.rto_armed || s.rto_gen != gen || s.snd_next == s.snd_una {
                return;
            }
        }
        let mss = f64::from(self.cfg.mss);
        let (cwnd, una) = {
            let s = &mut self.conns[conn].snd;
            s.note_reduction(self.now, mss);
            s.ssthresh = (self.cfg.beta * s.cwnd).max(mss);
            s.cwnd = mss;
            s.phase = Phase::SlowStart;
            s.dup_acks = 0;
            s.retx.clear();
            s.rtt_samples.clear();
            s.recovery_point = s.snd_next;
            s.loss_retx_active = true;
            let len = (u64::from(self.cfg.mss)).min(s.snd_next - s.snd_una) as u32;
            s.retx.push_back((s.snd_una, len));
            s.retx_until = s.snd_una + u64::from(len);
            s.rto_backoff += 1;
            s.rto_armed = false;
            (s.cwnd as u64, s.snd_una)
        };
        self.log(LogKind::Rto, conn, una, 0, false, cwnd, 0);
        self.pump(conn);
        self.arm_rto(conn);
    }

    fn arm_rto(&mut self, conn: ConnId) {
        let (at, gen, probe) = {
            let s = &mut self.conns[conn].snd;
            if s.rto_armed || s.snd_next == s.snd_una {
                return;
            }
            s.rto_armed = true;
            s.rto_gen += 1;
            let pto = s
                .srtt_ms
                .filter(|_| !s.tlp_used)
                .map(|srtt| SimTime::from_millis_f64(2.0 * srtt).max(SimTime::from_millis(10)));
            match pto {
                Some(pto) => (self.now + pto.min(s.rto_cur()), s.rto_gen, true),
                None => (self.now + s.rto_cur(), s.rto_gen, false),
            }
        };
        if probe {
            self.push(at, EvKind::TlpTimer { conn, gen });
        } else {
            self.push(at, EvKind::RtoTimer { conn, gen });
        }
    }

    /// Probe timeout: retransmit the newest unacked segment to force an
    /// acknowledgment, then fall back to the full timeout. The follow-up
    /// timeout allows one more smoothed round trip so the probe's own
    /// acknowledgment can make it back through a deep queue.
    fn handle_tlp_timer(&mut self, conn: ConnId, gen: u32) {
        let (seg, at, gen) = {
            let s = &mut self.conns[conn].snd;
            if !s.rto_armed || s.rto_gen != gen || s.snd_next == s.snd_una {
                return;
            }
            s.tlp_used = true;
            s.rto_gen += 1;
            let len = (u64::from(self.cfg.mss)).min(s.snd_next - s.snd_una) as u32;
            let patience = SimTime::from_millis_f64(2.0 * s.srtt_ms.unwrap_or(0.0));
            (
                (s.snd_next - u64::from(len), len),
                self.now + s.rto_cur() + patience,
                s.rto_gen,
            )
        };
        self.send_data(conn, seg.0, seg.1, true);
        self.push(at, EvKind::RtoTimer { conn, gen });
    }

    /// Restarts the timer after an advancing ACK: outstanding data keeps
    /// a fresh timeout, a fully-acked connection disarms.
    fn reset_rto(&mut self, conn: ConnId) {
        {
            let s = &mut self.conns[conn].snd;
            s.rto_armed = false;
            s.rto_gen += 1;
        }
        self.arm_rto(conn);
    }

    /// Sends whatever the window and the queue allow: retransmissions
    /// first (they bypass the window), then new data admitted under
    /// `min(cwnd, rwnd)`.
    fn pump(&mut self, conn: ConnId) {
        let self_now = self.now;
        loop {
            if let Some((off, len)) = self.conns[conn].snd.retx.pop_front() {
                self.send_data(conn, off, len, true);
                continue;
            }
            let mss = u64::from(self.cfg.mss);
            let rwnd = u64::from(self.cfg.rwnd);
            let want = {
                let s = &self.conns[conn].snd;
                let wnd = (s.cwnd as u64).min(rwnd);
                let in_flight = s.snd_next - s.snd_una;
                if in_flight >= wnd {
                    break;
                }
                (wnd - in_flight).min(mss)
            };
            let marks = {
                let s = &mut self.conns[conn].snd;
                if s.committed < s.snd_next + want {
                    let need = s.snd_next + want - s.committed;
                    let base = s.committed;
                    let (got, marks) = s.queue.pull(need, base);
                    s.committed += got;
                    marks
                } else {
                    Vec::new()
                }
            };
            if !marks.is_empty() {
                let rcv = &mut self.conns[conn].rcv;
                for (end, mark) in marks {
                    rcv.marks.entry(end).or_default().push(mark);
                }
            }
            let (off, len, retx) = {
                let s = &mut self.conns[conn].snd;
                let len = want.min(s.committed - s.snd_next);
                if len == 0 {
                    break;
                }
                let off = s.snd_next;
                s.snd_next += len;
                let retx = off < s.high_sent;
                s.high_sent = s.high_sent.max(off + len);
                if !retx {
                    s.rtt_samples.push_back((off + len, self_now));
                }
                (off, len as u32, retx)
            };
            self.send_data(conn, off, len, retx);
            self.arm_rto(conn);
        }
    }

    fn send_data(&mut self, conn: ConnId, off: u64, len: u32, retx: bool) {
        let epoch = *self.epoch();
        let (cwnd, in_flight) = {
            let s = &mut self.conns[conn].snd;
            s.segments_sent += 1;
            if retx {
                s.retransmit_count += 1;
                // Karn: acks covering the retransmitted range no longer
                // time any one transmission
                while s.rtt_samples.back().is_some_and(|&(end, _)| end > off) {
                    s.rtt_samples.pop_back();
                }
            }
            (s.cwnd as u64, s.snd_next - s.snd_una)
        };
        self.log(LogKind::Send, conn, off, len, retx, cwnd, in_flight);
        if epoch.loss_active && epoch.loss_rate > 0.0 && self.rng.gen::<f64>() < epoch.loss_rate {
            self.conns[conn].snd.drop_count += 1;
            self.log(LogKind::Drop, conn, off, len, retx, cwnd, in_flight);
            return;
        }
        let at = self.link_transit(false, u64::from(len));
        self.push(at, EvKind::DownArrive { conn, seg: DownSeg::Data { off, len } });
    }
}
