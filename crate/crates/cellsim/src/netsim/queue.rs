//! Server-side send sources: what bytes go on the wire next.
//!
//! A FIFO source serves whole responses back to back (h1 style). A
//! round-robin source interleaves streams one frame per turn (h2 style):
//! each stream pays a fixed headers block once, then data frames of one
//! MSS of payload plus a frame header. TCP segmentation happens above;
//! frames freely straddle segment boundaries.

use super::MarkId;
use std::collections::VecDeque;

/// Marks emitted while producing wire bytes: `(absolute offset just past
/// the marked byte, mark id)`.
pub(super) type MarkOut = Vec<(u64, MarkId)>;

#[derive(Debug)]
pub(super) enum SendQueue {
    Fifo(FifoQueue),
    RoundRobin(RrQueue),
}

impl SendQueue {
    /// Produces up to `max` wire bytes starting at absolute offset
    /// `base`; returns bytes produced plus any marks inside that range.
    pub fn pull(&mut self, max: u64, base: u64) -> (u64, MarkOut) {
        match self {
            SendQueue::Fifo(q) => q.pull(max, base),
            SendQueue::RoundRobin(q) => q.pull(max, base),
        }
    }
}

/// Byte cost of one response on a FIFO connection (no framing).
pub(super) fn fifo_wire_bytes(payload: u64) -> u64 {
    payload
}

/// Byte cost of one stream on a round-robin connection.
pub(super) fn stream_wire_bytes(payload: u64, headers: u32, frame_header: u32, turn: u32) -> u64 {
    let frames = payload.div_ceil(u64::from(turn));
    u64::from(headers) + payload + frames * u64::from(frame_header)
}

#[derive(Debug, Default)]
pub(super) struct FifoQueue {
    items: VecDeque<FifoItem>,
    available: u64,
}

#[derive(Debug)]
struct FifoItem {
    remaining: u64,
    len: u64,
    first: MarkId,
    last: MarkId,
}

impl FifoQueue {
    pub fn push(&mut self, payload: u64, first: MarkId, last: MarkId) {
        debug_assert!(payload > 0);
        self.available += payload;
        self.items.push_back(FifoItem { remaining: payload, len: payload, first, last });
    }

    fn pull(&mut self, max: u64, base: u64) -> (u64, MarkOut) {
        let mut produced = 0u64;
        let mut marks = MarkOut::new();
        while produced < max {
            let Some(item) = self.items.front_mut() else { break };
            if item.remaining == item.len {
                marks.push((base + produced + 1, item.first));
            }
            let take = (max - produced).min(item.remaining);
            item.remaining -= take;
            produced += take;
            if item.remaining == 0 {
                marks.push((base + produced, item.last));
                self.items.pop_front();
            }
        }
        self.available -= produced;
        (produced, marks)
    }
}

#[derive(Debug)]
pub(super) struct RrQueue {
    pub frame_header: u32,
    pub headers_bytes: u32,
    /// Payload bytes one stream may put on the wire per turn.
    pub turn_payload: u32,
    streams: VecDeque<RrStream>,
    turn: Option<TurnState>,
    available: u64,
}

#[derive(Debug)]
struct RrStream {
    remaining: u64,
    headers_pending: bool,
    first: Option<MarkId>,
    last: MarkId,
}

#[derive(Debug)]
struct TurnState {
    hdr_left: u32,
    payload_left: u32,
}

impl RrQueue {
    pub fn new(frame_header: u32, headers_bytes: u32, turn_payload: u32) -> Self {
        assert!(turn_payload > 0);
        RrQueue {
            frame_header,
            headers_bytes,
            turn_payload,
            streams: VecDeque::new(),
            turn: None,
            available: 0,
        }
    }

    pub fn add_stream(&mut self, payload: u64, first: MarkId, last: MarkId) {
        debug_assert!(payload > 0);
        self.available +=
            stream_wire_bytes(payload, self.headers_bytes, self.frame_header, self.turn_payload);
        self.streams.push_back(RrStream {
            remaining: payload,
            headers_pending: true,
            first: Some(first),
            last,
        });
    }

    fn pull(&mut self, max: u64, base: u64) -> (u64, MarkOut) {
        let mut produced = 0u64;
        let mut marks = MarkOut::new();
        while produced < max {
            if self.turn.is_none() {
                let Some(s) = self.streams.front_mut() else { break };
                let mut hdr = self.frame_header;
                if s.headers_pending {
                    hdr += self.headers_bytes;
                    s.headers_pending = false;
                }
                let payload = s.remaining.min(u64::from(self.turn_payload)) as u32;
                self.turn = Some(TurnState { hdr_left: hdr, payload_left: payload });
            }
            let turn = self.turn.as_mut().expect("turn set above");
            if turn.hdr_left > 0 {
                let take = (max - produced).min(u64::from(turn.hdr_left));
                turn.hdr_left -= take as u32;
                produced += take;
                continue;
            }
            let s = self.streams.front_mut().expect("turn implies a stream");
            if let Some(first) = s.first.take() {
                marks.push((base + produced + 1, first));
            }
            let take = (max - produced).min(u64::from(turn.payload_left));
            turn.payload_left -= take as u32;
            s.remaining -= take;
            produced += take;
            if s.remaining == 0 {
                marks.push((base + produced, s.last));
            }
            if turn.payload_left == 0 {
                self.turn = None;
                let s = self.streams.pop_front().expect("stream present");
                if s.remaining > 0 {
                    self.streams.push_back(s);
                }
            }
        }
        self.available -= produced;
        (produced, marks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(q: &mut SendQueue, chunk: u64) -> (u64, MarkOut) {
        let mut base = 0u64;
        let mut marks = MarkOut::new();
        loop {
            let (got, m) = q.pull(chunk, base);
            marks.extend(m);
            base += got;
            if got == 0 {
                return (base, marks);
            }
        }
    }

    #[test]
    fn fifo_serves_back_to_back_with_marks() {
        let mut q = FifoQueue::default();
        q.push(100, 1, 2);
        q.push(50, 3, 4);
        let mut q = SendQueue::Fifo(q);
        let (total, marks) = drain(&mut q, 64);
        assert_eq!(total, 150);
        assert_eq!(marks, vec![(1, 1), (100, 2), (101, 3), (150, 4)]);
    }

    #[test]
    fn rr_interleaves_one_frame_per_turn() {
        // two streams of 2.5 turns each, turn payload 10, frame header 2,
        // headers 5
        let mut rr = RrQueue::new(2, 5, 10);
        rr.add_stream(25, 10, 11);
        rr.add_stream(25, 20, 21);
        let total_expected = 2 * stream_wire_bytes(25, 5, 2, 10);
        assert_eq!(rr.available, total_expected);
        let mut q = SendQueue::RoundRobin(rr);
        let (total, marks) = drain(&mut q, 7);
        assert_eq!(total, total_expected);
        // stream A wire: 5 hdrs + (2+10) + (2+10) + (2+5) = 36
        // layout: A[0..17) B[17..34) A[34..46) B[46..58) A[58..65) B[65..72)
        let m: std::collections::BTreeMap<u64, u64> = marks.into_iter().collect();
        assert_eq!(m[&8], 10); // A first payload byte at offset 7 -> mark 8
        assert_eq!(m[&65], 11); // A last payload byte
        assert_eq!(m[&25], 20); // B first payload after A's first turn
        assert_eq!(m[&72], 21); // B last byte at the very end
    }

    #[test]
    fn rr_single_stream_degenerates_to_fifo() {
        let mut rr = RrQueue::new(9, 32, 1460);
        rr.add_stream(4000, 1, 2);
        let expected = stream_wire_bytes(4000, 32, 9, 1460);
        let mut q = SendQueue::RoundRobin(rr);
        let (total, marks) = drain(&mut q, 1460);
        assert_eq!(total, expected);
        assert_eq!(marks.last().unwrap(), &(expected, 2));
    }
}
