//! Static workloads: fixed per-connection exchange plans, the simplest
//! way to drive the simulator without a browser model.

use super::engine::{run_app, AppEvent, Application, Control, MarkId, QueueKind};
use super::{SimConfig, SimResult};
use crate::schedule::EmulationSchedule;
use crate::time::SimTime;

/// One request/response pair. The request departs when the previous
/// exchange's response finishes (the first rides the handshake ACK).
#[derive(Debug, Clone, Copy)]
pub struct Exchange {
    pub request_bytes: u64,
    pub response_bytes: u64,
}

/// One connection's plan: open time plus sequential exchanges.
#[derive(Debug, Clone)]
pub struct ConnPlan {
    pub open_at: SimTime,
    pub exchanges: Vec<Exchange>,
}

/// Result of a static run: raw simulation output plus per-exchange
/// completion times (in plan order).
#[derive(Debug)]
pub struct StaticResult {
    pub sim: SimResult,
    pub completions: Vec<Vec<Option<SimTime>>>,
}

const KIND_REQUEST: u64 = 0;
const KIND_FIRST: u64 = 1;
const KIND_LAST: u64 = 2;

fn mark(plan: usize, exchange: usize, kind: u64) -> MarkId {
    ((plan as u64) << 32) | ((exchange as u64) << 2) | kind
}

fn unmark(m: MarkId) -> (usize, usize, u64) {
    ((m >> 32) as usize, ((m & 0xffff_ffff) >> 2) as usize, m & 0b11)
}

struct StaticApp<'p> {
    plans: &'p [ConnPlan],
}

impl Application for StaticApp<'_> {
    fn start(&mut self, ctl: &mut Control) {
        for plan in self.plans {
            let id = ctl.open_connection(plan.open_at, QueueKind::Fifo);
            debug_assert!(id < self.plans.len());
        }
    }

    fn on_event(&mut self, ev: AppEvent, ctl: &mut Control) {
        match ev {
            AppEvent::Connected { conn } => {
                if let Some(x) = self.plans[conn].exchanges.first() {
                    ctl.send_request(conn, x.request_bytes, mark(conn, 0, KIND_REQUEST));
                }
            }
            AppEvent::RequestArrived { conn, request } => {
                let (plan, k, kind) = unmark(request);
                debug_assert_eq!(plan, conn);
                debug_assert_eq!(kind, KIND_REQUEST);
                let x = self.plans[plan].exchanges[k];
                ctl.respond(conn, x.response_bytes, mark(plan, k, KIND_FIRST), mark(plan, k, KIND_LAST));
            }
            AppEvent::Delivered { conn, mark: m } => {
                let (plan, k, kind) = unmark(m);
                if kind != KIND_LAST {
                    return;
                }
                if let Some(x) = self.plans[plan].exchanges.get(k + 1) {
                    ctl.send_request(conn, x.request_bytes, mark(plan, k + 1, KIND_REQUEST));
                }
            }
        }
    }
}

/// Runs a set of connection plans over the schedule.
pub fn run_static(
    schedule: &EmulationSchedule,
    cfg: &SimConfig,
    plans: &[ConnPlan],
) -> StaticResult {
    let mut app = StaticApp { plans };
    let sim = run_app(schedule, cfg, &mut app);
    let completions = plans
        .iter()
        .enumerate()
        .map(|(p, plan)| {
            (0..plan.exchanges.len())
                .map(|k| sim.marks.get(&mark(p, k, KIND_LAST)).copied())
                .collect()
        })
        .collect();
    StaticResult { sim, completions }
}
