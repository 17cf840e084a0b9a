//! Cellular link characterization and emulation toolkit.
//!
//! The crate is organized around a pipeline:
//!
//! 1. [`trace`] parses normalized packet-event logs into per-connection
//!    traces anchored at SYN receipt.
//! 2. [`characterize`] slices traces into 70 ms windows, detects
//!    retransmission clusters, and builds percentile distributions.
//! 3. [`schedule`] turns distributions (measured or synthetic presets)
//!    into per-epoch link schedules and exports traffic-shaping scripts.
//! 4. [`netsim`] replays a schedule as a deterministic discrete-event
//!    simulation of a bidirectional link carrying loss-reactive TCP.
//! 5. [`http`] and [`pages`] model h1/h2 page loads and size-based
//!    domain sharding on top of the simulator.
//! 6. [`experiment`] runs seeded trial batches and summarizes them.

pub mod characterize;
pub mod experiment;
pub mod http;
pub mod netsim;
pub mod pages;
pub mod schedule;
pub mod stats;
pub mod time;
pub mod trace;

/// Scalar type used by the concrete pipeline. The statistics core in
/// [`stats`] is generic over any float; everything else fixes `f64`.
pub type Scalar = f64;

/// Five-point percentile summary over `Scalar` samples.
pub type Percentiles = stats::Percentiles<Scalar>;

/// Summary statistics (median/quartiles/mean/min/max) over `Scalar` samples.
pub type SummaryStats = stats::SummaryStats<Scalar>;

pub use characterize::{ConditionClass, MetricDistributions, QualityClass};
pub use schedule::{EmulationSchedule, LinkEpoch};
pub use time::SimTime;
