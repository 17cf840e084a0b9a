//! Seeded trial batches over one page/protocol/schedule cell, with
//! summary statistics and cross-cell comparison.
//!
//! Trial `i` uses seed `base_seed + i`. Quality-mode schedules are
//! percentile-deterministic, so one schedule serves the whole batch;
//! condition mode resamples the schedule per trial from the trial seed.
//! The simulator's RNG is seeded with a splitmix of the trial seed so
//! drop decisions and schedule sampling never share a stream.

use crate::characterize::{ConditionClass, MetricDistributions, QualityClass};
use crate::http::{load_page, PageLoadResult, Protocol, ProtocolConfig};
use crate::netsim::SimConfig;
use crate::pages::PageSpec;
use crate::schedule::{condition_schedule, quality_schedule, EmulationSchedule, ScheduleError};
use crate::SummaryStats;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Http(#[from] crate::http::HttpError),
    #[error("trial set {0:?} holds no trials")]
    EmptySet(String),
}

/// Where each trial's schedule comes from.
#[derive(Debug, Clone)]
pub enum SchedulePlan {
    /// One fixed schedule for every trial.
    Fixed(EmulationSchedule),
    /// Quality mode: built once from the distribution.
    Quality { dist: MetricDistributions, class: QualityClass, duration_ms: u64 },
    /// Condition mode: resampled per trial from the trial seed.
    Condition { dist: MetricDistributions, class: ConditionClass, duration_ms: u64 },
}

/// One experiment cell.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub label: String,
    /// Page as loaded (sharding already applied).
    pub page: PageSpec,
    pub proto: ProtocolConfig,
    pub sim: SimConfig,
    pub plan: SchedulePlan,
    pub trials: u32,
    pub base_seed: u64,
}

/// Summary of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u32,
    pub seed: u64,
    pub plt_ms: f64,
    pub connections: usize,
    pub retransmissions: u64,
    pub converged: bool,
}

/// All trials of one cell plus their PLT statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub label: String,
    pub page: String,
    pub protocol: Protocol,
    pub base_seed: u64,
    pub trials: Vec<TrialSummary>,
    pub stats: SummaryStats,
}

const TRIALS_VERSION: &str = "trials/v1";

#[derive(Serialize, Deserialize)]
struct VersionedTrials {
    version: String,
    #[serde(flatten)]
    set: TrialSet,
}

impl TrialSet {
    pub fn median_plt_ms(&self) -> f64 {
        self.stats.median
    }

    pub fn to_json(&self) -> String {
        let v = VersionedTrials { version: TRIALS_VERSION.to_string(), set: self.clone() };
        serde_json::to_string_pretty(&v).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::characterize::FormatError> {
        let v: VersionedTrials = serde_json::from_str(text)?;
        if v.version != TRIALS_VERSION {
            return Err(crate::characterize::FormatError::Version {
                found: v.version,
                expected: TRIALS_VERSION,
            });
        }
        Ok(v.set)
    }

    /// One CSV row per trial, recomputable by external tooling.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,seed,plt_ms,connections,retransmissions,converged\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{:.3},{},{},{}\n",
                t.trial, t.seed, t.plt_ms, t.connections, t.retransmissions, t.converged
            ));
        }
        out
    }
}

/// SplitMix64, used to derive the simulator seed from a trial seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn trial_schedule(plan: &SchedulePlan, base_seed: u64, trial_seed: u64) -> Result<EmulationSchedule, ScheduleError> {
    match plan {
        SchedulePlan::Fixed(s) => Ok(s.clone()),
        SchedulePlan::Quality { dist, class, duration_ms } => {
            quality_schedule(dist, *class, *duration_ms, base_seed, "quality-plan")
        }
        SchedulePlan::Condition { dist, class, duration_ms } => {
            condition_schedule(dist, *class, *duration_ms, trial_seed, "condition-plan")
        }
    }
}

/// Runs one trial of an experiment cell.
pub fn run_trial(exp: &Experiment, trial: u32) -> Result<PageLoadResult, ExperimentError> {
    let seed = exp.base_seed + u64::from(trial);
    let schedule = trial_schedule(&exp.plan, exp.base_seed, seed)?;
    let result = load_page(&exp.page, &exp.proto, &schedule, &exp.sim, splitmix64(seed))?;
    Ok(result)
}

/// Replays one trial with event recording on and returns the `events/v1`
/// text rendering of its log.
pub fn run_trial_with_events(exp: &Experiment, trial: u32) -> Result<String, ExperimentError> {
    let mut with_events = exp.clone();
    with_events.sim.record_events = true;
    let seed = with_events.base_seed + u64::from(trial);
    let schedule = trial_schedule(&with_events.plan, with_events.base_seed, seed)?;
    let mut browser_cfg = with_events.sim.with_seed(splitmix64(seed));
    browser_cfg.record_events = true;
    let log = crate::http::load_page_events(
        &with_events.page,
        &with_events.proto,
        &schedule,
        &browser_cfg,
    )?;
    Ok(log)
}

/// Runs every trial of a cell, in parallel, results ordered by trial
/// index regardless of completion order.
pub fn run_experiment(exp: &Experiment) -> Result<TrialSet, ExperimentError> {
    assert!(exp.trials >= 1, "trial count must be at least 1");
    // quality-mode schedules are shared across trials
    let shared = match &exp.plan {
        SchedulePlan::Condition { .. } => None,
        plan => Some(trial_schedule(plan, exp.base_seed, exp.base_seed)?),
    };
    let summaries: Result<Vec<TrialSummary>, ExperimentError> = (0..exp.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = exp.base_seed + u64::from(trial);
            let result = match &shared {
                Some(schedule) => {
                    load_page(&exp.page, &exp.proto, schedule, &exp.sim, splitmix64(seed))?
                }
                None => run_trial(exp, trial)?,
            };
            Ok(TrialSummary {
                trial,
                seed,
                plt_ms: result.plt_ms,
                connections: result.connections_opened,
                retransmissions: result.total_retransmissions(),
                converged: result.converged,
            })
        })
        .collect();
    let trials = summaries?;
    let mut plts: Vec<f64> = trials.iter().map(|t| t.plt_ms).collect();
    let stats = SummaryStats::from_samples(&mut plts);
    Ok(TrialSet {
        label: exp.label.clone(),
        page: exp.page.name.clone(),
        protocol: exp.proto.protocol,
        base_seed: exp.base_seed,
        trials,
        stats,
    })
}

/// Pairwise median comparison across trial sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub medians_ms: Vec<f64>,
    /// `diff_pct[i][j]` = (median_j - median_i) / median_i * 100.
    pub diff_pct: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl Comparison {
    pub fn build(sets: &[TrialSet]) -> Result<Comparison, ExperimentError> {
        if let Some(empty) = sets.iter().find(|s| s.trials.is_empty()) {
            return Err(ExperimentError::EmptySet(empty.label.clone()));
        }
        let mut warnings = Vec::new();
        if sets.len() > 1 {
            let first = &sets[0].page;
            if sets.iter().any(|s| &s.page != first) {
                warnings.push(format!(
                    "comparing different pages: {}",
                    sets.iter().map(|s| s.page.as_str()).collect::<Vec<_>>().join(" vs ")
                ));
            }
        }
        let medians: Vec<f64> = sets.iter().map(TrialSet::median_plt_ms).collect();
        let diff = medians
            .iter()
            .map(|&a| medians.iter().map(|&b| (b - a) / a * 100.0).collect())
            .collect();
        Ok(Comparison {
            labels: sets.iter().map(|s| s.label.clone()).collect(),
            medians_ms: medians,
            diff_pct: diff,
            warnings,
        })
    }

    /// Plain-text table: per-set stats plus pairwise median differences.
    pub fn render_text(&self, sets: &[TrialSet]) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:>7} {:>12} {:>12} {:>12} {:>12}\n",
            "label", "trials", "median_ms", "p25_ms", "p75_ms", "mean_ms"
        ));
        for s in sets {
            out.push_str(&format!(
                "{:<28} {:>7} {:>12.1} {:>12.1} {:>12.1} {:>12.1}\n",
                s.label, s.trials.len(), s.stats.median, s.stats.p25, s.stats.p75, s.stats.mean
            ));
        }
        for (i, a) in self.labels.iter().enumerate() {
            for (j, b) in self.labels.iter().enumerate() {
                if j <= i {
                    continue;
                }
                out.push_str(&format!(
                    "median({b}) vs median({a}): {:+.1}%\n",
                    self.diff_pct[i][j]
                ));
            }
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,median_ms\n");
        for (l, m) in self.labels.iter().zip(&self.medians_ms) {
            out.push_str(&format!("{l},{m:.3}\n"));
        }
        out
    }
}
