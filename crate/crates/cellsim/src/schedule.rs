//! Per-epoch emulation schedules built from metric distributions.
//!
//! A schedule is a contiguous run of 70 ms epochs, each carrying a loss
//! rate (applied only while a loss event is active), a one-way delay,
//! and a bandwidth. Quality mode picks fixed percentiles per class;
//! condition mode samples the class distributions with a seeded RNG.

use crate::characterize::{series_value_at, ConditionClass, MetricDistributions, QualityClass, WINDOW_MS};
use crate::stats::Percentiles as GenPercentiles;
use crate::time::SimTime;
use crate::Percentiles;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("empty distribution: no {0} series")]
    EmptyMetric(&'static str),
    #[error("empty handshake RTT distribution")]
    EmptyHandshake,
    #[error("schedule must cover at least one epoch")]
    ZeroDuration,
}

/// Link parameters held constant for one 70 ms epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEpoch {
    pub index: u32,
    /// Drop probability per data segment, in effect only when
    /// `loss_active` is set.
    pub loss_rate: f64,
    /// A retransmission-cluster event occurs in this epoch.
    pub loss_active: bool,
    pub one_way_delay_ms: f64,
    #[serde(rename = "bandwidth_Bps")]
    pub bandwidth_bps: f64,
}

impl LinkEpoch {
    fn validate(&self) {
        debug_assert!((0.0..=1.0).contains(&self.loss_rate));
        debug_assert!(self.one_way_delay_ms > 0.0);
        debug_assert!(self.bandwidth_bps > 0.0);
        debug_assert!(self.loss_rate == 0.0 || self.loss_active);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Quality,
    Condition,
    /// Hand-built schedule (tests, constant links).
    Fixed,
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleMode::Quality => "quality",
            ScheduleMode::Condition => "condition",
            ScheduleMode::Fixed => "fixed",
        })
    }
}

/// An ordered run of contiguous epochs plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulationSchedule {
    pub mode: ScheduleMode,
    pub class: String,
    pub seed: u64,
    pub source: String,
    pub epoch_ms: u64,
    pub epochs: Vec<LinkEpoch>,
}

const SCHED_VERSION: &str = "sched/v1";

#[derive(Serialize, Deserialize)]
struct VersionedSched {
    version: String,
    #[serde(flatten)]
    sched: EmulationSchedule,
}

impl EmulationSchedule {
    /// Constant lossless link, mostly for tests and oracles.
    pub fn constant(duration_ms: u64, one_way_delay_ms: f64, bandwidth_bps: f64) -> Self {
        let n = duration_ms.div_ceil(WINDOW_MS).max(1);
        let epochs = (0..n)
            .map(|i| LinkEpoch {
                index: i as u32,
                loss_rate: 0.0,
                loss_active: false,
                one_way_delay_ms,
                bandwidth_bps,
            })
            .collect();
        EmulationSchedule {
            mode: ScheduleMode::Fixed,
            class: "lossless".into(),
            seed: 0,
            source: "constant".into(),
            epoch_ms: WINDOW_MS,
            epochs,
        }
    }

    /// Constant link that drops every data segment while active.
    pub fn absorbing(duration_ms: u64, one_way_delay_ms: f64, bandwidth_bps: f64) -> Self {
        let mut s = Self::constant(duration_ms, one_way_delay_ms, bandwidth_bps);
        for e in &mut s.epochs {
            e.loss_active = true;
            e.loss_rate = 1.0;
        }
        s.class = "absorbing".into();
        s
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_millis(self.epoch_ms * self.epochs.len() as u64)
    }

    /// Epoch in effect at `t`; times past the end hold the last epoch.
    pub fn epoch_at(&self, t: SimTime) -> &LinkEpoch {
        let idx = (t.as_micros() / (self.epoch_ms * 1_000)) as usize;
        &self.epochs[idx.min(self.epochs.len() - 1)]
    }

    pub fn epoch_index_at(&self, t: SimTime) -> u32 {
        self.epoch_at(t).index
    }

    pub fn to_json(&self) -> String {
        let v = VersionedSched { version: SCHED_VERSION.to_string(), sched: self.clone() };
        serde_json::to_string_pretty(&v).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::characterize::FormatError> {
        let v: VersionedSched = serde_json::from_str(text)?;
        if v.version != SCHED_VERSION {
            return Err(crate::characterize::FormatError::Version {
                found: v.version,
                expected: SCHED_VERSION,
            });
        }
        Ok(v.sched)
    }
}

/// Rounds a gap (ms) to a whole number of epochs, minimum one.
fn gap_to_epochs(gap_ms: f64, epoch_ms: u64) -> u64 {
    ((gap_ms / epoch_ms as f64).round() as u64).max(1)
}

fn check_nonempty(dist: &MetricDistributions) -> Result<(), ScheduleError> {
    if dist.retx_rate.is_empty() {
        return Err(ScheduleError::EmptyMetric("retx_rate"));
    }
    if dist.gap_ms.is_empty() {
        return Err(ScheduleError::EmptyMetric("gap_ms"));
    }
    if dist.throughput_bps.is_empty() {
        return Err(ScheduleError::EmptyMetric("throughput_Bps"));
    }
    if dist.ack_rtt_ms.is_empty() {
        return Err(ScheduleError::EmptyMetric("ack_rtt_ms"));
    }
    Ok(())
}

/// Percentile picks per quality class, in metric order
/// (retx rate, gap, throughput, RTT).
fn quality_levels(q: QualityClass) -> [f64; 4] {
    match q {
        QualityClass::Good => [0.10, 0.90, 0.90, 0.10],
        QualityClass::Fair => [0.25, 0.75, 0.75, 0.25],
        QualityClass::Passable => [0.50, 0.50, 0.50, 0.50],
        QualityClass::Poor => [0.75, 0.25, 0.25, 0.75],
    }
}

/// Builds a quality-mode schedule: epoch `i` takes each metric's class
/// percentile at window index `i`, cycling once past the last observed
/// window. Loss events recur each epoch's gap value, quantized to whole
/// epochs. The seed is recorded but unused; quality schedules are
/// percentile-deterministic.
pub fn quality_schedule(
    dist: &MetricDistributions,
    q: QualityClass,
    duration_ms: u64,
    seed: u64,
    source: &str,
) -> Result<EmulationSchedule, ScheduleError> {
    check_nonempty(dist)?;
    let epoch_ms = dist.window_ms;
    let n_epochs = duration_ms.div_ceil(epoch_ms).max(1);
    let [rtx_l, gap_l, thr_l, rtt_l] = quality_levels(q);
    let period = u64::from(dist.max_window()) + 1;

    let at = |series: &BTreeMap<u32, Percentiles>, epoch: u64, level: f64| -> f64 {
        let window = (epoch % period) as u32;
        series_value_at(series, window).at_level(level)
    };

    let mut epochs = Vec::with_capacity(n_epochs as usize);
    // First event lands one (quantized) gap after start.
    let mut next_active = gap_to_epochs(at(&dist.gap_ms, 0, gap_l), epoch_ms);
    for i in 0..n_epochs {
        let active = i == next_active;
        if active {
            let gap = at(&dist.gap_ms, i, gap_l);
            next_active = i + gap_to_epochs(gap, epoch_ms);
        }
        let loss_rate = if active { at(&dist.retx_rate, i, rtx_l).clamp(0.0, 1.0) } else { 0.0 };
        let epoch = LinkEpoch {
            index: i as u32,
            loss_rate,
            loss_active: active,
            one_way_delay_ms: at(&dist.ack_rtt_ms, i, rtt_l) / 2.0,
            bandwidth_bps: at(&dist.throughput_bps, i, thr_l),
        };
        epoch.validate();
        epochs.push(epoch);
    }
    Ok(EmulationSchedule {
        mode: ScheduleMode::Quality,
        class: q.to_string(),
        seed,
        source: source.to_string(),
        epoch_ms,
        epochs,
    })
}

/// Raw values drawn while building a condition schedule, kept for
/// statistics (sampled gaps are pre-quantization).
#[derive(Debug, Clone, Default)]
pub struct ConditionSamples {
    pub gaps_ms: Vec<f64>,
    pub handshake_rtt_ms: Vec<f64>,
}

/// Builds a condition-mode schedule from a class-restricted distribution.
/// Per loss event: gap, loss rate, and bandwidth are sampled (seeded)
/// from the class distributions at the event's window index; the one-way
/// delay is resampled every epoch from the handshake RTT distribution.
/// Identical seeds yield identical schedules.
pub fn condition_schedule(
    dist: &MetricDistributions,
    c: ConditionClass,
    duration_ms: u64,
    seed: u64,
    source: &str,
) -> Result<EmulationSchedule, ScheduleError> {
    condition_schedule_with_samples(dist, c, duration_ms, seed, source).map(|(s, _)| s)
}

pub fn condition_schedule_with_samples(
    dist: &MetricDistributions,
    c: ConditionClass,
    duration_ms: u64,
    seed: u64,
    source: &str,
) -> Result<(EmulationSchedule, ConditionSamples), ScheduleError> {
    check_nonempty(dist)?;
    if dist.handshake_rtt_ms.is_empty() {
        return Err(ScheduleError::EmptyHandshake);
    }
    let epoch_ms = dist.window_ms;
    let n_epochs = duration_ms.div_ceil(epoch_ms).max(1);
    let period = u64::from(dist.max_window()) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = ConditionSamples::default();

    let draw = |rng: &mut ChaCha8Rng, series: &BTreeMap<u32, Percentiles>, epoch: u64| -> f64 {
        let window = (epoch % period) as u32;
        series_value_at(series, window).interpolate(rng.gen::<f64>())
    };
    let empirical = |rng: &mut ChaCha8Rng, samples: &[f64]| -> f64 {
        samples[rng.gen_range(0..samples.len())]
    };

    let min_gap = epoch_ms as f64;
    let first_gap = draw(&mut rng, &dist.gap_ms, 0).max(min_gap);
    samples.gaps_ms.push(first_gap);
    let mut next_active = gap_to_epochs(first_gap, epoch_ms);
    let mut bandwidth = draw(&mut rng, &dist.throughput_bps, 0);
    let mut epochs = Vec::with_capacity(n_epochs as usize);
    for i in 0..n_epochs {
        let active = i == next_active;
        let mut loss_rate = 0.0;
        if active {
            loss_rate = draw(&mut rng, &dist.retx_rate, i).clamp(0.0, 1.0);
            bandwidth = draw(&mut rng, &dist.throughput_bps, i);
            let gap = draw(&mut rng, &dist.gap_ms, i).max(min_gap);
            samples.gaps_ms.push(gap);
            next_active = i + gap_to_epochs(gap, epoch_ms);
        }
        let rtt = empirical(&mut rng, &dist.handshake_rtt_ms);
        samples.handshake_rtt_ms.push(rtt);
        let epoch = LinkEpoch {
            index: i as u32,
            loss_rate,
            loss_active: active,
            one_way_delay_ms: rtt / 2.0,
            bandwidth_bps: bandwidth,
        };
        epoch.validate();
        epochs.push(epoch);
    }
    let sched = EmulationSchedule {
        mode: ScheduleMode::Condition,
        class: c.to_string(),
        seed,
        source: source.to_string(),
        epoch_ms,
        epochs,
    };
    Ok((sched, samples))
}

/// Synthetic distribution presets anchored at published medians, for use
/// when no captured traces are available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistPreset {
    /// Condition-class presets keyed on the median inter-cluster gap.
    PaperGood,
    PaperMedian,
    PaperPoor,
    /// The whole lossy population, for quality-mode percentile picks.
    PaperQuality,
}

impl DistPreset {
    pub const ALL: [DistPreset; 4] =
        [DistPreset::PaperGood, DistPreset::PaperMedian, DistPreset::PaperPoor, DistPreset::PaperQuality];

    pub fn for_condition(c: ConditionClass) -> DistPreset {
        match c {
            ConditionClass::Good => DistPreset::PaperGood,
            ConditionClass::Median => DistPreset::PaperMedian,
            ConditionClass::Poor => DistPreset::PaperPoor,
        }
    }
}

impl fmt::Display for DistPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistPreset::PaperGood => "paper-good",
            DistPreset::PaperMedian => "paper-median",
            DistPreset::PaperPoor => "paper-poor",
            DistPreset::PaperQuality => "paper-quality",
        })
    }
}

impl FromStr for DistPreset {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "paper-good" => Ok(DistPreset::PaperGood),
            "paper-median" => Ok(DistPreset::PaperMedian),
            "paper-poor" => Ok(DistPreset::PaperPoor),
            "paper-quality" => Ok(DistPreset::PaperQuality),
            _ => Err(()),
        }
    }
}

/// Standard normal quantiles at the five percentile levels.
const Z_LEVELS: [f64; 5] = [
    -1.2815515655446004,
    -0.6744897501960817,
    0.0,
    0.6744897501960817,
    1.2815515655446004,
];

/// Log-normal five-point summary: median `m`, log-space dispersion
/// `sigma`, clamped to `[lo, hi]`.
fn lognormal_percentiles(m: f64, sigma: f64, lo: f64, hi: f64) -> Percentiles {
    let q = |z: f64| (m * (sigma * z).exp()).clamp(lo, hi);
    GenPercentiles {
        p10: q(Z_LEVELS[0]),
        p25: q(Z_LEVELS[1]),
        p50: q(Z_LEVELS[2]),
        p75: q(Z_LEVELS[3]),
        p90: q(Z_LEVELS[4]),
    }
}

/// Number of window indices the synthetic presets cover (2.1 s).
const SYNTH_WINDOWS: u32 = 30;
/// Handshake sample count; odd so the nearest-rank median hits the anchor.
const SYNTH_HANDSHAKE_SAMPLES: usize = 1001;
/// Median handshake RTT anchor (ms).
const HANDSHAKE_MEDIAN_MS: f64 = 70.0;

struct PresetParams {
    gap_median_ms: f64,
    gap_sigma: f64,
    retx_median: f64,
    retx_sigma: f64,
    throughput_median_bps: f64,
    throughput_sigma: f64,
    ack_rtt_median_ms: f64,
    ack_rtt_sigma: f64,
    lossy_fraction: f64,
}

fn preset_params(preset: DistPreset) -> PresetParams {
    // Dispersions are implementation choices; medians are the anchors.
    // The poor-class retransmission sigma is solved so p90 lands exactly
    // on the 0.40 per-window ceiling: exp(1.2816 * sigma) = 0.40 / 0.22.
    match preset {
        DistPreset::PaperGood => PresetParams {
            gap_median_ms: 1150.0,
            gap_sigma: 0.60,
            retx_median: 0.10,
            retx_sigma: 0.55,
            throughput_median_bps: 4_300_000.0,
            throughput_sigma: 0.50,
            ack_rtt_median_ms: 110.0,
            ack_rtt_sigma: 0.45,
            lossy_fraction: 0.32,
        },
        DistPreset::PaperMedian => PresetParams {
            gap_median_ms: 350.0,
            gap_sigma: 0.60,
            retx_median: 0.16,
            retx_sigma: 0.55,
            throughput_median_bps: 450_000.0,
            throughput_sigma: 0.50,
            ack_rtt_median_ms: 110.0,
            ack_rtt_sigma: 0.45,
            lossy_fraction: 0.32,
        },
        DistPreset::PaperPoor => PresetParams {
            gap_median_ms: 165.0,
            gap_sigma: 0.60,
            retx_median: 0.22,
            retx_sigma: 0.4665,
            throughput_median_bps: 300_000.0,
            throughput_sigma: 0.50,
            ack_rtt_median_ms: 110.0,
            ack_rtt_sigma: 0.45,
            lossy_fraction: 0.32,
        },
        DistPreset::PaperQuality => PresetParams {
            gap_median_ms: 843.0,
            gap_sigma: 0.28,
            retx_median: 0.03,
            retx_sigma: 0.30,
            throughput_median_bps: 400_000.0,
            throughput_sigma: 0.95,
            ack_rtt_median_ms: 110.0,
            ack_rtt_sigma: 0.80,
            lossy_fraction: 0.32,
        },
    }
}

/// Builds a synthetic preset distribution. Every metric uses a
/// log-normal five-point summary, constant across window indices so the
/// class medians hold at any epoch.
pub fn synthetic_distributions(preset: DistPreset) -> MetricDistributions {
    let p = preset_params(preset);
    let gap = lognormal_percentiles(p.gap_median_ms, p.gap_sigma, WINDOW_MS as f64, f64::INFINITY);
    let retx = lognormal_percentiles(p.retx_median, p.retx_sigma, 0.0, 1.0);
    let thr = lognormal_percentiles(p.throughput_median_bps, p.throughput_sigma, 1.0, f64::INFINITY);
    let ack = lognormal_percentiles(p.ack_rtt_median_ms, p.ack_rtt_sigma, 1.0, f64::INFINITY);

    let spread = |v: Percentiles| -> BTreeMap<u32, Percentiles> {
        (0..SYNTH_WINDOWS).map(|w| (w, v)).collect()
    };

    // Handshake samples via the same inverse-quantile path used for
    // sampling, plugged at evenly spaced levels; the middle sample is the
    // median anchor exactly.
    let hs_points = lognormal_percentiles(HANDSHAKE_MEDIAN_MS, 0.50, 1.0, f64::INFINITY);
    let n = SYNTH_HANDSHAKE_SAMPLES;
    let mut handshake: Vec<f64> = (0..n)
        .map(|i| {
            let u = 0.10 + 0.80 * i as f64 / (n - 1) as f64;
            hs_points.interpolate(u)
        })
        .collect();
    crate::stats::sort_sample(&mut handshake);

    MetricDistributions {
        window_ms: WINDOW_MS,
        lossy_fraction: p.lossy_fraction,
        retx_rate: spread(retx),
        gap_ms: spread(gap),
        throughput_bps: spread(thr),
        ack_rtt_ms: spread(ack),
        handshake_rtt_ms: handshake,
    }
}

/// Renders a schedule as a traffic-shaping shell script: one `tc` command
/// per epoch. The script is an export artifact; nothing in this crate
/// executes it.
pub fn export_netem_script(s: &EmulationSchedule) -> String {
    let mut out = String::new();
    out.push_str("#!/bin/sh\n");
    out.push_str(&format!(
        "# netem schedule: mode={} class={} seed={} source={}\n",
        s.mode, s.class, s.seed, s.source
    ));
    out.push_str(&format!(
        "# pacing: apply one line, hold it for {} ms, then apply the next\n",
        s.epoch_ms
    ));
    out.push_str("DEV=\"${DEV:-eth0}\"\n");
    for e in &s.epochs {
        let loss_pct = format_trim(e.loss_rate * 100.0);
        let delay_ms = format_trim(e.one_way_delay_ms);
        let rate_kbit = format_trim(e.bandwidth_bps * 8.0 / 1000.0);
        out.push_str(&format!(
            "tc qdisc replace dev \"$DEV\" root netem loss {loss_pct}% delay {delay_ms}ms rate {rate_kbit}kbit  # epoch {}\n",
            e.index
        ));
    }
    out
}

/// Formats with up to three decimals, trimming trailing zeros, so a 10%
/// loss renders as `10%` and 35 ms as `35ms`.
fn format_trim(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(preset: DistPreset) -> MetricDistributions {
        synthetic_distributions(preset)
    }

    #[test]
    fn presets_hit_their_anchors() {
        assert_eq!(dist(DistPreset::PaperPoor).gap_ms[&0].p50, 165.0);
        assert_eq!(dist(DistPreset::PaperMedian).gap_ms[&0].p50, 350.0);
        assert_eq!(dist(DistPreset::PaperGood).gap_ms[&0].p50, 1150.0);
        assert_eq!(dist(DistPreset::PaperPoor).handshake_median_ms(), Some(70.0));
        let poor_p90 = dist(DistPreset::PaperPoor).retx_rate[&0].p90;
        assert!((poor_p90 - 0.40).abs() < 0.005, "poor retx p90 = {poor_p90}");
    }

    #[test]
    fn presets_are_monotone() {
        for p in DistPreset::ALL {
            assert!(dist(p).is_monotone(), "{p} not monotone");
        }
    }

    #[test]
    fn passable_uses_the_median_everywhere() {
        let d = dist(DistPreset::PaperQuality);
        let s = quality_schedule(&d, QualityClass::Passable, 700, 0, "t").unwrap();
        for e in &s.epochs {
            assert_eq!(e.one_way_delay_ms, d.ack_rtt_ms[&0].p50 / 2.0);
            assert_eq!(e.bandwidth_bps, d.throughput_bps[&0].p50);
            if e.loss_active {
                assert_eq!(e.loss_rate, d.retx_rate[&0].p50);
            }
        }
    }

    #[test]
    fn quality_ordering_good_vs_poor() {
        let d = dist(DistPreset::PaperQuality);
        let good = quality_schedule(&d, QualityClass::Good, 7000, 0, "t").unwrap();
        let poor = quality_schedule(&d, QualityClass::Poor, 7000, 0, "t").unwrap();
        for (g, p) in good.epochs.iter().zip(&poor.epochs) {
            assert!(g.bandwidth_bps >= p.bandwidth_bps);
            assert!(g.one_way_delay_ms <= p.one_way_delay_ms);
        }
        let active = |s: &EmulationSchedule| s.epochs.iter().filter(|e| e.loss_active).count();
        assert!(active(&good) <= active(&poor));
        let max_rate = |s: &EmulationSchedule| {
            s.epochs.iter().map(|e| e.loss_rate).fold(0.0f64, f64::max)
        };
        assert!(max_rate(&good) <= max_rate(&poor));
    }

    #[test]
    fn degenerate_distribution_collapses_classes() {
        let mut d = dist(DistPreset::PaperQuality);
        let c = |v: f64| crate::stats::Percentiles::constant(v);
        for m in [&mut d.retx_rate, &mut d.gap_ms] {
            for p in m.values_mut() {
                *p = c(0.1);
            }
        }
        for p in d.throughput_bps.values_mut() {
            *p = c(1e6);
        }
        for p in d.ack_rtt_ms.values_mut() {
            *p = c(100.0);
        }
        let good = quality_schedule(&d, QualityClass::Good, 1400, 0, "t").unwrap();
        let poor = quality_schedule(&d, QualityClass::Poor, 1400, 0, "t").unwrap();
        assert_eq!(good.epochs, poor.epochs);
    }

    #[test]
    fn condition_schedules_are_seed_deterministic() {
        let d = dist(DistPreset::PaperPoor);
        let a = condition_schedule(&d, ConditionClass::Poor, 70_000, 42, "t").unwrap();
        let b = condition_schedule(&d, ConditionClass::Poor, 70_000, 42, "t").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let c = condition_schedule(&d, ConditionClass::Poor, 70_000, 43, "t").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn condition_sampled_gap_medians_converge() {
        for (preset, class, anchor) in [
            (DistPreset::PaperPoor, ConditionClass::Poor, 165.0),
            (DistPreset::PaperMedian, ConditionClass::Median, 350.0),
            (DistPreset::PaperGood, ConditionClass::Good, 1150.0),
        ] {
            let d = dist(preset);
            // enough duration to draw well over 10k gaps
            let duration_ms = (anchor as u64 + WINDOW_MS) * 11_000;
            let (_, samples) =
                condition_schedule_with_samples(&d, class, duration_ms, 7, "t").unwrap();
            assert!(samples.gaps_ms.len() >= 10_000, "{} gaps", samples.gaps_ms.len());
            let mut gaps = samples.gaps_ms;
            crate::stats::sort_sample(&mut gaps);
            let med = crate::stats::nearest_rank(&gaps, 0.5);
            assert!(
                (med - anchor).abs() <= 0.05 * anchor,
                "{class}: sampled median {med} vs {anchor}"
            );
        }
    }

    #[test]
    fn loss_rate_positive_only_when_active() {
        let d = dist(DistPreset::PaperPoor);
        let s = condition_schedule(&d, ConditionClass::Poor, 140_000, 3, "t").unwrap();
        assert!(s.epochs.iter().any(|e| e.loss_active));
        for e in &s.epochs {
            assert!(e.loss_rate == 0.0 || e.loss_active);
            assert!((0.0..=1.0).contains(&e.loss_rate));
        }
    }

    #[test]
    fn empty_distribution_is_rejected() {
        let mut d = dist(DistPreset::PaperPoor);
        d.retx_rate.clear();
        assert!(matches!(
            quality_schedule(&d, QualityClass::Good, 700, 0, "t"),
            Err(ScheduleError::EmptyMetric("retx_rate"))
        ));
        let mut d2 = dist(DistPreset::PaperPoor);
        d2.handshake_rtt_ms.clear();
        assert!(matches!(
            condition_schedule(&d2, ConditionClass::Poor, 700, 0, "t"),
            Err(ScheduleError::EmptyHandshake)
        ));
    }

    #[test]
    fn netem_script_renders_one_line_per_epoch() {
        let mut s = EmulationSchedule::constant(70, 35.0, 1_000_000.0);
        s.epochs[0].loss_active = true;
        s.epochs[0].loss_rate = 0.10;
        let script = export_netem_script(&s);
        let commands: Vec<&str> =
            script.lines().filter(|l| l.starts_with("tc qdisc")).collect();
        assert_eq!(commands.len(), 1);
        assert!(commands[0].contains("loss 10%"), "{}", commands[0]);
        assert!(commands[0].contains("delay 35ms"), "{}", commands[0]);

        let quiet = EmulationSchedule::constant(70 * 5, 35.0, 1_000_000.0);
        let script = export_netem_script(&quiet);
        let commands: Vec<&str> =
            script.lines().filter(|l| l.starts_with("tc qdisc")).collect();
        assert_eq!(commands.len(), 5);
        assert!(commands.iter().all(|c| c.contains("loss 0%")));
        assert!(script.contains("70 ms"));
    }

    #[test]
    fn schedule_file_round_trips() {
        let d = dist(DistPreset::PaperMedian);
        let s = condition_schedule(&d, ConditionClass::Median, 7_000, 5, "preset:paper-median")
            .unwrap();
        let json = s.to_json();
        assert_eq!(EmulationSchedule::from_json(&json).unwrap(), s);
    }
}
