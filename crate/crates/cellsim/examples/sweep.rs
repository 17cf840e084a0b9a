//! Sweeps the headline experiment grid and prints per-cell medians.
//! Handy for eyeballing preset behavior at low trial counts before
//! committing to full batches.
//!
//! Usage: `cargo run --example sweep [trials]`

use cellsim::characterize::{ConditionClass, QualityClass};
use cellsim::experiment::{run_experiment, Experiment, SchedulePlan};
use cellsim::http::{Protocol, ProtocolConfig};
use cellsim::netsim::SimConfig;
use cellsim::pages::{preset_page, shard, PagePreset, PageSpec, ShardStrategy, SharddingPreset};
use cellsim::schedule::{synthetic_distributions, DistPreset};

fn cell(
    label: &str,
    page: PageSpec,
    protocol: Protocol,
    plan: SchedulePlan,
    trials: u32,
    icw: u32,
) -> f64 {
    let exp = Experiment {
        label: label.to_string(),
        page,
        proto: ProtocolConfig::for_protocol(protocol),
        sim: SimConfig { icw_segments: icw, ..SimConfig::default() },
        plan,
        trials,
        base_seed: 1,
    };
    let set = run_experiment(&exp).expect("cell runs");
    let unconverged = set.trials.iter().filter(|t| !t.converged).count();
    println!(
        "{label:<42} median {:>10.1} ms  (p25 {:>9.1}, p75 {:>9.1}){}",
        set.stats.median,
        set.stats.p25,
        set.stats.p75,
        if unconverged > 0 { format!("  [{unconverged} unconverged]") } else { String::new() }
    );
    set.stats.median
}

fn quality_plan(q: QualityClass) -> SchedulePlan {
    SchedulePlan::Quality {
        dist: synthetic_distributions(DistPreset::PaperQuality),
        class: q,
        duration_ms: 600_000,
    }
}

fn condition_plan(c: ConditionClass) -> SchedulePlan {
    SchedulePlan::Condition {
        dist: synthetic_distributions(DistPreset::for_condition(c)),
        class: c,
        duration_ms: 600_000,
    }
}

fn main() {
    let trials: u32 =
        std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    println!("== trials per cell: {trials} ==");

    println!("-- C3/C4: uniform pages under quality classes --");
    for preset in [PagePreset::P365x1K, PagePreset::P10x435K] {
        let page = preset_page(preset);
        for q in QualityClass::ALL {
            let h1 = cell(
                &format!("{preset:?} {q:?} h1"),
                page.clone(),
                Protocol::H1,
                quality_plan(q),
                trials,
                10,
            );
            let h2 = cell(
                &format!("{preset:?} {q:?} h2"),
                page.clone(),
                Protocol::H2,
                quality_plan(q),
                trials,
                10,
            );
            println!("    -> h2/h1 = {:.3}", h2 / h1);
        }
    }

    println!("-- C5: mixed pages under quality classes --");
    for preset in [PagePreset::M2MB, PagePreset::M8MB, PagePreset::M12MB] {
        let page = preset_page(preset);
        for q in QualityClass::ALL {
            let h1 = cell(
                &format!("{preset:?} {q:?} h1"),
                page.clone(),
                Protocol::H1,
                quality_plan(q),
                trials,
                10,
            );
            let h2 = cell(
                &format!("{preset:?} {q:?} h2"),
                page.clone(),
                Protocol::H2,
                quality_plan(q),
                trials,
                10,
            );
            println!("    -> h2/h1 = {:.3}", h2 / h1);
        }
    }

    println!("-- C6: sharding on M8MB under condition classes --");
    let m8 = preset_page(PagePreset::M8MB);
    for c in ConditionClass::ALL {
        let unsharded = cell(
            &format!("M8MB {c:?} h2 unsharded"),
            m8.clone(),
            Protocol::H2,
            condition_plan(c),
            trials,
            10,
        );
        let mut results = Vec::new();
        for p in [SharddingPreset::A, SharddingPreset::B, SharddingPreset::C] {
            let sharded = shard(&m8, ShardStrategy::Preset(p)).unwrap();
            let m = cell(
                &format!("M8MB {c:?} h2 type {p:?}"),
                sharded,
                Protocol::H2,
                condition_plan(c),
                trials,
                10,
            );
            results.push((p, m));
        }
        println!(
            "    -> B/C = {:.3}, C/A = {:.3}, A/unsharded = {:.3}",
            results[1].1 / results[2].1,
            results[2].1 / results[0].1,
            results[0].1 / unsharded
        );
    }

    println!("-- C7: connection sweep on P10x435K under good condition --");
    let p10 = preset_page(PagePreset::P10x435K);
    let h1 = cell(
        "P10x435K cond-good h1 x6",
        p10.clone(),
        Protocol::H1,
        condition_plan(ConditionClass::Good),
        trials,
        10,
    );
    let mut sweep = Vec::new();
    for conns in [1usize, 2, 3, 6, 10] {
        let page = if conns == 1 {
            p10.clone()
        } else {
            shard(&p10, ShardStrategy::RoundRobin { hosts: conns }).unwrap()
        };
        let m = cell(
            &format!("P10x435K cond-good h2 x{conns}"),
            page,
            Protocol::H2,
            condition_plan(ConditionClass::Good),
            trials,
            10,
        );
        sweep.push(m);
    }
    println!(
        "    -> sweep medians: {:?}, m10/mh1 = {:.3}",
        sweep.iter().map(|m| (m / 1000.0 * 10.0).round() / 10.0).collect::<Vec<_>>(),
        sweep[4] / h1
    );

    println!("-- C8: ICW 60 vs 10, h2 one connection --");
    for c in [ConditionClass::Median, ConditionClass::Poor] {
        let m10 = cell(
            &format!("P10x435K {c:?} h2 icw10"),
            p10.clone(),
            Protocol::H2,
            condition_plan(c),
            trials,
            10,
        );
        let m60 = cell(
            &format!("P10x435K {c:?} h2 icw60"),
            p10.clone(),
            Protocol::H2,
            condition_plan(c),
            trials,
            60,
        );
        println!("    -> icw60/icw10 = {:.3}", m60 / m10);
    }
}
