//! Command-line harness: analyze packet logs, build schedules,
//! synthesize and shard pages, run trial batches, and report statistics.

use anyhow::{anyhow, bail, Context, Result};
use cellsim::characterize::{
    build_distributions, conn_loss_latency_rows, loss_latency_correlation,
    split_by_condition, ConditionClass, MetricDistributions, QualityClass,
};
use cellsim::experiment::{run_experiment, Comparison, Experiment, SchedulePlan, TrialSet};
use cellsim::http::{first_flight_report, Protocol, ProtocolConfig};
use cellsim::netsim::SimConfig;
use cellsim::pages::{preset_page, shard, synth_page, PagePreset, PageSpec, ShardStrategy, SizeLaw, SynthParams};
use cellsim::schedule::{
    condition_schedule, export_netem_script, quality_schedule, synthetic_distributions,
    DistPreset, EmulationSchedule,
};
use cellsim::trace::{assemble_connections, parse_packet_log};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "cellsim", about = "Cellular link characterization and h1/h2 page-load emulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characterize a packet log and write a distributions file.
    Analyze(AnalyzeArgs),
    /// Distribution utilities.
    #[command(subcommand)]
    Distributions(DistributionsCmd),
    /// Build an emulation schedule from a distributions file or preset.
    Schedule(ScheduleArgs),
    /// Page synthesis and sharding.
    #[command(subcommand)]
    Page(PageCmd),
    /// Run a trial batch from an experiment config.
    Run(RunArgs),
    /// Compare one or more trial sets.
    Report(ReportArgs),
    /// Render a schedule as a traffic-shaping script.
    ExportNetem(ExportNetemArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Packet log CSV.
    log: PathBuf,
    /// Output distributions file (dist/v1 JSON).
    #[arg(short, long)]
    out: PathBuf,
    /// Restrict to one condition class (good | median | poor).
    #[arg(long)]
    class: Option<String>,
}

#[derive(Subcommand)]
enum DistributionsCmd {
    /// Write a synthetic preset distribution.
    Synth(DistSynthArgs),
}

#[derive(Args)]
struct DistSynthArgs {
    /// paper-good | paper-median | paper-poor | paper-quality
    #[arg(long)]
    preset: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Distributions file; omit to use --preset.
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Synthetic preset used when no --dist is given.
    #[arg(long)]
    preset: Option<String>,
    /// quality | condition
    #[arg(long)]
    mode: String,
    /// Class within the mode (good/fair/passable/poor or good/median/poor).
    #[arg(long)]
    class: String,
    #[arg(long, default_value_t = 60_000)]
    duration_ms: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PageCmd {
    /// Write one of the built-in pages.
    Preset(PagePresetArgs),
    /// Synthesize a page from parameters.
    Synth(PageSynthArgs),
    /// Rewrite object hostnames per a sharding strategy.
    Shard(PageShardArgs),
}

#[derive(Args)]
struct PagePresetArgs {
    /// P365x1K | P10x435K | M2MB | M8MB | M12MB
    #[arg(long)]
    name: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct PageSynthArgs {
    #[arg(long, default_value = "synth")]
    name: String,
    #[arg(long)]
    count: usize,
    /// Uniform object size in bytes.
    #[arg(long, conflicts_with_all = ["lo", "hi"])]
    uniform: Option<u64>,
    /// Geometric ladder bounds in bytes.
    #[arg(long, requires = "hi")]
    lo: Option<u64>,
    #[arg(long, requires = "lo")]
    hi: Option<u64>,
    #[arg(long, default_value_t = 20 * 1024)]
    html: u64,
    /// Scale object sizes to hit this total page size.
    #[arg(long)]
    total: Option<u64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct PageShardArgs {
    /// Input page file (page/v1 JSON).
    #[arg(long)]
    input: PathBuf,
    /// none | by-size=<bytes> | preset=<A|B|C> | round-robin=<k>
    #[arg(long)]
    strategy: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON, see README).
    #[arg(long)]
    config: PathBuf,
    /// Output prefix: writes <prefix>.summary.json and <prefix>.trials.csv.
    #[arg(short, long)]
    out: PathBuf,
    /// Worker threads for trials (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write the first trial's event log (events/v1 text).
    #[arg(long)]
    dump_events: Option<PathBuf>,
    /// Also write the first trial's per-object timings as CSV.
    #[arg(long)]
    dump_objects: Option<PathBuf>,
    /// Print the analytic first-flight byte count and continue.
    #[arg(long)]
    first_flight: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Trial set files (trials/v1 JSON).
    sets: Vec<PathBuf>,
    /// Optional CSV output of the comparison.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportNetemArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

/// Experiment config file schema.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    /// Page file path or a preset name.
    page: String,
    #[serde(default)]
    shard: Option<String>,
    protocol: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    icw_segments: Option<u32>,
    #[serde(default)]
    tls_rtts: Option<u32>,
    #[serde(default = "default_trials")]
    trials: u32,
    #[serde(default = "default_seed")]
    base_seed: u64,
    schedule: ScheduleConfig,
}

fn default_trials() -> u32 {
    200
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleConfig {
    /// Fixed schedule file (sched/v1); overrides mode/class/preset.
    #[serde(default)]
    file: Option<String>,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    class: Option<String>,
    /// Distributions: preset name or dist file path.
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    dist: Option<String>,
    #[serde(default = "default_duration")]
    duration_ms: u64,
}

fn default_duration() -> u64 {
    600_000
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Distributions(DistributionsCmd::Synth(args)) => cmd_dist_synth(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Page(cmd) => cmd_page(cmd),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
        Command::ExportNetem(args) => cmd_export_netem(args),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let text = read(&args.log)?;
    let records = parse_packet_log(&text)?;
    let report = assemble_connections(records);
    if report.dropped > 0 {
        eprintln!("dropped {} connection(s) without a SYN anchor", report.dropped);
    }
    let traces = match &args.class {
        None => report.traces,
        Some(class) => {
            let class: ConditionClass =
                class.parse().map_err(|_| anyhow!("unknown condition class {class:?}"))?;
            split_by_condition(&report.traces).remove(&class).unwrap_or_default()
        }
    };
    let dist = build_distributions(&traces)?;
    write(&args.out, &dist.to_json())?;
    println!(
        "{} traces analyzed, lossy fraction {:.3}, windows up to {}",
        traces.len(),
        dist.lossy_fraction,
        dist.max_window()
    );
    let rows = conn_loss_latency_rows(&traces);
    if let Ok(corr) = loss_latency_correlation(&rows) {
        let show = |v: Option<f64>| {
            v.map(|r| format!("{r:.3}")).unwrap_or_else(|| "undefined".into())
        };
        println!(
            "loss correlation vs min/max/avg RTT and connect time: {} {} {} {}",
            show(corr.vs_min_rtt),
            show(corr.vs_max_rtt),
            show(corr.vs_avg_rtt),
            show(corr.vs_connect_time)
        );
    }
    Ok(())
}

fn cmd_dist_synth(args: DistSynthArgs) -> Result<()> {
    let preset: DistPreset =
        args.preset.parse().map_err(|_| anyhow!("unknown preset {:?}", args.preset))?;
    let dist = synthetic_distributions(preset);
    write(&args.out, &dist.to_json())?;
    println!("wrote {} ({preset})", args.out.display());
    Ok(())
}

fn load_dist(dist: Option<&str>, preset: Option<&str>) -> Result<(MetricDistributions, String)> {
    match (dist, preset) {
        (Some(path), _) => {
            let d = MetricDistributions::from_json(&read(Path::new(path))?)?;
            Ok((d, path.to_string()))
        }
        (None, Some(name)) => {
            let preset: DistPreset =
                name.parse().map_err(|_| anyhow!("unknown preset {name:?}"))?;
            Ok((synthetic_distributions(preset), format!("preset:{preset}")))
        }
        (None, None) => bail!("need either a distributions file or a preset"),
    }
}

fn cmd_schedule(args: ScheduleArgs) -> Result<()> {
    let (dist, source) =
        load_dist(args.dist.as_ref().map(|p| p.to_str().unwrap()), args.preset.as_deref())?;
    let schedule = build_schedule(
        &dist,
        &source,
        &args.mode,
        &args.class,
        args.duration_ms,
        args.seed,
    )?;
    write(&args.out, &schedule.to_json())?;
    println!(
        "wrote {} ({} epochs, mode {}, class {})",
        args.out.display(),
        schedule.epochs.len(),
        schedule.mode,
        schedule.class
    );
    Ok(())
}

fn build_schedule(
    dist: &MetricDistributions,
    source: &str,
    mode: &str,
    class: &str,
    duration_ms: u64,
    seed: u64,
) -> Result<EmulationSchedule> {
    match mode {
        "quality" => {
            let q: QualityClass =
                class.parse().map_err(|_| anyhow!("unknown quality class {class:?}"))?;
            Ok(quality_schedule(dist, q, duration_ms, seed, source)?)
        }
        "condition" => {
            let c: ConditionClass =
                class.parse().map_err(|_| anyhow!("unknown condition class {class:?}"))?;
            Ok(condition_schedule(dist, c, duration_ms, seed, source)?)
        }
        other => bail!("unknown mode {other:?} (expected quality or condition)"),
    }
}

fn cmd_page(cmd: PageCmd) -> Result<()> {
    match cmd {
        PageCmd::Preset(args) => {
            let preset: PagePreset = args.name.parse()?;
            let page = preset_page(preset);
            write(&args.out, &page.to_json())?;
            println!(
                "wrote {} ({} objects, {} bytes total)",
                args.out.display(),
                page.objects.len(),
                page.total_bytes()
            );
        }
        PageCmd::Synth(args) => {
            let law = match (args.uniform, args.lo, args.hi) {
                (Some(bytes), _, _) => SizeLaw::Uniform { bytes },
                (None, Some(lo), Some(hi)) => SizeLaw::Geometric { lo, hi },
                _ => bail!("need --uniform or --lo/--hi"),
            };
            let page = synth_page(&SynthParams {
                name: args.name,
                count: args.count,
                law,
                html_size: args.html,
                total: args.total,
            })?;
            write(&args.out, &page.to_json())?;
            println!("wrote {} ({} bytes total)", args.out.display(), page.total_bytes());
        }
        PageCmd::Shard(args) => {
            let page = PageSpec::from_json(&read(&args.input)?)?;
            let strategy: ShardStrategy = args.strategy.parse()?;
            let sharded = shard(&page, strategy)?;
            write(&args.out, &sharded.to_json())?;
            println!(
                "wrote {} ({} hostnames)",
                args.out.display(),
                sharded.hostnames.len()
            );
        }
    }
    Ok(())
}

fn resolve_page(page_ref: &str) -> Result<PageSpec> {
    if let Ok(preset) = page_ref.parse::<PagePreset>() {
        return Ok(preset_page(preset));
    }
    let path = Path::new(page_ref);
    if path.exists() {
        return Ok(PageSpec::from_json(&read(path)?)?);
    }
    bail!("page {page_ref:?} is neither a preset name nor a file");
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config: RunConfig =
        serde_json::from_str(&read(&args.config)?).context("parsing experiment config")?;
    let mut page = resolve_page(&config.page)?;
    if let Some(strategy) = &config.shard {
        page = shard(&page, strategy.parse()?)?;
    }
    let protocol: Protocol = config
        .protocol
        .parse()
        .map_err(|_| anyhow!("unknown protocol {:?}", config.protocol))?;
    let proto = ProtocolConfig::for_protocol(protocol);
    let mut sim = SimConfig::default();
    if let Some(icw) = config.icw_segments {
        sim.icw_segments = icw;
    }
    if let Some(tls) = config.tls_rtts {
        sim.tls_rtts = tls;
    }

    let plan = if let Some(file) = &config.schedule.file {
        SchedulePlan::Fixed(EmulationSchedule::from_json(&read(Path::new(file))?)?)
    } else {
        let mode = config.schedule.mode.as_deref().unwrap_or("condition");
        let class = config
            .schedule
            .class
            .as_deref()
            .ok_or_else(|| anyhow!("schedule.class is required with mode {mode:?}"))?;
        let (dist, _source) =
            load_dist(config.schedule.dist.as_deref(), config.schedule.preset.as_deref())?;
        match mode {
            "quality" => SchedulePlan::Quality {
                dist,
                class: class.parse().map_err(|_| anyhow!("unknown quality class {class:?}"))?,
                duration_ms: config.schedule.duration_ms,
            },
            "condition" => SchedulePlan::Condition {
                dist,
                class: class
                    .parse()
                    .map_err(|_| anyhow!("unknown condition class {class:?}"))?,
                duration_ms: config.schedule.duration_ms,
            },
            other => bail!("unknown schedule mode {other:?}"),
        }
    };

    if args.first_flight {
        println!("first_flight_bytes={}", first_flight_report(&page, &proto, &sim));
    }

    let label = config.label.clone().unwrap_or_else(|| {
        format!("{}-{}-{}", page.name, protocol, config.shard.as_deref().unwrap_or("none"))
    });
    let exp = Experiment {
        label,
        page,
        proto,
        sim,
        plan,
        trials: config.trials,
        base_seed: config.base_seed,
    };

    let set = if args.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build()
            .context("building worker pool")?
            .install(|| run_experiment(&exp))?
    } else {
        run_experiment(&exp)?
    };

    if let Some(path) = &args.dump_events {
        let events = cellsim::experiment::run_trial_with_events(&exp, 0)?;
        write(path, &events)?;
    }
    if let Some(path) = &args.dump_objects {
        let first = cellsim::experiment::run_trial(&exp, 0)?;
        write(path, &first.to_csv())?;
    }

    let summary_path = args.out.with_extension("summary.json");
    let csv_path = args.out.with_extension("trials.csv");
    write(&summary_path, &set.to_json())?;
    write(&csv_path, &set.to_csv())?;
    println!(
        "{}: {} trials, median {:.1} ms (p25 {:.1}, p75 {:.1})",
        set.label,
        set.trials.len(),
        set.stats.median,
        set.stats.p25,
        set.stats.p75
    );
    println!("wrote {} and {}", summary_path.display(), csv_path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    if args.sets.is_empty() {
        bail!("need at least one trial set file");
    }
    let sets: Vec<TrialSet> = args
        .sets
        .iter()
        .map(|p| Ok(TrialSet::from_json(&read(p)?)?))
        .collect::<Result<_>>()?;
    let cmp = Comparison::build(&sets)?;
    print!("{}", cmp.render_text(&sets));
    if let Some(out) = &args.out {
        write(out, &cmp.to_csv())?;
    }
    Ok(())
}

fn cmd_export_netem(args: ExportNetemArgs) -> Result<()> {
    let schedule = EmulationSchedule::from_json(&read(&args.schedule)?)?;
    if schedule.epochs.is_empty() {
        bail!("schedule holds no epochs");
    }
    write(&args.out, &export_netem_script(&schedule))?;
    println!("wrote {} ({} commands)", args.out.display(), schedule.epochs.len());
    Ok(())
}
