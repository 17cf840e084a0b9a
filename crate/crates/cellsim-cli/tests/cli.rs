//! End-to-end checks of the command-line surface: every subcommand, the
//! versioned file formats, exit codes, and run determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellsim"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> TempDir {
        let dir = std::env::temp_dir().join(format!("cellsim-cli-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

const LOSSY_LOG: &str = "\
timestamp,conn_key,direction,seq,payload_len,flags,ack
0.000000,a,toServer,0,0,SYN,0
0.040000,a,toClient,0,0,SYN|ACK,1
0.050000,a,toClient,0,1460,ACK,0
0.060000,a,toClient,0,1460,ACK,0
0.400000,a,toClient,1460,1460,ACK,0
0.410000,a,toClient,1460,1460,ACK,0
0.001000,b,toServer,0,0,SYN,0
0.071000,b,toClient,0,0,SYN|ACK,1
0.101000,b,toClient,0,1460,ACK,0
0.201000,b,toClient,1460,1460,ACK,0
";

#[test]
fn analyze_builds_a_distributions_file() {
    let tmp = TempDir::new("analyze");
    fs::write(tmp.path().join("log.csv"), LOSSY_LOG).unwrap();
    let out = run_in(tmp.path(), &["analyze", "log.csv", "-o", "dist.json"]);
    assert_ok(&out);
    let text = fs::read_to_string(tmp.path().join("dist.json")).unwrap();
    assert!(text.contains("\"version\": \"dist/v1\""));
    // connection `a` retransmits twice among four data segments; `b` is
    // clean: lossy fraction 1/2
    assert!(text.contains("\"lossy_fraction\": 0.5"), "{text}");
    // re-read equals in-memory value
    let dist = cellsim::MetricDistributions::from_json(&text).unwrap();
    assert_eq!(dist.to_json(), text);
    // hand-computed: window 0 of the lossy connection has 2 data
    // segments, 1 retransmission
    assert_eq!(dist.retx_rate[&0].p50, 0.5);
}

#[test]
fn analyze_without_lossy_traces_fails_cleanly() {
    let tmp = TempDir::new("analyze-clean");
    let clean = "\
timestamp,conn_key,direction,seq,payload_len,flags,ack
0.000000,a,toServer,0,0,SYN,0
0.040000,a,toClient,0,0,SYN|ACK,1
0.050000,a,toClient,0,1460,ACK,0
";
    fs::write(tmp.path().join("log.csv"), clean).unwrap();
    let out = run_in(tmp.path(), &["analyze", "log.csv", "-o", "dist.json"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert!(stderr.contains("no lossy traces"), "{stderr}");
}

#[test]
fn schedule_page_and_netem_round_trip() {
    let tmp = TempDir::new("pipeline");
    let d = tmp.path();
    assert_ok(&run_in(d, &["distributions", "synth", "--preset", "paper-poor", "-o", "dist.json"]));
    assert_ok(&run_in(
        d,
        &[
            "schedule",
            "--dist",
            "dist.json",
            "--mode",
            "condition",
            "--class",
            "poor",
            "--duration-ms",
            "7000",
            "--seed",
            "3",
            "-o",
            "sched.json",
        ],
    ));
    let sched = fs::read_to_string(d.join("sched.json")).unwrap();
    assert!(sched.contains("\"version\": \"sched/v1\""));

    assert_ok(&run_in(d, &["export-netem", "--schedule", "sched.json", "-o", "emu.sh"]));
    let script = fs::read_to_string(d.join("emu.sh")).unwrap();
    let commands = script.lines().filter(|l| l.starts_with("tc qdisc")).count();
    assert_eq!(commands, 100, "one command per epoch");

    assert_ok(&run_in(d, &["page", "preset", "--name", "M8MB", "-o", "page.json"]));
    assert_ok(&run_in(
        d,
        &["page", "shard", "--input", "page.json", "--strategy", "preset=B", "-o", "b.json"],
    ));
    let page = cellsim::pages::PageSpec::from_json(&fs::read_to_string(d.join("b.json")).unwrap())
        .unwrap();
    assert_eq!(page.hostnames.len(), 13);

    assert_ok(&run_in(
        d,
        &[
            "page", "synth", "--count", "10", "--uniform", "445440", "--html", "10240", "-o",
            "synth.json",
        ],
    ));
}

#[test]
fn run_is_deterministic_and_reportable() {
    let tmp = TempDir::new("run");
    let d = tmp.path();
    let config = r#"{
  "page": "P10x435K",
  "protocol": "h2",
  "trials": 3,
  "base_seed": 7,
  "schedule": { "mode": "condition", "class": "good", "preset": "paper-good", "duration_ms": 600000 }
}"#;
    fs::write(d.join("exp.json"), config).unwrap();
    assert_ok(&run_in(d, &["run", "--config", "exp.json", "-o", "one", "--first-flight"]));
    assert_ok(&run_in(
        d,
        &["run", "--config", "exp.json", "-o", "two", "--dump-events", "ev.txt", "--dump-objects", "obj.csv"],
    ));

    let one = fs::read_to_string(d.join("one.summary.json")).unwrap();
    let two = fs::read_to_string(d.join("two.summary.json")).unwrap();
    assert_eq!(one, two, "identical configs must produce identical files");
    assert!(one.contains("\"version\": \"trials/v1\""));
    let csv = fs::read_to_string(d.join("one.trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "header plus one row per trial");
    let events = fs::read_to_string(d.join("ev.txt")).unwrap();
    assert!(events.starts_with("events/v1\n"));
    let objects = fs::read_to_string(d.join("obj.csv")).unwrap();
    // one object row per object plus the base HTML, then a summary row
    assert_eq!(objects.lines().filter(|l| l.starts_with("object,")).count(), 11);
    assert_eq!(objects.lines().filter(|l| l.starts_with("summary,")).count(), 1);

    // h1 cell for the comparison table
    let config_h1 = config.replace("\"h2\"", "\"h1\"");
    fs::write(d.join("exp1.json"), config_h1).unwrap();
    assert_ok(&run_in(d, &["run", "--config", "exp1.json", "-o", "h1"]));
    let out = run_in(d, &["report", "one.summary.json", "h1.summary.json", "-o", "cmp.csv"]);
    assert_ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("median_ms"), "{table}");
    assert!(table.contains("vs median"), "{table}");
    assert!(d.join("cmp.csv").exists());
}

#[test]
fn bad_inputs_exit_nonzero_with_one_line_errors() {
    let tmp = TempDir::new("errors");
    let d = tmp.path();
    for args in [
        vec!["distributions", "synth", "--preset", "nope", "-o", "x.json"],
        vec!["page", "preset", "--name", "nope", "-o", "x.json"],
        vec!["report", "missing.json"],
        vec!["run", "--config", "missing.json", "-o", "x"],
    ] {
        let out = run_in(d, &args);
        assert!(!out.status.success(), "{args:?} should fail");
        let stderr = String::from_utf8_lossy(&out.stderr);
        let first = stderr.lines().next().unwrap_or_default();
        assert!(first.starts_with("error:"), "{args:?} -> {stderr}");
    }

    // malformed packet line reports the line and field
    fs::write(
        d.join("bad.csv"),
        "timestamp,conn_key,direction,seq,payload_len,flags,ack\n0.0,c,toServer,0,-3,SYN,0\n",
    )
    .unwrap();
    let out = run_in(d, &["analyze", "bad.csv", "-o", "x.json"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2") && stderr.contains("payload_len"), "{stderr}");
}
