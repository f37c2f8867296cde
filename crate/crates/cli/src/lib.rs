//! Command-line front end. [`run_with`] does all the work so that tests can
//! drive the tool in-process; `main` only wires it to the real streams.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use umi_core::eval::{self, AlignMode, AteReport, EvalOptions, RpeReport};
use umi_core::latency::{self, LagEstimate, LagSearch, ProbeSignal, RobotLag};
use umi_core::par::Parallelism;
use umi_core::pipeline::{self, Dataset, EpisodeSet, ExportConfig, Meta, ModelSpec, RecordingStatus};
use umi_core::se3::PoseTrajectory;
use umi_core::sim::{self, Scenario, SweepRow};
use umi_core::stream::StreamFile;
use umi_core::synth::{self, CorpusSpec};
use umi_core::{Error, Result};

mod schema;

pub use schema::SchemaType;

#[derive(Debug, Parser)]
#[command(name = "umi", version, about = "Hand-held gripper demonstration toolkit")]
struct Cli {
    /// Print the documented format of a file type and exit.
    #[arg(long, value_name = "TYPE", exclusive = true)]
    schema: Option<SchemaType>,
    /// Disable data-parallel execution.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// End-to-end lag between a commanded and a measured signal.
    CalibrateLatency(CalibrateLatency),
    /// Ingest scene directories into an episode set.
    Ingest(Ingest),
    /// Attach kinematic-filter verdicts to an episode set.
    Filter(Filter),
    /// Export accepted episodes as a training dataset.
    Export(Export),
    /// ATE of an estimated trajectory, and inter-gripper RPE with --pair.
    EvalTraj(EvalTraj),
    /// Run one closed-loop latency simulation.
    Simulate(Simulate),
    /// Run a list of simulation scenarios into a CSV table.
    Sweep(Sweep),
    /// Write a seeded synthetic corpus.
    Synth(Synth),
}

#[derive(Debug, Args)]
struct CalibrateLatency {
    #[arg(long)]
    commanded: PathBuf,
    #[arg(long)]
    measured: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    max_lag: f64,
    #[arg(long, default_value_t = 0.001)]
    resolution: f64,
    /// Observation latency to subtract, giving the execution latency.
    #[arg(long)]
    l_obs: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Ingest {
    #[arg(required = true)]
    scenes: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Filter {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    episodes: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Export {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    episodes: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Align {
    Rigid,
    Similarity,
    None,
}

#[derive(Debug, Args)]
struct EvalTraj {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Second gripper's estimate and ground truth.
    #[arg(long, num_args = 2, value_names = ["EST2", "GT2"])]
    pair: Option<Vec<PathBuf>>,
    #[arg(long, value_enum, default_value_t = Align::Rigid)]
    align: Align,
    /// Association gate in seconds.
    #[arg(long, default_value_t = eval::ASSOCIATION_GATE)]
    gate: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Simulate {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-tick CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Sweep {
    #[arg(long)]
    configs: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Synth {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    scenes: usize,
}

/// Runs the tool against the process streams and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// 0 on success, 1 on a domain error (JSON on `err`), 2 on a usage error.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if let Some(t) = cli.schema {
        let _ = writeln!(out, "{}", t.document());
        return 0;
    }
    let Some(command) = cli.command else {
        let _ = writeln!(err, "error: a subcommand or --schema is required\n\nUsage: umi <COMMAND>\n\nFor more information, try '--help'.");
        return 2;
    };
    let par = if cli.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::default()
    };
    match execute(command, par, out) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            let _ = writeln!(err, "{body}");
            1
        }
    }
}

fn execute(command: Command, par: Parallelism, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::CalibrateLatency(c) => calibrate_latency(c, out),
        Command::Ingest(c) => ingest(c, par, out),
        Command::Filter(c) => filter(c, par, out),
        Command::Export(c) => export(c, par, out),
        Command::EvalTraj(c) => eval_traj(c, out),
        Command::Simulate(c) => simulate(c, out),
        Command::Sweep(c) => sweep(c, par, out),
        Command::Synth(c) => synth_corpus(c, out),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })
}

fn pretty(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes the artifact to `path` and `summary` to `out`, or the artifact
/// alone to `out`.
fn emit(out: &mut dyn Write, path: Option<&Path>, artifact: &str, summary: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, artifact)?;
            writeln!(out, "{summary}")?;
            writeln!(out, "wrote {}", p.display())?;
        }
        None => out.write_all(artifact.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LatencyReport {
    l_e2e: f64,
    score: f64,
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_exec: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<LagEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channels: Option<RobotLag>,
}

fn calibrate_latency(c: CalibrateLatency, out: &mut dyn Write) -> Result<()> {
    let cmd = StreamFile::read(&c.commanded)?;
    let meas = StreamFile::read(&c.measured)?;
    let mut report = if !cmd.poses.is_empty() {
        let frame = |f: &StreamFile| f.header.frame_id.clone().unwrap_or_else(|| "world".into());
        let d = cmd.pose_stream()?.to_trajectory(frame(&cmd))?;
        let m = meas.pose_stream()?.to_trajectory(frame(&meas))?;
        let r = latency::robot_exec_latency(&d, &m, c.max_lag, c.resolution)?;
        LatencyReport {
            l_e2e: r.lag,
            score: r.score,
            method: "pose_translation_correlation",
            l_exec: None,
            estimate: None,
            channels: Some(r),
        }
    } else {
        let measured = meas.width_stream()?;
        let commanded = cmd.width_stream()?;
        let (est, method) = match cmd.header.probe.clone() {
            Some(meta) => (
                latency::estimate_lag(
                    &ProbeSignal {
                        meta,
                        stream: commanded,
                    },
                    &measured,
                    c.max_lag,
                    c.resolution,
                )?,
                "probe_correlation",
            ),
            None => (
                latency::correlate_lag(
                    &commanded,
                    &measured,
                    &LagSearch {
                        min_overlap: 3.0 * c.max_lag,
                        ..LagSearch::new(c.max_lag, c.resolution)
                    },
                )?,
                "signal_correlation",
            ),
        };
        LatencyReport {
            l_e2e: est.lag,
            score: est.score,
            method,
            l_exec: None,
            estimate: Some(est),
            channels: None,
        }
    };
    if let Some(l_obs) = c.l_obs {
        report.l_exec = Some(latency::exec_latency(report.l_e2e, l_obs)?);
    }
    let summary = format!(
        "l_e2e {:.4} s (score {:.3}, {}){}",
        report.l_e2e,
        report.score,
        report.method,
        report.l_exec.map(|l| format!(", l_exec {l:.4} s")).unwrap_or_default()
    );
    emit(out, c.out.as_deref(), &pretty(&report)?, &summary)
}

fn ingest(c: Ingest, par: Parallelism, out: &mut dyn Write) -> Result<()> {
    let mut set = pipeline::ingest_scenes(&c.scenes, par)?;
    set.meta = Meta::now();
    let count = |s: RecordingStatus| set.recordings.iter().filter(|r| r.status == s).count();
    let summary = format!(
        "{} scenes, {} recordings: {} paired, {} single, {} unpaired, {} rejected; {} episodes",
        c.scenes.len(),
        set.recordings.len(),
        count(RecordingStatus::Paired),
        count(RecordingStatus::Single),
        count(RecordingStatus::Unpaired),
        count(RecordingStatus::Rejected),
        set.episodes.len()
    );
    emit(out, c.out.as_deref(), &pretty(&set)?, &summary)
}

fn filter(c: Filter, par: Parallelism, out: &mut dyn Write) -> Result<()> {
    let model: ModelSpec = read_json(&c.model)?;
    let mut set = EpisodeSet::read(&c.episodes)?;
    pipeline::filter_episodes(&mut set, &model, par)?;
    set.meta = Meta::now();
    let accepted = set
        .episodes
        .iter()
        .filter(|e| e.verdict.as_ref().is_some_and(|v| v.is_accepted()))
        .count();
    let mut summary = format!("{accepted} of {} episodes accepted", set.episodes.len());
    for e in &set.episodes {
        if let Some(r) = e.verdict.as_ref().and_then(|v| v.reason()) {
            summary.push_str(&format!("\n  rejected {}: {}", e.id, serde_json::to_value(r)?.as_str().unwrap_or("?")));
        }
    }
    emit(out, c.out.as_deref(), &pretty(&set)?, &summary)
}

fn export(c: Export, par: Parallelism, out: &mut dyn Write) -> Result<()> {
    let cfg: ExportConfig = read_json(&c.config)?;
    let set = EpisodeSet::read(&c.episodes)?;
    let mut ds: Dataset = pipeline::export_dataset(&set, &cfg, par)?;
    ds.manifest.meta = Meta::now();
    ds.write(&c.out)?;
    let n = &ds.manifest.counts;
    writeln!(
        out,
        "{} samples from {} exported episodes ({} rejected, {} unfiltered)\nwrote {}",
        n.samples,
        n.exported,
        n.rejected,
        n.unfiltered,
        c.out.display()
    )?;
    Ok(())
}

fn read_trajectory(path: &Path) -> Result<PoseTrajectory> {
    let f = StreamFile::read(path)?;
    let frame = f.header.frame_id.clone().unwrap_or_else(|| "world".into());
    f.pose_stream()?.to_trajectory(frame)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    ate: AteReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_ate: Option<AteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rpe: Option<RpeReport>,
}

fn eval_traj(c: EvalTraj, out: &mut dyn Write) -> Result<()> {
    let opts = EvalOptions {
        gate: c.gate,
        align: match c.align {
            Align::Rigid => AlignMode::Rigid,
            Align::Similarity => AlignMode::Similarity,
            Align::None => AlignMode::None,
        },
    };
    let est = read_trajectory(&c.est)?;
    let gt = read_trajectory(&c.gt)?;
    let ate = eval::ate_with(&est, &gt, &opts)?;
    let mut summary = format!(
        "ATE {:.2} mm mean / {:.2} mm rmse, {:.3} deg mean over {} poses",
        ate.pos_mean * 1e3,
        ate.pos_rmse * 1e3,
        ate.rot_mean,
        ate.alignment.matched
    );
    let (pair_ate, rpe) = match c.pair.as_deref() {
        Some([est2, gt2]) => {
            let est2 = read_trajectory(est2)?;
            let gt2 = read_trajectory(gt2)?;
            let a2 = eval::ate_with(&est2, &gt2, &opts)?;
            let rpe = eval::inter_gripper_rpe_with(&est, &est2, &gt, &gt2, c.gate)?;
            summary.push_str(&format!(
                "\npair ATE {:.2} mm mean\ninter-gripper RPE {:.2} mm / {:.3} deg mean over {} pairs",
                a2.pos_mean * 1e3,
                rpe.pos_mean * 1e3,
                rpe.rot_mean,
                rpe.matched
            ));
            (Some(a2), Some(rpe))
        }
        _ => (None, None),
    };
    let report = EvalReport { ate, pair_ate, rpe };
    emit(out, c.out.as_deref(), &pretty(&report)?, &summary)
}

fn sim_summary(r: &SweepRow) -> String {
    let m = &r.report;
    format!(
        "{}: misalignment {:.1} ms, release error {:.1} ms, tracking rmse {:.1} mm, {} chunks ({} empty)",
        if r.name.is_empty() { "scenario" } else { &r.name },
        m.temporal_misalignment * 1e3,
        m.release_time_error * 1e3,
        m.tracking_rmse * 1e3,
        m.chunks,
        m.empty_chunks
    )
}

fn simulate(c: Simulate, out: &mut dyn Write) -> Result<()> {
    let mut s: Scenario = read_json(&c.config)?;
    if let Some(seed) = c.seed {
        s.config.seed = seed;
    }
    let reference = sim::toss_profile(&s.toss)?;
    let (report, trace) = sim::simulate_traced(&reference, &s.config)?;
    if let Some(path) = &c.trace {
        let mut text = String::from("t,ref_x,ref_y,ref_z,set_x,set_y,set_z,out_x,out_y,out_z,width_set,width_out\n");
        for i in 0..trace.t.len() {
            let (r, sp, o) = (trace.reference[i], trace.setpoint[i], trace.output[i]);
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                trace.t[i], r.x, r.y, r.z, sp.x, sp.y, sp.z, o.x, o.y, o.z, trace.width_setpoint[i], trace.width_output[i]
            ));
        }
        fs::write(path, text)?;
    }
    let row = SweepRow {
        name: s.name,
        config: s.config,
        report,
    };
    emit(out, c.out.as_deref(), &pretty(&row)?, &sim_summary(&row))
}

fn sweep(c: Sweep, par: Parallelism, out: &mut dyn Write) -> Result<()> {
    let scenarios: Vec<Scenario> = read_json(&c.configs)?;
    let rows = sim::sweep(&scenarios, par)?;
    let mut csv = Vec::new();
    sim::write_csv(&rows, &mut csv)?;
    let csv = String::from_utf8(csv).expect("csv output is utf-8");
    let summary = rows.iter().map(sim_summary).collect::<Vec<_>>().join("\n");
    emit(out, c.out.as_deref(), &csv, &summary)
}

fn synth_corpus(c: Synth, out: &mut dyn Write) -> Result<()> {
    let spec = CorpusSpec {
        scenes: c.scenes,
        ..CorpusSpec::default()
    };
    let truth = synth::write_corpus(&c.out, c.seed, &spec)?;
    let recordings: usize = truth.scenes.iter().map(|s| s.recordings).sum();
    writeln!(
        out,
        "{} scenes, {recordings} recordings (seed {})\nwrote {}",
        truth.scenes.len(),
        c.seed,
        c.out.display()
    )?;
    Ok(())
}
