//! `walkaid` command-line interface.
//!
//! Exit codes: 0 success, 1 validation or parse error, 2 stream-order or
//! alignment error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::alarm::stage_for_distance;
use crate::config::PipelineConfig;
use crate::eval::{compare_gap_strategies, score, BandPartition, EvalConfig, EvalError};
use crate::jsonl;
use crate::pipeline::{Pipeline, TrackedObject};
use crate::simulator::{generate, standard_suite, suite_scenario, ScenarioSpec, TruthRecord};
use crate::types::DetectionFrame;

#[derive(Debug, Parser)]
#[command(
    name = "walkaid",
    version,
    about = "Distance, direction and alarm staging over detection streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a detection stream and its ground truth from a scenario.
    Simulate(SimulateArgs),
    /// Run a detection stream through the pipeline.
    Replay(ReplayArgs),
    /// Score a tracked stream against simulator truth.
    Eval(EvalArgs),
    /// Print the alarm stage for a distance.
    Stage(StageArgs),
    /// Write the built-in scenarios as scenario files.
    Suite(SuiteArgs),
    /// Score the same scenario with gap 1 and gap 2.
    CompareGaps(CompareArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ScenarioSource {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Name of a built-in scenario.
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ScenarioSource,
    /// Replaces the scenario's noise seed; trajectories are unaffected.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_detections: PathBuf,
    #[arg(long)]
    pub out_truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub detections: PathBuf,
    /// Pipeline config; the shipped defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_tracked: PathBuf,
    #[arg(long)]
    pub out_events: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub tracked: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Comma-separated depth band edges in cm.
    #[arg(long, value_delimiter = ',', default_values_t = [300.0, 600.0])]
    pub bands: Vec<f64>,
    /// Pipeline config the stream was replayed with.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Do not excuse sub-threshold `forward` labels.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    pub distance_cm: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: ScenarioSource,
    #[arg(long)]
    pub dead_zone_px: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// Exit code 1.
    Invalid(String),
    /// Exit code 2.
    Order(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Order(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Order(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn read_stream<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    jsonl::read_records(BufReader::new(file)).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_stream<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    jsonl::write_records(BufWriter::new(file), records).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => PipelineConfig::from_path(p).map_err(invalid),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_scenario(src: &ScenarioSource) -> Result<ScenarioSpec, CliError> {
    match (&src.scenario, &src.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            ScenarioSpec::from_toml_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => suite_scenario(name).ok_or_else(|| {
            let names: Vec<String> = standard_suite().into_iter().map(|s| s.name).collect();
            invalid(format!(
                "unknown built-in scenario `{name}` (available: {})",
                names.join(", ")
            ))
        }),
        (None, None) => Err(invalid("a scenario file or built-in name is required")),
    }
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Replay(a) => cmd_replay(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Stage(a) => cmd_stage(a, out),
        Command::Suite(a) => cmd_suite(a, out),
        Command::CompareGaps(a) => cmd_compare(a, out),
    }
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(invalid)
}

pub fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut spec = load_scenario(&a.source)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let sim = generate(&spec).map_err(invalid)?;
    write_stream(&a.out_detections, &sim.frames)?;
    write_stream(&a.out_truth, &sim.truth)?;
    say(
        out,
        format!(
            "frames {}, actors {}, emitted detections {}",
            sim.frames.len(),
            spec.actors.len(),
            sim.emitted_detections()
        ),
    )
}

pub fn cmd_replay(a: ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let frames: Vec<DetectionFrame> = read_stream(&a.detections)?;
    let mut pipeline = Pipeline::new(cfg);
    let result = pipeline.run(&frames).map_err(|e| CliError::Order(e.to_string()))?;
    write_stream(&a.out_tracked, &result.tracked)?;
    write_stream(&a.out_events, &result.alarms)?;

    say(
        out,
        format!("frames {}, tracked objects {}", frames.len(), result.tracked.len()),
    )?;
    for stage in pipeline.config().alarm.stages().iter().rev() {
        let n = result.alarms.iter().filter(|e| e.stage == stage.stage).count();
        say(out, format!("stage {}: {} events", stage.stage, n))?;
    }
    Ok(())
}

pub fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let bands = BandPartition::new(a.bands).map_err(invalid)?;
    let tracked: Vec<TrackedObject> = read_stream(&a.tracked)?;
    let truth: Vec<TruthRecord> = read_stream(&a.truth)?;
    let mut eval = EvalConfig::from_pipeline(&cfg, bands);
    eval.strict = a.strict;
    let report = score(&tracked, &truth, &eval).map_err(|e| match e {
        EvalError::Misaligned { .. } => CliError::Order(e.to_string()),
        other => invalid(other),
    })?;
    let text = serde_json::to_string_pretty(&report).map_err(invalid)?;
    std::fs::write(&a.report, text + "\n").map_err(|e| invalid(format!("{}: {e}", a.report.display())))?;
    say(out, report.headline())
}

/// Stage decision text for one distance.
pub fn stage_line(distance_cm: f64, cfg: &PipelineConfig) -> String {
    match stage_for_distance(distance_cm, &cfg.alarm) {
        Some(s) => format!("stage {}, vibration {} s", s.stage, s.vibration_s),
        None => "none".to_string(),
    }
}

pub fn cmd_stage(a: StageArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.distance_cm.is_finite() && a.distance_cm > 0.0) {
        return Err(invalid(format!("distance must be > 0 cm, got {}", a.distance_cm)));
    }
    let cfg = load_config(a.config.as_deref())?;
    say(out, stage_line(a.distance_cm, &cfg))
}

pub fn cmd_suite(a: SuiteArgs, out: &mut dyn Write) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.out_dir).map_err(invalid)?;
    for spec in standard_suite() {
        let path = a.out_dir.join(format!("{}.toml", spec.name));
        std::fs::write(&path, spec.to_toml_string()).map_err(invalid)?;
        say(out, path.display())?;
    }
    Ok(())
}

pub fn cmd_compare(a: CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = load_scenario(&a.source)?;
    let cmp = compare_gap_strategies(&spec, a.dead_zone_px).map_err(invalid)?;
    if let Some(path) = &a.report {
        let text = serde_json::to_string_pretty(&cmp).map_err(invalid)?;
        std::fs::write(path, text + "\n").map_err(invalid)?;
    }
    say(out, format!("gap 1: {}", cmp.gap1.headline()))?;
    say(out, format!("gap 2: {}", cmp.gap2.headline()))
}
