//! `qsample` command-line tool.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qsample_core::metrics::{evaluate, RunReport};
use qsample_core::report::{emit_report, write_decision_log, ReportFormat};
use qsample_core::scenario::{write_truth, Builtin, Scenario, ScenarioRef, TraceScenario};
use qsample_core::signal::datetime_of;
use qsample_core::sweep::{run_sweep, SweepSpec};
use qsample_core::trace::{
    add_noise, parse_records, regrid, trace_records, write_simple_csv, TraceFormat, DEFAULT_NOISE_SIGMA,
};
use qsample_core::{
    DecisionLogEntry, LearningParams, QTable, QualityThreshold, SimConfig, GRID_STEP,
};

#[derive(Parser)]
#[command(name = "qsample", version, about = "Q-learning adaptive sampling intervals for sensor nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in synthetic series and its ground-truth sidecar.
    Synth(SynthArgs),
    /// Parse a raw trace, put one node on the 30 s grid and add noise.
    Ingest(IngestArgs),
    /// Run the agent once on a scenario.
    Run(RunArgs),
    /// Run an (alpha, gamma) grid over scenarios and seeds.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in scenario, e.g. controlled-60 or evolving-ii.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = QualityThreshold::DEFAULT_CELSIUS)]
    tau: f64,
    /// Series CSV; the truth sidecar goes next to it as `<stem>.truth.csv`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, default_value = "intel_lab")]
    format: TraceFormat,
    /// Node to keep; the lowest id in the file when absent.
    #[arg(long)]
    node: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in name, a trace file, or a JSON scenario description.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = LearningParams::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = QualityThreshold::DEFAULT_CELSIUS)]
    tau: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Forced-exploration length; the scenario default when absent.
    #[arg(long)]
    calibration_hours: Option<f64>,
    /// Format of a trace file given as --scenario.
    #[arg(long)]
    format: Option<TraceFormat>,
    #[arg(long)]
    node: Option<u32>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Ground-truth sidecar for a trace file.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the decision log as CSV.
    #[arg(long)]
    log_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Serialize)]
struct RunSummary {
    decisions: usize,
    total_tx: u64,
    max_tx: u64,
    scored_tx: u64,
    scored_max_tx: u64,
    interval_changes: u64,
}

#[derive(Serialize)]
struct RunOutput<'a> {
    scenario: &'a str,
    config: &'a SimConfig,
    summary: RunSummary,
    report: &'a RunReport,
    q_table: Option<&'a QTable>,
    log: &'a [DecisionLogEntry],
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn synth(args: SynthArgs) -> Result<()> {
    let builtin: Builtin = args.scenario.parse()?;
    let scenario = builtin.build(QualityThreshold::new(args.tau)?)?;
    let mut w = create(&args.output)?;
    writeln!(w, "timestamp_iso8601,epoch_s,value_c")?;
    for (t, v) in scenario.signal.iter() {
        writeln!(w, "{},{t},{v}", datetime_of(t).format("%Y-%m-%dT%H:%M:%S"))?;
    }
    w.flush()?;
    let truth_path = args.output.with_extension("truth.csv");
    if let Some(truth) = &scenario.truth {
        write_truth(create(&truth_path)?, &scenario.signal, truth)?;
    }
    eprintln!(
        "{}: {} points -> {} (truth: {})",
        scenario.name,
        scenario.signal.len(),
        args.output.display(),
        truth_path.display()
    );
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let file = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let parsed = parse_records(BufReader::new(file), args.format)?;
    eprintln!("{}", parsed.report);
    let node = match args.node {
        Some(n) => n,
        None => parsed.node_ids()[0],
    };
    let records = parsed.for_node(node);
    if records.is_empty() {
        bail!("node {node} has no records in {}", args.input.display());
    }
    let trace = regrid(&records, GRID_STEP)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let noisy = add_noise(&trace, args.noise_sigma, &mut rng)?;
    write_simple_csv(create(&args.output)?, &trace_records(&noisy))?;
    Ok(())
}

fn resolve_scenario(args: &RunArgs) -> Result<Scenario> {
    let tau = QualityThreshold::new(args.tau)?;
    if let Ok(builtin) = args.scenario.parse::<Builtin>() {
        return Ok(builtin.build(tau)?);
    }
    let path = PathBuf::from(&args.scenario);
    if !path.exists() {
        bail!("'{}' is neither a built-in scenario nor an existing file", args.scenario);
    }
    let sref = if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(&path)?;
        serde_json::from_str::<ScenarioRef>(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        let format = args.format.unwrap_or(if path.extension().is_some_and(|e| e == "csv") {
            TraceFormat::SimpleCsv
        } else {
            TraceFormat::IntelLab
        });
        let mut t = TraceScenario::new(path, format);
        t.node = args.node;
        t.noise_sigma = args.noise_sigma.unwrap_or(DEFAULT_NOISE_SIGMA);
        t.truth = args.truth.clone();
        ScenarioRef::Trace(t)
    };
    Ok(sref.build(tau, args.seed)?)
}

fn run(args: RunArgs) -> Result<()> {
    let scenario = resolve_scenario(&args)?;
    let params = LearningParams::new(args.alpha, args.gamma, args.epsilon)?;
    let calibration = args
        .calibration_hours
        .map(|h| (h * 3600.0).round() as i64)
        .unwrap_or(scenario.calibration_duration);
    let config = SimConfig::new(params, args.seed)
        .with_calibration(calibration)
        .with_tau(QualityThreshold::new(args.tau)?);
    let result = qsample_core::run_simulation(&scenario.signal, &config)?;
    let report = evaluate(&result, scenario.truth.as_ref())?;
    let output = RunOutput {
        scenario: &scenario.name,
        config: &config,
        summary: RunSummary {
            decisions: result.log.len(),
            total_tx: result.total_tx,
            max_tx: result.max_tx,
            scored_tx: result.scored_tx(),
            scored_max_tx: result.scored_max_tx(),
            interval_changes: result.interval_changes(),
        },
        report: &report,
        q_table: result.q_table.as_ref(),
        log: &result.log,
    };
    let mut w = create(&args.output)?;
    serde_json::to_writer_pretty(&mut w, &output)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(path) = &args.log_csv {
        write_decision_log(create(path)?, &result.log)?;
    }
    eprintln!(
        "{}: tx_reduction={:.2}% over_tau={:.2}% convergence={}",
        scenario.name,
        100.0 * report.tx_reduction,
        100.0 * report.over_threshold.rate,
        report
            .convergence_s
            .map_or_else(|| "n/a".to_string(), |c| format!("{c:.0}s"))
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec: SweepSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    // Relative trace paths are relative to the spec file.
    let base = args.spec.parent().unwrap_or(Path::new("."));
    for s in &mut spec.scenarios {
        if let ScenarioRef::Trace(t) = s {
            if t.path.is_relative() {
                t.path = base.join(&t.path);
            }
            if let Some(truth) = t.truth.as_mut().filter(|p| p.is_relative()) {
                *truth = base.join(&*truth);
            }
        }
    }
    spec.validate()?;
    eprintln!("running {} simulations", spec.run_count());
    let result = run_sweep(&spec)?;

    fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    fs::write(
        args.output.join("aggregate.csv"),
        emit_report(&result.aggregates, ReportFormat::Csv)?,
    )?;
    let rows: Vec<_> = result.runs.iter().map(|r| r.row()).collect();
    fs::write(args.output.join("runs.csv"), emit_report(&rows, ReportFormat::Csv)?)?;
    for record in &result.runs {
        let mut w = create(&args.output.join(format!("run-{}.json", record.hash())))?;
        serde_json::to_writer_pretty(&mut w, record)?;
        writeln!(w)?;
        w.flush()?;
    }
    print!("{}", emit_report(&result.aggregates, ReportFormat::Markdown)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
