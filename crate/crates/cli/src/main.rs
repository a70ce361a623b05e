use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rrmon_core::harness::{
    bench, emit_figure_data, evaluate, read_jsonl, regressor_corpus, run_pipeline_with, write_jsonl, EnsembleSpec,
    Estimator, EvaluationReport, GroundTruthSeries, RunConfig, ENV_PREFIX,
};
use rrmon_core::spectral::{load_rrnn, regressor_train, save_rrnn, TrainHyper};
use rrmon_core::synthesis::{load_rriq, save_rriq, synthesize_frames, SubjectScenario};
use rrmon_core::tracking::write_trace_csv;
use rrmon_core::{FrameSequence64, RegressorModel64};

/// Respiratory-rate estimation from FMCW radar recordings.
#[derive(Parser)]
#[command(name = "rrmon", version, after_help = env_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn env_help() -> String {
    format!("Config keys can be overridden with {ENV_PREFIX}<KEY>, nested keys joined by '__' (e.g. {ENV_PREFIX}TRACK__PROCESS_NOISE_Q=0.1).")
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a recording from a configured subject scenario.
    Synth(SynthArgs),
    /// Stream a recording through the estimator, writing JSON lines.
    Run(RunArgs),
    /// Score estimate streams against the recordings' ground truth.
    Eval(EvalArgs),
    /// Train the feature regressor on a synthetic corpus.
    TrainRegressor(TrainArgs),
    /// Measure per-estimate latency against the real-time budget.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        Ok(RunConfig::load(self.config.as_deref())?)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output RRIQ file.
    #[arg(long)]
    out: PathBuf,
    /// Which configured scenario to render.
    #[arg(long, default_value_t = 0)]
    scenario: usize,
    /// Override the scenario duration, seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Input RRIQ recording.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    estimator: Option<Estimator>,
    /// Regressor model (RRNN).
    #[arg(long)]
    model: Option<PathBuf>,
    /// JSON-lines output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step Kalman trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Directory for the last window's spectrum snapshot.
    #[arg(long)]
    dump_spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimate stream (JSON lines); repeat once per subject.
    #[arg(long = "estimates", required = true)]
    estimates: Vec<PathBuf>,
    /// Recording holding the ground truth, in the same order as --estimates.
    #[arg(long = "recording", required = true)]
    recordings: Vec<PathBuf>,
    /// Report directory (report.json plus histogram CSVs).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output RRNN model.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 41)]
    subjects: usize,
    /// Lowest and highest corpus rate, bpm.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [6.0, 50.0])]
    rate_range: Vec<f64>,
    /// Estimates per subject before subsampling.
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Keep every n-th analysis window.
    #[arg(long, default_value_t = 10)]
    stride: usize,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Recording to replay; a 60 s synthetic subject when omitted.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    estimator: Option<Estimator>,
    #[arg(long)]
    model: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn load_recording(path: &Path) -> Result<FrameSequence64> {
    load_rriq(path).with_context(|| format!("cannot load {}", path.display()))
}

/// Applies command-line estimator and model choices, then loads the model.
fn prepare(
    cfg: &mut RunConfig,
    estimator: Option<Estimator>,
    model: Option<PathBuf>,
) -> Result<Option<RegressorModel64>> {
    if let Some(e) = estimator {
        cfg.estimator = e;
    }
    if model.is_some() {
        cfg.regressor_model = model;
    }
    cfg.validate()?;
    match &cfg.regressor_model {
        Some(p) => Ok(Some(
            load_rrnn(p).with_context(|| format!("cannot load model {}", p.display()))?,
        )),
        None => Ok(None),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let mut scenario = match cfg.scenarios.get(args.scenario) {
        Some(s) => s.clone(),
        None if cfg.scenarios.is_empty() && args.scenario == 0 => SubjectScenario::default(),
        None => bail!(
            "scenario {} not configured ({} available)",
            args.scenario,
            cfg.scenarios.len()
        ),
    };
    if let Some(d) = args.duration {
        scenario.duration_s = d;
    }
    if let Some(s) = args.seed {
        scenario.seed = s;
    }
    let frames: FrameSequence64 = synthesize_frames(&cfg.radar, &scenario)?;
    save_rriq(&frames, &args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    eprintln!("wrote {} frames to {}", frames.len(), args.out.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    let model = prepare(&mut cfg, args.estimator, args.model)?;
    let frames = load_recording(&args.input)?;
    let run = run_pipeline_with(&cfg, &frames, model)?;
    match args.out.or(cfg.output.estimates.clone()) {
        Some(p) => write_jsonl(&run.records, create(&p)?)?,
        None => write_jsonl(&run.records, io::stdout().lock())?,
    }
    if let Some(p) = args.trace.or(cfg.output.trace.clone()) {
        write_trace_csv(&run.traces, create(&p)?)?;
    }
    if let Some(dir) = args.dump_spectrum {
        let Some((spectrum, peaks)) = &run.snapshot else {
            bail!("recording shorter than one analysis window; no spectrum to dump");
        };
        emit_figure_data(&EvaluationReport::default(), Some((spectrum, peaks)), &dir)?;
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    if args.estimates.len() != args.recordings.len() {
        bail!(
            "{} estimate files but {} recordings",
            args.estimates.len(),
            args.recordings.len()
        );
    }
    let mut subjects = Vec::new();
    for (est, rec) in args.estimates.iter().zip(&args.recordings) {
        let file = File::open(est).with_context(|| format!("cannot open {}", est.display()))?;
        let records = read_jsonl(BufReader::new(file))?;
        let frames = load_recording(rec)?;
        let truth = GroundTruthSeries::from_truth(&frames.truth, frames.config.frame_rate_hz);
        let name = est
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        subjects.push(
            evaluate(&name, &records, &truth).with_context(|| format!("{} vs {}", est.display(), rec.display()))?,
        );
    }
    let report = EvaluationReport::from_subjects(subjects);
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut w = create(&args.out.join("report.json"))?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    emit_figure_data::<f64>(&report, None, &args.out)?;
    for s in &report.subjects {
        println!(
            "{}: mae {:.3} bpm, std {:.3} bpm, {} samples",
            s.subject, s.mae, s.std, s.samples
        );
    }
    if let Some(mae) = report.ensemble_mae {
        println!("ensemble mae {mae:.3} bpm");
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let spec = EnsembleSpec {
        subjects: args.subjects,
        rate_range_bpm: (args.rate_range[0], args.rate_range[1]),
        samples_per_subject: args.samples,
        seed: args.seed,
        ..EnsembleSpec::default()
    };
    let corpus = regressor_corpus::<f64>(&cfg, &spec.scenarios(&cfg), args.stride)?;
    let hyper = TrainHyper {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainHyper::default()
    };
    let (model, report) = regressor_train(&corpus, &hyper)?;
    save_rrnn(&model, &args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    let rmse = report.losses.last().copied().unwrap_or(f64::NAN).sqrt();
    println!(
        "{} samples, {} epochs, training rmse {rmse:.3} bpm",
        corpus.len(),
        report.epochs_run
    );
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    let model = prepare(&mut cfg, args.estimator, args.model)?;
    let frames = match &args.input {
        Some(p) => load_recording(p)?,
        None => {
            let s = SubjectScenario {
                duration_s: 60.0,
                ..SubjectScenario::default()
            };
            synthesize_frames(&cfg.radar, &s)?
        }
    };
    let report = bench(&cfg, &frames, model)?;
    println!("{}", serde_json::to_string(&report)?);
    println!(
        "{} estimates: mean {:.3} ms, p99 {:.3} ms, budget {:.1} ms ({})",
        report.samples,
        report.mean_ms,
        report.p99_ms,
        report.budget_ms,
        if report.within_budget { "ok" } else { "over budget" }
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::TrainRegressor(a) => train(a),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rrmon: {e:#}");
            ExitCode::FAILURE
        }
    }
}
