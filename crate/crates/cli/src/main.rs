use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use emocal_core::behavior::{
    classify_activity, generate_activity_log, read_log, write_log, ActivityLogConfig, ActivityModels, Method,
    PipelineConfig,
};
use emocal_core::ecg::{
    detect_r_peaks, peaks_to_hr, planted_clips, Channel, EcgRecording, SyntheticEcg, VadRatings, DEFAULT_WINDOW,
};
use emocal_core::scheduler::{self, Problem, SchedulerError};
use emocal_core::seqnet::{CellKind, TrainConfig};
use emocal_core::Dimension;
use emocal_service::{
    train_bundle, ConfigPatch, SequenceBundle, SequenceModels, Service, ServiceConfig, SystemClock,
};

#[derive(Parser)]
#[command(name = "emocal", version, about = "Emotion-aware calendar scheduling")]
struct Cli {
    /// Flat TOML file with weights, thresholds and horizon settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Solve a problem document and print the schedule with its objective breakdown.
    Solve {
        problem: PathBuf,
    },
    /// Detect R-peaks in a recording and print the heart-rate series.
    DetectHr {
        recording: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        channel: u8,
    },
    /// Train a heart-rate classifier for one emotion dimension.
    TrainSeq(TrainSeqArgs),
    /// Oversample an activity log and report per-table accuracies.
    ClassifyActivity(ClassifyArgs),
    /// Write synthetic ECG recordings.
    GenEcg(GenEcgArgs),
    /// Write a synthetic activity log with a planted activity-to-mood mapping.
    GenActivity {
        #[arg(long, default_value_t = 36)]
        sessions: usize,
        #[arg(long, default_value_t = 400)]
        events_per_session: usize,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Journal directory; state is kept in memory when absent.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    snapshot_every: u64,
    /// Heart-rate model bundle written by `train-seq --bundle`.
    #[arg(long)]
    seq_bundle: Option<PathBuf>,
    /// Activity models written by `classify-activity --save`.
    #[arg(long)]
    activity_models: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lstm,
    Gru,
}

#[derive(Args)]
struct TrainSeqArgs {
    /// Labeled recordings; planted synthetic clips are used when none are given.
    recordings: Vec<PathBuf>,
    #[arg(long)]
    dim: Dimension,
    #[arg(long, value_enum, default_value = "gru")]
    kind: Kind,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    channel: u8,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Synthetic clips per class when no recordings are given.
    #[arg(long, default_value_t = 4)]
    clips: usize,
    /// Write the model as a text document of named tensors.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add the model to a bundle file for `serve`, creating it if needed.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    log: PathBuf,
    /// Methods to evaluate; all four when absent.
    #[arg(long, value_delimiter = ',')]
    model: Vec<Method>,
    /// Fit the first method on the whole log and save it for `serve`.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Args)]
struct GenEcgArgs {
    /// Output file, or directory with `--clips`.
    #[arg(long)]
    out: PathBuf,
    /// Constant rate, or the starting rate of a ramp.
    #[arg(long, default_value_t = 72.0)]
    bpm: f64,
    /// Final rate of a linear ramp.
    #[arg(long)]
    ramp_to: Option<f64>,
    #[arg(long, default_value_t = 60)]
    seconds: usize,
    /// Signal-to-noise ratio; noiseless when absent.
    #[arg(long)]
    snr: Option<f64>,
    /// Self-report ratings `v,a,d` on the 1..5 scale.
    #[arg(long, value_delimiter = ',')]
    ratings: Option<Vec<u8>>,
    /// Write this many labeled clips per class with a rating-dependent rate.
    #[arg(long)]
    clips: Option<usize>,
}

fn channel(n: u8) -> Channel {
    Channel::from_number(n).expect("clap restricts the range")
}

fn load_patch(path: Option<&Path>) -> Result<Option<ConfigPatch>> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let patch = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(patch))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn solve(problem_path: &Path, patch: Option<ConfigPatch>) -> Result<ExitCode> {
    let mut problem: Problem = read_json(problem_path)?;
    if let Some(patch) = patch {
        let base = ServiceConfig {
            horizon: problem.horizon,
            weights: problem.weights.clone(),
            thresholds: problem.thresholds,
            ..Default::default()
        };
        let c = patch.apply(&base)?;
        problem.horizon = c.horizon;
        problem.weights = c.weights;
        problem.thresholds = c.thresholds;
    }
    match scheduler::solve(&problem) {
        Ok(schedule) => {
            println!("{}", serde_json::to_string_pretty(&schedule)?);
            Ok(ExitCode::SUCCESS)
        }
        Err(SchedulerError::Infeasible(reason)) => {
            eprintln!("no feasible schedule: {reason}");
            println!("{}", serde_json::to_string_pretty(&reason)?);
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn detect_hr(path: &Path, ch: u8) -> Result<()> {
    let rec = EcgRecording::read(path).with_context(|| format!("reading {}", path.display()))?;
    let peaks = detect_r_peaks(&rec, channel(ch))?;
    let hr = peaks_to_hr(&peaks, rec.sample_rate_hz())?;
    println!("peaks: {}", peaks.len());
    match hr.mean_bpm() {
        Some(m) => println!("mean_bpm: {m:.2}"),
        None => println!("mean_bpm: n/a"),
    }
    println!("{}", serde_json::to_string(&hr)?);
    Ok(())
}

fn train_seq(args: &TrainSeqArgs, seed: u64) -> Result<()> {
    let recordings = if args.recordings.is_empty() {
        log::info!("no recordings given; using {} planted clips per class", args.clips);
        planted_clips(args.clips, 60, 20.0, seed)
    } else {
        args.recordings
            .iter()
            .map(|p| EcgRecording::read(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<_>>()?
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        hidden_size: args.hidden.unwrap_or(defaults.hidden_size),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        seed,
        ..defaults
    };
    let kind = match args.kind {
        Kind::Lstm => CellKind::Lstm,
        Kind::Gru => CellKind::Gru,
    };
    let (trained, curves) = train_bundle(&recordings, &[args.dim], kind, &cfg, channel(args.channel), args.window)?;
    let curves = &curves[0];
    println!("epoch  train_loss  test_loss  test_acc");
    for e in &curves.epochs {
        println!("{:>5}  {:>10.6}  {:>9.6}  {:>8.4}", e.epoch, e.train_loss, e.test_loss, e.test_accuracy);
    }
    println!(
        "{} {kind}: {} train / {} held-out windows, final accuracy {:.2}%",
        args.dim,
        curves.train_size,
        curves.test_size,
        100.0 * curves.final_accuracy().unwrap_or(0.0)
    );
    let mut trained = trained;
    let text = trained.slot(args.dim).take().expect("requested dimension was trained");
    if let Some(out) = &args.out {
        fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(path) = &args.bundle {
        let mut bundle: SequenceBundle = if path.exists() { read_json(path)? } else { trained.clone() };
        if bundle.window != trained.window || bundle.bpm_range != trained.bpm_range {
            log::warn!("bundle window and range replaced by this run's; retrain the other dimensions on the same data");
            bundle.window = trained.window;
            bundle.bpm_range = trained.bpm_range;
        }
        *bundle.slot(args.dim) = Some(text);
        fs::write(path, serde_json::to_string_pretty(&bundle)?)?;
    }
    Ok(())
}

fn classify(args: &ClassifyArgs, seed: u64) -> Result<()> {
    let file = fs::File::open(&args.log).with_context(|| format!("opening {}", args.log.display()))?;
    let events = read_log(file)?;
    let cfg = PipelineConfig {
        methods: if args.model.is_empty() { Method::ALL.to_vec() } else { args.model.clone() },
        seed,
        ..Default::default()
    };
    let grid = classify_activity(&events, &cfg)?;
    print!("{grid}");
    if let Some(path) = &args.save {
        let models = ActivityModels::fit(&events, cfg.methods[0], &cfg)?;
        fs::write(path, serde_json::to_string(&models)?)?;
        log::info!("saved {} models to {}", cfg.methods[0], path.display());
    }
    Ok(())
}

fn gen_ecg(args: &GenEcgArgs, seed: u64) -> Result<()> {
    if let Some(n) = args.clips {
        fs::create_dir_all(&args.out)?;
        for (i, clip) in planted_clips(n, args.seconds, args.snr.unwrap_or(20.0), seed).iter().enumerate() {
            clip.write(args.out.join(format!("clip_{i:03}.ecg")))?;
        }
        println!("wrote {} clips to {}", 2 * n, args.out.display());
        return Ok(());
    }
    if args.seconds < 2 {
        bail!("recordings must be at least two seconds long");
    }
    let end = args.ramp_to.unwrap_or(args.bpm);
    let last = (args.seconds - 1) as f64;
    let profile: Vec<f64> = (0..args.seconds)
        .map(|s| args.bpm + (end - args.bpm) * s as f64 / last)
        .collect();
    let ratings = args
        .ratings
        .as_ref()
        .map(|r| match r[..] {
            [v, a, d] => Ok(VadRatings::new(v, a, d)?),
            _ => bail!("--ratings takes three values, got {}", r.len()),
        })
        .transpose()?;
    let (rec, planted) = SyntheticEcg {
        snr_db: args.snr.unwrap_or(f64::INFINITY),
        seed,
        ..Default::default()
    }
    .generate(&profile, ratings);
    rec.write(&args.out)?;
    println!("wrote {} samples with {} planted beats to {}", rec.len(), planted.len(), args.out.display());
    Ok(())
}

fn gen_activity(sessions: usize, events_per_session: usize, out: Option<&Path>, seed: u64) -> Result<()> {
    let log = generate_activity_log(&ActivityLogConfig {
        sessions,
        events_per_session,
        seed,
        ..Default::default()
    });
    match out {
        Some(path) => write_log(&log, fs::File::create(path)?)?,
        None => write_log(&log, std::io::stdout().lock())?,
    }
    Ok(())
}

fn serve(args: &ServeArgs, patch: Option<ConfigPatch>) -> Result<()> {
    let mut service = match &args.data_dir {
        Some(dir) => Service::open(dir, args.snapshot_every)?,
        None => Service::in_memory(Arc::new(SystemClock)),
    };
    if let Some(path) = &args.seq_bundle {
        let bundle: SequenceBundle = read_json(path)?;
        service = service.with_sequence_models(SequenceModels::try_from(&bundle)?);
    }
    if let Some(path) = &args.activity_models {
        service = service.with_activity_models(read_json(path)?);
    }
    if let Some(patch) = patch {
        if patch.apply(&service.state().config)? != service.state().config {
            service.set_config(&patch)?;
        }
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(emocal_service::http::serve(Arc::new(service), &args.addr))?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let patch = load_patch(cli.config.as_deref())?;
    match &cli.command {
        Command::Serve(args) => serve(args, patch)?,
        Command::Solve { problem } => return solve(problem, patch),
        Command::DetectHr { recording, channel } => detect_hr(recording, *channel)?,
        Command::TrainSeq(args) => train_seq(args, cli.seed)?,
        Command::ClassifyActivity(args) => classify(args, cli.seed)?,
        Command::GenEcg(args) => gen_ecg(args, cli.seed)?,
        Command::GenActivity {
            sessions,
            events_per_session,
            out,
        } => gen_activity(*sessions, *events_per_session, out.as_deref(), cli.seed)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
