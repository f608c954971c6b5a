use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use posetrack::bench::{bench_window, results_to_text, MachineInfo, DEFAULT_RUNS};
use posetrack::config::Config;
use posetrack::eval::{limbs_from_topology, localization_accuracy, pcp, AccuracyReport, PcpReport};
use posetrack::io::{self, AnnotationFile, ClipManifest, PredictionFile, Split};
use posetrack::models::TrainConfig;
use posetrack::render::{save_overlay, OverlayStyle};
use posetrack::synth::{synth_generate, synthesize, MotionScript, Waveform};
use posetrack::tracker::Tracker;
use posetrack::{AnnulusGeometry, Image, Point, Pose, PoseModel, SkeletonTopology, TrackerConfig};

#[derive(Debug, Parser)]
#[command(name = "posetrack", version, about = "Articulated pose tracking over annotated video clips")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a pose model from annotated training clips.
    Train(TrainArgs),
    /// Track a clip from its annotated first frame.
    Track(TrackArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Draw predicted poses over the clip frames.
    Render(RenderArgs),
    /// Time descriptor extraction, integral images against the per-pixel path.
    Bench(BenchArgs),
    /// Generate a synthetic clip with exact annotations.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset root; every clip under `<DATA>/train/` is used.
    #[arg(long, required_unless_present = "clip")]
    data: Option<PathBuf>,
    /// Individual clip directory (repeatable).
    #[arg(long)]
    clip: Vec<PathBuf>,
    /// TOML settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    window_radius: Option<u32>,
    /// Model file to write.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[arg(long)]
    model: PathBuf,
    /// Clip directory; `--out` is the prediction file.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    clip: Option<PathBuf>,
    /// Dataset root; every clip under `<DATA>/test/` is tracked and `--out`
    /// is a directory receiving `<clip>.json` files.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
    /// TOML settings file; its [tracker] section replaces the model's.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window_radius: Option<u32>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Reset from ground truth every N frames.
    #[arg(long)]
    reinit_interval: Option<usize>,
    /// Clips tracked in parallel with `--data`.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Prediction file (repeatable, paired in order with --truth).
    #[arg(long, required = true)]
    predictions: Vec<PathBuf>,
    /// Annotation file or clip directory (repeatable).
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    /// TOML settings file providing the skeleton.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pixel thresholds.
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25,30,35,40", value_parser = positive_f64)]
    thresholds: Vec<f64>,
    /// Also report strict PCP per limb.
    #[arg(long)]
    pcp: bool,
    #[arg(long, default_value_t = 0.5, value_parser = positive_f64)]
    pcp_ratio: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    clip: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Output directory for the overlay PNGs.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    joint_radius: f64,
    #[arg(long, default_value_t = 2.0)]
    limb_width: f64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Time on this clip's frames instead of a synthetic frame.
    #[arg(long)]
    clip: Option<PathBuf>,
    /// Frames used from the clip.
    #[arg(long, default_value_t = 1)]
    frames: usize,
    /// Synthetic frame size.
    #[arg(long, default_value_t = 160)]
    width: usize,
    #[arg(long, default_value_t = 120)]
    height: usize,
    /// Window radii to sweep.
    #[arg(long, value_delimiter = ',', default_value = "5,10,15")]
    radii: Vec<u32>,
    #[arg(long, default_value_t = 10)]
    rings: usize,
    #[arg(long, default_value_t = 2)]
    stride: u32,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WaveArg {
    Sine,
    Square,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Clip directory to create.
    #[arg(long, short)]
    out: PathBuf,
    /// JSON motion script; flags below override its fields.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Head position in the first frame, `u,v`.
    #[arg(long, value_parser = pair, allow_hyphen_values = true)]
    start: Option<[f64; 2]>,
    /// Translation per frame, `u,v`.
    #[arg(long, value_parser = pair, allow_hyphen_values = true)]
    velocity: Option<[f64; 2]>,
    /// Elbow oscillation amplitude in degrees.
    #[arg(long)]
    elbow_amplitude: Option<f64>,
    /// Elbow oscillation period in frames.
    #[arg(long, default_value_t = 10.0)]
    elbow_period: f64,
    #[arg(long, value_enum, default_value_t = WaveArg::Sine)]
    waveform: WaveArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("`{s}` must be a positive number"))
    }
}

fn pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("`{s}`: expected `u,v`"))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("`{x}` is not a finite number"))
    };
    Ok([parse(a)?, parse(b)?])
}

/// Reports a usage problem found after parsing and exits with status 2.
fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let topology = config.topology()?;
    let mut tc: TrainConfig = config.train_config()?;
    if let Some(k) = args.clusters {
        tc.clusters = k;
    }
    if let Some(e) = args.epsilon {
        tc.epsilon = e;
    }
    if let Some(l) = args.lambda1 {
        tc.lambda1 = l;
    }
    if let Some(l) = args.lambda2 {
        tc.lambda2 = l;
    }
    if let Some(r) = args.window_radius {
        tc.window_radius = r;
    }

    let mut manifests = Vec::new();
    if let Some(root) = &args.data {
        manifests.extend(io::discover_split(root, Split::Train)?);
    }
    for dir in &args.clip {
        manifests.push(ClipManifest::discover(dir, Split::Train)?);
    }
    ensure!(!manifests.is_empty(), "no training clips found");

    let mut clips = Vec::with_capacity(manifests.len());
    for m in &manifests {
        let loaded = io::load_clip(m, &topology)?;
        let poses = loaded
            .annotations
            .with_context(|| format!("training clip `{}` has no {}", m.id, io::ANNOTATION_FILE))?;
        // Annotated frames beyond the last image are still motion samples.
        clips.push(poses);
    }
    let model = PoseModel::train(&clips, topology, &tc)?;
    model.save(&args.out)?;
    info!(
        "trained on {} clips ({} frames), wrote {}",
        clips.len(),
        clips.iter().map(Vec::len).sum::<usize>(),
        args.out.display()
    );
    Ok(())
}

fn tracker_config(args: &TrackArgs, model: &PoseModel) -> Result<TrackerConfig> {
    let mut tc = match &args.config {
        Some(p) => Config::load(p)?.tracker_config(),
        None => TrackerConfig::from_model(model),
    };
    if let Some(r) = args.window_radius {
        tc.window_radius = r;
    }
    if let Some(l) = args.lambda1 {
        tc.lambda1 = l;
    }
    if let Some(l) = args.lambda2 {
        tc.lambda2 = l;
    }
    if let Some(n) = args.reinit_interval {
        tc.reinit_interval = Some(n);
    }
    if let Err(e) = tc.validate() {
        usage_error(ErrorKind::ValueValidation, e);
    }
    Ok(tc)
}

fn track_clip(manifest: &ClipManifest, model: &PoseModel, config: &TrackerConfig) -> Result<PredictionFile> {
    let loaded = io::load_clip(manifest, &model.topology)?;
    let truth = loaded.annotations.with_context(|| {
        format!(
            "clip `{}` has no {}; the first frame must be annotated",
            manifest.id,
            io::ANNOTATION_FILE
        )
    })?;
    let mut frames = loaded.frames;
    let first = frames.next().context("clip has no frames")??;
    let (mut tracker, pose0) = Tracker::start(model, config.clone(), &first, &truth[0])
        .with_context(|| format!("clip `{}` frame 0", manifest.id))?;
    let mut poses = vec![pose0];
    for frame in frames {
        let frame = frame?;
        let t = tracker.next_frame_index();
        let pose = tracker
            .advance(&frame, truth.get(t))
            .with_context(|| format!("clip `{}` frame {t}", manifest.id))?;
        poses.push(pose);
    }
    Ok(PredictionFile::new(&manifest.id, &model.topology, &poses))
}

fn track(args: TrackArgs) -> Result<()> {
    let model = PoseModel::load(&args.model)?;
    let config = tracker_config(&args, &model)?;
    if let Some(clip) = &args.clip {
        let manifest = ClipManifest::discover(clip, Split::Test)?;
        let pred = track_clip(&manifest, &model, &config)?;
        pred.save(&args.out)?;
        info!("tracked {} frames of `{}`", pred.poses.len(), pred.clip);
        return Ok(());
    }
    let root = args.data.as_ref().expect("clap requires --clip or --data");
    let manifests = io::discover_split(root, Split::Test)?;
    ensure!(!manifests.is_empty(), "no clips under {}", root.join("test").display());
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, manifests.len());
    let chunk = manifests.len().div_ceil(jobs);
    let results: Vec<Result<()>> = std::thread::scope(|s| {
        let handles: Vec<_> = manifests
            .chunks(chunk)
            .map(|group| {
                let (model, config, out) = (&model, &config, &args.out);
                s.spawn(move || -> Result<()> {
                    for m in group {
                        let pred = track_clip(m, model, config)?;
                        pred.save(&out.join(format!("{}.json", m.id)))?;
                        info!("tracked {} frames of `{}`", pred.poses.len(), m.id);
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("tracking thread panicked"))))
            .collect()
    });
    results.into_iter().collect()
}

fn load_truth(path: &Path, topology: &SkeletonTopology) -> Result<Vec<Pose>> {
    let file = if path.is_dir() {
        path.join(io::ANNOTATION_FILE)
    } else {
        path.to_path_buf()
    };
    let ann = AnnotationFile::load(&file)?;
    ann.check(topology, &file)?;
    Ok(ann.to_poses())
}

fn load_predictions(path: &Path, topology: &SkeletonTopology) -> Result<Vec<Pose>> {
    let pred = PredictionFile::load(path)?;
    if !pred.parts.is_empty() && pred.parts != topology.parts() {
        bail!(
            "{}: predicted parts {:?} differ from skeleton {:?}",
            path.display(),
            pred.parts,
            topology.parts()
        );
    }
    if let Some((t, f)) = pred.poses.iter().enumerate().find(|(_, f)| f.len() != topology.len()) {
        bail!(
            "{}: frame {t} has {} joints, expected {}",
            path.display(),
            f.len(),
            topology.len()
        );
    }
    Ok(pred.to_poses())
}

fn eval(args: EvalArgs) -> Result<()> {
    if args.predictions.len() != args.truth.len() {
        usage_error(
            ErrorKind::WrongNumberOfValues,
            format!(
                "{} --predictions but {} --truth; give one truth per prediction file",
                args.predictions.len(),
                args.truth.len()
            ),
        );
    }
    let topology = load_config(args.config.as_deref())?.topology()?;
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (p, g) in args.predictions.iter().zip(&args.truth) {
        let pred = load_predictions(p, &topology)?;
        let mut gt = load_truth(g, &topology)?;
        ensure!(
            gt.len() >= pred.len(),
            "{} has {} frames but {} annotates only {}",
            p.display(),
            pred.len(),
            g.display(),
            gt.len()
        );
        gt.truncate(pred.len());
        predicted.extend(pred);
        truth.extend(gt);
    }
    let accuracy = localization_accuracy(&predicted, &truth, &topology, &args.thresholds)?;
    let pcp_report = if args.pcp {
        Some(pcp(&predicted, &truth, &topology, &limbs_from_topology(&topology), args.pcp_ratio)?)
    } else {
        None
    };
    write_output(args.out.as_deref(), &render_reports(&accuracy, pcp_report.as_ref(), args.format)?)
}

fn render_reports(acc: &AccuracyReport, pcp: Option<&PcpReport>, format: Format) -> Result<String> {
    Ok(match (format, pcp) {
        (Format::Text, None) => acc.to_text(),
        (Format::Text, Some(p)) => format!("{}\n{}", acc.to_text(), p.to_text()),
        (Format::Csv, None) => acc.to_csv(),
        (Format::Csv, Some(p)) => format!("{}\n{}", acc.to_csv(), p.to_csv()),
        (Format::Json, None) => acc.to_json(),
        (Format::Json, Some(p)) => {
            let v = serde_json::json!({ "accuracy": acc, "pcp": p });
            serde_json::to_string_pretty(&v)? + "\n"
        }
    })
}

fn render(args: RenderArgs) -> Result<()> {
    let topology = load_config(args.config.as_deref())?.topology()?;
    let manifest = ClipManifest::discover(&args.clip, Split::Test)?;
    let poses = load_predictions(&args.predictions, &topology)?;
    if poses.len() != manifest.len() {
        warn!(
            "{} predicted frames for {} clip frames; rendering the overlap",
            poses.len(),
            manifest.len()
        );
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let style = OverlayStyle {
        joint_radius: args.joint_radius,
        limb_width: args.limb_width,
        ..OverlayStyle::default()
    };
    for (path, pose) in manifest.frames.iter().zip(&poses) {
        let frame = io::load_frame(path)?;
        let name = path.file_stem().map_or_else(
            || format!("{:06}", pose.frame_index),
            |s| s.to_string_lossy().into_owned(),
        );
        save_overlay(&frame, pose, &topology, &style, &args.out.join(format!("{name}.png")))?;
    }
    info!("wrote {} overlays to {}", manifest.len().min(poses.len()), args.out.display());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let geometry = AnnulusGeometry::square(args.rings, args.stride)?;
    let frames: Vec<Image> = match &args.clip {
        Some(dir) => {
            let m = ClipManifest::discover(dir, Split::Test)?;
            m.frames
                .iter()
                .take(args.frames.max(1))
                .map(|p| io::load_frame(p))
                .collect::<Result<_, _>>()?
        }
        None => {
            let script = MotionScript {
                width: args.width,
                height: args.height,
                frames: args.frames.max(1),
                start: [args.width as f64 / 2.0, args.height as f64 / 6.0],
                ..MotionScript::default()
            };
            synthesize(&script)?.frames
        }
    };
    let machine = MachineInfo::current();
    info!("machine: {machine:?}");
    let first = &frames[0];
    let center = Point::new(first.width() as f64 / 2.0, first.height() as f64 / 2.0);
    let results = args
        .radii
        .iter()
        .map(|&r| bench_window(&frames, center, r, &geometry, args.runs))
        .collect::<Result<Vec<_>, _>>()?;
    for r in &results {
        if r.integral_seconds >= r.naive_seconds {
            warn!("radius {}: integral path not faster ({:.2}x)", r.window_radius, r.speedup);
        }
    }
    let text = match args.format {
        Format::Text => format!(
            "# {}x{} image, {} frame(s), median of {} runs, {} {} {} threads{}\n{}",
            first.width(),
            first.height(),
            frames.len(),
            args.runs.max(1),
            machine.os,
            machine.arch,
            machine.threads,
            if machine.debug_build { ", debug build" } else { "" },
            results_to_text(&results)
        ),
        Format::Csv => results_to_text(&results).replace('\t', ","),
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({ "machine": machine, "results": results }))? + "\n",
    };
    print!("{text}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut script = match &args.script {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<MotionScript>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => MotionScript::default(),
    };
    if let Some(x) = args.frames {
        script.frames = x;
    }
    if let Some(x) = args.width {
        script.width = x;
    }
    if let Some(x) = args.height {
        script.height = x;
    }
    if let Some(x) = args.seed {
        script.seed = x;
    }
    if let Some(x) = args.start {
        script.start = x;
    }
    if let Some(x) = args.velocity {
        script.velocity = x;
    }
    if let Some(amplitude) = args.elbow_amplitude {
        let waveform = match args.waveform {
            WaveArg::Sine => Waveform::Sine,
            WaveArg::Square => Waveform::Square,
        };
        script = script.with_elbows(amplitude, args.elbow_period, waveform);
    }
    let split = match args.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let manifest = synth_generate(&script, &args.out, split)?;
    info!("wrote {} frames to {}", manifest.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
