use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use folt::eval::{self, EvalSummary, FrameSource, GroundTruthTrack};
use folt::io::{self, RunArtifacts, SequenceManifest};
use folt::synthetic::SquareSequence;
use folt::tracker::{self, TrackerConfig};
use folt::Error;

/// Informational throughput target for `bench`, in frames per second.
const BENCH_TARGET_FPS: f64 = 100.0;

#[derive(Parser)]
#[command(name = "folt", version, about = "Salient object localization and tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the whole-image saliency map of one image.
    Detect {
        image: PathBuf,
        #[arg(long, default_value = "saliency.png")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Track through a directory of frames and write results.
    Track {
        /// Directory of frames, or one holding an img/ subdirectory.
        seq_dir: PathBuf,
        /// Ground-truth file; defaults to groundtruth_rect.txt or
        /// groundtruth.txt in the sequence directory.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write an annotated PNG per frame.
        #[arg(long)]
        overlay: bool,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seq: SeqArgs,
    },
    /// One-pass evaluation against ground truth.
    EvalOpe {
        seq_dir: PathBuf,
        /// Ground-truth file; defaults to groundtruth_rect.txt or
        /// groundtruth.txt in the sequence directory.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Record per-frame timings in results.csv.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seq: SeqArgs,
    },
    /// Temporal robustness evaluation from randomized start frames.
    EvalTre {
        seq_dir: PathBuf,
        /// Ground-truth file; defaults to groundtruth_rect.txt or
        /// groundtruth.txt in the sequence directory.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value_t = eval::DEFAULT_TRE_SEGMENTS)]
        segments: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seq: SeqArgs,
    },
    /// Throughput on a generated sequence.
    Bench {
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long, default_value = "300x200", value_parser = parse_size)]
        size: (u32, u32),
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct SeqArgs {
    /// Frame file patterns, `|`-separated.
    #[arg(long, default_value = io::DEFAULT_FRAME_PATTERN)]
    pattern: String,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    passes: Option<usize>,
    #[arg(long)]
    refresh_interval: Option<usize>,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    se_rows: Option<usize>,
    #[arg(long)]
    se_cols: Option<usize>,
    #[arg(long)]
    q_diag: Option<f64>,
    #[arg(long)]
    r_diag: Option<f64>,
    #[arg(long)]
    max_dim: Option<usize>,
    #[arg(long)]
    min_contrast: Option<f64>,
    #[arg(long)]
    global_gate: Option<bool>,
}

/// Failures split by exit code.
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T> = Result<T, Failure>;

impl ConfigArgs {
    fn resolve(&self) -> CliResult<TrackerConfig> {
        let mut config = TrackerConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::Runtime(Error::Io {
                    path: path.clone(),
                    source: e,
                })
            })?;
            config = io::parse_config(&text, config).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        }
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        apply!(
            delta,
            passes,
            refresh_interval,
            block,
            lambda,
            se_rows,
            se_cols,
            q_diag,
            r_diag,
            max_dim,
            min_contrast,
            global_gate
        );
        config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(config)
    }
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: u32 = w.parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Detect { image, out, config } => detect(&image, &out, &config.resolve()?),
        Command::Track {
            seq_dir,
            gt,
            out,
            overlay,
            config,
            seq,
        } => track(&seq_dir, gt.as_deref(), &out, overlay, &config.resolve()?, &seq.pattern),
        Command::EvalOpe {
            seq_dir,
            gt,
            out,
            timings,
            config,
            seq,
        } => eval_ope(&seq_dir, gt.as_deref(), &out, timings, &config.resolve()?, &seq.pattern),
        Command::EvalTre {
            seq_dir,
            gt,
            segments,
            seed,
            out,
            config,
            seq,
        } => eval_tre(
            &seq_dir,
            gt.as_deref(),
            segments,
            seed,
            &out,
            &config.resolve()?,
            &seq.pattern,
        ),
        Command::Bench { frames, size, config } => bench(frames, size, &config.resolve()?),
    }
}

fn detect(image: &Path, out: &Path, config: &TrackerConfig) -> CliResult<()> {
    let frame = io::load_frame(image)?;
    let map = tracker::detect_saliency(&frame, config)?;
    let img = image::GrayImage::from_raw(map.width() as u32, map.height() as u32, map.into_vec())
        .expect("buffer matches dimensions");
    img.save(out).map_err(|source| Error::Image {
        path: out.to_path_buf(),
        source,
    })?;
    println!("wrote {}", out.display());
    Ok(())
}

fn load_truth(manifest: &SequenceManifest, gt: Option<&Path>) -> CliResult<Option<GroundTruthTrack>> {
    match gt.map(Path::to_path_buf).or_else(|| manifest.groundtruth.clone()) {
        Some(path) => Ok(Some(io::parse_groundtruth(&path, manifest.len())?)),
        None => Ok(None),
    }
}

fn require_truth(manifest: &SequenceManifest, gt: Option<&Path>) -> CliResult<GroundTruthTrack> {
    load_truth(manifest, gt)?.ok_or_else(|| Failure::Usage("ground truth required: pass --gt FILE".into()))
}

fn track(
    seq_dir: &Path,
    gt: Option<&Path>,
    out: &Path,
    overlay: bool,
    config: &TrackerConfig,
    pattern: &str,
) -> CliResult<()> {
    let manifest = io::load_sequence(seq_dir, pattern)?;
    let truth = load_truth(&manifest, gt)?;
    let results = tracker::track_sequence(manifest.iter_frames(), config)?;
    let artifacts = match &truth {
        Some(t) => {
            let scores = eval::frame_scores(&results, t)?;
            let (summary, curves) = eval::summarize(&results, t)?;
            RunArtifacts::new(&results, Some(&scores), Some((&summary, &curves)), true)
        }
        None => RunArtifacts::new(&results, None, None, true),
    };
    io::write_artifacts(&artifacts, out)?;
    if overlay {
        let dir = out.join("overlay");
        fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        for (i, r) in results.iter().enumerate() {
            let frame = manifest.frame(i)?;
            let t = truth.as_ref().and_then(|t| t.entries()[i]);
            let img = io::render_overlay(&frame, r, t.as_ref());
            io::write_overlay(&img, &dir.join(format!("frame_{i:05}.png")))?;
        }
    }
    print!("{}", io::summary_text(&artifacts.summary));
    Ok(())
}

fn eval_ope(
    seq_dir: &Path,
    gt: Option<&Path>,
    out: &Path,
    timings: bool,
    config: &TrackerConfig,
    pattern: &str,
) -> CliResult<()> {
    let manifest = io::load_sequence(seq_dir, pattern)?;
    let truth = require_truth(&manifest, gt)?;
    let report = eval::run_ope(&manifest, &truth, config)?;
    let scores = eval::frame_scores(&report.results, &truth)?;
    let artifacts = RunArtifacts::new(
        &report.results,
        Some(&scores),
        Some((&report.summary, &report.curves)),
        timings,
    );
    io::write_artifacts(&artifacts, out)?;
    print_summary(&manifest.name, "OPE", &report.summary);
    Ok(())
}

fn eval_tre(
    seq_dir: &Path,
    gt: Option<&Path>,
    segments: usize,
    seed: u64,
    out: &Path,
    config: &TrackerConfig,
    pattern: &str,
) -> CliResult<()> {
    let manifest = io::load_sequence(seq_dir, pattern)?;
    let truth = require_truth(&manifest, gt)?;
    if segments == 0 || segments > manifest.len() {
        return Err(Failure::Usage(format!(
            "--segments must be between 1 and the frame count ({})",
            manifest.len()
        )));
    }
    let report = eval::run_tre(&manifest, &truth, config, segments, seed)?;
    let all: Vec<_> = report.segments.iter().flat_map(|s| s.results.iter().cloned()).collect();
    let mut artifacts = RunArtifacts::new(&all, None, Some((&report.summary, &report.curves)), false);
    artifacts.rows.clear();
    artifacts.set_summary("segments", segments.to_string());
    artifacts.set_summary("seed", seed.to_string());
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let mut table = String::from("start,frames,precision_20,success_050,cle_mean,iou_mean,auc\n");
    for s in &report.segments {
        let m = &s.summary;
        let _ = writeln!(
            table,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            s.start, m.frames, m.precision_20, m.success_050, m.cle_mean, m.iou_mean, m.auc
        );
    }
    let path = out.join("segments.csv");
    fs::write(&path, table).map_err(|e| Error::Io { path, source: e })?;
    let curves = report.curves.clone();
    for (name, curve) in [
        ("precision_curve.csv", &curves.precision),
        ("success_curve.csv", &curves.success),
    ] {
        let path = out.join(name);
        fs::write(&path, io::curve_csv(curve)).map_err(|e| Error::Io { path, source: e })?;
    }
    let path = out.join("summary.txt");
    fs::write(&path, io::summary_text(&artifacts.summary)).map_err(|e| Error::Io { path, source: e })?;
    print_summary(&manifest.name, "TRE", &report.summary);
    Ok(())
}

fn print_summary(name: &str, kind: &str, s: &EvalSummary) {
    println!("{name} ({kind})");
    println!("  precision@20px  {:.4}", s.precision_20);
    println!("  success@0.5     {:.4}", s.success_050);
    println!("  mean CLE (px)   {:.4}", s.cle_mean);
    println!("  mean IoU        {:.4}", s.iou_mean);
    println!("  success AUC     {:.4}", s.auc);
    println!("  fps median/mean {:.1} / {:.1}", s.fps.median, s.fps.mean);
}

fn bench(frames: usize, (width, height): (u32, u32), config: &TrackerConfig) -> CliResult<()> {
    if frames == 0 {
        return Err(Failure::Usage("--frames must be >= 1".into()));
    }
    let size = (width.min(height) / 10).max(2);
    let seq = SquareSequence {
        width,
        height,
        frames,
        size,
        start: (width as f64 * 0.1, height as f64 * 0.2),
        velocity: (width as f64 * 0.6 / frames as f64, height as f64 * 0.4 / frames as f64),
        ..SquareSequence::default()
    };
    let pregenerated: Vec<_> = seq.frames().collect();
    let results = tracker::track_sequence(pregenerated.into_iter().map(Ok), config)?;
    let fps = eval::throughput(&results);
    println!("frames={frames} size={width}x{height}");
    println!("fps_median={:.1}", fps.median);
    println!("fps_mean={:.1}", fps.mean);
    if fps.median < BENCH_TARGET_FPS {
        eprintln!("warning: median throughput below {BENCH_TARGET_FPS} fps");
    }
    Ok(())
}
