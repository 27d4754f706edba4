use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vks::eval::{f_measure, synth_generate, EvalReport, SynthSpec};
use vks::features::FeatureMode;
use vks::pipeline::{io, process_sequence, read_entries, PipelineConfig, VarianceMode};
use vks::LabelMask;

/// Background subtraction over a directory of frames.
///
/// Frames are read in file-name order. For every classified frame the
/// foreground probability is written to `<out>/posterior/<stem>.png` and the
/// final mask to `<out>/mask/<stem>.png`.
#[derive(Debug, Parser)]
#[command(name = "vks", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic sequence (`input/`) and its ground truth (`gt/`).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Directory of input frames (png or bmp).
    #[arg(long)]
    input: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Configuration file of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Ground-truth masks named after the frames they label.
    #[arg(long, requires = "report")]
    gt: Option<PathBuf>,

    /// CSV file receiving per-frame scores against `--gt`.
    #[arg(long, requires = "gt")]
    report: Option<PathBuf>,

    #[arg(long, value_parser = parse_features)]
    features: Option<FeatureMode>,

    #[arg(long, value_parser = parse_mode)]
    mode: Option<VarianceMode>,

    /// Frames used to build the background model.
    #[arg(long)]
    init_frames: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scene {
    Static,
    DynamicTexture,
    Occlusion,
    IlluminationJump,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Scene,

    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Override the scene's frame count.
    #[arg(long)]
    frames: Option<usize>,

    /// Override the per-channel noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,

    /// Frames the occluder stays parked (occlusion scenes).
    #[arg(long, default_value_t = 15)]
    park: usize,

    /// Write a ground-truth mask for every n-th frame only.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    gt_every: u64,
}

fn parse_features(s: &str) -> Result<FeatureMode, String> {
    s.parse().map_err(|e: vks::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<VarianceMode, String> {
    s.parse().map_err(|e: vks::Error| e.to_string())
}

fn build_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut entries = match &args.config {
        Some(path) => read_entries(path)?,
        None => Vec::new(),
    };
    if let Some(f) = args.features {
        entries.push(("feature_mode".into(), f.to_string()));
    }
    if let Some(m) = args.mode {
        entries.push(("variance_mode".into(), m.to_string()));
    }
    if let Some(n) = args.init_frames {
        entries.push(("init_frames".into(), n.to_string()));
    }
    let mut config = PipelineConfig::default();
    config.apply(&entries)?;
    Ok(config)
}

/// Ground truth restricted to known frames; every mask must name a frame.
fn load_ground_truth(dir: &Path, stems: &[String]) -> Result<BTreeMap<String, LabelMask>> {
    let gt = io::read_ground_truth(dir)?;
    if gt.is_empty() {
        bail!("no ground-truth masks in {}", dir.display());
    }
    let unknown: Vec<&String> = gt.keys().filter(|k| !stems.contains(k)).collect();
    if !unknown.is_empty() {
        bail!(
            "{} ground-truth mask(s) match no input frame (first: {}); {} masks for {} frames",
            unknown.len(),
            unknown[0],
            gt.len(),
            stems.len()
        );
    }
    Ok(gt)
}

fn run(args: RunArgs) -> Result<()> {
    let input = args.input.as_deref().context("--input is required")?;
    let out = args.out.as_deref().context("--out is required")?;
    let config = build_config(&args)?;
    let source = io::FrameDirectory::open(input)?;
    if source.is_empty() {
        bail!("no png or bmp frames in {}", input.display());
    }
    let stems = source.stems();
    let gt = match &args.gt {
        Some(dir) => Some(load_ground_truth(dir, &stems)?),
        None => None,
    };
    log::info!(
        "{} frames, features {}, mode {}",
        source.len(),
        config.feature_mode,
        config.variance_mode
    );

    let mut report = EvalReport::default();
    let mut scored = 0;
    let mut written = 0;
    for result in process_sequence(config, source.frames())? {
        let result = result?;
        let stem = &stems[result.frame_index as usize];
        io::write_result(out, stem, &result)?;
        written += 1;
        log::debug!(
            "frame {stem}: {:.1?}, searched {:.3}",
            result.elapsed,
            result.search_fraction
        );
        if let Some(mask) = gt.as_ref().and_then(|g| g.get(stem)) {
            let score = f_measure(&result.mask, mask).with_context(|| format!("ground truth for {stem}"))?;
            report.push(result.frame_index, score);
            scored += 1;
        }
    }
    log::info!("wrote {written} results to {}", out.display());

    if let (Some(gt), Some(path)) = (&gt, &args.report) {
        if scored < gt.len() {
            log::warn!(
                "{} ground-truth frame(s) fell inside background learning and were not scored",
                gt.len() - scored
            );
        }
        report.write_csv(path)?;
        log::info!(
            "{scored} frames scored, mean F {:.4}, pooled F {:.4}",
            report.mean_f(),
            report.pooled().f_measure
        );
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match args.kind {
        Scene::Static => SynthSpec::static_scene(args.seed),
        Scene::DynamicTexture => SynthSpec::dynamic_texture(args.seed),
        Scene::Occlusion => SynthSpec::occlusion(args.seed, args.park),
        Scene::IlluminationJump => SynthSpec::illumination_jump(args.seed),
    };
    if let Some(n) = args.frames {
        spec.frames = n;
    }
    if let Some(noise) = args.noise {
        spec.noise_std = noise;
    }
    let scene = synth_generate(&spec)?;
    for dir in ["input", "gt"] {
        let dir = args.out.join(dir);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let width = spec.frames.to_string().len().max(5);
    for (t, (frame, gt)) in scene.frames.iter().zip(&scene.ground_truth).enumerate() {
        let name = format!("{t:0width$}.png");
        io::write_frame(&args.out.join("input").join(&name), frame)?;
        if t as u64 % args.gt_every == 0 {
            io::write_mask(&args.out.join("gt").join(&name), gt)?;
        }
    }
    log::info!("wrote {} frames to {}", spec.frames, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Some(Command::Synth(args)) => synth(args),
        None => run(cli.run),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
