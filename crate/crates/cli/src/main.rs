//! `attnwarp` command-line tool.
//!
//! Every command reads and writes `.fwt` tensors and camera JSON files and
//! exits with status 1 and a JSON error object on stderr when an input
//! violates a contract.

mod config;
mod export;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attnwarp::losses::l1_loss;
use attnwarp::splat::filter_splats;
use attnwarp::synth::{SceneSpec, SyntheticScene};
use attnwarp::warp::resample_warp_field;
use attnwarp::{
    alpha_at, blend_masked, compute_warp_field, render_depth, warp_feature_map, BlendSchedule, Camera, DepthMap,
    FeatureMap, FilterConfig, Mask, Sampling, SplatSet,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "attnwarp", version, about = "Warp attention feature maps between camera views")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warp a source-view tensor into the target view.
    Warp(WarpArgs),
    /// Write the warp validity mask of a camera pair.
    Mask(MaskArgs),
    /// Rasterise a splat table to a depth map.
    RenderDepth(RenderArgs),
    /// Blend a warped tensor into a fresh one under a mask.
    Blend(BlendArgs),
    /// Generate a synthetic scene from a JSON spec.
    Synth(SynthArgs),
    /// Run the staged editing pipeline from a JSON config.
    Run(RunArgs),
    /// Compare two tensors (L1, max-abs, PSNR).
    Eval(EvalArgs),
}

#[derive(Args)]
struct PairArgs {
    /// Source camera JSON.
    #[arg(long)]
    src_camera: PathBuf,
    /// Target camera JSON.
    #[arg(long)]
    tgt_camera: PathBuf,
    /// Target-view depth map (.fwt, [H, W]).
    #[arg(long)]
    depth: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Nearest,
    Bilinear,
}

impl From<SamplingArg> for Sampling {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::Nearest => Sampling::Nearest,
            SamplingArg::Bilinear => Sampling::Bilinear,
        }
    }
}

#[derive(Args)]
struct WarpArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Source-view tensor, [C, h, w] or [h, w]. A smaller grid than the
    /// camera resamples the warp field to it.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Also write the sampled-pixel mask.
    #[arg(long)]
    mask_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bilinear")]
    sampling: SamplingArg,
    /// PNG preview of the output (1 or 3 channels).
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct MaskArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    output: PathBuf,
    /// Resample the field to an N×N grid first.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Splat table (.fwt, [N, 9]).
    #[arg(long)]
    splats: PathBuf,
    /// Camera to render.
    #[arg(long)]
    camera: PathBuf,
    /// Source camera; when given, splats are normal-filtered against it first.
    #[arg(long)]
    source_camera: Option<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    theta_max: f64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct BlendArgs {
    #[arg(long)]
    warped: PathBuf,
    #[arg(long)]
    fresh: PathBuf,
    /// Mask (.fwt, [H, W]); all-ones when omitted.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Blend coefficient; conflicts with --step.
    #[arg(long, conflicts_with = "step")]
    alpha: Option<f64>,
    /// Denoising step t for the schedule α0·(T − t)/T.
    #[arg(long, requires = "total_steps")]
    step: Option<u32>,
    #[arg(long)]
    total_steps: Option<u32>,
    #[arg(long, default_value_t = 0.9)]
    alpha0: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec JSON.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave wall-clock timings out of the manifest.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct EvalArgs {
    a: PathBuf,
    b: PathBuf,
    /// Peak signal value for PSNR.
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

/// What goes to stderr on failure.
#[derive(Debug)]
struct Failure {
    kind: String,
    message: String,
}

impl From<attnwarp::Error> for Failure {
    fn from(e: attnwarp::Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: "Usage".into(),
            message: message.into(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(Failure::usage(e.to_string().trim())),
    };
    let result = match cli.command {
        Command::Warp(a) => warp(a),
        Command::Mask(a) => mask(a),
        Command::RenderDepth(a) => render(a),
        Command::Blend(a) => blend(a),
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

/// Writes one line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": f.kind, "message": f.message } }));
    ExitCode::FAILURE
}

fn load_pair(p: &PairArgs) -> CliResult<(Camera, Camera, DepthMap)> {
    Ok((Camera::load(&p.src_camera)?, Camera::load(&p.tgt_camera)?, DepthMap::load(&p.depth)?))
}

fn warp(a: WarpArgs) -> CliResult {
    let (src, tgt, depth) = load_pair(&a.pair)?;
    let input = FeatureMap::load(&a.input)?;
    let mut field = compute_warp_field(&depth, &tgt, &src)?;
    let (_, h, w) = input.shape();
    if (w, h) != (src.width(), src.height()) {
        // the input lives on a coarser grid: resample so the field addresses it
        let (th, tw) = (
            (tgt.height() * h).div_ceil(src.height()).max(1),
            (tgt.width() * w).div_ceil(src.width()).max(1),
        );
        field = resample_warp_field(&field, th, tw)?;
    }
    let (out, m) = warp_feature_map(&input, &field, a.sampling.into())?;
    out.save(&a.output)?;
    if let Some(p) = &a.mask_out {
        m.save(p)?;
    }
    if let Some(p) = &a.png {
        export::feature_png(&out, p)?;
    }
    Ok(())
}

fn mask(a: MaskArgs) -> CliResult {
    let (src, tgt, depth) = load_pair(&a.pair)?;
    let mut field = compute_warp_field(&depth, &tgt, &src)?;
    if let Some(n) = a.resolution {
        field = resample_warp_field(&field, n, n)?;
    }
    let m = field.valid().clone();
    m.save(&a.output)?;
    if let Some(p) = &a.png {
        export::mask_png(&m, p)?;
    }
    Ok(())
}

fn render(a: RenderArgs) -> CliResult {
    let splats = SplatSet::load(&a.splats)?;
    let cam = Camera::load(&a.camera)?;
    let set = match &a.source_camera {
        Some(p) => filter_splats(&splats, &Camera::load(p)?, &cam, &FilterConfig::new(a.theta_max)?)?,
        None => splats,
    };
    let depth = render_depth(&set, &cam);
    depth.save(&a.output)?;
    if let Some(p) = &a.png {
        export::depth_png(&depth, p)?;
    }
    Ok(())
}

fn blend(a: BlendArgs) -> CliResult {
    let alpha = match (a.alpha, a.step, a.total_steps) {
        (Some(alpha), None, _) => alpha,
        (None, Some(t), Some(total)) => alpha_at(&BlendSchedule::new(a.alpha0, total)?, t)?,
        _ => return Err(Failure::usage("give either --alpha or --step with --total-steps")),
    };
    let warped = FeatureMap::load(&a.warped)?;
    let fresh = FeatureMap::load(&a.fresh)?;
    let mask = match &a.mask {
        Some(p) => Mask::load(p)?,
        None => Mask::ones(fresh.width(), fresh.height())?,
    };
    blend_masked(&warped, &fresh, &mask, alpha)?.save(&a.output)?;
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.spec).map_err(attnwarp::Error::from)?;
    let spec = SceneSpec::from_json(&text)?;
    let scene = SyntheticScene::build(&spec, a.spec.parent())?;
    let files = scene.write(&a.out)?;
    emit(
        &json!({
            "views": scene.cameras.len(),
            "splats": scene.splats()?.len(),
            "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
        .to_string(),
    );
    Ok(())
}

fn run(a: RunArgs) -> CliResult {
    let cfg = config::RunConfig::load(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let manifest = cfg.execute(base, a.out, !a.no_timing)?;
    emit(&manifest.to_json());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let x = FeatureMap::load(&a.a)?;
    let y = FeatureMap::load(&a.b)?;
    let l1 = l1_loss(&x, &y)?;
    let mut max_abs = 0.0f64;
    let mut sq = Vec::with_capacity(x.data().len());
    for (&p, &q) in x.data().iter().zip(y.data()) {
        let d = p as f64 - q as f64;
        max_abs = max_abs.max(d.abs());
        sq.push(d * d);
    }
    let mse = attnwarp::losses::pairwise_sum(&sq) / sq.len().max(1) as f64;
    let psnr = if mse == 0.0 {
        json!("inf")
    } else {
        json!(10.0 * (a.peak * a.peak / mse).log10())
    };
    emit(&json!({ "l1": l1, "max_abs": max_abs, "mse": mse, "psnr": psnr, "elements": sq.len() }).to_string());
    Ok(())
}
