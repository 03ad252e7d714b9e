//! Command-line front end. Every command reads files, writes its primary
//! output plus a [`RunManifest`], and is a pure function of its inputs.

mod manifest;
mod render;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Cursor};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::change_diff::{
    build_scene_pair, diff_maps, mine_frames, read_map_version, read_trajectory, ChangeReport, DiffParams,
    MapVersion, DEFAULT_WINDOW,
};
use crate::eval::{evaluate, pair_frames, EvalConfig};
use crate::map_model::{
    conform_features, read_scenes, write_scenes, MapFrame, ModelDims, DEFAULT_FOV_SIDE, DEFAULT_M_MAX,
    DEFAULT_N_POINTS,
};
use crate::matching_loss::{matched_loss, LabelSet, LossWeights, MatchResult, PredictionSet};
use crate::perturb::{apply_recipe, PerturbContext, PerturbRecipe};

pub use manifest::{sha256_hex, RunManifest};
pub use render::{render_svg, Layer};

#[derive(Debug, Parser)]
#[command(name = "mapprior", version, about = "Map prior perturbation, matching loss, evaluation and change mining")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Output order never depends on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a perturbation recipe to every frame of a scene file.
    Perturb(PerturbArgs),
    /// Matching loss between prediction and label scene files.
    Loss(LossArgs),
    /// Chamfer AP/mAP of predictions against ground truth.
    Eval(EvalArgs),
    /// Diff two map versions.
    Diff(DiffArgs),
    /// Mine change-intersecting windows and emit prior/label scene pairs.
    Mine(MineArgs),
    /// Render scene files as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    #[arg(long, default_value_t = DEFAULT_N_POINTS)]
    pub n_points: usize,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    /// JSON recipe; omitted means the low all-noise recipe.
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    /// Overrides the recipe's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[arg(long)]
    pub render_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// JSON loss weights; defaults apply to omitted keys.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub shape: ShapeArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// JSON evaluation config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated Chamfer thresholds in meters; overrides the config.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub render_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    /// JSON diff parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub modify_tol: Option<f64>,
    #[arg(long)]
    pub buffer: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: f64,
    #[arg(long, default_value_t = DEFAULT_FOV_SIDE)]
    pub fov_side: f64,
    /// Keep every k-th pose of each window.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = DEFAULT_N_POINTS)]
    pub n_points: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub render_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Base scene file; its frames define the output set.
    #[arg(long)]
    pub scenes: PathBuf,
    /// Extra scene files drawn on top, matched by frame id.
    #[arg(long)]
    pub overlay: Vec<PathBuf>,
    #[arg(long)]
    pub render_dir: PathBuf,
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build()?;
    pool.install(|| match cli.command {
        Command::Perturb(a) => cmd_perturb(&a),
        Command::Loss(a) => cmd_loss(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Diff(a) => cmd_diff(&a),
        Command::Mine(a) => cmd_mine(&a),
        Command::Render(a) => cmd_render(&a),
    })
}

fn read_bytes(path: &Path, manifest: &mut RunManifest) -> Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    manifest.record_input(path, &bytes);
    Ok(bytes)
}

fn load_scenes(path: &Path, manifest: &mut RunManifest) -> Result<Vec<MapFrame<f64>>> {
    let bytes = read_bytes(path, manifest)?;
    read_scenes(Cursor::new(bytes)).with_context(|| format!("in {}", path.display()))
}

fn load_json<C: serde::de::DeserializeOwned>(path: &Path, manifest: &mut RunManifest) -> Result<C> {
    let bytes = read_bytes(path, manifest)?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).map_err(|e| anyhow!("{}: at {}: {}", path.display(), e.path(), e.inner()))
}

fn load_map(path: &Path, manifest: &mut RunManifest) -> Result<MapVersion<f64>> {
    let bytes = read_bytes(path, manifest)?;
    read_map_version(BufReader::new(Cursor::new(bytes))).with_context(|| format!("in {}", path.display()))
}

fn write_text(path: &Path, text: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, (serde_json::to_string_pretty(value)? + "\n").as_bytes())
}

fn finish(mut manifest: RunManifest, started: Instant, path: &Path) -> Result<()> {
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.write(path)
}

/// Maps frames in parallel, keeping input order and reporting the first
/// failing frame by position.
fn par_frames<I: Sync, O: Send>(items: &[I], f: impl Fn(&I) -> Result<O> + Sync + Send) -> Result<Vec<O>> {
    let results: Vec<Result<O>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

fn render_frames(dir: &Path, layers: &[(&str, &[MapFrame<f64>], bool)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let Some((_, base, _)) = layers.first() else {
        return Ok(());
    };
    let index: Vec<BTreeMap<&str, &MapFrame<f64>>> = layers
        .iter()
        .map(|(_, frames, _)| frames.iter().map(|f| (f.frame_id.as_str(), f)).collect())
        .collect();
    for frame in base.iter() {
        let mut drawn = Vec::new();
        for (k, (label, _, dashed)) in layers.iter().enumerate() {
            if let Some(f) = index[k].get(frame.frame_id.as_str()) {
                drawn.push(Layer {
                    label,
                    frame: f,
                    dashed: *dashed,
                    opacity: if k == 0 { 0.5 } else { 1.0 },
                });
            }
        }
        let path = dir.join(format!("{}.svg", render::file_stem(&frame.frame_id)));
        write_text(&path, render_svg(&drawn).as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PerturbConfig<'a> {
    recipe: &'a PerturbRecipe,
    n_points: usize,
    m_max: usize,
}

pub fn cmd_perturb(args: &PerturbArgs) -> Result<()> {
    let started = Instant::now();
    let mut scratch = RunManifest::new("perturb", &(), None)?;
    let mut recipe: PerturbRecipe = match &args.recipe {
        Some(path) => load_json(path, &mut scratch)?,
        None => PerturbRecipe::low_all_noise(0),
    };
    if let Some(seed) = args.seed {
        recipe.master_seed = seed;
    }
    recipe.validate()?;
    let ctx = PerturbContext {
        dims: ModelDims::new(args.shape.m_max, args.shape.n_points)?,
        ..Default::default()
    };
    let config = PerturbConfig { recipe: &recipe, n_points: args.shape.n_points, m_max: args.shape.m_max };
    let mut manifest = RunManifest::new("perturb", &config, Some(recipe.master_seed))?;
    manifest.inputs = scratch.inputs;
    let frames = load_scenes(&args.scenes, &mut manifest)?;
    let out = par_frames(&frames, |f| {
        apply_recipe(f, &recipe, &ctx).with_context(|| format!("frame '{}'", f.frame_id))
    })?;
    let mut buf = Vec::new();
    write_scenes(&mut buf, &out)?;
    write_text(&args.out, &buf)?;
    if let Some(dir) = &args.render_dir {
        render_frames(dir, &[("input", &frames, true), ("perturbed", &out, false)])?;
    }
    finish(manifest, started, &RunManifest::path_for(&args.out))
}

#[derive(Serialize)]
struct FrameLoss {
    frame_id: String,
    num_pred: usize,
    num_labels: usize,
    result: MatchResult<f64>,
}

#[derive(Serialize)]
struct LossAggregate {
    frames: usize,
    total_loss: f64,
    focal_total: f64,
    p2p_total: f64,
    cosine_total: f64,
    mean_total_loss: f64,
}

#[derive(Serialize)]
struct LossReport {
    weights: LossWeights<f64>,
    frames: Vec<FrameLoss>,
    aggregate: LossAggregate,
}

pub fn cmd_loss(args: &LossArgs) -> Result<()> {
    let started = Instant::now();
    let mut scratch = RunManifest::new("loss", &(), None)?;
    let weights: LossWeights<f64> = match &args.weights {
        Some(path) => load_json(path, &mut scratch)?,
        None => LossWeights::default(),
    };
    weights.validate()?;
    let dims = ModelDims::new(args.shape.m_max, args.shape.n_points)?;
    let mut manifest = RunManifest::new("loss", &(&weights, &dims), None)?;
    manifest.inputs = scratch.inputs;
    let preds = load_scenes(&args.pred, &mut manifest)?;
    let labels = load_scenes(&args.labels, &mut manifest)?;
    let pairs = pair_frames(&preds, &labels)?;
    let frames = par_frames(&pairs, |(p, l)| {
        let ctx = || format!("frame '{}'", l.frame_id);
        let pf = conform_features(p.features.clone(), dims.n_points).with_context(ctx)?;
        let lf = conform_features(l.features.clone(), dims.n_points).with_context(ctx)?;
        let ps = PredictionSet::from_features(&pf, &dims).with_context(ctx)?;
        let ls = LabelSet::from_features(&lf, &dims).with_context(ctx)?;
        Ok(FrameLoss {
            frame_id: l.frame_id.clone(),
            num_pred: pf.len(),
            num_labels: lf.len(),
            result: matched_loss(&ps, &ls, &weights).with_context(ctx)?,
        })
    })?;
    let sum = |f: fn(&MatchResult<f64>) -> f64| frames.iter().map(|r| f(&r.result)).sum::<f64>();
    let total_loss = sum(|r| r.total_loss);
    let aggregate = LossAggregate {
        frames: frames.len(),
        total_loss,
        focal_total: sum(|r| r.focal_total),
        p2p_total: sum(|r| r.p2p_total),
        cosine_total: sum(|r| r.cosine_total),
        mean_total_loss: if frames.is_empty() { 0.0 } else { total_loss / frames.len() as f64 },
    };
    write_json(&args.out, &LossReport { weights, frames, aggregate })?;
    finish(manifest, started, &RunManifest::path_for(&args.out))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let started = Instant::now();
    let mut scratch = RunManifest::new("eval", &(), None)?;
    let mut config: EvalConfig = match &args.config {
        Some(path) => load_json(path, &mut scratch)?,
        None => EvalConfig::default(),
    };
    if let Some(t) = &args.thresholds {
        config.thresholds = t.clone();
    }
    config.validate()?;
    let mut manifest = RunManifest::new("eval", &config, None)?;
    manifest.inputs = scratch.inputs;
    let preds = load_scenes(&args.pred, &mut manifest)?;
    let gts = load_scenes(&args.gt, &mut manifest)?;
    let report = evaluate(&preds, &gts, &config)?;
    write_json(&args.out, &report)?;
    print!("{}", report.table());
    if let Some(dir) = &args.render_dir {
        render_frames(dir, &[("ground_truth", &gts, false), ("prediction", &preds, true)])?;
    }
    finish(manifest, started, &RunManifest::path_for(&args.out))
}

fn diff_params(
    path: Option<&PathBuf>,
    modify_tol: Option<f64>,
    buffer: Option<f64>,
    manifest: &mut RunManifest,
) -> Result<DiffParams> {
    let mut params: DiffParams = match path {
        Some(p) => load_json(p, manifest)?,
        None => DiffParams::default(),
    };
    if let Some(t) = modify_tol {
        params.modify_tol = t;
    }
    if let Some(b) = buffer {
        params.buffer = b;
    }
    params.validate()?;
    Ok(params)
}

pub fn cmd_diff(args: &DiffArgs) -> Result<()> {
    let started = Instant::now();
    let mut scratch = RunManifest::new("diff", &(), None)?;
    let params = diff_params(args.params.as_ref(), args.modify_tol, args.buffer, &mut scratch)?;
    let mut manifest = RunManifest::new("diff", &params, None)?;
    manifest.inputs = scratch.inputs;
    let old = load_map(&args.old, &mut manifest)?;
    let new = load_map(&args.new, &mut manifest)?;
    let report = diff_maps(&old, &new, &params)?;
    write_json(&args.out, &report)?;
    eprintln!(
        "{} added, {} removed, {} modified, {} regions",
        report.added.len(),
        report.removed.len(),
        report.modified.len(),
        report.regions.len()
    );
    finish(manifest, started, &RunManifest::path_for(&args.out))
}

#[derive(Serialize)]
struct MineConfig<'a> {
    diff: &'a DiffParams,
    window: f64,
    fov_side: f64,
    stride: usize,
    n_points: usize,
}

#[derive(Serialize)]
struct MinedSummary {
    windows: Vec<crate::change_diff::MinedWindow<f64>>,
    /// Frame ids written, in output order.
    frames: Vec<String>,
    /// Window poses skipped because they fall outside a map extent.
    skipped: Vec<usize>,
}

pub fn cmd_mine(args: &MineArgs) -> Result<()> {
    let started = Instant::now();
    if args.stride == 0 {
        bail!("stride must be at least 1");
    }
    let mut scratch = RunManifest::new("mine", &(), None)?;
    let params = diff_params(args.params.as_ref(), None, None, &mut scratch)?;
    let config = MineConfig {
        diff: &params,
        window: args.window,
        fov_side: args.fov_side,
        stride: args.stride,
        n_points: args.n_points,
    };
    let mut manifest = RunManifest::new("mine", &config, None)?;
    manifest.inputs = scratch.inputs;
    let old = load_map(&args.old, &mut manifest)?;
    let new = load_map(&args.new, &mut manifest)?;
    let traj_bytes = read_bytes(&args.trajectory, &mut manifest)?;
    let trajectory = read_trajectory::<f64>(Cursor::new(traj_bytes))
        .with_context(|| format!("in {}", args.trajectory.display()))?;

    let report: ChangeReport<f64> = diff_maps(&old, &new, &params)?;
    let windows = mine_frames(&trajectory, &report.regions, args.fov_side, args.window)?;
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for (w, win) in windows.iter().enumerate() {
        for &k in win.frames.iter().step_by(args.stride) {
            let p = &trajectory[k];
            let at = crate::map_model::ControlPoint::new(p.x, p.y);
            if old.extent.contains(&at) && new.extent.contains(&at) {
                jobs.push((format!("w{w:03}_p{k:06}"), k));
            } else {
                skipped.push(k);
            }
        }
    }
    let pairs = par_frames(&jobs, |(id, k)| {
        let p = &trajectory[*k];
        let pose = crate::map_model::Pose2D::new(p.x, p.y, p.yaw);
        Ok(build_scene_pair(&old, &new, pose, args.fov_side, args.n_points, id)?)
    })?;
    let priors: Vec<MapFrame<f64>> = pairs.iter().map(|p| p.prior.clone()).collect();
    let gts: Vec<MapFrame<f64>> = pairs.iter().map(|p| p.ground_truth.clone()).collect();

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_json(&args.out.join("change_report.json"), &report)?;
    let summary = MinedSummary {
        windows,
        frames: jobs.iter().map(|(id, _)| id.clone()).collect(),
        skipped,
    };
    write_json(&args.out.join("windows.json"), &summary)?;
    for (name, frames) in [("prior.jsonl", &priors), ("ground_truth.jsonl", &gts)] {
        let mut buf = Vec::new();
        write_scenes(&mut buf, frames)?;
        write_text(&args.out.join(name), &buf)?;
    }
    if let Some(dir) = &args.render_dir {
        render_frames(dir, &[("ground_truth", &gts, false), ("prior", &priors, true)])?;
    }
    eprintln!(
        "{} windows, {} scene pairs, {} poses skipped",
        summary.windows.len(),
        priors.len(),
        summary.skipped.len()
    );
    finish(manifest, started, &args.out.join("manifest.json"))
}

pub fn cmd_render(args: &RenderArgs) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("render", &args.overlay, None)?;
    let base = load_scenes(&args.scenes, &mut manifest)?;
    let overlays: Vec<(String, Vec<MapFrame<f64>>)> = args
        .overlay
        .iter()
        .map(|p| {
            let label = p.file_stem().map_or("overlay".into(), |s| s.to_string_lossy().into_owned());
            Ok((label, load_scenes(p, &mut manifest)?))
        })
        .collect::<Result<_>>()?;
    let base_label = args.scenes.file_stem().map_or("scenes".into(), |s| s.to_string_lossy().into_owned());
    let mut layers: Vec<(&str, &[MapFrame<f64>], bool)> = vec![(base_label.as_str(), &base, false)];
    for (label, frames) in &overlays {
        layers.push((label.as_str(), frames, true));
    }
    render_frames(&args.render_dir, &layers)?;
    finish(manifest, started, &args.render_dir.join("manifest.json"))
}
