//! The `pot4d` command line. [`run`] parses arguments, dispatches, and
//! returns the process exit code: 0 ok, 1 I/O or format, 2 shape or
//! semantic, 3 bad arguments.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::infer::{self, Aggregation};
use crate::io;
use crate::labelgen::{self, assign_instances};
use crate::metrics::stq_report;
use crate::sim::{self, SceneScript};
use crate::splat;
use crate::track::{self, TrackMethod};

#[derive(Debug, Parser)]
#[command(name = "pot4d", version, about = "4D panoptic occupancy tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a predicted sequence against ground truth.
    Evaluate(EvaluateArgs),
    /// Splat a Gaussian set onto a voxel grid.
    Splat(SplatArgs),
    /// Assign instance IDs to thing voxels from box annotations.
    Labelgen(LabelgenArgs),
    /// Re-identify instances across frames with a tracking baseline.
    Track(TrackArgs),
    /// Render a scene script into ground truth and boxes.
    Sim(SimArgs),
    /// Apply corruptions to a sequence.
    Corrupt(CorruptArgs),
    /// Turn per-frame query outputs into a panoptic sequence.
    Infer(InferArgs),
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Ignore predictions in ground-truth free space when scoring association.
    #[arg(long)]
    flawed: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplatArgs {
    #[arg(long)]
    gaussians: PathBuf,
    /// Grid size in voxels, `X,Y,Z`.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<u32>,
    /// Voxel edge length in meters, one value or `sx,sy,sz`.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    voxel_size: Vec<f64>,
    /// Metric position of the grid corner, `x,y,z`.
    #[arg(long, value_delimiter = ',', default_value = "0,0,0", allow_negative_numbers = true)]
    origin: Vec<f64>,
    /// Cutoff in marginal standard deviations, or `inf` for dense evaluation.
    #[arg(long, default_value_t = splat::DEFAULT_TRUNCATION_SIGMA)]
    truncation: f64,
    /// Expected embedding width; checked against the file.
    #[arg(long)]
    embedding_dim: Option<usize>,
    /// Also splat densely and report the largest deviation.
    #[arg(long)]
    compare_dense: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LabelgenArgs {
    #[arg(long)]
    semantics: PathBuf,
    #[arg(long)]
    boxes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    max_distance: Option<f64>,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[arg(long)]
    pred: PathBuf,
    /// per-frame, iou, cosine or ab3dmot.
    #[arg(long)]
    method: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Instance embeddings (JSON lines), required by `cosine`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    min_iou: Option<f64>,
    #[arg(long)]
    min_sim: Option<f64>,
    #[arg(long)]
    max_misses: Option<u32>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    script: PathBuf,
    #[arg(long)]
    out_gt: PathBuf,
    #[arg(long)]
    out_boxes: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated `name:frame` list, e.g. `id_switch:2,spawn_fp:0`.
    #[arg(long, default_value = "")]
    ops: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InferArgs {
    /// One QOUT file per frame, in frame order.
    #[arg(long, required = true, num_args = 1..)]
    queries: Vec<PathBuf>,
    /// OV4D sequence supplying geometry and label spec.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// split or unified.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    mask_threshold: Option<f64>,
    /// Give every frame fresh instance IDs instead of the query track IDs.
    #[arg(long)]
    per_frame: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Evaluate(a) => evaluate(a),
        Command::Splat(a) => splat_cmd(a),
        Command::Labelgen(a) => labelgen_cmd(a),
        Command::Track(a) => track_cmd(a),
        Command::Sim(a) => sim_cmd(a),
        Command::Corrupt(a) => corrupt_cmd(a),
        Command::Infer(a) => infer_cmd(a),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn triple<T: Copy>(flag: &str, v: &[T]) -> Result<[T; 3]> {
    match *v {
        [a] => Ok([a; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::Argument(format!("--{flag} takes 1 or 3 comma-separated values, got {}", v.len()))),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let gt = io::read_ov4d(&a.gt)?;
    let pred = io::read_ov4d(&a.pred)?;
    let text = stq_report(&gt, &pred, a.flawed)?.to_text_map();
    match a.report {
        Some(p) => io::write_file(&p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn splat_cmd(a: SplatArgs) -> Result<()> {
    if a.dims.len() != 3 {
        return Err(Error::Argument(format!("--dims takes X,Y,Z, got {} values", a.dims.len())));
    }
    if a.truncation.is_nan() || a.truncation <= 0.0 {
        return Err(Error::Argument(format!("--truncation must be positive, got {}", a.truncation)));
    }
    let geom = GridGeometry::new(
        triple("origin", &a.origin)?,
        triple("voxel-size", &a.voxel_size)?,
        [a.dims[0], a.dims[1], a.dims[2]],
    )
    .map_err(|e| Error::Argument(e.to_string()))?;
    let set = io::read_gset(&a.gaussians)?;
    if let Some(c) = a.embedding_dim {
        if c != set.embedding_dim() {
            return Err(Error::Shape(format!(
                "--embedding-dim {c} but {} stores {}",
                a.gaussians.display(),
                set.embedding_dim()
            )));
        }
    }
    let grid = splat::splat(&set, &geom, a.truncation)?;
    io::write_file(&a.out, &io::encode_fgrd(&grid))?;

    let occ = grid.occupancy();
    let n = occ.len() as f64;
    let mean = occ.iter().sum::<f64>() / n;
    let max = occ.iter().copied().fold(0.0, f64::max);
    let half = occ.iter().filter(|&&o| o >= 0.5).count();
    println!("gaussians {}", set.len());
    println!("voxels {}", occ.len());
    println!("occupancy.mean {mean:.9}");
    println!("occupancy.max {max:.9}");
    println!("occupancy.ge_half {half}");
    if a.compare_dense {
        let dense = splat::splat(&set, &geom, f64::INFINITY)?;
        let (d_occ, d_feat) = grid.max_abs_diff(&dense)?;
        println!("dense.max_abs_diff.occupancy {d_occ:.3e}");
        println!("dense.max_abs_diff.features {d_feat:.3e}");
    }
    Ok(())
}

fn labelgen_cmd(a: LabelgenArgs) -> Result<()> {
    let mut params = load_config(a.config.as_deref())?.labelgen;
    if let Some(m) = a.margin {
        params.margin = m;
    }
    if let Some(d) = a.max_distance {
        params.max_distance = d;
    }
    let semantic = io::read_ov4d(&a.semantics)?;
    let bp = a.boxes.display().to_string();
    let file = File::open(&a.boxes).map_err(|e| Error::io(&bp, e))?;
    let boxes = labelgen::read_boxes(BufReader::new(file), &bp)?;
    let outcome = assign_instances(&semantic, &boxes, &params)?;
    io::write_ov4d(&a.out, &outcome.sequence)?;
    println!("unassigned {}", outcome.unassigned);
    Ok(())
}

fn track_cmd(a: TrackArgs) -> Result<()> {
    let method: TrackMethod = a.method.parse()?;
    let mut params = load_config(a.config.as_deref())?.tracker;
    if let Some(v) = a.min_iou {
        params.min_iou = v;
        params.kalman.min_iou = v;
    }
    if let Some(v) = a.min_sim {
        params.min_sim = v;
    }
    if let Some(v) = a.max_misses {
        params.kalman.max_misses = v;
    }
    let seq = io::read_ov4d(&a.pred)?;
    let embeddings = a
        .embeddings
        .as_deref()
        .map(|p| io::read_embeddings(p, seq.len()))
        .transpose()?;
    let out = track::track(&seq, method, &params, embeddings.as_deref())?;
    io::write_ov4d(&a.out, &out)
}

fn sim_cmd(a: SimArgs) -> Result<()> {
    let sp = a.script.display().to_string();
    let text = std::fs::read_to_string(&a.script).map_err(|e| Error::io(&sp, e))?;
    let script = SceneScript::from_toml(&text, &sp)?;
    let rendered = sim::render(&script)?;
    io::write_ov4d(&a.out_gt, &rendered.ground_truth)?;
    if let Some(p) = a.out_boxes {
        let ps = p.display().to_string();
        let f = File::create(&p).map_err(|e| Error::io(&ps, e))?;
        let mut w = BufWriter::new(f);
        labelgen::write_boxes(&mut w, &rendered.boxes, &ps)?;
        w.flush().map_err(|e| Error::io(&ps, e))?;
    }
    Ok(())
}

fn corrupt_cmd(a: CorruptArgs) -> Result<()> {
    let ops = sim::parse_ops(&a.ops)?;
    let seq = io::read_ov4d(&a.input)?;
    let out = sim::corrupt(&seq, &ops, a.seed)?;
    io::write_ov4d(&a.out, &out)
}

fn infer_cmd(a: InferArgs) -> Result<()> {
    let mut params = load_config(a.config.as_deref())?.inference;
    if let Some(m) = &a.mode {
        params.mode = match m.as_str() {
            "split" => Aggregation::Split,
            "unified" => Aggregation::Unified,
            other => return Err(Error::Argument(format!("unknown mode {other:?} (split, unified)"))),
        };
    }
    if let Some(t) = a.threshold {
        params.threshold = t;
    }
    if let Some(t) = a.mask_threshold {
        params.mask_threshold = t;
    }
    let reference = io::read_ov4d(&a.reference)?;
    let frames = a
        .queries
        .iter()
        .map(|p| io::read_qout(p))
        .collect::<Result<Vec<_>>>()?;
    let (geom, spec) = (reference.geometry(), reference.spec());
    let out = if a.per_frame {
        infer::per_frame_ids(&frames, geom, spec, &params)?
    } else {
        infer::tracked_by_query(&frames, geom, spec, &params)?
    };
    io::write_ov4d(&a.out, &out)
}
