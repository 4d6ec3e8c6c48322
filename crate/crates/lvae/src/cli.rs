//! Command-line surface and pipeline orchestration.
//!
//! Exit codes: 0 success, 1 experiment verdict failure, 2 usage error,
//! 3 runtime error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{
    self, enumerate_default_corpus, read_manifest_csv, DatasetManifest, UnitCellImage,
    DEFAULT_IMAGE_SIZE,
};
use crate::error::{Error, Result};
use crate::io::model_file::{load_model, save_model};
use crate::io::{pgm, write_atomic};
use crate::latent::{
    compute_latent_stats, fit_pca, generate_transition, grid_interpolate, project,
    TransitionRegion,
};
use crate::nn::AdamHyper;
use crate::smoothness::{grid_line_smoothness, smoothness, SmoothnessReport};
use crate::stats::{
    analyze_sweep, format_report, records_to_csv, run_sweep, DEFAULT_DISTANCES,
    DEFAULT_POINT_COUNTS, DEFAULT_TRIALS_PER_CELL,
};
use crate::vae::{encode, train_with_observer, ModelWeights, VaeConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lvae",
    about = "Strut-lattice unit cells, a small convolutional VAE, latent-space transitions, and smoothness analysis",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic unit-cell corpus (415 PGM images + manifest).
    GenData(GenDataArgs),
    /// Train the VAE on a generated corpus and save the model.
    Train(TrainArgs),
    /// Decode the latent line between two cells into transition frames.
    Interpolate(InterpolateArgs),
    /// Decode a latent mesh among four corner cells and score its lines.
    Grid(GridArgs),
    /// Score the smoothness of an ordered directory of PGM frames.
    Smoothness(SmoothnessArgs),
    /// Run the distance x intervals sweep and the OLS analysis.
    Experiment(ExperimentArgs),
    /// Project the encoded corpus to 2D via PCA and export a scatter CSV.
    Pca(PcaArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Output directory for images and manifest.csv.
    #[arg(long)]
    out: PathBuf,
    /// Image resolution (pixels per side).
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    size: usize,
    /// Seed recorded in the manifest.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus directory produced by gen-data.
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    latent_dim: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.85)]
    train_fraction: f64,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Image resolution the corpus was generated at.
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    image_size: usize,
    /// Print per-epoch losses.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct InterpolateArgs {
    #[arg(long)]
    model: PathBuf,
    /// First endpoint cell (PGM).
    #[arg(long)]
    cell_a: PathBuf,
    /// Second endpoint cell (PGM).
    #[arg(long)]
    cell_b: PathBuf,
    /// Total decoded frames, endpoints included.
    #[arg(long, default_value_t = 10)]
    n_points: usize,
    /// Output directory for frames and the montage.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    #[allow(dead_code)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corner cells in order top-left, top-right, bottom-left, bottom-right.
    #[arg(long = "corner", num_args = 1, action = clap::ArgAction::Append)]
    corners: Vec<PathBuf>,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    #[allow(dead_code)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SmoothnessArgs {
    /// Directory of PGM frames, ordered by lexicographic file name.
    #[arg(long)]
    frames: PathBuf,
    /// Emit JSON lines instead of the table.
    #[arg(long)]
    json: bool,
    #[arg(long, default_value_t = 0)]
    #[allow(dead_code)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    model: PathBuf,
    /// Output directory for trials.csv, report.txt, and report.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Whitened endpoint distances in standard-deviation units.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DISTANCES)]
    distances: Vec<f64>,
    /// Transition lengths (decoded frames, endpoints included).
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_POINT_COUNTS)]
    point_counts: Vec<usize>,
    /// Trials per (distance, point-count) cell.
    #[arg(long, default_value_t = DEFAULT_TRIALS_PER_CELL)]
    trials: usize,
}

#[derive(Debug, Args)]
struct PcaArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corpus directory produced by gen-data.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path (`pc1,pc2,label`).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    #[allow(dead_code)]
    seed: u64,
}

/// Parses argv and runs the selected command, mapping failures to exit
/// codes. Clap prints its own usage messages.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            let code = if e.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::GenData(args) => gen_data(args),
        Command::Train(args) => run_train(args),
        Command::Interpolate(args) => interpolate(args),
        Command::Grid(args) => grid(args),
        Command::Smoothness(args) => score_frames(args),
        Command::Experiment(args) => experiment(args),
        Command::Pca(args) => pca(args),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn gen_data(args: GenDataArgs) -> Result<i32> {
    ensure_dir(&args.out)?;
    let manifest = enumerate_default_corpus(args.size, args.seed)?;
    for entry in &manifest.entries {
        let image = dataset::rasterize_cell(&entry.spec, args.size)?;
        pgm::write_cell(&args.out.join(&entry.path), &image)?;
    }
    dataset::write_manifest_csv(&manifest, &args.out.join("manifest.csv"))?;
    println!(
        "wrote {} unit cells ({}x{}) and manifest.csv to {}",
        manifest.entries.len(),
        args.size,
        args.size,
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn load_corpus(dir: &Path, image_size: usize, seed: u64) -> Result<(DatasetManifest, Vec<UnitCellImage>)> {
    let manifest = read_manifest_csv(&dir.join("manifest.csv"), image_size, seed)?;
    let images = manifest
        .entries
        .iter()
        .map(|e| pgm::read_cell(&dir.join(&e.path)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, images))
}

fn run_train(args: TrainArgs) -> Result<i32> {
    let (_, images) = load_corpus(&args.data, args.image_size, args.seed)?;
    let config = VaeConfig {
        image_size: args.image_size,
        latent_dim: args.latent_dim,
        batch_size: args.batch_size,
        train_fraction: args.train_fraction,
        patience_epochs: args.patience,
        max_epochs: args.max_epochs,
        seed: args.seed,
        adam: AdamHyper {
            step_size: args.learning_rate,
            ..AdamHyper::default()
        },
        ..VaeConfig::default()
    };
    let verbose = args.verbose;
    let (mut weights, history) = train_with_observer(&images, &config, |e| {
        if verbose {
            println!(
                "epoch {:>4}  train {:>10.4}  val {:>10.4}",
                e.epoch, e.train_loss, e.val_loss
            );
        }
    })?;
    weights.latent_stats = Some(compute_latent_stats(&weights, &images)?);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    save_model(&weights, &args.out)?;
    println!(
        "trained {} epochs; best validation loss {:.4} at epoch {}; saved {}",
        history.len(),
        weights.metadata.best_val_loss,
        weights.metadata.best_epoch,
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn load_model_checked(path: &Path) -> Result<ModelWeights> {
    load_model(path)
}

fn interpolate(args: InterpolateArgs) -> Result<i32> {
    let weights = load_model_checked(&args.model)?;
    let cell_a = pgm::read_cell(&args.cell_a)?;
    let cell_b = pgm::read_cell(&args.cell_b)?;
    let region = generate_transition(&weights, &cell_a, &cell_b, args.n_points)?;
    let frames_dir = args.out.join("frames");
    ensure_dir(&frames_dir)?;
    for (i, frame) in region.frames().iter().enumerate() {
        pgm::write_cell(&frames_dir.join(format!("frame_{i:03}.pgm")), frame)?;
    }
    pgm::write(&args.out.join("montage.pgm"), &pgm::montage(region.frames())?)?;
    println!(
        "wrote {} frames to {} and montage.pgm to {}",
        region.n_points(),
        frames_dir.display(),
        args.out.display()
    );
    if region.n_points() >= 4 {
        let report = smoothness(&region)?;
        println!("smoothness: {:.3}", report.smoothness);
    }
    Ok(EXIT_OK)
}

fn grid(args: GridArgs) -> Result<i32> {
    if args.corners.len() != 4 {
        return Err(Error::Validation(format!(
            "grid needs exactly 4 --corner cells (top-left, top-right, bottom-left, bottom-right), got {}",
            args.corners.len()
        )));
    }
    let weights = load_model_checked(&args.model)?;
    let corners: Vec<UnitCellImage> = args
        .corners
        .iter()
        .map(|p| pgm::read_cell(p))
        .collect::<Result<Vec<_>>>()?;
    let corners: [UnitCellImage; 4] = corners.try_into().expect("length checked above");
    let mesh = grid_interpolate(&weights, &corners, args.rows, args.cols)?;
    let cells_dir = args.out.join("cells");
    ensure_dir(&cells_dir)?;
    for (r, row) in mesh.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            pgm::write_cell(&cells_dir.join(format!("cell_r{r:02}_c{c:02}.pgm")), cell)?;
        }
    }
    pgm::write(&args.out.join("montage.pgm"), &pgm::montage_grid(&mesh)?)?;

    let (row_scores, col_scores) = grid_line_smoothness(&mesh)?;
    let mut csv = String::from("kind,index,smoothness\n");
    println!("line smoothness:");
    for (i, s) in row_scores.iter().enumerate() {
        println!("  row {i}: {s:.3}");
        let _ = writeln!(csv, "row,{i},{s}");
    }
    for (i, s) in col_scores.iter().enumerate() {
        println!("  col {i}: {s:.3}");
        let _ = writeln!(csv, "col,{i},{s}");
    }
    write_atomic(&args.out.join("line_smoothness.csv"), csv.as_bytes())?;
    println!(
        "wrote {}x{} mesh, montage.pgm, line_smoothness.csv to {}",
        args.rows,
        args.cols,
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn read_frame_dir(dir: &Path) -> Result<TransitionRegion> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Validation(format!(
            "no .pgm frames found in {}",
            dir.display()
        )));
    }
    let frames = paths
        .iter()
        .map(|p| pgm::read_cell(p))
        .collect::<Result<Vec<_>>>()?;
    TransitionRegion::new(frames)
}

fn print_smoothness_table(report: &SmoothnessReport) {
    println!("pair  rmse_x    rmse_y    rmse_z    normalized");
    for i in 0..report.normalized.len() {
        println!(
            "{:>4}  {:<8.5} {:<8.5} {:<8.5} {:<10.7}",
            i, report.rmse_x[i], report.rmse_y[i], report.rmse_z[i], report.normalized[i]
        );
    }
    println!("rmse_max: {}", report.rmse_max);
    println!("smoothness: {:.3}", report.smoothness);
}

fn score_frames(args: SmoothnessArgs) -> Result<i32> {
    let region = read_frame_dir(&args.frames)?;
    let report = smoothness(&region)?;
    if args.json {
        for i in 0..report.normalized.len() {
            println!(
                "{}",
                serde_json::json!({
                    "pair": i,
                    "rmse_x": report.rmse_x[i],
                    "rmse_y": report.rmse_y[i],
                    "rmse_z": report.rmse_z[i],
                    "normalized": report.normalized[i],
                })
            );
        }
        println!(
            "{}",
            serde_json::json!({
                "rmse_max": report.rmse_max,
                "smoothness": report.smoothness,
            })
        );
    } else {
        print_smoothness_table(&report);
    }
    Ok(EXIT_OK)
}

fn experiment(args: ExperimentArgs) -> Result<i32> {
    let weights = load_model_checked(&args.model)?;
    let stats = weights.latent_stats.clone().ok_or_else(|| {
        Error::Config(
            "model carries no latent statistics; retrain with this tool to embed them".into(),
        )
    })?;
    let records = run_sweep(
        &weights,
        &stats,
        &args.distances,
        &args.point_counts,
        args.trials,
        args.seed,
    )?;
    let report = analyze_sweep(&records)?;
    ensure_dir(&args.out)?;
    write_atomic(&args.out.join("trials.csv"), &records_to_csv(&records)?)?;
    let text = format_report(&report);
    write_atomic(&args.out.join("report.txt"), text.as_bytes())?;
    let json = serde_json::to_vec_pretty(&report)
        .map_err(|e| Error::Validation(format!("report serialization: {e}")))?;
    write_atomic(&args.out.join("report.json"), &json)?;
    print!("{text}");
    if report.verdict.pass() {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_VERDICT_FAIL)
    }
}

fn pca(args: PcaArgs) -> Result<i32> {
    let weights = load_model_checked(&args.model)?;
    let (manifest, images) = load_corpus(&args.data, weights.image_size, 0)?;
    let mut points = Vec::with_capacity(images.len());
    for img in &images {
        points.push(encode(&weights, img)?.0);
    }
    let projection = fit_pca(&points)?;
    let mut csv = String::from("pc1,pc2,label\n");
    for (point, entry) in points.iter().zip(&manifest.entries) {
        let [pc1, pc2] = project(&projection, point);
        let _ = writeln!(csv, "{pc1},{pc2},{}", entry.spec.family);
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_atomic(&args.out, csv.as_bytes())?;
    println!(
        "wrote {} projected points to {}",
        points.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}
