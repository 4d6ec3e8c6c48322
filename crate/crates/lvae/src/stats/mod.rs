//! The distance-by-intervals experiment: sample endpoint pairs at controlled
//! whitened latent distances, sweep interval counts, score each decoded
//! transition, and fit the interaction OLS model to the per-cell means.

pub mod ols;
pub mod special;

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::latent::{transition_from_latent, LatentStats};
use crate::rng::{derive_seed, splitmix64};
use crate::smoothness::smoothness;
use crate::vae::{LatentPoint, ModelWeights};

pub use ols::{ols_fit, ols_fit_points, OlsResult, COLUMN_NAMES};

/// Default sweep grid: whitened distances 1..6, three interval counts,
/// 40 trials per cell.
pub const DEFAULT_DISTANCES: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
pub const DEFAULT_POINT_COUNTS: [usize; 3] = [5, 10, 15];
pub const DEFAULT_TRIALS_PER_CELL: usize = 40;

/// One sweep observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    /// Whitened latent distance between the endpoints, in standard
    /// deviation units.
    pub distance_sd: f64,
    /// Decoded frames per transition, endpoints included.
    pub n_points: usize,
    pub trial_index: usize,
    /// Seed of the endpoint-direction draw, for replaying single trials.
    pub direction_seed: u64,
    pub smoothness: f64,
}

/// Draws a uniformly random whitened direction and places the endpoints at
/// +-(distance/2) along it around the latent mean, then maps back to latent
/// coordinates. The whitened separation of the returned pair is exactly
/// `distance_sd`, and both endpoints stay within +-3 whitened units per
/// coordinate for distances up to 6.
pub fn sample_endpoint_pair(
    stats: &LatentStats,
    distance_sd: f64,
    rng: &mut impl Rng,
) -> Result<(LatentPoint, LatentPoint)> {
    if !(distance_sd > 0.0 && distance_sd <= 6.0) {
        return Err(Error::Validation(format!(
            "distance must lie in (0, 6] standard deviations, got {distance_sd}"
        )));
    }
    let dim = stats.dim();
    let direction = loop {
        let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            break raw.into_iter().map(|v| v / norm).collect::<Vec<f64>>();
        }
    };
    let half = distance_sd / 2.0;
    let pos: Vec<f64> = direction.iter().map(|u| half * u).collect();
    let neg: Vec<f64> = direction.iter().map(|u| -half * u).collect();
    Ok((stats.unwhiten(&pos), stats.unwhiten(&neg)))
}

/// Runs the full sweep. Every (distance, point-count) cell draws its trials
/// from an independently derived seed, so cells are order-independent and
/// single trials can be replayed from their recorded direction seed.
pub fn run_sweep(
    weights: &ModelWeights,
    stats: &LatentStats,
    distances: &[f64],
    point_counts: &[usize],
    trials_per_cell: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if distances.is_empty() || point_counts.is_empty() {
        return Err(Error::Validation("sweep grid is empty".into()));
    }
    if trials_per_cell == 0 {
        return Err(Error::Validation("trials_per_cell must be at least 1".into()));
    }
    if let Some(&n) = point_counts.iter().find(|&&n| n < 4) {
        return Err(Error::Validation(format!(
            "point counts must be at least 4 for the smoothness metric, got {n}"
        )));
    }
    let mut records = Vec::with_capacity(distances.len() * point_counts.len() * trials_per_cell);
    for &distance in distances {
        for &n_points in point_counts {
            let cell_tag = splitmix64(distance.to_bits()) ^ splitmix64(n_points as u64);
            let mut cell_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, cell_tag));
            for trial_index in 0..trials_per_cell {
                let direction_seed = cell_rng.next_u64();
                let mut trial_rng = ChaCha8Rng::seed_from_u64(direction_seed);
                let (za, zb) = sample_endpoint_pair(stats, distance, &mut trial_rng)?;
                let region =
                    transition_from_latent(weights, &za, &zb, n_points).map_err(|e| {
                        Error::Analysis(format!(
                            "trial (d={distance}, n={n_points}, trial={trial_index}): {e}"
                        ))
                    })?;
                let report = smoothness(&region).map_err(|e| {
                    Error::Analysis(format!(
                        "trial (d={distance}, n={n_points}, trial={trial_index}): {e}"
                    ))
                })?;
                records.push(TrialRecord {
                    distance_sd: distance,
                    n_points,
                    trial_index,
                    direction_seed,
                    smoothness: report.smoothness,
                });
            }
        }
    }
    Ok(records)
}

/// Mean smoothness per (distance, n_points) cell, in sweep order.
pub fn per_cell_means(records: &[TrialRecord]) -> Vec<(f64, usize, f64)> {
    let mut cells: Vec<(f64, usize, f64, usize)> = Vec::new();
    for r in records {
        match cells
            .iter_mut()
            .find(|(d, n, _, _)| *d == r.distance_sd && *n == r.n_points)
        {
            Some(cell) => {
                cell.2 += r.smoothness;
                cell.3 += 1;
            }
            None => cells.push((r.distance_sd, r.n_points, r.smoothness, 1)),
        }
    }
    cells
        .into_iter()
        .map(|(d, n, sum, count)| (d, n, sum / count as f64))
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Validation(
            "Spearman needs two equally sized samples of at least 2".into(),
        ));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::Analysis("constant sample has no rank correlation".into()));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// The four structural checks against the reference regression: distance
/// hurts smoothness significantly, interval count alone does not, the
/// interaction helps significantly, and the fit explains most variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub distance_negative_significant: bool,
    pub intervals_not_significant: bool,
    pub interaction_positive_significant: bool,
    pub r_squared_at_least_0_8: bool,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.distance_negative_significant
            && self.intervals_not_significant
            && self.interaction_positive_significant
            && self.r_squared_at_least_0_8
    }
}

/// Evaluates the verdict thresholds: distance coefficient negative with
/// p < 0.01, intervals not significant at 0.05, interaction positive with
/// p < 0.01, R^2 >= 0.8.
pub fn evaluate_verdict(fit: &OlsResult) -> Verdict {
    Verdict {
        distance_negative_significant: fit.coefficients[1] < 0.0 && fit.p_values[1] < 0.01,
        intervals_not_significant: fit.p_values[2] > 0.05,
        interaction_positive_significant: fit.coefficients[3] > 0.0 && fit.p_values[3] < 0.01,
        r_squared_at_least_0_8: fit.r_squared >= 0.8,
    }
}

/// Everything the experiment emits besides the raw trial CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub cell_means: Vec<CellMean>,
    pub fit: OlsResult,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellMean {
    pub distance_sd: f64,
    pub n_points: usize,
    pub mean_smoothness: f64,
}

/// Fits the per-cell means and assembles the report.
pub fn analyze_sweep(records: &[TrialRecord]) -> Result<ExperimentReport> {
    let means = per_cell_means(records);
    let points: Vec<(f64, f64, f64)> = means
        .iter()
        .map(|&(d, n, m)| (d, n as f64, m))
        .collect();
    let fit = ols_fit_points(&points)?;
    let verdict = evaluate_verdict(&fit);
    Ok(ExperimentReport {
        cell_means: means
            .into_iter()
            .map(|(d, n, m)| CellMean {
                distance_sd: d,
                n_points: n,
                mean_smoothness: m,
            })
            .collect(),
        fit,
        verdict,
    })
}

/// Human-readable report: per-cell means, the coefficient table, and the
/// verdict block.
pub fn format_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Per-cell mean smoothness");
    let _ = writeln!(out, "  distance_sd  n_points  mean_smoothness");
    for c in &report.cell_means {
        let _ = writeln!(
            out,
            "  {:>11.1}  {:>8}  {:>15.3}",
            c.distance_sd, c.n_points, c.mean_smoothness
        );
    }
    let fit = &report.fit;
    let _ = writeln!(out);
    let _ = writeln!(out, "OLS: smoothness ~ distance * intervals (n = {}, dof = {})", fit.n, fit.dof);
    let _ = writeln!(out, "  {:<22} {:>12} {:>12} {:>9} {:>12}", "term", "coefficient", "std error", "t", "p");
    let labels = [
        "Constant",
        "Distance (sd units)",
        "Transition intervals",
        "Interaction",
    ];
    for i in 0..4 {
        let _ = writeln!(
            out,
            "  {:<22} {:>12.4} {:>12.4} {:>9.3} {:>12.4e}",
            labels[i], fit.coefficients[i], fit.std_errors[i], fit.t_stats[i], fit.p_values[i]
        );
    }
    let _ = writeln!(out, "  R^2 = {:.4}", fit.r_squared);
    let v = &report.verdict;
    let _ = writeln!(out);
    let _ = writeln!(out, "Verdict");
    let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        out,
        "  [{}] distance coefficient < 0 with p < 0.01",
        mark(v.distance_negative_significant)
    );
    let _ = writeln!(
        out,
        "  [{}] intervals coefficient not significant at 0.05",
        mark(v.intervals_not_significant)
    );
    let _ = writeln!(
        out,
        "  [{}] interaction coefficient > 0 with p < 0.01",
        mark(v.interaction_positive_significant)
    );
    let _ = writeln!(out, "  [{}] R^2 >= 0.8", mark(v.r_squared_at_least_0_8));
    let _ = writeln!(out, "  overall: {}", mark(v.pass()));
    out
}

/// Serializes records as CSV with header `distance_sd,n_points,trial,smoothness`.
/// Floats use the shortest round-trippable representation.
pub fn records_to_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["distance_sd", "n_points", "trial", "smoothness"])
        .map_err(|e| Error::Validation(format!("trial CSV: {e}")))?;
    for r in records {
        writer
            .write_record([
                r.distance_sd.to_string(),
                r.n_points.to_string(),
                r.trial_index.to_string(),
                r.smoothness.to_string(),
            ])
            .map_err(|e| Error::Validation(format!("trial CSV: {e}")))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Validation(format!("trial CSV: {e}")))
}

/// Parses a trial CSV written by [`records_to_csv`]. Direction seeds are not
/// part of the schema and come back as zero.
pub fn records_from_csv(bytes: &[u8]) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Validation(format!("malformed trial row: {e}")))?;
        if row.len() != 4 {
            return Err(Error::Validation(format!(
                "trial row has {} fields, expected 4",
                row.len()
            )));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|e| Error::Validation(format!("trial field {name}: {e}")))
        };
        records.push(TrialRecord {
            distance_sd: field(0, "distance_sd")?,
            n_points: field(1, "n_points")? as usize,
            trial_index: field(2, "trial")? as usize,
            direction_seed: 0,
            smoothness: field(3, "smoothness")?,
        });
    }
    Ok(records)
}
