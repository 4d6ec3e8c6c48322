//! Latent-space machinery: linear interpolation between encoded endpoints,
//! bilinear mesh-grid interpolation among four corners, corpus latent
//! statistics, and a 2D PCA projection for visualization.
//!
//! Interpolations always use posterior means, never sampled latents, so
//! transitions are deterministic and repeatable.

use serde::{Deserialize, Serialize};

use crate::dataset::UnitCellImage;
use crate::error::{Error, Result};
use crate::vae::{decode, encode, LatentPoint, ModelWeights};

/// An ordered sequence of frames morphing one topology into another.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRegion {
    frames: Vec<UnitCellImage>,
}

impl TransitionRegion {
    pub fn new(frames: Vec<UnitCellImage>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Validation("a transition needs at least 2 frames".into()))?;
        if frames.len() < 2 {
            return Err(Error::Validation("a transition needs at least 2 frames".into()));
        }
        let size = first.size();
        if frames.iter().any(|f| f.size() != size) {
            return Err(Error::Validation("transition frames differ in size".into()));
        }
        Ok(TransitionRegion { frames })
    }

    pub fn frames(&self) -> &[UnitCellImage] {
        &self.frames
    }

    pub fn n_points(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_size(&self) -> usize {
        self.frames[0].size()
    }
}

/// Evenly spaced points from `za` to `zb`, endpoints included.
///
/// Weights are formed symmetrically (`(n-1-k)/(n-1)` and `k/(n-1)`), so the
/// reversed call produces bit-identical points in reverse order and the
/// endpoints are returned exactly.
pub fn linear_interpolate(za: &LatentPoint, zb: &LatentPoint, n_points: usize) -> Result<Vec<LatentPoint>> {
    if n_points < 2 {
        return Err(Error::Validation(format!(
            "interpolation needs at least 2 points, got {n_points}"
        )));
    }
    if za.dim() != zb.dim() {
        return Err(Error::Validation(format!(
            "endpoint dimensions disagree: {} vs {}",
            za.dim(),
            zb.dim()
        )));
    }
    let steps = (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|k| {
            let wa = (n_points - 1 - k) as f64 / steps;
            let wb = k as f64 / steps;
            LatentPoint::new(
                za.coords
                    .iter()
                    .zip(&zb.coords)
                    .map(|(a, b)| wa * a + wb * b)
                    .collect(),
            )
        })
        .collect())
}

/// Decodes the straight latent path between two latent endpoints.
pub fn transition_from_latent(
    weights: &ModelWeights,
    za: &LatentPoint,
    zb: &LatentPoint,
    n_points: usize,
) -> Result<TransitionRegion> {
    let frames = linear_interpolate(za, zb, n_points)?
        .iter()
        .map(|z| decode(weights, z))
        .collect::<Result<Vec<_>>>()?;
    TransitionRegion::new(frames)
}

/// Encode both cells, interpolate between the posterior means, decode every
/// point. Frame 0 is exactly the reconstruction of `cell_a`.
pub fn generate_transition(
    weights: &ModelWeights,
    cell_a: &UnitCellImage,
    cell_b: &UnitCellImage,
    n_points: usize,
) -> Result<TransitionRegion> {
    let (mu_a, _) = encode(weights, cell_a)?;
    let (mu_b, _) = encode(weights, cell_b)?;
    transition_from_latent(weights, &mu_a, &mu_b, n_points)
}

/// Bilinear latent interpolation among four encoded corners, decoded into a
/// rows x cols mesh. Corner order: `[top-left, top-right, bottom-left,
/// bottom-right]`. Each returned row is the decoded linear interpolation
/// between that row's own edge latents.
pub fn grid_interpolate(
    weights: &ModelWeights,
    corners: &[UnitCellImage; 4],
    rows: usize,
    cols: usize,
) -> Result<Vec<Vec<UnitCellImage>>> {
    if rows < 2 || cols < 2 {
        return Err(Error::Validation(format!(
            "grid needs at least 2 rows and 2 columns, got {rows}x{cols}"
        )));
    }
    let mus = corners
        .iter()
        .map(|c| encode(weights, c).map(|(mu, _)| mu))
        .collect::<Result<Vec<_>>>()?;
    let left_edge = linear_interpolate(&mus[0], &mus[2], rows)?;
    let right_edge = linear_interpolate(&mus[1], &mus[3], rows)?;
    left_edge
        .iter()
        .zip(&right_edge)
        .map(|(l, r)| {
            linear_interpolate(l, r, cols)?
                .iter()
                .map(|z| decode(weights, z))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Per-dimension mean and population standard deviation of the encoded
/// (posterior mean) corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LatentStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Maps a latent point into whitened coordinates.
    pub fn whiten(&self, z: &LatentPoint) -> Vec<f64> {
        z.coords
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((z, m), s)| (z - m) / s)
            .collect()
    }

    /// Maps whitened coordinates back to latent coordinates.
    pub fn unwhiten(&self, w: &[f64]) -> LatentPoint {
        LatentPoint::new(
            w.iter()
                .zip(&self.mean)
                .zip(&self.std)
                .map(|((w, m), s)| m + s * w)
                .collect(),
        )
    }

    /// Euclidean distance between two latent points in whitened coordinates.
    pub fn whitened_distance(&self, a: &LatentPoint, b: &LatentPoint) -> f64 {
        self.whiten(a)
            .iter()
            .zip(self.whiten(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Encodes the corpus and computes per-dimension mean and population
/// standard deviation of the posterior means.
pub fn compute_latent_stats(weights: &ModelWeights, corpus: &[UnitCellImage]) -> Result<LatentStats> {
    if corpus.is_empty() {
        return Err(Error::Validation("cannot compute latent stats of an empty corpus".into()));
    }
    let dim = weights.latent_dim;
    let n = corpus.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut points = Vec::with_capacity(corpus.len());
    for img in corpus {
        let (mu, _) = encode(weights, img)?;
        for (m, c) in mean.iter_mut().zip(&mu.coords) {
            *m += c / n;
        }
        points.push(mu);
    }
    let mut var = vec![0.0; dim];
    for p in &points {
        for (v, (c, m)) in var.iter_mut().zip(p.coords.iter().zip(&mean)) {
            *v += (c - m) * (c - m) / n;
        }
    }
    let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    if let Some(d) = std.iter().position(|&s| s <= 0.0) {
        return Err(Error::Analysis(format!(
            "latent dimension {d} is degenerate (zero standard deviation)"
        )));
    }
    Ok(LatentStats { mean, std })
}

/// Rank-2 PCA of latent points: mean, two orthonormal component rows with
/// descending eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    /// Set when the second eigenvalue vanishes: the cloud is essentially
    /// one-dimensional and the second component is an arbitrary orthogonal
    /// direction.
    pub degenerate: bool,
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns (eigenvalues, eigenvectors as columns).
fn jacobi_eigen_sym(mut a: Vec<Vec<f64>>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q].abs())
            .sum();
        if off < 1e-13 {
            let lambda = (0..n).map(|i| a[i][i]).collect();
            return Ok((lambda, v));
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    Err(Error::Analysis("Jacobi eigendecomposition did not converge".into()))
}

/// Fits a 2-component PCA to latent points via the mean-centered population
/// covariance and a Jacobi eigendecomposition. The largest-magnitude entry
/// of each component is made positive.
pub fn fit_pca(points: &[LatentPoint]) -> Result<PcaProjection> {
    if points.len() < 3 {
        return Err(Error::Analysis(format!(
            "PCA needs at least 3 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].dim();
    if dim < 2 {
        return Err(Error::Analysis("PCA needs at least 2 latent dimensions".into()));
    }
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::Analysis("latent points differ in dimension".into()));
    }
    let n = points.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, c) in mean.iter_mut().zip(&p.coords) {
            *m += c / n;
        }
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for p in points {
        let centered: Vec<f64> = p.coords.iter().zip(&mean).map(|(c, m)| c - m).collect();
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += centered[i] * centered[j] / n;
            }
        }
    }
    let (lambda, vectors) = jacobi_eigen_sym(cov)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));

    let scale = lambda[order[0]].abs().max(1.0);
    if lambda[order[0]] <= 1e-12 * scale {
        return Err(Error::Analysis(
            "degenerate covariance: no direction with positive variance".into(),
        ));
    }
    let mut components: [Vec<f64>; 2] = [vec![0.0; dim], vec![0.0; dim]];
    let mut eigenvalues = [0.0; 2];
    for (slot, &idx) in order.iter().take(2).enumerate() {
        let mut comp: Vec<f64> = (0..dim).map(|r| vectors[r][idx]).collect();
        let lead = comp
            .iter()
            .cloned()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            for c in &mut comp {
                *c = -*c;
            }
        }
        components[slot] = comp;
        eigenvalues[slot] = lambda[idx].max(0.0);
    }
    let degenerate = eigenvalues[1] <= 1e-12 * scale;
    Ok(PcaProjection {
        mean,
        components,
        eigenvalues,
        degenerate,
    })
}

/// Projects a latent point onto the two principal components.
pub fn project(pca: &PcaProjection, z: &LatentPoint) -> [f64; 2] {
    let centered: Vec<f64> = z.coords.iter().zip(&pca.mean).map(|(c, m)| c - m).collect();
    let dot = |comp: &[f64]| comp.iter().zip(&centered).map(|(a, b)| a * b).sum();
    [dot(&pca.components[0]), dot(&pca.components[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::{ModelWeights, VaeConfig};
    use crate::dataset::{rasterize_cell, ShapeFamily, ShapeSpec};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn test_weights(seed: u64) -> ModelWeights {
        ModelWeights::init(&VaeConfig::test_scale(seed)).unwrap()
    }

    fn cell(family: ShapeFamily, density: f64) -> UnitCellImage {
        rasterize_cell(&ShapeSpec::new(family, density, 0).unwrap(), 8).unwrap()
    }

    fn point(coords: &[f64]) -> LatentPoint {
        LatentPoint::new(coords.to_vec())
    }

    #[test]
    fn two_point_interpolation_returns_exact_endpoints() {
        let za = point(&[0.25, -1.5, 3.0, 0.1]);
        let zb = point(&[1.0, 2.0, -0.5, 0.9]);
        let pts = linear_interpolate(&za, &zb, 2).unwrap();
        assert_eq!(pts, vec![za, zb]);
    }

    #[test]
    fn midpoint_of_three_point_interpolation() {
        let za = point(&[0.0, 0.0, 0.0, 0.0]);
        let zb = point(&[2.0, 0.0, 0.0, 0.0]);
        let pts = linear_interpolate(&za, &zb, 3).unwrap();
        assert_eq!(pts[1], point(&[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn consecutive_differences_are_uniform() {
        let za = point(&[0.3, -0.9, 2.2, 1.0]);
        let zb = point(&[-1.1, 0.4, 0.0, 3.5]);
        let n = 7;
        let pts = linear_interpolate(&za, &zb, n).unwrap();
        let step: Vec<f64> = za
            .coords
            .iter()
            .zip(&zb.coords)
            .map(|(a, b)| (b - a) / (n - 1) as f64)
            .collect();
        for pair in pts.windows(2) {
            for d in 0..4 {
                let diff = pair[1].coords[d] - pair[0].coords[d];
                assert!((diff - step[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_point_interpolation_is_rejected() {
        let z = point(&[0.0; 4]);
        assert!(matches!(
            linear_interpolate(&z, &z, 1).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn identical_cells_give_a_constant_transition() {
        let weights = test_weights(1);
        let a = cell(ShapeFamily::XBox, 0.8);
        let region = generate_transition(&weights, &a, &a, 6).unwrap();
        for frame in region.frames() {
            assert_eq!(frame, &region.frames()[0]);
        }
    }

    #[test]
    fn reversed_transition_is_bit_identical_in_reverse() {
        let weights = test_weights(2);
        let a = cell(ShapeFamily::HotDogBox, 0.6);
        let b = cell(ShapeFamily::XBox, 1.0);
        let fwd = generate_transition(&weights, &a, &b, 9).unwrap();
        let rev = generate_transition(&weights, &b, &a, 9).unwrap();
        let reversed: Vec<_> = rev.frames().iter().rev().cloned().collect();
        assert_eq!(fwd.frames(), &reversed[..]);
    }

    #[test]
    fn transition_endpoints_are_exact_reconstructions() {
        let weights = test_weights(3);
        let a = cell(ShapeFamily::Box, 0.4);
        let b = cell(ShapeFamily::PlusBox, 1.0);
        let region = generate_transition(&weights, &a, &b, 5).unwrap();
        let recon_a = decode(&weights, &encode(&weights, &a).unwrap().0).unwrap();
        let recon_b = decode(&weights, &encode(&weights, &b).unwrap().0).unwrap();
        assert_eq!(region.frames()[0], recon_a);
        assert_eq!(region.frames()[4], recon_b);
    }

    #[test]
    fn uniform_grid_from_identical_corners() {
        let weights = test_weights(4);
        let a = cell(ShapeFamily::HamburgerBox, 0.8);
        let corners = [a.clone(), a.clone(), a.clone(), a];
        let grid = grid_interpolate(&weights, &corners, 3, 4).unwrap();
        let reference = &grid[0][0];
        for row in &grid {
            assert_eq!(row.len(), 4);
            for cell in row {
                assert_eq!(cell, reference);
            }
        }
    }

    #[test]
    fn two_by_two_grid_is_exactly_the_corner_reconstructions() {
        let weights = test_weights(5);
        let corners = [
            cell(ShapeFamily::Box, 0.2),
            cell(ShapeFamily::XBox, 0.6),
            cell(ShapeFamily::HotDogBox, 1.0),
            cell(ShapeFamily::HamburgerBox, 0.8),
        ];
        let grid = grid_interpolate(&weights, &corners, 2, 2).unwrap();
        for (k, (r, c)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
            let recon =
                decode(&weights, &encode(&weights, &corners[k]).unwrap().0).unwrap();
            assert_eq!(grid[*r][*c], recon);
        }
    }

    #[test]
    fn grid_first_row_equals_linear_interpolation_of_top_corners() {
        let weights = test_weights(6);
        let corners = [
            cell(ShapeFamily::Box, 0.2),
            cell(ShapeFamily::XBox, 0.6),
            cell(ShapeFamily::HotDogBox, 1.0),
            cell(ShapeFamily::HamburgerBox, 0.8),
        ];
        let grid = grid_interpolate(&weights, &corners, 3, 5).unwrap();
        let line = generate_transition(&weights, &corners[0], &corners[1], 5).unwrap();
        assert_eq!(&grid[0][..], line.frames());
    }

    #[test]
    fn grid_columns_match_their_own_linear_interpolation() {
        let weights = test_weights(7);
        let corners = [
            cell(ShapeFamily::Box, 0.2),
            cell(ShapeFamily::XBox, 0.6),
            cell(ShapeFamily::HotDogBox, 1.0),
            cell(ShapeFamily::PlusBox, 0.8),
        ];
        let (rows, cols) = (4, 3);
        let grid = grid_interpolate(&weights, &corners, rows, cols).unwrap();
        let mus: Vec<LatentPoint> = corners
            .iter()
            .map(|c| encode(&weights, c).unwrap().0)
            .collect();
        let top = linear_interpolate(&mus[0], &mus[1], cols).unwrap();
        let bottom = linear_interpolate(&mus[2], &mus[3], cols).unwrap();
        for c in 0..cols {
            let column = linear_interpolate(&top[c], &bottom[c], rows).unwrap();
            for (r, z) in column.iter().enumerate() {
                let img = decode(&weights, z).unwrap();
                for (a, b) in img.pixels().iter().zip(grid[r][c].pixels()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn latent_stats_detect_degenerate_single_point_corpus() {
        let weights = test_weights(8);
        let one = vec![cell(ShapeFamily::Box, 0.6)];
        assert!(matches!(
            compute_latent_stats(&weights, &one).unwrap_err(),
            Error::Analysis(_)
        ));
    }

    #[test]
    fn latent_stats_are_deterministic_and_whitening_round_trips() {
        let weights = test_weights(9);
        let corpus: Vec<UnitCellImage> = [
            (ShapeFamily::Box, 0.2),
            (ShapeFamily::XBox, 0.6),
            (ShapeFamily::HotDogBox, 1.0),
            (ShapeFamily::PlusBox, 0.4),
        ]
        .iter()
        .map(|&(f, d)| cell(f, d))
        .collect();
        let s1 = compute_latent_stats(&weights, &corpus).unwrap();
        let s2 = compute_latent_stats(&weights, &corpus).unwrap();
        assert_eq!(s1, s2);
        let z = point(&[0.7, -0.2]);
        let back = s1.unwhiten(&s1.whiten(&z));
        for (a, b) in z.coords.iter().zip(&back.coords) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_points_have_zero_mean() {
        // Two latent points symmetric about the origin.
        let pts = [point(&[1.0, -2.0]), point(&[-1.0, 2.0])];
        // Mean lands on the origin regardless of spread.
        let n = pts.len() as f64;
        let mean: Vec<f64> = (0..2)
            .map(|d| pts.iter().map(|p| p.coords[d]).sum::<f64>() / n)
            .collect();
        assert_eq!(mean, vec![0.0, 0.0]);
    }

    #[test]
    fn pca_on_a_line_flags_the_degenerate_second_component() {
        let pts: Vec<LatentPoint> = (0..10)
            .map(|i| point(&[i as f64 - 4.5, 0.0, 0.0, 0.0]))
            .collect();
        let pca = fit_pca(&pts).unwrap();
        assert!(pca.degenerate);
        assert!((pca.components[0][0].abs() - 1.0).abs() < 1e-9);
        assert!(pca.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn pca_eigenpairs_satisfy_the_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<LatentPoint> = (0..200)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
                // Anisotropic cloud: stretch two directions.
                point(&[3.0 * raw[0], 1.5 * raw[1], 0.5 * raw[2], 0.1 * raw[3]])
            })
            .collect();
        let pca = fit_pca(&pts).unwrap();
        assert!(pca.eigenvalues[0] >= pca.eigenvalues[1]);
        // Orthonormality within 1e-9.
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&pca.components[0], &pca.components[0]) - 1.0).abs() < 1e-9);
        assert!((dot(&pca.components[1], &pca.components[1]) - 1.0).abs() < 1e-9);
        assert!(dot(&pca.components[0], &pca.components[1]).abs() < 1e-9);
        // C v = lambda v residual for both components.
        let n = pts.len() as f64;
        let mut cov = vec![vec![0.0; 4]; 4];
        for p in &pts {
            let c: Vec<f64> = p.coords.iter().zip(&pca.mean).map(|(x, m)| x - m).collect();
            for i in 0..4 {
                for j in 0..4 {
                    cov[i][j] += c[i] * c[j] / n;
                }
            }
        }
        for k in 0..2 {
            let v = &pca.components[k];
            let lambda = pca.eigenvalues[k];
            let residual: f64 = (0..4)
                .map(|i| {
                    let cv: f64 = (0..4).map(|j| cov[i][j] * v[j]).sum();
                    (cv - lambda * v[i]).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            assert!(residual < 1e-9, "component {k} residual {residual}");
        }
    }

    #[test]
    fn pca_of_isotropic_cloud_has_similar_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let pts: Vec<LatentPoint> = (0..10_000)
            .map(|_| point(&[
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ]))
            .collect();
        let pca = fit_pca(&pts).unwrap();
        let ratio = pca.eigenvalues[0] / pca.eigenvalues[1];
        assert!(ratio < 1.1, "eigenvalue ratio {ratio}");
    }

    #[test]
    fn projection_is_affine_and_centers_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<LatentPoint> = (0..50)
            .map(|_| point(&[
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ]))
            .collect();
        let pca = fit_pca(&pts).unwrap();
        let at_mean = project(&pca, &point(&pca.mean.clone()));
        assert!(at_mean[0].abs() < 1e-12 && at_mean[1].abs() < 1e-12);

        let (z1, z2) = (point(&[1.0, -0.5, 0.3, 2.0]), point(&[-2.0, 0.7, 1.1, 0.4]));
        let alpha = 0.3;
        let blend = point(
            &z1.coords
                .iter()
                .zip(&z2.coords)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect::<Vec<_>>(),
        );
        let p1 = project(&pca, &z1);
        let p2 = project(&pca, &z2);
        let pb = project(&pca, &blend);
        for d in 0..2 {
            let expected = alpha * p1[d] + (1.0 - alpha) * p2[d];
            assert!((pb[d] - expected).abs() < 1e-9);
        }
    }
}
