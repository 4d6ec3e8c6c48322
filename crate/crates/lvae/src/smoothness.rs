//! Transition smoothness metric.
//!
//! An image sequence is treated as a volume with the frame index as the
//! third axis. Three separable 3x3x3 Sobel kernels produce per-slab gradient
//! responses; root-mean-squared differences between consecutive gradient
//! slabs, normalized by the filter-derived maximum, yield a smoothness
//! percentage where 100 means a perfectly uniform sequence.

use crate::dataset::UnitCellImage;
use crate::error::{Error, Result};
use crate::latent::TransitionRegion;

/// Smoothing profile applied along the two non-derivative axes.
const SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];
/// Central-difference profile applied along the derivative axis.
const DERIV: [f64; 3] = [-1.0, 0.0, 1.0];

/// One 3x3x3 kernel, indexed `[dz][dy][dx]` with index 0 meaning offset -1.
pub type Kernel3 = [[[f64; 3]; 3]; 3];

/// The three separable Sobel kernels; each differentiates along its own
/// axis and smooths along the other two.
#[derive(Debug, Clone, PartialEq)]
pub struct SobelKernel3D {
    pub sx: Kernel3,
    pub sy: Kernel3,
    pub sz: Kernel3,
}

/// Builds the separable kernels: derivative profile (-1, 0, 1) on the
/// kernel's own axis, smoothing profile (1, 2, 1) on the other two. The
/// z-kernel slice at +1 is `[[1,2,1],[2,4,2],[1,2,1]]`, the central slice is
/// all zeros, and the slice at -1 is the negation.
pub fn sobel3d_kernels() -> SobelKernel3D {
    let mut sx = [[[0.0; 3]; 3]; 3];
    let mut sy = sx;
    let mut sz = sx;
    for z in 0..3 {
        for y in 0..3 {
            for x in 0..3 {
                sx[z][y][x] = SMOOTH[z] * SMOOTH[y] * DERIV[x];
                sy[z][y][x] = SMOOTH[z] * DERIV[y] * SMOOTH[x];
                sz[z][y][x] = DERIV[z] * SMOOTH[y] * SMOOTH[x];
            }
        }
    }
    SobelKernel3D { sx, sy, sz }
}

/// Sum of the positive weights of one kernel (16 for the standard Sobel).
pub fn positive_weight_sum(kernel: &Kernel3) -> f64 {
    kernel
        .iter()
        .flatten()
        .flatten()
        .filter(|w| **w > 0.0)
        .sum()
}

/// Gradient responses of one frame window: the x, y, and z components at
/// slab `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTriple {
    pub index: usize,
    pub size: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub gz: Vec<f64>,
}

/// 2D cross-correlation of `frame` with one 3x3 kernel slice, "same" output,
/// zero padding, accumulated into `out`.
fn accumulate_slice(out: &mut [f64], frame: &UnitCellImage, slice: &[[f64; 3]; 3]) {
    let g = frame.size();
    for y in 0..g {
        for x in 0..g {
            let mut acc = 0.0;
            for (dy, row) in slice.iter().enumerate() {
                let yy = y as isize + dy as isize - 1;
                if yy < 0 || yy >= g as isize {
                    continue;
                }
                for (dx, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let xx = x as isize + dx as isize - 1;
                    if xx >= 0 && xx < g as isize {
                        acc += w * frame.get(yy as usize, xx as usize);
                    }
                }
            }
            out[y * g + x] += acc;
        }
    }
}

/// Slides the 3-frame window over a sequence of M frames and returns the
/// M-2 gradient triples. Each axis response is the sum of the kernel's
/// three z-slices 2D-convolved with frames i, i+1, i+2.
pub fn gradient_volumes(region: &TransitionRegion) -> Result<Vec<GradientTriple>> {
    let frames = region.frames();
    if frames.len() < 3 {
        return Err(Error::Validation(format!(
            "gradient volumes need at least 3 frames, got {}",
            frames.len()
        )));
    }
    let kernels = sobel3d_kernels();
    let g = region.frame_size();
    let mut triples = Vec::with_capacity(frames.len() - 2);
    for i in 0..frames.len() - 2 {
        let mut gx = vec![0.0; g * g];
        let mut gy = vec![0.0; g * g];
        let mut gz = vec![0.0; g * g];
        for dz in 0..3 {
            let frame = &frames[i + dz];
            accumulate_slice(&mut gx, frame, &kernels.sx[dz]);
            accumulate_slice(&mut gy, frame, &kernels.sy[dz]);
            accumulate_slice(&mut gz, frame, &kernels.sz[dz]);
        }
        triples.push(GradientTriple {
            index: i,
            size: g,
            gx,
            gy,
            gz,
        });
    }
    Ok(triples)
}

/// Per-axis RMSE between consecutive gradient slabs.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisRmse {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum();
    (sum / a.len() as f64).sqrt()
}

/// RMSE between each consecutive pair of gradient triples; M-2 triples give
/// M-3 values per axis.
pub fn pairwise_rmse(triples: &[GradientTriple]) -> Result<AxisRmse> {
    if triples.len() < 2 {
        return Err(Error::Validation(format!(
            "pairwise RMSE needs at least 2 gradient triples, got {}",
            triples.len()
        )));
    }
    let mut out = AxisRmse {
        x: Vec::with_capacity(triples.len() - 1),
        y: Vec::with_capacity(triples.len() - 1),
        z: Vec::with_capacity(triples.len() - 1),
    };
    for pair in triples.windows(2) {
        out.x.push(rmse(&pair[0].gx, &pair[1].gx));
        out.y.push(rmse(&pair[0].gy, &pair[1].gy));
        out.z.push(rmse(&pair[0].gz, &pair[1].gz));
    }
    Ok(out)
}

/// Upper bound on any per-axis RMSE for images within the given intensity
/// range: gradient responses lie in [-W*r, W*r] where W is the positive
/// weight sum and r the range width, so no per-pixel difference exceeds
/// 2*W*r. For the standard kernels on unit-range images this is 32.
pub fn rmse_max_bound(kernels: &SobelKernel3D, intensity_range: (f64, f64)) -> f64 {
    let (lo, hi) = intensity_range;
    let w = positive_weight_sum(&kernels.sx)
        .max(positive_weight_sum(&kernels.sy))
        .max(positive_weight_sum(&kernels.sz));
    2.0 * w * (hi - lo)
}

/// Full smoothness breakdown of one sequence.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SmoothnessReport {
    pub rmse_x: Vec<f64>,
    pub rmse_y: Vec<f64>,
    pub rmse_z: Vec<f64>,
    /// Per-pair axis-averaged RMSE normalized by `3 * rmse_max`.
    pub normalized: Vec<f64>,
    pub rmse_max: f64,
    /// 100 * (1 - mean normalized RMSE); 100 means perfectly uniform.
    pub smoothness: f64,
}

/// Scores a transition region. Needs at least 4 frames (one consecutive
/// pair of gradient slabs).
pub fn smoothness(region: &TransitionRegion) -> Result<SmoothnessReport> {
    if region.n_points() < 4 {
        return Err(Error::Validation(format!(
            "smoothness needs at least 4 frames, got {}",
            region.n_points()
        )));
    }
    let triples = gradient_volumes(region)?;
    let per_axis = pairwise_rmse(&triples)?;
    let rmse_max = rmse_max_bound(&sobel3d_kernels(), (0.0, 1.0));
    let normalized: Vec<f64> = per_axis
        .x
        .iter()
        .zip(&per_axis.y)
        .zip(&per_axis.z)
        .map(|((x, y), z)| (x + y + z) / (3.0 * rmse_max))
        .collect();
    let mean = normalized.iter().sum::<f64>() / normalized.len() as f64;
    Ok(SmoothnessReport {
        rmse_x: per_axis.x,
        rmse_y: per_axis.y,
        rmse_z: per_axis.z,
        normalized,
        rmse_max,
        smoothness: (1.0 - mean) * 100.0,
    })
}

/// Scores every row and every column of a mesh grid as its own transition.
/// Returns (per-row scores, per-column scores).
pub fn grid_line_smoothness(grid: &[Vec<UnitCellImage>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    if grid.iter().any(|row| row.len() != cols) {
        return Err(Error::Validation("grid rows differ in length".into()));
    }
    if cols < 4 {
        return Err(Error::Validation(format!(
            "rows are {cols}-frame lines; row smoothness needs at least 4 columns"
        )));
    }
    if rows < 4 {
        return Err(Error::Validation(format!(
            "columns are {rows}-frame lines; column smoothness needs at least 4 rows"
        )));
    }
    let row_scores = grid
        .iter()
        .map(|row| Ok(smoothness(&TransitionRegion::new(row.clone())?)?.smoothness))
        .collect::<Result<Vec<_>>>()?;
    let col_scores = (0..cols)
        .map(|c| {
            let column: Vec<UnitCellImage> = grid.iter().map(|row| row[c].clone()).collect();
            Ok(smoothness(&TransitionRegion::new(column)?)?.smoothness)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((row_scores, col_scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(size: usize, pixels: Vec<f64>) -> UnitCellImage {
        UnitCellImage::new(size, pixels).unwrap()
    }

    fn constant_frame(size: usize, value: f64) -> UnitCellImage {
        image(size, vec![value; size * size])
    }

    fn region(frames: Vec<UnitCellImage>) -> TransitionRegion {
        TransitionRegion::new(frames).unwrap()
    }

    fn pseudo_random_frames(size: usize, count: usize, seed: u64) -> Vec<UnitCellImage> {
        let mut state = seed;
        (0..count)
            .map(|_| {
                let pixels = (0..size * size)
                    .map(|_| {
                        state = crate::rng::splitmix64(state);
                        (state >> 11) as f64 / (1u64 << 53) as f64
                    })
                    .collect();
                image(size, pixels)
            })
            .collect()
    }

    #[test]
    fn kernel_weight_sums() {
        let k = sobel3d_kernels();
        for kernel in [&k.sx, &k.sy, &k.sz] {
            let total: f64 = kernel.iter().flatten().flatten().sum();
            assert_eq!(total, 0.0);
            assert_eq!(positive_weight_sum(kernel), 16.0);
        }
    }

    #[test]
    fn z_kernel_slices_match_the_separable_construction() {
        let k = sobel3d_kernels();
        let expected = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(k.sz[2][y][x], expected[y][x]);
                assert_eq!(k.sz[1][y][x], 0.0);
                assert_eq!(k.sz[0][y][x], -expected[y][x]);
            }
        }
    }

    #[test]
    fn x_and_y_kernels_are_transposes_of_each_other() {
        let k = sobel3d_kernels();
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    assert_eq!(k.sx[z][y][x], k.sy[z][x][y]);
                }
            }
        }
    }

    #[test]
    fn constant_identical_frames_have_zero_gradients() {
        // Identical frames cancel the antisymmetric z-profile everywhere.
        // For x and y the zero padding clips the kernel at the image border,
        // so exact zeros hold on the interior; every slab is still identical
        // across i, which is what the metric consumes.
        let g = 6;
        let frames = vec![constant_frame(g, 0.7); 5];
        let triples = gradient_volumes(&region(frames)).unwrap();
        assert_eq!(triples.len(), 3);
        for t in &triples {
            assert!(t.gz.iter().all(|&v| v == 0.0), "gz nonzero");
            for y in 1..g - 1 {
                for x in 1..g - 1 {
                    // Cancellation is exact up to summation-order roundoff.
                    assert!(t.gx[y * g + x].abs() < 1e-14);
                    assert!(t.gy[y * g + x].abs() < 1e-14);
                }
            }
            assert_eq!(t.gx, triples[0].gx);
            assert_eq!(t.gy, triples[0].gy);
        }
    }

    #[test]
    fn palindromic_slab_has_zero_z_gradient() {
        let a = pseudo_random_frames(6, 1, 3).pop().unwrap();
        let b = pseudo_random_frames(6, 1, 4).pop().unwrap();
        let triples = gradient_volumes(&region(vec![a.clone(), b, a])).unwrap();
        assert!(triples[0].gz.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn too_few_frames_are_rejected_with_the_minimum() {
        let frames = vec![constant_frame(6, 0.0); 2];
        let err = gradient_volumes(&region(frames)).unwrap_err();
        assert!(err.to_string().contains("at least 3"));
        let frames = vec![constant_frame(6, 0.0); 3];
        let err = smoothness(&region(frames)).unwrap_err();
        assert!(err.to_string().contains("at least 4"));
    }

    #[test]
    fn identical_gradient_slabs_have_zero_rmse_and_constant_offset_gives_abs() {
        let base = GradientTriple {
            index: 0,
            size: 2,
            gx: vec![0.5, -1.0, 2.0, 0.0],
            gy: vec![1.0; 4],
            gz: vec![-0.25; 4],
        };
        let mut shifted = base.clone();
        shifted.index = 1;
        for v in &mut shifted.gx {
            *v -= 3.0;
        }
        let out = pairwise_rmse(&[base.clone(), base.clone()]).unwrap();
        assert_eq!(out.x, vec![0.0]);
        assert_eq!(out.y, vec![0.0]);
        assert_eq!(out.z, vec![0.0]);
        let out = pairwise_rmse(&[base, shifted]).unwrap();
        assert!((out.x[0] - 3.0).abs() < 1e-12);
        assert_eq!(out.y[0], 0.0);
    }

    #[test]
    fn rmse_max_bound_values() {
        let k = sobel3d_kernels();
        assert_eq!(rmse_max_bound(&k, (0.0, 1.0)), 32.0);
        assert_eq!(rmse_max_bound(&k, (0.0, 0.5)), 16.0);
        let zero = SobelKernel3D {
            sx: [[[0.0; 3]; 3]; 3],
            sy: [[[0.0; 3]; 3]; 3],
            sz: [[[0.0; 3]; 3]; 3],
        };
        assert_eq!(rmse_max_bound(&zero, (0.0, 1.0)), 0.0);
    }

    #[test]
    fn identical_frames_score_exactly_100() {
        for n in 4..8 {
            let frames = vec![constant_frame(8, 0.3); n];
            let report = smoothness(&region(frames)).unwrap();
            assert_eq!(report.smoothness, 100.0);
        }
        let frame = pseudo_random_frames(8, 1, 9).pop().unwrap();
        let report = smoothness(&region(vec![frame; 6])).unwrap();
        assert_eq!(report.smoothness, 100.0);
    }

    #[test]
    fn reversing_a_sequence_leaves_smoothness_unchanged() {
        let frames = pseudo_random_frames(8, 6, 17);
        let fwd = smoothness(&region(frames.clone())).unwrap();
        let mut rev_frames = frames;
        rev_frames.reverse();
        let rev = smoothness(&region(rev_frames)).unwrap();
        assert!((fwd.smoothness - rev.smoothness).abs() < 1e-12);
    }

    #[test]
    fn intensity_scaling_scales_roughness_linearly() {
        let frames = pseudo_random_frames(8, 5, 23);
        let full = smoothness(&region(frames.clone())).unwrap();
        let alpha = 0.25;
        let scaled_frames: Vec<UnitCellImage> = frames
            .iter()
            .map(|f| image(8, f.pixels().iter().map(|p| alpha * p).collect()))
            .collect();
        let scaled = smoothness(&region(scaled_frames)).unwrap();
        let roughness_full = 100.0 - full.smoothness;
        let roughness_scaled = 100.0 - scaled.smoothness;
        assert!((roughness_scaled - alpha * roughness_full).abs() < 1e-9);
    }

    #[test]
    fn uniform_grid_scores_100_everywhere_and_transpose_swaps_lists() {
        let cell = constant_frame(6, 0.9);
        let grid: Vec<Vec<UnitCellImage>> = vec![vec![cell; 5]; 4];
        let (rows, cols) = grid_line_smoothness(&grid).unwrap();
        assert_eq!(rows, vec![100.0; 4]);
        assert_eq!(cols, vec![100.0; 5]);

        let grid: Vec<Vec<UnitCellImage>> = (0..4)
            .map(|r| {
                (0..5)
                    .map(|c| pseudo_random_frames(6, 1, (r * 5 + c) as u64).pop().unwrap())
                    .collect()
            })
            .collect();
        let (rows, cols) = grid_line_smoothness(&grid).unwrap();
        let transposed: Vec<Vec<UnitCellImage>> = (0..5)
            .map(|c| (0..4).map(|r| grid[r][c].clone()).collect())
            .collect();
        let (t_rows, t_cols) = grid_line_smoothness(&transposed).unwrap();
        assert_eq!(rows, t_cols);
        assert_eq!(cols, t_rows);
    }

    #[test]
    fn short_grid_lines_are_rejected_with_direction() {
        let cell = constant_frame(6, 0.1);
        let grid: Vec<Vec<UnitCellImage>> = vec![vec![cell.clone(); 3]; 5];
        let err = grid_line_smoothness(&grid).unwrap_err();
        assert!(err.to_string().contains("row"), "message: {err}");
        let grid: Vec<Vec<UnitCellImage>> = vec![vec![cell; 5]; 3];
        let err = grid_line_smoothness(&grid).unwrap_err();
        assert!(err.to_string().contains("column"), "message: {err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn smoothness_stays_in_range(seed: u64, n in 4usize..8, size in 4usize..10) {
            let frames = pseudo_random_frames(size, n, seed);
            let report = smoothness(&region(frames)).unwrap();
            prop_assert!((0.0..=100.0).contains(&report.smoothness));
            for r in report.normalized {
                prop_assert!((0.0..=1.0).contains(&r));
            }
        }
    }
}
