//! Shared test support: an independent brute-force smoothness oracle and
//! frozen regression fixtures.
//!
//! The oracle deliberately shares no code with the library. Kernels are
//! written out as literal 3x3x3 weight tables and every quantity is computed
//! by direct summation over the zero-padded volume.

/// Literal 3x3x3 Sobel kernels, indexed `[dz][dy][dx]`, offset -1 at index 0.
/// x differentiates along columns, y along rows, z along the frame index.
pub const ORACLE_SX: [[[f64; 3]; 3]; 3] = [
    [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]],
    [[-2.0, 0.0, 2.0], [-4.0, 0.0, 4.0], [-2.0, 0.0, 2.0]],
    [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]],
];
pub const ORACLE_SY: [[[f64; 3]; 3]; 3] = [
    [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]],
    [[-2.0, -4.0, -2.0], [0.0, 0.0, 0.0], [2.0, 4.0, 2.0]],
    [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]],
];
pub const ORACLE_SZ: [[[f64; 3]; 3]; 3] = [
    [[-1.0, -2.0, -1.0], [-2.0, -4.0, -2.0], [-1.0, -2.0, -1.0]],
    [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]],
];

/// Frames as flat row-major pixel vectors of a `size` x `size` image.
pub type RawFrames = Vec<Vec<f64>>;

fn pixel(frames: &RawFrames, size: usize, z: isize, y: isize, x: isize) -> f64 {
    if z < 0 || z >= frames.len() as isize {
        return 0.0;
    }
    if y < 0 || y >= size as isize || x < 0 || x >= size as isize {
        return 0.0;
    }
    frames[z as usize][y as usize * size + x as usize]
}

/// Direct triple-loop 3D cross-correlation at slab `i` (window i..i+2).
pub fn oracle_gradient(
    frames: &RawFrames,
    size: usize,
    i: usize,
    kernel: &[[[f64; 3]; 3]; 3],
) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let mut acc = 0.0;
            for dz in -1isize..=1 {
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let w = kernel[(dz + 1) as usize][(dy + 1) as usize][(dx + 1) as usize];
                        acc += w
                            * pixel(
                                frames,
                                size,
                                i as isize + 1 + dz,
                                y as isize + dy,
                                x as isize + dx,
                            );
                    }
                }
            }
            out[y * size + x] = acc;
        }
    }
    out
}

fn oracle_rmse(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for j in 0..a.len() {
        sum += (b[j] - a[j]) * (b[j] - a[j]);
    }
    (sum / a.len() as f64).sqrt()
}

/// End-to-end smoothness by direct summation; M frames, M >= 4.
pub fn oracle_smoothness(frames: &RawFrames, size: usize) -> f64 {
    let m = frames.len();
    assert!(m >= 4, "oracle needs at least 4 frames");
    let mut gx = Vec::new();
    let mut gy = Vec::new();
    let mut gz = Vec::new();
    for i in 0..m - 2 {
        gx.push(oracle_gradient(frames, size, i, &ORACLE_SX));
        gy.push(oracle_gradient(frames, size, i, &ORACLE_SY));
        gz.push(oracle_gradient(frames, size, i, &ORACLE_SZ));
    }
    let rmse_max = 32.0;
    let mut total = 0.0;
    for i in 0..m - 3 {
        let rx = oracle_rmse(&gx[i], &gx[i + 1]);
        let ry = oracle_rmse(&gy[i], &gy[i + 1]);
        let rz = oracle_rmse(&gz[i], &gz[i + 1]);
        total += (rx + ry + rz) / (3.0 * rmse_max);
    }
    (1.0 - total / (m - 3) as f64) * 100.0
}

/// Deterministic uniform-[0,1) frames from a splitmix64 stream.
pub fn random_frames(size: usize, count: usize, seed: u64) -> RawFrames {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..count)
        .map(|_| (0..size * size).map(|_| next()).collect())
        .collect()
}

/// OLS fixture frozen from an independent normal-equation +
/// regularized-incomplete-beta evaluation (numpy/scipy):
/// y = 100 - 6 d + 0.1 n + 0.35 d n + N(0, 1.5), 24 rows.
pub const OLS_FIXTURE: [(f64, f64, f64); 24] = [
    (1.0, 5.0, 95.98594498878705),
    (1.0, 10.0, 97.13562719858953),
    (1.0, 15.0, 99.40868784542214),
    (2.0, 5.0, 92.02689402630797),
    (2.0, 10.0, 94.21854069823894),
    (2.0, 15.0, 99.47994010597768),
    (3.0, 5.0, 88.43766071442643),
    (3.0, 10.0, 94.69290659369405),
    (3.0, 15.0, 98.93063409690906),
    (4.0, 5.0, 83.74680966831971),
    (4.0, 10.0, 87.02348922714228),
    (4.0, 15.0, 97.9379601818966),
    (5.0, 5.0, 79.22007649981191),
    (5.0, 10.0, 89.98770295885733),
    (5.0, 15.0, 95.85713644201127),
    (6.0, 5.0, 74.02793154545023),
    (6.0, 10.0, 89.23661341665098),
    (6.0, 15.0, 96.29508894711613),
    (1.5, 5.0, 95.67204323294513),
    (2.5, 10.0, 94.44927554657552),
    (3.5, 15.0, 98.8343250217755),
    (4.5, 5.0, 81.77357146669178),
    (5.5, 10.0, 87.22025894837326),
    (6.5, 15.0, 96.3737149922096),
];

pub const OLS_EXPECTED_BETA: [f64; 4] = [
    100.93687154299971,
    -6.055804876270643,
    -0.07089112859818657,
    0.37006383419246935,
];
pub const OLS_EXPECTED_SE: [f64; 4] = [
    1.7235719782996977,
    0.44533479903746814,
    0.16217969407664767,
    0.0404148870842143,
];
pub const OLS_EXPECTED_T: [f64; 4] = [
    58.56260882273907,
    -13.598319487629213,
    -0.4371147017004653,
    9.156621752310006,
];
pub const OLS_EXPECTED_P: [f64; 4] = [
    7.582022000778857e-24,
    1.447988133311293e-11,
    0.6667114911113048,
    1.3625490089185008e-08,
];
pub const OLS_EXPECTED_R2: f64 = 0.9643386221001171;
