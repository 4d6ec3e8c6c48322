//! Binary PGM (P5, maxval 255) reading and writing.
//!
//! Intensities in [0, 1] map to bytes by `round(255 * v)`; the format is
//! bit-exact and needs no compression dependencies.

use std::fs;
use std::path::Path;

use crate::dataset::UnitCellImage;
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// A width x height grayscale raster with intensities in [0, 1]. PGM frames
/// are not necessarily square (montages are wide strips).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Validation(format!(
                "pixel buffer length {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_cell(cell: &UnitCellImage) -> Self {
        GrayImage {
            width: cell.size(),
            height: cell.size(),
            pixels: cell.pixels().to_vec(),
        }
    }

    pub fn into_cell(self) -> Result<UnitCellImage> {
        if self.width != self.height {
            return Err(Error::Validation(format!(
                "expected a square unit cell, got {}x{}",
                self.width, self.height
            )));
        }
        UnitCellImage::new(self.width, self.pixels)
    }
}

pub fn encode(image: &GrayImage) -> Vec<u8> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    bytes.extend(image.pixels.iter().map(|&v| (255.0 * v).round() as u8));
    bytes
}

pub fn write(path: &Path, image: &GrayImage) -> Result<()> {
    write_atomic(path, &encode(image))
}

pub fn write_cell(path: &Path, cell: &UnitCellImage) -> Result<()> {
    write(path, &GrayImage::from_cell(cell))
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn read_cell(path: &Path) -> Result<UnitCellImage> {
    read(path)?.into_cell()
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let mut cursor = 0usize;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format(0, "missing P5 magic"));
    }
    cursor += 2;
    let width = read_header_int(bytes, &mut cursor)?;
    let height = read_header_int(bytes, &mut cursor)?;
    let maxval = read_header_int(bytes, &mut cursor)?;
    if maxval != 255 {
        return Err(Error::format(
            cursor as u64,
            format!("unsupported maxval {maxval}, expected 255"),
        ));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err(Error::format(
            cursor as u64,
            "missing whitespace after maxval",
        ));
    }
    cursor += 1;
    let expected = width * height;
    let payload = &bytes[cursor..];
    if payload.len() != expected {
        return Err(Error::format(
            cursor as u64,
            format!(
                "payload holds {} bytes, expected {expected} for {width}x{height}",
                payload.len()
            ),
        ));
    }
    let pixels = payload.iter().map(|&b| f64::from(b) / 255.0).collect();
    GrayImage::new(width, height, pixels)
}

/// Parses the next ASCII integer in a PGM header, skipping whitespace and
/// `#` comment lines.
fn read_header_int(bytes: &[u8], cursor: &mut usize) -> Result<usize> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && bytes[*cursor].is_ascii_digit() {
        *cursor += 1;
    }
    if *cursor == start {
        return Err(Error::format(start as u64, "expected integer in header"));
    }
    std::str::from_utf8(&bytes[start..*cursor])
        .expect("digits are valid utf-8")
        .parse()
        .map_err(|e| Error::format(start as u64, format!("bad header integer: {e}")))
}

/// Lays a mesh of frames out as one image with 2-pixel separators at
/// intensity 0.5 between cells in both directions.
pub fn montage_grid(grid: &[Vec<UnitCellImage>]) -> Result<GrayImage> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::Validation("montage grid is empty".into()));
    }
    if grid.iter().any(|row| row.len() != cols) {
        return Err(Error::Validation("montage grid rows differ in length".into()));
    }
    let g = grid[0][0].size();
    if grid.iter().flatten().any(|f| f.size() != g) {
        return Err(Error::Validation("montage frames differ in size".into()));
    }
    const SEP: usize = 2;
    let width = cols * g + (cols - 1) * SEP;
    let height = rows * g + (rows - 1) * SEP;
    let mut pixels = vec![0.5; width * height];
    for (ri, row) in grid.iter().enumerate() {
        let y0 = ri * (g + SEP);
        for (ci, frame) in row.iter().enumerate() {
            let x0 = ci * (g + SEP);
            for r in 0..g {
                for c in 0..g {
                    pixels[(y0 + r) * width + x0 + c] = frame.get(r, c);
                }
            }
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Lays frames out left to right with 2-pixel separators at intensity 0.5.
pub fn montage(frames: &[UnitCellImage]) -> Result<GrayImage> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Validation("montage needs at least one frame".into()))?;
    let g = first.size();
    if frames.iter().any(|f| f.size() != g) {
        return Err(Error::Validation("montage frames differ in size".into()));
    }
    const SEP: usize = 2;
    let width = frames.len() * g + (frames.len() - 1) * SEP;
    let mut pixels = vec![0.5; width * g];
    for (k, frame) in frames.iter().enumerate() {
        let x0 = k * (g + SEP);
        for r in 0..g {
            for c in 0..g {
                pixels[r * width + x0 + c] = frame.get(r, c);
            }
        }
    }
    GrayImage::new(width, g, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{rasterize_cell, ShapeFamily, ShapeSpec};
    use proptest::prelude::*;

    #[test]
    fn encode_decode_round_trips_a_raster() {
        let spec = ShapeSpec::new(ShapeFamily::XBox, 0.8, 1).unwrap();
        let cell = rasterize_cell(&spec, 16).unwrap();
        let decoded = decode(&encode(&GrayImage::from_cell(&cell))).unwrap();
        // 0.8 -> 204 -> 204/255: quantization error below half a level.
        for (a, b) in cell.pixels().iter().zip(&decoded.pixels) {
            assert!((a - b).abs() < 0.5 / 255.0);
        }
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        assert!(matches!(
            decode(b"P2\n2 2\n255\n"),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut good = encode(&GrayImage::new(2, 2, vec![0.0; 4]).unwrap());
        good.pop();
        assert!(matches!(decode(&good), Err(Error::Format { .. })));
    }

    #[test]
    fn rejects_nonstandard_maxval() {
        assert!(matches!(decode(b"P5\n1 1\n65535\n\0\0"), Err(Error::Format { .. })));
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode(b"P5\n# a comment\n1 1\n255\n\x7f").unwrap();
        assert_eq!(img.width, 1);
        assert!((img.pixels[0] - 127.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn montage_places_separators_at_half_intensity() {
        let a = UnitCellImage::zeros(4);
        let b = UnitCellImage::zeros(4);
        let m = montage(&[a, b]).unwrap();
        assert_eq!(m.width, 10);
        assert_eq!(m.height, 4);
        assert_eq!(m.pixels[4], 0.5);
        assert_eq!(m.pixels[5], 0.5);
        assert_eq!(m.pixels[6], 0.0);
    }

    proptest! {
        #[test]
        fn byte_level_round_trip_is_exact(
            w in 1usize..12, h in 1usize..12,
            seed_byte in 0u8..255,
        ) {
            let pixels: Vec<f64> = (0..w * h)
                .map(|i| f64::from((i as u8).wrapping_mul(seed_byte)) / 255.0)
                .collect();
            let img = GrayImage::new(w, h, pixels).unwrap();
            let decoded = decode(&encode(&img)).unwrap();
            let re_encoded = encode(&decoded);
            prop_assert_eq!(encode(&img), re_encoded);
        }
    }
}
