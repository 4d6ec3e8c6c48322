//! Synthetic strut-lattice unit cells.
//!
//! Twelve shape families built from a square border frame plus interior
//! struts (diagonals, center bars, or combinations). Each family is swept
//! over five pixel-density levels and a per-family strut-thickness range,
//! which yields the default 415-sample corpus.
//!
//! Default enumeration table (thickness levels x 5 densities per family):
//!
//! | family                              | extra_thickness | samples |
//! |-------------------------------------|-----------------|---------|
//! | box                                 | 0..=6           | 35      |
//! | forward_slash_box                   | 0..=6           | 35      |
//! | back_slash_box                      | 0..=6           | 35      |
//! | x_box                               | 0..=6           | 35      |
//! | hot_dog_box                         | 0..=6           | 35      |
//! | hamburger_box                       | 0..=6           | 35      |
//! | hot_dog_hamburger_box               | 0..=6           | 35      |
//! | plus_box                            | 0..=6           | 35      |
//! | horizontal_vertical_box_split       | 0..=6           | 35      |
//! | forward_slash_plus_box              | 0..=6           | 35      |
//! | back_slash_plus_box                 | 0..=6           | 35      |
//! | forward_slash_back_slash_plus_box   | 0..=5           | 30      |
//!
//! Total: 11 * 35 + 30 = 415.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel density levels of the default corpus.
pub const DENSITY_LEVELS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// Default raster resolution.
pub const DEFAULT_IMAGE_SIZE: usize = 28;

/// Number of samples in the default corpus.
pub const DEFAULT_CORPUS_SIZE: usize = 415;

/// The twelve strut-lattice shape families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Box,
    ForwardSlashBox,
    BackSlashBox,
    XBox,
    HotDogBox,
    HamburgerBox,
    HotDogHamburgerBox,
    PlusBox,
    HorizontalVerticalBoxSplit,
    ForwardSlashPlusBox,
    BackSlashPlusBox,
    ForwardSlashBackSlashPlusBox,
}

/// Interior struts drawn inside the frame for one family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StrutSet {
    forward_slash: bool,
    back_slash: bool,
    horizontal_bar: bool,
    vertical_bar: bool,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 12] = [
        ShapeFamily::Box,
        ShapeFamily::ForwardSlashBox,
        ShapeFamily::BackSlashBox,
        ShapeFamily::XBox,
        ShapeFamily::HotDogBox,
        ShapeFamily::HamburgerBox,
        ShapeFamily::HotDogHamburgerBox,
        ShapeFamily::PlusBox,
        ShapeFamily::HorizontalVerticalBoxSplit,
        ShapeFamily::ForwardSlashPlusBox,
        ShapeFamily::BackSlashPlusBox,
        ShapeFamily::ForwardSlashBackSlashPlusBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Box => "box",
            ShapeFamily::ForwardSlashBox => "forward_slash_box",
            ShapeFamily::BackSlashBox => "back_slash_box",
            ShapeFamily::XBox => "x_box",
            ShapeFamily::HotDogBox => "hot_dog_box",
            ShapeFamily::HamburgerBox => "hamburger_box",
            ShapeFamily::HotDogHamburgerBox => "hot_dog_hamburger_box",
            ShapeFamily::PlusBox => "plus_box",
            ShapeFamily::HorizontalVerticalBoxSplit => "horizontal_vertical_box_split",
            ShapeFamily::ForwardSlashPlusBox => "forward_slash_plus_box",
            ShapeFamily::BackSlashPlusBox => "back_slash_plus_box",
            ShapeFamily::ForwardSlashBackSlashPlusBox => "forward_slash_back_slash_plus_box",
        }
    }

    /// Largest `extra_thickness` allowed for this family. Bounded so the
    /// densest family never closes up into a filled square at the default
    /// resolution.
    pub fn max_extra_thickness(self) -> u32 {
        match self {
            ShapeFamily::ForwardSlashBackSlashPlusBox => 5,
            _ => 6,
        }
    }

    fn struts(self) -> StrutSet {
        let (fs, bs, h, v) = match self {
            ShapeFamily::Box => (false, false, false, false),
            ShapeFamily::ForwardSlashBox => (true, false, false, false),
            ShapeFamily::BackSlashBox => (false, true, false, false),
            ShapeFamily::XBox => (true, true, false, false),
            ShapeFamily::HotDogBox => (false, false, false, true),
            ShapeFamily::HamburgerBox => (false, false, true, false),
            ShapeFamily::HotDogHamburgerBox => (false, false, true, true),
            ShapeFamily::PlusBox => (false, false, true, true),
            ShapeFamily::HorizontalVerticalBoxSplit => (false, false, true, true),
            ShapeFamily::ForwardSlashPlusBox => (true, false, true, true),
            ShapeFamily::BackSlashPlusBox => (false, true, true, true),
            ShapeFamily::ForwardSlashBackSlashPlusBox => (true, true, true, true),
        };
        StrutSet {
            forward_slash: fs,
            back_slash: bs,
            horizontal_bar: h,
            vertical_bar: v,
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::ALL
            .iter()
            .copied()
            .find(|fam| fam.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown shape family: {s:?}")))
    }
}

/// One parametric unit-cell shape: family, pixel density, extra strut width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub family: ShapeFamily,
    /// Intensity of every lit pixel, in (0, 1].
    pub density: f64,
    /// Additional strut width in pixels beyond the base width of 1.
    pub extra_thickness: u32,
}

impl ShapeSpec {
    pub fn new(family: ShapeFamily, density: f64, extra_thickness: u32) -> Result<Self> {
        let spec = ShapeSpec {
            family,
            density,
            extra_thickness,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Validation(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        let max = self.family.max_extra_thickness();
        if self.extra_thickness > max {
            return Err(Error::Validation(format!(
                "extra_thickness {} exceeds maximum {} for family {}",
                self.extra_thickness, max, self.family
            )));
        }
        Ok(())
    }
}

/// A square grayscale raster with intensities in [0, 1].
/// 0 is material absence, 1 is material presence.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitCellImage {
    size: usize,
    pixels: Vec<f64>,
}

impl UnitCellImage {
    pub fn new(size: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != size * size {
            return Err(Error::Validation(format!(
                "pixel buffer length {} does not match size {size}x{size}",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(UnitCellImage { size, pixels })
    }

    pub fn zeros(size: usize) -> Self {
        UnitCellImage {
            size,
            pixels: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }

    /// Checks the unit-cell invariants: values in [0, 1] and material on
    /// all four outer border edges (cells tile, so boundary struts exist).
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(bad) = self.pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        let g = self.size;
        let top = (0..g).any(|c| self.get(0, c) > 0.0);
        let bottom = (0..g).any(|c| self.get(g - 1, c) > 0.0);
        let left = (0..g).any(|r| self.get(r, 0) > 0.0);
        let right = (0..g).any(|r| self.get(r, g - 1) > 0.0);
        if !(top && bottom && left && right) {
            return Err(Error::Validation(
                "one or more border edges carry no material".into(),
            ));
        }
        Ok(())
    }
}

/// Half-open pixel span of a centered bar of width `w` in a cell of size `g`.
fn bar_span(g: usize, w: usize) -> (usize, usize) {
    let start = (g - w) / 2;
    (start, start + w)
}

/// Signed diagonal offsets covered by a strut of width `w`; widths grow by
/// one offset at a time so thicker struts strictly cover thinner ones.
fn diag_offsets(w: usize) -> (i64, i64) {
    let w = w as i64;
    (-((w - 1) / 2), w / 2)
}

/// Rasterizes one shape deterministically. Lit pixels all carry the value
/// `spec.density`; everything else is 0.
pub fn rasterize_cell(spec: &ShapeSpec, size: usize) -> Result<UnitCellImage> {
    spec.validate()?;
    if size < 8 {
        return Err(Error::Validation(format!(
            "image size must be at least 8, got {size}"
        )));
    }
    let g = size;
    let w = 1 + spec.extra_thickness as usize;
    let struts = spec.family.struts();
    let (bar_lo, bar_hi) = bar_span(g, w);
    let (off_lo, off_hi) = diag_offsets(w);

    let mut pixels = vec![0.0; g * g];
    for r in 0..g {
        for c in 0..g {
            let frame = r < w || r >= g - w || c < w || c >= g - w;
            let vertical = struts.vertical_bar && c >= bar_lo && c < bar_hi;
            let horizontal = struts.horizontal_bar && r >= bar_lo && r < bar_hi;
            let back_diag = struts.back_slash && {
                let off = c as i64 - r as i64;
                off >= off_lo && off <= off_hi
            };
            let fwd_diag = struts.forward_slash && {
                let off = (r + c) as i64 - (g as i64 - 1);
                off >= off_lo && off <= off_hi
            };
            if frame || vertical || horizontal || back_diag || fwd_diag {
                pixels[r * g + c] = spec.density;
            }
        }
    }
    UnitCellImage::new(g, pixels)
}

/// One corpus entry: the shape parameters and where its raster lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub spec: ShapeSpec,
    pub path: PathBuf,
}

/// The enumerated corpus: ordered entries plus the generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
    pub image_size: usize,
}

/// The full default enumeration: every family crossed with its thickness
/// range and the five density levels, in a fixed order.
pub fn default_specs() -> Vec<ShapeSpec> {
    let mut specs = Vec::with_capacity(DEFAULT_CORPUS_SIZE);
    for family in ShapeFamily::ALL {
        for extra in 0..=family.max_extra_thickness() {
            for density in DENSITY_LEVELS {
                specs.push(ShapeSpec {
                    family,
                    density,
                    extra_thickness: extra,
                });
            }
        }
    }
    specs
}

fn entry_file_name(index: usize, spec: &ShapeSpec) -> String {
    format!(
        "{index:03}_{}_d{:.1}_t{}.pgm",
        spec.family, spec.density, spec.extra_thickness
    )
}

/// Enumerates the default corpus without touching the filesystem. Paths are
/// relative to the eventual output directory.
pub fn enumerate_default_corpus(image_size: usize, seed: u64) -> Result<DatasetManifest> {
    if image_size < 8 {
        return Err(Error::Validation(format!(
            "image size must be at least 8, got {image_size}"
        )));
    }
    let entries = default_specs()
        .into_iter()
        .enumerate()
        .map(|(index, spec)| ManifestEntry {
            index,
            path: PathBuf::from(entry_file_name(index, &spec)),
            spec,
        })
        .collect();
    Ok(DatasetManifest {
        entries,
        seed,
        image_size,
    })
}

/// Rasterizes every manifest entry in order.
pub fn rasterize_corpus(manifest: &DatasetManifest) -> Result<Vec<UnitCellImage>> {
    manifest
        .entries
        .iter()
        .map(|e| rasterize_cell(&e.spec, manifest.image_size))
        .collect()
}

/// Deterministic index split: shuffles `0..n` with the seed and cuts at
/// `round(n * train_fraction)`. Union and disjointness are exact.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Validation("cannot split an empty corpus".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = (n as f64 * train_fraction).round() as usize;
    let validation = indices.split_off(n_train);
    Ok((indices, validation))
}

/// Splits a manifest into train and validation entry lists.
pub fn split_corpus<'m>(
    manifest: &'m DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<&'m ManifestEntry>, Vec<&'m ManifestEntry>)> {
    let (train_idx, val_idx) = split_indices(manifest.entries.len(), train_fraction, seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| &manifest.entries[i]).collect();
    Ok((pick(train_idx), pick(val_idx)))
}

/// Writes the manifest as CSV with header `index,family,density,extra_thickness,path`.
pub fn write_manifest_csv(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["index", "family", "density", "extra_thickness", "path"])
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    for entry in &manifest.entries {
        writer
            .write_record([
                entry.index.to_string(),
                entry.spec.family.to_string(),
                entry.spec.density.to_string(),
                entry.spec.extra_thickness.to_string(),
                entry.path.display().to_string(),
            ])
            .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    crate::io::write_atomic(path, &bytes)
}

/// Reads a manifest CSV written by [`write_manifest_csv`].
pub fn read_manifest_csv(path: &Path, image_size: usize, seed: u64) -> Result<DatasetManifest> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| {
        Error::Validation(format!("cannot open manifest {}: {e}", path.display()))
    })?;
    let mut entries = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Error::Validation(format!("malformed manifest row: {e}")))?;
        if record.len() != 5 {
            return Err(Error::Validation(format!(
                "manifest row has {} fields, expected 5",
                record.len()
            )));
        }
        let parse_err = |field: &str, e: &dyn fmt::Display| {
            Error::Validation(format!("manifest field {field}: {e}"))
        };
        let index: usize = record[0].parse().map_err(|e| parse_err("index", &e))?;
        let family: ShapeFamily = record[1].parse()?;
        let density: f64 = record[2].parse().map_err(|e| parse_err("density", &e))?;
        let extra: u32 = record[3]
            .parse()
            .map_err(|e| parse_err("extra_thickness", &e))?;
        entries.push(ManifestEntry {
            index,
            spec: ShapeSpec::new(family, density, extra)?,
            path: PathBuf::from(&record[4]),
        });
    }
    Ok(DatasetManifest {
        entries,
        seed,
        image_size,
    })
}
