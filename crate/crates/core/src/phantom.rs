//! Deterministic synthetic mammogram-like images with known labels.
//!
//! Every image is a breast-shaped half-ellipse anchored to the left edge with
//! a smooth radial intensity gradient plus Gaussian noise. Suspicious images
//! add either a round Gaussian mass or a cluster of microcalcification specks
//! (alternating). Image `i` draws from its own [`Lcg64`] seeded with
//! `seed + i`, in a fixed order: tissue geometry, then lesion, then one noise
//! sample per pixel in row-major order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::imgio::{write_pgm, GrayImage};
use crate::label::Label;
use crate::rng::Lcg64;

/// Samples per PGM written by [`write_phantom_set`].
pub const PHANTOM_MAXVAL: u16 = 65535;

/// Intensity stamped into the artifact rectangle.
pub const ARTIFACT_INTENSITY: f64 = 0.95;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid phantom config: {0}")]
    InvalidConfig(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConfig {
    pub size: usize,
    pub count_per_class: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub mass_amplitude: f64,
    /// Radius in pixels; the blob's Gaussian sigma is half of it.
    pub mass_radius: f64,
    /// Upper bound on specks per cluster (lower bound is 3).
    pub microcalc_count: usize,
    pub microcalc_amplitude: f64,
    pub artifact_label: bool,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            size: 128,
            count_per_class: 100,
            seed: 20240601,
            noise_sigma: 0.02,
            mass_amplitude: 0.3,
            mass_radius: 8.0,
            microcalc_count: 8,
            microcalc_amplitude: 0.45,
            artifact_label: false,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::InvalidConfig(m));
        if self.size < 32 {
            return bad(format!("size {} must be at least 32", self.size));
        }
        if self.count_per_class == 0 {
            return bad("count_per_class must be positive".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma {} must be non-negative", self.noise_sigma));
        }
        for (name, v) in [("mass_amplitude", self.mass_amplitude), ("microcalc_amplitude", self.microcalc_amplitude)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} {v} must be positive"));
            }
        }
        if !(self.mass_radius > 0.0 && self.mass_radius < self.size as f64 / 4.0) {
            return bad(format!("mass_radius {} must be in (0, size/4)", self.mass_radius));
        }
        if self.microcalc_count < 3 {
            return bad(format!("microcalc_count {} must be at least 3", self.microcalc_count));
        }
        Ok(())
    }

    pub fn image_count(&self) -> usize {
        2 * self.count_per_class
    }

    /// Images `0..count_per_class` are normal, the rest suspicious.
    pub fn label_of(&self, index: usize) -> Label {
        if index < self.count_per_class {
            Label::Normal
        } else {
            Label::Suspicious
        }
    }

    /// Pixel rectangle `(row0, col0, rows, cols)` of the corner artifact.
    pub fn artifact_rect(&self) -> (usize, usize, usize, usize) {
        let s = self.size;
        let (rows, cols) = (s / 16, s / 8);
        (s / 32, s - s / 32 - cols, rows, cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lesion {
    None,
    Mass { row: f64, col: f64, radius: f64 },
    Microcalcifications { specks: Vec<(usize, usize)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomImage {
    pub index: usize,
    pub label: Label,
    pub lesion: Lesion,
    pub image: GrayImage,
}

impl PhantomImage {
    pub fn file_name(&self) -> String {
        format!("phantom_{:04}_{}.pgm", self.index, self.label)
    }
}

struct Tissue {
    center_row: f64,
    semi_rows: f64,
    semi_cols: f64,
    edge: f64,
    peak: f64,
    ripple_amp: f64,
    ripple_period: f64,
    ripple_phase: f64,
}

impl Tissue {
    fn draw(rng: &mut Lcg64, size: usize) -> Self {
        let s = size as f64;
        Tissue {
            center_row: s / 2.0 + rng.uniform(-0.04, 0.04) * s,
            semi_rows: rng.uniform(0.38, 0.44) * s,
            semi_cols: rng.uniform(0.55, 0.75) * s,
            edge: rng.uniform(0.25, 0.30),
            peak: rng.uniform(0.50, 0.56),
            ripple_amp: rng.uniform(0.0, 0.02),
            ripple_period: rng.uniform(0.2, 0.4) * s,
            ripple_phase: rng.uniform(0.0, std::f64::consts::TAU),
        }
    }

    /// Normalized elliptical radius squared; `<= 1` inside the breast.
    fn radius2(&self, row: usize, col: usize) -> f64 {
        let dy = (row as f64 - self.center_row) / self.semi_rows;
        let dx = col as f64 / self.semi_cols;
        dx * dx + dy * dy
    }

    fn intensity(&self, row: usize, col: usize) -> f64 {
        let r2 = self.radius2(row, col);
        if r2 > 1.0 {
            return 0.0;
        }
        let ripple = self.ripple_amp
            * (std::f64::consts::TAU * (row as f64 + 0.5 * col as f64) / self.ripple_period + self.ripple_phase).sin();
        self.edge + (self.peak - self.edge) * (1.0 - r2) + ripple
    }

    /// A point well inside the breast, away from the skin line.
    fn interior_point(&self, rng: &mut Lcg64) -> (f64, f64) {
        let row = self.center_row + rng.uniform(-0.45, 0.45) * self.semi_rows;
        let col = rng.uniform(0.15, 0.5) * self.semi_cols;
        (row, col)
    }
}

fn render(cfg: &PhantomConfig, index: usize, with_noise: bool) -> (Lesion, GrayImage) {
    let size = cfg.size;
    let mut rng = Lcg64::new(cfg.seed.wrapping_add(index as u64));
    let tissue = Tissue::draw(&mut rng, size);
    let mut px: Vec<f64> = (0..size * size).map(|i| tissue.intensity(i / size, i % size)).collect();

    let lesion = match cfg.label_of(index) {
        Label::Normal => Lesion::None,
        Label::Suspicious if (index - cfg.count_per_class).is_multiple_of(2) => {
            let (row, col) = tissue.interior_point(&mut rng);
            let sigma = cfg.mass_radius / 2.0;
            for (i, p) in px.iter_mut().enumerate() {
                let dy = (i / size) as f64 - row;
                let dx = (i % size) as f64 - col;
                *p += cfg.mass_amplitude * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            }
            Lesion::Mass { row, col, radius: cfg.mass_radius }
        }
        Label::Suspicious => {
            let (row, col) = tissue.interior_point(&mut rng);
            let count = 3 + rng.below(cfg.microcalc_count - 2);
            let spread = cfg.mass_radius;
            let mut specks = Vec::new();
            for _ in 0..count {
                let r = (row + rng.uniform(-spread, spread)).round().clamp(0.0, (size - 1) as f64) as usize;
                let c = (col + rng.uniform(-spread, spread)).round().clamp(0.0, (size - 2) as f64) as usize;
                let wide = rng.below(2) == 1;
                specks.push((r, c));
                if wide {
                    specks.push((r, c + 1));
                }
            }
            for &(r, c) in &specks {
                px[r * size + c] += cfg.microcalc_amplitude;
            }
            Lesion::Microcalcifications { specks }
        }
    };

    if with_noise {
        for p in px.iter_mut() {
            *p += cfg.noise_sigma * rng.next_gaussian();
        }
    }
    if cfg.artifact_label {
        let (r0, c0, rows, cols) = cfg.artifact_rect();
        for r in r0..r0 + rows {
            px[r * size + c0..r * size + c0 + cols].fill(ARTIFACT_INTENSITY);
        }
    }
    for p in px.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    (lesion, GrayImage::new(size, size, px).expect("phantom pixels are finite"))
}

pub fn generate_image(cfg: &PhantomConfig, index: usize) -> PhantomImage {
    let (lesion, image) = render(cfg, index, true);
    PhantomImage { index, label: cfg.label_of(index), lesion, image }
}

/// The noiseless normal tissue of image `index` (no lesion, no artifact).
pub fn tissue_background(cfg: &PhantomConfig, index: usize) -> GrayImage {
    let mut rng = Lcg64::new(cfg.seed.wrapping_add(index as u64));
    let tissue = Tissue::draw(&mut rng, cfg.size);
    GrayImage::from_fn(cfg.size, cfg.size, |r, c| tissue.intensity(r, c).clamp(0.0, 1.0)).expect("finite")
}

pub fn generate(cfg: &PhantomConfig) -> Result<Vec<PhantomImage>, PhantomError> {
    cfg.validate()?;
    Ok((0..cfg.image_count()).into_par_iter().map(|i| generate_image(cfg, i)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
}

/// Writes `phantom_<index>_<label>.pgm` files and `manifest.csv`
/// (`path,label`, paths relative to `dir`).
pub fn write_phantom_set(cfg: &PhantomConfig, dir: &Path) -> Result<Vec<ManifestEntry>, PhantomError> {
    let images = generate(cfg)?;
    let io_err = |path: PathBuf| move |source| PhantomError::Io { path, source };
    std::fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;
    let mut manifest = Vec::with_capacity(images.len());
    for img in &images {
        let path = dir.join(img.file_name());
        std::fs::write(&path, write_pgm(&img.image, PHANTOM_MAXVAL, true)).map_err(io_err(path.clone()))?;
        manifest.push(ManifestEntry { path: img.file_name(), label: img.label });
    }
    let manifest_path = dir.join("manifest.csv");
    std::fs::write(&manifest_path, manifest_csv(&manifest)).map_err(io_err(manifest_path.clone()))?;
    Ok(manifest)
}

pub fn manifest_csv(entries: &[ManifestEntry]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["path", "label"]).expect("in-memory write");
    for e in entries {
        w.write_record([e.path.as_str(), e.label.as_str()]).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
