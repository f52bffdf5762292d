//! Appearance regularization applied before any transform: orientation
//! matching, background thresholding, artifact removal and intensity
//! matching, in that order.

use std::collections::VecDeque;

use thiserror::Error;

use crate::imgio::GrayImage;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("image is {image:?} but mask is {mask:?}")]
    DimensionMismatch { image: (usize, usize), mask: (usize, usize) },
    #[error("image maximum {0} is not positive; cannot normalize intensity")]
    DegenerateImage(f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// Panics if `bits.len() != width * height`.
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask length does not match {width}x{height}");
        BinaryMask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// Background threshold as a fraction of full scale.
    pub threshold: f64,
    pub orient: bool,
    pub artifact_removal: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            threshold: 0.1,
            orient: true,
            artifact_removal: true,
        }
    }
}

pub fn mirror(img: &GrayImage) -> GrayImage {
    let w = img.width();
    GrayImage::from_fn(w, img.height(), |y, x| img.get(y, w - 1 - x)).expect("mirror keeps a valid image")
}

/// Flips the image horizontally when the right half (columns `>= ceil(w/2)`)
/// carries strictly more intensity than the left half (columns `< floor(w/2)`).
/// The middle column of an odd-width image belongs to neither half.
pub fn orient(img: &GrayImage) -> GrayImage {
    let w = img.width();
    let (left_end, right_start) = (w / 2, w.div_ceil(2));
    let mut left = 0.0;
    let mut right = 0.0;
    for row in img.pixels().chunks(w) {
        left += row[..left_end].iter().sum::<f64>();
        right += row[right_start..].iter().sum::<f64>();
    }
    if right > left {
        mirror(img)
    } else {
        img.clone()
    }
}

/// Inclusive threshold: a pixel is foreground when `pixel >= t`.
pub fn threshold(img: &GrayImage, t: f64) -> BinaryMask {
    BinaryMask::new(img.width(), img.height(), img.pixels().iter().map(|&p| p >= t).collect())
}

/// Keeps only the largest 4-connected foreground component. Components are
/// discovered in row-major order, so on a size tie the component holding the
/// smallest pixel index wins.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; mask.bits.len()];
    let mut queue = VecDeque::new();
    let mut next = 0u32;
    let mut best = (0u32, 0usize);

    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (y, x) = (i / w, i % w);
            let mut visit = |j: usize| {
                if mask.bits[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }

    if best.0 == 0 {
        return mask.clone();
    }
    BinaryMask::new(w, h, labels.iter().map(|&l| l == best.0).collect())
}

pub fn apply_mask(img: &GrayImage, mask: &BinaryMask) -> Result<GrayImage, PreprocessError> {
    if (img.width(), img.height()) != (mask.width, mask.height) {
        return Err(PreprocessError::DimensionMismatch {
            image: (img.width(), img.height()),
            mask: (mask.width, mask.height),
        });
    }
    let pixels = img
        .pixels()
        .iter()
        .zip(&mask.bits)
        .map(|(&p, &keep)| if keep { p } else { 0.0 })
        .collect();
    Ok(GrayImage::new(img.width(), img.height(), pixels).expect("masking keeps a valid image"))
}

/// Divides by the brightest pixel so the output maximum is exactly 1.0.
pub fn normalize_intensity(img: &GrayImage) -> Result<GrayImage, PreprocessError> {
    let max = img.max_pixel();
    if max <= 0.0 {
        return Err(PreprocessError::DegenerateImage(max));
    }
    let pixels = img.pixels().iter().map(|&p| p / max).collect();
    Ok(GrayImage::new(img.width(), img.height(), pixels).expect("scaling keeps a valid image"))
}

pub fn preprocess_pipeline(img: &GrayImage, cfg: &PreprocessConfig) -> Result<GrayImage, PreprocessError> {
    let oriented = if cfg.orient { orient(img) } else { img.clone() };
    let mut mask = threshold(&oriented, cfg.threshold);
    if cfg.artifact_removal {
        mask = largest_component(&mask);
    }
    let masked = apply_mask(&oriented, &mask)?;
    normalize_intensity(&masked)
}
