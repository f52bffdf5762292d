//! Statistical moment features over wavelet and Fourier maps, the
//! cross-correlation feature, feature tables and Fisher-ratio ranking.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::fourier::{fft2d, log_magnitude};
use crate::imgio::GrayImage;
use crate::label::Label;
use crate::matrix::Matrix;
use crate::wavelet::{dwt2d, Band, FilterId, WaveletError, WaveletFilter};

/// Standard deviations at or below this are treated as a constant map.
pub const DEGENERATE_SIGMA: f64 = 1e-12;

/// Regularizer in the Fisher ratio denominator.
pub const FISHER_EPSILON: f64 = 1e-12;

pub const STAT_NAMES: [&str; 4] = ["mean", "std", "skew", "kurt"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot compute statistics of an empty map")]
    EmptyMap,
    #[error("need at least {needed} rows per class, {label} has {found}")]
    InsufficientData { label: Label, needed: usize, found: usize },
    #[error("k = {k} is outside 1..={max}")]
    BadK { k: usize, max: usize },
    #[error("invalid feature vector: {0}")]
    InvalidVector(String),
    #[error("feature table: {0}")]
    Table(String),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Population moments of a flattened map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Result<Self, FeatureError> {
        if values.is_empty() {
            return Err(FeatureError::EmptyMap);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        let std = m2.sqrt();
        let (skewness, kurtosis) = if std <= DEGENERATE_SIGMA {
            (0.0, 0.0)
        } else {
            (m3 / (m2 * std), m4 / (m2 * m2))
        };
        Ok(Moments { mean, std, skewness, kurtosis })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mean, self.std, self.skewness, self.kurtosis]
    }
}

pub fn mean(values: &[f64]) -> Result<f64, FeatureError> {
    Moments::of(values).map(|m| m.mean)
}

/// Population standard deviation (divides by `n`).
pub fn stddev(values: &[f64]) -> Result<f64, FeatureError> {
    Moments::of(values).map(|m| m.std)
}

/// `mu3 / sigma^3`; zero for a constant map.
pub fn skewness(values: &[f64]) -> Result<f64, FeatureError> {
    Moments::of(values).map(|m| m.skewness)
}

/// Plain (non-excess) kurtosis `mu4 / sigma^4`; zero for a constant map.
pub fn kurtosis(values: &[f64]) -> Result<f64, FeatureError> {
    Moments::of(values).map(|m| m.kurtosis)
}

/// Bilinear resampling with corner alignment: output `(i, j)` samples the
/// source at `(i * (h_src - 1) / (h_dst - 1), j * (w_src - 1) / (w_dst - 1))`.
pub fn resample_bilinear(src: &Matrix, rows: usize, cols: usize) -> Matrix {
    if src.dims() == (rows, cols) {
        return src.clone();
    }
    let scale = |dst: usize, n_src: usize| -> f64 {
        if dst <= 1 {
            0.0
        } else {
            (n_src - 1) as f64 / (dst - 1) as f64
        }
    };
    let (sy, sx) = (scale(rows, src.rows()), scale(cols, src.cols()));
    Matrix::from_fn(rows, cols, |i, j| {
        let y = i as f64 * sy;
        let x = j as f64 * sx;
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(src.rows() - 1), (x0 + 1).min(src.cols() - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let top = src[(y0, x0)] * (1.0 - fx) + src[(y0, x1)] * fx;
        let bottom = src[(y1, x0)] * (1.0 - fx) + src[(y1, x1)] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Pearson correlation of `a` with `b` resampled onto `a`'s grid. Zero when
/// either map is constant.
pub fn cross_correlation(a: &Matrix, b: &Matrix) -> Result<f64, FeatureError> {
    if a.is_empty() || b.is_empty() {
        return Err(FeatureError::EmptyMap);
    }
    let b = resample_bilinear(b, a.rows(), a.cols());
    let (ma, mb) = (Moments::of(a.as_slice())?, Moments::of(b.as_slice())?);
    if ma.std <= DEGENERATE_SIGMA || mb.std <= DEGENERATE_SIGMA {
        return Ok(0.0);
    }
    let cov = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - ma.mean) * (y - mb.mean))
        .sum::<f64>()
        / a.len() as f64;
    Ok((cov / (ma.std * mb.std)).clamp(-1.0, 1.0))
}

/// Named scalar features of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self, FeatureError> {
        if names.len() != values.len() {
            return Err(FeatureError::InvalidVector(format!(
                "{} names for {} values",
                names.len(),
                values.len()
            )));
        }
        check_names(&names).map_err(FeatureError::InvalidVector)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::InvalidVector(format!("{} is not finite", names[i])));
        }
        Ok(FeatureVector { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

fn check_names(names: &[String]) -> Result<(), String> {
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() || n.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(format!("feature name {n:?} must be non-empty without whitespace or commas"));
        }
        if names[..i].contains(n) {
            return Err(format!("duplicate feature name {n:?}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// Four moments of the final LL band and of the log-magnitude spectrum.
    #[default]
    Default8,
    /// Adds moments of every detail band and LL/detail cross-correlations
    /// against the log-magnitude spectrum.
    Extended,
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Default8 => "default8",
            FeatureMode::Extended => "extended",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "default8" | "default" => Ok(FeatureMode::Default8),
            "extended" => Ok(FeatureMode::Extended),
            other => Err(format!("unknown feature mode {other:?} (expected `default8` or `extended`)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub mode: FeatureMode,
    pub filter: FilterId,
    pub levels: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            mode: FeatureMode::Default8,
            filter: FilterId::Daub4,
            levels: 3,
        }
    }
}

/// Feature names emitted by [`extract_features`] for `cfg`, in order.
pub fn feature_names(cfg: &FeatureConfig) -> Vec<String> {
    let mut names = Vec::new();
    let mut push_stats = |prefix: &str| {
        for s in STAT_NAMES {
            names.push(format!("{prefix}_{s}"));
        }
    };
    push_stats("wll");
    push_stats("fft");
    if cfg.mode == FeatureMode::Extended {
        for level in 1..=cfg.levels {
            for band in Band::DETAIL {
                push_stats(&format!("w{level}{}", band.name()));
            }
        }
        for band in [Band::LL, Band::HL, Band::LH, Band::HH] {
            names.push(format!("xcorr_{}", band.name()));
        }
    }
    names
}

pub fn extract_features(img: &GrayImage, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    let pixels = img.to_matrix();
    let decomposition = dwt2d(&pixels, &WaveletFilter::new(cfg.filter), cfg.levels)?;
    let spectrum_map = log_magnitude(&fft2d(&pixels));

    let mut values = Vec::new();
    values.extend(Moments::of(decomposition.ll().as_slice())?.as_array());
    values.extend(Moments::of(spectrum_map.as_slice())?.as_array());
    if cfg.mode == FeatureMode::Extended {
        for level in 1..=cfg.levels {
            for band in Band::DETAIL {
                let data = decomposition.band(level, band).expect("level within decomposition");
                values.extend(Moments::of(data.as_slice())?.as_array());
            }
        }
        for band in [Band::LL, Band::HL, Band::LH, Band::HH] {
            let data = decomposition.band(cfg.levels, band).expect("final level band");
            values.push(cross_correlation(data, &spectrum_map)?);
        }
    }
    FeatureVector::new(feature_names(cfg), values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub label: Label,
    pub values: Vec<f64>,
}

/// Rows of labelled feature values sharing one header.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Result<Self, FeatureError> {
        check_names(&names).map_err(FeatureError::Table)?;
        Ok(FeatureTable { names, rows: Vec::new() })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, id: impl Into<String>, label: Label, vector: FeatureVector) -> Result<(), FeatureError> {
        if vector.names != self.names {
            return Err(FeatureError::Table(format!(
                "row names {:?} do not match header {:?}",
                vector.names, self.names
            )));
        }
        self.rows.push(FeatureRow { id: id.into(), label, values: vector.values });
        Ok(())
    }

    pub fn vector(&self, row: usize) -> FeatureVector {
        FeatureVector {
            names: self.names.clone(),
            values: self.rows[row].values.clone(),
        }
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    /// Copy restricted to `rows` (by index, in the given order).
    pub fn subset(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Copy restricted to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable, FeatureError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| FeatureError::Table(format!("no feature named {n:?}")))
            })
            .collect::<Result<_, _>>()?;
        let mut out = FeatureTable::new(names.to_vec())?;
        out.rows = self
            .rows
            .iter()
            .map(|r| FeatureRow {
                id: r.id.clone(),
                label: r.label,
                values: idx.iter().map(|&i| r.values[i]).collect(),
            })
            .collect();
        Ok(out)
    }

    /// CSV with header `id,label,<names...>`; floats use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.id.clone(), r.label.to_string()];
            rec.extend(r.values.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "id" || &header[1] != "label" {
            return Err(FeatureError::Table("header must start with `id,label`".into()));
        }
        let mut table = FeatureTable::new(header.iter().skip(2).map(str::to_string).collect())?;
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let label: Label = rec[1]
                .parse()
                .map_err(|e| FeatureError::Table(format!("row {}: {e}", line + 1)))?;
            let values = rec
                .iter()
                .skip(2)
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| FeatureError::Table(format!("row {}: {e}", line + 1)))?;
            let vector = FeatureVector::new(table.names.clone(), values)
                .map_err(|e| FeatureError::Table(format!("row {}: {e}", line + 1)))?;
            table.push(&rec[0], label, vector)?;
        }
        Ok(table)
    }
}

/// Fisher discriminant ratio `(mu_pos - mu_neg)^2 / (var_pos + var_neg + eps)`
/// per feature, population variances, in header order.
pub fn fisher_scores(table: &FeatureTable) -> Result<Vec<f64>, FeatureError> {
    for label in Label::ALL {
        let found = table.count(label);
        if found < 2 {
            return Err(FeatureError::InsufficientData { label, needed: 2, found });
        }
    }
    let column = |f: usize, label: Label| -> Vec<f64> {
        table.rows.iter().filter(|r| r.label == label).map(|r| r.values[f]).collect()
    };
    (0..table.names.len())
        .map(|f| {
            let pos = Moments::of(&column(f, Label::Suspicious))?;
            let neg = Moments::of(&column(f, Label::Normal))?;
            let gap = pos.mean - neg.mean;
            Ok(gap * gap / (pos.std * pos.std + neg.std * neg.std + FISHER_EPSILON))
        })
        .collect()
}

/// Top `k` features by descending Fisher ratio; ties keep header order.
pub fn select_features(table: &FeatureTable, k: usize) -> Result<Vec<String>, FeatureError> {
    let max = table.names.len();
    if k == 0 || k > max {
        return Err(FeatureError::BadK { k, max });
    }
    let scores = fisher_scores(table)?;
    let mut order: Vec<usize> = (0..max).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order.into_iter().take(k).map(|i| table.names[i].clone()).collect())
}
