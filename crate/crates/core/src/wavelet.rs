//! Dyadic discrete wavelet transform (scale factor 2, unit translation step)
//! with periodic boundary extension.
//!
//! One 2D level filters along rows (x) first, then along the columns of each
//! half (y). Band names follow the usual quadrant layout: `LL` top-left,
//! `HL` top-right, `LH` bottom-left, `HH` bottom-right, where the first letter
//! is the row (x) filter and the second the column (y) filter.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WaveletError {
    #[error("signal length {0} is odd")]
    OddLength(usize),
    #[error("signal length {len} is shorter than the filter ({filter})")]
    SignalTooShort { len: usize, filter: usize },
    #[error("approximation and detail lengths differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("{levels} levels are too deep for a {rows}x{cols} input with a {filter}-tap filter")]
    TooManyLevels { levels: usize, rows: usize, cols: usize, filter: usize },
    #[error("malformed decomposition: {0}")]
    MalformedDecomposition(String),
    #[error("unknown wavelet filter {0:?} (expected `haar` or `daub4`)")]
    UnknownFilter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterId {
    Haar,
    Daub4,
}

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterId::Haar => "haar",
            FilterId::Daub4 => "daub4",
        })
    }
}

impl FromStr for FilterId {
    type Err = WaveletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haar" => Ok(FilterId::Haar),
            "daub4" | "db2" | "d4" => Ok(FilterId::Daub4),
            other => Err(WaveletError::UnknownFilter(other.to_string())),
        }
    }
}

/// Orthonormal two-channel analysis filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    id: FilterId,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl WaveletFilter {
    pub fn new(id: FilterId) -> Self {
        let lowpass = match id {
            FilterId::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            FilterId::Daub4 => {
                let s3 = 3f64.sqrt();
                let norm = 4.0 * std::f64::consts::SQRT_2;
                vec![(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm, (1.0 - s3) / norm]
            }
        };
        let highpass = quadrature_mirror(&lowpass);
        WaveletFilter { id, lowpass, highpass }
    }

    pub fn haar() -> Self {
        Self::new(FilterId::Haar)
    }

    pub fn daub4() -> Self {
        Self::new(FilterId::Daub4)
    }

    pub fn id(&self) -> FilterId {
        self.id
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

/// `high[k] = (-1)^k * low[L-1-k]`
fn quadrature_mirror(low: &[f64]) -> Vec<f64> {
    let n = low.len();
    (0..n)
        .map(|k| if k % 2 == 0 { low[n - 1 - k] } else { -low[n - 1 - k] })
        .collect()
}

/// One analysis step with periodic extension, filter anchored at `2k`:
/// `approx[k] = sum_j low[j] * s[(2k + j) mod n]`, likewise for `detail`.
pub fn dwt1d(signal: &[f64], filter: &WaveletFilter) -> Result<(Vec<f64>, Vec<f64>), WaveletError> {
    let n = signal.len();
    if !n.is_multiple_of(2) {
        return Err(WaveletError::OddLength(n));
    }
    if n < filter.len() {
        return Err(WaveletError::SignalTooShort { len: n, filter: filter.len() });
    }
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (j, (lo, hi)) in filter.lowpass.iter().zip(&filter.highpass).enumerate() {
            let s = signal[(2 * k + j) % n];
            a += lo * s;
            d += hi * s;
        }
        approx[k] = a;
        detail[k] = d;
    }
    Ok((approx, detail))
}

/// Synthesis step: the transpose (and hence inverse) of [`dwt1d`].
pub fn idwt1d(approx: &[f64], detail: &[f64], filter: &WaveletFilter) -> Result<Vec<f64>, WaveletError> {
    if approx.len() != detail.len() {
        return Err(WaveletError::DimensionMismatch(approx.len(), detail.len()));
    }
    let n = approx.len() * 2;
    let mut out = vec![0.0; n];
    for (k, (a, d)) in approx.iter().zip(detail).enumerate() {
        for (j, (lo, hi)) in filter.lowpass.iter().zip(&filter.highpass).enumerate() {
            out[(2 * k + j) % n] += lo * a + hi * d;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    LL,
    HL,
    LH,
    HH,
}

impl Band {
    pub const DETAIL: [Band; 3] = [Band::HL, Band::LH, Band::HH];

    pub fn name(self) -> &'static str {
        match self {
            Band::LL => "ll",
            Band::HL => "hl",
            Band::LH => "lh",
            Band::HH => "hh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub band: Band,
    pub level: usize,
    pub data: Matrix,
}

/// The four outputs of a single 2D level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBands {
    pub ll: Matrix,
    pub hl: Matrix,
    pub lh: Matrix,
    pub hh: Matrix,
}

pub fn dwt2d_level(m: &Matrix, filter: &WaveletFilter) -> Result<LevelBands, WaveletError> {
    let (rows, cols) = m.dims();
    if rows % 2 != 0 {
        return Err(WaveletError::OddLength(rows));
    }
    if cols % 2 != 0 {
        return Err(WaveletError::OddLength(cols));
    }
    let (hr, hc) = (rows / 2, cols / 2);

    // x-axis: each row splits into [low | high]
    let mut low_x = Matrix::zeros(rows, hc);
    let mut high_x = Matrix::zeros(rows, hc);
    for r in 0..rows {
        let (a, d) = dwt1d(m.row(r), filter)?;
        low_x.row_mut(r).copy_from_slice(&a);
        high_x.row_mut(r).copy_from_slice(&d);
    }

    // y-axis on each half
    let split_columns = |half: &Matrix| -> Result<(Matrix, Matrix), WaveletError> {
        let mut top = Matrix::zeros(hr, hc);
        let mut bottom = Matrix::zeros(hr, hc);
        for c in 0..hc {
            let (a, d) = dwt1d(&half.column(c), filter)?;
            top.set_column(c, &a);
            bottom.set_column(c, &d);
        }
        Ok((top, bottom))
    };
    let (ll, lh) = split_columns(&low_x)?;
    let (hl, hh) = split_columns(&high_x)?;
    Ok(LevelBands { ll, hl, lh, hh })
}

pub fn idwt2d_level(bands: &LevelBands, filter: &WaveletFilter) -> Result<Matrix, WaveletError> {
    let (hr, hc) = bands.ll.dims();
    for (name, b) in [("HL", &bands.hl), ("LH", &bands.lh), ("HH", &bands.hh)] {
        if b.dims() != (hr, hc) {
            return Err(WaveletError::MalformedDecomposition(format!(
                "{name} band is {:?}, LL is {:?}",
                b.dims(),
                (hr, hc)
            )));
        }
    }
    let (rows, cols) = (hr * 2, hc * 2);
    let merge_columns = |top: &Matrix, bottom: &Matrix| -> Result<Matrix, WaveletError> {
        let mut half = Matrix::zeros(rows, hc);
        for c in 0..hc {
            half.set_column(c, &idwt1d(&top.column(c), &bottom.column(c), filter)?);
        }
        Ok(half)
    };
    let low_x = merge_columns(&bands.ll, &bands.lh)?;
    let high_x = merge_columns(&bands.hl, &bands.hh)?;
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        out.row_mut(r).copy_from_slice(&idwt1d(low_x.row(r), high_x.row(r), filter)?);
    }
    Ok(out)
}

/// Extends odd dimensions by replicating the last row/column once. Returns
/// the padded matrix and the original `(rows, cols)`.
pub fn pad_even(m: &Matrix) -> (Matrix, (usize, usize)) {
    let (rows, cols) = m.dims();
    let (pr, pc) = (rows + rows % 2, cols + cols % 2);
    if (pr, pc) == (rows, cols) {
        return (m.clone(), (rows, cols));
    }
    let padded = Matrix::from_fn(pr, pc, |r, c| m[(r.min(rows - 1), c.min(cols - 1))]);
    (padded, (rows, cols))
}

/// Detail bands of one level plus the unpadded size of that level's input.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailLevel {
    pub input_dims: (usize, usize),
    pub hl: Matrix,
    pub lh: Matrix,
    pub hh: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    filter: FilterId,
    /// Index 0 is level 1 (finest).
    details: Vec<DetailLevel>,
    ll: Matrix,
}

impl WaveletDecomposition {
    pub fn new(filter: FilterId, details: Vec<DetailLevel>, ll: Matrix) -> Self {
        WaveletDecomposition { filter, details, ll }
    }

    pub fn filter(&self) -> FilterId {
        self.filter
    }

    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Final-level approximation band.
    pub fn ll(&self) -> &Matrix {
        &self.ll
    }

    /// Detail bands of `level` (1-based, 1 = finest).
    pub fn detail_level(&self, level: usize) -> Option<&DetailLevel> {
        level.checked_sub(1).and_then(|i| self.details.get(i))
    }

    pub fn band(&self, level: usize, band: Band) -> Option<&Matrix> {
        if band == Band::LL {
            return (level == self.levels()).then_some(&self.ll);
        }
        let d = self.detail_level(level)?;
        Some(match band {
            Band::HL => &d.hl,
            Band::LH => &d.lh,
            Band::HH => &d.hh,
            Band::LL => unreachable!(),
        })
    }

    /// All `3 * levels + 1` subbands, finest details first, final LL last.
    pub fn subbands(&self) -> Vec<Subband> {
        let mut out = Vec::with_capacity(3 * self.levels() + 1);
        for (i, d) in self.details.iter().enumerate() {
            for (band, data) in [(Band::HL, &d.hl), (Band::LH, &d.lh), (Band::HH, &d.hh)] {
                out.push(Subband { band, level: i + 1, data: data.clone() });
            }
        }
        out.push(Subband { band: Band::LL, level: self.levels(), data: self.ll.clone() });
        out
    }
}

/// Checks that `levels` halvings (with even-padding before each) leave at
/// least `filter_len` samples per axis.
pub fn check_levels(rows: usize, cols: usize, levels: usize, filter_len: usize) -> Result<(), WaveletError> {
    let err = WaveletError::TooManyLevels { levels, rows, cols, filter: filter_len };
    if levels == 0 || rows == 0 || cols == 0 {
        return Err(err);
    }
    let (mut r, mut c) = (rows, cols);
    for _ in 0..levels {
        r = r.div_ceil(2);
        c = c.div_ceil(2);
    }
    if r.min(c) < filter_len {
        return Err(err);
    }
    Ok(())
}

pub fn dwt2d(m: &Matrix, filter: &WaveletFilter, levels: usize) -> Result<WaveletDecomposition, WaveletError> {
    check_levels(m.rows(), m.cols(), levels, filter.len())?;
    let mut details = Vec::with_capacity(levels);
    let mut current = m.clone();
    for _ in 0..levels {
        let (padded, input_dims) = pad_even(&current);
        let bands = dwt2d_level(&padded, filter)?;
        details.push(DetailLevel { input_dims, hl: bands.hl, lh: bands.lh, hh: bands.hh });
        current = bands.ll;
    }
    Ok(WaveletDecomposition { filter: filter.id(), details, ll: current })
}

/// Inverts [`dwt2d`], returning a matrix of the original input size.
pub fn idwt2d(d: &WaveletDecomposition) -> Result<Matrix, WaveletError> {
    if d.details.is_empty() {
        return Err(WaveletError::MalformedDecomposition("no levels".into()));
    }
    let filter = WaveletFilter::new(d.filter);
    let mut current = d.ll.clone();
    for (i, level) in d.details.iter().enumerate().rev() {
        let (rows, cols) = level.input_dims;
        let expected = (rows.div_ceil(2), cols.div_ceil(2));
        if current.dims() != expected {
            return Err(WaveletError::MalformedDecomposition(format!(
                "level {} expects {:?} approximation, found {:?}",
                i + 1,
                expected,
                current.dims()
            )));
        }
        let bands = LevelBands {
            ll: current,
            hl: level.hl.clone(),
            lh: level.lh.clone(),
            hh: level.hh.clone(),
        };
        let full = idwt2d_level(&bands, &filter)?;
        current = if full.dims() == (rows, cols) { full } else { full.block(0, 0, rows, cols) };
    }
    Ok(current)
}
