//! Netpbm PGM (P2/P5) parsing and emission, plus the normalized in-memory
//! raster every later stage works on.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PGM data: expected {expected} samples, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("sample {index} has value {value}, above maxval {maxval}")]
    SampleOutOfRange { index: usize, value: u32, maxval: u16 },
    #[error("invalid sample token {0:?}")]
    InvalidSample(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Integer samples exactly as stored in a PGM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    maxval: u16,
    samples: Vec<u16>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, maxval: u16, samples: Vec<u16>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidImage(format!("dimensions {width}x{height} must be positive")));
        }
        if maxval == 0 {
            return Err(ImageError::InvalidImage("maxval must be positive".into()));
        }
        if samples.len() != width * height {
            return Err(ImageError::InvalidImage(format!(
                "{} samples for a {width}x{height} image",
                samples.len()
            )));
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &s)| s > maxval) {
            return Err(ImageError::SampleOutOfRange { index, value: value.into(), maxval });
        }
        Ok(RawImage { width, height, maxval, samples })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn maxval(&self) -> u16 {
        self.maxval
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }
}

/// Row-major real-valued intensity raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidImage(format!("dimensions {width}x{height} must be positive")));
        }
        if pixels.len() != width * height {
            return Err(ImageError::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(ImageError::InvalidImage(format!("pixel {i} is not finite")));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self, ImageError> {
        Self::new(m.cols(), m.rows(), m.as_slice().to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Rows become matrix rows, columns matrix columns.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.height, self.width, self.pixels.clone())
    }

    pub fn max_pixel(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `pixels[i] = samples[i] / maxval`.
pub fn to_gray(raw: &RawImage) -> GrayImage {
    let scale = f64::from(raw.maxval);
    GrayImage {
        width: raw.width,
        height: raw.height,
        pixels: raw.samples.iter().map(|&s| f64::from(s) / scale).collect(),
    }
}

/// Quantizes with round-half-up: `floor(p * maxval + 0.5)`, clamped to `[0, maxval]`.
pub fn quantize(img: &GrayImage, maxval: u16) -> RawImage {
    let scale = f64::from(maxval);
    let samples = img
        .pixels
        .iter()
        .map(|&p| (p * scale + 0.5).floor().clamp(0.0, scale) as u16)
        .collect();
    RawImage {
        width: img.width,
        height: img.height,
        maxval,
        samples,
    }
}

pub fn write_pgm(img: &GrayImage, maxval: u16, binary: bool) -> Vec<u8> {
    encode_pgm(&quantize(img, maxval), binary)
}

/// Serializes a raw image. Header tokens are separated by single newlines;
/// P2 bodies put one image row per line.
pub fn encode_pgm(raw: &RawImage, binary: bool) -> Vec<u8> {
    let magic = if binary { "P5" } else { "P2" };
    let mut header = String::new();
    let _ = write!(header, "{magic}\n{}\n{}\n{}\n", raw.width, raw.height, raw.maxval);
    let mut out = header.into_bytes();
    if binary {
        if raw.maxval > 255 {
            out.reserve(raw.samples.len() * 2);
            for &s in &raw.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        } else {
            out.extend(raw.samples.iter().map(|&s| s as u8));
        }
    } else {
        let mut body = String::new();
        for row in raw.samples.chunks(raw.width) {
            for (i, s) in row.iter().enumerate() {
                if i > 0 {
                    body.push(' ');
                }
                let _ = write!(body, "{s}");
            }
            body.push('\n');
        }
        out.extend_from_slice(body.as_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments (to end of line).
    fn skip_filler(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_filler();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<u32, ImageError> {
        let tok = self
            .token()
            .ok_or_else(|| ImageError::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                ImageError::MalformedHeader(format!("{what} is not a number: {:?}", String::from_utf8_lossy(tok)))
            })
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<RawImage, ImageError> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => {
            let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
            return Err(ImageError::MalformedHeader(format!("unsupported magic {shown:?}")));
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(ImageError::MalformedHeader("magic must be followed by whitespace".into()));
    }
    let width = cur.header_number("width")? as usize;
    let height = cur.header_number("height")? as usize;
    let maxval = cur.header_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!("dimensions {width}x{height} must be positive")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::MalformedHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    let maxval = maxval as u16;
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| ImageError::MalformedHeader("image dimensions overflow".into()))?;

    let mut samples = Vec::with_capacity(expected.min(1 << 24));
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(ImageError::TruncatedData { expected, found: 0 }),
        }
        let data = &bytes[cur.pos..];
        let wide = maxval > 255;
        let step = if wide { 2 } else { 1 };
        let found = data.len() / step;
        if found < expected {
            return Err(ImageError::TruncatedData { expected, found });
        }
        for chunk in data.chunks_exact(step).take(expected) {
            let v = if wide { u16::from_be_bytes([chunk[0], chunk[1]]) } else { u16::from(chunk[0]) };
            samples.push(v);
        }
    } else {
        while samples.len() < expected {
            let Some(tok) = cur.token() else {
                return Err(ImageError::TruncatedData { expected, found: samples.len() });
            };
            let value = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| ImageError::InvalidSample(String::from_utf8_lossy(tok).into_owned()))?;
            if value > u32::from(maxval) {
                return Err(ImageError::SampleOutOfRange { index: samples.len(), value, maxval });
            }
            samples.push(value as u16);
        }
    }
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &s)| s > maxval) {
        return Err(ImageError::SampleOutOfRange { index, value: value.into(), maxval });
    }
    Ok(RawImage { width, height, maxval, samples })
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<RawImage, ImageError> {
    read_pgm(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ascii_example() {
        let raw = read_pgm(b"P2\n2 2\n255\n0 255 128 64").unwrap();
        assert_eq!(raw, RawImage::new(2, 2, 255, vec![0, 255, 128, 64]).unwrap());
    }

    #[test]
    fn binary_example() {
        let mut bytes = b"P5\n1 1\n255\n".to_vec();
        bytes.push(0x40);
        let raw = read_pgm(&bytes).unwrap();
        assert_eq!(raw.samples(), &[64]);
        assert_eq!((raw.width(), raw.height(), raw.maxval()), (1, 1, 255));
    }

    #[test]
    fn binary_sixteen_bit_is_big_endian() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend_from_slice(&[0x01, 0x02, 0xff, 0xfe]);
        assert_eq!(read_pgm(&bytes).unwrap().samples(), &[0x0102, 0xfffe]);
    }

    #[test]
    fn rejects_other_magics() {
        for bad in [&b"P7\n1 1\n255\n0"[..], b"P1\n1 1\n1", b"P6\n1 1\n255\n", b"", b"P"] {
            assert!(matches!(read_pgm(bad), Err(ImageError::MalformedHeader(_))), "{bad:?}");
        }
    }

    #[test]
    fn comments_anywhere_in_header() {
        let raw = read_pgm(b"P2\n# made by hand\n2 # width\n# another\n1\n# max\n9\n3 9").unwrap();
        assert_eq!(raw.samples(), &[3, 9]);
        assert_eq!(raw.maxval(), 9);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(read_pgm(b"P2\nx 2\n255\n"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(read_pgm(b"P2\n0 2\n255\n"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(read_pgm(b"P2\n1 1\n70000\n0"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(read_pgm(b"P2\n1 1\n"), Err(ImageError::MalformedHeader(_))));
    }

    #[test]
    fn truncated_data() {
        assert!(matches!(
            read_pgm(b"P2\n2 2\n255\n1 2 3"),
            Err(ImageError::TruncatedData { expected: 4, found: 3 })
        ));
        assert!(matches!(
            read_pgm(b"P5\n2 2\n255\n\x01\x02"),
            Err(ImageError::TruncatedData { expected: 4, found: 2 })
        ));
        assert!(matches!(
            read_pgm(b"P5\n1 1\n65535\n\x01"),
            Err(ImageError::TruncatedData { expected: 1, found: 0 })
        ));
    }

    #[test]
    fn sample_out_of_range() {
        assert!(matches!(
            read_pgm(b"P2\n2 1\n100\n5 101"),
            Err(ImageError::SampleOutOfRange { index: 1, value: 101, maxval: 100 })
        ));
        assert!(matches!(
            read_pgm(b"P5\n1 1\n100\n\xc8"),
            Err(ImageError::SampleOutOfRange { index: 0, value: 200, .. })
        ));
    }

    #[test]
    fn to_gray_examples() {
        let g = to_gray(&RawImage::new(1, 2, 255, vec![0, 255]).unwrap());
        assert_eq!(g.pixels(), &[0.0, 1.0]);
        let g = to_gray(&RawImage::new(1, 1, 200, vec![50]).unwrap());
        assert_eq!(g.pixels(), &[0.25]);
        let g = to_gray(&RawImage::new(2, 2, 65535, vec![65535, 0, 0, 65535]).unwrap());
        assert_eq!(g.pixels(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn write_examples() {
        let one = GrayImage::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(write_pgm(&one, 255, false), b"P2\n1\n1\n255\n255\n");
        let half = GrayImage::new(1, 1, vec![0.5]).unwrap();
        assert_eq!(read_pgm(&write_pgm(&half, 255, true)).unwrap().samples(), &[128]);
    }

    #[test]
    fn quantized_roundtrip_is_stable() {
        let img = GrayImage::new(3, 2, vec![0.0, 0.1, 0.33, 0.5, 0.77, 1.0]).unwrap();
        for binary in [false, true] {
            for maxval in [255u16, 65535] {
                let once = to_gray(&read_pgm(&write_pgm(&img, maxval, binary)).unwrap());
                let twice = to_gray(&read_pgm(&write_pgm(&once, maxval, binary)).unwrap());
                assert_eq!(once, twice);
            }
        }
    }

    fn raw_image() -> impl Strategy<Value = RawImage> {
        (1usize..12, 1usize..12, prop_oneof![Just(255u16), Just(65535u16), 1u16..1000]).prop_flat_map(
            |(w, h, maxval)| {
                proptest::collection::vec(0..=maxval, w * h)
                    .prop_map(move |s| RawImage::new(w, h, maxval, s).unwrap())
            },
        )
    }

    proptest! {
        #[test]
        fn encode_then_read_is_identity(raw in raw_image(), binary in any::<bool>()) {
            prop_assert_eq!(read_pgm(&encode_pgm(&raw, binary)).unwrap(), raw);
        }

        #[test]
        fn to_gray_preserves_argmax(raw in raw_image()) {
            let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
            let samples: Vec<f64> = raw.samples().iter().map(|&s| f64::from(s)).collect();
            prop_assert_eq!(argmax(&samples), argmax(to_gray(&raw).pixels()));
        }
    }
}
