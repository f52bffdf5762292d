//! Unnormalized forward 2D DFT,
//! `F(k,l) = sum_{i,j} f(i,j) * exp(-2*pi*i*(k*i/N + l*j/N))`,
//! by direct summation and by a row-column radix-2 FFT.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FourierError {
    #[error("direct DFT needs a square matrix, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("empty input")]
    Empty,
}

/// Square complex spectrum, row-major, `k` indexing rows and `l` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    size: usize,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(size: usize, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), size * size, "spectrum buffer does not match {size}x{size}");
        Spectrum { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.values[k * self.size + l]
    }

    pub fn dc(&self) -> Complex64 {
        self.values[0]
    }
}

/// `exp(-2*pi*i*r/n)` for `r = 0..n`.
fn unit_roots(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|r| Complex64::from_polar(1.0, -2.0 * PI * r as f64 / n as f64))
        .collect()
}

/// Direct `O(N^4)` evaluation. Phases are reduced modulo `N` before lookup
/// so accuracy does not degrade with `k*i`.
pub fn dft2d_direct(m: &Matrix) -> Result<Spectrum, FourierError> {
    let (rows, cols) = m.dims();
    if rows == 0 || cols == 0 {
        return Err(FourierError::Empty);
    }
    if rows != cols {
        return Err(FourierError::NotSquare(rows, cols));
    }
    let n = rows;
    let roots = unit_roots(n);
    let mut values = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let ki = (k * i) % n;
                for j in 0..n {
                    acc += roots[(ki + l * j) % n] * m[(i, j)];
                }
            }
            values.push(acc);
        }
    }
    Ok(Spectrum { size: n, values })
}

/// In-place iterative radix-2 FFT (decimation in time). `twiddles` holds
/// `exp(-2*pi*i*r/n)` for `r < n/2`.
fn fft_in_place(buf: &mut [Complex64], twiddles: &[Complex64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for t in 0..half {
                let w = twiddles[t * stride];
                let u = buf[start + t];
                let v = buf[start + t + half] * w;
                buf[start + t] = u + v;
                buf[start + t + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// Zero-pads to the smallest enclosing power-of-two square, then transforms
/// rows followed by columns.
pub fn fft2d(m: &Matrix) -> Spectrum {
    let n = m.rows().max(m.cols()).max(1).next_power_of_two();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..m.rows() {
        for (c, &v) in m.row(r).iter().enumerate() {
            values[r * n + c] = Complex64::new(v, 0.0);
        }
    }
    let twiddles: Vec<Complex64> = unit_roots(n).into_iter().take(n / 2).collect();
    for row in values.chunks_mut(n) {
        fft_in_place(row, &twiddles);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            column[r] = values[r * n + c];
        }
        fft_in_place(&mut column, &twiddles);
        for r in 0..n {
            values[r * n + c] = column[r];
        }
    }
    Spectrum { size: n, values }
}

/// `log(1 + |F|)`, quadrant-swapped so DC lands at `(N/2, N/2)`.
pub fn log_magnitude(s: &Spectrum) -> Matrix {
    let n = s.size;
    let shift = n / 2;
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            out[((k + shift) % n, (l + shift) % n)] = s.get(k, l).norm().ln_1p();
        }
    }
    out
}
