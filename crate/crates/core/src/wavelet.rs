//! Daubechies-4 orthonormal wavelet transform with periodic boundary
//! handling, plus the composed sensing operator for reconstructing in the
//! coefficient domain.
//!
//! Periodization keeps the implied synthesis matrix exactly orthonormal at
//! every dyadic length, so `idwt(dwt(x)) == x` to machine precision and
//! coefficient energy equals signal energy.

use crate::sensing::{OpsCount, SensingError, SparseBinaryMatrix};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error("length {n} incompatible with {levels} levels")]
    BadLength { n: usize, levels: usize },
    #[error("length {found} does not match basis length {expected}")]
    LengthMismatch { found: usize, expected: usize },
    #[error("sensing matrix N={phi_n} does not match basis length {basis_n}")]
    DimensionMismatch { phi_n: usize, basis_n: usize },
    #[error(transparent)]
    Sensing(#[from] SensingError),
}

/// Daubechies-4 low-pass analysis filter.
fn db4_low() -> [f64; 4] {
    let s3 = 3.0f64.sqrt();
    let c = 4.0 * 2.0f64.sqrt();
    [(1.0 + s3) / c, (3.0 + s3) / c, (3.0 - s3) / c, (1.0 - s3) / c]
}

/// Quadrature mirror high-pass filter of `db4_low`.
fn db4_high(low: &[f64; 4]) -> [f64; 4] {
    [low[3], -low[2], low[1], -low[0]]
}

/// A fixed-length Daubechies-4 basis with a chosen decomposition depth.
///
/// `levels == 0` is the identity transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveletBasis {
    n: usize,
    levels: usize,
}

impl WaveletBasis {
    pub fn new(n: usize, levels: usize) -> Result<Self, WaveletError> {
        if n == 0 {
            return Err(WaveletError::BadLength { n, levels });
        }
        if levels > 0 {
            let div = 1usize
                .checked_shl(levels as u32)
                .ok_or(WaveletError::BadLength { n, levels })?;
            if n % div != 0 || n / div == 0 {
                return Err(WaveletError::BadLength { n, levels });
            }
        }
        Ok(Self { n, levels })
    }

    /// Full decomposition depth `log2(n)`; requires `n` to be a power of
    /// two.
    pub fn full_depth(n: usize) -> Result<Self, WaveletError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(WaveletError::BadLength { n, levels: 0 });
        }
        Self::new(n, n.trailing_zeros() as usize)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Analysis transform: coefficients laid out as
    /// `[approx_L | detail_L | detail_{L-1} | ... | detail_1]`.
    pub fn dwt(&self, x: &[f64]) -> Result<Vec<f64>, WaveletError> {
        if x.len() != self.n {
            return Err(WaveletError::LengthMismatch {
                found: x.len(),
                expected: self.n,
            });
        }
        let low = db4_low();
        let high = db4_high(&low);
        let mut buf = x.to_vec();
        let mut len = self.n;
        let mut scratch = vec![0.0; self.n];
        for _ in 0..self.levels {
            let half = len / 2;
            for k in 0..half {
                let mut a = 0.0;
                let mut d = 0.0;
                for m in 0..4 {
                    let v = buf[(2 * k + m) % len];
                    a += low[m] * v;
                    d += high[m] * v;
                }
                scratch[k] = a;
                scratch[half + k] = d;
            }
            buf[..len].copy_from_slice(&scratch[..len]);
            len = half;
        }
        Ok(buf)
    }

    /// Synthesis transform, the exact inverse of [`Self::dwt`].
    pub fn idwt(&self, theta: &[f64]) -> Result<Vec<f64>, WaveletError> {
        if theta.len() != self.n {
            return Err(WaveletError::LengthMismatch {
                found: theta.len(),
                expected: self.n,
            });
        }
        let low = db4_low();
        let high = db4_high(&low);
        let mut buf = theta.to_vec();
        let mut len = self.n >> self.levels;
        let mut scratch = vec![0.0; self.n];
        for _ in 0..self.levels {
            let out_len = 2 * len;
            scratch[..out_len].fill(0.0);
            for k in 0..len {
                let a = buf[k];
                let d = buf[len + k];
                for m in 0..4 {
                    scratch[(2 * k + m) % out_len] += low[m] * a + high[m] * d;
                }
            }
            buf[..out_len].copy_from_slice(&scratch[..out_len]);
            len = out_len;
        }
        Ok(buf)
    }
}

/// Composes a sensing matrix with the synthesis basis into the dense
/// effective operator used for coefficient-domain reconstruction.
pub fn effective_sensing(
    phi: &SparseBinaryMatrix,
    basis: &WaveletBasis,
) -> Result<DMatrix<f64>, WaveletError> {
    if phi.n() != basis.n() {
        return Err(WaveletError::DimensionMismatch {
            phi_n: phi.n(),
            basis_n: basis.n(),
        });
    }
    let n = basis.n();
    let mut omega = DMatrix::zeros(phi.m(), n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        let col = basis.idwt(&unit)?;
        unit[j] = 0.0;
        let y = phi.compress(&col)?;
        omega.column_mut(j).copy_from_slice(&y);
    }
    Ok(omega)
}

/// Arithmetic cost of the cascade filter-bank transform at the given
/// depth: each level maps L inputs to two half-length subbands, and every
/// output of the 4-tap filters costs 4 multiplications and 3 additions.
pub fn wavelet_compression_ops(n: usize, levels: usize) -> Result<OpsCount, WaveletError> {
    WaveletBasis::new(n, levels)?;
    let mut additions = 0u64;
    let mut multiplications = 0u64;
    let mut len = n as u64;
    for _ in 0..levels {
        multiplications += 4 * len;
        additions += 3 * len;
        len /= 2;
    }
    Ok(OpsCount {
        additions,
        multiplications,
    })
}
