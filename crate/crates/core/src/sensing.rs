//! Sparse binary sensing matrices: generation, compression, and
//! arithmetic cost accounting.
//!
//! A sensing matrix has exactly `d` ones per column at random row
//! positions, so compressing a window costs additions only. Generation is
//! deterministic given a seed and retries with incremented seeds until the
//! matrix has full row rank; the accepted seed is stored so the matrix can
//! be regenerated from its descriptor alone.

use crate::signal_io::MatrixDescriptor;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Retries allowed past the initial seed before generation gives up.
pub const RANK_RETRY_BUDGET: u64 = 100;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("invalid dimensions: need 1 <= d <= M <= N, got M={m} N={n} d={d}")]
    BadDimensions { m: usize, n: usize, d: usize },
    #[error("no full-rank matrix found for M={m} N={n} d={d} within {budget} retries of seed {seed}")]
    RankRetryBudget {
        m: usize,
        n: usize,
        d: usize,
        seed: u64,
        budget: u64,
    },
    #[error("descriptor seed {seed} does not yield a full-rank matrix")]
    DescriptorRankMismatch { seed: u64 },
    #[error("input length {found} does not match N={expected}")]
    LengthMismatch { found: usize, expected: usize },
    #[error("column {col} is invalid: {reason}")]
    BadColumn { col: usize, reason: String },
    #[error("compression ratio {0} out of [0, 100)")]
    BadRatio(f64),
    #[error("M={m} exceeds N={n}")]
    RowsExceedCols { m: usize, n: usize },
    #[error("N must be positive")]
    ZeroLength,
}

/// An M-by-N binary matrix stored as per-column sorted row-index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    m: usize,
    n: usize,
    d: usize,
    seed: u64,
    columns: Vec<Vec<usize>>,
}

impl SparseBinaryMatrix {
    /// Generates a full-row-rank matrix deterministically from `seed`.
    ///
    /// If the draw at `seed` is rank deficient, seeds `seed+1, seed+2, ...`
    /// are tried in turn; the accepted seed is recorded in the result.
    pub fn generate(m: usize, n: usize, d: usize, seed: u64) -> Result<Self, SensingError> {
        check_dims(m, n, d)?;
        for attempt in 0..=RANK_RETRY_BUDGET {
            let s = seed.wrapping_add(attempt);
            let columns = draw_columns(m, n, d, s);
            if has_full_row_rank(&columns, m, n) {
                return Ok(Self {
                    m,
                    n,
                    d,
                    seed: s,
                    columns,
                });
            }
        }
        Err(SensingError::RankRetryBudget {
            m,
            n,
            d,
            seed,
            budget: RANK_RETRY_BUDGET,
        })
    }

    /// Regenerates the matrix a descriptor refers to. The stored seed must
    /// be an accepted one, so the draw is expected to pass the rank check
    /// directly.
    pub fn from_descriptor(desc: &MatrixDescriptor) -> Result<Self, SensingError> {
        check_dims(desc.m, desc.n, desc.d)?;
        let columns = draw_columns(desc.m, desc.n, desc.d, desc.seed);
        if !has_full_row_rank(&columns, desc.m, desc.n) {
            return Err(SensingError::DescriptorRankMismatch { seed: desc.seed });
        }
        Ok(Self {
            m: desc.m,
            n: desc.n,
            d: desc.d,
            seed: desc.seed,
            columns,
        })
    }

    /// Builds a matrix from explicit column index lists (audit/test path).
    pub fn from_columns(
        m: usize,
        n: usize,
        columns: Vec<Vec<usize>>,
        seed: u64,
    ) -> Result<Self, SensingError> {
        if columns.len() != n || n == 0 || m == 0 {
            return Err(SensingError::BadDimensions {
                m,
                n,
                d: columns.first().map_or(0, |c| c.len()),
            });
        }
        let d = columns[0].len();
        check_dims(m, n, d)?;
        for (col, list) in columns.iter().enumerate() {
            if list.len() != d {
                return Err(SensingError::BadColumn {
                    col,
                    reason: format!("has {} entries, expected {}", list.len(), d),
                });
            }
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(SensingError::BadColumn {
                        col,
                        reason: "row indices not strictly increasing".into(),
                    });
                }
            }
            if let Some(&last) = list.last() {
                if last >= m {
                    return Err(SensingError::BadColumn {
                        col,
                        reason: format!("row index {last} out of range"),
                    });
                }
            }
        }
        Ok(Self {
            m,
            n,
            d,
            seed,
            columns,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The accepted generation seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sorted row indices of the ones in each column.
    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    pub fn descriptor(&self) -> MatrixDescriptor {
        MatrixDescriptor {
            seed: self.seed,
            m: self.m,
            n: self.n,
            d: self.d,
        }
    }

    /// Computes `y = Phi x` by summing selected input entries per row.
    ///
    /// Addends accumulate in column order, so the result is bitwise
    /// deterministic and matches the dense product exactly.
    pub fn compress(&self, x: &[f64]) -> Result<Vec<f64>, SensingError> {
        if x.len() != self.n {
            return Err(SensingError::LengthMismatch {
                found: x.len(),
                expected: self.n,
            });
        }
        let mut y = vec![0.0; self.m];
        for (j, rows) in self.columns.iter().enumerate() {
            let xj = x[j];
            for &r in rows {
                y[r] += xj;
            }
        }
        Ok(y)
    }

    /// Expands to a dense 0/1 matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.m, self.n);
        for (j, rows) in self.columns.iter().enumerate() {
            for &r in rows {
                dense[(r, j)] = 1.0;
            }
        }
        dense
    }

    /// Arithmetic cost of one compression: each of the M output sums of k
    /// addends costs k-1 additions and the k values total d*N, so the whole
    /// product needs d*N - M additions and no multiplications.
    pub fn compression_ops(&self) -> OpsCount {
        OpsCount {
            additions: (self.d * self.n - self.m) as u64,
            multiplications: 0,
        }
    }
}

/// Addition/multiplication counts for a compression scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpsCount {
    pub additions: u64,
    pub multiplications: u64,
}

fn check_dims(m: usize, n: usize, d: usize) -> Result<(), SensingError> {
    // M == N is permitted so a zero compression ratio stays expressible.
    if d == 0 || d > m || m > n {
        return Err(SensingError::BadDimensions { m, n, d });
    }
    Ok(())
}

/// Draws each column's `d` distinct row indices uniformly without
/// replacement, sorted ascending.
fn draw_columns(m: usize, n: usize, d: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut rows = rand::seq::index::sample(&mut rng, m, d).into_vec();
            rows.sort_unstable();
            rows
        })
        .collect()
}

/// Real rank check via Gaussian elimination with partial pivoting.
fn has_full_row_rank(columns: &[Vec<usize>], m: usize, n: usize) -> bool {
    if m > n {
        return false;
    }
    // Column-major dense copy.
    let mut a = vec![0.0f64; m * n];
    for (j, rows) in columns.iter().enumerate() {
        for &r in rows {
            a[j * m + r] = 1.0;
        }
    }
    let tol = 1e-8;
    let mut rank = 0usize;
    for j in 0..n {
        if rank == m {
            break;
        }
        // Pivot search in column j below `rank`.
        let (mut best, mut best_abs) = (rank, a[j * m + rank].abs());
        for i in rank + 1..m {
            let v = a[j * m + i].abs();
            if v > best_abs {
                best = i;
                best_abs = v;
            }
        }
        if best_abs <= tol {
            continue;
        }
        if best != rank {
            for col in j..n {
                a.swap(col * m + rank, col * m + best);
            }
        }
        let pivot = a[j * m + rank];
        for i in rank + 1..m {
            let factor = a[j * m + i] / pivot;
            if factor == 0.0 {
                continue;
            }
            for col in j..n {
                a[col * m + i] -= factor * a[col * m + rank];
            }
        }
        rank += 1;
    }
    rank == m
}

/// Compression ratio in percent: `(N - M) / N * 100`.
pub fn compression_ratio(n: usize, m: usize) -> Result<f64, SensingError> {
    if n == 0 {
        return Err(SensingError::ZeroLength);
    }
    if m > n {
        return Err(SensingError::RowsExceedCols { m, n });
    }
    Ok((n - m) as f64 / n as f64 * 100.0)
}

/// Measurement count for a target compression ratio:
/// `M = round(N * (1 - cr/100))`, clamped to `[1, N]`.
pub fn rows_for_cr(n: usize, cr: f64) -> Result<usize, SensingError> {
    if n == 0 {
        return Err(SensingError::ZeroLength);
    }
    if !(0.0..100.0).contains(&cr) {
        return Err(SensingError::BadRatio(cr));
    }
    let m = (n as f64 * (1.0 - cr / 100.0)).round() as usize;
    Ok(m.clamp(1, n))
}
