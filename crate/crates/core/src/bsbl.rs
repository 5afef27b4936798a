//! Block sparse Bayesian learning reconstruction, bound-optimization
//! variant.
//!
//! The signal is modeled as contiguous blocks, each with a zero-mean
//! Gaussian prior `gamma_i * B_i` where `gamma_i` scales the block and
//! `B_i` captures intra-block correlation. Hyperparameters are fitted by
//! iterating posterior computation with multiplicative variance updates;
//! the posterior mean is the reconstruction. Pruning of small block
//! variances is disabled by default so non-sparse signals survive
//! reconstruction intact.
//!
//! The measurement covariance `C = lambda*I + Phi*Sigma0*Phi'` is an
//! M-by-M system, factored once per iteration; the N-by-N prior is never
//! inverted.

use crate::sensing::{SensingError, SparseBinaryMatrix};
use crate::signal_io::{
    desegment_windows, CompressedPayload, MultichannelRecording, SignalIoError,
};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

/// Floor used in the relative convergence test so dead blocks do not
/// divide by zero.
const GAMMA_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BsblError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("measurement covariance numerically singular at iteration {iteration}")]
    SingularSystem { iteration: usize },
    #[error("invalid payload set: {0}")]
    Payloads(String),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    SignalIo(#[from] SignalIoError),
}

/// A split of an N-length window into contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self, BsblError> {
        if sizes.is_empty() {
            return Err(BsblError::Partition("no blocks".into()));
        }
        if sizes.iter().any(|&h| h == 0) {
            return Err(BsblError::Partition("zero-sized block".into()));
        }
        Ok(Self { sizes })
    }

    /// `floor(N/h)` blocks of size `h`, plus one remainder block when `h`
    /// does not divide `N`.
    pub fn uniform(n: usize, h: usize) -> Result<Self, BsblError> {
        if h == 0 || h > n {
            return Err(BsblError::Partition(format!(
                "block size {h} invalid for window length {n}"
            )));
        }
        let mut sizes = vec![h; n / h];
        if n % h != 0 {
            sizes.push(n % h);
        }
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `(offset, size)` of every block, in order.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.sizes.len());
        let mut off = 0;
        for &h in &self.sizes {
            out.push((off, h));
            off += h;
        }
        out
    }
}

/// Noise-variance handling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// Fixed tiny value scaled to the measurements: `1e-10 * mean(y^2)`.
    /// Appropriate for the noiseless transmission model.
    Auto,
    /// User-supplied fixed value.
    Fixed(f64),
    /// Re-estimated every iteration (noise-folding regime).
    Learn,
}

#[derive(Debug, Clone)]
pub struct BsblConfig {
    /// Learn a shared AR(1) intra-block correlation model. With this off,
    /// every `B_i` stays the identity.
    pub learn_correlation: bool,
    pub lambda: LambdaMode,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    /// Block variances below this are zeroed. Zero disables pruning.
    pub prune_threshold: f64,
    /// Cap on the learned AR(1) coefficient magnitude, keeping `B_i`
    /// invertible at large block sizes.
    pub correlation_clamp: f64,
}

impl Default for BsblConfig {
    fn default() -> Self {
        Self {
            learn_correlation: true,
            lambda: LambdaMode::Auto,
            max_iterations: 25,
            convergence_tol: 1e-4,
            prune_threshold: 0.0,
            correlation_clamp: 0.99,
        }
    }
}

/// Solver state after the last completed iteration.
#[derive(Debug, Clone)]
pub struct BsblState {
    /// Block variances, one per block, nonnegative.
    pub gamma: Vec<f64>,
    /// Intra-block correlation matrices, unit diagonal.
    pub b: Vec<DMatrix<f64>>,
    pub lambda: f64,
    /// Posterior mean of the full window.
    pub mu: DVector<f64>,
    /// Diagonal blocks of the posterior covariance.
    pub sigma_blocks: Vec<DMatrix<f64>>,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub x_hat: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_state: BsblState,
}

/// Reconstructs a window from `y = Phi x` measurements.
pub fn reconstruct(
    y: &[f64],
    phi: &SparseBinaryMatrix,
    partition: &BlockPartition,
    config: &BsblConfig,
) -> Result<ReconstructionResult, BsblError> {
    solve(y, &Operator::Sparse(phi), partition, config)
}

/// Reconstructs against a dense operator, e.g. the composed
/// sensing-plus-synthesis matrix of transformed-domain recovery.
pub fn reconstruct_dense(
    y: &[f64],
    omega: &DMatrix<f64>,
    partition: &BlockPartition,
    config: &BsblConfig,
) -> Result<ReconstructionResult, BsblError> {
    solve(y, &Operator::Dense(omega), partition, config)
}

enum Operator<'a> {
    Sparse(&'a SparseBinaryMatrix),
    Dense(&'a DMatrix<f64>),
}

impl Operator<'_> {
    fn m(&self) -> usize {
        match self {
            Operator::Sparse(phi) => phi.m(),
            Operator::Dense(o) => o.nrows(),
        }
    }

    fn n(&self) -> usize {
        match self {
            Operator::Sparse(phi) => phi.n(),
            Operator::Dense(o) => o.ncols(),
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        match self {
            Operator::Sparse(phi) => phi.to_dense(),
            Operator::Dense(o) => (*o).clone(),
        }
    }

    /// Accumulates `gamma_i * Phi_i B_i Phi_i'` of one block into `c`.
    fn accumulate_block_cov(
        &self,
        c: &mut DMatrix<f64>,
        dense: &DMatrix<f64>,
        off: usize,
        size: usize,
        gb: &DMatrix<f64>,
    ) {
        let m = self.m();
        match self {
            Operator::Sparse(phi) => {
                let cols = phi.columns();
                // T = Phi_i * gb, exploiting the index lists.
                let mut t = DMatrix::<f64>::zeros(m, size);
                for k in 0..size {
                    let tcol = &mut t.as_mut_slice()[k * m..(k + 1) * m];
                    for j in 0..size {
                        let gjk = gb[(j, k)];
                        if gjk == 0.0 {
                            continue;
                        }
                        for &r in &cols[off + j] {
                            tcol[r] += gjk;
                        }
                    }
                }
                // C += T * Phi_i'
                let t_slice = t.as_slice();
                for j in 0..size {
                    let tcol = &t_slice[j * m..(j + 1) * m];
                    for &r in &cols[off + j] {
                        let ccol = &mut c.as_mut_slice()[r * m..(r + 1) * m];
                        for i in 0..m {
                            ccol[i] += tcol[i];
                        }
                    }
                }
            }
            Operator::Dense(_) => {
                let block = dense.columns(off, size);
                c.quadform_tr(1.0, &block, gb, 1.0);
            }
        }
    }

    /// `Phi' * u`.
    fn apply_transpose(&self, dense: &DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Operator::Sparse(phi) => {
                let mut w = DVector::zeros(phi.n());
                for (j, rows) in phi.columns().iter().enumerate() {
                    w[j] = rows.iter().map(|&r| u[r]).sum();
                }
                w
            }
            Operator::Dense(_) => dense.transpose() * u,
        }
    }

    /// `Phi * x`.
    fn apply(&self, dense: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Operator::Sparse(phi) => {
                let mut y = DVector::zeros(phi.m());
                for (j, rows) in phi.columns().iter().enumerate() {
                    let xj = x[j];
                    for &r in rows {
                        y[r] += xj;
                    }
                }
                y
            }
            Operator::Dense(_) => dense * x,
        }
    }
}

/// AR(1) Toeplitz correlation matrix `[r^|j-k|]`.
fn ar1_toeplitz(size: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| {
        r.powi((i as i64 - j as i64).unsigned_abs() as i32)
    })
}

/// In-place forward substitution `L G = G` for every column of `g`,
/// reading only the lower triangle of `l`.
fn solve_lower_triangular_inplace(l: &DMatrix<f64>, g: &mut DMatrix<f64>) {
    let m = l.nrows();
    let ncols = g.ncols();
    let ls = l.as_slice();
    let gs = g.as_mut_slice();
    for col in 0..ncols {
        let gc = &mut gs[col * m..(col + 1) * m];
        for j in 0..m {
            let lcol = &ls[j * m..(j + 1) * m];
            let v = gc[j] / lcol[j];
            gc[j] = v;
            if v != 0.0 {
                for i in (j + 1)..m {
                    gc[i] -= lcol[i] * v;
                }
            }
        }
    }
}

fn validate_config(config: &BsblConfig) -> Result<(), BsblError> {
    if config.max_iterations == 0 {
        return Err(BsblError::Config("max_iterations must be positive".into()));
    }
    if !(config.convergence_tol > 0.0) {
        return Err(BsblError::Config("convergence_tol must be positive".into()));
    }
    if config.prune_threshold < 0.0 {
        return Err(BsblError::Config("prune_threshold must be nonnegative".into()));
    }
    if !(config.correlation_clamp > 0.0 && config.correlation_clamp < 1.0) {
        return Err(BsblError::Config(
            "correlation_clamp must lie in (0, 1)".into(),
        ));
    }
    if let LambdaMode::Fixed(v) = config.lambda {
        if !(v.is_finite() && v >= 0.0) {
            return Err(BsblError::Config(format!("fixed lambda {v} invalid")));
        }
    }
    Ok(())
}

fn solve(
    y: &[f64],
    op: &Operator<'_>,
    partition: &BlockPartition,
    config: &BsblConfig,
) -> Result<ReconstructionResult, BsblError> {
    validate_config(config)?;
    let m = op.m();
    let n = op.n();
    if y.len() != m {
        return Err(BsblError::Dimension(format!(
            "y has length {}, expected M={m}",
            y.len()
        )));
    }
    if partition.total() != n {
        return Err(BsblError::Dimension(format!(
            "partition covers {} samples, operator has N={n}",
            partition.total()
        )));
    }

    let blocks = partition.blocks();
    let g = blocks.len();
    let y_vec = DVector::from_column_slice(y);
    let mean_sq = y_vec.norm_squared() / m as f64;

    let mut lambda = match config.lambda {
        LambdaMode::Auto => 1e-10 * mean_sq,
        LambdaMode::Fixed(v) => v,
        LambdaMode::Learn => 1e-3 * mean_sq,
    };

    let dense = op.dense();
    // Per-block Gram matrices of the operator, used by the lambda update.
    let phi_grams: Vec<DMatrix<f64>> = if matches!(config.lambda, LambdaMode::Learn) {
        blocks
            .iter()
            .map(|&(off, size)| {
                let block = dense.columns(off, size);
                block.transpose() * block
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut gamma = vec![1.0f64; g];
    let mut b: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|&(_, size)| DMatrix::identity(size, size))
        .collect();
    let mut mu = DVector::zeros(n);
    let mut sigma_blocks: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|&(_, size)| DMatrix::zeros(size, size))
        .collect();
    let mut converged = false;
    let mut iterations_used = 0;

    let mut scratch_g = DMatrix::<f64>::zeros(m, n);

    for iteration in 1..=config.max_iterations {
        iterations_used = iteration;
        let live: Vec<usize> = (0..g).filter(|&i| gamma[i] > 0.0).collect();

        if live.is_empty() {
            // Prior collapsed to zero: posterior is exactly zero and the
            // variances cannot revive, so the iteration is stationary.
            mu.fill(0.0);
            for s in &mut sigma_blocks {
                s.fill(0.0);
            }
            converged = true;
            break;
        }

        // Sigma0 = blockdiag(gamma_i B_i); C = lambda I + Phi Sigma0 Phi'.
        let gb: Vec<Option<DMatrix<f64>>> = (0..g)
            .map(|i| {
                if gamma[i] > 0.0 {
                    Some(&b[i] * gamma[i])
                } else {
                    None
                }
            })
            .collect();
        let mut c = DMatrix::from_diagonal_element(m, m, lambda);
        for &i in &live {
            let (off, size) = blocks[i];
            op.accumulate_block_cov(&mut c, &dense, off, size, gb[i].as_ref().unwrap());
        }

        let chol = Cholesky::new(c).ok_or(BsblError::SingularSystem { iteration })?;

        // w = Phi' C^-1 y, per block the correlate of the bound update.
        let u = chol.solve(&y_vec);
        let w = op.apply_transpose(&dense, &u);

        // G = L^-1 Phi gives H_i = Phi_i' C^-1 Phi_i = G_i' G_i.
        scratch_g.copy_from(&dense);
        solve_lower_triangular_inplace(chol.l_dirty(), &mut scratch_g);

        let gs = scratch_g.as_slice();
        let mut h_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(g);
        for &(off, size) in &blocks {
            let mut hb = DMatrix::zeros(size, size);
            for a in 0..size {
                let ca = &gs[(off + a) * m..(off + a + 1) * m];
                for bcol in a..size {
                    let cb = &gs[(off + bcol) * m..(off + bcol + 1) * m];
                    let dot: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                    hb[(a, bcol)] = dot;
                    hb[(bcol, a)] = dot;
                }
            }
            h_blocks.push(hb);
        }

        // Posterior mean and covariance blocks.
        for (i, &(off, size)) in blocks.iter().enumerate() {
            match &gb[i] {
                Some(gbi) => {
                    let wi = w.rows(off, size);
                    let mui = gbi * wi;
                    mu.rows_mut(off, size).copy_from(&mui);
                    let t = gbi * &h_blocks[i];
                    sigma_blocks[i] = gbi - &t * gbi;
                }
                None => {
                    mu.rows_mut(off, size).fill(0.0);
                    sigma_blocks[i].fill(0.0);
                }
            }
        }

        // Bound-optimization variance update:
        // gamma_i <- gamma_i * sqrt(w_i' B_i w_i / trace(H_i B_i)).
        let mut gamma_new = gamma.clone();
        for (i, &(off, size)) in blocks.iter().enumerate() {
            if gamma[i] == 0.0 {
                continue;
            }
            let wi = w.rows(off, size);
            let num = (&b[i] * wi).dot(&wi.clone_owned());
            let den: f64 = h_blocks[i]
                .iter()
                .zip(b[i].iter())
                .map(|(x, y)| x * y)
                .sum();
            if den > 0.0 && num >= 0.0 && num.is_finite() {
                gamma_new[i] = gamma[i] * (num / den).sqrt();
            } else {
                gamma_new[i] = 0.0;
            }
        }

        // Shared AR(1) correlation model, pooled over full-size blocks.
        if config.learn_correlation {
            let modal = modal_size(&blocks);
            let mut pooled = DMatrix::<f64>::zeros(modal, modal);
            let mut count = 0usize;
            for (i, &(off, size)) in blocks.iter().enumerate() {
                if size != modal || gamma[i] == 0.0 {
                    continue;
                }
                let mui = mu.rows(off, size);
                pooled += (&sigma_blocks[i] + &mui * mui.transpose()) / gamma[i];
                count += 1;
            }
            if count > 0 && modal > 1 {
                let diag_mean = pooled.trace() / modal as f64;
                let mut off_sum = 0.0;
                for k in 0..modal - 1 {
                    off_sum += pooled[(k, k + 1)];
                }
                let off_mean = off_sum / (modal - 1) as f64;
                if diag_mean > 0.0 && off_mean.is_finite() {
                    let mut r = off_mean / diag_mean;
                    if r.abs() > config.correlation_clamp {
                        r = config.correlation_clamp * r.signum();
                    }
                    for (i, &(_, size)) in blocks.iter().enumerate() {
                        b[i] = ar1_toeplitz(size, r);
                    }
                }
            }
        }

        if matches!(config.lambda, LambdaMode::Learn) {
            let resid = &y_vec - op.apply(&dense, &mu);
            let mut trace_term = 0.0;
            for (i, gram) in phi_grams.iter().enumerate() {
                trace_term += sigma_blocks[i]
                    .iter()
                    .zip(gram.iter())
                    .map(|(x, y)| x * y)
                    .sum::<f64>();
            }
            lambda = (resid.norm_squared() + lambda * trace_term) / m as f64;
        }

        if config.prune_threshold > 0.0 {
            for gi in gamma_new.iter_mut() {
                if *gi < config.prune_threshold {
                    *gi = 0.0;
                }
            }
        }

        let change = gamma
            .iter()
            .zip(&gamma_new)
            .map(|(&old, &new)| (new - old).abs() / old.max(GAMMA_EPS))
            .fold(0.0f64, f64::max);
        gamma = gamma_new;

        if change < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let x_hat = mu.as_slice().to_vec();
    Ok(ReconstructionResult {
        x_hat,
        iterations_used,
        converged,
        final_state: BsblState {
            gamma,
            b,
            lambda,
            mu,
            sigma_blocks,
            iteration: iterations_used,
        },
    })
}

fn modal_size(blocks: &[(usize, usize)]) -> usize {
    let mut best_size = blocks[0].1;
    let mut best_count = 0usize;
    let mut sizes: Vec<usize> = blocks.iter().map(|&(_, s)| s).collect();
    sizes.sort_unstable();
    let mut idx = 0;
    while idx < sizes.len() {
        let s = sizes[idx];
        let mut count = 0;
        while idx < sizes.len() && sizes[idx] == s {
            count += 1;
            idx += 1;
        }
        if count > best_count || (count == best_count && s > best_size) {
            best_count = count;
            best_size = s;
        }
    }
    best_size
}

/// Reassembles a multichannel recording from per-channel payloads,
/// reconstructing every window with a uniform block partition.
///
/// Channels appear in the order the payloads are given. The sampling rate
/// is not stored in payload files, so it is supplied here.
pub fn reconstruct_recording(
    payloads: &[CompressedPayload],
    block_size: usize,
    config: &BsblConfig,
    sampling_rate_hz: f64,
) -> Result<MultichannelRecording, BsblError> {
    if payloads.is_empty() {
        return Err(BsblError::Payloads("no payloads".into()));
    }
    let desc = payloads[0].descriptor;
    for p in payloads {
        if p.descriptor != desc {
            return Err(BsblError::Payloads(
                "payloads use different matrix descriptors".into(),
            ));
        }
        if p.window_length != desc.n {
            return Err(BsblError::Payloads("window length mismatch".into()));
        }
    }
    let phi = SparseBinaryMatrix::from_descriptor(&desc)?;
    let partition = BlockPartition::uniform(desc.n, block_size)?;

    let tasks: Vec<(usize, usize)> = payloads
        .iter()
        .enumerate()
        .flat_map(|(ci, p)| (0..p.segments.len()).map(move |wi| (ci, wi)))
        .collect();
    let results: Vec<((usize, usize), Result<Vec<f64>, BsblError>)> = tasks
        .par_iter()
        .map(|&(ci, wi)| {
            let r = reconstruct(&payloads[ci].segments[wi], &phi, &partition, config)
                .map(|res| res.x_hat);
            ((ci, wi), r)
        })
        .collect();

    let mut windows: Vec<Vec<Vec<f64>>> = payloads
        .iter()
        .map(|p| vec![Vec::new(); p.segments.len()])
        .collect();
    for ((ci, wi), r) in results {
        windows[ci][wi] = r?;
    }
    let channels: Vec<Vec<f64>> = windows
        .iter()
        .zip(payloads)
        .map(|(wins, p)| desegment_windows(wins, p.pad_tail))
        .collect();
    Ok(MultichannelRecording::from_channels(
        channels,
        sampling_rate_hz,
    )?)
}

/// Minimum eigenvalues of the posterior covariance blocks and the
/// correlation matrices, for numerical health checks.
#[derive(Debug, Clone)]
pub struct CovarianceDiagnostics {
    pub sigma_min_eigenvalues: Vec<f64>,
    pub b_min_eigenvalues: Vec<f64>,
}

impl CovarianceDiagnostics {
    /// True when every matrix is positive semidefinite up to roundoff.
    pub fn is_positive_semidefinite(&self) -> bool {
        self.sigma_min_eigenvalues
            .iter()
            .chain(&self.b_min_eigenvalues)
            .all(|&e| e >= -1e-10)
    }
}

pub fn posterior_covariance_check(state: &BsblState) -> CovarianceDiagnostics {
    let min_eig = |m: &DMatrix<f64>| -> f64 {
        if m.nrows() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    CovarianceDiagnostics {
        sigma_min_eigenvalues: state.sigma_blocks.iter().map(min_eig).collect(),
        b_min_eigenvalues: state.b.iter().map(min_eig).collect(),
    }
}
