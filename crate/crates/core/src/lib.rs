//! Compressed-sensing toolkit for energy-efficient biosignal telemetry.
//!
//! The pipeline this crate implements: multichannel recordings are split
//! into fixed-length windows, each window is compressed by a sparse binary
//! sensing matrix (additions only, no multiplications), and the receiver
//! reconstructs the windows with block sparse Bayesian learning before
//! running band-pass filtering and deflation FastICA to recover source
//! signals. Synthetic mixture generation and evaluation metrics round out
//! the toolkit so the whole chain can be benchmarked end to end.
//!
//! Modules:
//! - [`signal_io`]: CSV recording/payload formats, windowing, decimation.
//! - [`sensing`]: sparse binary matrices, compression, operation counts.
//! - [`bsbl`]: block sparse Bayesian learning reconstruction (bound
//!   optimization variant, pruning disabled by default).
//! - [`wavelet`]: Daubechies-4 orthonormal transform and the composed
//!   sensing operator for transformed-domain reconstruction.
//! - [`ica`]: zero-phase band-pass, whitening, deflation FastICA, and
//!   component matching.
//! - [`metrics`]: MSE, Pearson correlation, R-peak detection, SINR.
//! - [`synth`]: quasi-periodic FECG/MECG/noise mixtures with controlled
//!   SINR for Monte Carlo benchmarks.

pub mod bsbl;
pub mod ica;
pub mod metrics;
pub mod seed;
pub mod sensing;
pub mod signal_io;
pub mod synth;
pub mod wavelet;
