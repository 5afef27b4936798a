//! The end-to-end experiment pipeline and its Monte Carlo sweeps.
//!
//! One pipeline run compresses every channel of a recording with a shared
//! sparse binary matrix, reconstructs it window by window, band-passes
//! both the original and the reconstruction, extracts independent
//! components from each, and scores how well the component of interest
//! survives the compress/reconstruct round trip.
//!
//! Seed discipline: every randomized stage draws its seed through
//! `derive_seed(master, stream, index)` with fixed stream ids, so a sweep
//! grid can be reordered or filtered without changing what any single
//! trial computes.

use anyhow::{anyhow, Context, Result};
use biotelem_core::bsbl::{self, BlockPartition, BsblConfig};
use biotelem_core::ica::{self, MatchReport};
use biotelem_core::metrics;
use biotelem_core::seed::derive_seed;
use biotelem_core::sensing::{self, SparseBinaryMatrix};
use biotelem_core::signal_io::{segment_channel, CompressedPayload, MultichannelRecording};
use biotelem_core::synth::{self, SynthSpec};
use biotelem_core::wavelet::{effective_sensing, WaveletBasis};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use crate::report::{SweepReport, SweepRow};

/// Seed streams; `derive_seed(master, stream + offset, index)`.
pub mod streams {
    /// Synthetic data generation.
    pub const DATA: u64 = 100;
    /// Sensing matrix generation.
    pub const MATRIX: u64 = 200;
    /// FastICA initialization.
    pub const ICA: u64 = 300;
}

/// Which linear model reconstruction runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Recover the window itself.
    Time,
    /// Recover Daubechies-4 coefficients through the composed operator,
    /// then synthesize the window.
    Wavelet,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Window length N.
    pub window: usize,
    /// Measurement count M.
    pub measurements: usize,
    /// Ones per sensing-matrix column.
    pub density: usize,
    /// Uniform block size for the reconstruction partition.
    pub block_size: usize,
    pub bsbl: BsblConfig,
    pub domain: Domain,
    /// Band-pass edges in Hz applied before ICA.
    pub band: (f64, f64),
    /// Components to extract; defaults to the whitened dimension.
    pub ica_components: Option<usize>,
    pub ica_max_iter: usize,
    pub ica_tol: f64,
    /// Refractory rate bound for R-peak agreement scoring.
    pub peak_min_rate_hz: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 512,
            measurements: 256,
            density: 12,
            block_size: 32,
            bsbl: BsblConfig::default(),
            domain: Domain::Time,
            band: (1.75, 100.0),
            ica_components: None,
            ica_max_iter: 200,
            ica_tol: 1e-6,
            peak_min_rate_hz: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchEntry {
    pub original: usize,
    pub reconstructed: usize,
    pub abs_correlation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakAgreement {
    pub original_peaks: usize,
    pub reconstructed_peaks: usize,
    pub matched: usize,
    pub tolerance_samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub window: usize,
    pub measurements: usize,
    pub density: usize,
    pub block_size: usize,
    pub compression_ratio: f64,
    pub compression_additions: u64,
    pub matrix_seed: u64,
    pub per_channel_mse: Vec<f64>,
    pub mean_mse: f64,
    /// Greedy matching of all components, original against reconstructed.
    pub component_matches: Vec<MatchEntry>,
    pub best_match_correlation: f64,
    /// Correlation of the reference-aligned component across the round
    /// trip; present when a reference source was available.
    pub fetal_correlation: Option<f64>,
    pub peak_agreement: Option<PeakAgreement>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub reconstructed: MultichannelRecording,
    pub components_original: Vec<Vec<f64>>,
    pub components_reconstructed: Vec<Vec<f64>>,
    pub summary: PipelineSummary,
}

/// Compresses the recording with one shared matrix and returns the
/// in-memory payloads.
pub fn compress_recording(
    rec: &MultichannelRecording,
    phi: &SparseBinaryMatrix,
) -> Result<Vec<CompressedPayload>> {
    let mut payloads = Vec::with_capacity(rec.channels());
    for c in 0..rec.channels() {
        let seg = segment_channel(rec.channel(c), phi.n()).context("segmenting channel")?;
        let segments = seg
            .windows
            .iter()
            .map(|w| phi.compress(w))
            .collect::<std::result::Result<Vec<_>, _>>()
            .context("compressing windows")?;
        payloads.push(CompressedPayload::new(
            segments,
            phi.descriptor(),
            c,
            seg.pad_tail,
        )?);
    }
    Ok(payloads)
}

/// Reconstructs payloads in the configured domain.
pub fn reconstruct_payloads(
    payloads: &[CompressedPayload],
    cfg: &PipelineConfig,
    sampling_rate_hz: f64,
) -> Result<MultichannelRecording> {
    match cfg.domain {
        Domain::Time => Ok(bsbl::reconstruct_recording(
            payloads,
            cfg.block_size,
            &cfg.bsbl,
            sampling_rate_hz,
        )?),
        Domain::Wavelet => {
            let desc = payloads
                .first()
                .ok_or_else(|| anyhow!("no payloads"))?
                .descriptor;
            let phi = SparseBinaryMatrix::from_descriptor(&desc)?;
            let basis = WaveletBasis::full_depth(desc.n)
                .context("wavelet domain needs a power-of-two window")?;
            let omega = effective_sensing(&phi, &basis)?;
            let partition = BlockPartition::uniform(desc.n, cfg.block_size)?;
            let tasks: Vec<(usize, usize)> = payloads
                .iter()
                .enumerate()
                .flat_map(|(ci, p)| (0..p.segments.len()).map(move |wi| (ci, wi)))
                .collect();
            let solved: Vec<((usize, usize), Result<Vec<f64>>)> = tasks
                .par_iter()
                .map(|&(ci, wi)| {
                    let run = || -> Result<Vec<f64>> {
                        let theta = bsbl::reconstruct_dense(
                            &payloads[ci].segments[wi],
                            &omega,
                            &partition,
                            &cfg.bsbl,
                        )?;
                        Ok(basis.idwt(&theta.x_hat)?)
                    };
                    ((ci, wi), run())
                })
                .collect();
            let mut windows: Vec<Vec<Vec<f64>>> = payloads
                .iter()
                .map(|p| vec![Vec::new(); p.segments.len()])
                .collect();
            for ((ci, wi), r) in solved {
                windows[ci][wi] = r?;
            }
            let channels: Vec<Vec<f64>> = windows
                .iter()
                .zip(payloads)
                .map(|(wins, p)| biotelem_core::signal_io::desegment_windows(wins, p.pad_tail))
                .collect();
            Ok(MultichannelRecording::from_channels(
                channels,
                sampling_rate_hz,
            )?)
        }
    }
}

fn extract_components(
    rec: &MultichannelRecording,
    cfg: &PipelineConfig,
    ica_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let filtered = ica::bandpass(rec, cfg.band.0, cfg.band.1)?;
    let white = ica::whiten(&filtered)?;
    let dim = white.data.nrows();
    let k = cfg.ica_components.map_or(dim, |k| k.min(dim));
    let result = ica::fastica_deflation(&white, k, ica_seed, cfg.ica_max_iter, cfg.ica_tol)?;
    Ok(result.components)
}

fn best_abs_correlation_against(reference: &[f64], components: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0usize, 0.0f64);
    for (i, comp) in components.iter().enumerate() {
        let r = metrics::pearson(comp, reference).map(f64::abs).unwrap_or(0.0);
        if r > best.1 {
            best = (i, r);
        }
    }
    best
}

fn peak_agreement(
    a: &[f64],
    b: &[f64],
    fs: f64,
    min_rate_hz: f64,
    tolerance: usize,
) -> Result<PeakAgreement> {
    let pa = metrics::detect_peaks(a, fs, min_rate_hz)?;
    let pb = metrics::detect_peaks(b, fs, min_rate_hz)?;
    let mut matched = 0usize;
    let mut used = vec![false; pb.indices.len()];
    for &i in &pa.indices {
        if let Some((j, _)) = pb
            .indices
            .iter()
            .enumerate()
            .filter(|&(j, &q)| !used[j] && q.abs_diff(i) <= tolerance)
            .min_by_key(|&(_, &q)| q.abs_diff(i))
        {
            used[j] = true;
            matched += 1;
        }
    }
    Ok(PeakAgreement {
        original_peaks: pa.indices.len(),
        reconstructed_peaks: pb.indices.len(),
        matched,
        tolerance_samples: tolerance,
    })
}

/// Runs compress, reconstruct, band-pass, ICA on both versions, and
/// component matching. `fetal_reference` is the known source used to pin
/// down which component to track across the round trip.
pub fn run_pipeline(
    rec: &MultichannelRecording,
    fetal_reference: Option<&[f64]>,
    cfg: &PipelineConfig,
    matrix_seed: u64,
    ica_seed: u64,
) -> Result<PipelineArtifacts> {
    let start = Instant::now();
    let phi = SparseBinaryMatrix::generate(cfg.measurements, cfg.window, cfg.density, matrix_seed)
        .context("generating sensing matrix")?;
    let payloads = compress_recording(rec, &phi)?;
    let reconstructed = reconstruct_payloads(&payloads, cfg, rec.sampling_rate_hz())?;

    let per_channel_mse: Vec<f64> = (0..rec.channels())
        .map(|c| metrics::mse(rec.channel(c), reconstructed.channel(c)))
        .collect::<std::result::Result<_, _>>()?;
    let mean_mse = per_channel_mse.iter().sum::<f64>() / per_channel_mse.len() as f64;

    let components_original = extract_components(rec, cfg, ica_seed)?;
    let components_reconstructed = extract_components(&reconstructed, cfg, ica_seed)?;

    let report: MatchReport =
        ica::match_components(&components_original, &components_reconstructed)?;
    let component_matches: Vec<MatchEntry> = report
        .pairs
        .iter()
        .map(|p| MatchEntry {
            original: p.a,
            reconstructed: p.b,
            abs_correlation: p.abs_correlation,
        })
        .collect();
    let best_match_correlation = report.best().map_or(0.0, |p| p.abs_correlation);

    let (fetal_correlation, peaks) = match fetal_reference {
        Some(reference) => {
            let (idx, _) = best_abs_correlation_against(reference, &components_original);
            let (jdx, corr) =
                best_abs_correlation_against(&components_original[idx], &components_reconstructed);
            let agreement = peak_agreement(
                &components_original[idx],
                &components_reconstructed[jdx],
                rec.sampling_rate_hz(),
                cfg.peak_min_rate_hz,
                2,
            )?;
            (Some(corr), Some(agreement))
        }
        None => (None, None),
    };

    let summary = PipelineSummary {
        window: cfg.window,
        measurements: cfg.measurements,
        density: cfg.density,
        block_size: cfg.block_size,
        compression_ratio: sensing::compression_ratio(cfg.window, cfg.measurements)?,
        compression_additions: phi.compression_ops().additions,
        matrix_seed: phi.seed(),
        per_channel_mse,
        mean_mse,
        component_matches,
        best_match_correlation,
        fetal_correlation,
        peak_agreement: peaks,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };

    Ok(PipelineArtifacts {
        reconstructed,
        components_original,
        components_reconstructed,
        summary,
    })
}

/// Convenience wrapper: synthesizes the mixture, then runs the pipeline
/// with the generated fetal source as the tracking reference.
pub fn run_synth_pipeline(
    spec: &SynthSpec,
    cfg: &PipelineConfig,
    matrix_seed: u64,
    ica_seed: u64,
) -> Result<PipelineArtifacts> {
    let out = synth::generate(spec)?;
    run_pipeline(
        &out.recording,
        Some(&out.fetal_source),
        cfg,
        matrix_seed,
        ica_seed,
    )
}

/// The swept variable of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Cr,
    Density,
    BlockSize,
    Sinr,
}

impl SweepKind {
    pub fn variable_name(&self) -> &'static str {
        match self {
            SweepKind::Cr => "cr",
            SweepKind::Density => "density",
            SweepKind::BlockSize => "block_size",
            SweepKind::Sinr => "sinr_db",
        }
    }

    /// Grids mirroring the reference experiments.
    pub fn default_values(&self) -> Vec<f64> {
        match self {
            SweepKind::Cr => (20..=65).step_by(5).map(f64::from).collect(),
            SweepKind::Density => (2..=14).map(f64::from).collect(),
            SweepKind::BlockSize => (4..=90).step_by(2).map(f64::from).collect(),
            SweepKind::Sinr => (-35..=-15).step_by(5).map(f64::from).collect(),
        }
    }

    /// Base pipeline geometry for this sweep; the block-size study runs
    /// on the smaller 128x256 matrix.
    pub fn default_config(&self) -> PipelineConfig {
        match self {
            SweepKind::BlockSize => PipelineConfig {
                window: 256,
                measurements: 128,
                ..PipelineConfig::default()
            },
            _ => PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Data template; `sinr_db` is overridden by the grid for SINR sweeps.
    pub base_spec: SynthSpec,
    pub base_cfg: PipelineConfig,
}

impl SweepSettings {
    pub fn new(kind: SweepKind, master_seed: u64) -> Self {
        Self {
            kind,
            values: kind.default_values(),
            trials: 20,
            master_seed,
            base_spec: SynthSpec::default(),
            base_cfg: kind.default_config(),
        }
    }
}

/// Seeds for one (grid index, trial) cell.
///
/// Data and ICA seeds are shared across grid points (except for SINR,
/// where the data necessarily changes with the grid), so grid points
/// compare on paired instances. The SINR sweep holds one matrix fixed
/// throughout; the block-size sweep regenerates per trial; ratio and
/// density sweeps regenerate per cell since the matrix shape changes.
pub fn sweep_seeds(kind: SweepKind, master: u64, grid: usize, trial: usize) -> (u64, u64, u64) {
    let g = grid as u64;
    let t = trial as u64;
    let data = match kind {
        SweepKind::Sinr => derive_seed(master, streams::DATA + 1 + g, t),
        _ => derive_seed(master, streams::DATA, t),
    };
    let matrix = match kind {
        SweepKind::Sinr => derive_seed(master, streams::MATRIX, 0),
        SweepKind::BlockSize => derive_seed(master, streams::MATRIX, t),
        _ => derive_seed(master, streams::MATRIX + 1 + g, t),
    };
    let ica = derive_seed(master, streams::ICA, t);
    (data, matrix, ica)
}

/// Runs the full grid and aggregates per-value statistics.
pub fn run_sweep(settings: &SweepSettings) -> Result<SweepReport> {
    if settings.values.is_empty() || settings.trials == 0 {
        return Err(anyhow!("empty sweep grid"));
    }
    let mut rows = Vec::with_capacity(settings.values.len());
    for (grid, &value) in settings.values.iter().enumerate() {
        let mut corrs = Vec::with_capacity(settings.trials);
        let mut mses = Vec::with_capacity(settings.trials);
        let mut runtimes = Vec::with_capacity(settings.trials);
        for trial in 0..settings.trials {
            let (data_seed, matrix_seed, ica_seed) =
                sweep_seeds(settings.kind, settings.master_seed, grid, trial);
            let mut spec = settings.base_spec;
            spec.seed = data_seed;
            let mut cfg = settings.base_cfg.clone();
            match settings.kind {
                SweepKind::Cr => {
                    cfg.measurements = sensing::rows_for_cr(cfg.window, value)?;
                }
                SweepKind::Density => {
                    cfg.density = value as usize;
                }
                SweepKind::BlockSize => {
                    cfg.block_size = value as usize;
                }
                SweepKind::Sinr => {
                    spec.sinr_db = value;
                }
            }
            let run = run_synth_pipeline(&spec, &cfg, matrix_seed, ica_seed)
                .with_context(|| format!("{} = {value}, trial {trial}", settings.kind.variable_name()))?;
            corrs.push(run.summary.fetal_correlation.unwrap_or(0.0));
            mses.push(run.summary.mean_mse);
            runtimes.push(run.summary.runtime_seconds);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let m = mean(&corrs);
        // Population standard deviation: a single trial reports zero.
        let var = corrs.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / corrs.len() as f64;
        rows.push(SweepRow {
            value,
            mean_correlation: m,
            std_correlation: var.sqrt(),
            mean_mse: mean(&mses),
            mean_runtime_s: mean(&runtimes),
            trials: settings.trials,
        });
    }
    Ok(SweepReport::new(settings.kind.variable_name(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_seeds_are_pure_and_paired() {
        let (d0, m0, i0) = sweep_seeds(SweepKind::Density, 7, 0, 3);
        let (d1, m1, i1) = sweep_seeds(SweepKind::Density, 7, 5, 3);
        assert_eq!(d0, d1, "data paired across grid");
        assert_eq!(i0, i1, "ica paired across grid");
        assert_ne!(m0, m1, "matrix differs per grid point");
        assert_eq!(sweep_seeds(SweepKind::Density, 7, 0, 3), (d0, m0, i0));
    }

    #[test]
    fn sinr_sweep_fixes_matrix() {
        let (_, m0, _) = sweep_seeds(SweepKind::Sinr, 9, 0, 0);
        let (_, m1, _) = sweep_seeds(SweepKind::Sinr, 9, 4, 17);
        assert_eq!(m0, m1);
        let (d0, _, _) = sweep_seeds(SweepKind::Sinr, 9, 0, 0);
        let (d1, _, _) = sweep_seeds(SweepKind::Sinr, 9, 1, 0);
        assert_ne!(d0, d1, "data changes with the SINR level");
    }

    #[test]
    fn default_grids_match_reference_shapes() {
        assert_eq!(SweepKind::Density.default_values().len(), 13);
        assert_eq!(SweepKind::BlockSize.default_values().len(), 44);
        assert_eq!(SweepKind::Sinr.default_values().len(), 5);
        assert_eq!(SweepKind::Cr.default_values().len(), 10);
    }

    #[test]
    fn tiny_end_to_end_pipeline() {
        // Small but complete: 2 channels, short record, modest matrix.
        let spec = SynthSpec {
            channels: 4,
            samples: 1024,
            sinr_db: -5.0,
            seed: 3,
            ..SynthSpec::default()
        };
        let cfg = PipelineConfig {
            window: 128,
            measurements: 64,
            density: 6,
            block_size: 16,
            ..PipelineConfig::default()
        };
        let run = run_synth_pipeline(&spec, &cfg, 11, 13).unwrap();
        assert_eq!(run.reconstructed.channels(), 4);
        assert_eq!(run.reconstructed.samples(), 1024);
        assert!(run.summary.fetal_correlation.is_some());
        assert!(run.summary.mean_mse.is_finite());
        assert_eq!(run.summary.compression_additions, 6 * 128 - 64);
    }

    #[test]
    fn zero_compression_ratio_is_lossless() {
        let spec = SynthSpec {
            channels: 3,
            samples: 256,
            sinr_db: -5.0,
            seed: 5,
            ..SynthSpec::default()
        };
        let cfg = PipelineConfig {
            window: 64,
            measurements: 64,
            density: 6,
            block_size: 16,
            ..PipelineConfig::default()
        };
        let run = run_synth_pipeline(&spec, &cfg, 21, 23).unwrap();
        assert!(run.summary.compression_ratio == 0.0);
        assert!(run.summary.mean_mse < 1e-12, "mse={}", run.summary.mean_mse);
        for m in &run.summary.component_matches {
            assert!(m.abs_correlation > 0.999);
        }
    }
}
