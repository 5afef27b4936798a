//! Source extraction from multichannel recordings: zero-phase band-pass
//! filtering, eigenvalue whitening, deflation-mode FastICA with the tanh
//! contrast, and greedy component matching.

use crate::metrics::pearson;
use crate::signal_io::{MultichannelRecording, SignalIoError};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IcaError {
    #[error("band {low}..{high} Hz outside (0, {nyquist}) Hz")]
    BadBand { low: f64, high: f64, nyquist: f64 },
    #[error("need at least 2 channels, got {0}")]
    NeedTwoChannels(usize),
    #[error("need more samples ({samples}) than channels ({channels})")]
    TooFewSamples { channels: usize, samples: usize },
    #[error("data rank {0} too low after filtering")]
    RankTooLow(usize),
    #[error("component count {k} exceeds whitened dimension {dim}")]
    BadComponentCount { k: usize, dim: usize },
    #[error("empty component set")]
    EmptyComponents,
    #[error("component lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    SignalIo(#[from] SignalIoError),
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

/// Designs a 4th-order Butterworth band-pass as four biquad sections via
/// the bilinear transform, each normalized to unit gain at the band's
/// geometric center.
fn butter_bandpass_sos(low_hz: f64, high_hz: f64, fs: f64) -> Vec<Biquad> {
    let order = 4usize;
    let k2 = 2.0 * fs;
    // Prewarped analog edge frequencies.
    let wl = k2 * (PI * low_hz / fs).tan();
    let wh = k2 * (PI * high_hz / fs).tan();
    let w0 = (wl * wh).sqrt();
    let bw = wh - wl;
    let theta0 = 2.0 * (w0 / k2).atan();

    let mut sections = Vec::with_capacity(order);
    // Upper-half-plane prototype poles; conjugates are implied.
    for k in 0..order / 2 {
        let angle = PI * (2.0 * k as f64 + order as f64 + 1.0) / (2.0 * order as f64);
        let p = Complex64::new(angle.cos(), angle.sin());
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0 * w0).sqrt();
        for s in [(pb + disc) * 0.5, (pb - disc) * 0.5] {
            let z = (Complex64::new(k2, 0.0) + s) / (Complex64::new(k2, 0.0) - s);
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            // Numerator (z-1)(z+1); gain set at the center frequency.
            let ejw = Complex64::new(0.0, theta0).exp();
            let ej2w = Complex64::new(0.0, 2.0 * theta0).exp();
            let num = ej2w - Complex64::new(1.0, 0.0);
            let den = ej2w + ejw * a1 + Complex64::new(a2, 0.0);
            let gain = (den / num).norm();
            sections.push(Biquad {
                b0: gain,
                b1: 0.0,
                b2: -gain,
                a1,
                a2,
            });
        }
    }
    sections
}

/// One pass of a biquad (transposed direct form II) with the internal
/// state initialized to the steady-state response for the first sample.
fn biquad_filter_inplace(sec: &Biquad, x: &mut [f64]) {
    let denom = 1.0 + sec.a1 + sec.a2;
    let h1 = if denom.abs() > 1e-300 {
        (sec.b0 + sec.b1 + sec.b2) / denom
    } else {
        0.0
    };
    let x0 = x[0];
    let mut s1 = (h1 - sec.b0) * x0;
    let mut s2 = (sec.b2 - sec.a2 * h1) * x0;
    for v in x.iter_mut() {
        let xin = *v;
        let y = sec.b0 * xin + s1;
        s1 = sec.b1 * xin - sec.a1 * y + s2;
        s2 = sec.b2 * xin - sec.a2 * y;
        *v = y;
    }
}

/// Forward-backward cascade filtering with odd edge extension.
fn sosfiltfilt(sections: &[Biquad], x: &[f64], padlen: usize) -> Vec<f64> {
    let n = x.len();
    let p = padlen.min(n.saturating_sub(1));
    let mut ext = Vec::with_capacity(n + 2 * p);
    for i in (1..=p).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=p {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    for sec in sections {
        biquad_filter_inplace(sec, &mut ext);
    }
    ext.reverse();
    for sec in sections {
        biquad_filter_inplace(sec, &mut ext);
    }
    ext.reverse();
    ext[p..p + n].to_vec()
}

/// Zero-phase band-pass: per channel, the mean is removed and a 4th-order
/// Butterworth band-pass runs forward and backward.
pub fn bandpass(
    rec: &MultichannelRecording,
    low_hz: f64,
    high_hz: f64,
) -> Result<MultichannelRecording, IcaError> {
    let fs = rec.sampling_rate_hz();
    let nyquist = fs / 2.0;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(IcaError::BadBand {
            low: low_hz,
            high: high_hz,
            nyquist,
        });
    }
    let sections = butter_bandpass_sos(low_hz, high_hz, fs);
    // Settle a few time constants of the slowest edge at each boundary.
    let padlen = (3.0 * fs / low_hz).ceil() as usize;
    let channels: Vec<Vec<f64>> = rec
        .channel_data()
        .iter()
        .map(|ch| {
            let mean = ch.iter().sum::<f64>() / ch.len() as f64;
            let centered: Vec<f64> = ch.iter().map(|v| v - mean).collect();
            sosfiltfilt(&sections, &centered, padlen)
        })
        .collect();
    Ok(MultichannelRecording::from_channels(channels, fs)?)
}

/// Centered and decorrelated data with the transform that produced it.
#[derive(Debug, Clone)]
pub struct Whitened {
    /// Whitened signals, one row per retained dimension.
    pub data: DMatrix<f64>,
    /// Maps centered channel data to whitened rows.
    pub whitener: DMatrix<f64>,
    /// Channel means removed before whitening.
    pub means: Vec<f64>,
    /// Channels dropped for falling below the eigenvalue cutoff.
    pub dropped: usize,
}

/// Eigenvalue whitening of the sample covariance. Dimensions whose
/// eigenvalue falls below `1e-12` of the largest are dropped.
pub fn whiten(rec: &MultichannelRecording) -> Result<Whitened, IcaError> {
    let c = rec.channels();
    let t = rec.samples();
    if c < 2 {
        return Err(IcaError::NeedTwoChannels(c));
    }
    if t <= c {
        return Err(IcaError::TooFewSamples {
            channels: c,
            samples: t,
        });
    }
    let mut centered = DMatrix::zeros(c, t);
    let mut means = Vec::with_capacity(c);
    for (i, ch) in rec.channel_data().iter().enumerate() {
        let mean = ch.iter().sum::<f64>() / t as f64;
        means.push(mean);
        for (j, &v) in ch.iter().enumerate() {
            centered[(i, j)] = v - mean;
        }
    }
    let cov = &centered * centered.transpose() / t as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let max_eig = eig.eigenvalues[order[0]];
    if !(max_eig > 0.0) {
        return Err(IcaError::RankTooLow(0));
    }
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * max_eig)
        .collect();
    if kept.len() < 2 {
        return Err(IcaError::RankTooLow(kept.len()));
    }
    let mut whitener = DMatrix::zeros(kept.len(), c);
    for (row, &i) in kept.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[i].sqrt();
        for col in 0..c {
            whitener[(row, col)] = eig.eigenvectors[(col, i)] * scale;
        }
    }
    let data = &whitener * &centered;
    Ok(Whitened {
        data,
        whitener,
        means,
        dropped: c - kept.len(),
    })
}

/// Independent components extracted by deflation FastICA.
#[derive(Debug, Clone)]
pub struct IcaResult {
    /// One row per component, zero mean and unit variance.
    pub components: Vec<Vec<f64>>,
    /// Unmixing rows in whitened space, mutually orthonormal.
    pub unmixing: DMatrix<f64>,
    /// The whitening transform the components were extracted under.
    pub whitener: DMatrix<f64>,
    /// Channel means removed before whitening.
    pub means: Vec<f64>,
    pub k_extracted: usize,
    /// Per-component convergence of the fixed-point iteration.
    pub converged: Vec<bool>,
}

/// Extracts `k` components one at a time with the tanh nonlinearity,
/// deflating each new direction against the previous ones.
pub fn fastica_deflation(
    white: &Whitened,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<IcaResult, IcaError> {
    let p = white.data.nrows();
    let t = white.data.ncols();
    if k == 0 || k > p {
        return Err(IcaError::BadComponentCount { k, dim: p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unmixing = DMatrix::<f64>::zeros(k, p);
    let mut converged = vec![false; k];

    for comp in 0..k {
        let mut w = random_unit(&mut rng, p);
        gram_schmidt(&mut w, &unmixing, comp);
        normalize_or_redraw(&mut w, &mut rng, &unmixing, comp);

        for _ in 0..max_iter {
            let s = white.data.tr_mul(&w); // length t
            let mut w_new = DVector::zeros(p);
            let mut gprime_sum = 0.0;
            for j in 0..t {
                let g = s[j].tanh();
                gprime_sum += 1.0 - g * g;
                for i in 0..p {
                    w_new[i] += white.data[(i, j)] * g;
                }
            }
            let tf = t as f64;
            w_new /= tf;
            w_new -= &w * (gprime_sum / tf);

            gram_schmidt(&mut w_new, &unmixing, comp);
            normalize_or_redraw(&mut w_new, &mut rng, &unmixing, comp);

            let dot = w_new.dot(&w).abs();
            w = w_new;
            if dot > 1.0 - tol {
                converged[comp] = true;
                break;
            }
        }
        unmixing.row_mut(comp).copy_from(&w.transpose());
    }

    let comp_matrix = &unmixing * &white.data;
    let components = (0..k)
        .map(|i| comp_matrix.row(i).iter().copied().collect())
        .collect();
    Ok(IcaResult {
        components,
        unmixing,
        whitener: white.whitener.clone(),
        means: white.means.clone(),
        k_extracted: k,
        converged,
    })
}

fn random_unit(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    let mut v = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
    let norm = v.norm();
    if norm > 1e-12 {
        v /= norm;
    } else {
        v.fill(0.0);
        v[0] = 1.0;
    }
    v
}

/// Removes projections onto the first `count` rows of `basis`.
fn gram_schmidt(w: &mut DVector<f64>, basis: &DMatrix<f64>, count: usize) {
    for i in 0..count {
        let row = basis.row(i);
        let proj: f64 = row.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        for (j, val) in w.iter_mut().enumerate() {
            *val -= proj * row[j];
        }
    }
}

fn normalize_or_redraw(
    w: &mut DVector<f64>,
    rng: &mut ChaCha8Rng,
    basis: &DMatrix<f64>,
    count: usize,
) {
    loop {
        let norm = w.norm();
        if norm > 1e-12 {
            *w /= norm;
            return;
        }
        *w = random_unit(rng, w.len());
        gram_schmidt(w, basis, count);
    }
}

/// A matched pair of components with its absolute Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentMatch {
    pub a: usize,
    pub b: usize,
    pub abs_correlation: f64,
}

/// Greedy maximum-correlation bipartite matching.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub pairs: Vec<ComponentMatch>,
}

impl MatchReport {
    pub fn mean_abs_correlation(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().map(|p| p.abs_correlation).sum::<f64>() / self.pairs.len() as f64
    }

    pub fn best(&self) -> Option<&ComponentMatch> {
        self.pairs
            .iter()
            .max_by(|x, y| x.abs_correlation.partial_cmp(&y.abs_correlation).unwrap())
    }

    /// Permutation mapping indices in `a` to their match in `b`.
    pub fn permutation(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.a, p.b)).collect()
    }
}

/// Matches two component sets by repeatedly pairing the highest remaining
/// absolute Pearson correlation. Sign ambiguity is absorbed by the
/// absolute value; zero-variance components correlate as zero.
pub fn match_components(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<MatchReport, IcaError> {
    if a.is_empty() || b.is_empty() {
        return Err(IcaError::EmptyComponents);
    }
    for row in a.iter().chain(b.iter()) {
        if row.len() != a[0].len() {
            return Err(IcaError::LengthMismatch(row.len(), a[0].len()));
        }
    }
    let mut corr = vec![vec![0.0f64; b.len()]; a.len()];
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            corr[i][j] = pearson(ca, cb).map(f64::abs).unwrap_or(0.0);
        }
    }
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for _ in 0..a.len().min(b.len()) {
        let mut best = (0usize, 0usize, -1.0f64);
        for i in 0..a.len() {
            if used_a[i] {
                continue;
            }
            for j in 0..b.len() {
                if used_b[j] {
                    continue;
                }
                if corr[i][j] > best.2 {
                    best = (i, j, corr[i][j]);
                }
            }
        }
        used_a[best.0] = true;
        used_b[best.1] = true;
        pairs.push(ComponentMatch {
            a: best.0,
            b: best.1,
            abs_correlation: best.2,
        });
    }
    Ok(MatchReport { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn recording(channels: Vec<Vec<f64>>, fs: f64) -> MultichannelRecording {
        MultichannelRecording::from_channels(channels, fs).unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn sine(n: usize, fs: f64, hz: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * hz * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn bandpass_removes_dc() {
        let rec = recording(vec![vec![3.7; 2000], vec![-1.2; 2000]], 250.0);
        let out = bandpass(&rec, 1.75, 100.0).unwrap();
        for c in 0..2 {
            let peak = out.channel(c).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(peak < 1e-3 * 3.7, "peak={peak}");
        }
    }

    #[test]
    fn bandpass_preserves_midband() {
        let x = sine(4000, 250.0, 10.0);
        let rec = recording(vec![x.clone()], 250.0);
        let out = bandpass(&rec, 1.75, 100.0).unwrap();
        let ratio = rms(out.channel(0)) / rms(&x);
        assert!((ratio - 1.0).abs() < 0.05, "ratio={ratio}");
    }

    #[test]
    fn bandpass_attenuates_below_band() {
        let x = sine(10000, 250.0, 0.2);
        let rec = recording(vec![x.clone()], 250.0);
        let out = bandpass(&rec, 1.75, 100.0).unwrap();
        let ratio = rms(out.channel(0)) / rms(&x);
        assert!(
            ratio < 0.1,
            "0.2 Hz should be attenuated by >= 20 dB, ratio={ratio}"
        );
    }

    #[test]
    fn bandpass_rejects_bad_band() {
        let rec = recording(vec![vec![0.0; 100]], 250.0);
        assert!(bandpass(&rec, 0.0, 50.0).is_err());
        assert!(bandpass(&rec, 10.0, 5.0).is_err());
        assert!(bandpass(&rec, 1.0, 130.0).is_err());
    }

    fn correlated_pair(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            a.push(z1);
            b.push(rho * z1 + (1.0 - rho * rho).sqrt() * z2);
        }
        (a, b)
    }

    #[test]
    fn whiten_decorrelates() {
        let (a, b) = correlated_pair(2000, 0.8, 1);
        let rec = recording(vec![a, b], 250.0);
        let white = whiten(&rec).unwrap();
        let t = white.data.ncols() as f64;
        let cov = &white.data * white.data.transpose() / t;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - expect).abs() < 1e-8, "cov[{i}{j}]={}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn whiten_near_white_input_gives_near_orthogonal_whitener() {
        let (a, b) = correlated_pair(20000, 0.0, 2);
        let rec = recording(vec![a, b], 250.0);
        let white = whiten(&rec).unwrap();
        let prod = &white.whitener * white.whitener.transpose();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - expect).abs() < 0.1);
            }
        }
    }

    #[test]
    fn whiten_drops_duplicated_channel() {
        let (a, b) = correlated_pair(1000, 0.0, 3);
        let rec = recording(vec![a.clone(), b, a], 250.0);
        let white = whiten(&rec).unwrap();
        assert_eq!(white.dropped, 1);
        assert_eq!(white.data.nrows(), 2);
    }

    #[test]
    fn whiten_rejects_rank_one_data() {
        let (a, _) = correlated_pair(1000, 0.0, 17);
        let rec = recording(vec![a.clone(), a], 250.0);
        assert!(matches!(whiten(&rec), Err(IcaError::RankTooLow(1))));
    }

    #[test]
    fn fastica_separates_uniform_sources() {
        let n = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let s2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let x1: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| 0.7 * a + 0.3 * b).collect();
        let x2: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| 0.2 * a - 0.8 * b).collect();
        let rec = recording(vec![x1, x2], 250.0);
        let white = whiten(&rec).unwrap();
        let result = fastica_deflation(&white, 2, 7, 500, 1e-7).unwrap();
        assert!(result.converged.iter().all(|&c| c));
        let report = match_components(&result.components, &[s1, s2]).unwrap();
        for pair in &report.pairs {
            assert!(pair.abs_correlation > 0.99, "corr={}", pair.abs_correlation);
        }
    }

    fn pulse_source(n: usize, period: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        let mut c = period / 3;
        while c < n {
            x[c] = 5.0;
            c += period;
        }
        x
    }

    #[test]
    fn fastica_finds_pulse_train_first() {
        let n = 5000;
        let pulses = pulse_source(n, 97);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let smooth: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * i as f64 / 180.0).sin() + 0.1 * rng.gen::<f64>())
            .collect();
        let x1: Vec<f64> = pulses.iter().zip(&smooth).map(|(a, b)| 0.6 * a + 0.4 * b).collect();
        let x2: Vec<f64> = pulses.iter().zip(&smooth).map(|(a, b)| 0.3 * a - 0.7 * b).collect();
        let rec = recording(vec![x1, x2], 250.0);
        let white = whiten(&rec).unwrap();
        let result = fastica_deflation(&white, 1, 11, 500, 1e-7).unwrap();
        let corr = pearson(&result.components[0], &pulses).unwrap().abs();
        assert!(corr > 0.95, "corr={corr}");
    }

    fn excess_kurtosis(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        m4 / (m2 * m2) - 3.0
    }

    #[test]
    fn fastica_on_gaussian_input_is_degenerate() {
        // Rotationally symmetric input: either a unit fails to converge or
        // the recovered directions stay near-Gaussian.
        let (a, b) = correlated_pair(6000, 0.0, 12);
        let rec = recording(vec![a, b], 250.0);
        let white = whiten(&rec).unwrap();
        let result = fastica_deflation(&white, 2, 13, 50, 1e-9).unwrap();
        let all_converged = result.converged.iter().all(|&c| c);
        let max_kurt = result
            .components
            .iter()
            .map(|c| excess_kurtosis(c).abs())
            .fold(0.0f64, f64::max);
        assert!(!all_converged || max_kurt < 1.0, "kurt={max_kurt}");
    }

    #[test]
    fn unmixing_rows_are_orthonormal_and_components_standardized() {
        let n = 3000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let s2: Vec<f64> = (0..n).map(|i| ((i % 61) as f64 / 30.0 - 1.0)).collect();
        let s3: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < 0.05 { 3.0 } else { 0.0 }).collect();
        let mix = |c1: f64, c2: f64, c3: f64| -> Vec<f64> {
            (0..n).map(|i| c1 * s1[i] + c2 * s2[i] + c3 * s3[i]).collect()
        };
        let rec = recording(vec![mix(0.5, 0.3, 0.2), mix(0.1, -0.6, 0.4), mix(-0.4, 0.2, 0.7)], 250.0);
        let white = whiten(&rec).unwrap();
        let result = fastica_deflation(&white, 3, 5, 500, 1e-7).unwrap();

        let gram = &result.unmixing * result.unmixing.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-8);
            }
        }
        for comp in &result.components {
            let mean = comp.iter().sum::<f64>() / n as f64;
            let var = comp.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-8, "mean={mean}");
            assert!((var - 1.0).abs() < 1e-8, "var={var}");
        }

        // Rows of (unmixing * whitener) reproduce components from the
        // centered channel data.
        let full = &result.unmixing * &result.whitener;
        for (i, comp) in result.components.iter().enumerate() {
            for t in 0..n {
                let mut acc = 0.0;
                for c in 0..3 {
                    acc += full[(i, c)] * (rec.channel(c)[t] - result.means[c]);
                }
                assert!((acc - comp[t]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn match_identical_components() {
        let a = vec![sine(500, 250.0, 3.0), sine(500, 250.0, 11.0)];
        let report = match_components(&a, &a).unwrap();
        assert_eq!(report.pairs.len(), 2);
        for pair in &report.pairs {
            assert_eq!(pair.a, pair.b);
            assert!((pair.abs_correlation - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn match_sign_flipped_components() {
        let a = vec![sine(500, 250.0, 3.0), sine(500, 250.0, 11.0)];
        let flipped: Vec<Vec<f64>> = a
            .iter()
            .map(|c| c.iter().map(|v| -v).collect())
            .collect();
        let report = match_components(&a, &flipped).unwrap();
        for pair in &report.pairs {
            assert!((pair.abs_correlation - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn match_noisy_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a: Vec<Vec<f64>> = vec![sine(2000, 250.0, 2.0), sine(2000, 250.0, 7.0)];
        // 20 dB SNR additive white noise.
        let noisy: Vec<Vec<f64>> = a
            .iter()
            .map(|c| {
                let p = rms(c);
                let sigma = p * 10f64.powf(-20.0 / 20.0);
                c.iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + sigma * z
                    })
                    .collect()
            })
            .collect();
        let report = match_components(&a, &noisy).unwrap();
        for pair in &report.pairs {
            assert!(pair.abs_correlation > 0.97, "corr={}", pair.abs_correlation);
        }
    }

    #[test]
    fn match_empty_errors() {
        let a = vec![sine(100, 250.0, 3.0)];
        assert!(matches!(
            match_components(&a, &[]),
            Err(IcaError::EmptyComponents)
        ));
    }
}
