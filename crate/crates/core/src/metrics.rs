//! Quantitative evaluation primitives: MSE, Pearson correlation, R-peak
//! detection, and signal/interference/noise power ratios.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("zero-variance input")]
    ZeroVariance,
    #[error("zero denominator power")]
    ZeroPower,
    #[error("min_rate_hz must be positive")]
    BadMinRate,
}

/// Mean of squared elementwise differences.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::ShapeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::TooShort(0));
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// MSE over a channels-by-samples matrix, averaged across all entries.
pub fn mse_matrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::ShapeMismatch(a.len(), b.len()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (ra, rb) in a.iter().zip(b) {
        if ra.len() != rb.len() {
            return Err(MetricsError::ShapeMismatch(ra.len(), rb.len()));
        }
        sum += ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        count += ra.len();
    }
    if count == 0 {
        return Err(MetricsError::TooShort(0));
    }
    Ok(sum / count as f64)
}

/// Sample Pearson correlation coefficient in [-1, 1].
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::ShapeMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricsError::TooShort(a.len()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Detected R-peak positions, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakList {
    /// Strictly increasing sample indices.
    pub indices: Vec<usize>,
    /// Refractory gap enforced between accepted peaks, in samples.
    pub min_distance: usize,
}

/// Detects peaks of `|x|` above an amplitude threshold.
///
/// The threshold is half the 99th percentile of `|x|` (nearest-rank), so
/// detection is invariant under positive rescaling of the signal. Local
/// maxima are accepted greedily in order of decreasing amplitude while
/// enforcing a refractory gap of `sampling_rate_hz / min_rate_hz` samples.
pub fn detect_peaks(
    x: &[f64],
    sampling_rate_hz: f64,
    min_rate_hz: f64,
) -> Result<PeakList, MetricsError> {
    if min_rate_hz <= 0.0 || sampling_rate_hz <= 0.0 {
        return Err(MetricsError::BadMinRate);
    }
    if x.len() < 2 {
        return Err(MetricsError::TooShort(x.len()));
    }
    let min_distance = (sampling_rate_hz / min_rate_hz).round().max(1.0) as usize;
    let amp: Vec<f64> = x.iter().map(|v| v.abs()).collect();

    // Nearest-rank 99th percentile.
    let mut sorted = amp.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.99 * sorted.len() as f64).ceil() as usize).max(1) - 1;
    let threshold = 0.5 * sorted[rank.min(sorted.len() - 1)];

    let n = amp.len();
    let mut candidates: Vec<usize> = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || amp[i] >= amp[i - 1];
        let right_ok = i == n - 1 || amp[i] >= amp[i + 1];
        if left_ok && right_ok && amp[i] > threshold {
            candidates.push(i);
        }
    }
    // Amplitude-priority suppression; ties broken by lower index.
    candidates.sort_by(|&i, &j| amp[j].partial_cmp(&amp[i]).unwrap().then(i.cmp(&j)));
    let mut accepted: Vec<usize> = Vec::new();
    for &i in &candidates {
        if accepted
            .iter()
            .all(|&j| i.abs_diff(j) >= min_distance)
        {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    Ok(PeakList {
        indices: accepted,
        min_distance,
    })
}

/// Power ratios of a signal against interference and noise, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrMeasurement {
    pub sir_db: f64,
    pub snr_db: f64,
    pub sinr_db: f64,
}

fn mean_square(m: &[Vec<f64>]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in m {
        sum += row.iter().map(|v| v * v).sum::<f64>();
        count += row.len();
    }
    (if count > 0 { sum / count as f64 } else { 0.0 }, count)
}

/// Measures SIR, SNR, and SINR of a decomposition into signal,
/// interference, and noise matrices of equal shape.
///
/// Powers are mean squares over all entries. A zero interference or noise
/// power yields an infinite individual ratio; only a zero combined
/// interference-plus-noise power is an error.
pub fn measure_sinr(
    fecg: &[Vec<f64>],
    mecg: &[Vec<f64>],
    noise: &[Vec<f64>],
) -> Result<SinrMeasurement, MetricsError> {
    let (pf, nf) = mean_square(fecg);
    let (pm, nm) = mean_square(mecg);
    let (pn, nn) = mean_square(noise);
    if nf != nm || nf != nn {
        return Err(MetricsError::ShapeMismatch(nf, nm.max(nn)));
    }
    if nf == 0 {
        return Err(MetricsError::TooShort(0));
    }
    if pm + pn == 0.0 {
        return Err(MetricsError::ZeroPower);
    }
    Ok(SinrMeasurement {
        sir_db: 10.0 * (pf / pm).log10(),
        snr_db: 10.0 * (pf / pn).log10(),
        sinr_db: 10.0 * (pf / (pm + pn)).log10(),
    })
}
