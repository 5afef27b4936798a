//! Bit-exact file I/O for multichannel recordings and compressed payloads,
//! plus windowing and decimation.
//!
//! Recordings are plain CSV: one row per time sample, one column per
//! channel, decimal text with `.` radix and no header by default. Payload
//! files carry a single-line JSON header describing the sensing matrix
//! followed by CSV rows of compressed windows. Floats are written with
//! Rust's shortest round-trip formatting, so save/load cycles are
//! bit-exact.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalIoError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no samples")]
    NoSamples,
    #[error("non-numeric cell at row {row}, column {col}: {value:?}")]
    NonNumericCell {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("ragged row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("sampling rate must be positive, got {0}")]
    BadSamplingRate(f64),
    #[error("channel lengths differ")]
    UnequalChannels,
    #[error("empty channel")]
    EmptyChannel,
    #[error("window length must be at least 1")]
    ZeroWindowLength,
    #[error("downsample factor must be at least 1")]
    ZeroFactor,
    #[error("bad payload header: {0}")]
    BadHeader(String),
    #[error("payload segment {index} has {found} entries, expected {expected}")]
    SegmentLength {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("descriptor is inconsistent: {0}")]
    BadDescriptor(String),
}

/// A channels-by-samples matrix with its sampling rate.
///
/// Immutable after construction; all values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelRecording {
    channels: Vec<Vec<f64>>,
    sampling_rate_hz: f64,
}

impl MultichannelRecording {
    /// Builds a recording from per-channel sample vectors.
    pub fn from_channels(
        channels: Vec<Vec<f64>>,
        sampling_rate_hz: f64,
    ) -> Result<Self, SignalIoError> {
        if sampling_rate_hz <= 0.0 || !sampling_rate_hz.is_finite() {
            return Err(SignalIoError::BadSamplingRate(sampling_rate_hz));
        }
        if channels.is_empty() || channels[0].is_empty() {
            return Err(SignalIoError::NoSamples);
        }
        let samples = channels[0].len();
        for (c, ch) in channels.iter().enumerate() {
            if ch.len() != samples {
                return Err(SignalIoError::UnequalChannels);
            }
            for (t, &v) in ch.iter().enumerate() {
                if !v.is_finite() {
                    return Err(SignalIoError::NonFinite { row: t + 1, col: c + 1 });
                }
            }
        }
        Ok(Self {
            channels,
            sampling_rate_hz,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    pub fn samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_data(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }
}

/// Loads a recording from CSV (row = time sample, column = channel).
///
/// With `has_header` set, the first line is skipped. Cells are parsed as
/// decimal literals; row/column positions in errors are 1-based.
pub fn load_recording(
    path: &Path,
    sampling_rate_hz: f64,
    has_header: bool,
) -> Result<MultichannelRecording, SignalIoError> {
    let file = File::open(path).map_err(|source| SignalIoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut channels: Vec<Vec<f64>> = Vec::new();
    let mut expected_cols = 0usize;
    let mut row = 0usize;
    let mut lines = reader.lines();
    if has_header {
        let _ = lines.next().transpose()?;
    }
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let cells: Vec<&str> = line.split(',').collect();
        if row == 1 {
            expected_cols = cells.len();
            channels = vec![Vec::new(); expected_cols];
        } else if cells.len() != expected_cols {
            return Err(SignalIoError::RaggedRow {
                row,
                expected: expected_cols,
                found: cells.len(),
            });
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| SignalIoError::NonNumericCell {
                row,
                col: col + 1,
                value: cell.trim().to_string(),
            })?;
            if !v.is_finite() {
                return Err(SignalIoError::NonFinite { row, col: col + 1 });
            }
            channels[col].push(v);
        }
    }
    if row == 0 {
        return Err(SignalIoError::NoSamples);
    }
    MultichannelRecording::from_channels(channels, sampling_rate_hz)
}

/// Writes a recording as CSV, one row per time sample.
pub fn save_recording(rec: &MultichannelRecording, path: &Path) -> Result<(), SignalIoError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_csv_rows(&mut w, rec.channel_data(), rec.samples())?;
    w.flush()?;
    Ok(())
}

/// Writes channel-major data as sample-major CSV rows.
fn write_csv_rows<W: Write>(
    w: &mut W,
    channels: &[Vec<f64>],
    samples: usize,
) -> Result<(), SignalIoError> {
    let mut line = String::new();
    for t in 0..samples {
        line.clear();
        for (c, ch) in channels.iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", ch[t]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Keeps every `factor`-th sample starting at index 0 and divides the
/// sampling rate accordingly. Plain decimation, no anti-alias filtering.
pub fn downsample(
    rec: &MultichannelRecording,
    factor: usize,
) -> Result<MultichannelRecording, SignalIoError> {
    if factor == 0 {
        return Err(SignalIoError::ZeroFactor);
    }
    let channels = rec
        .channel_data()
        .iter()
        .map(|ch| ch.iter().step_by(factor).copied().collect())
        .collect();
    MultichannelRecording::from_channels(channels, rec.sampling_rate_hz() / factor as f64)
}

/// A channel split into fixed-length windows, zero-padded at the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedChannel {
    pub windows: Vec<Vec<f64>>,
    pub window_length: usize,
    /// Number of zero samples appended to fill the final window.
    pub pad_tail: usize,
}

impl SegmentedChannel {
    /// Concatenates the windows and trims the zero padding, recovering the
    /// original channel exactly.
    pub fn desegment(&self) -> Vec<f64> {
        desegment_windows(&self.windows, self.pad_tail)
    }
}

/// Concatenates windows and drops the final `pad_tail` samples.
pub fn desegment_windows(windows: &[Vec<f64>], pad_tail: usize) -> Vec<f64> {
    let mut out: Vec<f64> = windows.iter().flatten().copied().collect();
    out.truncate(out.len().saturating_sub(pad_tail));
    out
}

/// Splits a channel into `ceil(len / window_length)` windows.
pub fn segment_channel(
    channel: &[f64],
    window_length: usize,
) -> Result<SegmentedChannel, SignalIoError> {
    if window_length == 0 {
        return Err(SignalIoError::ZeroWindowLength);
    }
    if channel.is_empty() {
        return Err(SignalIoError::EmptyChannel);
    }
    let count = channel.len().div_ceil(window_length);
    let mut windows = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * window_length;
        let end = (start + window_length).min(channel.len());
        let mut win = channel[start..end].to_vec();
        win.resize(window_length, 0.0);
        windows.push(win);
    }
    Ok(SegmentedChannel {
        windows,
        window_length,
        pad_tail: count * window_length - channel.len(),
    })
}

/// Parameters that regenerate a sparse binary sensing matrix exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixDescriptor {
    pub seed: u64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PayloadHeader {
    seed: u64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    d: usize,
    channel: usize,
    pad_tail: usize,
}

/// Compressed windows of one channel together with everything needed to
/// reconstruct them: the matrix descriptor and the tail padding.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPayload {
    pub segments: Vec<Vec<f64>>,
    pub descriptor: MatrixDescriptor,
    pub channel_id: usize,
    pub window_length: usize,
    pub pad_tail: usize,
}

impl CompressedPayload {
    pub fn new(
        segments: Vec<Vec<f64>>,
        descriptor: MatrixDescriptor,
        channel_id: usize,
        pad_tail: usize,
    ) -> Result<Self, SignalIoError> {
        if descriptor.m > descriptor.n || descriptor.m == 0 {
            return Err(SignalIoError::BadDescriptor(format!(
                "M={} N={}",
                descriptor.m, descriptor.n
            )));
        }
        for (index, seg) in segments.iter().enumerate() {
            if seg.len() != descriptor.m {
                return Err(SignalIoError::SegmentLength {
                    index,
                    found: seg.len(),
                    expected: descriptor.m,
                });
            }
        }
        Ok(Self {
            segments,
            descriptor,
            channel_id,
            window_length: descriptor.n,
            pad_tail,
        })
    }
}

/// Writes a payload: JSON header line, then one CSV row per window.
pub fn save_payload(payload: &CompressedPayload, path: &Path) -> Result<(), SignalIoError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let header = PayloadHeader {
        seed: payload.descriptor.seed,
        m: payload.descriptor.m,
        n: payload.descriptor.n,
        d: payload.descriptor.d,
        channel: payload.channel_id,
        pad_tail: payload.pad_tail,
    };
    let header_line =
        serde_json::to_string(&header).map_err(|e| SignalIoError::BadHeader(e.to_string()))?;
    w.write_all(header_line.as_bytes())?;
    w.write_all(b"\n")?;
    for seg in &payload.segments {
        let row: Vec<String> = seg.iter().map(|v| format!("{v}")).collect();
        w.write_all(row.join(",").as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a payload written by [`save_payload`].
pub fn load_payload(path: &Path) -> Result<CompressedPayload, SignalIoError> {
    let file = File::open(path).map_err(|source| SignalIoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .transpose()?
        .ok_or_else(|| SignalIoError::BadHeader("missing header line".into()))?;
    let header: PayloadHeader = serde_json::from_str(&header_line)
        .map_err(|e| SignalIoError::BadHeader(e.to_string()))?;
    let mut segments = Vec::new();
    for (index, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut seg = Vec::with_capacity(header.m);
        for (col, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| SignalIoError::NonNumericCell {
                row: index + 2,
                col: col + 1,
                value: cell.trim().to_string(),
            })?;
            seg.push(v);
        }
        if seg.len() != header.m {
            return Err(SignalIoError::SegmentLength {
                index,
                found: seg.len(),
                expected: header.m,
            });
        }
        segments.push(seg);
    }
    CompressedPayload::new(
        segments,
        MatrixDescriptor {
            seed: header.seed,
            m: header.m,
            n: header.n,
            d: header.d,
        },
        header.channel,
        header.pad_tail,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn load_simple_three_column_csv() {
        let dir = tempdir().unwrap();
        let mut body = String::new();
        for t in 0..100 {
            body.push_str(&format!("{},{},{}\n", t, t * 2, t * 3));
        }
        let path = write_file(&dir, "rec.csv", &body);
        let rec = load_recording(&path, 250.0, false).unwrap();
        assert_eq!(rec.channels(), 3);
        assert_eq!(rec.samples(), 100);
        assert_eq!(rec.channel(1)[10], 20.0);
    }

    #[test]
    fn load_empty_file_is_no_samples() {
        let dir = tempdir().unwrap();
        let path = write_file(&dir, "empty.csv", "");
        assert!(matches!(
            load_recording(&path, 250.0, false),
            Err(SignalIoError::NoSamples)
        ));
    }

    #[test]
    fn load_missing_file_errors() {
        assert!(matches!(
            load_recording(Path::new("/nonexistent/rec.csv"), 250.0, false),
            Err(SignalIoError::Open { .. })
        ));
    }

    #[test]
    fn load_reports_bad_cell_position() {
        let dir = tempdir().unwrap();
        let path = write_file(&dir, "bad.csv", "1,2\n3,oops\n");
        match load_recording(&path, 250.0, false) {
            Err(SignalIoError::NonNumericCell { row, col, .. }) => {
                assert_eq!((row, col), (2, 2));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn load_rejects_ragged_rows() {
        let dir = tempdir().unwrap();
        let path = write_file(&dir, "ragged.csv", "1,2\n3\n");
        assert!(matches!(
            load_recording(&path, 250.0, false),
            Err(SignalIoError::RaggedRow { row: 2, .. })
        ));
    }

    #[test]
    fn header_flag_skips_first_row() {
        let dir = tempdir().unwrap();
        let path = write_file(&dir, "hdr.csv", "a,b\n1,2\n");
        let rec = load_recording(&path, 100.0, true).unwrap();
        assert_eq!(rec.samples(), 1);
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut nextf = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2e3 - 1e3
        };
        let channels: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..50).map(|_| nextf()).collect())
            .collect();
        let rec = MultichannelRecording::from_channels(channels, 1000.0).unwrap();
        let path = dir.path().join("rt.csv");
        save_recording(&rec, &path).unwrap();
        let back = load_recording(&path, 1000.0, false).unwrap();
        assert_eq!(rec.channel_data(), back.channel_data());
    }

    #[test]
    fn downsample_identity_and_ramp() {
        let ramp: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let rec = MultichannelRecording::from_channels(vec![ramp], 1000.0).unwrap();
        let same = downsample(&rec, 1).unwrap();
        assert_eq!(same.channel(0), rec.channel(0));
        let half = downsample(&rec, 2).unwrap();
        assert_eq!(half.channel(0), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(half.sampling_rate_hz(), 500.0);
    }

    #[test]
    fn downsample_1000_to_250() {
        let rec =
            MultichannelRecording::from_channels(vec![vec![1.0; 1000]], 1000.0).unwrap();
        let out = downsample(&rec, 4).unwrap();
        assert_eq!(out.samples(), 250);
        assert_eq!(out.sampling_rate_hz(), 250.0);
    }

    #[test]
    fn downsample_zero_factor_errors() {
        let rec = MultichannelRecording::from_channels(vec![vec![1.0; 8]], 100.0).unwrap();
        assert!(matches!(downsample(&rec, 0), Err(SignalIoError::ZeroFactor)));
    }

    #[test]
    fn downsample_composes() {
        let ch: Vec<f64> = (0..240).map(|i| (i as f64).cos()).collect();
        let rec = MultichannelRecording::from_channels(vec![ch], 1200.0).unwrap();
        let ab = downsample(&rec, 6).unwrap();
        let a_then_b = downsample(&downsample(&rec, 2).unwrap(), 3).unwrap();
        assert_eq!(ab.channel_data(), a_then_b.channel_data());
        assert_eq!(ab.sampling_rate_hz(), a_then_b.sampling_rate_hz());
    }

    #[test]
    fn segment_exact_multiple() {
        let ch = vec![0.5; 12800];
        let seg = segment_channel(&ch, 512).unwrap();
        assert_eq!(seg.windows.len(), 25);
        assert_eq!(seg.pad_tail, 0);
    }

    #[test]
    fn segment_with_padding() {
        let ch = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let seg = segment_channel(&ch, 4).unwrap();
        assert_eq!(seg.windows.len(), 2);
        assert_eq!(seg.pad_tail, 3);
        assert_eq!(seg.windows[1], vec![5.0, 0.0, 0.0, 0.0]);
        assert_eq!(seg.desegment(), ch);
    }

    #[test]
    fn segment_empty_channel_errors() {
        assert!(matches!(
            segment_channel(&[], 4),
            Err(SignalIoError::EmptyChannel)
        ));
    }

    proptest! {
        #[test]
        fn segment_desegment_round_trip(len in 1usize..1000, n in 1usize..80) {
            let ch: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
            let seg = segment_channel(&ch, n).unwrap();
            for w in &seg.windows {
                prop_assert_eq!(w.len(), n);
            }
            prop_assert_eq!(seg.desegment(), ch);
        }
    }

    fn sample_payload() -> CompressedPayload {
        CompressedPayload::new(
            vec![vec![1.5, -2.25, 0.125], vec![7.0, 0.0, -0.5]],
            MatrixDescriptor {
                seed: 42,
                m: 3,
                n: 6,
                d: 2,
            },
            1,
            4,
        )
        .unwrap()
    }

    #[test]
    fn payload_round_trip() {
        let dir = tempdir().unwrap();
        let payload = sample_payload();
        let path = dir.path().join("ch1.payload");
        save_payload(&payload, &path).unwrap();
        let back = load_payload(&path).unwrap();
        assert_eq!(payload, back);
    }

    #[test]
    fn payload_empty_segments_is_valid() {
        let dir = tempdir().unwrap();
        let payload = CompressedPayload::new(
            vec![],
            MatrixDescriptor {
                seed: 1,
                m: 4,
                n: 8,
                d: 2,
            },
            0,
            0,
        )
        .unwrap();
        let path = dir.path().join("empty.payload");
        save_payload(&payload, &path).unwrap();
        let back = load_payload(&path).unwrap();
        assert_eq!(back.segments.len(), 0);
    }

    #[test]
    fn payload_wrong_segment_length_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("corrupt.payload");
        std::fs::write(
            &path,
            "{\"seed\":1,\"M\":3,\"N\":6,\"d\":2,\"channel\":0,\"pad_tail\":0}\n1.0,2.0\n",
        )
        .unwrap();
        assert!(matches!(
            load_payload(&path),
            Err(SignalIoError::SegmentLength { .. })
        ));
    }

    #[test]
    fn payload_corrupt_header_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("hdr.payload");
        std::fs::write(&path, "{\"seed\":1,\"M\":\"x\"}\n").unwrap();
        assert!(matches!(
            load_payload(&path),
            Err(SignalIoError::BadHeader(_))
        ));
    }
}
