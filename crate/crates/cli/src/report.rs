//! Sweep result tables and their CSV serialization.
//!
//! The CSV file is the artifact of record: plots are rendered from the
//! parsed CSV, never from in-memory sweep state. All columns except
//! `mean_runtime_s` are deterministic for a fixed master seed.

use serde::Serialize;
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_correlation: f64,
    pub std_correlation: f64,
    pub mean_mse: f64,
    pub mean_runtime_s: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub variable_name: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn new(variable_name: impl Into<String>, mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        Self {
            variable_name: variable_name.into(),
            rows,
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "variable,value,mean_correlation,std_correlation,mean_mse,mean_runtime_s,trials\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.variable_name,
                r.value,
                r.mean_correlation,
                r.std_correlation,
                r.mean_mse,
                r.mean_runtime_s,
                r.trials
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_csv_string())
    }

    /// Parses a CSV written by [`Self::write_csv`].
    pub fn from_csv(path: &Path) -> io::Result<Self> {
        let body = fs::read_to_string(path)?;
        let mut rows = Vec::new();
        let mut variable_name = String::new();
        for (i, line) in body.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("row {i} has {} cells, expected 7", cells.len()),
                ));
            }
            let parse = |s: &str| -> io::Result<f64> {
                s.parse()
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}: {s}")))
            };
            variable_name = cells[0].to_string();
            rows.push(SweepRow {
                value: parse(cells[1])?,
                mean_correlation: parse(cells[2])?,
                std_correlation: parse(cells[3])?,
                mean_mse: parse(cells[4])?,
                mean_runtime_s: parse(cells[5])?,
                trials: cells[6]
                    .parse()
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}")))?,
            });
        }
        Ok(Self {
            variable_name,
            rows,
        })
    }

    /// Plain-text table for terminal output.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>10}  {:>10} {:>10} {:>12} {:>12} {:>7}\n",
            self.variable_name, "corr", "std", "mse", "runtime_s", "trials"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>10.3}  {:>10.4} {:>10.4} {:>12.5e} {:>12.3} {:>7}\n",
                r.value, r.mean_correlation, r.std_correlation, r.mean_mse, r.mean_runtime_s, r.trials
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn rows_sorted_by_value() {
        let report = SweepReport::new(
            "cr",
            vec![
                SweepRow {
                    value: 60.0,
                    mean_correlation: 0.8,
                    std_correlation: 0.0,
                    mean_mse: 1.0,
                    mean_runtime_s: 0.1,
                    trials: 1,
                },
                SweepRow {
                    value: 20.0,
                    mean_correlation: 0.99,
                    std_correlation: 0.0,
                    mean_mse: 0.1,
                    mean_runtime_s: 0.1,
                    trials: 1,
                },
            ],
        );
        assert_eq!(report.rows[0].value, 20.0);
        assert_eq!(report.rows[1].value, 60.0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempdir().unwrap();
        let report = SweepReport::new(
            "density",
            vec![SweepRow {
                value: 2.0,
                mean_correlation: 0.9321,
                std_correlation: 0.0125,
                mean_mse: 3.25e-4,
                mean_runtime_s: 1.5,
                trials: 20,
            }],
        );
        let path = dir.path().join("sweep.csv");
        report.write_csv(&path).unwrap();
        let back = SweepReport::from_csv(&path).unwrap();
        assert_eq!(back.variable_name, "density");
        assert_eq!(back.rows.len(), 1);
        assert_eq!(back.rows[0].mean_correlation, 0.9321);
        assert_eq!(back.rows[0].trials, 20);
    }
}
