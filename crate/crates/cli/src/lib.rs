//! Experiment harness behind the `biotelem` binary: the
//! compress-reconstruct-extract pipeline, Monte Carlo parameter sweeps,
//! and CSV/SVG reporting.

pub mod harness;
pub mod plot;
pub mod report;
