//! File formats and command plumbing for the metric-learning toolkit.
//!
//! The numeric core lives in `strata-core`; this crate adds everything that
//! touches the outside world: dataset manifests, parameter checkpoints,
//! epoch logs, retrieval reports, the run-config schema, and the command
//! implementations behind the `strata` binary. Formats are plain JSON,
//! JSON-lines, and CSV, with every float carrying 17 significant digits so
//! values round-trip bitwise and identical runs rewrite identical bytes.

#![deny(missing_docs)]

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod jsonfmt;
pub mod manifest;
pub mod report;
pub mod runlog;

pub use error::{CliError, CliResult};

use std::time::Instant;

use strata_core::trainer::Clock;

/// Monotonic wall clock for live training runs. Epoch durations reach the
/// console summary only; persisted logs omit them (see [`runlog`]).
pub struct StdClock {
    start: Instant,
}

impl StdClock {
    /// Starts the clock at zero.
    pub fn new() -> Self {
        StdClock { start: Instant::now() }
    }
}

impl Default for StdClock {
    fn default() -> Self {
        StdClock::new()
    }
}

impl Clock for StdClock {
    fn seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}
