//! Training artifacts on disk: the per-epoch log and, when a run blows
//! up, the offending batch.
//!
//! The log is JSON-lines, one object per epoch: `{epoch, combined_loss,
//! softmax_loss, triplet_loss, train_accuracy}`. Wall-clock seconds are
//! deliberately absent — identical seeds must rewrite identical bytes,
//! and time is not a function of the seed. The divergence file records
//! where a run died and the batch it died on, for replay.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strata_core::trainer::{DivergenceReport, EpochLog};

use crate::error::{CliError, CliResult};
use crate::jsonfmt;

/// Epoch log file name inside a run directory.
pub const EPOCHS_FILE: &str = "epochs.jsonl";
/// Divergence report file name inside a run directory.
pub const DIVERGED_FILE: &str = "diverged_batch.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    epoch: usize,
    combined_loss: f64,
    softmax_loss: f64,
    triplet_loss: f64,
    train_accuracy: f64,
}

/// Writes one line per epoch; an empty run writes an empty file.
pub fn write_logs(path: &Path, logs: &[EpochLog]) -> CliResult<()> {
    let mut text = String::new();
    for log in logs {
        let line = Line {
            epoch: log.epoch,
            combined_loss: log.combined_loss,
            softmax_loss: log.softmax_loss,
            triplet_loss: log.triplet_loss,
            train_accuracy: log.train_accuracy,
        };
        text.push_str(&jsonfmt::to_string(&line)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads a log file back; `seconds` comes back as zero since the file
/// does not carry it.
pub fn read_logs(path: &Path) -> CliResult<Vec<EpochLog>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut logs = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let parsed: Line = serde_json::from_str(line).map_err(|e| {
            CliError::validation(format!("{}:{}: {}", path.display(), index + 1, e))
        })?;
        logs.push(EpochLog {
            epoch: parsed.epoch,
            combined_loss: parsed.combined_loss,
            softmax_loss: parsed.softmax_loss,
            triplet_loss: parsed.triplet_loss,
            train_accuracy: parsed.train_accuracy,
            seconds: 0.0,
        });
    }
    Ok(logs)
}

#[derive(Serialize)]
struct DivergedFile<'a> {
    epoch: usize,
    step: usize,
    softmax_loss: f64,
    triplet_loss: f64,
    detail: &'a str,
    batch: Vec<BatchLine<'a>>,
}

#[derive(Serialize)]
struct BatchLine<'a> {
    reference: usize,
    companions: Option<&'a [usize]>,
    margins: Option<&'a [f64]>,
}

/// Serializes a divergence report for replay. Non-finite loss values
/// (the usual reason a run is here) come out as JSON `null`; the `detail`
/// string names what was non-finite.
pub fn write_divergence(path: &Path, report: &DivergenceReport) -> CliResult<()> {
    let batch = report
        .batch
        .iter()
        .map(|item| BatchLine {
            reference: item.reference,
            companions: item.tuplet.as_ref().map(|t| t.companions.as_slice()),
            margins: item.tuplet.as_ref().map(|t| t.margins.as_slice()),
        })
        .collect();
    let file = DivergedFile {
        epoch: report.epoch,
        step: report.step,
        softmax_loss: report.softmax_loss,
        triplet_loss: report.triplet_loss,
        detail: &report.detail,
        batch,
    };
    let mut text = jsonfmt::to_string(&file)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
