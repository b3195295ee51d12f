//! Retrieval reports and embedding projections on disk.
//!
//! A report lands twice: `report.json` holds the full structure (largest
//! k, one curve per predicate, classification accuracy) and `report.csv`
//! holds the curves for plotting — a `k` column plus one column per
//! predicate label, one row per rank. `pca.csv` carries the 2-D embedding
//! projection as `id,split,fine,pc1,pc2`, one row per sample in id order.

use std::fs;
use std::path::Path;

use serde::Serialize;
use strata_core::dataset::{Dataset, Split};
use strata_core::eval::RetrievalReport;

use crate::error::{CliError, CliResult};
use crate::jsonfmt;

/// Report JSON file name inside a run directory.
pub const REPORT_JSON_FILE: &str = "report.json";
/// Report CSV file name inside a run directory.
pub const REPORT_CSV_FILE: &str = "report.csv";
/// PCA projection file name inside a run directory.
pub const PCA_FILE: &str = "pca.csv";

#[derive(Serialize)]
struct ReportFile<'a> {
    k_max: usize,
    classification_accuracy: f64,
    curves: Vec<CurveFile<'a>>,
}

#[derive(Serialize)]
struct CurveFile<'a> {
    predicate: String,
    values: &'a [f64],
}

fn float(value: f64) -> String {
    format!("{:.16e}", value)
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn write_report(dir: &Path, report: &RetrievalReport) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let file = ReportFile {
        k_max: report.k_max,
        classification_accuracy: report.classification_accuracy,
        curves: report
            .curves
            .iter()
            .map(|c| CurveFile { predicate: c.predicate.label(), values: &c.values })
            .collect(),
    };
    let json_path = dir.join(REPORT_JSON_FILE);
    let mut text = jsonfmt::to_string(&file)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| CliError::io(&json_path, e))?;

    let mut csv = String::from("k");
    for curve in &report.curves {
        csv.push(',');
        csv.push_str(&curve.predicate.label());
    }
    csv.push('\n');
    for k in 1..=report.k_max {
        csv.push_str(&k.to_string());
        for curve in &report.curves {
            csv.push(',');
            csv.push_str(&float(curve.values[k - 1]));
        }
        csv.push('\n');
    }
    let csv_path = dir.join(REPORT_CSV_FILE);
    fs::write(&csv_path, csv).map_err(|e| CliError::io(&csv_path, e))
}

/// Writes the 2-D projection of every sample's embedding to `path`.
/// `coords` must hold one row per sample, in id order.
pub fn write_pca(path: &Path, dataset: &Dataset, coords: &[[f64; 2]]) -> CliResult<()> {
    if coords.len() != dataset.len() {
        return Err(CliError::validation(format!(
            "projection has {} rows but the dataset has {} samples",
            coords.len(),
            dataset.len()
        )));
    }
    let mut csv = String::from("id,split,fine,pc1,pc2\n");
    for (sample, row) in dataset.samples().iter().zip(coords) {
        let split = match sample.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            sample.id,
            split,
            sample.fine,
            float(row[0]),
            float(row[1])
        ));
    }
    fs::write(path, csv).map_err(|e| CliError::io(path, e))
}
