//! Dataset manifests: `meta.json` plus `samples.jsonl` in one directory.
//!
//! The meta file records the format version, feature dimension `F`, class
//! count `C`, hierarchy depth `x`, attribute-universe size, and split
//! sizes. The samples file holds one record per line in ascending id
//! order: `{id, split, x, fine, path, attrs}` with `x` the feature vector.
//! Field order is fixed and floats carry 17 significant digits, so
//! regenerating the same dataset rewrites byte-identical files. Loading
//! reruns every structural check in [`Dataset::new`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strata_core::dataset::{Dataset, Sample, Split};

use crate::error::{CliError, CliResult};
use crate::jsonfmt;

/// Version written to and required from `meta.json`.
pub const FORMAT_VERSION: u32 = 1;
/// Meta file name inside a dataset directory.
pub const META_FILE: &str = "meta.json";
/// Samples file name inside a dataset directory.
pub const SAMPLES_FILE: &str = "samples.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    format_version: u32,
    #[serde(rename = "F")]
    input_dim: usize,
    #[serde(rename = "C")]
    num_classes: usize,
    x: usize,
    num_attributes: usize,
    counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Counts {
    train: usize,
    test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: usize,
    split: String,
    x: Vec<f64>,
    fine: usize,
    path: Vec<u32>,
    attrs: Vec<u32>,
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

fn meta_for(dataset: &Dataset) -> Meta {
    Meta {
        format_version: FORMAT_VERSION,
        input_dim: dataset.input_dim(),
        num_classes: dataset.num_classes(),
        x: dataset.num_levels(),
        num_attributes: dataset.attributes().map_or(0, |a| a.num_attributes()),
        counts: Counts {
            train: dataset.ids(Split::Train).len(),
            test: dataset.ids(Split::Test).len(),
        },
    }
}

/// Writes `meta.json` and `samples.jsonl` into `dir`, creating it first.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let meta_path = dir.join(META_FILE);
    let mut meta_text = jsonfmt::to_string(&meta_for(dataset))?;
    meta_text.push('\n');
    fs::write(&meta_path, meta_text).map_err(|e| CliError::io(&meta_path, e))?;

    let mut lines = String::new();
    for sample in dataset.samples() {
        let record = Record {
            id: sample.id,
            split: split_name(sample.split).to_string(),
            x: sample.features.clone(),
            fine: sample.fine,
            path: sample.path.clone(),
            attrs: sample.attrs.clone(),
        };
        lines.push_str(&jsonfmt::to_string(&record)?);
        lines.push('\n');
    }
    let samples_path = dir.join(SAMPLES_FILE);
    fs::write(&samples_path, lines).map_err(|e| CliError::io(&samples_path, e))
}

/// Reads a dataset directory written by [`write_dataset`]. Malformed lines
/// are reported with their file and line number; the result passes the
/// same validation as a freshly built dataset.
pub fn read_dataset(dir: &Path) -> CliResult<Dataset> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {}", meta_path.display(), e)))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(CliError::validation(format!(
            "{}: format version {} is not the supported {}",
            meta_path.display(),
            meta.format_version,
            FORMAT_VERSION
        )));
    }

    let samples_path = dir.join(SAMPLES_FILE);
    let text = fs::read_to_string(&samples_path).map_err(|e| CliError::io(&samples_path, e))?;
    let mut samples = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let lineno = index + 1;
        let record: Record = serde_json::from_str(line).map_err(|e| {
            CliError::validation(format!("{}:{}: {}", samples_path.display(), lineno, e))
        })?;
        if record.x.len() != meta.input_dim {
            return Err(CliError::validation(format!(
                "{}:{}: sample {} has {} features but meta says F = {}",
                samples_path.display(),
                lineno,
                record.id,
                record.x.len(),
                meta.input_dim
            )));
        }
        if record.path.len() != meta.x {
            return Err(CliError::validation(format!(
                "{}:{}: sample {} has a {}-level path but meta says x = {}",
                samples_path.display(),
                lineno,
                record.id,
                record.path.len(),
                meta.x
            )));
        }
        let split = match record.split.as_str() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(CliError::validation(format!(
                    "{}:{}: split must be \"train\" or \"test\", got {:?}",
                    samples_path.display(),
                    lineno,
                    other
                )))
            }
        };
        samples.push(Sample {
            id: record.id,
            split,
            features: record.x,
            fine: record.fine,
            path: record.path,
            attrs: record.attrs,
        });
    }

    let dataset = Dataset::new(samples, meta.num_classes, meta.num_attributes)?;
    let counts = Counts {
        train: dataset.ids(Split::Train).len(),
        test: dataset.ids(Split::Test).len(),
    };
    if counts != meta.counts {
        return Err(CliError::validation(format!(
            "{}: counts say {} train / {} test but the samples file holds {} / {}",
            meta_path.display(),
            meta.counts.train,
            meta.counts.test,
            counts.train,
            counts.test
        )));
    }
    Ok(dataset)
}
