//! Implementations behind the binary's subcommands.
//!
//! Each command loads the run config, applies the flag overrides, does
//! its work, and reports failures as [`CliError`]; the binary maps those
//! to exit codes (0 success, 2 validation, 3 divergence, 4 gradient-check
//! failure). Commands are idempotent: identical config and seed rewrite
//! identical output bytes.

use std::fs;
use std::path::{Path, PathBuf};

use strata_core::dataset::Split;
use strata_core::eval::{pca_export, retrieval_report};
use strata_core::gradcheck::check_components;
use strata_core::net::forward;
use strata_core::trainer;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{checkpoint, manifest, report, runlog, StdClock};

/// Flag overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Output directory replacing the config's `out_dir`.
    pub out: Option<PathBuf>,
    /// Master seed replacing the config's `seed`.
    pub seed: Option<u64>,
    /// Suppress summary output.
    pub quiet: bool,
}

fn load(config_path: &Path, overrides: &Overrides) -> CliResult<(RunConfig, PathBuf)> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    let dir = match config_path.parent() {
        Some(parent) if parent != Path::new("") => parent.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((config, dir))
}

/// Generates a synthetic dataset and writes its manifest into the output
/// directory.
pub fn generate(config_path: &Path, overrides: &Overrides) -> CliResult<()> {
    let (config, config_dir) = load(config_path, overrides)?;
    let out = config.resolve_out_dir(overrides.out.as_deref(), &config_dir)?;
    let source = config.dataset()?;
    if !source.is_generator() {
        return Err(CliError::validation(
            "generate needs a generator dataset (\"hierarchy\" or \"attributes\"), not a path",
        ));
    }
    let dataset = source.realize(config.derived_seeds().dataset, &config_dir)?;
    manifest::write_dataset(&out, &dataset)?;
    if !overrides.quiet {
        println!(
            "seed {} | wrote {} samples ({} train / {} test), {} classes, {} features -> {}",
            config.seed,
            dataset.len(),
            dataset.ids(Split::Train).len(),
            dataset.ids(Split::Test).len(),
            dataset.num_classes(),
            dataset.input_dim(),
            out.display()
        );
    }
    Ok(())
}

/// Trains a model and writes the checkpoint and epoch log into the output
/// directory. On divergence the offending batch lands there too.
pub fn train(config_path: &Path, overrides: &Overrides) -> CliResult<()> {
    let (config, config_dir) = load(config_path, overrides)?;
    let out = config.resolve_out_dir(overrides.out.as_deref(), &config_dir)?;
    let dataset = config.dataset()?.realize(config.derived_seeds().dataset, &config_dir)?;
    let net = config.net_config(&dataset);
    let train_config = config.train_config(&dataset)?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;

    match trainer::train(&dataset, &net, &train_config, &StdClock::new()) {
        Ok(output) => {
            checkpoint::write(&out.join(checkpoint::CHECKPOINT_FILE), &net, &output.params)?;
            runlog::write_logs(&out.join(runlog::EPOCHS_FILE), &output.logs)?;
            if !overrides.quiet {
                match output.logs.last() {
                    Some(last) => println!(
                        "seed {} | {} epochs in {:.1}s | combined loss {:.6} | train accuracy {:.4} -> {}",
                        config.seed,
                        last.epoch,
                        output.logs.iter().map(|l| l.seconds).sum::<f64>(),
                        last.combined_loss,
                        last.train_accuracy,
                        out.display()
                    ),
                    None => println!(
                        "seed {} | 0 epochs | checkpointed the initialization -> {}",
                        config.seed,
                        out.display()
                    ),
                }
            }
            Ok(())
        }
        Err(strata_core::Error::Diverged(report)) => {
            let path = out.join(runlog::DIVERGED_FILE);
            if let Err(write_err) = runlog::write_divergence(&path, &report) {
                eprintln!("could not record the diverged batch: {}", write_err);
            } else {
                eprintln!("diverged batch written to {}", path.display());
            }
            Err(CliError::Diverged(report))
        }
        Err(other) => Err(other.into()),
    }
}

/// Scores retrieval precision and classification accuracy for a
/// checkpoint, writing JSON and CSV reports into the output directory.
pub fn eval(config_path: &Path, overrides: &Overrides) -> CliResult<()> {
    let (config, config_dir) = load(config_path, overrides)?;
    let out = config.resolve_out_dir(overrides.out.as_deref(), &config_dir)?;
    let dataset = config.dataset()?.realize(config.derived_seeds().dataset, &config_dir)?;
    let (net, params) = checkpoint::read(&config.checkpoint_path(&config_dir)?)?;
    if net.input_dim != dataset.input_dim() || net.num_classes != dataset.num_classes() {
        return Err(CliError::validation(format!(
            "checkpoint architecture ({} inputs, {} classes) does not match the dataset ({} inputs, {} classes)",
            net.input_dim,
            net.num_classes,
            dataset.input_dim(),
            dataset.num_classes()
        )));
    }
    let predicates = config.predicates(&dataset)?;
    let result = retrieval_report(
        &params,
        &dataset,
        config.query_split(),
        config.gallery(),
        &predicates,
        config.k_max(),
    )?;
    report::write_report(&out, &result)?;
    if !overrides.quiet {
        let mut summary = format!("accuracy {:.4}", result.classification_accuracy);
        for curve in &result.curves {
            summary.push_str(&format!(
                " | {} p@{} {:.4}",
                curve.predicate.label(),
                result.k_max,
                curve.values[result.k_max - 1]
            ));
        }
        println!("{} -> {}", summary, out.display());
    }
    Ok(())
}

/// Runs the finite-difference gradient check and prints one line per loss
/// component; fails (exit 4) if any component exceeds the tolerance.
pub fn gradcheck(config_path: &Path, overrides: &Overrides, corrupt: bool) -> CliResult<()> {
    let (config, _) = load(config_path, overrides)?;
    let check = config.gradcheck_config();
    let reports = check_components(&check, corrupt)?;
    let mut failing = Vec::new();
    for component in &reports {
        if !overrides.quiet {
            println!(
                "{}: max relative error {:.3e} (worst tensor {}, {} seeds used, {} skipped)",
                component.component,
                component.max_rel_error,
                component.worst_tensor,
                component.seeds_used,
                component.seeds_skipped
            );
        }
        if !component.within(check.tolerance) {
            failing.push(component.component.clone());
        }
    }
    if failing.is_empty() {
        if !overrides.quiet {
            println!(
                "gradient check passed: {} components within {:.0e}",
                reports.len(),
                check.tolerance
            );
        }
        Ok(())
    } else {
        Err(CliError::GradCheck(format!(
            "gradient check failed for {}",
            failing.join(", ")
        )))
    }
}

/// Projects every sample's embedding onto its top two principal
/// components and writes `pca.csv` into the output directory.
pub fn export_pca(config_path: &Path, overrides: &Overrides) -> CliResult<()> {
    let (config, config_dir) = load(config_path, overrides)?;
    let out = config.resolve_out_dir(overrides.out.as_deref(), &config_dir)?;
    let dataset = config.dataset()?.realize(config.derived_seeds().dataset, &config_dir)?;
    let (net, params) = checkpoint::read(&config.checkpoint_path(&config_dir)?)?;
    if net.input_dim != dataset.input_dim() {
        return Err(CliError::validation(format!(
            "checkpoint expects {} inputs but the dataset has {}",
            net.input_dim,
            dataset.input_dim()
        )));
    }
    let embeddings: Vec<Vec<f64>> = dataset
        .samples()
        .iter()
        .map(|sample| Ok(forward(&params, &sample.features)?.embedding))
        .collect::<CliResult<_>>()?;
    let coords = pca_export(&embeddings)?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let path = out.join(report::PCA_FILE);
    report::write_pca(&path, &dataset, &coords)?;
    if !overrides.quiet {
        println!("wrote {} projections -> {}", coords.len(), path.display());
    }
    Ok(())
}
