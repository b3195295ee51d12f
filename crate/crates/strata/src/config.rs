//! The run configuration: one JSON document that fully determines what a
//! command does.
//!
//! The config file is the source of truth for reproducibility; the only
//! flag overrides are the master seed and the output directory. Unknown
//! keys are rejected everywhere so a typo fails loudly instead of
//! silently falling back to a default. Sections are optional at parse
//! time — each command checks for the ones it needs.
//!
//! Every random stream derives from the single master `seed`: the
//! dataset, initialization/shuffle, and sampler seeds are split off in a
//! fixed order, so a stream's seed never depends on which sections are
//! present. Relative paths inside the config (dataset directory,
//! checkpoint, `out_dir`) resolve against the config file's directory;
//! a `--out` flag resolves against the working directory as typed.

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;
use strata_core::datagen::{generate_attributes, generate_hierarchy, AttrGenConfig, HierGenConfig};
use strata_core::dataset::{Dataset, Split};
use strata_core::eval::{GalleryMode, RelevancePredicate};
use strata_core::gradcheck::GradCheckConfig;
use strata_core::labelspace::MarginSchedule;
use strata_core::net::NetConfig;
use strata_core::sampling::{SamplerConfig, SamplerMode, StructureMode};
use strata_core::trainer::TrainConfig;

use crate::error::{CliError, CliResult};

/// Trunk widths used when the config leaves the architecture unspecified.
pub const DEFAULT_HIDDEN_DIMS: &[usize] = &[64];
/// Embedding dimension used when the config leaves it unspecified.
pub const DEFAULT_EMBED_DIM: usize = 16;
/// Base margin `m_b` used when the config leaves it unspecified.
pub const DEFAULT_BASE_MARGIN: f64 = 0.2;
/// Mining pool size used when the config leaves it unspecified.
pub const DEFAULT_CANDIDATE_POOL: usize = 10;
/// Largest retrieval rank scored when the config leaves it unspecified.
pub const DEFAULT_K_MAX: usize = 40;

/// Parsed run configuration; sections are validated by the command that
/// consumes them.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream in the run derives from it.
    #[serde(default)]
    pub seed: u64,
    out_dir: Option<PathBuf>,
    dataset: Option<DatasetSource>,
    checkpoint: Option<PathBuf>,
    net: Option<NetSection>,
    train: Option<TrainSection>,
    sampler: Option<SamplerSection>,
    eval: Option<EvalSection>,
    gradcheck: Option<GradSection>,
}

/// Per-stream seeds split off the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedSeeds {
    /// Seed for dataset generation.
    pub dataset: u64,
    /// Seed for parameter initialization and epoch shuffles.
    pub train: u64,
    /// Seed for the tuplet sampler's private stream.
    pub sampler: u64,
}

/// Joins `path` onto `base` unless it is already absolute.
pub fn resolve_path(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl RunConfig {
    /// Loads and parses a config file; parse errors carry the offending
    /// line and column.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {}", path.display(), e)))
    }

    /// Splits the master seed into per-stream seeds. All three are always
    /// drawn, in a fixed order, so one stream's seed never shifts when
    /// another section appears or disappears.
    pub fn derived_seeds(&self) -> DerivedSeeds {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        DerivedSeeds {
            dataset: rng.next_u64(),
            train: rng.next_u64(),
            sampler: rng.next_u64(),
        }
    }

    /// The output directory: the `--out` flag as typed when given,
    /// otherwise the config's `out_dir` resolved against the config's
    /// directory.
    pub fn resolve_out_dir(&self, flag: Option<&Path>, config_dir: &Path) -> CliResult<PathBuf> {
        if let Some(dir) = flag {
            return Ok(dir.to_path_buf());
        }
        self.out_dir
            .as_deref()
            .map(|dir| resolve_path(config_dir, dir))
            .ok_or_else(|| {
                CliError::validation("no output directory: set \"out_dir\" in the config or pass --out")
            })
    }

    /// The dataset source, required by every command that touches data.
    pub fn dataset(&self) -> CliResult<&DatasetSource> {
        self.dataset
            .as_ref()
            .ok_or_else(|| CliError::validation("config has no \"dataset\" section"))
    }

    /// The checkpoint path, resolved against the config's directory.
    pub fn checkpoint_path(&self, config_dir: &Path) -> CliResult<PathBuf> {
        self.checkpoint
            .as_deref()
            .map(|p| resolve_path(config_dir, p))
            .ok_or_else(|| CliError::validation("config has no \"checkpoint\" path"))
    }

    /// The architecture, with unset dims taken from the dataset and the
    /// desk-scale defaults.
    pub fn net_config(&self, dataset: &Dataset) -> NetConfig {
        let base = NetConfig {
            input_dim: dataset.input_dim(),
            hidden_dims: DEFAULT_HIDDEN_DIMS.to_vec(),
            embed_dim: DEFAULT_EMBED_DIM,
            num_classes: dataset.num_classes(),
        };
        self.net.clone().unwrap_or_default().resolve(base)
    }

    /// Assembles the training config: the margin schedule spans the
    /// hierarchy in `hierarchy` structure mode and a single level
    /// otherwise, seeds come from [`RunConfig::derived_seeds`], and unset
    /// fields keep the trainer's defaults.
    pub fn train_config(&self, dataset: &Dataset) -> CliResult<TrainConfig> {
        let seeds = self.derived_seeds();
        let train = self.train.clone().unwrap_or_default();
        let sampler = self.sampler.clone().unwrap_or_default();
        let structure = sampler.structure();
        let levels = match structure {
            StructureMode::Hierarchy => dataset.num_levels(),
            StructureMode::Flat | StructureMode::Attributes => 1,
        };
        let base_margin = train.base_margin.unwrap_or(DEFAULT_BASE_MARGIN);
        let schedule = match &train.margins {
            Some(margins) => MarginSchedule::new(margins.clone(), base_margin)?,
            None => MarginSchedule::linear(base_margin, levels)?,
        };
        let sampler_config = SamplerConfig {
            mode: sampler.mode(),
            candidate_pool: sampler.candidate_pool.unwrap_or(DEFAULT_CANDIDATE_POOL),
            seed: seeds.sampler,
            structure,
        };
        let mut config = TrainConfig::new(schedule, sampler_config);
        config.seed = seeds.train;
        if let Some(v) = train.lambda_s {
            config.lambda_s = v;
        }
        if let Some(v) = train.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = train.momentum {
            config.momentum = v;
        }
        if let Some(v) = train.epochs {
            config.epochs = v;
        }
        if let Some(v) = train.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = train.softmax_all_members {
            config.softmax_all_members = v;
        }
        Ok(config)
    }

    /// The gradient-check settings, with unset fields from the library's
    /// standard check.
    pub fn gradcheck_config(&self) -> GradCheckConfig {
        let section = self.gradcheck.clone().unwrap_or_default();
        let mut config = GradCheckConfig::default();
        config.net = section.net.unwrap_or_default().resolve(config.net);
        if let Some(v) = section.seeds {
            config.seeds = v;
        }
        if let Some(v) = section.step {
            config.step = v;
        }
        if let Some(v) = section.tolerance {
            config.tolerance = v;
        }
        if let Some(v) = section.kink_threshold {
            config.kink_threshold = v;
        }
        config
    }

    /// The relevance predicates to score: the config's list when given,
    /// otherwise everything the dataset supports — the fine class, each
    /// coarse hierarchy level, and shared attributes when present.
    pub fn predicates(&self, dataset: &Dataset) -> CliResult<Vec<RelevancePredicate>> {
        let section = self.eval.clone().unwrap_or_default();
        match &section.predicates {
            Some(names) => names.iter().map(|n| parse_predicate(n)).collect(),
            None => {
                let mut predicates = vec![RelevancePredicate::Fine];
                for level in 1..dataset.num_levels() {
                    predicates.push(RelevancePredicate::HierarchyLevel(level));
                }
                if dataset.attributes().is_some() {
                    predicates.push(RelevancePredicate::SharesAttribute);
                }
                Ok(predicates)
            }
        }
    }

    /// Largest retrieval rank to score.
    pub fn k_max(&self) -> usize {
        self.eval.clone().unwrap_or_default().k_max.unwrap_or(DEFAULT_K_MAX)
    }

    /// Which split queries come from.
    pub fn query_split(&self) -> Split {
        match self.eval.clone().unwrap_or_default().query_split.unwrap_or(SplitName::Test) {
            SplitName::Train => Split::Train,
            SplitName::Test => Split::Test,
        }
    }

    /// Which samples queries retrieve from.
    pub fn gallery(&self) -> GalleryMode {
        match self.eval.clone().unwrap_or_default().gallery.unwrap_or(GalleryName::SameSplit) {
            GalleryName::SameSplit => GalleryMode::SameSplit,
            GalleryName::Train => GalleryMode::Train,
        }
    }
}

/// Where a run's samples come from: a generator (seeded off the master
/// seed) or a previously written manifest directory (already frozen, so
/// the seed is ignored).
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Hierarchical Gaussian-mixture generator.
    Hierarchy(HierSection),
    /// Attribute-structured generator.
    Attributes(AttrSection),
    /// Directory holding `meta.json` and `samples.jsonl`.
    Path(PathBuf),
}

impl DatasetSource {
    /// Produces the dataset.
    pub fn realize(&self, seed: u64, config_dir: &Path) -> CliResult<Dataset> {
        match self {
            DatasetSource::Hierarchy(section) => Ok(generate_hierarchy(&section.config(seed))?),
            DatasetSource::Attributes(section) => Ok(generate_attributes(&section.config(seed))?),
            DatasetSource::Path(dir) => crate::manifest::read_dataset(&resolve_path(config_dir, dir)),
        }
    }

    /// Whether this source is a generator rather than files on disk.
    pub fn is_generator(&self) -> bool {
        !matches!(self, DatasetSource::Path(_))
    }
}

/// Hierarchy-generator settings; omitted fields keep the generator's
/// defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierSection {
    branching: Option<Vec<usize>>,
    samples_per_class: Option<usize>,
    input_dim: Option<usize>,
    level_scales: Option<Vec<f64>>,
    noise_sigma: Option<f64>,
    train_fraction: Option<f64>,
}

impl HierSection {
    fn config(&self, seed: u64) -> HierGenConfig {
        let mut config = HierGenConfig::default();
        if let Some(v) = &self.branching {
            config.branching = v.clone();
        }
        if let Some(v) = self.samples_per_class {
            config.samples_per_class = v;
        }
        if let Some(v) = self.input_dim {
            config.input_dim = v;
        }
        if let Some(v) = &self.level_scales {
            config.level_scales = v.clone();
        }
        if let Some(v) = self.noise_sigma {
            config.noise_sigma = v;
        }
        if let Some(v) = self.train_fraction {
            config.train_fraction = v;
        }
        config.seed = seed;
        config
    }
}

/// Attribute-generator settings; omitted fields keep the generator's
/// defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttrSection {
    num_classes: Option<usize>,
    num_attributes: Option<usize>,
    attrs_per_class: Option<usize>,
    samples_per_class: Option<usize>,
    input_dim: Option<usize>,
    prototype_scale: Option<f64>,
    noise_sigma: Option<f64>,
    train_fraction: Option<f64>,
}

impl AttrSection {
    fn config(&self, seed: u64) -> AttrGenConfig {
        let mut config = AttrGenConfig::default();
        if let Some(v) = self.num_classes {
            config.num_classes = v;
        }
        if let Some(v) = self.num_attributes {
            config.num_attributes = v;
        }
        if let Some(v) = self.attrs_per_class {
            config.attrs_per_class = v;
        }
        if let Some(v) = self.samples_per_class {
            config.samples_per_class = v;
        }
        if let Some(v) = self.input_dim {
            config.input_dim = v;
        }
        if let Some(v) = self.prototype_scale {
            config.prototype_scale = v;
        }
        if let Some(v) = self.noise_sigma {
            config.noise_sigma = v;
        }
        if let Some(v) = self.train_fraction {
            config.train_fraction = v;
        }
        config.seed = seed;
        config
    }
}

/// Architecture section; omitted dims fall back to the caller's defaults
/// (dataset dims for training and evaluation, the standard check net for
/// gradcheck).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    input_dim: Option<usize>,
    hidden_dims: Option<Vec<usize>>,
    embed_dim: Option<usize>,
    num_classes: Option<usize>,
}

impl NetSection {
    fn resolve(&self, mut base: NetConfig) -> NetConfig {
        if let Some(v) = self.input_dim {
            base.input_dim = v;
        }
        if let Some(v) = &self.hidden_dims {
            base.hidden_dims = v.clone();
        }
        if let Some(v) = self.embed_dim {
            base.embed_dim = v;
        }
        if let Some(v) = self.num_classes {
            base.num_classes = v;
        }
        base
    }
}

/// Training-loop settings; omitted fields keep the trainer's defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    lambda_s: Option<f64>,
    learning_rate: Option<f64>,
    momentum: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    base_margin: Option<f64>,
    margins: Option<Vec<f64>>,
    softmax_all_members: Option<bool>,
}

/// Tuplet-sampler settings; omitted fields keep uniform selection over
/// hierarchy bands with the default pool.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    mode: Option<ModeName>,
    candidate_pool: Option<usize>,
    structure: Option<StructureName>,
}

impl SamplerSection {
    fn mode(&self) -> SamplerMode {
        match self.mode.unwrap_or(ModeName::Uniform) {
            ModeName::Uniform => SamplerMode::Uniform,
            ModeName::SemiHard => SamplerMode::SemiHard,
        }
    }

    fn structure(&self) -> StructureMode {
        match self.structure.unwrap_or(StructureName::Hierarchy) {
            StructureName::Flat => StructureMode::Flat,
            StructureName::Hierarchy => StructureMode::Hierarchy,
            StructureName::Attributes => StructureMode::Attributes,
        }
    }
}

/// Retrieval-evaluation settings; omitted fields score every predicate
/// the dataset supports at the default rank on the test split.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    predicates: Option<Vec<String>>,
    k_max: Option<usize>,
    query_split: Option<SplitName>,
    gallery: Option<GalleryName>,
}

/// Gradient-check settings; omitted fields keep the standard check.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradSection {
    net: Option<NetSection>,
    seeds: Option<Vec<u64>>,
    step: Option<f64>,
    tolerance: Option<f64>,
    kink_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeName {
    Uniform,
    SemiHard,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StructureName {
    Flat,
    Hierarchy,
    Attributes,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SplitName {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GalleryName {
    SameSplit,
    Train,
}

/// Parses a predicate name: `fine`, `levelN` (1-based), or
/// `shares_attribute`.
pub fn parse_predicate(name: &str) -> CliResult<RelevancePredicate> {
    match name {
        "fine" => return Ok(RelevancePredicate::Fine),
        "shares_attribute" => return Ok(RelevancePredicate::SharesAttribute),
        _ => {}
    }
    if let Some(rest) = name.strip_prefix("level") {
        if let Ok(level) = rest.parse::<usize>() {
            if level >= 1 {
                return Ok(RelevancePredicate::HierarchyLevel(level));
            }
        }
    }
    Err(CliError::validation(format!(
        "unknown predicate {:?}: expected \"fine\", \"levelN\", or \"shares_attribute\"",
        name
    )))
}
