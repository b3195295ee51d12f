//! Tuplet construction for the ranking loss: a reference, one positive
//! from its fine class, and one negative per hierarchy band, ordered
//! innermost to outermost. Bands with no eligible sample fold their
//! margin into the next band outward. Negatives are drawn uniformly or
//! mined semi-hard from a candidate pool using current embeddings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::labelspace::MarginSchedule;
use crate::net::squared_distance;

/// How negatives are chosen within a band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Uniform draw over the band.
    Uniform,
    /// Semi-hard mining: prefer the closest negative farther than the
    /// previous member; fall back to the farthest violator.
    SemiHard,
}

/// Which label structure drives band assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureMode {
    /// Ignore the hierarchy: one band holding every other fine class.
    Flat,
    /// One band per hierarchy level, by exact shared prefix depth.
    Hierarchy,
    /// One band of all other classes; margins scale with attribute
    /// overlap between the reference and the chosen negative.
    Attributes,
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Negative selection strategy.
    pub mode: SamplerMode,
    /// Candidates examined per mining decision.
    pub candidate_pool: usize,
    /// Seed for the sampler's private random stream.
    pub seed: u64,
    /// Band structure.
    pub structure: StructureMode,
}

impl SamplerConfig {
    /// Checks that the candidate pool is non-empty.
    pub fn validate(&self) -> Result<()> {
        if self.candidate_pool == 0 {
            return Err(Error::validation("candidate_pool must be at least 1"));
        }
        Ok(())
    }
}

/// One training tuplet: sample ids plus the margin for each hinge.
#[derive(Debug, Clone, PartialEq)]
pub struct TupletIndices {
    /// The anchor sample.
    pub reference: usize,
    /// Companion ids ordered innermost (same fine class) to outermost.
    pub companions: Vec<usize>,
    /// Margin for each adjacent hinge; `margins.len() == companions.len() - 1`.
    pub margins: Vec<f64>,
}

/// Draws tuplets against a fixed dataset. All randomness flows through
/// one seeded stream, so a sampler replays identically for a given
/// dataset, schedule, and configuration.
pub struct TupletSampler<'a> {
    dataset: &'a Dataset,
    schedule: MarginSchedule,
    config: SamplerConfig,
    rng: ChaCha20Rng,
    levels: usize,
    bands: Vec<Vec<Vec<usize>>>,
}

impl<'a> TupletSampler<'a> {
    /// Precomputes per-class negative bands. The schedule must span the
    /// dataset's hierarchy depth in `Hierarchy` mode and exactly one level
    /// otherwise; `Attributes` mode requires a dataset with attributes.
    pub fn new(dataset: &'a Dataset, schedule: MarginSchedule, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let levels = match config.structure {
            StructureMode::Hierarchy => {
                if schedule.num_levels() != dataset.num_levels() {
                    return Err(Error::validation(format!(
                        "schedule spans {} levels but the hierarchy has {}",
                        schedule.num_levels(),
                        dataset.num_levels()
                    )));
                }
                dataset.num_levels()
            }
            StructureMode::Flat | StructureMode::Attributes => {
                if schedule.num_levels() != 1 {
                    return Err(Error::validation(format!(
                        "{:?} sampling uses a single-level schedule, got {} levels",
                        config.structure,
                        schedule.num_levels()
                    )));
                }
                if config.structure == StructureMode::Attributes && dataset.attributes().is_none() {
                    return Err(Error::validation(
                        "attribute-adaptive sampling requires a dataset with attributes",
                    ));
                }
                1
            }
        };
        let num_classes = dataset.num_classes();
        let mut bands = vec![vec![Vec::new(); levels]; num_classes];
        for class in 0..num_classes {
            for other in 0..num_classes {
                if other == class {
                    continue;
                }
                let slot = match config.structure {
                    StructureMode::Hierarchy => {
                        levels - dataset.hierarchy().shared_depth(class, other)?
                    }
                    _ => 1,
                };
                bands[class][slot - 1].extend_from_slice(dataset.class_train_ids(other)?);
            }
        }
        let rng = ChaCha20Rng::seed_from_u64(config.seed);
        Ok(TupletSampler { dataset, schedule, config, rng, levels, bands })
    }

    /// The configured margin schedule.
    pub fn schedule(&self) -> &MarginSchedule {
        &self.schedule
    }

    /// The sampler configuration.
    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Number of negative bands per reference class.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Train ids in a class's band for `slot` (1 = innermost). Bands are
    /// keyed by exact shared depth `levels - slot` in hierarchy mode.
    pub fn band(&self, class: usize, slot: usize) -> Result<&[usize]> {
        let class_bands = self
            .bands
            .get(class)
            .ok_or_else(|| Error::invalid(format!("class {} out of range", class)))?;
        if slot == 0 || slot > class_bands.len() {
            return Err(Error::invalid(format!("band slot {} out of range", slot)));
        }
        Ok(&class_bands[slot - 1])
    }

    /// A fresh shuffle of all train ids; one epoch visits each exactly once.
    pub fn epoch_plan(&mut self) -> Vec<usize> {
        let mut plan = self.dataset.ids(Split::Train).to_vec();
        plan.shuffle(&mut self.rng);
        plan
    }

    /// Builds a tuplet for `reference`. Returns `None` when the reference
    /// has no same-class companion or every band is empty. `embeddings`
    /// (indexed by sample id) are required in semi-hard mode and ignored
    /// otherwise.
    pub fn sample_tuplet(
        &mut self,
        reference: usize,
        embeddings: Option<&[Vec<f64>]>,
    ) -> Result<Option<TupletIndices>> {
        let sample = self.dataset.sample(reference)?;
        if sample.split != Split::Train {
            return Err(Error::invalid(format!(
                "reference {} is not a train sample",
                reference
            )));
        }
        let class = sample.fine;
        let positives = self.dataset.class_train_ids(class)?;
        if positives.len() < 2 {
            return Ok(None);
        }
        let own = positives
            .iter()
            .position(|&id| id == reference)
            .ok_or_else(|| Error::invalid("reference missing from its class index"))?;
        let draw = self.rng.random_range(0..positives.len() - 1);
        let positive = positives[if draw >= own { draw + 1 } else { draw }];

        let semi = self.config.mode == SamplerMode::SemiHard;
        if semi {
            let emb = embeddings
                .ok_or_else(|| Error::invalid("semi-hard mining requires embeddings"))?;
            if emb.len() != self.dataset.len() {
                return Err(Error::invalid(format!(
                    "embedding table holds {} rows for {} samples",
                    emb.len(),
                    self.dataset.len()
                )));
            }
        }
        let mut d_prev = if semi {
            let emb = embeddings.unwrap();
            Some(squared_distance(&emb[reference], &emb[positive])?)
        } else {
            None
        };

        let mut companions = vec![positive];
        let mut margins = Vec::new();
        let tm = self.schedule.triplet_margins();
        let mut pending = 0.0;
        for slot in 1..=self.levels {
            if self.bands[class][slot - 1].is_empty() {
                pending += tm[slot - 1];
                continue;
            }
            let folded = pending + tm[slot - 1];
            pending = 0.0;
            let mining_margin = match self.config.structure {
                StructureMode::Attributes => self.schedule.base_margin(),
                _ => folded,
            };
            let chosen = Self::mine_from(
                &mut self.rng,
                self.config.mode,
                self.config.candidate_pool,
                embeddings,
                reference,
                &self.bands[class][slot - 1],
                d_prev.unwrap_or(0.0),
                mining_margin,
            )?;
            let margin = match self.config.structure {
                StructureMode::Attributes => {
                    let table = self.dataset.attributes().ok_or_else(|| {
                        Error::invalid("attribute margins need an attribute table")
                    })?;
                    table.jaccard_margin(
                        class,
                        self.dataset.sample(chosen)?.fine,
                        self.schedule.base_margin(),
                    )?
                }
                _ => folded,
            };
            companions.push(chosen);
            margins.push(margin);
            if semi {
                let emb = embeddings.unwrap();
                d_prev = Some(squared_distance(&emb[reference], &emb[chosen])?);
            }
        }
        if companions.len() < 2 {
            return Ok(None);
        }
        Ok(Some(TupletIndices { reference, companions, margins }))
    }

    /// Picks one negative from `band`. Uniform mode draws uniformly. In
    /// semi-hard mode, up to `candidate_pool` candidates are sampled
    /// without replacement; among them the closest with distance strictly
    /// above `d_ref_pos` wins, else the farthest violator within
    /// `d_ref_pos + margin`. Ties keep the earliest candidate.
    pub fn mine_negative(
        &mut self,
        embeddings: Option<&[Vec<f64>]>,
        reference: usize,
        band: &[usize],
        d_ref_pos: f64,
        margin: f64,
    ) -> Result<usize> {
        Self::mine_from(
            &mut self.rng,
            self.config.mode,
            self.config.candidate_pool,
            embeddings,
            reference,
            band,
            d_ref_pos,
            margin,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn mine_from(
        rng: &mut ChaCha20Rng,
        mode: SamplerMode,
        pool: usize,
        embeddings: Option<&[Vec<f64>]>,
        reference: usize,
        band: &[usize],
        d_ref_pos: f64,
        margin: f64,
    ) -> Result<usize> {
        if band.is_empty() {
            return Err(Error::invalid("cannot mine from an empty band"));
        }
        match mode {
            SamplerMode::Uniform => Ok(band[rng.random_range(0..band.len())]),
            SamplerMode::SemiHard => {
                let emb = embeddings
                    .ok_or_else(|| Error::invalid("semi-hard mining requires embeddings"))?;
                let candidates: Vec<usize> = if band.len() <= pool {
                    band.to_vec()
                } else {
                    rand::seq::index::sample(rng, band.len(), pool)
                        .iter()
                        .map(|i| band[i])
                        .collect()
                };
                let reference_emb = emb
                    .get(reference)
                    .ok_or_else(|| Error::invalid("reference id outside embedding table"))?;
                let mut best_above: Option<(f64, usize)> = None;
                let mut best_violator: Option<(f64, usize)> = None;
                for &candidate in &candidates {
                    let row = emb
                        .get(candidate)
                        .ok_or_else(|| Error::invalid("candidate id outside embedding table"))?;
                    let d = squared_distance(reference_emb, row)?;
                    if d > d_ref_pos {
                        if best_above.map_or(true, |(best, _)| d < best) {
                            best_above = Some((d, candidate));
                        }
                    } else if d <= d_ref_pos + margin
                        && best_violator.map_or(true, |(best, _)| d > best)
                    {
                        best_violator = Some((d, candidate));
                    }
                }
                Ok(best_above
                    .or(best_violator)
                    .map(|(_, id)| id)
                    .unwrap_or(candidates[0]))
            }
        }
    }
}
