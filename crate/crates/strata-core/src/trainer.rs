//! Mini-batch SGD with momentum over the combined objective
//! `lambda_s * E_s + (1 - lambda_s) * E_t`, where `E_s` averages softmax
//! cross-entropy over the batch's classification terms and `E_t` averages
//! chained-hinge values over `2 * batch_size`.
//!
//! The same batch evaluation serves three callers: the training step
//! (with gradients), finite-difference checking (objective only), and
//! epoch logging. Exact `lambda_s` endpoints skip the unused head's
//! gradient path entirely, so a joint trainer at `lambda_s = 1` follows
//! the bit-exact trajectory of a pure classifier and at `lambda_s = 0`
//! that of a pure metric learner.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::labelspace::MarginSchedule;
use crate::losses::{combined_loss, hinge_chain, softmax_nll};
use crate::net::{backward, forward, squared_distance, ForwardTrace, GradientBuffer, NetConfig, Parameters};
use crate::sampling::{SamplerConfig, TupletIndices, TupletSampler};

/// Wall-clock source for epoch timing. The library itself never reads a
/// clock; hosts inject one (or [`NoClock`] for reproducible logs).
pub trait Clock {
    /// Monotonic seconds since an arbitrary origin.
    fn seconds(&self) -> f64;
}

/// A clock that always reads zero; epoch durations come out as zero.
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Everything that shapes a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the classification term; `1 - lambda_s` weighs ranking.
    pub lambda_s: f64,
    /// SGD learning rate; zero freezes the parameters.
    pub learning_rate: f64,
    /// Momentum coefficient in `[0, 1)`.
    pub momentum: f64,
    /// Number of passes over the train split; zero returns the
    /// initialization untouched.
    pub epochs: usize,
    /// References per mini-batch; the final batch of an epoch may be
    /// smaller.
    pub batch_size: usize,
    /// Margin schedule for the ranking hinges.
    pub schedule: MarginSchedule,
    /// Tuplet sampling settings (with their own seed).
    pub sampler: SamplerConfig,
    /// Seed for parameter initialization.
    pub seed: u64,
    /// When set, companions contribute softmax terms too, and `E_s`
    /// averages over all forwarded members instead of references only.
    pub softmax_all_members: bool,
}

impl TrainConfig {
    /// A config with house defaults (`lambda_s` 0.8, learning rate 0.05,
    /// momentum 0.9, 200 epochs, batches of 20) around the given schedule
    /// and sampler.
    pub fn new(schedule: MarginSchedule, sampler: SamplerConfig) -> Self {
        TrainConfig {
            lambda_s: 0.8,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 200,
            batch_size: 20,
            schedule,
            sampler,
            seed: 0,
            softmax_all_members: false,
        }
    }

    /// Checks ranges: `lambda_s` in `[0, 1]`, a finite non-negative
    /// learning rate, momentum in `[0, 1)`, and a positive batch size.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_s) {
            return Err(Error::validation(format!(
                "lambda_s must lie in [0, 1], got {}",
                self.lambda_s
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::validation(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        self.sampler.validate()
    }
}

/// One reference and the tuplet drawn for it (absent when its class had
/// no companion to offer).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    /// Reference sample id.
    pub reference: usize,
    /// The sampled tuplet, if any.
    pub tuplet: Option<TupletIndices>,
}

/// What the trainer saw when a run blew up: the position in the schedule,
/// the batch-mean loss terms at detection, and the offending batch.
#[derive(Debug, Clone)]
pub struct DivergenceReport {
    /// Epoch (1-based) of the failing step; 0 when raised outside `train`.
    pub epoch: usize,
    /// Step within the epoch (1-based); 0 when raised outside `train`.
    pub step: usize,
    /// Classification term at detection.
    pub softmax_loss: f64,
    /// Ranking term at detection.
    pub triplet_loss: f64,
    /// The batch being evaluated.
    pub batch: Vec<BatchItem>,
    /// What was non-finite.
    pub detail: String,
}

/// Batch-level outcome: mean loss terms and reference accuracy counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Mean softmax term `E_s` over this batch's classification members.
    pub softmax_loss: f64,
    /// Ranking term `E_t`: hinge-chain sum over `2 * batch_size`.
    pub triplet_loss: f64,
    /// `lambda_s * E_s + (1 - lambda_s) * E_t`.
    pub combined_loss: f64,
    /// References whose logits argmax hit their fine class.
    pub correct_references: usize,
    /// Number of references in the batch.
    pub references: usize,
    /// Number of softmax terms `E_s` averaged over.
    pub softmax_terms: usize,
}

/// Momentum buffer plus gradient scratch, shaped for one architecture.
pub struct OptimizerState {
    velocity: GradientBuffer,
    grads: GradientBuffer,
}

impl OptimizerState {
    /// Fresh zeroed state for the architecture.
    pub fn new(config: &NetConfig) -> Self {
        OptimizerState {
            velocity: GradientBuffer::zeros(config),
            grads: GradientBuffer::zeros(config),
        }
    }
}

/// One epoch's summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// Epoch number, 1-based.
    pub epoch: usize,
    /// Epoch mean of the combined objective.
    pub combined_loss: f64,
    /// Epoch mean of the classification term.
    pub softmax_loss: f64,
    /// Epoch mean of the ranking term.
    pub triplet_loss: f64,
    /// Fraction of references classified correctly during the epoch.
    pub train_accuracy: f64,
    /// Wall-clock duration reported by the injected clock.
    pub seconds: f64,
}

/// Trained parameters plus the per-epoch log.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Parameters after the final epoch.
    pub params: Parameters,
    /// One entry per completed epoch.
    pub logs: Vec<EpochLog>,
}

fn output_is_finite(trace: &ForwardTrace) -> bool {
    trace.embed_norm.is_finite()
        && trace.logits.iter().all(|v| v.is_finite())
        && trace.embedding.iter().all(|v| v.is_finite())
}

fn diverged(batch: &[BatchItem], e_s: f64, e_t: f64, detail: String) -> Error {
    Error::Diverged(DivergenceReport {
        epoch: 0,
        step: 0,
        softmax_loss: e_s,
        triplet_loss: e_t,
        batch: batch.to_vec(),
        detail,
    })
}

/// Shared batch walk. With `grads` present, per-parameter gradients of the
/// combined objective accumulate into the buffer; without, only the loss
/// values are computed (the path finite-difference checks rely on).
fn evaluate_batch(
    params: &Parameters,
    batch: &[BatchItem],
    dataset: &Dataset,
    lambda_s: f64,
    softmax_all_members: bool,
    mut grads: Option<&mut GradientBuffer>,
) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty batch"));
    }
    if !(0.0..=1.0).contains(&lambda_s) {
        return Err(Error::validation(format!(
            "lambda_s must lie in [0, 1], got {}",
            lambda_s
        )));
    }
    let softmax_terms: usize = if softmax_all_members {
        batch
            .iter()
            .map(|item| 1 + item.tuplet.as_ref().map_or(0, |t| t.companions.len()))
            .sum()
    } else {
        batch.len()
    };
    let b = batch.len() as f64;
    let scale_s = lambda_s / softmax_terms as f64;
    let scale_t = (1.0 - lambda_s) / (2.0 * b);
    let want_logits = lambda_s > 0.0;
    let want_embed = lambda_s < 1.0;

    let mut e_s_sum = 0.0;
    let mut e_t_sum = 0.0;
    let mut correct = 0;

    for item in batch {
        let sample = dataset.sample(item.reference)?;
        let trace_r = forward(params, &sample.features)?;
        if !output_is_finite(&trace_r) {
            return Err(diverged(
                batch,
                e_s_sum,
                e_t_sum,
                format!("non-finite network output for sample {}", item.reference),
            ));
        }
        let softmax_r = softmax_nll(&trace_r.logits, sample.fine)?;
        e_s_sum += softmax_r.value;
        if argmax(&trace_r.logits) == sample.fine {
            correct += 1;
        }

        let Some(tuplet) = &item.tuplet else {
            if let (Some(buffer), true) = (grads.as_deref_mut(), want_logits) {
                let upstream: Vec<f64> =
                    softmax_r.grad_logits.iter().map(|g| g * scale_s).collect();
                backward(params, &trace_r, Some(&upstream), None, buffer)?;
            }
            continue;
        };

        if tuplet.reference != item.reference {
            return Err(Error::invalid(format!(
                "tuplet anchored at {} attached to reference {}",
                tuplet.reference, item.reference
            )));
        }
        if tuplet.companions.len() < 2 {
            return Err(Error::invalid("a tuplet needs at least two companions"));
        }
        if tuplet.margins.len() != tuplet.companions.len() - 1 {
            return Err(Error::invalid(format!(
                "tuplet with {} companions needs {} margins, got {}",
                tuplet.companions.len(),
                tuplet.companions.len() - 1,
                tuplet.margins.len()
            )));
        }

        let mut traces = Vec::with_capacity(tuplet.companions.len());
        let mut softmaxes = Vec::with_capacity(tuplet.companions.len());
        for &companion in &tuplet.companions {
            let member = dataset.sample(companion)?;
            let trace = forward(params, &member.features)?;
            if !output_is_finite(&trace) {
                return Err(diverged(
                    batch,
                    e_s_sum,
                    e_t_sum,
                    format!("non-finite network output for sample {}", companion),
                ));
            }
            if softmax_all_members {
                let s = softmax_nll(&trace.logits, member.fine)?;
                e_s_sum += s.value;
                softmaxes.push(Some(s));
            } else {
                softmaxes.push(None);
            }
            traces.push(trace);
        }

        let distances: Vec<f64> = traces
            .iter()
            .map(|t| squared_distance(&trace_r.embedding, &t.embedding))
            .collect::<Result<_>>()?;
        let chain = hinge_chain(&distances, &tuplet.margins)?;
        e_t_sum += chain.value;

        if let Some(buffer) = grads.as_deref_mut() {
            let dim = trace_r.embedding.len();
            let d_logits_r: Option<Vec<f64>> = want_logits
                .then(|| softmax_r.grad_logits.iter().map(|g| g * scale_s).collect());
            let d_embed_r: Option<Vec<f64>> = want_embed.then(|| {
                let mut de = vec![0.0; dim];
                for (j, trace) in traces.iter().enumerate() {
                    let g = chain.grad_distances[j];
                    if g == 0.0 {
                        continue;
                    }
                    for i in 0..dim {
                        de[i] += scale_t
                            * g
                            * 2.0
                            * (trace_r.embedding[i] - trace.embedding[i]);
                    }
                }
                de
            });
            backward(
                params,
                &trace_r,
                d_logits_r.as_deref(),
                d_embed_r.as_deref(),
                buffer,
            )?;

            for (j, trace) in traces.iter().enumerate() {
                let g = chain.grad_distances[j];
                let d_logits_c: Option<Vec<f64>> = match &softmaxes[j] {
                    Some(s) if want_logits => {
                        Some(s.grad_logits.iter().map(|v| v * scale_s).collect())
                    }
                    _ => None,
                };
                let d_embed_c: Option<Vec<f64>> = (want_embed && g != 0.0).then(|| {
                    (0..dim)
                        .map(|i| {
                            scale_t * g * -2.0 * (trace_r.embedding[i] - trace.embedding[i])
                        })
                        .collect()
                });
                if d_logits_c.is_some() || d_embed_c.is_some() {
                    backward(
                        params,
                        trace,
                        d_logits_c.as_deref(),
                        d_embed_c.as_deref(),
                        buffer,
                    )?;
                }
            }
        }
    }

    let e_s = e_s_sum / softmax_terms as f64;
    let e_t = e_t_sum / (2.0 * b);
    if !e_s.is_finite() || !e_t.is_finite() {
        return Err(diverged(batch, e_s, e_t, String::from("non-finite loss")));
    }
    if let Some(buffer) = grads.as_deref_mut() {
        if buffer.has_non_finite() {
            return Err(diverged(batch, e_s, e_t, String::from("non-finite gradient")));
        }
    }
    let combined = combined_loss(e_s, e_t, lambda_s)?;
    Ok(StepStats {
        softmax_loss: e_s,
        triplet_loss: e_t,
        combined_loss: combined,
        correct_references: correct,
        references: batch.len(),
        softmax_terms,
    })
}

/// Loss terms of a batch under the current parameters, touching nothing.
pub fn batch_objective(
    params: &Parameters,
    batch: &[BatchItem],
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<StepStats> {
    evaluate_batch(
        params,
        batch,
        dataset,
        config.lambda_s,
        config.softmax_all_members,
        None,
    )
}

/// Accumulates the batch gradient of the combined objective into `grads`
/// (on top of whatever it holds) and returns the loss terms.
pub fn batch_gradient(
    params: &Parameters,
    batch: &[BatchItem],
    dataset: &Dataset,
    config: &TrainConfig,
    grads: &mut GradientBuffer,
) -> Result<StepStats> {
    evaluate_batch(
        params,
        batch,
        dataset,
        config.lambda_s,
        config.softmax_all_members,
        Some(grads),
    )
}

/// One SGD step: gradient, then `v = momentum * v - lr * g; w += v` for
/// every tensor. Divergence (a non-finite output, loss, or gradient)
/// aborts before the parameters are touched.
pub fn train_step(
    params: &mut Parameters,
    state: &mut OptimizerState,
    batch: &[BatchItem],
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<StepStats> {
    state.grads.reset();
    let stats = evaluate_batch(
        params,
        batch,
        dataset,
        config.lambda_s,
        config.softmax_all_members,
        Some(&mut state.grads),
    )?;
    let lr = config.learning_rate;
    let momentum = config.momentum;
    let gradients = state.grads.tensors();
    for ((weights, velocity), grad) in params
        .tensors_mut()
        .into_iter()
        .zip(state.velocity.tensors_mut())
        .zip(gradients)
    {
        for i in 0..weights.len() {
            velocity[i] = momentum * velocity[i] - lr * grad[i];
            weights[i] += velocity[i];
        }
    }
    Ok(stats)
}

fn embedding_table(params: &Parameters, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    let mut table = vec![Vec::new(); dataset.len()];
    for &id in dataset.ids(Split::Train) {
        table[id] = forward(params, &dataset.sample(id)?.features)?.embedding;
    }
    Ok(table)
}

/// Runs the full schedule: seeded initialization, one shuffled pass over
/// the train split per epoch, tuplets drawn per reference (with
/// embeddings refreshed once per epoch in semi-hard mode; the first epoch
/// mines against the initialization), and one log entry per epoch.
pub fn train(
    dataset: &Dataset,
    net: &NetConfig,
    config: &TrainConfig,
    clock: &dyn Clock,
) -> Result<TrainOutput> {
    net.validate()?;
    config.validate()?;
    if net.input_dim != dataset.input_dim() {
        return Err(Error::validation(format!(
            "network expects {} inputs but the dataset has {}",
            net.input_dim,
            dataset.input_dim()
        )));
    }
    if net.num_classes != dataset.num_classes() {
        return Err(Error::validation(format!(
            "network scores {} classes but the dataset has {}",
            net.num_classes,
            dataset.num_classes()
        )));
    }
    if dataset.ids(Split::Train).is_empty() {
        return Err(Error::invalid("cannot train on an empty train split"));
    }

    let mut init_rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut params = Parameters::init(net, &mut init_rng)?;
    let mut state = OptimizerState::new(net);
    let mut sampler =
        TupletSampler::new(dataset, config.schedule.clone(), config.sampler.clone())?;
    let semi_hard =
        config.sampler.mode == crate::sampling::SamplerMode::SemiHard;

    let mut logs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let started = clock.seconds();
        let embeddings = if semi_hard {
            Some(embedding_table(&params, dataset)?)
        } else {
            None
        };
        let plan = sampler.epoch_plan();

        let mut e_s_weighted = 0.0;
        let mut e_t_weighted = 0.0;
        let mut terms_total = 0usize;
        let mut refs_total = 0usize;
        let mut correct_total = 0usize;
        for (index, chunk) in plan.chunks(config.batch_size).enumerate() {
            let mut batch = Vec::with_capacity(chunk.len());
            for &reference in chunk {
                let tuplet = sampler.sample_tuplet(reference, embeddings.as_deref())?;
                batch.push(BatchItem { reference, tuplet });
            }
            match train_step(&mut params, &mut state, &batch, dataset, config) {
                Ok(stats) => {
                    e_s_weighted += stats.softmax_loss * stats.softmax_terms as f64;
                    e_t_weighted += stats.triplet_loss * 2.0 * stats.references as f64;
                    terms_total += stats.softmax_terms;
                    refs_total += stats.references;
                    correct_total += stats.correct_references;
                }
                Err(Error::Diverged(mut report)) => {
                    report.epoch = epoch;
                    report.step = index + 1;
                    return Err(Error::Diverged(report));
                }
                Err(other) => return Err(other),
            }
        }

        let e_s = e_s_weighted / terms_total as f64;
        let e_t = e_t_weighted / (2.0 * refs_total as f64);
        logs.push(EpochLog {
            epoch,
            combined_loss: combined_loss(e_s, e_t, config.lambda_s)?,
            softmax_loss: e_s,
            triplet_loss: e_t,
            train_accuracy: correct_total as f64 / refs_total as f64,
            seconds: clock.seconds() - started,
        });
    }

    Ok(TrainOutput { params, logs })
}
