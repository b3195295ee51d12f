//! Acceptance suite: the nine checks this toolkit is built against, from
//! exact loss identities up to directional training experiments on the
//! default synthetic datasets. Each test prints one
//! `criterion N PASS/FAIL: ...` line (visible with `--nocapture`) and then
//! asserts it. The thresholds are the contract, frozen here on purpose;
//! they are not tuning knobs.
//!
//! Training runs are cached and shared across criteria, so the whole
//! suite performs each (structure, lambda, margin, seed) run exactly once.

use std::collections::HashMap;
use std::fs;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use strata::checkpoint;
use strata_core::datagen::{
    generate_attributes, generate_hierarchy, AttrGenConfig, HierGenConfig,
};
use strata_core::dataset::{Dataset, Split};
use strata_core::eval::{
    argmax, extract_embeddings, precision_at_k, retrieval_report, GalleryMode,
    RelevancePredicate,
};
use strata_core::eval::RetrievalReport;
use strata_core::gradcheck::{check_components, GradCheckConfig};
use strata_core::labelspace::{AttributeTable, Hierarchy, MarginSchedule};
use strata_core::losses::{
    adaptive_triplet, quadruplet_loss, softmax_nll, triplet_hinge, tuplet_loss,
};
use strata_core::net::{NetConfig, Parameters};
use strata_core::sampling::{SamplerConfig, SamplerMode, StructureMode};
use strata_core::trainer::{self, EpochLog, NoClock, TrainConfig};
use tempfile::TempDir;

/// Seeds averaged in every training comparison.
const SEEDS: [u64; 3] = [1, 2, 3];
/// Wall-clock ceiling for a single training run.
const RUN_BUDGET_SECONDS: f64 = 300.0;

fn verdict(criterion: usize, pass: bool, detail: &str) {
    println!("criterion {} {}: {}", criterion, if pass { "PASS" } else { "FAIL" }, detail);
    assert!(pass, "criterion {} failed: {}", criterion, detail);
}

// ---------------------------------------------------------------------------
// Shared training protocol.

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Hierarchy,
    Attributes,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct RunKey {
    kind: Kind,
    structure: u8,
    lambda_bits: u64,
    margin_bits: u64,
    seed: u64,
}

struct RunResult {
    params: Parameters,
    logs: Vec<EpochLog>,
    report: RetrievalReport,
    train_seconds: f64,
}

static HIER: OnceLock<Dataset> = OnceLock::new();
static ATTR: OnceLock<Dataset> = OnceLock::new();
static RUNS: OnceLock<Mutex<HashMap<RunKey, Arc<RunResult>>>> = OnceLock::new();

fn hier_dataset() -> &'static Dataset {
    HIER.get_or_init(|| generate_hierarchy(&HierGenConfig::default()).unwrap())
}

fn attr_dataset() -> &'static Dataset {
    ATTR.get_or_init(|| generate_attributes(&AttrGenConfig::default()).unwrap())
}

fn net_for(dataset: &Dataset) -> NetConfig {
    NetConfig {
        input_dim: dataset.input_dim(),
        hidden_dims: vec![64],
        embed_dim: 16,
        num_classes: dataset.num_classes(),
    }
}

fn structure_tag(structure: StructureMode) -> u8 {
    match structure {
        StructureMode::Flat => 0,
        StructureMode::Hierarchy => 1,
        StructureMode::Attributes => 2,
    }
}

/// One full training-plus-retrieval run under the suite's fixed protocol:
/// the default dataset of the given kind, a 64-unit trunk with a
/// 16-dimensional embedding, house optimizer settings, and precision
/// curves on the test split.
fn execute(
    kind: Kind,
    structure: StructureMode,
    lambda_s: f64,
    base_margin: f64,
    seed: u64,
) -> RunResult {
    let dataset = match kind {
        Kind::Hierarchy => hier_dataset(),
        Kind::Attributes => attr_dataset(),
    };
    let levels =
        if structure == StructureMode::Hierarchy { dataset.num_levels() } else { 1 };
    let schedule = MarginSchedule::linear(base_margin, levels).unwrap();
    let sampler = SamplerConfig {
        mode: SamplerMode::Uniform,
        candidate_pool: 10,
        seed: seed + 1000,
        structure,
    };
    let mut config = TrainConfig::new(schedule, sampler);
    config.lambda_s = lambda_s;
    config.seed = seed;

    let start = Instant::now();
    let output = trainer::train(dataset, &net_for(dataset), &config, &NoClock).unwrap();
    let train_seconds = start.elapsed().as_secs_f64();

    let (predicates, k_max) = match kind {
        Kind::Hierarchy => (
            vec![RelevancePredicate::Fine, RelevancePredicate::HierarchyLevel(1)],
            100,
        ),
        Kind::Attributes => (
            vec![RelevancePredicate::Fine, RelevancePredicate::SharesAttribute],
            50,
        ),
    };
    let report = retrieval_report(
        &output.params,
        dataset,
        Split::Test,
        GalleryMode::SameSplit,
        &predicates,
        k_max,
    )
    .unwrap();
    RunResult { params: output.params, logs: output.logs, report, train_seconds }
}

fn trained(
    kind: Kind,
    structure: StructureMode,
    lambda_s: f64,
    base_margin: f64,
    seed: u64,
) -> Arc<RunResult> {
    let key = RunKey {
        kind,
        structure: structure_tag(structure),
        lambda_bits: lambda_s.to_bits(),
        margin_bits: base_margin.to_bits(),
        seed,
    };
    let mut runs = RUNS.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    if let Some(hit) = runs.get(&key) {
        return Arc::clone(hit);
    }
    let result = Arc::new(execute(kind, structure, lambda_s, base_margin, seed));
    runs.insert(key, Arc::clone(&result));
    result
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_precision(runs: &[Arc<RunResult>], label: &str, k: usize) -> f64 {
    mean(runs.iter().map(|run| {
        run.report
            .curves
            .iter()
            .find(|curve| curve.predicate.label() == label)
            .expect("protocol always scores the requested predicate")
            .values[k - 1]
    }))
}

fn mean_accuracy(runs: &[Arc<RunResult>]) -> f64 {
    mean(runs.iter().map(|run| run.report.classification_accuracy))
}

fn slowest(runs: &[&[Arc<RunResult>]]) -> f64 {
    runs.iter()
        .flat_map(|group| group.iter())
        .map(|run| run.train_seconds)
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients against central finite differences.

#[test]
fn criterion_1_gradients_match_finite_differences() {
    let start = Instant::now();
    let config = GradCheckConfig::default();
    let reports = check_components(&config, false).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let pass = reports.len() == 6
        && reports.iter().all(|r| r.within(config.tolerance))
        && reports.iter().all(|r| r.worst_tensor != "none")
        && elapsed < 30.0;
    verdict(
        1,
        pass,
        &format!(
            "{} components over {} seeds, max relative error {:.3e} (tolerance {:.0e}), {:.1}s (budget 30s)",
            reports.len(),
            config.seeds.len(),
            worst,
            config.tolerance,
            elapsed
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. The chained tuplet loss collapses onto its one- and two-level special
// cases bit for bit, and a satisfied two-level tuplet clears the full
// top-level margin.

#[test]
fn criterion_2_tuplet_losses_collapse_to_their_special_cases() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut mismatches = 0usize;

    for _ in 0..10_000 {
        let d_rp = rng.random_range(0.0..4.0);
        let d_rn = rng.random_range(0.0..4.0);
        let m = rng.random_range(1e-6..1.0);
        let schedule = MarginSchedule::new(vec![m], m).unwrap();
        let chain = tuplet_loss(&[d_rp, d_rn], &schedule).unwrap();
        let hinge = triplet_hinge(d_rp, d_rn, m).unwrap();
        if chain.value.to_bits() != hinge.value.to_bits()
            || chain.grad_distances[0].to_bits() != hinge.grad_d_rp.to_bits()
            || chain.grad_distances[1].to_bits() != hinge.grad_d_rn.to_bits()
        {
            mismatches += 1;
        }
    }

    for _ in 0..10_000 {
        let d1 = rng.random_range(0.0..4.0);
        let d2 = rng.random_range(0.0..4.0);
        let d3 = rng.random_range(0.0..4.0);
        let m2 = rng.random_range(1e-6..1.0);
        let m1 = m2 + rng.random_range(1e-6..1.0);
        let schedule = MarginSchedule::new(vec![m1, m2], m2).unwrap();
        let chain = tuplet_loss(&[d1, d2, d3], &schedule).unwrap();
        let quad = quadruplet_loss(d1, d2, d3, m1, m2).unwrap();
        if chain.value.to_bits() != quad.value.to_bits()
            || chain.grad_distances[0].to_bits() != quad.grad_d_rp_plus.to_bits()
            || chain.grad_distances[1].to_bits() != quad.grad_d_rp_minus.to_bits()
            || chain.grad_distances[2].to_bits() != quad.grad_d_rn.to_bits()
        {
            mismatches += 1;
        }
    }

    // Construct quadruplets that satisfy both hinges and confirm the two
    // slacks telescope: the negative clears the strong positive by the
    // full top-level margin.
    let mut worst_slack = f64::INFINITY;
    let mut checked = 0usize;
    let mut attempts = 0usize;
    while checked < 10_000 {
        attempts += 1;
        assert!(attempts < 200_000, "satisfied quadruplets should be easy to construct");
        let m2 = rng.random_range(1e-3..1.0);
        let m1 = m2 + rng.random_range(1e-3..1.0);
        let d1 = rng.random_range(0.0..4.0);
        let d2 = d1 + (m1 - m2) + rng.random_range(0.0..2.0);
        let d3 = d2 + m2 + rng.random_range(0.0..2.0);
        if quadruplet_loss(d1, d2, d3, m1, m2).unwrap().value != 0.0 {
            continue;
        }
        checked += 1;
        worst_slack = worst_slack.min(d3 - (d1 + m1));
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && worst_slack >= -1e-12 && elapsed < 10.0;
    verdict(
        2,
        pass,
        &format!(
            "{} bitwise mismatches over 2x10^4 identity draws; worst implication slack {:.1e} over 10^4 satisfied quadruplets (floor -1e-12); {:.2}s (budget 10s)",
            mismatches, worst_slack, elapsed
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. With one distinct attribute per class the overlap-scaled margin is
// exactly the base margin, so the adaptive loss reduces to the fixed one.

#[test]
fn criterion_3_disjoint_attributes_recover_the_fixed_margin() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut mismatches = 0usize;
    for _ in 0..1_000 {
        let classes = rng.random_range(2usize..=6);
        let table = AttributeTable::new(
            (0..classes).map(|c| vec![c as u32]).collect(),
            classes,
        )
        .unwrap();
        let d_rp = rng.random_range(0.0..4.0);
        let d_rn = rng.random_range(0.0..4.0);
        let m_b = rng.random_range(1e-6..1.0);
        let class_p = rng.random_range(0..classes);
        let class_n = loop {
            let c = rng.random_range(0..classes);
            if c != class_p {
                break c;
            }
        };
        let adaptive = adaptive_triplet(d_rp, d_rn, &table, class_p, class_n, m_b).unwrap();
        let fixed = triplet_hinge(d_rp, d_rn, m_b).unwrap();
        if adaptive.value.to_bits() != fixed.value.to_bits()
            || adaptive.grad_d_rp.to_bits() != fixed.grad_d_rp.to_bits()
            || adaptive.grad_d_rn.to_bits() != fixed.grad_d_rn.to_bits()
        {
            mismatches += 1;
        }
    }
    verdict(
        3,
        mismatches == 0,
        &format!("{} bitwise mismatches over 10^3 singleton-attribute cases", mismatches),
    );
}

// ---------------------------------------------------------------------------
// 4. The precision curve equals an independent brute-force scorer exactly
// on small instances, for every relevance rule.

fn brute_force_curve(
    embeddings: &[Vec<f64>],
    classes: &[usize],
    hierarchy: &Hierarchy,
    attributes: &AttributeTable,
    predicate: &RelevancePredicate,
    k_max: usize,
) -> Vec<f64> {
    let n = embeddings.len();
    let relevant = |cq: usize, cc: usize| -> bool {
        match predicate {
            RelevancePredicate::Fine => cq == cc,
            RelevancePredicate::HierarchyLevel(level) => {
                hierarchy.shared_depth(cq, cc).unwrap() >= *level
            }
            RelevancePredicate::SharesAttribute => attributes.shares_any(cq, cc).unwrap(),
        }
    };
    let sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let mut curve = vec![0.0; k_max];
    for q in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&i| i != q).collect();
        order.sort_by(|&a, &b| {
            sq(&embeddings[q], &embeddings[a])
                .total_cmp(&sq(&embeddings[q], &embeddings[b]))
                .then(a.cmp(&b))
        });
        let mut hits = 0usize;
        for (rank, &i) in order.iter().take(k_max).enumerate() {
            if relevant(classes[q], classes[i]) {
                hits += 1;
            }
            curve[rank] += hits as f64 / (rank + 1) as f64;
        }
    }
    for v in &mut curve {
        *v /= n as f64;
    }
    curve
}

/// Random point on the unit sphere, matching the scorer's contract that
/// embeddings are unit vectors.
fn random_unit(rng: &mut ChaCha20Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

#[test]
fn criterion_4_precision_curves_match_brute_force() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let hierarchy =
        Hierarchy::new(vec![vec![0, 0], vec![0, 1], vec![1, 2], vec![1, 3]]).unwrap();
    let attributes =
        AttributeTable::new(vec![vec![0, 1], vec![1, 2], vec![3], vec![0, 3]], 4).unwrap();
    let mut mismatches = 0usize;
    for _ in 0..200 {
        let n = rng.random_range(2usize..=8);
        let embeddings: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, 3)).collect();
        let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let k_max = rng.random_range(1..n);
        for predicate in [
            RelevancePredicate::Fine,
            RelevancePredicate::HierarchyLevel(1),
            RelevancePredicate::HierarchyLevel(2),
            RelevancePredicate::SharesAttribute,
        ] {
            let curve = precision_at_k(
                &embeddings,
                &classes,
                &hierarchy,
                Some(&attributes),
                &predicate,
                k_max,
            )
            .unwrap();
            let oracle = brute_force_curve(
                &embeddings,
                &classes,
                &hierarchy,
                &attributes,
                &predicate,
                k_max,
            );
            if curve != oracle {
                mismatches += 1;
            }
        }
    }
    verdict(
        4,
        mismatches == 0,
        &format!("{} mismatched curves over 200 instances x 4 predicates", mismatches),
    );
}

// ---------------------------------------------------------------------------
// 5. Structure-aware ranking lifts coarse-level retrieval without giving
// up fine-level retrieval.

#[test]
fn criterion_5_hierarchy_ranking_beats_flat_at_the_coarse_level() {
    let quad: Vec<_> = SEEDS
        .iter()
        .map(|&s| trained(Kind::Hierarchy, StructureMode::Hierarchy, 0.8, 0.2, s))
        .collect();
    let flat: Vec<_> = SEEDS
        .iter()
        .map(|&s| trained(Kind::Hierarchy, StructureMode::Flat, 0.8, 0.2, s))
        .collect();
    let coarse_gap =
        mean_precision(&quad, "level1", 100) - mean_precision(&flat, "level1", 100);
    let fine_delta = mean_precision(&quad, "fine", 40) - mean_precision(&flat, "fine", 40);
    let seconds = slowest(&[&quad, &flat]);
    let pass = coarse_gap >= 0.05
        && fine_delta.abs() <= 0.03
        && seconds < RUN_BUDGET_SECONDS;
    verdict(
        5,
        pass,
        &format!(
            "coarse p@100 gap {:+.3} (need >= +0.050), fine p@40 delta {:+.3} (within 0.030), slowest run {:.1}s (budget {}s)",
            coarse_gap, fine_delta, seconds, RUN_BUDGET_SECONDS
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Joint training beats ranking-only training (scored through a linear
// probe on the frozen embeddings) and stays close to classification-only
// training.

/// Full-batch multinomial regression on frozen train-split embeddings,
/// scored on the test split: 2500 momentum steps from a zero
/// initialization, gradients averaged over the batch.
fn linear_probe_accuracy(params: &Parameters, dataset: &Dataset) -> f64 {
    let train_x = extract_embeddings(params, dataset, Split::Train).unwrap();
    let train_y: Vec<usize> =
        dataset.ids(Split::Train).iter().map(|&id| dataset.samples()[id].fine).collect();
    let test_x = extract_embeddings(params, dataset, Split::Test).unwrap();
    let test_y: Vec<usize> =
        dataset.ids(Split::Test).iter().map(|&id| dataset.samples()[id].fine).collect();

    let classes = dataset.num_classes();
    let dim = train_x[0].len();
    let n = train_x.len() as f64;
    let mut weights = vec![vec![0.0; dim]; classes];
    let mut bias = vec![0.0; classes];
    let mut w_velocity = vec![vec![0.0; dim]; classes];
    let mut b_velocity = vec![0.0; classes];
    let logits = |weights: &[Vec<f64>], bias: &[f64], x: &[f64]| -> Vec<f64> {
        (0..classes)
            .map(|c| weights[c].iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + bias[c])
            .collect()
    };

    for _ in 0..2500 {
        let mut w_grad = vec![vec![0.0; dim]; classes];
        let mut b_grad = vec![0.0; classes];
        for (x, &y) in train_x.iter().zip(&train_y) {
            let loss = softmax_nll(&logits(&weights, &bias, x), y).unwrap();
            for c in 0..classes {
                let g = loss.grad_logits[c] / n;
                for (wg, xi) in w_grad[c].iter_mut().zip(x) {
                    *wg += g * xi;
                }
                b_grad[c] += g;
            }
        }
        for c in 0..classes {
            for i in 0..dim {
                w_velocity[c][i] = 0.9 * w_velocity[c][i] - w_grad[c][i];
                weights[c][i] += w_velocity[c][i];
            }
            b_velocity[c] = 0.9 * b_velocity[c] - b_grad[c];
            bias[c] += b_velocity[c];
        }
    }

    let correct = test_x
        .iter()
        .zip(&test_y)
        .filter(|(x, &y)| argmax(&logits(&weights, &bias, x)) == y)
        .count();
    correct as f64 / test_x.len() as f64
}

#[test]
fn criterion_6_joint_training_beats_a_frozen_probe_and_tracks_softmax() {
    let joint: Vec<_> = SEEDS
        .iter()
        .map(|&s| trained(Kind::Hierarchy, StructureMode::Hierarchy, 0.8, 0.2, s))
        .collect();
    let ranking_only: Vec<_> = SEEDS
        .iter()
        .map(|&s| trained(Kind::Hierarchy, StructureMode::Flat, 0.0, 0.2, s))
        .collect();
    let softmax_only: Vec<_> = SEEDS
        .iter()
        .map(|&s| trained(Kind::Hierarchy, StructureMode::Hierarchy, 1.0, 0.2, s))
        .collect();

    let joint_acc = mean_accuracy(&joint);
    let probe_acc = mean(
        ranking_only.iter().map(|run| linear_probe_accuracy(&run.params, hier_dataset())),
    );
    let softmax_acc = mean_accuracy(&softmax_only);
    let pass =
        joint_acc - probe_acc >= 0.05 && (joint_acc - softmax_acc).abs() <= 0.02;
    verdict(
        6,
        pass,
        &format!(
            "joint accuracy {:.3} vs frozen-embedding probe {:.3} (gap {:+.3}, need >= +0.050); softmax-only {:.3} (delta {:+.3}, within 0.020)",
            joint_acc,
            probe_acc,
            joint_acc - probe_acc,
            softmax_acc,
            joint_acc - softmax_acc
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Overlap-scaled margins beat a fixed margin on shared-attribute
// retrieval without giving up fine-level retrieval.

#[test]
fn criterion_7_adaptive_margins_beat_fixed_margins_on_attribute_overlap() {
    let adaptive: Vec<_> = SEEDS
        .iter()
        .map(|&s| trained(Kind::Attributes, StructureMode::Attributes, 0.5, 0.8, s))
        .collect();
    let fixed: Vec<_> = SEEDS
        .iter()
        .map(|&s| trained(Kind::Attributes, StructureMode::Flat, 0.5, 0.8, s))
        .collect();
    let shares_gap = mean_precision(&adaptive, "shares_attribute", 50)
        - mean_precision(&fixed, "shares_attribute", 50);
    let fine_delta =
        mean_precision(&adaptive, "fine", 50) - mean_precision(&fixed, "fine", 50);
    let seconds = slowest(&[&adaptive, &fixed]);
    let pass = shares_gap >= 0.02
        && fine_delta.abs() <= 0.02
        && seconds < RUN_BUDGET_SECONDS;
    verdict(
        7,
        pass,
        &format!(
            "shares-attribute p@50 gap {:+.3} (need >= +0.020), fine p@50 delta {:+.3} (within 0.020), slowest run {:.1}s (budget {}s)",
            shares_gap, fine_delta, seconds, RUN_BUDGET_SECONDS
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Identical seeds reproduce logs, parameters, and checkpoint files
// bitwise, and training actually converges.

#[test]
fn criterion_8_reruns_are_bitwise_identical_and_the_loss_halves() {
    let cached = trained(Kind::Hierarchy, StructureMode::Hierarchy, 0.8, 0.2, 1);
    // A second run from scratch, bypassing the cache.
    let fresh = execute(Kind::Hierarchy, StructureMode::Hierarchy, 0.8, 0.2, 1);

    let logs_match = cached.logs.len() == fresh.logs.len()
        && cached.logs.iter().zip(&fresh.logs).all(|(a, b)| {
            a.epoch == b.epoch
                && a.combined_loss.to_bits() == b.combined_loss.to_bits()
                && a.softmax_loss.to_bits() == b.softmax_loss.to_bits()
                && a.triplet_loss.to_bits() == b.triplet_loss.to_bits()
                && a.train_accuracy.to_bits() == b.train_accuracy.to_bits()
        });
    let params_match = cached
        .params
        .tensors()
        .iter()
        .zip(fresh.params.tensors())
        .all(|(a, b)| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        });

    let tmp = TempDir::new().unwrap();
    let net = net_for(hier_dataset());
    let path_a = tmp.path().join("a.json");
    let path_b = tmp.path().join("b.json");
    checkpoint::write(&path_a, &net, &cached.params).unwrap();
    checkpoint::write(&path_b, &net, &fresh.params).unwrap();
    let files_match = fs::read(&path_a).unwrap() == fs::read(&path_b).unwrap();

    let first = cached.logs.first().unwrap().combined_loss;
    let last = cached.logs.last().unwrap().combined_loss;
    let converged = last < 0.5 * first;

    let pass = logs_match && params_match && files_match && converged;
    verdict(
        8,
        pass,
        &format!(
            "rerun logs bitwise {}, parameters bitwise {}, checkpoint bytes {}; combined loss {:.4} -> {:.4} (need < half)",
            logs_match, params_match, files_match, first, last
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Test accuracy is flat across the blend-weight range.

#[test]
fn criterion_9_accuracy_is_stable_across_the_blend_range() {
    let lambdas = [0.55, 0.70, 0.85];
    let accuracies: Vec<f64> = lambdas
        .iter()
        .map(|&lambda| {
            let runs: Vec<_> = SEEDS
                .iter()
                .map(|&s| trained(Kind::Hierarchy, StructureMode::Hierarchy, lambda, 0.2, s))
                .collect();
            mean_accuracy(&runs)
        })
        .collect();
    let spread = accuracies.iter().fold(f64::MIN, |a, &b| a.max(b))
        - accuracies.iter().fold(f64::MAX, |a, &b| a.min(b));
    verdict(
        9,
        spread <= 0.03,
        &format!(
            "mean accuracy at lambda {:.2}/{:.2}/{:.2} = {:.3}/{:.3}/{:.3}, spread {:.3} (allow <= 0.030)",
            lambdas[0],
            lambdas[1],
            lambdas[2],
            accuracies[0],
            accuracies[1],
            accuracies[2],
            spread
        ),
    );
}
