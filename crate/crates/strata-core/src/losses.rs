//! The loss family: stabilized softmax negative log-likelihood, hinge
//! losses over squared embedding distances (triplet, quadruplet, and the
//! general chained form), the attribute-adaptive margin variant, and the
//! weighted combination of the classification and ranking terms.
//!
//! Every operation returns its value together with analytic gradients with
//! respect to its direct inputs. Per-sample losses carry no batch
//! prefactors; the trainer divides by batch size when it aggregates.
//! Hinges treat exactly-zero activation as inactive, so gradients vanish
//! whenever the constraint is slack or exactly tight.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::labelspace::AttributeTable;
use crate::net::squared_distance;

/// Softmax cross-entropy value and its gradient with respect to logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLoss {
    /// `-log P(label)`.
    pub value: f64,
    /// `softmax(logits) - one_hot(label)`.
    pub grad_logits: Vec<f64>,
}

/// Hinge value and gradients with respect to the two distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletLoss {
    /// `max(0, d_rp - d_rn + m)`.
    pub value: f64,
    /// 1.0 when the hinge is active, else 0.0.
    pub grad_d_rp: f64,
    /// -1.0 when the hinge is active, else 0.0.
    pub grad_d_rn: f64,
}

/// Two-hinge quadruplet value and distance gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrupletLoss {
    /// Sum of the two hinge terms.
    pub value: f64,
    /// Gradient w.r.t. the reference-to-strong-positive distance.
    pub grad_d_rp_plus: f64,
    /// Gradient w.r.t. the reference-to-weak-positive distance; both
    /// hinges contribute.
    pub grad_d_rp_minus: f64,
    /// Gradient w.r.t. the reference-to-negative distance.
    pub grad_d_rn: f64,
}

/// Chained-hinge value and per-distance gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLoss {
    /// Sum of all hinge terms in the chain.
    pub value: f64,
    /// Gradient w.r.t. each distance, innermost first.
    pub grad_distances: Vec<f64>,
}

/// Triplet hinge value with gradients pushed back to the embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletEmbeddingGrads {
    /// Hinge value at the induced distances.
    pub value: f64,
    /// `2 (y_n - y_p)` when active, zero otherwise.
    pub grad_reference: Vec<f64>,
    /// `-2 (y_r - y_p)` when active, zero otherwise.
    pub grad_positive: Vec<f64>,
    /// `2 (y_r - y_n)` when active, zero otherwise.
    pub grad_negative: Vec<f64>,
}

fn check_distance(name: &str, d: f64) -> Result<()> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!(
            "{} must be a non-negative finite distance, got {}",
            name, d
        )));
    }
    Ok(())
}

fn check_margin(m: f64) -> Result<()> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::invalid(format!(
            "margin must be non-negative and finite, got {}",
            m
        )));
    }
    Ok(())
}

/// One hinge term: value and activity flag. Shared by every ranking loss
/// so that the special cases collapse onto each other bit-for-bit.
#[inline]
fn hinge(d_in: f64, d_out: f64, margin: f64) -> (f64, bool) {
    let activation = d_in - d_out + margin;
    if activation > 0.0 {
        (activation, true)
    } else {
        (0.0, false)
    }
}

/// Negative log-likelihood of `label` under a softmax over `logits`,
/// computed with max-shift stabilization. The gradient is
/// `softmax(logits) - one_hot(label)` and sums to zero across classes.
pub fn softmax_nll(logits: &[f64], label: usize) -> Result<SoftmaxLoss> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax over empty logits"));
    }
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {} out of range for {} classes",
            label,
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("logits contain non-finite values"));
    }
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| if b > a { b } else { a });
    let mut total = 0.0;
    let mut grad_logits: Vec<f64> = logits
        .iter()
        .map(|&l| {
            let e = (l - max).exp();
            total += e;
            e
        })
        .collect();
    for g in &mut grad_logits {
        *g /= total;
    }
    let value = total.ln() - (logits[label] - max);
    grad_logits[label] -= 1.0;
    Ok(SoftmaxLoss { value, grad_logits })
}

/// Hinge over a positive and a negative squared distance:
/// `max(0, d_rp - d_rn + m)`. Gradients are `(1, -1)` when the activation
/// is strictly positive and `(0, 0)` otherwise. A zero margin is accepted
/// so that attribute-adaptive margins (which vanish for identical
/// attribute sets) compose with this op.
pub fn triplet_hinge(d_rp: f64, d_rn: f64, margin: f64) -> Result<TripletLoss> {
    check_distance("d_rp", d_rp)?;
    check_distance("d_rn", d_rn)?;
    check_margin(margin)?;
    let (value, active) = hinge(d_rp, d_rn, margin);
    if active {
        Ok(TripletLoss { value, grad_d_rp: 1.0, grad_d_rn: -1.0 })
    } else {
        Ok(TripletLoss { value, grad_d_rp: 0.0, grad_d_rn: 0.0 })
    }
}

/// Triplet hinge on unit embeddings with gradients w.r.t. the embeddings
/// themselves (chain of the hinge through the squared distances):
/// active gradients are `2(y_n - y_p)`, `-2(y_r - y_p)`, `2(y_r - y_n)`.
pub fn triplet_embedding_grads(
    y_r: &[f64],
    y_p: &[f64],
    y_n: &[f64],
    margin: f64,
) -> Result<TripletEmbeddingGrads> {
    let d_rp = squared_distance(y_r, y_p)?;
    let d_rn = squared_distance(y_r, y_n)?;
    let hinge = triplet_hinge(d_rp, d_rn, margin)?;
    let dim = y_r.len();
    if hinge.value > 0.0 {
        let mut grad_reference = vec![0.0; dim];
        let mut grad_positive = vec![0.0; dim];
        let mut grad_negative = vec![0.0; dim];
        for i in 0..dim {
            grad_reference[i] = 2.0 * (y_n[i] - y_p[i]);
            grad_positive[i] = -2.0 * (y_r[i] - y_p[i]);
            grad_negative[i] = 2.0 * (y_r[i] - y_n[i]);
        }
        Ok(TripletEmbeddingGrads { value: hinge.value, grad_reference, grad_positive, grad_negative })
    } else {
        Ok(TripletEmbeddingGrads {
            value: hinge.value,
            grad_reference: vec![0.0; dim],
            grad_positive: vec![0.0; dim],
            grad_negative: vec![0.0; dim],
        })
    }
}

/// Quadruplet loss over three distances with nested margins `m1 > m2 > 0`:
/// `max(0, d_rp_plus - d_rp_minus + m1 - m2) + max(0, d_rp_minus - d_rn + m2)`.
/// When both hinges are satisfied the two slacks telescope, so the
/// negative clears the strong positive by the full top-level margin:
/// `d_rp_plus + m1 <= d_rn`.
pub fn quadruplet_loss(
    d_rp_plus: f64,
    d_rp_minus: f64,
    d_rn: f64,
    m1: f64,
    m2: f64,
) -> Result<QuadrupletLoss> {
    check_distance("d_rp_plus", d_rp_plus)?;
    check_distance("d_rp_minus", d_rp_minus)?;
    check_distance("d_rn", d_rn)?;
    if !(m2 > 0.0) || !m1.is_finite() || !m2.is_finite() || m1 <= m2 {
        return Err(Error::validation(format!(
            "quadruplet margins must satisfy m1 > m2 > 0, got m1 = {}, m2 = {}",
            m1, m2
        )));
    }
    let (inner, inner_active) = hinge(d_rp_plus, d_rp_minus, m1 - m2);
    let (outer, outer_active) = hinge(d_rp_minus, d_rn, m2);
    let mut grad_d_rp_plus = 0.0;
    let mut grad_d_rp_minus = 0.0;
    let mut grad_d_rn = 0.0;
    if inner_active {
        grad_d_rp_plus += 1.0;
        grad_d_rp_minus += -1.0;
    }
    if outer_active {
        grad_d_rp_minus += 1.0;
        grad_d_rn += -1.0;
    }
    Ok(QuadrupletLoss { value: inner + outer, grad_d_rp_plus, grad_d_rp_minus, grad_d_rn })
}

/// Chain of adjacent hinges over distances ordered innermost to
/// outermost: term `j` is `max(0, d[j-1] - d[j] + margins[j-1])`. This is
/// the workhorse the trainer uses; margins may come from a schedule, from
/// band merging, or from attribute overlap (and may then be zero).
pub fn hinge_chain(distances: &[f64], margins: &[f64]) -> Result<ChainLoss> {
    if distances.len() < 2 {
        return Err(Error::invalid(format!(
            "hinge chain needs at least two distances, got {}",
            distances.len()
        )));
    }
    if margins.len() != distances.len() - 1 {
        return Err(Error::invalid(format!(
            "hinge chain over {} distances needs {} margins, got {}",
            distances.len(),
            distances.len() - 1,
            margins.len()
        )));
    }
    for &d in distances {
        check_distance("distance", d)?;
    }
    for &m in margins {
        check_margin(m)?;
    }
    let mut value = 0.0;
    let mut grad_distances = vec![0.0; distances.len()];
    for j in 1..distances.len() {
        let (v, active) = hinge(distances[j - 1], distances[j], margins[j - 1]);
        value += v;
        if active {
            grad_distances[j - 1] += 1.0;
            grad_distances[j] += -1.0;
        }
    }
    Ok(ChainLoss { value, grad_distances })
}

/// Chained hinge loss of a full tuplet: distances ordered innermost
/// (same fine class) to outermost, margins taken from the schedule's
/// per-triplet differences. One level reduces to `triplet_hinge`, two
/// levels to `quadruplet_loss`.
pub fn tuplet_loss(
    distances: &[f64],
    schedule: &crate::labelspace::MarginSchedule,
) -> Result<ChainLoss> {
    if distances.len() != schedule.num_levels() + 1 {
        return Err(Error::invalid(format!(
            "tuplet over {} levels needs {} distances, got {}",
            schedule.num_levels(),
            schedule.num_levels() + 1,
            distances.len()
        )));
    }
    hinge_chain(distances, &schedule.triplet_margins())
}

/// Triplet hinge whose margin shrinks with attribute overlap:
/// `triplet_hinge(d_rp, d_rn, jaccard_margin(class_p, class_n, m_b))`.
/// Identical attribute sets give a zero margin; disjoint sets give the
/// full base margin.
pub fn adaptive_triplet(
    d_rp: f64,
    d_rn: f64,
    table: &AttributeTable,
    class_p: usize,
    class_n: usize,
    m_b: f64,
) -> Result<TripletLoss> {
    let margin = table.jaccard_margin(class_p, class_n, m_b)?;
    triplet_hinge(d_rp, d_rn, margin)
}

/// Weighted combination of the classification and ranking terms:
/// `lambda_s * e_s + (1 - lambda_s) * e_t`.
pub fn combined_loss(e_s: f64, e_t: f64, lambda_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda_s) {
        return Err(Error::validation(format!(
            "lambda_s must lie in [0, 1], got {}",
            lambda_s
        )));
    }
    if !(e_s >= 0.0) || !(e_t >= 0.0) {
        return Err(Error::invalid(format!(
            "loss terms must be non-negative, got e_s = {}, e_t = {}",
            e_s, e_t
        )));
    }
    Ok(lambda_s * e_s + (1.0 - lambda_s) * e_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelspace::MarginSchedule;
    use crate::linalg::norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn softmax_uniform_logits() {
        let loss = softmax_nll(&[0.7, 0.7, 0.7, 0.7], 2).unwrap();
        assert!((loss.value - 1.386294).abs() < 1e-6);
        for (i, &g) in loss.grad_logits.iter().enumerate() {
            let expect = if i == 2 { 0.25 - 1.0 } else { 0.25 };
            assert!((g - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_confident_and_wrong_cases() {
        let confident = softmax_nll(&[10.0, 0.0, 0.0], 0).unwrap();
        assert!((confident.value - 9.0800e-5).abs() < 1e-8);
        let wrong = softmax_nll(&[1.0, 2.0], 1).unwrap();
        assert!((wrong.value - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn softmax_gradient_lies_on_the_simplex() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for _ in 0..100 {
            let c = rng.random_range(2..7);
            let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-5.0..5.0)).collect();
            let label = rng.random_range(0..c);
            let loss = softmax_nll(&logits, label).unwrap();
            let sum: f64 = loss.grad_logits.iter().sum();
            assert!(sum.abs() < 1e-12);
            assert!(loss.value >= 0.0);
            // Independent probability computation without max-shift.
            let z: f64 = logits.iter().map(|&l| l.exp()).sum();
            for (i, &g) in loss.grad_logits.iter().enumerate() {
                let p = logits[i].exp() / z;
                let expect = if i == label { p - 1.0 } else { p };
                assert!((g - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rejects_bad_inputs() {
        assert!(softmax_nll(&[], 0).is_err());
        assert!(softmax_nll(&[1.0, 2.0], 2).is_err());
        assert!(softmax_nll(&[1.0, f64::INFINITY], 0).is_err());
    }

    #[test]
    fn triplet_hinge_cases() {
        let slack = triplet_hinge(0.3, 0.6, 0.2).unwrap();
        assert_eq!(slack.value, 0.0);
        assert_eq!((slack.grad_d_rp, slack.grad_d_rn), (0.0, 0.0));
        let active = triplet_hinge(0.5, 0.4, 0.2).unwrap();
        assert!((active.value - 0.3).abs() < 1e-15);
        assert_eq!((active.grad_d_rp, active.grad_d_rn), (1.0, -1.0));
        for d in [0.0, 0.37, 2.0] {
            let tied = triplet_hinge(d, d, 0.2).unwrap();
            assert_eq!(tied.value, 0.2);
        }
    }

    #[test]
    fn triplet_hinge_zero_activation_is_inactive() {
        // Quarters cancel exactly in binary, so the activation is a true 0.
        let loss = triplet_hinge(0.25, 0.75, 0.5).unwrap();
        assert_eq!(loss.value, 0.0);
        assert_eq!((loss.grad_d_rp, loss.grad_d_rn), (0.0, 0.0));
    }

    #[test]
    fn triplet_hinge_validates_inputs() {
        assert!(triplet_hinge(-0.1, 0.5, 0.2).is_err());
        assert!(triplet_hinge(0.1, f64::NAN, 0.2).is_err());
        assert!(triplet_hinge(0.1, 0.5, -0.2).is_err());
        // Zero margin is legal (adaptive margins can vanish).
        assert!(triplet_hinge(0.1, 0.5, 0.0).is_ok());
    }

    fn random_unit(rng: &mut ChaCha20Rng, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm(&v);
            if n > 1e-3 {
                return v.iter().map(|x| x / n).collect();
            }
        }
    }

    #[test]
    fn embedding_grads_inactive_are_zero() {
        let y_r = vec![1.0, 0.0, 0.0];
        let y_p = vec![1.0, 0.0, 0.0];
        let y_n = vec![0.0, 1.0, 0.0];
        let g = triplet_embedding_grads(&y_r, &y_p, &y_n, 0.2).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.grad_reference.iter().all(|&v| v == 0.0));
        assert!(g.grad_positive.iter().all(|&v| v == 0.0));
        assert!(g.grad_negative.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_grads_symmetry_when_p_equals_n() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let y_r = random_unit(&mut rng, 4);
        let y_p = random_unit(&mut rng, 4);
        let g = triplet_embedding_grads(&y_r, &y_p, &y_p.clone(), 0.2).unwrap();
        // d_rp = d_rn, so the activation equals the margin: active.
        assert!((g.value - 0.2).abs() < 1e-12);
        assert!(g.grad_reference.iter().all(|&v| v == 0.0));
        for (p, n) in g.grad_positive.iter().zip(&g.grad_negative) {
            assert!((p + n).abs() < 1e-15);
        }
    }

    #[test]
    fn embedding_grads_match_finite_differences() {
        // Differentiate the unconstrained hinge over raw vectors; the op's
        // gradients are exactly those (normalization happens upstream).
        let raw = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
        };
        let objective = |y_r: &[f64], y_p: &[f64], y_n: &[f64], m: f64| -> f64 {
            (raw(y_r, y_p) - raw(y_r, y_n) + m).max(0.0)
        };
        let mut seed = 3;
        let mut checked = 0;
        while checked < 20 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            seed += 1;
            let y_r = random_unit(&mut rng, 5);
            let y_p = random_unit(&mut rng, 5);
            let y_n = random_unit(&mut rng, 5);
            let m = 0.3;
            let act = raw(&y_r, &y_p) - raw(&y_r, &y_n) + m;
            if act.abs() <= 1e-3 {
                continue; // too close to the kink for finite differences
            }
            checked += 1;
            let g = triplet_embedding_grads(&y_r, &y_p, &y_n, m).unwrap();
            let h = 1e-5;
            let vectors = [&y_r, &y_p, &y_n];
            let grads = [&g.grad_reference, &g.grad_positive, &g.grad_negative];
            for (which, grad) in grads.iter().enumerate() {
                for i in 0..5 {
                    let mut plus: Vec<Vec<f64>> = vectors.iter().map(|v| (*v).clone()).collect();
                    let mut minus = plus.clone();
                    plus[which][i] += h;
                    minus[which][i] -= h;
                    let fd = (objective(&plus[0], &plus[1], &plus[2], m)
                        - objective(&minus[0], &minus[1], &minus[2], m))
                        / (2.0 * h);
                    let denom = grad[i].abs().max(fd.abs()).max(1e-6);
                    assert!(
                        ((grad[i] - fd) / denom).abs() <= 1e-6,
                        "component {} of vector {}: analytic {} vs fd {}",
                        i,
                        which,
                        grad[i],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn quadruplet_cases() {
        // The inner activation is zero in exact arithmetic; these decimal
        // literals leave ~1e-17 of rounding noise behind.
        let slack = quadruplet_loss(0.1, 0.3, 0.7, 0.4, 0.2).unwrap();
        assert!(slack.value.abs() < 1e-12);
        let active = quadruplet_loss(0.3, 0.3, 0.3, 0.4, 0.2).unwrap();
        assert!((active.value - 0.4).abs() < 1e-15);
        assert_eq!(active.grad_d_rp_plus, 1.0);
        assert_eq!(active.grad_d_rp_minus, 0.0); // -1 from the inner hinge, +1 from the outer
        assert_eq!(active.grad_d_rn, -1.0);
        let wide = quadruplet_loss(0.0, 1.0, 3.0, 0.4, 0.2).unwrap();
        assert_eq!(wide.value, 0.0);
    }

    #[test]
    fn quadruplet_rejects_bad_margins() {
        assert!(matches!(
            quadruplet_loss(0.1, 0.2, 0.3, 0.2, 0.2),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            quadruplet_loss(0.1, 0.2, 0.3, 0.1, 0.2),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            quadruplet_loss(0.1, 0.2, 0.3, 0.4, 0.0),
            Err(Error::Validation(_))
        ));
        assert!(quadruplet_loss(-0.1, 0.2, 0.3, 0.4, 0.2).is_err());
    }

    #[test]
    fn quadruplet_implication_on_satisfied_instances() {
        // Whenever both hinges are slack the chain telescopes: the
        // reference-negative gap clears the full top-level margin m1.
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let mut seen = 0;
        while seen < 500 {
            let d1 = rng.random_range(0.0..1.0);
            let d2 = rng.random_range(0.0..2.0);
            let d3 = rng.random_range(0.0..4.0);
            let m2 = rng.random_range(0.05..0.3);
            let m1 = m2 + rng.random_range(0.05..0.3);
            let q = quadruplet_loss(d1, d2, d3, m1, m2).unwrap();
            if q.value == 0.0 {
                seen += 1;
                assert!(d1 + m1 <= d3 + 1e-12);
            }
        }
    }

    #[test]
    fn tuplet_three_level_example() {
        let schedule = MarginSchedule::new(vec![0.6, 0.3, 0.1], 0.2).unwrap();
        let loss = tuplet_loss(&[0.1, 0.4, 0.8, 1.3], &schedule).unwrap();
        assert_eq!(loss.value, 0.0);
        assert!(loss.grad_distances.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn tuplet_length_mismatch_is_an_input_error() {
        let schedule = MarginSchedule::new(vec![0.4, 0.2], 0.2).unwrap();
        assert!(matches!(
            tuplet_loss(&[0.1, 0.2], &schedule),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tuplet_with_one_level_is_the_triplet_hinge() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..300 {
            let d_rp = rng.random_range(0.0..4.0);
            let d_rn = rng.random_range(0.0..4.0);
            let m = rng.random_range(0.01..0.5);
            let schedule = MarginSchedule::new(vec![m], m).unwrap();
            let chain = tuplet_loss(&[d_rp, d_rn], &schedule).unwrap();
            let hinge = triplet_hinge(d_rp, d_rn, m).unwrap();
            assert_eq!(chain.value.to_bits(), hinge.value.to_bits());
            assert_eq!(chain.grad_distances[0].to_bits(), hinge.grad_d_rp.to_bits());
            assert_eq!(chain.grad_distances[1].to_bits(), hinge.grad_d_rn.to_bits());
        }
    }

    #[test]
    fn tuplet_with_two_levels_is_the_quadruplet() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..300 {
            let d = [
                rng.random_range(0.0..4.0),
                rng.random_range(0.0..4.0),
                rng.random_range(0.0..4.0),
            ];
            let m2 = rng.random_range(0.01..0.3);
            let m1 = m2 + rng.random_range(0.01..0.3);
            let schedule = MarginSchedule::new(vec![m1, m2], m2).unwrap();
            let chain = tuplet_loss(&d, &schedule).unwrap();
            let quad = quadruplet_loss(d[0], d[1], d[2], m1, m2).unwrap();
            assert_eq!(chain.value.to_bits(), quad.value.to_bits());
            assert_eq!(chain.grad_distances[0].to_bits(), quad.grad_d_rp_plus.to_bits());
            assert_eq!(chain.grad_distances[1].to_bits(), quad.grad_d_rp_minus.to_bits());
            assert_eq!(chain.grad_distances[2].to_bits(), quad.grad_d_rn.to_bits());
        }
    }

    #[test]
    fn hinge_gradients_vanish_exactly_on_slack_constraints() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..300 {
            let d: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..4.0)).collect();
            let m: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.4)).collect();
            let chain = hinge_chain(&d, &m).unwrap();
            for j in 1..d.len() {
                let active = d[j - 1] - d[j] + m[j - 1] > 0.0;
                if !active {
                    // This hinge contributes nothing to either endpoint.
                    let v = (d[j - 1] - d[j] + m[j - 1]).max(0.0);
                    assert_eq!(v, 0.0);
                }
            }
            assert!(chain.value >= 0.0);
        }
    }

    #[test]
    fn adaptive_triplet_frozen_example() {
        let table = AttributeTable::new(vec![vec![1, 2, 3], vec![1, 2, 4]], 5).unwrap();
        let loss = adaptive_triplet(0.35, 0.40, &table, 0, 1, 0.2).unwrap();
        assert!((loss.value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn adaptive_triplet_identical_sets_yield_unmargined_hinge() {
        let table = AttributeTable::new(vec![vec![0, 1], vec![0, 1]], 2).unwrap();
        let slack = adaptive_triplet(0.2, 0.3, &table, 0, 1, 0.2).unwrap();
        assert_eq!(slack.value, 0.0);
        let active = adaptive_triplet(0.4, 0.3, &table, 0, 1, 0.2).unwrap();
        assert!((active.value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn adaptive_triplet_disjoint_sets_match_fixed_margin() {
        let table = AttributeTable::new(vec![vec![0], vec![1], vec![2]], 3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..300 {
            let d_rp = rng.random_range(0.0..4.0);
            let d_rn = rng.random_range(0.0..4.0);
            let adaptive = adaptive_triplet(d_rp, d_rn, &table, 0, 2, 0.2).unwrap();
            let fixed = triplet_hinge(d_rp, d_rn, 0.2).unwrap();
            assert_eq!(adaptive.value.to_bits(), fixed.value.to_bits());
            assert_eq!(adaptive.grad_d_rp.to_bits(), fixed.grad_d_rp.to_bits());
            assert_eq!(adaptive.grad_d_rn.to_bits(), fixed.grad_d_rn.to_bits());
        }
    }

    #[test]
    fn combined_loss_cases() {
        assert_eq!(combined_loss(1.3, 0.5, 1.0).unwrap(), 1.3);
        assert_eq!(combined_loss(1.3, 0.5, 0.0).unwrap(), 0.5);
        assert!((combined_loss(1.0, 0.5, 0.8).unwrap() - 0.9).abs() < 1e-15);
        assert!(matches!(combined_loss(1.0, 0.5, 1.1), Err(Error::Validation(_))));
        assert!(matches!(combined_loss(1.0, 0.5, -0.1), Err(Error::Validation(_))));
        assert!(combined_loss(-1.0, 0.5, 0.5).is_err());
    }
}
