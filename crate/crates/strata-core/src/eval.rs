//! Evaluation: precision@k retrieval curves under pluggable relevance
//! predicates, classification accuracy, embedding extraction, and a
//! two-component PCA projection for scatter plots.
//!
//! Retrieval ranks gallery samples by ascending squared embedding
//! distance, breaking ties by ascending sample position, and never counts
//! a query as its own neighbor.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::labelspace::{AttributeTable, Hierarchy};
use crate::linalg::{dot, symmetric_eigen, Matrix};
use crate::net::{forward, squared_distance, Parameters};

/// Index of the largest value; the earliest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// What counts as a relevant retrieval for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelevancePredicate {
    /// Same fine class.
    Fine,
    /// Shared label-path prefix of at least this depth (1-based level;
    /// smaller levels are coarser and strictly easier to satisfy).
    HierarchyLevel(usize),
    /// At least one common attribute (always true for the same class).
    SharesAttribute,
}

impl RelevancePredicate {
    /// Short machine-readable name, used for report columns.
    pub fn label(&self) -> String {
        match self {
            RelevancePredicate::Fine => String::from("fine"),
            RelevancePredicate::HierarchyLevel(level) => format!("level{}", level),
            RelevancePredicate::SharesAttribute => String::from("shares_attribute"),
        }
    }

    fn validate(&self, hierarchy: &Hierarchy, attributes: Option<&AttributeTable>) -> Result<()> {
        match self {
            RelevancePredicate::Fine => Ok(()),
            RelevancePredicate::HierarchyLevel(level) => {
                if *level == 0 || *level > hierarchy.num_levels() {
                    return Err(Error::invalid(format!(
                        "hierarchy level {} outside 1..={}",
                        level,
                        hierarchy.num_levels()
                    )));
                }
                Ok(())
            }
            RelevancePredicate::SharesAttribute => {
                if attributes.is_none() {
                    return Err(Error::invalid(
                        "shares-attribute relevance needs a dataset with attributes",
                    ));
                }
                Ok(())
            }
        }
    }

    fn relevant(
        &self,
        hierarchy: &Hierarchy,
        attributes: Option<&AttributeTable>,
        class_query: usize,
        class_candidate: usize,
    ) -> Result<bool> {
        match self {
            RelevancePredicate::Fine => {
                // Bounds-check through the hierarchy for a uniform error.
                hierarchy.shared_depth(class_query, class_candidate)?;
                Ok(class_query == class_candidate)
            }
            RelevancePredicate::HierarchyLevel(level) => {
                Ok(hierarchy.shared_depth(class_query, class_candidate)? >= *level)
            }
            RelevancePredicate::SharesAttribute => {
                let table = attributes.ok_or_else(|| {
                    Error::invalid("shares-attribute relevance needs attributes")
                })?;
                table.shares_any(class_query, class_candidate)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate_query(
    curve: &mut [f64],
    query: &[f64],
    query_class: usize,
    gallery: &[Vec<f64>],
    gallery_classes: &[usize],
    skip: Option<usize>,
    hierarchy: &Hierarchy,
    attributes: Option<&AttributeTable>,
    predicate: &RelevancePredicate,
) -> Result<()> {
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(gallery.len());
    for (i, candidate) in gallery.iter().enumerate() {
        if skip == Some(i) {
            continue;
        }
        order.push((squared_distance(query, candidate)?, i));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut hits = 0usize;
    for (rank, &(_, i)) in order.iter().take(curve.len()).enumerate() {
        if predicate.relevant(hierarchy, attributes, query_class, gallery_classes[i])? {
            hits += 1;
        }
        curve[rank] += hits as f64 / (rank + 1) as f64;
    }
    Ok(())
}

/// Mean precision@k for `k = 1..=k_max` under self-retrieval: every
/// sample queries the remaining `n - 1`. Requires `1 <= k_max <= n - 1`.
pub fn precision_at_k(
    embeddings: &[Vec<f64>],
    classes: &[usize],
    hierarchy: &Hierarchy,
    attributes: Option<&AttributeTable>,
    predicate: &RelevancePredicate,
    k_max: usize,
) -> Result<Vec<f64>> {
    if embeddings.len() != classes.len() {
        return Err(Error::invalid(format!(
            "{} embeddings for {} class labels",
            embeddings.len(),
            classes.len()
        )));
    }
    if embeddings.len() < 2 {
        return Err(Error::invalid("self-retrieval needs at least two samples"));
    }
    if k_max == 0 || k_max > embeddings.len() - 1 {
        return Err(Error::invalid(format!(
            "k_max must lie in 1..={}, got {}",
            embeddings.len() - 1,
            k_max
        )));
    }
    predicate.validate(hierarchy, attributes)?;
    let mut curve = vec![0.0; k_max];
    for (q, query) in embeddings.iter().enumerate() {
        accumulate_query(
            &mut curve,
            query,
            classes[q],
            embeddings,
            classes,
            Some(q),
            hierarchy,
            attributes,
            predicate,
        )?;
    }
    for v in &mut curve {
        *v /= embeddings.len() as f64;
    }
    Ok(curve)
}

/// Mean precision@k with a separate gallery (queries are not excluded,
/// since they are not gallery members). Requires `1 <= k_max <= gallery`.
#[allow(clippy::too_many_arguments)]
pub fn precision_against_gallery(
    query_embeddings: &[Vec<f64>],
    query_classes: &[usize],
    gallery_embeddings: &[Vec<f64>],
    gallery_classes: &[usize],
    hierarchy: &Hierarchy,
    attributes: Option<&AttributeTable>,
    predicate: &RelevancePredicate,
    k_max: usize,
) -> Result<Vec<f64>> {
    if query_embeddings.len() != query_classes.len()
        || gallery_embeddings.len() != gallery_classes.len()
    {
        return Err(Error::invalid("embedding and class counts disagree"));
    }
    if query_embeddings.is_empty() || gallery_embeddings.is_empty() {
        return Err(Error::invalid("retrieval needs queries and a gallery"));
    }
    if k_max == 0 || k_max > gallery_embeddings.len() {
        return Err(Error::invalid(format!(
            "k_max must lie in 1..={}, got {}",
            gallery_embeddings.len(),
            k_max
        )));
    }
    predicate.validate(hierarchy, attributes)?;
    let mut curve = vec![0.0; k_max];
    for (q, query) in query_embeddings.iter().enumerate() {
        accumulate_query(
            &mut curve,
            query,
            query_classes[q],
            gallery_embeddings,
            gallery_classes,
            None,
            hierarchy,
            attributes,
            predicate,
        )?;
    }
    for v in &mut curve {
        *v /= query_embeddings.len() as f64;
    }
    Ok(curve)
}

/// Fraction of a split classified correctly by logits argmax (earliest
/// class wins ties). The split must be non-empty.
pub fn classification_accuracy(
    params: &Parameters,
    dataset: &Dataset,
    split: Split,
) -> Result<f64> {
    let ids = dataset.ids(split);
    if ids.is_empty() {
        return Err(Error::invalid("cannot score an empty split"));
    }
    let mut correct = 0usize;
    for &id in ids {
        let sample = dataset.sample(id)?;
        let trace = forward(params, &sample.features)?;
        if argmax(&trace.logits) == sample.fine {
            correct += 1;
        }
    }
    Ok(correct as f64 / ids.len() as f64)
}

/// Unit embeddings of a split, ordered by ascending sample id. The split
/// must be non-empty.
pub fn extract_embeddings(
    params: &Parameters,
    dataset: &Dataset,
    split: Split,
) -> Result<Vec<Vec<f64>>> {
    let ids = dataset.ids(split);
    if ids.is_empty() {
        return Err(Error::invalid("cannot embed an empty split"));
    }
    ids.iter()
        .map(|&id| Ok(forward(params, &dataset.sample(id)?.features)?.embedding))
        .collect()
}

/// Which samples retrieval ranks against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalleryMode {
    /// Queries retrieve from their own split (self-retrieval).
    SameSplit,
    /// Queries retrieve from the train split.
    Train,
}

/// One retrieval curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionCurve {
    /// The relevance rule the curve was scored under.
    pub predicate: RelevancePredicate,
    /// `values[k-1]` is mean precision@k.
    pub values: Vec<f64>,
}

/// Retrieval curves plus classification accuracy for one query split.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    /// Largest k scored.
    pub k_max: usize,
    /// One curve per requested predicate, in request order.
    pub curves: Vec<PrecisionCurve>,
    /// Logits-argmax accuracy on the query split.
    pub classification_accuracy: f64,
}

/// Embeds the query split (and the gallery, when it differs), scores every
/// predicate, and reports classification accuracy alongside.
pub fn retrieval_report(
    params: &Parameters,
    dataset: &Dataset,
    query_split: Split,
    gallery: GalleryMode,
    predicates: &[RelevancePredicate],
    k_max: usize,
) -> Result<RetrievalReport> {
    if predicates.is_empty() {
        return Err(Error::invalid("report needs at least one predicate"));
    }
    let query_embeddings = extract_embeddings(params, dataset, query_split)?;
    let query_classes: Vec<usize> = dataset
        .ids(query_split)
        .iter()
        .map(|&id| dataset.samples()[id].fine)
        .collect();
    let hierarchy = dataset.hierarchy();
    let attributes = dataset.attributes();
    let self_retrieval = gallery == GalleryMode::SameSplit || query_split == Split::Train;

    let mut curves = Vec::with_capacity(predicates.len());
    if self_retrieval {
        for predicate in predicates {
            curves.push(PrecisionCurve {
                predicate: *predicate,
                values: precision_at_k(
                    &query_embeddings,
                    &query_classes,
                    hierarchy,
                    attributes,
                    predicate,
                    k_max,
                )?,
            });
        }
    } else {
        let gallery_embeddings = extract_embeddings(params, dataset, Split::Train)?;
        let gallery_classes: Vec<usize> = dataset
            .ids(Split::Train)
            .iter()
            .map(|&id| dataset.samples()[id].fine)
            .collect();
        for predicate in predicates {
            curves.push(PrecisionCurve {
                predicate: *predicate,
                values: precision_against_gallery(
                    &query_embeddings,
                    &query_classes,
                    &gallery_embeddings,
                    &gallery_classes,
                    hierarchy,
                    attributes,
                    predicate,
                    k_max,
                )?,
            });
        }
    }
    Ok(RetrievalReport {
        k_max,
        curves,
        classification_accuracy: classification_accuracy(params, dataset, query_split)?,
    })
}

/// Projects embeddings onto their top two principal components
/// (covariance normalized by `n - 1`; eigenvectors oriented so the
/// largest-magnitude coordinate is positive, earliest on ties). Requires
/// at least two samples and at least two dimensions.
pub fn pca_export(embeddings: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::invalid("pca needs at least two samples"));
    }
    let dim = embeddings[0].len();
    if dim < 2 {
        return Err(Error::invalid("pca needs at least two dimensions"));
    }
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(Error::invalid("pca embeddings must share one dimensionality"));
    }

    let mut mean = vec![0.0; dim];
    for row in embeddings {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    let mut covariance = Matrix::zeros(dim, dim);
    let scale = 1.0 / (n - 1) as f64;
    for row in &centered {
        covariance.add_outer(scale, row, row);
    }
    let (_, vectors) = symmetric_eigen(&covariance)?;

    let mut components = [vec![0.0; dim], vec![0.0; dim]];
    for (j, component) in components.iter_mut().enumerate() {
        for (i, slot) in component.iter_mut().enumerate() {
            *slot = vectors.get(i, j);
        }
        let mut lead = 0;
        for (i, v) in component.iter().enumerate().skip(1) {
            if v.abs() > component[lead].abs() {
                lead = i;
            }
        }
        if component[lead] < 0.0 {
            for v in component.iter_mut() {
                *v = -*v;
            }
        }
    }

    Ok(centered
        .iter()
        .map(|row| [dot(row, &components[0]), dot(row, &components[1])])
        .collect())
}
