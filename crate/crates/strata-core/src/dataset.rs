//! In-memory datasets: feature vectors with a fine class, a label path
//! through the hierarchy, and an optional attribute set per class.
//! Construction validates the whole structure once so that downstream
//! code can index without re-checking.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::labelspace::{AttributeTable, Hierarchy};

/// Which partition a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// Samples the trainer may touch.
    Train,
    /// Held-out samples for evaluation.
    Test,
}

/// One labeled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Position of the sample in the dataset; ids are dense and ascending.
    pub id: usize,
    /// Train/test membership.
    pub split: Split,
    /// Feature vector; every sample shares the same dimensionality.
    pub features: Vec<f64>,
    /// Fine class label.
    pub fine: usize,
    /// Node id at each hierarchy level, coarsest first.
    pub path: Vec<u32>,
    /// Attribute ids of the sample's class, ascending; empty when the
    /// dataset carries no attributes.
    pub attrs: Vec<u32>,
}

/// A validated collection of samples plus the label structure they share.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    input_dim: usize,
    hierarchy: Hierarchy,
    attributes: Option<AttributeTable>,
    train_ids: Vec<usize>,
    test_ids: Vec<usize>,
    class_train: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from raw samples, checking that ids are dense,
    /// features are finite and uniformly sized, every class `0..num_classes`
    /// appears with one consistent path and attribute set, the paths form a
    /// tree, and attribute ids fall below `num_attributes` (pass zero for a
    /// dataset without attributes).
    pub fn new(samples: Vec<Sample>, num_classes: usize, num_attributes: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("dataset has no samples"));
        }
        if num_classes == 0 {
            return Err(Error::validation("dataset must declare at least one class"));
        }
        let input_dim = samples[0].features.len();
        if input_dim == 0 {
            return Err(Error::validation("samples must have at least one feature"));
        }
        let mut class_paths: BTreeMap<usize, &[u32]> = BTreeMap::new();
        let mut class_attrs: BTreeMap<usize, &[u32]> = BTreeMap::new();
        for (i, sample) in samples.iter().enumerate() {
            if sample.id != i {
                return Err(Error::validation(format!(
                    "sample at position {} carries id {}; ids must be dense and ascending",
                    i, sample.id
                )));
            }
            if sample.features.len() != input_dim {
                return Err(Error::validation(format!(
                    "sample {} has {} features, expected {}",
                    i,
                    sample.features.len(),
                    input_dim
                )));
            }
            if sample.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "sample {} contains non-finite features",
                    i
                )));
            }
            if sample.fine >= num_classes {
                return Err(Error::validation(format!(
                    "sample {} has fine class {} but the dataset declares {} classes",
                    i, sample.fine, num_classes
                )));
            }
            match class_paths.get(&sample.fine) {
                None => {
                    class_paths.insert(sample.fine, &sample.path);
                }
                Some(&path) if path != sample.path.as_slice() => {
                    return Err(Error::validation(format!(
                        "samples of class {} disagree on the label path",
                        sample.fine
                    )));
                }
                Some(_) => {}
            }
            match class_attrs.get(&sample.fine) {
                None => {
                    class_attrs.insert(sample.fine, &sample.attrs);
                }
                Some(&attrs) if attrs != sample.attrs.as_slice() => {
                    return Err(Error::validation(format!(
                        "samples of class {} disagree on the attribute set",
                        sample.fine
                    )));
                }
                Some(_) => {}
            }
        }
        if class_paths.len() != num_classes {
            return Err(Error::validation(format!(
                "dataset declares {} classes but only {} appear in the samples",
                num_classes,
                class_paths.len()
            )));
        }
        let paths: Vec<Vec<u32>> = (0..num_classes)
            .map(|c| class_paths[&c].to_vec())
            .collect();
        let hierarchy = Hierarchy::new(paths)?;
        let attributes = if num_attributes == 0 {
            if class_attrs.values().any(|a| !a.is_empty()) {
                return Err(Error::validation(
                    "samples carry attributes but the dataset declares none",
                ));
            }
            None
        } else {
            let sets: Vec<Vec<u32>> = (0..num_classes)
                .map(|c| class_attrs[&c].to_vec())
                .collect();
            Some(AttributeTable::new(sets, num_attributes)?)
        };
        let mut train_ids = Vec::new();
        let mut test_ids = Vec::new();
        let mut class_train = alloc::vec![Vec::new(); num_classes];
        for sample in &samples {
            match sample.split {
                Split::Train => {
                    train_ids.push(sample.id);
                    class_train[sample.fine].push(sample.id);
                }
                Split::Test => test_ids.push(sample.id),
            }
        }
        Ok(Dataset {
            samples,
            input_dim,
            hierarchy,
            attributes,
            train_ids,
            test_ids,
            class_train,
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; a dataset cannot be constructed empty.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Shared feature dimensionality.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of fine classes.
    pub fn num_classes(&self) -> usize {
        self.hierarchy.num_classes()
    }

    /// Depth of the label hierarchy.
    pub fn num_levels(&self) -> usize {
        self.hierarchy.num_levels()
    }

    /// The label hierarchy shared by all samples.
    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    /// Per-class attribute sets, when the dataset carries attributes.
    pub fn attributes(&self) -> Option<&AttributeTable> {
        self.attributes.as_ref()
    }

    /// All samples in id order.
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// The sample with the given id.
    pub fn sample(&self, id: usize) -> Result<&Sample> {
        self.samples
            .get(id)
            .ok_or_else(|| Error::invalid(format!("sample id {} out of range", id)))
    }

    /// Ids belonging to a split, ascending.
    pub fn ids(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train_ids,
            Split::Test => &self.test_ids,
        }
    }

    /// Train sample ids of one fine class, ascending.
    pub fn class_train_ids(&self, class: usize) -> Result<&[usize]> {
        self.class_train
            .get(class)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("class {} out of range", class)))
    }
}
