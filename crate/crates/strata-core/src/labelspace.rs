//! Label structures: class hierarchies, per-class attribute sets, and the
//! margin schedules derived from them.
//!
//! A hierarchy is stored as one path per fine class, ordered coarsest to
//! finest. Relevance between two classes is the depth of their shared
//! prefix. Attribute tables assign each class a set of attribute ids;
//! overlap between sets shrinks the margin a ranking loss demands between
//! a positive and a negative.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Class hierarchy stored as per-class label paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    paths: Vec<Vec<u32>>,
    num_levels: usize,
}

impl Hierarchy {
    /// Builds a hierarchy from one path per fine class, each ordered
    /// coarsest first. Validates the tree property: equal labels at some
    /// level imply equal labels at every coarser level, and the finest
    /// label is unique per class.
    pub fn new(paths: Vec<Vec<u32>>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::validation("hierarchy has no classes"));
        }
        let num_levels = paths[0].len();
        if num_levels == 0 {
            return Err(Error::validation("hierarchy paths must have at least one level"));
        }
        for (c, path) in paths.iter().enumerate() {
            if path.len() != num_levels {
                return Err(Error::validation(format!(
                    "class {} has a path of {} levels, expected {}",
                    c,
                    path.len(),
                    num_levels
                )));
            }
        }
        // Finest-level labels identify classes.
        let mut leaves = BTreeMap::new();
        for (c, path) in paths.iter().enumerate() {
            if let Some(prev) = leaves.insert(path[num_levels - 1], c) {
                return Err(Error::validation(format!(
                    "classes {} and {} share the finest-level label {}",
                    prev,
                    c,
                    path[num_levels - 1]
                )));
            }
        }
        // Tree property: a label at level l has exactly one parent prefix.
        for level in 1..num_levels {
            let mut parents: BTreeMap<u32, &[u32]> = BTreeMap::new();
            for (c, path) in paths.iter().enumerate() {
                match parents.get(&path[level]) {
                    None => {
                        parents.insert(path[level], &path[..level]);
                    }
                    Some(prefix) if *prefix == &path[..level] => {}
                    Some(_) => {
                        return Err(Error::validation(format!(
                            "label {} at level {} of class {} has two different parents",
                            path[level],
                            level + 1,
                            c
                        )));
                    }
                }
            }
        }
        Ok(Hierarchy { paths, num_levels })
    }

    /// Trivial one-level hierarchy over `num_classes` classes, used when
    /// labels carry no structure.
    pub fn flat(num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::validation("hierarchy has no classes"));
        }
        Hierarchy::new((0..num_classes).map(|c| alloc::vec![c as u32]).collect())
    }

    /// Number of fine classes.
    pub fn num_classes(&self) -> usize {
        self.paths.len()
    }

    /// Number of levels `x`; level 1 is the coarsest, level `x` the finest.
    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// Label path of a class, coarsest first.
    pub fn path(&self, class: usize) -> Result<&[u32]> {
        self.paths
            .get(class)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("unknown class id {}", class)))
    }

    /// Depth of the shared prefix of two classes: the largest `l` such
    /// that their paths agree on levels `1..=l`. Equals `num_levels` iff
    /// the classes are identical.
    pub fn shared_depth(&self, a: usize, b: usize) -> Result<usize> {
        let pa = self.path(a)?;
        let pb = self.path(b)?;
        Ok(pa.iter().zip(pb).take_while(|(x, y)| x == y).count())
    }
}

/// Per-class attribute sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTable {
    sets: Vec<Vec<u32>>,
    num_attributes: usize,
}

impl AttributeTable {
    /// Builds a table from one attribute set per class. Sets are stored
    /// sorted; empty sets, out-of-range ids, and duplicate ids are
    /// rejected.
    pub fn new(sets: Vec<Vec<u32>>, num_attributes: usize) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::validation("attribute table has no classes"));
        }
        if num_attributes == 0 {
            return Err(Error::validation("attribute table has zero attributes"));
        }
        let mut sorted = Vec::with_capacity(sets.len());
        for (c, set) in sets.into_iter().enumerate() {
            if set.is_empty() {
                return Err(Error::validation(format!("class {} has an empty attribute set", c)));
            }
            let mut set = set;
            set.sort_unstable();
            for pair in set.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::validation(format!(
                        "class {} lists attribute {} twice",
                        c, pair[0]
                    )));
                }
            }
            if let Some(&max) = set.last() {
                if max as usize >= num_attributes {
                    return Err(Error::validation(format!(
                        "class {} uses attribute {} but only {} exist",
                        c, max, num_attributes
                    )));
                }
            }
            sorted.push(set);
        }
        Ok(AttributeTable { sets: sorted, num_attributes })
    }

    /// Number of classes.
    pub fn num_classes(&self) -> usize {
        self.sets.len()
    }

    /// Number of distinct attribute ids the table ranges over.
    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    /// Attribute set of a class, sorted ascending.
    pub fn set(&self, class: usize) -> Result<&[u32]> {
        self.sets
            .get(class)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("unknown class id {}", class)))
    }

    /// Whether two classes share at least one attribute.
    pub fn shares_any(&self, a: usize, b: usize) -> Result<bool> {
        let (inter, _) = self.overlap(a, b)?;
        Ok(inter > 0)
    }

    /// Margin scaled by attribute dissimilarity:
    /// `m_b * (1 - |A_p n A_n| / |A_p u A_n|)`. Zero for identical sets,
    /// `m_b` for disjoint ones.
    pub fn jaccard_margin(&self, class_p: usize, class_n: usize, m_b: f64) -> Result<f64> {
        if !(m_b > 0.0) || !m_b.is_finite() {
            return Err(Error::invalid(format!("base margin must be positive, got {}", m_b)));
        }
        let (inter, union) = self.overlap(class_p, class_n)?;
        Ok(m_b * (1.0 - inter as f64 / union as f64))
    }

    /// Intersection and union sizes of two classes' sorted attribute sets.
    fn overlap(&self, a: usize, b: usize) -> Result<(usize, usize)> {
        let sa = self.set(a)?;
        let sb = self.set(b)?;
        let mut i = 0;
        let mut j = 0;
        let mut inter = 0;
        while i < sa.len() && j < sb.len() {
            match sa[i].cmp(&sb[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok((inter, sa.len() + sb.len() - inter))
    }
}

/// Strictly decreasing per-level margins plus the base margin used for
/// attribute-derived margins.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginSchedule {
    margins: Vec<f64>,
    base_margin: f64,
}

impl MarginSchedule {
    /// Validates and stores a schedule. `margins` holds one entry per
    /// hierarchy level, coarsest first, and must be strictly decreasing
    /// and positive.
    pub fn new(margins: Vec<f64>, base_margin: f64) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::validation("margin schedule is empty"));
        }
        if !(base_margin > 0.0) || !base_margin.is_finite() {
            return Err(Error::validation(format!(
                "base margin must be positive and finite, got {}",
                base_margin
            )));
        }
        for &m in &margins {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::validation(format!(
                    "margins must be positive and finite, got {}",
                    m
                )));
            }
        }
        for pair in margins.windows(2) {
            if pair[0] <= pair[1] {
                return Err(Error::validation(format!(
                    "margin schedule must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(MarginSchedule { margins, base_margin })
    }

    /// Linear default: `m_l = base * (x - l + 1) / x` for `x` levels, so a
    /// one-level schedule is just `(base)`.
    pub fn linear(base_margin: f64, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::validation("margin schedule is empty"));
        }
        let x = levels as f64;
        let margins = (1..=levels).map(|l| base_margin * (x - l as f64 + 1.0) / x).collect();
        MarginSchedule::new(margins, base_margin)
    }

    /// Per-level margins, coarsest first.
    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    /// Base margin `m_b` for attribute-derived margins.
    pub fn base_margin(&self) -> f64 {
        self.base_margin
    }

    /// Number of levels the schedule covers.
    pub fn num_levels(&self) -> usize {
        self.margins.len()
    }

    /// Margins of the hinges in a tuplet chain:
    /// `(m_1-m_2, m_2-m_3, ..., m_{x-1}-m_x, m_x)`. Entries are positive
    /// and sum to `m_1`, so chaining the hinges telescopes to the full
    /// top-level margin.
    pub fn triplet_margins(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.margins.len());
        for pair in self.margins.windows(2) {
            out.push(pair[0] - pair[1]);
        }
        out.push(*self.margins.last().expect("schedule is non-empty"));
        out
    }
}
