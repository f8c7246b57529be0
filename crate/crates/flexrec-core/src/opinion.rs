//! Belief-mass algebra over the frame of discernment induced by per-class
//! plausibilities.
//!
//! A vector of class plausibilities `pl` defines one binary mass assignment
//! per class: the "yes" branch of class `j` carries mass `pl[j]` on the full
//! frame, the "no" branch carries `1 - pl[j]` on the frame minus `{j}`.
//! Combining all K assignments (without normalization, so the empty
//! intersection is kept) puts on every subset `A` the product
//!
//! ```text
//! mass(A) = prod_{i in A} pl[i] * prod_{j not in A} (1 - pl[j])
//! ```
//!
//! which makes every query an O(K) product: singleton beliefs, ignorance
//! (the empty-set mass), total and per-class confusion. The exponential
//! power set only ever materializes in [`PlausibilityVector::enumerate_masses`],
//! which exists as a testing oracle for small frames.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Largest frame a `ClassSubset` bit pattern can represent.
pub const MAX_SUBSET_CLASSES: usize = 64;

/// Largest frame `enumerate_masses` will expand; 2^K beyond this is unreasonable.
pub const MAX_ENUMERATION_CLASSES: usize = 20;

/// Residue tolerance for the confusion mass; anything more negative than
/// this is an arithmetic bug, not rounding.
const CONFUSION_RESIDUE_TOL: f64 = 1e-12;

/// A subset of class indices, stored as a width-K bit pattern.
///
/// The empty subset is valid and denotes the ignorance focal element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ClassSubset {
    bits: u64,
}

impl ClassSubset {
    /// The empty subset.
    pub fn empty() -> Self {
        ClassSubset { bits: 0 }
    }

    /// The full frame over `num_classes` classes.
    pub fn full(num_classes: usize) -> Result<Self> {
        if num_classes > MAX_SUBSET_CLASSES {
            return Err(Error::InvalidSubset {
                index: num_classes - 1,
                num_classes: MAX_SUBSET_CLASSES,
            });
        }
        if num_classes == MAX_SUBSET_CLASSES {
            return Ok(ClassSubset { bits: u64::MAX });
        }
        Ok(ClassSubset {
            bits: (1u64 << num_classes) - 1,
        })
    }

    /// A single-class subset.
    pub fn singleton(index: usize) -> Result<Self> {
        Self::from_indices([index])
    }

    /// Builds a subset from class indices; duplicates collapse.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut bits = 0u64;
        for index in indices {
            if index >= MAX_SUBSET_CLASSES {
                return Err(Error::InvalidSubset {
                    index,
                    num_classes: MAX_SUBSET_CLASSES,
                });
            }
            bits |= 1u64 << index;
        }
        Ok(ClassSubset { bits })
    }

    /// Reconstructs a subset from its raw bit pattern.
    pub fn from_bits(bits: u64) -> Self {
        ClassSubset { bits }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn contains(&self, index: usize) -> bool {
        index < MAX_SUBSET_CLASSES && self.bits & (1u64 << index) != 0
    }

    pub fn insert(&mut self, index: usize) -> Result<()> {
        if index >= MAX_SUBSET_CLASSES {
            return Err(Error::InvalidSubset {
                index,
                num_classes: MAX_SUBSET_CLASSES,
            });
        }
        self.bits |= 1u64 << index;
        Ok(())
    }

    pub fn cardinality(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    /// Largest member index, if any.
    pub fn max_index(&self) -> Option<usize> {
        if self.bits == 0 {
            None
        } else {
            Some(63 - self.bits.leading_zeros() as usize)
        }
    }

    /// Member indices in increasing order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..MAX_SUBSET_CLASSES).filter(move |i| self.contains(*i))
    }
}

impl std::fmt::Display for ClassSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return write!(f, "{{}}");
        }
        write!(f, "{{")?;
        for (n, i) in self.indices().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Per-class plausibilities; the sufficient statistic for every opinion.
#[derive(Debug, Clone, PartialEq)]
pub struct PlausibilityVector {
    values: Vec<f64>,
}

impl PlausibilityVector {
    /// Validates length >= 2, entries finite and in [0, 1].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidPlausibility(format!(
                "need at least 2 classes, got {}",
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidPlausibility(format!(
                    "entry {i} is not finite: {v}"
                )));
            }
            if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidPlausibility(format!(
                    "entry {i} is outside [0,1]: {v}"
                )));
            }
        }
        Ok(PlausibilityVector { values })
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> Result<f64> {
        self.values
            .get(index)
            .copied()
            .ok_or(Error::InvalidSubset {
                index,
                num_classes: self.values.len(),
            })
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.values.len() {
            return Err(Error::InvalidSubset {
                index,
                num_classes: self.values.len(),
            });
        }
        Ok(())
    }

    /// Mass placed on exactly the subset `a`:
    /// `prod_{i in a} pl[i] * prod_{j not in a} (1 - pl[j])`.
    ///
    /// The empty subset yields the ignorance mass.
    pub fn subset_mass(&self, a: ClassSubset) -> Result<f64> {
        if let Some(max) = a.max_index() {
            self.check_index(max)?;
        }
        let mut mass = 1.0;
        for (j, pl) in self.values.iter().enumerate() {
            mass *= if a.contains(j) { *pl } else { 1.0 - *pl };
        }
        Ok(mass)
    }

    /// Total belief committed to a set of classes: the sum of masses of all
    /// non-empty subsets of `a`. Closed form
    /// `prod_{j not in a} (1 - pl[j]) - ignorance`.
    pub fn set_belief(&self, a: ClassSubset) -> Result<f64> {
        if let Some(max) = a.max_index() {
            self.check_index(max)?;
        }
        let outside: f64 = stable_product(
            self.values
                .iter()
                .enumerate()
                .filter(|(j, _)| !a.contains(*j))
                .map(|(_, pl)| 1.0 - *pl),
        );
        Ok((outside - self.ignorance()).max(0.0))
    }

    /// Class-exclusive evidence mass for every class:
    /// `b[i] = pl[i] * prod_{j != i} (1 - pl[j])`.
    ///
    /// Products reduce in value-sorted order, so permuting the input permutes
    /// the output bit-for-bit.
    pub fn singleton_beliefs(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| {
                let excl = stable_product(
                    self.values
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, pl)| 1.0 - *pl),
                );
                self.values[i] * excl
            })
            .collect()
    }

    /// Mass on the empty focal intersection: `prod_j (1 - pl[j])`.
    pub fn ignorance(&self) -> f64 {
        stable_product(self.values.iter().map(|pl| 1.0 - *pl))
    }

    /// `U = 1 - sum_i b[i]`: everything not committed to a single class.
    pub fn total_uncertainty(&self) -> f64 {
        1.0 - stable_sum(self.singleton_beliefs())
    }

    /// `C = U - I`: mass shared between two or more classes. Rounding residue
    /// within -1e-12 clamps to zero.
    pub fn total_confusion(&self) -> f64 {
        let c = self.total_uncertainty() - self.ignorance();
        debug_assert!(c > -CONFUSION_RESIDUE_TOL, "confusion residue {c}");
        c.max(0.0)
    }

    /// Confusion mass touching class `i`: `C_i = pl[i] - b[i]`, the total mass
    /// on supersets of `{i}` with two or more members.
    pub fn class_related_confusion(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        let excl = stable_product(
            self.values
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, pl)| 1.0 - *pl),
        );
        Ok(self.values[i] * (1.0 - excl))
    }

    /// Mass on exactly the pair `{i, j}`: the evidence those two classes share
    /// and no other class touches.
    pub fn pairwise_confusion(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::InvalidPair { index: i });
        }
        self.check_index(i)?;
        self.check_index(j)?;
        let excl = stable_product(
            self.values
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i && *k != j)
                .map(|(_, pl)| 1.0 - *pl),
        );
        Ok(self.values[i] * self.values[j] * excl)
    }

    /// All 2^K masses, keyed by subset. Guarded to small frames; this is the
    /// oracle surface, not a production path.
    pub fn enumerate_masses(&self) -> Result<BTreeMap<ClassSubset, f64>> {
        let k = self.values.len();
        if k > MAX_ENUMERATION_CLASSES {
            return Err(Error::EnumerationLimit {
                num_classes: k,
                max_classes: MAX_ENUMERATION_CLASSES,
            });
        }
        let mut masses = BTreeMap::new();
        for bits in 0..(1u64 << k) {
            let subset = ClassSubset::from_bits(bits);
            masses.insert(subset, self.subset_mass(subset)?);
        }
        Ok(masses)
    }

    /// Bundles beliefs, ignorance, uncertainty, and confusion into one opinion.
    pub fn hyper_opinion(&self) -> Result<HyperOpinion> {
        let beliefs = self.singleton_beliefs();
        let ignorance = self.ignorance();
        let uncertainty = 1.0 - stable_sum(beliefs.iter().copied());
        let confusion = uncertainty - ignorance;
        if confusion < -CONFUSION_RESIDUE_TOL {
            return Err(Error::InternalConsistency(format!(
                "total confusion {confusion:e} below the -1e-12 rounding floor"
            )));
        }
        Ok(HyperOpinion {
            beliefs,
            ignorance,
            uncertainty,
            total_confusion: confusion.max(0.0),
            source: self.clone(),
        })
    }
}

/// Derived masses of one sample: singleton beliefs plus the uncertainty split
/// into confusion and ignorance.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperOpinion {
    beliefs: Vec<f64>,
    ignorance: f64,
    uncertainty: f64,
    total_confusion: f64,
    source: PlausibilityVector,
}

impl HyperOpinion {
    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn ignorance(&self) -> f64 {
        self.ignorance
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn total_confusion(&self) -> f64 {
        self.total_confusion
    }

    pub fn num_classes(&self) -> usize {
        self.beliefs.len()
    }

    /// The plausibility vector this opinion was derived from.
    pub fn source(&self) -> &PlausibilityVector {
        &self.source
    }

    /// Argmax-belief class; ties resolve to the lowest index. Ranking by
    /// belief and by plausibility agree, since b_i is monotone in pl_i with
    /// the other entries fixed.
    pub fn dominant_class(&self) -> usize {
        let mut best = 0;
        for (i, b) in self.beliefs.iter().enumerate() {
            if *b > self.beliefs[best] {
                best = i;
            }
        }
        best
    }
}

/// Product reduced in value-sorted order so that the result depends only on
/// the multiset of factors, not their arrangement.
pub(crate) fn stable_product<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut factors: Vec<f64> = values.into_iter().collect();
    factors.sort_by(f64::total_cmp);
    factors.iter().product()
}

/// Sum reduced in value-sorted order; see [`stable_product`].
pub(crate) fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut terms: Vec<f64> = values.into_iter().collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}
