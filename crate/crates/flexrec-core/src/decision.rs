//! Flexible prediction: rejection, a single class, or an incrementally
//! combined set, plus the threshold-free confusion-ranking sweep.

use crate::error::{Error, Result};
use crate::opinion::{ClassSubset, HyperOpinion};

/// What kind of answer a predictive set carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    Rejected,
    Single,
    Combined,
}

impl PredictionMode {
    pub fn name(&self) -> &'static str {
        match self {
            PredictionMode::Rejected => "rejected",
            PredictionMode::Single => "single",
            PredictionMode::Combined => "combined",
        }
    }
}

/// An ordered, possibly-empty set of predicted classes; empty means the
/// sample was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictiveSet {
    classes: Vec<usize>,
    mode: PredictionMode,
}

impl PredictiveSet {
    pub fn rejected() -> Self {
        PredictiveSet {
            classes: Vec::new(),
            mode: PredictionMode::Rejected,
        }
    }

    /// Derives the mode from the class count; classes must be distinct.
    pub fn from_classes(classes: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &classes {
            if !seen.insert(*c) {
                return Err(Error::InvalidConfig(format!(
                    "predictive set repeats class {c}"
                )));
            }
        }
        let mode = match classes.len() {
            0 => PredictionMode::Rejected,
            1 => PredictionMode::Single,
            _ => PredictionMode::Combined,
        };
        Ok(PredictiveSet { classes, mode })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn mode(&self) -> PredictionMode {
        self.mode
    }

    pub fn is_rejected(&self) -> bool {
        self.mode == PredictionMode::Rejected
    }

    pub fn contains(&self, class: usize) -> bool {
        self.classes.contains(&class)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Greedy flexible prediction against a belief threshold.
///
/// Starts from the argmax-belief class. If its singleton belief meets the
/// threshold the answer is that class alone. Otherwise classes join in
/// decreasing order of pairwise confusion with the first class, and the set
/// is returned once its accumulated mass (the total belief of the chosen
/// set: all subset masses inside it) reaches the threshold. If even the full
/// frame cannot reach it — the ignorance is too large — the sample is
/// rejected. The accumulated mass never exceeds `1 - ignorance`.
pub fn predict_flexible(opinion: &HyperOpinion, belief_threshold: f64) -> Result<PredictiveSet> {
    if !(0.0..=1.0).contains(&belief_threshold) {
        return Err(Error::InvalidConfig(format!(
            "belief threshold must be in [0,1], got {belief_threshold}"
        )));
    }
    let k = opinion.num_classes();
    let pl = opinion.source();
    let first = opinion.dominant_class();
    if opinion.beliefs()[first] >= belief_threshold {
        return PredictiveSet::from_classes(vec![first]);
    }

    let mut chosen = vec![first];
    let mut subset = ClassSubset::singleton(first)?;
    while chosen.len() < k {
        let mut next = None;
        let mut best_score = f64::NEG_INFINITY;
        for candidate in 0..k {
            if subset.contains(candidate) {
                continue;
            }
            let score = pl.pairwise_confusion(candidate, first)?;
            if score > best_score {
                best_score = score;
                next = Some(candidate);
            }
        }
        let candidate = next.expect("loop guard leaves at least one class");
        chosen.push(candidate);
        subset.insert(candidate)?;
        if pl.set_belief(subset)? >= belief_threshold {
            return PredictiveSet::from_classes(chosen);
        }
    }
    Ok(PredictiveSet::rejected())
}

/// Confusion of every class toward the predicted one; the predicted class
/// itself scores zero.
pub fn confusion_scores(opinion: &HyperOpinion, predicted: usize) -> Result<Vec<f64>> {
    let k = opinion.num_classes();
    if predicted >= k {
        return Err(Error::InvalidSubset {
            index: predicted,
            num_classes: k,
        });
    }
    let pl = opinion.source();
    (0..k)
        .map(|class| {
            if class == predicted {
                Ok(0.0)
            } else {
                pl.pairwise_confusion(class, predicted)
            }
        })
        .collect()
}

/// One cutoff of the ranking sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Selected (sample, class) pairs divided by the sample count.
    pub avg_predictions: f64,
    pub precision: f64,
    pub recall: f64,
    /// False at cutoffs where no sample has a prediction yet; precision is
    /// reported as 0 there so the curve is total.
    pub precision_defined: bool,
}

/// Threshold-free precision/recall sweep over globally ranked
/// (sample, class) confusion scores.
///
/// All `K * M` pairs are sorted by score descending (ties: sample index,
/// then class index; zero scores simply rank at the tail). At cutoff `N`
/// each sample's predictive set is its selected classes; a hit means the
/// truth is in the set. Precision divides hits by samples with non-empty
/// sets, recall by all samples.
pub fn ranking_sweep(
    opinions: &[HyperOpinion],
    predictions: &[usize],
    truths: &[usize],
) -> Result<Vec<SweepPoint>> {
    if opinions.len() != predictions.len() || opinions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: opinions.len(),
            got: predictions.len().max(truths.len()),
        });
    }
    if opinions.is_empty() {
        return Ok(Vec::new());
    }
    let k = opinions[0].num_classes();
    let m = opinions.len();
    for opinion in opinions {
        if opinion.num_classes() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: opinion.num_classes(),
            });
        }
    }
    for &t in truths {
        if t >= k {
            return Err(Error::InvalidSubset {
                index: t,
                num_classes: k,
            });
        }
    }

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * m);
    for (sample, (opinion, &predicted)) in opinions.iter().zip(predictions).enumerate() {
        let scores = confusion_scores(opinion, predicted)?;
        for (class, score) in scores.into_iter().enumerate() {
            pairs.push((score, sample, class));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut selected_count = vec![0usize; m];
    let mut hit = vec![false; m];
    let mut nonempty = 0usize;
    let mut hits = 0usize;
    let mf = m as f64;
    let mut curve = Vec::with_capacity(k * m + 1);
    curve.push(SweepPoint {
        avg_predictions: 0.0,
        precision: 0.0,
        recall: 0.0,
        precision_defined: false,
    });
    for (n, (_, sample, class)) in pairs.into_iter().enumerate() {
        if selected_count[sample] == 0 {
            nonempty += 1;
        }
        selected_count[sample] += 1;
        if class == truths[sample] && !hit[sample] {
            hit[sample] = true;
            hits += 1;
        }
        curve.push(SweepPoint {
            avg_predictions: (n + 1) as f64 / mf,
            precision: hits as f64 / nonempty as f64,
            recall: hits as f64 / mf,
            precision_defined: true,
        });
    }
    Ok(curve)
}
