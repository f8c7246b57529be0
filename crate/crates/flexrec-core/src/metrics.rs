//! Evaluation machinery: AUROC with tie handling, step-wise AUPR, base-rate
//! weighted confusion AUROC on misclassified samples, open-set Macro-F1, and
//! TPR-95 thresholding.

use crate::decision::confusion_scores;
use crate::error::{Error, Result};
use crate::opinion::HyperOpinion;

/// Scores with parallel binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBinary {
    scores: Vec<f64>,
    positives: Vec<bool>,
}

impl ScoredBinary {
    pub fn new(scores: Vec<f64>, positives: Vec<bool>) -> Result<Self> {
        if scores.len() != positives.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                got: positives.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::UndefinedMetric("no scored samples".into()));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::UndefinedMetric(format!("non-finite score {bad}")));
        }
        Ok(ScoredBinary { scores, positives })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn positives(&self) -> &[bool] {
        &self.positives
    }

    fn num_positive(&self) -> usize {
        self.positives.iter().filter(|p| **p).count()
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted half. The count is integer-exact, so the result agrees exactly
/// with quadratic pair counting.
pub fn auroc(data: &ScoredBinary) -> Result<f64> {
    let p = data.num_positive();
    let n = data.scores.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes, got {p} positives and {n} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..data.scores.len()).collect();
    order.sort_by(|a, b| data.scores[*a].total_cmp(&data.scores[*b]));

    // Twice the win count plus ties, accumulated over tie groups.
    let mut numerator_x2: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_pos: u64 = 0;
        let mut group_neg: u64 = 0;
        while j < order.len() && data.scores[order[j]] == data.scores[order[i]] {
            if data.positives[order[j]] {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            j += 1;
        }
        numerator_x2 += group_pos * (2 * negatives_below + group_neg);
        negatives_below += group_neg;
        i = j;
    }
    Ok(numerator_x2 as f64 / (2 * p as u64 * n as u64) as f64)
}

/// Which side of the open/closed split counts as the detection target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveClass {
    /// Positives are as flagged and higher scores rank toward them.
    Open,
    /// Roles invert: flags flip and scores negate.
    Closed,
}

/// Step-wise average precision: the precision at each recall step, summed
/// over recall increments, with no trapezoidal interpolation.
pub fn aupr(data: &ScoredBinary, positives_are: PositiveClass) -> Result<f64> {
    let (scores, positives): (Vec<f64>, Vec<bool>) = match positives_are {
        PositiveClass::Open => (data.scores.clone(), data.positives.clone()),
        PositiveClass::Closed => (
            data.scores.iter().map(|s| -s).collect(),
            data.positives.iter().map(|p| !p).collect(),
        ),
    };
    let total_pos = positives.iter().filter(|p| **p).count();
    if total_pos == 0 {
        return Err(Error::UndefinedMetric(
            "AUPR needs at least one positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut recall_prev = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if positives[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    Ok(ap)
}

/// One-vs-rest AUROC of per-class confusion scores toward the predicted
/// class, averaged with weights equal to each true class's frequency.
///
/// Intended for misclassified samples. A class with no members (or with no
/// negatives) is skipped and the remaining weights renormalize.
pub fn weighted_confusion_auroc(
    opinions: &[HyperOpinion],
    predictions: &[usize],
    truths: &[usize],
) -> Result<f64> {
    if opinions.len() != predictions.len() || opinions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: opinions.len(),
            got: predictions.len().max(truths.len()),
        });
    }
    if opinions.is_empty() {
        return Err(Error::UndefinedMetric("no samples".into()));
    }
    let k = opinions[0].num_classes();
    let m = opinions.len();
    let mut score_matrix = Vec::with_capacity(m);
    for (opinion, &predicted) in opinions.iter().zip(predictions) {
        score_matrix.push(confusion_scores(opinion, predicted)?);
    }
    let mut class_counts = vec![0usize; k];
    for &t in truths {
        if t >= k {
            return Err(Error::InvalidSubset {
                index: t,
                num_classes: k,
            });
        }
        class_counts[t] += 1;
    }

    let mut weighted_sum = 0.0;
    let mut weight_total = 0.0;
    for class in 0..k {
        let count = class_counts[class];
        if count == 0 || count == m {
            continue;
        }
        let data = ScoredBinary::new(
            score_matrix.iter().map(|row| row[class]).collect(),
            truths.iter().map(|t| *t == class).collect(),
        )?;
        let weight = count as f64 / m as f64;
        weighted_sum += weight * auroc(&data)?;
        weight_total += weight;
    }
    if weight_total == 0.0 {
        return Err(Error::UndefinedMetric(
            "no class had both positives and negatives".into(),
        ));
    }
    Ok(weighted_sum / weight_total)
}

/// A closed-set class or the open/rejected outcome; used for both
/// predictions (`Unknown` = rejected) and ground truth (`Unknown` = open).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenSetLabel {
    Known(usize),
    Unknown,
}

/// Unweighted mean F1 over K+1 classes, the extra class being
/// unknown/rejected. A class absent from both predictions and truths
/// contributes zero.
pub fn macro_f1_open(
    predictions: &[OpenSetLabel],
    truths: &[OpenSetLabel],
    num_classes: usize,
) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            got: truths.len(),
        });
    }
    let index = |label: &OpenSetLabel| -> Result<usize> {
        match label {
            OpenSetLabel::Known(c) if *c < num_classes => Ok(*c),
            OpenSetLabel::Known(c) => Err(Error::InvalidSubset {
                index: *c,
                num_classes,
            }),
            OpenSetLabel::Unknown => Ok(num_classes),
        }
    };
    let mut tp = vec![0usize; num_classes + 1];
    let mut fp = vec![0usize; num_classes + 1];
    let mut fn_ = vec![0usize; num_classes + 1];
    for (p, t) in predictions.iter().zip(truths) {
        let p = index(p)?;
        let t = index(t)?;
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    for c in 0..=num_classes {
        if tp[c] > 0 {
            sum += 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64;
        }
    }
    Ok(sum / (num_classes + 1) as f64)
}

/// Minimum number of closed samples for a TPR-95 fit.
pub const TPR95_MIN_SAMPLES: usize = 20;

/// The rejection-score threshold under which 95% of the closed-set samples
/// fall; samples at or below it are accepted.
pub fn tpr95_threshold(closed_scores: &[f64]) -> Result<f64> {
    if closed_scores.len() < TPR95_MIN_SAMPLES {
        return Err(Error::UndefinedMetric(format!(
            "TPR-95 needs at least {TPR95_MIN_SAMPLES} closed samples, got {}",
            closed_scores.len()
        )));
    }
    if let Some(bad) = closed_scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::UndefinedMetric(format!("non-finite score {bad}")));
    }
    let mut sorted = closed_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}
