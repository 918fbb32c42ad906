//! Precision-recall analysis over classifier scores.
//!
//! Curves are one-vs-rest per class and swept over every distinct score.
//! A point at threshold `t` predicts positive for every score `>= t`, so
//! tied scores always enter together. The area is the step-wise sum
//! `Σ (R_i − R_{i−1}) · P_i` starting from recall 0, with no interpolation
//! between points.

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{Corpus, Label};
use crate::encoding::EncodedFunction;
use crate::nn::{Model, NnError, Scalar, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no positive samples for {0}")]
    NoPositives(Label),
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("score {0} is not finite")]
    NonFinite(f64),
    #[error("recall {target} is not reachable (curve tops out at {max})")]
    RecallUnreachable { target: f64, max: f64 },
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error(transparent)]
    Model(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub class_label: Label,
    /// Ordered by descending threshold.
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

pub fn pr_curve(scores: &[f64], is_positive: &[bool], class_label: Label) -> Result<PrCurve, EvalError> {
    if scores.len() != is_positive.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: is_positive.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(bad));
    }
    let total_pos = is_positive.iter().filter(|&&p| p).count();
    if total_pos == 0 {
        return Err(EvalError::NoPositives(class_label));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if is_positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / total_pos as f64;
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            precision,
            recall,
        });
    }
    Ok(PrCurve {
        class_label,
        points,
        auc,
    })
}

/// Precision of the first point, in descending threshold order, whose
/// recall reaches `target_recall`.
pub fn precision_at_recall(curve: &PrCurve, target_recall: f64) -> Result<f64, EvalError> {
    let max = curve.points.iter().map(|p| p.recall).fold(0.0, f64::max);
    if target_recall.is_nan() || target_recall <= 0.0 {
        return Err(EvalError::RecallUnreachable {
            target: target_recall,
            max,
        });
    }
    curve
        .points
        .iter()
        .find(|p| p.recall >= target_recall)
        .map(|p| p.precision)
        .ok_or(EvalError::RecallUnreachable {
            target: target_recall,
            max,
        })
}

/// Anything that can assign class probabilities to an encoded function.
pub trait Scorer {
    fn input_len(&self) -> usize;
    fn class_probabilities(&self, sample: &EncodedFunction) -> Result<[f64; NUM_CLASSES], NnError>;
}

impl<F: Scalar> Scorer for Model<F> {
    fn input_len(&self) -> usize {
        self.config.input_len
    }

    fn class_probabilities(&self, sample: &EncodedFunction) -> Result<[f64; NUM_CLASSES], NnError> {
        Ok(self.predict(sample)?.probs)
    }
}

/// Class probabilities for every sample of `corpus`, in order.
pub fn score_corpus<S: Scorer + ?Sized>(scorer: &S, corpus: &Corpus) -> Result<Vec<[f64; NUM_CLASSES]>, EvalError> {
    (0..corpus.len())
        .map(|i| Ok(scorer.class_probabilities(&corpus.encode(i, scorer.input_len()))?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCurves {
    pub curves: Vec<PrCurve>,
    /// Classes with no positive sample, for which no curve exists.
    pub skipped: Vec<Label>,
}

pub fn pr_curves_per_class<S: Scorer + ?Sized>(scorer: &S, test: &Corpus) -> Result<ClassCurves, EvalError> {
    let probs = score_corpus(scorer, test)?;
    let truth: Vec<Label> = test.samples.iter().map(|s| s.label).collect();
    pr_curves_from_scores(&probs, &truth)
}

/// One-vs-rest curve per class from precomputed probabilities.
pub fn pr_curves_from_scores(probs: &[[f64; NUM_CLASSES]], truth: &[Label]) -> Result<ClassCurves, EvalError> {
    if probs.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            scores: probs.len(),
            labels: truth.len(),
        });
    }
    if probs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut out = ClassCurves {
        curves: Vec::new(),
        skipped: Vec::new(),
    };
    for label in Label::ALL {
        let scores: Vec<f64> = probs.iter().map(|p| p[label.index()]).collect();
        let positive: Vec<bool> = truth.iter().map(|&t| t == label).collect();
        match pr_curve(&scores, &positive, label) {
            Ok(curve) => out.curves.push(curve),
            Err(EvalError::NoPositives(_)) => {
                log::warn!("no {label} samples in the test set; skipping its curve");
                out.skipped.push(label);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `counts[true][predicted]` over samples whose top probability reached the
/// threshold; the rest are abstentions.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub abstained: usize,
}

impl ConfusionMatrix {
    pub fn classified(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn total(&self) -> usize {
        self.classified() + self.abstained
    }

    /// Fraction of classified samples on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.classified().max(1) as f64
    }

    /// Per-class recall among classified samples; `None` for classes with
    /// no classified samples.
    pub fn class_recall(&self, label: Label) -> Option<f64> {
        let row = &self.counts[label.index()];
        let n: usize = row.iter().sum();
        (n > 0).then(|| row[label.index()] as f64 / n as f64)
    }

    /// Mean of the per-class recalls over classes that occur.
    pub fn macro_accuracy(&self) -> f64 {
        let recalls: Vec<f64> = Label::ALL.iter().filter_map(|&l| self.class_recall(l)).collect();
        recalls.iter().sum::<f64>() / recalls.len().max(1) as f64
    }
}

pub fn confusion_matrix<S: Scorer + ?Sized>(scorer: &S, test: &Corpus, threshold: f64) -> Result<ConfusionMatrix, EvalError> {
    let probs = score_corpus(scorer, test)?;
    let truth: Vec<Label> = test.samples.iter().map(|s| s.label).collect();
    confusion_from_scores(&probs, &truth, threshold)
}

pub fn confusion_from_scores(
    probs: &[[f64; NUM_CLASSES]],
    truth: &[Label],
    threshold: f64,
) -> Result<ConfusionMatrix, EvalError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::BadThreshold(threshold));
    }
    if probs.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            scores: probs.len(),
            labels: truth.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (p, t) in probs.iter().zip(truth) {
        let pred = crate::nn::Prediction::from_probs(*p);
        if pred.confidence < threshold {
            m.abstained += 1;
        } else {
            m.counts[t.index()][pred.label.index()] += 1;
        }
    }
    Ok(m)
}
