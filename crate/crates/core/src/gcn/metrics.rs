use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = j;
        }
    }
    best
}

/// Macro- and micro-averaged F1 of argmax predictions over `mask`.
///
/// Every one of the `k` classes enters the macro average; a class with no
/// true and no predicted members scores 0. In single-label classification
/// micro-F1 equals accuracy.
pub fn evaluate(probs: &Array2<f64>, truth: &[usize], mask: &[bool], k: usize) -> F1Scores {
    let predictions: Vec<(usize, usize)> = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| (argmax(probs.row(i)), truth[i]))
        .collect();
    f1_scores(&predictions, k)
}

/// F1 scores from `(predicted, true)` pairs.
pub fn f1_scores(pairs: &[(usize, usize)], k: usize) -> F1Scores {
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for &(pred, truth) in pairs {
        if pred == truth {
            tp[pred] += 1;
        } else {
            fp[pred] += 1;
            fn_[truth] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let macro_f1 = (0..k).map(|c| f1(tp[c], fp[c], fn_[c])).sum::<f64>() / k as f64;
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    F1Scores { macro_f1, micro_f1 }
}
