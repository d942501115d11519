//! Classification metrics: confusion matrix, accuracy, and unweighted
//! average recall (UAR).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Evaluation summary. `confusion[i][j]` counts true label `i` predicted as
/// `j`. Classes with zero support report recall 0.0 and are excluded from the
/// UAR mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub per_class_recall: Vec<f64>,
    pub support: Vec<u64>,
    pub uar: f64,
}

/// Build [`Metrics`] from parallel prediction/label slices.
pub fn compute_metrics(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(Error::Data("cannot compute metrics on empty input".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= num_classes || l >= num_classes {
            return Err(Error::Data(format!(
                "prediction {p} / label {l} out of range for {num_classes} classes"
            )));
        }
        confusion[l][p] += 1;
    }

    let total: u64 = predictions.len() as u64;
    let correct: u64 = (0..num_classes).map(|i| confusion[i][i]).sum();
    let support: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();

    let mut per_class_recall = vec![0.0; num_classes];
    let mut recall_sum = 0.0;
    let mut supported = 0usize;
    for c in 0..num_classes {
        if support[c] > 0 {
            per_class_recall[c] = confusion[c][c] as f64 / support[c] as f64;
            recall_sum += per_class_recall[c];
            supported += 1;
        }
    }
    if supported == 0 {
        return Err(Error::Data("no class has support".into()));
    }

    Ok(Metrics {
        confusion,
        accuracy: correct as f64 / total as f64,
        per_class_recall,
        support,
        uar: recall_sum / supported as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_example() {
        // confusion [[8,2],[4,6]]
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for (l, p, n) in [(0, 0, 8), (0, 1, 2), (1, 0, 4), (1, 1, 6)] {
            for _ in 0..n {
                labels.push(l);
                preds.push(p);
            }
        }
        let m = compute_metrics(&preds, &labels, 2).unwrap();
        assert_eq!(m.confusion, vec![vec![8, 2], vec![4, 6]]);
        assert!((m.per_class_recall[0] - 0.8).abs() < 1e-15);
        assert!((m.per_class_recall[1] - 0.6).abs() < 1e-15);
        assert!((m.uar - 0.7).abs() < 1e-15);
        assert!((m.accuracy - 0.7).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let labels = vec![0, 1, 2, 3, 0, 1, 2, 3];
        let m = compute_metrics(&labels, &labels, 4).unwrap();
        assert_eq!(m.uar, 1.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn constant_predictor_on_balanced_binary() {
        let labels = vec![0, 0, 0, 1, 1, 1];
        let preds = vec![0; 6];
        let m = compute_metrics(&preds, &labels, 2).unwrap();
        assert!((m.uar - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_support_class_excluded_from_uar() {
        // class 2 never appears as a label
        let labels = vec![0, 0, 1, 1];
        let preds = vec![0, 0, 1, 0];
        let m = compute_metrics(&preds, &labels, 3).unwrap();
        assert_eq!(m.support[2], 0);
        assert_eq!(m.per_class_recall[2], 0.0);
        assert!((m.uar - (1.0 + 0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(compute_metrics(&[], &[], 2).is_err());
    }

    #[test]
    fn uar_invariant_to_relabeling_accuracy_is_not() {
        // unbalanced two-class data; permute labels 0<->1
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
        let preds = vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 0];
        let m = compute_metrics(&preds, &labels, 2).unwrap();
        let labels_p: Vec<usize> = labels.iter().map(|&l| 1 - l).collect();
        let preds_p: Vec<usize> = preds.iter().map(|&p| 1 - p).collect();
        let mp = compute_metrics(&preds_p, &labels_p, 2).unwrap();
        assert!((m.uar - mp.uar).abs() < 1e-15);

        // a different (non-permutation) prediction pattern with the same
        // accuracy shows accuracy hides the imbalance that UAR exposes
        let preds_const = vec![0; 10];
        let mc = compute_metrics(&preds_const, &labels, 2).unwrap();
        assert!((mc.accuracy - 0.8).abs() < 1e-15);
        assert!((mc.uar - 0.5).abs() < 1e-15);
        assert!(mc.accuracy > mc.uar);
    }
}
