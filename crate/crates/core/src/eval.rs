//! Classification metrics: confusion matrix, overall accuracy, Cohen's
//! kappa and per-class accuracy.

use crate::error::{Error, Result};
use crate::fault::{FaultLabel, NUM_CLASSES};

/// 8x8 confusion matrix; rows are true labels, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn col_total(&self, col: usize) -> u64 {
        self.counts.iter().map(|row| row[col]).sum()
    }
}

/// Tally (true, predicted) pairs into a confusion matrix.
pub fn confusion(truth: &[FaultLabel], predicted: &[FaultLabel]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "label lengths differ: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("cannot tally an empty label set"));
    }
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (t, p) in truth.iter().zip(predicted) {
        counts[t.code() as usize][p.code() as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Overall accuracy: trace over total.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.trace() as f64 / cm.total() as f64
}

/// Cohen's kappa. When expected agreement is 1 the value is 1 for a perfect
/// diagonal and 0 otherwise.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let n = total as f64;
    let p_o = cm.trace() as f64 / n;
    let p_e = (0..NUM_CLASSES)
        .map(|k| cm.row_total(k) as f64 * cm.col_total(k) as f64)
        .sum::<f64>()
        / (n * n);
    if p_e == 1.0 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Per-class accuracy (row diagonal over row total) and a flag marking
/// classes absent from the evaluated set; absent classes report 0.
pub fn per_class_accuracy(cm: &ConfusionMatrix) -> ([f64; NUM_CLASSES], [bool; NUM_CLASSES]) {
    let mut acc = [0.0; NUM_CLASSES];
    let mut present = [false; NUM_CLASSES];
    for k in 0..NUM_CLASSES {
        let row = cm.row_total(k);
        if row > 0 {
            present[k] = true;
            acc[k] = cm.counts[k][k] as f64 / row as f64;
        }
    }
    (acc, present)
}

/// Everything one trained model produces on one evaluation split.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub model_name: String,
    pub color_mode: crate::imaging::ColorMode,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub kappa: f64,
    pub per_class_accuracy: [f64; NUM_CLASSES],
    pub class_present: [bool; NUM_CLASSES],
    /// CNN per-epoch mean training loss, when the model has one.
    pub loss_history: Option<Vec<f64>>,
}

impl EvaluationReport {
    pub fn from_predictions(
        model_name: &str,
        color_mode: crate::imaging::ColorMode,
        truth: &[FaultLabel],
        predicted: &[FaultLabel],
        loss_history: Option<Vec<f64>>,
    ) -> Result<Self> {
        let cm = confusion(truth, predicted)?;
        let acc = accuracy(&cm);
        let kappa = cohen_kappa(&cm)?;
        let (pca, present) = per_class_accuracy(&cm);
        Ok(EvaluationReport {
            model_name: model_name.to_string(),
            color_mode,
            confusion: cm,
            accuracy: acc,
            kappa,
            per_class_accuracy: pca,
            class_present: present,
            loss_history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(n: u64) -> ConfusionMatrix {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for k in 0..NUM_CLASSES {
            counts[k][k] = n;
        }
        ConfusionMatrix { counts }
    }

    #[test]
    fn confusion_counts_pairs() {
        let truth = vec![FaultLabel::Normal, FaultLabel::TxPower, FaultLabel::Normal];
        let pred = vec![FaultLabel::Normal, FaultLabel::Normal, FaultLabel::TxPower];
        let cm = confusion(&truth, &pred).unwrap();
        assert_eq!(cm.total(), 3);
        assert_eq!(cm.counts[0][0], 1);
        assert_eq!(cm.counts[3][0], 1);
        assert_eq!(cm.counts[0][3], 1);
        assert!(confusion(&truth, &pred[..2]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&diag(5)), 1.0);
        let mut cm = diag(0);
        cm.counts[0][1] = 4;
        assert_eq!(accuracy(&cm), 0.0);
        let mut cm = diag(0);
        for k in 0..NUM_CLASSES {
            cm.counts[k][k] = if k == 0 { 87 - 7 * 7 } else { 7 };
        }
        cm.counts[1][0] = 13;
        assert_eq!(cm.total(), 100);
        assert!((accuracy(&cm) - 0.87).abs() < 1e-15);
    }

    #[test]
    fn kappa_perfect_diagonal_is_one() {
        assert_eq!(cohen_kappa(&diag(3)).unwrap(), 1.0);
    }

    #[test]
    fn kappa_constant_predictor_on_uniform_truth_is_zero() {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for row in counts.iter_mut() {
            row[2] = 6;
        }
        let cm = ConfusionMatrix { counts };
        let kappa = cohen_kappa(&cm).unwrap();
        assert!(kappa.abs() < 1e-15);
    }

    #[test]
    fn kappa_two_class_hand_value() {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        counts[0][0] = 20;
        counts[0][1] = 5;
        counts[1][0] = 10;
        counts[1][1] = 15;
        let cm = ConfusionMatrix { counts };
        assert!((cohen_kappa(&cm).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate_expected_agreement() {
        // Everything in one cell on the diagonal: p_e = 1, p_o = 1.
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        counts[4][4] = 9;
        assert_eq!(cohen_kappa(&ConfusionMatrix { counts }).unwrap(), 1.0);
        // Everything in one off-diagonal cell: p_e = 1, p_o = 0.
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        counts[4][5] = 9;
        assert_eq!(cohen_kappa(&ConfusionMatrix { counts }).unwrap(), 0.0);
    }

    #[test]
    fn per_class_accuracy_flags_absent_rows() {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        counts[0][0] = 3;
        counts[1][0] = 2;
        let (acc, present) = per_class_accuracy(&ConfusionMatrix { counts });
        assert_eq!(acc[0], 1.0);
        assert_eq!(acc[1], 0.0);
        assert!(present[0] && present[1]);
        assert!(!present[2]);
        assert_eq!(acc[2], 0.0);
    }

    #[test]
    fn per_class_accuracy_weighted_sum_matches_accuracy() {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        counts[0][0] = 4;
        counts[0][3] = 1;
        counts[3][3] = 7;
        counts[3][2] = 2;
        counts[5][5] = 1;
        let cm = ConfusionMatrix { counts };
        let (pca, _) = per_class_accuracy(&cm);
        let weighted: f64 = (0..NUM_CLASSES)
            .map(|k| cm.row_total(k) as f64 * pca[k])
            .sum();
        assert!((weighted / cm.total() as f64 - accuracy(&cm)).abs() < 1e-15);
    }

    #[test]
    fn kappa_is_one_iff_diagonal_with_positive_trace() {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        counts[0][0] = 5;
        counts[1][1] = 2;
        counts[2][3] = 1;
        let kappa = cohen_kappa(&ConfusionMatrix { counts }).unwrap();
        assert!(kappa < 1.0);
    }
}
