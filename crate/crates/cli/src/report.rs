//! CSV renderers for evaluation output.

use faultlab_core::eval::{ConfusionMatrix, EvaluationReport};
use faultlab_core::fault::{FaultLabel, NUM_CLASSES};
use faultlab_core::imaging::ColorMode;

pub const REPORT_HEADER: &str =
    "model,color_mode,accuracy,kappa,pca_0,pca_1,pca_2,pca_3,pca_4,pca_5,pca_6,pca_7";

/// One-row per-model report: accuracy, kappa and per-class accuracies.
pub fn render_report(report: &EvaluationReport) -> String {
    let mut line = format!(
        "{},{},{:.6},{:.6}",
        report.model_name,
        report.color_mode.name(),
        report.accuracy,
        report.kappa
    );
    for pca in &report.per_class_accuracy {
        line.push_str(&format!(",{pca:.6}"));
    }
    format!("{REPORT_HEADER}\n{line}\n")
}

/// The raw 8x8 confusion counts, true labels as rows.
pub fn render_confusion(cm: &ConfusionMatrix) -> String {
    let mut out = String::new();
    for row in &cm.counts {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// The model x color-mode accuracy/kappa table.
pub fn render_comparison(reports: &[EvaluationReport]) -> String {
    let mut out = String::from("model,color_mode,accuracy,kappa\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            r.model_name,
            r.color_mode.name(),
            r.accuracy,
            r.kappa
        ));
    }
    out
}

/// Per-fault accuracy of one model (both color modes), long form.
pub fn render_per_fault(reports: &[&EvaluationReport]) -> String {
    let mut out = String::from("color_mode,label_code,label_name,accuracy,present\n");
    for r in reports {
        for k in 0..NUM_CLASSES {
            let label = FaultLabel::from_code(k as u8).unwrap();
            out.push_str(&format!(
                "{},{},{},{:.6},{}\n",
                r.color_mode.name(),
                k,
                label.name(),
                r.per_class_accuracy[k],
                r.class_present[k],
            ));
        }
    }
    out
}

/// Per-epoch mean training loss.
pub fn render_loss_history(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        out.push_str(&format!("{epoch},{loss:.6}\n"));
    }
    out
}

/// File name helpers shared by the commands and the tests.
pub fn report_name(model: &str, color: ColorMode) -> String {
    format!("report_{model}_{}.csv", color.name())
}

pub fn confusion_name(model: &str, color: ColorMode) -> String {
    format!("confusion_{model}_{}.csv", color.name())
}

pub fn loss_name(color: ColorMode) -> String {
    format!("cnn_loss_{}.csv", color.name())
}

#[cfg(test)]
mod tests {
    use super::*;
    use faultlab_core::eval::EvaluationReport;

    fn report() -> EvaluationReport {
        let truth = vec![FaultLabel::Normal, FaultLabel::TxPower];
        let pred = vec![FaultLabel::Normal, FaultLabel::Normal];
        EvaluationReport::from_predictions("nb", ColorMode::Gray, &truth, &pred, None).unwrap()
    }

    #[test]
    fn report_row_has_twelve_columns() {
        let text = render_report(&report());
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 12);
        assert!(row.starts_with("nb,gray,0.500000"));
    }

    #[test]
    fn confusion_renders_eight_rows() {
        let text = render_confusion(&report().confusion);
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().all(|l| l.split(',').count() == 8));
    }

    #[test]
    fn loss_history_includes_epoch_indices() {
        let text = render_loss_history(&[2.0794, 1.5]);
        assert_eq!(text, "epoch,mean_loss\n0,2.079400\n1,1.500000\n");
    }
}
