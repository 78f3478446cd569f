//! Gaussian Naive Bayes over flattened image vectors.
//!
//! Per class and feature, means and biased (divide-by-n) maximum-likelihood
//! variances are estimated; class scores are log prior plus the sum of
//! per-feature log Gaussian densities, with the evidence term dropped.
//! Variances are floored so constant pixels cannot produce infinite scores.

use crate::error::{Error, Result};
use crate::fault::{FaultLabel, NUM_CLASSES};
use crate::imaging::LabeledSample;

const LN_2PI: f64 = 1.8378770664093453;

/// Fitted Gaussian NB model. Classes absent from training keep a -inf log
/// prior and never win the argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNbModel {
    pub class_log_priors: [f64; NUM_CLASSES],
    /// Per class, per feature means; unused rows are zero.
    pub means: Vec<Vec<f64>>,
    /// Per class, per feature floored variances.
    pub variances: Vec<Vec<f64>>,
    pub num_features: usize,
}

/// Fit means, variances and priors by maximum likelihood.
pub fn nb_fit(train: &[LabeledSample]) -> Result<GaussianNbModel> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit NB on an empty training set"));
    }
    let num_features = train[0].features.len();
    if train.iter().any(|s| s.features.len() != num_features) {
        return Err(Error::invalid("inconsistent feature lengths in training set"));
    }
    let mut counts = [0usize; NUM_CLASSES];
    for s in train {
        counts[s.label.code() as usize] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::invalid("NB needs at least 2 classes in training"));
    }

    let n_total = train.len() as f64;
    let mut means = vec![vec![0.0; num_features]; NUM_CLASSES];
    let mut variances = vec![vec![0.0; num_features]; NUM_CLASSES];
    for s in train {
        let row = &mut means[s.label.code() as usize];
        for (m, x) in row.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    for k in 0..NUM_CLASSES {
        if counts[k] > 0 {
            for m in &mut means[k] {
                *m /= counts[k] as f64;
            }
        }
    }
    for s in train {
        let k = s.label.code() as usize;
        for (v, (x, m)) in variances[k].iter_mut().zip(s.features.iter().zip(&means[k])) {
            *v += (x - m) * (x - m);
        }
    }
    for k in 0..NUM_CLASSES {
        if counts[k] > 0 {
            for v in &mut variances[k] {
                *v /= counts[k] as f64;
            }
        }
    }

    // Floor: 1e-9 times the largest global feature variance (1e-9 when all
    // features are constant), the Gaussian analogue of zero-frequency
    // smoothing.
    let mut global_mean = vec![0.0; num_features];
    for s in train {
        for (m, x) in global_mean.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    for m in &mut global_mean {
        *m /= n_total;
    }
    let mut max_global_var = 0.0f64;
    for f in 0..num_features {
        let var = train
            .iter()
            .map(|s| (s.features[f] - global_mean[f]).powi(2))
            .sum::<f64>()
            / n_total;
        max_global_var = max_global_var.max(var);
    }
    let floor = if max_global_var > 0.0 {
        1e-9 * max_global_var
    } else {
        1e-9
    };
    for k in 0..NUM_CLASSES {
        if counts[k] > 0 {
            for v in &mut variances[k] {
                *v = v.max(floor);
            }
        }
    }

    let mut class_log_priors = [f64::NEG_INFINITY; NUM_CLASSES];
    for k in 0..NUM_CLASSES {
        if counts[k] > 0 {
            class_log_priors[k] = (counts[k] as f64 / n_total).ln();
        }
    }
    Ok(GaussianNbModel {
        class_log_priors,
        means,
        variances,
        num_features,
    })
}

impl GaussianNbModel {
    /// Unnormalized log posterior per class: log prior plus summed log
    /// Gaussian densities (the evidence term is omitted).
    pub fn log_posterior(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if x.len() != self.num_features {
            return Err(Error::invalid(format!(
                "feature length {} does not match model ({})",
                x.len(),
                self.num_features
            )));
        }
        let mut scores = [f64::NEG_INFINITY; NUM_CLASSES];
        for k in 0..NUM_CLASSES {
            let prior = self.class_log_priors[k];
            if prior == f64::NEG_INFINITY {
                continue;
            }
            let mut score = prior;
            for ((xi, m), v) in x.iter().zip(&self.means[k]).zip(&self.variances[k]) {
                score += -0.5 * (LN_2PI + v.ln()) - (xi - m) * (xi - m) / (2.0 * v);
            }
            scores[k] = score;
        }
        Ok(scores)
    }

    /// MAP decision: argmax of the log posterior, ties to the lowest code.
    pub fn predict(&self, x: &[f64]) -> Result<FaultLabel> {
        let scores = self.log_posterior(x)?;
        Ok(argmax_label(&scores))
    }
}

/// Lowest-code argmax over per-class scores.
pub(crate) fn argmax_label(scores: &[f64; NUM_CLASSES]) -> FaultLabel {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    FaultLabel::from_code(best as u8).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::FaultInstance;

    fn sample(label: FaultLabel, features: Vec<f64>) -> LabeledSample {
        LabeledSample {
            features,
            label,
            provenance: FaultInstance {
                label,
                target_site: 0,
                target_sector: 0,
                parameter_value: 0.0,
                sample_seed: 0,
            },
        }
    }

    fn two_blob_train() -> Vec<LabeledSample> {
        vec![
            sample(FaultLabel::Normal, vec![1.0]),
            sample(FaultLabel::Normal, vec![3.0]),
            sample(FaultLabel::CellOutage, vec![5.0]),
            sample(FaultLabel::CellOutage, vec![7.0]),
        ]
    }

    #[test]
    fn fit_matches_hand_ml_estimates() {
        let model = nb_fit(&two_blob_train()).unwrap();
        assert!((model.means[0][0] - 2.0).abs() < 1e-12);
        assert!((model.means[1][0] - 6.0).abs() < 1e-12);
        assert!((model.variances[0][0] - 1.0).abs() < 1e-12);
        assert!((model.variances[1][0] - 1.0).abs() < 1e-12);
        assert!((model.class_log_priors[0] - 0.5f64.ln()).abs() < 1e-12);
        assert!((model.class_log_priors[1] - 0.5f64.ln()).abs() < 1e-12);
        let prior_sum: f64 = model
            .class_log_priors
            .iter()
            .filter(|p| p.is_finite())
            .map(|p| p.exp())
            .sum();
        assert!((prior_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_feature_gets_floored_variance() {
        let train = vec![
            sample(FaultLabel::Normal, vec![0.5, 1.0]),
            sample(FaultLabel::Normal, vec![0.5, 2.0]),
            sample(FaultLabel::TxPower, vec![0.5, 5.0]),
            sample(FaultLabel::TxPower, vec![0.5, 6.0]),
        ];
        let model = nb_fit(&train).unwrap();
        assert!(model.variances[0][0] > 0.0);
        assert_eq!(model.variances[0][0], model.variances[3][0]);
        // Scores stay finite on inputs inside [0, 1].
        let scores = model.log_posterior(&[0.5, 0.0]).unwrap();
        assert!(scores[0].is_finite() && scores[3].is_finite());
    }

    #[test]
    fn duplicating_samples_leaves_model_unchanged() {
        let train = two_blob_train();
        let doubled: Vec<LabeledSample> =
            train.iter().chain(train.iter()).cloned().collect();
        let a = nb_fit(&train).unwrap();
        let b = nb_fit(&doubled).unwrap();
        for k in [0usize, 1] {
            assert!((a.means[k][0] - b.means[k][0]).abs() < 1e-12);
            assert!((a.variances[k][0] - b.variances[k][0]).abs() < 1e-12);
            assert!((a.class_log_priors[k] - b.class_log_priors[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_rejects_single_class() {
        let train = vec![
            sample(FaultLabel::Normal, vec![1.0]),
            sample(FaultLabel::Normal, vec![2.0]),
        ];
        assert!(nb_fit(&train).is_err());
    }

    #[test]
    fn posterior_prefers_nearer_mean_and_ties_break_low() {
        let model = nb_fit(&two_blob_train()).unwrap();
        let scores = model.log_posterior(&[3.0]).unwrap();
        assert!(scores[0] > scores[1]);
        assert_eq!(model.predict(&[3.0]).unwrap(), FaultLabel::Normal);

        let scores = model.log_posterior(&[4.0]).unwrap();
        assert!((scores[0] - scores[1]).abs() < 1e-12);
        assert_eq!(model.predict(&[4.0]).unwrap(), FaultLabel::Normal);
    }

    #[test]
    fn posterior_shift_invariance() {
        let mut model = nb_fit(&two_blob_train()).unwrap();
        let before = model.log_posterior(&[2.5]).unwrap();
        let c = 1.7;
        for p in &mut model.class_log_priors {
            if p.is_finite() {
                *p += c;
            }
        }
        let after = model.log_posterior(&[2.5]).unwrap();
        for k in [0usize, 1] {
            assert!((after[k] - before[k] - c).abs() < 1e-12);
        }
        assert_eq!(model.predict(&[2.5]).unwrap(), FaultLabel::Normal);
    }

    #[test]
    fn posterior_rejects_dimension_mismatch() {
        let model = nb_fit(&two_blob_train()).unwrap();
        assert!(model.log_posterior(&[1.0, 2.0]).is_err());
        assert!(model.predict(&[]).is_err());
    }

    #[test]
    fn separated_blobs_classify_their_training_set() {
        // Three classes of 2-D blobs with means at least 6 sigma apart.
        let mut train = Vec::new();
        let centers = [
            (FaultLabel::Normal, (0.0, 0.0)),
            (FaultLabel::SiteOutage, (10.0, 0.0)),
            (FaultLabel::AntennaUptilt, (0.0, 10.0)),
        ];
        let offsets = [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)];
        for (label, (cx, cy)) in centers {
            for (dx, dy) in offsets {
                train.push(sample(label, vec![cx + dx, cy + dy]));
            }
        }
        let model = nb_fit(&train).unwrap();
        for s in &train {
            assert_eq!(model.predict(&s.features).unwrap(), s.label);
        }
    }

    #[test]
    fn scores_match_textbook_evaluation() {
        // Independent oracle: per class, prior times the product of Gaussian
        // densities, evaluated in plain probability space.
        let train = vec![
            sample(FaultLabel::Normal, vec![0.2, 0.9, 0.1]),
            sample(FaultLabel::Normal, vec![0.3, 0.8, 0.15]),
            sample(FaultLabel::Normal, vec![0.25, 0.85, 0.2]),
            sample(FaultLabel::CioPositive, vec![0.7, 0.2, 0.5]),
            sample(FaultLabel::CioPositive, vec![0.8, 0.3, 0.55]),
        ];
        let model = nb_fit(&train).unwrap();
        let x = [0.5, 0.5, 0.3];
        let scores = model.log_posterior(&x).unwrap();
        for k in [0usize, 4] {
            let n_k = if k == 0 { 3.0 } else { 2.0 };
            let prior = n_k / 5.0;
            let mut product = prior;
            for f in 0..3 {
                let m = model.means[k][f];
                let v = model.variances[k][f];
                let density =
                    (1.0 / (2.0 * std::f64::consts::PI * v).sqrt()) * (-(x[f] - m).powi(2) / (2.0 * v)).exp();
                product *= density;
            }
            assert!((scores[k] - product.ln()).abs() < 1e-9, "class {k}");
        }
    }
}
