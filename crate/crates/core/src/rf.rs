//! Decision trees and a Random Forest with Gini impurity, bootstrap
//! resampling, per-node random feature subsets and mean-decrease-in-impurity
//! feature importances.
//!
//! Split thresholds sit at midpoints between consecutive distinct sorted
//! feature values; ties prefer the lowest feature index, then the lowest
//! threshold, so fitting is fully deterministic given the seed.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fault::{FaultLabel, NUM_CLASSES};
use crate::imaging::LabeledSample;
use crate::nb::argmax_label;
use crate::rng;

/// Gini impurity of a class-count vector: 1 - sum((c/n)^2).
pub fn gini(counts: &[u64; NUM_CLASSES]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::invalid("gini of an all-zero count vector"));
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

/// One node of a fitted decision tree. Internal nodes keep their sample
/// count and impurity decrease for feature-importance accumulation.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        n_samples: u64,
        decrease: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: [u64; NUM_CLASSES],
    },
}

impl TreeNode {
    fn n_samples(&self) -> u64 {
        match self {
            TreeNode::Internal { n_samples, .. } => *n_samples,
            TreeNode::Leaf { class_counts } => class_counts.iter().sum(),
        }
    }

    /// Majority class of the leaf reached by `x`, ties to the lowest code.
    fn vote(&self, x: &[f64]) -> FaultLabel {
        match self {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if x[*feature] <= *threshold {
                    left.vote(x)
                } else {
                    right.vote(x)
                }
            }
            TreeNode::Leaf { class_counts } => {
                let mut scores = [0.0; NUM_CLASSES];
                for (s, &c) in scores.iter_mut().zip(class_counts) {
                    *s = c as f64;
                }
                argmax_label(&scores)
            }
        }
    }

    /// Longest root-to-leaf edge count.
    pub fn max_depth(&self) -> usize {
        match self {
            TreeNode::Internal { left, right, .. } => 1 + left.max_depth().max(right.max_depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }
}

/// Winning split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

/// Best split over the candidate features, or None when no split yields a
/// positive weighted Gini decrease. Samples with feature value <= threshold
/// go left.
pub fn best_split(
    x: &[&[f64]],
    y: &[FaultLabel],
    candidate_features: &[usize],
) -> Option<SplitCandidate> {
    let idx: Vec<u32> = (0..x.len() as u32).collect();
    best_split_at(x, y, &idx, candidate_features)
}

fn class_counts(y: &[FaultLabel], idx: &[u32]) -> [u64; NUM_CLASSES] {
    let mut counts = [0u64; NUM_CLASSES];
    for &i in idx {
        counts[y[i as usize].code() as usize] += 1;
    }
    counts
}

fn gini_of(counts: &[u64; NUM_CLASSES], n: f64) -> f64 {
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn best_split_at(
    x: &[&[f64]],
    y: &[FaultLabel],
    idx: &[u32],
    candidate_features: &[usize],
) -> Option<SplitCandidate> {
    let n = idx.len();
    if n < 2 {
        return None;
    }
    let parent_counts = class_counts(y, idx);
    let parent_gini = gini_of(&parent_counts, n as f64);
    if parent_gini == 0.0 {
        return None;
    }
    let mut best: Option<SplitCandidate> = None;
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &feature in candidate_features {
        column.clear();
        column.extend(
            idx.iter()
                .map(|&i| (x[i as usize][feature], y[i as usize].code())),
        );
        column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0u64; NUM_CLASSES];
        let mut right = parent_counts;
        for k in 0..n - 1 {
            let (value, code) = column[k];
            left[code as usize] += 1;
            right[code as usize] -= 1;
            let next = column[k + 1].0;
            if value == next {
                continue;
            }
            let threshold = (value + next) / 2.0;
            // The midpoint must actually separate the two runs once samples
            // are routed by `<= threshold`.
            if !(threshold >= value && threshold < next) {
                continue;
            }
            let n_l = (k + 1) as f64;
            let n_r = (n - k - 1) as f64;
            let decrease = parent_gini
                - (n_l / n as f64) * gini_of(&left, n_l)
                - (n_r / n as f64) * gini_of(&right, n_r);
            let better = match &best {
                None => decrease > 0.0,
                Some(b) => decrease > b.decrease,
            };
            if better {
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    decrease,
                });
            }
        }
    }
    best
}

/// Fit one decision tree. At every expandable node `features_per_split`
/// distinct features are drawn from the seeded stream before the split
/// search, so the tree is a pure function of (data, seed).
pub fn tree_fit(
    x: &[&[f64]],
    y: &[FaultLabel],
    max_depth: usize,
    features_per_split: usize,
    seed: u64,
) -> TreeNode {
    let num_features = x.first().map_or(0, |row| row.len());
    let mut rng = rng::stream_rng(seed, 0x7EE5);
    let idx: Vec<u32> = (0..x.len() as u32).collect();
    grow(
        x,
        y,
        idx,
        0,
        max_depth,
        features_per_split.min(num_features).max(1),
        num_features,
        &mut rng,
    )
}

#[allow(clippy::too_many_arguments)]
fn grow(
    x: &[&[f64]],
    y: &[FaultLabel],
    idx: Vec<u32>,
    depth: usize,
    max_depth: usize,
    features_per_split: usize,
    num_features: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> TreeNode {
    let counts = class_counts(y, &idx);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if depth >= max_depth || pure || idx.len() < 2 {
        return TreeNode::Leaf {
            class_counts: counts,
        };
    }
    let mut features = rand::seq::index::sample(rng, num_features, features_per_split).into_vec();
    features.sort_unstable();
    match best_split_at(x, y, &idx, &features) {
        None => TreeNode::Leaf {
            class_counts: counts,
        },
        Some(split) => {
            let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
            for &i in &idx {
                if x[i as usize][split.feature] <= split.threshold {
                    left_idx.push(i);
                } else {
                    right_idx.push(i);
                }
            }
            let n_samples = idx.len() as u64;
            drop(idx);
            let left = grow(
                x,
                y,
                left_idx,
                depth + 1,
                max_depth,
                features_per_split,
                num_features,
                rng,
            );
            let right = grow(
                x,
                y,
                right_idx,
                depth + 1,
                max_depth,
                features_per_split,
                num_features,
                rng,
            );
            TreeNode::Internal {
                feature: split.feature,
                threshold: split.threshold,
                n_samples,
                decrease: split.decrease,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features drawn per split; None means round(sqrt(num_features)).
    pub features_per_split: Option<usize>,
    /// Test hook; production forests always resample.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: 5,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    pub features_per_split: usize,
    pub max_depth: usize,
    /// Per tree, the sorted sample indices never drawn by its bootstrap.
    pub oob_indices: Vec<Vec<u32>>,
    pub seed: u64,
    pub num_features: usize,
}

pub(crate) fn bootstrap_seed(seed: u64, tree: usize) -> u64 {
    rng::mix(seed, rng::mix(0xB007, tree as u64))
}

pub(crate) fn tree_seed(seed: u64, tree: usize) -> u64 {
    rng::mix(seed, rng::mix(0x09EE, tree as u64))
}

/// Fit a forest: per tree, bootstrap n samples with replacement, record the
/// out-of-bag indices, and grow a depth-capped tree on the resample.
///
/// The bootstrap draws positional indices, so callers wanting
/// order-independent models must pass samples in a canonical order (the
/// pipeline uses manifest order).
pub fn rf_fit(train: &[LabeledSample], config: &RfConfig) -> Result<RandomForestModel> {
    if train.len() < 2 {
        return Err(Error::invalid("forest needs at least 2 training samples"));
    }
    let num_features = train[0].features.len();
    if train.iter().any(|s| s.features.len() != num_features) {
        return Err(Error::invalid("inconsistent feature lengths in training set"));
    }
    let mut classes: Vec<u8> = train.iter().map(|s| s.label.code()).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("forest needs at least 2 classes in training"));
    }
    let features_per_split = config
        .features_per_split
        .unwrap_or_else(|| (num_features as f64).sqrt().round() as usize)
        .clamp(1, num_features);

    let x: Vec<&[f64]> = train.iter().map(|s| s.features.as_slice()).collect();
    let y: Vec<FaultLabel> = train.iter().map(|s| s.label).collect();
    let n = train.len();

    let mut trees = Vec::with_capacity(config.n_trees);
    let mut oob_indices = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let (boot_x, boot_y, oob) = if config.bootstrap {
            let mut rng = rng::stream_rng(bootstrap_seed(config.seed, t), 0);
            let mut drawn = vec![false; n];
            let mut boot_x = Vec::with_capacity(n);
            let mut boot_y = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                drawn[i] = true;
                boot_x.push(x[i]);
                boot_y.push(y[i]);
            }
            let oob: Vec<u32> = (0..n as u32).filter(|&i| !drawn[i as usize]).collect();
            (boot_x, boot_y, oob)
        } else {
            (x.clone(), y.clone(), Vec::new())
        };
        trees.push(tree_fit(
            &boot_x,
            &boot_y,
            config.max_depth,
            features_per_split,
            tree_seed(config.seed, t),
        ));
        oob_indices.push(oob);
    }
    Ok(RandomForestModel {
        trees,
        features_per_split,
        max_depth: config.max_depth,
        oob_indices,
        seed: config.seed,
        num_features,
    })
}

impl RandomForestModel {
    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(Error::invalid(format!(
                "feature length {} does not match model ({})",
                x.len(),
                self.num_features
            )));
        }
        Ok(())
    }

    /// Vote shares over the 8 classes.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        self.check_dims(x)?;
        let mut votes = [0.0; NUM_CLASSES];
        for tree in &self.trees {
            votes[tree.vote(x).code() as usize] += 1.0;
        }
        for v in &mut votes {
            *v /= self.trees.len() as f64;
        }
        Ok(votes)
    }

    /// Plurality vote over the trees, ties to the lowest class code.
    pub fn predict(&self, x: &[f64]) -> Result<FaultLabel> {
        Ok(argmax_label(&self.predict_proba(x)?))
    }

    /// Mean decrease in impurity per feature, normalized to sum to 1 when
    /// any split exists.
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.num_features];
        for tree in &self.trees {
            let root_n = tree.n_samples() as f64;
            if root_n == 0.0 {
                continue;
            }
            accumulate_importance(tree, root_n, &mut total);
        }
        for v in &mut total {
            *v /= self.trees.len() as f64;
        }
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            for v in &mut total {
                *v /= sum;
            }
        }
        total
    }
}

fn accumulate_importance(node: &TreeNode, root_n: f64, out: &mut [f64]) {
    if let TreeNode::Internal {
        feature,
        n_samples,
        decrease,
        left,
        right,
        ..
    } = node
    {
        out[*feature] += (*n_samples as f64 / root_n) * decrease;
        accumulate_importance(left, root_n, out);
        accumulate_importance(right, root_n, out);
    }
}
