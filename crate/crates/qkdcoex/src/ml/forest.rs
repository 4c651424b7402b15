//! Bootstrap-aggregated regression trees with variance-reduction splits.
//! Fitting is deterministic given the spec's bootstrap seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FittedModel, MlError, ModelParams, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn eval(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.eval(row)
                } else {
                    right.eval(row)
                }
            }
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
}

/// Exact best split over the sampled features: sort by feature value, then
/// scan split positions with prefix sums of y and y^2.
fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    indices: &[usize],
    features: &[usize],
) -> Option<BestSplit> {
    let n = indices.len();
    let mut best: Option<BestSplit> = None;
    for &feature in features {
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
        let total_sum: f64 = sorted.iter().map(|&i| y[i]).sum();
        let total_sq: f64 = sorted.iter().map(|&i| y[i] * y[i]).sum();
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for pos in 1..n {
            let prev = sorted[pos - 1];
            left_sum += y[prev];
            left_sq += y[prev] * y[prev];
            let (lo, hi) = (x[prev][feature], x[sorted[pos]][feature]);
            if lo == hi {
                continue;
            }
            let nl = pos as f64;
            let nr = (n - pos) as f64;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
            if best.as_ref().is_none_or(|b| sse < b.sse) {
                best = Some(BestSplit {
                    feature,
                    threshold: 0.5 * (lo + hi),
                    sse,
                });
            }
        }
    }
    best
}

fn grow(
    x: &[Vec<f64>],
    y: &[f64],
    indices: &[usize],
    depth: usize,
    spec: &ModelSpec,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let mean = indices.iter().map(|&i| y[i]).sum::<f64>() / indices.len() as f64;
    if depth >= spec.max_depth || indices.len() < 2 {
        return TreeNode::Leaf { value: mean };
    }
    let dim = x[0].len();
    let mut candidates: Vec<usize> = (0..dim).collect();
    candidates.shuffle(rng);
    candidates.truncate(spec.features_per_split.clamp(1, dim));
    candidates.sort_unstable();
    let Some(split) = best_split(x, y, indices, &candidates) else {
        return TreeNode::Leaf { value: mean };
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x[i][split.feature] <= split.threshold);
    // the midpoint can round onto an endpoint, emptying one side
    if left_idx.is_empty() || right_idx.is_empty() {
        return TreeNode::Leaf { value: mean };
    }
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(x, y, &left_idx, depth + 1, spec, rng)),
        right: Box::new(grow(x, y, &right_idx, depth + 1, spec, rng)),
    }
}

pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<FittedModel, MlError> {
    if spec.trees == 0 || spec.max_depth == 0 || spec.features_per_split == 0 {
        return Err(MlError::InvalidHyperparameter(
            "forest needs trees >= 1, max_depth >= 1, features_per_split >= 1".into(),
        ));
    }
    let n = x.len();
    let mut trees = Vec::with_capacity(spec.trees);
    for t in 0..spec.trees {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.bootstrap_seed.wrapping_add(t as u64));
        let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        trees.push(grow(x, y, &sample, 0, spec, &mut rng));
    }
    Ok(FittedModel {
        spec: spec.clone(),
        dim: x[0].len(),
        standardizer: None,
        params: ModelParams::Forest { trees },
    })
}

pub fn predict(trees: &[TreeNode], row: &[f64]) -> f64 {
    trees.iter().map(|t| t.eval(row)).sum::<f64>() / trees.len() as f64
}
