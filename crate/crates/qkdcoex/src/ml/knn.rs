//! K-neighbours regression on z-scored features, Euclidean distance, ties
//! broken by lowest training index.

use super::{FittedModel, MlError, ModelParams, ModelSpec, Standardizer};

pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<FittedModel, MlError> {
    if spec.k == 0 {
        return Err(MlError::InvalidHyperparameter(
            "k must be at least 1".into(),
        ));
    }
    let standardizer = Standardizer::fit(x);
    Ok(FittedModel {
        spec: spec.clone(),
        dim: x[0].len(),
        standardizer: Some(standardizer.clone()),
        params: ModelParams::Neighbors {
            points: standardizer.transform_all(x),
            targets: y.to_vec(),
        },
    })
}

/// Mean target of the k nearest stored points. `query` is already
/// standardized by the caller.
pub fn predict(k: usize, points: &[Vec<f64>], targets: &[f64], query: &[f64]) -> f64 {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let d2: f64 = p
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, idx)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = k.min(order.len());
    order[..k].iter().map(|&(_, idx)| targets[idx]).sum::<f64>() / k as f64
}
