//! From-scratch regressors (random forest, least squares, k-neighbours,
//! lasso, ridge) and the MSE comparison harness over the campaign bundle.

mod compare;
mod forest;
mod knn;
mod linear;

pub use compare::{compare_models, ComparisonRow, ComparisonTable};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Instance, FEATURE_COUNT};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("need at least 2 training instances, got {0}")]
    TooFewInstances(usize),
    #[error("feature matrix has {x} rows but target vector has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("expected {expected}-dimensional input, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("normal-equation matrix is singular; use ridge regression instead")]
    SingularMatrix,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("non-finite value in training data")]
    NonFiniteInput,
    #[error("mse inputs must be equal-length and non-empty ({predictions} predictions, {actuals} actuals)")]
    MseShape { predictions: usize, actuals: usize },
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    RandomForest,
    LeastSquares,
    KNeighbors,
    Lasso,
    Ridge,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::RandomForest => "RF",
            ModelKind::LeastSquares => "LS",
            ModelKind::KNeighbors => "KN",
            ModelKind::Lasso => "Lasso",
            ModelKind::Ridge => "Ridge",
        }
    }
}

/// Model selection plus hyperparameters. Unused fields are ignored by the
/// respective fitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Neighbour count for KN.
    pub k: usize,
    /// Regularization strength for Lasso and Ridge.
    pub lambda: f64,
    pub trees: usize,
    pub max_depth: usize,
    pub features_per_split: usize,
    pub bootstrap_seed: u64,
}

impl ModelSpec {
    fn base(kind: ModelKind) -> Self {
        Self {
            kind,
            k: 5,
            lambda: 0.0,
            trees: 100,
            max_depth: 8,
            // ceil(7 / 3)
            features_per_split: FEATURE_COUNT.div_ceil(3),
            bootstrap_seed: 0,
        }
    }

    pub fn least_squares() -> Self {
        Self::base(ModelKind::LeastSquares)
    }

    pub fn ridge(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::base(ModelKind::Ridge)
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::base(ModelKind::Lasso)
        }
    }

    pub fn k_neighbors(k: usize) -> Self {
        Self {
            k,
            ..Self::base(ModelKind::KNeighbors)
        }
    }

    pub fn random_forest(bootstrap_seed: u64) -> Self {
        Self {
            bootstrap_seed,
            ..Self::base(ModelKind::RandomForest)
        }
    }

    /// The paper's five-model suite with default hyperparameters.
    pub fn suite(bootstrap_seed: u64) -> Vec<Self> {
        vec![
            Self::random_forest(bootstrap_seed),
            Self::least_squares(),
            Self::k_neighbors(5),
            Self::lasso(0.01),
            Self::ridge(1.0),
        ]
    }
}

/// Per-feature z-score statistics, computed on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let dim = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let mut means = vec![0.0; dim];
        for row in x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; dim];
        for row in x {
            for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            // constant features pass through unscaled
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Self { means, stds }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    /// intercept + coefficients, applied to (standardized, for Ridge/Lasso)
    /// inputs.
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    /// Standardized training points with their targets, in training order.
    Neighbors {
        points: Vec<Vec<f64>>,
        targets: Vec<f64>,
    },
    Forest { trees: Vec<forest::TreeNode> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub dim: usize,
    pub standardizer: Option<Standardizer>,
    pub params: ModelParams,
}

/// Which target column a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Noise,
    Skr,
    Qber,
}

impl Target {
    pub fn of(&self, inst: &Instance) -> f64 {
        match self {
            Target::Noise => inst.noise_rate,
            Target::Skr => inst.skr,
            Target::Qber => inst.qber,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Target::Noise => "noise",
            Target::Skr => "SKR",
            Target::Qber => "QBER",
        }
    }

    pub const ALL: [Target; 3] = [Target::Noise, Target::Skr, Target::Qber];
}

/// Fits one model to raw feature rows and targets.
pub fn fit_xy(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<FittedModel, MlError> {
    if x.len() != y.len() {
        return Err(MlError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(MlError::TooFewInstances(x.len()));
    }
    let dim = x[0].len();
    for row in x {
        if row.len() != dim {
            return Err(MlError::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
    }
    if x.iter().flatten().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFiniteInput);
    }
    match spec.kind {
        ModelKind::LeastSquares => linear::fit_least_squares(spec, x, y),
        ModelKind::Ridge => linear::fit_ridge(spec, x, y),
        ModelKind::Lasso => linear::fit_lasso(spec, x, y),
        ModelKind::KNeighbors => knn::fit(spec, x, y),
        ModelKind::RandomForest => forest::fit(spec, x, y),
    }
}

/// Fits one model to campaign instances for the given target.
pub fn fit(spec: &ModelSpec, instances: &[Instance], target: Target) -> Result<FittedModel, MlError> {
    let x: Vec<Vec<f64>> = instances.iter().map(|i| i.features.to_vec()).collect();
    let y: Vec<f64> = instances.iter().map(|i| target.of(i)).collect();
    fit_xy(spec, &x, &y)
}

impl FittedModel {
    pub fn predict(&self, features: &[f64]) -> Result<f64, MlError> {
        if features.len() != self.dim {
            return Err(MlError::DimensionMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        let input = match &self.standardizer {
            Some(s) => s.transform(features),
            None => features.to_vec(),
        };
        Ok(match &self.params {
            ModelParams::Linear {
                intercept,
                coefficients,
            } => intercept + coefficients.iter().zip(&input).map(|(c, v)| c * v).sum::<f64>(),
            ModelParams::Neighbors { points, targets } => {
                knn::predict(self.spec.k, points, targets, &input)
            }
            ModelParams::Forest { trees } => forest::predict(trees, &input),
        })
    }
}

/// Mean squared error between predictions and observations.
pub fn mse(predictions: &[f64], actuals: &[f64]) -> Result<f64, MlError> {
    if predictions.len() != actuals.len() || predictions.is_empty() {
        return Err(MlError::MseShape {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    Ok(predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / predictions.len() as f64)
}

pub const MODEL_FILE_VERSION: u32 = 1;

/// One fitted model per target, as the controller consumes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSet {
    pub noise: FittedModel,
    pub skr: FittedModel,
    pub qber: FittedModel,
}

impl PredictorSet {
    pub fn fit(spec: &ModelSpec, instances: &[Instance]) -> Result<Self, MlError> {
        Ok(Self {
            noise: fit(spec, instances, Target::Noise)?,
            skr: fit(spec, instances, Target::Skr)?,
            qber: fit(spec, instances, Target::Qber)?,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    models: PredictorSet,
}

pub fn save_models(models: &PredictorSet, path: &Path) -> Result<(), MlError> {
    let file = ModelFile {
        format_version: MODEL_FILE_VERSION,
        models: models.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| MlError::ModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, json).map_err(|e| MlError::ModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_models(path: &Path) -> Result<PredictorSet, MlError> {
    let text = std::fs::read_to_string(path).map_err(|e| MlError::ModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| MlError::ModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if file.format_version != MODEL_FILE_VERSION {
        return Err(MlError::ModelFile {
            path: path.display().to_string(),
            message: format!("unsupported format version {}", file.format_version),
        });
    }
    Ok(file.models)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[0.0, 2.0]).unwrap(), 0.5);
        let a = mse(&[1.0, 2.0], &[0.0, 4.0]).unwrap();
        let b = mse(&[3.0, 6.0], &[0.0, 12.0]).unwrap();
        assert!((b - 9.0 * a).abs() < 1e-12);
        assert!(mse(&[1.0], &[]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.5]];
        let y = vec![1.0, 2.0, 3.0];
        let model = fit_xy(&ModelSpec::least_squares(), &x, &y).unwrap();
        assert!(matches!(
            model.predict(&[1.0]),
            Err(MlError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(matches!(
            fit_xy(&ModelSpec::least_squares(), &[vec![1.0]], &[1.0]),
            Err(MlError::TooFewInstances(1))
        ));
        assert!(matches!(
            fit_xy(&ModelSpec::least_squares(), &[vec![1.0]], &[1.0, 2.0]),
            Err(MlError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![1.0, 3.0, 5.0];
        let m = fit_xy(&ModelSpec::least_squares(), &x, &y).unwrap();
        let set = PredictorSet {
            noise: m.clone(),
            skr: m.clone(),
            qber: m,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("models.json");
        save_models(&set, &path).unwrap();
        assert_eq!(load_models(&path).unwrap(), set);
    }
}
