//! Per-model, per-target MSE over the campaign's validation sets, against a
//! predict-training-mean baseline.

use serde::{Deserialize, Serialize};

use super::{fit, mse, MlError, ModelSpec, Target};
use crate::dataset::DatasetBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub mse_noise: f64,
    pub mse_skr: f64,
    pub mse_qber: f64,
}

impl ComparisonRow {
    pub fn for_target(&self, target: Target) -> f64 {
        match target {
            Target::Noise => self.mse_noise,
            Target::Skr => self.mse_skr,
            Target::Qber => self.mse_qber,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// One row per model, in spec order; the baseline row is last.
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn baseline(&self) -> &ComparisonRow {
        self.rows.last().expect("table always has a baseline row")
    }

    pub fn model_rows(&self) -> &[ComparisonRow] {
        &self.rows[..self.rows.len() - 1]
    }

    /// Fixed-width table in the style of a model-comparison figure.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>16} {:>16} {:>16}\n",
            "model", "MSE(noise)", "MSE(SKR)", "MSE(QBER)"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>16.6e} {:>16.6e} {:>16.6e}\n",
                row.model, row.mse_noise, row.mse_skr, row.mse_qber
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,mse_noise,mse_skr,mse_qber\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                row.model, row.mse_noise, row.mse_skr, row.mse_qber
            ));
        }
        out
    }
}

/// Fits every spec on each training set and scores it on the matching
/// validation set; reports the MSE averaged over sets, per target.
pub fn compare_models(
    bundle: &DatasetBundle,
    specs: &[ModelSpec],
) -> Result<ComparisonTable, MlError> {
    let set_count = bundle.training.len();
    let mut rows = Vec::with_capacity(specs.len() + 1);
    for spec in specs {
        let mut sums = [0.0f64; 3];
        for s in 0..set_count {
            for (t_idx, target) in Target::ALL.iter().enumerate() {
                let model = fit(spec, &bundle.training[s], *target)?;
                let preds: Vec<f64> = bundle.validation[s]
                    .iter()
                    .map(|i| model.predict(&i.features))
                    .collect::<Result<_, _>>()?;
                let actuals: Vec<f64> =
                    bundle.validation[s].iter().map(|i| target.of(i)).collect();
                sums[t_idx] += mse(&preds, &actuals)?;
            }
        }
        rows.push(ComparisonRow {
            model: spec.kind.label().to_string(),
            mse_noise: sums[0] / set_count as f64,
            mse_skr: sums[1] / set_count as f64,
            mse_qber: sums[2] / set_count as f64,
        });
    }

    // predict-training-mean baseline
    let mut sums = [0.0f64; 3];
    for s in 0..set_count {
        for (t_idx, target) in Target::ALL.iter().enumerate() {
            let train = &bundle.training[s];
            let mean =
                train.iter().map(|i| target.of(i)).sum::<f64>() / train.len() as f64;
            let preds = vec![mean; bundle.validation[s].len()];
            let actuals: Vec<f64> = bundle.validation[s].iter().map(|i| target.of(i)).collect();
            sums[t_idx] += mse(&preds, &actuals)?;
        }
    }
    rows.push(ComparisonRow {
        model: "baseline".to_string(),
        mse_noise: sums[0] / set_count as f64,
        mse_skr: sums[1] / set_count as f64,
        mse_qber: sums[2] / set_count as f64,
    });
    Ok(ComparisonTable { rows })
}
