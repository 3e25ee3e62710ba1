//! Ordinary (optionally weighted) least squares with an intercept.

use std::any::Any;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Model, PredictType, RawPrediction, TrainInput};

use super::{check_finite, feature_matrix, numeric_matrix, regr_target, weights_or_ones};

pub struct Ols;

#[derive(Debug, Clone)]
pub struct OlsModel {
    /// Intercept first.
    pub coef: Vec<f64>,
}

impl Algorithm for Ols {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let x = feature_matrix(task)?;
        check_finite(&x, input.learner.id())?;
        let y = regr_target(task)?;
        let w = weights_or_ones(input.weights, y.len());
        let p = x.first().map_or(task.n_features(), |r| r.len());
        let n = y.len();
        let a = DMatrix::from_fn(n, p + 1, |i, j| w[i].sqrt() * if j == 0 { 1.0 } else { x[i][j - 1] });
        let b = DVector::from_iterator(n, (0..n).map(|i| w[i].sqrt() * y[i]));
        let svd = a.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        let coef = svd.solve(&b, eps).map_err(|e| Error::numerical(format!("least squares failed: {e}")))?;
        Ok(Box::new(OlsModel { coef: coef.iter().copied().collect() }))
    }
}

impl Model for OlsModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, _ctx: &Ctx) -> Result<RawPrediction> {
        let x = numeric_matrix(data)?;
        let response = x
            .iter()
            .map(|r| self.coef[0] + r.iter().zip(&self.coef[1..]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(RawPrediction::Regr { response, se: None })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
