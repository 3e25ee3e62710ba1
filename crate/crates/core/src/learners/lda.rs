//! Linear discriminant analysis with a pooled, ridge-stabilised covariance.

use std::any::Any;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Model, PredictType, RawPrediction, TrainInput};
use crate::util::argmax;

use super::{check_finite, class_target, feature_matrix, numeric_matrix};

pub struct Lda;

#[derive(Debug, Clone)]
pub struct LdaModel {
    /// Per class: coefficient vector and constant of the linear discriminant.
    /// Classes absent from the training data have no discriminant.
    discriminants: Vec<Option<(DVector<f64>, f64)>>,
}

impl Algorithm for Lda {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let ridge = input.f64("ridge")?;
        let x = feature_matrix(task)?;
        check_finite(&x, input.learner.id())?;
        let (y, k) = class_target(task)?;
        let n = x.len();
        let p = x.first().map_or(0, |r| r.len());
        let mut counts = vec![0usize; k];
        let mut means = vec![DVector::<f64>::zeros(p); k];
        for (row, c) in x.iter().zip(&y) {
            counts[*c] += 1;
            means[*c] += DVector::from_column_slice(row);
        }
        for (m, c) in means.iter_mut().zip(&counts) {
            if *c > 0 {
                *m /= *c as f64;
            }
        }
        let present = counts.iter().filter(|c| **c > 0).count();
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for (row, c) in x.iter().zip(&y) {
            let d = DVector::from_column_slice(row) - &means[*c];
            cov += &d * d.transpose();
        }
        let dof = n.saturating_sub(present).max(1);
        cov /= dof as f64;
        for i in 0..p {
            cov[(i, i)] += ridge;
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::numerical("pooled covariance is singular; increase 'ridge'"))?;
        let discriminants = (0..k)
            .map(|c| {
                if counts[c] == 0 {
                    return None;
                }
                let a = chol.solve(&means[c]);
                let prior = counts[c] as f64 / n as f64;
                let b = -0.5 * means[c].dot(&a) + prior.ln();
                Some((a, b))
            })
            .collect();
        Ok(Box::new(LdaModel { discriminants }))
    }
}

impl LdaModel {
    fn posterior(&self, row: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(row);
        let scores: Vec<Option<f64>> =
            self.discriminants.iter().map(|d| d.as_ref().map(|(a, b)| a.dot(&x) + b)).collect();
        let max = scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| (s - max).exp())).collect();
        let tot: f64 = e.iter().sum();
        e.into_iter().map(|v| v / tot).collect()
    }
}

impl Model for LdaModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, _ctx: &Ctx) -> Result<RawPrediction> {
        let x = numeric_matrix(data)?;
        check_finite(&x, "classif.lda")?;
        let prob: Vec<Vec<f64>> = x.iter().map(|r| self.posterior(r)).collect();
        let response = prob.iter().map(|p| argmax(p).map(|i| i as u32)).collect();
        Ok(RawPrediction::Classif { response, prob: Some(prob) })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
