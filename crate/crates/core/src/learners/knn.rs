//! k nearest neighbours with Euclidean distance.

use std::any::Any;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Model, PredictType, RawPrediction, TrainInput};
use crate::task::TaskKind;
use crate::util::{argmax, euclid_sq};

use super::{check_finite, class_target, feature_matrix, numeric_matrix, regr_target};

pub struct Knn;

#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    x: Vec<Vec<f64>>,
    target: KnnTarget,
}

#[derive(Debug, Clone)]
enum KnnTarget {
    Classif { y: Vec<usize>, n_classes: usize },
    Regr(Vec<f64>),
}

impl Algorithm for Knn {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let k = input.usize("k")?;
        let x = feature_matrix(task)?;
        check_finite(&x, input.learner.id())?;
        if x.is_empty() {
            return Err(Error::data("no training observations"));
        }
        let target = match task.kind() {
            TaskKind::Classif => {
                let (y, n_classes) = class_target(task)?;
                KnnTarget::Classif { y, n_classes }
            }
            _ => KnnTarget::Regr(regr_target(task)?),
        };
        Ok(Box::new(KnnModel { k, x, target }))
    }
}

impl KnnModel {
    /// Indices of the k nearest training rows; distance ties keep training order.
    fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.x.iter().enumerate().map(|(i, t)| (euclid_sq(t, row), i)).collect();
        let k = self.k.min(d.len());
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

impl Model for KnnModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, _ctx: &Ctx) -> Result<RawPrediction> {
        let x = numeric_matrix(data)?;
        check_finite(&x, "knn")?;
        match &self.target {
            KnnTarget::Classif { y, n_classes } => {
                let prob: Vec<Vec<f64>> = x
                    .iter()
                    .map(|row| {
                        let nb = self.neighbours(row);
                        let mut p = vec![0.0; *n_classes];
                        for i in &nb {
                            p[y[*i]] += 1.0 / nb.len() as f64;
                        }
                        p
                    })
                    .collect();
                let response = prob.iter().map(|p| argmax(p).map(|i| i as u32)).collect();
                Ok(RawPrediction::Classif { response, prob: Some(prob) })
            }
            KnnTarget::Regr(y) => {
                let response = x
                    .iter()
                    .map(|row| {
                        let nb = self.neighbours(row);
                        nb.iter().map(|i| y[*i]).sum::<f64>() / nb.len() as f64
                    })
                    .collect();
                Ok(RawPrediction::Regr { response, se: None })
            }
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
