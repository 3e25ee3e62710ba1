//! Baselines that ignore the features.

use std::any::Any;

use crate::data::Dataset;
use crate::error::Result;
use crate::exec::Ctx;
use crate::learner::{Algorithm, Model, PredictType, RawPrediction, TrainInput};
use crate::task::TaskKind;
use crate::util::argmax;

use super::{class_target, regr_target, weights_or_ones};

pub struct Featureless;

#[derive(Debug, Clone)]
pub enum FeaturelessModel {
    /// Weighted class proportions.
    Classif(Vec<f64>),
    Regr(f64),
}

impl Algorithm for Featureless {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let w = weights_or_ones(input.weights, task.size());
        Ok(Box::new(match task.kind() {
            TaskKind::Classif => {
                let (y, k) = class_target(task)?;
                let mut p = vec![0.0; k];
                for (c, wi) in y.iter().zip(&w) {
                    p[*c] += wi;
                }
                let tot: f64 = p.iter().sum();
                if tot > 0.0 {
                    p.iter_mut().for_each(|x| *x /= tot);
                } else {
                    p = vec![1.0 / k as f64; k];
                }
                FeaturelessModel::Classif(p)
            }
            _ => {
                let y = regr_target(task)?;
                FeaturelessModel::Regr(crate::util::weighted_mean(&y, Some(&w)))
            }
        }))
    }
}

impl Model for FeaturelessModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, _ctx: &Ctx) -> Result<RawPrediction> {
        let n = data.n_rows();
        Ok(match self {
            FeaturelessModel::Classif(p) => {
                let r = argmax(p).map(|i| i as u32);
                RawPrediction::Classif { response: vec![r; n], prob: Some(vec![p.clone(); n]) }
            }
            FeaturelessModel::Regr(m) => RawPrediction::Regr { response: vec![*m; n], se: None },
        })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
