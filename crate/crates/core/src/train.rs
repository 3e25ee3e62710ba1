//! Fitting learners on tasks and predicting with the fitted models.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use crate::data::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Learner, Model, OnLearnerError, PredictType, Property, RawPrediction, TrainInput};
use crate::prediction::{apply_threshold, default_threshold, Prediction, Response, Truth};
use crate::task::{subset_task, Task, TaskDesc, TaskKind};

#[derive(Clone)]
enum ModelState {
    Fitted(Arc<dyn Model>),
    Failure(String),
}

/// A learner together with what it learned from a task.
#[derive(Clone)]
pub struct WrappedModel {
    learner: Learner,
    state: ModelState,
    task_desc: TaskDesc,
    subset: Vec<usize>,
    features: Vec<String>,
    factor_levels: BTreeMap<String, Vec<String>>,
    train_time: f64,
}

impl fmt::Debug for WrappedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WrappedModel")
            .field("learner", &self.learner.id())
            .field("task", &self.task_desc.id)
            .field("failure", &self.failure_message())
            .field("features", &self.features)
            .finish()
    }
}

impl fmt::Display for WrappedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Model for learner.id={}; learner.class={}", self.learner.id(), self.learner.class_name())?;
        writeln!(
            f,
            "Trained on: task.id = {}; obs = {}; features = {}",
            self.task_desc.id,
            self.subset.len(),
            self.features.len()
        )?;
        write!(f, "Hyperparameters: {}", crate::param::format_config(&self.learner.hyperpars(), &[]))
    }
}

impl WrappedModel {
    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn task_desc(&self) -> &TaskDesc {
        &self.task_desc
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn factor_levels(&self) -> &BTreeMap<String, Vec<String>> {
        &self.factor_levels
    }

    pub fn train_time(&self) -> f64 {
        self.train_time
    }

    pub fn is_failure(&self) -> bool {
        matches!(self.state, ModelState::Failure(_))
    }

    fn failure_message(&self) -> Option<&str> {
        match &self.state {
            ModelState::Failure(m) => Some(m),
            ModelState::Fitted(_) => None,
        }
    }

    /// The underlying fitted model; fails for failure models.
    pub fn learner_model(&self) -> Result<&dyn Model> {
        match &self.state {
            ModelState::Fitted(m) => Ok(m.as_ref()),
            ModelState::Failure(msg) => Err(Error::LearnerFailed {
                learner: self.learner.id().to_string(),
                message: msg.clone(),
            }),
        }
    }

    /// Downcasts the fitted model to a concrete type.
    pub fn downcast<T: 'static>(&self) -> Option<&T> {
        self.learner_model().ok().and_then(|m| m.as_any().downcast_ref::<T>())
    }

    /// The model fitted by the wrapped learner, for wrapper models.
    pub fn next_model(&self) -> Option<&WrappedModel> {
        self.learner_model().ok().and_then(|m| m.next_model())
    }

    /// Searches the wrapper chain (outermost first) for a model of type `T`.
    pub fn find<T: 'static>(&self) -> Option<&T> {
        let mut cur = Some(self);
        while let Some(m) = cur {
            if let Some(t) = m.downcast::<T>() {
                return Some(t);
            }
            cur = m.next_model();
        }
        None
    }

    pub fn feature_importance(&self) -> Result<BTreeMap<String, f64>> {
        if !self.learner.has_property(Property::FeatImp) {
            return Err(Error::unsupported(self.learner.id(), "feature importance"));
        }
        let imp = self
            .learner_model()?
            .feature_importance()
            .ok_or_else(|| Error::unsupported(self.learner.id(), "feature importance"))?;
        Ok(self.features.iter().map(|f| (f.clone(), imp.get(f).copied().unwrap_or(0.0))).collect())
    }
}

pub fn is_failure_model(model: &WrappedModel) -> bool {
    model.is_failure()
}

pub fn get_failure_message(model: &WrappedModel) -> Result<String> {
    model
        .failure_message()
        .map(str::to_string)
        .ok_or_else(|| Error::arg("model is not a failure model"))
}

/// Fits `learner` on the rows `subset` of `task` (all rows if `None`).
/// Explicit `weights` (one per training row) take precedence over task weights.
pub fn train(
    learner: &Learner,
    task: &Task,
    subset: Option<&[usize]>,
    weights: Option<&[f64]>,
    ctx: &Ctx,
) -> Result<WrappedModel> {
    learner.check_task(task)?;
    let subset: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..task.size()).collect(),
    };
    let train_task = if subset.len() == task.size() && subset.iter().enumerate().all(|(i, &j)| i == j) {
        task.clone()
    } else {
        subset_task::<&str>(task, Some(&subset), None)?
    };
    let weights: Option<Vec<f64>> = match weights {
        Some(w) => {
            if !learner.has_property(Property::Weights) {
                return Err(Error::unsupported(learner.id(), "observation weights"));
            }
            if w.len() != subset.len() {
                return Err(Error::arg(format!(
                    "got {} weights for {} training observations",
                    w.len(),
                    subset.len()
                )));
            }
            Some(w.to_vec())
        }
        None => match train_task.weights() {
            Some(w) if learner.has_property(Property::Weights) => Some(w.to_vec()),
            Some(_) => {
                log::warn!("task weights are ignored by learner '{}'", learner.id());
                None
            }
            None => None,
        },
    };
    let features = train_task.feature_names();
    let factor_levels = features
        .iter()
        .filter_map(|f| {
            let c = train_task.data().column(f).ok()?;
            c.levels().map(|l| (f.clone(), l.to_vec()))
        })
        .collect();
    let input = TrainInput { learner, task: &train_task, weights: weights.as_deref(), ctx };
    let start = Instant::now();
    let fitted = learner.algorithm().train(&input);
    let train_time = start.elapsed().as_secs_f64();
    let state = match fitted {
        Ok(m) => ModelState::Fitted(Arc::from(m)),
        Err(e) => match learner.config().on_learner_error {
            OnLearnerError::Stop => {
                return Err(match e {
                    Error::LearnerFailed { .. } => e,
                    other => Error::LearnerFailed { learner: learner.id().to_string(), message: other.to_string() },
                })
            }
            OnLearnerError::Warn => {
                let msg = e.to_string();
                log::warn!("could not train learner {}: {msg}", learner.id());
                ModelState::Failure(msg)
            }
        },
    };
    Ok(WrappedModel {
        learner: learner.clone(),
        state,
        task_desc: task.desc(),
        subset,
        features,
        factor_levels,
        train_time,
    })
}

/// Where the rows to predict come from.
#[derive(Clone, Copy, Debug)]
pub enum PredictInput<'a> {
    Task { task: &'a Task, subset: Option<&'a [usize]> },
    NewData(&'a Dataset),
}

/// Brings new data into the shape seen during training: the trained feature
/// columns in training order with factors recoded to the training levels.
/// Unseen levels become missing.
pub fn prepare_features(model: &WrappedModel, data: &Dataset) -> Result<Dataset> {
    let mut cols = Vec::with_capacity(model.features.len());
    for f in &model.features {
        let col = data
            .column(f)
            .map_err(|_| Error::data(format!("feature '{f}' used for training is missing from the new data")))?;
        match model.factor_levels.get(f) {
            Some(levels) if col.levels().is_some_and(|l| l != levels.as_slice()) => {
                let (c, unseen) = col.recode_levels(levels)?;
                if unseen > 0 {
                    log::debug!("{unseen} values of '{f}' have levels not seen during training");
                }
                cols.push(c);
            }
            Some(levels) if matches!(col.data(), ColumnData::Numeric(_)) => {
                return Err(Error::data(format!(
                    "feature '{f}' was a factor with levels {levels:?} during training but is numeric now"
                )))
            }
            _ => cols.push(col.clone()),
        }
    }
    Dataset::with_rows(cols, data.n_rows())
}

fn truth_of(task_desc: &TaskDesc, data: &Dataset) -> Result<Truth> {
    let targets = &task_desc.targets;
    if targets.is_empty() || targets.iter().any(|t| !data.has_column(t)) {
        return Ok(Truth::None);
    }
    Ok(match task_desc.kind {
        TaskKind::Classif => {
            let col = data.column(&targets[0])?;
            let (col, _) = col.recode_levels(&task_desc.class_levels)?;
            Truth::Class(col.codes().unwrap().to_vec())
        }
        TaskKind::Regr => Truth::Regr(data.column(&targets[0])?.to_f64()),
        TaskKind::Multilabel => {
            let cols: Vec<&[Option<bool>]> = targets
                .iter()
                .map(|t| data.column(t).map(|c| c.as_logical().unwrap_or(&[])))
                .collect::<Result<_>>()?;
            Truth::Labels((0..data.n_rows()).map(|i| cols.iter().map(|c| c[i].unwrap_or(false)).collect()).collect())
        }
        _ => Truth::None,
    })
}

/// Predicts with a fitted model on task rows or on new data.
pub fn predict(model: &WrappedModel, input: PredictInput<'_>, ctx: &Ctx) -> Result<Prediction> {
    let (data, ids) = match input {
        PredictInput::Task { task, subset } => match subset {
            Some(s) => (task.data().subset_rows(s)?, Some(s.to_vec())),
            None => (task.data().clone(), Some((0..task.size()).collect())),
        },
        PredictInput::NewData(d) => (d.clone(), None),
    };
    let desc = &model.task_desc;
    let truth = truth_of(desc, &data)?;
    let n = data.n_rows();
    let learner = &model.learner;
    let pt = learner.predict_type();
    let classes = desc.class_levels.clone();
    let positive = desc.positive_index();
    let k = classes.len();
    let mut pred = Prediction {
        kind: desc.kind,
        predict_type: pt,
        classes,
        positive,
        id: ids,
        truth,
        response: Response::Class(Vec::new()),
        prob: None,
        se: None,
        iter: None,
        set: None,
        threshold: None,
        predict_time: None,
    };
    let fitted = match &model.state {
        ModelState::Failure(_) => {
            pred.response = match desc.kind {
                TaskKind::Regr => Response::Regr(vec![f64::NAN; n]),
                TaskKind::Multilabel => Response::Labels(vec![None; n]),
                _ => Response::Class(vec![None; n]),
            };
            if pt == PredictType::Prob {
                pred.prob = Some(vec![vec![f64::NAN; k]; n]);
                if matches!(desc.kind, TaskKind::Classif) {
                    pred.threshold = Some(default_threshold(k, positive));
                }
            }
            if pt == PredictType::Se {
                pred.se = Some(vec![f64::NAN; n]);
            }
            return Ok(pred);
        }
        ModelState::Fitted(m) => m.clone(),
    };
    let feats = prepare_features(model, &data)?;
    if !learner.has_property(Property::Missings) && feats.has_missing() {
        return Err(Error::unsupported(learner.id(), "missing values (or factor levels unseen during training)"));
    }
    let start = Instant::now();
    let raw = fitted.predict(&feats, pt, ctx)?;
    pred.predict_time = Some(start.elapsed().as_secs_f64());
    if raw.len() != n {
        return Err(Error::LearnerFailed {
            learner: learner.id().to_string(),
            message: format!("predicted {} rows for {n} inputs", raw.len()),
        });
    }
    match raw {
        RawPrediction::Classif { response, prob } => {
            match (pt, prob) {
                (PredictType::Prob, Some(prob)) => {
                    let th = fitted.threshold().unwrap_or_else(|| default_threshold(k, positive));
                    pred.response = Response::Class(prob.iter().map(|r| apply_threshold(r, &th, positive)).collect());
                    pred.prob = Some(prob);
                    pred.threshold = Some(th);
                }
                (PredictType::Prob, None) => {
                    return Err(Error::LearnerFailed {
                        learner: learner.id().to_string(),
                        message: "model returned no probabilities".into(),
                    })
                }
                _ => pred.response = Response::Class(response),
            }
        }
        RawPrediction::Cluster { response, prob } => {
            pred.response = Response::Class(response);
            if pt == PredictType::Prob {
                pred.prob = prob;
            }
        }
        RawPrediction::Regr { response, se } => {
            pred.response = Response::Regr(response);
            if pt == PredictType::Se {
                pred.se = Some(se.ok_or_else(|| Error::LearnerFailed {
                    learner: learner.id().to_string(),
                    message: "model returned no standard errors".into(),
                })?);
            }
        }
        RawPrediction::Multilabel { response, prob } => {
            match (pt, prob) {
                (PredictType::Prob, Some(prob)) => {
                    let th = vec![0.5; k];
                    pred.response =
                        Response::Labels(prob.iter().map(|r| Some(r.iter().map(|p| *p >= 0.5).collect())).collect());
                    pred.prob = Some(prob);
                    pred.threshold = Some(th);
                }
                _ => pred.response = Response::Labels(response.into_iter().map(Some).collect()),
            }
        }
    }
    Ok(pred)
}

pub fn predict_task(model: &WrappedModel, task: &Task, subset: Option<&[usize]>, ctx: &Ctx) -> Result<Prediction> {
    predict(model, PredictInput::Task { task, subset }, ctx)
}

pub fn predict_newdata(model: &WrappedModel, data: &Dataset, ctx: &Ctx) -> Result<Prediction> {
    predict(model, PredictInput::NewData(data), ctx)
}

/// Trains the next learner of a wrapper, forwarding the wrapper's context.
pub(crate) fn train_next(input: &TrainInput<'_>, task: &Task, weights: Option<&[f64]>) -> Result<WrappedModel> {
    let next = input.learner.next().ok_or_else(|| Error::arg("wrapper has no wrapped learner"))?;
    let m = train(next, task, None, weights, input.ctx)?;
    match &m.state {
        ModelState::Failure(msg) => {
            Err(Error::LearnerFailed { learner: next.id().to_string(), message: msg.clone() })
        }
        ModelState::Fitted(_) => Ok(m),
    }
}

/// Runs a model on already prepared features and returns the raw output.
/// Wrapper models use this to call their wrapped model.
pub(crate) fn raw_predict(model: &WrappedModel, data: &Dataset, ctx: &Ctx) -> Result<RawPrediction> {
    let fitted = model.learner_model()?;
    let feats = prepare_features(model, data)?;
    let pt = model.learner.predict_type();
    fitted.predict(&feats, pt, ctx)
}
