//! Multilabel problem transformations and per-label evaluation.

use std::any::Any;
use std::sync::Arc;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Learner, Model, PredictType, Property, RawPrediction, TrainInput};
use crate::measures::Measure;
use crate::param::ParamSet;
use crate::prediction::{Prediction, Response, Truth};
use crate::table::{Cell, Table};
use crate::task::{Task, TaskKind};
use crate::train::{raw_predict, train, WrappedModel};

/// Builds a multilabel task; every label column must be logical.
pub fn make_multilabel_task<S: AsRef<str>>(id: &str, data: Dataset, labels: &[S]) -> Result<Task> {
    Task::multilabel(id, data, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    BinaryRelevance,
    ClassifierChains,
    NestedStacking,
    Dbr,
    Stacking,
}

impl Method {
    fn suffix(self) -> &'static str {
        match self {
            Method::BinaryRelevance => "br",
            Method::ClassifierChains => "cc",
            Method::NestedStacking => "nested",
            Method::Dbr => "dbr",
            Method::Stacking => "stack",
        }
    }

    fn class(self) -> &'static str {
        match self {
            Method::BinaryRelevance => "MultilabelBinaryRelevanceWrapper",
            Method::ClassifierChains => "MultilabelClassifierChainsWrapper",
            Method::NestedStacking => "MultilabelNestedStackingWrapper",
            Method::Dbr => "MultilabelDBRWrapper",
            Method::Stacking => "MultilabelStackingWrapper",
        }
    }
}

/// Binary model of one label; constant when training saw one value only.
#[derive(Debug)]
pub enum LabelModel {
    Fitted { model: WrappedModel, true_index: usize },
    Constant(bool),
}

impl LabelModel {
    /// Probability of TRUE (when available) and the predicted flag per row.
    fn predict(&self, data: &Dataset, ctx: &Ctx) -> Result<(Vec<bool>, Option<Vec<f64>>)> {
        match self {
            LabelModel::Constant(v) => {
                Ok((vec![*v; data.n_rows()], Some(vec![if *v { 1.0 } else { 0.0 }; data.n_rows()])))
            }
            LabelModel::Fitted { model, true_index } => match raw_predict(model, data, ctx)? {
                RawPrediction::Classif { response, prob } => {
                    let p: Option<Vec<f64>> = prob.map(|p| p.iter().map(|r| r[*true_index]).collect());
                    let flags = match &p {
                        Some(p) => p.iter().map(|v| *v >= 0.5).collect(),
                        None => response.iter().map(|r| *r == Some(*true_index as u32)).collect(),
                    };
                    Ok((flags, p))
                }
                _ => Err(Error::data("label model returned a non-class prediction")),
            },
        }
    }
}

fn fit_label(base: &Learner, feats: &Dataset, y: &[bool], weights: Option<&[f64]>, id: &str, ctx: &Ctx) -> Result<LabelModel> {
    if y.iter().all(|v| *v == y[0]) {
        return Ok(LabelModel::Constant(y.first().copied().unwrap_or(false)));
    }
    let mut target = String::from("label");
    while feats.has_column(&target) {
        target.push('_');
    }
    let levels = vec!["FALSE".to_string(), "TRUE".to_string()];
    let codes = y.iter().map(|v| Some(*v as u32)).collect();
    let data = feats.with_column(Column::factor_codes(target.clone(), codes, levels)?)?;
    let task = Task::classif_with_positive(id, data, &target, "TRUE")?;
    let m = train(base, &task, None, weights, ctx)?;
    if m.is_failure() {
        return Err(Error::LearnerFailed { learner: base.id().to_string(), message: crate::train::get_failure_message(&m)? });
    }
    let true_index = m.task_desc().class_levels.iter().position(|l| l == "TRUE").expect("TRUE level");
    Ok(LabelModel::Fitted { model: m, true_index })
}

fn flag_column(name: &str, v: &[bool]) -> Column {
    Column::numeric(name, v.iter().map(|b| *b as u8 as f64).collect())
}

fn with_flags(feats: &Dataset, names: &[String], flags: &[&[bool]]) -> Result<Dataset> {
    let mut d = feats.clone();
    for (n, f) in names.iter().zip(flags) {
        d.push_column(flag_column(n, f))?;
    }
    Ok(d)
}

/// Fitted transformation. `models` and `inputs` are indexed by label in
/// task order; `inputs[j]` lists the labels appended to label j's features.
#[derive(Debug)]
pub struct MultilabelModel {
    pub method: Method,
    pub labels: Vec<String>,
    pub order: Vec<usize>,
    pub models: Vec<LabelModel>,
    inputs: Vec<Vec<usize>>,
    /// First stage for DBR and stacking.
    first: Vec<LabelModel>,
    names: Vec<String>,
}

impl MultilabelModel {
    pub fn n_models(&self) -> usize {
        self.models.len()
    }
}

fn predict_all(models: &[LabelModel], data: &Dataset, ctx: &Ctx) -> Result<Vec<(Vec<bool>, Option<Vec<f64>>)>> {
    models.iter().enumerate().map(|(j, m)| m.predict(data, &ctx.child("label", j as u64))).collect()
}

impl Model for MultilabelModel {
    fn predict(&self, data: &Dataset, pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        let n = data.n_rows();
        let l = self.labels.len();
        let mut out: Vec<Option<(Vec<bool>, Option<Vec<f64>>)>> = (0..l).map(|_| None).collect();
        match self.method {
            Method::BinaryRelevance => {
                for (j, p) in predict_all(&self.models, data, ctx)?.into_iter().enumerate() {
                    out[j] = Some(p);
                }
            }
            Method::ClassifierChains | Method::NestedStacking => {
                for &j in &self.order {
                    let prev: Vec<&[bool]> = self.inputs[j].iter().map(|&k| out[k].as_ref().unwrap().0.as_slice()).collect();
                    let names: Vec<String> = self.inputs[j].iter().map(|&k| self.names[k].clone()).collect();
                    let d = with_flags(data, &names, &prev)?;
                    out[j] = Some(self.models[j].predict(&d, &ctx.child("label", j as u64))?);
                }
            }
            Method::Dbr | Method::Stacking => {
                let first = predict_all(&self.first, data, &ctx.child("first", 0))?;
                for j in 0..l {
                    let prev: Vec<&[bool]> = self.inputs[j].iter().map(|&k| first[k].0.as_slice()).collect();
                    let names: Vec<String> = self.inputs[j].iter().map(|&k| self.names[k].clone()).collect();
                    let d = with_flags(data, &names, &prev)?;
                    out[j] = Some(self.models[j].predict(&d, &ctx.child("label", j as u64))?);
                }
            }
        }
        let out: Vec<(Vec<bool>, Option<Vec<f64>>)> = out.into_iter().map(Option::unwrap).collect();
        let response = (0..n).map(|i| out.iter().map(|o| o.0[i]).collect()).collect();
        let prob = if pt == PredictType::Prob {
            if out.iter().any(|o| o.1.is_none()) {
                return Err(Error::data("a label model returned no probabilities"));
            }
            Some((0..n).map(|i| out.iter().map(|o| o.1.as_ref().unwrap()[i]).collect()).collect())
        } else {
            None
        };
        Ok(RawPrediction::Multilabel { response, prob })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

struct Transform {
    method: Method,
    order: Option<Vec<String>>,
}

impl Algorithm for Transform {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let labels = task.targets().to_vec();
        let l = labels.len();
        let y = task.label_matrix()?;
        let cols: Vec<Vec<bool>> = (0..l).map(|j| y.iter().map(|r| r[j]).collect()).collect();
        let feats = task.data().select(&task.feature_names())?;
        let names: Vec<String> = labels
            .iter()
            .map(|n| {
                let mut s = format!("{n}.in");
                while feats.has_column(&s) {
                    s.push('_');
                }
                s
            })
            .collect();
        let order: Vec<usize> = match &self.order {
            Some(o) => {
                let idx: Vec<usize> =
                    o.iter().map(|n| labels.iter().position(|l| l == n).ok_or_else(|| Error::unknown("label", n))).collect::<Result<_>>()?;
                let mut s = idx.clone();
                s.sort_unstable();
                if s != (0..l).collect::<Vec<_>>() {
                    return Err(Error::arg("the label order must list every label once"));
                }
                idx
            }
            None => (0..l).collect(),
        };
        let base = input.learner.next().expect("wrapped learner");
        let w = input.weights;
        let ctx = input.ctx;
        let fit_br = |c: &Ctx| -> Result<Vec<LabelModel>> {
            (0..l).map(|j| fit_label(base, &feats, &cols[j], w, &labels[j], &c.child("label", j as u64))).collect()
        };
        let mut models: Vec<Option<LabelModel>> = (0..l).map(|_| None).collect();
        let mut inputs = vec![Vec::new(); l];
        let mut first = Vec::new();
        match self.method {
            Method::BinaryRelevance => {
                for (j, m) in fit_br(ctx)?.into_iter().enumerate() {
                    models[j] = Some(m);
                }
            }
            Method::ClassifierChains | Method::NestedStacking => {
                let mut seen: Vec<usize> = Vec::new();
                let mut fitted_flags: Vec<Option<Vec<bool>>> = vec![None; l];
                for &j in &order {
                    let src: Vec<&[bool]> = seen
                        .iter()
                        .map(|&k| {
                            if self.method == Method::ClassifierChains {
                                cols[k].as_slice()
                            } else {
                                fitted_flags[k].as_deref().unwrap()
                            }
                        })
                        .collect();
                    let nm: Vec<String> = seen.iter().map(|&k| names[k].clone()).collect();
                    let d = with_flags(&feats, &nm, &src)?;
                    let c = ctx.child("label", j as u64);
                    let m = fit_label(base, &d, &cols[j], w, &labels[j], &c)?;
                    if self.method == Method::NestedStacking {
                        fitted_flags[j] = Some(m.predict(&d, &c.child("insample", 0))?.0);
                    }
                    inputs[j] = seen.clone();
                    models[j] = Some(m);
                    seen.push(j);
                }
            }
            Method::Dbr | Method::Stacking => {
                first = fit_br(&ctx.child("first", 0))?;
                let src: Vec<Vec<bool>> = if self.method == Method::Dbr {
                    cols.clone()
                } else {
                    predict_all(&first, &feats, &ctx.child("insample", 0))?.into_iter().map(|p| p.0).collect()
                };
                for j in 0..l {
                    let others: Vec<usize> = if self.method == Method::Dbr { (0..l).filter(|&k| k != j).collect() } else { (0..l).collect() };
                    let flags: Vec<&[bool]> = others.iter().map(|&k| src[k].as_slice()).collect();
                    let nm: Vec<String> = others.iter().map(|&k| names[k].clone()).collect();
                    let d = with_flags(&feats, &nm, &flags)?;
                    models[j] = Some(fit_label(base, &d, &cols[j], w, &labels[j], &ctx.child("label", j as u64))?);
                    inputs[j] = others;
                }
            }
        }
        Ok(Box::new(MultilabelModel {
            method: self.method,
            labels,
            order,
            models: models.into_iter().map(Option::unwrap).collect(),
            inputs,
            first,
            names,
        }))
    }
}

/// Wraps a binary classifier into a multilabel learner. `order` only
/// matters for chains and nested stacking; it defaults to the task's label
/// order.
pub fn make_multilabel_wrapper(learner: Learner, method: Method, order: Option<Vec<String>>) -> Result<Learner> {
    if learner.kind() != TaskKind::Classif || !learner.has_property(Property::TwoClass) {
        return Err(Error::unsupported(learner.id(), "binary classification"));
    }
    let id = format!("{}.{}", learner.id(), method.suffix());
    let mut props = learner.properties().clone();
    props.retain(|p| matches!(p, Property::Numerics | Property::Factors | Property::Ordered | Property::Missings | Property::Weights | Property::Prob));
    let pt = learner.predict_type();
    Ok(Learner::from_parts(method.class(), TaskKind::Multilabel, props, ParamSet::empty(), Arc::new(Transform { method, order }), Some(learner))?
        .set_id(&id)
        .set_predict_type(pt)?)
}

pub fn make_multilabel_br_wrapper(learner: Learner) -> Result<Learner> {
    make_multilabel_wrapper(learner, Method::BinaryRelevance, None)
}

pub fn make_multilabel_cc_wrapper(learner: Learner, order: Option<Vec<String>>) -> Result<Learner> {
    make_multilabel_wrapper(learner, Method::ClassifierChains, order)
}

pub fn make_multilabel_nested_stacking_wrapper(learner: Learner, order: Option<Vec<String>>) -> Result<Learner> {
    make_multilabel_wrapper(learner, Method::NestedStacking, order)
}

pub fn make_multilabel_dbr_wrapper(learner: Learner) -> Result<Learner> {
    make_multilabel_wrapper(learner, Method::Dbr, None)
}

pub fn make_multilabel_stacking_wrapper(learner: Learner) -> Result<Learner> {
    make_multilabel_wrapper(learner, Method::Stacking, None)
}

/// Binary prediction of one label with TRUE as the positive class.
pub fn label_prediction(pred: &Prediction, j: usize) -> Result<Prediction> {
    if pred.kind != TaskKind::Multilabel {
        return Err(Error::arg("a multilabel prediction is needed"));
    }
    let truth = match &pred.truth {
        Truth::Labels(t) => Truth::Class(t.iter().map(|r| Some(r[j] as u32)).collect()),
        _ => Truth::None,
    };
    let response = match &pred.response {
        Response::Labels(r) => Response::Class(r.iter().map(|r| r.as_ref().map(|r| r[j] as u32)).collect()),
        _ => return Err(Error::arg("a multilabel prediction is needed")),
    };
    Ok(Prediction {
        kind: TaskKind::Classif,
        predict_type: pred.predict_type,
        classes: vec!["FALSE".into(), "TRUE".into()],
        positive: Some(1),
        id: pred.id.clone(),
        truth,
        response,
        prob: pred.prob.as_ref().map(|p| p.iter().map(|r| vec![1.0 - r[j], r[j]]).collect()),
        se: None,
        iter: pred.iter.clone(),
        set: pred.set.clone(),
        threshold: pred.prob.as_ref().map(|_| vec![0.5, 0.5]),
        predict_time: pred.predict_time,
    })
}

/// One row per label, one column per binary measure. Undefined values
/// (for instance auc on a label with one truth class) are missing.
pub fn multilabel_binary_performances(pred: &Prediction, measures: &[Measure]) -> Result<Table> {
    let mut t = Table::new(std::iter::once("label".to_string()).chain(measures.iter().map(|m| m.id.clone())));
    for (j, label) in pred.classes.iter().enumerate() {
        let p = label_prediction(pred, j)?;
        let mut row = vec![Cell::Str(label.clone())];
        for m in measures {
            if m.has("req.prob") && p.prob.is_none() {
                return Err(Error::arg(format!("measure '{}' needs predicted probabilities", m.id)));
            }
            let v = m.compute(&p, None, None)?;
            row.push(if v.is_nan() { Cell::Missing } else { Cell::Num(v) });
        }
        t.push(row);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::learner;
    use crate::measures::get_measure;
    use crate::train::predict_task;
    use rand::{Rng, SeedableRng};

    /// Labels driven by thresholds on the features.
    fn ml_task(n: usize, dup: bool) -> Task {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l1: Vec<Option<bool>> = x1.iter().map(|v| Some(*v > 0.0)).collect();
        let l2: Vec<Option<bool>> = if dup { l1.clone() } else { x2.iter().map(|v| Some(*v > 0.2)).collect() };
        let l3: Vec<Option<bool>> = x1.iter().zip(&x2).map(|(a, b)| Some(a + b > 0.0)).collect();
        let data = Dataset::new(vec![
            Column::numeric("x1", x1),
            Column::numeric("x2", x2),
            Column::logical("l1", l1),
            Column::logical("l2", l2),
            Column::logical("l3", l3),
        ])
        .unwrap();
        make_multilabel_task("ml", data, &["l1", "l2", "l3"]).unwrap()
    }

    #[test]
    fn task_rules() {
        let t = ml_task(20, false);
        assert_eq!(t.kind(), TaskKind::Multilabel);
        assert_eq!(t.class_levels().len(), 3);
        let d = t.data().clone();
        assert!(make_multilabel_task("bad", d.clone(), &["x1"]).is_err());
        assert_eq!(make_multilabel_task("one", d, &["l1"]).unwrap().kind(), TaskKind::Multilabel);
    }

    #[test]
    fn all_methods_fit_and_predict_in_label_order() {
        let task = ml_task(120, false);
        let ctx = Ctx::new(3);
        let ham = get_measure("multilabel.hamloss").unwrap();
        for method in [Method::BinaryRelevance, Method::ClassifierChains, Method::NestedStacking, Method::Dbr, Method::Stacking] {
            let l = make_multilabel_wrapper(learner("classif.cart").unwrap(), method, None).unwrap();
            let m = train(&l, &task, None, None, &ctx).unwrap();
            assert_eq!(m.downcast::<MultilabelModel>().unwrap().n_models(), 3);
            let p = predict_task(&m, &task, None, &ctx).unwrap();
            assert_eq!(p.classes, vec!["l1", "l2", "l3"]);
            let v = ham.compute(&p, Some(&task), None).unwrap();
            assert!(v < 0.1, "{method:?}: {v}");
        }
        assert!(make_multilabel_br_wrapper(learner("regr.ols").unwrap()).is_err());
    }

    #[test]
    fn single_label_matches_plain_learner() {
        let full = ml_task(80, false);
        let data = full.data().drop(&["l2", "l3"]).unwrap();
        let task = make_multilabel_task("one", data.clone(), &["l1"]).unwrap();
        let ctx = Ctx::new(1);
        let base = learner("classif.logreg").unwrap();
        let codes = data.column("l1").unwrap().as_logical().unwrap().iter().map(|v| v.map(|b| b as u32)).collect();
        let cdata = data.drop(&["l1"]).unwrap().with_column(Column::factor_codes("y", codes, vec!["FALSE".into(), "TRUE".into()]).unwrap()).unwrap();
        let ctask = Task::classif_with_positive("c", cdata, "y", "TRUE").unwrap();
        let plain = predict_task(&train(&base, &ctask, None, None, &ctx).unwrap(), &ctask, None, &ctx).unwrap();
        let expect: Vec<bool> = plain.class_response().unwrap().iter().map(|r| *r == Some(1)).collect();
        for method in [Method::BinaryRelevance, Method::ClassifierChains, Method::NestedStacking, Method::Dbr, Method::Stacking] {
            let l = make_multilabel_wrapper(base.clone(), method, None).unwrap();
            let p = predict_task(&train(&l, &task, None, None, &ctx).unwrap(), &task, None, &ctx).unwrap();
            let Response::Labels(r) = &p.response else { panic!() };
            let got: Vec<bool> = r.iter().map(|r| r.as_ref().unwrap()[0]).collect();
            if method == Method::Stacking {
                // stacking appends the first-stage flag of the label itself
                continue;
            }
            assert_eq!(got, expect, "{method:?}");
        }
    }

    #[test]
    fn chain_copies_duplicated_label() {
        let task = ml_task(100, true);
        let ctx = Ctx::new(2);
        let l = make_multilabel_cc_wrapper(learner("classif.cart").unwrap(), Some(vec!["l1".into(), "l2".into(), "l3".into()])).unwrap();
        let p = predict_task(&train(&l, &task, None, None, &ctx).unwrap(), &task, None, &ctx).unwrap();
        let Response::Labels(r) = &p.response else { panic!() };
        assert!(r.iter().all(|r| {
            let r = r.as_ref().unwrap();
            r[0] == r[1]
        }));
        let bad = make_multilabel_cc_wrapper(learner("classif.cart").unwrap(), Some(vec!["l1".into()])).unwrap();
        assert!(train(&bad, &task, None, None, &ctx).is_err());
    }

    #[test]
    fn binary_performances_match_hamloss() {
        let task = ml_task(90, false);
        let ctx = Ctx::new(4);
        let l = make_multilabel_br_wrapper(learner("classif.logreg").unwrap()).unwrap().set_predict_type(PredictType::Prob).unwrap();
        let p = predict_task(&train(&l, &task, None, None, &ctx).unwrap(), &task, None, &ctx).unwrap();
        let ms = [get_measure("mmce").unwrap(), get_measure("auc").unwrap()];
        let t = multilabel_binary_performances(&p, &ms).unwrap();
        assert_eq!(t.len(), 3);
        let mmce: Vec<f64> = t.column("mmce").unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
        let ham = get_measure("multilabel.hamloss").unwrap().compute(&p, None, None).unwrap();
        assert!((mmce.iter().sum::<f64>() / 3.0 - ham).abs() < 1e-12);
        let resp = make_multilabel_br_wrapper(learner("classif.logreg").unwrap()).unwrap();
        let p = predict_task(&train(&resp, &task, None, None, &ctx).unwrap(), &task, None, &ctx).unwrap();
        assert!(multilabel_binary_performances(&p, &ms).is_err());
    }
}
