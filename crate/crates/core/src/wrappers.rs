//! Learner wrappers: bagging, overbagging, over- and undersampling, SMOTE,
//! class weighting, preprocessing and downsampling.

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde_json::Value;

use crate::data::{Column, ColumnData, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Learner, Model, PredictType, Property, RawPrediction, TrainInput};
use crate::param::{Param, ParamMap, ParamSet, ParamValue};
use crate::task::{subset_task, Task, TaskKind};
use crate::train::{raw_predict, train_next, WrappedModel};
use crate::util::{argmax, mean, round_count, sample_with, sample_without, sd};

/// Trains the wrapped learner on `rows` (repeats allowed) and, optionally, a
/// feature subset of the wrapper's training task.
fn train_on_rows(input: &TrainInput<'_>, task: &Task, rows: &[usize], features: Option<&[String]>, ctx: &Ctx) -> Result<WrappedModel> {
    let sub = subset_task(task, Some(rows), features)?;
    let w: Option<Vec<f64>> = input.weights.map(|w| rows.iter().map(|&i| w[i]).collect());
    let inner = TrainInput { learner: input.learner, task: input.task, weights: input.weights, ctx };
    train_next(&inner, &sub, w.as_deref())
}

fn wrap(class: &str, suffix: &str, learner: Learner, params: ParamSet, algo: Arc<dyn Algorithm>, props: Option<crate::learner::Properties>) -> Result<Learner> {
    let id = format!("{}.{suffix}", learner.id());
    let (kind, pt) = (learner.kind(), learner.predict_type());
    let props = props.unwrap_or_else(|| learner.properties().clone());
    Learner::from_parts(class, kind, props, params, algo, Some(learner))?.set_id(&id).set_predict_type(pt)
}

// ---------------------------------------------------------------------------
// Ensembles

/// Fitted members of a bagged ensemble.
#[derive(Debug)]
pub struct EnsembleModel {
    pub members: Vec<WrappedModel>,
    kind: TaskKind,
    n_classes: usize,
}

impl EnsembleModel {
    /// Member predictions: class votes or numeric responses per row.
    fn member_predictions(&self, data: &Dataset, ctx: &Ctx) -> Result<Vec<RawPrediction>> {
        self.members.iter().enumerate().map(|(i, m)| raw_predict(m, data, &ctx.child("member", i as u64))).collect()
    }
}

impl Model for EnsembleModel {
    fn predict(&self, data: &Dataset, pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        let preds = self.member_predictions(data, ctx)?;
        let n = data.n_rows();
        match self.kind {
            TaskKind::Classif => {
                let mut votes = vec![vec![0.0; self.n_classes]; n];
                for p in &preds {
                    let RawPrediction::Classif { response, .. } = p else {
                        return Err(Error::data("bagged member returned a non-class prediction"));
                    };
                    for (row, r) in votes.iter_mut().zip(response) {
                        if let Some(k) = r {
                            row[*k as usize] += 1.0;
                        }
                    }
                }
                let response = votes.iter().map(|v| argmax(v).filter(|&k| v[k] > 0.0).map(|k| k as u32)).collect();
                let prob = (pt == PredictType::Prob).then(|| {
                    votes
                        .iter()
                        .map(|v| {
                            let s: f64 = v.iter().sum();
                            v.iter().map(|c| if s > 0.0 { c / s } else { f64::NAN }).collect()
                        })
                        .collect()
                });
                Ok(RawPrediction::Classif { response, prob })
            }
            TaskKind::Regr => {
                let mut cols: Vec<&[f64]> = Vec::new();
                for p in &preds {
                    let RawPrediction::Regr { response, .. } = p else {
                        return Err(Error::data("bagged member returned a non-numeric prediction"));
                    };
                    cols.push(response);
                }
                let per_row: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
                let response = per_row.iter().map(|v| mean(v)).collect();
                let se = (pt == PredictType::Se).then(|| per_row.iter().map(|v| if v.len() > 1 { sd(v) } else { 0.0 }).collect());
                Ok(RawPrediction::Regr { response, se })
            }
            k => Err(Error::unsupported("ensemble", format!("{k} tasks"))),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

fn ensemble_props(learner: &Learner) -> crate::learner::Properties {
    let mut p = learner.properties().clone();
    match learner.kind() {
        TaskKind::Classif => {
            p.insert(Property::Prob);
        }
        TaskKind::Regr => {
            p.insert(Property::Se);
        }
        _ => {}
    }
    p
}

fn check_response_base(learner: &Learner) -> Result<()> {
    if learner.predict_type() != PredictType::Response {
        return Err(Error::arg(format!("the base learner '{}' must have predict type 'response'", learner.id())));
    }
    if !matches!(learner.kind(), TaskKind::Classif | TaskKind::Regr) {
        return Err(Error::unsupported(learner.id(), "ensembles outside classification and regression"));
    }
    Ok(())
}

struct Bagging;

impl Algorithm for Bagging {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let iters = input.usize("bw.iters")?;
        let replace = input.bool("bw.replace")?;
        let size = match input.value("bw.size").and_then(|v| v.as_f64()) {
            Some(s) => s,
            None if replace => 1.0,
            None => 2.0 / 3.0,
        };
        let feats_rate = input.f64("bw.feats")?;
        if !(feats_rate > 0.0 && feats_rate <= 1.0) {
            return Err(Error::param("bw.feats must lie in (0, 1]"));
        }
        let task = input.task;
        let n = task.size();
        let all: Vec<usize> = (0..n).collect();
        let features = task.feature_names();
        let k = round_count(size, n).max(1);
        let p = round_count(feats_rate, features.len()).max(1).min(features.len());
        let mut members = Vec::with_capacity(iters);
        for i in 0..iters {
            let c = input.ctx.child("bag", i as u64);
            let mut rng = c.rng();
            let rows = if replace { sample_with(&all, k, &mut rng) } else { sample_without(&all, k.min(n), &mut rng) };
            let idx = sample_without(&(0..features.len()).collect::<Vec<_>>(), p, &mut rng);
            let mut idx = idx;
            idx.sort_unstable();
            let feats: Vec<String> = idx.iter().map(|&j| features[j].clone()).collect();
            members.push(train_on_rows(input, task, &rows, Some(&feats), &c)?);
        }
        Ok(Box::new(EnsembleModel { members, kind: task.kind(), n_classes: task.class_levels().len() }))
    }

    fn forwards_predict_type(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaggingOptions {
    pub iters: usize,
    pub replace: bool,
    /// Fraction of rows per member; 1 with replacement and 2/3 without when
    /// unset.
    pub size: Option<f64>,
    pub feats: f64,
}

impl Default for BaggingOptions {
    fn default() -> Self {
        BaggingOptions { iters: 10, replace: true, size: None, feats: 2.0 / 3.0 }
    }
}

pub fn make_bagging_wrapper(learner: Learner, opts: BaggingOptions) -> Result<Learner> {
    check_response_base(&learner)?;
    if !(opts.feats > 0.0 && opts.feats <= 1.0) {
        return Err(Error::arg("bw.feats must lie in (0, 1]"));
    }
    let ps = ParamSet::new(vec![
        Param::integer("bw.iters", 1, i64::MAX).with_default(10),
        Param::logical("bw.replace").with_default(true),
        Param::numeric("bw.size", 0.0, f64::INFINITY),
        Param::numeric("bw.feats", 0.0, 1.0).with_default(2.0 / 3.0),
    ])?;
    let props = ensemble_props(&learner);
    let mut l = wrap("BaggingWrapper", "bagged", learner, ps, Arc::new(Bagging), Some(props))?
        .set_hyperpar("bw.iters", opts.iters)?
        .set_hyperpar("bw.replace", opts.replace)?
        .set_hyperpar("bw.feats", opts.feats)?;
    if let Some(s) = opts.size {
        l = l.set_hyperpar("bw.size", s)?;
    }
    Ok(l)
}

/// Index of the smaller class of a binary task (ties: the positive class).
fn minority_class(task: &Task) -> Result<usize> {
    let counts = task.class_counts();
    if counts.len() != 2 {
        return Err(Error::arg("a binary classification task is needed"));
    }
    Ok(if counts[1] < counts[0] { 1 } else { 0 })
}

fn rows_of_class(task: &Task, k: usize) -> Result<Vec<usize>> {
    Ok(task.class_codes()?.iter().enumerate().filter(|(_, c)| **c == Some(k as u32)).map(|(i, _)| i).collect())
}

/// All rows of `rows` plus copies drawn with replacement up to
/// round(rate * len).
fn grow<R: Rng + ?Sized>(rows: &[usize], rate: f64, rng: &mut R) -> Vec<usize> {
    let target = round_count(rate, rows.len());
    let mut out = rows.to_vec();
    if target > rows.len() && !rows.is_empty() {
        out.extend(sample_with(rows, target - rows.len(), rng));
    }
    out
}

struct OverBagging;

impl Algorithm for OverBagging {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let rate = input.f64("obw.rate")?;
        if rate < 1.0 {
            return Err(Error::param("obw.rate must be at least 1"));
        }
        let iters = input.usize("obw.iters")?;
        let boot = input.value("obw.maxcl").and_then(|v| v.as_str().map(|s| s == "boot")).unwrap_or(false);
        let task = input.task;
        let min = minority_class(task)?;
        let min_rows = rows_of_class(task, min)?;
        let maj_rows = rows_of_class(task, 1 - min)?;
        let mut members = Vec::with_capacity(iters);
        for i in 0..iters {
            let c = input.ctx.child("overbag", i as u64);
            let mut rng = c.rng();
            let mut rows = grow(&min_rows, rate, &mut rng);
            if boot {
                rows.extend(sample_with(&maj_rows, maj_rows.len(), &mut rng));
            } else {
                rows.extend(&maj_rows);
            }
            rows.sort_unstable();
            members.push(train_on_rows(input, task, &rows, None, &c)?);
        }
        Ok(Box::new(EnsembleModel { members, kind: task.kind(), n_classes: 2 }))
    }

    fn forwards_predict_type(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MajorityMode {
    All,
    Boot,
}

pub fn make_overbagging_wrapper(learner: Learner, rate: f64, iters: usize, maxcl: MajorityMode) -> Result<Learner> {
    check_response_base(&learner)?;
    if learner.kind() != TaskKind::Classif {
        return Err(Error::arg("overbagging needs a classification learner"));
    }
    if rate < 1.0 {
        return Err(Error::arg("obw.rate must be at least 1"));
    }
    let ps = ParamSet::new(vec![
        Param::numeric("obw.rate", 1.0, f64::INFINITY).with_default(1.0),
        Param::integer("obw.iters", 1, i64::MAX).with_default(10),
        Param::discrete("obw.maxcl", vec!["all", "boot"]).with_default("boot"),
    ])?;
    let props = ensemble_props(&learner);
    wrap("OverBaggingWrapper", "overbagged", learner, ps, Arc::new(OverBagging), Some(props))?
        .set_hyperpar("obw.rate", rate)?
        .set_hyperpar("obw.iters", iters)?
        .set_hyperpar("obw.maxcl", if maxcl == MajorityMode::All { "all" } else { "boot" })
}

// ---------------------------------------------------------------------------
// Over- and undersampling

fn class_index(task: &Task, cl: Option<&str>, default: impl Fn(&[usize]) -> usize) -> Result<usize> {
    let levels = task.class_levels();
    if task.kind() != TaskKind::Classif {
        return Err(Error::arg("sampling needs a classification task"));
    }
    match cl {
        Some(c) => levels.iter().position(|l| l == c).ok_or_else(|| Error::unknown("class", c)),
        None => Ok(default(&task.class_counts())),
    }
}

fn smallest(counts: &[usize]) -> usize {
    (0..counts.len()).min_by_key(|&k| (counts[k], k)).unwrap_or(0)
}

fn largest(counts: &[usize]) -> usize {
    (0..counts.len()).max_by_key(|&k| (counts[k], std::cmp::Reverse(k))).unwrap_or(0)
}

fn oversample_rows(task: &Task, rate: f64, cl: Option<&str>, ctx: &Ctx) -> Result<Vec<usize>> {
    if rate < 1.0 {
        return Err(Error::arg("the oversampling rate must be at least 1"));
    }
    let k = class_index(task, cl, smallest)?;
    let cls = rows_of_class(task, k)?;
    let mut rng = ctx.child("oversample", 0).rng();
    let mut rows: Vec<usize> = (0..task.size()).filter(|i| !cls.contains(i)).collect();
    rows.extend(grow(&cls, rate, &mut rng));
    rows.sort_unstable();
    Ok(rows)
}

fn undersample_rows(task: &Task, rate: f64, cl: Option<&str>, ctx: &Ctx) -> Result<Vec<usize>> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::arg("the undersampling rate must lie in (0, 1]"));
    }
    let k = class_index(task, cl, largest)?;
    let cls = rows_of_class(task, k)?;
    let mut rng = ctx.child("undersample", 0).rng();
    let keep = round_count(rate, cls.len());
    let mut rows: Vec<usize> = (0..task.size()).filter(|i| !cls.contains(i)).collect();
    rows.extend(sample_without(&cls, keep, &mut rng));
    rows.sort_unstable();
    Ok(rows)
}

/// Grows class `cl` (default: the smallest) to round(rate * n_cl) rows by
/// keeping every original row and adding copies drawn with replacement.
pub fn oversample(task: &Task, rate: f64, cl: Option<&str>, ctx: &Ctx) -> Result<Task> {
    task.subset_rows(&oversample_rows(task, rate, cl, ctx)?)
}

/// Shrinks class `cl` (default: the largest) to round(rate * n_cl) rows
/// drawn without replacement.
pub fn undersample(task: &Task, rate: f64, cl: Option<&str>, ctx: &Ctx) -> Result<Task> {
    task.subset_rows(&undersample_rows(task, rate, cl, ctx)?)
}

struct Sampling {
    over: bool,
    cl: Option<String>,
}

impl Algorithm for Sampling {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let prefix = if self.over { "osw" } else { "usw" };
        let rate = input.f64(&format!("{prefix}.rate"))?;
        let c = input.ctx.child("sampling", 0);
        let rows = if self.over {
            oversample_rows(input.task, rate, self.cl.as_deref(), &c)?
        } else {
            undersample_rows(input.task, rate, self.cl.as_deref(), &c)?
        };
        let inner = train_on_rows(input, input.task, &rows, None, input.ctx)?;
        Ok(Box::new(PassModel { inner }))
    }
}

/// Wrapper model whose prediction is that of the wrapped model.
#[derive(Debug)]
pub struct PassModel {
    inner: WrappedModel,
}

impl Model for PassModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        raw_predict(&self.inner, data, ctx)
    }

    fn threshold(&self) -> Option<Vec<f64>> {
        self.inner.learner_model().ok().and_then(|m| m.threshold())
    }

    fn feature_importance(&self) -> Option<BTreeMap<String, f64>> {
        self.inner.feature_importance().ok()
    }

    fn next_model(&self) -> Option<&WrappedModel> {
        Some(&self.inner)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

fn sampling_wrapper(learner: Learner, over: bool, rate: f64, cl: Option<&str>) -> Result<Learner> {
    if learner.kind() != TaskKind::Classif {
        return Err(Error::arg("sampling wrappers need a classification learner"));
    }
    let (prefix, suffix, class) = if over { ("osw", "oversampled", "OversampleWrapper") } else { ("usw", "undersampled", "UndersampleWrapper") };
    let rate_param = if over {
        if rate < 1.0 {
            return Err(Error::arg("the oversampling rate must be at least 1"));
        }
        Param::numeric(&format!("{prefix}.rate"), 1.0, f64::INFINITY)
    } else {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::arg("the undersampling rate must lie in (0, 1]"));
        }
        Param::numeric(&format!("{prefix}.rate"), 0.0, 1.0)
    };
    // class labels are only known at training time, so the class is fixed here
    let ps = ParamSet::new(vec![rate_param.with_default(1.0)])?;
    let algo = Arc::new(Sampling { over, cl: cl.map(str::to_string) });
    wrap(class, suffix, learner, ps, algo, None)?.set_hyperpar(&format!("{prefix}.rate"), rate)
}

pub fn make_oversample_wrapper(learner: Learner, rate: f64, cl: Option<&str>) -> Result<Learner> {
    sampling_wrapper(learner, true, rate, cl)
}

pub fn make_undersample_wrapper(learner: Learner, rate: f64, cl: Option<&str>) -> Result<Learner> {
    sampling_wrapper(learner, false, rate, cl)
}

// ---------------------------------------------------------------------------
// SMOTE

/// Gower distance between rows a and b: numeric |diff| / range, category
/// mismatch 0/1; dimensions missing in either row are skipped.
fn gower(cols: &[(Vec<f64>, Option<f64>)], a: usize, b: usize) -> f64 {
    let (mut s, mut m) = (0.0, 0usize);
    for (x, range) in cols {
        let (u, v) = (x[a], x[b]);
        if u.is_nan() || v.is_nan() {
            continue;
        }
        m += 1;
        s += match range {
            Some(r) if *r > 0.0 => (u - v).abs() / r,
            Some(_) => 0.0,
            None => (u != v) as u8 as f64,
        };
    }
    if m == 0 { f64::INFINITY } else { s / m as f64 }
}

/// Adds round((rate - 1) * n_min) synthetic rows of the smaller class of a
/// binary task, each interpolated between a random minority row and one of
/// its `nn` nearest minority neighbours.
pub fn smote(task: &Task, rate: f64, nn: usize, ctx: &Ctx) -> Result<Task> {
    if rate < 1.0 {
        return Err(Error::arg("the SMOTE rate must be at least 1"));
    }
    let min = minority_class(task)?;
    let min_rows = rows_of_class(task, min)?;
    if nn == 0 || nn >= min_rows.len() {
        return Err(Error::arg(format!("nn must lie in 1..{} for {} minority rows", min_rows.len(), min_rows.len())));
    }
    let n_new = round_count(rate - 1.0, min_rows.len());
    if n_new == 0 {
        return Ok(task.clone());
    }
    let features = task.feature_names();
    let data = task.data();
    let cols: Vec<(Vec<f64>, Option<f64>)> = features
        .iter()
        .map(|f| {
            let c = data.column(f).expect("feature");
            let x = c.to_f64();
            let range = (c.kind() == ColumnKind::Numeric).then(|| {
                let (lo, hi) = x.iter().filter(|v| !v.is_nan()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
                if hi > lo { hi - lo } else { 0.0 }
            });
            (x, range)
        })
        .collect();
    let neighbours: Vec<Vec<usize>> = min_rows
        .iter()
        .map(|&a| {
            let mut d: Vec<(f64, usize)> = min_rows.iter().filter(|&&b| b != a).map(|&b| (gower(&cols, a, b), b)).collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.into_iter().take(nn).map(|(_, b)| b).collect()
        })
        .collect();
    let mut rng = ctx.child("smote", 0).rng();
    let mut seeds = Vec::with_capacity(n_new);
    let mut partners = Vec::with_capacity(n_new);
    let mut steps = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let s = rng.random_range(0..min_rows.len());
        seeds.push(min_rows[s]);
        partners.push(neighbours[s][rng.random_range(0..nn)]);
        steps.push(rng.random::<f64>());
    }
    let mut syn = data.subset_rows(&seeds)?;
    for f in &features {
        let c = data.column(f)?;
        let new = match c.data() {
            ColumnData::Numeric(v) => ColumnData::Numeric(
                (0..n_new)
                    .map(|i| {
                        let (a, b) = (v[seeds[i]], v[partners[i]]);
                        if b.is_nan() { a } else { a + steps[i] * (b - a) }
                    })
                    .collect(),
            ),
            ColumnData::Factor { codes, levels, ordered } => ColumnData::Factor {
                codes: (0..n_new).map(|i| if rng.random::<bool>() { codes[seeds[i]] } else { codes[partners[i]] }).collect(),
                levels: levels.clone(),
                ordered: *ordered,
            },
            ColumnData::Logical(v) => ColumnData::Logical(
                (0..n_new).map(|i| if rng.random::<bool>() { v[seeds[i]] } else { v[partners[i]] }).collect(),
            ),
        };
        syn.push_column(Column::new(f.clone(), new)?)?;
    }
    let all = data.rbind(&syn)?;
    let weights = task.weights().map(|w| w.iter().copied().chain(seeds.iter().map(|&s| w[s])).collect());
    let t = task.with_weights(None)?.with_data(all)?;
    t.with_weights(weights)
}

struct Smote;

impl Algorithm for Smote {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let rate = input.f64("sw.rate")?;
        let nn = input.usize("sw.nn")?;
        let base = match input.weights {
            Some(w) => input.task.with_weights(Some(w.to_vec()))?,
            None => input.task.with_weights(None)?,
        };
        let task = smote(&base, rate, nn, &input.ctx.child("smote", 0))?;
        let w = task.weights().map(<[f64]>::to_vec);
        let inner = train_next(input, &task, w.as_deref())?;
        Ok(Box::new(PassModel { inner }))
    }
}

pub fn make_smote_wrapper(learner: Learner, rate: f64, nn: usize) -> Result<Learner> {
    if learner.kind() != TaskKind::Classif {
        return Err(Error::arg("SMOTE needs a classification learner"));
    }
    let ps = ParamSet::new(vec![
        Param::numeric("sw.rate", 1.0, f64::INFINITY).with_default(1.0),
        Param::integer("sw.nn", 1, i64::MAX).with_default(5),
    ])?;
    wrap("SMOTEWrapper", "smoted", learner, ps, Arc::new(Smote), None)?.set_hyperpar("sw.rate", rate)?.set_hyperpar("sw.nn", nn)
}

// ---------------------------------------------------------------------------
// Class weights

#[derive(Clone, Debug, PartialEq)]
pub enum ClassWeight {
    /// Weight of the positive class of a binary task; the other class gets 1.
    Positive(f64),
    /// One weight per class in class level order.
    PerClass(Vec<f64>),
}

struct WeightedClasses;

impl Algorithm for WeightedClasses {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let levels = task.class_levels();
        let w: Vec<f64> = match (input.value("wcw.weight").and_then(|v| v.as_f64()), input.value("wcw.weights").and_then(|v| v.as_vec())) {
            (Some(s), None) => {
                let pos = task.desc().positive_index().ok_or_else(|| Error::arg("a scalar class weight needs a binary task; give one weight per class"))?;
                (0..levels.len()).map(|k| if k == pos { s } else { 1.0 }).collect()
            }
            (None, Some(v)) if v.len() == levels.len() => v,
            (None, Some(v)) => return Err(Error::param(format!("got {} class weights for {} classes", v.len(), levels.len()))),
            _ => return Err(Error::param("set exactly one of wcw.weight and wcw.weights")),
        };
        let next = input.learner.next().ok_or_else(|| Error::arg("wrapper has no wrapped learner"))?;
        if next.has_property(Property::ClassWeights) && next.param_set().contains("class.weights") {
            let lrn = next.clone().set_hyperpar("class.weights", w)?;
            let inner = crate::train::train(&lrn, task, None, input.weights, input.ctx)?;
            if inner.is_failure() {
                return Err(Error::LearnerFailed { learner: next.id().to_string(), message: crate::train::get_failure_message(&inner)? });
            }
            return Ok(Box::new(PassModel { inner }));
        }
        let codes = task.class_codes()?;
        let base = input.weights.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; task.size()]);
        let obs: Vec<f64> = codes.iter().zip(&base).map(|(c, b)| b * c.map_or(1.0, |c| w[c as usize])).collect();
        let inner = train_next(input, task, Some(&obs))?;
        Ok(Box::new(PassModel { inner }))
    }
}

pub fn make_weighted_classes_wrapper(learner: Learner, weight: ClassWeight) -> Result<Learner> {
    if learner.kind() != TaskKind::Classif {
        return Err(Error::arg("class weighting needs a classification learner"));
    }
    if !learner.has_property(Property::Weights) && !learner.has_property(Property::ClassWeights) {
        return Err(Error::unsupported(learner.id(), "observation or class weights"));
    }
    let ps = ParamSet::new(vec![
        Param::numeric("wcw.weight", 0.0, f64::INFINITY),
        Param::numeric_vector("wcw.weights", None, 0.0, f64::INFINITY),
    ])?;
    let l = wrap("WeightedClassesWrapper", "weighted", learner, ps, Arc::new(WeightedClasses), None)?;
    match weight {
        ClassWeight::Positive(w) => l.set_hyperpar("wcw.weight", w),
        ClassWeight::PerClass(v) => l.set_hyperpar("wcw.weights", v),
    }
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Training hook: (data incl. target, target names, arguments) to transformed
/// data and a control object.
pub type PreprocTrainFn = Arc<dyn Fn(&Dataset, &[String], &ParamMap) -> Result<(Dataset, Value)> + Send + Sync>;
/// Prediction hook: (feature data, target names, arguments, control) to
/// transformed data.
pub type PreprocPredictFn = Arc<dyn Fn(&Dataset, &[String], &ParamMap, &Value) -> Result<Dataset> + Send + Sync>;

struct Preproc {
    train_fn: PreprocTrainFn,
    predict_fn: PreprocPredictFn,
}

#[derive(Debug)]
pub struct PreprocModel {
    pub control: Value,
    args: ParamMap,
    targets: Vec<String>,
    predict_fn: PredictHook,
    inner: WrappedModel,
}

#[derive(Clone)]
struct PredictHook(PreprocPredictFn);

impl fmt::Debug for PredictHook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PredictHook")
    }
}

fn own_args(input: &TrainInput<'_>) -> ParamMap {
    input
        .learner
        .own_param_set()
        .ids()
        .into_iter()
        .filter_map(|id| input.value(&id).map(|v| (id, v)))
        .collect()
}

impl Algorithm for Preproc {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let args = own_args(input);
        let targets = input.task.targets().to_vec();
        let (data, control) = (self.train_fn)(input.task.data(), &targets, &args)?;
        if control.is_null() {
            return Err(Error::data("the preprocessing training hook returned no control"));
        }
        let task = input.task.with_data(data)?;
        let inner = train_next(input, &task, input.weights)?;
        Ok(Box::new(PreprocModel { control, args, targets, predict_fn: PredictHook(self.predict_fn.clone()), inner }))
    }
}

impl Model for PreprocModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        let d = (self.predict_fn.0)(data, &self.targets, &self.args, &self.control)?;
        raw_predict(&self.inner, &d, ctx)
    }

    fn threshold(&self) -> Option<Vec<f64>> {
        self.inner.learner_model().ok().and_then(|m| m.threshold())
    }

    fn next_model(&self) -> Option<&WrappedModel> {
        Some(&self.inner)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Runs `train_fn` on the training data before fitting and `predict_fn` on
/// new data before predicting. The hooks see the values of `par_set`.
pub fn make_preproc_wrapper(
    learner: Learner,
    train_fn: PreprocTrainFn,
    predict_fn: PreprocPredictFn,
    par_set: ParamSet,
    par_vals: &ParamMap,
) -> Result<Learner> {
    let id = format!("{}.preproc", learner.id());
    let (kind, props, pt) = (learner.kind(), learner.properties().clone(), learner.predict_type());
    Learner::from_parts("PreprocWrapper", kind, props, par_set, Arc::new(Preproc { train_fn, predict_fn }), Some(learner))?
        .set_id(&id)
        .set_predict_type(pt)?
        .set_hyperpars(par_vals)
}

fn numeric_features(data: &Dataset, targets: &[String]) -> Vec<String> {
    data.columns()
        .iter()
        .filter(|c| c.kind() == ColumnKind::Numeric && !targets.iter().any(|t| t == c.name()))
        .map(|c| c.name().to_string())
        .collect()
}

fn column_stats(x: &[f64]) -> (f64, f64) {
    let obs: Vec<f64> = x.iter().copied().filter(|v| !v.is_nan()).collect();
    (mean(&obs), if obs.len() > 1 { sd(&obs) } else { 0.0 })
}

fn apply_scale(data: &Dataset, control: &Value) -> Result<Dataset> {
    let mut out = data.clone();
    let map = control.as_object().ok_or_else(|| Error::data("malformed scaling control"))?;
    for (name, v) in map {
        let m = v[0].as_f64().unwrap_or(0.0);
        let s = v[1].as_f64().unwrap_or(1.0);
        let x = data.column(name)?.to_f64();
        out.push_column(Column::numeric(name.clone(), x.iter().map(|v| (v - m) / s).collect()))?;
    }
    Ok(out)
}

/// Centers and/or scales numeric features with training means and standard
/// deviations. Tunable parameters "center" and "scale".
pub fn make_preproc_wrapper_scale(learner: Learner, center: bool, scale: bool) -> Result<Learner> {
    let train_fn: PreprocTrainFn = Arc::new(|data: &Dataset, targets: &[String], args: &ParamMap| {
        let center = args.get("center").and_then(|v| v.as_bool()).unwrap_or(true);
        let scale = args.get("scale").and_then(|v| v.as_bool()).unwrap_or(true);
        let mut control = serde_json::Map::new();
        for name in numeric_features(data, targets) {
            let (m, s) = column_stats(&data.column(&name)?.to_f64());
            let m = if center { m } else { 0.0 };
            let s = if scale && s > 0.0 { s } else { 1.0 };
            control.insert(name, serde_json::json!([m, s]));
        }
        let control = Value::Object(control);
        Ok((apply_scale(data, &control)?, control))
    });
    let predict_fn: PreprocPredictFn = Arc::new(|data: &Dataset, _t: &[String], _a: &ParamMap, control: &Value| apply_scale(data, control));
    let ps = ParamSet::new(vec![Param::logical("center").with_default(true), Param::logical("scale").with_default(true)])?;
    let vals = crate::param::param_map([("center", ParamValue::Bool(center)), ("scale", ParamValue::Bool(scale))]);
    Ok(make_preproc_wrapper(learner, train_fn, predict_fn, ps, &vals)?.set_id_suffix("scaled"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PcaComponents {
    /// Smallest number of components whose cumulative variance share
    /// reaches the threshold.
    Threshold(f64),
    Count(usize),
}

/// Standardization and rotation learned by PCA.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PcaControl {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// loadings[c][j]: weight of input column j in component c.
    pub loadings: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

/// Fits PCA on the standardized columns.
pub fn fit_pca(data: &Dataset, columns: &[String], comps: PcaComponents) -> Result<PcaControl> {
    let p = columns.len();
    match comps {
        PcaComponents::Threshold(t) if !(t > 0.0 && t <= 1.0) => return Err(Error::arg("thresh must lie in (0, 1]")),
        PcaComponents::Count(k) if k > p || k == 0 => return Err(Error::arg(format!("cannot keep {k} of {p} components"))),
        _ => {}
    }
    let n = data.n_rows();
    let raw: Vec<Vec<f64>> = columns.iter().map(|c| data.column(c).map(|c| c.to_f64())).collect::<Result<_>>()?;
    if raw.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::unsupported("pca", "missing values"));
    }
    let stats: Vec<(f64, f64)> = raw.iter().map(|x| column_stats(x)).collect();
    let z = DMatrix::from_fn(n, p, |i, j| {
        let (m, s) = stats[j];
        (raw[j][i] - m) / if s > 0.0 { s } else { 1.0 }
    });
    let cov = (z.transpose() * &z) / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vars: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let total: f64 = vars.iter().sum();
    let m = match comps {
        PcaComponents::Count(k) => k,
        PcaComponents::Threshold(t) => {
            let mut acc = 0.0;
            let mut m = p;
            for (i, v) in vars.iter().enumerate() {
                acc += v;
                if total == 0.0 || acc / total >= t - 1e-12 {
                    m = i + 1;
                    break;
                }
            }
            m
        }
    };
    let loadings = order[..m]
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // sign convention: the largest absolute weight is positive
            let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaControl {
        columns: columns.to_vec(),
        means: stats.iter().map(|s| s.0).collect(),
        sds: stats.iter().map(|s| if s.1 > 0.0 { s.1 } else { 1.0 }).collect(),
        loadings,
        variances: vars[..m].to_vec(),
    })
}

impl PcaControl {
    /// Replaces the input columns with component scores PC1, PC2, ...
    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        let raw: Vec<Vec<f64>> = self.columns.iter().map(|c| data.column(c).map(|c| c.to_f64())).collect::<Result<_>>()?;
        let n = data.n_rows();
        let mut out = data.drop(&self.columns)?;
        for (c, w) in self.loadings.iter().enumerate() {
            let scores = (0..n)
                .map(|i| w.iter().enumerate().map(|(j, wj)| wj * (raw[j][i] - self.means[j]) / self.sds[j]).sum())
                .collect();
            out.push_column(Column::numeric(format!("PC{}", c + 1), scores))?;
        }
        Ok(out)
    }
}

pub fn make_preproc_wrapper_pca(learner: Learner, comps: PcaComponents) -> Result<Learner> {
    if let PcaComponents::Threshold(t) = comps {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::arg("thresh must lie in (0, 1]"));
        }
    }
    let train_fn: PreprocTrainFn = Arc::new(move |data: &Dataset, targets: &[String], _a: &ParamMap| {
        let cols = numeric_features(data, targets);
        let ctl = fit_pca(data, &cols, comps)?;
        Ok((ctl.transform(data)?, serde_json::to_value(&ctl)?))
    });
    let predict_fn: PreprocPredictFn = Arc::new(|data: &Dataset, _t: &[String], _a: &ParamMap, control: &Value| {
        let ctl: PcaControl = serde_json::from_value(control.clone())?;
        ctl.transform(data)
    });
    Ok(make_preproc_wrapper(learner, train_fn, predict_fn, ParamSet::empty(), &ParamMap::new())?.set_id_suffix("pca"))
}

trait IdSuffix {
    fn set_id_suffix(self, suffix: &str) -> Learner;
}

impl IdSuffix for Learner {
    fn set_id_suffix(self, suffix: &str) -> Learner {
        let base = self.next().map_or_else(|| self.id().to_string(), |n| n.id().to_string());
        self.set_id(&format!("{base}.{suffix}"))
    }
}

// ---------------------------------------------------------------------------
// Downsampling

struct Downsample;

impl Algorithm for Downsample {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let perc = input.f64("dw.perc")?;
        if !(perc > 0.0 && perc <= 1.0) {
            return Err(Error::param("dw.perc must lie in (0, 1]"));
        }
        let n = input.task.size();
        let k = round_count(perc, n).max(1);
        let mut rows = sample_without(&(0..n).collect::<Vec<_>>(), k, &mut input.ctx.child("downsample", 0).rng());
        rows.sort_unstable();
        let inner = train_on_rows(input, input.task, &rows, None, input.ctx)?;
        Ok(Box::new(PassModel { inner }))
    }
}

/// Trains on a uniform sample of round(perc * n) training rows.
pub fn make_downsample_wrapper(learner: Learner, perc: f64) -> Result<Learner> {
    if !(perc > 0.0 && perc <= 1.0) {
        return Err(Error::arg("dw.perc must lie in (0, 1]"));
    }
    let ps = ParamSet::new(vec![Param::numeric("dw.perc", 0.0, 1.0).with_default(1.0)])?;
    wrap("DownsampleWrapper", "downsampled", learner, ps, Arc::new(Downsample), None)?.set_hyperpar("dw.perc", perc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{imbalanced_task, iris_task, linear_regr_task};
    use crate::learner::learner;
    use crate::train::{predict_task, train};

    fn ctx() -> Ctx {
        Ctx::new(5)
    }

    #[test]
    fn bagging_featureless_matches_base() {
        let task = iris_task();
        let base = learner("classif.featureless").unwrap();
        let bag = make_bagging_wrapper(base.clone(), BaggingOptions { iters: 3, ..Default::default() })
            .unwrap()
            .set_predict_type(PredictType::Prob)
            .unwrap();
        let m = train(&bag, &task, None, None, &ctx()).unwrap();
        let p = predict_task(&m, &task, None, &ctx()).unwrap();
        for row in p.prob.as_ref().unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let rt = linear_regr_task(30, 0.1, 1);
        let rb = make_bagging_wrapper(learner("regr.featureless").unwrap(), BaggingOptions { iters: 4, replace: false, size: Some(1.0), feats: 1.0 })
            .unwrap()
            .set_predict_type(PredictType::Se)
            .unwrap();
        let rp = predict_task(&train(&rb, &rt, None, None, &ctx()).unwrap(), &rt, None, &ctx()).unwrap();
        assert!(rp.se.unwrap().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn bagging_rejects_prob_base_and_inherits_weights() {
        let base = learner("classif.cart").unwrap();
        assert!(make_bagging_wrapper(base.clone().set_predict_type(PredictType::Prob).unwrap(), BaggingOptions::default()).is_err());
        let w = make_bagging_wrapper(base, BaggingOptions::default()).unwrap();
        assert!(w.has_property(Property::Weights));
        assert!(w.param_set().contains("bw.iters") && w.param_set().contains("minsplit"));
        assert!(make_bagging_wrapper(learner("classif.cart").unwrap(), BaggingOptions { feats: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn over_and_undersampling_counts() {
        let task = imbalanced_task(100, 5000, 1);
        let o = oversample(&task, 8.0, None, &ctx()).unwrap();
        assert_eq!(o.class_counts(), vec![800, 5000]);
        let u = undersample(&task, 1.0 / 8.0, None, &ctx()).unwrap();
        assert_eq!(u.class_counts(), vec![100, 625]);
        assert_eq!(oversample(&task, 1.0, None, &ctx()).unwrap().class_counts(), vec![100, 5000]);
        assert!(oversample(&task, 0.5, None, &ctx()).is_err());
        assert!(undersample(&task, 1.5, None, &ctx()).is_err());
        let s = smote(&task, 8.0, 5, &ctx()).unwrap();
        assert_eq!(s.class_counts(), vec![800, 5000]);
    }

    #[test]
    fn smote_interpolates_between_neighbours() {
        let task = imbalanced_task(20, 40, 2);
        let s = smote(&task, 3.0, 3, &ctx()).unwrap();
        let x1 = task.data().column("x1").unwrap().as_numeric().unwrap();
        let min_rows = rows_of_class(&task, 0).unwrap();
        let (lo, hi) = min_rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(x1[i]), b.max(x1[i])));
        let sx = s.data().column("x1").unwrap().as_numeric().unwrap();
        assert!(sx[60..].iter().all(|v| *v >= lo && *v <= hi));
        assert!(smote(&task, 2.0, 20, &ctx()).is_err());
    }

    #[test]
    fn weighted_classes_unit_weight_is_identity() {
        let task = imbalanced_task(30, 60, 3);
        let base = learner("classif.logreg").unwrap();
        let w = make_weighted_classes_wrapper(base.clone(), ClassWeight::Positive(1.0)).unwrap();
        let p1 = predict_task(&train(&w, &task, None, None, &ctx()).unwrap(), &task, None, &ctx()).unwrap();
        let p2 = predict_task(&train(&base, &task, None, None, &ctx()).unwrap(), &task, None, &ctx()).unwrap();
        assert_eq!(p1.response, p2.response);
        assert!(make_weighted_classes_wrapper(learner("classif.knn").unwrap(), ClassWeight::Positive(2.0)).is_err());
    }

    #[test]
    fn scale_wrapper_centres_training_data() {
        let task = linear_regr_task(50, 0.1, 4);
        let w = make_preproc_wrapper_scale(learner("regr.ols").unwrap(), true, true).unwrap();
        let m = train(&w, &task, None, None, &ctx()).unwrap();
        let pm = m.downcast::<PreprocModel>().unwrap();
        let scaled = apply_scale(task.data(), &pm.control).unwrap();
        let x = scaled.column("x1").unwrap().as_numeric().unwrap();
        assert!(mean(x).abs() < 1e-10);
        let base = train(&learner("regr.ols").unwrap(), &task, None, None, &ctx()).unwrap();
        let a = predict_task(&m, &task, None, &ctx()).unwrap();
        let b = predict_task(&base, &task, None, &ctx()).unwrap();
        for (u, v) in a.regr_response().unwrap().iter().zip(b.regr_response().unwrap()) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn pca_full_rank_is_lossless_and_dominant_direction() {
        let task = iris_task();
        let cols = task.feature_names();
        let ctl = fit_pca(task.data(), &cols, PcaComponents::Threshold(1.0)).unwrap();
        assert_eq!(ctl.loadings.len(), 4);
        let t = ctl.transform(task.data()).unwrap();
        for i in [0usize, 17, 99] {
            let scores: Vec<f64> = (1..=4).map(|c| t.column(&format!("PC{c}")).unwrap().as_numeric().unwrap()[i]).collect();
            for (j, name) in cols.iter().enumerate() {
                let z: f64 = ctl.loadings.iter().zip(&scores).map(|(w, s)| w[j] * s).sum();
                let orig = task.data().column(name).unwrap().as_numeric().unwrap()[i];
                assert!((z * ctl.sds[j] + ctl.means[j] - orig).abs() < 1e-8);
            }
        }
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        use rand::SeedableRng;
        let a: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let d = Dataset::new(vec![Column::numeric("a", a), Column::numeric("b", b)]).unwrap();
        let ctl = fit_pca(&d, &["a".into(), "b".into()], PcaComponents::Threshold(0.9)).unwrap();
        assert_eq!(ctl.loadings.len(), 1);
        assert!(fit_pca(&d, &["a".into()], PcaComponents::Count(2)).is_err());
    }

    #[test]
    fn downsample_trains_on_fraction() {
        let task = linear_regr_task(100, 0.1, 1);
        let w = make_downsample_wrapper(learner("regr.ols").unwrap(), 0.5).unwrap();
        let m = train(&w, &task, None, None, &ctx()).unwrap();
        assert_eq!(m.next_model().unwrap().subset().len(), 50);
        let m2 = train(&w, &task, None, None, &Ctx::new(6)).unwrap();
        let a = predict_task(&m, &task, None, &ctx()).unwrap();
        let b = predict_task(&m2, &task, None, &ctx()).unwrap();
        assert_ne!(a.regr_response().unwrap(), b.regr_response().unwrap());
        assert!(make_downsample_wrapper(learner("regr.ols").unwrap(), 0.0).is_err());
    }
}
