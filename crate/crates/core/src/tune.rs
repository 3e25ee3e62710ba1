//! Hyperparameter tuning: grid and random search, threshold tuning,
//! multi-criteria search, the model multiplexer and the tuning wrapper.

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::{Ctx, Level};
use crate::learner::{Algorithm, Learner, Model, PredictType, Properties, RawPrediction, TrainInput};
use crate::measures::{get_default_measure, Measure};
use crate::param::{format_config, Param, ParamMap, ParamSet, ParamValue, Requirement};
use crate::prediction::{Prediction, SetKind};
use crate::resample::{resample, signif3, ResampleOptions, Resampling};
use crate::table::{Cell, Table};
use crate::task::Task;
use crate::train::{raw_predict, train, WrappedModel};
use crate::util::linspace;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneMethod {
    #[default]
    Grid,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneControl {
    pub method: TuneMethod,
    pub resolution: usize,
    /// Grid resolution overrides per parameter id.
    pub resolution_per_param: BTreeMap<String, usize>,
    /// Number of random configurations.
    pub maxit: usize,
    /// Value recorded for failed evaluations; the measure's worst value
    /// when unset.
    pub impute_val: Option<f64>,
    pub tune_threshold: bool,
    /// Random draws for multiclass threshold tuning.
    pub threshold_draws: usize,
}

impl Default for TuneControl {
    fn default() -> Self {
        TuneControl {
            method: TuneMethod::Grid,
            resolution: 10,
            resolution_per_param: BTreeMap::new(),
            maxit: 100,
            impute_val: None,
            tune_threshold: false,
            threshold_draws: 5000,
        }
    }
}

impl TuneControl {
    pub fn grid(resolution: usize) -> Self {
        TuneControl { resolution, ..Default::default() }
    }

    pub fn random(maxit: usize) -> Self {
        TuneControl { method: TuneMethod::Random, maxit, ..Default::default() }
    }

    pub fn with_threshold_tuning(mut self) -> Self {
        self.tune_threshold = true;
        self
    }

    pub fn design(&self, par_set: &ParamSet, ctx: &Ctx) -> Result<Vec<ParamMap>> {
        let d = match self.method {
            TuneMethod::Grid => par_set.grid_design_with(&self.resolution_per_param, self.resolution)?,
            TuneMethod::Random => par_set.random_design(self.maxit, &mut ctx.child("design", 0).rng())?,
        };
        if d.is_empty() {
            return Err(Error::arg("the tuning design is empty"));
        }
        Ok(d)
    }
}

/// One evaluated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct OptPathEntry {
    /// Values on the original (untransformed) scale.
    pub x: ParamMap,
    /// Aggregated measure values, after imputation of failures.
    pub y: Vec<f64>,
    /// 1-based evaluation index.
    pub dob: usize,
    pub error: Option<String>,
    pub exec_time: f64,
    pub threshold: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct OptPath {
    pub par_set: ParamSet,
    /// Result names such as "mmce.test.mean".
    pub y_names: Vec<String>,
    pub minimize: Vec<bool>,
    pub entries: Vec<OptPathEntry>,
}

impl OptPath {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.entries.iter().map(|e| e.y[j]).collect()
    }

    /// Export as a table; `exec_time` false writes NA so outputs stay
    /// reproducible.
    pub fn to_table(&self, exec_time: bool) -> Table {
        let ids = self.par_set.ids();
        let mut header: Vec<String> = ids.clone();
        header.extend(self.y_names.iter().cloned());
        header.extend(["dob", "error.message", "exec.time"].map(String::from));
        let mut t = Table::new(header);
        for e in &self.entries {
            let mut row: Vec<Cell> = ids.iter().map(|id| value_cell(e.x.get(id))).collect();
            row.extend(e.y.iter().map(|v| Cell::Num(*v)));
            row.push(Cell::from(e.dob));
            row.push(Cell::from(e.error.clone()));
            row.push(if exec_time { Cell::Num(e.exec_time) } else { Cell::Missing });
            t.push(row);
        }
        t
    }
}

pub(crate) fn value_cell(v: Option<&ParamValue>) -> Cell {
    match v {
        None => Cell::Missing,
        Some(ParamValue::Num(x)) => Cell::Num(*x),
        Some(ParamValue::Int(i)) => Cell::Int(*i),
        Some(ParamValue::Bool(b)) => Cell::Bool(*b),
        Some(other) => Cell::Str(other.to_string()),
    }
}

fn param_map_json(m: &ParamMap) -> serde_json::Value {
    serde_json::to_value(m).unwrap_or(serde_json::Value::Null)
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub learner_id: String,
    pub x: ParamMap,
    pub x_trafo: ParamMap,
    pub y: IndexMap<String, f64>,
    pub threshold: Option<Vec<f64>>,
    pub opt_path: OptPath,
}

impl TuneResult {
    pub fn to_json(&self) -> serde_json::Value {
        let num = |v: f64| if v.is_finite() { serde_json::json!(v) } else { serde_json::Value::Null };
        serde_json::json!({
            "learner_id": self.learner_id,
            "x": param_map_json(&self.x),
            "x_trafo": param_map_json(&self.x_trafo),
            "y": self.y.iter().map(|(k, v)| (k.clone(), num(*v))).collect::<serde_json::Map<_, _>>(),
            "threshold": self.threshold,
        })
    }
}

impl fmt::Display for TuneResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Tune result:")?;
        writeln!(f, "Op. pars: {}", format_config(&self.x, &self.opt_path.par_set.ids()))?;
        let ys: Vec<String> = self.y.iter().map(|(k, v)| format!("{k}={}", signif3(*v))).collect();
        write!(f, "{}", ys.join(","))
    }
}

struct Evaluation {
    y: Vec<f64>,
    error: Option<String>,
    exec_time: f64,
    threshold: Option<Vec<f64>>,
}

fn impute(y: f64, measure: &Measure, impute_val: Option<f64>, first: bool) -> f64 {
    if y.is_nan() {
        match impute_val {
            Some(v) if first => v,
            _ => measure.worst,
        }
    } else {
        y
    }
}

/// Resamples every design point on one shared resample instance.
fn evaluate_design(
    learner: &Learner,
    task: &Task,
    resampling: &Resampling,
    design: &[ParamMap],
    par_set: &ParamSet,
    control: &TuneControl,
    measures: &[Measure],
    ctx: &Ctx,
) -> Result<OptPath> {
    let inst = resampling.instantiate(task, ctx)?;
    if control.tune_threshold && learner.predict_type() != PredictType::Prob {
        return Err(Error::arg("threshold tuning needs a learner with predict type 'prob'"));
    }
    let opts = ResampleOptions::new().measures(measures.to_vec()).keep_pred(control.tune_threshold);
    let ids = par_set.ids();
    let evals = ctx.map_units(Level::TuneParams, "tune", design.len(), |i, c| -> Result<Evaluation> {
        let start = Instant::now();
        let point = &design[i];
        let lrn = learner.clone().set_hyperpars(&par_set.trafo(point))?;
        log::info!("[Tune-x] {}: {}", i + 1, format_config(point, &ids));
        let r = resample(&lrn, task, inst.clone(), &opts, c)?;
        let mut y: Vec<f64> = r.aggr.values().copied().collect();
        let mut threshold = None;
        if control.tune_threshold {
            if let Some(pred) = &r.pred {
                let tr = tune_threshold(pred, &measures[0], Some(task), control.threshold_draws, c)?;
                y[0] = tr.perf;
                threshold = Some(tr.threshold);
            }
        }
        let error = r.err_msgs.iter().flatten().next().cloned();
        let y: Vec<f64> =
            y.iter().zip(measures).enumerate().map(|(j, (v, m))| impute(*v, m, control.impute_val, j == 0)).collect();
        log::info!(
            "[Tune-y] {}: {}",
            i + 1,
            measures.iter().zip(&y).map(|(m, v)| format!("{}={}", m.result_name(), signif3(*v))).collect::<Vec<_>>().join(",")
        );
        Ok(Evaluation { y, error, exec_time: start.elapsed().as_secs_f64(), threshold })
    });
    let mut entries = Vec::with_capacity(design.len());
    for (i, (e, x)) in evals.into_iter().zip(design).enumerate() {
        let e = e?;
        entries.push(OptPathEntry {
            x: x.clone(),
            y: e.y,
            dob: i + 1,
            error: e.error,
            exec_time: e.exec_time,
            threshold: e.threshold,
        });
    }
    Ok(OptPath {
        par_set: par_set.clone(),
        y_names: measures.iter().map(|m| m.result_name()).collect(),
        minimize: measures.iter().map(|m| m.minimize).collect(),
        entries,
    })
}

/// Index of the best value; ties go to the earliest entry.
pub fn best_index(values: &[f64], minimize: bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => if minimize { *v < values[b] } else { *v > values[b] },
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Evaluates every configuration of the design with resampling and returns
/// the best one according to the first measure.
pub fn tune_params(
    learner: &Learner,
    task: &Task,
    resampling: impl Into<Resampling>,
    par_set: &ParamSet,
    control: &TuneControl,
    measures: &[Measure],
    ctx: &Ctx,
) -> Result<TuneResult> {
    let resampling = resampling.into();
    let measures = if measures.is_empty() { vec![get_default_measure(task)] } else { measures.to_vec() };
    check_tunable(learner, par_set)?;
    let design = control.design(par_set, ctx)?;
    log::info!("[Tune] Started tuning learner {} for parameter set with {} configurations", learner.id(), design.len());
    let path = evaluate_design(learner, task, &resampling, &design, par_set, control, &measures, ctx)?;
    let best = best_index(&path.column(0), measures[0].minimize).unwrap_or(0);
    let e = &path.entries[best];
    let result = TuneResult {
        learner_id: learner.id().to_string(),
        x: e.x.clone(),
        x_trafo: par_set.trafo(&e.x),
        y: path.y_names.iter().cloned().zip(e.y.iter().copied()).collect(),
        threshold: e.threshold.clone(),
        opt_path: path,
    };
    log::info!("[Tune] Result: {}", result.to_string().replace('\n', " "));
    Ok(result)
}

fn check_tunable(learner: &Learner, par_set: &ParamSet) -> Result<()> {
    let known = learner.param_set();
    if let Some(id) = par_set.ids().into_iter().find(|id| !known.contains(id)) {
        return Err(Error::param(format!("learner '{}' has no parameter '{id}'", learner.id())));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdResult {
    /// One entry per class in prediction class order.
    pub threshold: Vec<f64>,
    pub perf: f64,
}

/// Finds the threshold optimising `measure` on a probability prediction.
/// Binary problems scan 1001 equally spaced thresholds for the positive
/// class (ties go to the smallest); multiclass problems draw `draws`
/// threshold vectors uniformly from the simplex.
pub fn tune_threshold(
    pred: &Prediction,
    measure: &Measure,
    task: Option<&Task>,
    draws: usize,
    ctx: &Ctx,
) -> Result<ThresholdResult> {
    if pred.prob.is_none() {
        return Err(Error::arg("threshold tuning needs probability predictions"));
    }
    let pred = if pred.set.is_some() { pred.filter(None, Some(SetKind::Test)) } else { pred.clone() };
    let better = |a: f64, b: f64| if measure.minimize { a < b } else { a > b };
    let mut best: Option<ThresholdResult> = None;
    let mut consider = |th: Vec<f64>, p: &Prediction| -> Result<()> {
        let v = measure.compute(p, task, None)?;
        if !v.is_nan() && best.as_ref().is_none_or(|b| better(v, b.perf)) {
            best = Some(ThresholdResult { threshold: th, perf: v });
        }
        Ok(())
    };
    if let Some(pos) = pred.positive {
        for t in linspace(0.0, 1.0, 1001) {
            let p = pred.set_threshold_binary(t)?;
            let mut th = vec![0.0; 2];
            th[pos] = t;
            th[1 - pos] = 1.0 - t;
            consider(th, &p)?;
        }
    } else {
        let k = pred.n_classes();
        let mut rng = ctx.child("threshold", 0).rng();
        for _ in 0..draws.max(1) {
            let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            let th: Vec<f64> = e.iter().map(|v| v / s).collect();
            let p = pred.set_threshold(&th)?;
            consider(th, &p)?;
        }
    }
    best.ok_or_else(|| Error::numerical("the measure was missing for every threshold"))
}

#[derive(Clone, Debug)]
pub struct TuneMultiCritResult {
    pub learner_id: String,
    /// Opt-path indices of the Pareto-optimal evaluations.
    pub front: Vec<usize>,
    pub pareto_x: Vec<ParamMap>,
    pub pareto_y: Vec<Vec<f64>>,
    pub opt_path: OptPath,
}

impl fmt::Display for TuneMultiCritResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Tune multicrit result:")?;
        write!(f, "Points on front: {}", self.front.len())
    }
}

/// `a` dominates `b`: no worse in every component and better in one.
pub fn dominates(a: &[f64], b: &[f64], minimize: &[bool]) -> bool {
    let mut strictly = false;
    for ((x, y), m) in a.iter().zip(b).zip(minimize) {
        let (x, y) = if *m { (*x, *y) } else { (-*x, -*y) };
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the non-dominated points; repeated identical vectors keep
/// only their first occurrence.
pub fn pareto_front(points: &[Vec<f64>], minimize: &[bool]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().any(|q| dominates(q, &points[i], minimize))
                && !points[..i].iter().any(|q| q == &points[i])
        })
        .collect()
}

pub fn tune_params_multicrit(
    learner: &Learner,
    task: &Task,
    resampling: impl Into<Resampling>,
    par_set: &ParamSet,
    control: &TuneControl,
    measures: &[Measure],
    ctx: &Ctx,
) -> Result<TuneMultiCritResult> {
    if measures.len() < 2 {
        return Err(Error::arg("multi-criteria tuning needs at least two measures"));
    }
    check_tunable(learner, par_set)?;
    let resampling = resampling.into();
    let design = control.design(par_set, ctx)?;
    let path = evaluate_design(learner, task, &resampling, &design, par_set, control, measures, ctx)?;
    let ys: Vec<Vec<f64>> = path.entries.iter().map(|e| e.y.clone()).collect();
    let front = pareto_front(&ys, &path.minimize);
    Ok(TuneMultiCritResult {
        learner_id: learner.id().to_string(),
        pareto_x: front.iter().map(|&i| path.entries[i].x.clone()).collect(),
        pareto_y: front.iter().map(|&i| ys[i].clone()).collect(),
        front,
        opt_path: path,
    })
}

// ---------------------------------------------------------------------------
// Model multiplexer

const SELECTED: &str = "selected.learner";

struct Multiplexer {
    bases: Vec<Learner>,
}

#[derive(Debug)]
struct MultiplexerModel {
    inner: WrappedModel,
}

impl Algorithm for Multiplexer {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let sel = input
            .value(SELECTED)
            .and_then(|v| v.as_str().map(str::to_string))
            .ok_or_else(|| Error::param("selected.learner is not set"))?;
        let base = self.bases.iter().find(|b| b.id() == sel).ok_or_else(|| Error::unknown("learner", &sel))?;
        let prefix = format!("{sel}.");
        let vals: ParamMap = input
            .learner
            .own_values()
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&prefix).map(|s| (s.to_string(), v.clone())))
            .collect();
        let lrn = base
            .clone()
            .set_config(input.learner.config())
            .set_predict_type(input.learner.predict_type())?
            .set_hyperpars(&vals)?;
        let inner = train(&lrn, input.task, None, input.weights, input.ctx)?;
        if inner.is_failure() {
            return Err(Error::LearnerFailed {
                learner: sel,
                message: crate::train::get_failure_message(&inner).unwrap_or_default(),
            });
        }
        Ok(Box::new(MultiplexerModel { inner }))
    }
}

impl Model for MultiplexerModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        raw_predict(&self.inner, data, ctx)
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

fn prefixed(learner_id: &str, p: &Param) -> Param {
    let prefix = format!("{learner_id}.");
    let own = Requirement::eq(SELECTED, ParamValue::Str(learner_id.to_string()));
    let mut q = p.renamed(format!("{prefix}{}", p.id));
    q.requires = Some(match &p.requires {
        Some(r) => Requirement::And(vec![own, r.rename(&|id| format!("{prefix}{id}"))]),
        None => own,
    });
    q
}

/// Combines several learners of one task kind into a single learner whose
/// `selected.learner` parameter picks the one that is trained.
pub fn make_model_multiplexer(learners: Vec<Learner>) -> Result<Learner> {
    let first = learners.first().ok_or_else(|| Error::arg("the multiplexer needs at least one learner"))?;
    let kind = first.kind();
    let mut ids: Vec<String> = Vec::new();
    for l in &learners {
        if l.kind() != kind {
            return Err(Error::arg("all multiplexed learners must have the same task kind"));
        }
        if ids.contains(&l.id().to_string()) {
            return Err(Error::duplicate("learner", l.id()));
        }
        ids.push(l.id().to_string());
    }
    let mut params = vec![Param::discrete(SELECTED, ids.iter().map(|s| ParamValue::Str(s.clone())).collect())
        .with_default(ParamValue::Str(ids[0].clone()))];
    let mut props = Properties::new();
    for l in &learners {
        params.extend(l.param_set().params().iter().map(|p| prefixed(l.id(), p)));
        props.extend(l.properties().iter().copied());
    }
    let ps = ParamSet::new(params)?;
    let mut mm = Learner::from_parts("ModelMultiplexer", kind, props, ps, Arc::new(Multiplexer { bases: learners.clone() }), None)?;
    let mut vals = ParamMap::new();
    for l in &learners {
        for (k, v) in l.hyperpars() {
            vals.insert(format!("{}.{k}", l.id()), v);
        }
    }
    mm = mm.set_hyperpars(&vals)?;
    Ok(mm)
}

/// Tuning space over a multiplexer: `selected.learner` plus the given
/// per-learner spaces with prefixed ids that are active only for their
/// learner.
pub fn make_model_multiplexer_param_set(mm: &Learner, spaces: &[(&str, ParamSet)]) -> Result<ParamSet> {
    let sel = mm
        .own_param_set()
        .get(SELECTED)
        .ok_or_else(|| Error::arg("not a model multiplexer"))?
        .clone();
    let mut params = vec![sel];
    for (id, ps) in spaces {
        if !mm.own_param_set().get(SELECTED).is_some_and(|p| p.check(&ParamValue::Str(id.to_string())).is_ok()) {
            return Err(Error::unknown("learner", *id));
        }
        params.extend(ps.params().iter().map(|p| prefixed(id, p)));
    }
    ParamSet::new(params)
}

// ---------------------------------------------------------------------------
// Tuning wrapper

struct TuneWrapper {
    resampling: Resampling,
    par_set: ParamSet,
    control: TuneControl,
    measures: Vec<Measure>,
}

#[derive(Debug)]
pub struct TuneModel {
    pub result: TuneResult,
    inner: WrappedModel,
}

impl Algorithm for TuneWrapper {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let next = input.learner.next().ok_or_else(|| Error::arg("tune wrapper without learner"))?;
        let task = match input.weights {
            Some(w) => input.task.with_weights(Some(w.to_vec()))?,
            None => input.task.clone(),
        };
        let result = tune_params(
            next,
            &task,
            self.resampling.clone(),
            &self.par_set,
            &self.control,
            &self.measures,
            &input.ctx.child("tune", 0),
        )?;
        let tuned = next.clone().set_hyperpars(&result.x_trafo)?;
        let inner = train(&tuned, &task, None, None, &input.ctx.child("final", 0))?;
        if inner.is_failure() {
            return Err(Error::LearnerFailed {
                learner: next.id().to_string(),
                message: crate::train::get_failure_message(&inner).unwrap_or_default(),
            });
        }
        Ok(Box::new(TuneModel { result, inner }))
    }
}

impl Model for TuneModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        raw_predict(&self.inner, data, ctx)
    }

    fn threshold(&self) -> Option<Vec<f64>> {
        self.result.threshold.clone()
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

/// Wraps `learner` so that training first tunes it on the training data with
/// an inner resampling and then fits it with the best configuration.
pub fn make_tune_wrapper(
    learner: Learner,
    resampling: impl Into<Resampling>,
    par_set: ParamSet,
    control: TuneControl,
    measures: Vec<Measure>,
) -> Result<Learner> {
    check_tunable(&learner, &par_set)?;
    let id = format!("{}.tuned", learner.id());
    let kind = learner.kind();
    let props = learner.properties().clone();
    let pt = learner.predict_type();
    let algo = TuneWrapper { resampling: resampling.into(), par_set, control, measures };
    let l = Learner::from_parts("TuneWrapper", kind, props, ParamSet::empty(), Arc::new(algo), Some(learner))?;
    Ok(l.set_id(&id).set_predict_type(pt)?)
}

pub fn get_tune_result(model: &WrappedModel) -> Option<&TuneResult> {
    model.find::<TuneModel>().map(|m| &m.result)
}

// ---------------------------------------------------------------------------
// Effect data

/// One row per evaluation with parameter values, measure values, the
/// iteration and the execution time. `trafo` reports transformed values.
pub fn hyperpars_effect_data(result: &TuneResult, trafo: bool, include_diagnostics: bool) -> Table {
    effect_table(&[result], trafo, include_diagnostics, false)
}

/// Same as [`hyperpars_effect_data`] for the tuning results of a nested
/// resampling, with a `nested_cv_run` column.
pub fn hyperpars_effect_data_nested(results: &[&TuneResult], trafo: bool, include_diagnostics: bool) -> Table {
    effect_table(results, trafo, include_diagnostics, true)
}

fn effect_table(results: &[&TuneResult], trafo: bool, diag: bool, nested: bool) -> Table {
    let Some(first) = results.first() else { return Table::default() };
    let path0 = &first.opt_path;
    let ids = path0.par_set.ids();
    let mut header: Vec<String> = ids.clone();
    header.extend(path0.y_names.iter().cloned());
    header.push("iteration".into());
    header.push("exec.time".into());
    if diag {
        header.push("error.message".into());
    }
    if nested {
        header.push("nested_cv_run".into());
    }
    let mut t = Table::new(header);
    for (run, r) in results.iter().enumerate() {
        let path = &r.opt_path;
        for e in &path.entries {
            let x = if trafo { path.par_set.trafo(&e.x) } else { e.x.clone() };
            let mut row: Vec<Cell> = ids.iter().map(|id| value_cell(x.get(id))).collect();
            row.extend(e.y.iter().map(|v| Cell::Num(*v)));
            row.push(Cell::from(e.dob));
            row.push(Cell::Num(e.exec_time));
            if diag {
                row.push(Cell::from(e.error.clone()));
            }
            if nested {
                row.push(Cell::from(run + 1));
            }
            t.push(row);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::iris_task;
    use crate::learner::learner;
    use crate::measures::get_measure;
    use crate::param::Trafo;
    use crate::resample::ResampleDesc;

    #[test]
    fn knn_grid_picks_column_minimum() {
        let task = iris_task();
        let ps = ParamSet::new(vec![Param::integer("k", 1, 5)]).unwrap();
        let ctl = TuneControl::grid(5);
        let r = tune_params(&learner("classif.knn").unwrap(), &task, ResampleDesc::cv(3), &ps, &ctl, &[], &Ctx::new(4)).unwrap();
        assert_eq!(r.opt_path.len(), 5);
        let col = r.opt_path.column(0);
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(r.y["mmce.test.mean"], min);
        let first_min = col.iter().position(|v| *v == min).unwrap();
        assert_eq!(r.x["k"], ParamValue::Int(first_min as i64 + 1));
    }

    #[test]
    fn featureless_ties_go_to_first() {
        let task = iris_task();
        let lrn = learner("classif.lda").unwrap();
        let ps = ParamSet::new(vec![Param::numeric("ridge", 0.0, 1e-6)]).unwrap();
        let r = tune_params(&lrn, &task, ResampleDesc::cv(3), &ps, &TuneControl::grid(3), &[], &Ctx::new(1)).unwrap();
        let col = r.opt_path.column(0);
        if col.iter().all(|v| *v == col[0]) {
            assert_eq!(r.opt_path.entries[0].x, r.x);
        }
    }

    #[test]
    fn random_design_size_and_effect_data() {
        let task = iris_task();
        let ps = ParamSet::new(vec![Param::numeric("ridge", -8.0, -2.0).with_trafo(Trafo::Pow10)]).unwrap();
        let r = tune_params(
            &learner("classif.lda").unwrap(),
            &task,
            ResampleDesc::holdout(),
            &ps,
            &TuneControl::random(6),
            &[get_measure("acc").unwrap()],
            &Ctx::new(9),
        )
        .unwrap();
        let t = hyperpars_effect_data(&r, false, true);
        assert_eq!(t.len(), 6);
        let tt = hyperpars_effect_data(&r, true, false);
        for (a, b) in t.rows.iter().zip(&tt.rows) {
            let (a, b) = (a[0].as_f64().unwrap(), b[0].as_f64().unwrap());
            assert!((10f64.powf(a) - b).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn pareto_examples() {
        let min = [true, true];
        let pts = vec![vec![0.1, 0.9], vec![0.9, 0.1], vec![0.5, 0.5]];
        assert_eq!(pareto_front(&pts, &min), vec![0, 1, 2]);
        let mut more = pts.clone();
        more.push(vec![0.2, 0.2]);
        assert_eq!(pareto_front(&more, &min), vec![0, 1, 3]);
        assert_eq!(pareto_front(&[vec![0.3, 0.3]], &min), vec![0]);
    }

    #[test]
    fn binary_threshold_tuning() {
        let p = crate::prediction::tests::binary_pred(&[0, 0, 1, 1], &[0.9, 0.7, 0.4, 0.1]);
        let r = tune_threshold(&p, &get_measure("mmce").unwrap(), None, 10, &Ctx::new(1)).unwrap();
        assert_eq!(r.perf, 0.0);
        let flat = crate::prediction::tests::binary_pred(&[0, 1, 1, 1], &[0.5, 0.5, 0.5, 0.5]);
        let r = tune_threshold(&flat, &get_measure("mmce").unwrap(), None, 10, &Ctx::new(1)).unwrap();
        assert_eq!(r.threshold[0], 0.501);
    }

    #[test]
    fn multiclass_threshold_sums_to_one() {
        let task = iris_task();
        let lrn = learner("classif.lda").unwrap().set_predict_type(PredictType::Prob).unwrap();
        let m = train(&lrn, &task, None, None, &Ctx::new(1)).unwrap();
        let p = crate::train::predict_task(&m, &task, None, &Ctx::new(1)).unwrap();
        let r = tune_threshold(&p, &get_measure("mmce").unwrap(), None, 200, &Ctx::new(2)).unwrap();
        assert!((r.threshold.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiplexer_params_and_dispatch() {
        let a = learner("classif.knn").unwrap();
        let b = learner("classif.lda").unwrap();
        let mm = make_model_multiplexer(vec![a.clone(), b]).unwrap();
        let ps = make_model_multiplexer_param_set(
            &mm,
            &[
                ("classif.knn", ParamSet::new(vec![Param::integer("k", 1, 5)]).unwrap()),
                ("classif.lda", ParamSet::new(vec![Param::numeric("ridge", 0.0, 1.0)]).unwrap()),
            ],
        )
        .unwrap();
        assert_eq!(ps.len(), 3);
        let vals = crate::param::param_map([(SELECTED, ParamValue::from("classif.knn")), ("classif.lda.ridge", ParamValue::Num(0.5))]);
        assert!(!ps.is_active("classif.lda.ridge", &vals));
        let task = iris_task();
        let ctx = Ctx::new(3);
        let mm3 = mm.set_hyperpars(&vals).unwrap().set_hyperpar("classif.knn.k", 3i64).unwrap();
        let direct = a.set_hyperpar("k", 3i64).unwrap();
        let p1 = crate::train::predict_task(&train(&mm3, &task, None, None, &ctx).unwrap(), &task, None, &ctx).unwrap();
        let p2 = crate::train::predict_task(&train(&direct, &task, None, None, &ctx).unwrap(), &task, None, &ctx).unwrap();
        assert_eq!(p1.response, p2.response);
    }

    #[test]
    fn dependency_grid_drops_inactive() {
        let ps = ParamSet::new(vec![
            Param::discrete("kernel", vec!["lin", "rbf"]),
            Param::numeric("sigma", 0.0, 1.0).with_requires(Requirement::eq("kernel", "rbf")),
        ])
        .unwrap();
        let d = ps.grid_design(3).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.iter().filter(|p| p["kernel"] == ParamValue::from("lin")).all(|p| !p.contains_key("sigma")));
    }
}
