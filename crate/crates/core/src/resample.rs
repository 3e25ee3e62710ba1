//! Resampling descriptions, their instantiation into index sets, and the
//! resampling driver.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{Ctx, Level};
use crate::learner::Learner;
use crate::measures::{get_default_measure, AggrInput, Measure};
use crate::prediction::{concat_predictions, Prediction, SetKind};
use crate::task::{Task, TaskKind};
use crate::train::{get_failure_message, predict_task, train, WrappedModel};
use crate::util::{round_count, sample_with, shuffled};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResampleMethod {
    Holdout,
    CV,
    LOO,
    RepCV,
    Subsample,
    Bootstrap,
}

impl std::str::FromStr for ResampleMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Holdout" | "holdout" => ResampleMethod::Holdout,
            "CV" | "cv" => ResampleMethod::CV,
            "LOO" | "loo" => ResampleMethod::LOO,
            "RepCV" | "repcv" => ResampleMethod::RepCV,
            "Subsample" | "subsample" => ResampleMethod::Subsample,
            "Bootstrap" | "bootstrap" => ResampleMethod::Bootstrap,
            other => return Err(Error::unknown("resampling method", other)),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictSets {
    #[default]
    Test,
    Train,
    Both,
}

impl PredictSets {
    pub fn test(self) -> bool {
        matches!(self, PredictSets::Test | PredictSets::Both)
    }
    pub fn train(self) -> bool {
        matches!(self, PredictSets::Train | PredictSets::Both)
    }
    fn as_str(self) -> &'static str {
        match self {
            PredictSets::Test => "test",
            PredictSets::Train => "train",
            PredictSets::Both => "both",
        }
    }
}

/// How to split a data set into training and test sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleDesc {
    pub method: ResampleMethod,
    /// Folds for CV and RepCV, repetitions for Subsample and Bootstrap.
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Repetitions of RepCV.
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub stratify: bool,
    #[serde(default)]
    pub stratify_cols: Vec<String>,
    #[serde(default)]
    pub predict: PredictSets,
}

fn default_iters() -> usize {
    10
}
fn default_reps() -> usize {
    10
}
fn default_split() -> f64 {
    2.0 / 3.0
}

impl ResampleDesc {
    fn base(method: ResampleMethod, iters: usize) -> Self {
        ResampleDesc {
            method,
            iters,
            reps: 1,
            split: default_split(),
            stratify: false,
            stratify_cols: Vec::new(),
            predict: PredictSets::Test,
        }
    }

    pub fn holdout() -> Self {
        Self::base(ResampleMethod::Holdout, 1)
    }

    pub fn cv(folds: usize) -> Self {
        Self::base(ResampleMethod::CV, folds)
    }

    pub fn loo() -> Self {
        Self::base(ResampleMethod::LOO, 0)
    }

    pub fn rep_cv(folds: usize, reps: usize) -> Self {
        ResampleDesc { reps, ..Self::base(ResampleMethod::RepCV, folds) }
    }

    pub fn subsample(iters: usize) -> Self {
        Self::base(ResampleMethod::Subsample, iters)
    }

    pub fn bootstrap(iters: usize) -> Self {
        Self::base(ResampleMethod::Bootstrap, iters)
    }

    pub fn with_split(mut self, split: f64) -> Self {
        self.split = split;
        self
    }

    pub fn stratified(mut self) -> Self {
        self.stratify = true;
        self
    }

    pub fn stratify_on<S: AsRef<str>>(mut self, cols: &[S]) -> Self {
        self.stratify_cols = cols.iter().map(|c| c.as_ref().to_string()).collect();
        self
    }

    pub fn with_predict(mut self, predict: PredictSets) -> Self {
        self.predict = predict;
        self
    }

    pub fn validate(&self) -> Result<()> {
        use ResampleMethod::*;
        match self.method {
            CV | RepCV if self.iters < 2 => return Err(Error::arg("cross-validation needs at least 2 folds")),
            RepCV if self.reps < 1 => return Err(Error::arg("RepCV needs at least one repetition")),
            Subsample | Bootstrap if self.iters < 1 => return Err(Error::arg("need at least one iteration")),
            Holdout | Subsample if !(self.split > 0.0 && self.split < 1.0) => {
                return Err(Error::arg("split must lie strictly between 0 and 1"))
            }
            _ => {}
        }
        if self.stratify && !self.stratify_cols.is_empty() {
            return Err(Error::arg("use either stratify or stratify_cols, not both"));
        }
        if self.is_stratified() && matches!(self.method, LOO | Bootstrap) {
            return Err(Error::arg(format!("stratification is not supported for {:?}", self.method)));
        }
        Ok(())
    }

    pub fn is_stratified(&self) -> bool {
        self.stratify || !self.stratify_cols.is_empty()
    }

    /// Number of iterations for a data set of `size` observations.
    pub fn n_iters(&self, size: usize) -> usize {
        match self.method {
            ResampleMethod::Holdout => 1,
            ResampleMethod::LOO => size,
            ResampleMethod::RepCV => self.iters * self.reps,
            _ => self.iters,
        }
    }
}

/// Parses method names with optional iteration counts, e.g. "CV", "RepCV".
pub fn make_resample_desc(method: &str, iters: Option<usize>) -> Result<ResampleDesc> {
    let m: ResampleMethod = method.parse()?;
    let d = match m {
        ResampleMethod::Holdout => ResampleDesc::holdout(),
        ResampleMethod::CV => ResampleDesc::cv(iters.unwrap_or(10)),
        ResampleMethod::LOO => ResampleDesc::loo(),
        ResampleMethod::RepCV => ResampleDesc::rep_cv(iters.unwrap_or(10), 10),
        ResampleMethod::Subsample => ResampleDesc::subsample(iters.unwrap_or(30)),
        ResampleMethod::Bootstrap => ResampleDesc::bootstrap(iters.unwrap_or(30)),
    };
    d.validate()?;
    Ok(d)
}

impl fmt::Display for ResampleDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            ResampleMethod::Holdout => write!(f, "holdout with {:.2} split rate", self.split)?,
            ResampleMethod::CV => write!(f, "cross-validation with {} iterations", self.iters)?,
            ResampleMethod::LOO => write!(f, "LOO with NA iterations")?,
            ResampleMethod::RepCV => {
                write!(f, "repeated cross-validation with {} iterations", self.iters * self.reps)?
            }
            ResampleMethod::Subsample => {
                write!(f, "subsampling with {} iterations and {:.2} split rate", self.iters, self.split)?
            }
            ResampleMethod::Bootstrap => write!(f, "OOB bootstrapping with {} iterations", self.iters)?,
        }
        write!(f, ".\nPredict: {}\nStratification: {}", self.predict.as_str(), if self.is_stratified() { "TRUE" } else { "FALSE" })
    }
}

/// Concrete training and test index sets (0-based) for every iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleInstance {
    pub desc: ResampleDesc,
    pub size: usize,
    /// Training indices; bootstrap sets may repeat indices.
    pub train_inds: Vec<Vec<usize>>,
    pub test_inds: Vec<Vec<usize>>,
}

impl ResampleInstance {
    pub fn n_iters(&self) -> usize {
        self.train_inds.len()
    }
}

impl fmt::Display for ResampleInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Resample instance for {} cases.\nResample description: {}", self.size, self.desc)
    }
}

/// Strata ids per observation, or `None` when the description is not stratified.
fn strata(desc: &ResampleDesc, task: Option<&Task>) -> Result<Option<Vec<Vec<usize>>>> {
    if !desc.is_stratified() {
        return Ok(None);
    }
    let task = task.ok_or_else(|| Error::arg("stratified resampling needs the task"))?;
    let keys: Vec<Vec<Option<u32>>> = if desc.stratify {
        if task.kind() != TaskKind::Classif {
            return Err(Error::arg("stratification on the target needs a classification task"));
        }
        task.class_codes()?.iter().map(|c| vec![*c]).collect()
    } else {
        let cols = desc
            .stratify_cols
            .iter()
            .map(|c| {
                let col = task.data().column(c)?;
                col.category_codes()
                    .ok_or_else(|| Error::arg(format!("stratification column '{c}' is not a factor")))
            })
            .collect::<Result<Vec<_>>>()?;
        (0..task.size()).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
    };
    let mut groups: BTreeMap<Vec<Option<u32>>, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.into_iter().enumerate() {
        groups.entry(k).or_default().push(i);
    }
    Ok(Some(groups.into_values().collect()))
}

fn cv_folds<R: Rng + ?Sized>(size: usize, k: usize, groups: &[Vec<usize>], rng: &mut R) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for g in groups {
        for (pos, i) in shuffled(g.clone(), rng).into_iter().enumerate() {
            folds[(offset + pos) % k].push(i);
        }
        offset = (offset + g.len()) % k;
    }
    debug_assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), size);
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

/// Draws a training set of round(split * n) rows; stratified draws allocate
/// the total over strata by largest remainder.
fn holdout_split<R: Rng + ?Sized>(split: f64, groups: &[Vec<usize>], rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let n: usize = groups.iter().map(Vec::len).sum();
    let total = round_count(split, n);
    let exact: Vec<f64> = groups.iter().map(|g| split * g.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total.saturating_sub(quota.iter().sum());
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &g in order.iter().cycle().take(groups.len() * 2) {
        if rest == 0 {
            break;
        }
        if quota[g] < groups[g].len() {
            quota[g] += 1;
            rest -= 1;
        }
    }
    let mut train = Vec::with_capacity(total);
    let mut test = Vec::with_capacity(n - total);
    for (g, q) in groups.iter().zip(quota) {
        let s = shuffled(g.clone(), rng);
        train.extend_from_slice(&s[..q]);
        test.extend_from_slice(&s[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn complement(size: usize, test: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; size];
    test.iter().for_each(|&i| inside[i] = true);
    (0..size).filter(|&i| !inside[i]).collect()
}

/// Draws index sets for `desc`. `task` is needed for stratification;
/// otherwise only `size` matters.
pub fn make_resample_instance(desc: &ResampleDesc, task: Option<&Task>, size: usize, ctx: &Ctx) -> Result<ResampleInstance> {
    desc.validate()?;
    if let Some(t) = task {
        if t.size() != size {
            return Err(Error::arg("size does not match the task"));
        }
    }
    if size == 0 {
        return Err(Error::arg("cannot resample an empty data set"));
    }
    let groups = strata(desc, task)?.unwrap_or_else(|| vec![(0..size).collect()]);
    let mut rng = ctx.child("instance", 0).rng();
    let mut train_inds = Vec::new();
    let mut test_inds = Vec::new();
    match desc.method {
        ResampleMethod::Holdout | ResampleMethod::Subsample => {
            for _ in 0..desc.n_iters(size) {
                let (tr, te) = holdout_split(desc.split, &groups, &mut rng);
                train_inds.push(tr);
                test_inds.push(te);
            }
        }
        ResampleMethod::CV | ResampleMethod::RepCV => {
            if desc.iters > size {
                return Err(Error::arg(format!("cannot build {} folds from {size} observations", desc.iters)));
            }
            let reps = if desc.method == ResampleMethod::RepCV { desc.reps } else { 1 };
            for _ in 0..reps {
                for fold in cv_folds(size, desc.iters, &groups, &mut rng) {
                    train_inds.push(complement(size, &fold));
                    test_inds.push(fold);
                }
            }
        }
        ResampleMethod::LOO => {
            for i in 0..size {
                train_inds.push(complement(size, &[i]));
                test_inds.push(vec![i]);
            }
        }
        ResampleMethod::Bootstrap => {
            let all: Vec<usize> = (0..size).collect();
            for _ in 0..desc.iters {
                let mut tr = sample_with(&all, size, &mut rng);
                tr.sort_unstable();
                let mut seen = vec![false; size];
                tr.iter().for_each(|&i| seen[i] = true);
                test_inds.push((0..size).filter(|&i| !seen[i]).collect());
                train_inds.push(tr);
            }
        }
    }
    Ok(ResampleInstance { desc: desc.clone(), size, train_inds, test_inds })
}

pub fn make_resample_instance_for_task(desc: &ResampleDesc, task: &Task, ctx: &Ctx) -> Result<ResampleInstance> {
    make_resample_instance(desc, Some(task), task.size(), ctx)
}

/// A single holdout split given by the caller.
pub fn make_fixed_holdout_instance(train_inds: &[usize], test_inds: &[usize], size: usize) -> Result<ResampleInstance> {
    if train_inds.is_empty() || test_inds.is_empty() {
        return Err(Error::arg("training and test sets must both be non-empty"));
    }
    if train_inds.iter().chain(test_inds).any(|&i| i >= size) {
        return Err(Error::arg(format!("indices must be below {size}")));
    }
    let mut seen = vec![false; size];
    train_inds.iter().for_each(|&i| seen[i] = true);
    if test_inds.iter().any(|&i| seen[i]) {
        return Err(Error::arg("training and test sets overlap"));
    }
    let desc = ResampleDesc::holdout().with_split(train_inds.len() as f64 / size as f64);
    Ok(ResampleInstance { desc, size, train_inds: vec![train_inds.to_vec()], test_inds: vec![test_inds.to_vec()] })
}

/// Either a description, instantiated per call, or a fixed instance.
#[derive(Clone, Debug)]
pub enum Resampling {
    Desc(ResampleDesc),
    Instance(ResampleInstance),
}

impl From<ResampleDesc> for Resampling {
    fn from(d: ResampleDesc) -> Self {
        Resampling::Desc(d)
    }
}

impl From<ResampleInstance> for Resampling {
    fn from(i: ResampleInstance) -> Self {
        Resampling::Instance(i)
    }
}

impl Resampling {
    pub fn desc(&self) -> &ResampleDesc {
        match self {
            Resampling::Desc(d) => d,
            Resampling::Instance(i) => &i.desc,
        }
    }

    pub fn instantiate(&self, task: &Task, ctx: &Ctx) -> Result<ResampleInstance> {
        match self {
            Resampling::Desc(d) => make_resample_instance_for_task(d, task, ctx),
            Resampling::Instance(i) => {
                if i.size != task.size() {
                    return Err(Error::arg(format!(
                        "resample instance is for {} cases but the task has {}",
                        i.size,
                        task.size()
                    )));
                }
                Ok(i.clone())
            }
        }
    }
}

pub type ExtractFn = Arc<dyn Fn(&WrappedModel) -> Result<serde_json::Value> + Send + Sync>;

/// Pulls something out of every fitted model during resampling.
#[derive(Clone)]
pub struct Extractor {
    pub name: String,
    fun: ExtractFn,
}

impl fmt::Debug for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Extractor({})", self.name)
    }
}

impl Extractor {
    pub fn new(name: &str, fun: ExtractFn) -> Self {
        Extractor { name: name.into(), fun }
    }

    pub fn apply(&self, model: &WrappedModel) -> Result<serde_json::Value> {
        (self.fun)(model)
    }

    /// One of "tune_result", "featsel_result", "feat_importance".
    pub fn named(name: &str) -> Result<Extractor> {
        let fun: ExtractFn = match name {
            "feat_importance" => Arc::new(|m: &WrappedModel| {
                if m.is_failure() {
                    return Ok(serde_json::Value::Null);
                }
                Ok(serde_json::to_value(m.feature_importance()?)?)
            }),
            "tune_result" => Arc::new(|m: &WrappedModel| {
                Ok(crate::tune::get_tune_result(m).map_or(serde_json::Value::Null, |r| r.to_json()))
            }),
            "featsel_result" => Arc::new(|m: &WrappedModel| {
                Ok(crate::featsel::get_featsel_result(m).map_or(serde_json::Value::Null, |r| r.to_json()))
            }),
            other => return Err(Error::unknown("extractor", other)),
        };
        Ok(Extractor::new(name, fun))
    }
}

#[derive(Clone, Debug, Default)]
pub struct ResampleOptions {
    /// Defaults to the task's default measure.
    pub measures: Vec<Measure>,
    pub models: bool,
    pub keep_pred: bool,
    pub extract: Option<Extractor>,
}

impl ResampleOptions {
    pub fn new() -> Self {
        ResampleOptions { keep_pred: true, ..Default::default() }
    }

    pub fn measures(mut self, measures: Vec<Measure>) -> Self {
        self.measures = measures;
        self
    }

    pub fn models(mut self, keep: bool) -> Self {
        self.models = keep;
        self
    }

    pub fn keep_pred(mut self, keep: bool) -> Self {
        self.keep_pred = keep;
        self
    }

    pub fn extract(mut self, e: Extractor) -> Self {
        self.extract = Some(e);
        self
    }
}

#[derive(Clone, Debug)]
pub struct ResampleResult {
    pub task_id: String,
    pub learner_id: String,
    pub measures: Vec<Measure>,
    /// One row per iteration, one value per measure (in `measures` order).
    pub measures_test: Vec<Vec<f64>>,
    /// Missing values when no training predictions were made.
    pub measures_train: Vec<Vec<f64>>,
    pub aggr: IndexMap<String, f64>,
    pub pred: Option<Prediction>,
    pub models: Option<Vec<WrappedModel>>,
    pub extracts: Option<Vec<serde_json::Value>>,
    pub err_msgs: Vec<Option<String>>,
    pub runtime: f64,
    pub instance: ResampleInstance,
}

impl ResampleResult {
    /// The aggregated value of the first measure.
    pub fn first_aggr(&self) -> f64 {
        self.aggr.values().next().copied().unwrap_or(f64::NAN)
    }

    pub fn test_values(&self, measure: usize) -> Vec<f64> {
        self.measures_test.iter().map(|r| r[measure]).collect()
    }

    pub fn train_values(&self, measure: usize) -> Vec<f64> {
        self.measures_train.iter().map(|r| r[measure]).collect()
    }

    /// Per-iteration table as CSV: iter, then test values, then train values.
    pub fn perf_csv(&self) -> String {
        let mut out = String::from("iter");
        for m in &self.measures {
            out.push_str(&format!(",{}.test", m.id));
        }
        for m in &self.measures {
            out.push_str(&format!(",{}.train", m.id));
        }
        out.push('\n');
        for (i, (te, tr)) in self.measures_test.iter().zip(&self.measures_train).enumerate() {
            out.push_str(&(i + 1).to_string());
            for v in te.iter().chain(tr) {
                out.push(',');
                out.push_str(&crate::data::fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let num = |v: f64| if v.is_finite() { serde_json::json!(v) } else { serde_json::Value::Null };
        let table = |rows: &Vec<Vec<f64>>| -> Vec<serde_json::Value> {
            rows.iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut o = serde_json::Map::new();
                    o.insert("iter".into(), serde_json::json!(i + 1));
                    for (m, v) in self.measures.iter().zip(r) {
                        o.insert(m.id.clone(), num(*v));
                    }
                    serde_json::Value::Object(o)
                })
                .collect()
        };
        serde_json::json!({
            "task_id": self.task_id,
            "learner_id": self.learner_id,
            "aggr": self.aggr.iter().map(|(k, v)| (k.clone(), num(*v))).collect::<serde_json::Map<_, _>>(),
            "measures_test": table(&self.measures_test),
            "measures_train": table(&self.measures_train),
            "err_msgs": self.err_msgs,
            "extracts": self.extracts,
        })
    }
}

impl fmt::Display for ResampleResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Resample Result")?;
        writeln!(f, "Task: {}", self.task_id)?;
        writeln!(f, "Learner: {}", self.learner_id)?;
        writeln!(f, "Aggr perf: {}", format_aggr(&self.aggr))?;
        write!(f, "Runtime: {}", self.runtime)
    }
}

/// "mmce.test.mean=0.0467,mmce.train.mean=0.0367" style summary with three
/// significant digits.
pub fn format_aggr(aggr: &IndexMap<String, f64>) -> String {
    aggr.iter().map(|(k, v)| format!("{k}={}", signif3(*v))).collect::<Vec<_>>().join(",")
}

pub(crate) fn signif3(v: f64) -> String {
    crate::util::signif(v, 3)
}

struct IterOutcome {
    test: Vec<f64>,
    train: Vec<f64>,
    preds: Vec<Prediction>,
    model: WrappedModel,
    extract: Option<serde_json::Value>,
    err: Option<String>,
}

/// Evaluates `learner` on every iteration of the resampling and aggregates
/// the measures.
pub fn resample(
    learner: &Learner,
    task: &Task,
    resampling: impl Into<Resampling>,
    opts: &ResampleOptions,
    ctx: &Ctx,
) -> Result<ResampleResult> {
    let start = Instant::now();
    let resampling = resampling.into();
    learner.check_task(task)?;
    let measures = if opts.measures.is_empty() { vec![get_default_measure(task)] } else { opts.measures.clone() };
    let predict = resampling.desc().predict;
    for m in &measures {
        if m.aggr.needs_train() && !predict.train() {
            return Err(Error::MeasureRequirement { measure: m.result_name(), missing: "req.train".into() });
        }
        if m.has("predtype.prob") && learner.predict_type() != crate::learner::PredictType::Prob {
            return Err(Error::MeasureRequirement { measure: m.id.clone(), missing: "predtype.prob".into() });
        }
    }
    let inst = resampling.instantiate(task, ctx)?;
    let n_iter = inst.n_iters();
    let outcomes = ctx.map_units(Level::Resample, "resample", n_iter, |i, c| -> Result<IterOutcome> {
        let model = train(learner, task, Some(&inst.train_inds[i]), None, c)?;
        let err = model.is_failure().then(|| get_failure_message(&model).unwrap_or_default());
        let mut preds = Vec::new();
        let mut test = vec![f64::NAN; measures.len()];
        let mut train_vals = vec![f64::NAN; measures.len()];
        if predict.test() {
            let p = predict_task(&model, task, Some(&inst.test_inds[i]), c)?.tag(i, SetKind::Test);
            for (v, m) in test.iter_mut().zip(&measures) {
                *v = m.compute(&p, Some(task), Some(&model))?;
            }
            preds.push(p);
        }
        if predict.train() {
            let p = predict_task(&model, task, Some(&inst.train_inds[i]), c)?.tag(i, SetKind::Train);
            for (v, m) in train_vals.iter_mut().zip(&measures) {
                *v = m.compute(&p, Some(task), Some(&model))?;
            }
            preds.push(p);
        }
        let extract = opts.extract.as_ref().map(|e| e.apply(&model)).transpose()?;
        log::info!("[Resample] iter {}: {}", i + 1, test.iter().map(|v| signif3(*v)).collect::<Vec<_>>().join(" "));
        Ok(IterOutcome { test, train: train_vals, preds, model, extract, err })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let all_preds: Vec<Prediction> = outcomes.iter().flat_map(|o| o.preds.iter().cloned()).collect();
    let merged = concat_predictions(&all_preds)?;
    let measures_test: Vec<Vec<f64>> = outcomes.iter().map(|o| o.test.clone()).collect();
    let measures_train: Vec<Vec<f64>> = outcomes.iter().map(|o| o.train.clone()).collect();
    let aggr = aggregate_all(&measures, &measures_test, &measures_train, merged.as_ref(), Some(task))?;
    let err_msgs = outcomes.iter().map(|o| o.err.clone()).collect();
    let extracts = opts.extract.as_ref().map(|_| outcomes.iter().map(|o| o.extract.clone().unwrap_or_default()).collect());
    let models = opts.models.then(|| outcomes.into_iter().map(|o| o.model).collect());
    let result = ResampleResult {
        task_id: task.id().to_string(),
        learner_id: learner.id().to_string(),
        measures,
        measures_test,
        measures_train,
        aggr,
        pred: if opts.keep_pred { merged } else { None },
        models,
        extracts,
        err_msgs,
        runtime: start.elapsed().as_secs_f64(),
        instance: inst,
    };
    log::info!("[Resample] Result: {}", format_aggr(&result.aggr));
    Ok(result)
}

/// Applies every measure's aggregation to the per-iteration tables.
pub fn aggregate_all(
    measures: &[Measure],
    test: &[Vec<f64>],
    train: &[Vec<f64>],
    pred: Option<&Prediction>,
    task: Option<&Task>,
) -> Result<IndexMap<String, f64>> {
    let mut out = IndexMap::new();
    for (j, m) in measures.iter().enumerate() {
        let te: Vec<f64> = test.iter().map(|r| r[j]).collect();
        let tr: Vec<f64> = train.iter().map(|r| r[j]).collect();
        let v = m.aggr.aggregate(&AggrInput { test: &te, train: &tr, measure: m, pred, task })?;
        out.insert(m.result_name(), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::iris_task;

    #[test]
    fn cv_partitions_rows() {
        let inst = make_resample_instance(&ResampleDesc::cv(3), None, 150, &Ctx::new(1)).unwrap();
        let mut all: Vec<usize> = inst.test_inds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..150).collect::<Vec<_>>());
        assert!(inst.test_inds.iter().all(|t| t.len() == 50));
    }

    #[test]
    fn stratified_cv_on_iris() {
        let task = iris_task();
        let inst = make_resample_instance_for_task(&ResampleDesc::cv(3).stratified(), &task, &Ctx::new(5)).unwrap();
        let codes = task.class_codes().unwrap();
        for fold in &inst.test_inds {
            let mut counts = [0usize; 3];
            fold.iter().for_each(|&i| counts[codes[i].unwrap() as usize] += 1);
            let mut sorted = counts;
            sorted.sort_unstable();
            assert!(sorted == [16, 17, 17] || sorted == [16, 16, 17] || sorted == [17, 17, 17] || sorted == [16, 16, 16]);
            assert!(counts.iter().all(|c| *c == 16 || *c == 17));
        }
        for c in 0..3u32 {
            let mut per: Vec<usize> =
                inst.test_inds.iter().map(|f| f.iter().filter(|&&i| codes[i] == Some(c)).count()).collect();
            per.sort_unstable();
            assert_eq!(per, vec![16, 17, 17]);
        }
    }

    #[test]
    fn bootstrap_test_is_complement_of_support() {
        let inst = make_resample_instance(&ResampleDesc::bootstrap(2), None, 10, &Ctx::new(2)).unwrap();
        for (tr, te) in inst.train_inds.iter().zip(&inst.test_inds) {
            assert_eq!(tr.len(), 10);
            for i in 0..10 {
                assert_eq!(te.contains(&i), !tr.contains(&i));
            }
        }
    }

    #[test]
    fn holdout_defaults_and_rounding() {
        let d = make_resample_desc("Holdout", None).unwrap();
        assert!(d.to_string().starts_with("holdout with 0.67 split rate"));
        let inst = make_resample_instance(&d, None, 150, &Ctx::new(3)).unwrap();
        assert_eq!(inst.train_inds[0].len(), 100);
        assert_eq!(inst.test_inds[0].len(), 50);
        assert!(make_resample_desc("CV", Some(1)).is_err());
    }

    #[test]
    fn fixed_holdout_checks() {
        let tr: Vec<usize> = (0..100).collect();
        let te: Vec<usize> = (100..150).collect();
        assert_eq!(make_fixed_holdout_instance(&tr, &te, 150).unwrap().n_iters(), 1);
        assert!(make_fixed_holdout_instance(&tr, &[99, 100], 150).is_err());
        assert!(make_fixed_holdout_instance(&tr, &[], 150).is_err());
    }

    #[test]
    fn stratify_rejects_bootstrap_and_regression() {
        assert!(ResampleDesc::bootstrap(3).stratified().validate().is_err());
        let task = crate::datasets::linear_regr_task(30, 0.1, 1);
        assert!(make_resample_instance_for_task(&ResampleDesc::cv(3).stratified(), &task, &Ctx::new(1)).is_err());
    }

    #[test]
    fn signif_formatting() {
        assert_eq!(signif3(0.046666), "0.0467");
        assert_eq!(signif3(20.61), "20.6");
        assert_eq!(signif3(0.02), "0.02");
    }
}
