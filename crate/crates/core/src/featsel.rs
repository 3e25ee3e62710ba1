//! Feature filters, filter-based task reduction, wrapper-based subset
//! search and the learner wrappers for both.

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use indexmap::IndexMap;
use once_cell::sync::Lazy;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::exec::{Ctx, Level};
use crate::learner::{learner, Algorithm, Learner, Model, PredictType, RawPrediction, TrainInput};
use crate::measures::{get_default_measure, Measure};
use crate::param::{Param, ParamSet, ParamValue};
use crate::resample::{resample, signif3, ResampleOptions, Resampling};
use crate::table::{Cell, Table};
use crate::task::{subset_task, Task, TaskKind};
use crate::train::{raw_predict, train_next, WrappedModel};
use crate::tune::best_index;
use crate::util::{average_ranks, round_count, signif, variance};

// ---------------------------------------------------------------------------
// Filters

/// Scores for the given columns, one per column; higher is more important.
pub type FilterFn = Arc<dyn Fn(&Task, &[&Column]) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
pub struct Filter {
    pub name: String,
    pub desc: String,
    pub task_kinds: Vec<TaskKind>,
    pub feature_kinds: Vec<ColumnKind>,
    pub fun: FilterFn,
}

impl fmt::Debug for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tk: Vec<&str> = self.task_kinds.iter().map(|k| k.as_str()).collect();
        let fk: Vec<String> = self.feature_kinds.iter().map(|k| k.to_string()).collect();
        writeln!(f, "Filter: '{}'", self.name)?;
        writeln!(f, "Supported tasks: {}", tk.join(","))?;
        write!(f, "Supported features: {}", fk.join(","))
    }
}

const ALL_KINDS: [ColumnKind; 4] = [ColumnKind::Numeric, ColumnKind::Factor, ColumnKind::Ordered, ColumnKind::Logical];

fn per_column(f: impl Fn(&Task, &Column) -> Result<f64> + Send + Sync + 'static) -> FilterFn {
    Arc::new(move |task: &Task, cols: &[&Column]| cols.iter().map(|c| f(task, c)).collect())
}

fn builtin_filters() -> Vec<Filter> {
    let mk = |name: &str, desc: &str, tk: &[TaskKind], fk: &[ColumnKind], fun: FilterFn| Filter {
        name: name.into(),
        desc: desc.into(),
        task_kinds: tk.to_vec(),
        feature_kinds: fk.to_vec(),
        fun,
    };
    let all_tasks = [TaskKind::Classif, TaskKind::Regr, TaskKind::Cluster, TaskKind::Multilabel, TaskKind::Costsens];
    vec![
        mk(
            "variance",
            "Sample variance of the feature",
            &all_tasks,
            &[ColumnKind::Numeric],
            per_column(|_, c| {
                let x: Vec<f64> = c.to_f64().into_iter().filter(|v| !v.is_nan()).collect();
                Ok(if x.len() < 2 { f64::NAN } else { variance(&x) })
            }),
        ),
        mk(
            "linear.correlation",
            "Absolute Pearson correlation with the target",
            &[TaskKind::Regr],
            &[ColumnKind::Numeric],
            per_column(|t, c| {
                let (x, y) = complete_pairs(&c.to_f64(), t.regr_target()?);
                Ok(pearson(&x, &y).abs())
            }),
        ),
        mk(
            "rank.correlation",
            "Absolute Spearman correlation with the target",
            &[TaskKind::Regr],
            &[ColumnKind::Numeric],
            per_column(|t, c| {
                let (x, y) = complete_pairs(&c.to_f64(), t.regr_target()?);
                Ok(pearson(&average_ranks(&x), &average_ranks(&y)).abs())
            }),
        ),
        mk(
            "anova.test",
            "One-way ANOVA F statistic across classes",
            &[TaskKind::Classif],
            &[ColumnKind::Numeric],
            per_column(|t, c| {
                let (x, g, k) = by_class(t, &c.to_f64())?;
                Ok(anova_f(&x, &g, k))
            }),
        ),
        mk(
            "kruskal.test",
            "Kruskal-Wallis H statistic across classes",
            &[TaskKind::Classif],
            &[ColumnKind::Numeric, ColumnKind::Ordered],
            per_column(|t, c| {
                let v = match c.codes() {
                    Some(codes) => codes.iter().map(|o| o.map_or(f64::NAN, |v| v as f64)).collect(),
                    None => c.to_f64(),
                };
                let (x, g, k) = by_class(t, &v)?;
                Ok(kruskal_h(&x, &g, k))
            }),
        ),
        mk(
            "chi.squared",
            "Cramer's V between the binned feature and the class",
            &[TaskKind::Classif],
            &ALL_KINDS,
            per_column(|t, c| {
                let (b, nb) = bin_column(c);
                let (cls, k) = class_codes(t)?;
                Ok(cramers_v(&b, nb, &cls, k))
            }),
        ),
        mk(
            "information.gain",
            "Entropy reduction of the class given the binned feature, in nats",
            &[TaskKind::Classif],
            &ALL_KINDS,
            per_column(|t, c| {
                let (b, nb) = bin_column(c);
                let (cls, k) = class_codes(t)?;
                Ok(information_gain(&b, nb, &cls, k))
            }),
        ),
    ]
}

static FILTERS: Lazy<RwLock<BTreeMap<String, Filter>>> =
    Lazy::new(|| RwLock::new(builtin_filters().into_iter().map(|f| (f.name.clone(), f)).collect()));

pub fn register_filter(filter: Filter) -> Result<()> {
    let mut reg = FILTERS.write().expect("filter registry");
    if reg.contains_key(&filter.name) {
        return Err(Error::duplicate("filter", &filter.name));
    }
    reg.insert(filter.name.clone(), filter);
    Ok(())
}

pub fn get_filter(name: &str) -> Result<Filter> {
    FILTERS.read().expect("filter registry").get(name).cloned().ok_or_else(|| Error::unknown("filter", name))
}

/// Registered filters, optionally restricted to a task kind.
pub fn list_filters(kind: Option<TaskKind>) -> Vec<Filter> {
    FILTERS
        .read()
        .expect("filter registry")
        .values()
        .filter(|f| kind.is_none_or(|k| f.task_kinds.contains(&k)))
        .cloned()
        .collect()
}

fn complete_pairs(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    x.iter().zip(y).filter(|(a, b)| !a.is_nan() && !b.is_nan()).map(|(a, b)| (*a, *b)).unzip()
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn class_codes(task: &Task) -> Result<(Vec<Option<u32>>, usize)> {
    Ok((task.class_codes()?.to_vec(), task.class_levels().len()))
}

/// Values and class codes of the rows where both are present.
fn by_class(task: &Task, x: &[f64]) -> Result<(Vec<f64>, Vec<usize>, usize)> {
    let (codes, k) = class_codes(task)?;
    let (v, g) = x
        .iter()
        .zip(&codes)
        .filter_map(|(v, c)| match c {
            Some(c) if !v.is_nan() => Some((*v, *c as usize)),
            _ => None,
        })
        .unzip();
    Ok((v, g, k))
}

pub(crate) fn anova_f(x: &[f64], g: &[usize], k: usize) -> f64 {
    let n = x.len();
    let mut sum = vec![0.0; k];
    let mut cnt = vec![0usize; k];
    for (v, &c) in x.iter().zip(g) {
        sum[c] += v;
        cnt[c] += 1;
    }
    let groups = cnt.iter().filter(|&&c| c > 0).count();
    if groups < 2 || n <= groups {
        return f64::NAN;
    }
    let grand = x.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = sum.iter().zip(&cnt).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let ssb: f64 = means.iter().zip(&cnt).map(|(m, &c)| c as f64 * (m - grand).powi(2)).sum();
    let ssw: f64 = x.iter().zip(g).map(|(v, &c)| (v - means[c]).powi(2)).sum();
    (ssb / (groups - 1) as f64) / (ssw / (n - groups) as f64)
}

/// Kruskal-Wallis statistic with the usual correction for ties.
pub(crate) fn kruskal_h(x: &[f64], g: &[usize], k: usize) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let r = average_ranks(x);
    let mut rs = vec![0.0; k];
    let mut cnt = vec![0usize; k];
    for (ri, &c) in r.iter().zip(g) {
        rs[c] += ri;
        cnt[c] += 1;
    }
    let h = 12.0 / (n * (n + 1.0))
        * rs.iter().zip(&cnt).filter(|(_, &c)| c > 0).map(|(s, &c)| s * s / c as f64).sum::<f64>()
        - 3.0 * (n + 1.0);
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        ties += (j as f64).powi(3) - j as f64;
        i += j;
    }
    let corr = 1.0 - ties / (n.powi(3) - n);
    if corr == 0.0 {
        f64::NAN
    } else {
        h / corr
    }
}

pub(crate) const N_BINS: usize = 10;

/// Bin index per row: equal-width bins over the observed range for numeric
/// columns, levels for categorical ones. Missing cells get the last bin.
pub(crate) fn bin_column(c: &Column) -> (Vec<usize>, usize) {
    if let Some(codes) = c.category_codes() {
        let nl = c.category_levels().map_or(0, |l| l.len());
        return (codes.iter().map(|o| o.map_or(nl, |v| v as usize)).collect(), nl + 1);
    }
    let x = c.to_f64();
    let (lo, hi) = x.iter().filter(|v| !v.is_nan()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let bins = x
        .iter()
        .map(|v| {
            if v.is_nan() {
                N_BINS
            } else if hi > lo {
                (((v - lo) / (hi - lo) * N_BINS as f64).floor() as usize).min(N_BINS - 1)
            } else {
                0
            }
        })
        .collect();
    (bins, N_BINS + 1)
}

/// Contingency counts of bins against classes, ignoring rows without class.
fn contingency(bins: &[usize], nb: usize, cls: &[Option<u32>], k: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; k]; nb];
    for (b, c) in bins.iter().zip(cls) {
        if let Some(c) = c {
            t[*b][*c as usize] += 1.0;
        }
    }
    t
}

pub(crate) fn cramers_v(bins: &[usize], nb: usize, cls: &[Option<u32>], k: usize) -> f64 {
    let t = contingency(bins, nb, cls, k);
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..k).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let n: f64 = rows.iter().sum();
    let r_used = rows.iter().filter(|v| **v > 0.0).count();
    let c_used = cols.iter().filter(|v| **v > 0.0).count();
    let m = r_used.min(c_used);
    if m < 2 || n == 0.0 {
        return 0.0;
    }
    let mut chi2 = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                chi2 += (o - e).powi(2) / e;
            }
        }
    }
    (chi2 / (n * (m - 1) as f64)).sqrt()
}

fn entropy(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    -counts.iter().filter(|c| **c > 0.0).map(|c| c / n * (c / n).ln()).sum::<f64>()
}

pub(crate) fn information_gain(bins: &[usize], nb: usize, cls: &[Option<u32>], k: usize) -> f64 {
    let t = contingency(bins, nb, cls, k);
    let cols: Vec<f64> = (0..k).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let n: f64 = cols.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    let cond: f64 = t.iter().map(|r| r.iter().sum::<f64>() / n * entropy(r)).sum();
    entropy(&cols) - cond
}

/// Filter scores of every task feature for several methods.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterValues {
    pub task_id: String,
    pub features: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub methods: Vec<String>,
    /// scores[m][j]: method m, feature j. Missing scores are NaN.
    pub scores: Vec<Vec<f64>>,
}

impl FilterValues {
    pub fn method_scores(&self, method: &str) -> Option<&[f64]> {
        self.methods.iter().position(|m| m == method).map(|i| self.scores[i].as_slice())
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["name".to_string(), "type".to_string()];
        header.extend(self.methods.iter().cloned());
        let mut t = Table::new(header);
        for (j, f) in self.features.iter().enumerate() {
            let mut row = vec![Cell::from(f.as_str()), Cell::Str(self.kinds[j].to_string())];
            row.extend(self.scores.iter().map(|s| Cell::Num(s[j])));
            t.push(row);
        }
        t
    }
}

impl fmt::Display for FilterValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FilterValues:")?;
        writeln!(f, "Task: {}", self.task_id)?;
        write!(f, "{:>4} {:>16} {:>8}", "", "name", "type")?;
        for m in &self.methods {
            write!(f, " {m:>16}")?;
        }
        for (j, name) in self.features.iter().enumerate() {
            write!(f, "\n{:>4} {name:>16} {:>8}", j + 1, self.kinds[j].to_string())?;
            for s in &self.scores {
                write!(f, " {:>16}", signif(s[j], 7))?;
            }
        }
        Ok(())
    }
}

pub fn filter_values<S: AsRef<str>>(task: &Task, methods: &[S]) -> Result<FilterValues> {
    if methods.is_empty() {
        return Err(Error::arg("no filter method given"));
    }
    let names = task.feature_names();
    let cols: Vec<&Column> = names.iter().map(|n| task.data().column(n)).collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(methods.len());
    for m in methods {
        let filter = get_filter(m.as_ref())?;
        if !filter.task_kinds.contains(&task.kind()) {
            return Err(Error::arg(format!("filter '{}' does not support {} tasks", filter.name, task.kind())));
        }
        let idx: Vec<usize> = (0..cols.len()).filter(|&j| filter.feature_kinds.contains(&cols[j].kind())).collect();
        let supported: Vec<&Column> = idx.iter().map(|&j| cols[j]).collect();
        let s = (filter.fun)(task, &supported)?;
        if s.len() != supported.len() {
            return Err(Error::data(format!("filter '{}' returned {} scores for {} features", filter.name, s.len(), supported.len())));
        }
        let mut all = vec![f64::NAN; cols.len()];
        for (j, v) in idx.into_iter().zip(s) {
            all[j] = v;
        }
        scores.push(all);
    }
    Ok(FilterValues {
        task_id: task.id().to_string(),
        features: names,
        kinds: cols.iter().map(|c| c.kind()).collect(),
        methods: methods.iter().map(|m| m.as_ref().to_string()).collect(),
        scores,
    })
}

/// How many features to keep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterSelect {
    Abs(usize),
    Perc(f64),
    Threshold(f64),
}

pub enum FilterSource<'a> {
    Method(&'a str),
    Values(&'a FilterValues),
}

/// Names of the features kept by `select`, in task column order.
pub fn filtered_feature_names(task: &Task, source: FilterSource<'_>, select: FilterSelect) -> Result<Vec<String>> {
    let owned;
    let (values, method) = match source {
        FilterSource::Method(m) => {
            owned = filter_values(task, &[m])?;
            (&owned, m.to_string())
        }
        FilterSource::Values(v) => {
            if v.methods.len() != 1 {
                return Err(Error::arg("filter values must hold exactly one method"));
            }
            (v, v.methods[0].clone())
        }
    };
    let feats = task.feature_names();
    let scores = values.method_scores(&method).expect("method present");
    let score_of = |name: &str| -> f64 {
        values.features.iter().position(|f| f == name).map_or(f64::NAN, |j| scores[j])
    };
    let s: Vec<f64> = feats.iter().map(|f| score_of(f)).map(|v| if v.is_nan() { f64::NEG_INFINITY } else { v }).collect();
    let p = feats.len();
    let keep: Vec<bool> = match select {
        FilterSelect::Threshold(t) => s.iter().map(|v| *v >= t).collect(),
        FilterSelect::Abs(_) | FilterSelect::Perc(_) => {
            let k = match select {
                FilterSelect::Abs(k) if k > p => {
                    return Err(Error::arg(format!("cannot keep {k} of {p} features")));
                }
                FilterSelect::Abs(k) => k,
                FilterSelect::Perc(q) if !(q > 0.0 && q <= 1.0) => {
                    return Err(Error::arg(format!("perc must lie in (0, 1], got {q}")));
                }
                FilterSelect::Perc(q) => round_count(q, p).max(1).min(p),
                FilterSelect::Threshold(_) => unreachable!(),
            };
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
            let mut keep = vec![false; p];
            for &j in &order[..k] {
                keep[j] = true;
            }
            keep
        }
    };
    Ok(feats.into_iter().zip(keep).filter(|(_, k)| *k).map(|(f, _)| f).collect())
}

pub fn filter_features(task: &Task, source: FilterSource<'_>, select: FilterSelect) -> Result<Task> {
    let keep = filtered_feature_names(task, source, select)?;
    subset_task(task, None, Some(&keep))
}

// ---------------------------------------------------------------------------
// Filter wrapper

struct FilterWrapper;

#[derive(Debug)]
pub struct FilterModel {
    pub features: Vec<String>,
    inner: WrappedModel,
}

fn filter_select_from(input: &TrainInput<'_>) -> Result<FilterSelect> {
    let set: Vec<FilterSelect> = [
        input.value("fw.abs").and_then(|v| v.as_i64()).map(|v| FilterSelect::Abs(v.max(0) as usize)),
        input.value("fw.perc").and_then(|v| v.as_f64()).map(FilterSelect::Perc),
        input.value("fw.threshold").and_then(|v| v.as_f64()).map(FilterSelect::Threshold),
    ]
    .into_iter()
    .flatten()
    .collect();
    match set.as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::param("exactly one of fw.abs, fw.perc and fw.threshold must be set")),
    }
}

impl Algorithm for FilterWrapper {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let method = input
            .value("fw.method")
            .and_then(|v| v.as_str().map(str::to_string))
            .ok_or_else(|| Error::param("fw.method is not set"))?;
        let select = filter_select_from(input)?;
        let features = filtered_feature_names(input.task, FilterSource::Method(&method), select)?;
        let sub = subset_task(input.task, None, Some(&features))?;
        let inner = train_next(input, &sub, input.weights)?;
        Ok(Box::new(FilterModel { features, inner }))
    }
}

impl Model for FilterModel {
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

/// Fuses `learner` with a filter: at training time only the features kept by
/// the filter on the training data are passed on.
pub fn make_filter_wrapper(learner: Learner, method: &str, select: FilterSelect) -> Result<Learner> {
    let filter = get_filter(method)?;
    if !filter.task_kinds.contains(&learner.kind()) {
        return Err(Error::arg(format!("filter '{method}' does not support {} tasks", learner.kind())));
    }
    let methods: Vec<ParamValue> =
        list_filters(Some(learner.kind())).into_iter().map(|f| ParamValue::Str(f.name)).collect();
    let ps = ParamSet::new(vec![
        Param::discrete("fw.method", methods),
        Param::integer("fw.abs", 0, i64::MAX),
        Param::numeric("fw.perc", 0.0, 1.0),
        Param::numeric("fw.threshold", f64::NEG_INFINITY, f64::INFINITY),
    ])?;
    let id = format!("{}.filtered", learner.id());
    let (kind, props, pt) = (learner.kind(), learner.properties().clone(), learner.predict_type());
    let l = Learner::from_parts("FilterWrapper", kind, props, ps, Arc::new(FilterWrapper), Some(learner))?
        .set_id(&id)
        .set_predict_type(pt)?
        .set_hyperpar("fw.method", method)?;
    match select {
        FilterSelect::Abs(k) => l.set_hyperpar("fw.abs", k),
        FilterSelect::Perc(q) => l.set_hyperpar("fw.perc", q),
        FilterSelect::Threshold(t) => l.set_hyperpar("fw.threshold", t),
    }
}

pub fn get_filtered_features(model: &WrappedModel) -> Option<&[String]> {
    model.find::<FilterModel>().map(|m| m.features.as_slice())
}

// ---------------------------------------------------------------------------
// Wrapper-based selection

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatSelMethod {
    Exhaustive,
    Random,
    #[default]
    Sequential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeqMethod {
    #[default]
    Sfs,
    Sbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatSelControl {
    pub method: FeatSelMethod,
    pub maxit: usize,
    /// Inclusion probability per feature for random search.
    pub prob: f64,
    pub seq_method: SeqMethod,
    /// Minimal improvement for a forward step.
    pub alpha: f64,
    /// A backward step is taken only if the worsening is below this value.
    pub beta: f64,
    pub max_features: Option<usize>,
}

impl Default for FeatSelControl {
    fn default() -> Self {
        FeatSelControl {
            method: FeatSelMethod::Sequential,
            maxit: 100,
            prob: 0.5,
            seq_method: SeqMethod::Sfs,
            alpha: 0.01,
            beta: -0.001,
            max_features: None,
        }
    }
}

impl FeatSelControl {
    pub fn exhaustive() -> Self {
        FeatSelControl { method: FeatSelMethod::Exhaustive, ..Default::default() }
    }

    pub fn random(maxit: usize) -> Self {
        FeatSelControl { method: FeatSelMethod::Random, maxit, ..Default::default() }
    }

    pub fn sfs(alpha: f64) -> Self {
        FeatSelControl { alpha, ..Default::default() }
    }

    pub fn sbs(beta: f64) -> Self {
        FeatSelControl { seq_method: SeqMethod::Sbs, beta, ..Default::default() }
    }
}

pub const MAX_EXHAUSTIVE_FEATURES: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatSelEntry {
    pub selected: Vec<bool>,
    pub y: Vec<f64>,
    /// 1-based evaluation index, or step number for sequential search.
    pub dob: usize,
    pub error: Option<String>,
    pub exec_time: f64,
}

#[derive(Clone, Debug)]
pub struct FeatSelPath {
    pub features: Vec<String>,
    pub y_names: Vec<String>,
    pub minimize: Vec<bool>,
    pub entries: Vec<FeatSelEntry>,
}

impl FeatSelPath {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.entries.iter().map(|e| e.y[j]).collect()
    }

    pub fn to_table(&self, exec_time: bool) -> Table {
        let mut header = self.features.clone();
        header.extend(self.y_names.iter().cloned());
        header.extend(["dob", "error.message", "exec.time"].map(String::from));
        let mut t = Table::new(header);
        for e in &self.entries {
            let mut row: Vec<Cell> = e.selected.iter().map(|b| Cell::Int(*b as i64)).collect();
            row.extend(e.y.iter().map(|v| Cell::Num(*v)));
            row.push(Cell::from(e.dob));
            row.push(Cell::from(e.error.clone()));
            row.push(if exec_time { Cell::Num(e.exec_time) } else { Cell::Missing });
            t.push(row);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepKind {
    Init,
    Add(String),
    Remove(String),
}

/// One accepted step of a sequential search.
#[derive(Clone, Debug, PartialEq)]
pub struct PathStep {
    pub kind: StepKind,
    pub n_features: usize,
    pub perf: f64,
    /// Improvement over the previous step; none for the first one.
    pub diff: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FeatSelResult {
    pub learner_id: String,
    pub x: Vec<String>,
    pub y: IndexMap<String, f64>,
    pub opt_path: FeatSelPath,
    /// Accepted steps, for sequential search only.
    pub steps: Vec<PathStep>,
    pub stop_reason: Option<String>,
}

impl FeatSelResult {
    pub fn to_json(&self) -> serde_json::Value {
        let num = |v: f64| if v.is_finite() { serde_json::json!(v) } else { serde_json::Value::Null };
        serde_json::json!({
            "learner_id": self.learner_id,
            "x": self.x,
            "y": self.y.iter().map(|(k, v)| (k.clone(), num(*v))).collect::<serde_json::Map<_, _>>(),
        })
    }

    fn perf_line(&self) -> String {
        self.y.iter().map(|(k, v)| format!("{k}={}", signif3(*v))).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for FeatSelResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FeatSel result:")?;
        writeln!(f, "Features ({}): {}", self.x.len(), self.x.join(", "))?;
        write!(f, "{}", self.perf_line())
    }
}

/// Text report of the selected features and, for sequential search, the
/// accepted steps.
pub fn analyze_featsel_result(r: &FeatSelResult) -> String {
    let mut out = String::new();
    let y = r.y.iter().map(|(k, v)| format!("{k}={}", signif(*v, 6))).collect::<Vec<_>>().join(",");
    out.push_str(&format!("Features         : {}\n", r.x.len()));
    out.push_str(&format!("Performance      : {y}\n"));
    out.push_str(&r.x.join(", "));
    out.push('\n');
    if !r.steps.is_empty() {
        out.push_str("\nPath to optimum:\n");
        for s in &r.steps {
            let (label, name) = match &s.kind {
                StepKind::Init => ("Init", ""),
                StepKind::Add(n) => ("Add", n.as_str()),
                StepKind::Remove(n) => ("Remove", n.as_str()),
            };
            let diff = s.diff.map_or("NA".to_string(), |d| signif(d, 5));
            out.push_str(&format!(
                "- Features: {:>4}  {label:<7}: {name:<21} Perf = {}  Diff: {diff}  *\n",
                s.n_features,
                signif(s.perf, 5)
            ));
        }
        if let Some(reason) = &r.stop_reason {
            out.push_str(&format!("\nStopped, because {reason}\n"));
        }
    }
    out
}

struct Evaluator<'a> {
    learner: &'a Learner,
    task: &'a Task,
    resampling: Resampling,
    measures: Vec<Measure>,
    features: Vec<String>,
    featureless: Option<Learner>,
}

impl Evaluator<'_> {
    fn evaluate(&self, selected: &[bool], dob: usize, ctx: &Ctx) -> Result<FeatSelEntry> {
        let start = Instant::now();
        let names: Vec<&String> = self.features.iter().zip(selected).filter(|(_, s)| **s).map(|(f, _)| f).collect();
        let task = subset_task(self.task, None, Some(&names))?;
        let lrn = if names.is_empty() {
            self.featureless.as_ref().ok_or_else(|| {
                Error::arg(format!("the empty feature set cannot be scored for {} tasks", self.task.kind()))
            })?
        } else {
            self.learner
        };
        let opts = ResampleOptions::new().measures(self.measures.clone()).keep_pred(false);
        let r = resample(lrn, &task, self.resampling.clone(), &opts, ctx)?;
        let y = r.aggr.values().zip(&self.measures).map(|(v, m)| if v.is_nan() { m.worst } else { *v }).collect();
        Ok(FeatSelEntry {
            selected: selected.to_vec(),
            y,
            dob,
            error: r.err_msgs.iter().flatten().next().cloned(),
            exec_time: start.elapsed().as_secs_f64(),
        })
    }

    fn evaluate_all(&self, subsets: &[Vec<bool>], dob: impl Fn(usize) -> usize + Sync, label: &str, ctx: &Ctx) -> Result<Vec<FeatSelEntry>> {
        ctx.map_units(Level::SelectFeatures, label, subsets.len(), |i, c| self.evaluate(&subsets[i], dob(i), c))
            .into_iter()
            .collect()
    }

    /// Signed so that larger is better.
    fn gain(&self, v: f64) -> f64 {
        if self.measures[0].minimize { -v } else { v }
    }
}

fn featureless_for(base: &Learner) -> Option<Learner> {
    let class = match base.kind() {
        TaskKind::Classif => "classif.featureless",
        TaskKind::Regr => "regr.featureless",
        _ => return None,
    };
    let pt = if base.predict_type() == PredictType::Prob { PredictType::Prob } else { PredictType::Response };
    learner(class).ok()?.set_config(base.config()).set_predict_type(pt).ok()
}

/// Subsets of {0..p} of size at most `max`, by size and then in
/// lexicographic order of their members.
fn all_subsets(p: usize, max: usize) -> Vec<Vec<bool>> {
    fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<bool>>) {
        if cur.len() == k {
            let mut s = vec![false; p];
            cur.iter().for_each(|&j| s[j] = true);
            out.push(s);
            return;
        }
        for j in start..p {
            cur.push(j);
            rec(j + 1, p, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=max.min(p) {
        rec(0, p, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Searches feature subsets by resampling `learner` on each candidate and
/// returns the best one according to the first measure.
pub fn select_features(
    learner: &Learner,
    task: &Task,
    resampling: impl Into<Resampling>,
    control: &FeatSelControl,
    measures: &[Measure],
    ctx: &Ctx,
) -> Result<FeatSelResult> {
    let measures = if measures.is_empty() { vec![get_default_measure(task)] } else { measures.to_vec() };
    let features = task.feature_names();
    let p = features.len();
    let max = control.max_features.unwrap_or(p).min(p);
    let inst = resampling.into().instantiate(task, ctx)?;
    let ev = Evaluator {
        learner,
        task,
        resampling: inst.into(),
        measures: measures.clone(),
        features: features.clone(),
        featureless: featureless_for(learner),
    };
    let mut steps = Vec::new();
    let mut stop_reason = None;
    let (entries, best) = match control.method {
        FeatSelMethod::Exhaustive => {
            if p > MAX_EXHAUSTIVE_FEATURES {
                return Err(Error::arg(format!(
                    "exhaustive search over {p} features is refused; the limit is {MAX_EXHAUSTIVE_FEATURES}"
                )));
            }
            let subsets = all_subsets(p, max);
            let entries = ev.evaluate_all(&subsets, |i| i + 1, "featsel", ctx)?;
            let col: Vec<f64> = entries.iter().map(|e| e.y[0]).collect();
            let b = best_index(&col, measures[0].minimize).unwrap_or(0);
            (entries, b)
        }
        FeatSelMethod::Random => {
            if !(0.0..=1.0).contains(&control.prob) {
                return Err(Error::arg("prob must lie in [0, 1]"));
            }
            let mut rng = ctx.child("featsel-design", 0).rng();
            let subsets: Vec<Vec<bool>> = (0..control.maxit)
                .map(|_| loop {
                    let s: Vec<bool> = (0..p).map(|_| rng.random::<f64>() < control.prob).collect();
                    if s.iter().filter(|b| **b).count() <= max {
                        break s;
                    }
                })
                .collect();
            if subsets.is_empty() {
                return Err(Error::arg("random search needs maxit >= 1"));
            }
            let entries = ev.evaluate_all(&subsets, |i| i + 1, "featsel", ctx)?;
            let col: Vec<f64> = entries.iter().map(|e| e.y[0]).collect();
            let b = best_index(&col, measures[0].minimize).unwrap_or(0);
            (entries, b)
        }
        FeatSelMethod::Sequential => {
            let forward = control.seq_method == SeqMethod::Sfs;
            let mut cur = vec![!forward; p];
            let mut entries = vec![ev.evaluate(&cur, 1, &ctx.child("featsel-init", 0))?];
            let mut best = 0;
            steps.push(PathStep {
                kind: StepKind::Init,
                n_features: cur.iter().filter(|b| **b).count(),
                perf: entries[0].y[0],
                diff: None,
            });
            let mut step = 1;
            loop {
                let n_sel = cur.iter().filter(|b| **b).count();
                if forward && n_sel >= max {
                    stop_reason = Some("the maximal number of features was reached.".into());
                    break;
                }
                let moves: Vec<usize> = (0..p).filter(|&j| cur[j] != forward).collect();
                if moves.is_empty() || (!forward && n_sel == 0) {
                    stop_reason = Some(format!("no features are left to {}.", if forward { "add" } else { "remove" }));
                    break;
                }
                let cands: Vec<Vec<bool>> = moves
                    .iter()
                    .map(|&j| {
                        let mut s = cur.clone();
                        s[j] = forward;
                        s
                    })
                    .collect();
                step += 1;
                let evals = ev.evaluate_all(&cands, |_| step, &format!("featsel-step{step}"), ctx)?;
                let col: Vec<f64> = evals.iter().map(|e| e.y[0]).collect();
                let bi = best_index(&col, measures[0].minimize).unwrap_or(0);
                let cur_perf = entries[best].y[0];
                let improvement = ev.gain(col[bi]) - ev.gain(cur_perf);
                let base = entries.len();
                entries.extend(evals);
                let accept = if forward { improvement >= control.alpha } else { -improvement < control.beta };
                if !accept {
                    stop_reason = Some(format!(
                        "no {} feature was found.",
                        if forward { "improving" } else { "removable" }
                    ));
                    break;
                }
                cur = cands[bi].clone();
                best = base + bi;
                let name = features[moves[bi]].clone();
                steps.push(PathStep {
                    kind: if forward { StepKind::Add(name) } else { StepKind::Remove(name) },
                    n_features: cur.iter().filter(|b| **b).count(),
                    perf: col[bi],
                    diff: Some(improvement),
                });
            }
            (entries, best)
        }
    };
    let e = &entries[best];
    let x: Vec<String> = features.iter().zip(&e.selected).filter(|(_, s)| **s).map(|(f, _)| f.clone()).collect();
    let y_names: Vec<String> = measures.iter().map(|m| m.result_name()).collect();
    let y = y_names.iter().cloned().zip(e.y.iter().copied()).collect();
    let result = FeatSelResult {
        learner_id: learner.id().to_string(),
        x,
        y,
        opt_path: FeatSelPath {
            features,
            y_names,
            minimize: measures.iter().map(|m| m.minimize).collect(),
            entries,
        },
        steps,
        stop_reason,
    };
    log::info!("[FeatSel] Result: {}", result.to_string().replace('\n', " "));
    Ok(result)
}

// ---------------------------------------------------------------------------
// Feature selection wrapper

struct FeatSelWrapper {
    resampling: Resampling,
    control: FeatSelControl,
    measures: Vec<Measure>,
}

#[derive(Debug)]
pub struct FeatSelModel {
    pub result: FeatSelResult,
    inner: WrappedModel,
}

impl Algorithm for FeatSelWrapper {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let next = input.learner.next().ok_or_else(|| Error::arg("feature selection wrapper without learner"))?;
        let task = match input.weights {
            Some(w) => input.task.with_weights(Some(w.to_vec()))?,
            None => input.task.clone(),
        };
        let result = select_features(
            next,
            &task,
            self.resampling.clone(),
            &self.control,
            &self.measures,
            &input.ctx.child("featsel", 0),
        )?;
        let sub = subset_task(input.task, None, Some(&result.x))?;
        let inner = if result.x.is_empty() {
            let fl = featureless_for(next).ok_or_else(|| Error::arg("no features were selected"))?;
            crate::train::train(&fl, &sub, None, input.weights, input.ctx)?
        } else {
            train_next(input, &sub, input.weights)?
        };
        Ok(Box::new(FeatSelModel { result, inner }))
    }
}

impl Model for FeatSelModel {
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

pub fn make_featsel_wrapper(
    learner: Learner,
    resampling: impl Into<Resampling>,
    control: FeatSelControl,
    measures: Vec<Measure>,
) -> Result<Learner> {
    let id = format!("{}.featsel", learner.id());
    let (kind, props, pt) = (learner.kind(), learner.properties().clone(), learner.predict_type());
    let algo = FeatSelWrapper { resampling: resampling.into(), control, measures };
    Ok(Learner::from_parts("FeatSelWrapper", kind, props, ParamSet::empty(), Arc::new(algo), Some(learner))?
        .set_id(&id)
        .set_predict_type(pt)?)
}

pub fn get_featsel_result(model: &WrappedModel) -> Option<&FeatSelResult> {
    model.find::<FeatSelModel>().map(|m| &m.result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gaussian_classif_task, iris_task, linear_regr_task};
    use crate::measures::get_measure;
    use crate::resample::ResampleDesc;

    #[test]
    fn iris_anova_matches_reference() {
        let v = filter_values(&iris_task(), &["anova.test"]).unwrap();
        let s = v.method_scores("anova.test").unwrap();
        assert!((s[0] - 119.26450).abs() < 1e-4);
        assert!((s[1] - 49.16004).abs() < 1e-4);
    }

    #[test]
    fn variance_and_correlation_edge_cases() {
        let task = linear_regr_task(50, 0.0, 1);
        let data = task.data().with_column(Column::numeric("c", vec![2.0; 50])).unwrap();
        let data = data.with_column(Column::numeric("dup", task.regr_target().unwrap().to_vec())).unwrap();
        let t = task.with_data(data).unwrap();
        let v = filter_values(&t, &["variance", "linear.correlation"]).unwrap();
        let c = v.features.iter().position(|f| f == "c").unwrap();
        let d = v.features.iter().position(|f| f == "dup").unwrap();
        assert_eq!(v.scores[0][c], 0.0);
        assert!((v.scores[1][d] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_features_abs_perc_threshold() {
        let t = iris_task();
        assert_eq!(filter_features(&t, FilterSource::Method("anova.test"), FilterSelect::Abs(2)).unwrap().n_features(), 2);
        assert_eq!(filter_features(&t, FilterSource::Method("anova.test"), FilterSelect::Perc(0.25)).unwrap().n_features(), 1);
        let all = filter_features(&t, FilterSource::Method("anova.test"), FilterSelect::Threshold(f64::MIN)).unwrap();
        assert_eq!(all.feature_names(), t.feature_names());
        assert!(filter_features(&t, FilterSource::Method("anova.test"), FilterSelect::Abs(5)).is_err());
        assert!(filter_features(&t, FilterSource::Method("anova.test"), FilterSelect::Perc(0.0)).is_err());
        assert!(filter_values(&t, &["nope"]).is_err());
    }

    #[test]
    fn registered_filter_is_usable() {
        let f = Filter {
            name: "alphabetical.test".into(),
            desc: "Scores by reverse alphabetical order".into(),
            task_kinds: vec![TaskKind::Classif, TaskKind::Regr],
            feature_kinds: ALL_KINDS.to_vec(),
            fun: Arc::new(|_t: &Task, cols: &[&Column]| {
                let mut names: Vec<&str> = cols.iter().map(|c| c.name()).collect();
                names.sort();
                Ok(cols.iter().map(|c| (cols.len() - names.iter().position(|n| *n == c.name()).unwrap()) as f64).collect())
            }),
        };
        register_filter(f.clone()).unwrap();
        assert!(register_filter(f).is_err());
        assert!(list_filters(None).iter().any(|f| f.name == "alphabetical.test"));
        let t = filter_features(&iris_task(), FilterSource::Method("alphabetical.test"), FilterSelect::Abs(1)).unwrap();
        assert_eq!(t.feature_names(), vec!["Petal.Length"]);
    }

    #[test]
    fn exhaustive_enumerates_all_subsets() {
        let task = gaussian_classif_task(60, 4, 3);
        let r = select_features(
            &learner("classif.lda").unwrap(),
            &task,
            ResampleDesc::cv(3),
            &FeatSelControl::exhaustive(),
            &[get_measure("mmce").unwrap()],
            &Ctx::new(1),
        )
        .unwrap();
        assert_eq!(r.opt_path.len(), 16);
        let col = r.opt_path.column(0);
        assert!(col.iter().all(|v| r.y["mmce.test.mean"] <= *v));
    }

    #[test]
    fn sfs_with_huge_alpha_selects_nothing() {
        let task = gaussian_classif_task(60, 3, 3);
        let r = select_features(
            &learner("classif.lda").unwrap(),
            &task,
            ResampleDesc::cv(3),
            &FeatSelControl::sfs(2.0),
            &[],
            &Ctx::new(1),
        )
        .unwrap();
        assert!(r.x.is_empty());
        let rep = analyze_featsel_result(&r);
        assert_eq!(rep.matches("Init").count(), 1);
        assert!(!rep.contains("Add "));
    }

    #[test]
    fn sfs_path_improves_by_alpha() {
        let task = gaussian_classif_task(80, 4, 5);
        let r = select_features(
            &learner("classif.lda").unwrap(),
            &task,
            ResampleDesc::cv(4),
            &FeatSelControl::sfs(0.01),
            &[],
            &Ctx::new(2),
        )
        .unwrap();
        assert!(!r.x.is_empty());
        for w in r.steps.windows(2) {
            assert!(w[0].perf - w[1].perf >= 0.01 - 1e-12);
        }
        assert!(analyze_featsel_result(&r).contains("Add    : "));
    }

    #[test]
    fn sbs_reports_remove_steps() {
        let task = gaussian_classif_task(80, 5, 5);
        let r = select_features(
            &learner("classif.lda").unwrap(),
            &task,
            ResampleDesc::cv(4),
            &FeatSelControl::sbs(0.05),
            &[],
            &Ctx::new(2),
        )
        .unwrap();
        assert!(r.x.len() < 5);
        assert!(analyze_featsel_result(&r).contains("Remove "));
    }

    #[test]
    fn filter_wrapper_with_all_features_matches_base() {
        let task = iris_task();
        let base = learner("classif.lda").unwrap();
        let w = make_filter_wrapper(base.clone(), "anova.test", FilterSelect::Abs(4)).unwrap();
        let ctx = Ctx::new(1);
        let mw = crate::train::train(&w, &task, None, None, &ctx).unwrap();
        let mb = crate::train::train(&base, &task, None, None, &ctx).unwrap();
        assert_eq!(get_filtered_features(&mw).unwrap().len(), 4);
        let pw = crate::train::predict_task(&mw, &task, None, &ctx).unwrap();
        let pb = crate::train::predict_task(&mb, &task, None, &ctx).unwrap();
        assert_eq!(pw.response, pb.response);
    }

    #[test]
    fn featsel_wrapper_random_single_subset() {
        let task = gaussian_classif_task(60, 3, 1);
        let w = make_featsel_wrapper(
            learner("classif.lda").unwrap(),
            ResampleDesc::holdout(),
            FeatSelControl::random(1),
            vec![],
        )
        .unwrap();
        let m = crate::train::train(&w, &task, None, None, &Ctx::new(4)).unwrap();
        let r = get_featsel_result(&m).unwrap();
        assert_eq!(r.opt_path.len(), 1);
        assert_eq!(m.next_model().unwrap().features(), r.x.as_slice());
    }

    #[test]
    fn information_gain_of_noise_is_small() {
        let task = gaussian_classif_task(2000, 3, 11);
        let v = filter_values(&task, &["information.gain"]).unwrap();
        assert!(v.scores[0][2] < 0.05);
        assert!(v.scores[0][0] > 0.1);
    }
}
