//! Performance measures, aggregation schemes and the measure registry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, RwLock};

use once_cell::sync::Lazy;

use crate::error::{Error, Result};
use crate::learner::{Learner, PredictType};
use crate::prediction::{binary_rates, Prediction, Response, SetKind, Truth};
use crate::task::{Task, TaskKind};
use crate::train::WrappedModel;
use crate::util::{average_ranks, euclid_sq, mean, median, sd};

/// What a measure function gets to look at.
#[derive(Clone, Copy)]
pub struct MeasureInput<'a> {
    pub pred: &'a Prediction,
    pub task: Option<&'a Task>,
    pub model: Option<&'a WrappedModel>,
}

pub type MeasureFn = Arc<dyn Fn(&MeasureInput<'_>) -> Result<f64> + Send + Sync>;

/// Per-iteration values and context handed to an aggregation.
pub struct AggrInput<'a> {
    pub test: &'a [f64],
    pub train: &'a [f64],
    pub measure: &'a Measure,
    /// Merged resampling prediction with iteration and set columns.
    pub pred: Option<&'a Prediction>,
    pub task: Option<&'a Task>,
}

pub type AggrFn = Arc<dyn Fn(&AggrInput<'_>) -> Result<f64> + Send + Sync>;

#[derive(Clone)]
pub struct Aggregation {
    pub id: String,
    pub name: String,
    /// Subset of {"req.test", "req.train"}.
    pub properties: BTreeSet<String>,
    fun: AggrFn,
}

impl fmt::Debug for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Aggregation({})", self.id)
    }
}

impl Aggregation {
    pub fn new(id: &str, name: &str, properties: &[&str], fun: AggrFn) -> Self {
        Aggregation {
            id: id.into(),
            name: name.into(),
            properties: properties.iter().map(|s| s.to_string()).collect(),
            fun,
        }
    }

    pub fn needs_train(&self) -> bool {
        self.properties.contains("req.train")
    }

    pub fn aggregate(&self, input: &AggrInput<'_>) -> Result<f64> {
        if self.needs_train() && (input.train.is_empty() || input.train.iter().all(|v| v.is_nan())) {
            return Err(Error::MeasureRequirement {
                measure: format!("{}.{}", input.measure.id, self.id),
                missing: "req.train".into(),
            });
        }
        (self.fun)(input)
    }
}

#[derive(Clone)]
pub struct Measure {
    pub id: String,
    pub name: String,
    pub properties: BTreeSet<String>,
    pub minimize: bool,
    pub best: f64,
    pub worst: f64,
    pub aggr: Aggregation,
    /// Free-form parameters, e.g. the cost matrix of a cost measure.
    pub extra: BTreeMap<String, serde_json::Value>,
    fun: MeasureFn,
}

impl fmt::Debug for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Measure")
            .field("id", &self.id)
            .field("minimize", &self.minimize)
            .field("aggr", &self.aggr.id)
            .finish()
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Name: {}", self.name)?;
        writeln!(f, "Performance measure: {}", self.id)?;
        writeln!(f, "Properties: {}", self.properties.iter().cloned().collect::<Vec<_>>().join(","))?;
        writeln!(f, "Minimize: {}", if self.minimize { "TRUE" } else { "FALSE" })?;
        writeln!(f, "Best: {}; Worst: {}", fmt_bound(self.best), fmt_bound(self.worst))?;
        write!(f, "Aggregated by: {}", self.aggr.id)
    }
}

fn fmt_bound(x: f64) -> String {
    crate::data::fmt_num(x)
}

impl Measure {
    /// Evaluates the measure after checking its requirements.
    pub fn compute(&self, pred: &Prediction, task: Option<&Task>, model: Option<&WrappedModel>) -> Result<f64> {
        self.check(pred, task, model)?;
        let v = (self.fun)(&MeasureInput { pred, task, model })?;
        Ok(if v.is_nan() { f64::NAN } else { v })
    }

    fn check(&self, pred: &Prediction, task: Option<&Task>, model: Option<&WrappedModel>) -> Result<()> {
        let missing = |what: &str| Error::MeasureRequirement { measure: self.id.clone(), missing: what.into() };
        if self.has("req.task") && task.is_none() {
            return Err(missing("req.task"));
        }
        if self.has("req.model") && model.is_none() {
            return Err(missing("req.model"));
        }
        if self.has("predtype.prob") && (pred.predict_type != PredictType::Prob || pred.prob.is_none()) {
            return Err(missing("predtype.prob"));
        }
        if self.has("req.truth") && matches!(pred.truth, Truth::None) {
            return Err(missing("req.truth"));
        }
        let kind_ok = match pred.kind {
            TaskKind::Classif => {
                self.has("classif") && (pred.classes.len() <= 2 || self.has("classif.multi"))
            }
            TaskKind::Regr => self.has("regr"),
            TaskKind::Cluster => self.has("cluster"),
            TaskKind::Multilabel => self.has("multilabel"),
            TaskKind::Costsens => self.has("costsens"),
        };
        if !kind_ok {
            let what = if pred.kind == TaskKind::Classif && self.has("classif") {
                "classif.multi".to_string()
            } else {
                pred.kind.as_str().to_string()
            };
            return Err(missing(&what));
        }
        Ok(())
    }

    pub fn has(&self, prop: &str) -> bool {
        self.properties.contains(prop)
    }

    /// Name under which aggregated values are reported.
    pub fn result_name(&self) -> String {
        format!("{}.{}", self.id, self.aggr.id)
    }

    pub fn with_aggregation(&self, aggr: Aggregation) -> Measure {
        let mut m = self.clone();
        m.aggr = aggr;
        m
    }

    pub fn with_id(&self, id: &str) -> Measure {
        let mut m = self.clone();
        m.id = id.into();
        m
    }
}

pub fn set_aggregation(measure: &Measure, aggr: &Aggregation) -> Measure {
    measure.with_aggregation(aggr.clone())
}

/// Builds a custom measure. Properties use the names listed by
/// [`MEASURE_PROPERTIES`].
pub fn make_measure<F>(
    id: &str,
    name: &str,
    properties: &[&str],
    minimize: bool,
    best: f64,
    worst: f64,
    fun: F,
) -> Result<Measure>
where
    F: Fn(&MeasureInput<'_>) -> Result<f64> + Send + Sync + 'static,
{
    if id.is_empty() {
        return Err(Error::arg("measure id must not be empty"));
    }
    if let Some(p) = properties.iter().find(|p| !MEASURE_PROPERTIES.contains(p)) {
        return Err(Error::unknown("measure property", *p));
    }
    if minimize && best > worst || !minimize && best < worst {
        return Err(Error::arg(format!("measure '{id}': best and worst do not match the optimisation direction")));
    }
    Ok(Measure {
        id: id.into(),
        name: name.into(),
        properties: properties.iter().map(|s| s.to_string()).collect(),
        minimize,
        best,
        worst,
        aggr: get_aggregation("test.mean")?,
        extra: BTreeMap::new(),
        fun: Arc::new(fun),
    })
}

pub const MEASURE_PROPERTIES: &[&str] = &[
    "classif",
    "classif.multi",
    "regr",
    "cluster",
    "multilabel",
    "costsens",
    "req.pred",
    "req.truth",
    "req.task",
    "req.model",
    "predtype.prob",
];

/// Measure averaging `costs[truth][response]` over rows. Rows of `costs`
/// are true classes, columns predicted classes, both in `classes` order.
pub fn make_cost_measure(id: &str, classes: &[String], costs: &[Vec<f64>], best: f64, worst: f64) -> Result<Measure> {
    let k = classes.len();
    if k < 2 || costs.len() != k || costs.iter().any(|r| r.len() != k) {
        return Err(Error::arg("cost matrix must be K x K with one row and column per class"));
    }
    let classes_c = classes.to_vec();
    let costs_c = costs.to_vec();
    let mut m = make_measure(id, "Custom costs", &["classif", "classif.multi", "req.pred", "req.truth"], true, best, worst, move |inp| {
        let pred = inp.pred;
        let map = class_permutation(&pred.classes, &classes_c)?;
        let truth = pred.class_truth()?;
        let resp = pred.class_response()?;
        let mut tot = 0.0;
        for (t, r) in truth.iter().zip(resp) {
            match (t, r) {
                (Some(t), Some(r)) => tot += costs_c[map[*t as usize]][map[*r as usize]],
                _ => return Ok(f64::NAN),
            }
        }
        Ok(tot / truth.len() as f64)
    })?;
    m.extra.insert("costs".into(), serde_json::json!({ "classes": classes, "values": costs }));
    Ok(m)
}

/// Maps prediction class indices to positions in `named`.
fn class_permutation(pred_classes: &[String], named: &[String]) -> Result<Vec<usize>> {
    if pred_classes.len() != named.len() {
        return Err(Error::arg(format!(
            "cost matrix has {} classes but the prediction has {}",
            named.len(),
            pred_classes.len()
        )));
    }
    pred_classes
        .iter()
        .map(|c| {
            named
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| Error::arg(format!("class '{c}' missing from the cost matrix")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Builtin measure functions

fn class_pairs(pred: &Prediction) -> Result<Option<Vec<(usize, usize)>>> {
    let truth = pred.class_truth()?;
    let resp = pred.class_response()?;
    let mut out = Vec::with_capacity(truth.len());
    for (t, r) in truth.iter().zip(resp) {
        match (t, r) {
            (Some(t), Some(r)) => out.push((*t as usize, *r as usize)),
            (None, _) => return Err(Error::data("missing truth in prediction")),
            (_, None) => return Ok(None),
        }
    }
    Ok(Some(out))
}

fn mmce(pred: &Prediction) -> Result<f64> {
    Ok(match class_pairs(pred)? {
        None => f64::NAN,
        Some(p) if p.is_empty() => f64::NAN,
        Some(p) => p.iter().filter(|(t, r)| t != r).count() as f64 / p.len() as f64,
    })
}

fn ber(pred: &Prediction) -> Result<f64> {
    let Some(pairs) = class_pairs(pred)? else { return Ok(f64::NAN) };
    let k = pred.n_classes();
    let mut tot = vec![0usize; k];
    let mut err = vec![0usize; k];
    for (t, r) in &pairs {
        tot[*t] += 1;
        if t != r {
            err[*t] += 1;
        }
    }
    let per: Vec<f64> = (0..k).filter(|&c| tot[c] > 0).map(|c| err[c] as f64 / tot[c] as f64).collect();
    Ok(mean(&per))
}

fn binary_rate(pred: &Prediction, key: &str) -> Result<f64> {
    let pos = pred.positive.ok_or_else(|| Error::arg("binary measure on a non-binary prediction"))?;
    let Some(pairs) = class_pairs(pred)? else { return Ok(f64::NAN) };
    let (mut tp, mut fn_, mut fp, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for (t, r) in pairs {
        match (t == pos, r == pos) {
            (true, true) => tp += 1.0,
            (true, false) => fn_ += 1.0,
            (false, true) => fp += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    Ok(binary_rates(tp, fn_, fp, tn)[key])
}

/// Mann-Whitney AUC of `scores` for `labels` (true = positive). NaN when a
/// class is absent.
pub fn auc_score(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 || scores.iter().any(|s| s.is_nan()) {
        return f64::NAN;
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let (np, nn) = (n_pos as f64, n_neg as f64);
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

fn auc(pred: &Prediction) -> Result<f64> {
    let pos = pred.positive.ok_or_else(|| Error::arg("auc needs a binary prediction"))?;
    let truth = pred.class_truth()?;
    if truth.iter().any(|t| t.is_none()) {
        return Err(Error::data("missing truth in prediction"));
    }
    let labels: Vec<bool> = truth.iter().map(|t| t.map(|t| t as usize) == Some(pos)).collect();
    Ok(auc_score(&pred.positive_prob()?, &labels))
}

fn logloss(pred: &Prediction) -> Result<f64> {
    let truth = pred.class_truth()?;
    let prob = pred.prob()?;
    let mut tot = 0.0;
    for (t, p) in truth.iter().zip(prob) {
        let t = t.ok_or_else(|| Error::data("missing truth in prediction"))? as usize;
        let v = p[t];
        if v.is_nan() {
            return Ok(f64::NAN);
        }
        tot -= v.clamp(1e-15, 1.0 - 1e-15).ln();
    }
    Ok(tot / truth.len() as f64)
}

fn brier(pred: &Prediction) -> Result<f64> {
    let truth = pred.class_truth()?;
    let prob = pred.prob()?;
    let mut tot = 0.0;
    for (t, p) in truth.iter().zip(prob) {
        let t = t.ok_or_else(|| Error::data("missing truth in prediction"))? as usize;
        tot += p.iter().enumerate().map(|(c, v)| (v - if c == t { 1.0 } else { 0.0 }).powi(2)).sum::<f64>();
    }
    Ok(tot / truth.len() as f64)
}

fn residuals(pred: &Prediction) -> Result<Vec<f64>> {
    let t = pred.regr_truth()?;
    let r = pred.regr_response()?;
    Ok(t.iter().zip(r).map(|(a, b)| b - a).collect())
}

fn mse(pred: &Prediction) -> Result<f64> {
    Ok(mean(&residuals(pred)?.iter().map(|e| e * e).collect::<Vec<_>>()))
}

fn cluster_points(inp: &MeasureInput<'_>) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let task = inp.task.expect("checked");
    let pred = inp.pred;
    let rows: Vec<usize> = match &pred.id {
        Some(ids) => ids.clone(),
        None if task.size() == pred.len() => (0..pred.len()).collect(),
        None => return Err(Error::arg("cluster measures need predictions made on task rows")),
    };
    let feats = task.features()?;
    let names: Vec<String> = feats
        .columns()
        .iter()
        .filter(|c| c.as_numeric().is_some())
        .map(|c| c.name().to_string())
        .collect();
    let all = feats.select(&names)?.numeric_rows(&names)?;
    let x = rows.iter().map(|&i| all[i].clone()).collect();
    let resp = pred.class_response()?;
    let mut labels = Vec::with_capacity(resp.len());
    for r in resp {
        match r {
            Some(r) => labels.push(*r as usize),
            None => return Ok((Vec::new(), Vec::new())),
        }
    }
    Ok((x, labels))
}

fn dunn(inp: &MeasureInput<'_>) -> Result<f64> {
    let (x, lab) = cluster_points(inp)?;
    if x.is_empty() {
        return Ok(f64::NAN);
    }
    let mut min_between = f64::INFINITY;
    let mut max_within: f64 = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let d = euclid_sq(&x[i], &x[j]).sqrt();
            if lab[i] == lab[j] {
                max_within = max_within.max(d);
            } else {
                min_between = min_between.min(d);
            }
        }
    }
    if !min_between.is_finite() {
        return Ok(f64::NAN);
    }
    Ok(if max_within == 0.0 { f64::INFINITY } else { min_between / max_within })
}

fn silhouette(inp: &MeasureInput<'_>) -> Result<f64> {
    let (x, lab) = cluster_points(inp)?;
    if x.is_empty() {
        return Ok(f64::NAN);
    }
    let k = lab.iter().max().map_or(0, |m| m + 1);
    let sizes: Vec<usize> = (0..k).map(|c| lab.iter().filter(|l| **l == c).count()).collect();
    if sizes.iter().filter(|s| **s > 0).count() < 2 {
        return Ok(f64::NAN);
    }
    let mut widths = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut sums = vec![0.0; k];
        for j in 0..x.len() {
            if i != j {
                sums[lab[j]] += euclid_sq(&x[i], &x[j]).sqrt();
            }
        }
        let own = lab[i];
        if sizes[own] <= 1 {
            widths.push(0.0);
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        widths.push(if m == 0.0 { 0.0 } else { (b - a) / m });
    }
    Ok(mean(&widths))
}

fn davies_bouldin(inp: &MeasureInput<'_>) -> Result<f64> {
    let (x, lab) = cluster_points(inp)?;
    if x.is_empty() {
        return Ok(f64::NAN);
    }
    let p = x[0].len();
    let k = lab.iter().max().map_or(0, |m| m + 1);
    let mut cent = vec![vec![0.0; p]; k];
    let mut n = vec![0usize; k];
    for (r, &l) in x.iter().zip(&lab) {
        n[l] += 1;
        cent[l].iter_mut().zip(r).for_each(|(c, v)| *c += v);
    }
    let used: Vec<usize> = (0..k).filter(|&c| n[c] > 0).collect();
    if used.len() < 2 {
        return Ok(f64::NAN);
    }
    for &c in &used {
        cent[c].iter_mut().for_each(|v| *v /= n[c] as f64);
    }
    let mut scatter = vec![0.0; k];
    for (r, &l) in x.iter().zip(&lab) {
        scatter[l] += euclid_sq(r, &cent[l]).sqrt();
    }
    for &c in &used {
        scatter[c] /= n[c] as f64;
    }
    let vals: Vec<f64> = used
        .iter()
        .map(|&i| {
            used.iter()
                .filter(|&&j| j != i)
                .map(|&j| (scatter[i] + scatter[j]) / euclid_sq(&cent[i], &cent[j]).sqrt())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(mean(&vals))
}

fn label_rows(pred: &Prediction) -> Result<Option<Vec<(&[bool], &[bool])>>> {
    let Truth::Labels(truth) = &pred.truth else {
        return Err(Error::arg("multilabel measure needs multilabel truth"));
    };
    let Response::Labels(resp) = &pred.response else {
        return Err(Error::arg("multilabel measure needs a multilabel prediction"));
    };
    let mut out = Vec::with_capacity(truth.len());
    for (t, r) in truth.iter().zip(resp) {
        match r {
            Some(r) => out.push((t.as_slice(), r.as_slice())),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

fn per_row_ml(pred: &Prediction, f: fn(usize, usize, usize) -> f64) -> Result<f64> {
    let Some(rows) = label_rows(pred)? else { return Ok(f64::NAN) };
    let vals: Vec<f64> = rows
        .iter()
        .map(|(t, r)| {
            let nt = t.iter().filter(|v| **v).count();
            let np = r.iter().filter(|v| **v).count();
            let both = t.iter().zip(r.iter()).filter(|(a, b)| **a && **b).count();
            f(nt, np, both)
        })
        .collect();
    Ok(mean(&vals))
}

fn set_ratio(num: usize, den: usize, both_empty: bool) -> f64 {
    if den == 0 {
        if both_empty { 1.0 } else { 0.0 }
    } else {
        num as f64 / den as f64
    }
}

fn hamloss(pred: &Prediction) -> Result<f64> {
    let Some(rows) = label_rows(pred)? else { return Ok(f64::NAN) };
    let (mut wrong, mut tot) = (0usize, 0usize);
    for (t, r) in rows {
        wrong += t.iter().zip(r).filter(|(a, b)| a != b).count();
        tot += t.len();
    }
    Ok(if tot == 0 { f64::NAN } else { wrong as f64 / tot as f64 })
}

fn subset01(pred: &Prediction) -> Result<f64> {
    let Some(rows) = label_rows(pred)? else { return Ok(f64::NAN) };
    let n = rows.len();
    Ok(rows.iter().filter(|(t, r)| t != r).count() as f64 / n as f64)
}

/// Per-row cost vectors aligned with the prediction rows, with columns in
/// prediction class order.
fn row_costs(inp: &MeasureInput<'_>) -> Result<Vec<Vec<f64>>> {
    let task = inp.task.expect("checked");
    let table = task
        .costs()
        .ok_or_else(|| Error::arg("cost measures need a cost-sensitive task"))?;
    let pred = inp.pred;
    let map = class_permutation(&pred.classes, &table.classes)?;
    let rows: Vec<usize> = match &pred.id {
        Some(ids) => ids.clone(),
        None if task.size() == pred.len() => (0..pred.len()).collect(),
        None => return Err(Error::arg("cost measures need predictions made on task rows")),
    };
    Ok(rows
        .iter()
        .map(|&i| map.iter().map(|&j| table.rows[i][j]).collect())
        .collect())
}

fn meancosts(inp: &MeasureInput<'_>) -> Result<f64> {
    let costs = row_costs(inp)?;
    let resp = inp.pred.class_response()?;
    let mut tot = 0.0;
    for (c, r) in costs.iter().zip(resp) {
        match r {
            Some(r) => tot += c[*r as usize],
            None => return Ok(f64::NAN),
        }
    }
    Ok(tot / costs.len() as f64)
}

fn mcp(inp: &MeasureInput<'_>) -> Result<f64> {
    let mc = meancosts(inp)?;
    let costs = row_costs(inp)?;
    let best: Vec<f64> = costs.iter().map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    Ok(mc - mean(&best))
}

// ---------------------------------------------------------------------------
// Aggregations

fn b632plus(inp: &AggrInput<'_>) -> Result<f64> {
    let e_train = mean(inp.train);
    let e_oob = mean(inp.test);
    let pred = inp.pred.ok_or_else(|| Error::arg("b632plus needs the resampling predictions"))?;
    let test = pred.filter(None, Some(SetKind::Test));
    let gamma = no_information_value(inp.measure, &test, inp.task)?;
    let r = if e_oob > e_train && gamma > e_train {
        ((e_oob - e_train) / (gamma - e_train)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let w = 0.632 / (1.0 - 0.368 * r);
    Ok((1.0 - w) * e_train + w * e_oob)
}

/// Pairs of truth and response rows used for the no-information value: all
/// n^2 pairs when n is small, otherwise evenly spaced cyclic shifts, which
/// keep both marginal distributions exact.
const NO_INFO_MAX_PAIRS: usize = 250_000;

/// Value of the measure when truth and response are paired independently,
/// i.e. under the product of their marginal distributions.
fn no_information_value(measure: &Measure, pred: &Prediction, task: Option<&Task>) -> Result<f64> {
    let n = pred.len();
    if n == 0 {
        return Ok(f64::NAN);
    }
    let n_shifts = n.min((NO_INFO_MAX_PAIRS / n).max(1));
    let shifts: Vec<usize> = (0..n_shifts).map(|s| s * n / n_shifts).collect();
    let truth_rows: Vec<usize> = shifts.iter().flat_map(|_| 0..n).collect();
    let resp_rows: Vec<usize> = shifts.iter().flat_map(|&s| (0..n).map(move |i| (i + s) % n)).collect();
    let mut pairs = pred.subset(&truth_rows);
    let shifted = pred.subset(&resp_rows);
    pairs.response = shifted.response;
    pairs.prob = shifted.prob;
    pairs.se = shifted.se;
    pairs.id = None;
    measure.compute(&pairs, task, None)
}

fn builtin_aggregations() -> Vec<Aggregation> {
    fn simple(id: &str, name: &str, train: bool, f: fn(&[f64]) -> f64) -> Aggregation {
        let props: &[&str] = if train { &["req.train"] } else { &["req.test"] };
        Aggregation::new(id, name, props, Arc::new(move |inp| Ok(f(if train { inp.train } else { inp.test }))))
    }
    fn minv(x: &[f64]) -> f64 {
        if x.iter().any(|v| v.is_nan()) { f64::NAN } else { x.iter().copied().fold(f64::INFINITY, f64::min) }
    }
    fn maxv(x: &[f64]) -> f64 {
        if x.iter().any(|v| v.is_nan()) { f64::NAN } else { x.iter().copied().fold(f64::NEG_INFINITY, f64::max) }
    }
    fn sum(x: &[f64]) -> f64 {
        x.iter().sum()
    }
    fn nan_median(x: &[f64]) -> f64 {
        if x.iter().any(|v| v.is_nan()) { f64::NAN } else { median(x) }
    }
    vec![
        simple("test.mean", "Test mean", false, mean),
        simple("test.median", "Test median", false, nan_median),
        simple("test.sd", "Test sd", false, sd),
        simple("test.min", "Test min", false, minv),
        simple("test.max", "Test max", false, maxv),
        simple("test.sum", "Test sum", false, sum),
        simple("train.mean", "Train mean", true, mean),
        simple("train.median", "Train median", true, nan_median),
        simple("train.sd", "Train sd", true, sd),
        simple("train.min", "Train min", true, minv),
        simple("train.max", "Train max", true, maxv),
        Aggregation::new(
            "test.rmse",
            "Test RMSE",
            &["req.test"],
            Arc::new(|inp| Ok(mean(&inp.test.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt())),
        ),
        Aggregation::new(
            "test.join",
            "Test join",
            &["req.test"],
            Arc::new(|inp| {
                let pred = inp.pred.ok_or_else(|| Error::arg("test.join needs the resampling predictions"))?;
                inp.measure.compute(&pred.filter(None, Some(SetKind::Test)), inp.task, None)
            }),
        ),
        Aggregation::new(
            "b632",
            ".632 Bootstrap",
            &["req.train", "req.test"],
            Arc::new(|inp| Ok(0.368 * mean(inp.train) + 0.632 * mean(inp.test))),
        ),
        Aggregation::new("b632plus", ".632+ Bootstrap", &["req.train", "req.test"], Arc::new(b632plus)),
    ]
}

// ---------------------------------------------------------------------------
// Builtin measures

fn builtin_measures() -> Vec<Measure> {
    const CM: &[&str] = &["classif", "classif.multi", "req.pred", "req.truth"];
    const CB: &[&str] = &["classif", "req.pred", "req.truth"];
    const CP: &[&str] = &["classif", "req.pred", "req.truth", "predtype.prob"];
    const CMP: &[&str] = &["classif", "classif.multi", "req.pred", "req.truth", "predtype.prob"];
    const R: &[&str] = &["regr", "req.pred", "req.truth"];
    const CL: &[&str] = &["cluster", "req.pred", "req.task"];
    const ML: &[&str] = &["multilabel", "req.pred", "req.truth"];
    const CS: &[&str] = &["costsens", "req.pred", "req.task"];
    const ALL: &[&str] = &["classif", "classif.multi", "regr", "cluster", "multilabel", "costsens"];
    let inf = f64::INFINITY;
    let mk = |id: &str, name: &str, props: &[&str], minimize: bool, best: f64, worst: f64, f: MeasureFn| Measure {
        id: id.into(),
        name: name.into(),
        properties: props.iter().map(|s| s.to_string()).collect(),
        minimize,
        best,
        worst,
        aggr: builtin_aggregations().into_iter().find(|a| a.id == "test.mean").unwrap(),
        extra: BTreeMap::new(),
        fun: f,
    };
    let rate = |key: &'static str| -> MeasureFn { Arc::new(move |i: &MeasureInput<'_>| binary_rate(i.pred, key)) };
    let mut out = vec![
        mk("mmce", "Mean misclassification error", CM, true, 0.0, 1.0, Arc::new(|i| mmce(i.pred))),
        mk("acc", "Accuracy", CM, false, 1.0, 0.0, Arc::new(|i| Ok(1.0 - mmce(i.pred)?))),
        mk("ber", "Balanced error rate", CM, true, 0.0, 1.0, Arc::new(|i| ber(i.pred))),
        mk("tpr", "True positive rate", CB, false, 1.0, 0.0, rate("tpr")),
        mk("fpr", "False positive rate", CB, true, 0.0, 1.0, rate("fpr")),
        mk("fnr", "False negative rate", CB, true, 0.0, 1.0, rate("fnr")),
        mk("tnr", "True negative rate", CB, false, 1.0, 0.0, rate("tnr")),
        mk("ppv", "Positive predictive value", CB, false, 1.0, 0.0, rate("ppv")),
        mk("npv", "Negative predictive value", CB, false, 1.0, 0.0, rate("npv")),
        mk("auc", "Area under the curve", CP, false, 1.0, 0.0, Arc::new(|i| auc(i.pred))),
        mk("logloss", "Logarithmic loss", CMP, true, 0.0, inf, Arc::new(|i| logloss(i.pred))),
        mk("multiclass.brier", "Multiclass Brier score", CMP, true, 0.0, 2.0, Arc::new(|i| brier(i.pred))),
        mk("mse", "Mean of squared errors", R, true, 0.0, inf, Arc::new(|i| mse(i.pred))),
        mk("rmse", "Root mean squared error", R, true, 0.0, inf, Arc::new(|i| Ok(mse(i.pred)?.sqrt()))),
        mk(
            "mae",
            "Mean of absolute errors",
            R,
            true,
            0.0,
            inf,
            Arc::new(|i| Ok(mean(&residuals(i.pred)?.iter().map(|e| e.abs()).collect::<Vec<_>>()))),
        ),
        mk(
            "medse",
            "Median of squared errors",
            R,
            true,
            0.0,
            inf,
            Arc::new(|i| {
                let sq: Vec<f64> = residuals(i.pred)?.iter().map(|e| e * e).collect();
                Ok(if sq.iter().any(|v| v.is_nan()) { f64::NAN } else { median(&sq) })
            }),
        ),
        mk("dunn", "Dunn index", CL, false, inf, 0.0, Arc::new(dunn)),
        mk("silhouette", "Mean silhouette width", CL, false, 1.0, -1.0, Arc::new(silhouette)),
        mk("db", "Davies-Bouldin index", CL, true, 0.0, inf, Arc::new(davies_bouldin)),
        mk("multilabel.hamloss", "Hamming loss", ML, true, 0.0, 1.0, Arc::new(|i| hamloss(i.pred))),
        mk("multilabel.subset01", "Subset-0-1 loss", ML, true, 0.0, 1.0, Arc::new(|i| subset01(i.pred))),
        mk(
            "multilabel.f1",
            "F1 measure (multilabel)",
            ML,
            false,
            1.0,
            0.0,
            Arc::new(|i| per_row_ml(i.pred, |nt, np, both| set_ratio(2 * both, nt + np, nt + np == 0))),
        ),
        mk(
            "multilabel.acc",
            "Accuracy (multilabel)",
            ML,
            false,
            1.0,
            0.0,
            Arc::new(|i| per_row_ml(i.pred, |nt, np, both| set_ratio(both, nt + np - both, nt + np == 0))),
        ),
        mk(
            "multilabel.tpr",
            "True positive rate (multilabel)",
            ML,
            false,
            1.0,
            0.0,
            Arc::new(|i| per_row_ml(i.pred, |nt, np, both| set_ratio(both, nt, nt + np == 0))),
        ),
        mk(
            "multilabel.ppv",
            "Positive predictive value (multilabel)",
            ML,
            false,
            1.0,
            0.0,
            Arc::new(|i| per_row_ml(i.pred, |nt, np, both| set_ratio(both, np, nt + np == 0))),
        ),
        mk("meancosts", "Mean costs of the predicted choices", CS, true, -inf, inf, Arc::new(meancosts)),
        mk("mcp", "Misclassification penalty", CS, true, 0.0, inf, Arc::new(mcp)),
    ];
    let mut timing = |id: &str, name: &str, model: bool, f: MeasureFn| {
        let mut props = ALL.to_vec();
        if model {
            props.push("req.model");
        }
        out.push(mk(id, name, &props, true, 0.0, inf, f));
    };
    timing("timetrain", "Time of fitting the model", true, Arc::new(|i| Ok(i.model.expect("checked").train_time())));
    timing(
        "timepredict",
        "Time of predicting test set",
        false,
        Arc::new(|i| Ok(i.pred.predict_time.unwrap_or(f64::NAN))),
    );
    timing(
        "timeboth",
        "Time of fitting and predicting",
        true,
        Arc::new(|i| Ok(i.model.expect("checked").train_time() + i.pred.predict_time.unwrap_or(f64::NAN))),
    );
    let rmse_aggr = builtin_aggregations().into_iter().find(|a| a.id == "test.rmse").unwrap();
    if let Some(m) = out.iter_mut().find(|m| m.id == "rmse") {
        m.aggr = rmse_aggr;
    }
    out
}

// ---------------------------------------------------------------------------
// Registries

static MEASURES: Lazy<RwLock<BTreeMap<String, Measure>>> =
    Lazy::new(|| RwLock::new(builtin_measures().into_iter().map(|m| (m.id.clone(), m)).collect()));

static AGGREGATIONS: Lazy<RwLock<BTreeMap<String, Aggregation>>> =
    Lazy::new(|| RwLock::new(builtin_aggregations().into_iter().map(|a| (a.id.clone(), a)).collect()));

pub fn register_measure(measure: Measure) -> Result<()> {
    let mut reg = MEASURES.write().expect("measure registry poisoned");
    if reg.contains_key(&measure.id) {
        return Err(Error::duplicate("measure", &measure.id));
    }
    reg.insert(measure.id.clone(), measure);
    Ok(())
}

pub fn get_measure(id: &str) -> Result<Measure> {
    MEASURES
        .read()
        .expect("measure registry poisoned")
        .get(id)
        .cloned()
        .ok_or_else(|| Error::unknown("measure", id))
}

pub fn register_aggregation(aggr: Aggregation) -> Result<()> {
    let mut reg = AGGREGATIONS.write().expect("aggregation registry poisoned");
    if reg.contains_key(&aggr.id) {
        return Err(Error::duplicate("aggregation", &aggr.id));
    }
    reg.insert(aggr.id.clone(), aggr);
    Ok(())
}

pub fn get_aggregation(id: &str) -> Result<Aggregation> {
    AGGREGATIONS
        .read()
        .expect("aggregation registry poisoned")
        .get(id)
        .cloned()
        .ok_or_else(|| Error::unknown("aggregation", id))
}

/// Parses "mmce" or "mmce.test.median" style references.
pub fn measure_from_spec(spec: &str) -> Result<Measure> {
    if let Ok(m) = get_measure(spec) {
        return Ok(m);
    }
    let ids: Vec<String> = AGGREGATIONS.read().expect("aggregation registry poisoned").keys().cloned().collect();
    for a in ids {
        if let Some(mid) = spec.strip_suffix(&format!(".{a}")) {
            if let Ok(m) = get_measure(mid) {
                return Ok(m.with_aggregation(get_aggregation(&a)?));
            }
        }
    }
    Err(Error::unknown("measure", spec))
}

pub fn default_measure_for(kind: TaskKind) -> Measure {
    let id = match kind {
        TaskKind::Classif => "mmce",
        TaskKind::Regr => "mse",
        TaskKind::Cluster => "db",
        TaskKind::Multilabel => "multilabel.hamloss",
        TaskKind::Costsens => "meancosts",
    };
    get_measure(id).expect("builtin measure")
}

pub fn get_default_measure(task: &Task) -> Measure {
    default_measure_for(task.kind())
}

pub fn get_learner_default_measure(learner: &Learner) -> Measure {
    default_measure_for(learner.kind())
}

/// Registered measures applicable to `kind` (and to `task`, when given, which
/// also rules out binary-only measures on multiclass tasks) having every
/// property in `properties`.
pub fn list_measures(kind: Option<TaskKind>, task: Option<&Task>, properties: &[&str]) -> Vec<Measure> {
    let kind = kind.or(task.map(|t| t.kind()));
    let multi = task.is_some_and(|t| t.kind() == TaskKind::Classif && t.class_levels().len() > 2);
    MEASURES
        .read()
        .expect("measure registry poisoned")
        .values()
        .filter(|m| kind.is_none_or(|k| m.has(k.as_str())))
        .filter(|m| !multi || m.has("classif.multi"))
        .filter(|m| properties.iter().all(|p| m.has(p)))
        .cloned()
        .collect()
}

/// One value per measure, keyed by measure id.
pub fn performance(
    pred: &Prediction,
    measures: &[Measure],
    task: Option<&Task>,
    model: Option<&WrappedModel>,
) -> Result<BTreeMap<String, f64>> {
    measures.iter().map(|m| Ok((m.id.clone(), m.compute(pred, task, model)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::tests::binary_pred;

    fn regr_pred(truth: &[f64], resp: &[f64]) -> Prediction {
        Prediction {
            kind: TaskKind::Regr,
            predict_type: PredictType::Response,
            classes: vec![],
            positive: None,
            id: None,
            truth: Truth::Regr(truth.to_vec()),
            response: Response::Regr(resp.to_vec()),
            prob: None,
            se: None,
            iter: None,
            set: None,
            threshold: None,
            predict_time: Some(0.0),
        }
    }

    fn class_pred(classes: &[&str], truth: &[u32], resp: &[u32]) -> Prediction {
        Prediction {
            kind: TaskKind::Classif,
            predict_type: PredictType::Response,
            classes: classes.iter().map(|s| s.to_string()).collect(),
            positive: (classes.len() == 2).then_some(0),
            id: None,
            truth: Truth::Class(truth.iter().map(|t| Some(*t)).collect()),
            response: Response::Class(resp.iter().map(|t| Some(*t)).collect()),
            prob: None,
            se: None,
            iter: None,
            set: None,
            threshold: None,
            predict_time: Some(0.0),
        }
    }

    #[test]
    fn regression_residual_measures() {
        let p = regr_pred(&[0.0, 0.0, 0.0], &[1.0, -1.0, 2.0]);
        let ms: Vec<Measure> = ["mse", "medse", "mae"].iter().map(|i| get_measure(i).unwrap()).collect();
        let v = performance(&p, &ms, None, None).unwrap();
        assert_eq!(v["mse"], 2.0);
        assert_eq!(v["medse"], 1.0);
        assert!((v["mae"] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ber_two_classes() {
        let p = class_pred(&["a", "b"], &[0, 0, 1], &[0, 1, 1]);
        assert!((get_measure("ber").unwrap().compute(&p, None, None).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn auc_requires_probabilities() {
        let p = class_pred(&["a", "b"], &[0, 1], &[0, 1]);
        match get_measure("auc").unwrap().compute(&p, None, None) {
            Err(Error::MeasureRequirement { missing, .. }) => assert_eq!(missing, "predtype.prob"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn auc_extremes() {
        let auc = get_measure("auc").unwrap();
        let sep = binary_pred(&[0, 0, 1, 1], &[0.9, 0.8, 0.2, 0.1]);
        assert_eq!(auc.compute(&sep, None, None).unwrap(), 1.0);
        let flat = binary_pred(&[0, 0, 1, 1], &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(auc.compute(&flat, None, None).unwrap(), 0.5);
    }

    #[test]
    fn aggregation_names_and_defaults() {
        assert_eq!(get_measure("mmce").unwrap().aggr.id, "test.mean");
        assert_eq!(get_measure("rmse").unwrap().aggr.id, "test.rmse");
        let tpr = get_measure("tpr").unwrap().with_aggregation(get_aggregation("test.median").unwrap());
        assert_eq!(tpr.result_name(), "tpr.test.median");
        let m = measure_from_spec("mmce.train.mean").unwrap();
        assert_eq!(m.result_name(), "mmce.train.mean");
    }

    #[test]
    fn simple_aggregations() {
        let m = get_measure("mmce").unwrap();
        let agg = |id: &str, test: &[f64], train: &[f64]| {
            get_aggregation(id)
                .unwrap()
                .aggregate(&AggrInput { test, train, measure: &m, pred: None, task: None })
                .unwrap()
        };
        assert!((agg("test.median", &[0.2, 0.4], &[]) - 0.3).abs() < 1e-12);
        assert!((agg("b632", &[0.1], &[0.0]) - 0.0632).abs() < 1e-12);
        assert!((agg("b632", &[0.3, 0.3], &[0.3, 0.3]) - 0.3).abs() < 1e-12);
        assert_eq!(agg("test.sd", &[0.7, 0.7, 0.7], &[]), 0.0);
        let err = get_aggregation("train.mean")
            .unwrap()
            .aggregate(&AggrInput { test: &[0.1], train: &[f64::NAN], measure: &m, pred: None, task: None });
        assert!(matches!(err, Err(Error::MeasureRequirement { .. })));
    }

    #[test]
    fn cost_measure_lookup() {
        let classes = vec!["Bad".to_string(), "Good".to_string()];
        let m = make_cost_measure("credit.costs", &classes, &[vec![0.0, 5.0], vec![1.0, 0.0]], 0.0, 5.0).unwrap();
        let mut truth = vec![1u32; 10];
        truth[0] = 0;
        let mut resp = truth.clone();
        assert_eq!(m.compute(&class_pred(&["Bad", "Good"], &truth, &resp), None, None).unwrap(), 0.0);
        resp[3] = 0;
        let v = m.compute(&class_pred(&["Bad", "Good"], &truth, &resp), None, None).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        assert!(make_cost_measure("bad", &classes, &[vec![0.0, 1.0]], 0.0, 1.0).is_err());
    }

    #[test]
    fn multilabel_set_measures() {
        let p = Prediction {
            kind: TaskKind::Multilabel,
            predict_type: PredictType::Response,
            classes: vec!["l1".into(), "l2".into(), "l3".into()],
            positive: None,
            id: None,
            truth: Truth::Labels(vec![vec![true, true, false]]),
            response: Response::Labels(vec![Some(vec![false, true, true])]),
            prob: None,
            se: None,
            iter: None,
            set: None,
            threshold: None,
            predict_time: Some(0.0),
        };
        let f1 = get_measure("multilabel.f1").unwrap().compute(&p, None, None).unwrap();
        let acc = get_measure("multilabel.acc").unwrap().compute(&p, None, None).unwrap();
        assert!((f1 - 0.5).abs() < 1e-12);
        assert!((acc - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn default_measures_and_listing() {
        assert_eq!(default_measure_for(TaskKind::Classif).id, "mmce");
        assert_eq!(default_measure_for(TaskKind::Regr).id, "mse");
        assert_eq!(default_measure_for(TaskKind::Multilabel).id, "multilabel.hamloss");
        let multi: Vec<String> = list_measures(None, None, &["classif.multi"]).into_iter().map(|m| m.id).collect();
        for id in ["mmce", "acc", "ber", "logloss"] {
            assert!(multi.contains(&id.to_string()));
        }
        assert!(!list_measures(Some(TaskKind::Regr), None, &[]).iter().any(|m| m.id == "auc"));
        assert_eq!(list_measures(None, None, &[]).len(), MEASURES.read().unwrap().len());
    }

    #[test]
    fn missing_responses_give_missing_values() {
        let mut p = class_pred(&["a", "b"], &[0, 1], &[0, 1]);
        p.response = Response::Class(vec![None, Some(1)]);
        assert!(get_measure("mmce").unwrap().compute(&p, None, None).unwrap().is_nan());
    }
}
