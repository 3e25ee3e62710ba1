//! Table generators for model inspection: threshold sweeps, calibration,
//! learning curves, partial dependence and functional ANOVA.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::benchmark::BenchmarkResult;
use crate::data::{Column, ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::exec::{Ctx, Level};
use crate::learner::{Learner, PredictType};
use crate::measures::{AggrInput, Measure};
use crate::prediction::{Prediction, Response, SetKind};
use crate::resample::{resample, ResampleOptions, ResampleResult, Resampling};
use crate::table::{Cell, Table};
use crate::task::{Task, TaskKind};
use crate::train::{predict_newdata, WrappedModel};
use crate::util::{linspace, mean, quantile, variance};
use crate::wrappers::make_downsample_wrapper;

// ---------------------------------------------------------------------------
// Threshold vs. performance

fn threshold_grid(gridsize: usize) -> Result<Vec<f64>> {
    if gridsize < 2 {
        return Err(Error::arg("gridsize must be at least 2"));
    }
    Ok(linspace(0.0, 1.0, gridsize))
}

fn check_binary_prob(pred: &Prediction) -> Result<()> {
    if pred.kind != TaskKind::Classif || pred.positive.is_none() {
        return Err(Error::arg("threshold sweeps need a binary classification prediction"));
    }
    if pred.predict_type != PredictType::Prob || pred.prob.is_none() {
        return Err(Error::arg("threshold sweeps need probability predictions"));
    }
    Ok(())
}

fn measure_header(measures: &[Measure]) -> Vec<String> {
    measures.iter().map(|m| m.id.clone()).collect()
}

/// Performance at thresholds 0, 1/(g-1), ..., 1. Columns: threshold, one
/// per measure.
pub fn thresh_vs_perf(pred: &Prediction, measures: &[Measure], gridsize: usize) -> Result<Table> {
    check_binary_prob(pred)?;
    let mut t = Table::new(std::iter::once("threshold".to_string()).chain(measure_header(measures)));
    for th in threshold_grid(gridsize)? {
        let p = pred.set_threshold_binary(th)?;
        let mut row = vec![Cell::Num(th)];
        for m in measures {
            row.push(Cell::Num(m.compute(&p, None, None)?));
        }
        t.push(row);
    }
    Ok(t)
}

/// Threshold sweep over the test predictions of a resample result. With
/// `aggregate` each measure's own aggregation is applied per threshold;
/// otherwise one block per iteration is emitted with an `iter` column.
pub fn thresh_vs_perf_resample(rr: &ResampleResult, measures: &[Measure], gridsize: usize, aggregate: bool) -> Result<Table> {
    let pred = rr.pred.as_ref().ok_or_else(|| Error::arg("resample result kept no predictions"))?;
    check_binary_prob(pred)?;
    let n_iter = rr.instance.n_iters();
    let iter_preds: Vec<Prediction> = (0..n_iter).map(|i| pred.filter(Some(i), Some(SetKind::Test))).collect();
    let mut header = vec!["threshold".to_string()];
    if !aggregate {
        header.push("iter".into());
    }
    let mut t = Table::new(header.into_iter().chain(measure_header(measures)));
    for th in threshold_grid(gridsize)? {
        let per_iter: Vec<Prediction> = iter_preds.iter().map(|p| p.set_threshold_binary(th)).collect::<Result<_>>()?;
        let vals: Vec<Vec<f64>> = measures
            .iter()
            .map(|m| per_iter.iter().map(|p| m.compute(p, None, None)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        if aggregate {
            let full = pred.filter(None, Some(SetKind::Test)).set_threshold_binary(th)?;
            let mut row = vec![Cell::Num(th)];
            for (m, v) in measures.iter().zip(&vals) {
                let train = vec![f64::NAN; v.len()];
                let input = AggrInput { test: v, train: &train, measure: m, pred: Some(&full), task: None };
                row.push(Cell::Num(m.aggr.aggregate(&input)?));
            }
            t.push(row);
        } else {
            for i in 0..n_iter {
                let mut row = vec![Cell::Num(th), Cell::from(i + 1)];
                row.extend(vals.iter().map(|v| Cell::Num(v[i])));
                t.push(row);
            }
        }
    }
    Ok(t)
}

/// Aggregated sweeps of every benchmark cell, with task and learner columns.
pub fn thresh_vs_perf_benchmark(bmr: &BenchmarkResult, measures: &[Measure], gridsize: usize) -> Result<Table> {
    let mut out: Option<Table> = None;
    for (tid, row) in &bmr.results {
        for (lid, rr) in row {
            let t = thresh_vs_perf_resample(rr, measures, gridsize, true)?;
            let acc = out.get_or_insert_with(|| {
                Table::new(["task.id", "learner.id"].map(String::from).into_iter().chain(t.header.iter().cloned()))
            });
            for r in t.rows {
                acc.push([Cell::from(tid.as_str()), Cell::from(lid.as_str())].into_iter().chain(r).collect());
            }
        }
    }
    out.ok_or_else(|| Error::arg("empty benchmark result"))
}

/// Trapezoidal area under the (fpr, tpr) curve of a threshold table.
pub fn auc_from_curve(table: &Table) -> Result<f64> {
    let col = |name: &str| -> Result<Vec<f64>> {
        table
            .column(name)
            .ok_or_else(|| Error::unknown("column", name))?
            .into_iter()
            .map(|c| c.as_f64().ok_or_else(|| Error::data(format!("non-numeric cell in '{name}'"))))
            .collect()
    };
    let (fpr, tpr) = (col("fpr")?, col("tpr")?);
    let mut pts: Vec<(f64, f64)> = fpr.into_iter().zip(tpr).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum())
}

// ---------------------------------------------------------------------------
// Calibration

#[derive(Clone, Debug, PartialEq)]
pub enum Breaks {
    /// `n` equal-width bins on [0, 1].
    Equal(usize),
    /// ceil(log2 n) + 1 equal-width bins.
    Sturges,
    /// Explicit increasing cut points covering the probabilities.
    Cuts(Vec<f64>),
}

impl Default for Breaks {
    fn default() -> Self {
        Breaks::Equal(10)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// learner, bin, lower, upper, Class, Proportion, n
    pub proportions: Table,
    /// learner, Class, Probability, truth
    pub rag: Table,
}

fn cut_points(breaks: &Breaks, n: usize) -> Result<Vec<f64>> {
    let equal = |k: usize| -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::arg("need at least one bin"));
        }
        Ok(linspace(0.0, 1.0, k + 1))
    };
    match breaks {
        Breaks::Equal(k) => equal(*k),
        Breaks::Sturges => equal((n.max(1) as f64).log2().ceil() as usize + 1),
        Breaks::Cuts(c) => {
            if c.len() < 2 || c.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::arg("cut points must be strictly increasing with at least two entries"));
            }
            Ok(c.clone())
        }
    }
}

/// Bin of `p` for cut points `cuts`: (c[j], c[j+1]], the first bin closed.
fn bin_of(p: f64, cuts: &[f64]) -> Option<usize> {
    if p < cuts[0] || p > cuts[cuts.len() - 1] {
        return None;
    }
    Some(cuts[1..].iter().position(|c| p <= *c).unwrap_or(cuts.len() - 2))
}

/// Near equal-count groups by probability rank; tied values share a group.
fn quantile_groups(ps: &[f64], g: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]).then(a.cmp(&b)));
    let n = ps.len();
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * g / n;
        if rank > 0 && ps[order[rank - 1]] == ps[i] {
            out[i] = out[order[rank - 1]];
        }
    }
    out
}

/// Observed class proportions per predicted probability bin. Binary
/// predictions are binned on the positive class only.
pub fn calibration_data(preds: &[(&str, &Prediction)], breaks: Option<Breaks>, groups: Option<usize>) -> Result<Calibration> {
    if breaks.is_some() && groups.is_some() {
        return Err(Error::arg("give either breaks or groups, not both"));
    }
    if groups == Some(0) {
        return Err(Error::arg("groups must be positive"));
    }
    let breaks = breaks.unwrap_or_default();
    let mut prop = Table::new(["learner", "bin", "lower", "upper", "Class", "Proportion", "n"]);
    let mut rag = Table::new(["learner", "Class", "Probability", "truth"]);
    for (name, pred) in preds {
        if pred.kind != TaskKind::Classif || pred.prob.is_none() {
            return Err(Error::arg(format!("calibration of '{name}' needs probability predictions")));
        }
        let truth = pred.class_truth()?;
        let prob = pred.prob()?;
        let classes: Vec<usize> = match pred.positive {
            Some(p) => vec![p],
            None => (0..pred.classes.len()).collect(),
        };
        for &c in &classes {
            let rows: Vec<usize> = (0..prob.len()).filter(|&i| truth[i].is_some() && !prob[i][c].is_nan()).collect();
            let ps: Vec<f64> = rows.iter().map(|&i| prob[i][c]).collect();
            let hit: Vec<bool> = rows.iter().map(|&i| truth[i] == Some(c as u32)).collect();
            for (p, h) in ps.iter().zip(&hit) {
                rag.push(vec![Cell::from(*name), Cell::from(pred.classes[c].as_str()), Cell::Num(*p), Cell::Bool(*h)]);
            }
            let (assign, n_bins, bounds): (Vec<Option<usize>>, usize, Vec<(f64, f64)>) = match groups {
                Some(g) => {
                    let a = quantile_groups(&ps, g);
                    let bounds = (0..g)
                        .map(|b| {
                            let members = ps.iter().zip(&a).filter(|(_, x)| **x == b).map(|(p, _)| *p);
                            members.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)))
                        })
                        .collect();
                    (a.into_iter().map(Some).collect(), g, bounds)
                }
                None => {
                    let cuts = cut_points(&breaks, ps.len())?;
                    let bounds = cuts.windows(2).map(|w| (w[0], w[1])).collect();
                    (ps.iter().map(|p| bin_of(*p, &cuts)).collect(), cuts.len() - 1, bounds)
                }
            };
            for (b, (lo, hi)) in bounds.iter().enumerate().take(n_bins) {
                let members: Vec<bool> = assign.iter().zip(&hit).filter(|(a, _)| **a == Some(b)).map(|(_, h)| *h).collect();
                if members.is_empty() {
                    continue;
                }
                let share = members.iter().filter(|h| **h).count() as f64 / members.len() as f64;
                let open = if b == 0 { "[" } else { "(" };
                prop.push(vec![
                    Cell::from(*name),
                    Cell::Str(format!("{open}{},{}]", crate::util::signif(*lo, 3), crate::util::signif(*hi, 3))),
                    Cell::Num(*lo),
                    Cell::Num(*hi),
                    Cell::from(pred.classes[c].as_str()),
                    Cell::Num(share),
                    Cell::from(members.len()),
                ]);
            }
        }
    }
    Ok(Calibration { proportions: prop, rag })
}

// ---------------------------------------------------------------------------
// Learning curves

/// Performance against the fraction of each training split that is used.
/// Rows: learner, perc, measure, value. Test sets are always complete.
pub fn learning_curve_data(
    learners: &[Learner],
    task: &Task,
    percs: &[f64],
    measures: &[Measure],
    resampling: impl Into<Resampling>,
    ctx: &Ctx,
) -> Result<Table> {
    if percs.is_empty() || percs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::arg("percs must lie in (0, 1]"));
    }
    let inst = resampling.into().instantiate(task, &ctx.child("instance", 0))?;
    let both = inst.desc.predict.train();
    let opts = ResampleOptions::new().keep_pred(false).measures(measures.to_vec());
    let np = percs.len();
    let cells = ctx.map_units(Level::Benchmark, "learningcurve", learners.len() * np, |i, c| {
        let wrapped = make_downsample_wrapper(learners[i / np].clone(), percs[i % np])?;
        resample(&wrapped, task, inst.clone(), &opts, c)
    });
    let mut t = Table::new(["learner", "perc", "measure", "value"]);
    for (i, rr) in cells.into_iter().enumerate() {
        let rr = rr?;
        let (lid, perc) = (learners[i / np].id(), percs[i % np]);
        let mut push = |name: String, v: f64| t.push(vec![Cell::from(lid), Cell::Num(perc), Cell::Str(name), Cell::Num(v)]);
        for (name, v) in &rr.aggr {
            push(name.clone(), *v);
        }
        if both {
            for (j, m) in rr.measures.iter().enumerate() {
                let name = format!("{}.train.mean", m.id);
                if !rr.aggr.contains_key(&name) {
                    push(name, mean(&rr.train_values(j)));
                }
            }
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Partial dependence

pub type ReduceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Reduction of the N predictions at one grid point.
#[derive(Clone, Default)]
pub enum PdFun {
    #[default]
    Mean,
    Variance,
    /// (lower quantile, median, upper quantile)
    Quantiles(f64, f64),
    Custom(ReduceFn),
}

impl fmt::Debug for PdFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PdFun::Mean => f.write_str("Mean"),
            PdFun::Variance => f.write_str("Variance"),
            PdFun::Quantiles(a, b) => write!(f, "Quantiles({a}, {b})"),
            PdFun::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl PdFun {
    /// (lower, value, upper); bounds are NaN unless quantiles are requested.
    fn reduce(&self, xs: &[f64]) -> (f64, f64, f64) {
        match self {
            PdFun::Mean => (f64::NAN, mean(xs), f64::NAN),
            PdFun::Variance => (f64::NAN, variance(xs), f64::NAN),
            PdFun::Quantiles(lo, hi) => (quantile(xs, *lo), quantile(xs, 0.5), quantile(xs, *hi)),
            PdFun::Custom(f) => (f64::NAN, f(xs), f64::NAN),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PdOptions {
    pub interaction: bool,
    pub gridsize: usize,
    pub fmin: HashMap<String, f64>,
    pub fmax: HashMap<String, f64>,
    pub fun: PdFun,
    /// One curve per observation instead of a reduction.
    pub individual: bool,
    /// Feature values at which every individual curve is anchored to zero.
    pub center: Option<HashMap<String, f64>>,
    pub derivative: bool,
    /// Multipliers of the standard error for models that predict one.
    pub bounds: (f64, f64),
}

impl Default for PdOptions {
    fn default() -> Self {
        PdOptions {
            interaction: false,
            gridsize: 10,
            fmin: HashMap::new(),
            fmax: HashMap::new(),
            fun: PdFun::Mean,
            individual: false,
            center: None,
            derivative: false,
            bounds: (-1.96, 1.96),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum GridValue {
    Num(f64),
    Level(u32, String),
}

impl GridValue {
    fn cell(&self) -> Cell {
        match self {
            GridValue::Num(v) => Cell::Num(*v),
            GridValue::Level(_, s) => Cell::Str(s.clone()),
        }
    }

    fn num(&self) -> f64 {
        match self {
            GridValue::Num(v) => *v,
            GridValue::Level(c, _) => *c as f64,
        }
    }
}

fn feature_grid(data: &Dataset, name: &str, opts: &PdOptions) -> Result<Vec<GridValue>> {
    let col = data.column(name)?;
    match col.data() {
        ColumnData::Numeric(v) => {
            let finite = v.iter().copied().filter(|x| x.is_finite());
            let lo = opts.fmin.get(name).copied().unwrap_or_else(|| finite.clone().fold(f64::INFINITY, f64::min));
            let hi = opts.fmax.get(name).copied().unwrap_or_else(|| finite.fold(f64::NEG_INFINITY, f64::max));
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::data(format!("cannot build a grid for feature '{name}'")));
            }
            Ok(linspace(lo, hi, opts.gridsize).into_iter().map(GridValue::Num).collect())
        }
        ColumnData::Factor { levels, .. } => {
            Ok(levels.iter().enumerate().map(|(i, l)| GridValue::Level(i as u32, l.clone())).collect())
        }
        ColumnData::Logical(_) => Ok(vec![
            GridValue::Level(0, "FALSE".into()),
            GridValue::Level(1, "TRUE".into()),
        ]),
    }
}

fn set_constant(data: &Dataset, name: &str, v: &GridValue) -> Result<Dataset> {
    let n = data.n_rows();
    let col = match (data.column(name)?.data(), v) {
        (ColumnData::Numeric(_), GridValue::Num(x)) => Column::numeric(name, vec![*x; n]),
        (ColumnData::Factor { levels, ordered, .. }, GridValue::Level(c, _)) => Column::new(
            name,
            ColumnData::Factor { codes: vec![Some(*c); n], levels: levels.clone(), ordered: *ordered },
        )?,
        (ColumnData::Logical(_), GridValue::Level(c, _)) => Column::logical(name, vec![Some(*c == 1); n]),
        (ColumnData::Numeric(_), GridValue::Level(..)) => {
            return Err(Error::data(format!("numeric feature '{name}' needs a numeric value")))
        }
        _ => return Err(Error::data(format!("feature '{name}' needs a level"))),
    };
    data.with_column(col)
}

/// What a model outputs per row, reduced to numbers: the regression value or
/// one probability per reported class.
struct Outputs {
    names: Vec<String>,
    classes: Vec<usize>,
    regr: bool,
}

impl Outputs {
    fn of(model: &WrappedModel) -> Result<Self> {
        let desc = model.task_desc();
        match desc.kind {
            TaskKind::Regr => Ok(Outputs { names: vec![desc.targets[0].clone()], classes: vec![0], regr: true }),
            TaskKind::Classif => {
                if model.learner().predict_type() != PredictType::Prob {
                    return Err(Error::arg("partial dependence of a classifier needs probability predictions"));
                }
                let classes: Vec<usize> = match desc.positive_index() {
                    Some(p) => vec![p],
                    None => (0..desc.class_levels.len()).collect(),
                };
                Ok(Outputs { names: classes.iter().map(|&c| desc.class_levels[c].clone()).collect(), classes, regr: false })
            }
            k => Err(Error::arg(format!("partial dependence is not available for {k} models"))),
        }
    }

    /// values[output][row], and standard errors of regression models.
    fn eval(&self, model: &WrappedModel, data: &Dataset, ctx: &Ctx) -> Result<(Vec<Vec<f64>>, Option<Vec<f64>>)> {
        let p = predict_newdata(model, data, ctx)?;
        if self.regr {
            let resp = match &p.response {
                Response::Regr(v) => v.clone(),
                _ => return Err(Error::data("regression model returned a non-numeric prediction")),
            };
            Ok((vec![resp], p.se.clone()))
        } else {
            let prob = p.prob()?;
            Ok((self.classes.iter().map(|&c| prob.iter().map(|r| r[c]).collect()).collect(), None))
        }
    }
}

/// One evaluated grid point: the feature values and, per output, the
/// per-row predictions and standard errors.
struct Evaluated {
    point: Vec<GridValue>,
    values: Vec<Vec<f64>>,
    se: Option<Vec<f64>>,
}

fn evaluate(model: &WrappedModel, data: &Dataset, out: &Outputs, feats: &[String], points: Vec<Vec<GridValue>>, ctx: &Ctx) -> Result<Vec<Evaluated>> {
    points
        .into_iter()
        .map(|point| {
            let mut d = data.clone();
            for (f, v) in feats.iter().zip(&point) {
                d = set_constant(&d, f, v)?;
            }
            let (values, se) = out.eval(model, &d, ctx)?;
            Ok(Evaluated { point, values, se })
        })
        .collect()
}

fn cartesian(grids: &[Vec<GridValue>]) -> Vec<Vec<GridValue>> {
    grids.iter().fold(vec![Vec::new()], |acc, g| {
        acc.into_iter().flat_map(|prefix| g.iter().map(move |v| [prefix.clone(), vec![v.clone()]].concat())).collect()
    })
}

/// Central differences inside, one-sided at both ends.
fn finite_diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect()
}

/// Partial dependence of `model` on `features` over the rows of `data`.
///
/// Columns: the value column (target name for regression, `Class` and
/// `Probability` for classifiers), `lower`/`upper` when available, every
/// feature (missing outside its block) and `idx` for individual curves.
pub fn partial_dependence_data<S: AsRef<str>>(
    model: &WrappedModel,
    data: &Dataset,
    features: &[S],
    opts: &PdOptions,
    ctx: &Ctx,
) -> Result<Table> {
    let feats: Vec<String> = features.iter().map(|s| s.as_ref().to_string()).collect();
    if feats.is_empty() {
        return Err(Error::arg("no features given"));
    }
    for f in &feats {
        if !model.features().contains(f) {
            return Err(Error::unknown("feature", f));
        }
    }
    if opts.center.is_some() && !opts.individual {
        return Err(Error::arg("centering needs individual curves"));
    }
    if opts.derivative && (opts.interaction || feats.len() != 1) {
        return Err(Error::arg("derivatives need a single feature without interaction"));
    }
    if opts.interaction && feats.len() < 2 {
        return Err(Error::arg("interaction needs at least two features"));
    }
    if opts.gridsize < 2 {
        return Err(Error::arg("gridsize must be at least 2"));
    }
    let out = Outputs::of(model)?;
    let n = data.n_rows();
    let blocks: Vec<(Vec<String>, Vec<Vec<GridValue>>)> = if opts.interaction {
        let grids = feats.iter().map(|f| feature_grid(data, f, opts)).collect::<Result<Vec<_>>>()?;
        vec![(feats.clone(), cartesian(&grids))]
    } else {
        feats
            .iter()
            .map(|f| Ok((vec![f.clone()], feature_grid(data, f, opts)?.into_iter().map(|v| vec![v]).collect())))
            .collect::<Result<_>>()?
    };

    let quant = matches!(opts.fun, PdFun::Quantiles(..));
    let mut probe = evaluate(model, &data.subset_rows(&[0.min(n.saturating_sub(1))])?, &out, &[], vec![vec![]], ctx)?;
    let has_se = out.regr && probe.pop().is_some_and(|e| e.se.is_some()) && !quant;
    let bounded = quant || has_se;
    let mut header: Vec<String> = Vec::new();
    if !out.regr {
        header.push("Class".into());
    }
    header.push(if out.regr { out.names[0].clone() } else { "Probability".into() });
    if bounded {
        header.extend(["lower".to_string(), "upper".to_string()]);
    }
    header.extend(feats.iter().cloned());
    if opts.individual {
        header.push("idx".into());
    }
    let mut table = Table::new(header);

    for (bfeats, points) in blocks {
        let evals = evaluate(model, data, &out, &bfeats, points, ctx)?;
        let anchor: Option<Evaluated> = match &opts.center {
            None => None,
            Some(c) => {
                let point = bfeats
                    .iter()
                    .map(|f| {
                        let v = c.get(f).ok_or_else(|| Error::arg(format!("no center value for '{f}'")))?;
                        match data.column(f)?.data() {
                            ColumnData::Numeric(_) => Ok(GridValue::Num(*v)),
                            _ => Err(Error::arg(format!("centering needs a numeric feature, '{f}' is not"))),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                evaluate(model, data, &out, &bfeats, vec![point], ctx)?.pop()
            }
        };
        // curves[output][series] over the grid, series = rows or one reduction
        let xs: Vec<f64> = evals.iter().map(|e| e.point[0].num()).collect();
        for (o, oname) in out.names.iter().enumerate() {
            // (lower, value, upper) per grid point and series
            let mut series: Vec<Vec<(f64, f64, f64)>> = if opts.individual {
                (0..n)
                    .map(|i| {
                        evals
                            .iter()
                            .map(|e| {
                                let y = e.values[o][i];
                                let shift = anchor.as_ref().map_or(0.0, |a| a.values[o][i]);
                                let (lo, hi) = match &e.se {
                                    Some(se) if has_se => (y + opts.bounds.0 * se[i], y + opts.bounds.1 * se[i]),
                                    _ => (f64::NAN, f64::NAN),
                                };
                                (lo - shift, y - shift, hi - shift)
                            })
                            .collect()
                    })
                    .collect()
            } else {
                vec![evals
                    .iter()
                    .map(|e| {
                        let ys = &e.values[o];
                        match &e.se {
                            Some(se) if has_se => {
                                let shifted = |b: f64| ys.iter().zip(se).map(|(y, s)| y + b * s).collect::<Vec<_>>();
                                let (_, v, _) = opts.fun.reduce(ys);
                                (opts.fun.reduce(&shifted(opts.bounds.0)).1, v, opts.fun.reduce(&shifted(opts.bounds.1)).1)
                            }
                            _ => opts.fun.reduce(ys),
                        }
                    })
                    .collect()]
            };
            if opts.derivative {
                for s in series.iter_mut() {
                    let parts: [Vec<f64>; 3] = [
                        finite_diff(&xs, &s.iter().map(|t| t.0).collect::<Vec<_>>()),
                        finite_diff(&xs, &s.iter().map(|t| t.1).collect::<Vec<_>>()),
                        finite_diff(&xs, &s.iter().map(|t| t.2).collect::<Vec<_>>()),
                    ];
                    *s = (0..s.len()).map(|g| (parts[0][g], parts[1][g], parts[2][g])).collect();
                }
            }
            for (g, e) in evals.iter().enumerate() {
                for (si, s) in series.iter().enumerate() {
                    let (lo, v, hi) = s[g];
                    let mut row = Vec::with_capacity(table.header.len());
                    if !out.regr {
                        row.push(Cell::Str(oname.clone()));
                    }
                    row.push(Cell::Num(v));
                    if bounded {
                        row.extend([Cell::Num(lo), Cell::Num(hi)]);
                    }
                    for f in &feats {
                        row.push(bfeats.iter().position(|b| b == f).map_or(Cell::Missing, |k| e.point[k].cell()));
                    }
                    if opts.individual {
                        row.push(Cell::from(si + 1));
                    }
                    table.push(row);
                }
            }
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Functional ANOVA

fn subsets_up_to(k: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut layer: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    for _ in 0..depth {
        out.extend(layer.iter().cloned());
        layer = layer
            .iter()
            .flat_map(|s| (s[s.len() - 1] + 1..k).map(move |j| [s.clone(), vec![j]].concat()))
            .collect();
    }
    out
}

/// Effects of every feature subset of size up to `depth`: singletons equal
/// their partial dependence, larger subsets have all lower-order effects of
/// their proper subsets removed. Columns: effect, the target, features.
pub fn functional_anova_data<S: AsRef<str>>(
    model: &WrappedModel,
    data: &Dataset,
    features: &[S],
    depth: usize,
    opts: &PdOptions,
    ctx: &Ctx,
) -> Result<Table> {
    let feats: Vec<String> = features.iter().map(|s| s.as_ref().to_string()).collect();
    if model.task_desc().kind != TaskKind::Regr {
        return Err(Error::arg("functional ANOVA is only available for regression models"));
    }
    if depth == 0 || depth > feats.len() {
        return Err(Error::arg(format!("depth must lie in 1..={}", feats.len())));
    }
    for f in &feats {
        if !model.features().contains(f) {
            return Err(Error::unknown("feature", f));
        }
    }
    let out = Outputs::of(model)?;
    let grids = feats.iter().map(|f| feature_grid(data, f, opts)).collect::<Result<Vec<_>>>()?;
    // components with the grand mean under the empty key; singletons are
    // reported with the grand mean added back so they equal their PD
    let (base, _) = out.eval(model, data, ctx)?;
    let grand = opts.fun.reduce(&base[0]).1;
    let mut effects: HashMap<Vec<usize>, HashMap<Vec<usize>, f64>> = HashMap::new();
    effects.insert(Vec::new(), HashMap::from([(Vec::new(), grand)]));
    let mut table = Table::new(
        std::iter::once("effect".to_string()).chain(std::iter::once(out.names[0].clone())).chain(feats.iter().cloned()),
    );
    for u in subsets_up_to(feats.len(), depth) {
        let idx_grid: Vec<Vec<usize>> = u.iter().fold(vec![Vec::new()], |acc, &f| {
            acc.into_iter().flat_map(|p| (0..grids[f].len()).map(move |i| [p.clone(), vec![i]].concat())).collect()
        });
        let points: Vec<Vec<GridValue>> =
            idx_grid.iter().map(|ix| u.iter().zip(ix).map(|(&f, &i)| grids[f][i].clone()).collect()).collect();
        let names: Vec<String> = u.iter().map(|&f| feats[f].clone()).collect();
        let evals = evaluate(model, data, &out, &names, points, ctx)?;
        let mut eff = HashMap::new();
        for (ix, e) in idx_grid.iter().zip(&evals) {
            let pd = opts.fun.reduce(&e.values[0]).1;
            let mut v = pd - grand;
            for sub in subsets_up_to(u.len(), u.len() - 1) {
                let key: Vec<usize> = sub.iter().map(|&s| u[s]).collect();
                let at: Vec<usize> = sub.iter().map(|&s| ix[s]).collect();
                v -= effects[&key][&at];
            }
            eff.insert(ix.clone(), v);
            let v = if u.len() == 1 { pd } else { v };
            let mut row = vec![Cell::Str(names.join(":")), Cell::Num(v)];
            for f in 0..feats.len() {
                row.push(u.iter().position(|x| *x == f).map_or(Cell::Missing, |k| grids[f][ix[k]].cell()));
            }
            table.push(row);
        }
        effects.insert(u, eff);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gaussian_classif_task, imbalanced_task, linear_regr_task};
    use crate::learner::learner;
    use crate::measures::{get_measure, performance};
    use crate::prediction::Truth;
    use crate::resample::{make_resample_instance_for_task, ResampleDesc};
    use crate::train::{predict_task, train};
    use rand::Rng;

    fn num(t: &Table, col: &str) -> Vec<f64> {
        t.column(col).unwrap().into_iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect()
    }

    fn binary_pred() -> Prediction {
        let task = gaussian_classif_task(200, 3, 4);
        let l = learner("classif.logreg").unwrap().set_predict_type(PredictType::Prob).unwrap();
        let m = train(&l, &task, None, None, &Ctx::new(1)).unwrap();
        predict_task(&m, &task, None, &Ctx::new(1)).unwrap()
    }

    #[test]
    fn threshold_sweep_endpoints() {
        let pred = binary_pred();
        let ms: Vec<Measure> = ["fpr", "fnr", "mmce", "tpr"].iter().map(|m| get_measure(m).unwrap()).collect();
        let t = thresh_vs_perf(&pred, &ms, 101).unwrap();
        assert_eq!(t.len(), 101);
        assert_eq!(num(&t, "fpr")[0], 1.0);
        assert_eq!(num(&t, "fnr")[0], 0.0);
        let mmce = performance(&pred, &[get_measure("mmce").unwrap()], None, None).unwrap()["mmce"];
        assert!((num(&t, "mmce")[50] - mmce).abs() < 1e-12);
        for col in ["fpr", "tpr"] {
            assert!(num(&t, col).windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn threshold_sweep_on_resample() {
        let task = gaussian_classif_task(120, 2, 2);
        let l = learner("classif.lda").unwrap().set_predict_type(PredictType::Prob).unwrap();
        let rr = resample(&l, &task, ResampleDesc::cv(3), &ResampleOptions::new(), &Ctx::new(3)).unwrap();
        let ms = vec![get_measure("mmce").unwrap()];
        let agg = thresh_vs_perf_resample(&rr, &ms, 11, true).unwrap();
        let per = thresh_vs_perf_resample(&rr, &ms, 11, false).unwrap();
        assert_eq!((agg.len(), per.len()), (11, 33));
        let v5: Vec<f64> = per.rows.iter().filter(|r| r[0] == Cell::Num(0.5)).map(|r| r[2].as_f64().unwrap()).collect();
        assert!((mean(&v5) - num(&agg, "mmce")[5]).abs() < 1e-12);
        assert!((num(&agg, "mmce")[5] - rr.aggr["mmce.test.mean"]).abs() < 1e-12);
        let unkept = resample(&learner("classif.lda").unwrap(), &task, ResampleDesc::cv(3), &ResampleOptions::new(), &Ctx::new(3)).unwrap();
        assert!(thresh_vs_perf_resample(&unkept, &ms, 11, true).is_err());
    }

    #[test]
    fn calibration_groups_and_trivial_case() {
        let pred = binary_pred();
        let cal = calibration_data(&[("logreg", &pred)], None, Some(3)).unwrap();
        let counts: Vec<f64> = num(&cal.proportions, "n");
        assert_eq!(counts.len(), 3);
        let (lo, hi) = counts.iter().fold((f64::MAX, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
        assert!(hi - lo <= 1.0);
        assert_eq!(cal.rag.len(), 200);
        assert!(calibration_data(&[("x", &pred)], Some(Breaks::Equal(5)), Some(3)).is_err());

        let mut sure = pred.clone();
        let truth = sure.class_truth().unwrap().to_vec();
        sure.prob = Some(truth.iter().map(|t| if *t == Some(0) { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect());
        let keep: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == Some(sure.positive.unwrap() as u32)).collect();
        let sure = sure.subset(&keep);
        let cal = calibration_data(&[("sure", &sure)], None, None).unwrap();
        assert_eq!(cal.proportions.len(), 1);
        assert_eq!(num(&cal.proportions, "Proportion"), vec![1.0]);
    }

    #[test]
    fn calibration_of_calibrated_generator() {
        let mut rng = crate::exec::rng_stream(11, &[("calib", 0)]);
        let n = 5000;
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<bool> = p.iter().map(|pi| rng.random_range(0.0..1.0) < *pi).collect();
        let mut pred = binary_pred();
        pred.prob = Some(p.iter().map(|pi| vec![*pi, 1.0 - pi]).collect());
        let pos = pred.positive.unwrap();
        pred.prob = Some(p.iter().map(|pi| if pos == 0 { vec![*pi, 1.0 - pi] } else { vec![1.0 - pi, *pi] }).collect());
        pred.truth = Truth::Class(y.iter().map(|b| Some(if *b { pos as u32 } else { 1 - pos as u32 })).collect());
        pred.id = None;
        pred.response = Response::Class(vec![Some(0); n]);
        let cal = calibration_data(&[("gen", &pred)], None, None).unwrap();
        assert_eq!(cal.proportions.len(), 10);
        for r in &cal.proportions.rows {
            let mid = (r[2].as_f64().unwrap() + r[3].as_f64().unwrap()) / 2.0;
            assert!((r[5].as_f64().unwrap() - mid).abs() < 0.05, "{r:?}");
        }
    }

    #[test]
    fn learning_curve_shape_and_flat_featureless() {
        let task = imbalanced_task(20, 80, 5);
        let ls = vec![learner("classif.featureless").unwrap(), learner("classif.lda").unwrap()];
        let ms = vec![get_measure("mmce").unwrap()];
        let percs = [0.2, 0.4, 0.6, 0.8, 1.0];
        let t = learning_curve_data(&ls, &task, &percs, &ms, ResampleDesc::cv(3), &Ctx::new(2)).unwrap();
        assert_eq!(t.len(), 10);
        let fl: Vec<f64> = t.rows.iter().filter(|r| r[0] == Cell::from("classif.featureless")).map(|r| r[3].as_f64().unwrap()).collect();
        assert!(fl.iter().all(|v| (v - fl[0]).abs() < 1e-12));
        assert!(learning_curve_data(&ls, &task, &[0.0], &ms, ResampleDesc::holdout(), &Ctx::new(2)).is_err());
    }

    #[test]
    fn learning_curve_full_fraction_matches_plain_resample() {
        let task = gaussian_classif_task(90, 2, 5);
        let lda = learner("classif.lda").unwrap();
        let ms = vec![get_measure("mmce").unwrap()];
        let inst = make_resample_instance_for_task(&ResampleDesc::cv(3), &task, &Ctx::new(9)).unwrap();
        let t = learning_curve_data(&[lda.clone()], &task, &[1.0], &ms, inst.clone(), &Ctx::new(2)).unwrap();
        let plain = resample(&lda, &task, inst, &ResampleOptions::new().measures(ms), &Ctx::new(2)).unwrap();
        assert_eq!(t.rows[0][3].as_f64().unwrap(), plain.first_aggr());
    }

    #[test]
    fn pd_of_linear_model() {
        let task = linear_regr_task(200, 0.0, 3);
        let m = train(&learner("regr.ols").unwrap(), &task, None, None, &Ctx::new(1)).unwrap();
        let ctx = Ctx::new(1);
        let pd = partial_dependence_data(&m, task.data(), &["x1"], &PdOptions::default(), &ctx).unwrap();
        let (x, y) = (num(&pd, "x1"), num(&pd, "y"));
        for i in 1..x.len() {
            assert!(((y[i] - y[i - 1]) / (x[i] - x[i - 1]) - 3.0).abs() < 1e-6);
        }
        let d = partial_dependence_data(&m, task.data(), &["x1"], &PdOptions { derivative: true, ..Default::default() }, &ctx).unwrap();
        assert!(num(&d, "y").iter().all(|v| (v - 3.0).abs() < 1e-8));

        let ice = partial_dependence_data(&m, task.data(), &["x1"], &PdOptions { individual: true, ..Default::default() }, &ctx).unwrap();
        assert_eq!(ice.len(), 200 * 10);
        for g in 0..10 {
            let vals: Vec<f64> = ice.rows[g * 200..(g + 1) * 200].iter().map(|r| r[0].as_f64().unwrap()).collect();
            assert!((mean(&vals) - y[g]).abs() < 1e-12);
        }
        let both = partial_dependence_data(&m, task.data(), &["x1", "x2"], &PdOptions::default(), &ctx).unwrap();
        assert_eq!(both.len(), 20);
        assert_eq!(both.rows[0][2], Cell::Missing);
        assert_eq!(both.rows[10][1], Cell::Missing);
        let centered = PdOptions { individual: true, center: Some(HashMap::from([("x1".to_string(), 0.0)])), ..Default::default() };
        let c = partial_dependence_data(&m, task.data(), &["x1"], &centered, &ctx).unwrap();
        // parallel curves: after centering all rows at a grid point agree
        for g in 0..10 {
            let vals: Vec<f64> = c.rows[g * 200..(g + 1) * 200].iter().map(|r| r[0].as_f64().unwrap()).collect();
            assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-9));
        }
        assert!(partial_dependence_data(&m, task.data(), &["x1"], &PdOptions { center: Some(HashMap::new()), ..Default::default() }, &ctx).is_err());
        assert!(partial_dependence_data(&m, task.data(), &["x1", "x2"], &PdOptions { interaction: true, derivative: true, ..Default::default() }, &ctx).is_err());
    }

    #[test]
    fn pd_of_constant_and_classifier() {
        let task = linear_regr_task(50, 0.1, 4);
        let ctx = Ctx::new(1);
        let m = train(&learner("regr.featureless").unwrap(), &task, None, None, &ctx).unwrap();
        let d = partial_dependence_data(&m, task.data(), &["x2"], &PdOptions { derivative: true, ..Default::default() }, &ctx).unwrap();
        assert!(num(&d, "y").iter().all(|v| *v == 0.0));
        let ct = gaussian_classif_task(100, 2, 1);
        let lda = learner("classif.lda").unwrap().set_predict_type(PredictType::Prob).unwrap();
        let cm = train(&lda, &ct, None, None, &ctx).unwrap();
        let pd = partial_dependence_data(&cm, ct.data(), &["x1"], &PdOptions::default(), &ctx).unwrap();
        assert_eq!(pd.header[..2], ["Class".to_string(), "Probability".to_string()]);
        assert_eq!(pd.len(), 10);
        let q = partial_dependence_data(&cm, ct.data(), &["x1"], &PdOptions { fun: PdFun::Quantiles(0.1, 0.9), ..Default::default() }, &ctx).unwrap();
        for r in &q.rows {
            let (v, lo, hi) = (r[1].as_f64().unwrap(), r[2].as_f64().unwrap(), r[3].as_f64().unwrap());
            assert!(lo <= v && v <= hi);
        }
    }

    #[test]
    fn fanova_of_additive_model() {
        let task = linear_regr_task(150, 0.0, 8);
        let ctx = Ctx::new(1);
        let m = train(&learner("regr.ols").unwrap(), &task, None, None, &ctx).unwrap();
        let fa = functional_anova_data(&m, task.data(), &["x1", "x2", "x3"], 2, &PdOptions::default(), &ctx).unwrap();
        let labels: Vec<String> = fa.rows.iter().map(|r| match &r[0] { Cell::Str(s) => s.clone(), _ => unreachable!() }).collect();
        let mut uniq = labels.clone();
        uniq.dedup();
        assert_eq!(uniq, vec!["x1", "x2", "x3", "x1:x2", "x1:x3", "x2:x3"]);
        for r in fa.rows.iter().filter(|r| matches!(&r[0], Cell::Str(s) if s.contains(':'))) {
            assert!(r[1].as_f64().unwrap().abs() < 1e-6);
        }
        let one = functional_anova_data(&m, task.data(), &["x1"], 1, &PdOptions::default(), &ctx).unwrap();
        let pd = partial_dependence_data(&m, task.data(), &["x1"], &PdOptions::default(), &ctx).unwrap();
        assert_eq!(num(&one, "y"), num(&pd, "y"));
        let ct = gaussian_classif_task(50, 2, 1);
        let cm = train(&learner("classif.lda").unwrap().set_predict_type(PredictType::Prob).unwrap(), &ct, None, None, &ctx).unwrap();
        assert!(functional_anova_data(&cm, ct.data(), &["x1"], 1, &PdOptions::default(), &ctx).is_err());
    }
}
