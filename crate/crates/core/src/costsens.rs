//! Class-dependent cost helpers and example-dependent cost wrappers.

use std::any::Any;
use std::fmt;
use std::sync::Arc;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::exec::{Ctx, Level};
use crate::learner::{Algorithm, Learner, Model, PredictType, Property, RawPrediction, TrainInput};
use crate::param::ParamSet;
use crate::task::{Task, TaskKind};
use crate::train::{raw_predict, train, WrappedModel};
use crate::util::argmin;

/// Misclassification costs: rows are true classes, columns predicted ones.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    classes: Vec<String>,
    costs: Vec<Vec<f64>>,
}

impl CostMatrix {
    pub fn new<S: AsRef<str>>(classes: &[S], costs: Vec<Vec<f64>>) -> Result<Self> {
        let k = classes.len();
        if k < 2 || costs.len() != k || costs.iter().any(|r| r.len() != k) {
            return Err(Error::arg(format!("a cost matrix for {k} classes must be {k}x{k}")));
        }
        if costs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::arg("costs must be finite"));
        }
        for (i, row) in costs.iter().enumerate() {
            if row.iter().any(|c| *c < row[i]) {
                log::warn!("cost matrix row '{}' has a diagonal entry that is not minimal", classes[i].as_ref());
            }
        }
        Ok(CostMatrix { classes: classes.iter().map(|s| s.as_ref().to_string()).collect(), costs })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.costs
    }

    /// Cost of predicting `pred` when the truth is `truth`.
    pub fn get(&self, truth: &str, pred: &str) -> Option<f64> {
        let i = self.classes.iter().position(|c| c == truth)?;
        let j = self.classes.iter().position(|c| c == pred)?;
        Some(self.costs[i][j])
    }

    fn index(&self, class: &str) -> Result<usize> {
        self.classes.iter().position(|c| c == class).ok_or_else(|| Error::unknown("class", class))
    }
}

impl fmt::Display for CostMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.classes.iter().map(String::len).max().unwrap_or(1).max(6);
        write!(f, "{:w$}", "")?;
        for c in &self.classes {
            write!(f, " {c:>w$}")?;
        }
        for (c, row) in self.classes.iter().zip(&self.costs) {
            write!(f, "\n{c:w$}")?;
            for v in row {
                write!(f, " {:>w$}", crate::param::fmt_g(*v))?;
            }
        }
        Ok(())
    }
}

/// Probability threshold for `positive` that minimizes expected cost in a
/// binary problem. Invariant under positive scaling of the costs.
pub fn theoretical_threshold(costs: &CostMatrix, positive: &str) -> Result<f64> {
    if costs.classes.len() != 2 {
        return Err(Error::arg("the theoretical threshold needs a 2x2 cost matrix"));
    }
    let p = costs.index(positive)?;
    let n = 1 - p;
    let c = &costs.costs;
    let num = c[n][p] - c[n][n];
    let den = c[n][p] - c[p][p] + c[p][n] - c[n][n];
    if den == 0.0 {
        return Err(Error::arg("the cost matrix gives no preference between the classes"));
    }
    Ok(num / den)
}

/// Factor by which positive observations are weighted so that a learner
/// thresholding at `t0` behaves like one thresholding at `t`.
pub fn theoretical_weight(t: f64, t0: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0 && t0 > 0.0 && t0 < 1.0) {
        return Err(Error::arg("thresholds must lie in (0, 1)"));
    }
    Ok((1.0 - t) / t * (t0 / (1.0 - t0)))
}

/// Heuristic class thresholds 2 / row sum for multiclass cost matrices, in
/// class order. Meant for `Prediction::set_threshold`.
pub fn multiclass_cost_thresholds(costs: &CostMatrix) -> Result<Vec<f64>> {
    costs
        .costs
        .iter()
        .zip(&costs.classes)
        .map(|(row, c)| {
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                Err(Error::arg(format!("costs of class '{c}' sum to zero")))
            } else {
                Ok(2.0 / s)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Example-dependent costs

fn fresh_name(data: &Dataset, base: &str) -> String {
    let mut name = base.to_string();
    while data.has_column(&name) {
        name.push('_');
    }
    name
}

fn cost_rows(task: &Task) -> Result<&[Vec<f64>]> {
    task.costs().map(|c| c.rows.as_slice()).ok_or_else(|| Error::arg(format!("task '{}' has no costs", task.id())))
}

/// Binary or multiclass task on the cost task's features. `labels` are class
/// indices into `classes`; only classes that occur become levels.
fn label_task(task: &Task, rows: &[usize], labels: &[usize], classes: &[String]) -> Result<(Task, Vec<usize>)> {
    let mut used: Vec<usize> = labels.to_vec();
    used.sort_unstable();
    used.dedup();
    let levels: Vec<String> = used.iter().map(|&k| classes[k].clone()).collect();
    let codes = labels.iter().map(|l| used.iter().position(|u| u == l).map(|p| p as u32)).collect();
    let feats = task.data().select(&task.feature_names())?.subset_rows(rows)?;
    let target = fresh_name(&feats, "class");
    let data = feats.with_column(Column::factor_codes(target.clone(), codes, levels)?)?;
    Ok((Task::classif(&format!("{}.{target}", task.id()), data, &target)?, used))
}

/// A class model, or a single class when training saw only one.
#[derive(Debug)]
enum ClassModel {
    Fitted { model: WrappedModel, classes: Vec<usize> },
    Constant(usize),
}

impl ClassModel {
    fn fit(base: &Learner, task: &Task, rows: &[usize], labels: &[usize], weights: Option<&[f64]>, classes: &[String], ctx: &Ctx) -> Result<Self> {
        let (t, used) = label_task(task, rows, labels, classes)?;
        if used.len() == 1 {
            return Ok(ClassModel::Constant(used[0]));
        }
        let m = train(base, &t, None, weights, ctx)?;
        if m.is_failure() {
            return Err(Error::LearnerFailed { learner: base.id().to_string(), message: crate::train::get_failure_message(&m)? });
        }
        Ok(ClassModel::Fitted { model: m, classes: used })
    }

    fn predict(&self, data: &Dataset, ctx: &Ctx) -> Result<Vec<Option<usize>>> {
        match self {
            ClassModel::Constant(k) => Ok(vec![Some(*k); data.n_rows()]),
            ClassModel::Fitted { model, classes } => match raw_predict(model, data, ctx)? {
                RawPrediction::Classif { response, .. } => Ok(response.iter().map(|r| r.map(|c| classes[c as usize])).collect()),
                _ => Err(Error::data("class model returned a non-class prediction")),
            },
        }
    }
}

fn row_argmin(row: &[f64]) -> usize {
    argmin(row).unwrap_or(0)
}

fn check_base(learner: &Learner, kind: TaskKind) -> Result<()> {
    if learner.kind() != kind {
        return Err(Error::arg(format!("'{}' is a {} learner, a {kind} learner is needed", learner.id(), learner.kind())));
    }
    Ok(())
}

fn cost_learner(class: &str, suffix: &str, base: Learner, algo: Arc<dyn Algorithm>) -> Result<Learner> {
    let id = format!("{}.{suffix}", base.id());
    let mut props = base.properties().clone();
    props.retain(|p| matches!(p, Property::Numerics | Property::Factors | Property::Ordered | Property::Missings));
    Ok(Learner::from_parts(class, TaskKind::Costsens, props, ParamSet::empty(), algo, Some(base))?.set_id(&id))
}

#[derive(Debug)]
pub struct CostClassifModel {
    model: ClassModel,
}

impl Model for CostClassifModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        let r = self.model.predict(data, ctx)?;
        Ok(RawPrediction::Classif { response: r.into_iter().map(|c| c.map(|c| c as u32)).collect(), prob: None })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

struct CostClassif;

impl Algorithm for CostClassif {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let costs = cost_rows(task)?;
        let labels: Vec<usize> = costs.iter().map(|r| row_argmin(r)).collect();
        let rows: Vec<usize> = (0..task.size()).collect();
        let base = input.learner.next().expect("wrapped learner");
        let model = ClassModel::fit(base, task, &rows, &labels, None, &task.class_levels(), input.ctx)?;
        Ok(Box::new(CostClassifModel { model }))
    }

    fn forwards_predict_type(&self) -> bool {
        false
    }
}

/// Trains a classifier on the cheapest class of every row.
pub fn make_costsens_classif_wrapper(learner: Learner) -> Result<Learner> {
    check_base(&learner, TaskKind::Classif)?;
    let learner = learner.set_predict_type(PredictType::Response)?;
    cost_learner("CostSensClassifWrapper", "costsens", learner, Arc::new(CostClassif))
}

/// One cost regression per class; predicts the class with the lowest
/// predicted cost.
#[derive(Debug)]
pub struct CostRegrModel {
    pub models: Vec<WrappedModel>,
}

impl Model for CostRegrModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        let mut preds = Vec::with_capacity(self.models.len());
        for (k, m) in self.models.iter().enumerate() {
            match raw_predict(m, data, &ctx.child("class", k as u64))? {
                RawPrediction::Regr { response, .. } => preds.push(response),
                _ => return Err(Error::data("cost model returned a non-numeric prediction")),
            }
        }
        let response = (0..data.n_rows())
            .map(|i| {
                let row: Vec<f64> = preds.iter().map(|p| p[i]).collect();
                argmin(&row).map(|k| k as u32)
            })
            .collect();
        Ok(RawPrediction::Classif { response, prob: None })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

struct CostRegr;

impl Algorithm for CostRegr {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let costs = cost_rows(task)?;
        let base = input.learner.next().expect("wrapped learner");
        let feats = task.data().select(&task.feature_names())?;
        let target = fresh_name(&feats, "cost");
        let k = task.class_levels().len();
        let models = input.ctx.map_units(Level::Resample, "costsens.regr", k, |j, c| {
            let y: Vec<f64> = costs.iter().map(|r| r[j]).collect();
            let data = feats.with_column(Column::numeric(target.clone(), y))?;
            let t = Task::regr(&format!("{}.{j}", task.id()), data, &target)?;
            let m = train(base, &t, None, input.weights, c)?;
            if m.is_failure() {
                return Err(Error::LearnerFailed { learner: base.id().to_string(), message: crate::train::get_failure_message(&m)? });
            }
            Ok(m)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(CostRegrModel { models }))
    }
}

pub fn make_costsens_regr_wrapper(learner: Learner) -> Result<Learner> {
    check_base(&learner, TaskKind::Regr)?;
    let learner = learner.set_predict_type(PredictType::Response)?;
    cost_learner("CostSensRegrWrapper", "costsens", learner, Arc::new(CostRegr))
}

/// Pairwise weighted binary models over all class pairs (a, b), a < b.
#[derive(Debug)]
pub struct CostPairsModel {
    n_classes: usize,
    pairs: Vec<(usize, usize, Option<ClassModel>)>,
}

impl CostPairsModel {
    pub fn n_models(&self) -> usize {
        self.pairs.len()
    }
}

impl Model for CostPairsModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        let n = data.n_rows();
        let mut votes = vec![vec![0usize; self.n_classes]; n];
        for (p, (_, _, m)) in self.pairs.iter().enumerate() {
            let winners = match m {
                Some(m) => m.predict(data, &ctx.child("pair", p as u64))?,
                // no row prefers either class: count nothing
                None => continue,
            };
            for (v, w) in votes.iter_mut().zip(winners) {
                if let Some(w) = w {
                    v[w] += 1;
                }
            }
        }
        let response = votes
            .iter()
            .map(|v| {
                let best = *v.iter().max().unwrap_or(&0);
                v.iter().position(|c| *c == best).map(|k| k as u32)
            })
            .collect();
        Ok(RawPrediction::Classif { response, prob: None })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

struct CostPairs;

impl Algorithm for CostPairs {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let costs = cost_rows(task)?;
        let classes = task.class_levels();
        let k = classes.len();
        let base = input.learner.next().expect("wrapped learner");
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        let fitted = input.ctx.map_units(Level::Resample, "costsens.pairs", pairs.len(), |p, c| {
            let (a, b) = pairs[p];
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            let mut weights = Vec::new();
            for (i, r) in costs.iter().enumerate() {
                let w = (r[a] - r[b]).abs();
                if w > 0.0 {
                    rows.push(i);
                    labels.push(if r[a] < r[b] { a } else { b });
                    weights.push(w);
                }
            }
            if rows.is_empty() {
                return Ok((a, b, None));
            }
            Ok((a, b, Some(ClassModel::fit(base, task, &rows, &labels, Some(&weights), &classes, c)?)))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(CostPairsModel { n_classes: k, pairs: fitted }))
    }
}

/// One weighted binary classifier per class pair, combined by vote.
pub fn make_costsens_weighted_pairs_wrapper(learner: Learner) -> Result<Learner> {
    check_base(&learner, TaskKind::Classif)?;
    if !learner.has_property(Property::Weights) {
        return Err(Error::unsupported(learner.id(), "observation weights"));
    }
    if !learner.has_property(Property::TwoClass) {
        return Err(Error::unsupported(learner.id(), "two-class problems"));
    }
    let learner = learner.set_predict_type(PredictType::Response)?;
    cost_learner("CostSensWeightedPairsWrapper", "costsens", learner, Arc::new(CostPairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::learner;
    use crate::measures::get_measure;
    use crate::task::CostTable;
    use crate::train::predict_task;
    use rand::{Rng, SeedableRng};

    fn credit() -> CostMatrix {
        CostMatrix::new(&["Bad", "Good"], vec![vec![0.0, 5.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn thresholds_and_weights() {
        let t = theoretical_threshold(&credit(), "Bad").unwrap();
        assert!((t - 1.0 / 6.0).abs() < 1e-12);
        assert!((theoretical_weight(t, 0.5).unwrap() - 5.0).abs() < 1e-12);
        let sym = CostMatrix::new(&["a", "b"], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(theoretical_threshold(&sym, "a").unwrap(), 0.5);
        let two = CostMatrix::new(&["a", "b"], vec![vec![0.0, 2.0], vec![1.0, 0.0]]).unwrap();
        assert!((theoretical_threshold(&two, "a").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let scaled = CostMatrix::new(&["Bad", "Good"], vec![vec![0.0, 50.0], vec![10.0, 0.0]]).unwrap();
        assert!((theoretical_threshold(&scaled, "Bad").unwrap() - t).abs() < 1e-12);
        assert!((theoretical_weight(0.2, 0.5).unwrap() - 4.0).abs() < 1e-12);
        assert!((theoretical_weight(0.3, 0.3).unwrap() - 1.0).abs() < 1e-12);
        let zero = CostMatrix::new(&["a", "b"], vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(theoretical_threshold(&zero, "a").is_err());
    }

    #[test]
    fn multiclass_thresholds_from_row_sums() {
        let m = CostMatrix::new(&["a", "b", "c"], vec![vec![0.0, 30.0, 80.0], vec![4.0, 0.0, 5.0], vec![3.0, 15.0, 0.0]]).unwrap();
        let th = multiclass_cost_thresholds(&m).unwrap();
        for (v, e) in th.iter().zip([0.01818182, 0.22222222, 0.11111111]) {
            assert!((v - e).abs() < 1e-8);
        }
    }

    /// Two well separated clusters per class on x1, cheapest class known.
    fn cost_task(n: usize, k: usize, seed: u64) -> Task {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut rows = Vec::new();
        for i in 0..n {
            let c = i % k;
            x.push(c as f64 * 10.0 + rng.random_range(-1.0..1.0));
            rows.push((0..k).map(|j| if j == c { 0.0 } else { 50.0 + rng.random_range(0.0..10.0) }).collect());
        }
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let data = Dataset::new(vec![Column::numeric("x1", x)]).unwrap();
        Task::costsens("cs", data, CostTable::new(classes, rows).unwrap()).unwrap()
    }

    #[test]
    fn wrappers_find_cheapest_classes() {
        let task = cost_task(90, 3, 1);
        let mcp = get_measure("mcp").unwrap();
        let ctx = Ctx::new(1);
        for l in [
            make_costsens_classif_wrapper(learner("classif.cart").unwrap()).unwrap(),
            make_costsens_regr_wrapper(learner("regr.cart").unwrap()).unwrap(),
            make_costsens_weighted_pairs_wrapper(learner("classif.cart").unwrap()).unwrap(),
        ] {
            let m = train(&l, &task, None, None, &ctx).unwrap();
            let p = predict_task(&m, &task, None, &ctx).unwrap();
            let v = mcp.compute(&p, Some(&task), Some(&m)).unwrap();
            assert!(v.abs() < 1e-9, "{}: mcp {v}", l.id());
        }
        let pairs = make_costsens_weighted_pairs_wrapper(learner("classif.cart").unwrap()).unwrap();
        let m = train(&pairs, &task, None, None, &ctx).unwrap();
        assert_eq!(m.downcast::<CostPairsModel>().unwrap().n_models(), 3);
        assert!(make_costsens_weighted_pairs_wrapper(learner("classif.knn").unwrap()).is_err());
        assert!(make_costsens_regr_wrapper(learner("classif.cart").unwrap()).is_err());
    }

    #[test]
    fn two_classes_give_one_pair() {
        let task = cost_task(40, 2, 2);
        let pairs = make_costsens_weighted_pairs_wrapper(learner("classif.logreg").unwrap()).unwrap();
        let m = train(&pairs, &task, None, None, &Ctx::new(1)).unwrap();
        assert_eq!(m.downcast::<CostPairsModel>().unwrap().n_models(), 1);
    }
}
