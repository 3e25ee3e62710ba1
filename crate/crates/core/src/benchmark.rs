//! Benchmark experiments: several learners on several tasks with shared
//! resampling instances per task.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{Ctx, Level};
use crate::learner::Learner;
use crate::measures::{get_default_measure, Measure};
use crate::prediction::Prediction;
use crate::resample::{resample, ResampleOptions, ResampleResult, Resampling};
use crate::stats::PerfMatrix;
use crate::table::{Cell, Table};
use crate::task::Task;
use crate::train::WrappedModel;

/// Resampling for a benchmark: one strategy for all tasks or one per task.
#[derive(Clone, Debug)]
pub enum BenchResampling {
    Shared(Resampling),
    PerTask(Vec<Resampling>),
}

impl<T: Into<Resampling>> From<T> for BenchResampling {
    fn from(r: T) -> Self {
        BenchResampling::Shared(r.into())
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkResult {
    /// task id → learner id → result, in input order.
    pub results: IndexMap<String, IndexMap<String, ResampleResult>>,
    pub measures: Vec<Measure>,
    pub learner_ids: Vec<String>,
    pub task_ids: Vec<String>,
}

/// Restricts accessors to some learners and/or tasks.
#[derive(Clone, Debug, Default)]
pub struct BmrFilter {
    pub learners: Option<Vec<String>>,
    pub tasks: Option<Vec<String>>,
}

impl BmrFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn learners<S: AsRef<str>>(mut self, ids: &[S]) -> Self {
        self.learners = Some(ids.iter().map(|s| s.as_ref().to_string()).collect());
        self
    }

    pub fn tasks<S: AsRef<str>>(mut self, ids: &[S]) -> Self {
        self.tasks = Some(ids.iter().map(|s| s.as_ref().to_string()).collect());
        self
    }

    fn keep(&self, task: &str, learner: &str) -> bool {
        self.tasks.as_ref().is_none_or(|t| t.iter().any(|x| x == task))
            && self.learners.as_ref().is_none_or(|l| l.iter().any(|x| x == learner))
    }
}

pub type PerCell<T> = IndexMap<String, IndexMap<String, T>>;

fn check_unique(kind: &'static str, ids: &[String]) -> Result<()> {
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(Error::duplicate(kind, id));
        }
    }
    Ok(())
}

/// Runs `resample` for every (task, learner) pair. The resampling of each
/// task is instantiated once and shared by all learners.
pub fn benchmark(
    learners: &[Learner],
    tasks: &[Task],
    resampling: impl Into<BenchResampling>,
    opts: &ResampleOptions,
    ctx: &Ctx,
) -> Result<BenchmarkResult> {
    if learners.is_empty() || tasks.is_empty() {
        return Err(Error::arg("a benchmark needs at least one learner and one task"));
    }
    let learner_ids: Vec<String> = learners.iter().map(|l| l.id().to_string()).collect();
    let task_ids: Vec<String> = tasks.iter().map(|t| t.id().to_string()).collect();
    check_unique("learner", &learner_ids)?;
    check_unique("task", &task_ids)?;
    for t in tasks {
        for l in learners {
            l.check_task(t)?;
        }
    }
    let resamplings = match resampling.into() {
        BenchResampling::Shared(r) => vec![r; tasks.len()],
        BenchResampling::PerTask(rs) => {
            if rs.len() != tasks.len() {
                return Err(Error::arg(format!("got {} resamplings for {} tasks", rs.len(), tasks.len())));
            }
            rs
        }
    };
    let instances = tasks
        .iter()
        .zip(&resamplings)
        .enumerate()
        .map(|(t, (task, r))| r.instantiate(task, &ctx.child("instance", t as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut opts = opts.clone();
    if opts.measures.is_empty() {
        opts.measures = vec![get_default_measure(&tasks[0])];
    }
    let k = learners.len();
    let cells = ctx.map_units(Level::Benchmark, "benchmark", tasks.len() * k, |i, c| {
        let (t, l) = (i / k, i % k);
        log::info!("Task: {}, Learner: {}", task_ids[t], learner_ids[l]);
        resample(&learners[l], &tasks[t], instances[t].clone(), &opts, c)
    });
    let mut cells = cells.into_iter();
    let mut results = IndexMap::new();
    for tid in &task_ids {
        let mut row = IndexMap::new();
        for lid in &learner_ids {
            row.insert(lid.clone(), cells.next().expect("one cell per pair")?);
        }
        results.insert(tid.clone(), row);
    }
    Ok(BenchmarkResult { results, measures: opts.measures, learner_ids, task_ids })
}

impl BenchmarkResult {
    fn cells<'a>(&'a self, f: &'a BmrFilter) -> impl Iterator<Item = (&'a str, &'a str, &'a ResampleResult)> + 'a {
        self.results.iter().flat_map(move |(t, row)| {
            row.iter().filter(move |(l, _)| f.keep(t, l)).map(move |(l, r)| (t.as_str(), l.as_str(), r))
        })
    }

    fn per_cell<'a, T>(&'a self, f: &BmrFilter, mut g: impl FnMut(&'a ResampleResult) -> T) -> PerCell<T> {
        let mut out: PerCell<T> = IndexMap::new();
        for (t, row) in &self.results {
            for (l, r) in row.iter().filter(|(l, _)| f.keep(t, l)) {
                out.entry(t.clone()).or_default().insert(l.clone(), g(r));
            }
        }
        out
    }

    pub fn get(&self, task: &str, learner: &str) -> Option<&ResampleResult> {
        self.results.get(task)?.get(learner)
    }

    pub fn measure_ids(&self) -> Vec<String> {
        self.measures.iter().map(|m| m.id.clone()).collect()
    }

    /// One row per (task, learner, iteration) with the test values.
    pub fn performances(&self, f: &BmrFilter) -> Table {
        let mut t = Table::new(["task.id", "learner.id", "iter"].map(String::from).into_iter().chain(self.measure_ids()));
        for (tid, lid, r) in self.cells(f) {
            for (i, vals) in r.measures_test.iter().enumerate() {
                let mut row = vec![Cell::from(tid), Cell::from(lid), Cell::from(i + 1)];
                row.extend(vals.iter().map(|v| Cell::Num(*v)));
                t.push(row);
            }
        }
        t
    }

    pub fn aggr_performances(&self, f: &BmrFilter) -> Table {
        let names: Vec<String> = self.measures.iter().map(Measure::result_name).collect();
        let mut t = Table::new(["task.id", "learner.id"].map(String::from).into_iter().chain(names.iter().cloned()));
        for (tid, lid, r) in self.cells(f) {
            let mut row = vec![Cell::from(tid), Cell::from(lid)];
            row.extend(names.iter().map(|n| Cell::Num(r.aggr.get(n).copied().unwrap_or(f64::NAN))));
            t.push(row);
        }
        t
    }

    pub fn predictions(&self, f: &BmrFilter) -> PerCell<Option<&Prediction>> {
        self.per_cell(f, |r| r.pred.as_ref())
    }

    pub fn models(&self, f: &BmrFilter) -> PerCell<Option<&[WrappedModel]>> {
        self.per_cell(f, |r| r.models.as_deref())
    }

    /// Per-iteration tuning results, from the "tune_result" extractor or
    /// from kept models.
    pub fn tune_results(&self, f: &BmrFilter) -> PerCell<Vec<serde_json::Value>> {
        self.per_cell(f, |r| {
            extracted(r, |m| crate::tune::get_tune_result(m).map(|x| x.to_json()))
        })
    }

    pub fn featsel_results(&self, f: &BmrFilter) -> PerCell<Vec<serde_json::Value>> {
        self.per_cell(f, |r| {
            extracted(r, |m| crate::featsel::get_featsel_result(m).map(|x| x.to_json()))
        })
    }

    /// Aggregated values of one measure, learners × tasks.
    pub fn perf_matrix(&self, measure: Option<&str>) -> Result<PerfMatrix> {
        self.summary().perf_matrix(measure)
    }

    /// Learners of `b` added to `a`; both must cover the same tasks.
    pub fn merge_by_learner(a: &Self, b: &Self) -> Result<Self> {
        check_measures(a, b)?;
        if a.task_ids != b.task_ids {
            return Err(Error::arg("learner merge needs identical tasks"));
        }
        if let Some(l) = a.learner_ids.iter().find(|l| b.learner_ids.contains(l)) {
            return Err(Error::duplicate("learner", l));
        }
        let mut out = a.clone();
        for (t, row) in &b.results {
            out.results[t].extend(row.iter().map(|(l, r)| (l.clone(), r.clone())));
        }
        out.learner_ids.extend(b.learner_ids.iter().cloned());
        Ok(out)
    }

    /// Tasks of `b` added to `a`; both must use the same learners.
    pub fn merge_by_task(a: &Self, b: &Self) -> Result<Self> {
        check_measures(a, b)?;
        if a.learner_ids != b.learner_ids {
            return Err(Error::arg("task merge needs identical learners"));
        }
        if let Some(t) = a.task_ids.iter().find(|t| b.task_ids.contains(t)) {
            return Err(Error::duplicate("task", t));
        }
        let mut out = a.clone();
        out.results.extend(b.results.iter().map(|(t, r)| (t.clone(), r.clone())));
        out.task_ids.extend(b.task_ids.iter().cloned());
        Ok(out)
    }

    pub fn summary(&self) -> BenchmarkSummary {
        let opt = |v: f64| v.is_finite().then_some(v);
        BenchmarkSummary {
            measures: self
                .measures
                .iter()
                .map(|m| MeasureInfo { id: m.id.clone(), minimize: m.minimize, aggr: m.aggr.id.clone() })
                .collect(),
            learners: self.learner_ids.clone(),
            tasks: self.task_ids.clone(),
            cells: self
                .cells(&BmrFilter::all())
                .map(|(t, l, r)| CellSummary {
                    task_id: t.into(),
                    learner_id: l.into(),
                    aggr: r.aggr.iter().map(|(k, v)| (k.clone(), opt(*v))).collect(),
                    test: r.measures_test.iter().map(|row| row.iter().map(|v| opt(*v)).collect()).collect(),
                    err_msgs: r.err_msgs.clone(),
                })
                .collect(),
        }
    }

    /// Writes `bmr.json` plus one prediction CSV per cell under `pred/`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("pred"))?;
        std::fs::write(dir.join("bmr.json"), serde_json::to_string_pretty(&self.summary())? + "\n")?;
        for (t, l, r) in self.cells(&BmrFilter::all()) {
            if let Some(p) = &r.pred {
                std::fs::write(dir.join("pred").join(format!("{}__{}.csv", sanitize(t), sanitize(l))), p.to_csv())?;
            }
        }
        Ok(())
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Prefers kept models; otherwise whatever the extractor stored.
fn extracted(r: &ResampleResult, from_model: impl Fn(&WrappedModel) -> Option<serde_json::Value>) -> Vec<serde_json::Value> {
    match (&r.models, &r.extracts) {
        (Some(models), _) => models.iter().map(|m| from_model(m).unwrap_or_default()).collect(),
        (None, Some(ex)) => ex.clone(),
        (None, None) => Vec::new(),
    }
}

fn check_measures(a: &BenchmarkResult, b: &BenchmarkResult) -> Result<()> {
    let ids = |x: &BenchmarkResult| x.measures.iter().map(Measure::result_name).collect::<Vec<_>>();
    if ids(a) != ids(b) {
        return Err(Error::arg("benchmark results use different measures"));
    }
    Ok(())
}

impl fmt::Display for BenchmarkResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.aggr_performances(&BmrFilter::all());
        writeln!(f, "{}", t.header.join(" "))?;
        for row in &t.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => crate::util::signif(*v, 7),
                    Cell::Str(s) => s.clone(),
                    other => format!("{other:?}"),
                })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureInfo {
    pub id: String,
    pub minimize: bool,
    pub aggr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub task_id: String,
    pub learner_id: String,
    pub aggr: IndexMap<String, Option<f64>>,
    /// Per iteration, per measure.
    pub test: Vec<Vec<Option<f64>>>,
    pub err_msgs: Vec<Option<String>>,
}

/// The persisted form of a benchmark; enough to recompute rank statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub measures: Vec<MeasureInfo>,
    pub learners: Vec<String>,
    pub tasks: Vec<String>,
    pub cells: Vec<CellSummary>,
}

impl BenchmarkSummary {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// `None` picks the first measure.
    pub fn perf_matrix(&self, measure: Option<&str>) -> Result<PerfMatrix> {
        let m = match measure {
            None => self.measures.first().ok_or_else(|| Error::arg("benchmark has no measures"))?,
            Some(id) => self.measures.iter().find(|m| m.id == id).ok_or_else(|| Error::unknown("measure", id))?,
        };
        let key = format!("{}.{}", m.id, m.aggr);
        let mut values = vec![vec![f64::NAN; self.tasks.len()]; self.learners.len()];
        for c in &self.cells {
            let l = self.learners.iter().position(|x| *x == c.learner_id);
            let t = self.tasks.iter().position(|x| *x == c.task_id);
            if let (Some(l), Some(t)) = (l, t) {
                values[l][t] = c.aggr.get(&key).copied().flatten().unwrap_or(f64::NAN);
            }
        }
        PerfMatrix::new(&m.id, m.minimize, self.learners.clone(), self.tasks.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::iris_task;
    use crate::learner::learner;
    use crate::measures::get_measure;
    use crate::resample::ResampleDesc;
    use crate::stats::{friedman_test, rank_matrix};

    fn small_bmr(learners: &[&str], seed: u64) -> BenchmarkResult {
        let ls: Vec<Learner> = learners.iter().map(|l| learner(l).unwrap()).collect();
        let iris = iris_task();
        let other = iris.clone().with_id("iris2");
        let opts = ResampleOptions::new().measures(vec![get_measure("mmce").unwrap(), get_measure("acc").unwrap()]);
        benchmark(&ls, &[iris, other], ResampleDesc::cv(3), &opts, &Ctx::new(seed)).unwrap()
    }

    #[test]
    fn cells_and_tables() {
        let bmr = small_bmr(&["classif.lda", "classif.featureless"], 1);
        assert_eq!(bmr.results.len(), 2);
        assert_eq!(bmr.aggr_performances(&BmrFilter::all()).len(), 4);
        let perf = bmr.performances(&BmrFilter::all().tasks(&["iris2"]));
        assert_eq!(perf.header, vec!["task.id", "learner.id", "iter", "mmce", "acc"]);
        assert_eq!(perf.len(), 6);
        assert!(perf.rows.iter().all(|r| r[0] == Cell::from("iris2")));
        for row in &perf.rows {
            let (a, b) = (row[3].as_f64().unwrap(), row[4].as_f64().unwrap());
            assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn learners_share_instances() {
        let bmr = small_bmr(&["classif.lda", "classif.featureless"], 2);
        for row in bmr.results.values() {
            let insts: Vec<_> = row.values().map(|r| &r.instance.test_inds).collect();
            assert_eq!(insts[0], insts[1]);
        }
    }

    #[test]
    fn duplicate_learner_rejected() {
        let l = learner("classif.lda").unwrap();
        let r = benchmark(&[l.clone(), l], &[iris_task()], ResampleDesc::cv(2), &ResampleOptions::new(), &Ctx::new(1));
        assert!(matches!(r, Err(Error::Duplicate { .. })));
    }

    #[test]
    fn merging() {
        let a = small_bmr(&["classif.lda"], 3);
        let b = small_bmr(&["classif.featureless"], 3);
        let m = BenchmarkResult::merge_by_learner(&a, &b).unwrap();
        assert_eq!(m.learner_ids, vec!["classif.lda", "classif.featureless"]);
        assert_eq!(m.aggr_performances(&BmrFilter::all()).len(), 4);
        assert!(BenchmarkResult::merge_by_learner(&a, &a).is_err());
        assert!(BenchmarkResult::merge_by_task(&a, &a).is_err());
        let lda_rows = m.aggr_performances(&BmrFilter::all().learners(&["classif.lda"]));
        assert_eq!(lda_rows, a.aggr_performances(&BmrFilter::all()));
    }

    #[test]
    fn ranks_and_persistence() {
        let bmr = small_bmr(&["classif.lda", "classif.featureless"], 4);
        let pm = bmr.perf_matrix(Some("acc")).unwrap();
        assert!(!pm.minimize);
        for t in 0..2 {
            let s: f64 = rank_matrix(&pm).iter().map(|r| r[t]).sum();
            assert_eq!(s, 3.0);
        }
        assert_eq!(rank_matrix(&pm)[0], vec![1.0, 1.0]);
        let dir = std::env::temp_dir().join(format!("mlkit-bmr-{}", std::process::id()));
        bmr.save(&dir).unwrap();
        let back = BenchmarkSummary::load(&dir.join("bmr.json")).unwrap();
        assert_eq!(back, bmr.summary());
        assert_eq!(back.perf_matrix(Some("acc")).unwrap(), pm);
        assert_eq!(std::fs::read_dir(dir.join("pred")).unwrap().count(), 4);
        assert!(friedman_test(&pm).is_ok());
        std::fs::remove_dir_all(dir).ok();
    }
}
