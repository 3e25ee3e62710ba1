//! Learning tasks: a dataset plus the description of the learning problem.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnData, ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classif,
    Regr,
    Cluster,
    Multilabel,
    Costsens,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Classif => "classif",
            TaskKind::Regr => "regr",
            TaskKind::Cluster => "cluster",
            TaskKind::Multilabel => "multilabel",
            TaskKind::Costsens => "costsens",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classif" => Ok(TaskKind::Classif),
            "regr" => Ok(TaskKind::Regr),
            "cluster" => Ok(TaskKind::Cluster),
            "multilabel" => Ok(TaskKind::Multilabel),
            "costsens" => Ok(TaskKind::Costsens),
            other => Err(Error::unknown("task kind", other)),
        }
    }
}

/// Example-dependent costs: one row per observation, one column per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub classes: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CostTable {
    pub fn new(classes: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::arg("cost table needs at least one class"));
        }
        if rows.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::arg("every cost row needs one entry per class"));
        }
        if rows.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::arg("costs must be finite"));
        }
        Ok(CostTable { classes, rows })
    }

    fn subset(&self, rows: &[usize]) -> CostTable {
        CostTable { classes: self.classes.clone(), rows: rows.iter().map(|&i| self.rows[i].clone()).collect() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub numerics: usize,
    pub factors: usize,
    pub ordered: usize,
    pub logicals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDesc {
    pub id: String,
    pub kind: TaskKind,
    pub targets: Vec<String>,
    pub size: usize,
    pub n_feat: FeatureCounts,
    pub has_missings: bool,
    pub has_weights: bool,
    /// Class levels (classif, costsens) or label names (multilabel).
    pub class_levels: Vec<String>,
    pub class_counts: Vec<usize>,
    pub positive: Option<String>,
    pub negative: Option<String>,
}

impl TaskDesc {
    pub fn positive_index(&self) -> Option<usize> {
        self.positive.as_ref().and_then(|p| self.class_levels.iter().position(|l| l == p))
    }

    pub fn n_classes(&self) -> usize {
        self.class_levels.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct TaskOptions {
    pub positive: Option<String>,
    pub costs: Option<CostTable>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    id: String,
    kind: TaskKind,
    data: Arc<Dataset>,
    targets: Vec<String>,
    positive: Option<String>,
    negative: Option<String>,
    costs: Option<Arc<CostTable>>,
    weights: Option<Arc<Vec<f64>>>,
}

/// Builds a task after checking the kind-specific rules on target columns,
/// positive class, cost table and weights.
pub fn make_task<S: AsRef<str>>(
    id: &str,
    kind: TaskKind,
    data: Dataset,
    targets: &[S],
    opts: TaskOptions,
) -> Result<Task> {
    let targets: Vec<String> = targets.iter().map(|s| s.as_ref().to_string()).collect();
    for t in &targets {
        data.column(t)?;
    }
    let distinct: BTreeSet<&String> = targets.iter().collect();
    if distinct.len() != targets.len() {
        return Err(Error::arg("duplicate target names"));
    }
    let mut positive = None;
    let mut negative = None;
    match kind {
        TaskKind::Classif => {
            if targets.len() != 1 {
                return Err(Error::arg("classification tasks need exactly one target"));
            }
            let col = data.column(&targets[0])?;
            let levels = match col.kind() {
                ColumnKind::Factor | ColumnKind::Ordered => col.levels().unwrap().to_vec(),
                k => {
                    return Err(Error::data(format!(
                        "classification target '{}' must be a factor, found {k}",
                        targets[0]
                    )))
                }
            };
            if levels.len() == 2 {
                let pos = match &opts.positive {
                    Some(p) => {
                        if !levels.contains(p) {
                            return Err(Error::arg(format!("positive class '{p}' is not a class level")));
                        }
                        p.clone()
                    }
                    None => levels[0].clone(),
                };
                negative = levels.iter().find(|l| **l != pos).cloned();
                positive = Some(pos);
            } else if let Some(p) = &opts.positive {
                if !levels.contains(p) {
                    return Err(Error::arg(format!("positive class '{p}' is not a class level")));
                }
                if levels.len() > 2 {
                    return Err(Error::arg("a positive class can only be set for binary tasks"));
                }
            }
        }
        TaskKind::Regr => {
            if targets.len() != 1 {
                return Err(Error::arg("regression tasks need exactly one target"));
            }
            let col = data.column(&targets[0])?;
            if col.kind() != ColumnKind::Numeric {
                return Err(Error::data(format!(
                    "regression target '{}' must be numeric, found {}",
                    targets[0],
                    col.kind()
                )));
            }
        }
        TaskKind::Cluster => {
            if !targets.is_empty() {
                return Err(Error::arg("cluster tasks have no target"));
            }
        }
        TaskKind::Multilabel => {
            if targets.is_empty() {
                return Err(Error::arg("multilabel tasks need at least one label column"));
            }
            for t in &targets {
                let k = data.column(t)?.kind();
                if k != ColumnKind::Logical {
                    return Err(Error::data(format!("multilabel target '{t}' must be logical, found {k}")));
                }
            }
        }
        TaskKind::Costsens => {
            if !targets.is_empty() {
                return Err(Error::arg("cost-sensitive tasks have no target column"));
            }
        }
    }
    let costs = match (kind, opts.costs) {
        (TaskKind::Costsens, Some(c)) => {
            if c.rows.len() != data.n_rows() {
                return Err(Error::arg(format!(
                    "cost matrix has {} rows, data has {}",
                    c.rows.len(),
                    data.n_rows()
                )));
            }
            Some(Arc::new(c))
        }
        (TaskKind::Costsens, None) => return Err(Error::arg("cost-sensitive tasks need a cost matrix")),
        (_, Some(_)) => return Err(Error::arg("only cost-sensitive tasks carry a cost matrix")),
        (_, None) => None,
    };
    let weights = match opts.weights {
        Some(w) => {
            if w.len() != data.n_rows() {
                return Err(Error::arg("weights must have one entry per observation"));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::arg("weights must be finite and nonnegative"));
            }
            Some(Arc::new(w))
        }
        None => None,
    };
    Ok(Task {
        id: id.to_string(),
        kind,
        data: Arc::new(data),
        targets,
        positive,
        negative,
        costs,
        weights,
    })
}

impl Task {
    pub fn classif(id: &str, data: Dataset, target: &str) -> Result<Task> {
        make_task(id, TaskKind::Classif, data, &[target], TaskOptions::default())
    }

    pub fn classif_with_positive(id: &str, data: Dataset, target: &str, positive: &str) -> Result<Task> {
        make_task(
            id,
            TaskKind::Classif,
            data,
            &[target],
            TaskOptions { positive: Some(positive.to_string()), ..Default::default() },
        )
    }

    pub fn regr(id: &str, data: Dataset, target: &str) -> Result<Task> {
        make_task(id, TaskKind::Regr, data, &[target], TaskOptions::default())
    }

    pub fn cluster(id: &str, data: Dataset) -> Result<Task> {
        make_task::<&str>(id, TaskKind::Cluster, data, &[], TaskOptions::default())
    }

    pub fn multilabel<S: AsRef<str>>(id: &str, data: Dataset, labels: &[S]) -> Result<Task> {
        make_task(id, TaskKind::Multilabel, data, labels, TaskOptions::default())
    }

    pub fn costsens(id: &str, data: Dataset, costs: CostTable) -> Result<Task> {
        make_task::<&str>(
            id,
            TaskKind::Costsens,
            data,
            &[],
            TaskOptions { costs: Some(costs), ..Default::default() },
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn positive(&self) -> Option<&str> {
        self.positive.as_deref()
    }

    pub fn negative(&self) -> Option<&str> {
        self.negative.as_deref()
    }

    pub fn costs(&self) -> Option<&CostTable> {
        self.costs.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref().map(|w| w.as_slice())
    }

    pub fn size(&self) -> usize {
        self.data.n_rows()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.data
            .columns()
            .iter()
            .filter(|c| !self.targets.iter().any(|t| t == c.name()))
            .map(|c| c.name().to_string())
            .collect()
    }

    pub fn features(&self) -> Result<Dataset> {
        self.data.select(&self.feature_names())
    }

    pub fn n_features(&self) -> usize {
        self.data.n_cols() - self.targets.len()
    }

    pub fn with_id(mut self, id: &str) -> Task {
        self.id = id.to_string();
        self
    }

    /// Class levels for classif/costsens, label names for multilabel.
    pub fn class_levels(&self) -> Vec<String> {
        match self.kind {
            TaskKind::Classif => self.data.column(&self.targets[0]).unwrap().levels().unwrap().to_vec(),
            TaskKind::Multilabel => self.targets.clone(),
            TaskKind::Costsens => self.costs.as_ref().unwrap().classes.clone(),
            _ => Vec::new(),
        }
    }

    /// Target codes of a classification task.
    pub fn class_codes(&self) -> Result<&[Option<u32>]> {
        if self.kind != TaskKind::Classif {
            return Err(Error::arg(format!("task '{}' is not a classification task", self.id)));
        }
        Ok(self.data.column(&self.targets[0])?.codes().unwrap())
    }

    pub fn regr_target(&self) -> Result<&[f64]> {
        if self.kind != TaskKind::Regr {
            return Err(Error::arg(format!("task '{}' is not a regression task", self.id)));
        }
        Ok(self.data.column(&self.targets[0])?.as_numeric().unwrap())
    }

    /// Label matrix (rows × labels) of a multilabel task; missing cells are false.
    pub fn label_matrix(&self) -> Result<Vec<Vec<bool>>> {
        if self.kind != TaskKind::Multilabel {
            return Err(Error::arg(format!("task '{}' is not a multilabel task", self.id)));
        }
        let cols: Vec<&[Option<bool>]> = self
            .targets
            .iter()
            .map(|t| self.data.column(t).map(|c| c.as_logical().unwrap()))
            .collect::<Result<_>>()?;
        Ok((0..self.size()).map(|i| cols.iter().map(|c| c[i].unwrap_or(false)).collect()).collect())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        match self.kind {
            TaskKind::Classif => {
                let mut counts = vec![0; self.class_levels().len()];
                for c in self.class_codes().unwrap().iter().flatten() {
                    counts[*c as usize] += 1;
                }
                counts
            }
            TaskKind::Multilabel => self
                .targets
                .iter()
                .map(|t| {
                    self.data.column(t).unwrap().as_logical().unwrap().iter().filter(|v| **v == Some(true)).count()
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn desc(&self) -> TaskDesc {
        task_desc(self)
    }

    /// Same problem description over a different dataset. The dataset must
    /// contain the target columns.
    pub fn with_data(&self, data: Dataset) -> Result<Task> {
        let weights = match &self.weights {
            Some(w) if w.len() == data.n_rows() => Some(w.to_vec()),
            Some(_) => return Err(Error::arg("replacement data must keep the row count when weights are set")),
            None => None,
        };
        let costs = match &self.costs {
            Some(c) if c.rows.len() == data.n_rows() => Some((**c).clone()),
            Some(_) => return Err(Error::arg("replacement data must keep the row count of the cost matrix")),
            None => None,
        };
        make_task(
            &self.id,
            self.kind,
            data,
            &self.targets,
            TaskOptions { positive: self.positive.clone(), costs, weights },
        )
    }

    pub fn with_weights(&self, weights: Option<Vec<f64>>) -> Result<Task> {
        make_task(
            &self.id,
            self.kind,
            (*self.data).clone(),
            &self.targets,
            TaskOptions { positive: self.positive.clone(), costs: self.costs.as_deref().cloned(), weights },
        )
    }

    /// Row subset keeping features, weights and costs aligned.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Task> {
        let data = self.data.subset_rows(rows)?;
        Ok(Task {
            id: self.id.clone(),
            kind: self.kind,
            data: Arc::new(data),
            targets: self.targets.clone(),
            positive: self.positive.clone(),
            negative: self.negative.clone(),
            costs: self.costs.as_ref().map(|c| Arc::new(c.subset(rows))),
            weights: self.weights.as_ref().map(|w| Arc::new(rows.iter().map(|&i| w[i]).collect())),
        })
    }

    fn with_dataset_unchecked(&self, data: Dataset) -> Task {
        Task { data: Arc::new(data), ..self.clone() }
    }
}

pub fn task_desc(task: &Task) -> TaskDesc {
    let mut n_feat = FeatureCounts::default();
    for name in task.feature_names() {
        match task.data.column(&name).unwrap().kind() {
            ColumnKind::Numeric => n_feat.numerics += 1,
            ColumnKind::Factor => n_feat.factors += 1,
            ColumnKind::Ordered => n_feat.ordered += 1,
            ColumnKind::Logical => n_feat.logicals += 1,
        }
    }
    TaskDesc {
        id: task.id.clone(),
        kind: task.kind,
        targets: task.targets.clone(),
        size: task.size(),
        n_feat,
        has_missings: task.data.has_missing(),
        has_weights: task.weights.is_some(),
        class_levels: task.class_levels(),
        class_counts: task.class_counts(),
        positive: task.positive.clone(),
        negative: task.negative.clone(),
    }
}

/// Selects observations and/or features. Targets are always kept.
pub fn subset_task<S: AsRef<str>>(task: &Task, rows: Option<&[usize]>, features: Option<&[S]>) -> Result<Task> {
    let mut out = match rows {
        Some(r) => task.subset_rows(r)?,
        None => task.clone(),
    };
    if let Some(feats) = features {
        let all = task.feature_names();
        let mut keep: Vec<String> = Vec::new();
        for f in feats {
            let f = f.as_ref();
            if !all.iter().any(|a| a == f) {
                return Err(Error::unknown("feature", f));
            }
            keep.push(f.to_string());
        }
        // keep original column order
        let cols: Vec<String> = out
            .data
            .names()
            .into_iter()
            .filter(|n| keep.contains(n) || task.targets.contains(n))
            .collect();
        let data = out.data.select(&cols)?;
        out = out.with_dataset_unchecked(data);
    }
    Ok(out)
}

pub fn drop_features<S: AsRef<str>>(task: &Task, names: &[S]) -> Result<Task> {
    let all = task.feature_names();
    for n in names {
        if !all.iter().any(|a| a == n.as_ref()) {
            return Err(Error::unknown("feature", n.as_ref()));
        }
    }
    let keep: Vec<String> = all.into_iter().filter(|a| !names.iter().any(|n| n.as_ref() == a)).collect();
    subset_task(task, None, Some(&keep))
}

/// Drops features with fewer than two distinct non-missing values and
/// reports the removed names.
pub fn remove_constant_features(task: &Task) -> Result<(Task, Vec<String>)> {
    let removed: Vec<String> = task
        .feature_names()
        .into_iter()
        .filter(|n| task.data.column(n).unwrap().n_distinct() < 2)
        .collect();
    if !removed.is_empty() {
        log::info!("Removing {} columns: {}", removed.len(), removed.join(","));
    }
    Ok((drop_features(task, &removed)?, removed))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeMethod {
    Range,
    Standardize,
}

pub fn normalize_features(task: &Task, method: NormalizeMethod, range: (f64, f64)) -> Result<Task> {
    let (lo, hi) = range;
    if method == NormalizeMethod::Range && hi <= lo {
        return Err(Error::arg("range normalization needs hi > lo"));
    }
    let mut data = (*task.data).clone();
    for name in task.feature_names() {
        let col = task.data.column(&name)?;
        let Some(x) = col.as_numeric() else { continue };
        let present: Vec<f64> = x.iter().copied().filter(|v| !v.is_nan()).collect();
        let out: Vec<f64> = match method {
            NormalizeMethod::Range => {
                let min = present.iter().copied().fold(f64::INFINITY, f64::min);
                let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                x.iter()
                    .map(|&v| {
                        if v.is_nan() {
                            v
                        } else if max > min {
                            lo + (v - min) / (max - min) * (hi - lo)
                        } else {
                            lo
                        }
                    })
                    .collect()
            }
            NormalizeMethod::Standardize => {
                let m = crate::util::mean(&present);
                let s = crate::util::sd(&present);
                x.iter()
                    .map(|&v| {
                        if v.is_nan() {
                            v
                        } else if s > 0.0 && s.is_finite() {
                            (v - m) / s
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        };
        data.push_column(Column::numeric(name, out))?;
    }
    Ok(task.with_dataset_unchecked(data))
}

/// Replaces each factor feature with one 0/1 indicator column per level
/// named `feature.level`.
pub fn create_dummy_features(task: &Task) -> Result<Task> {
    let mut cols = Vec::new();
    for col in task.data.columns() {
        let is_target = task.targets.iter().any(|t| t == col.name());
        match col.data() {
            ColumnData::Factor { codes, levels, .. } if !is_target => {
                for (li, level) in levels.iter().enumerate() {
                    let v = codes
                        .iter()
                        .map(|c| match c {
                            None => f64::NAN,
                            Some(c) if *c as usize == li => 1.0,
                            Some(_) => 0.0,
                        })
                        .collect();
                    cols.push(Column::numeric(format!("{}.{}", col.name(), level), v));
                }
            }
            _ => cols.push(col.clone()),
        }
    }
    let data = Dataset::with_rows(cols, task.size())?;
    Ok(task.with_dataset_unchecked(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::new(vec![
            Column::numeric("x1", vec![1.0, 2.0, 3.0, 4.0]),
            Column::numeric("c", vec![1.0, 1.0, 1.0, 1.0]),
            Column::factor_from_strs("f", &["a", "b", "a", "b"]),
            Column::factor_from_strs("y", &["u", "v", "u", "v"]),
        ])
        .unwrap()
    }

    #[test]
    fn default_positive_is_first_level() {
        let t = Task::classif("t", small(), "y").unwrap();
        assert_eq!(t.positive(), Some("u"));
        assert_eq!(t.negative(), Some("v"));
        let t = Task::classif_with_positive("t", small(), "y", "v").unwrap();
        assert_eq!(t.negative(), Some("u"));
        assert!(Task::classif_with_positive("t", small(), "y", "w").is_err());
    }

    #[test]
    fn regr_with_factor_target_fails() {
        assert!(Task::regr("t", small(), "y").is_err());
        assert!(Task::classif("t", small(), "x1").is_err());
    }

    #[test]
    fn desc_counts() {
        let t = Task::classif("t", small(), "y").unwrap();
        let d = t.desc();
        assert_eq!(d.size, 4);
        assert_eq!(d.n_feat.numerics, 2);
        assert_eq!(d.n_feat.factors, 1);
        assert_eq!(d.class_counts, vec![2, 2]);
        assert!(!d.has_missings);
    }

    #[test]
    fn targets_only_task_has_no_features() {
        let data = Dataset::new(vec![Column::factor_from_strs("y", &["a", "b"])]).unwrap();
        let d = Task::classif("t", data, "y").unwrap().desc();
        assert_eq!(d.n_feat, FeatureCounts::default());
    }

    #[test]
    fn missing_cell_flags_desc() {
        let data = Dataset::new(vec![
            Column::numeric("x", vec![1.0, f64::NAN]),
            Column::numeric("y", vec![1.0, 2.0]),
        ])
        .unwrap();
        assert!(Task::regr("t", data, "y").unwrap().desc().has_missings);
    }

    #[test]
    fn subset_rows_and_features() {
        let t = Task::classif("t", small(), "y").unwrap();
        let s = subset_task(&t, Some(&[1, 2]), Some(&["x1"])).unwrap();
        assert_eq!(s.size(), 2);
        assert_eq!(s.feature_names(), vec!["x1"]);
        assert_eq!(s.targets(), &["y".to_string()]);
        assert!(subset_task(&t, Some(&[9]), None::<&[&str]>).is_err());
        assert!(subset_task(&t, None, Some(&["nope"])).is_err());
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(subset_task(&t, Some(&all), Some(&t.feature_names())).unwrap(), t);
    }

    #[test]
    fn constant_features_removed() {
        let mut data = small();
        data.push_column(Column::numeric("m", vec![1.0, f64::NAN, 1.0, 1.0])).unwrap();
        let t = Task::classif("t", data, "y").unwrap();
        let (r, removed) = remove_constant_features(&t).unwrap();
        assert_eq!(removed, vec!["c", "m"]);
        assert_eq!(r.feature_names(), vec!["x1", "f"]);
    }

    #[test]
    fn range_and_standardize() {
        let t = Task::classif("t", small(), "y").unwrap();
        let r = normalize_features(&t, NormalizeMethod::Range, (0.0, 1.0)).unwrap();
        assert_eq!(r.data().column("x1").unwrap().as_numeric().unwrap(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(r.data().column("c").unwrap().as_numeric().unwrap(), &[0.0; 4]);
        let s = normalize_features(&t, NormalizeMethod::Standardize, (0.0, 1.0)).unwrap();
        let x = s.data().column("x1").unwrap().as_numeric().unwrap().to_vec();
        assert!(crate::util::mean(&x).abs() < 1e-12);
        assert!((crate::util::sd(&x) - 1.0).abs() < 1e-12);
        assert_eq!(s.data().column("c").unwrap().as_numeric().unwrap(), &[0.0; 4]);
        assert!(normalize_features(&t, NormalizeMethod::Range, (1.0, 1.0)).is_err());
    }

    #[test]
    fn dummies() {
        let data = Dataset::new(vec![
            Column::factor("f", &[Some("a"), Some("b"), None], None).unwrap(),
            Column::numeric("y", vec![1.0, 2.0, 3.0]),
        ])
        .unwrap();
        let t = Task::regr("t", data, "y").unwrap();
        let d = create_dummy_features(&t).unwrap();
        let a = d.data().column("f.a").unwrap().as_numeric().unwrap();
        assert_eq!(&a[..2], &[1.0, 0.0]);
        assert!(a[2].is_nan());
        assert!(d.data().column("f.b").unwrap().as_numeric().unwrap()[2].is_nan());
    }

    #[test]
    fn drop_features_rules() {
        let t = Task::classif("t", small(), "y").unwrap();
        assert_eq!(drop_features(&t, &["c"]).unwrap().n_features(), 2);
        assert_eq!(drop_features::<&str>(&t, &[]).unwrap(), t);
        assert!(drop_features(&t, &["zzz"]).is_err());
        assert!(drop_features(&t, &["y"]).is_err());
    }

    #[test]
    fn costsens_and_multilabel_rules() {
        let data = Dataset::new(vec![Column::numeric("x", vec![1.0, 2.0])]).unwrap();
        let costs = CostTable::new(vec!["a".into(), "b".into()], vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let t = Task::costsens("cs", data.clone(), costs).unwrap();
        assert_eq!(t.desc().class_levels, vec!["a", "b"]);
        let bad = CostTable::new(vec!["a".into()], vec![vec![0.0]]).unwrap();
        assert!(Task::costsens("cs", data.clone(), bad).is_err());
        let ml = data.with_column(Column::logical("l1", vec![Some(true), Some(false)])).unwrap();
        let t = Task::multilabel("ml", ml, &["l1"]).unwrap();
        assert_eq!(t.kind(), TaskKind::Multilabel);
        assert!(Task::multilabel("ml", data, &["x"]).is_err());
    }
}
