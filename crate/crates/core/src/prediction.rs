//! Prediction containers, thresholding, confusion matrices and ROC measures.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::fmt_num;
use crate::error::{Error, Result};
use crate::learner::PredictType;
use crate::task::TaskKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Train,
    Test,
}

impl SetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetKind::Train => "train",
            SetKind::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Truth {
    None,
    Class(Vec<Option<u32>>),
    Regr(Vec<f64>),
    Labels(Vec<Vec<bool>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    /// Class codes for classif and costsens, cluster codes for cluster.
    Class(Vec<Option<u32>>),
    /// NaN marks a missing response.
    Regr(Vec<f64>),
    Labels(Vec<Option<Vec<bool>>>),
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Class(v) => v.len(),
            Response::Regr(v) => v.len(),
            Response::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_missing(&self) -> bool {
        match self {
            Response::Class(v) => v.iter().any(|x| x.is_none()),
            Response::Regr(v) => v.iter().any(|x| x.is_nan()),
            Response::Labels(v) => v.iter().any(|x| x.is_none()),
        }
    }

    fn subset(&self, rows: &[usize]) -> Response {
        match self {
            Response::Class(v) => Response::Class(rows.iter().map(|&i| v[i]).collect()),
            Response::Regr(v) => Response::Regr(rows.iter().map(|&i| v[i]).collect()),
            Response::Labels(v) => Response::Labels(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }

    fn extend(&mut self, other: &Response) -> Result<()> {
        match (self, other) {
            (Response::Class(a), Response::Class(b)) => a.extend_from_slice(b),
            (Response::Regr(a), Response::Regr(b)) => a.extend_from_slice(b),
            (Response::Labels(a), Response::Labels(b)) => a.extend(b.iter().cloned()),
            _ => return Err(Error::arg("cannot merge predictions of different kinds")),
        }
        Ok(())
    }
}

impl Truth {
    pub fn len(&self) -> Option<usize> {
        match self {
            Truth::None => None,
            Truth::Class(v) => Some(v.len()),
            Truth::Regr(v) => Some(v.len()),
            Truth::Labels(v) => Some(v.len()),
        }
    }

    fn subset(&self, rows: &[usize]) -> Truth {
        match self {
            Truth::None => Truth::None,
            Truth::Class(v) => Truth::Class(rows.iter().map(|&i| v[i]).collect()),
            Truth::Regr(v) => Truth::Regr(rows.iter().map(|&i| v[i]).collect()),
            Truth::Labels(v) => Truth::Labels(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }

    fn extend(&mut self, other: &Truth) -> Result<()> {
        match (self, other) {
            (Truth::None, Truth::None) => {}
            (Truth::Class(a), Truth::Class(b)) => a.extend_from_slice(b),
            (Truth::Regr(a), Truth::Regr(b)) => a.extend_from_slice(b),
            (Truth::Labels(a), Truth::Labels(b)) => a.extend(b.iter().cloned()),
            _ => return Err(Error::arg("cannot merge predictions of different kinds")),
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub kind: TaskKind,
    pub predict_type: PredictType,
    /// Class levels (classif, costsens), label names (multilabel) or cluster
    /// names "1".."k" when known.
    pub classes: Vec<String>,
    pub positive: Option<usize>,
    /// 0-based row indices into the task the rows were predicted from.
    pub id: Option<Vec<usize>>,
    pub truth: Truth,
    pub response: Response,
    /// Per-row class probabilities; per-label probability of TRUE for multilabel.
    pub prob: Option<Vec<Vec<f64>>>,
    pub se: Option<Vec<f64>>,
    pub iter: Option<Vec<usize>>,
    pub set: Option<Vec<SetKind>>,
    pub threshold: Option<Vec<f64>>,
    /// Seconds, missing for failure models.
    pub predict_time: Option<f64>,
}

/// Default threshold vector: 0.5 on the positive class for binary problems,
/// uniform 1/K otherwise.
pub fn default_threshold(k: usize, positive: Option<usize>) -> Vec<f64> {
    if k == 2 && positive.is_some() {
        vec![0.5, 0.5]
    } else {
        vec![1.0 / k as f64; k]
    }
}

/// Threshold rule. For two classes with a known positive class the positive
/// class wins iff `p_pos * t_neg >= p_neg * t_pos`; otherwise the class with
/// the largest `p / t` wins and the lowest index breaks ties.
pub fn apply_threshold(prob: &[f64], threshold: &[f64], positive: Option<usize>) -> Option<u32> {
    if prob.iter().any(|p| p.is_nan()) {
        return None;
    }
    if prob.len() == 2 {
        if let Some(pos) = positive {
            let neg = 1 - pos;
            let win = prob[pos] * threshold[neg] >= prob[neg] * threshold[pos];
            return Some(if win { pos } else { neg } as u32);
        }
    }
    let scores: Vec<f64> = prob.iter().zip(threshold).map(|(p, t)| p / t).collect();
    crate::util::argmax(&scores).map(|i| i as u32)
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn has_truth(&self) -> bool {
        !matches!(self.truth, Truth::None)
    }

    pub fn class_truth(&self) -> Result<&[Option<u32>]> {
        match &self.truth {
            Truth::Class(v) => Ok(v),
            _ => Err(Error::arg("prediction has no class truth")),
        }
    }

    pub fn class_response(&self) -> Result<&[Option<u32>]> {
        match &self.response {
            Response::Class(v) => Ok(v),
            _ => Err(Error::arg("prediction has no class response")),
        }
    }

    pub fn regr_truth(&self) -> Result<&[f64]> {
        match &self.truth {
            Truth::Regr(v) => Ok(v),
            _ => Err(Error::arg("prediction has no numeric truth")),
        }
    }

    pub fn regr_response(&self) -> Result<&[f64]> {
        match &self.response {
            Response::Regr(v) => Ok(v),
            _ => Err(Error::arg("prediction has no numeric response")),
        }
    }

    pub fn prob(&self) -> Result<&[Vec<f64>]> {
        self.prob.as_deref().ok_or_else(|| Error::arg("prediction has no probabilities"))
    }

    /// Probabilities of the positive class of a binary prediction.
    pub fn positive_prob(&self) -> Result<Vec<f64>> {
        let pos = self.positive.ok_or_else(|| Error::arg("prediction is not binary"))?;
        Ok(self.prob()?.iter().map(|r| r[pos]).collect())
    }

    /// Applies a new per-class threshold vector and recomputes the response.
    pub fn set_threshold(&self, threshold: &[f64]) -> Result<Prediction> {
        if self.predict_type != PredictType::Prob {
            return Err(Error::arg("thresholds can only be set on probability predictions"));
        }
        let k = self.classes.len();
        if threshold.len() != k {
            return Err(Error::arg(format!("threshold needs {k} entries, got {}", threshold.len())));
        }
        if threshold.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::arg("thresholds must be positive"));
        }
        let prob = self.prob()?;
        let mut out = self.clone();
        out.response = match self.kind {
            TaskKind::Multilabel => Response::Labels(
                prob.iter()
                    .enumerate()
                    .map(|(i, row)| match &self.response {
                        Response::Labels(r) if r[i].is_none() => None,
                        _ => Some(row.iter().zip(threshold).map(|(p, t)| *p >= *t).collect()),
                    })
                    .collect(),
            ),
            _ => Response::Class(prob.iter().map(|row| apply_threshold(row, threshold, self.positive)).collect()),
        };
        out.threshold = Some(threshold.to_vec());
        Ok(out)
    }

    /// Binary shorthand: threshold `t` for the positive class, `1 - t` for the other.
    pub fn set_threshold_binary(&self, t: f64) -> Result<Prediction> {
        let pos = self.positive.ok_or_else(|| Error::arg("a single threshold needs a binary prediction"))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::arg("binary threshold must lie in [0, 1]"));
        }
        let mut th = vec![0.0; 2];
        th[pos] = t;
        th[1 - pos] = 1.0 - t;
        let prob = self.prob()?;
        let mut out = self.clone();
        out.response = Response::Class(
            prob.iter()
                .map(|row| {
                    if row.iter().any(|p| p.is_nan()) {
                        None
                    } else {
                        Some(if row[pos] * th[1 - pos] >= row[1 - pos] * th[pos] { pos } else { 1 - pos } as u32)
                    }
                })
                .collect(),
        );
        out.threshold = Some(th);
        Ok(out)
    }

    /// Rows at the given positions.
    pub fn subset(&self, rows: &[usize]) -> Prediction {
        Prediction {
            kind: self.kind,
            predict_type: self.predict_type,
            classes: self.classes.clone(),
            positive: self.positive,
            id: self.id.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect()),
            truth: self.truth.subset(rows),
            response: self.response.subset(rows),
            prob: self.prob.as_ref().map(|v| rows.iter().map(|&i| v[i].clone()).collect()),
            se: self.se.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect()),
            iter: self.iter.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect()),
            set: self.set.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect()),
            threshold: self.threshold.clone(),
            predict_time: self.predict_time,
        }
    }

    /// Rows belonging to one resampling iteration and set.
    pub fn filter(&self, iter: Option<usize>, set: Option<SetKind>) -> Prediction {
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| iter.is_none_or(|it| self.iter.as_ref().is_some_and(|v| v[i] == it)))
            .filter(|&i| set.is_none_or(|s| self.set.as_ref().is_some_and(|v| v[i] == s)))
            .collect();
        self.subset(&rows)
    }

    pub fn tag(mut self, iter: usize, set: SetKind) -> Prediction {
        let n = self.len();
        self.iter = Some(vec![iter; n]);
        self.set = Some(vec![set; n]);
        self
    }

    /// Appends the rows of `other`. Both must stem from the same task kind.
    pub fn append(&mut self, other: &Prediction) -> Result<()> {
        if self.kind != other.kind || self.classes != other.classes {
            return Err(Error::arg("cannot merge predictions of different tasks"));
        }
        let n = self.len();
        let m = other.len();
        self.truth.extend(&other.truth)?;
        self.response.extend(&other.response)?;
        merge_opt(&mut self.id, &other.id, n, m, 0);
        merge_opt(&mut self.iter, &other.iter, n, m, 0);
        merge_opt(&mut self.set, &other.set, n, m, SetKind::Test);
        match (&mut self.prob, &other.prob) {
            (Some(a), Some(b)) => a.extend(b.iter().cloned()),
            (a, _) => *a = None,
        }
        match (&mut self.se, &other.se) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (a, _) => *a = None,
        }
        self.predict_time = match (self.predict_time, other.predict_time) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Ok(())
    }

    /// Column names of the CSV export.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = Vec::new();
        if self.id.is_some() {
            h.push("id".to_string());
        }
        match self.kind {
            TaskKind::Multilabel => {
                if self.has_truth() {
                    h.extend(self.classes.iter().map(|c| format!("truth.{c}")));
                }
                if self.prob.is_some() {
                    h.extend(self.classes.iter().map(|c| format!("prob.{c}")));
                }
                h.extend(self.classes.iter().map(|c| format!("response.{c}")));
            }
            _ => {
                if self.has_truth() {
                    h.push("truth".to_string());
                }
                if self.prob.is_some() {
                    let names: Vec<String> = if self.kind == TaskKind::Cluster {
                        (1..=self.prob.as_ref().unwrap().first().map_or(0, |r| r.len())).map(|i| i.to_string()).collect()
                    } else {
                        self.classes.clone()
                    };
                    h.extend(names.iter().map(|c| format!("prob.{c}")));
                }
                h.push("response".to_string());
            }
        }
        if self.se.is_some() {
            h.push("se".to_string());
        }
        if self.iter.is_some() {
            h.push("iter".to_string());
        }
        if self.set.is_some() {
            h.push("set".to_string());
        }
        h
    }

    fn class_name(&self, code: Option<u32>) -> String {
        match code {
            None => "NA".to_string(),
            Some(c) if self.kind == TaskKind::Cluster => (c + 1).to_string(),
            Some(c) => self.classes.get(c as usize).cloned().unwrap_or_else(|| c.to_string()),
        }
    }

    /// CSV export. Row ids are written 1-based.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.csv_header()).unwrap();
        let lg = |b: bool| if b { "TRUE".to_string() } else { "FALSE".to_string() };
        for i in 0..self.len() {
            let mut row: Vec<String> = Vec::new();
            if let Some(id) = &self.id {
                row.push((id[i] + 1).to_string());
            }
            match (&self.truth, &self.response) {
                (t, Response::Labels(r)) => {
                    if let Truth::Labels(t) = t {
                        row.extend(t[i].iter().map(|b| lg(*b)));
                    }
                    if let Some(p) = &self.prob {
                        row.extend(p[i].iter().map(|x| fmt_num(*x)));
                    }
                    match &r[i] {
                        Some(v) => row.extend(v.iter().map(|b| lg(*b))),
                        None => row.extend(self.classes.iter().map(|_| "NA".to_string())),
                    }
                }
                (t, r) => {
                    match t {
                        Truth::Class(v) => row.push(self.class_name(v[i])),
                        Truth::Regr(v) => row.push(fmt_num(v[i])),
                        _ => {}
                    }
                    if let Some(p) = &self.prob {
                        row.extend(p[i].iter().map(|x| fmt_num(*x)));
                    }
                    match r {
                        Response::Class(v) => row.push(self.class_name(v[i])),
                        Response::Regr(v) => row.push(fmt_num(v[i])),
                        Response::Labels(_) => unreachable!(),
                    }
                }
            }
            if let Some(se) = &self.se {
                row.push(fmt_num(se[i]));
            }
            if let Some(it) = &self.iter {
                row.push((it[i] + 1).to_string());
            }
            if let Some(s) = &self.set {
                row.push(s[i].as_str().to_string());
            }
            w.write_record(&row).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn merge_opt<T: Clone>(a: &mut Option<Vec<T>>, b: &Option<Vec<T>>, n: usize, m: usize, fill: T) {
    match (a.as_mut(), b) {
        (Some(x), Some(y)) => x.extend_from_slice(y),
        (None, None) => {}
        (Some(x), None) => x.extend(std::iter::repeat_n(fill, m)),
        (None, Some(y)) => {
            let mut v = vec![fill; n];
            v.extend_from_slice(y);
            *a = Some(v);
        }
    }
}

/// Merges predictions in order.
pub fn concat_predictions(preds: &[Prediction]) -> Result<Option<Prediction>> {
    let mut it = preds.iter();
    let Some(first) = it.next() else { return Ok(None) };
    let mut out = first.clone();
    for p in it {
        out.append(p)?;
    }
    Ok(Some(out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// Rows are true classes, columns predicted classes.
    pub absolute: Vec<Vec<usize>>,
    pub err_row: Vec<usize>,
    pub err_col: Vec<usize>,
    pub relative_row: Vec<Vec<f64>>,
    pub relative_col: Vec<Vec<f64>>,
    /// Per-class true counts, predicted counts and the total.
    pub sums: Option<(Vec<usize>, Vec<usize>, usize)>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.absolute.iter().flatten().sum()
    }
}

/// Confusion matrix over rows with both truth and response present.
pub fn confusion_matrix(pred: &Prediction, sums: bool) -> Result<ConfusionMatrix> {
    let truth = pred.class_truth()?;
    let resp = pred.class_response()?;
    let k = pred.n_classes();
    let mut abs = vec![vec![0usize; k]; k];
    for (t, r) in truth.iter().zip(resp) {
        if let (Some(t), Some(r)) = (t, r) {
            abs[*t as usize][*r as usize] += 1;
        }
    }
    let err_row: Vec<usize> = (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| abs[i][j]).sum()).collect();
    let err_col: Vec<usize> = (0..k).map(|j| (0..k).filter(|&i| i != j).map(|i| abs[i][j]).sum()).collect();
    let row_tot: Vec<usize> = abs.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<usize> = (0..k).map(|j| abs.iter().map(|r| r[j]).sum()).collect();
    let rel = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let relative_row = (0..k).map(|i| (0..k).map(|j| rel(abs[i][j], row_tot[i])).collect()).collect();
    let relative_col = (0..k).map(|i| (0..k).map(|j| rel(abs[i][j], col_tot[j])).collect()).collect();
    let total = row_tot.iter().sum();
    Ok(ConfusionMatrix {
        classes: pred.classes.clone(),
        absolute: abs,
        err_row,
        err_col,
        relative_row,
        relative_col,
        sums: sums.then_some((row_tot, col_tot, total)),
    })
}

/// Binary rates derived from a 2x2 confusion matrix. Zero denominators give NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocMeasures {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub values: BTreeMap<String, f64>,
}

pub fn roc_measures(pred: &Prediction) -> Result<RocMeasures> {
    let pos = pred.positive.ok_or_else(|| Error::arg("ROC measures need a binary prediction"))?;
    let cm = confusion_matrix(pred, false)?;
    let neg = 1 - pos;
    let tp = cm.absolute[pos][pos];
    let fn_ = cm.absolute[pos][neg];
    let fp = cm.absolute[neg][pos];
    let tn = cm.absolute[neg][neg];
    let rates = binary_rates(tp as f64, fn_ as f64, fp as f64, tn as f64);
    Ok(RocMeasures { tp, fn_, fp, tn, values: rates })
}

pub(crate) fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::NAN
    } else {
        a / b
    }
}

pub(crate) fn binary_rates(tp: f64, fn_: f64, fp: f64, tn: f64) -> BTreeMap<String, f64> {
    let tpr = ratio(tp, tp + fn_);
    let fnr = ratio(fn_, tp + fn_);
    let fpr = ratio(fp, fp + tn);
    let tnr = ratio(tn, fp + tn);
    let lrp = ratio(tpr, fpr);
    let lrm = ratio(fnr, tnr);
    let mut m = BTreeMap::new();
    m.insert("tpr".into(), tpr);
    m.insert("fnr".into(), fnr);
    m.insert("fpr".into(), fpr);
    m.insert("tnr".into(), tnr);
    m.insert("ppv".into(), ratio(tp, tp + fp));
    m.insert("for".into(), ratio(fn_, fn_ + tn));
    m.insert("fdr".into(), ratio(fp, tp + fp));
    m.insert("npv".into(), ratio(tn, tn + fn_));
    m.insert("lrp".into(), lrp);
    m.insert("lrm".into(), lrm);
    m.insert("acc".into(), ratio(tp + tn, tp + fn_ + fp + tn));
    m.insert("dor".into(), ratio(lrp, lrm));
    m
}

impl std::fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::from("true\\predicted");
        for c in &self.classes {
            let _ = write!(s, " {c}");
        }
        s.push_str(" -err.-");
        writeln!(f, "{s}")?;
        for (i, c) in self.classes.iter().enumerate() {
            let cells: Vec<String> = self.absolute[i].iter().map(|x| x.to_string()).collect();
            writeln!(f, "{c} {} {}", cells.join(" "), self.err_row[i])?;
        }
        let errs: Vec<String> = self.err_col.iter().map(|x| x.to_string()).collect();
        write!(f, "-err.- {} {}", errs.join(" "), self.err_row.iter().sum::<usize>())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn binary_pred(truth: &[u32], prob_pos: &[f64]) -> Prediction {
        let prob: Vec<Vec<f64>> = prob_pos.iter().map(|p| vec![*p, 1.0 - p]).collect();
        let resp = prob.iter().map(|r| apply_threshold(r, &[0.5, 0.5], Some(0))).collect();
        Prediction {
            kind: TaskKind::Classif,
            predict_type: PredictType::Prob,
            classes: vec!["M".into(), "R".into()],
            positive: Some(0),
            id: None,
            truth: Truth::Class(truth.iter().map(|t| Some(*t)).collect()),
            response: Response::Class(resp),
            prob: Some(prob),
            se: None,
            iter: None,
            set: None,
            threshold: Some(vec![0.5, 0.5]),
            predict_time: Some(0.0),
        }
    }

    #[test]
    fn binary_threshold_at_point_nine() {
        let p = binary_pred(&[0, 0], &[0.925, 0.5]);
        let q = p.set_threshold_binary(0.9).unwrap();
        assert_eq!(q.class_response().unwrap(), &[Some(0), Some(1)]);
        let t = q.threshold.as_ref().unwrap();
        assert_eq!(t[0], 0.9);
        assert!((t[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn division_rule_example() {
        assert_eq!(apply_threshold(&[0.4, 0.35, 0.25], &[0.01, 50.0, 1.0], None), Some(0));
        assert_eq!(apply_threshold(&[0.2, 0.4, 0.4], &[1.0, 1.0, 1.0], None), Some(1));
    }

    #[test]
    fn exact_threshold_predicts_positive() {
        let p = binary_pred(&[0], &[0.3]);
        let q = p.set_threshold_binary(0.3).unwrap();
        assert_eq!(q.class_response().unwrap(), &[Some(0)]);
        let q = p.set_threshold_binary(1.0).unwrap();
        assert_eq!(q.class_response().unwrap(), &[Some(1)]);
        let q = p.set_threshold_binary(0.0).unwrap();
        assert_eq!(q.class_response().unwrap(), &[Some(0)]);
    }

    #[test]
    fn bad_thresholds() {
        let p = binary_pred(&[0], &[0.3]);
        assert!(p.set_threshold(&[0.0, 1.0]).is_err());
        assert!(p.set_threshold(&[0.5]).is_err());
    }

    #[test]
    fn confusion_counts() {
        let mut p = binary_pred(&[0, 1, 1], &[0.9, 0.8, 0.1]);
        p.threshold = None;
        let cm = confusion_matrix(&p, true).unwrap();
        assert_eq!(cm.absolute, vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(cm.err_row, vec![0, 1]);
        assert_eq!(cm.err_col, vec![1, 0]);
        assert_eq!(cm.relative_row[1], vec![0.5, 0.5]);
        assert_eq!(cm.sums.unwrap().2, 3);
    }

    #[test]
    fn rates_from_counts() {
        let r = binary_rates(70.0, 30.0, 25.0, 75.0);
        assert!((r["tpr"] - 0.7).abs() < 1e-12);
        assert!((r["fpr"] - 0.25).abs() < 1e-12);
        assert!((r["acc"] - 0.725).abs() < 1e-12);
        let perfect = binary_rates(5.0, 0.0, 0.0, 5.0);
        assert_eq!(perfect["tpr"], 1.0);
        assert!(perfect["lrp"].is_nan());
    }

    #[test]
    fn csv_header_names() {
        let mut p = binary_pred(&[0, 1], &[0.9, 0.2]);
        p.id = Some(vec![0, 4]);
        let p = p.tag(0, SetKind::Test);
        let csv = p.to_csv();
        let first = csv.lines().next().unwrap();
        assert_eq!(first, "id,truth,prob.M,prob.R,response,iter,set");
        assert!(csv.lines().nth(2).unwrap().starts_with("5,R,"));
    }
}
