//! Classification and regression trees (Gini / squared error).

use std::any::Any;
use std::collections::BTreeMap;

use crate::data::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Model, PredictType, RawPrediction, TrainInput};
use crate::task::TaskKind;
use crate::util::argmax;

use super::{class_target, regr_target, weights_or_ones};

pub struct Cart;

#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule {
    /// Left iff value < threshold.
    Numeric(f64),
    /// Left iff `left[code]`.
    Categorical(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { value: Vec<f64>, weight: f64, depth: usize },
    Split { feature: usize, rule: SplitRule, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct CartModel {
    pub features: Vec<String>,
    pub nodes: Vec<Node>,
    pub importance: BTreeMap<String, f64>,
    pub regression: bool,
    /// Total weighted impurity of the root node.
    pub root_risk: f64,
}

enum Feat {
    Num(Vec<f64>),
    Cat(Vec<u32>, usize),
}

fn features_of(data: &Dataset) -> Result<Vec<Feat>> {
    data.columns()
        .iter()
        .map(|c| match c.data() {
            ColumnData::Numeric(v) => {
                if v.iter().any(|x| x.is_nan()) {
                    return Err(Error::unsupported("cart", "missing values"));
                }
                Ok(Feat::Num(v.clone()))
            }
            _ => {
                let codes = c.category_codes().unwrap();
                let n = c.category_levels().unwrap().len();
                let codes = codes
                    .into_iter()
                    .map(|x| x.ok_or_else(|| Error::unsupported("cart", "missing values")))
                    .collect::<Result<_>>()?;
                Ok(Feat::Cat(codes, n))
            }
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Limits {
    minsplit: f64,
    minbucket: f64,
    maxdepth: usize,
    cp: f64,
}

/// Sufficient statistics of a set of rows.
#[derive(Clone, Debug)]
enum Stats {
    Class(Vec<f64>),
    /// sum w, sum w*y, sum w*y^2
    Regr(f64, f64, f64),
}

impl Stats {
    fn empty_like(&self) -> Stats {
        match self {
            Stats::Class(v) => Stats::Class(vec![0.0; v.len()]),
            Stats::Regr(..) => Stats::Regr(0.0, 0.0, 0.0),
        }
    }

    fn add(&mut self, y: Target, w: f64) {
        match (self, y) {
            (Stats::Class(v), Target::Class(c)) => v[c] += w,
            (Stats::Regr(a, b, c), Target::Regr(y)) => {
                *a += w;
                *b += w * y;
                *c += w * y * y;
            }
            _ => unreachable!(),
        }
    }

    fn merge(&mut self, o: &Stats) {
        match (self, o) {
            (Stats::Class(a), Stats::Class(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Stats::Regr(a, b, c), Stats::Regr(d, e, f)) => {
                *a += d;
                *b += e;
                *c += f;
            }
            _ => unreachable!(),
        }
    }

    fn sub(&self, o: &Stats) -> Stats {
        match (self, o) {
            (Stats::Class(a), Stats::Class(b)) => Stats::Class(a.iter().zip(b).map(|(x, y)| x - y).collect()),
            (Stats::Regr(a, b, c), Stats::Regr(d, e, f)) => Stats::Regr(a - d, b - e, c - f),
            _ => unreachable!(),
        }
    }

    fn weight(&self) -> f64 {
        match self {
            Stats::Class(v) => v.iter().sum(),
            Stats::Regr(a, ..) => *a,
        }
    }

    /// Weighted impurity: W * gini, or the weighted sum of squared errors.
    fn risk(&self) -> f64 {
        match self {
            Stats::Class(v) => {
                let w: f64 = v.iter().sum();
                if w <= 0.0 {
                    return 0.0;
                }
                w - v.iter().map(|x| x * x).sum::<f64>() / w
            }
            Stats::Regr(a, b, c) => {
                if *a <= 0.0 {
                    0.0
                } else {
                    (c - b * b / a).max(0.0)
                }
            }
        }
    }

    fn value(&self) -> Vec<f64> {
        match self {
            Stats::Class(v) => {
                let w: f64 = v.iter().sum();
                if w > 0.0 {
                    v.iter().map(|x| x / w).collect()
                } else {
                    vec![1.0 / v.len() as f64; v.len()]
                }
            }
            Stats::Regr(a, b, _) => vec![if *a > 0.0 { b / a } else { 0.0 }],
        }
    }
}

#[derive(Clone, Copy)]
enum Target {
    Class(usize),
    Regr(f64),
}

struct Builder<'a> {
    feats: &'a [Feat],
    y: Vec<Target>,
    w: Vec<f64>,
    limits: Limits,
    root_risk: f64,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    template: Stats,
}

struct Candidate {
    feature: usize,
    rule: SplitRule,
    decrease: f64,
}

impl Builder<'_> {
    fn stats(&self, rows: &[usize]) -> Stats {
        let mut s = self.template.empty_like();
        for &i in rows {
            s.add(self.y[i], self.w[i]);
        }
        s
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let stats = self.stats(&rows);
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { value: stats.value(), weight: stats.weight(), depth });
        let risk = stats.risk();
        if depth >= self.limits.maxdepth || stats.weight() < self.limits.minsplit || risk <= 1e-12 * self.root_risk.max(1e-300) {
            return idx;
        }
        let Some(best) = self.best_split(&rows, &stats) else { return idx };
        if best.decrease / self.root_risk < self.limits.cp || best.decrease <= 0.0 {
            return idx;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.goes_left(best.feature, &best.rule, i));
        self.importance[best.feature] += best.decrease;
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[idx] = Node::Split { feature: best.feature, rule: best.rule, left, right };
        idx
    }

    fn goes_left(&self, f: usize, rule: &SplitRule, i: usize) -> bool {
        match (&self.feats[f], rule) {
            (Feat::Num(x), SplitRule::Numeric(t)) => x[i] < *t,
            (Feat::Cat(c, _), SplitRule::Categorical(left)) => left[c[i] as usize],
            _ => unreachable!(),
        }
    }

    fn best_split(&self, rows: &[usize], total: &Stats) -> Option<Candidate> {
        let parent = total.risk();
        let mut best: Option<Candidate> = None;
        let mb = self.limits.minbucket;
        let mut consider = |c: Candidate| {
            if best.as_ref().is_none_or(|b| c.decrease > b.decrease + 1e-12 * parent.abs()) {
                best = Some(c);
            }
        };
        for (f, feat) in self.feats.iter().enumerate() {
            match feat {
                Feat::Num(x) => {
                    let mut order: Vec<usize> = rows.to_vec();
                    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
                    let mut left = total.empty_like();
                    for j in 0..order.len() - 1 {
                        let i = order[j];
                        left.add(self.y[i], self.w[i]);
                        let (a, b) = (x[i], x[order[j + 1]]);
                        if a == b {
                            continue;
                        }
                        let right = total.sub(&left);
                        if left.weight() < mb || right.weight() < mb {
                            continue;
                        }
                        let dec = parent - left.risk() - right.risk();
                        let mut thr = a + (b - a) / 2.0;
                        if thr <= a {
                            thr = b;
                        }
                        consider(Candidate { feature: f, rule: SplitRule::Numeric(thr), decrease: dec });
                    }
                }
                Feat::Cat(codes, n_levels) => {
                    let mut per: Vec<Stats> = vec![total.empty_like(); *n_levels];
                    for &i in rows {
                        per[codes[i] as usize].add(self.y[i], self.w[i]);
                    }
                    let present: Vec<usize> = (0..*n_levels).filter(|&l| per[l].weight() > 0.0).collect();
                    if present.len() < 2 {
                        continue;
                    }
                    let keys: Vec<Box<dyn Fn(&Stats) -> f64>> = match total {
                        Stats::Regr(..) => vec![Box::new(|s: &Stats| s.value()[0])],
                        Stats::Class(v) if v.len() == 2 => vec![Box::new(|s: &Stats| s.value()[1])],
                        Stats::Class(v) => (0..v.len())
                            .map(|c| Box::new(move |s: &Stats| s.value()[c]) as Box<dyn Fn(&Stats) -> f64>)
                            .collect(),
                    };
                    for key in keys {
                        let mut order = present.clone();
                        order.sort_by(|&a, &b| key(&per[a]).total_cmp(&key(&per[b])).then(a.cmp(&b)));
                        let mut left = total.empty_like();
                        for j in 0..order.len() - 1 {
                            left.merge(&per[order[j]]);
                            let right = total.sub(&left);
                            if left.weight() < mb || right.weight() < mb {
                                continue;
                            }
                            let dec = parent - left.risk() - right.risk();
                            let mut mask = vec![false; *n_levels];
                            for &l in &order[..=j] {
                                mask[l] = true;
                            }
                            // levels absent from this node follow the heavier child
                            let absent_left = left.weight() >= right.weight();
                            for l in 0..*n_levels {
                                if per[l].weight() <= 0.0 {
                                    mask[l] = absent_left;
                                }
                            }
                            consider(Candidate { feature: f, rule: SplitRule::Categorical(mask), decrease: dec });
                        }
                    }
                }
            }
        }
        best
    }
}

impl Algorithm for Cart {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let data = task.features()?;
        let feats = features_of(&data)?;
        let n = task.size();
        let w = weights_or_ones(input.weights, n);
        let (y, template, regression) = match task.kind() {
            TaskKind::Classif => {
                let (y, k) = class_target(task)?;
                (y.into_iter().map(Target::Class).collect::<Vec<_>>(), Stats::Class(vec![0.0; k]), false)
            }
            _ => (regr_target(task)?.into_iter().map(Target::Regr).collect(), Stats::Regr(0.0, 0.0, 0.0), true),
        };
        let limits = Limits {
            minsplit: input.usize("minsplit")? as f64,
            minbucket: input.usize("minbucket")? as f64,
            maxdepth: input.usize("maxdepth")?,
            cp: input.f64("cp")?,
        };
        let mut b = Builder {
            feats: &feats,
            y,
            w,
            limits,
            root_risk: 0.0,
            nodes: Vec::new(),
            importance: vec![0.0; feats.len()],
            template,
        };
        let rows: Vec<usize> = (0..n).filter(|&i| b.w[i] > 0.0).collect();
        b.root_risk = b.stats(&rows).risk();
        b.build(rows, 0);
        let names = data.names();
        let importance = names.iter().cloned().zip(b.importance.iter().copied()).collect();
        Ok(Box::new(CartModel { features: names, nodes: b.nodes, importance, regression, root_risk: b.root_risk }))
    }
}

impl CartModel {
    pub fn depth(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { depth, .. } => Some(*depth),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn leaf_weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { weight, .. } => Some(*weight),
                _ => None,
            })
            .collect()
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

impl Model for CartModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, _ctx: &Ctx) -> Result<RawPrediction> {
        let feats = features_of(data)?;
        let leaf = |i: usize| -> &Vec<f64> {
            let mut cur = 0;
            loop {
                match &self.nodes[cur] {
                    Node::Leaf { value, .. } => return value,
                    Node::Split { feature, rule, left, right } => {
                        let go_left = match (&feats[*feature], rule) {
                            (Feat::Num(x), SplitRule::Numeric(t)) => x[i] < *t,
                            (Feat::Cat(c, _), SplitRule::Categorical(m)) => m.get(c[i] as usize).copied().unwrap_or(false),
                            _ => false,
                        };
                        cur = if go_left { *left } else { *right };
                    }
                }
            }
        };
        let n = data.n_rows();
        if self.regression {
            Ok(RawPrediction::Regr { response: (0..n).map(|i| leaf(i)[0]).collect(), se: None })
        } else {
            let prob: Vec<Vec<f64>> = (0..n).map(|i| leaf(i).clone()).collect();
            let response = prob.iter().map(|p| argmax(p).map(|c| c as u32)).collect();
            Ok(RawPrediction::Classif { response, prob: Some(prob) })
        }
    }

    fn feature_importance(&self) -> Option<BTreeMap<String, f64>> {
        Some(self.importance.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
