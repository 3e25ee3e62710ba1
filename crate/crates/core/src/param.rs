//! Parameter spaces: typed parameters with bounds, transformations and
//! dependencies, plus grid and random designs over them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::linspace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    NumVec(Vec<f64>),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(i) => Some(*i),
            ParamValue::Num(x) if x.fract() == 0.0 && x.is_finite() => Some(*x as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_vec(&self) -> Option<Vec<f64>> {
        match self {
            ParamValue::NumVec(v) => Some(v.clone()),
            ParamValue::Int(_) | ParamValue::Num(_) => self.as_f64().map(|x| vec![x]),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{}", if *b { "TRUE" } else { "FALSE" }),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Num(x) => write!(f, "{}", fmt_g(*x)),
            ParamValue::Str(s) => f.write_str(s),
            ParamValue::NumVec(v) => {
                let parts: Vec<String> = v.iter().map(|x| fmt_g(*x)).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// Shortest round-tripping representation.
pub fn fmt_g(x: f64) -> String {
    crate::data::fmt_num(x)
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}
impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}
impl From<i32> for ParamValue {
    fn from(v: i32) -> Self {
        ParamValue::Int(v as i64)
    }
}
impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::Int(v as i64)
    }
}
impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Num(v)
    }
}
impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}
impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Str(v)
    }
}
impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::NumVec(v)
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;

/// Builds a [`ParamMap`] from `(id, value)` pairs.
pub fn param_map<I, K, V>(items: I) -> ParamMap
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<ParamValue>,
{
    items.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

#[derive(Clone)]
pub enum Trafo {
    Pow10,
    Pow2,
    Exp,
    Custom(String, Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Trafo {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Trafo::Pow10 => 10f64.powf(x),
            Trafo::Pow2 => 2f64.powf(x),
            Trafo::Exp => x.exp(),
            Trafo::Custom(_, f) => f(x),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Trafo::Pow10 => "10^x",
            Trafo::Pow2 => "2^x",
            Trafo::Exp => "exp",
            Trafo::Custom(n, _) => n,
        }
    }
}

impl fmt::Debug for Trafo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Trafo({})", self.name())
    }
}

impl PartialEq for Trafo {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl Serialize for Trafo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Trafo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "10^x" | "pow10" => Ok(Trafo::Pow10),
            "2^x" | "pow2" => Ok(Trafo::Pow2),
            "exp" => Ok(Trafo::Exp),
            other => Err(serde::de::Error::custom(format!("unknown trafo '{other}'"))),
        }
    }
}

/// Condition on other parameter values deciding whether a parameter is active.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Requirement {
    Eq(String, ParamValue),
    In(String, Vec<ParamValue>),
    And(Vec<Requirement>),
    Or(Vec<Requirement>),
    Not(Box<Requirement>),
    #[serde(skip)]
    Custom(Vec<String>, Arc<dyn Fn(&ParamMap) -> bool + Send + Sync>),
}

impl Requirement {
    pub fn eq(id: &str, v: impl Into<ParamValue>) -> Self {
        Requirement::Eq(id.to_string(), v.into())
    }

    pub fn is_in(id: &str, vs: Vec<ParamValue>) -> Self {
        Requirement::In(id.to_string(), vs)
    }

    pub fn holds(&self, vals: &ParamMap) -> bool {
        match self {
            Requirement::Eq(id, v) => vals.get(id).is_some_and(|x| values_equal(x, v)),
            Requirement::In(id, vs) => vals.get(id).is_some_and(|x| vs.iter().any(|v| values_equal(x, v))),
            Requirement::And(rs) => rs.iter().all(|r| r.holds(vals)),
            Requirement::Or(rs) => rs.iter().any(|r| r.holds(vals)),
            Requirement::Not(r) => !r.holds(vals),
            Requirement::Custom(_, f) => f(vals),
        }
    }

    pub fn references(&self) -> Vec<String> {
        match self {
            Requirement::Eq(id, _) | Requirement::In(id, _) => vec![id.clone()],
            Requirement::And(rs) | Requirement::Or(rs) => rs.iter().flat_map(|r| r.references()).collect(),
            Requirement::Not(r) => r.references(),
            Requirement::Custom(ids, _) => ids.clone(),
        }
    }

    /// Same condition with every referenced id passed through `f`.
    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Requirement {
        match self {
            Requirement::Eq(id, v) => Requirement::Eq(f(id), v.clone()),
            Requirement::In(id, vs) => Requirement::In(f(id), vs.clone()),
            Requirement::And(rs) => Requirement::And(rs.iter().map(|r| r.rename(f)).collect()),
            Requirement::Or(rs) => Requirement::Or(rs.iter().map(|r| r.rename(f)).collect()),
            Requirement::Not(r) => Requirement::Not(Box::new(r.rename(f))),
            Requirement::Custom(ids, g) => {
                let old: Vec<String> = ids.clone();
                let new: Vec<String> = ids.iter().map(|i| f(i)).collect();
                let g = g.clone();
                let pairs: Vec<(String, String)> = old.into_iter().zip(new.iter().cloned()).collect();
                Requirement::Custom(
                    new,
                    Arc::new(move |vals: &ParamMap| {
                        let mut inner = ParamMap::new();
                        for (o, n) in &pairs {
                            if let Some(v) = vals.get(n) {
                                inner.insert(o.clone(), v.clone());
                            }
                        }
                        g(&inner)
                    }),
                )
            }
        }
    }
}

impl fmt::Debug for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Eq(id, v) => write!(f, "{id} == {v}"),
            Requirement::In(id, vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                write!(f, "{id} in {{{}}}", parts.join(","))
            }
            Requirement::And(rs) => write!(f, "And({rs:?})"),
            Requirement::Or(rs) => write!(f, "Or({rs:?})"),
            Requirement::Not(r) => write!(f, "Not({r:?})"),
            Requirement::Custom(ids, _) => write!(f, "Custom({ids:?})"),
        }
    }
}

fn values_equal(a: &ParamValue, b: &ParamValue) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Numeric {
        lower: f64,
        upper: f64,
    },
    Integer {
        lower: i64,
        upper: i64,
    },
    NumericVector {
        #[serde(default)]
        len: Option<usize>,
        lower: f64,
        upper: f64,
    },
    Discrete {
        values: Vec<ParamValue>,
    },
    Logical,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Param {
    pub id: String,
    #[serde(flatten)]
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trafo: Option<Trafo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires: Option<Requirement>,
}

impl Param {
    fn build(id: &str, kind: ParamKind) -> Param {
        Param { id: id.to_string(), kind, default: None, trafo: None, requires: None }
    }

    pub fn numeric(id: &str, lower: f64, upper: f64) -> Param {
        Param::build(id, ParamKind::Numeric { lower, upper })
    }

    pub fn integer(id: &str, lower: i64, upper: i64) -> Param {
        Param::build(id, ParamKind::Integer { lower, upper })
    }

    pub fn numeric_vector(id: &str, len: Option<usize>, lower: f64, upper: f64) -> Param {
        Param::build(id, ParamKind::NumericVector { len, lower, upper })
    }

    pub fn discrete<V: Into<ParamValue>>(id: &str, values: Vec<V>) -> Param {
        Param::build(id, ParamKind::Discrete { values: values.into_iter().map(Into::into).collect() })
    }

    pub fn logical(id: &str) -> Param {
        Param::build(id, ParamKind::Logical)
    }

    pub fn with_default(mut self, v: impl Into<ParamValue>) -> Param {
        self.default = Some(v.into());
        self
    }

    pub fn with_trafo(mut self, t: Trafo) -> Param {
        self.trafo = Some(t);
        self
    }

    pub fn with_requires(mut self, r: Requirement) -> Param {
        self.requires = Some(r);
        self
    }

    pub fn renamed(&self, id: String) -> Param {
        Param { id, ..self.clone() }
    }

    fn dims(&self) -> usize {
        match &self.kind {
            ParamKind::NumericVector { len, .. } => len.unwrap_or(1),
            _ => 1,
        }
    }

    /// Checks `v` against the kind and bounds (on the untransformed scale),
    /// returning the normalized value.
    pub fn check(&self, v: &ParamValue) -> Result<ParamValue> {
        let bad = |what: String| Error::param(format!("parameter '{}': {what}", self.id));
        match &self.kind {
            ParamKind::Numeric { lower, upper } => {
                let x = v.as_f64().ok_or_else(|| bad(format!("expected a number, got {v}")))?;
                if x.is_nan() || x < *lower || x > *upper {
                    return Err(bad(format!("{x} is outside [{lower}, {upper}]")));
                }
                Ok(ParamValue::Num(x))
            }
            ParamKind::Integer { lower, upper } => {
                let x = v.as_i64().ok_or_else(|| bad(format!("expected an integer, got {v}")))?;
                if x < *lower || x > *upper {
                    return Err(bad(format!("{x} is outside [{lower}, {upper}]")));
                }
                Ok(ParamValue::Int(x))
            }
            ParamKind::NumericVector { len, lower, upper } => {
                let xs = v.as_vec().ok_or_else(|| bad(format!("expected a numeric vector, got {v}")))?;
                if let Some(l) = len {
                    if xs.len() != *l {
                        return Err(bad(format!("expected length {l}, got {}", xs.len())));
                    }
                }
                if xs.iter().any(|x| x.is_nan() || x < lower || x > upper) {
                    return Err(bad(format!("entries must lie in [{lower}, {upper}]")));
                }
                Ok(ParamValue::NumVec(xs))
            }
            ParamKind::Discrete { values } => values
                .iter()
                .find(|x| values_equal(x, v))
                .cloned()
                .ok_or_else(|| bad(format!("'{v}' is not one of the allowed values"))),
            ParamKind::Logical => {
                v.as_bool().map(ParamValue::Bool).ok_or_else(|| bad(format!("expected a logical, got {v}")))
            }
        }
    }

    pub fn transform(&self, v: &ParamValue) -> ParamValue {
        let Some(t) = &self.trafo else { return v.clone() };
        match v {
            ParamValue::Int(i) => ParamValue::Num(t.apply(*i as f64)),
            ParamValue::Num(x) => ParamValue::Num(t.apply(*x)),
            ParamValue::NumVec(xs) => ParamValue::NumVec(xs.iter().map(|x| t.apply(*x)).collect()),
            other => other.clone(),
        }
    }

    fn grid_points(&self, resolution: usize) -> Result<Vec<ParamValue>> {
        match &self.kind {
            ParamKind::Numeric { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::param(format!("parameter '{}' needs finite bounds for a grid", self.id)));
                }
                Ok(linspace(*lower, *upper, resolution).into_iter().map(ParamValue::Num).collect())
            }
            ParamKind::Integer { lower, upper } => {
                let mut out: Vec<i64> = linspace(*lower as f64, *upper as f64, resolution)
                    .into_iter()
                    .map(|x| x.round() as i64)
                    .collect();
                out.dedup();
                Ok(out.into_iter().map(ParamValue::Int).collect())
            }
            ParamKind::NumericVector { lower, upper, .. } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::param(format!("parameter '{}' needs finite bounds for a grid", self.id)));
                }
                let axis = linspace(*lower, *upper, resolution);
                let mut out: Vec<Vec<f64>> = vec![Vec::new()];
                for _ in 0..self.dims() {
                    out = axis
                        .iter()
                        .flat_map(|a| {
                            out.iter().map(move |prefix| {
                                let mut v = prefix.clone();
                                v.push(*a);
                                v
                            })
                        })
                        .collect();
                }
                Ok(out.into_iter().map(ParamValue::NumVec).collect())
            }
            ParamKind::Discrete { values } => Ok(values.clone()),
            ParamKind::Logical => Ok(vec![ParamValue::Bool(true), ParamValue::Bool(false)]),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParamValue> {
        let unbounded = || Error::param(format!("parameter '{}' needs finite bounds for sampling", self.id));
        Ok(match &self.kind {
            ParamKind::Numeric { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(unbounded());
                }
                ParamValue::Num(lower + rng.random::<f64>() * (upper - lower))
            }
            ParamKind::Integer { lower, upper } => ParamValue::Int(rng.random_range(*lower..=*upper)),
            ParamKind::NumericVector { lower, upper, .. } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(unbounded());
                }
                ParamValue::NumVec((0..self.dims()).map(|_| lower + rng.random::<f64>() * (upper - lower)).collect())
            }
            ParamKind::Discrete { values } => values[rng.random_range(0..values.len())].clone(),
            ParamKind::Logical => ParamValue::Bool(rng.random::<bool>()),
        })
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new(params: Vec<Param>) -> Result<ParamSet> {
        let set = ParamSet { params };
        set.validate()?;
        Ok(set)
    }

    pub fn empty() -> ParamSet {
        ParamSet::default()
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for p in &self.params {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::duplicate("parameter", &p.id));
            }
            match &p.kind {
                ParamKind::Numeric { lower, upper } | ParamKind::NumericVector { lower, upper, .. } => {
                    if lower > upper || lower.is_nan() || upper.is_nan() {
                        return Err(Error::param(format!("parameter '{}' has lower > upper", p.id)));
                    }
                }
                ParamKind::Integer { lower, upper } => {
                    if lower > upper {
                        return Err(Error::param(format!("parameter '{}' has lower > upper", p.id)));
                    }
                }
                ParamKind::Discrete { values } => {
                    if values.is_empty() {
                        return Err(Error::param(format!("discrete parameter '{}' has no values", p.id)));
                    }
                }
                ParamKind::Logical => {}
            }
            if let Some(d) = &p.default {
                p.check(d)?;
            }
        }
        for p in &self.params {
            if let Some(r) = &p.requires {
                for id in r.references() {
                    if !seen.contains(id.as_str()) {
                        return Err(Error::param(format!(
                            "parameter '{}' depends on unknown parameter '{id}'",
                            p.id
                        )));
                    }
                }
            }
        }
        self.topo_order().map(|_| ())
    }

    /// Order in which every parameter comes after the ones it depends on.
    fn topo_order(&self) -> Result<Vec<usize>> {
        let n = self.params.len();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let before = order.len();
            for (i, p) in self.params.iter().enumerate() {
                if done[i] {
                    continue;
                }
                let ready = p.requires.as_ref().map_or(true, |r| {
                    r.references().iter().all(|id| self.index(id).is_some_and(|j| done[j]))
                });
                if ready {
                    done[i] = true;
                    order.push(i);
                }
            }
            if order.len() == before {
                return Err(Error::param("parameter dependencies form a cycle"));
            }
        }
        Ok(order)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.params.iter().map(|p| p.id.clone()).collect()
    }

    fn index(&self, id: &str) -> Option<usize> {
        self.params.iter().position(|p| p.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn add(&mut self, p: Param) -> Result<()> {
        self.params.push(p);
        if let Err(e) = self.validate() {
            self.params.pop();
            return Err(e);
        }
        Ok(())
    }

    /// Disjoint union. Ids must not clash.
    pub fn union(&self, other: &ParamSet) -> Result<ParamSet> {
        let mut params = self.params.clone();
        params.extend(other.params.iter().cloned());
        ParamSet::new(params)
    }

    pub fn defaults(&self) -> ParamMap {
        self.params
            .iter()
            .filter_map(|p| p.default.clone().map(|d| (p.id.clone(), d)))
            .collect()
    }

    pub fn is_active(&self, id: &str, vals: &ParamMap) -> bool {
        match self.get(id).and_then(|p| p.requires.as_ref()) {
            Some(r) => r.holds(vals),
            None => true,
        }
    }

    /// Validates kinds and bounds of the given values; unknown ids are
    /// returned for the caller to handle.
    pub fn check_values(&self, vals: &ParamMap) -> Result<(ParamMap, Vec<String>)> {
        let mut out = ParamMap::new();
        let mut unknown = Vec::new();
        for (k, v) in vals {
            match self.get(k) {
                Some(p) => {
                    out.insert(k.clone(), p.check(v)?);
                }
                None => {
                    unknown.push(k.clone());
                    out.insert(k.clone(), v.clone());
                }
            }
        }
        Ok((out, unknown))
    }

    /// Applies each parameter's transformation.
    pub fn trafo(&self, vals: &ParamMap) -> ParamMap {
        vals.iter()
            .map(|(k, v)| match self.get(k) {
                Some(p) => (k.clone(), p.transform(v)),
                None => (k.clone(), v.clone()),
            })
            .collect()
    }

    /// Removes parameters whose requirement does not hold.
    pub fn drop_inactive(&self, vals: &ParamMap) -> ParamMap {
        let mut out = vals.clone();
        for i in self.topo_order().unwrap_or_default() {
            let p = &self.params[i];
            if let Some(r) = &p.requires {
                if !r.holds(&out) {
                    out.remove(&p.id);
                }
            }
        }
        out
    }

    /// Cross product of per-parameter grids (first parameter varies fastest),
    /// filtered to dependency-valid points with inactive values removed and
    /// duplicates dropped.
    pub fn grid_design(&self, resolution: usize) -> Result<Vec<ParamMap>> {
        self.grid_design_with(&BTreeMap::new(), resolution)
    }

    /// Like [`ParamSet::grid_design`] with per-parameter resolution overrides.
    pub fn grid_design_with(&self, per_param: &BTreeMap<String, usize>, resolution: usize) -> Result<Vec<ParamMap>> {
        if resolution == 0 {
            return Err(Error::param("grid resolution must be at least 1"));
        }
        let axes: Vec<Vec<ParamValue>> = self
            .params
            .iter()
            .map(|p| p.grid_points(*per_param.get(&p.id).unwrap_or(&resolution)))
            .collect::<Result<_>>()?;
        let total: usize = axes.iter().map(|a| a.len()).product();
        let mut out: Vec<ParamMap> = Vec::new();
        let mut seen: Vec<ParamMap> = Vec::new();
        for mut flat in 0..total {
            let mut point = ParamMap::new();
            for (p, axis) in self.params.iter().zip(&axes) {
                point.insert(p.id.clone(), axis[flat % axis.len()].clone());
                flat /= axis.len();
            }
            let point = self.drop_inactive(&point);
            if !seen.contains(&point) {
                seen.push(point.clone());
                out.push(point);
            }
        }
        Ok(out)
    }

    /// `n` independent draws; dependent parameters are drawn only when active.
    pub fn random_design<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<ParamMap>> {
        let order = self.topo_order()?;
        (0..n)
            .map(|_| {
                let mut point = ParamMap::new();
                for &i in &order {
                    let p = &self.params[i];
                    if p.requires.as_ref().map_or(true, |r| r.holds(&point)) {
                        point.insert(p.id.clone(), p.sample(rng)?);
                    }
                }
                Ok(point)
            })
            .collect()
    }
}

/// Renders a configuration as `a=1; b=x`.
pub fn format_config(vals: &ParamMap, order: &[String]) -> String {
    let mut parts = Vec::new();
    for id in order {
        if let Some(v) = vals.get(id) {
            parts.push(format!("{id}={v}"));
        }
    }
    for (k, v) in vals {
        if !order.contains(k) {
            parts.push(format!("{k}={v}"));
        }
    }
    parts.join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn svm_like() -> ParamSet {
        ParamSet::new(vec![
            Param::discrete("kernel", vec!["lin", "rbf"]),
            Param::numeric("sigma", -2.0, 2.0)
                .with_trafo(Trafo::Pow2)
                .with_requires(Requirement::eq("kernel", "rbf")),
            Param::numeric("C", -1.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn discrete_cross_product() {
        let ps = ParamSet::new(vec![
            Param::discrete("C", vec![0.5, 1.0, 1.5, 2.0]),
            Param::discrete("sigma", vec![0.5, 1.0, 1.5, 2.0]),
        ])
        .unwrap();
        let g = ps.grid_design(10).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g[1]["C"], ParamValue::Num(1.0));
        assert_eq!(g[1]["sigma"], ParamValue::Num(0.5));
    }

    #[test]
    fn trafo_grid_matches_powers_of_ten() {
        let ps = ParamSet::new(vec![Param::numeric("C", -10.0, 10.0).with_trafo(Trafo::Pow10)]).unwrap();
        let g = ps.grid_design(15).unwrap();
        let expected = linspace(-10.0, 10.0, 15);
        for (pt, e) in g.iter().zip(&expected) {
            let t = ps.trafo(pt)["C"].as_f64().unwrap();
            assert!((t - 10f64.powf(*e)).abs() <= 1e-9 * 10f64.powf(*e));
        }
    }

    #[test]
    fn inactive_params_removed_from_grid() {
        let g = svm_like().grid_design(3).unwrap();
        // lin: 3 values of C, rbf: 3 x 3
        assert_eq!(g.len(), 12);
        for pt in &g {
            let rbf = pt["kernel"] == ParamValue::from("rbf");
            assert_eq!(pt.contains_key("sigma"), rbf);
        }
    }

    #[test]
    fn integer_grid_dedups() {
        let ps = ParamSet::new(vec![Param::integer("k", 1, 3)]).unwrap();
        assert_eq!(ps.grid_design(10).unwrap().len(), 3);
    }

    #[test]
    fn unbounded_grid_fails() {
        let ps = ParamSet::new(vec![Param::numeric("x", 0.0, f64::INFINITY)]).unwrap();
        assert!(ps.grid_design(3).is_err());
    }

    #[test]
    fn random_design_respects_bounds_and_requires() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let ps = svm_like();
        assert!(ps.random_design(0, &mut rng).unwrap().is_empty());
        for pt in ps.random_design(200, &mut rng).unwrap() {
            let c = pt["C"].as_f64().unwrap();
            assert!((-1.0..=1.0).contains(&c));
            assert_eq!(pt.contains_key("sigma"), pt["kernel"] == ParamValue::from("rbf"));
        }
    }

    #[test]
    fn set_validation() {
        assert!(ParamSet::new(vec![Param::numeric("a", 1.0, 0.0)]).is_err());
        assert!(ParamSet::new(vec![Param::numeric("a", 0.0, 1.0), Param::logical("a")]).is_err());
        assert!(ParamSet::new(vec![Param::logical("a").with_requires(Requirement::eq("b", true))]).is_err());
        let cyc = ParamSet::new(vec![
            Param::logical("a").with_requires(Requirement::eq("b", true)),
            Param::logical("b").with_requires(Requirement::eq("a", true)),
        ]);
        assert!(cyc.is_err());
        assert!(ParamSet::new(vec![Param::discrete::<&str>("d", vec![])]).is_err());
    }

    #[test]
    fn value_checks() {
        let k = Param::integer("k", 1, 100);
        assert!(k.check(&ParamValue::Int(0)).is_err());
        assert_eq!(k.check(&ParamValue::Num(4.0)).unwrap(), ParamValue::Int(4));
        assert!(k.check(&ParamValue::Num(4.5)).is_err());
        let v = Param::numeric_vector("w", Some(2), 0.0, 10.0);
        assert!(v.check(&ParamValue::NumVec(vec![1.0])).is_err());
        assert!(v.check(&ParamValue::NumVec(vec![1.0, 2.0])).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let ps = ParamSet::new(vec![
            Param::discrete("kernel", vec!["lin", "rbf"]),
            Param::numeric("sigma", -2.0, 2.0)
                .with_trafo(Trafo::Pow2)
                .with_requires(Requirement::eq("kernel", "rbf")),
            Param::integer("k", 1, 5).with_default(2),
        ])
        .unwrap();
        let s = serde_json::to_string(&ps).unwrap();
        let back: ParamSet = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
