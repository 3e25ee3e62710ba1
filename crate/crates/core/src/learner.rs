//! Learner descriptors, the algorithm/model traits and the learner registry.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::param::{ParamMap, ParamSet, ParamValue};
use crate::task::{Task, TaskKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "numerics")]
    Numerics,
    #[serde(rename = "factors")]
    Factors,
    #[serde(rename = "ordered")]
    Ordered,
    #[serde(rename = "missings")]
    Missings,
    #[serde(rename = "weights")]
    Weights,
    #[serde(rename = "class.weights")]
    ClassWeights,
    #[serde(rename = "prob")]
    Prob,
    #[serde(rename = "se")]
    Se,
    #[serde(rename = "twoclass")]
    TwoClass,
    #[serde(rename = "multiclass")]
    MultiClass,
    #[serde(rename = "featimp")]
    FeatImp,
}

impl Property {
    pub const ALL: [Property; 11] = [
        Property::Numerics,
        Property::Factors,
        Property::Ordered,
        Property::Missings,
        Property::Weights,
        Property::ClassWeights,
        Property::Prob,
        Property::Se,
        Property::TwoClass,
        Property::MultiClass,
        Property::FeatImp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Property::Numerics => "numerics",
            Property::Factors => "factors",
            Property::Ordered => "ordered",
            Property::Missings => "missings",
            Property::Weights => "weights",
            Property::ClassWeights => "class.weights",
            Property::Prob => "prob",
            Property::Se => "se",
            Property::TwoClass => "twoclass",
            Property::MultiClass => "multiclass",
            Property::FeatImp => "featimp",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .iter()
            .find(|p| p.as_str() == s)
            .copied()
            .ok_or_else(|| Error::unknown("learner property", s))
    }
}

pub type Properties = BTreeSet<Property>;

pub fn props(list: &[Property]) -> Properties {
    list.iter().copied().collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictType {
    #[default]
    Response,
    Prob,
    Se,
}

impl PredictType {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictType::Response => "response",
            PredictType::Prob => "prob",
            PredictType::Se => "se",
        }
    }
}

impl fmt::Display for PredictType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "response" => Ok(PredictType::Response),
            "prob" => Ok(PredictType::Prob),
            "se" => Ok(PredictType::Se),
            other => Err(Error::unknown("predict type", other)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnLearnerError {
    #[default]
    Stop,
    Warn,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnParWithoutDesc {
    #[default]
    Stop,
    Warn,
    Quiet,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub on_learner_error: OnLearnerError,
    pub on_par_without_desc: OnParWithoutDesc,
    pub show_info: bool,
}

/// Raw output of a fitted model before truth, ids and thresholds are attached.
#[derive(Clone, Debug, PartialEq)]
pub enum RawPrediction {
    /// Class codes (may be missing) and optional per-class probabilities.
    Classif { response: Vec<Option<u32>>, prob: Option<Vec<Vec<f64>>> },
    Regr { response: Vec<f64>, se: Option<Vec<f64>> },
    /// Cluster codes starting at 0 and optional memberships.
    Cluster { response: Vec<Option<u32>>, prob: Option<Vec<Vec<f64>>> },
    /// Per-row label flags and optional per-label probabilities of TRUE.
    Multilabel { response: Vec<Vec<bool>>, prob: Option<Vec<Vec<f64>>> },
}

impl RawPrediction {
    pub fn len(&self) -> usize {
        match self {
            RawPrediction::Classif { response, .. } | RawPrediction::Cluster { response, .. } => response.len(),
            RawPrediction::Regr { response, .. } => response.len(),
            RawPrediction::Multilabel { response, .. } => response.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything an algorithm sees while fitting.
pub struct TrainInput<'a> {
    pub learner: &'a Learner,
    /// Training rows only, restricted to the features the model may use.
    pub task: &'a Task,
    pub weights: Option<&'a [f64]>,
    pub ctx: &'a Ctx,
}

impl TrainInput<'_> {
    /// Hyperparameter value at this learner's own level, falling back to the
    /// parameter default.
    pub fn value(&self, id: &str) -> Option<ParamValue> {
        self.learner.own_value(id)
    }

    pub fn f64(&self, id: &str) -> Result<f64> {
        self.value(id)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::param(format!("'{}' needs a numeric value for '{id}'", self.learner.id)))
    }

    pub fn usize(&self, id: &str) -> Result<usize> {
        self.value(id)
            .and_then(|v| v.as_i64())
            .map(|i| i.max(0) as usize)
            .ok_or_else(|| Error::param(format!("'{}' needs an integer value for '{id}'", self.learner.id)))
    }

    pub fn bool(&self, id: &str) -> Result<bool> {
        self.value(id)
            .and_then(|v| v.as_bool())
            .ok_or_else(|| Error::param(format!("'{}' needs a logical value for '{id}'", self.learner.id)))
    }
}

/// A learning algorithm: turns a training task into a fitted model.
pub trait Algorithm: Send + Sync {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>>;

    /// Whether changing the predict type of a wrapper is forwarded to the
    /// wrapped learner.
    fn forwards_predict_type(&self) -> bool {
        true
    }
}

/// A fitted model.
pub trait Model: Send + Sync + fmt::Debug {
    fn predict(&self, data: &Dataset, predict_type: PredictType, ctx: &Ctx) -> Result<RawPrediction>;

    fn feature_importance(&self) -> Option<BTreeMap<String, f64>> {
        None
    }

    /// Class threshold to apply to probability predictions instead of the
    /// default one.
    fn threshold(&self) -> Option<Vec<f64>> {
        None
    }

    /// The fitted model of the wrapped learner, for wrapper models.
    fn next_model(&self) -> Option<&crate::train::WrappedModel> {
        None
    }

    fn as_any(&self) -> &dyn Any;
}

#[derive(Clone)]
pub struct Learner {
    pub(crate) id: String,
    pub(crate) class_name: String,
    pub(crate) kind: TaskKind,
    pub(crate) properties: Properties,
    pub(crate) params: ParamSet,
    pub(crate) values: ParamMap,
    pub(crate) predict_type: PredictType,
    pub(crate) config: LearnerConfig,
    pub(crate) algo: Arc<dyn Algorithm>,
    pub(crate) next: Option<Box<Learner>>,
}

impl fmt::Debug for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Learner")
            .field("id", &self.id)
            .field("class_name", &self.class_name)
            .field("kind", &self.kind)
            .field("predict_type", &self.predict_type)
            .field("hyperpars", &self.hyperpars())
            .field("next", &self.next)
            .finish()
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let props: Vec<&str> = self.properties.iter().map(|p| p.as_str()).collect();
        writeln!(f, "Learner {} from package builtin", self.id)?;
        writeln!(f, "Type: {}", self.kind)?;
        writeln!(f, "Name: {}", self.class_name)?;
        writeln!(f, "Properties: {}", props.join(","))?;
        writeln!(f, "Predict-Type: {}", self.predict_type)?;
        write!(f, "Hyperparameters: {}", crate::param::format_config(&self.hyperpars(), &self.param_set().ids()))
    }
}

impl Learner {
    /// Builds a learner directly from its parts. Most callers want
    /// [`make_learner`] or one of the wrapper constructors.
    pub fn from_parts(
        class_name: &str,
        kind: TaskKind,
        properties: Properties,
        params: ParamSet,
        algo: Arc<dyn Algorithm>,
        next: Option<Learner>,
    ) -> Result<Learner> {
        let mut l = Learner {
            id: class_name.to_string(),
            class_name: class_name.to_string(),
            kind,
            properties,
            params,
            values: ParamMap::new(),
            predict_type: PredictType::Response,
            config: LearnerConfig::default(),
            algo,
            next: None,
        };
        if let Some(n) = next {
            let clash: Vec<String> = l.params.ids().into_iter().filter(|id| n.param_set().contains(id)).collect();
            if !clash.is_empty() {
                return Err(Error::duplicate("parameter", clash.join(",")));
            }
            l.config = n.config;
            l.next = Some(Box::new(n));
        }
        Ok(l)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn properties(&self) -> &Properties {
        &self.properties
    }

    pub fn has_property(&self, p: Property) -> bool {
        self.properties.contains(&p)
    }

    pub fn predict_type(&self) -> PredictType {
        self.predict_type
    }

    pub fn config(&self) -> LearnerConfig {
        self.config
    }

    pub fn next(&self) -> Option<&Learner> {
        self.next.as_deref()
    }

    pub fn algorithm(&self) -> &Arc<dyn Algorithm> {
        &self.algo
    }

    /// The innermost learner of a wrapper chain.
    pub fn base(&self) -> &Learner {
        match &self.next {
            Some(n) => n.base(),
            None => self,
        }
    }

    /// Own parameters plus those of every wrapped learner.
    pub fn param_set(&self) -> ParamSet {
        let mut params = self.params.params().to_vec();
        if let Some(n) = &self.next {
            params.extend(n.param_set().params().iter().cloned());
        }
        ParamSet::new(params).unwrap_or_else(|_| self.params.clone())
    }

    pub fn own_param_set(&self) -> &ParamSet {
        &self.params
    }

    /// Explicitly set values across the whole chain.
    pub fn hyperpars(&self) -> ParamMap {
        let mut out = self.values.clone();
        if let Some(n) = &self.next {
            out.extend(n.hyperpars());
        }
        out
    }

    pub fn own_values(&self) -> &ParamMap {
        &self.values
    }

    pub(crate) fn own_value(&self, id: &str) -> Option<ParamValue> {
        self.values.get(id).cloned().or_else(|| self.params.get(id).and_then(|p| p.default.clone()))
    }

    fn owns(&self, id: &str) -> bool {
        self.params.contains(id)
    }

    fn chain_owner(&mut self, id: &str) -> Option<&mut Learner> {
        if self.owns(id) {
            return Some(self);
        }
        match self.next.as_deref_mut() {
            Some(n) => n.chain_owner(id),
            None => None,
        }
    }

    /// Sets hyperparameters, routing each value to the learner in the chain
    /// that declares it.
    pub fn set_hyperpars(mut self, vals: &ParamMap) -> Result<Learner> {
        for (k, v) in vals {
            let config = self.config;
            match self.chain_owner(k) {
                Some(owner) => {
                    let p = owner.params.get(k).unwrap();
                    let checked = p.check(v)?;
                    owner.values.insert(k.clone(), checked);
                }
                None => match config.on_par_without_desc {
                    OnParWithoutDesc::Stop => {
                        return Err(Error::param(format!(
                            "{}: setting parameter '{k}' without available description object",
                            self.id
                        )))
                    }
                    OnParWithoutDesc::Warn => {
                        log::warn!("{}: setting parameter '{k}' without available description object", self.id);
                        self.base_mut().values.insert(k.clone(), v.clone());
                    }
                    OnParWithoutDesc::Quiet => {
                        self.base_mut().values.insert(k.clone(), v.clone());
                    }
                },
            }
        }
        Ok(self)
    }

    fn base_mut(&mut self) -> &mut Learner {
        if self.next.is_some() {
            self.next.as_deref_mut().unwrap().base_mut()
        } else {
            self
        }
    }

    pub fn set_hyperpar(self, id: &str, v: impl Into<ParamValue>) -> Result<Learner> {
        let mut m = ParamMap::new();
        m.insert(id.to_string(), v.into());
        self.set_hyperpars(&m)
    }

    pub fn remove_hyperpars<S: AsRef<str>>(mut self, names: &[S]) -> Result<Learner> {
        for n in names {
            let n = n.as_ref();
            let mut cur: Option<&mut Learner> = Some(&mut self);
            let mut removed = false;
            while let Some(l) = cur {
                if l.values.remove(n).is_some() {
                    removed = true;
                    break;
                }
                cur = l.next.as_deref_mut();
            }
            if !removed && !self.param_set().contains(n) {
                return Err(Error::unknown("hyperparameter", n));
            }
        }
        Ok(self)
    }

    pub fn set_predict_type(mut self, t: PredictType) -> Result<Learner> {
        match t {
            PredictType::Prob if !self.has_property(Property::Prob) => {
                return Err(Error::unsupported(&self.id, "predict type 'prob'"))
            }
            PredictType::Se if !self.has_property(Property::Se) => {
                return Err(Error::unsupported(&self.id, "predict type 'se'"))
            }
            _ => {}
        }
        if self.algo.forwards_predict_type() {
            if let Some(n) = self.next.take() {
                self.next = Some(Box::new(n.set_predict_type(t)?));
            }
        }
        self.predict_type = t;
        Ok(self)
    }

    pub fn set_id(mut self, id: &str) -> Learner {
        self.id = id.to_string();
        self
    }

    pub fn set_config(mut self, config: LearnerConfig) -> Learner {
        self.config = config;
        if let Some(n) = self.next.take() {
            self.next = Some(Box::new(n.set_config(config)));
        }
        self
    }

    /// Checks whether this learner can be trained on `task`.
    pub fn check_task(&self, task: &Task) -> Result<()> {
        if self.kind != task.kind() {
            return Err(Error::arg(format!(
                "learner '{}' is for {} tasks but task '{}' is {}",
                self.id,
                self.kind,
                task.id(),
                task.kind()
            )));
        }
        if let Some(reason) = self.missing_capabilities(task).into_iter().next() {
            return Err(Error::unsupported(&self.id, reason));
        }
        Ok(())
    }

    /// Human readable list of task features this learner cannot handle.
    pub fn missing_capabilities(&self, task: &Task) -> Vec<String> {
        let mut out = Vec::new();
        let desc = task.desc();
        let need = |p: Property| !self.has_property(p);
        if desc.n_feat.numerics > 0 && need(Property::Numerics) {
            out.push("numeric features".to_string());
        }
        if (desc.n_feat.factors > 0 || desc.n_feat.logicals > 0) && need(Property::Factors) {
            out.push("factor features".to_string());
        }
        if desc.n_feat.ordered > 0 && need(Property::Ordered) && need(Property::Factors) {
            out.push("ordered factor features".to_string());
        }
        let feats = task.feature_names();
        let missing_feats = feats.iter().any(|f| task.data().column(f).map(|c| c.has_missing()).unwrap_or(false));
        if missing_feats && need(Property::Missings) {
            out.push("missing values".to_string());
        }
        if task.kind() == TaskKind::Classif {
            let k = desc.class_levels.len();
            if k == 2 && need(Property::TwoClass) {
                out.push("two-class problems".to_string());
            }
            if k > 2 && need(Property::MultiClass) {
                out.push("multiclass problems".to_string());
            }
        }
        out
    }

    /// Feature kinds in a dataset (logical columns count as factors).
    pub fn feature_kinds(data: &Dataset) -> BTreeSet<ColumnKind> {
        data.columns().iter().map(|c| c.kind()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerInfo {
    pub class_name: String,
    pub kind: TaskKind,
    pub properties: Properties,
    pub package: String,
}

/// A registered learner class.
#[derive(Clone)]
pub struct LearnerDescriptor {
    pub class_name: String,
    pub kind: TaskKind,
    pub properties: Properties,
    pub params: ParamSet,
    pub algorithm: Arc<dyn Algorithm>,
}

impl LearnerDescriptor {
    pub fn info(&self) -> LearnerInfo {
        LearnerInfo {
            class_name: self.class_name.clone(),
            kind: self.kind,
            properties: self.properties.clone(),
            package: "builtin".to_string(),
        }
    }
}

static REGISTRY: Lazy<RwLock<BTreeMap<String, LearnerDescriptor>>> = Lazy::new(|| {
    let mut m = BTreeMap::new();
    for d in crate::learners::builtin_descriptors() {
        m.insert(d.class_name.clone(), d);
    }
    RwLock::new(m)
});

pub fn register_learner(desc: LearnerDescriptor) -> Result<()> {
    let mut reg = REGISTRY.write().unwrap();
    if reg.contains_key(&desc.class_name) {
        return Err(Error::duplicate("learner class", &desc.class_name));
    }
    reg.insert(desc.class_name.clone(), desc);
    Ok(())
}

pub fn learner_descriptor(class_name: &str) -> Result<LearnerDescriptor> {
    REGISTRY.read().unwrap().get(class_name).cloned().ok_or_else(|| Error::unknown("learner class", class_name))
}

#[derive(Clone, Debug, Default)]
pub struct LearnerOptions {
    pub id: Option<String>,
    pub predict_type: Option<PredictType>,
    pub hyperpars: ParamMap,
    pub config: Option<LearnerConfig>,
}

pub fn make_learner(class_name: &str, opts: LearnerOptions) -> Result<Learner> {
    let d = learner_descriptor(class_name)?;
    let mut l = Learner::from_parts(&d.class_name, d.kind, d.properties, d.params, d.algorithm, None)?;
    if let Some(c) = opts.config {
        l.config = c;
    }
    if let Some(id) = opts.id {
        l.id = id;
    }
    let mut l = l.set_hyperpars(&opts.hyperpars)?;
    if let Some(t) = opts.predict_type {
        l = l.set_predict_type(t)?;
    }
    Ok(l)
}

/// Shorthand for a learner with default settings.
pub fn learner(class_name: &str) -> Result<Learner> {
    make_learner(class_name, LearnerOptions::default())
}

pub fn list_learners(kind: Option<TaskKind>, properties: &[Property], task: Option<&Task>) -> Vec<LearnerInfo> {
    let reg = REGISTRY.read().unwrap();
    reg.values()
        .filter(|d| kind.is_none_or(|k| d.kind == k))
        .filter(|d| properties.iter().all(|p| d.properties.contains(p)))
        .filter(|d| match task {
            None => true,
            Some(t) => {
                let l = Learner::from_parts(
                    &d.class_name,
                    d.kind,
                    d.properties.clone(),
                    ParamSet::empty(),
                    d.algorithm.clone(),
                    None,
                );
                l.map(|l| l.check_task(t).is_ok()).unwrap_or(false)
            }
        })
        .map(|d| d.info())
        .collect()
}
