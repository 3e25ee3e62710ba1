//! Missing-value imputation with a learn/apply split, missingness indicator
//! columns and a learner wrapper.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{Column, ColumnData, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{learner, Algorithm, Learner, Model, PredictType, Property, RawPrediction, TrainInput};
use crate::param::ParamSet;
use crate::task::Task;
use crate::train::{predict_newdata, raw_predict, train, train_next, WrappedModel};
use crate::util::{mean, median};

/// A single fill value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FillValue {
    Num(f64),
    Bool(bool),
    Level(String),
}

impl fmt::Display for FillValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FillValue::Num(v) => write!(f, "{}", crate::data::fmt_num(*v)),
            FillValue::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            FillValue::Level(s) => f.write_str(s),
        }
    }
}

pub type LearnFn = Arc<dyn Fn(&Dataset, &[String], &str) -> Result<Value> + Send + Sync>;
pub type ApplyFn = Arc<dyn Fn(&Column, &Value) -> Result<Column> + Send + Sync>;

/// User-defined method: `learn` extracts state from the training data,
/// `apply` fills a column given that state.
#[derive(Clone)]
pub struct CustomImpute {
    pub name: String,
    pub learn: LearnFn,
    pub apply: ApplyFn,
    /// Learn again on the data being imputed instead of reusing the
    /// training state. Needed for position-dependent methods.
    pub relearn: bool,
}

impl fmt::Debug for CustomImpute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomImpute({})", self.name)
    }
}

#[derive(Clone, Debug)]
pub enum ImputeMethod {
    Constant(FillValue),
    Mean,
    Median,
    Mode,
    /// Uniform draws from the observed training values.
    Hist,
    /// Predictions of a builtin learner trained on the other columns.
    Learner(String),
    Custom(CustomImpute),
}

impl ImputeMethod {
    pub fn name(&self) -> String {
        match self {
            ImputeMethod::Constant(v) => format!("constant({v})"),
            ImputeMethod::Mean => "mean".into(),
            ImputeMethod::Median => "median".into(),
            ImputeMethod::Mode => "mode".into(),
            ImputeMethod::Hist => "hist".into(),
            ImputeMethod::Learner(c) => format!("learner({c})"),
            ImputeMethod::Custom(c) => c.name.clone(),
        }
    }

    /// Parses "mean", "median", "mode", "hist", "locf", "constant:<v>" or
    /// "learner:<class>".
    pub fn parse(s: &str) -> Result<ImputeMethod> {
        if let Some(v) = s.strip_prefix("constant:") {
            let fill = match v {
                "TRUE" | "true" => FillValue::Bool(true),
                "FALSE" | "false" => FillValue::Bool(false),
                _ => v.parse::<f64>().map_or_else(|_| FillValue::Level(v.to_string()), FillValue::Num),
            };
            return Ok(ImputeMethod::Constant(fill));
        }
        if let Some(c) = s.strip_prefix("learner:") {
            return Ok(ImputeMethod::Learner(c.to_string()));
        }
        Ok(match s {
            "mean" => ImputeMethod::Mean,
            "median" => ImputeMethod::Median,
            "mode" => ImputeMethod::Mode,
            "hist" => ImputeMethod::Hist,
            "locf" => impute_locf(),
            _ => return Err(Error::unknown("imputation method", s)),
        })
    }
}

pub fn make_impute_method(name: &str, learn: LearnFn, apply: ApplyFn) -> ImputeMethod {
    ImputeMethod::Custom(CustomImpute { name: name.to_string(), learn, apply, relearn: false })
}

/// Last observation carried forward. The state holds the value observed
/// before each run of missing cells and the run length. A leading missing
/// cell is an error.
pub fn impute_locf() -> ImputeMethod {
    let learn: LearnFn = Arc::new(|data: &Dataset, _target: &[String], col: &str| {
        let x = data.column(col)?.to_f64();
        let mut values = Vec::new();
        let mut times: Vec<usize> = Vec::new();
        let mut prev_missing = false;
        for (i, v) in x.iter().enumerate() {
            if v.is_nan() {
                if i == 0 {
                    return Err(Error::data(format!("cannot carry forward into leading missing value of '{col}'")));
                }
                if prev_missing {
                    *times.last_mut().expect("open run") += 1;
                } else {
                    values.push(x[i - 1]);
                    times.push(1);
                }
            }
            prev_missing = v.is_nan();
        }
        Ok(serde_json::json!({ "values": values, "times": times }))
    });
    let apply: ApplyFn = Arc::new(|c: &Column, state: &Value| {
        let values: Vec<f64> = serde_json::from_value(state["values"].clone())?;
        let times: Vec<usize> = serde_json::from_value(state["times"].clone())?;
        let fill: Vec<f64> = values.iter().zip(&times).flat_map(|(v, t)| std::iter::repeat_n(*v, *t)).collect();
        let x = c.to_f64();
        if x.iter().filter(|v| v.is_nan()).count() != fill.len() {
            return Err(Error::data(format!("carry-forward state does not match column '{}'", c.name())));
        }
        let mut it = fill.into_iter();
        let filled: Vec<f64> = x.iter().map(|v| if v.is_nan() { it.next().expect("counted") } else { *v }).collect();
        from_f64_like(c, &filled)
    });
    ImputeMethod::Custom(CustomImpute { name: "locf".into(), learn, apply, relearn: true })
}

/// Rebuilds a column of the same kind from a numeric view.
fn from_f64_like(c: &Column, x: &[f64]) -> Result<Column> {
    let data = match c.data() {
        ColumnData::Numeric(_) => ColumnData::Numeric(x.to_vec()),
        ColumnData::Factor { levels, ordered, .. } => ColumnData::Factor {
            codes: x.iter().map(|v| if v.is_nan() { None } else { Some(*v as u32) }).collect(),
            levels: levels.clone(),
            ordered: *ordered,
        },
        ColumnData::Logical(_) => ColumnData::Logical(x.iter().map(|v| if v.is_nan() { None } else { Some(*v != 0.0) }).collect()),
    };
    Column::new(c.name(), data)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DummyType {
    #[default]
    Factor,
    Numeric,
}

/// What to impute and which indicator columns to add.
#[derive(Clone, Debug)]
pub struct ImputeSpec {
    pub target: Vec<String>,
    pub cols: IndexMap<String, ImputeMethod>,
    pub classes: BTreeMap<ColumnKind, ImputeMethod>,
    pub dummy_cols: Vec<String>,
    /// Columns of these kinds get an indicator if they have missing cells.
    pub dummy_classes: Vec<ColumnKind>,
    pub dummy_type: DummyType,
    pub impute_new_levels: bool,
    pub recode_factor_levels: bool,
}

impl Default for ImputeSpec {
    fn default() -> Self {
        ImputeSpec {
            target: Vec::new(),
            cols: IndexMap::new(),
            classes: BTreeMap::new(),
            dummy_cols: Vec::new(),
            dummy_classes: Vec::new(),
            dummy_type: DummyType::Factor,
            impute_new_levels: true,
            recode_factor_levels: true,
        }
    }
}

impl ImputeSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn target<S: AsRef<str>>(mut self, t: &[S]) -> Self {
        self.target = t.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn col(mut self, name: &str, m: ImputeMethod) -> Self {
        self.cols.insert(name.to_string(), m);
        self
    }

    pub fn class(mut self, kind: ColumnKind, m: ImputeMethod) -> Self {
        self.classes.insert(kind, m);
        self
    }

    pub fn dummy_cols<S: AsRef<str>>(mut self, cols: &[S]) -> Self {
        self.dummy_cols = cols.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn dummy_classes(mut self, kinds: &[ColumnKind]) -> Self {
        self.dummy_classes = kinds.to_vec();
        self
    }

    pub fn dummy_type(mut self, t: DummyType) -> Self {
        self.dummy_type = t;
        self
    }
}

/// Learned state for one column.
#[derive(Clone, Debug)]
pub enum Control {
    Value(FillValue),
    Pool(Vec<FillValue>),
    Model { model: Arc<WrappedModel>, features: Vec<String> },
    Custom { method: CustomImpute, state: Value },
}

#[derive(Clone, Debug)]
pub struct ImputationDesc {
    pub target: Vec<String>,
    pub features: Vec<String>,
    pub controls: IndexMap<String, Control>,
    pub dummies: Vec<String>,
    pub dummy_type: DummyType,
    pub impute_new_levels: bool,
    pub recode_factor_levels: bool,
    /// Training levels and most frequent level of every covered factor.
    pub train_levels: BTreeMap<String, Vec<String>>,
    pub train_modes: BTreeMap<String, Option<String>>,
}

fn tf(b: bool) -> &'static str {
    if b { "TRUE" } else { "FALSE" }
}

impl fmt::Display for ImputationDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Imputation description")?;
        writeln!(f, "Target: {}", self.target.join(","))?;
        writeln!(f, "Features: {}; Imputed: {}", self.features.len(), self.controls.len())?;
        writeln!(f, "impute.new.levels: {}", tf(self.impute_new_levels))?;
        writeln!(f, "recode.factor.levels: {}", tf(self.recode_factor_levels))?;
        write!(
            f,
            "dummy.type: {}",
            match self.dummy_type {
                DummyType::Factor => "factor",
                DummyType::Numeric => "numeric",
            }
        )
    }
}

fn observed_values(c: &Column) -> Vec<FillValue> {
    (0..c.len())
        .filter(|&i| !c.is_missing(i))
        .map(|i| match c.data() {
            ColumnData::Numeric(v) => FillValue::Num(v[i]),
            ColumnData::Logical(v) => FillValue::Bool(v[i].expect("observed")),
            ColumnData::Factor { .. } => FillValue::Level(c.cell_string(i)),
        })
        .collect()
}

/// Most frequent observed value; ties go to the first level, or the
/// smallest number.
fn mode_of(c: &Column) -> Option<FillValue> {
    match c.data() {
        ColumnData::Numeric(v) => {
            let mut xs: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
            xs.sort_by(f64::total_cmp);
            let mut best: Option<(f64, usize)> = None;
            let mut i = 0;
            while i < xs.len() {
                let n = xs[i..].iter().take_while(|x| **x == xs[i]).count();
                if best.is_none_or(|(_, bn)| n > bn) {
                    best = Some((xs[i], n));
                }
                i += n;
            }
            best.map(|(x, _)| FillValue::Num(x))
        }
        _ => {
            let codes = c.category_codes().expect("categorical");
            let levels = c.category_levels().expect("categorical");
            let mut counts = vec![0usize; levels.len()];
            codes.iter().flatten().for_each(|&k| counts[k as usize] += 1);
            let (k, n) = counts.iter().enumerate().fold((0, 0), |b, (k, &n)| if n > b.1 { (k, n) } else { b });
            if n == 0 {
                return None;
            }
            Some(match c.data() {
                ColumnData::Logical(_) => FillValue::Bool(k == 1),
                _ => FillValue::Level(levels[k].clone()),
            })
        }
    }
}

/// Replaces missing cells with `fill(i)` for each missing row i.
fn fill_column(c: &Column, mut fill: impl FnMut(usize) -> Result<FillValue>) -> Result<Column> {
    match c.data() {
        ColumnData::Numeric(v) => {
            let mut out = v.clone();
            for (i, x) in out.iter_mut().enumerate() {
                if x.is_nan() {
                    *x = match fill(i)? {
                        FillValue::Num(n) => n,
                        other => return Err(Error::data(format!("cannot fill numeric column '{}' with '{other}'", c.name()))),
                    };
                }
            }
            Column::new(c.name(), ColumnData::Numeric(out))
        }
        ColumnData::Logical(v) => {
            let mut out = v.clone();
            for (i, x) in out.iter_mut().enumerate() {
                if x.is_none() {
                    *x = Some(match fill(i)? {
                        FillValue::Bool(b) => b,
                        other => return Err(Error::data(format!("cannot fill logical column '{}' with '{other}'", c.name()))),
                    });
                }
            }
            Column::new(c.name(), ColumnData::Logical(out))
        }
        ColumnData::Factor { codes, levels, ordered } => {
            let mut levels = levels.clone();
            let mut out = codes.clone();
            for (i, x) in out.iter_mut().enumerate() {
                if x.is_none() {
                    let label = match fill(i)? {
                        FillValue::Level(s) => s,
                        FillValue::Bool(b) => tf(b).to_string(),
                        FillValue::Num(n) => crate::data::fmt_num(n),
                    };
                    let k = match levels.iter().position(|l| *l == label) {
                        Some(k) => k,
                        None => {
                            levels.push(label);
                            levels.len() - 1
                        }
                    };
                    *x = Some(k as u32);
                }
            }
            Column::new(c.name(), ColumnData::Factor { codes: out, levels, ordered: *ordered })
        }
    }
}

fn learn_control(data: &Dataset, target: &[String], col: &str, m: &ImputeMethod, ctx: &Ctx) -> Result<Control> {
    let c = data.column(col)?;
    let numeric = c.kind() == ColumnKind::Numeric;
    let need_numeric = |what: &str| -> Result<()> {
        if numeric {
            Ok(())
        } else {
            Err(Error::arg(format!("{what} imputation needs a numeric column, '{col}' is {}", c.kind())))
        }
    };
    let value = |v: Option<FillValue>| {
        v.map(Control::Value).ok_or_else(|| Error::data(format!("column '{col}' has no observed values to learn from")))
    };
    Ok(match m {
        ImputeMethod::Constant(v) => Control::Value(v.clone()),
        ImputeMethod::Mean => {
            need_numeric("mean")?;
            let obs: Vec<f64> = c.to_f64().into_iter().filter(|x| !x.is_nan()).collect();
            value((!obs.is_empty()).then(|| FillValue::Num(mean(&obs))))?
        }
        ImputeMethod::Median => {
            need_numeric("median")?;
            let obs: Vec<f64> = c.to_f64().into_iter().filter(|x| !x.is_nan()).collect();
            value((!obs.is_empty()).then(|| FillValue::Num(median(&obs))))?
        }
        ImputeMethod::Mode => value(mode_of(c))?,
        ImputeMethod::Hist => {
            let pool = observed_values(c);
            if pool.is_empty() {
                return Err(Error::data(format!("column '{col}' has no observed values to learn from")));
            }
            Control::Pool(pool)
        }
        ImputeMethod::Learner(class) => learn_model(data, target, col, class, ctx)?,
        ImputeMethod::Custom(cm) => Control::Custom { method: cm.clone(), state: (cm.learn)(data, target, col)? },
    })
}

fn learn_model(data: &Dataset, target: &[String], col: &str, class: &str, ctx: &Ctx) -> Result<Control> {
    let c = data.column(col)?;
    let lrn = learner(class)?;
    let want = if c.kind() == ColumnKind::Numeric { crate::task::TaskKind::Regr } else { crate::task::TaskKind::Classif };
    if lrn.kind() != want {
        return Err(Error::arg(format!("column '{col}' ({}) cannot be imputed with {} learner '{class}'", c.kind(), lrn.kind())));
    }
    let features: Vec<String> = data
        .columns()
        .iter()
        .filter(|o| o.name() != col && !target.iter().any(|t| t == o.name()) && !o.has_missing())
        .map(|o| o.name().to_string())
        .collect();
    if features.is_empty() {
        return Err(Error::data(format!("no complete columns are available to impute '{col}'")));
    }
    let rows: Vec<usize> = (0..c.len()).filter(|&i| !c.is_missing(i)).collect();
    let mut cols: Vec<Column> = features.iter().map(|f| data.column(f).map(|x| x.subset(&rows))).collect::<Result<_>>()?;
    let y = as_target_column(&c.subset(&rows))?;
    cols.push(y);
    let d = Dataset::new(cols)?;
    let task = if want == crate::task::TaskKind::Regr {
        Task::regr("impute", d, col)?
    } else {
        Task::classif("impute", d, col)?
    };
    let model = train(&lrn, &task, None, None, &ctx.child("impute-model", 0))?;
    Ok(Control::Model { model: Arc::new(model), features })
}

/// Logical columns become factors with levels FALSE and TRUE.
fn as_target_column(c: &Column) -> Result<Column> {
    match c.data() {
        ColumnData::Logical(v) => {
            let codes = v.iter().map(|b| b.map(|b| b as u32)).collect();
            Column::factor_codes(c.name(), codes, vec!["FALSE".into(), "TRUE".into()])
        }
        _ => Ok(c.clone()),
    }
}

fn apply_control(data: &Dataset, col: &str, control: &Control, ctx: &Ctx, relearn_target: &[String]) -> Result<Column> {
    let c = data.column(col)?;
    if !c.has_missing() {
        return Ok(c.clone());
    }
    match control {
        Control::Value(v) => fill_column(c, |_| Ok(v.clone())),
        Control::Pool(pool) => {
            let mut rng = ctx.rng();
            fill_column(c, |_| Ok(pool[rng.random_range(0..pool.len())].clone()))
        }
        Control::Model { model, features } => {
            let rows: Vec<usize> = (0..c.len()).filter(|&i| c.is_missing(i)).collect();
            let newdata = data.select(features)?.subset_rows(&rows)?;
            let pred = predict_newdata(model, &newdata, ctx)?;
            let fills: Vec<FillValue> = match c.data() {
                ColumnData::Numeric(_) => pred.regr_response()?.iter().map(|v| FillValue::Num(*v)).collect(),
                ColumnData::Logical(_) => pred
                    .class_response()?
                    .iter()
                    .map(|k| k.map(|k| FillValue::Bool(pred.classes[k as usize] == "TRUE")))
                    .collect::<Option<_>>()
                    .ok_or_else(|| Error::data(format!("imputation model for '{col}' returned missing values")))?,
                ColumnData::Factor { .. } => pred
                    .class_response()?
                    .iter()
                    .map(|k| k.map(|k| FillValue::Level(pred.classes[k as usize].clone())))
                    .collect::<Option<_>>()
                    .ok_or_else(|| Error::data(format!("imputation model for '{col}' returned missing values")))?,
            };
            let mut it = fills.into_iter();
            fill_column(c, |_| Ok(it.next().expect("one prediction per missing cell")))
        }
        Control::Custom { method, state } => {
            let state = if method.relearn { (method.learn)(data, relearn_target, col)? } else { state.clone() };
            (method.apply)(c, &state)
        }
    }
}

fn dummy_column(c: &Column, t: DummyType) -> Column {
    let name = format!("{}.dummy", c.name());
    let miss: Vec<bool> = (0..c.len()).map(|i| c.is_missing(i)).collect();
    match t {
        DummyType::Factor => Column::factor_codes(name, miss.iter().map(|m| Some(*m as u32)).collect(), vec!["FALSE".into(), "TRUE".into()])
            .expect("indicator levels"),
        DummyType::Numeric => Column::numeric(name, miss.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect()),
    }
}

/// Learns imputation controls on `data` and returns the imputed data with
/// indicator columns appended.
pub fn impute(data: &Dataset, spec: &ImputeSpec, ctx: &Ctx) -> Result<(Dataset, ImputationDesc)> {
    for t in &spec.target {
        data.column(t)?;
    }
    let is_target = |n: &str| spec.target.iter().any(|t| t == n);
    for n in spec.cols.keys().chain(&spec.dummy_cols) {
        data.column(n)?;
        if is_target(n) {
            return Err(Error::arg(format!("target column '{n}' cannot be imputed")));
        }
    }
    let features: Vec<String> = data.names().into_iter().filter(|n| !is_target(n)).collect();
    let mut controls = IndexMap::new();
    let mut train_levels = BTreeMap::new();
    let mut train_modes = BTreeMap::new();
    for (j, name) in features.iter().enumerate() {
        let c = data.column(name)?;
        let method = spec.cols.get(name).or_else(|| spec.classes.get(&c.kind()));
        let Some(m) = method else { continue };
        controls.insert(name.clone(), learn_control(data, &spec.target, name, m, &ctx.child("impute-learn", j as u64))?);
        if let Some(l) = c.levels() {
            train_levels.insert(name.clone(), l.to_vec());
            train_modes.insert(name.clone(), mode_of(c).map(|v| v.to_string()));
        }
    }
    let dummy_set: BTreeSet<&str> = spec.dummy_cols.iter().map(String::as_str).collect();
    let dummies: Vec<String> = features
        .iter()
        .filter(|n| {
            let c = data.column(n).expect("present");
            dummy_set.contains(n.as_str()) || (spec.dummy_classes.contains(&c.kind()) && c.has_missing())
        })
        .cloned()
        .collect();
    let desc = ImputationDesc {
        target: spec.target.clone(),
        features,
        controls,
        dummies,
        dummy_type: spec.dummy_type,
        impute_new_levels: spec.impute_new_levels,
        recode_factor_levels: spec.recode_factor_levels,
        train_levels,
        train_modes,
    };
    let out = reimpute(data, &desc, ctx)?;
    Ok((out, desc))
}

/// Applies learned controls to new data. Only training statistics are used.
pub fn reimpute(data: &Dataset, desc: &ImputationDesc, ctx: &Ctx) -> Result<Dataset> {
    for n in desc.controls.keys().chain(&desc.dummies) {
        data.column(n)?;
    }
    let mut prepared = data.clone();
    for (name, levels) in &desc.train_levels {
        let c = data.column(name)?;
        if c.levels().is_none() {
            return Err(Error::data(format!("column '{name}' is no longer a factor")));
        }
        let prepared_col = reconcile_levels(c, levels, desc.train_modes.get(name).cloned().flatten(), desc)?;
        prepared.push_column(prepared_col)?;
    }
    let mut out = prepared.clone();
    for (j, (name, control)) in desc.controls.iter().enumerate() {
        let col = apply_control(&prepared, name, control, &ctx.child("impute-apply", j as u64), &desc.target)?;
        out.push_column(col)?;
    }
    for name in &desc.dummies {
        out.push_column(dummy_column(data.column(name)?, desc.dummy_type))?;
    }
    Ok(out)
}

/// Maps unseen levels to the training mode (if enabled) and re-expresses
/// the column over the training levels (if enabled). Cells missing in the
/// input stay missing.
fn reconcile_levels(c: &Column, train: &[String], mode: Option<String>, desc: &ImputationDesc) -> Result<Column> {
    let own = c.levels().expect("factor");
    let codes = c.codes().expect("factor");
    let unseen: Vec<bool> = codes.iter().map(|k| k.is_some_and(|k| !train.contains(&own[k as usize]))).collect();
    if !unseen.iter().any(|u| *u) && (!desc.recode_factor_levels || own == train) {
        return Ok(c.clone());
    }
    let mut labels: Vec<Option<String>> = codes.iter().map(|k| k.map(|k| own[k as usize].clone())).collect();
    if desc.impute_new_levels {
        for (l, u) in labels.iter_mut().zip(&unseen) {
            if *u {
                *l = mode.clone();
            }
        }
    }
    let mut levels = if desc.recode_factor_levels { train.to_vec() } else { own.to_vec() };
    for l in labels.iter().flatten() {
        if !levels.contains(l) {
            levels.push(l.clone());
        }
    }
    let ordered = matches!(c.data(), ColumnData::Factor { ordered: true, .. });
    let idx: BTreeMap<&str, u32> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
    let new_codes = labels.iter().map(|l| l.as_ref().map(|l| idx[l.as_str()])).collect();
    Column::new(c.name(), ColumnData::Factor { codes: new_codes, levels, ordered })
}

// ---------------------------------------------------------------------------
// Wrapper

struct ImputeWrapper {
    spec: ImputeSpec,
}

#[derive(Debug)]
pub struct ImputeModel {
    pub desc: ImputationDesc,
    inner: WrappedModel,
}

impl Algorithm for ImputeWrapper {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let spec = self.spec.clone().target(input.task.targets());
        let (data, desc) = impute(input.task.data(), &spec, &input.ctx.child("impute", 0))?;
        let task = input.task.with_data(data)?;
        let inner = train_next(input, &task, input.weights)?;
        Ok(Box::new(ImputeModel { desc, inner }))
    }
}

impl Model for ImputeModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, ctx: &Ctx) -> Result<RawPrediction> {
        let d = reimpute(data, &self.desc, &ctx.child("reimpute", 0))?;
        raw_predict(&self.inner, &d, ctx)
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

/// Imputes the training data before fitting and reimputes new data before
/// predicting. The wrapper accepts missing values.
pub fn make_impute_wrapper(learner: Learner, spec: ImputeSpec) -> Result<Learner> {
    let id = format!("{}.imputed", learner.id());
    let (kind, pt) = (learner.kind(), learner.predict_type());
    let mut props = learner.properties().clone();
    props.insert(Property::Missings);
    Ok(Learner::from_parts("ImputeWrapper", kind, props, ParamSet::empty(), Arc::new(ImputeWrapper { spec }), Some(learner))?
        .set_id(&id)
        .set_predict_type(pt)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Ctx {
        Ctx::new(7)
    }

    #[test]
    fn mean_fills_and_stores() {
        let d = Dataset::new(vec![Column::numeric("x", vec![1.0, f64::NAN, 3.0])]).unwrap();
        let (out, desc) = impute(&d, &ImputeSpec::new().col("x", ImputeMethod::Mean), &ctx()).unwrap();
        assert_eq!(out.column("x").unwrap().as_numeric().unwrap(), &[1.0, 2.0, 3.0]);
        assert!(matches!(desc.controls["x"], Control::Value(FillValue::Num(v)) if v == 2.0));
        let test = Dataset::new(vec![Column::numeric("x", vec![f64::NAN; 4])]).unwrap();
        let r = reimpute(&test, &desc, &ctx()).unwrap();
        assert_eq!(r.column("x").unwrap().as_numeric().unwrap(), &[2.0; 4]);
    }

    #[test]
    fn factor_mode_and_ties() {
        let c = Column::factor("f", &[Some("a"), Some("a"), Some("b"), None], None).unwrap();
        let d = Dataset::new(vec![c]).unwrap();
        let (out, _) = impute(&d, &ImputeSpec::new().class(ColumnKind::Factor, ImputeMethod::Mode), &ctx()).unwrap();
        assert_eq!(out.column("f").unwrap().cell_string(3), "a");
        let tie = Column::factor("f", &[Some("b"), Some("a"), None], None).unwrap();
        assert_eq!(mode_of(&tie), Some(FillValue::Level("a".into())));
    }

    #[test]
    fn dummies_mark_missingness() {
        let d = Dataset::new(vec![
            Column::numeric("x", vec![1.0, f64::NAN, 3.0]),
            Column::numeric("full", vec![1.0, 2.0, 3.0]),
        ])
        .unwrap();
        let spec = ImputeSpec::new().class(ColumnKind::Numeric, ImputeMethod::Mean).dummy_classes(&[ColumnKind::Numeric]);
        let (out, desc) = impute(&d, &spec, &ctx()).unwrap();
        assert_eq!(desc.dummies, vec!["x"]);
        let dm = out.column("x.dummy").unwrap();
        assert_eq!((0..3).map(|i| dm.cell_string(i)).collect::<Vec<_>>(), vec!["FALSE", "TRUE", "FALSE"]);
        assert!(!out.has_column("full.dummy"));
        let clean = Dataset::new(vec![Column::numeric("x", vec![5.0, 6.0]), Column::numeric("full", vec![0.0, 0.0])]).unwrap();
        let r = reimpute(&clean, &desc, &ctx()).unwrap();
        assert_eq!(r.column("x").unwrap(), clean.column("x").unwrap());
        assert_eq!(r.column("x.dummy").unwrap().codes().unwrap(), &[Some(0), Some(0)]);
    }

    #[test]
    fn locf_carries_forward() {
        let d = Dataset::new(vec![Column::numeric("x", vec![5.0, f64::NAN, f64::NAN, 7.0, f64::NAN])]).unwrap();
        let (out, _) = impute(&d, &ImputeSpec::new().col("x", impute_locf()), &ctx()).unwrap();
        assert_eq!(out.column("x").unwrap().as_numeric().unwrap(), &[5.0, 5.0, 5.0, 7.0, 7.0]);
        let lead = Dataset::new(vec![Column::numeric("x", vec![f64::NAN, 1.0])]).unwrap();
        assert!(impute(&lead, &ImputeSpec::new().col("x", impute_locf()), &ctx()).is_err());
    }

    #[test]
    fn locf_on_printed_air_quality_rows() {
        let nan = f64::NAN;
        let ozone = vec![41.0, 36.0, 12.0, 18.0, nan, 28.0, 23.0, 19.0, 8.0, nan];
        let solar = vec![190.0, 118.0, 149.0, 313.0, nan, nan, 299.0, 99.0, 19.0, 194.0];
        let d = Dataset::new(vec![Column::numeric("Ozone", ozone), Column::numeric("Solar.R", solar)]).unwrap();
        let spec = ImputeSpec::new().col("Ozone", impute_locf()).col("Solar.R", impute_locf()).dummy_cols(&["Ozone", "Solar.R"]);
        let (out, _) = impute(&d, &spec, &ctx()).unwrap();
        let o = out.column("Ozone").unwrap().as_numeric().unwrap();
        let s = out.column("Solar.R").unwrap().as_numeric().unwrap();
        assert_eq!((o[4], s[4]), (18.0, 313.0));
        assert_eq!((o[5], s[5]), (28.0, 313.0));
        assert_eq!(o[9], 8.0);
        assert_eq!(out.column("Solar.R.dummy").unwrap().cell_string(5), "TRUE");
    }

    #[test]
    fn hist_draws_from_training_pool() {
        let d = Dataset::new(vec![Column::numeric("x", vec![1.0, 2.0, f64::NAN, f64::NAN])]).unwrap();
        let (out, _) = impute(&d, &ImputeSpec::new().col("x", ImputeMethod::Hist), &ctx()).unwrap();
        let x = out.column("x").unwrap().as_numeric().unwrap();
        assert!(x.iter().all(|v| *v == 1.0 || *v == 2.0));
    }

    #[test]
    fn learner_imputation_ignores_target() {
        let n = 40;
        let a: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        b[3] = f64::NAN;
        let y: Vec<f64> = (0..n).map(|i| if i == 3 { 1e6 } else { 0.0 }).collect();
        let d = Dataset::new(vec![Column::numeric("a", a), Column::numeric("b", b), Column::numeric("y", y)]).unwrap();
        let spec = ImputeSpec::new().target(&["y"]).col("b", ImputeMethod::Learner("regr.ols".into()));
        let (out, desc) = impute(&d, &spec, &ctx()).unwrap();
        match &desc.controls["b"] {
            Control::Model { features, .. } => assert_eq!(features, &vec!["a".to_string()]),
            _ => panic!("expected a model control"),
        }
        assert!((out.column("b").unwrap().as_numeric().unwrap()[3] - 6.0).abs() < 1e-8);
        let bad = ImputeSpec::new().col("b", ImputeMethod::Learner("classif.lda".into()));
        assert!(impute(&d, &bad, &ctx()).is_err());
    }

    #[test]
    fn new_levels_map_to_training_mode() {
        let train_d = Dataset::new(vec![Column::factor("f", &[Some("a"), Some("a"), Some("b")], None).unwrap()]).unwrap();
        let (_, desc) = impute(&train_d, &ImputeSpec::new().col("f", ImputeMethod::Mode), &ctx()).unwrap();
        let test = Dataset::new(vec![Column::factor("f", &[Some("c"), None, Some("b")], None).unwrap()]).unwrap();
        let r = reimpute(&test, &desc, &ctx()).unwrap();
        let f = r.column("f").unwrap();
        assert_eq!(f.levels().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!((0..3).map(|i| f.cell_string(i)).collect::<Vec<_>>(), vec!["a", "a", "b"]);
    }

    #[test]
    fn reimpute_is_idempotent_and_checks_columns() {
        let d = Dataset::new(vec![Column::numeric("x", vec![1.0, f64::NAN, 4.0])]).unwrap();
        let (once, desc) = impute(&d, &ImputeSpec::new().col("x", ImputeMethod::Median), &ctx()).unwrap();
        let twice = reimpute(&once.select(&["x"]).unwrap(), &desc, &ctx()).unwrap();
        assert_eq!(once.column("x").unwrap(), twice.column("x").unwrap());
        let other = Dataset::new(vec![Column::numeric("z", vec![1.0])]).unwrap();
        assert!(reimpute(&other, &desc, &ctx()).is_err());
    }

    #[test]
    fn wrapper_adds_missings_property() {
        let w = make_impute_wrapper(learner("regr.ols").unwrap(), ImputeSpec::new()).unwrap();
        assert!(w.has_property(Property::Missings));
        assert_eq!(w.id(), "regr.ols.imputed");
    }
}
