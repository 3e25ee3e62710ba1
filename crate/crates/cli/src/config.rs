//! Experiment configuration: one JSON document describing tasks, learners,
//! resampling, measures and the settings of each command.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use mlkit::featsel::{FeatSelControl, FilterSelect};
use mlkit::impute::DummyType;
use mlkit::learner::{LearnerConfig, OnLearnerError};
use mlkit::resample::PredictSets;
use mlkit::tune::TuneControl;
use mlkit::{ColumnKind, Level, Param, ParamMap, PredictType, Schema, TaskKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_level")]
    pub level: Level,
    pub tasks: Vec<TaskSpec>,
    pub learners: Vec<LearnerSpec>,
    #[serde(default)]
    pub resampling: ResamplingSpec,
    /// Measure ids, optionally with an aggregation suffix such as
    /// "acc.test.median".
    #[serde(default)]
    pub measures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub featsel: Option<FeatSelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inspect: Option<InspectSpec>,
    #[serde(default)]
    pub options: RunOptions,
}

fn default_seed() -> u64 {
    1
}
fn one() -> usize {
    1
}
fn default_level() -> Level {
    Level::Resample
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    /// CSV file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub schema: Schema,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<TaskKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", deserialize_with = "one_or_many")]
    pub target: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<String>,
    /// Columns holding per-class costs (cost-sensitive tasks read from CSV).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub costs: Vec<String>,
    /// Column holding observation weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

/// Bundled and generated data sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum Builtin {
    Iris,
    Linear {
        #[serde(default = "n200")]
        n: usize,
        #[serde(default = "half")]
        noise_sd: f64,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Gaussian {
        #[serde(default = "n200")]
        n: usize,
        #[serde(default = "five")]
        p: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Imbalanced {
        #[serde(default = "n100")]
        n_pos: usize,
        #[serde(default = "n5000")]
        n_neg: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Multilabel {
        #[serde(default = "n200")]
        n: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Costsens {
        #[serde(default = "n200")]
        n: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

fn n100() -> usize {
    100
}
fn n200() -> usize {
    200
}
fn n5000() -> usize {
    5000
}
fn five() -> usize {
    5
}
fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict_type: Option<PredictType>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hyperpars: ParamMap,
    /// Applied in order: the first entry wraps the base learner, the last
    /// one is outermost.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wrappers: Vec<WrapperSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WrapperSpec {
    Bagging {
        #[serde(default = "ten")]
        iters: usize,
        #[serde(default = "yes")]
        replace: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<f64>,
        #[serde(default = "full")]
        feats: f64,
    },
    Overbagging {
        rate: f64,
        #[serde(default = "ten")]
        iters: usize,
        #[serde(default)]
        maxcl: MajoritySpec,
    },
    Oversample {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<String>,
    },
    Undersample {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<String>,
    },
    Smote {
        rate: f64,
        #[serde(default = "five")]
        nn: usize,
    },
    WeightedClasses {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Scale {
        #[serde(default = "yes")]
        center: bool,
        #[serde(default = "yes")]
        scale: bool,
    },
    Pca {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
    },
    Downsample {
        perc: f64,
    },
    Impute {
        /// Method per column kind, e.g. {"numeric": "median"}.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        classes: BTreeMap<ColumnKind, String>,
        #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
        cols: IndexMap<String, String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        dummy_cols: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        dummy_classes: Vec<ColumnKind>,
        #[serde(default)]
        dummy_type: DummyType,
    },
    Filter {
        method: String,
        select: FilterSelect,
    },
    Tune {
        params: Vec<Param>,
        #[serde(default)]
        control: TuneControl,
        #[serde(default)]
        resampling: ResamplingSpec,
        #[serde(default)]
        measures: Vec<String>,
    },
    Featsel {
        #[serde(default)]
        control: FeatSelControl,
        #[serde(default)]
        resampling: ResamplingSpec,
        #[serde(default)]
        measures: Vec<String>,
    },
    CostsensClassif,
    CostsensRegr,
    CostsensWeightedPairs,
    Multilabel {
        method: MultilabelSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<String>>,
    },
}

fn ten() -> usize {
    10
}
fn full() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MajoritySpec {
    All,
    #[default]
    Boot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultilabelSpec {
    Br,
    Cc,
    Nested,
    Dbr,
    Stacking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResamplingSpec {
    /// holdout, cv, loo, repcv, subsample or bootstrap.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<f64>,
    #[serde(default)]
    pub stratify: bool,
    #[serde(default)]
    pub predict: PredictSets,
}

fn default_method() -> String {
    "cv".into()
}

impl Default for ResamplingSpec {
    fn default() -> Self {
        ResamplingSpec { method: default_method(), iters: None, reps: None, split: None, stratify: false, predict: PredictSets::Test }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    /// Learner id; the first learner when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<String>,
    pub params: Vec<Param>,
    #[serde(default)]
    pub control: TuneControl,
    /// Inner resampling; the top-level resampling when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resampling: Option<ResamplingSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measures: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatSelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<String>,
    #[serde(default)]
    pub control: FeatSelControl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resampling: Option<ResamplingSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measures: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Learner ids to run; all when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub learners: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<String>,
    /// Significance level of the rank statistics.
    #[serde(default = "alpha")]
    pub alpha: f64,
}

fn alpha() -> f64 {
    0.05
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec { learners: Vec::new(), tasks: Vec::new(), alpha: alpha() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gridsize: Option<usize>,
    /// Measures for threshold sweeps and learning curves; the top-level
    /// measures when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measures: Vec<String>,
    #[serde(default = "yes")]
    pub aggregate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaks: Option<BreaksSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    #[serde(default = "default_percs")]
    pub percs: Vec<f64>,
    /// Features for partial dependence; every model feature when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    #[serde(default)]
    pub interaction: bool,
    #[serde(default)]
    pub individual: bool,
    #[serde(default)]
    pub derivative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<HashMap<String, f64>>,
    #[serde(default)]
    pub fun: FunSpec,
    #[serde(default = "two")]
    pub depth: usize,
}

fn default_percs() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 0.75, 1.0]
}
fn two() -> usize {
    2
}

impl Default for InspectSpec {
    fn default() -> Self {
        InspectSpec {
            gridsize: None,
            measures: Vec::new(),
            aggregate: true,
            breaks: None,
            groups: None,
            percs: default_percs(),
            features: Vec::new(),
            interaction: false,
            individual: false,
            derivative: false,
            center: None,
            fun: FunSpec::Mean,
            depth: two(),
        }
    }
}

/// A bin count, "sturges", or explicit cut points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BreaksSpec {
    Count(usize),
    Rule(String),
    Cuts(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunSpec {
    #[default]
    Mean,
    Variance,
    Quantiles(f64, f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default)]
    pub on_learner_error: OnLearnerError,
    #[serde(default)]
    pub show_info: bool,
}

impl RunOptions {
    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig { on_learner_error: self.on_learner_error, show_info: self.show_info, ..Default::default() }
    }
}

impl ExperimentConfig {
    /// Parses a config; errors carry the path of the offending entry.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "" } else { &path }, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "seed": 7,
        "tasks": [
            {"id": "iris", "builtin": {"name": "iris"}},
            {"id": "lin", "builtin": {"name": "linear", "n": 50}},
            {"id": "f", "path": "data.csv", "type": "classif", "target": "y", "schema": {"y": "factor"}}
        ],
        "learners": [
            {"class": "classif.lda"},
            {"class": "classif.cart", "id": "tree", "hyperpars": {"maxdepth": 3},
             "wrappers": [{"type": "impute", "classes": {"numeric": "median"}},
                          {"type": "tune", "params": [{"id": "cp", "type": "numeric", "lower": -4, "upper": -1, "trafo": "10^x"}],
                           "control": {"method": "grid", "resolution": 3}, "resampling": {"method": "holdout"}}]}
        ],
        "resampling": {"method": "cv", "iters": 3, "stratify": true},
        "measures": ["mmce", "acc.test.median"],
        "inspect": {"breaks": "sturges", "fun": {"quantiles": [0.1, 0.9]}}
    }"#;

    #[test]
    fn round_trip_is_a_fixed_point() {
        let a = ExperimentConfig::from_json(FULL).unwrap();
        let s1 = a.to_json();
        let b = ExperimentConfig::from_json(&s1).unwrap();
        assert_eq!(s1, b.to_json());
        assert_eq!(a.tasks[2].target, vec!["y"]);
        assert_eq!(a.inspect.as_ref().unwrap().breaks, Some(BreaksSpec::Rule("sturges".into())));
    }

    #[test]
    fn errors_report_the_path() {
        let bad = r#"{"tasks": [{"id": "a", "builtin": {"name": "iris"}}],
                      "learners": [{"class": "classif.lda", "wrappers": [{"type": "smote", "rate": "x"}]}]}"#;
        let e = ExperimentConfig::from_json(bad).unwrap_err();
        assert!(e.to_string().contains("learners[0].wrappers[0]"), "{e}");
        let unknown = r#"{"tasks": [], "learners": [], "sede": 1}"#;
        assert!(ExperimentConfig::from_json(unknown).unwrap_err().to_string().contains("sede"));
    }
}
