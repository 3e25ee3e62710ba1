//! Turns config entries into tasks, learners, resampling descriptions and
//! measures. Failures become config errors pointing at the entry.

use std::path::Path;

use mlkit::data::ColumnData;
use mlkit::datasets;
use mlkit::featsel::make_featsel_wrapper;
use mlkit::featsel::make_filter_wrapper;
use mlkit::impute::{make_impute_wrapper, ImputeMethod, ImputeSpec};
use mlkit::measures::measure_from_spec;
use mlkit::multilabel::{make_multilabel_wrapper, Method};
use mlkit::resample::make_resample_desc;
use mlkit::task::{CostTable, TaskOptions};
use mlkit::tune::make_tune_wrapper;
use mlkit::wrappers::*;
use mlkit::{costsens, load_dataset, make_learner, make_task, Learner, LearnerOptions, Measure, ParamSet, ResampleDesc, Task};

use crate::config::*;
use crate::CliError;

fn at(path: &str) -> impl Fn(mlkit::Error) -> CliError + '_ {
    move |e| CliError::config(path, e.to_string())
}

pub(crate) fn tasks(cfg: &ExperimentConfig, base: &Path) -> Result<Vec<Task>, CliError> {
    if cfg.tasks.is_empty() {
        return Err(CliError::config("tasks", "at least one task is required"));
    }
    cfg.tasks.iter().enumerate().map(|(i, s)| task(s, base, &format!("tasks[{i}]"))).collect()
}

fn task(spec: &TaskSpec, base: &Path, path: &str) -> Result<Task, CliError> {
    match (&spec.path, &spec.builtin) {
        (Some(_), Some(_)) => Err(CliError::config(path, "give either path or builtin, not both")),
        (None, None) => Err(CliError::config(path, "a task needs a path or a builtin data set")),
        (None, Some(b)) => builtin_task(spec, b, path),
        (Some(file), None) => csv_task(spec, &base.join(file), path),
    }
}

fn builtin_task(spec: &TaskSpec, b: &Builtin, path: &str) -> Result<Task, CliError> {
    if !spec.schema.is_empty() || !spec.target.is_empty() || !spec.costs.is_empty() || spec.weights.is_some() {
        return Err(CliError::config(path, "schema, target, costs and weights only apply to CSV tasks"));
    }
    let t = match *b {
        Builtin::Iris => datasets::iris_task(),
        Builtin::Linear { n, noise_sd, seed } => datasets::linear_regr_task(n, noise_sd, seed),
        Builtin::Gaussian { n, p, seed } => datasets::gaussian_classif_task(n, p, seed),
        Builtin::Imbalanced { n_pos, n_neg, seed } => datasets::imbalanced_task(n_pos, n_neg, seed),
        Builtin::Multilabel { n, seed } => datasets::multilabel_task(n, seed),
        Builtin::Costsens { n, seed } => datasets::costsens_task(n, seed),
    };
    if let Some(k) = spec.kind {
        if k != t.kind() {
            return Err(CliError::config(&format!("{path}.type"), format!("builtin data set is a {} task", t.kind())));
        }
    }
    let opts = TaskOptions {
        positive: spec.positive.clone().or(t.positive().map(str::to_string)),
        costs: t.costs().cloned(),
        weights: t.weights().map(<[f64]>::to_vec),
    };
    make_task(&spec.id, t.kind(), t.data().clone(), t.targets(), opts).map_err(at(path))
}

fn csv_task(spec: &TaskSpec, file: &Path, path: &str) -> Result<Task, CliError> {
    let kind = spec.kind.ok_or_else(|| CliError::config(&format!("{path}.type"), "CSV tasks need a task type"))?;
    let schema = (!spec.schema.is_empty()).then_some(&spec.schema);
    let mut data = load_dataset(file, schema).map_err(at(&format!("{path}.path")))?;
    let mut opts = TaskOptions { positive: spec.positive.clone(), ..Default::default() };
    if let Some(w) = &spec.weights {
        opts.weights = Some(numeric_column(&data, w, &format!("{path}.weights"))?);
        data = data.drop(&[w]).map_err(at(path))?;
    }
    if !spec.costs.is_empty() {
        let cols = spec
            .costs
            .iter()
            .map(|c| numeric_column(&data, c, &format!("{path}.costs")))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = (0..data.n_rows()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        opts.costs = Some(CostTable::new(spec.costs.clone(), rows).map_err(at(&format!("{path}.costs")))?);
        data = data.drop(&spec.costs).map_err(at(path))?;
    }
    make_task(&spec.id, kind, data, &spec.target, opts).map_err(at(path))
}

fn numeric_column(data: &mlkit::Dataset, name: &str, path: &str) -> Result<Vec<f64>, CliError> {
    match data.column(name).map_err(at(path))?.data() {
        ColumnData::Numeric(v) => Ok(v.clone()),
        _ => Err(CliError::config(path, format!("column '{name}' must be numeric"))),
    }
}

pub(crate) fn learners(cfg: &ExperimentConfig) -> Result<Vec<Learner>, CliError> {
    if cfg.learners.is_empty() {
        return Err(CliError::config("learners", "at least one learner is required"));
    }
    let config = cfg.options.learner_config();
    cfg.learners
        .iter()
        .enumerate()
        .map(|(i, s)| learner(s, config, &format!("learners[{i}]")))
        .collect()
}

fn learner(spec: &LearnerSpec, config: mlkit::learner::LearnerConfig, path: &str) -> Result<Learner, CliError> {
    // with wrappers the predict type belongs to the outermost learner
    let opts = LearnerOptions {
        id: None,
        predict_type: spec.predict_type.filter(|_| spec.wrappers.is_empty()),
        hyperpars: spec.hyperpars.clone(),
        config: Some(config),
    };
    let mut l = make_learner(&spec.class, opts).map_err(at(path))?;
    for (j, w) in spec.wrappers.iter().enumerate() {
        l = wrap(l, w, &format!("{path}.wrappers[{j}]"))?;
    }
    if let Some(pt) = spec.predict_type {
        if l.predict_type() != pt {
            l = l.set_predict_type(pt).map_err(at(&format!("{path}.predict_type")))?;
        }
    }
    Ok(match &spec.id {
        Some(id) => l.set_id(id),
        None => l,
    })
}

fn wrap(l: Learner, w: &WrapperSpec, path: &str) -> Result<Learner, CliError> {
    let e = at(path);
    match w {
        WrapperSpec::Bagging { iters, replace, size, feats } => {
            make_bagging_wrapper(l, BaggingOptions { iters: *iters, replace: *replace, size: *size, feats: *feats })
        }
        WrapperSpec::Overbagging { rate, iters, maxcl } => {
            let mode = match maxcl {
                MajoritySpec::All => MajorityMode::All,
                MajoritySpec::Boot => MajorityMode::Boot,
            };
            make_overbagging_wrapper(l, *rate, *iters, mode)
        }
        WrapperSpec::Oversample { rate, class } => make_oversample_wrapper(l, *rate, class.as_deref()),
        WrapperSpec::Undersample { rate, class } => make_undersample_wrapper(l, *rate, class.as_deref()),
        WrapperSpec::Smote { rate, nn } => make_smote_wrapper(l, *rate, *nn),
        WrapperSpec::WeightedClasses { weight, weights } => {
            let w = match (weight, weights) {
                (Some(w), None) => ClassWeight::Positive(*w),
                (None, Some(ws)) => ClassWeight::PerClass(ws.clone()),
                _ => return Err(CliError::config(path, "set exactly one of weight and weights")),
            };
            make_weighted_classes_wrapper(l, w)
        }
        WrapperSpec::Scale { center, scale } => make_preproc_wrapper_scale(l, *center, *scale),
        WrapperSpec::Pca { threshold, count } => {
            let comps = match (threshold, count) {
                (Some(t), None) => PcaComponents::Threshold(*t),
                (None, Some(k)) => PcaComponents::Count(*k),
                (None, None) => PcaComponents::Threshold(1.0),
                _ => return Err(CliError::config(path, "set at most one of threshold and count")),
            };
            make_preproc_wrapper_pca(l, comps)
        }
        WrapperSpec::Downsample { perc } => make_downsample_wrapper(l, *perc),
        WrapperSpec::Impute { classes, cols, dummy_cols, dummy_classes, dummy_type } => {
            let mut spec = ImputeSpec::new().dummy_cols(dummy_cols).dummy_classes(dummy_classes).dummy_type(*dummy_type);
            for (k, m) in classes {
                spec = spec.class(*k, ImputeMethod::parse(m).map_err(at(&format!("{path}.classes.{k}")))?);
            }
            for (c, m) in cols {
                spec = spec.col(c, ImputeMethod::parse(m).map_err(at(&format!("{path}.cols.{c}")))?);
            }
            make_impute_wrapper(l, spec)
        }
        WrapperSpec::Filter { method, select } => make_filter_wrapper(l, method, *select),
        WrapperSpec::Tune { params, control, resampling, measures: ms } => {
            let ps = ParamSet::new(params.clone()).map_err(at(&format!("{path}.params")))?;
            let desc = resample_desc(resampling, &format!("{path}.resampling"))?;
            make_tune_wrapper(l, desc, ps, control.clone(), measures(ms, &format!("{path}.measures"))?)
        }
        WrapperSpec::Featsel { control, resampling, measures: ms } => {
            let desc = resample_desc(resampling, &format!("{path}.resampling"))?;
            make_featsel_wrapper(l, desc, control.clone(), measures(ms, &format!("{path}.measures"))?)
        }
        WrapperSpec::CostsensClassif => costsens::make_costsens_classif_wrapper(l),
        WrapperSpec::CostsensRegr => costsens::make_costsens_regr_wrapper(l),
        WrapperSpec::CostsensWeightedPairs => costsens::make_costsens_weighted_pairs_wrapper(l),
        WrapperSpec::Multilabel { method, order } => {
            let m = match method {
                MultilabelSpec::Br => Method::BinaryRelevance,
                MultilabelSpec::Cc => Method::ClassifierChains,
                MultilabelSpec::Nested => Method::NestedStacking,
                MultilabelSpec::Dbr => Method::Dbr,
                MultilabelSpec::Stacking => Method::Stacking,
            };
            make_multilabel_wrapper(l, m, order.clone())
        }
    }
    .map_err(e)
}

pub(crate) fn resample_desc(spec: &ResamplingSpec, path: &str) -> Result<ResampleDesc, CliError> {
    let e = at(path);
    let mut d = make_resample_desc(&spec.method, spec.iters).map_err(&e)?;
    if let Some(r) = spec.reps {
        d.reps = r;
    }
    if let Some(s) = spec.split {
        d = d.with_split(s);
    }
    if spec.stratify {
        d = d.stratified();
    }
    d = d.with_predict(spec.predict);
    d.validate().map_err(e)?;
    Ok(d)
}

pub(crate) fn measures(ids: &[String], path: &str) -> Result<Vec<Measure>, CliError> {
    ids.iter()
        .enumerate()
        .map(|(i, s)| measure_from_spec(s).map_err(at(&format!("{path}[{i}]"))))
        .collect()
}
