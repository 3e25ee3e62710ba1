//! Built-in learning algorithms.

use std::sync::Arc;

use crate::data::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::learner::{props, LearnerDescriptor, Property::*};
use crate::param::{Param, ParamSet};
use crate::task::{Task, TaskKind};

pub mod cart;
pub mod featureless;
pub mod kmeans;
pub mod knn;
pub mod lda;
pub mod logreg;
pub mod ols;

pub(crate) fn builtin_descriptors() -> Vec<LearnerDescriptor> {
    let d = |class_name: &str, kind, properties, params: Vec<Param>, algorithm| LearnerDescriptor {
        class_name: class_name.to_string(),
        kind,
        properties,
        params: ParamSet::new(params).expect("builtin parameter set"),
        algorithm,
    };
    let cart_params = || {
        vec![
            Param::integer("minsplit", 1, i64::MAX).with_default(20),
            Param::integer("minbucket", 1, i64::MAX).with_default(7),
            Param::integer("maxdepth", 1, 30).with_default(30),
            Param::numeric("cp", 0.0, 1.0).with_default(0.01),
        ]
    };
    vec![
        d(
            "classif.featureless",
            TaskKind::Classif,
            props(&[Numerics, Factors, Ordered, Missings, Weights, Prob, TwoClass, MultiClass]),
            vec![],
            Arc::new(featureless::Featureless),
        ),
        d(
            "regr.featureless",
            TaskKind::Regr,
            props(&[Numerics, Factors, Ordered, Missings, Weights]),
            vec![],
            Arc::new(featureless::Featureless),
        ),
        d(
            "classif.knn",
            TaskKind::Classif,
            props(&[Numerics, Prob, TwoClass, MultiClass]),
            vec![Param::integer("k", 1, i64::MAX).with_default(5)],
            Arc::new(knn::Knn),
        ),
        d(
            "regr.knn",
            TaskKind::Regr,
            props(&[Numerics]),
            vec![Param::integer("k", 1, i64::MAX).with_default(5)],
            Arc::new(knn::Knn),
        ),
        d(
            "classif.lda",
            TaskKind::Classif,
            props(&[Numerics, Prob, TwoClass, MultiClass]),
            vec![Param::numeric("ridge", 0.0, f64::INFINITY).with_default(1e-8)],
            Arc::new(lda::Lda),
        ),
        d(
            "classif.logreg",
            TaskKind::Classif,
            props(&[Numerics, Weights, Prob, TwoClass]),
            vec![
                Param::integer("max_iter", 1, i64::MAX).with_default(50),
                Param::numeric("tol", 0.0, 1.0).with_default(1e-8),
            ],
            Arc::new(logreg::LogReg),
        ),
        d(
            "classif.cart",
            TaskKind::Classif,
            props(&[Numerics, Factors, Ordered, Weights, Prob, TwoClass, MultiClass, FeatImp]),
            cart_params(),
            Arc::new(cart::Cart),
        ),
        d(
            "regr.cart",
            TaskKind::Regr,
            props(&[Numerics, Factors, Ordered, Weights, FeatImp]),
            cart_params(),
            Arc::new(cart::Cart),
        ),
        d("regr.ols", TaskKind::Regr, props(&[Numerics, Weights]), vec![], Arc::new(ols::Ols)),
        d(
            "cluster.kmeans",
            TaskKind::Cluster,
            props(&[Numerics, Prob]),
            vec![
                Param::integer("centers", 1, i64::MAX).with_default(2),
                Param::integer("max_iter", 1, i64::MAX).with_default(100),
                Param::integer("nstart", 1, i64::MAX).with_default(1),
            ],
            Arc::new(kmeans::KMeans),
        ),
    ]
}

/// Row-major numeric matrix of all columns. Logical columns become 0/1.
pub(crate) fn numeric_matrix(data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<Vec<f64>> = data
        .columns()
        .iter()
        .map(|c| match c.data() {
            ColumnData::Numeric(v) => Ok(v.clone()),
            ColumnData::Logical(_) => Ok(c.to_f64()),
            ColumnData::Factor { .. } => Err(Error::data(format!("feature '{}' is not numeric", c.name()))),
        })
        .collect::<Result<_>>()?;
    Ok((0..data.n_rows()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

pub(crate) fn feature_matrix(task: &Task) -> Result<Vec<Vec<f64>>> {
    numeric_matrix(&task.features()?)
}

/// Class codes of the training target; missing targets are rejected.
pub(crate) fn class_target(task: &Task) -> Result<(Vec<usize>, usize)> {
    let codes = task.class_codes()?;
    let k = task.class_levels().len();
    let y = codes
        .iter()
        .map(|c| c.map(|c| c as usize).ok_or_else(|| Error::data("classification target contains missing values")))
        .collect::<Result<_>>()?;
    Ok((y, k))
}

pub(crate) fn regr_target(task: &Task) -> Result<Vec<f64>> {
    let y = task.regr_target()?;
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::data("regression target contains missing values"));
    }
    Ok(y.to_vec())
}

pub(crate) fn weights_or_ones(w: Option<&[f64]>, n: usize) -> Vec<f64> {
    w.map_or_else(|| vec![1.0; n], <[f64]>::to_vec)
}

pub(crate) fn check_finite(x: &[Vec<f64>], learner: &str) -> Result<()> {
    if x.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::unsupported(learner, "missing values"));
    }
    Ok(())
}
