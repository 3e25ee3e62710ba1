//! Tabular machine learning experiments: tasks, learners, resampling,
//! tuning, feature selection, wrappers and inspection helpers.

pub mod data;
pub mod benchmark;
pub mod costsens;
pub mod datasets;
pub mod error;
pub mod exec;
pub mod featsel;
pub mod impute;
pub mod inspection;
pub mod learner;
pub mod learners;
pub mod measures;
pub mod multilabel;
pub mod param;
pub mod prediction;
pub mod resample;
pub mod stats;
pub mod table;
pub mod task;
pub mod train;
pub mod tune;
pub mod util;
pub mod wrappers;

pub use data::{load_dataset, Column, ColumnData, ColumnKind, Dataset, Schema};
pub use error::{Error, Result};
pub use exec::{rng_stream, Ctx, Level, RngStream};
pub use learner::{learner, make_learner, Learner, LearnerOptions, PredictType, Property};
pub use param::{Param, ParamMap, ParamSet, ParamValue, Requirement, Trafo};
pub use prediction::Prediction;
pub use task::{make_task, Task, TaskDesc, TaskKind};
pub use train::{predict_newdata, predict_task, train, WrappedModel};
pub use measures::{get_measure, performance, Aggregation, Measure};
pub use resample::{resample, ResampleDesc, ResampleInstance, ResampleOptions, ResampleResult};
