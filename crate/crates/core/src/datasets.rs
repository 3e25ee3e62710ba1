//! The bundled iris data and small seeded synthetic tasks used in examples
//! and tests.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Column, Dataset};
use crate::exec::rng_stream;
use crate::task::{CostTable, Task};

const IRIS_CSV: &str = include_str!("../data/iris.csv");

pub fn iris_dataset() -> Dataset {
    Dataset::from_csv_str(IRIS_CSV, None).expect("bundled iris data parses")
}

/// Three-class iris task with target "Species".
pub fn iris_task() -> Task {
    Task::classif("iris-example", iris_dataset(), "Species").expect("iris task")
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Binary task with `n_pos` rows of class "pos" (the positive class) and
/// `n_neg` rows of class "neg". The positive class is shifted by 1.5 in both
/// features.
pub fn imbalanced_task(n_pos: usize, n_neg: usize, seed: u64) -> Task {
    let mut rng = rng_stream(seed, &[("dataset", 0)]);
    let n = n_pos + n_neg;
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i < n_pos;
        let shift = if pos { 1.5 } else { 0.0 };
        x1.push(normal(&mut rng) + shift);
        x2.push(normal(&mut rng) + shift);
        y.push(Some(if pos { "pos" } else { "neg" }));
    }
    let data = Dataset::new(vec![
        Column::numeric("x1", x1),
        Column::numeric("x2", x2),
        Column::factor("y", &y, Some(vec!["pos".into(), "neg".into()])).expect("levels"),
    ])
    .expect("columns");
    Task::classif_with_positive("imbalanced", data, "y", "pos").expect("task")
}

/// Regression task y = 3 x1 + x2 + noise_sd * e with a third irrelevant
/// feature; features are uniform on [-1, 1].
pub fn linear_regr_task(n: usize, noise_sd: f64, seed: u64) -> Task {
    let mut rng = rng_stream(seed, &[("dataset", 1)]);
    let mut cols = vec![Vec::with_capacity(n); 3];
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        y.push(3.0 * x[0] + x[1] + noise_sd * normal(&mut rng));
        cols.iter_mut().zip(&x).for_each(|(c, v)| c.push(*v));
    }
    let mut columns: Vec<Column> =
        cols.into_iter().enumerate().map(|(j, c)| Column::numeric(format!("x{}", j + 1), c)).collect();
    columns.push(Column::numeric("y", y));
    Task::regr("linear", Dataset::new(columns).expect("columns"), "y").expect("task")
}

/// Two well separated Gaussian classes "a" and "b" in `p` dimensions; only the
/// first two features carry signal.
pub fn gaussian_classif_task(n: usize, p: usize, seed: u64) -> Task {
    let mut rng = rng_stream(seed, &[("dataset", 2)]);
    let mut cols = vec![Vec::with_capacity(n); p];
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let a = i % 2 == 0;
        for (j, c) in cols.iter_mut().enumerate() {
            let shift = if j < 2 && a { 2.0 } else { 0.0 };
            c.push(normal(&mut rng) + shift);
        }
        y.push(Some(if a { "a" } else { "b" }));
    }
    let mut columns: Vec<Column> =
        cols.into_iter().enumerate().map(|(j, c)| Column::numeric(format!("x{}", j + 1), c)).collect();
    columns.push(Column::factor("y", &y, Some(vec!["a".into(), "b".into()])).expect("levels"));
    Task::classif("gaussian", Dataset::new(columns).expect("columns"), "y").expect("task")
}

/// Multilabel task with labels driven by thresholds on three features.
pub fn multilabel_task(n: usize, seed: u64) -> Task {
    let mut rng = rng_stream(seed, &[("dataset", 3)]);
    let mut x = vec![Vec::with_capacity(n); 3];
    let mut labels = vec![Vec::with_capacity(n); 3];
    for _ in 0..n {
        let r: Vec<f64> = (0..3).map(|_| normal(&mut rng)).collect();
        let noise = 0.3 * normal(&mut rng);
        labels[0].push(Some(r[0] + noise > 0.0));
        labels[1].push(Some(r[1] - r[0] > 0.3));
        labels[2].push(Some(r[2] + 0.5 * r[1] > 0.5));
        x.iter_mut().zip(&r).for_each(|(c, v)| c.push(*v));
    }
    let mut columns: Vec<Column> =
        x.into_iter().enumerate().map(|(j, c)| Column::numeric(format!("x{}", j + 1), c)).collect();
    for (j, l) in labels.into_iter().enumerate() {
        columns.push(Column::logical(format!("label{}", j + 1), l));
    }
    Task::multilabel("multilabel", Dataset::new(columns).expect("columns"), &["label1", "label2", "label3"]).expect("task")
}

/// Example-dependent cost task with three classes. Every row has a unique
/// zero-cost class determined by the sign pattern of two features.
pub fn costsens_task(n: usize, seed: u64) -> Task {
    let mut rng = rng_stream(seed, &[("dataset", 4)]);
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = normal(&mut rng);
        let b: f64 = normal(&mut rng);
        let best = if a < -0.4 { 0 } else if b < 0.0 { 1 } else { 2 };
        let row: Vec<f64> = (0..3)
            .map(|c| if c == best { 0.0 } else { 1.0 + rng.random_range(0.0..4.0) })
            .collect();
        x1.push(a);
        x2.push(b);
        costs.push(row);
    }
    let data = Dataset::new(vec![Column::numeric("x1", x1), Column::numeric("x2", x2)]).expect("columns");
    let table = CostTable::new(vec!["c1".into(), "c2".into(), "c3".into()], costs).expect("costs");
    Task::costsens("costsens", data, table).expect("task")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iris_shape() {
        let t = iris_task();
        assert_eq!(t.size(), 150);
        assert_eq!(t.n_features(), 4);
        assert_eq!(t.class_counts(), vec![50, 50, 50]);
    }

    #[test]
    fn synthetic_tasks_are_seeded() {
        assert_eq!(imbalanced_task(10, 20, 3).data(), imbalanced_task(10, 20, 3).data());
        assert_eq!(imbalanced_task(10, 20, 3).class_counts(), vec![10, 20]);
        assert_eq!(linear_regr_task(20, 0.0, 1).size(), 20);
        assert_eq!(multilabel_task(30, 1).targets().len(), 3);
        assert_eq!(costsens_task(30, 1).class_levels().len(), 3);
    }
}
