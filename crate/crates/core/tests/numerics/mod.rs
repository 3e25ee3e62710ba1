//! Numerical checks on fitted models: partial dependence of an exact linear
//! fit, the logistic regression optimum and Lloyd iterations.

use mlkit::datasets::linear_regr_task;
use mlkit::inspection::{functional_anova_data, partial_dependence_data, PdOptions};
use mlkit::learners::kmeans::{lloyd, KMeansModel};
use mlkit::learners::logreg::{deviance, gradient, irls};
use mlkit::table::{Cell, Table};
use mlkit::{learner, train, Column, Ctx, Dataset, Task};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn col(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).expect("column").into_iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

/// Slopes of the averaged curve for x1 under OLS on noiseless y = 3 x1 + x2,
/// and the largest absolute pairwise effect of the functional ANOVA.
pub fn pd_slope_and_pair_effect() -> Result<(f64, f64), String> {
    let task = linear_regr_task(200, 0.0, 7);
    let ctx = Ctx::new(1);
    let m = train(&learner("regr.ols").unwrap(), &task, None, None, &ctx).map_err(|e| e.to_string())?;
    let pd = partial_dependence_data(&m, task.data(), &["x1"], &PdOptions { gridsize: 25, ..Default::default() }, &ctx)
        .map_err(|e| e.to_string())?;
    let (x, y) = (col(&pd, "x1"), col(&pd, "y"));
    let worst_slope = (1..x.len())
        .map(|i| (y[i] - y[i - 1]) / (x[i] - x[i - 1]))
        .max_by(|a, b| (a - 3.0).abs().total_cmp(&(b - 3.0).abs()))
        .unwrap();
    let fa = functional_anova_data(&m, task.data(), &["x1", "x2"], 2, &PdOptions::default(), &ctx).map_err(|e| e.to_string())?;
    let effect = fa.column_index("y").unwrap();
    let pair = fa
        .rows
        .iter()
        .filter(|r| matches!(&r[0], Cell::Str(s) if s.contains(':')))
        .map(|r| r[effect].as_f64().unwrap().abs())
        .fold(0.0, f64::max);
    ensure(fa.rows.iter().any(|r| r[0] == Cell::Str("x1:x2".into())), || "no pairwise effect rows".into())?;
    Ok((worst_slope, pair))
}

/// Largest deviation of the derivative curve of a linear model from its
/// first value.
pub fn pd_derivative_spread() -> Result<f64, String> {
    let task = linear_regr_task(150, 0.3, 11);
    let ctx = Ctx::new(2);
    let m = train(&learner("regr.ols").unwrap(), &task, None, None, &ctx).map_err(|e| e.to_string())?;
    let d = partial_dependence_data(&m, task.data(), &["x2"], &PdOptions { derivative: true, gridsize: 30, ..Default::default() }, &ctx)
        .map_err(|e| e.to_string())?;
    let v = col(&d, "y");
    Ok(v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max))
}

fn logistic_problem(seed: u64) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 120;
    let truth = [0.4, 1.2, -0.8, 0.5, 0.0];
    let x = DMatrix::from_fn(n, 5, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta: f64 = (0..5).map(|j| x[(i, j)] * truth[j]).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            f64::from(rng.random::<f64>() < p)
        })
        .collect();
    let w = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    (x, y, w)
}

/// Gradient sup-norm at the IRLS solution of a 5-coefficient weighted
/// problem, and the largest gap between the analytic gradient and central
/// differences of the log-likelihood at a few off-optimum points.
pub fn irls_gradient() -> Result<(f64, f64), String> {
    let (x, y, w) = logistic_problem(3);
    let (beta, converged, _) = irls(&x, &y, &w, 100, 1e-12).map_err(|e| e.to_string())?;
    ensure(converged, || "IRLS did not converge".into())?;
    let at_opt = gradient(&x, &y, &w, &beta).amax();
    let loglik = |b: &DVector<f64>| -0.5 * deviance(&x, &y, &w, b);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut gap: f64 = 0.0;
    for _ in 0..5 {
        let b = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let g = gradient(&x, &y, &w, &b);
        for j in 0..5 {
            let h = 1e-5;
            let (mut up, mut down) = (b.clone(), b.clone());
            up[j] += h;
            down[j] -= h;
            gap = gap.max(((loglik(&up) - loglik(&down)) / (2.0 * h) - g[j]).abs());
        }
    }
    Ok((at_opt, gap))
}

fn sq_objective(x: &[Vec<f64>], centers: &[Vec<f64>]) -> f64 {
    x.iter()
        .map(|r| {
            centers
                .iter()
                .map(|c| r.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Runs Lloyd iterations on `instances` random data sets and returns the
/// number of traces that ever increase. Also checks the trace against a
/// direct recomputation of the final objective.
pub fn kmeans_monotone(instances: u64) -> Result<usize, String> {
    let mut bad = 0;
    for s in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let n = rng.random_range(10..80);
        let p = rng.random_range(1..5);
        let k = rng.random_range(1..7);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..p).map(|_| rng.random_range(-3.0..3.0) + (i % 3) as f64 * 2.0).collect())
            .collect();
        let init: Vec<Vec<f64>> = (0..k).map(|_| x[rng.random_range(0..n)].clone()).collect();
        let (centers, trace) = lloyd(&x, init, 100);
        let tol = 1e-9 * trace[0].max(1.0);
        if trace.windows(2).any(|w| w[1] > w[0] + tol) {
            bad += 1;
        }
        let last = *trace.last().unwrap();
        ensure((last - sq_objective(&x, &centers)).abs() <= tol, || format!("instance {s}: trace ends at {last}"))?;
    }
    let data = Dataset::new(vec![
        Column::numeric("a", (0..30).map(|i| (i % 5) as f64).collect()),
        Column::numeric("b", (0..30).map(|i| (i * 7 % 11) as f64).collect()),
    ])
    .unwrap();
    let task = Task::cluster("pts", data).map_err(|e| e.to_string())?;
    let l = learner("cluster.kmeans").unwrap();
    let m = train(&l, &task, None, None, &Ctx::new(4)).map_err(|e| e.to_string())?;
    let km = m.find::<KMeansModel>().ok_or("no k-means model")?;
    if km.objective_trace.windows(2).any(|w| w[1] > w[0] + 1e-9) {
        bad += 1;
    }
    Ok(bad)
}
