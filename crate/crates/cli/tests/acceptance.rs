//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

#[path = "../../core/tests/props/mod.rs"]
mod props;

#[path = "../../core/tests/numerics/mod.rs"]
mod numerics;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mlkit::costsens::{multiclass_cost_thresholds, theoretical_threshold, theoretical_weight, CostMatrix};
use mlkit::datasets::{imbalanced_task, iris_task};
use mlkit::stats::{critical_difference, critical_q, friedman_test, CdTest, PerfMatrix};
use mlkit::tune::TuneControl;
use mlkit::wrappers::{oversample, smote, undersample};
use mlkit::{get_measure, learner, resample, Ctx, Param, ParamSet, ResampleDesc, ResampleOptions, Task, Trafo};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn quick_start() -> Outcome {
    let task = iris_task();
    let lda = learner("classif.lda").unwrap();
    let opts = ResampleOptions::new().measures(vec![get_measure("mmce").unwrap()]);
    let start = Instant::now();
    let mut vals = Vec::new();
    for seed in 1..=10 {
        let rr = resample(&lda, &task, ResampleDesc::cv(3).stratified(), &opts, &Ctx::new(seed)).map_err(|e| e.to_string())?;
        vals.push(rr.aggr["mmce.test.mean"]);
    }
    let secs = start.elapsed().as_secs_f64();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    ensure(vals.iter().all(|v| (0.0..=0.06).contains(v)), || format!("per-seed mmce {vals:?}"))?;
    ensure(secs < 2.0, || format!("took {secs:.2}s"))?;
    Ok(format!("mean mmce {mean:.4} over seeds 1..10, min {:.4}, max {:.4}, {secs:.3}s", min(&vals), max(&vals)))
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn binary_costs() -> Outcome {
    let costs = CostMatrix::new(&["Bad", "Good"], vec![vec![0.0, 5.0], vec![1.0, 0.0]]).map_err(|e| e.to_string())?;
    let t = theoretical_threshold(&costs, "Bad").map_err(|e| e.to_string())?;
    // c(Good, Bad) / (c(Good, Bad) + c(Bad, Good)) = 1 / (1 + 5)
    let exact = 1.0 / 6.0;
    ensure((t - exact).abs() < 1e-12, || format!("threshold {t}"))?;
    let w = theoretical_weight(t, 0.5).map_err(|e| e.to_string())?;
    ensure((w - 5.0).abs() < 1e-12, || format!("weight {w}"))?;
    Ok(format!("threshold {t:.12}, weight {w}"))
}

fn multiclass_costs() -> Outcome {
    // filled column by column, as printed
    let cols = [[0.0, 5.0, 10.0], [30.0, 0.0, 8.0], [80.0, 4.0, 0.0]];
    let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| cols[j][i]).collect()).collect();
    let m = CostMatrix::new(&["1", "2", "3"], rows).map_err(|e| e.to_string())?;
    let th = multiclass_cost_thresholds(&m).map_err(|e| e.to_string())?;
    let want = [0.01818182, 0.22222222, 0.11111111];
    ensure(th.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-7), || format!("{th:?}"))?;
    Ok(format!("{:.8} {:.8} {:.8}", th[0], th[1], th[2]))
}

fn counts(t: &Task) -> (usize, usize) {
    let levels = t.class_levels();
    let c = t.class_counts();
    let at = |name: &str| c[levels.iter().position(|l| l == name).unwrap()];
    (at("pos"), at("neg"))
}

fn sampling_counts() -> Outcome {
    let task = imbalanced_task(100, 5000, 1);
    ensure(counts(&task) == (100, 5000), || format!("base {:?}", counts(&task)))?;
    let ctx = Ctx::new(5);
    let over = counts(&oversample(&task, 8.0, None, &ctx).map_err(|e| e.to_string())?);
    let under = counts(&undersample(&task, 1.0 / 8.0, None, &ctx).map_err(|e| e.to_string())?);
    let sm = counts(&smote(&task, 8.0, 5, &ctx).map_err(|e| e.to_string())?);
    ensure(over == (800, 5000) && under == (100, 625) && sm == (800, 5000), || {
        format!("over {over:?}, under {under:?}, smote {sm:?}")
    })?;
    Ok(format!("over {over:?}, under {under:?}, smote {sm:?}"))
}

fn grid_size() -> Outcome {
    let ctx = Ctx::new(1);
    let ps = ParamSet::new(vec![Param::discrete("a", vec!["p", "q", "r", "s"]), Param::discrete("b", vec![1i64, 2, 3, 4])])
        .map_err(|e| e.to_string())?;
    let design = TuneControl::grid(10).design(&ps, &ctx).map_err(|e| e.to_string())?;
    let distinct: std::collections::BTreeSet<String> = design.iter().map(|p| format!("{p:?}")).collect();
    ensure(design.len() == 16 && distinct.len() == 16, || format!("{} points, {} distinct", design.len(), distinct.len()))?;

    let ps = ParamSet::new(vec![Param::numeric("c", -10.0, 10.0).with_trafo(Trafo::Pow10)]).map_err(|e| e.to_string())?;
    let design = TuneControl::grid(15).design(&ps, &ctx).map_err(|e| e.to_string())?;
    let mut xs: Vec<f64> = design.iter().map(|p| p["c"].as_f64().unwrap()).collect();
    let mut vals: Vec<f64> = design.iter().map(|p| ps.trafo(p)["c"].as_f64().unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    vals.sort_by(f64::total_cmp);
    ensure(vals.len() == 15, || format!("{} points", vals.len()))?;
    let mut worst_rel: f64 = 0.0;
    for (i, (x, v)) in xs.iter().zip(&vals).enumerate() {
        let e = -10.0 + 20.0 * i as f64 / 14.0;
        ensure((x - e).abs() < 1e-9, || format!("point {i}: exponent {x} vs {e}"))?;
        worst_rel = worst_rel.max((v - 10f64.powf(e)).abs() / 10f64.powf(e));
    }
    ensure(worst_rel < 1e-9, || format!("relative error {worst_rel:e}"))?;
    Ok(format!("16 discrete points; 15 transformed values, max relative error {worst_rel:.1e}"))
}

fn friedman() -> Outcome {
    // rank matrix of lda / rpart / randomForest on five tasks, mmce minimized
    let ranks = [[1.0, 3.0, 2.0, 1.0, 2.0], [3.0, 2.0, 3.0, 3.0, 3.0], [2.0, 1.0, 1.0, 2.0, 1.0]];
    let values = ranks.iter().map(|r| r.iter().map(|v| 0.05 * v).collect()).collect();
    let m = PerfMatrix::new(
        "mmce.test.mean",
        true,
        vec!["lda".into(), "rpart".into(), "randomForest".into()],
        (1..=5).map(|t| format!("task{t}")).collect(),
        values,
    )
    .map_err(|e| e.to_string())?;
    let f = friedman_test(&m).map_err(|e| e.to_string())?;
    // chi2 with 2 df has survival exp(-x / 2)
    let oracle_p = (-f.statistic / 2.0).exp();
    ensure((f.statistic - 5.2).abs() < 1e-12 && f.df == 2, || format!("statistic {}, df {}", f.statistic, f.df))?;
    ensure((f.p_value - 0.0743).abs() <= 0.0005 && (f.p_value - oracle_p).abs() < 1e-10, || format!("p {}", f.p_value))?;
    Ok(format!("chi2 {}, df {}, p {:.5}", f.statistic, f.df, f.p_value))
}

fn cd_scaling() -> Outcome {
    let t = CdTest::Nemenyi;
    let mut worst: f64 = 0.0;
    for k in 2..=10 {
        for alpha in [0.01, 0.05, 0.1] {
            let scaled: Vec<f64> = [2, 8, 32]
                .iter()
                .map(|&n| critical_difference(&t, k, n, alpha).map(|cd| cd * (n as f64).sqrt()))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            worst = worst.max(max(&scaled) - min(&scaled));
        }
    }
    ensure(worst < 1e-12, || format!("cd * sqrt(N) varies by {worst:e}"))?;
    let q = critical_q(&t, 3, 0.1).map_err(|e| e.to_string())?;
    let cd = critical_difference(&t, 3, 5, 0.1).map_err(|e| e.to_string())?;
    ensure((cd - q * 0.4f64.sqrt()).abs() < 1e-12, || format!("cd {cd} vs q {q}"))?;
    Ok(format!("max spread {worst:.1e}; cd(3, 5, 0.1) = {cd:.6} with q = {q}"))
}

fn property_suites() -> Outcome {
    let results = props::all(256);
    let failed: Vec<String> = results.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok(format!("{} suites x 256 cases", results.len()))
}

fn numerical_checks() -> Outcome {
    let (slope, pair) = numerics::pd_slope_and_pair_effect()?;
    let spread = numerics::pd_derivative_spread()?;
    let (grad, fd) = numerics::irls_gradient()?;
    let bad = numerics::kmeans_monotone(100)?;
    let detail = format!(
        "pd slope {slope:.9}, pair effect {pair:.1e}, derivative spread {spread:.1e}, irls gradient {grad:.1e}, fd gap {fd:.1e}, increasing k-means traces {bad}"
    );
    ensure((slope - 3.0).abs() < 1e-6 && pair < 1e-6 && spread < 1e-8 && grad < 1e-6 && fd < 1e-4 && bad == 0, || detail.clone())?;
    Ok(detail)
}

const BENCH: &str = r#"{
    "seed": 42,
    "tasks": [{"id": "iris", "builtin": {"name": "iris"}},
              {"id": "gauss", "builtin": {"name": "gaussian", "n": 120, "p": 4, "seed": 2}}],
    "learners": [{"class": "classif.cart", "predict_type": "prob",
                  "wrappers": [{"type": "bagging", "iters": 5}]},
                 {"class": "classif.knn", "hyperpars": {"k": 5}}],
    "resampling": {"method": "repcv", "iters": 3, "reps": 2},
    "measures": ["mmce", "acc"]
}"#;

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    out.insert(rel, std::fs::read(&p).unwrap());
                }
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("bench.json");
    std::fs::write(&cfg, BENCH).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for w in [1, 4, 8] {
        let out = dir.path().join(format!("w{w}"));
        let res = Command::new(env!("CARGO_BIN_EXE_mlkit"))
            .args(["benchmark", "--level", "benchmark", "--workers", &w.to_string(), "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env_remove("MLKIT_SEED")
            .env_remove("MLKIT_WORKERS")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(res.status.success(), || format!("workers {w}: {}", String::from_utf8_lossy(&res.stderr)))?;
        runs.push(files(&out));
    }
    ensure(runs[0].len() >= 8, || format!("only {} files written", runs[0].len()))?;
    for (w, r) in [4, 8].iter().zip(&runs[1..]) {
        ensure(r.keys().eq(runs[0].keys()), || format!("workers {w} wrote a different file set"))?;
        for (name, bytes) in r {
            ensure(*bytes == runs[0][name], || format!("{name} differs between workers 1 and {w}"))?;
        }
    }
    Ok(format!("{} result files identical for workers 1, 4, 8", runs[0].len()))
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quick-start iris lda mmce", quick_start),
        ("binary cost threshold and weight", binary_costs),
        ("multiclass cost thresholds", multiclass_costs),
        ("over/under/smote class counts", sampling_counts),
        ("grid design size and trafo", grid_size),
        ("friedman statistic", friedman),
        ("critical difference scaling", cd_scaling),
        ("property suites", property_suites),
        ("numerical checks", numerical_checks),
        ("benchmark determinism across workers", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match res {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(e) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {e}", i + 1);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    println!("acceptance run took {secs:.1}s");
    assert!(secs < 60.0, "acceptance run took {secs:.1}s");
    assert_eq!(failures, 0, "{failures} criteria failed");
}
