//! Randomized invariant checks shared by the property tests and the
//! acceptance run. Every check takes its case count and a fixed seed.

use std::collections::BTreeSet;

use mlkit::datasets::{costsens_task, gaussian_classif_task, imbalanced_task, iris_task};
use mlkit::featsel::{select_features, FeatSelControl};
use mlkit::impute::{impute, reimpute, DummyType, ImputeMethod, ImputeSpec};
use mlkit::measures::auc_score;
use mlkit::multilabel::label_prediction;
use mlkit::prediction::{apply_threshold, Response, Truth};
use mlkit::resample::make_resample_instance;
use mlkit::task::subset_task;
use mlkit::tune::pareto_front;
use mlkit::wrappers::{make_bagging_wrapper, smote, BaggingOptions, EnsembleModel};
use mlkit::{
    get_measure, learner, predict_newdata, resample, train, Column, ColumnKind, Ctx, Dataset, Prediction, PredictType, ResampleDesc,
    ResampleOptions, TaskKind,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestRunner};

const SEED: u64 = 0x5eed_2024;

fn check<S: Strategy>(cases: u32, strategy: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let cfg = Config { cases, rng_seed: RngSeed::Fixed(SEED), failure_persistence: None, ..Config::default() };
    TestRunner::new(cfg).run(&strategy, f).map_err(|e| e.to_string())
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

fn class_pred(k: usize, truth: Vec<u32>, resp: Vec<u32>) -> Prediction {
    Prediction {
        kind: TaskKind::Classif,
        predict_type: PredictType::Response,
        classes: (0..k).map(|i| format!("c{i}")).collect(),
        positive: (k == 2).then_some(0),
        id: None,
        truth: Truth::Class(truth.into_iter().map(Some).collect()),
        response: Response::Class(resp.into_iter().map(Some).collect()),
        prob: None,
        se: None,
        iter: None,
        set: None,
        threshold: None,
        predict_time: None,
    }
}

/// Test sets of every CV block partition the rows, training sets are their
/// complements; holdout/subsample split the rows; bootstrap tests on the
/// out-of-bag rows.
pub fn resampling_partitions(cases: u32) -> Result<(), String> {
    check(cases, (5usize..80, 2usize..6, 0usize..6, 0.2f64..0.8, any::<u64>()), |(n, folds, method, split, seed)| {
        let all: Vec<usize> = (0..n).collect();
        let desc = match method {
            0 => ResampleDesc::cv(folds),
            1 => ResampleDesc::rep_cv(folds, 3),
            2 => ResampleDesc::holdout().with_split(split),
            3 => ResampleDesc::subsample(4).with_split(split),
            4 => ResampleDesc::bootstrap(4),
            _ => ResampleDesc::loo(),
        };
        let inst = make_resample_instance(&desc, None, n, &Ctx::new(seed)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(inst.n_iters(), desc.n_iters(n));
        for (tr, te) in inst.train_inds.iter().zip(&inst.test_inds) {
            prop_assert!(te.iter().all(|&i| i < n) && tr.iter().all(|&i| i < n));
            if method == 4 {
                prop_assert_eq!(tr.len(), n);
                let inbag: BTreeSet<usize> = tr.iter().copied().collect();
                let oob: Vec<usize> = all.iter().copied().filter(|i| !inbag.contains(i)).collect();
                prop_assert_eq!(sorted(te), oob);
            } else {
                let mut u = tr.clone();
                u.extend(te);
                prop_assert_eq!(sorted(&u), all.clone(), "train and test must split the rows");
            }
        }
        if method <= 1 || method == 5 {
            let block = if method == 5 { n } else { folds };
            for rep in inst.test_inds.chunks(block) {
                let u: Vec<usize> = rep.iter().flatten().copied().collect();
                prop_assert_eq!(sorted(&u), all.clone(), "test sets of one repetition must partition the rows");
                let (lo, hi) = (rep.iter().map(Vec::len).min().unwrap(), rep.iter().map(Vec::len).max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }
        if method == 2 || method == 3 {
            let expect = (split * n as f64).round_ties_even() as usize;
            prop_assert_eq!(inst.train_inds[0].len(), expect);
        }
        Ok(())
    })
}

/// Stratified CV keeps per-class fold counts within one of each other.
pub fn stratified_cv_balance(cases: u32) -> Result<(), String> {
    check(cases, (4usize..20, 8usize..40, 2usize..5, any::<u64>()), |(n_pos, n_neg, folds, seed)| {
        let task = imbalanced_task(n_pos, n_neg, seed);
        let inst = make_resample_instance(&ResampleDesc::cv(folds).stratified(), Some(&task), task.size(), &Ctx::new(seed))
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let codes = task.class_codes().unwrap();
        for c in 0..2u32 {
            let counts: Vec<usize> = inst.test_inds.iter().map(|te| te.iter().filter(|&&i| codes[i] == Some(c)).count()).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1, "{:?}", counts);
        }
        Ok(())
    })
}

fn prob_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// The threshold rule picks the largest p/t (binary: the positive-class rule),
/// is unchanged by scaling all thresholds, and reduces to argmax at equal
/// thresholds.
pub fn threshold_rule(cases: u32) -> Result<(), String> {
    let s = (2usize..6).prop_flat_map(|k| (prob_row(k), prop::collection::vec(0.05f64..2.0, k), -8i32..8));
    check(cases, s, |(p, t, e)| {
        let k = p.len();
        let pos = (k == 2).then_some(0);
        let got = apply_threshold(&p, &t, pos).unwrap() as usize;
        let expect = if k == 2 {
            if p[0] * t[1] >= p[1] * t[0] { 0 } else { 1 }
        } else {
            let r: Vec<f64> = p.iter().zip(&t).map(|(a, b)| a / b).collect();
            let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            r.iter().position(|&x| x == m).unwrap()
        };
        prop_assert_eq!(got, expect);
        let c = 2f64.powi(e);
        let scaled: Vec<f64> = t.iter().map(|x| x * c).collect();
        prop_assert_eq!(apply_threshold(&p, &scaled, pos).unwrap() as usize, got);
        let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let argmax = p.iter().position(|&x| x == m).unwrap();
        prop_assert_eq!(apply_threshold(&p, &vec![1.0 / k as f64; k], pos).unwrap() as usize, argmax);
        Ok(())
    })
}

/// Probability predictions of every probabilistic classifier are rows in
/// the simplex.
pub fn prob_rows_sum_to_one(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 0usize..5, any::<bool>()), |(seed, which, multi)| {
        let class = ["classif.lda", "classif.knn", "classif.cart", "classif.logreg", "classif.featureless"][which];
        let multi = multi && class != "classif.logreg";
        let task = if multi { iris_task() } else { gaussian_classif_task(40, 3, seed) };
        let ctx = Ctx::new(seed);
        let inst = make_resample_instance(&ResampleDesc::holdout(), Some(&task), task.size(), &ctx).unwrap();
        let l = learner(class).unwrap().set_predict_type(PredictType::Prob).unwrap();
        let model = train(&l, &task, Some(&inst.train_inds[0]), None, &ctx).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let pred = predict_newdata(&model, task.data(), &ctx).unwrap();
        for row in pred.prob().unwrap() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{:?}", row);
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        Ok(())
    })
}

pub fn acc_plus_mmce(cases: u32) -> Result<(), String> {
    let s = (2usize..6, 1usize..60).prop_flat_map(|(k, n)| {
        (Just(k), prop::collection::vec(0..k as u32, n), prop::collection::vec(0..k as u32, n))
    });
    check(cases, s, |(k, truth, resp)| {
        let wrong = truth.iter().zip(&resp).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64;
        let pred = class_pred(k, truth, resp);
        let acc = get_measure("acc").unwrap().compute(&pred, None, None).unwrap();
        let mmce = get_measure("mmce").unwrap().compute(&pred, None, None).unwrap();
        prop_assert!((acc + mmce - 1.0).abs() < 1e-12);
        prop_assert!((mmce - wrong).abs() < 1e-12);
        Ok(())
    })
}

/// AUC equals the pairwise concordance and does not change under a
/// strictly increasing transform of the scores.
pub fn auc_monotone_invariance(cases: u32) -> Result<(), String> {
    let s = (2usize..60).prop_flat_map(|n| {
        (prop::collection::vec(-1000i32..1000, n), prop::collection::vec(any::<bool>(), n), 0.1f64..3.0, 0.1f64..3.0)
    });
    check(cases, s, |(raw, mut labels, a, b)| {
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = raw.iter().map(|&r| r as f64 / 100.0).collect();
        let warped: Vec<f64> = scores.iter().map(|x| a * x.powi(3) + b * x + 7.0).collect();
        let auc = auc_score(&scores, &labels);
        prop_assert!((auc - auc_score(&warped, &labels)).abs() < 1e-12);
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &pi) in labels.iter().enumerate() {
            for (j, &pj) in labels.iter().enumerate() {
                if pi && !pj {
                    den += 1.0;
                    num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        prop_assert!((auc - num / den).abs() < 1e-12);
        Ok(())
    })
}

/// The Pareto front equals the set of points no other point dominates,
/// with repeated vectors reported once.
pub fn pareto_front_oracle(cases: u32) -> Result<(), String> {
    let s = (1usize..40, 2usize..4).prop_flat_map(|(n, d)| {
        (prop::collection::vec(prop::collection::vec(0i32..6, d), n), prop::collection::vec(any::<bool>(), d))
    });
    check(cases, s, |(raw, minimize)| {
        let pts: Vec<Vec<f64>> = raw.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
        let better = |a: f64, b: f64, min: bool| if min { a < b } else { a > b };
        let dominates = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).zip(&minimize).all(|((x, y), &m)| !better(*y, *x, m))
                && a.iter().zip(b).zip(&minimize).any(|((x, y), &m)| better(*x, *y, m))
        };
        let oracle: Vec<usize> = (0..pts.len())
            .filter(|&i| !pts.iter().any(|q| dominates(q, &pts[i])) && !pts[..i].contains(&pts[i]))
            .collect();
        prop_assert_eq!(sorted(&pareto_front(&pts, &minimize)), oracle);
        Ok(())
    })
}

/// Exhaustive search over 4 features returns the best of all 16 subsets,
/// each scored independently on the same resampling instance.
pub fn exhaustive_featsel_optimal(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        let task = gaussian_classif_task(36, 4, seed);
        let ctx = Ctx::new(seed);
        let inst = make_resample_instance(&ResampleDesc::cv(3), Some(&task), task.size(), &ctx).unwrap();
        let lda = learner("classif.lda").unwrap();
        let mmce = get_measure("mmce").unwrap();
        let res = select_features(&lda, &task, inst.clone(), &FeatSelControl::exhaustive(), std::slice::from_ref(&mmce), &ctx)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let feats = task.feature_names();
        let opts = ResampleOptions::new().measures(vec![mmce.clone()]).keep_pred(false);
        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let sub: Vec<&String> = feats.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, f)| f).collect();
            let v = if sub.is_empty() {
                resample(&learner("classif.featureless").unwrap(), &task, inst.clone(), &opts, &ctx).unwrap().first_aggr()
            } else {
                let t = subset_task(&task, None, Some(&sub)).unwrap();
                resample(&lda, &t, inst.clone(), &opts, &ctx).unwrap().first_aggr()
            };
            best = best.min(v);
        }
        prop_assert_eq!(res.opt_path.entries.len(), 16);
        prop_assert!((res.y["mmce.test.mean"] - best).abs() < 1e-12, "{} vs {}", res.y["mmce.test.mean"], best);
        Ok(())
    })
}

fn data_with_missings() -> impl Strategy<Value = (Vec<Option<f64>>, Vec<Option<u32>>)> {
    (3usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::option::weighted(0.7, -50i32..50), n).prop_map(|v| v.into_iter().map(|x| x.map(|i| i as f64 / 4.0)).collect()),
            prop::collection::vec(prop::option::weighted(0.7, 0u32..3), n),
        )
    })
}

/// Imputing fills every gap with the learned value, keeps observed cells,
/// adds correct indicators, and replaying the description reproduces the
/// result.
pub fn impute_reimpute(cases: u32) -> Result<(), String> {
    check(cases, (data_with_missings(), any::<u64>()), |((xs, gs), seed)| {
        prop_assume!(xs.iter().any(Option::is_some) && gs.iter().any(Option::is_some));
        let levels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let data = Dataset::new(vec![
            Column::numeric("x", xs.iter().map(|v| v.unwrap_or(f64::NAN)).collect()),
            Column::factor_codes("g", gs.clone(), levels).unwrap(),
        ])
        .unwrap();
        let spec = ImputeSpec::new()
            .class(ColumnKind::Numeric, ImputeMethod::Mean)
            .class(ColumnKind::Factor, ImputeMethod::Mode)
            .dummy_cols(&["x", "g"])
            .dummy_type(DummyType::Numeric);
        let ctx = Ctx::new(seed);
        let (out, desc) = impute(&data, &spec, &ctx).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let obs: Vec<f64> = xs.iter().flatten().copied().collect();
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let mut counts = [0usize; 3];
        for g in gs.iter().flatten() {
            counts[*g as usize] += 1;
        }
        let mode = (0..3).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap() as u32;
        let x = out.column("x").unwrap().as_numeric().unwrap();
        let g = out.column("g").unwrap().codes().unwrap();
        for i in 0..xs.len() {
            prop_assert_eq!(x[i], xs[i].unwrap_or(mean));
            prop_assert_eq!(g[i], Some(gs[i].unwrap_or(mode)));
            prop_assert_eq!(out.column("x.dummy").unwrap().as_numeric().unwrap()[i], xs[i].is_none() as u8 as f64);
            prop_assert_eq!(out.column("g.dummy").unwrap().as_numeric().unwrap()[i], gs[i].is_none() as u8 as f64);
        }
        let again = reimpute(&data, &desc, &ctx).unwrap();
        prop_assert_eq!(&again, &out);
        let clean = out.select(&["x", "g"]).unwrap();
        let (twice, _) = impute(&clean, &spec, &ctx).unwrap();
        prop_assert_eq!(twice.select(&["x", "g"]).unwrap(), clean);
        Ok(())
    })
}

/// Bagged class probabilities are member vote shares: counts are whole
/// numbers, sum to the ensemble size and match the members' own labels.
pub fn bagging_votes(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 2usize..8, any::<bool>()), |(seed, iters, multi)| {
        let task = if multi { iris_task() } else { gaussian_classif_task(40, 2, seed) };
        let ctx = Ctx::new(seed);
        let base = learner("classif.cart").unwrap();
        let bag = make_bagging_wrapper(base, BaggingOptions { iters, replace: true, size: None, feats: 1.0 })
            .unwrap()
            .set_predict_type(PredictType::Prob)
            .unwrap();
        let model = train(&bag, &task, None, None, &ctx).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let pred = predict_newdata(&model, task.data(), &ctx).unwrap();
        let members = &model.find::<EnsembleModel>().expect("ensemble").members;
        prop_assert_eq!(members.len(), iters);
        let k = task.class_levels().len();
        let mut votes = vec![vec![0usize; k]; task.size()];
        for m in members {
            let p = predict_newdata(m, task.data(), &ctx).unwrap();
            for (row, r) in votes.iter_mut().zip(p.class_response().unwrap()) {
                row[r.unwrap() as usize] += 1;
            }
        }
        for (row, v) in pred.prob().unwrap().iter().zip(&votes) {
            let counts: Vec<f64> = row.iter().map(|p| p * iters as f64).collect();
            prop_assert!(counts.iter().all(|c| (c - c.round()).abs() < 1e-9));
            prop_assert!((counts.iter().sum::<f64>() - iters as f64).abs() < 1e-9);
            for (c, &want) in counts.iter().zip(v) {
                prop_assert!((c - want as f64).abs() < 1e-9);
            }
        }
        Ok(())
    })
}

/// Every synthetic SMOTE row is a minority-class point on a segment between
/// two original minority points.
pub fn smote_betweenness(cases: u32) -> Result<(), String> {
    check(cases, (4usize..14, 30usize..60, 1.0f64..5.0, 1usize..4, any::<u64>()), |(n_pos, n_neg, rate, nn, seed)| {
        prop_assume!(nn < n_pos);
        let task = imbalanced_task(n_pos, n_neg, seed);
        let out = smote(&task, rate, nn, &Ctx::new(seed)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let n = task.size();
        let n_new = ((rate - 1.0) * n_pos as f64).round_ties_even() as usize;
        prop_assert_eq!(out.size(), n + n_new);
        let rows = |d: &Dataset| d.numeric_rows(&["x1", "x2"]).unwrap();
        let (orig, all) = (rows(task.data()), rows(out.data()));
        let minority: Vec<&Vec<f64>> = orig.iter().take(n_pos).collect();
        let codes = out.class_codes().unwrap();
        for (i, s) in all.iter().enumerate().skip(n) {
            prop_assert_eq!(codes[i], Some(0));
            let on_segment = minority.iter().any(|a| {
                minority.iter().any(|b| {
                    let d: Vec<f64> = (0..2).map(|j| b[j] - a[j]).collect();
                    let j = if d[0].abs() >= d[1].abs() { 0 } else { 1 };
                    if d[j] == 0.0 {
                        return (0..2).all(|q| (s[q] - a[q]).abs() < 1e-9);
                    }
                    let t = (s[j] - a[j]) / d[j];
                    (-1e-9..=1.0 + 1e-9).contains(&t) && (0..2).all(|q| (a[q] + t * d[q] - s[q]).abs() < 1e-9)
                })
            });
            prop_assert!(on_segment, "row {} = {:?} is not between minority points", i, s);
        }
        Ok(())
    })
}

/// Hamming loss is the mean over labels of the per-label error rate.
pub fn hamloss_is_mean_label_mmce(cases: u32) -> Result<(), String> {
    let s = (1usize..40, 1usize..6).prop_flat_map(|(n, l)| {
        (
            prop::collection::vec(prop::collection::vec(any::<bool>(), l), n),
            prop::collection::vec(prop::collection::vec(any::<bool>(), l), n),
        )
    });
    check(cases, s, |(truth, resp)| {
        let l = truth[0].len();
        let pred = Prediction {
            kind: TaskKind::Multilabel,
            predict_type: PredictType::Response,
            classes: (0..l).map(|j| format!("l{j}")).collect(),
            positive: None,
            id: None,
            truth: Truth::Labels(truth),
            response: Response::Labels(resp.into_iter().map(Some).collect()),
            prob: None,
            se: None,
            iter: None,
            set: None,
            threshold: None,
            predict_time: None,
        };
        let ham = get_measure("multilabel.hamloss").unwrap().compute(&pred, None, None).unwrap();
        let mmce = get_measure("mmce").unwrap();
        let per: f64 = (0..l).map(|j| mmce.compute(&label_prediction(&pred, j).unwrap(), None, None).unwrap()).sum::<f64>() / l as f64;
        prop_assert!((ham - per).abs() < 1e-12);
        Ok(())
    })
}

/// The misclassification penalty is nonnegative and zero exactly when each
/// row picks a cheapest class.
pub fn mcp_nonnegative(cases: u32) -> Result<(), String> {
    let s = (2usize..50, any::<u64>()).prop_flat_map(|(n, seed)| (Just(seed), prop::collection::vec(0u32..3, n)));
    check(cases, s, |(seed, resp)| {
        let n = resp.len();
        let task = costsens_task(n, seed);
        let costs = task.costs().unwrap().clone();
        let mk = |r: Vec<u32>| Prediction {
            kind: TaskKind::Costsens,
            predict_type: PredictType::Response,
            classes: costs.classes.clone(),
            positive: None,
            id: None,
            truth: Truth::None,
            response: Response::Class(r.into_iter().map(Some).collect()),
            prob: None,
            se: None,
            iter: None,
            set: None,
            threshold: None,
            predict_time: None,
        };
        let mcp = get_measure("mcp").unwrap();
        let v = mcp.compute(&mk(resp.clone()), Some(&task), None).unwrap();
        prop_assert!(v >= -1e-12);
        let regret: f64 = costs
            .rows
            .iter()
            .zip(&resp)
            .map(|(row, &r)| row[r as usize] - row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / n as f64;
        prop_assert!((v - regret).abs() < 1e-12);
        let best: Vec<u32> = costs
            .rows
            .iter()
            .map(|row| {
                let m = row.iter().copied().fold(f64::INFINITY, f64::min);
                row.iter().position(|&c| c == m).unwrap() as u32
            })
            .collect();
        prop_assert!(mcp.compute(&mk(best), Some(&task), None).unwrap().abs() < 1e-12);
        Ok(())
    })
}

/// Every suite with its name, for a combined run.
#[allow(dead_code)]
pub fn all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("resampling partitions", resampling_partitions(cases)),
        ("stratified cv balance", stratified_cv_balance(cases)),
        ("threshold argmax and scale invariance", threshold_rule(cases)),
        ("prob rows sum to 1", prob_rows_sum_to_one(cases)),
        ("acc + mmce = 1", acc_plus_mmce(cases)),
        ("auc monotone invariance", auc_monotone_invariance(cases)),
        ("pareto front vs pairwise oracle", pareto_front_oracle(cases)),
        ("exhaustive featsel optimality (p = 4)", exhaustive_featsel_optimal(cases)),
        ("impute/reimpute idempotence and dummies", impute_reimpute(cases)),
        ("bagging vote conservation", bagging_votes(cases)),
        ("smote betweenness", smote_betweenness(cases)),
        ("hamloss = mean per-label mmce", hamloss_is_mean_label_mmce(cases)),
        ("mcp >= 0, 0 at argmin", mcp_nonnegative(cases)),
    ]
}
