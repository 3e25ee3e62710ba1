//! Rank-based comparison of learners over several tasks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Cell, Table};
use crate::util::average_ranks;

/// Aggregated performance of learners (rows) on tasks (columns) for one
/// measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfMatrix {
    pub measure: String,
    pub minimize: bool,
    pub learners: Vec<String>,
    pub tasks: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl PerfMatrix {
    pub fn new(measure: &str, minimize: bool, learners: Vec<String>, tasks: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != learners.len() || values.iter().any(|r| r.len() != tasks.len()) {
            return Err(Error::arg("performance matrix shape does not match the learner and task ids"));
        }
        Ok(PerfMatrix { measure: measure.into(), minimize, learners, tasks, values })
    }

    fn dims(&self) -> Result<(usize, usize)> {
        let (k, n) = (self.learners.len(), self.tasks.len());
        if k < 2 || n < 2 {
            return Err(Error::arg(format!("rank statistics need at least 2 learners and 2 tasks, got {k} and {n}")));
        }
        Ok((k, n))
    }
}

/// Per-task ranks (learner × task); the best learner gets rank 1 and ties
/// share the average rank. Missing values rank last.
pub fn rank_matrix(m: &PerfMatrix) -> Vec<Vec<f64>> {
    let k = m.learners.len();
    let mut out = vec![vec![0.0; m.tasks.len()]; k];
    for t in 0..m.tasks.len() {
        let col: Vec<f64> = (0..k)
            .map(|l| {
                let v = m.values[l][t];
                if v.is_nan() {
                    f64::INFINITY
                } else if m.minimize {
                    v
                } else {
                    -v
                }
            })
            .collect();
        for (l, r) in average_ranks(&col).into_iter().enumerate() {
            out[l][t] = r;
        }
    }
    out
}

pub fn rank_table(m: &PerfMatrix) -> Table {
    let mut t = Table::new(std::iter::once("learner.id".to_string()).chain(m.tasks.iter().cloned()));
    for (l, row) in rank_matrix(m).into_iter().enumerate() {
        t.push(std::iter::once(Cell::Str(m.learners[l].clone())).chain(row.into_iter().map(Cell::Num)).collect());
    }
    t
}

pub fn mean_ranks(m: &PerfMatrix) -> Vec<f64> {
    rank_matrix(m).iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FriedmanTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl fmt::Display for FriedmanTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Friedman rank sum test")?;
        write!(
            f,
            "Friedman chi-squared = {}, df = {}, p-value = {}",
            crate::util::signif(self.statistic, 7),
            self.df,
            crate::util::signif(self.p_value, 4)
        )
    }
}

pub fn friedman_test(m: &PerfMatrix) -> Result<FriedmanTest> {
    let (k, n) = m.dims()?;
    let r = mean_ranks(m);
    let (kf, nf) = (k as f64, n as f64);
    let ss: f64 = r.iter().map(|x| x * x).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (ss - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let df = k - 1;
    Ok(FriedmanTest { statistic, df, p_value: chisq_upper(statistic, df as f64) })
}

/// Pairwise Nemenyi p-values (learner × learner, missing diagonal).
pub fn friedman_posthoc_nemenyi(m: &PerfMatrix) -> Result<Vec<Vec<f64>>> {
    let (k, n) = m.dims()?;
    let r = mean_ranks(m);
    let se = (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt();
    let mut p = vec![vec![f64::NAN; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let q = (r[i] - r[j]).abs() / se * std::f64::consts::SQRT_2;
                p[i][j] = ptukey_upper(q, k);
            }
        }
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq)]
pub enum CdTest {
    Nemenyi,
    /// Comparisons against one baseline learner.
    BonferroniDunn { baseline: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CritDifferences {
    pub learners: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub q: f64,
    pub cd: f64,
    /// Nemenyi: learner index pairs whose mean ranks differ by more than cd.
    pub significant: Vec<(usize, usize)>,
    /// Bonferroni-Dunn: baseline rank ± cd.
    pub baseline_interval: Option<(f64, f64)>,
}

const ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];

// Two-tailed critical values for k = 2..10 learners. Nemenyi: studentized
// range quantiles (infinite df) divided by sqrt(2). Bonferroni-Dunn: normal
// quantiles at alpha / (2 (k - 1)).
const Q_NEMENYI: [[f64; 9]; 3] = [
    [2.576, 2.913, 3.113, 3.255, 3.364, 3.452, 3.526, 3.590, 3.646],
    [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164],
    [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920],
];
const Q_BD: [[f64; 9]; 3] = [
    [2.576, 2.807, 2.935, 3.023, 3.090, 3.144, 3.189, 3.227, 3.261],
    [1.960, 2.241, 2.394, 2.498, 2.576, 2.638, 2.690, 2.724, 2.773],
    [1.645, 1.960, 2.128, 2.241, 2.326, 2.394, 2.450, 2.498, 2.539],
];

/// Tabulated critical value for `k` learners.
pub fn critical_q(test: &CdTest, k: usize, alpha: f64) -> Result<f64> {
    let a = ALPHAS
        .iter()
        .position(|x| (x - alpha).abs() < 1e-12)
        .ok_or_else(|| Error::arg(format!("alpha must be one of 0.01, 0.05, 0.1, got {alpha}")))?;
    if !(2..=10).contains(&k) {
        return Err(Error::arg(format!("critical differences are tabulated for 2 to 10 learners, got {k}")));
    }
    Ok(match test {
        CdTest::Nemenyi => Q_NEMENYI[a][k - 2],
        CdTest::BonferroniDunn { .. } => Q_BD[a][k - 2],
    })
}

/// q * sqrt(k (k + 1) / (6 n)).
pub fn critical_difference(test: &CdTest, k: usize, n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("no tasks"));
    }
    let q = critical_q(test, k, alpha)?;
    Ok(q * (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt())
}

pub fn critical_differences(m: &PerfMatrix, test: &CdTest, alpha: f64) -> Result<CritDifferences> {
    let (k, n) = m.dims()?;
    let q = critical_q(test, k, alpha)?;
    let cd = critical_difference(test, k, n, alpha)?;
    let r = mean_ranks(m);
    let mut out = CritDifferences {
        learners: m.learners.clone(),
        mean_ranks: r.clone(),
        q,
        cd,
        significant: Vec::new(),
        baseline_interval: None,
    };
    match test {
        CdTest::Nemenyi => {
            for i in 0..k {
                for j in i + 1..k {
                    if (r[i] - r[j]).abs() > cd {
                        out.significant.push((i, j));
                    }
                }
            }
        }
        CdTest::BonferroniDunn { baseline } => {
            let b = m.learners.iter().position(|l| l == baseline).ok_or_else(|| Error::unknown("learner", baseline))?;
            out.baseline_interval = Some((r[b] - cd, r[b] + cd));
            for j in 0..k {
                if j != b && (r[j] - r[b]).abs() > cd {
                    out.significant.push((b.min(j), b.max(j)));
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Distribution tails

fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let lead = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let (mut sum, mut term, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * lead.exp()
    } else {
        // Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        lead.exp() * h
    }
}

/// P(X > x) for a chi-square variable with `df` degrees of freedom.
pub fn chisq_upper(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}

fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        2.0 - gamma_q(0.5, x * x)
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// P(Q > q) for the studentized range of `k` means with infinite degrees of
/// freedom, by 64-point Gauss-Legendre quadrature on panels over the
/// normal density.
pub fn ptukey_upper(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    let (nodes, weights) = gauss_legendre(64);
    let (lo, hi, panels) = (-9.0, 9.0 + q, 12);
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let (mid, half) = (a + width / 2.0, width / 2.0);
        for (x, w) in nodes.iter().zip(&weights) {
            let z = mid + half * x;
            let inner = (normal_cdf(z) - normal_cdf(z - q)).max(0.0);
            total += w * half * normal_pdf(z) * inner.powi(k as i32 - 1);
        }
    }
    (1.0 - k as f64 * total).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

    /// The rank pattern of the three-learner, five-task example.
    pub(crate) fn example() -> PerfMatrix {
        let ranks = vec![vec![1.0, 3.0, 2.0, 1.0, 2.0], vec![3.0, 2.0, 3.0, 3.0, 3.0], vec![2.0, 1.0, 1.0, 2.0, 1.0]];
        let values = ranks.iter().map(|r| r.iter().map(|v| v / 10.0).collect()).collect();
        PerfMatrix::new(
            "mmce.test.mean",
            true,
            vec!["lda".into(), "rpart".into(), "randomForest".into()],
            (1..=5).map(|t| format!("t{t}")).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn friedman_reproduces_example() {
        let f = friedman_test(&example()).unwrap();
        assert!((f.statistic - 5.2).abs() < 1e-12);
        assert_eq!(f.df, 2);
        assert!((f.p_value - 0.07427).abs() < 5e-5);
    }

    #[test]
    fn friedman_two_learners_oracle() {
        let m = PerfMatrix::new("x", true, vec!["a".into(), "b".into()], (0..4).map(|t| t.to_string()).collect(), vec![vec![0.1; 4], vec![0.2; 4]]).unwrap();
        let f = friedman_test(&m).unwrap();
        assert!((f.statistic - 4.0).abs() < 1e-12);
        let oracle = 1.0 - ChiSquared::new(1.0).unwrap().cdf(4.0);
        assert!((f.p_value - oracle).abs() < 1e-10);
        let flat = PerfMatrix::new("x", true, vec!["a".into(), "b".into()], vec!["1".into(), "2".into()], vec![vec![0.5; 2]; 2]).unwrap();
        let f = friedman_test(&flat).unwrap();
        assert_eq!(f.statistic, 0.0);
        assert_eq!(f.p_value, 1.0);
    }

    #[test]
    fn tails_match_oracle() {
        assert!((normal_cdf(-1.3) - 0.096_800_484_585_610_3).abs() < 1e-15);
        let n = Normal::new(0.0, 1.0).unwrap();
        for x in [-4.0, -1.3, 0.0, 0.7, 2.5, 6.0] {
            // statrs' own erfc is good to about 1e-11 here
            assert!((normal_cdf(x) - n.cdf(x)).abs() < 1e-10, "{x}");
        }
        for (x, df) in [(0.3, 1.0), (5.2, 2.0), (12.0, 7.0), (40.0, 10.0)] {
            let o = 1.0 - ChiSquared::new(df).unwrap().cdf(x);
            assert!((chisq_upper(x, df) - o).abs() < 1e-12, "{x} {df}");
        }
    }

    #[test]
    fn studentized_range_matches_table() {
        // upper 5% points for infinite df
        for (k, q) in [(2usize, 2.772), (3, 3.314), (5, 3.858), (10, 4.474)] {
            assert!((ptukey_upper(q, k) - 0.05).abs() < 5e-4, "k={k}");
        }
        // the tabulated Nemenyi constants are these quantiles over sqrt(2)
        for k in 2..=10 {
            let q = critical_q(&CdTest::Nemenyi, k, 0.05).unwrap() * std::f64::consts::SQRT_2;
            assert!((ptukey_upper(q, k) - 0.05).abs() < 1e-3, "k={k}");
        }
    }

    #[test]
    fn nemenyi_posthoc_example() {
        let p = friedman_posthoc_nemenyi(&example()).unwrap();
        assert!((p[2][1] - 0.069).abs() < 0.02);
        assert!((p[1][0] - 0.254).abs() < 0.02);
        assert!((p[2][0] - 0.802).abs() < 0.02);
        assert!(p[0][0].is_nan());
        assert_eq!(p[0][1], p[1][0]);
    }

    #[test]
    fn critical_difference_scaling() {
        let t = CdTest::Nemenyi;
        let cd = critical_difference(&t, 3, 5, 0.1).unwrap();
        assert!((cd - 2.052 * 0.4f64.sqrt()).abs() < 1e-12);
        let c1 = critical_difference(&t, 3, 5, 0.05).unwrap();
        let c4 = critical_difference(&t, 3, 20, 0.05).unwrap();
        assert!((c1 / 2.0 - c4).abs() < 1e-12);
        assert!(critical_q(&t, 11, 0.05).is_err());
        assert!(critical_q(&t, 3, 0.2).is_err());
        let r = critical_differences(&example(), &CdTest::BonferroniDunn { baseline: "randomForest".into() }, 0.1).unwrap();
        let (lo, hi) = r.baseline_interval.unwrap();
        assert!((hi - lo - 2.0 * r.cd).abs() < 1e-12);
        assert!(critical_differences(&example(), &CdTest::BonferroniDunn { baseline: "svm".into() }, 0.1).is_err());
    }

    #[test]
    fn ranks_and_ties() {
        let m = example();
        let r = rank_matrix(&m);
        for t in 0..5 {
            assert_eq!(r.iter().map(|row| row[t]).sum::<f64>(), 6.0);
        }
        let flat = PerfMatrix::new("x", false, vec!["a".into(), "b".into(), "c".into()], vec!["t".into()], vec![vec![1.0]; 3]).unwrap();
        assert!(rank_matrix(&flat).iter().all(|r| r[0] == 2.0));
        let mut up = m.clone();
        up.minimize = false;
        assert_eq!(rank_matrix(&up)[0][0], 3.0);
        let n = critical_differences(&flat_three(), &CdTest::Nemenyi, 0.05).unwrap();
        assert!(n.significant.is_empty());
    }

    fn flat_three() -> PerfMatrix {
        PerfMatrix::new("x", true, vec!["a".into(), "b".into(), "c".into()], vec!["1".into(), "2".into()], vec![vec![0.3; 2]; 3]).unwrap()
    }
}
