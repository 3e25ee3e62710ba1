//! Small numeric helpers shared across modules.

use rand::seq::SliceRandom;
use rand::Rng;

/// Rounds `rate * count` half-to-even and clamps at zero.
pub fn round_count(rate: f64, count: usize) -> usize {
    let v = (rate * count as f64).round_ties_even();
    if v <= 0.0 {
        0
    } else {
        v as usize
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn weighted_mean(xs: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        None => mean(xs),
        Some(w) => {
            let sw: f64 = w.iter().sum();
            xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw
        }
    }
}

/// Sample variance (denominator n - 1); NaN for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    if xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sd(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Quantile with linear interpolation between order statistics (R type 7).
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Ranks starting at 1 with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Index of the maximum; the lowest index wins ties. NaN entries never win.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        match best {
            Some(b) if xs[b] >= x => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn argmin(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        match best {
            Some(b) if xs[b] <= x => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn shuffled<R: Rng + ?Sized>(mut v: Vec<usize>, rng: &mut R) -> Vec<usize> {
    v.shuffle(rng);
    v
}

/// Draws `k` of `items` without replacement, preserving draw order.
pub fn sample_without<R: Rng + ?Sized>(items: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let mut v = items.to_vec();
    let k = k.min(v.len());
    let (head, _) = v.partial_shuffle(rng, k);
    head.to_vec()
}

pub fn sample_with<R: Rng + ?Sized>(items: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    if items.is_empty() {
        return Vec::new();
    }
    (0..k).map(|_| items[rng.random_range(0..items.len())]).collect()
}

pub fn euclid_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Rounds to `digits` significant digits and drops trailing zeros.
pub fn signif(v: f64, digits: i32) -> String {
    if !v.is_finite() {
        return crate::data::fmt_num(v);
    }
    if v == 0.0 {
        return "0".into();
    }
    let d = digits - 1 - v.abs().log10().floor() as i32;
    let s = if d > 0 { format!("{:.*}", d as usize, v) } else { format!("{:.0}", v) };
    if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s }
}
