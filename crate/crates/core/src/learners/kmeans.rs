//! k-means with k-means++ seeding and Lloyd iterations.

use std::any::Any;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Model, PredictType, RawPrediction, TrainInput};
use crate::util::{argmin, euclid_sq};

use super::{check_finite, feature_matrix, numeric_matrix};

pub struct KMeans;

#[derive(Debug, Clone)]
pub struct KMeansModel {
    pub centers: Vec<Vec<f64>>,
    /// Total within-cluster sum of squares after seeding and after each
    /// Lloyd iteration of the kept restart.
    pub objective_trace: Vec<f64>,
}

fn objective(x: &[Vec<f64>], centers: &[Vec<f64>]) -> f64 {
    x.iter().map(|r| centers.iter().map(|c| euclid_sq(r, c)).fold(f64::INFINITY, f64::min)).sum()
}

fn nearest(r: &[f64], centers: &[Vec<f64>]) -> usize {
    let d: Vec<f64> = centers.iter().map(|c| euclid_sq(r, c)).collect();
    argmin(&d).unwrap_or(0)
}

fn seed_plus_plus<R: Rng + ?Sized>(x: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![x[rng.random_range(0..x.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = x.iter().map(|r| centers.iter().map(|c| euclid_sq(r, c)).fold(f64::INFINITY, f64::min)).collect();
        let tot: f64 = d.iter().sum();
        let pick = if tot <= 0.0 {
            rng.random_range(0..x.len())
        } else {
            let mut u = rng.random::<f64>() * tot;
            let mut chosen = x.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    chosen = i;
                    break;
                }
                u -= di;
            }
            chosen
        };
        centers.push(x[pick].clone());
    }
    centers
}

/// Runs Lloyd's algorithm from the given centers. Returns the final centers
/// and the objective after seeding and after every iteration.
pub fn lloyd(x: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = centers.first().map_or(0, |c| c.len());
    let mut trace = vec![objective(x, &centers)];
    let mut assign: Vec<usize> = x.iter().map(|r| nearest(r, &centers)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; p]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (r, &a) in x.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(r).for_each(|(s, v)| *s += v);
        }
        for (c, (s, n)) in centers.iter_mut().zip(sums.into_iter().zip(&counts)) {
            if *n > 0 {
                *c = s.into_iter().map(|v| v / *n as f64).collect();
            }
        }
        trace.push(objective(x, &centers));
        let next: Vec<usize> = x.iter().map(|r| nearest(r, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    (centers, trace)
}

impl Algorithm for KMeans {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let x = feature_matrix(input.task)?;
        check_finite(&x, input.learner.id())?;
        let k = input.usize("centers")?;
        if k > x.len() {
            return Err(Error::data(format!("more cluster centers ({k}) than observations ({})", x.len())));
        }
        let max_iter = input.usize("max_iter")?;
        let nstart = input.usize("nstart")?.max(1);
        let mut best: Option<(Vec<Vec<f64>>, Vec<f64>)> = None;
        for s in 0..nstart {
            let mut rng = input.ctx.child("kmeans", s as u64).rng();
            let init = seed_plus_plus(&x, k, &mut rng);
            let (c, trace) = lloyd(&x, init, max_iter);
            let obj = *trace.last().unwrap();
            if best.as_ref().is_none_or(|b| obj < *b.1.last().unwrap()) {
                best = Some((c, trace));
            }
        }
        let (centers, objective_trace) = best.unwrap();
        Ok(Box::new(KMeansModel { centers, objective_trace }))
    }
}

impl Model for KMeansModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, _ctx: &Ctx) -> Result<RawPrediction> {
        let x = numeric_matrix(data)?;
        check_finite(&x, "cluster.kmeans")?;
        let response = x.iter().map(|r| Some(nearest(r, &self.centers) as u32)).collect();
        let prob = x
            .iter()
            .map(|r| {
                let d: Vec<f64> = self.centers.iter().map(|c| euclid_sq(r, c)).collect();
                if let Some(z) = d.iter().position(|v| *v == 0.0) {
                    (0..d.len()).map(|i| if i == z { 1.0 } else { 0.0 }).collect()
                } else {
                    let inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
                    let tot: f64 = inv.iter().sum();
                    inv.into_iter().map(|v| v / tot).collect()
                }
            })
            .collect();
        Ok(RawPrediction::Cluster { response, prob: Some(prob) })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
