//! Binary logistic regression fitted by iteratively reweighted least squares.

use std::any::Any;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Ctx;
use crate::learner::{Algorithm, Model, PredictType, RawPrediction, TrainInput};

use super::{check_finite, class_target, feature_matrix, numeric_matrix, weights_or_ones};

pub struct LogReg;

#[derive(Debug, Clone)]
pub struct LogRegModel {
    /// Intercept first, then one coefficient per feature. Models the
    /// probability of the positive class.
    pub coef: Vec<f64>,
    pub positive: usize,
    pub converged: bool,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted negative log-likelihood.
pub fn deviance(x: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let mut d = 0.0;
    for i in 0..y.len() {
        let p = sigmoid(eta[i]).clamp(1e-300, 1.0 - 1e-16);
        d -= w[i] * (y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln());
    }
    2.0 * d
}

/// Gradient of the weighted log-likelihood with respect to the coefficients.
pub fn gradient(x: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>) -> DVector<f64> {
    let eta = x * beta;
    let r = DVector::from_iterator(y.len(), (0..y.len()).map(|i| w[i] * (y[i] - sigmoid(eta[i]))));
    x.transpose() * r
}

pub(crate) fn design(x: &[Vec<f64>], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] })
}

/// Returns (coefficients, converged, iterations).
pub fn irls(x: &DMatrix<f64>, y: &[f64], w: &[f64], max_iter: usize, tol: f64) -> Result<(DVector<f64>, bool, usize)> {
    let n = x.nrows();
    let m = x.ncols();
    let mut beta = DVector::<f64>::zeros(m);
    let mut dev = deviance(x, y, w, &beta);
    let mut best = (beta.clone(), dev);
    for it in 1..=max_iter {
        let eta = x * &beta;
        let mut xtwx = DMatrix::<f64>::zeros(m, m);
        let mut xtwz = DVector::<f64>::zeros(m);
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let v = (p * (1.0 - p)).max(1e-10);
            let z = eta[i] + (y[i] - p) / v;
            let wi = w[i] * v;
            let row = x.row(i);
            for a in 0..m {
                xtwz[a] += wi * row[a] * z;
                for b in 0..=a {
                    xtwx[(a, b)] += wi * row[a] * row[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        let next = match xtwx.clone().cholesky() {
            Some(c) => c.solve(&xtwz),
            None => xtwx
                .svd(true, true)
                .solve(&xtwz, 1e-12)
                .map_err(|e| Error::numerical(format!("IRLS step failed: {e}")))?,
        };
        let new_dev = deviance(x, y, w, &next);
        if !new_dev.is_finite() {
            return Ok((best.0, false, it));
        }
        let change = (new_dev - dev).abs() / (new_dev.abs() + 0.1);
        beta = next;
        dev = new_dev;
        if dev <= best.1 {
            best = (beta.clone(), dev);
        }
        if change < tol {
            return Ok((beta, true, it));
        }
    }
    log::warn!("logistic regression did not converge in {max_iter} iterations");
    Ok((best.0, false, max_iter))
}

impl Algorithm for LogReg {
    fn train(&self, input: &TrainInput<'_>) -> Result<Box<dyn Model>> {
        let task = input.task;
        let xs = feature_matrix(task)?;
        check_finite(&xs, input.learner.id())?;
        let (codes, k) = class_target(task)?;
        if k != 2 {
            return Err(Error::unsupported(input.learner.id(), "more than two classes"));
        }
        let positive = task.desc().positive_index().unwrap_or(0);
        let y: Vec<f64> = codes.iter().map(|c| if *c == positive { 1.0 } else { 0.0 }).collect();
        let w = weights_or_ones(input.weights, y.len());
        let p = xs.first().map_or(0, |r| r.len());
        let x = design(&xs, p);
        let (beta, converged, iterations) = irls(&x, &y, &w, input.usize("max_iter")?, input.f64("tol")?)?;
        Ok(Box::new(LogRegModel { coef: beta.iter().copied().collect(), positive, converged, iterations }))
    }
}

impl Model for LogRegModel {
    fn predict(&self, data: &Dataset, _pt: PredictType, _ctx: &Ctx) -> Result<RawPrediction> {
        let x = numeric_matrix(data)?;
        check_finite(&x, "classif.logreg")?;
        let prob: Vec<Vec<f64>> = x
            .iter()
            .map(|row| {
                let eta = self.coef[0] + row.iter().zip(&self.coef[1..]).map(|(a, b)| a * b).sum::<f64>();
                let pp = sigmoid(eta);
                let mut v = vec![0.0; 2];
                v[self.positive] = pp;
                v[1 - self.positive] = 1.0 - pp;
                v
            })
            .collect();
        let response = prob
            .iter()
            .map(|v| Some(if v[self.positive] >= 0.5 { self.positive } else { 1 - self.positive } as u32))
            .collect();
        Ok(RawPrediction::Classif { response, prob: Some(prob) })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_vanishes_at_optimum() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin() * 2.0, (i % 7) as f64 - 3.0]).collect();
        let y: Vec<f64> = xs.iter().enumerate().map(|(i, r)| if r[0] + 0.3 * r[1] + ((i * 13) % 5) as f64 * 0.4 > 0.8 { 1.0 } else { 0.0 }).collect();
        let w = vec![1.0; y.len()];
        let x = design(&xs, 2);
        let (b, conv, _) = irls(&x, &y, &w, 50, 1e-10).unwrap();
        assert!(conv);
        let g = gradient(&x, &y, &w, &b);
        assert!(g.amax() < 1e-6, "{g}");
    }
}
