//! Ordinary least squares.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Set when the response has no variance, in which case `r_squared` is 0.
    pub flat_response: bool,
}

impl LinearFit {
    pub fn predict(&self, w: f64) -> f64 {
        self.slope * w + self.intercept
    }
}

fn r_squared(observed: &[f64], fitted: impl Iterator<Item = f64>) -> (f64, bool) {
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let tss: f64 = observed.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = observed.iter().zip(fitted).map(|(o, f)| (o - f).powi(2)).sum();
    if tss <= f64::EPSILON * mean.abs().max(1.0) * n {
        return (0.0, true);
    }
    ((1.0 - rss / tss).clamp(0.0, 1.0), false)
}

/// Fits `value = slope * w + intercept`.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<LinearFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewSamples { needed: 2, got: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(FitError::IdenticalRegressor);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (r2, flat) = r_squared(&ys, points.iter().map(|p| slope * p.0 + intercept));
    Ok(LinearFit { slope, intercept, r_squared: r2, flat_response: flat })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneFit {
    pub w_slope: f64,
    pub a_slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub flat_response: bool,
}

/// Fits `value = w_slope * w + a_slope * a + intercept` from `(w, a, value)`.
pub fn fit_plane(points: &[(f64, f64, f64)]) -> Result<PlaneFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewSamples { needed: 3, got: points.len() });
    }
    let design = DMatrix::from_fn(points.len(), 3, |i, j| match j {
        0 => points[i].0,
        1 => points[i].1,
        _ => 1.0,
    });
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.2));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return Err(FitError::IdenticalRegressor);
    }
    let beta = svd.solve(&y, 1e-12 * smax).map_err(|e| FitError::Regression(e.to_string()))?;
    let fitted = &design * &beta;
    let ys: Vec<f64> = y.iter().copied().collect();
    let (r2, flat) = r_squared(&ys, fitted.iter().copied());
    Ok(PlaneFit { w_slope: beta[0], a_slope: beta[1], intercept: beta[2], r_squared: r2, flat_response: flat })
}
