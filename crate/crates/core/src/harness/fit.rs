//! Ordinary least-squares line fit.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least two points with distinct x, got {0} points")]
    Underdetermined(usize),
    #[error("non-finite point")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Standard error of the slope; absent for an exact two-point fit.
    pub slope_stderr: Option<f64>,
    pub points: usize,
}

/// Fits `y = slope x + intercept` to `(x, y)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit, FitError> {
    let n = points.len();
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    if n < 2 {
        return Err(FitError::Underdetermined(n));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Underdetermined(n));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (sse / nf).sqrt(),
        slope_stderr: (n > 2).then(|| (sse / (nf - 2.0) / sxx).sqrt()),
        points: n,
    })
}
