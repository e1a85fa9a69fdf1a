use serde::Serialize;

use crate::{Error, Result};

/// Least-squares line through `(log x, log |y|)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    /// `exp` of the intercept.
    pub constant: f64,
    /// Root mean square residual in log coordinates.
    pub rms: f64,
    pub window: (f64, f64),
}

pub fn fit_power(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Numerical("power fit needs at least three points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x <= 0.0) {
        return Err(Error::Numerical("power fit on non-finite or non-positive data".into()));
    }
    if ys.iter().any(|&y| y == 0.0) {
        return Err(Error::Numerical("power fit on a vanishing value".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate fit window".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(PowerFit { slope, constant: icpt.exp(), rms, window: (lo, hi) })
}

/// `n` points from `a` to `b`, equally spaced in `log`.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
