use serde::{Deserialize, Serialize};

use super::quad::{space_breaks, Rule};
use super::{fit_power, KernelFn, PowerFit};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingQuantity {
    /// `sup_x |∫ K_t(x,y) u₀(y) dy|` for a derivative kernel `K = ∂_t^n∂_x^k P`.
    Apply,
    /// `sup_x |P_t u₀(x) − u₀(x)|`.
    Increment,
}

/// Slope of the log-log fit of the chosen sup-norm over `ts`. `kinks` lists
/// the points where `u₀` is not smooth; panels are refined toward them.
pub fn smoothing_exponent(
    kernel: &KernelFn,
    u0: &dyn Fn(f64) -> f64,
    kinks: &[f64],
    quantity: SmoothingQuantity,
    ts: &[f64],
    xs: &[f64],
) -> Result<PowerFit> {
    if ts.len() < 3 || xs.is_empty() {
        return Err(Error::Numerical("degenerate smoothing fit window".into()));
    }
    let rule = Rule::cached(16);
    let mut sups = Vec::with_capacity(ts.len());
    for &t in ts {
        let w = kernel.width(t);
        let mut sup: f64 = 0.0;
        for &x in xs {
            let mut centers = vec![(x, w)];
            for &k in kinks {
                if (k - x).abs() < 12.0 * w {
                    centers.extend((0..40).map(|j| (k, w * 0.5f64.powi(j))));
                }
            }
            let zb = space_breaks(&centers, 10.0);
            let mut v = rule.composite(&zb, |y| kernel.eval(t, x, y) * u0(y));
            if quantity == SmoothingQuantity::Increment {
                v -= u0(x);
            }
            sup = sup.max(v.abs());
        }
        sups.push(sup);
    }
    fit_power(ts, &sups)
}
