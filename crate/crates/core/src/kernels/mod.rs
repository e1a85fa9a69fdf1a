//! Heat kernels `Z^λ`, the Y correctors, the Gaussian class `𝖦^{(c,ζ)}`,
//! numeric spacetime convolution and the parametrix of `∂_t − b(x)∂_x²`.
//!
//! Kernels are closures in `(t, x, y)`; translation-invariant ones ignore `y`
//! beyond the difference `x − y`.

mod fit;
mod parametrix;
pub mod quad;
mod smoothing;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

pub use fit::{fit_power, geomspace, PowerFit};
pub use parametrix::{Coefficient, Parametrix};
pub use smoothing::{smoothing_exponent, SmoothingQuantity};

use crate::{Error, Result};
use quad::{graded_both, graded_toward_start, space_breaks, Rule};

/// `𝖦_t^{(c,ζ)}(x) = t^{(ζ−|𝔰|)/N} exp{−c Σ_j (|x_j|^{N/𝔰_j}/t)^{𝔰_j/(N−𝔰_j)}}`,
/// with the time growth `e^{γt}` kept separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussProfile {
    pub c: f64,
    pub zeta: f64,
    pub scaling: Vec<u32>,
    pub n: u32,
    pub gamma: f64,
}

impl GaussProfile {
    /// One space dimension with the heat scaling `𝔰 = (1)`, `N = 2`.
    pub fn heat(c: f64, zeta: f64) -> Self {
        Self { c, zeta, scaling: vec![1], n: 2, gamma: 0.0 }
    }

    pub fn scaled_dim(&self) -> f64 {
        self.scaling.iter().sum::<u32>() as f64
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.n as f64;
        let mut e = 0.0;
        for (xj, &sj) in x.iter().zip(&self.scaling) {
            let s = sj as f64;
            e += (xj.abs().powf(n / s) / t).powf(s / (n - s));
        }
        t.powf((self.zeta - self.scaled_dim()) / n) * (-self.c * e).exp()
    }

    /// `e^{γt} 𝖦_t(x)`.
    pub fn bound(&self, t: f64, x: &[f64]) -> f64 {
        (self.gamma * t).exp() * self.eval(t, x)
    }

    /// Exponent `ζ₁ + ζ₂ + N` of a convolution of two members.
    pub fn convolution_exponent(&self, o: &Self) -> f64 {
        self.zeta + o.zeta + self.n as f64
    }

    /// Constant `C` with `𝖦^{(c,ζ₁)} ∗ 𝖦^{(c,ζ₂)} = C 𝖦^{(c,ζ₁+ζ₂+N)}`, exact
    /// for the heat scaling with equal decay constants and `ζ_i > −2`:
    /// `C = (π/c)^{d/2} Γ(ζ₁/2+1)Γ(ζ₂/2+1)/Γ((ζ₁+ζ₂)/2+2)`.
    pub fn convolution_constant(&self, o: &Self) -> Option<f64> {
        let heat = self.n == 2 && self.scaling.iter().all(|&s| s == 1);
        if !heat || self.scaling != o.scaling || (self.c - o.c).abs() > 1e-12 * self.c {
            return None;
        }
        if self.zeta <= -2.0 || o.zeta <= -2.0 {
            return None;
        }
        let d = self.scaling.len() as f64;
        let (a, b) = (self.zeta / 2.0 + 1.0, o.zeta / 2.0 + 1.0);
        Some((PI / self.c).powf(d / 2.0) * gamma(a) * gamma(b) / gamma(a + b))
    }
}

type Eval = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// A kernel `(t, x, y) ↦ K_t(x, y)` with its declared envelope.
#[derive(Clone)]
pub struct KernelFn {
    name: String,
    f: Arc<Eval>,
    pub envelope: GaussProfile,
    /// Declared Hölder exponents in the two spatial arguments.
    pub holder: (f64, f64),
}

impl fmt::Debug for KernelFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFn")
            .field("name", &self.name)
            .field("envelope", &self.envelope)
            .field("holder", &self.holder)
            .finish()
    }
}

impl KernelFn {
    pub fn new(
        name: impl Into<String>,
        envelope: GaussProfile,
        holder: (f64, f64),
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f), envelope, holder }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        (self.f)(t, x, y)
    }

    /// `K_t(x, 0)`.
    pub fn at(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x, 0.0)
    }

    /// Spatial scale of `K_t`, read off the envelope.
    pub fn width(&self, t: f64) -> f64 {
        (t.max(0.0) / (2.0 * self.envelope.c)).sqrt()
    }
}

/// `∂_x^m` of the massive heat kernel at `t > 0`:
/// `Z·(−1/√(4λt))^m H_m(x/√(4λt))` with physicists' Hermite polynomials.
fn heat_dx(lambda: f64, mass: f64, m: u32, t: f64, x: f64) -> f64 {
    let s = (4.0 * lambda * t).sqrt();
    let y = x / s;
    let z = (-mass * t).exp() / (PI * 4.0 * lambda * t).sqrt() * (-y * y).exp();
    let (mut h0, mut h1) = (1.0, 2.0 * y);
    let h = match m {
        0 => h0,
        1 => h1,
        _ => {
            for j in 1..m {
                let h2 = 2.0 * y * h1 - 2.0 * j as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    z * (-1.0 / s).powi(m as i32) * h
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `∂_t^{n}∂_x^{k}Z^λ` for `Z^λ_t(x) = 1_{t>0} e^{−ct}(4πλt)^{−1/2}exp(−x²/(4λt))`.
/// Uses `∂_t Z = (λ∂_x² − c)Z` for `t > 0`.
pub fn heat_kernel(lambda: f64, mass: f64, n_t: u32, k_x: u32) -> Result<KernelFn> {
    if !(lambda > 0.0) || !(mass >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "heat kernel needs lambda > 0 and mass >= 0, got {lambda}, {mass}"
        )));
    }
    let env = GaussProfile::heat(1.0 / (8.0 * lambda), -(k_x as f64) - 2.0 * n_t as f64);
    Ok(KernelFn::new(
        format!("d_t^{n_t} d_x^{k_x} Z^{lambda}"),
        env,
        (1.0, 1.0),
        move |t, x, y| {
            if t <= 0.0 {
                return 0.0;
            }
            (0..=n_t)
                .map(|j| {
                    binom(n_t, j)
                        * lambda.powi(j as i32)
                        * (-mass).powi((n_t - j) as i32)
                        * heat_dx(lambda, mass, k_x + 2 * j, t, x - y)
                })
                .sum()
        },
    ))
}

/// `Y^{k,λ} = −(x∂^kZ^λ) ∗ ∂²Z^λ`, in closed form
/// `Y^{k,λ}_t = k t ∂^{k+1}Z^λ_t + λt²∂^{k+3}Z^λ_t`.
pub fn y_corrector(lambda: f64, mass: f64, k: u32) -> Result<KernelFn> {
    if k > 2 {
        return Err(Error::InvalidParameter(format!("Y corrector defined for k <= 2, got {k}")));
    }
    heat_kernel(lambda, mass, 0, 0)?;
    let env = GaussProfile::heat(1.0 / (8.0 * lambda), 1.0 - k as f64);
    Ok(KernelFn::new(format!("Y^{k},{lambda}"), env, (1.0, 1.0), move |t, x, y| {
        if t <= 0.0 {
            return 0.0;
        }
        let x = x - y;
        k as f64 * t * heat_dx(lambda, mass, k + 1, t, x)
            + lambda * t * t * heat_dx(lambda, mass, k + 3, t, x)
    }))
}

/// Resolution of the graded quadratures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Geometric panels toward each singular time endpoint.
    pub time_levels: usize,
    /// Ratio between consecutive time panels.
    pub time_ratio: f64,
    /// Spatial truncation, in kernel widths.
    pub space_radius: f64,
    /// Gauss–Legendre points per panel.
    pub points: usize,
    /// Target relative error; evaluation reports an estimate against it.
    pub tol: f64,
    /// Allow pairs that are only integrable after the spatial integral.
    pub renormalized: bool,
    /// Upper time limit for integrals over `(0, ∞)`.
    pub horizon: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            time_levels: 40,
            time_ratio: 0.5,
            space_radius: 10.0,
            points: 8,
            tol: 1e-6,
            renormalized: false,
            horizon: 40.0,
        }
    }
}

impl QuadratureSpec {
    fn rule(&self) -> &'static Rule {
        Rule::cached(self.points)
    }

    fn finer(&self) -> Self {
        Self { points: 2 * self.points, ..self.clone() }
    }
}

/// `(A∗B)_t(x,y) = ∫₀ᵗ∫ A_{t−s}(x,z)B_s(z,y) dz ds`, the spatial integral
/// done first. Returns the value and the gap to a rule of twice the order.
pub fn convolution_at(
    a: &KernelFn,
    b: &KernelFn,
    t: f64,
    x: f64,
    y: f64,
    spec: &QuadratureSpec,
) -> (f64, f64) {
    let v = convolve_once(a, b, t, x, y, spec);
    let w = convolve_once(a, b, t, x, y, &spec.finer());
    (w, (w - v).abs())
}

fn convolve_once(a: &KernelFn, b: &KernelFn, t: f64, x: f64, y: f64, spec: &QuadratureSpec) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let rule = spec.rule();
    let sb = graded_both(0.0, t, spec.time_levels, spec.time_ratio);
    rule.composite(&sb, |s| {
        let zb = space_breaks(&[(x, a.width(t - s)), (y, b.width(s))], spec.space_radius);
        rule.composite(&zb, |z| a.eval(t - s, x, z) * b.eval(s, z, y))
    })
}

/// Numeric kernel `A ∗ B` with the envelope `𝖦^{(c,ζ₁+ζ₂+N)}` predicted by
/// the convolution calculus.
pub fn convolve_spacetime(a: &KernelFn, b: &KernelFn, spec: &QuadratureSpec) -> Result<KernelFn> {
    let n = a.envelope.n as f64;
    if !spec.renormalized && (a.envelope.zeta <= -n || b.envelope.zeta <= -n) {
        return Err(Error::InvalidParameter(format!(
            "convolution of {} and {} is not absolutely integrable (exponents {}, {})",
            a.name, b.name, a.envelope.zeta, b.envelope.zeta
        )));
    }
    let env = GaussProfile {
        c: a.envelope.c.min(b.envelope.c),
        zeta: a.envelope.convolution_exponent(&b.envelope),
        gamma: a.envelope.gamma.max(b.envelope.gamma),
        ..a.envelope.clone()
    };
    let holder = (a.holder.0, b.holder.1);
    let (a2, b2, spec2) = (a.clone(), b.clone(), spec.clone());
    Ok(KernelFn::new(format!("({})*({})", a.name, b.name), env, holder, move |t, x, y| {
        convolve_once(&a2, &b2, t, x, y, &spec2)
    }))
}

/// `(Ā∗B)(t,x) = ∫∫ A(s−t, z−x)B(s, z) ds dz` for translation-invariant
/// kernels supported in positive time, where `Ā(t,x) = A(−t,−x)`. The time
/// integral runs over `s > max(t, 0)` up to the quadrature horizon.
pub fn reflected_convolution_at(
    a: &KernelFn,
    b: &KernelFn,
    t: f64,
    x: f64,
    spec: &QuadratureSpec,
) -> (f64, f64) {
    let once = |spec: &QuadratureSpec| {
        let rule = spec.rule();
        let t0 = t.max(0.0);
        let ub = graded_toward_start(0.0, spec.horizon, spec.time_levels, spec.time_ratio);
        rule.composite(&ub, |u| {
            let (ta, tb) = (u + t0 - t, u + t0);
            let zb = space_breaks(&[(x, a.width(ta)), (0.0, b.width(tb))], spec.space_radius);
            rule.composite(&zb, |z| a.at(ta, z - x) * b.at(tb, z))
        })
    };
    let v = once(spec);
    let w = once(&spec.finer());
    (w, (w - v).abs())
}

/// Envelope exponent of `K` near `y = 0`: `ζ` with `sup_x |K_t(x, 0)| ≈ C t^{(ζ−|𝔰|)/N}`,
/// from a log-log fit over `ts`. The supremum is taken over `x = o·width(t)`.
pub fn envelope_exponent(k: &KernelFn, ts: &[f64], offsets: &[f64]) -> Result<(f64, PowerFit)> {
    let sups: Vec<f64> = ts
        .iter()
        .map(|&t| {
            offsets
                .iter()
                .map(|o| k.at(t, o * k.width(t)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let fit = fit_power(ts, &sups)?;
    let env = &k.envelope;
    Ok((env.n as f64 * fit.slope + env.scaled_dim(), fit))
}

/// Smallest `C` with `|K_t(x,0)| ≤ C e^{γt}𝖦_t(x)` on the sample grid.
pub fn envelope_constant(k: &KernelFn, ts: &[f64], xs: &[f64]) -> f64 {
    let mut c: f64 = 0.0;
    for &t in ts {
        for &x in xs {
            let g = k.envelope.bound(t, &[x]);
            if g > 0.0 {
                c = c.max(k.at(t, x).abs() / g);
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_form_matches_finite_differences() {
        let z = heat_kernel(0.7, 0.3, 0, 0).unwrap();
        let (t, x, h) = (0.2, 0.15, 1e-3);
        for k in 1..=3u32 {
            let d = heat_kernel(0.7, 0.3, 0, k).unwrap();
            let prev = heat_kernel(0.7, 0.3, 0, k - 1).unwrap();
            let fd = (prev.at(t, x + h) - prev.at(t, x - h)) / (2.0 * h);
            assert!((d.at(t, x) - fd).abs() < 1e-5 * d.at(t, x).abs().max(1.0), "k = {k}");
        }
        let dt = heat_kernel(0.7, 0.3, 1, 0).unwrap();
        // fourth-order stencil; the plain central difference is off by ~1e-5 here
        let fd = (8.0 * (z.at(t + h, x) - z.at(t - h, x)) - (z.at(t + 2.0 * h, x) - z.at(t - 2.0 * h, x))) / (12.0 * h);
        assert!((dt.at(t, x) - fd).abs() < 1e-8 * fd.abs(), "{} vs {fd}", dt.at(t, x));
        assert_eq!(z.at(-0.1, 0.0), 0.0);
    }
}
