//! Renormalization characters `ℓ_λ(τ)` of stationary Gaussian noise on the
//! torus, for trees made of one root and `ζ₁` leaves.
//!
//! Expectations are evaluated exactly in Fourier variables. With `k = 2πn`
//! and `μ = c + λk²`, the edge `𝓘^q_n` acts on a mode by `(ik)^n(−k²)^q`
//! times `μ^{−q−1}` (time-constant noise) or `t^q e^{−μt}/q!` (white in time).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::differentials::{theta, Scaling};
use crate::kernels::{fit_power, PowerFit};
use crate::noise::{Mollifier, NoiseMode};
use crate::trees::{Label, MultiIndex2, Tree};
use crate::{Error, Result};

/// `C^ε(x) = Σ_{n≠0} Ĉ(n)e^{2πi n·x}`, `Ĉ(n) = Π_i ρ̂(2πn_iε)² |n|^{−2β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub mode: NoiseMode,
    pub mollifier: Mollifier,
    pub eps: f64,
    /// Parabolic regularity of the noise is `α − 2`.
    pub alpha: f64,
    /// Space dimension, 1 or 2.
    pub dim: u32,
}

impl Covariance {
    pub fn spectral_exponent(&self) -> f64 {
        let d = self.dim as f64;
        match self.mode {
            NoiseMode::Spatial => self.alpha - 2.0 + d / 2.0,
            NoiseMode::WhiteInTime => self.alpha - 1.0 + d / 2.0,
        }
    }

    pub fn spectrum(&self, n: &[i64]) -> f64 {
        let n2: i64 = n.iter().map(|m| m * m).sum();
        if n2 == 0 {
            return 0.0;
        }
        let r: f64 = n
            .iter()
            .map(|&m| self.mollifier.fourier(2.0 * PI * m as f64 * self.eps).powi(2))
            .product();
        r * (n2 as f64).powf(-self.spectral_exponent())
    }

    /// `C^ε(x)` in dimension one, summed over the default cutoff.
    pub fn covariance(&self, x: f64) -> f64 {
        let m = FourierSpec::default().max_mode(self);
        (1..=m).map(|n| 2.0 * self.spectrum(&[n]) * (2.0 * PI * n as f64 * x).cos()).sum()
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("bad covariance: {self:?}")));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Unsupported(format!("dimension {}", self.dim)));
        }
        Ok(())
    }
}

/// Symbols of `∂` and `∂²` on a mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbols {
    /// `ik` and `−k²`, summed up to `|n| ≤ cutoff/ε`.
    #[default]
    Continuum,
    /// Centered differences on `N` points: `i sin(2πn/N)/Δx` and
    /// `−(2 sin(πn/N)/Δx)²`, summed over `|n| < N/2`.
    Grid { nx: usize },
    /// Grid symbols in space and the time stepping of the solver: implicit
    /// Euler for the linear part with the noise and the `ζ₁` root taken at the
    /// old time level, and the `∂²` below a `ζ₃` root at the new one. Only
    /// `p = 0` trees are supported.
    Scheme { nx: usize, dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSpec {
    /// Mass `c` of the kernel `Z^λ`.
    pub mass: f64,
    pub symbols: Symbols,
    /// Continuum modes are kept while `|n_i| ≤ cutoff/ε`.
    pub cutoff: f64,
}

impl Default for FourierSpec {
    fn default() -> Self {
        Self { mass: 0.0, symbols: Symbols::Continuum, cutoff: 64.0 }
    }
}

impl FourierSpec {
    fn max_mode(&self, cov: &Covariance) -> i64 {
        match self.symbols {
            Symbols::Continuum => (self.cutoff / cov.eps).ceil() as i64,
            Symbols::Grid { nx } | Symbols::Scheme { nx, .. } => nx as i64 / 2 - 1,
        }
    }

    /// `(k², d)` with `d` the symbol of `∂/i` (dimension one).
    fn symbols_1d(&self, n: i64) -> (f64, f64) {
        let k = 2.0 * PI * n as f64;
        match self.symbols {
            Symbols::Continuum => (k * k, k),
            Symbols::Grid { nx } | Symbols::Scheme { nx, .. } => {
                let h = 1.0 / nx as f64;
                let s = 2.0 * (PI * n as f64 / nx as f64).sin() / h;
                (s * s, (2.0 * PI * n as f64 / nx as f64).sin() / h)
            }
        }
    }
}

/// A quadrature value with an estimate of its truncation error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Factor {
    /// The noise at the root.
    Root,
    /// `(𝓘^q_n ξ)(0)` with `n` spatial derivatives; `implicit` marks the
    /// `∂²` factor of a `ζ₃` root.
    Leaf { n: u32, q: u32, implicit: bool },
}

/// Factors of `Πτ(0)`, or `None` when the tree is `X^kτ` (which vanishes at 0).
fn factors(t: &Tree) -> Result<Option<Vec<Factor>>> {
    if !t.poly().is_zero() {
        return Ok(None);
    }
    let mut out = Vec::new();
    match t.label() {
        Label::Z1 => out.push(Factor::Root),
        Label::Z2 | Label::Z3 | Label::Z4 => {}
    }
    for e in t.children() {
        let c = &e.child;
        if c.label() != Label::Z1 || !c.children().is_empty() || !c.poly().is_zero() {
            return Err(Error::Unsupported(format!(
                "only ζ₁ leaves below the root are supported, got {t}"
            )));
        }
        if e.n.k1 != 0 {
            return Err(Error::Unsupported(format!("time derivatives on edges: {t}")));
        }
        out.push(Factor::Leaf { n: e.n.k2, q: e.p, implicit: t.label() == Label::Z3 && e.n.k2 == 2 });
    }
    Ok(Some(out))
}

/// `(i d)^n (−k²)^q` for a derivative count `n`; in dimension two only
/// even `n` (powers of the Laplacian) make sense.
fn symbol(n: u32, k2: f64, d: f64) -> Complex64 {
    let even = (-k2).powi((n / 2) as i32);
    if n % 2 == 0 {
        Complex64::new(even, 0.0)
    } else {
        Complex64::new(0.0, d * even)
    }
}

fn binomial(a: u32, b: u32) -> f64 {
    (1..=b).fold(1.0, |acc, j| acc * (a - b + j) as f64 / j as f64)
}

/// `E[F_a F_b]` for one mode, without `Ĉ`.
fn pair_mode(a: Factor, b: Factor, mode: NoiseMode, k2: f64, d: f64, mu: f64, dt: Option<f64>) -> Complex64 {
    let leaf = |n: u32, q: u32| symbol(n, k2, d) * (-k2).powi(q as i32);
    let zero = Complex64::new(0.0, 0.0);
    match (mode, a, b) {
        (_, Factor::Root, Factor::Root) => zero,
        (NoiseMode::Spatial, Factor::Root, Factor::Leaf { n, q, .. }) | (NoiseMode::Spatial, Factor::Leaf { n, q, .. }, Factor::Root) => {
            leaf(n, q).conj() / mu.powi(q as i32 + 1)
        }
        (NoiseMode::Spatial, Factor::Leaf { n: n1, q: q1, .. }, Factor::Leaf { n: n2, q: q2, .. }) => {
            leaf(n1, q1) * leaf(n2, q2).conj() / mu.powi((q1 + q2 + 2) as i32)
        }
        // the noise of a step is independent of the state it multiplies
        (NoiseMode::WhiteInTime, Factor::Root, Factor::Leaf { .. }) | (NoiseMode::WhiteInTime, Factor::Leaf { .. }, Factor::Root)
            if dt.is_some() =>
        {
            zero
        }
        // equal-time pairing with a kernel that starts at t = 0 counts half
        (NoiseMode::WhiteInTime, Factor::Root, Factor::Leaf { n, q, .. }) | (NoiseMode::WhiteInTime, Factor::Leaf { n, q, .. }, Factor::Root) => {
            if q == 0 {
                0.5 * symbol(n, k2, d).conj()
            } else {
                zero
            }
        }
        (NoiseMode::WhiteInTime, Factor::Leaf { n: n1, implicit: i1, .. }, Factor::Leaf { n: n2, implicit: i2, .. })
            if dt.is_some() =>
        {
            // stationary variance of uⁿ⁺¹ = (uⁿ + Δt ξⁿ)/(1 + Δtμ), and one
            // step of decay when a factor sits at the new time level
            let x = dt.unwrap() * mu;
            let lag = if i1 != i2 { 1.0 / (1.0 + x) } else { 1.0 };
            symbol(n1, k2, d) * symbol(n2, k2, d).conj() * lag / (mu * (2.0 + x))
        }
        (NoiseMode::WhiteInTime, Factor::Leaf { n: n1, q: q1, .. }, Factor::Leaf { n: n2, q: q2, .. }) => {
            // ∫₀^∞ t^{q₁+q₂}/(q₁!q₂!) e^{−2μt} dt
            let time = binomial(q1 + q2, q1) / (2.0 * mu).powi((q1 + q2 + 1) as i32);
            leaf(n1, q1) * leaf(n2, q2).conj() * time
        }
    }
}

/// `Σ_{n≠0} Ĉ(n) E_n[F_a F_b]` with the contribution of the upper half of the
/// modes as the error estimate.
fn pair_sum(a: Factor, b: Factor, lambda: f64, cov: &Covariance, spec: &FourierSpec) -> Result<Value> {
    let m = spec.max_mode(cov);
    let dt = match spec.symbols {
        Symbols::Scheme { dt, .. } => {
            if [a, b].iter().any(|f| matches!(f, Factor::Leaf { q, .. } if *q > 0)) {
                return Err(Error::Unsupported("p-decorated trees with scheme symbols".into()));
            }
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!("scheme time step {dt}")));
            }
            Some(dt)
        }
        _ => None,
    };
    let (mut total, mut tail) = (0.0, 0.0);
    match cov.dim {
        1 => {
            for n in 1..=m {
                let (k2, d) = spec.symbols_1d(n);
                let mu = spec.mass + lambda * k2;
                // the modes ±n contribute complex conjugates
                let v = 2.0 * cov.spectrum(&[n]) * pair_mode(a, b, cov.mode, k2, d, mu, dt).re;
                total += v;
                if 2 * n > m {
                    tail += v;
                }
            }
        }
        _ => {
            if spec.symbols != Symbols::Continuum {
                return Err(Error::Unsupported("grid symbols in dimension two".into()));
            }
            for f in [a, b] {
                if matches!(f, Factor::Leaf { n, .. } if n % 2 == 1) {
                    return Err(Error::Unsupported("odd derivatives in dimension two".into()));
                }
            }
            for n1 in 0..=m {
                let mut row = 0.0;
                for n2 in -m..=m {
                    if n1 == 0 && n2 <= 0 {
                        continue;
                    }
                    let k2 = 4.0 * PI * PI * (n1 * n1 + n2 * n2) as f64;
                    let mu = spec.mass + lambda * k2;
                    let v = 2.0 * cov.spectrum(&[n1, n2]) * pair_mode(a, b, cov.mode, k2, 0.0, mu, dt).re;
                    row += v;
                    if 2 * n1.max(n2.abs()) > m {
                        tail += v;
                    }
                }
                total += row;
            }
        }
    }
    Ok(Value { value: total, error: tail.abs() })
}

/// Products over the perfect matchings of `items`.
fn matchings(items: &[usize], out: &mut Vec<Vec<(usize, usize)>>, acc: &mut Vec<(usize, usize)>) {
    if items.is_empty() {
        out.push(acc.clone());
        return;
    }
    let first = items[0];
    for j in 1..items.len() {
        let rest: Vec<usize> = items[1..].iter().copied().filter(|&i| i != items[j]).collect();
        acc.push((first, items[j]));
        matchings(&rest, out, acc);
        acc.pop();
    }
}

const MAX_FACTORS: usize = 8;

fn check_lambda(lambda: f64, spec: &FourierSpec) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(spec.mass >= 0.0) {
        return Err(Error::InvalidParameter(format!("need λ > 0 and c ≥ 0, got λ = {lambda}, c = {}", spec.mass)));
    }
    Ok(())
}

/// `h_λ(τ) = E[Π^λτ(0)]` by Wick's theorem.
pub fn wick_integral(t: &Tree, lambda: f64, cov: &Covariance, spec: &FourierSpec) -> Result<Value> {
    check_lambda(lambda, spec)?;
    cov.validate()?;
    let Some(fs) = factors(t)? else {
        return Ok(Value { value: 0.0, error: 0.0 });
    };
    if fs.len() % 2 == 1 {
        return Ok(Value { value: 0.0, error: 0.0 });
    }
    if fs.len() > MAX_FACTORS {
        return Err(Error::Unsupported(format!("{} Gaussian factors", fs.len())));
    }
    let mut pairs = std::collections::BTreeMap::new();
    let mut all = Vec::new();
    matchings(&(0..fs.len()).collect::<Vec<_>>(), &mut all, &mut vec![]);
    let (mut value, mut error) = (0.0, 0.0);
    for m in all {
        let mut prod: f64 = 1.0;
        let mut err = 0.0;
        for &(i, j) in &m {
            let key = (fs[i], fs[j]);
            let v = match pairs.get(&key) {
                Some(&v) => v,
                None => {
                    let v = pair_sum(fs[i], fs[j], lambda, cov, spec)?;
                    pairs.insert(key, v);
                    v
                }
            };
            // first-order propagation of the relative errors
            err = err * v.value.abs() + prod.abs() * v.error;
            prod *= v.value;
        }
        value += prod;
        error += err;
    }
    Ok(Value { value, error })
}

/// `ℓ_λ(τ) = −h(τ) − Σ_σ ℓ_λ(σ)h(τ/σ)` over the proper root-containing
/// subtrees `σ` of negative homogeneity.
pub fn bphz_character(t: &Tree, lambda: f64, cov: &Covariance, spec: &FourierSpec) -> Result<Value> {
    check_lambda(lambda, spec)?;
    // the character vanishes on X^kτ and on planted trees
    if !t.poly().is_zero() || (t.label() == Label::Z4 && t.children().len() == 1) {
        return Ok(Value { value: 0.0, error: 0.0 });
    }
    let h = wick_integral(t, lambda, cov, spec)?;
    let edges = t.children();
    let n = edges.len();
    if n > MAX_FACTORS {
        return Err(Error::Unsupported(format!("{n} edges")));
    }
    let (mut value, mut error) = (-h.value, h.error);
    for mask in 1..(1u32 << n) - 1 {
        let pick = |inside: bool| {
            edges.iter().enumerate().filter(move |(i, _)| (mask >> i & 1 == 1) == inside).map(|(_, e)| e.clone())
        };
        let sigma = Tree::new(MultiIndex2::ZERO, t.label(), pick(true).collect());
        if sigma.homogeneity().eval_f64(cov.alpha) >= 0.0 {
            continue;
        }
        let l = bphz_character(&sigma, lambda, cov, spec)?;
        if l.value == 0.0 {
            continue;
        }
        let rest = Tree::new(MultiIndex2::ZERO, Label::Z4, pick(false).collect());
        let hr = wick_integral(&rest, lambda, cov, spec)?;
        value -= l.value * hr.value;
        error += l.error * hr.value.abs() + l.value.abs() * hr.error;
    }
    Ok(Value { value, error })
}

/// `ℓ_λ(τ^𝐩)` with `p[i]` on the `i`-th edge of the root of `t0`.
pub fn p_decorated_character(
    t0: &Tree,
    p: &[u32],
    lambda: f64,
    cov: &Covariance,
    spec: &FourierSpec,
) -> Result<Value> {
    if p.len() != t0.children().len() {
        return Err(Error::InvalidParameter(format!(
            "{} p-values for {} edges",
            p.len(),
            t0.children().len()
        )));
    }
    let edges = t0
        .children()
        .iter()
        .zip(p)
        .map(|(e, &q)| crate::trees::Edge::new(e.n, e.p + q, e.child.clone()))
        .collect();
    bphz_character(&Tree::new(t0.poly(), t0.label(), edges), lambda, cov, spec)
}

/// Fit of `|ℓ(τ^p)| ≈ C m′^p` over `p = 0, …, max_p` on one edge. Returns `(C, m′)`.
pub fn character_growth(
    t0: &Tree,
    edge: usize,
    max_p: u32,
    lambda: f64,
    cov: &Covariance,
    spec: &FourierSpec,
) -> Result<(f64, f64)> {
    if edge >= t0.children().len() || max_p < 2 {
        return Err(Error::InvalidParameter("need a valid edge and max_p ≥ 2".into()));
    }
    let mut ps = Vec::new();
    let mut logs = Vec::new();
    for q in 0..=max_p {
        let mut p = vec![0; t0.children().len()];
        p[edge] = q;
        let v = p_decorated_character(t0, &p, lambda, cov, spec)?.value.abs();
        if v == 0.0 {
            return Err(Error::Numerical(format!("ℓ(τ^p) vanishes at p = {q}")));
        }
        ps.push(q as f64);
        logs.push(v.ln());
    }
    // least squares in (p, log|ℓ|)
    let n = ps.len() as f64;
    let (mx, my) = (ps.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let sxy: f64 = ps.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = ps.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(((my - slope * mx).exp(), slope.exp()))
}

fn scaling_of(cov: &Covariance) -> Scaling {
    match cov.mode {
        NoiseMode::Spatial => Scaling::Spatial,
        NoiseMode::WhiteInTime => Scaling::WhiteInTime,
    }
}

/// Largest log-residual accepted by [`scaling_exponent`].
pub const SCALING_FIT_TOL: f64 = 1e-4;

/// Slope of `log|ℓ_λ(τ)|` against `log λ` over `λ ∈ {1/2, 1, 2, 4}`.
pub fn scaling_exponent(t0: &Tree, cov: &Covariance, spec: &FourierSpec) -> Result<PowerFit> {
    let lams = [0.5, 1.0, 2.0, 4.0];
    let mut vals = Vec::with_capacity(4);
    for &l in &lams {
        vals.push(bphz_character(t0, l, cov, spec)?.value);
    }
    if vals.iter().any(|v| *v == 0.0) || vals.iter().any(|v| v.signum() != vals[0].signum()) {
        return Err(Error::Numerical(format!("ℓ(λ) changes sign or vanishes: {vals:?}")));
    }
    let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let fit = fit_power(&lams, &abs)?;
    if fit.rms > SCALING_FIT_TOL {
        return Err(Error::Numerical(format!(
            "ℓ(λ) is not a power law (log residual {:.2e})",
            fit.rms
        )));
    }
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `ℓ_λ = λ^θ ℓ₁`.
    Closed { theta: i64, l1: f64 },
    /// Monotone cubic in `log λ` through tabulated values.
    Tabulated { lambdas: Vec<f64>, values: Vec<f64>, slopes: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaProfile {
    pub tree: String,
    pub kind: Profile,
}

impl LambdaProfile {
    /// `ℓ_λ`; tabulated profiles are held constant outside their grid.
    pub fn eval(&self, lambda: f64) -> f64 {
        match &self.kind {
            Profile::Closed { theta, l1 } => l1 * lambda.powi(*theta as i32),
            Profile::Tabulated { lambdas, values, slopes } => {
                let x = lambda.ln();
                let n = lambdas.len();
                if lambda <= lambdas[0] {
                    return values[0];
                }
                if lambda >= lambdas[n - 1] {
                    return values[n - 1];
                }
                let i = lambdas.partition_point(|&l| l <= lambda).min(n - 1) - 1;
                let (x0, x1) = (lambdas[i].ln(), lambdas[i + 1].ln());
                let h = x1 - x0;
                let s = (x - x0) / h;
                let (h00, h10) = ((1.0 + 2.0 * s) * (1.0 - s).powi(2), s * (1.0 - s).powi(2));
                let (h01, h11) = (s * s * (3.0 - 2.0 * s), s * s * (s - 1.0));
                h00 * values[i] + h10 * h * slopes[i] + h01 * values[i + 1] + h11 * h * slopes[i + 1]
            }
        }
    }
}

/// Fritsch–Carlson slopes for data on `xs`.
fn monotone_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
    }
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let (a, b) = (m[i] / d[i], m[i + 1] / d[i]);
        let r = a * a + b * b;
        if r > 9.0 {
            let t = 3.0 / r.sqrt();
            m[i] = t * a * d[i];
            m[i + 1] = t * b * d[i];
        }
    }
    m
}

/// `λ ↦ ℓ_λ(τ)`: the closed power law when it reproduces every grid value,
/// otherwise a monotone interpolant of the grid values.
pub fn lambda_profile(t0: &Tree, cov: &Covariance, spec: &FourierSpec, lambda_grid: &[f64]) -> Result<LambdaProfile> {
    if lambda_grid.len() < 2 || lambda_grid.windows(2).any(|w| !(w[1] > w[0])) || !(lambda_grid[0] > 0.0) {
        return Err(Error::InvalidParameter("λ grid must be positive and increasing".into()));
    }
    let values: Vec<f64> = lambda_grid
        .iter()
        .map(|&l| bphz_character(t0, l, cov, spec).map(|v| v.value))
        .collect::<Result<_>>()?;
    let tree = t0.to_string();
    if let Ok(th) = theta(t0, scaling_of(cov)) {
        let l1 = bphz_character(t0, 1.0, cov, spec)?.value;
        let closed = lambda_grid.iter().zip(&values).all(|(&l, &v)| {
            (v - l1 * l.powi(th as i32)).abs() <= 1e-9 * v.abs().max(f64::MIN_POSITIVE)
        });
        if closed {
            return Ok(LambdaProfile { tree, kind: Profile::Closed { theta: th, l1 } });
        }
    }
    let xs: Vec<f64> = lambda_grid.iter().map(|l| l.ln()).collect();
    let slopes = monotone_slopes(&xs, &values);
    Ok(LambdaProfile {
        tree,
        kind: Profile::Tabulated { lambdas: lambda_grid.to_vec(), values, slopes },
    })
}

/// `∫₀¹∫ C^ε(x) Y⁰_t(x) dx dt` for the `Y`-corrector of `Z^λ`, together with
/// `∫₀¹∫ |C^ε(x) Y⁰_t(x)| dx dt` as its scale. The first vanishes for even `C^ε`.
pub fn parity_cross_term(cov: &Covariance, lambda: f64) -> Result<(f64, f64)> {
    use crate::kernels::quad::{graded_toward_start, space_breaks, Rule};
    if cov.dim != 1 {
        return Err(Error::Unsupported("parity check in dimension one only".into()));
    }
    let y = crate::kernels::y_corrector(lambda, 0.0, 0)?;
    let rule = Rule::cached(16);
    let tb = graded_toward_start(0.0, 1.0, 30, 0.5);
    let (mut v, mut s) = (0.0, 0.0);
    for (t, wt) in rule.nodes(&tb) {
        let xb = space_breaks(&[(0.0, y.width(t))], 10.0);
        for (x, wx) in rule.nodes(&xb) {
            let f = cov.covariance(x) * y.at(t, x);
            v += wt * wx * f;
            s += wt * wx * f.abs();
        }
    }
    Ok((v, s))
}
