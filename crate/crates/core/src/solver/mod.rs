//! Linearly-implicit finite differences for the renormalized equation
//! `∂_t u = a(u)∂²u − cu + f(u)ξ^ε + g(u)(∂u)² + counterterm` on the unit torus.

use std::f64::consts::PI;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::constants::{lambda_profile, Covariance, FourierSpec, LambdaProfile, Symbols};
use crate::differentials::{
    counterterm, Base, ConstantsSource, CountertermMode, Scaling, SymbolicExpr, Var,
};
use crate::kernels::geomspace;
use crate::noise::{sample, Mollifier, NoiseField, NoiseMode, NoiseSpec};
use crate::trees::{RuleSet, Tree};
use crate::{parse_rational, Error, Result};

mod study;

pub use study::{converge_study, order_study, ConvergenceReport, OrderReport, SeedReport, MAX_SNAPSHOTS, TRUST_FRACTION};

/// Values on the grid `x_j = j/N`, indices taken modulo `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub t: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn nx(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx() as f64
    }

    pub fn at(&self, j: isize) -> f64 {
        self.values[j.rem_euclid(self.nx() as isize) as usize]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Centered first difference.
    pub fn d1(&self) -> Vec<f64> {
        let n = self.nx() as isize;
        let h = self.dx();
        (0..n).map(|j| (self.at(j + 1) - self.at(j - 1)) / (2.0 * h)).collect()
    }
}

/// A scalar coefficient function of `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coef {
    Constant(f64),
    /// `offset + amp·sin(freq·u + phase)`.
    Trig { offset: f64, amp: f64, freq: f64, phase: f64 },
}

impl Coef {
    pub fn eval(&self, u: f64) -> f64 {
        self.derivative(0, u)
    }

    pub fn derivative(&self, k: u32, u: f64) -> f64 {
        match *self {
            Coef::Constant(v) => {
                if k == 0 {
                    v
                } else {
                    0.0
                }
            }
            Coef::Trig { offset, amp, freq, phase } => {
                let d = amp * freq.powi(k as i32) * (freq * u + phase + 0.5 * PI * k as f64).sin();
                if k == 0 {
                    offset + d
                } else {
                    d
                }
            }
        }
    }

    /// Closed range of values over all `u`.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Coef::Constant(v) => (v, v),
            Coef::Trig { freq, .. } if freq == 0.0 => (self.eval(0.0), self.eval(0.0)),
            Coef::Trig { offset, amp, .. } => (offset - amp.abs(), offset + amp.abs()),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Coef::Constant(v) => v.is_finite(),
            Coef::Trig { offset, amp, freq, phase } => {
                [offset, amp, freq, phase].iter().all(|v| v.is_finite())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Constant(f64),
    /// `Σ a_n cos 2πnx + b_n sin 2πnx` over `(n, a_n, b_n)`.
    Fourier(Vec<(u32, f64, f64)>),
    /// `amp·Σ_{j<terms} 2^{−jγ} cos(2π2^j x)`, Hölder of order `γ`.
    Weierstrass { amp: f64, exponent: f64, terms: u32 },
}

impl Initial {
    pub fn sample(&self, nx: usize) -> Vec<f64> {
        let x = |j: usize| j as f64 / nx as f64;
        match self {
            Initial::Constant(v) => vec![*v; nx],
            Initial::Fourier(modes) => (0..nx)
                .map(|j| {
                    modes
                        .iter()
                        .map(|&(n, a, b)| {
                            let k = 2.0 * PI * n as f64 * x(j);
                            a * k.cos() + b * k.sin()
                        })
                        .sum()
                })
                .collect(),
            Initial::Weierstrass { amp, exponent, terms } => (0..nx)
                .map(|j| {
                    amp * (0..*terms)
                        .map(|m| {
                            let s = 2f64.powi(m as i32);
                            s.powf(-exponent) * (2.0 * PI * s * x(j)).cos()
                        })
                        .sum::<f64>()
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    None,
    /// Mollified Gaussian noise; `ε` and the seed are supplied per run.
    Noise { mode: NoiseMode, alpha: f64, mollifier: Mollifier },
    /// `cos(2πνt)·Σ c_n cos 2πnx` over `(n, c_n)`, the same for every `ε` and seed.
    Smooth { modes: Vec<(u32, f64)>, time_freq: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountertermChoice {
    #[default]
    Off,
    /// The simplified counterterm over the negative even-noise trees at `α`
    /// (a `p/q` string equal to the noise regularity).
    Renormalized { alpha: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub a: Coef,
    pub f: Coef,
    pub g: Coef,
    pub u0: Initial,
    pub mass: f64,
    pub dt: f64,
    pub nx: usize,
    pub horizon: f64,
    pub forcing: Forcing,
    pub counterterm: CountertermChoice,
    /// Runs abort once `‖u‖∞` exceeds this.
    pub blowup: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !self.nx.is_power_of_two() || self.nx < 4 {
            return bad(format!("N_x = {} is not a power of two ≥ 4", self.nx));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("need Δt > 0 and t₀ > 0, got {} and {}", self.dt, self.horizon));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be finite and ≥ 0, got {}", self.mass));
        }
        if !(self.blowup > 0.0) {
            return bad("blow-up threshold must be positive".into());
        }
        if ![self.a, self.f, self.g].iter().all(Coef::is_finite) {
            return bad("coefficients must be finite".into());
        }
        let (lo, _) = self.a.range();
        if !(lo > 0.0) {
            return bad(format!("inf a = {lo} must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    /// `Δt·sup a/Δx²`.
    pub fn stability_number(&self) -> f64 {
        self.dt * self.a.range().1 * (self.nx * self.nx) as f64
    }

    pub fn noise_spec(&self, eps: f64, seed: u64) -> Option<NoiseSpec> {
        match self.forcing {
            Forcing::Noise { mode, alpha, mollifier } => Some(NoiseSpec {
                seed,
                mode,
                alpha,
                mollifier,
                eps,
                nx: self.nx,
                nt: self.steps(),
                dt: self.dt,
            }),
            _ => None,
        }
    }
}

/// The forcing term sampled on the grid for one run.
#[derive(Clone, Debug, PartialEq)]
pub enum ForcingField {
    Zero,
    /// Row `i` drives step `i` (a single row drives every step).
    Samples(NoiseField),
    Smooth { profile: Vec<f64>, time_freq: f64 },
}

impl ForcingField {
    pub fn new(cfg: &SolverConfig, eps: f64, seed: u64) -> Result<Self> {
        Ok(match &cfg.forcing {
            Forcing::None => ForcingField::Zero,
            Forcing::Noise { .. } => ForcingField::Samples(sample(&cfg.noise_spec(eps, seed).unwrap())?),
            Forcing::Smooth { modes, time_freq } => ForcingField::Smooth {
                profile: (0..cfg.nx)
                    .map(|j| {
                        let x = j as f64 / cfg.nx as f64;
                        modes.iter().map(|&(n, c)| c * (2.0 * PI * n as f64 * x).cos()).sum()
                    })
                    .collect(),
                time_freq: *time_freq,
            },
        })
    }

    /// The same forcing moved `s` grid points to the right.
    pub fn rotated(&self, s: usize) -> Self {
        let rot = |v: &[f64]| -> Vec<f64> {
            let n = v.len();
            (0..n).map(|j| v[(j + n - s % n) % n]).collect()
        };
        match self {
            ForcingField::Zero => ForcingField::Zero,
            ForcingField::Samples(f) => {
                let data = (0..f.rows()).flat_map(|i| rot(f.slice(i))).collect();
                ForcingField::Samples(NoiseField { data, ..f.clone() })
            }
            ForcingField::Smooth { profile, time_freq } => {
                ForcingField::Smooth { profile: rot(profile), time_freq: *time_freq }
            }
        }
    }

    fn write_row(&self, i: usize, t: f64, out: &mut [f64]) {
        match self {
            ForcingField::Zero => out.fill(0.0),
            ForcingField::Samples(f) => out.copy_from_slice(f.slice(i)),
            ForcingField::Smooth { profile, time_freq } => {
                let c = (2.0 * PI * time_freq * t).cos();
                for (o, p) in out.iter_mut().zip(profile) {
                    *o = c * p;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    Param(usize),
    Func(Base, u32),
    U,
    Du,
    Mass,
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    coef: f64,
    factors: Vec<(Slot, i32)>,
}

/// The counterterm as a function of `(u, ∂u)`, with every constant `ℓ(τ)`
/// evaluated at `λ = a(u)`.
#[derive(Clone, Debug)]
pub struct CountertermField {
    expr: Option<SymbolicExpr>,
    terms: Vec<Term>,
    profiles: Vec<LambdaProfile>,
    a: Coef,
    f: Coef,
    g: Coef,
    mass: f64,
}

/// Points of the `λ` grid behind each tabulated profile.
const LAMBDA_POINTS: usize = 17;

impl CountertermField {
    pub fn off() -> Self {
        Self {
            expr: None,
            terms: Vec::new(),
            profiles: Vec::new(),
            a: Coef::Constant(1.0),
            f: Coef::Constant(0.0),
            g: Coef::Constant(0.0),
            mass: 0.0,
        }
    }

    pub fn build(cfg: &SolverConfig, eps: f64) -> Result<Self> {
        let CountertermChoice::Renormalized { alpha } = &cfg.counterterm else {
            return Ok(Self::off());
        };
        let Forcing::Noise { mode, alpha: noise_alpha, mollifier } = cfg.forcing else {
            return Err(Error::InvalidParameter("a counterterm needs noise forcing".into()));
        };
        let q = parse_rational(alpha)?;
        if (q.to_f64().unwrap_or(f64::NAN) - noise_alpha).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "counterterm α = {q} differs from the noise regularity {noise_alpha}"
            )));
        }
        let mut rules = RuleSet::new(q, Rational64::zero());
        rules.max_p = Some(0);
        rules.even_noise_only = true;
        let report = counterterm(&rules, &ConstantsSource::Symbols(Scaling::None), CountertermMode::Simplified)?;

        let cov = Covariance { mode, mollifier, eps, alpha: noise_alpha, dim: 1 };
        let spec = FourierSpec { mass: cfg.mass, symbols: Symbols::Scheme { nx: cfg.nx, dt: cfg.dt }, ..Default::default() };
        let (lo, hi) = cfg.a.range();
        let grid = geomspace(0.9 * lo, 1.1 * hi, LAMBDA_POINTS);

        let mut names: Vec<String> = Vec::new();
        let mut profiles = Vec::new();
        let mut terms = Vec::new();
        for (m, c) in report.total.terms() {
            let mut factors = Vec::new();
            for (v, e) in m.factors() {
                let slot = match v {
                    Var::Param(name) => {
                        let i = match names.iter().position(|n| **n == **name) {
                            Some(i) => i,
                            None => {
                                let tree = name
                                    .strip_prefix("l[")
                                    .and_then(|s| s.strip_suffix(']'))
                                    .ok_or_else(|| Error::Unsupported(format!("parameter {name}")))?;
                                profiles.push(lambda_profile(&Tree::parse(tree)?, &cov, &spec, &grid)?);
                                names.push(name.to_string());
                                names.len() - 1
                            }
                        };
                        Slot::Param(i)
                    }
                    // on the diagonal both arguments are u
                    Var::Func(s) => Slot::Func(s.base, s.order),
                    Var::C(k) | Var::Cp(k) => match (k.k1, k.k2) {
                        (0, 0) => Slot::U,
                        (0, 1) => Slot::Du,
                        _ => return Err(Error::Unsupported(format!("jet {v} in the counterterm"))),
                    },
                    Var::Mass => Slot::Mass,
                };
                factors.push((slot, *e));
            }
            terms.push(Term { coef: c.to_f64().unwrap_or(f64::NAN), factors });
        }
        Ok(Self { expr: Some(report.total), terms, profiles, a: cfg.a, f: cfg.f, g: cfg.g, mass: cfg.mass })
    }

    pub fn is_off(&self) -> bool {
        self.expr.is_none()
    }

    /// The symbolic total with `l[τ]` standing for `ℓ_{a(u)}(τ)`.
    pub fn expression(&self) -> Option<&SymbolicExpr> {
        self.expr.as_ref()
    }

    pub fn profiles(&self) -> &[LambdaProfile] {
        &self.profiles
    }

    pub fn eval(&self, u: f64, du: f64) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let lambda = self.a.eval(u);
        let value = |s: Slot| match s {
            Slot::Param(i) => self.profiles[i].eval(lambda),
            Slot::Func(Base::A, k) => self.a.derivative(k, u),
            Slot::Func(Base::F, k) => self.f.derivative(k, u),
            Slot::Func(Base::G, k) => self.g.derivative(k, u),
            Slot::U => u,
            Slot::Du => du,
            Slot::Mass => self.mass,
        };
        self.terms
            .iter()
            .map(|t| t.factors.iter().fold(t.coef, |x, &(s, e)| x * value(s).powi(e)))
            .sum()
    }
}

/// Solves `A x = d` for the periodic tridiagonal `A` with rows
/// `sub[j]·x_{j−1} + diag[j]·x_j + sup[j]·x_{j+1}`.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    // corners: A[0][n−1] and A[n−1][0]
    let (top, bottom) = (sub[0], sup[n - 1]);
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= top * bottom / gamma;
    let x = thomas(sub, &bb, sup, d)?;
    let mut e = vec![0.0; n];
    e[0] = gamma;
    e[n - 1] = bottom;
    let z = thomas(sub, &bb, sup, &e)?;
    let fact = (x[0] + top * x[n - 1] / gamma) / (1.0 + z[0] + top * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(x, z)| x - fact * z).collect())
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut bet = diag[0];
    if bet.abs() < 1e-300 {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    x[0] = d[0] / bet;
    for j in 1..n {
        c[j] = sup[j - 1] / bet;
        bet = diag[j] - sub[j] * c[j];
        if bet.abs() < 1e-300 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        x[j] = (d[j] - sub[j] * x[j - 1]) / bet;
    }
    for j in (0..n - 1).rev() {
        x[j] -= c[j + 1] * x[j + 1];
    }
    Ok(x)
}

/// One step `(1 + Δt c − Δt a(uⁿ)D₂)u^{n+1} = uⁿ + Δt[f(uⁿ)ξ + g(uⁿ)(D₁uⁿ)² + counterterm(uⁿ, D₁uⁿ)]`.
pub fn step(u: &Field, cfg: &SolverConfig, ct: &CountertermField, xi: &[f64]) -> Result<Field> {
    let n = u.nx();
    if xi.len() != n || cfg.nx != n {
        return Err(Error::InvalidParameter("grid size mismatch".into()));
    }
    let (dt, h) = (cfg.dt, u.dx());
    let du = u.d1();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        let v = u.values[j];
        let r = dt * cfg.a.eval(v) / (h * h);
        sub[j] = -r;
        sup[j] = -r;
        diag[j] = 1.0 + dt * cfg.mass + 2.0 * r;
        rhs[j] = v + dt * (cfg.f.eval(v) * xi[j] + cfg.g.eval(v) * du[j] * du[j] + ct.eval(v, du[j]));
    }
    let values = solve_cyclic(&sub, &diag, &sup, &rhs)?;
    Ok(Field { t: u.t + dt, values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub field: Field,
    pub steps: usize,
    pub stability: f64,
    /// Largest `‖uⁿ‖∞` seen.
    pub max_abs: f64,
}

/// Runs from `u₀` to the horizon, calling `observer` on `u⁰` and after every step.
pub fn integrate(
    cfg: &SolverConfig,
    ct: &CountertermField,
    forcing: &ForcingField,
    u0: Field,
    mut observer: impl FnMut(&Field),
) -> Result<Solution> {
    cfg.validate()?;
    let mut u = u0;
    let mut xi = vec![0.0; cfg.nx];
    let mut max_abs = u.sup_norm();
    observer(&u);
    let steps = cfg.steps();
    for i in 0..steps {
        forcing.write_row(i, u.t, &mut xi);
        u = step(&u, cfg, ct, &xi)?;
        let m = u.sup_norm();
        if !m.is_finite() || m > cfg.blowup || u.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "blow-up at t = {:.6} (step {}): ‖u‖∞ = {m:.3e} exceeds {:.3e}",
                u.t,
                i + 1,
                cfg.blowup
            )));
        }
        max_abs = max_abs.max(m);
        observer(&u);
    }
    Ok(Solution { field: u, steps, stability: cfg.stability_number(), max_abs })
}

/// Samples the forcing for `(ε, seed)`, builds the counterterm and integrates.
pub fn solve(cfg: &SolverConfig, eps: f64, seed: u64, observer: impl FnMut(&Field)) -> Result<Solution> {
    cfg.validate()?;
    let forcing = ForcingField::new(cfg, eps, seed)?;
    let ct = CountertermField::build(cfg, eps)?;
    let u0 = Field { t: 0.0, values: cfg.u0.sample(cfg.nx) };
    integrate(cfg, &ct, &forcing, u0, observer)
}
