//! Levi parametrix `Q = L + L∗Φ` for `∂_t − b(x)∂_x²`, with
//! `L_t(x,y) = Z^{b(y)}_t(x−y)` and `Φ = Σ_{m ≤ m_max} K^{(m)}`.

use super::quad::{graded_both, space_breaks, Rule};
use super::{fit_power, heat_dx, PowerFit, QuadratureSpec};
use crate::{Error, Result};

/// A 1-periodic coefficient sampled on a uniform grid and read back by
/// periodic cubic interpolation.
#[derive(Clone, Debug)]
pub struct Coefficient {
    samples: Vec<f64>,
    /// Declared Hölder exponent.
    pub holder: f64,
    inf: f64,
    sup: f64,
}

impl Coefficient {
    pub fn from_samples(samples: Vec<f64>, holder: f64) -> Self {
        let inf = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let sup = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { samples, holder, inf, sup }
    }

    pub fn from_fn(n: usize, holder: f64, f: impl Fn(f64) -> f64) -> Self {
        Self::from_samples((0..n).map(|i| f(i as f64 / n as f64)).collect(), holder)
    }

    pub fn constant(v: f64) -> Self {
        Self::from_samples(vec![v; 4], 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.samples.len();
        let u = x.rem_euclid(1.0) * n as f64;
        let i = u.floor() as isize;
        let f = u - i as f64;
        let s = |k: isize| self.samples[(i + k).rem_euclid(n as isize) as usize];
        let (p0, p1, p2, p3) = (s(-1), s(0), s(1), s(2));
        // Catmull–Rom
        p1 + 0.5
            * f
            * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)))
    }

    pub fn inf(&self) -> f64 {
        self.inf
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn is_constant(&self) -> bool {
        self.sup == self.inf
    }
}

/// `K^{(m)}(s, y + ξ√s, y)` on a tensor grid, geometric in `s`, uniform in `ξ`.
#[derive(Clone, Debug)]
struct Table {
    ts: Vec<f64>,
    xi_max: f64,
    nxi: usize,
    vals: Vec<f64>,
    /// Small-time power used below the first level.
    power: f64,
}

impl Table {
    fn dxi(&self) -> f64 {
        2.0 * self.xi_max / (self.nxi - 1) as f64
    }

    fn row(&self, i: usize, xi: f64) -> f64 {
        let u = (xi + self.xi_max) / self.dxi();
        if u < 0.0 || u > (self.nxi - 1) as f64 {
            return 0.0;
        }
        let j = (u.floor() as usize).min(self.nxi - 2);
        let f = u - j as f64;
        let r = &self.vals[i * self.nxi..(i + 1) * self.nxi];
        let g = |k: isize| {
            let k = j as isize + k;
            if k < 0 || k >= self.nxi as isize {
                0.0
            } else {
                r[k as usize]
            }
        };
        let (p0, p1, p2, p3) = (g(-1), g(0), g(1), g(2));
        p1 + 0.5
            * f
            * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)))
    }

    fn eval(&self, s: f64, z: f64, y: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let xi = (z - y) / s.sqrt();
        let n = self.ts.len();
        if s <= self.ts[0] {
            return self.row(0, xi) * (s / self.ts[0]).powf(self.power);
        }
        if s >= self.ts[n - 1] {
            return self.row(n - 1, xi);
        }
        // the levels are geometric
        let u = (s / self.ts[0]).ln() / (self.ts[1] / self.ts[0]).ln();
        let i = (u.floor() as usize).min(n - 2);
        let f = u - i as f64;
        (1.0 - f) * self.row(i, xi) + f * self.row(i + 1, xi)
    }
}

/// Approximate fundamental solution `Q_t(x, y)` at a fixed source point `y`.
#[derive(Clone, Debug)]
pub struct Parametrix {
    b: Coefficient,
    pub y: f64,
    pub m_max: usize,
    spec: QuadratureSpec,
    /// Tables for `K^{(2)}, …, K^{(m_max)}`.
    tables: Vec<Table>,
}

/// Grid of the `K^{(m)}` tables.
const T_LO: f64 = 1e-6;
const T_LEVELS: usize = 20;
const XI_MAX: f64 = 6.0;
const N_XI: usize = 49;

impl Parametrix {
    /// Builds `Φ` up to `K^{(m_max)}` on `t ≤ t_max`.
    pub fn new(b: Coefficient, y: f64, m_max: usize, t_max: f64, spec: QuadratureSpec) -> Result<Self> {
        if !(b.inf() > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "parametrix needs inf b > 0, got {}",
                b.inf()
            )));
        }
        if m_max == 0 {
            return Err(Error::InvalidParameter("parametrix needs m_max >= 1".into()));
        }
        let mut p = Self { b, y, m_max, spec, tables: vec![] };
        if p.b.is_constant() {
            return Ok(p);
        }
        let ts = super::geomspace(T_LO, t_max, T_LEVELS);
        for m in 2..=m_max {
            let table = p.build_table(m, &ts);
            p.tables.push(table);
        }
        Ok(p)
    }

    /// The same parametrix with `Φ` cut at `m ≤ self.m_max`.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m_max {
            return Err(Error::InvalidParameter(format!(
                "truncation {m} outside 1..={}",
                self.m_max
            )));
        }
        let mut p = self.clone();
        p.m_max = m;
        p.tables.truncate(m.saturating_sub(1));
        Ok(p)
    }

    /// `K(t, x, z) = (b(x) − b(z))∂²Z^{b(z)}_t(x − z)`.
    fn levi(&self, t: f64, x: f64, z: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let (bx, bz) = (self.b.eval(x), self.b.eval(z));
        (bx - bz) * heat_dx(bz, 0.0, 2, t, x - z)
    }

    fn width(&self, t: f64) -> f64 {
        (4.0 * self.b.sup() * t.max(0.0)).sqrt()
    }

    /// `K^{(m)}(t, x, y)`.
    pub fn kernel(&self, m: usize, t: f64, x: f64) -> f64 {
        match m {
            0 => 0.0,
            1 => self.levi(t, x, self.y),
            _ if self.b.is_constant() => 0.0,
            _ => self.tables[m - 2].eval(t, x, self.y),
        }
    }

    fn phi(&self, s: f64, z: f64) -> f64 {
        (1..=self.m_max).map(|m| self.kernel(m, s, z)).sum()
    }

    fn build_table(&self, m: usize, ts: &[f64]) -> Table {
        let rule = Rule::cached(self.spec.points);
        let dxi = 2.0 * XI_MAX / (N_XI - 1) as f64;
        let mut vals = Vec::with_capacity(ts.len() * N_XI);
        for &t in ts {
            for j in 0..N_XI {
                let x = self.y + (-XI_MAX + j as f64 * dxi) * t.sqrt();
                let sb = graded_both(0.0, t, self.spec.time_levels, self.spec.time_ratio);
                let v = rule.composite(&sb, |s| {
                    let zb = space_breaks(
                        &[(x, self.width(t - s)), (self.y, self.width(s))],
                        self.spec.space_radius,
                    );
                    rule.composite(&zb, |z| self.levi(t - s, x, z) * self.kernel(m - 1, s, z))
                });
                vals.push(v);
            }
        }
        Table {
            ts: ts.to_vec(),
            xi_max: XI_MAX,
            nxi: N_XI,
            vals,
            power: m as f64 * self.b.holder / 2.0 - 1.0,
        }
    }

    /// `L_t(x, y) = Z^{b(y)}_t(x − y)` and its `x`-derivatives.
    fn frozen(&self, k: u32, t: f64, x: f64) -> f64 {
        heat_dx(self.b.eval(self.y), 0.0, k, t, x - self.y)
    }

    /// `∂_x^k(L∗Φ)_t(x, y)` at several `x` sharing one set of nodes.
    fn correction(&self, k: u32, t: f64, xs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; xs.len()];
        if t <= 0.0 || self.b.is_constant() {
            return out;
        }
        let rule = Rule::cached(self.spec.points);
        let sb = graded_both(0.0, t, self.spec.time_levels, self.spec.time_ratio);
        for (s, ws) in rule.nodes(&sb) {
            let wa = self.width(t - s);
            let mut centers: Vec<(f64, f64)> = xs.iter().map(|&x| (x, wa)).collect();
            centers.push((self.y, self.width(s)));
            let zb = space_breaks(&centers, self.spec.space_radius);
            for (z, wz) in rule.nodes(&zb) {
                let phi = self.phi(s, z);
                if phi == 0.0 {
                    continue;
                }
                let bz = self.b.eval(z);
                for (o, &x) in out.iter_mut().zip(xs) {
                    *o += ws * wz * heat_dx(bz, 0.0, k, t - s, x - z) * phi;
                }
            }
        }
        out
    }

    /// `Q_t(x, y)`.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.frozen(0, t, x) + self.correction(0, t, &[x])[0]
    }

    /// `∂_x^k(Q_t(x,y) − Z^{b(y)}_t(x−y))` for `k ≤ 1`.
    pub fn difference(&self, k: u32, t: f64, x: f64) -> Result<f64> {
        if k > 1 {
            return Err(Error::Unsupported(
                "second derivatives of Q need the Y-corrector decomposition".into(),
            ));
        }
        Ok(self.correction(k, t, &[x])[0])
    }

    /// `|(∂_t − b(x)∂_x²)Q|` at `(t, x)` by centered finite differences.
    pub fn residual_at(&self, t: f64, x: f64) -> f64 {
        let (dt, h) = (1e-3 * t, 2e-3);
        let stencil = [x - h, x, x + h];
        let q = |t: f64| -> Vec<f64> {
            let c = self.correction(0, t, &stencil);
            stencil.iter().zip(c).map(|(&x, c)| self.frozen(0, t, x) + c).collect()
        };
        let mid = q(t);
        let (up, down) = (q(t + dt), q(t - dt));
        let qt = (up[1] - down[1]) / (2.0 * dt);
        let qxx = (mid[2] - 2.0 * mid[1] + mid[0]) / (h * h);
        (qt - self.b.eval(x) * qxx).abs()
    }

    /// Supremum of the residual over a sample window.
    pub fn residual(&self, ts: &[f64], xs: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for &t in ts {
            for &x in xs {
                r = r.max(self.residual_at(t, x));
            }
        }
        r
    }

    /// `sup |K^{(m)}_t(x, y)|` over a sample window.
    pub fn kernel_norm(&self, m: usize, ts: &[f64], xs: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for &t in ts {
            for &x in xs {
                r = r.max(self.kernel(m, t, x).abs());
            }
        }
        r
    }

    /// Envelope exponent gain of `∂^k(Q − Z^{b(y)})` over `∂^k Z^{b(y)}`:
    /// fits `sup_x |∂^k(Q − L)_t|` over `ts`, sampling `x − y` on `offsets·√t`.
    pub fn difference_gain(&self, k: u32, ts: &[f64], offsets: &[f64]) -> Result<(f64, PowerFit)> {
        let mut sups = Vec::with_capacity(ts.len());
        for &t in ts {
            let mut s: f64 = 0.0;
            for o in offsets {
                s = s.max(self.difference(k, t, self.y + o * t.sqrt())?.abs());
            }
            sups.push(s);
        }
        let fit = fit_power(ts, &sups)?;
        // ζ = 2·slope + 1; the frozen kernel has ζ = −k
        Ok((2.0 * fit.slope + 1.0 + k as f64, fit))
    }
}
