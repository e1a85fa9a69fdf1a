//! Mollified Gaussian noise on the unit torus, synthesized mode by mode.
//!
//! The Fourier coefficients of every mode come from a counter-based stream
//! keyed by `(seed, mode, time index, frequency)`, so changing `ε` or
//! refining the grid reuses the same underlying Gaussians.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rustfft::FftPlanner;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Constant in time.
    #[serde(rename = "spatial_noise")]
    Spatial,
    WhiteInTime,
}

impl NoiseMode {
    fn tag(self) -> u64 {
        match self {
            NoiseMode::Spatial => 0,
            NoiseMode::WhiteInTime => 1,
        }
    }
}

/// Even, compactly supported, unit-mass bump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mollifier {
    /// Centered cubic B-spline, supported on `[−2, 2]`.
    CubicBSpline,
}

impl Mollifier {
    /// `ρ_ε(x) = ρ(x/ε)/ε`.
    pub fn eval(self, x: f64, eps: f64) -> f64 {
        let u = (x / eps).abs();
        let v = match self {
            Mollifier::CubicBSpline if u < 1.0 => 2.0 / 3.0 - u * u + 0.5 * u * u * u,
            Mollifier::CubicBSpline if u < 2.0 => (2.0 - u).powi(3) / 6.0,
            Mollifier::CubicBSpline => 0.0,
        };
        v / eps
    }

    /// `ρ̂(k) = ∫ρ(x)e^{−ikx}dx`; `ρ̂_ε(k) = ρ̂(εk)`.
    pub fn fourier(self, k: f64) -> f64 {
        match self {
            Mollifier::CubicBSpline => {
                let h = 0.5 * k;
                if h.abs() < 1e-4 {
                    // sinc⁴ near 0
                    1.0 - 2.0 * h * h / 3.0
                } else {
                    (h.sin() / h).powi(4)
                }
            }
        }
    }

    /// Half-width of the support of `ρ`.
    pub fn radius(self) -> f64 {
        2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    pub mode: NoiseMode,
    /// The noise has parabolic regularity `α − 2`.
    pub alpha: f64,
    pub mollifier: Mollifier,
    pub eps: f64,
    /// Grid points in space, a power of two.
    pub nx: usize,
    /// Time slices (ignored for spatial noise).
    pub nt: usize,
    pub dt: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.nx.is_power_of_two() || self.nx < 4 {
            return Err(Error::InvalidParameter(format!("N_x = {} is not a power of two ≥ 4", self.nx)));
        }
        if !(self.eps.is_finite() && self.eps >= 2.0 * PI / self.nx as f64) {
            return Err(Error::InvalidParameter(format!(
                "ε = {} is below the grid resolution 2π/N_x = {}",
                self.eps,
                2.0 * PI / self.nx as f64
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("α must be finite".into()));
        }
        if self.mode == NoiseMode::WhiteInTime && (self.nt == 0 || !(self.dt > 0.0)) {
            return Err(Error::InvalidParameter("white-in-time noise needs N_t ≥ 1 and Δt > 0".into()));
        }
        Ok(())
    }

    /// `β` with `Ĉ(n) = ρ̂(2πnε)²|n|^{−2β}`.
    pub fn spectral_exponent(&self) -> f64 {
        match self.mode {
            NoiseMode::Spatial => self.alpha - 1.5,
            NoiseMode::WhiteInTime => self.alpha - 0.5,
        }
    }

    /// Highest synthesized frequency.
    pub fn max_mode(&self) -> usize {
        self.nx / 2 - 1
    }

    /// `Ĉ(n)`; the zero mode is excluded.
    pub fn spectrum(&self, n: i64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n.unsigned_abs() as f64;
        self.mollifier.fourier(2.0 * PI * n * self.eps).powi(2) * n.powf(-2.0 * self.spectral_exponent())
    }

    /// Spatial covariance `C(x) = Σ_{0<|n|<N/2} Ĉ(n)e^{2πinx}` (per unit time when white).
    pub fn covariance(&self, x: f64) -> f64 {
        (1..=self.max_mode() as i64).map(|n| 2.0 * self.spectrum(n) * (2.0 * PI * n as f64 * x).cos()).sum()
    }

    /// Standard Gaussian pairs `(A_n, B_n)`, `n = 1, …, max_mode`, of time slice `row`.
    pub fn mode_coefficients(&self, row: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.mode.tag() << 48 | row);
        (1..=self.max_mode() as u128)
            .map(|n| {
                rng.set_word_pos(4 * n);
                box_muller(rng.next_u64(), rng.next_u64())
            })
            .collect()
    }

    fn rows(&self) -> usize {
        match self.mode {
            NoiseMode::Spatial => 1,
            NoiseMode::WhiteInTime => self.nt,
        }
    }
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    // uniform on (0, 1]
    let u = ((a >> 11) + 1) as f64 / (1u64 << 53) as f64;
    let v = (b >> 11) as f64 / (1u64 << 53) as f64;
    let r = (-2.0 * u.ln()).sqrt();
    (r * (2.0 * PI * v).cos(), r * (2.0 * PI * v).sin())
}

/// Row-major samples `ξ(t_i, x_j)`, `x_j = j/N_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub seed: u64,
    pub data: Vec<f64>,
}

impl NoiseField {
    pub const MAGIC: [u8; 8] = *b"QGKFLD01";
    pub const HEADER_BYTES: usize = 8 + 8 + 8 + 8 + 8 + 8;

    pub fn rows(&self) -> usize {
        self.data.len() / self.nx
    }

    /// Slice `i`; a single-row (time-constant) field returns its row for every `i`.
    pub fn slice(&self, i: usize) -> &[f64] {
        let i = i.min(self.rows() - 1);
        &self.data[i * self.nx..(i + 1) * self.nx]
    }

    /// Header `MAGIC, rows, nx, dt, dx, seed` then the payload, all little-endian.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&Self::MAGIC)?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.nx as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.dx.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        if next(r)? != Self::MAGIC {
            return Err(Error::Parse { pos: 0, msg: "not a field dump".into() });
        }
        let rows = u64::from_le_bytes(next(r)?) as usize;
        let nx = u64::from_le_bytes(next(r)?) as usize;
        let dt = f64::from_le_bytes(next(r)?);
        let dx = f64::from_le_bytes(next(r)?);
        let seed = u64::from_le_bytes(next(r)?);
        let len = rows
            .checked_mul(nx)
            .filter(|&l| l > 0)
            .ok_or_else(|| Error::Parse { pos: 8, msg: "bad dimensions".into() })?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(next(r)?));
        }
        Ok(Self { nx, dt, dx, seed, data })
    }

    /// Long-format CSV `i,j,t,x,value`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.into());
        out.write_record(["i", "j", "t", "x", "value"]).map_err(io)?;
        for i in 0..self.rows() {
            for (j, v) in self.slice(i).iter().enumerate() {
                out.write_record(&[
                    i.to_string(),
                    j.to_string(),
                    (i as f64 * self.dt).to_string(),
                    (j as f64 * self.dx).to_string(),
                    v.to_string(),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `ξ^ε(t_i, x_j) = Σ_n σ_n√2(A_n cos 2πnx_j + B_n sin 2πnx_j)`, `σ_n = Ĉ(n)^{1/2}`,
/// scaled by `Δt^{−1/2}` when white in time.
pub fn sample(spec: &NoiseSpec) -> Result<NoiseField> {
    spec.validate()?;
    let nx = spec.nx;
    let sigma: Vec<f64> = (1..=spec.max_mode()).map(|n| spec.spectrum(n as i64).sqrt()).collect();
    let scale = match spec.mode {
        NoiseMode::Spatial => 2f64.sqrt(),
        NoiseMode::WhiteInTime => (2.0 / spec.dt).sqrt(),
    };
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(nx);
    let mut data = vec![0.0; spec.rows() * nx];
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    for (i, row) in data.chunks_mut(nx).enumerate() {
        buf.fill(Complex64::new(0.0, 0.0));
        // a cos θ + b sin θ = Re((a − ib)e^{iθ})
        for (m, (&s, (a, b))) in sigma.iter().zip(spec.mode_coefficients(i as u64)).enumerate() {
            let c = Complex64::new(a, -b) * (0.5 * scale * s);
            buf[m + 1] = c;
            buf[nx - m - 1] = c.conj();
        }
        fft.process(&mut buf);
        for (v, c) in row.iter_mut().zip(&buf) {
            *v = c.re;
        }
    }
    Ok(NoiseField {
        nx,
        dt: if spec.mode == NoiseMode::Spatial { 0.0 } else { spec.dt },
        dx: 1.0 / nx as f64,
        seed: spec.seed,
        data,
    })
}
