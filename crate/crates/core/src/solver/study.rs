use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{solve, CountertermChoice, Forcing, SolverConfig};
use crate::kernels::fit_power;
use crate::{Error, Result};

/// Snapshots kept per run for the time supremum.
pub const MAX_SNAPSHOTS: usize = 512;

/// `t₀′` ends before the first snapshot where a renormalized run exceeds this
/// fraction of the blow-up threshold.
pub const TRUST_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    /// End of the comparison window.
    pub t_prime: f64,
    /// `sup_{t ≤ t₀′}‖u^{ε_k} − u^{ε_{k+1}}‖∞` over the snapshot times, with the
    /// configured counterterm.
    pub gaps_renormalized: Vec<f64>,
    /// The same with the counterterm off.
    pub gaps_bare: Vec<f64>,
    /// Set when the seed is excluded.
    pub note: Option<String>,
}

impl SeedReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.gaps_renormalized.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Every successive ratio below `max_ratio`.
    pub fn decreasing(&self, max_ratio: f64) -> bool {
        self.note.is_none() && !self.ratios().is_empty() && self.ratios().iter().all(|r| *r < max_ratio)
    }

    /// Bare over renormalized gap at the finest pair.
    pub fn separation(&self) -> f64 {
        match (self.gaps_bare.last(), self.gaps_renormalized.last()) {
            (Some(b), Some(r)) => b / r,
            _ => f64::NAN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub eps: Vec<f64>,
    pub seeds: Vec<SeedReport>,
}

impl ConvergenceReport {
    /// Seeds whose gaps decrease with every ratio below `max_ratio` and whose
    /// bare gap is at least `separation` times the renormalized one.
    pub fn passing(&self, max_ratio: f64, separation: f64) -> usize {
        self.seeds.iter().filter(|s| s.decreasing(max_ratio) && s.separation() >= separation).count()
    }

    /// `seed,k,eps_k,eps_k1,t_prime,gap_renormalized,gap_bare,note`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.into());
        out.write_record(["seed", "k", "eps_k", "eps_k1", "t_prime", "gap_renormalized", "gap_bare", "note"])
            .map_err(io)?;
        for s in &self.seeds {
            for k in 0..self.eps.len() - 1 {
                let get = |v: &[f64]| v.get(k).map(|g| g.to_string()).unwrap_or_default();
                out.write_record([
                    s.seed.to_string(),
                    k.to_string(),
                    self.eps[k].to_string(),
                    self.eps[k + 1].to_string(),
                    s.t_prime.to_string(),
                    get(&s.gaps_renormalized),
                    get(&s.gaps_bare),
                    s.note.clone().unwrap_or_default(),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

struct Run {
    snapshots: Vec<Vec<f64>>,
    times: Vec<f64>,
    failure: Option<String>,
}

fn record(cfg: &SolverConfig, eps: f64, seed: u64) -> Result<Run> {
    let mut snapshots = Vec::new();
    let mut times = Vec::new();
    let stride = cfg.steps().div_ceil(MAX_SNAPSHOTS).max(1);
    let mut i = 0;
    let out = solve(cfg, eps, seed, |u| {
        if i % stride == 0 || i == cfg.steps() {
            snapshots.push(u.values.clone());
            times.push(u.t);
        }
        i += 1;
    });
    let failure = match out {
        Ok(_) => None,
        Err(Error::Numerical(m)) => Some(m),
        Err(e) => return Err(e),
    };
    Ok(Run { snapshots, times, failure })
}

fn sup_gap(a: &Run, b: &Run, upto: usize) -> f64 {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .take(upto)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn study_seed(cfg: &SolverConfig, bare: &SolverConfig, eps: &[f64], seed: u64) -> Result<SeedReport> {
    let ren: Vec<Run> = eps.iter().map(|&e| record(cfg, e, seed)).collect::<Result<_>>()?;
    let off: Vec<Run> = eps.iter().map(|&e| record(bare, e, seed)).collect::<Result<_>>()?;
    let trust = TRUST_FRACTION * cfg.blowup;
    let upto = ren
        .iter()
        .map(|r| {
            r.snapshots
                .iter()
                .position(|u| u.iter().any(|v| !(v.abs() <= trust)))
                .unwrap_or(r.snapshots.len())
        })
        .min()
        .unwrap_or(0);
    let t_prime = if upto == 0 { 0.0 } else { ren[0].times[upto - 1] };
    let note = ren
        .iter()
        .zip(eps)
        .find_map(|(r, e)| r.failure.as_ref().map(|m| format!("renormalized run at ε = {e} failed: {m}")));
    if let Some(note) = note {
        return Ok(SeedReport { seed, t_prime, gaps_renormalized: vec![], gaps_bare: vec![], note: Some(note) });
    }
    let gaps = |runs: &[Run]| -> Vec<f64> { runs.windows(2).map(|w| sup_gap(&w[0], &w[1], upto)).collect() };
    Ok(SeedReport { seed, t_prime, gaps_renormalized: gaps(&ren), gaps_bare: gaps(&off), note: None })
}

/// Cauchy gaps between consecutive `ε` with the noise coupled through the
/// seed, for the configured counterterm and with the counterterm off.
pub fn converge_study(cfg: &SolverConfig, eps_list: &[f64], seeds: &[u64]) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if eps_list.len() < 2 {
        return Err(Error::InvalidParameter("need at least two ε".into()));
    }
    if eps_list.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-12) {
        return Err(Error::InvalidParameter(format!("ε list {eps_list:?} is not dyadic and decreasing")));
    }
    let bare = SolverConfig { counterterm: CountertermChoice::Off, ..cfg.clone() };
    let seeds = seeds.par_iter().map(|&s| study_seed(cfg, &bare, eps_list, s)).collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport { eps: eps_list.to_vec(), seeds })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderReport {
    pub dts: Vec<f64>,
    /// `‖u_{Δt_k} − u_{Δt_{k+1}}‖∞` at the horizon.
    pub time_gaps: Vec<f64>,
    pub time_order: f64,
    pub nxs: Vec<usize>,
    /// `‖u_{N_k} − u_{N_{k+1}}‖∞` on the coarse points at the horizon.
    pub space_gaps: Vec<f64>,
    pub space_order: f64,
}

/// Grids of the spatial self-convergence fit.
pub const ORDER_NXS: [usize; 4] = [32, 64, 128, 256];
/// Halvings of `Δt` in the temporal fit.
pub const ORDER_DT_LEVELS: u32 = 5;

/// Self-convergence orders in `Δt` (at the configured `N`) and in `Δx`
/// (at the configured `Δt`), for deterministic forcing.
pub fn order_study(cfg: &SolverConfig) -> Result<OrderReport> {
    cfg.validate()?;
    if matches!(cfg.forcing, Forcing::Noise { .. }) || cfg.counterterm != CountertermChoice::Off {
        return Err(Error::InvalidParameter("order fits need deterministic forcing and no counterterm".into()));
    }
    let finals = |c: SolverConfig| solve(&c, 1.0, 0, |_| ()).map(|s| s.field.values);

    let dts: Vec<f64> = (0..ORDER_DT_LEVELS).map(|k| cfg.dt / 2f64.powi(k as i32)).collect();
    let runs = dts
        .par_iter()
        .map(|&dt| finals(SolverConfig { dt, ..cfg.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let time_gaps: Vec<f64> = runs
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let time_order = fit_power(&dts[..dts.len() - 1], &time_gaps)?.slope;

    let runs = ORDER_NXS
        .par_iter()
        .map(|&nx| finals(SolverConfig { nx, ..cfg.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let space_gaps: Vec<f64> = runs
        .windows(2)
        .map(|w| (0..w[0].len()).map(|j| (w[0][j] - w[1][2 * j]).abs()).fold(0.0, f64::max))
        .collect();
    let hs: Vec<f64> = ORDER_NXS[..ORDER_NXS.len() - 1].iter().map(|&n| 1.0 / n as f64).collect();
    let space_order = fit_power(&hs, &space_gaps)?.slope;

    Ok(OrderReport { dts, time_gaps, time_order, nxs: ORDER_NXS.to_vec(), space_gaps, space_order })
}
