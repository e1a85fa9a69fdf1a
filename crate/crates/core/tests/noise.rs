use qgkpz::kernels::quad::Rule;
use qgkpz::noise::{sample, Mollifier, NoiseField, NoiseMode, NoiseSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn spec(seed: u64) -> NoiseSpec {
    NoiseSpec {
        seed,
        mode: NoiseMode::Spatial,
        alpha: 1.5,
        mollifier: Mollifier::CubicBSpline,
        eps: 1.0 / 32.0,
        nx: 256,
        nt: 1,
        dt: 1.0,
    }
}

/// `ρ_ε∗ρ_ε` periodized, minus its mean: the covariance of spatially white
/// noise mollified by `ρ_ε` with the zero mode removed.
fn rho2_periodic(m: Mollifier, eps: f64, x: f64) -> f64 {
    let rule = Rule::gauss(16);
    let mut s = 0.0;
    for shift in -2..=2 {
        let y = x + shift as f64;
        // knots of both factors
        let mut breaks: Vec<f64> = (-2..=2)
            .flat_map(|i| [i as f64 * eps, y - i as f64 * eps])
            .filter(|z| z.abs() <= 2.0 * eps)
            .collect();
        breaks.extend([-2.0 * eps, 2.0 * eps]);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        s += rule.composite(&breaks, |z| m.eval(z, eps) * m.eval(y - z, eps));
    }
    s - 1.0
}

#[test]
fn mollifier_is_even_normalized_and_matches_its_transform() {
    let m = Mollifier::CubicBSpline;
    let rule = Rule::gauss(16);
    let eps = 0.1;
    let breaks: Vec<f64> = (-8..=8).map(|i| i as f64 * eps / 4.0).collect();
    assert!((rule.composite(&breaks, |x| m.eval(x, eps)) - 1.0).abs() < 1e-13);
    for x in [0.0, 0.03, 0.11, 0.25] {
        assert_eq!(m.eval(x, eps), m.eval(-x, eps));
    }
    assert_eq!(m.eval(0.21, eps), 0.0);
    for k in [0.5, 3.0, 17.0] {
        let ft = rule.composite(&breaks, |x| m.eval(x, eps) * (k * x).cos());
        assert!((ft - m.fourier(k * eps)).abs() < 1e-12, "{ft} vs {}", m.fourier(k * eps));
    }
}

#[test]
fn covariance_is_the_periodized_self_convolution() {
    let s = NoiseSpec { nx: 4096, ..spec(0) };
    for x in [0.0, 0.01, 0.04, 0.2, 0.5] {
        let (c, want) = (s.covariance(x), rho2_periodic(s.mollifier, s.eps, x));
        assert!((c - want).abs() < 1e-6 * want.abs().max(1.0), "x={x}: {c} vs {want}");
        assert_eq!(c, s.covariance(-x));
    }
}

#[test]
fn synthesis_is_the_mode_sum() {
    use std::f64::consts::PI;
    let s = NoiseSpec { mode: NoiseMode::WhiteInTime, nt: 2, dt: 0.01, nx: 64, eps: 0.125, ..spec(9) };
    let f = sample(&s).unwrap();
    for row in 0..2 {
        let ab = s.mode_coefficients(row as u64);
        for j in [0usize, 5, 31, 63] {
            let x = j as f64 / 64.0;
            let want: f64 = ab
                .iter()
                .enumerate()
                .map(|(m, (a, b))| {
                    let n = (m + 1) as f64;
                    (2.0 * s.spectrum(m as i64 + 1) / s.dt).sqrt()
                        * (a * (2.0 * PI * n * x).cos() + b * (2.0 * PI * n * x).sin())
                })
                .sum();
            assert!((f.slice(row)[j] - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }
}

#[test]
fn same_seed_is_bit_identical_and_seeds_differ() {
    let a = sample(&spec(7)).unwrap();
    let b = sample(&spec(7)).unwrap();
    let c = sample(&spec(8)).unwrap();
    assert_eq!(a.data, b.data);
    assert_ne!(a.data, c.data);
}

#[test]
fn sample_mean_is_centered() {
    let s = spec(0);
    let m = 64;
    let mut mean = 0.0;
    for seed in 0..m {
        mean += sample(&spec(seed)).unwrap().slice(0)[17];
    }
    mean /= m as f64;
    let sd = (s.covariance(0.0) / m as f64).sqrt();
    assert!(mean.abs() < 4.0 * sd, "{mean} vs 4·{sd}");
}

#[test]
fn empirical_covariance_matches_within_monte_carlo_error() {
    let s = spec(0);
    let m = 400;
    let fields: Vec<NoiseField> = (0..m).map(|seed| sample(&spec(seed)).unwrap()).collect();
    for lag in [0usize, 4, 8, 32] {
        let want = s.covariance(lag as f64 / s.nx as f64);
        // average over base points too; pairs are not independent so use a loose band
        let mut est = 0.0;
        for f in &fields {
            let r = f.slice(0);
            est += (0..s.nx).map(|j| r[j] * r[(j + lag) % s.nx]).sum::<f64>() / s.nx as f64;
        }
        est /= m as f64;
        let sd = ((s.covariance(0.0).powi(2) + want * want) / m as f64).sqrt();
        assert!((est - want).abs() < 4.0 * sd, "lag {lag}: {est} vs {want}");
    }
}

#[test]
fn covariance_depends_only_on_the_lag() {
    // χ² over well-separated base points, each compared with the exact C(h)
    let s = spec(0);
    let m = 400;
    let fields: Vec<NoiseField> = (0..m).map(|seed| sample(&spec(1000 + seed)).unwrap()).collect();
    let bases: Vec<usize> = (0..8).map(|i| i * s.nx / 8).collect();
    for lag in [0usize, 4, 8] {
        let c0 = s.covariance(0.0);
        let ch = s.covariance(lag as f64 / s.nx as f64);
        let var = (c0 * c0 + ch * ch) / m as f64;
        let mut chi2 = 0.0;
        for &b in &bases {
            let est: f64 =
                fields.iter().map(|f| f.slice(0)[b] * f.slice(0)[(b + lag) % s.nx]).sum::<f64>() / m as f64;
            chi2 += (est - ch).powi(2) / var;
        }
        let crit = ChiSquared::new(bases.len() as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < crit, "lag {lag}: χ² = {chi2} ≥ {crit}");
    }
}

#[test]
fn refinement_extends_the_same_noise() {
    // the modes shared by two ε (and two grids) are the same Gaussians
    let coarse = NoiseSpec { eps: 1.0 / 8.0, ..spec(3) };
    let fine = NoiseSpec { eps: 1.0 / 16.0, nx: 512, ..spec(3) };
    let (a, b) = (coarse.mode_coefficients(0), fine.mode_coefficients(0));
    assert_eq!(a.len(), coarse.nx / 2 - 1);
    for (n, (p, q)) in a.iter().zip(&b).enumerate() {
        assert_eq!(p, q, "mode {}", n + 1);
    }
    // mollified fields converge as ε ↓ when the noise is smooth enough
    let smooth = |eps: f64| NoiseSpec { alpha: 3.0, eps, nx: 512, ..spec(3) };
    let diffs: Vec<f64> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]
        .windows(2)
        .map(|w| {
            let (u, v) = (sample(&smooth(w[0])).unwrap(), sample(&smooth(w[1])).unwrap());
            u.data.iter().zip(&v.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(diffs[1] < 0.7 * diffs[0], "{diffs:?}");
}

#[test]
fn white_in_time_rows_are_independent_and_scaled() {
    let s = NoiseSpec { mode: NoiseMode::WhiteInTime, alpha: 0.5, nt: 4, dt: 0.01, ..spec(5) };
    let f = sample(&s).unwrap();
    assert_eq!((f.rows(), f.nx), (4, s.nx));
    assert_ne!(f.slice(0), f.slice(1));
    let var: f64 = (0..f.rows()).flat_map(|i| f.slice(i).to_vec()).map(|x| x * x).sum::<f64>()
        / (f.rows() * s.nx) as f64;
    let want = s.covariance(0.0) / s.dt;
    assert!((var / want - 1.0).abs() < 0.2, "{var} vs {want}");
    // spatial noise is one time-constant row
    let g = sample(&spec(5)).unwrap();
    assert_eq!(g.rows(), 1);
    assert_eq!(g.slice(0), g.slice(99));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(sample(&NoiseSpec { eps: 0.01, ..spec(0) }).is_err());
    assert!(sample(&NoiseSpec { nx: 300, ..spec(0) }).is_err());
    assert!(sample(&NoiseSpec { mode: NoiseMode::WhiteInTime, dt: 0.0, ..spec(0) }).is_err());
}

#[test]
fn binary_dump_round_trips() {
    let f = sample(&NoiseSpec { mode: NoiseMode::WhiteInTime, nt: 3, dt: 0.1, alpha: 0.5, ..spec(2) })
        .unwrap();
    let mut buf = Vec::new();
    f.write_binary(&mut buf).unwrap();
    assert_eq!(buf.len(), NoiseField::HEADER_BYTES + 8 * f.data.len());
    let g = NoiseField::read_binary(&mut buf.as_slice()).unwrap();
    assert_eq!(f, g);
    assert!(NoiseField::read_binary(&mut &buf[..10]).is_err());
    let mut csv = Vec::new();
    f.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + f.rows() * f.nx);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn covariance_is_even_and_periodic(x in -1.0f64..1.0, alpha in 0.2f64..2.0) {
            let s = NoiseSpec { alpha, ..spec(0) };
            prop_assert_eq!(s.covariance(x), s.covariance(-x));
            prop_assert!((s.covariance(x + 1.0) - s.covariance(x)).abs() < 1e-9 * s.covariance(0.0));
            prop_assert!(s.covariance(x) <= s.covariance(0.0) + 1e-12);
        }

        #[test]
        fn sampling_is_a_pure_function_of_the_spec(seed in any::<u64>(), k in 0usize..3) {
            let s = NoiseSpec { seed, nx: 64 << k, eps: 0.125, ..spec(0) };
            let f = sample(&s).unwrap();
            prop_assert_eq!(&f, &sample(&s).unwrap());
            prop_assert!(f.data.iter().all(|v| v.is_finite()));
            prop_assert!(f.data.iter().sum::<f64>().abs() < 1e-9 * f.data.len() as f64);
        }
    }
}
