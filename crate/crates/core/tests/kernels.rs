use std::f64::consts::PI;

use qgkpz::kernels::quad::{space_breaks, Rule};
use qgkpz::kernels::{
    convolution_at, convolve_spacetime, envelope_constant, envelope_exponent, geomspace,
    heat_kernel, reflected_convolution_at, smoothing_exponent, y_corrector, Coefficient,
    GaussProfile, KernelFn, Parametrix, QuadratureSpec, SmoothingQuantity,
};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

/// Target within `rel` relative tolerance, or absolute when the target is 0.
fn exponent_ok(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(1.0)
}

fn profile_kernel(zeta: f64) -> KernelFn {
    let g = GaussProfile::heat(1.0, zeta);
    let g2 = g.clone();
    KernelFn::new(format!("G({zeta})"), g, (1.0, 1.0), move |t, x, y| g2.eval(t, &[x - y]))
}

#[test]
fn heat_kernel_values_and_semigroup() {
    let z = heat_kernel(1.0, 0.5, 0, 0).unwrap();
    for t in [1e-3, 0.1, 2.0] {
        assert!(close(z.at(t, 0.0), (-0.5 * t).exp() / (4.0 * PI * t).sqrt(), 1e-14));
    }
    assert!(heat_kernel(0.0, 0.0, 0, 0).is_err());
    assert!(heat_kernel(1.0, -1.0, 0, 0).is_err());

    let z = heat_kernel(0.8, 0.3, 0, 0).unwrap();
    let rule = Rule::gauss(16);
    for (s, t, x) in [(0.01, 0.05, 0.1), (0.3, 0.4, -0.2), (0.2, 1.0, 0.7)] {
        let zb = space_breaks(&[(x, z.width(t - s)), (0.0, z.width(s))], 10.0);
        let v = rule.composite(&zb, |y| z.at(t - s, x - y) * z.at(s, y));
        assert!(close(v, z.at(t, x), 1e-10), "{v} vs {}", z.at(t, x));
    }
}

#[test]
fn lambda_derivative_is_t_times_second_derivative() {
    let h = 1e-5;
    for (lam, t, x) in [(1.0, 0.1, 0.2), (0.5, 0.01, -0.05), (2.0, 0.3, 1.0)] {
        let zp = heat_kernel(lam + h, 0.2, 0, 0).unwrap();
        let zm = heat_kernel(lam - h, 0.2, 0, 0).unwrap();
        let d2 = heat_kernel(lam, 0.2, 0, 2).unwrap();
        let fd = (zp.at(t, x) - zm.at(t, x)) / (2.0 * h);
        assert!(close(fd, t * d2.at(t, x), 1e-7), "{fd} vs {}", t * d2.at(t, x));
    }
}

#[test]
fn y_corrector_closed_form_parity_and_envelope() {
    let spec = QuadratureSpec { renormalized: true, ..Default::default() };
    let d2 = heat_kernel(0.7, 0.0, 0, 2).unwrap();
    for k in 0..=2u32 {
        let y = y_corrector(0.7, 0.0, k).unwrap();
        // −(x ∂^k Z) ∗ ∂²Z by quadrature
        let dk = heat_kernel(0.7, 0.0, 0, k).unwrap();
        let env = dk.envelope.clone();
        let xdk = KernelFn::new("x d^k Z", env, (1.0, 1.0), move |t, x, y| -(x - y) * dk.eval(t, x, y));
        for (t, x) in [(0.05, 0.1), (0.2, -0.3), (0.1, 0.0)] {
            let (num, _) = convolution_at(&xdk, &d2, t, x, 0.0, &spec);
            assert!(
                (num - y.at(t, x)).abs() < 1e-6 * y.at(t, 0.5 * t.sqrt()).abs().max(1.0),
                "k={k} t={t} x={x}: {num} vs {}",
                y.at(t, x)
            );
        }
        for (t, x) in [(0.01, 0.03), (0.2, 0.4)] {
            let (a, b) = (y.at(t, x), y.at(t, -x));
            if k % 2 == 0 {
                assert!((a + b).abs() < 1e-12 * a.abs().max(1.0));
            } else {
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
        if k == 0 {
            assert_eq!(y.at(0.1, 0.0), 0.0);
        }
        let ts = geomspace(1e-4, 1e-1, 10);
        let (zeta, _) = envelope_exponent(&y, &ts, &geomspace(0.05, 4.0, 60)).unwrap();
        assert!(exponent_ok(zeta, 1.0 - k as f64, 0.05), "k={k}: {zeta}");
    }
    assert!(y_corrector(1.0, 0.0, 3).is_err());
}

#[test]
fn convolution_exponent_law_and_gamma_constant() {
    let spec = QuadratureSpec::default();
    for (z1, z2) in [(-1.0, -1.0), (-0.5, -0.5), (0.0, -1.0)] {
        let (a, b) = (profile_kernel(z1), profile_kernel(z2));
        let ab = convolve_spacetime(&a, &b, &spec).unwrap();
        let ts = geomspace(1e-4, 1e-1, 8);
        let (zeta, fit) = envelope_exponent(&ab, &ts, &[0.0, 0.5, 1.0]).unwrap();
        let want = z1 + z2 + 2.0;
        assert_eq!(ab.envelope.zeta, want);
        assert!(exponent_ok(zeta, want, 0.02), "({z1},{z2}): {zeta} vs {want}");
        let c = a.envelope.convolution_constant(&b.envelope).unwrap();
        assert!(close(fit.constant, c, 1e-4), "({z1},{z2}): {} vs {c}", fit.constant);
        // the profile is reproduced away from the origin too
        let (v, err) = convolution_at(&a, &b, 0.05, 0.1, 0.0, &spec);
        assert!(close(v, c * ab.envelope.eval(0.05, &[0.1]), 1e-6) && err < 1e-6 * v.abs());
    }
    assert!(convolve_spacetime(&profile_kernel(-2.0), &profile_kernel(0.0), &spec).is_err());
}

#[test]
fn gradient_correlation_has_the_heat_kernel_as_leading_term() {
    let (lam, c) = (0.8, 1.0);
    let spec = QuadratureSpec { horizon: 40.0, ..Default::default() };
    let dz = heat_kernel(lam, c, 0, 1).unwrap();
    let z = heat_kernel(lam, c, 0, 0).unwrap();
    let rule = Rule::gauss(16);
    let mut rems = Vec::new();
    for j in [2, 4, 6, 8, 10] {
        let t = 0.5f64.powi(j);
        for (tt, x) in [(t, 0.0), (-t, 0.0), (t, t.sqrt()), (-t, 0.5 * t.sqrt())] {
            let (v, _) = reflected_convolution_at(&dz, &dz, tt, x, &spec);
            let lead = z.at(tt.abs(), x) / (2.0 * lam);
            let rem = v - lead;
            // exact remainder −(c/2λ)∫_{|t|}^∞ Z_u(x) du
            let ub = qgkpz::kernels::quad::graded_toward_start(tt.abs(), 60.0, 40, 0.5);
            let exact = -c / (2.0 * lam) * rule.composite(&ub, |u| z.at(u, x));
            assert!((rem - exact).abs() < 1e-6 * lead, "t={tt} x={x}: {rem} vs {exact}");
            rems.push(rem.abs());
        }
    }
    let bound = rems.iter().cloned().fold(0.0, f64::max);
    assert!(bound < 1.0, "remainder not bounded: {bound}");
}

#[test]
fn second_derivative_self_convolution() {
    // (∂²Z)^{∗2}_t = t ∂²(∂²Z_t)
    let spec = QuadratureSpec { renormalized: true, ..Default::default() };
    let d2 = heat_kernel(1.0, 0.0, 0, 2).unwrap();
    let d4 = heat_kernel(1.0, 0.0, 0, 4).unwrap();
    for (t, x) in [(0.1, 0.0), (0.05, 0.2), (0.2, -0.5)] {
        let (v, _) = convolution_at(&d2, &d2, t, x, 0.0, &spec);
        let want = t * d4.at(t, x);
        assert!((v - want).abs() < 1e-6 * (t * d4.at(t, 0.0)).abs(), "{v} vs {want}");
    }
}

#[test]
fn envelope_absorbs_powers_of_distance() {
    // |x|^a 𝖦^{(c,ζ)} ≤ C 𝖦^{(c′,ζ+a)} for c′ < c
    for a in [0.5, 1.0, 2.0] {
        let g = GaussProfile::heat(1.0, -1.0);
        let h = GaussProfile::heat(0.9, -1.0 + a);
        let mut worst: f64 = 0.0;
        for t in geomspace(1e-6, 1.0, 30) {
            for x in geomspace(1e-6, 10.0, 60) {
                worst = worst.max(x.powf(a) * g.eval(t, &[x]) / h.eval(t, &[x]));
            }
        }
        assert!(worst.is_finite() && worst < 10.0, "a={a}: {worst}");
    }
    let z = heat_kernel(1.0, 0.0, 0, 1).unwrap();
    let ts = geomspace(1e-4, 1e-1, 10);
    let xs = geomspace(1e-4, 3.0, 40);
    let c = envelope_constant(&z, &ts, &xs);
    assert!(c.is_finite() && c > 0.0);
}

#[test]
fn parametrix_constant_coefficient_is_the_heat_kernel() {
    let p = Parametrix::new(Coefficient::constant(0.7), 0.0, 3, 0.5, QuadratureSpec::default())
        .unwrap();
    let z = heat_kernel(0.7, 0.0, 0, 0).unwrap();
    for (t, x) in [(0.01, 0.0), (0.1, 0.3)] {
        assert_eq!(p.eval(t, x), z.at(t, x));
    }
    assert!(Parametrix::new(Coefficient::constant(-1.0), 0.0, 1, 0.5, QuadratureSpec::default())
        .is_err());
}

#[test]
fn smoothing_slopes_for_a_holder_cusp() {
    let mu = 0.5;
    let u0 = move |x: f64| x.abs().powf(mu);
    let ts = geomspace(1e-4, 1e-1, 8);
    let mut xs: Vec<f64> = geomspace(1e-5, 2.0, 120);
    xs.extend(xs.clone().iter().map(|x| -x));
    xs.push(0.0);
    let z = heat_kernel(1.0, 0.0, 0, 0).unwrap();
    let dz = heat_kernel(1.0, 0.0, 0, 1).unwrap();
    let inc = smoothing_exponent(&z, &u0, &[0.0], SmoothingQuantity::Increment, &ts, &xs).unwrap();
    assert!(close(inc.slope, mu / 2.0, 0.05), "{inc:?}");
    let d1 = smoothing_exponent(&dz, &u0, &[0.0], SmoothingQuantity::Apply, &ts, &xs).unwrap();
    assert!(close(d1.slope, (mu - 1.0) / 2.0, 0.05), "{d1:?}");
    // bounded data: no growth or decay
    let b0 = move |x: f64| 1.0 + (PI * x).sin().abs().powf(mu);
    let k0 = smoothing_exponent(&z, &b0, &[0.0, 1.0, -1.0], SmoothingQuantity::Apply, &ts, &xs)
        .unwrap();
    assert!(k0.slope.abs() < 0.02, "{k0:?}");
}

#[test]
fn parametrix_residual_decreases_with_truncation() {
    let b = Coefficient::from_fn(1024, 1.0, |x| 1.0 + 0.3 * (2.0 * PI * x).sin());
    let spec = QuadratureSpec { time_levels: 12, time_ratio: 0.25, ..Default::default() };
    let p = Parametrix::new(b, 0.0, 2, 0.5, spec).unwrap();
    let (ts, xs) = ([0.02, 0.1, 0.3], [-0.3, 0.0, 0.1, 0.3]);
    let r1 = p.truncated(1).unwrap().residual(&ts, &xs);
    let r2 = p.residual(&ts, &xs);
    assert!(r2 < 0.5 * r1, "{r1} -> {r2}");
    // the residual of the M-term parametrix is the next iterate of the Levi kernel
    let k2 = p.kernel_norm(2, &ts, &xs);
    assert!(close(r1, k2, 0.1), "{r1} vs {k2}");
    assert!(p.truncated(3).is_err() && p.truncated(0).is_err());
}

#[test]
fn parametrix_gains_the_holder_exponent() {
    let alpha = 0.5;
    let b = Coefficient::from_fn(16384, alpha, |x| 1.0 + 0.3 * (PI * x).sin().abs().powf(alpha));
    let p = Parametrix::new(b, 0.0, 1, 0.5, QuadratureSpec::default()).unwrap();
    let ts = geomspace(1e-6, 1e-3, 7);
    let offsets = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
    for k in 0..=1 {
        let (gain, _) = p.difference_gain(k, &ts, &offsets).unwrap();
        assert!(gain >= 0.8 * alpha && gain <= 1.2 * alpha, "k={k}: {gain}");
    }
    assert!(p.difference(2, 0.01, 0.0).is_err());
}
