use num_rational::Rational64;
use num_traits::Zero;
use qgkpz::differentials::{
    chi, coherence_f, d_op, elementary_f, f_star, h_expr, vector_field_derivative, Arg, Base,
    SymbolicExpr as E, Var,
};
use qgkpz::trees::{enumerate, Family, Label, MultiIndex2 as M, NoiseMode, RuleSet, Tree};

fn t(s: &str) -> Tree {
    Tree::parse(s).unwrap()
}

fn f(order: u32) -> E {
    E::func(Base::F, order, Arg::C0)
}
fn g(order: u32) -> E {
    E::func(Base::G, order, Arg::C0)
}
fn a(order: u32) -> E {
    E::func(Base::A, order, Arg::C0)
}

#[test]
fn elementary_symbols() {
    assert_eq!(elementary_f(Label::Z1), f(0));
    assert_eq!(
        elementary_f(Label::Z2),
        g(0) * E::c(M::new(0, 1)).pow(2) + E::mass() * E::c(M::ZERO)
    );
    assert_eq!(
        elementary_f(Label::Z3),
        (a(0) - E::func(Base::A, 0, Arg::C0Prime)) * E::c(M::new(0, 2))
    );
    assert!(elementary_f(Label::Z4).is_zero());
}

#[test]
fn vector_fields() {
    assert_eq!(
        vector_field_derivative(&f(0), M::new(0, 1)),
        f(1) * E::c(M::new(0, 1))
    );
    let e = g(0) * E::c(M::new(0, 1)).pow(2);
    assert_eq!(d_op(&d_op(&e, M::new(0, 1)), M::new(0, 1)), E::int(2) * g(0));
    // second order in space: f'' c01^2 + f' c02
    assert_eq!(
        vector_field_derivative(&f(0), M::new(0, 2)),
        f(2) * E::c(M::new(0, 1)).pow(2) + f(1) * E::c(M::new(0, 2))
    );
    // the primed variables follow their own chain rule
    let hp = h_expr();
    assert_eq!(
        vector_field_derivative(&hp, M::new(1, 0)),
        a(1) * E::c(M::new(1, 0))
            - E::func(Base::A, 1, Arg::C0Prime) * E::cp(M::new(1, 0))
    );
    // time and space directions commute
    let x = elementary_f(Label::Z3) * f(0);
    let ts = vector_field_derivative(&vector_field_derivative(&x, M::new(1, 0)), M::new(0, 1));
    let st = vector_field_derivative(&vector_field_derivative(&x, M::new(0, 1)), M::new(1, 0));
    assert_eq!(ts, st);
}

/// m! / (l₁!⋯l_n! (m − Σl)!)
fn multinomial(m: M, ls: &[M]) -> i64 {
    let rest = ls.iter().fold(m, |acc, l| acc - *l);
    let mut out = m.factorial() as i64 / rest.factorial() as i64;
    for l in ls {
        out /= l.factorial() as i64;
    }
    out
}

/// Both sides of the commutation relation between `∂^m` and a product of
/// `D_{k_j}`: Σ_l binom(m; l) ∂^{m - Σl} ∏ D_{k_j - l_j} = ∏ D_{k_j} ∂^m.
fn fundamental_relation_holds(ks: &[M], m: M, e: &E) -> bool {
    let rhs = {
        let mut x = vector_field_derivative(e, m);
        for k in ks {
            x = d_op(&x, *k);
        }
        x
    };
    let mut lhs = E::zero();
    let choices: Vec<Vec<M>> = ks.iter().map(|_| m.below().collect()).collect();
    let mut idx = vec![0usize; ks.len()];
    loop {
        let ls: Vec<M> = idx.iter().zip(&choices).map(|(i, c)| c[*i]).collect();
        let sum = ls.iter().fold(M::ZERO, |acc, l| acc + *l);
        if sum.dominated_by(m) && ls.iter().zip(ks).all(|(l, k)| l.dominated_by(*k)) {
            let mut x = e.clone();
            for (l, k) in ls.iter().zip(ks) {
                x = d_op(&x, *k - *l);
            }
            x = vector_field_derivative(&x, m - sum);
            lhs = lhs + x * E::int(multinomial(m, &ls));
        }
        let mut j = 0;
        loop {
            if j == idx.len() {
                return lhs == rhs;
            }
            idx[j] += 1;
            if idx[j] < choices[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[test]
fn fundamental_relation_instances() {
    let e = g(0) * E::c(M::new(0, 1)).pow(2);
    assert!(fundamental_relation_holds(&[M::new(0, 1)], M::new(0, 1), &e));
    let exprs = [
        elementary_f(Label::Z1),
        elementary_f(Label::Z2),
        elementary_f(Label::Z3),
        elementary_f(Label::Z2) * elementary_f(Label::Z3) + f(0) * E::c(M::new(0, 3)),
    ];
    let ks = [M::ZERO, M::new(0, 1), M::new(0, 2), M::new(1, 0)];
    let ms = [M::new(0, 1), M::new(0, 2), M::new(1, 0), M::new(1, 1)];
    for e in &exprs {
        for m in ms {
            for k1 in ks {
                assert!(fundamental_relation_holds(&[k1], m, e), "{k1} {m}");
                for k2 in ks {
                    assert!(fundamental_relation_holds(&[k1, k2], m, e), "{k1} {k2} {m}");
                }
            }
        }
    }
}

#[test]
fn coherence_examples() {
    assert_eq!(
        coherence_f(&t("z2[I[z1] I(0,1)[z1] I(0,1)[z1]]")),
        E::int(2) * g(1) * f(0).pow(3)
    );
    assert_eq!(
        coherence_f(&t("z3[I[z1] I[z1] I(0,2)[z1]]")),
        a(2) * f(0).pow(3)
    );
    assert!(coherence_f(&t("z3[I(0,2)[z1] I(0,2)[z1]]")).is_zero());
    assert!(coherence_f(&t("z1[I(0,1)[z1]]")).is_zero());
    assert!(coherence_f(&t("z2[I(0,1)[z1] I(0,1)[z1] I(0,1)[z1]]")).is_zero());
    assert_eq!(coherence_f(&t("z1[I[z1]]")), f(1) * f(0));
    assert_eq!(coherence_f(&t("X(0,1)z1")), f(1) * E::c(M::new(0, 1)));
}

#[test]
fn p_edges_contribute_powers_of_h() {
    for s in [
        "z3[I^2[z1] I(0,2)^1[z1]]",
        "z2[I(0,1)^1[z1] I(0,1)^3[z1]]",
        "z1[I^1[z1[I^1[z1]]]]",
    ] {
        let x = t(s);
        let lhs = coherence_f(&x);
        let rhs = h_expr().pow(x.total_p()) * coherence_f(&x.strip_p());
        assert_eq!(lhs, rhs, "{s}");
        assert_eq!(coherence_f(&x.expand()), lhs, "{s}");
    }
}

#[test]
fn chi_examples() {
    assert_eq!(chi(&t("z2[I[z1] I(0,1)[z1] I(0,1)[z1]]")), E::one());
    assert_eq!(chi(&t("z3[I[z1] I[z1] I(0,2)[z1]]")), a(2));
    assert_eq!(chi(&t("z3[I[z1] I(0,2)[z1]]")), a(1));
    assert_eq!(chi(&t("z3[I(0,2)[z1] I[z1] I[z1] I[z1]]")), a(3));
    assert_eq!(
        chi(&t("z3[I(0,2)[z1] I[z3[I(0,2)[z1] I[z1] I[z1]]]]")),
        a(1) * a(2)
    );
    assert_eq!(
        chi(&t("z3[I(0,2)[z1] I[z3[I(0,2)[z1] I[z3[I(0,2)[z1] I[z1]]]]]]")),
        a(1).pow(3)
    );
    // independent of p
    assert_eq!(chi(&t("z3[I^2[z1] I(0,2)^1[z1]]")), a(1));
}

#[test]
fn f_star_examples() {
    assert_eq!(f_star(&t("z1[I[z1]]")), f(1) * f(0));
    assert_eq!(
        f_star(&t("z2[I(0,1)[z1] I(0,1)[z1]]")),
        E::int(2) * g(0) * f(0).pow(2)
    );
    assert_eq!(f_star(&t("z3[I[z1] I(0,2)[z1]]")), f(0).pow(2));
    assert_eq!(f_star(&t("z3[I[z1] I[z1] I(0,2)[z1]]")), f(0).pow(3));
}

fn has_x_at_root_or_z3(x: &Tree) -> bool {
    fn z3_poly(x: &Tree) -> bool {
        (x.label() == Label::Z3 && !x.poly().is_zero())
            || x.children().iter().any(|e| z3_poly(&e.child))
    }
    !x.poly().is_zero() || z3_poly(x)
}

fn has_x_anywhere(x: &Tree) -> bool {
    !x.poly().is_zero() || x.children().iter().any(|e| has_x_anywhere(&e.child))
}

fn factorization_holds(alpha: Rational64, mode: NoiseMode) -> usize {
    let mut rules = RuleSet::new(alpha, Rational64::from(0));
    rules.max_p = Some(3);
    rules.noise_mode = mode;
    let trees = enumerate(&rules, Family::BCircMinus).unwrap();
    let mut checked = 0;
    for x in trees.iter().filter(|x| !has_x_at_root_or_z3(x)) {
        let lhs = coherence_f(x);
        let rhs = chi(x) * h_expr().pow(x.total_p()) * f_star(x);
        assert_eq!(lhs, rhs, "{x}");
        checked += 1;
    }
    checked
}

#[test]
fn factorization_on_enumerated_trees() {
    assert!(factorization_holds(Rational64::new(11, 20), NoiseMode::General) > 10);
    assert!(factorization_holds(Rational64::new(9, 20), NoiseMode::LinearForcing) > 10);
    assert!(factorization_holds(Rational64::new(9, 20), NoiseMode::General) > 10);
}

#[test]
fn negative_trees_use_only_low_jets() {
    for alpha in [Rational64::new(9, 20), Rational64::new(11, 20)] {
        let mut rules = RuleSet::new(alpha, Rational64::from(0));
        rules.max_p = Some(2);
        for x in enumerate(&rules, Family::BCircMinus).unwrap() {
            let e = coherence_f(&x);
            for v in e.variables() {
                match v {
                    Var::C(k) | Var::Cp(k) => {
                        assert!(k == M::ZERO || k == M::new(0, 1), "{x}: {e}")
                    }
                    _ => {}
                }
            }
            assert!(e.degree_in(&Var::C(M::new(0, 1))) <= 1, "{x}: {e}");
            if !has_x_anywhere(&x) {
                assert_eq!(e.degree_in(&Var::Cp(M::new(0, 1))), 0, "{x}: {e}");
            }
        }
    }
}

#[test]
fn rendering() {
    let e = coherence_f(&t("z2[I[z1] I(0,1)[z1] I(0,1)[z1]]"));
    assert_eq!(e.to_string(), "2*f(u)^3*g'(u)");
    let e = a(0).pow(-2) * E::rat(-1, 2) + E::c(M::new(0, 1)) * a(3);
    assert_eq!(e.to_string(), "-1/2*a(u)^-2 + a^(3)(u)*u_x");
    assert_eq!(E::zero().to_string(), "0");
}

#[test]
fn morphism_examples_and_random_pairs() {
    use qgkpz::differentials::morphism_check;
    use qgkpz::trees::sample_tree;
    use rand::SeedableRng;

    assert!(morphism_check(&t("z4[I[z1]]"), &t("z2")).unwrap());
    assert!(morphism_check(&t("X(0,1)"), &t("z1")).unwrap());
    assert!(morphism_check(&t("X(0,1)z4[I[z1] I(0,2)[z1]]"), &t("z3[I[z1] I(0,2)[z1]]")).unwrap());
    assert!(morphism_check(&t("z1"), &t("z2")).is_err());

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut r = RuleSet::new(Rational64::new(11, 20), Rational64::from(1));
    r.max_p = Some(1);
    let mut checked = 0;
    while checked < 60 {
        let sigma = sample_tree(&r, true, &mut rng).unwrap();
        if sigma.is_noise_rooted() || sigma.node_count() > 4 {
            continue;
        }
        let tau = sample_tree(&r, false, &mut rng).unwrap();
        if tau.node_count() > 5 {
            continue;
        }
        assert!(morphism_check(&sigma, &tau).unwrap(), "{sigma} * {tau}");
        checked += 1;
    }
}

fn factorial(n: u32) -> i64 {
    (1..=n as i64).product()
}

/// Groups equal subtrees: `∏ β_j!` and `∏ u_{σ_j}^{β_j}` for `u_σ = 𝔉(σ*)/S(σ)`.
fn taylor_children(children: &[&Tree]) -> (i64, E) {
    let mut perm = 1;
    let mut prod = E::one();
    let mut i = 0;
    while i < children.len() {
        let mut j = i;
        while j < children.len() && children[j] == children[i] {
            prod = prod * coherence_f(children[j]) * E::rat(1, children[j].symmetry_factor() as i64);
            j += 1;
        }
        perm *= factorial((j - i) as u32);
        i = j;
    }
    (perm, prod)
}

/// Coefficient of `X^k ∏ 𝓘(σ_i)` in `Φ(u)` for `u = c₀ + c_{(0,1)}X^{(0,1)} + Σ u_σ 𝓘(σ)`.
fn taylor_coef(base: Base, k2: u32, plain: &[&Tree]) -> E {
    let (perm, prod) = taylor_children(plain);
    let m = k2 + plain.len() as u32;
    E::func(base, m, Arg::C0) * E::c(M::new(0, 1)).pow(k2 as i64) * prod
        * E::rat(1, factorial(k2) * perm)
}

/// The bracket of the fixed point, read off at the expanded tree `x`, with
/// the children's coefficients taken from `𝔉`.
fn picard_coefficient(x: &Tree) -> E {
    if x.poly().k1 != 0 {
        return E::zero();
    }
    let k2 = x.poly().k2;
    let of = |n: M| -> Vec<&Tree> { x.children().iter().filter(|e| e.n == n).map(|e| &e.child).collect() };
    let (plain, d1, d2) = (of(M::ZERO), of(M::new(0, 1)), of(M::new(0, 2)));
    if d1.len() + d2.len() + plain.len() != x.children().len() {
        return E::zero();
    }
    let c01 = E::c(M::new(0, 1));
    match x.label() {
        Label::Z1 if d1.is_empty() && d2.is_empty() => taylor_coef(Base::F, k2, &plain),
        Label::Z2 if d2.is_empty() && d1.len() <= 2 => {
            let (perm, prod) = taylor_children(&d1);
            let du2 = c01.pow(2 - d1.len() as i64) * prod * E::rat(2, perm * factorial(2 - d1.len() as u32));
            let mut e = taylor_coef(Base::G, k2, &plain) * du2;
            if d1.is_empty() {
                let u = match (k2, plain.len()) {
                    (0, 0) => E::c(M::ZERO),
                    (1, 0) => c01.clone(),
                    (0, 1) => taylor_children(&plain).1,
                    _ => E::zero(),
                };
                e = e + E::mass() * u;
            }
            e
        }
        Label::Z3 if d1.is_empty() && d2.len() == 1 => {
            let mut h = taylor_coef(Base::A, k2, &plain);
            if plain.is_empty() {
                h = h - E::func(Base::A, k2, Arg::C0Prime)
                    * E::cp(M::new(0, 1)).pow(k2 as i64)
                    * E::rat(1, factorial(k2));
            }
            h * taylor_children(&d2).1
        }
        _ => E::zero(),
    }
}

#[test]
fn picard_iteration_reproduces_coherence() {
    for (alpha, mode) in [
        (Rational64::new(11, 20), NoiseMode::General),
        (Rational64::new(9, 20), NoiseMode::General),
        (Rational64::new(4, 5), NoiseMode::NoGradient),
    ] {
        let mut r = RuleSet::new(alpha, Rational64::zero());
        r.max_p = Some(2);
        r.noise_mode = mode;
        let trees = enumerate(&r, Family::BCircMinus).unwrap();
        assert!(trees.len() > 10);
        for x in &trees {
            let expected = coherence_f(x) * E::rat(1, x.symmetry_factor() as i64);
            let got = picard_coefficient(&x.expand());
            assert_eq!(got, expected, "alpha = {alpha}, tree = {x}");
        }
    }
}
