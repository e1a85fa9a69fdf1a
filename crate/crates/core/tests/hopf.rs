use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::Zero;
use qgkpz::hopf::{
    delta_of_product, graft, star, Character, Coproduct, ForestPlus, PreparationMap, Tensor,
    TreeSeries,
};
use qgkpz::trees::{enumerate, sample_tree, Family, MultiIndex2 as M, NoiseMode, RuleSet, Tree};
use qgkpz::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(s: &str) -> Tree {
    Tree::parse(s).unwrap()
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn qr(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn series(terms: &[(&str, i64)]) -> TreeSeries {
    let mut s = TreeSeries::zero();
    for (x, c) in terms {
        s.add_term(t(x), q(*c));
    }
    s
}

fn rules(alpha: Rational64, cutoff: Rational64, max_p: u32) -> RuleSet {
    RuleSet {
        alpha,
        max_p: Some(max_p),
        homogeneity_cutoff: cutoff,
        noise_mode: NoiseMode::General,
        even_noise_only: false,
    }
}

#[test]
fn graft_examples() {
    let z1 = t("z1");
    assert_eq!(graft(&z1, M::ZERO, &t("z2")).unwrap(), series(&[("z2[I[z1]]", 1)]));
    assert_eq!(
        graft(&z1, M::new(0, 1), &t("X(0,1)z2")).unwrap(),
        series(&[("X(0,1)z2[I(0,1)[z1]]", 1), ("z2[I[z1]]", 1)])
    );
    assert_eq!(
        graft(&z1, M::ZERO, &t("z2[I[z1]]")).unwrap(),
        series(&[("z2[I[z1] I[z1]]", 1), ("z2[I[z1[I[z1]]]]", 1)])
    );
    assert!(graft(&t("X(0,1)"), M::ZERO, &z1).is_err());
}

#[test]
fn star_examples() {
    let sigma = t("X(0,1)z4[I[z1] I(0,1)[z2[I[z1]]]]");
    for l in ["z1", "z2", "z3"] {
        let expected = format!("X(0,1){l}[I[z1] I(0,1)[z2[I[z1]]]]");
        assert_eq!(star(&sigma, &t(l)).unwrap(), series(&[(&expected, 1)]));
    }
    for x in ["z1", "z3[I[z1] I(0,2)[z1]]", "X(1,0)z2[I^2[z1]]"] {
        assert_eq!(star(&t("z4"), &t(x)).unwrap(), series(&[(x, 1)]));
    }
    // the polynomial is spread by the Leibniz rule
    assert_eq!(
        star(&t("X(0,2)"), &t("z2[I[z1]]")).unwrap(),
        series(&[("X(0,2)z2[I[z1]]", 1), ("X(0,1)z2[I[X(0,1)z1]]", 2), ("z2[I[X(0,2)z1]]", 1)])
    );
    assert!(star(&t("z1"), &t("z2")).is_err());
}

fn small_basis(alpha: Rational64, cutoff: Rational64, max_p: u32) -> (Vec<Tree>, Vec<Tree>) {
    let r = rules(alpha, cutoff, max_p);
    let all = enumerate(&r, Family::B).unwrap();
    let dot: Vec<Tree> = enumerate(&r, Family::U).unwrap();
    (all, dot)
}

fn star_left(a: &TreeSeries, b: &Tree) -> TreeSeries {
    let mut out = TreeSeries::zero();
    for (x, c) in a.terms() {
        out.add_scaled(&star(x, b).unwrap(), c);
    }
    out
}

fn star_right(a: &Tree, b: &TreeSeries) -> TreeSeries {
    let mut out = TreeSeries::zero();
    for (x, c) in b.terms() {
        out.add_scaled(&star(a, x).unwrap(), c);
    }
    out
}

#[test]
fn star_is_associative() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (all, dot) = small_basis(Rational64::new(11, 20), Rational64::from(1), 1);
    let mut dot = dot;
    dot.push(t("X(0,1)z4[I[z1]]"));
    dot.push(t("X(1,0)"));
    for _ in 0..60 {
        let a = dot.choose(&mut rng).unwrap();
        let b = dot.choose(&mut rng).unwrap();
        let c = all.choose(&mut rng).unwrap();
        let lhs = star_left(&star(a, b).unwrap(), c);
        let rhs = star_right(a, &star(b, c).unwrap());
        assert_eq!(lhs, rhs, "({a} * {b}) * {c}");
    }
}

#[test]
fn coproduct_examples() {
    let cp = Coproduct::new(Rational64::new(11, 20));
    let mut d = Tensor::zero();
    d.add_term((t("z1"), ForestPlus::one()), q(1));
    assert_eq!(cp.delta(&t("z1")), d);

    let mut d = Tensor::zero();
    d.add_term((t("X(0,1)"), ForestPlus::one()), q(1));
    d.add_term((t("z4"), ForestPlus::x(M::new(0, 1))), q(1));
    assert_eq!(cp.delta(&t("X(0,1)")), d);

    let mut d = Tensor::zero();
    d.add_term((t("z4[I[z1]]"), ForestPlus::one()), q(1));
    d.add_term((t("z4"), ForestPlus::planted(M::ZERO, t("z1"))), q(1));
    assert_eq!(cp.delta(&t("z4[I[z1]]")), d);

    // at larger α the derivative direction enters
    let cp = Coproduct::new(Rational64::new(6, 5));
    let d = cp.delta(&t("z4[I[z1]]"));
    assert_eq!(d.coef(&(t("X(0,1)"), ForestPlus::planted(M::new(0, 1), t("z1")))), q(1));
    assert_eq!(d.len(), 3);
}

#[test]
fn coproduct_is_multiplicative() {
    let cp = Coproduct::new(Rational64::new(11, 20));
    let a = t("X(0,1)z2[I[z1]]");
    let b = t("z4[I(0,1)[z1] I^1[z1]]");
    let prod = qgkpz::hopf::tree_product(&a, &b).unwrap();
    assert_eq!(cp.delta(&prod), delta_of_product(&cp, &a, &b).unwrap());
}

type Triple = Tensor<(Tree, ForestPlus, ForestPlus)>;

fn coassociativity_sides(cp: &Coproduct, x: &Tree) -> (Triple, Triple) {
    let mut lhs = Triple::zero();
    let mut rhs = Triple::zero();
    for ((l, r), c) in cp.delta(x).terms() {
        for ((ll, lr), c2) in cp.delta(l).terms() {
            lhs.add_term((ll.clone(), lr.clone(), r.clone()), c * c2);
        }
        for ((rl, rr), c2) in cp.delta_plus(r).terms() {
            rhs.add_term((l.clone(), rl.clone(), rr.clone()), c * c2);
        }
    }
    (lhs, rhs)
}

#[test]
fn coproduct_coassociativity() {
    for alpha in [Rational64::new(11, 20), Rational64::new(4, 5)] {
        let cp = Coproduct::new(alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = rules(alpha, Rational64::from(2), 2);
        let all: Vec<Tree> = (0..150).map(|_| sample_tree(&r, true, &mut rng).unwrap()).collect();
        for x in &all {
            let (l, r) = coassociativity_sides(&cp, x);
            assert_eq!(l, r, "{x}");
        }
        for x in ["X(0,1)z3[I[z1] I(0,2)[z1]]", "z2[I(0,1)[X(0,1)z1] I[z1[I^2[z1]]]]"] {
            let (l, r) = coassociativity_sides(&cp, &t(x));
            assert_eq!(l, r, "{x}");
        }
    }
}

#[test]
fn delta_plus_drops_nonpositive_factors() {
    let cp = Coproduct::new(Rational64::new(11, 20));
    let f = ForestPlus::planted(M::ZERO, t("z1[I[z1]]"));
    for ((a, b), _) in cp.delta_plus(&f).terms() {
        for g in [a, b] {
            for (n, x) in g.factors() {
                let h = x.homogeneity().eval(cp.alpha) + Rational64::from(2 - n.degree() as i64);
                assert!(h > Rational64::zero(), "{g}");
            }
        }
    }
}

fn negative_support(alpha: Rational64, max_p: u32) -> Vec<Tree> {
    enumerate(&rules(alpha, Rational64::zero(), max_p), Family::BCircMinus)
        .unwrap()
        .into_iter()
        .filter(|x| x.poly().is_zero() && !x.children().is_empty())
        .collect()
}

fn character(alpha: Rational64, values: &[(&str, BigRational)]) -> Character {
    let v: BTreeMap<Tree, BigRational> = values.iter().map(|(s, c)| (t(s), c.clone())).collect();
    Character::new(alpha, v).unwrap()
}

#[test]
fn preparation_fixes_noises_and_planted_trees() {
    let alpha = Rational64::new(11, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let supp = negative_support(alpha, 2);
    let r = PreparationMap::new(Character::random(alpha, &supp, 5, &mut rng).unwrap());
    for x in ["z1", "z2", "z3", "z4[I[z1[I[z1]]]]", "z4[I(0,1)^2[z2[I(0,1)[z1] I(0,1)[z1]]]]"] {
        assert_eq!(r.apply(&t(x)).unwrap(), series(&[(x, 1)]), "{x}");
    }
}

#[test]
fn preparation_on_the_basic_tree() {
    let alpha = Rational64::new(11, 20);
    let c = character(alpha, &[("z1[I[z1]]", qr(3, 2))]);
    let r = PreparationMap::new(c);
    let mut expected = series(&[("z1[I[z1]]", 1)]);
    expected.add_term(t("z4"), qr(3, 2));
    assert_eq!(r.apply(&t("z1[I[z1]]")).unwrap(), expected);

    // ζ₂𝓘(τ₁): the root is ζ₂ and nothing at the root is in the support
    let eta = t("z2[I[z1[I[z1]]]]");
    assert_eq!(r.apply(&eta).unwrap(), TreeSeries::single(eta.clone()));

    // τ₁ sitting at the root of a larger tree is contracted
    let eta = t("z1[I[z1] I[z2[I[z1]]]]");
    let got = r.apply(&eta).unwrap();
    let mut expected = TreeSeries::single(eta.clone());
    expected.add_term(t("z4[I[z2[I[z1]]]]"), qr(3, 2));
    assert_eq!(got, expected);

    // the root polynomial rides along
    let eta = t("X(0,1)z1[I[z1]]");
    let mut expected = TreeSeries::single(eta.clone());
    expected.add_term(t("X(0,1)"), qr(3, 2));
    assert_eq!(r.apply(&eta).unwrap(), expected);
}

#[test]
fn strict_character_names_the_missing_tree() {
    let alpha = Rational64::new(11, 20);
    let v = BTreeMap::from([(t("z1[I[z1]]"), q(1))]);
    let r = PreparationMap::new(Character::strict(alpha, v).unwrap());
    match r.apply(&t("z3[I[z1] I(0,2)[z1]]")) {
        Err(Error::InvalidParameter(m)) => assert!(m.contains("z3[I[z1] I(0,2)[z1]]"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert!(Character::new(alpha, BTreeMap::from([(t("z2[I[z1]]"), q(1))])).is_err());
    assert!(Character::new(alpha, BTreeMap::from([(t("z1"), q(1))])).is_err());
}

/// `⟨η, τ*⟩ = S(η)` when `η = τ`.
fn pair(x: &TreeSeries, tau: &Tree) -> BigRational {
    x.coef(tau) * q(tau.symmetry_factor() as i64)
}

/// Trees with `|τ| < 2` and `|p| ≤ 2`, partly drawn at random and partly
/// built as `τ⋆σ` with `σ` in the support, so that contractions occur.
fn sampled_basis(alpha: Rational64, maps: &[PreparationMap], n: usize, rng: &mut ChaCha8Rng) -> Vec<Tree> {
    let r = rules(alpha, Rational64::from(2), 2);
    let mut out: Vec<Tree> = (0..n).map(|_| sample_tree(&r, true, rng).unwrap()).collect();
    let dots: Vec<Tree> = (0..n)
        .map(|_| loop {
            let x = sample_tree(&r, true, rng).unwrap();
            if !x.is_noise_rooted() && x.node_count() <= 4 {
                break x;
            }
        })
        .collect();
    for m in maps {
        let supp: Vec<&Tree> = m.character.support().collect();
        for tau in dots.iter().take(n / 4) {
            let sigma = supp.choose(rng).unwrap();
            let terms: Vec<Tree> = star(tau, sigma).unwrap().terms().map(|(x, _)| x.clone()).collect();
            out.extend(terms.choose_multiple(rng, 3).cloned());
        }
    }
    out.extend(dots);
    out.sort();
    out.dedup();
    out
}

fn random_maps(alpha: Rational64, n: usize, rng: &mut ChaCha8Rng) -> Vec<PreparationMap> {
    let supp = negative_support(alpha, 2);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=supp.len().min(12));
            let s: Vec<Tree> = supp.choose_multiple(rng, k).cloned().collect();
            PreparationMap::new(Character::random(alpha, &s, 4, rng).unwrap())
        })
        .collect()
}

#[test]
fn primal_and_dual_preparation_agree() {
    let alpha = Rational64::new(11, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let maps = random_maps(alpha, 3, &mut rng);
    let basis = sampled_basis(alpha, &maps, 40, &mut rng);
    let mut hits = 0;
    for r in &maps {
        for tau in basis.iter().filter(|x| !x.is_noise_rooted()) {
            let dual = r.apply_dual(tau).unwrap();
            let mut etas: Vec<Tree> = dual.terms().map(|(x, _)| x.clone()).collect();
            etas.extend(basis.iter().filter(|x| x.is_noise_rooted()).take(20).cloned());
            for eta in &etas {
                let lhs = pair(&r.apply(eta).unwrap(), tau);
                let rhs = dual.coef(eta) * q(eta.symmetry_factor() as i64);
                assert_eq!(lhs, rhs, "eta = {eta}, tau = {tau}");
                hits += usize::from(!lhs.is_zero() && eta != tau);
            }
        }
    }
    assert!(hits > 50, "{hits}");
}

#[test]
fn preparation_commutes_with_the_coproduct() {
    for alpha in [Rational64::new(11, 20), Rational64::new(4, 5)] {
        let cp = Coproduct::new(alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let maps = random_maps(alpha, 5, &mut rng);
        let basis = sampled_basis(alpha, &maps, 40, &mut rng);
        let mut nontrivial = 0;
        for r in &maps {
            for x in &basis {
                let rx = r.apply(x).unwrap();
                nontrivial += usize::from(rx.len() > 1);
                let mut lhs = Tensor::zero();
                for ((l, f), c) in cp.delta(x).terms() {
                    for (rl, c2) in r.apply(l).unwrap().terms() {
                        lhs.add_term((rl.clone(), f.clone()), c * c2);
                    }
                }
                let mut rhs = Tensor::zero();
                for (y, c) in rx.terms() {
                    for (k, c2) in cp.delta(y).terms() {
                        rhs.add_term(k.clone(), c * c2);
                    }
                }
                assert_eq!(lhs, rhs, "alpha = {alpha}, tree = {x}");
            }
        }
        assert!(nontrivial > 20, "{nontrivial}");
    }
}

#[test]
fn preparation_commutes_with_polynomials_and_raises_homogeneity() {
    let alpha = Rational64::new(11, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let maps = random_maps(alpha, 3, &mut rng);
    let basis = sampled_basis(alpha, &maps, 40, &mut rng);
    for r in &maps {
        for x in basis.iter().filter(|x| x.is_noise_rooted()) {
            let rx = r.apply(x).unwrap();
            for (y, _) in rx.terms().filter(|(y, _)| *y != x) {
                assert!(y.homogeneity().eval(alpha) > x.homogeneity().eval(alpha), "{x} -> {y}");
                assert!(y.noise_count() < x.noise_count(), "{x} -> {y}");
            }
            for k in [M::new(0, 1), M::new(1, 0), M::new(0, 2)] {
                let lifted = x.with_poly(x.poly() + k);
                let mut expected = TreeSeries::zero();
                for (y, c) in rx.terms() {
                    expected.add_term(y.with_poly(y.poly() + k), c.clone());
                }
                assert_eq!(r.apply(&lifted).unwrap(), expected, "X^{k} {x}");
            }
        }
    }
}

#[test]
fn nonplanar_versus_planar_sums() {
    let c = qr(7, 3);
    let tree = |p: u32, q: u32| Tree::parse(&format!("z4[I^{p}[z1] I^{q}[z1]]")).unwrap();
    let mut lhs = TreeSeries::zero();
    for p in 0..=3 {
        for q2 in p..=3 {
            let x = tree(p, q2);
            lhs.add_term(x.clone(), &c / q(x.symmetry_factor() as i64));
        }
    }
    let s0 = q(tree(0, 0).symmetry_factor() as i64);
    let mut rhs = TreeSeries::zero();
    for p in 0..=3 {
        for q2 in 0..=3 {
            rhs.add_term(tree(p, q2), &c / &s0);
        }
    }
    assert_eq!(lhs, rhs);
    assert!(lhs.coef(&tree(1, 2)) == c && lhs.coef(&tree(2, 2)) == &c / q(2));
}
