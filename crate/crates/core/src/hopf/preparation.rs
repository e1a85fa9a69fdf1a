use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::Zero;
use rand::Rng;

use super::graft::{star, PNode};
use super::series::{q, TreeSeries};
use crate::trees::{Edge, Label, MultiIndex2, Tree};
use crate::{Error, Result};

/// Finite table of values `ℓ(σ)` on negative noise-rooted trees. Bare
/// symbols `X^kζ_ℓ` always have value zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Character {
    pub alpha: Rational64,
    values: BTreeMap<Tree, BigRational>,
    /// When set, a negative noise-rooted tree missing from the table is an
    /// error instead of a zero.
    strict: bool,
}

impl Character {
    /// Zero outside `values`.
    pub fn new(alpha: Rational64, values: BTreeMap<Tree, BigRational>) -> Result<Self> {
        let c = Self { alpha, values, strict: false };
        c.validate()?;
        Ok(c)
    }

    /// Every negative noise-rooted tree that a computation needs must be in
    /// `values`.
    pub fn strict(alpha: Rational64, values: BTreeMap<Tree, BigRational>) -> Result<Self> {
        Ok(Self { strict: true, ..Self::new(alpha, values)? })
    }

    /// Integer values in `-range..=range` on each of `support`; zeros are
    /// redrawn so the support is exact.
    pub fn random<R: Rng>(
        alpha: Rational64,
        support: &[Tree],
        range: i64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for t in support {
            let v = loop {
                let v = rng.gen_range(-range..=range);
                if v != 0 {
                    break v;
                }
            };
            let d = rng.gen_range(1..=3i64);
            values.insert(t.clone(), BigRational::new(BigInt::from(v), BigInt::from(d)));
        }
        Self::new(alpha, values)
    }

    fn validate(&self) -> Result<()> {
        for t in self.values.keys() {
            if t.children().is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "preparation maps fix the bare symbol {t}; it cannot carry a value"
                )));
            }
            if !t.is_noise_rooted() || t.homogeneity().eval(self.alpha) >= Rational64::zero() {
                return Err(Error::InvalidParameter(format!(
                    "character defined off the negative noise-rooted trees: {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> impl Iterator<Item = &Tree> {
        self.values.keys()
    }

    fn max_node_poly(&self) -> MultiIndex2 {
        fn walk(t: &Tree, m: &mut MultiIndex2) {
            let p = t.poly();
            *m = MultiIndex2::new(m.k1.max(p.k1), m.k2.max(p.k2));
            for e in t.children() {
                walk(&e.child, m);
            }
        }
        let mut m = MultiIndex2::ZERO;
        for t in self.values.keys() {
            walk(&t.expand(), &mut m);
        }
        m
    }

    /// `ℓ(σ)`.
    pub fn value(&self, s: &Tree) -> Result<BigRational> {
        if let Some(v) = self.values.get(s) {
            return Ok(v.clone());
        }
        let required = s.is_noise_rooted()
            && !s.children().is_empty()
            && !s.is_chain()
            && s.homogeneity().eval(self.alpha) < Rational64::zero();
        if self.strict && required {
            return Err(Error::InvalidParameter(format!("character undefined on {s}")));
        }
        Ok(BigRational::zero())
    }
}

/// The preparation map `R_ℓ` of a character, acting on trees.
#[derive(Clone, Debug)]
pub struct PreparationMap {
    pub character: Character,
}

impl PreparationMap {
    pub fn new(character: Character) -> Self {
        Self { character }
    }

    /// `R*(τ*) = τ* + Σ_σ ℓ(σ)/S(σ) (τ⋆σ)*` for `τ` rooted at `X^k`, and
    /// `τ*` otherwise. The result lists the coefficients of the `η*`.
    pub fn apply_dual(&self, tau: &Tree) -> Result<TreeSeries> {
        let mut out = TreeSeries::single(tau.clone());
        if tau.is_noise_rooted() {
            return Ok(out);
        }
        for s in self.character.support() {
            let c = self.character.value(s)? / q(s.symmetry_factor() as i64);
            out.add_scaled(&star(tau, s)?, &c);
        }
        Ok(out)
    }

    /// The adjoint of [`Self::apply_dual`] for the pairing
    /// `⟨η, τ*⟩ = S(η)δ_{ητ}`: every root-containing subtree `σ` of `η` is
    /// contracted to the value `ℓ(σ)`.
    pub fn apply(&self, eta: &Tree) -> Result<TreeSeries> {
        let mut out = TreeSeries::single(eta.clone());
        if !eta.is_noise_rooted() {
            return Ok(out);
        }
        let s_eta = q(eta.symmetry_factor() as i64);
        for (tau, sigma) in self.contractions(eta)? {
            let l = self.character.value(&sigma)?;
            if l.is_zero() {
                continue;
            }
            let c = star(&tau, &sigma)?.coef(eta);
            if c.is_zero() {
                continue;
            }
            let w = &s_eta / q(tau.symmetry_factor() as i64) * l
                / q(sigma.symmetry_factor() as i64)
                * c;
            out.add_term(tau, w);
        }
        Ok(out)
    }

    pub fn apply_series(&self, x: &TreeSeries) -> Result<TreeSeries> {
        let mut out = TreeSeries::zero();
        out.set_truncation(x.truncation());
        for (t, c) in x.terms() {
            out.add_scaled(&self.apply(t)?, c);
        }
        Ok(out)
    }

    /// Pairs `(τ, σ)` with `τ ∈ 𝕋•` and `η` among the terms of `τ⋆σ`.
    fn contractions(&self, eta: &Tree) -> Result<BTreeSet<(Tree, Tree)>> {
        let dmax = self.character.max_node_poly();
        let root = PNode::from_tree(&eta.expand());
        let mut out = BTreeSet::new();
        for cut in root_closed(&root) {
            for (tau, sigma) in cut.candidates(dmax) {
                if !sigma.is_noise_rooted() {
                    continue;
                }
                let known = !self.character.value(&sigma)?.is_zero();
                if known {
                    out.insert((tau, sigma));
                }
            }
        }
        Ok(out)
    }
}

/// A root-closed part of a planar tree: kept nodes plus the branches hanging
/// off them.
struct Cut {
    kept: KeptNode,
}

#[derive(Clone)]
struct KeptNode {
    poly: MultiIndex2,
    label: Label,
    kept: Vec<(MultiIndex2, KeptNode)>,
    hanging: Vec<(MultiIndex2, Tree)>,
}

fn root_closed(n: &PNode) -> Vec<Cut> {
    kept_variants(n).into_iter().map(|kept| Cut { kept }).collect()
}

fn kept_variants(n: &PNode) -> Vec<KeptNode> {
    let mut acc = vec![KeptNode { poly: n.poly, label: n.label, kept: vec![], hanging: vec![] }];
    for (e, c) in &n.children {
        let mut next = Vec::new();
        for k in &acc {
            let mut h = k.clone();
            h.hanging.push((*e, c.to_tree()));
            next.push(h);
            for v in kept_variants(c) {
                let mut h = k.clone();
                h.kept.push((*e, v));
                next.push(h);
            }
        }
        acc = next;
    }
    acc
}

impl Cut {
    /// All `(τ, σ)` consistent with the cut: a hanging edge `n` of `η` came
    /// from an edge `n + m` of `τ`, and the polynomial `k_v` at a kept node
    /// came from `τ`'s root.
    fn candidates(&self, dmax: MultiIndex2) -> Vec<(Tree, Tree)> {
        let mut out = Vec::new();
        for (sigma, k, branches) in node_candidates(&self.kept, dmax) {
            let tau = Tree::new(
                k,
                Label::Z4,
                branches.into_iter().map(|(n, t)| Edge::new(n, 0, t)).collect(),
            );
            out.push((tau.compress(), sigma.compress()));
        }
        out
    }
}

type Partial = (Tree, MultiIndex2, Vec<(MultiIndex2, Tree)>);

fn node_candidates(n: &KeptNode, dmax: MultiIndex2) -> Vec<Partial> {
    // children first: each yields (σ-subtree, k used, τ-branches)
    let mut kids: Vec<(Vec<Edge>, MultiIndex2, Vec<(MultiIndex2, Tree)>)> =
        vec![(vec![], MultiIndex2::ZERO, vec![])];
    for (e, c) in &n.kept {
        let sub = node_candidates(c, dmax);
        let mut next = Vec::new();
        for (edges, k, br) in &kids {
            for (s, k2, br2) in &sub {
                let mut edges = edges.clone();
                edges.push(Edge::new(*e, 0, s.clone()));
                let mut br = br.clone();
                br.extend(br2.iter().cloned());
                next.push((edges, *k + *k2, br));
            }
        }
        kids = next;
    }
    // transfers m_e on the hanging edges, bounded by dmax in total
    let mut transfers: Vec<(MultiIndex2, Vec<(MultiIndex2, Tree)>)> = vec![(MultiIndex2::ZERO, vec![])];
    for (e, t) in &n.hanging {
        let mut next = Vec::new();
        for (sum, br) in &transfers {
            for m in dmax.below() {
                let s = *sum + m;
                if !s.dominated_by(dmax) {
                    continue;
                }
                let mut br = br.clone();
                br.push((*e + m, t.clone()));
                next.push((s, br));
            }
        }
        transfers = next;
    }
    let mut out = Vec::new();
    for kv in n.poly.below() {
        for (sum, tb) in &transfers {
            let sigma_poly = n.poly - kv + *sum;
            if !sigma_poly.dominated_by(dmax) {
                continue;
            }
            for (edges, k, br) in &kids {
                let sigma = Tree::new(sigma_poly, n.label, edges.clone());
                let mut branches = br.clone();
                branches.extend(tb.iter().cloned());
                out.push((sigma, *k + kv, branches));
            }
        }
    }
    out
}
