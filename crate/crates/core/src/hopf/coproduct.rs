use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::{BigRational, Rational64};
use num_traits::Zero;

use super::graft::tree_product;
use super::series::{q, q_ratio};
use crate::trees::{Edge, MultiIndex2, Tree};

/// Product `X₊^k ∏ 𝓘⁺_{n_i}(τ_i)` in the positive structure.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ForestPlus {
    poly: MultiIndex2,
    planted: Vec<(MultiIndex2, Tree)>,
}

impl ForestPlus {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn x(k: MultiIndex2) -> Self {
        Self { poly: k, planted: vec![] }
    }

    pub fn planted(n: MultiIndex2, t: Tree) -> Self {
        Self { poly: MultiIndex2::ZERO, planted: vec![(n, t)] }
    }

    pub fn poly(&self) -> MultiIndex2 {
        self.poly
    }

    pub fn factors(&self) -> &[(MultiIndex2, Tree)] {
        &self.planted
    }

    pub fn is_one(&self) -> bool {
        self.poly.is_zero() && self.planted.is_empty()
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut planted = self.planted.clone();
        planted.extend(o.planted.iter().cloned());
        planted.sort();
        Self { poly: self.poly + o.poly, planted }
    }
}

impl fmt::Display for ForestPlus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return f.write_str("1");
        }
        let mut parts = Vec::new();
        if !self.poly.is_zero() {
            parts.push(format!("X+{}", self.poly));
        }
        for (n, t) in &self.planted {
            parts.push(format!("I+{n}[{t}]"));
        }
        f.write_str(&parts.join(" "))
    }
}

/// Exact linear combination of elementary tensors with keys of type `K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tensor<K: Ord> {
    terms: BTreeMap<K, BigRational>,
}

impl<K: Ord> Default for Tensor<K> {
    fn default() -> Self {
        Self { terms: BTreeMap::new() }
    }
}

impl<K: Ord + Clone> Tensor<K> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, k: K, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(k) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&K, &BigRational)> {
        self.terms.iter()
    }

    pub fn coef(&self, k: &K) -> BigRational {
        self.terms.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Image of `Δ`: terms `τ' ⊗ f`.
pub type TensorSeries = Tensor<(Tree, ForestPlus)>;
/// Image of `Δ⁺`.
pub type PlusTensor = Tensor<(ForestPlus, ForestPlus)>;

/// `Δ` and `Δ⁺` at a fixed `α`, which decides which positive symbols exist.
#[derive(Clone, Copy, Debug)]
pub struct Coproduct {
    pub alpha: Rational64,
}

enum Piece {
    Edge(Edge),
    Poly(MultiIndex2),
}

impl Coproduct {
    pub fn new(alpha: Rational64) -> Self {
        Self { alpha }
    }

    fn hom(&self, t: &Tree) -> Rational64 {
        t.homogeneity().eval(self.alpha)
    }

    /// `|𝓘⁺_n τ| = |τ| + 2 − |n|`.
    fn plus_hom(&self, n: MultiIndex2, t: &Tree) -> Rational64 {
        self.hom(t) + Rational64::from(2 - n.degree() as i64)
    }

    /// The `k` with `|k| < |τ| + 2 − |n|`.
    fn positive_shifts(&self, n: MultiIndex2, t: &Tree) -> Vec<MultiIndex2> {
        let b = self.plus_hom(n, t);
        let bound = b.ceil().to_integer();
        MultiIndex2::with_degree_below(bound)
            .into_iter()
            .filter(|k| Rational64::from(k.degree() as i64) < b)
            .collect()
    }

    pub fn delta(&self, t: &Tree) -> TensorSeries {
        let mut out = TensorSeries::zero();
        for (l, r, c) in self.delta_expanded(&t.expand()) {
            out.add_term((l.compress(), r), c);
        }
        out
    }

    /// Left factors are returned expanded.
    fn delta_expanded(&self, t: &Tree) -> Vec<(Tree, ForestPlus, BigRational)> {
        let k = t.poly();
        let mut acc: Vec<(MultiIndex2, Vec<Edge>, ForestPlus, BigRational)> = k
            .below()
            .map(|k1| (k1, vec![], ForestPlus::x(k - k1), q(k.binom(k1) as i64)))
            .collect();
        for e in t.children() {
            let pieces = self.delta_planted(e.n, &e.child);
            let mut next = Vec::with_capacity(acc.len() * pieces.len());
            for (poly, edges, f, c) in &acc {
                for (piece, g, d) in &pieces {
                    let (mut poly, mut edges) = (*poly, edges.clone());
                    match piece {
                        Piece::Edge(e) => edges.push(e.clone()),
                        Piece::Poly(k) => poly = poly + *k,
                    }
                    next.push((poly, edges, f.mul(g), c * d));
                }
            }
            acc = next;
        }
        acc.into_iter()
            .map(|(poly, edges, f, c)| (Tree::new(poly, t.label(), edges), f, c))
            .collect()
    }

    fn delta_planted(&self, n: MultiIndex2, child: &Tree) -> Vec<(Piece, ForestPlus, BigRational)> {
        let mut out: Vec<_> = self
            .delta_expanded(child)
            .into_iter()
            .map(|(l, r, c)| (Piece::Edge(Edge::new(n, 0, l)), r, c))
            .collect();
        let compressed = child.compress();
        for k in self.positive_shifts(n, child) {
            out.push((
                Piece::Poly(k),
                ForestPlus::planted(n + k, compressed.clone()),
                q_ratio(1, k.factorial()),
            ));
        }
        out
    }

    pub fn delta_plus(&self, f: &ForestPlus) -> PlusTensor {
        let k = f.poly();
        let mut acc: Vec<(ForestPlus, ForestPlus, BigRational)> = k
            .below()
            .map(|k1| (ForestPlus::x(k1), ForestPlus::x(k - k1), q(k.binom(k1) as i64)))
            .collect();
        for (n, t) in f.factors() {
            let pieces = self.delta_plus_planted(*n, t);
            let mut next = Vec::with_capacity(acc.len() * pieces.len());
            for (a, b, c) in &acc {
                for (x, y, d) in &pieces {
                    next.push((a.mul(x), b.mul(y), c * d));
                }
            }
            acc = next;
        }
        let mut out = PlusTensor::zero();
        for (a, b, c) in acc {
            out.add_term((a, b), c);
        }
        out
    }

    fn delta_plus_planted(
        &self,
        n: MultiIndex2,
        t: &Tree,
    ) -> Vec<(ForestPlus, ForestPlus, BigRational)> {
        let mut out = Vec::new();
        for ((l, r), c) in self.delta(t).terms() {
            // 𝓘⁺_n(l) vanishes unless it has positive homogeneity
            if self.plus_hom(n, l) > Rational64::zero() {
                out.push((ForestPlus::planted(n, l.clone()), r.clone(), c.clone()));
            }
        }
        for k in self.positive_shifts(n, t) {
            out.push((
                ForestPlus::x(k),
                ForestPlus::planted(n + k, t.clone()),
                q_ratio(1, k.factorial()),
            ));
        }
        out
    }
}

/// `Δ` is multiplicative; exposed for tests of that property.
pub fn delta_of_product(cp: &Coproduct, a: &Tree, b: &Tree) -> crate::Result<TensorSeries> {
    let mut out = TensorSeries::zero();
    for ((la, ra), ca) in cp.delta(a).terms() {
        for ((lb, rb), cb) in cp.delta(b).terms() {
            out.add_term((tree_product(la, lb)?, ra.mul(rb)), ca * cb);
        }
    }
    Ok(out)
}
