//! Decorated rooted trees.
//!
//! A tree is `X^k ζ_ℓ ∏ 𝓘^{p_i}_{n_i}(τ_i)`. Children are kept sorted so that
//! structural equality is isomorphism of non-planar trees. An edge carrying
//! `p > 0` stands for `p` nested insertions of `ζ₃𝓘_{(0,2)}` between the
//! parent and the child; [`Tree::expand`] makes them explicit and
//! [`Tree::compress`] folds them back.

mod enumerate;
mod format;
mod random;

use std::fmt;
use std::ops::{Add, Sub};
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

pub use enumerate::{enumerate, Family, NoiseMode, RuleSet};
pub use random::sample_tree;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex2 {
    pub k1: u32,
    pub k2: u32,
}

impl MultiIndex2 {
    pub const ZERO: Self = Self { k1: 0, k2: 0 };

    pub const fn new(k1: u32, k2: u32) -> Self {
        Self { k1, k2 }
    }

    /// Parabolic degree `2 k1 + k2`.
    pub fn degree(self) -> u32 {
        2 * self.k1 + self.k2
    }

    pub fn is_zero(self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }

    /// Componentwise `self ≤ other`.
    pub fn dominated_by(self, other: Self) -> bool {
        self.k1 <= other.k1 && self.k2 <= other.k2
    }

    pub fn checked_sub(self, other: Self) -> Option<Self> {
        Some(Self::new(
            self.k1.checked_sub(other.k1)?,
            self.k2.checked_sub(other.k2)?,
        ))
    }

    pub fn min(self, other: Self) -> Self {
        Self::new(self.k1.min(other.k1), self.k2.min(other.k2))
    }

    pub fn factorial(self) -> u64 {
        factorial(self.k1) * factorial(self.k2)
    }

    /// `binom(self, m) = binom(k1, m1) binom(k2, m2)`; zero unless `m ≤ self`.
    pub fn binom(self, m: Self) -> u64 {
        if !m.dominated_by(self) {
            return 0;
        }
        binomial(self.k1, m.k1) * binomial(self.k2, m.k2)
    }

    /// All `m ≤ self`, in lexicographic order.
    pub fn below(self) -> impl Iterator<Item = Self> {
        (0..=self.k1).flat_map(move |a| (0..=self.k2).map(move |b| Self::new(a, b)))
    }

    /// All multi-indices with parabolic degree strictly below `bound`.
    pub fn with_degree_below(bound: i64) -> Vec<Self> {
        let mut out = Vec::new();
        if bound <= 0 {
            return out;
        }
        let b = bound as u32;
        for k1 in 0..=b / 2 {
            for k2 in 0..b {
                if 2 * k1 + k2 < b {
                    out.push(Self::new(k1, k2));
                }
            }
        }
        out
    }
}

impl Add for MultiIndex2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.k1 + o.k1, self.k2 + o.k2)
    }
}

impl Sub for MultiIndex2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.checked_sub(o).expect("multi-index subtraction underflow")
    }
}

impl fmt::Display for MultiIndex2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k1, self.k2)
    }
}

pub(crate) fn factorial(n: u32) -> u64 {
    (1..=n as u64).product()
}

pub(crate) fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Node labels `ζ₁ … ζ₄`; `ζ₁` is the noise and `ζ₄` stands for `X^0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Z1 = 1,
    Z2 = 2,
    Z3 = 3,
    Z4 = 4,
}

impl Label {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Self::Z1),
            2 => Some(Self::Z2),
            3 => Some(Self::Z3),
            4 => Some(Self::Z4),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    /// Homogeneity of the bare symbol.
    pub fn homogeneity(self) -> Homogeneity {
        match self {
            Self::Z1 => Homogeneity::new(Rational64::from(1), Rational64::from(-2)),
            _ => Homogeneity::ZERO,
        }
    }
}

/// Affine function `alpha_coef·α + const_part` of the noise regularity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Homogeneity {
    pub alpha_coef: Rational64,
    pub const_part: Rational64,
}

impl Homogeneity {
    pub const ZERO: Self = Self {
        alpha_coef: Rational64::new_raw(0, 1),
        const_part: Rational64::new_raw(0, 1),
    };

    pub fn new(alpha_coef: Rational64, const_part: Rational64) -> Self {
        Self { alpha_coef, const_part }
    }

    pub fn constant(c: i64) -> Self {
        Self::new(Rational64::from(0), Rational64::from(c))
    }

    pub fn eval(self, alpha: Rational64) -> Rational64 {
        self.alpha_coef * alpha + self.const_part
    }

    pub fn eval_f64(self, alpha: f64) -> f64 {
        let c = |r: Rational64| *r.numer() as f64 / *r.denom() as f64;
        c(self.alpha_coef) * alpha + c(self.const_part)
    }
}

impl Add for Homogeneity {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.alpha_coef + o.alpha_coef, self.const_part + o.const_part)
    }
}

impl Sub for Homogeneity {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.alpha_coef - o.alpha_coef, self.const_part - o.const_part)
    }
}

impl fmt::Display for Homogeneity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let zero = Rational64::from(0);
        match (self.alpha_coef == zero, self.const_part == zero) {
            (true, _) => write!(f, "{}", self.const_part),
            (false, true) => write!(f, "{}a", self.alpha_coef),
            (false, false) => {
                let sign = if self.const_part < zero { "-" } else { "+" };
                write!(f, "{}a{}{}", self.alpha_coef, sign, self.const_part.abs())
            }
        }
    }
}

/// An outgoing edge `𝓘^p_n(child)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub n: MultiIndex2,
    pub p: u32,
    pub child: Tree,
}

impl Edge {
    pub fn new(n: MultiIndex2, p: u32, child: Tree) -> Self {
        Self { n, p, child }
    }

    /// Homogeneity of the planted tree `𝓘_n(child)`.
    pub fn planted_homogeneity(&self) -> Homogeneity {
        self.child.homogeneity() + Homogeneity::constant(2 - self.n.degree() as i64)
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node {
    pub poly: MultiIndex2,
    pub label: Label,
    pub children: Vec<Edge>,
    // cached, determined by the fields above
    hom: Homogeneity,
    noise: u32,
    nodes: u32,
    total_p: u32,
}

/// Canonical non-planar decorated tree; cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree(Arc<Node>);

impl Tree {
    pub fn new(poly: MultiIndex2, label: Label, mut children: Vec<Edge>) -> Self {
        children.sort();
        let mut hom = Homogeneity::constant(poly.degree() as i64) + label.homogeneity();
        let mut noise = u32::from(label == Label::Z1);
        let mut nodes = 1;
        let mut total_p = 0;
        for e in &children {
            hom = hom + e.planted_homogeneity();
            noise += e.child.noise_count() as u32;
            nodes += e.child.0.nodes;
            total_p += e.p + e.child.0.total_p;
        }
        Tree(Arc::new(Node { poly, label, children, hom, noise, nodes, total_p }))
    }

    pub fn leaf(label: Label) -> Self {
        Self::new(MultiIndex2::ZERO, label, vec![])
    }

    /// The pure polynomial `X^k`.
    pub fn x(k: MultiIndex2) -> Self {
        Self::new(k, Label::Z4, vec![])
    }

    /// `𝓘^p_n(child)` multiplied by nothing, i.e. a `ζ₄` root with one edge.
    pub fn planted(n: MultiIndex2, p: u32, child: Tree) -> Self {
        Self::new(MultiIndex2::ZERO, Label::Z4, vec![Edge::new(n, p, child)])
    }

    pub fn poly(&self) -> MultiIndex2 {
        self.0.poly
    }

    pub fn label(&self) -> Label {
        self.0.label
    }

    pub fn children(&self) -> &[Edge] {
        &self.0.children
    }

    /// Same tree with a different root polynomial.
    pub fn with_poly(&self, poly: MultiIndex2) -> Self {
        Self::new(poly, self.label(), self.children().to_vec())
    }

    /// Root carries a noise-type symbol `ζ₁, ζ₂, ζ₃`.
    pub fn is_noise_rooted(&self) -> bool {
        self.label() != Label::Z4
    }

    pub fn homogeneity(&self) -> Homogeneity {
        self.0.hom
    }

    pub fn noise_count(&self) -> usize {
        self.0.noise as usize
    }

    /// Number of nodes of this (possibly compressed) representation.
    pub fn node_count(&self) -> usize {
        self.0.nodes as usize
    }

    pub fn edge_count(&self) -> usize {
        self.node_count() - 1
    }

    /// `|p|`, the sum of all edge p-decorations.
    pub fn total_p(&self) -> u32 {
        self.0.total_p
    }

    pub fn symmetry_factor(&self) -> u64 {
        let mut s = self.poly().factorial();
        let ch = self.children();
        let mut i = 0;
        while i < ch.len() {
            let mut j = i + 1;
            while j < ch.len() && ch[j] == ch[i] {
                j += 1;
            }
            let beta = (j - i) as u32;
            s *= factorial(beta) * ch[i].child.symmetry_factor().pow(beta);
            i = j;
        }
        s
    }

    /// `ζ₃𝓘_{(0,2)}(τ)` with no polynomial and no other children.
    pub fn is_chain(&self) -> bool {
        self.label() == Label::Z3
            && self.poly().is_zero()
            && self.children().len() == 1
            && self.children()[0].n == MultiIndex2::new(0, 2)
    }

    pub fn strip_p(&self) -> Tree {
        Self::new(
            self.poly(),
            self.label(),
            self.children()
                .iter()
                .map(|e| Edge::new(e.n, 0, e.child.strip_p()))
                .collect(),
        )
    }

    /// Replace every `p` unit by an explicit `ζ₃𝓘_{(0,2)}` node.
    pub fn expand(&self) -> Tree {
        if self.total_p() == 0 {
            return self.clone();
        }
        let children = self
            .children()
            .iter()
            .map(|e| {
                let mut c = e.child.expand();
                for _ in 0..e.p {
                    c = Self::chain(c);
                }
                Edge::new(e.n, 0, c)
            })
            .collect();
        Self::new(self.poly(), self.label(), children)
    }

    /// `ζ₃𝓘_{(0,2)}(inner)`.
    pub fn chain(inner: Tree) -> Tree {
        Self::new(
            MultiIndex2::ZERO,
            Label::Z3,
            vec![Edge::new(MultiIndex2::new(0, 2), 0, inner)],
        )
    }

    /// Fold chain nodes below the root into edge p-decorations.
    pub fn compress(&self) -> Tree {
        let children = self.children().iter().map(compress_edge).collect();
        Self::new(self.poly(), self.label(), children)
    }

    /// All trees obtained by distributing at most `max_p` units of `p` over
    /// the edges (added to the existing decorations).
    pub fn p_decorations(&self, max_p: u32) -> Vec<Tree> {
        let budget = max_p.saturating_sub(self.total_p());
        let mut out = Vec::new();
        for extra in 0..=budget {
            out.extend(self.add_p_exactly(extra));
        }
        out.sort();
        out.dedup();
        out
    }

    fn add_p_exactly(&self, extra: u32) -> Vec<Tree> {
        // distribute `extra` over the children edges and inside subtrees
        let ch = self.children();
        let mut partial: Vec<(Vec<Edge>, u32)> = vec![(Vec::new(), extra)];
        for e in ch {
            let mut next = Vec::new();
            for (acc, left) in &partial {
                for on_edge in 0..=*left {
                    for inside in 0..=(*left - on_edge) {
                        for c in e.child.add_p_exactly(inside) {
                            let mut a = acc.clone();
                            a.push(Edge::new(e.n, e.p + on_edge, c));
                            next.push((a, left - on_edge - inside));
                        }
                    }
                }
            }
            partial = next;
        }
        partial
            .into_iter()
            .filter(|(_, left)| *left == 0)
            .map(|(edges, _)| Self::new(self.poly(), self.label(), edges))
            .collect()
    }

    /// Pre-order traversal of all subtrees (including `self`).
    pub fn subtrees(&self) -> Vec<Tree> {
        let mut out = vec![self.clone()];
        for e in self.children() {
            out.extend(e.child.subtrees());
        }
        out
    }

    /// Depth in the current representation (a leaf has depth 0).
    pub fn depth(&self) -> usize {
        self.children()
            .iter()
            .map(|e| 1 + e.child.depth())
            .max()
            .unwrap_or(0)
    }

    /// Whether every node satisfies the edge rules of the equation.
    pub fn respects_rules(&self, mode: NoiseMode) -> bool {
        enumerate::node_ok(self, mode) && self.children().iter().all(|e| e.child.respects_rules(mode))
    }
}

fn compress_edge(e: &Edge) -> Edge {
    let c = e.child.compress();
    if c.is_chain() {
        let inner = &c.children()[0];
        Edge::new(e.n, e.p + 1 + inner.p, inner.child.clone())
    } else {
        Edge::new(e.n, e.p, c)
    }
}

/// Trees are canonical by construction; this rebuilds bottom-up and is the
/// identity on any value produced by this crate.
pub fn canonicalize(t: &Tree) -> Tree {
    Tree::new(
        t.poly(),
        t.label(),
        t.children()
            .iter()
            .map(|e| Edge::new(e.n, e.p, canonicalize(&e.child)))
            .collect(),
    )
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
