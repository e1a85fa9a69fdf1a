use num_bigint::BigInt;
use num_rational::BigRational;

use super::series::{TreeSeries, Truncation};
use crate::trees::{Edge, Label, MultiIndex2, Tree};
use crate::{Error, Result};

/// Planar, mutable copy of an expanded tree. Children are only ever
/// appended, so paths to existing nodes stay valid.
#[derive(Clone, Debug)]
pub(crate) struct PNode {
    pub poly: MultiIndex2,
    pub label: Label,
    pub children: Vec<(MultiIndex2, PNode)>,
}

impl PNode {
    /// `t` must have no p-decorations.
    pub fn from_tree(t: &Tree) -> Self {
        debug_assert_eq!(t.total_p(), 0);
        Self {
            poly: t.poly(),
            label: t.label(),
            children: t.children().iter().map(|e| (e.n, Self::from_tree(&e.child))).collect(),
        }
    }

    /// Canonical tree with chains folded into p-decorations.
    pub fn to_tree(&self) -> Tree {
        self.to_expanded().compress()
    }

    fn to_expanded(&self) -> Tree {
        Tree::new(
            self.poly,
            self.label,
            self.children.iter().map(|(n, c)| Edge::new(*n, 0, c.to_expanded())).collect(),
        )
    }

    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for (i, (_, c)) in self.children.iter().enumerate() {
            for mut p in c.paths() {
                p.insert(0, i);
                out.push(p);
            }
        }
        out
    }

    pub fn at(&self, path: &[usize]) -> &PNode {
        path.iter().fold(self, |n, &i| &n.children[i].1)
    }

    pub fn at_mut(&mut self, path: &[usize]) -> &mut PNode {
        path.iter().fold(self, |n, &i| &mut n.children[i].1)
    }
}

/// All ways to write `k = Σ_v k_v` over `slots` nodes, with the multinomial
/// weight `k!/∏ k_v!`.
pub(crate) fn distribute(k: MultiIndex2, slots: usize) -> Vec<(Vec<MultiIndex2>, u64)> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(slots);
    fn go(
        left: MultiIndex2,
        slots: usize,
        weight: u64,
        cur: &mut Vec<MultiIndex2>,
        out: &mut Vec<(Vec<MultiIndex2>, u64)>,
    ) {
        if cur.len() + 1 == slots {
            cur.push(left);
            out.push((cur.clone(), weight));
            cur.pop();
            return;
        }
        for kv in left.below() {
            cur.push(kv);
            go(left - kv, slots, weight * left.binom(kv), cur, out);
            cur.pop();
        }
    }
    if slots > 0 {
        go(k, slots, 1, &mut cur, &mut out);
    }
    out
}

/// `σ ↷_n τ`: graft `σ` onto every node `v` of `τ` along `𝓘_{n−m}`, moving
/// `m ≤ 𝔫_v` from the node's polynomial onto the edge with weight
/// `binom(𝔫_v, m)`.
pub fn graft(sigma: &Tree, n: MultiIndex2, tau: &Tree) -> Result<TreeSeries> {
    if !sigma.is_noise_rooted() {
        return Err(Error::InvalidTree(format!("grafted tree must be noise-rooted: {sigma}")));
    }
    star(&Tree::planted(n, 0, sigma.clone()), tau)
}

/// `(X^k ∏ 𝓘_{n_i}(σ_i)) ⋆ τ`: graft every `σ_i` independently onto the
/// nodes of `τ`, then distribute `k` over those nodes by the Leibniz rule.
pub fn star(sigma: &Tree, tau: &Tree) -> Result<TreeSeries> {
    if sigma.label() != Label::Z4 {
        return Err(Error::InvalidTree(format!(
            "left factor of the star product must be X^k times planted trees: {sigma}"
        )));
    }
    let s = sigma.expand();
    let base = PNode::from_tree(&tau.expand());
    let paths = base.paths();

    let mut states: Vec<(PNode, BigInt)> = vec![(base, BigInt::from(1))];
    for e in s.children() {
        let branch = PNode::from_tree(&e.child);
        let mut next = Vec::new();
        for (st, c) in &states {
            for path in &paths {
                let nv = st.at(path).poly;
                for m in e.n.min(nv).below() {
                    let mut t = st.clone();
                    let node = t.at_mut(path);
                    node.poly = nv - m;
                    node.children.push((e.n - m, branch.clone()));
                    next.push((t, c * BigInt::from(nv.binom(m))));
                }
            }
        }
        states = next;
    }

    let mut out = TreeSeries::zero();
    for (st, c) in states {
        for (dist, w) in distribute(s.poly(), paths.len()) {
            let mut t = st.clone();
            for (path, kv) in paths.iter().zip(dist) {
                let node = t.at_mut(path);
                node.poly = node.poly + kv;
            }
            out.add_term(t.to_tree(), BigRational::from_integer(&c * BigInt::from(w)));
        }
    }
    Ok(out)
}

/// Bilinear extension of [`star`]; the result carries the stricter of the
/// two truncations.
pub fn star_series(a: &TreeSeries, b: &TreeSeries) -> Result<TreeSeries> {
    let tr = Truncation::meet(a.truncation(), b.truncation())?;
    let mut out = TreeSeries::zero();
    out.set_truncation(tr);
    for (s, cs) in a.terms() {
        for (t, ct) in b.terms() {
            out.add_scaled(&star(s, t)?, &(cs * ct));
        }
    }
    Ok(out)
}

/// Tree product: the roots are merged. At most one factor may carry a noise
/// label at the root.
pub fn tree_product(a: &Tree, b: &Tree) -> Result<Tree> {
    let label = match (a.label(), b.label()) {
        (Label::Z4, l) | (l, Label::Z4) => l,
        _ => {
            return Err(Error::InvalidTree(format!(
                "product of two noise-rooted trees is not a tree: {a} * {b}"
            )))
        }
    };
    let mut children: Vec<Edge> = a.children().to_vec();
    children.extend(b.children().iter().cloned());
    Ok(Tree::new(a.poly() + b.poly(), label, children))
}
