use std::collections::BTreeSet;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{Edge, Label, MultiIndex2, Tree};
use crate::{Error, Result};

/// Which nonlinearities are present in the equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `∂u − a(u)∂²u = f(u)ξ + g(u)(∂u)²`.
    #[default]
    General,
    /// `∂u − a(u)∂²u = ξ`: noise nodes are leaves and `ζ₂` has no `(0,1)` edge.
    LinearForcing,
    /// `∂u − a(u)∂²u = f(u)ξ`: as `General` without the gradient term.
    NoGradient,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub alpha: Rational64,
    /// Bound on `|p|`; `None` asks for the infinite family and is rejected.
    pub max_p: Option<u32>,
    pub homogeneity_cutoff: Rational64,
    pub noise_mode: NoiseMode,
    /// Keep only trees with an even number of `ζ₁`.
    pub even_noise_only: bool,
}

impl RuleSet {
    pub fn new(alpha: Rational64, cutoff: Rational64) -> Self {
        Self {
            alpha,
            max_p: Some(3),
            homogeneity_cutoff: cutoff,
            noise_mode: NoiseMode::General,
            even_noise_only: false,
        }
    }

    fn validate(&self) -> Result<u32> {
        if self.alpha <= Rational64::zero() || self.alpha >= Rational64::from(1) {
            return Err(Error::AlphaOutOfRange(self.alpha.to_string()));
        }
        self.max_p.ok_or(Error::UnboundedP)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Noise-rooted and `X^k`-rooted rule trees.
    B,
    /// Noise-rooted rule trees.
    BCirc,
    /// Noise-rooted with negative homogeneity.
    BCircMinus,
    /// `B` with `p = 0`.
    BZero,
    /// `BCircMinus` with `p = 0`.
    BCircMinusZero,
    /// `X^k` with `|k| ≤ cutoff` and planted `𝓘^q(τ)` below the cutoff.
    U,
}

const N01: MultiIndex2 = MultiIndex2::new(0, 1);
const N02: MultiIndex2 = MultiIndex2::new(0, 2);

/// Edge rule at a single node.
pub(crate) fn node_ok(t: &Tree, mode: NoiseMode) -> bool {
    let ch = t.children();
    if ch.iter().any(|e| e.child.label() == Label::Z4) {
        return false;
    }
    let count = |n: MultiIndex2| ch.iter().filter(|e| e.n == n).count();
    let only = |allowed: &[MultiIndex2]| ch.iter().all(|e| allowed.contains(&e.n));
    let no_grad = mode != NoiseMode::General;
    match t.label() {
        Label::Z1 => only(&[MultiIndex2::ZERO]) && !(mode == NoiseMode::LinearForcing && !ch.is_empty()),
        Label::Z2 => {
            only(&[MultiIndex2::ZERO, N01]) && count(N01) <= if no_grad { 0 } else { 2 }
        }
        Label::Z3 => only(&[MultiIndex2::ZERO, N02]) && count(N02) <= 1,
        Label::Z4 => {
            (only(&[MultiIndex2::ZERO, N01]) && count(N01) <= if no_grad { 0 } else { 2 })
                || (only(&[MultiIndex2::ZERO, N02]) && count(N02) <= 1)
        }
    }
}

struct Cand {
    edge: Edge,
    hom: Rational64,
    p: u32,
}

struct Ctx<'a> {
    alpha: Rational64,
    max_p: u32,
    mode: NoiseMode,
    pool: &'a [Tree],
}

impl Ctx<'_> {
    fn candidates(&self, n: MultiIndex2) -> Vec<Cand> {
        let mut v = Vec::new();
        for t in self.pool {
            let used = t.total_p();
            if used > self.max_p {
                continue;
            }
            for p in 0..=(self.max_p - used) {
                let edge = Edge::new(n, p, t.clone());
                let hom = edge.planted_homogeneity().eval(self.alpha);
                v.push(Cand { edge, hom, p: p + used });
            }
        }
        v.sort_by(|a, b| a.hom.cmp(&b.hom));
        v
    }

    /// All roots with the given label and homogeneity below `bound`, with
    /// children drawn from the pool.
    fn roots(&self, label: Label, bound: Rational64, out: &mut BTreeSet<Tree>) {
        let plain = self.candidates(MultiIndex2::ZERO);
        let special_kinds: Vec<(MultiIndex2, usize)> = match (label, self.mode) {
            (Label::Z1, _) => vec![],
            (Label::Z2, NoiseMode::General) => vec![(N01, 2)],
            (Label::Z2, _) => vec![],
            (Label::Z3, _) => vec![(N02, 1)],
            (Label::Z4, NoiseMode::General) => vec![(N01, 2), (N02, 1)],
            (Label::Z4, _) => vec![(N02, 1)],
        };
        let leaf_only = label == Label::Z1 && self.mode == NoiseMode::LinearForcing;

        let mut specials: Vec<(Vec<Edge>, Rational64, u32)> = vec![(vec![], Rational64::zero(), 0)];
        if !leaf_only {
            for (n, maxc) in special_kinds {
                let c = self.candidates(n);
                for i in 0..c.len() {
                    specials.push((vec![c[i].edge.clone()], c[i].hom, c[i].p));
                    if maxc >= 2 {
                        for j in i..c.len() {
                            specials.push((
                                vec![c[i].edge.clone(), c[j].edge.clone()],
                                c[i].hom + c[j].hom,
                                c[i].p + c[j].p,
                            ));
                        }
                    }
                }
            }
        }

        let lhom = label.homogeneity().eval(self.alpha);
        let kmax = (bound - lhom + Rational64::from(2)).ceil().to_i64().unwrap_or(0);
        for k in MultiIndex2::with_degree_below(kmax.max(1)) {
            let base = lhom + Rational64::from(k.degree() as i64);
            for (sp, sh, spp) in &specials {
                if *spp > self.max_p {
                    continue;
                }
                let rem = bound - base - sh;
                if rem <= Rational64::zero() {
                    continue;
                }
                let mut chosen = sp.clone();
                let plain_ref: &[Cand] = if leaf_only { &[] } else { &plain };
                self.dfs(plain_ref, 0, rem, self.max_p - spp, &mut chosen, &mut |edges| {
                    let t = Tree::new(k, label, edges.to_vec());
                    if !t.is_chain() {
                        out.insert(t);
                    }
                });
            }
        }
    }

    /// Multisets of plain candidates (each with positive homogeneity) whose
    /// total homogeneity stays below `rem`.
    fn dfs(
        &self,
        c: &[Cand],
        start: usize,
        rem: Rational64,
        p_left: u32,
        chosen: &mut Vec<Edge>,
        emit: &mut dyn FnMut(&[Edge]),
    ) {
        emit(chosen);
        for i in start..c.len() {
            if c[i].hom >= rem {
                break;
            }
            if c[i].p > p_left {
                continue;
            }
            chosen.push(c[i].edge.clone());
            self.dfs(c, i, rem - c[i].hom, p_left - c[i].p, chosen, emit);
            chosen.pop();
        }
    }
}

/// Every noise-rooted rule tree with homogeneity below `bound` and `|p| ≤ max_p`.
fn noise_rooted(alpha: Rational64, max_p: u32, mode: NoiseMode, bound: Rational64) -> Vec<Tree> {
    // Children of a tree below `bound` are themselves below `bound`, so the
    // family is the least fixed point of "build one more layer".
    let mut pool: Vec<Tree> = Vec::new();
    loop {
        let ctx = Ctx { alpha, max_p, mode, pool: &pool };
        let mut next = BTreeSet::new();
        for l in [Label::Z1, Label::Z2, Label::Z3] {
            ctx.roots(l, bound, &mut next);
        }
        let next: Vec<Tree> = next.into_iter().collect();
        if next == pool {
            return pool;
        }
        pool = next;
    }
}

pub fn enumerate(rules: &RuleSet, family: Family) -> Result<Vec<Tree>> {
    let max_p = rules.validate()?;
    let alpha = rules.alpha;
    let mode = rules.noise_mode;
    let cutoff = rules.homogeneity_cutoff;
    let below = |t: &Tree, b: Rational64| t.homogeneity().eval(alpha) < b;

    let mut out: Vec<Tree> = match family {
        Family::BCirc => noise_rooted(alpha, max_p, mode, cutoff),
        Family::BCircMinus | Family::BCircMinusZero => {
            let b = cutoff.min(Rational64::zero());
            let mut v = noise_rooted(alpha, max_p, mode, b);
            if family == Family::BCircMinusZero {
                v.retain(|t| t.total_p() == 0);
            }
            v
        }
        Family::B | Family::BZero => {
            let pool = noise_rooted(alpha, max_p, mode, cutoff);
            let ctx = Ctx { alpha, max_p, mode, pool: &pool };
            let mut set: BTreeSet<Tree> = pool.iter().cloned().collect();
            ctx.roots(Label::Z4, cutoff, &mut set);
            let mut v: Vec<Tree> = set.into_iter().collect();
            if family == Family::BZero {
                v.retain(|t| t.total_p() == 0);
            }
            v
        }
        Family::U => {
            // polynomials up to and including the cutoff degree, so that the
            // derivative direction X^{(0,1)} is present for cutoffs in (0, 1]
            let mut v: Vec<Tree> = MultiIndex2::with_degree_below(cutoff.floor().to_i64().unwrap_or(-1) + 1)
                .into_iter()
                .map(Tree::x)
                .collect();
            let inner = noise_rooted(alpha, max_p, mode, cutoff - Rational64::from(2));
            for t in inner {
                for q in 0..=(max_p - t.total_p()) {
                    let x = Tree::planted(MultiIndex2::ZERO, q, t.clone());
                    if below(&x, cutoff) {
                        v.push(x);
                    }
                }
            }
            v.sort();
            v
        }
    };
    if rules.even_noise_only {
        out.retain(|t| t.noise_count() % 2 == 0);
    }
    Ok(out)
}
