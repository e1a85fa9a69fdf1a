use rand::Rng;

use super::{Edge, Label, MultiIndex2, NoiseMode, RuleSet, Tree};
use crate::{Error, Result};

const N01: MultiIndex2 = MultiIndex2::new(0, 1);
const N02: MultiIndex2 = MultiIndex2::new(0, 2);

/// Draws a rule-respecting tree below the cutoff of `rules`, rooted at a
/// noise symbol or (when `allow_x_root`) at `X^k`.
///
/// The law is not uniform on the family; it is meant for property tests
/// on families too large to enumerate.
pub fn sample_tree<R: Rng>(rules: &RuleSet, allow_x_root: bool, rng: &mut R) -> Result<Tree> {
    let max_p = rules.max_p.ok_or(Error::UnboundedP)?;
    for _ in 0..10_000 {
        let label = if allow_x_root && rng.gen_bool(0.25) {
            Label::Z4
        } else {
            [Label::Z1, Label::Z2, Label::Z3][rng.gen_range(0..3)]
        };
        let t = node(label, 3, rules.noise_mode, rng).compress();
        if t.is_chain() || t.total_p() > max_p {
            continue;
        }
        let t = add_p(&t, rng.gen_range(0..=max_p - t.total_p()), rng);
        if t.homogeneity().eval(rules.alpha) < rules.homogeneity_cutoff
            && t.respects_rules(rules.noise_mode)
        {
            return Ok(t);
        }
    }
    Err(Error::InvalidParameter(format!(
        "no tree found below homogeneity {}",
        rules.homogeneity_cutoff
    )))
}

fn small_poly<R: Rng>(rng: &mut R) -> MultiIndex2 {
    match rng.gen_range(0..10) {
        0 => MultiIndex2::new(0, 1),
        1 => MultiIndex2::new(1, 0),
        2 => MultiIndex2::new(0, 2),
        _ => MultiIndex2::ZERO,
    }
}

fn node<R: Rng>(label: Label, depth: u32, mode: NoiseMode, rng: &mut R) -> Tree {
    let mut edges = Vec::new();
    let child = |rng: &mut R| {
        let l = [Label::Z1, Label::Z2, Label::Z3][rng.gen_range(0..3)];
        node(l, depth - 1, mode, rng)
    };
    if depth > 0 && !(label == Label::Z1 && mode == NoiseMode::LinearForcing) {
        let plain = [0, 0, 1, 1, 2][rng.gen_range(0..5)];
        for _ in 0..plain {
            edges.push(Edge::new(MultiIndex2::ZERO, 0, child(rng)));
        }
        let grad = mode == NoiseMode::General;
        let special = match label {
            Label::Z1 => None,
            Label::Z2 if grad => Some((N01, rng.gen_range(0..=2))),
            Label::Z2 => None,
            Label::Z3 => Some((N02, rng.gen_range(0..=1))),
            Label::Z4 if grad && rng.gen_bool(0.5) => Some((N01, rng.gen_range(0..=2))),
            Label::Z4 => Some((N02, rng.gen_range(0..=1))),
        };
        if let Some((n, count)) = special {
            for _ in 0..count {
                edges.push(Edge::new(n, 0, child(rng)));
            }
        }
    }
    Tree::new(small_poly(rng), label, edges)
}

/// Adds `extra` units of `p` on randomly chosen edges.
fn add_p<R: Rng>(t: &Tree, extra: u32, rng: &mut R) -> Tree {
    let edges = t.edge_count();
    if edges == 0 || extra == 0 {
        return t.clone();
    }
    let mut slots = vec![0u32; edges];
    for _ in 0..extra {
        slots[rng.gen_range(0..edges)] += 1;
    }
    let mut it = slots.into_iter();
    fn go(t: &Tree, it: &mut impl Iterator<Item = u32>) -> Tree {
        let children = t
            .children()
            .iter()
            .map(|e| {
                let p = e.p + it.next().unwrap_or(0);
                Edge::new(e.n, p, go(&e.child, it))
            })
            .collect();
        Tree::new(t.poly(), t.label(), children)
    }
    go(t, &mut it)
}
