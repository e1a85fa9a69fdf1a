//! Composite Gauss–Legendre rules on panels graded toward singular points.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Rule {
    pts: Vec<(f64, f64)>,
}

impl Rule {
    pub fn gauss(n: usize) -> Self {
        let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
        let pts = GaussLegendre::new(n).iter().map(|&(x, w)| (x, w)).collect();
        Self { pts }
    }

    /// Shared 8-, 16- and 32-point rules.
    pub fn cached(n: usize) -> &'static Rule {
        static R8: OnceLock<Rule> = OnceLock::new();
        static R16: OnceLock<Rule> = OnceLock::new();
        static R32: OnceLock<Rule> = OnceLock::new();
        match n {
            0..=8 => R8.get_or_init(|| Rule::gauss(8)),
            9..=16 => R16.get_or_init(|| Rule::gauss(16)),
            _ => R32.get_or_init(|| Rule::gauss(32)),
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * self.pts.iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>()
    }

    /// Sum over consecutive panels of `breaks` (sorted).
    pub fn composite(&self, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }

    /// Nodes and weights of the composite rule.
    pub fn nodes(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.pts.len() * breaks.len());
        for w in breaks.windows(2) {
            let (m, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            out.extend(self.pts.iter().map(|&(x, wt)| (m + h * x, h * wt)));
        }
        out
    }
}

/// Offsets (in units of a width) used around every center.
const OFFSETS: [f64; 12] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.5, 7.5, 10.0];

/// Panel edges around each `(center, width)`, scaled to `radius` widths.
pub fn space_breaks(centers: &[(f64, f64)], radius: f64) -> Vec<f64> {
    let mut b = Vec::with_capacity(centers.len() * 2 * OFFSETS.len());
    let s = radius / 10.0;
    for &(c, w) in centers {
        for o in OFFSETS {
            b.push(c - o * w * s);
            b.push(c + o * w * s);
        }
    }
    b.sort_by(|a, b| a.total_cmp(b));
    b.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
    b
}

/// Panels of `[a, b]` shrinking geometrically toward `a` by `ratio`; the
/// innermost `[a, a + (b − a)ratio^levels]` is a single panel.
pub fn graded_toward_start(a: f64, b: f64, levels: usize, ratio: f64) -> Vec<f64> {
    let mut out = vec![a];
    let mut inner = Vec::with_capacity(levels + 1);
    let mut x = b - a;
    for _ in 0..levels {
        inner.push(a + x);
        x *= ratio;
    }
    inner.push(a + x);
    inner.reverse();
    out.extend(inner);
    out
}

/// Panels of `[a, b]` graded toward both ends, split at the midpoint.
pub fn graded_both(a: f64, b: f64, levels: usize, ratio: f64) -> Vec<f64> {
    let m = 0.5 * (a + b);
    let left = graded_toward_start(a, m, levels, ratio);
    let mut right: Vec<f64> = graded_toward_start(0.0, b - m, levels, ratio)
        .into_iter()
        .map(|x| b - x)
        .collect();
    right.reverse();
    let mut out = left;
    out.extend(right.into_iter().skip(1));
    out
}
