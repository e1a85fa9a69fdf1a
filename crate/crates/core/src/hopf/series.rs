use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Add;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::trees::Tree;
use crate::{Error, Result};

pub(crate) fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub(crate) fn q_ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Which part of the infinite structure a series stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub alpha: Rational64,
    /// Terms must have homogeneity strictly below this.
    pub cutoff: Rational64,
    pub max_p: u32,
}

impl Truncation {
    pub fn admits(&self, t: &Tree) -> bool {
        t.total_p() <= self.max_p && t.homogeneity().eval(self.alpha) < self.cutoff
    }

    /// The stricter of two truncations; they must share `α`.
    pub fn meet(a: Option<Self>, b: Option<Self>) -> Result<Option<Self>> {
        Ok(match (a, b) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => {
                if a.alpha != b.alpha {
                    return Err(Error::InvalidParameter(format!(
                        "series truncated at different alpha ({} and {})",
                        a.alpha, b.alpha
                    )));
                }
                Some(Self {
                    alpha: a.alpha,
                    cutoff: a.cutoff.min(b.cutoff),
                    max_p: a.max_p.min(b.max_p),
                })
            }
        })
    }
}

/// Finite linear combination of trees with exact coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreeSeries {
    terms: BTreeMap<Tree, BigRational>,
    truncation: Option<Truncation>,
}

impl TreeSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(t: Tree) -> Self {
        let mut s = Self::zero();
        s.add_term(t, BigRational::one());
        s
    }

    pub fn truncation(&self) -> Option<Truncation> {
        self.truncation
    }

    /// Drops the terms outside `tr` and records it.
    pub fn truncate(mut self, tr: Truncation) -> Result<Self> {
        let tr = Truncation::meet(self.truncation, Some(tr))?.expect("meet of Some");
        self.terms.retain(|t, _| tr.admits(t));
        self.truncation = Some(tr);
        Ok(self)
    }

    pub(crate) fn set_truncation(&mut self, tr: Option<Truncation>) {
        self.truncation = tr;
        if let Some(tr) = tr {
            self.terms.retain(|t, _| tr.admits(t));
        }
    }

    pub fn add_term(&mut self, t: Tree, c: BigRational) {
        if c.is_zero() {
            return;
        }
        if let Some(tr) = &self.truncation {
            if !tr.admits(&t) {
                return;
            }
        }
        match self.terms.entry(t) {
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

    /// Adds `c · other` termwise.
    pub fn add_scaled(&mut self, other: &TreeSeries, c: &BigRational) {
        for (t, v) in &other.terms {
            self.add_term(t.clone(), v * c);
        }
    }

    pub fn coef(&self, t: &Tree) -> BigRational {
        self.terms.get(t).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Tree, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self { terms: BTreeMap::new(), truncation: self.truncation };
        out.add_scaled(self, c);
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: serde_json::Map<String, serde_json::Value> = self
            .terms
            .iter()
            .map(|(t, c)| (t.to_string(), serde_json::Value::String(c.to_string())))
            .collect();
        serde_json::json!({ "terms": terms, "truncation": self.truncation })
    }
}

/// # Panics
/// When the two truncations disagree on `α`.
impl Add for TreeSeries {
    type Output = TreeSeries;
    fn add(self, o: TreeSeries) -> TreeSeries {
        let tr = Truncation::meet(self.truncation, o.truncation).expect("incompatible truncations");
        let mut out = self;
        out.set_truncation(tr);
        out.add_scaled(&o, &BigRational::one());
        out
    }
}

impl fmt::Display for TreeSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (t, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if c.is_one() {
                write!(f, "{t}")?;
            } else {
                write!(f, "({c})*{t}")?;
            }
        }
        Ok(())
    }
}
