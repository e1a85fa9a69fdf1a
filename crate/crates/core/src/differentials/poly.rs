//! Exact Laurent polynomials in jet variables and function symbols.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::trees::MultiIndex2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    F,
    G,
    A,
}

impl Base {
    fn name(self) -> &'static str {
        match self {
            Base::F => "f",
            Base::G => "g",
            Base::A => "a",
        }
    }
}

/// Argument of a function symbol: `c₀` or `c′₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arg {
    C0,
    C0Prime,
}

/// `base^{(order)}(arg)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FuncSym {
    pub base: Base,
    pub arg: Arg,
    pub order: u32,
}

/// Indeterminates. The declaration order fixes the printed factor order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Free named constant, e.g. a renormalisation constant handle.
    Param(Arc<str>),
    Mass,
    Func(FuncSym),
    C(MultiIndex2),
    Cp(MultiIndex2),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn jet(f: &mut fmt::Formatter<'_>, root: &str, k: MultiIndex2) -> fmt::Result {
            match (k.k1, k.k2) {
                (0, 0) => write!(f, "{root}"),
                (0, n) if n <= 3 => write!(f, "{root}_{}", "x".repeat(n as usize)),
                (1, 0) => write!(f, "{root}_t"),
                (a, b) => write!(f, "{root}_({a},{b})"),
            }
        }
        match self {
            Var::Param(s) => write!(f, "{s}"),
            Var::Mass => write!(f, "c"),
            Var::Func(s) => {
                let arg = if s.arg == Arg::C0 { "u" } else { "v" };
                let name = s.base.name();
                match s.order {
                    0 => write!(f, "{name}({arg})"),
                    1..=2 => write!(f, "{name}{}({arg})", "'".repeat(s.order as usize)),
                    n => write!(f, "{name}^({n})({arg})"),
                }
            }
            Var::C(k) => jet(f, "u", *k),
            Var::Cp(k) => jet(f, "v", *k),
        }
    }
}

/// Product of powers, sorted by variable, no zero exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(Var, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn var(v: Var, e: i32) -> Self {
        if e == 0 {
            Self::one()
        } else {
            Self(vec![(v, e)])
        }
    }

    pub fn factors(&self) -> &[(Var, i32)] {
        &self.0
    }

    pub fn exponent(&self, v: &Var) -> i32 {
        self.0.iter().find(|(w, _)| w == v).map_or(0, |(_, e)| *e)
    }

    fn mul(&self, o: &Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self(out)
    }

    /// Remove one power of the factor at position `i`.
    fn lower(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i].1 -= 1;
        if v[i].1 == 0 {
            v.remove(i);
        }
        Self(v)
    }
}

/// Exact polynomial with rational coefficients; negative exponents allowed.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolicExpr {
    terms: BTreeMap<Monomial, BigRational>,
}

impl SymbolicExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn int(n: i64) -> Self {
        Self::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rat(n: i64, d: i64) -> Self {
        Self::rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn rational(q: BigRational) -> Self {
        let mut s = Self::zero();
        s.add_term(Monomial::one(), q);
        s
    }

    pub fn var(v: Var) -> Self {
        Self::monomial(Monomial::var(v, 1), BigRational::one())
    }

    pub fn monomial(m: Monomial, q: BigRational) -> Self {
        let mut s = Self::zero();
        s.add_term(m, q);
        s
    }

    pub fn c(k: MultiIndex2) -> Self {
        Self::var(Var::C(k))
    }

    pub fn cp(k: MultiIndex2) -> Self {
        Self::var(Var::Cp(k))
    }

    pub fn mass() -> Self {
        Self::var(Var::Mass)
    }

    pub fn param(name: &str) -> Self {
        Self::var(Var::Param(Arc::from(name)))
    }

    pub fn func(base: Base, order: u32, arg: Arg) -> Self {
        Self::var(Var::Func(FuncSym { base, arg, order }))
    }

    fn add_term(&mut self, m: Monomial, q: BigRational) {
        if q.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(q);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += q;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Constant value if the expression has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    /// Integer powers; negative powers only for single monomials.
    pub fn pow(&self, e: impl Into<i64>) -> Self {
        let e: i64 = e.into();
        if e < 0 {
            assert_eq!(self.terms.len(), 1, "negative power of a sum");
            let (m, c) = self.terms.iter().next().unwrap();
            let inv = Monomial(m.0.iter().map(|(v, k)| (v.clone(), -k)).collect());
            return Self::monomial(inv, c.recip()).pow(-e);
        }
        let mut out = Self::one();
        let mut base = self.clone();
        let mut n = e as u64;
        while n > 0 {
            if n & 1 == 1 {
                out = &out * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        out
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(x, _)| x.clone()))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Highest exponent of `v` over all terms.
    pub fn degree_in(&self, v: &Var) -> i32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    /// Apply the derivation determined by its values on the indeterminates.
    pub fn derive(&self, rule: &dyn Fn(&Var) -> Option<SymbolicExpr>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (i, (v, e)) in m.0.iter().enumerate() {
                if let Some(dv) = rule(v) {
                    if dv.is_zero() {
                        continue;
                    }
                    let rest = m.lower(i);
                    let k = c * BigRational::from_integer(BigInt::from(*e));
                    for (dm, dc) in &dv.terms {
                        out.add_term(rest.mul(dm), &k * dc);
                    }
                }
            }
        }
        out
    }

    /// Replace indeterminates by expressions (`None` keeps the variable).
    pub fn substitute(&self, map: &dyn Fn(&Var) -> Option<SymbolicExpr>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut term = Self::monomial(Monomial::one(), c.clone());
            for (v, e) in &m.0 {
                let factor = match map(v) {
                    Some(x) => x.pow(*e as i64),
                    None => Self::monomial(Monomial::var(v.clone(), *e), BigRational::one()),
                };
                term = &term * &factor;
            }
            out = out + term;
        }
        out
    }

    /// Numerical value given values of all indeterminates.
    pub fn eval(&self, env: &dyn Fn(&Var) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut x = c.to_f64().unwrap_or(f64::NAN);
                for (v, e) in &m.0 {
                    x *= env(v).powi(*e);
                }
                x
            })
            .sum()
    }

    /// `[{"coef": "p/q", "factors": [["f(u)", 3], ...]}, ...]`.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.terms
                .iter()
                .map(|(m, c)| {
                    serde_json::json!({
                        "coef": c.to_string(),
                        "factors": m.0.iter().map(|(v, e)| serde_json::json!([v.to_string(), e])).collect::<Vec<_>>(),
                    })
                })
                .collect(),
        )
    }
}

impl fmt::Display for SymbolicExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let mut parts: Vec<String> = Vec::new();
            if !mag.is_one() || m.0.is_empty() {
                parts.push(mag.to_string());
            }
            for (v, e) in &m.0 {
                if *e == 1 {
                    parts.push(v.to_string());
                } else {
                    parts.push(format!("{v}^{e}"));
                }
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

impl Mul for &SymbolicExpr {
    type Output = SymbolicExpr;
    fn mul(self, o: &SymbolicExpr) -> SymbolicExpr {
        let mut out = SymbolicExpr::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Mul for SymbolicExpr {
    type Output = SymbolicExpr;
    fn mul(self, o: SymbolicExpr) -> SymbolicExpr {
        &self * &o
    }
}

impl Mul<&SymbolicExpr> for SymbolicExpr {
    type Output = SymbolicExpr;
    fn mul(self, o: &SymbolicExpr) -> SymbolicExpr {
        &self * o
    }
}

impl Add for SymbolicExpr {
    type Output = SymbolicExpr;
    fn add(mut self, o: SymbolicExpr) -> SymbolicExpr {
        for (m, c) in o.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Neg for SymbolicExpr {
    type Output = SymbolicExpr;
    fn neg(self) -> SymbolicExpr {
        SymbolicExpr {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl Sub for SymbolicExpr {
    type Output = SymbolicExpr;
    fn sub(self, o: SymbolicExpr) -> SymbolicExpr {
        self + (-o)
    }
}
