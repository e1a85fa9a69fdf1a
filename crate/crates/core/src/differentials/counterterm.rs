use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{
    chi, coherence_f, f_star, has_x_at_z3, on_diagonal, specialize, Arg, Base, SymbolicExpr, Var,
};
use crate::trees::{enumerate, Family, Label, MultiIndex2, RuleSet, Tree};
use crate::{Error, Result};

/// How `ℓ_λ(τ)` depends on `λ` for a Gaussian stationary noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `ℓ_λ = λ^{1 − ♯N} ℓ₁` for noise constant in time.
    Spatial,
    /// `ℓ_λ = λ^{|τ|_{ζ₁}/2 − ♯N + 1} ℓ₁` for noise white in time.
    WhiteInTime,
    /// `ℓ_λ = ℓ₁`.
    None,
}

/// Exponent `θ_τ` with `ℓ_λ(τ) = λ^{θ_τ}ℓ₁(τ)`. Odd noise counts have no
/// integer exponent under white-in-time scaling, and their constants vanish.
pub fn theta(t: &Tree, scaling: Scaling) -> Result<i64> {
    let nodes = t.expand().node_count() as i64;
    match scaling {
        Scaling::Spatial => Ok(1 - nodes),
        Scaling::None => Ok(0),
        Scaling::WhiteInTime => {
            let k = t.noise_count() as i64;
            if k % 2 != 0 {
                return Err(Error::Unsupported(format!(
                    "odd noise count has no white-in-time exponent: {t}"
                )));
            }
            Ok(k / 2 - nodes + 1)
        }
    }
}

/// The `λ = 1` value of one renormalization constant, or the symbol standing
/// for it.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantHandle {
    pub name: String,
    pub value: SymbolicExpr,
}

#[derive(Clone, Debug)]
pub enum ConstantsSource {
    /// One free symbol `l[τ]` per tree.
    Symbols(Scaling),
    /// Explicit values of `ℓ₁`; every contributing tree must be present.
    Values {
        scaling: Scaling,
        values: BTreeMap<Tree, SymbolicExpr>,
    },
    /// The zero character.
    Zero,
}

impl ConstantsSource {
    fn scaling(&self) -> Scaling {
        match self {
            Self::Symbols(s) | Self::Values { scaling: s, .. } => *s,
            Self::Zero => Scaling::None,
        }
    }

    fn handle(&self, t: &Tree) -> Option<ConstantHandle> {
        let name = format!("l[{t}]");
        match self {
            Self::Symbols(_) => Some(ConstantHandle {
                value: SymbolicExpr::param(&name),
                name,
            }),
            Self::Values { values, .. } => values.get(t).map(|v| ConstantHandle {
                name,
                value: v.clone(),
            }),
            Self::Zero => Some(ConstantHandle {
                name,
                value: SymbolicExpr::zero(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountertermMode {
    /// `Σ ℓ(τ^p)/S(τ^p) 𝔉^a((τ^p)*)` truncated at the rule set's `|p|` bound.
    Infinite,
    /// `Σ (1/S(τ)) χ^a_τ 𝔉_{τ*} ℓ₁(τ) a^{θ_τ}` over `p = 0` trees, at
    /// `v₀ = u`. Trees with a polynomial at a `ζ₃` node do not factor and
    /// enter through the diagonal value of `𝔉^a(τ*)` with `χ = 1`.
    Simplified,
}

#[derive(Clone, Debug)]
pub struct CountertermRow {
    pub tree: Tree,
    pub symmetry: u64,
    /// `χ^a_τ`; one in infinite form.
    pub chi: SymbolicExpr,
    /// `𝔉_{τ*}` in simplified form, `𝔉^a((τ^p)*)` in infinite form.
    pub f: SymbolicExpr,
    pub theta: Option<i64>,
    pub handle: ConstantHandle,
    pub term: SymbolicExpr,
}

#[derive(Clone, Debug)]
pub struct CountertermReport {
    pub mode: CountertermMode,
    pub rows: Vec<CountertermRow>,
    pub total: SymbolicExpr,
    /// In infinite form the omitted terms carry at least this power of
    /// `a(u) − a(v₀)`.
    pub residual_order: Option<u32>,
    pub notes: Vec<String>,
}

impl CountertermReport {
    /// `‖h‖^{P+1}`, the factor by which the omitted tail is proportional.
    pub fn residual_factor(&self, h_sup: f64) -> f64 {
        match self.residual_order {
            Some(k) => h_sup.powi(k as i32),
            None => 0.0,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "tree": r.tree.to_string(),
                    "S": r.symmetry,
                    "chi": r.chi.to_string(),
                    "F": r.f.to_string(),
                    "theta": r.theta,
                    "handle": r.handle.name,
                    "constant": r.handle.value.to_string(),
                    "term": r.term.to_string(),
                    "term_monomials": r.term.to_json_value(),
                })
            })
            .collect();
        serde_json::json!({
            "mode": self.mode,
            "rows": rows,
            "total": self.total.to_string(),
            "total_monomials": self.total.to_json_value(),
            "residual_order": self.residual_order,
            "notes": self.notes,
        })
    }
}

fn a_of_u() -> SymbolicExpr {
    SymbolicExpr::func(Base::A, 0, Arg::C0)
}

fn check_no_frozen_gradient(t: &Tree, e: &SymbolicExpr) -> Result<()> {
    if e.degree_in(&Var::Cp(MultiIndex2::new(0, 1))) != 0 {
        return Err(Error::InvalidTree(format!(
            "frozen-coefficient gradient survives in the term of {t}"
        )));
    }
    Ok(())
}

fn swap_note(rows: &[CountertermRow]) -> Option<String> {
    let z3 = Tree::parse("z3[I[z1] I(0,2)[z1]]").ok()?;
    let z2 = Tree::parse("z2[I(0,1)[z1] I(0,1)[z1]]").ok()?;
    let get = |t: &Tree| rows.iter().find(|r| &r.tree == t);
    let (r3, r2) = (get(&z3)?, get(&z2)?);
    Some(format!(
        "{z3} carries chi*F = {} and {z2} carries {}; a swapped pairing (g*f^2 with {z3}, a'*f with {z2}) also circulates and is not used here",
        &r3.chi * &r3.f,
        &r2.chi * &r2.f,
    ))
}

/// Assembles the counterterm over the negative noise-rooted trees of `rules`.
pub fn counterterm(
    rules: &RuleSet,
    constants: &ConstantsSource,
    mode: CountertermMode,
) -> Result<CountertermReport> {
    let family = match mode {
        CountertermMode::Infinite => Family::BCircMinus,
        CountertermMode::Simplified => Family::BCircMinusZero,
    };
    let scaling = constants.scaling();
    let gaussian = scaling != Scaling::None;
    let trees: Vec<Tree> = enumerate(rules, family)?
        .into_iter()
        .filter(|t| t.poly().is_zero() && t.label() != Label::Z4)
        .filter(|t| !(gaussian && t.noise_count() % 2 == 1))
        .collect();

    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut unfactored = Vec::new();
    let mut total = SymbolicExpr::zero();
    for t in trees {
        let (chi_t, f_t) = match mode {
            CountertermMode::Simplified if has_x_at_z3(&t) => {
                (SymbolicExpr::one(), on_diagonal(&coherence_f(&t)))
            }
            CountertermMode::Simplified => (chi(&t), f_star(&t)),
            CountertermMode::Infinite => (SymbolicExpr::one(), coherence_f(&t)),
        };
        let chi_t = specialize(&chi_t, rules.noise_mode);
        let f_t = specialize(&f_t, rules.noise_mode);
        if f_t.is_zero() || chi_t.is_zero() {
            continue;
        }
        let Some(handle) = constants.handle(&t) else {
            missing.push(t.to_string());
            continue;
        };
        if mode == CountertermMode::Simplified && has_x_at_z3(&t) {
            unfactored.push(t.to_string());
        }
        let s = t.symmetry_factor();
        let inv_s = SymbolicExpr::rational(BigRational::new(BigInt::from(1), BigInt::from(s)));
        let (th, weight) = match mode {
            CountertermMode::Simplified => {
                let th = theta(&t, scaling)?;
                (Some(th), a_of_u().pow(th))
            }
            CountertermMode::Infinite => (None, SymbolicExpr::one()),
        };
        let term = inv_s * &chi_t * &f_t * &handle.value * &weight;
        if !has_x_at_z3(&t) {
            check_no_frozen_gradient(&t, &term)?;
        }
        total = total + term.clone();
        rows.push(CountertermRow {
            tree: t,
            symmetry: s,
            chi: chi_t,
            f: f_t,
            theta: th,
            handle,
            term,
        });
    }
    if !missing.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "missing constants for: {}",
            missing.join(", ")
        )));
    }
    let mut notes = Vec::new();
    if mode == CountertermMode::Simplified {
        notes.extend(swap_note(&rows));
        if !unfactored.is_empty() {
            notes.push(format!(
                "no chi/F* factorization for trees with X at a z3 node; diagonal value used for: {}",
                unfactored.join(", ")
            ));
        }
    }
    let residual_order = match mode {
        CountertermMode::Infinite => rules.max_p.map(|p| p + 1),
        CountertermMode::Simplified => None,
    };
    Ok(CountertermReport {
        mode,
        rows,
        total,
        residual_order,
        notes,
    })
}
