//! Coherence calculus: the map `τ ↦ 𝔉^a(τ*)`, the factors `χ^a_τ` and
//! `𝔉_{τ*}`, and counterterm assembly.
//!
//! Jet variables `c_k` stand for `∂^k u`; primed variables belong to the
//! frozen coefficient `v₀`. The combination `h = a(c₀) − a(c′₀)` is never a
//! primitive symbol.

mod counterterm;
mod poly;

pub use counterterm::{
    counterterm, theta, ConstantHandle, ConstantsSource, CountertermMode, CountertermReport,
    CountertermRow, Scaling,
};
pub use poly::{Arg, Base, FuncSym, Monomial, SymbolicExpr, Var};

use crate::hopf::star;
use crate::trees::{Label, MultiIndex2, NoiseMode, Tree};
use crate::Result;

const N01: MultiIndex2 = MultiIndex2::new(0, 1);
const N02: MultiIndex2 = MultiIndex2::new(0, 2);

/// `a(c₀) − a(c′₀)`.
pub fn h_expr() -> SymbolicExpr {
    SymbolicExpr::func(Base::A, 0, Arg::C0) - SymbolicExpr::func(Base::A, 0, Arg::C0Prime)
}

/// `𝔉^a(ζ_ℓ*)`.
pub fn elementary_f(label: Label) -> SymbolicExpr {
    match label {
        Label::Z1 => SymbolicExpr::func(Base::F, 0, Arg::C0),
        Label::Z2 => {
            SymbolicExpr::func(Base::G, 0, Arg::C0) * SymbolicExpr::c(N01).pow(2)
                + SymbolicExpr::mass() * SymbolicExpr::c(MultiIndex2::ZERO)
        }
        Label::Z3 => h_expr() * SymbolicExpr::c(N02),
        Label::Z4 => SymbolicExpr::zero(),
    }
}

fn bump(s: &FuncSym) -> SymbolicExpr {
    SymbolicExpr::func(s.base, s.order + 1, s.arg)
}

/// `D_n = ∂/∂c_n`, with the chain rule through function symbols at `c₀`.
pub fn d_op(e: &SymbolicExpr, n: MultiIndex2) -> SymbolicExpr {
    e.derive(&|v| match v {
        Var::C(m) if *m == n => Some(SymbolicExpr::one()),
        Var::Func(s) if s.arg == Arg::C0 && n.is_zero() => Some(bump(s)),
        _ => None,
    })
}

/// `D′_n = ∂/∂c′_n`.
pub fn d_prime_op(e: &SymbolicExpr, n: MultiIndex2) -> SymbolicExpr {
    e.derive(&|v| match v {
        Var::Cp(m) if *m == n => Some(SymbolicExpr::one()),
        Var::Func(s) if s.arg == Arg::C0Prime && n.is_zero() => Some(bump(s)),
        _ => None,
    })
}

/// One application of `∂^{k₀} = Σ_n c_{n+k₀}D_n + c′_{n+k₀}D′_n`.
fn vector_field_once(e: &SymbolicExpr, k0: MultiIndex2) -> SymbolicExpr {
    e.derive(&|v| match v {
        Var::C(m) => Some(SymbolicExpr::c(*m + k0)),
        Var::Cp(m) => Some(SymbolicExpr::cp(*m + k0)),
        Var::Func(s) => Some(match s.arg {
            Arg::C0 => bump(s) * SymbolicExpr::c(k0),
            Arg::C0Prime => bump(s) * SymbolicExpr::cp(k0),
        }),
        _ => None,
    })
}

/// `∂^k = (∂^{(1,0)})^{k₁}(∂^{(0,1)})^{k₂}`.
pub fn vector_field_derivative(e: &SymbolicExpr, k: MultiIndex2) -> SymbolicExpr {
    let mut out = e.clone();
    for _ in 0..k.k1 {
        out = vector_field_once(&out, MultiIndex2::new(1, 0));
    }
    for _ in 0..k.k2 {
        out = vector_field_once(&out, N01);
    }
    out
}

/// `∂^k D_{n₁}…D_{n_m} 𝔉^a(ζ_ℓ*)` at the root of `t`.
fn node_factor(t: &Tree) -> SymbolicExpr {
    let mut e = elementary_f(t.label());
    for edge in t.children() {
        e = d_op(&e, edge.n);
        if e.is_zero() {
            return e;
        }
    }
    vector_field_derivative(&e, t.poly())
}

/// `𝔉^a(τ*)`; every unit of `p` on an edge contributes a factor `h`.
pub fn coherence_f(t: &Tree) -> SymbolicExpr {
    let mut e = node_factor(t);
    for edge in t.children() {
        if e.is_zero() {
            break;
        }
        let c = coherence_f(&edge.child);
        e = if edge.p > 0 { e * h_expr().pow(edge.p) * c } else { e * c };
    }
    e
}

/// Checks `𝔉^a((σ⋆τ)*) = ∂^k D_{n₁}…D_{n_m}𝔉^a(τ*) ∏ 𝔉^a(σ_i*)` for
/// `σ = X^k ∏ 𝓘^{q_i}_{n_i}(σ_i)`.
pub fn morphism_check(sigma: &Tree, tau: &Tree) -> Result<bool> {
    let mut lhs = SymbolicExpr::zero();
    for (eta, c) in star(sigma, tau)?.terms() {
        lhs = lhs + coherence_f(eta).scale(c);
    }
    let mut rhs = coherence_f(tau);
    for e in sigma.children() {
        rhs = d_op(&rhs, e.n);
    }
    rhs = vector_field_derivative(&rhs, sigma.poly());
    for e in sigma.children() {
        rhs = rhs * h_expr().pow(e.p) * coherence_f(&e.child);
    }
    Ok(lhs == rhs)
}

/// Sets `v₀ = u`: primed jets and primed function symbols become unprimed.
pub fn on_diagonal(e: &SymbolicExpr) -> SymbolicExpr {
    e.substitute(&|v| match v {
        Var::Cp(k) => Some(SymbolicExpr::c(*k)),
        Var::Func(s) if s.arg == Arg::C0Prime => Some(SymbolicExpr::func(s.base, s.order, Arg::C0)),
        _ => None,
    })
}

/// Some `ζ₃` node carries a polynomial decoration, so `∂^k` acts on a factor
/// coming from `h` and the factorization through `χ^a` and `𝔉_{τ*}` fails.
pub fn has_x_at_z3(t: &Tree) -> bool {
    (t.label() == Label::Z3 && !t.poly().is_zero())
        || t.children().iter().any(|e| has_x_at_z3(&e.child))
}

/// Specializes `f` and `g` to the nonlinearities present in `mode`:
/// `f ≡ 1, g ≡ 0` for linear forcing and `g ≡ 0` without gradient term.
pub fn specialize(e: &SymbolicExpr, mode: NoiseMode) -> SymbolicExpr {
    e.substitute(&|v| match (v, mode) {
        (Var::Func(s), NoiseMode::LinearForcing) if s.base == Base::F => Some(if s.order == 0 {
            SymbolicExpr::one()
        } else {
            SymbolicExpr::zero()
        }),
        (Var::Func(s), NoiseMode::LinearForcing | NoiseMode::NoGradient) if s.base == Base::G => {
            Some(SymbolicExpr::zero())
        }
        _ => None,
    })
}

fn zero_order_children(t: &Tree) -> u32 {
    t.children().iter().filter(|e| e.n.is_zero()).count() as u32
}

/// `χ^a_τ`: a factor `a^{(n)}(c₀)` for each `ζ₃` node with `n ≥ 1` children
/// along `(0,0)` edges, independent of `p`.
pub fn chi(t: &Tree) -> SymbolicExpr {
    let mut e = SymbolicExpr::one();
    if t.label() == Label::Z3 {
        let n = zero_order_children(t);
        if n >= 1 {
            e = SymbolicExpr::func(Base::A, n, Arg::C0);
        }
    }
    for edge in t.children() {
        e = e * chi(&edge.child);
    }
    e
}

/// `𝔉_{τ*}`: the recursion of [`coherence_f`] on the `p = 0` tree with every
/// `c₀`-derivative of `h` of order at least one set to 1.
pub fn f_star(t: &Tree) -> SymbolicExpr {
    let mut e = node_factor(t);
    if t.label() == Label::Z3 {
        e = e.substitute(&|v| match v {
            Var::Func(s) if s.base == Base::A && s.arg == Arg::C0 && s.order >= 1 => {
                Some(SymbolicExpr::one())
            }
            _ => None,
        });
    }
    for edge in t.children() {
        if e.is_zero() {
            break;
        }
        e = e * f_star(&edge.child);
    }
    e
}
