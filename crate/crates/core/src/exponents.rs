//! Error exponents of the binary test `p_theta1` vs `p_theta2` (Chernoff,
//! Stein, Hoeffding, Han-Kobayashi) and their optima over the privacy
//! budget.
//!
//! Each exponent is a supremum over the Rényi order parameter `s` on an open
//! interval. The intervals are clamped to closed brackets ([`NEGATIVE_ORDERS`]
//! and [`POSITIVE_ORDERS`]) and searched by golden section; the optimizer
//! also inspects both bracket ends and flags a supremum found there.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::information::{max_renyi, relative_renyi};
use crate::model::{mixture_values, MechanismPair, MixtureParameter, PrivacyBudget};

/// Distance kept from the open ends of the order intervals.
pub const BRACKET_MARGIN: f64 = 1e-7;

/// Upper truncation of `s > 0` for the Han-Kobayashi supremum.
pub const S_MAX: f64 = 50.0;

/// Default golden-section tolerance on `s`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Closed bracket standing in for `s in (-1, 0)`.
pub const NEGATIVE_ORDERS: (f64, f64) = (-1.0 + BRACKET_MARGIN, -BRACKET_MARGIN);

/// Closed bracket standing in for `s in (0, inf)`.
pub const POSITIVE_ORDERS: (f64, f64) = (BRACKET_MARGIN, S_MAX);

const MAX_ITERATIONS: usize = 500;

/// A maximizer this close to a bracket end (relative to the bracket width,
/// and never less than the search tolerance) is reported as a boundary
/// supremum. Round-off in the objective near the ends keeps golden section
/// from landing exactly on them.
pub const BOUNDARY_WINDOW: f64 = 1e-6;

/// Outcome of a one-dimensional maximization over `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentResult {
    /// Exponent in nats.
    pub value: f64,
    /// Maximizing order parameter.
    pub s_star: f64,
    /// Golden-section iterations performed.
    pub iterations: usize,
    /// The supremum was found at or next to a bracket end (see
    /// [`BOUNDARY_WINDOW`]), i.e. it may be approached only in the limit.
    pub at_boundary: bool,
}

/// Maximize `objective` on `[lo, hi]` by golden-section search.
///
/// Exact for unimodal objectives up to `tol` in `s`. The bracket ends are
/// evaluated too, so the returned value is never below either of them.
/// `-inf` marks points to skip; `NaN` or `+inf` is an error.
pub fn maximize_scalar<F>(objective: F, lo: f64, hi: f64, tol: f64) -> Result<ExponentResult>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidBracket { lo, hi });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    let eval = |s: f64| -> Result<f64> {
        let v = objective(s);
        if v.is_nan() || v == f64::INFINITY {
            Err(Error::NonFiniteObjective(s))
        } else {
            Ok(v)
        }
    };

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut iterations = 0;
    while b - a > tol && iterations < MAX_ITERATIONS {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        }
        iterations += 1;
    }
    let (mut s_star, mut value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };

    for end in [lo, hi] {
        let v = eval(end)?;
        if v > value {
            s_star = end;
            value = v;
        }
    }
    let window = tol.max(BOUNDARY_WINDOW * (hi - lo));
    let at_boundary = s_star - lo <= window || hi - s_star <= window;
    Ok(ExponentResult {
        value,
        s_star,
        iterations,
        at_boundary,
    })
}

fn interior(theta1: MixtureParameter, theta2: MixtureParameter) -> Result<()> {
    theta1.require_interior()?;
    theta2.require_interior()
}

fn check_rate(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "rate",
            value: r,
        })
    }
}

// (s / (1 + s)) (r - D), with the D = +inf, s > 0 case mapped to -inf.
fn rate_tradeoff(s: f64, r: f64, divergence: f64) -> f64 {
    if divergence == f64::INFINITY && s > 0.0 {
        return f64::NEG_INFINITY;
    }
    s / (1.0 + s) * (r - divergence)
}

/// `sup_{-1<s<0} (-s) D_{1+s}(p_theta1 || p_theta2)`.
pub fn chernoff_exponent(
    pair: &MechanismPair,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
) -> Result<ExponentResult> {
    interior(theta1, theta2)?;
    let m1 = mixture_values(pair, theta1.value());
    let m2 = mixture_values(pair, theta2.value());
    let (lo, hi) = NEGATIVE_ORDERS;
    maximize_scalar(
        |s| -s * relative_renyi(&m1, &m2, s).expect("order inside bracket"),
        lo,
        hi,
        DEFAULT_TOL,
    )
}

/// Chernoff exponent maximized over the privacy budget, obtained by
/// optimizing `s` against the closed-form Rényi maximum.
pub fn max_chernoff(
    budget: &PrivacyBudget,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
) -> Result<ExponentResult> {
    interior(theta1, theta2)?;
    let (lo, hi) = NEGATIVE_ORDERS;
    maximize_scalar(
        |s| -s * max_renyi(budget, theta1, theta2, s).expect("order inside bracket"),
        lo,
        hi,
        DEFAULT_TOL,
    )
}

/// Stein exponent `D(p_theta1 || p_theta2)`.
pub fn stein_exponent(
    pair: &MechanismPair,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
) -> Result<f64> {
    crate::information::renyi_divergence(pair, theta1, theta2, 0.0)
}

pub fn max_stein(
    budget: &PrivacyBudget,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
) -> Result<f64> {
    max_renyi(budget, theta1, theta2, 0.0)
}

/// Hoeffding exponent: best type-II exponent when the type-I exponent must
/// be at least `r`, `sup_{-1<s<0} (s/(1+s)) (r - D_{1+s}(p_theta2 || p_theta1))`.
pub fn hoeffding_exponent(
    pair: &MechanismPair,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    r: f64,
) -> Result<ExponentResult> {
    interior(theta1, theta2)?;
    check_rate(r)?;
    let m1 = mixture_values(pair, theta1.value());
    let m2 = mixture_values(pair, theta2.value());
    let (lo, hi) = NEGATIVE_ORDERS;
    maximize_scalar(
        |s| rate_tradeoff(s, r, relative_renyi(&m2, &m1, s).expect("order inside bracket")),
        lo,
        hi,
        DEFAULT_TOL,
    )
}

pub fn max_hoeffding(
    budget: &PrivacyBudget,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    r: f64,
) -> Result<ExponentResult> {
    interior(theta1, theta2)?;
    check_rate(r)?;
    let (lo, hi) = NEGATIVE_ORDERS;
    maximize_scalar(
        |s| rate_tradeoff(s, r, max_renyi(budget, theta2, theta1, s).expect("order inside bracket")),
        lo,
        hi,
        DEFAULT_TOL,
    )
}

/// Han-Kobayashi exponent of `1 - P(type-II error)` in the regime beyond
/// Stein, `sup_{s>0} (s/(1+s)) (r - D_{1+s}(p_theta2 || p_theta1))`, with
/// `s` truncated at [`S_MAX`].
pub fn han_kobayashi(
    pair: &MechanismPair,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    r: f64,
) -> Result<ExponentResult> {
    interior(theta1, theta2)?;
    check_rate(r)?;
    let m1 = mixture_values(pair, theta1.value());
    let m2 = mixture_values(pair, theta2.value());
    let (lo, hi) = POSITIVE_ORDERS;
    maximize_scalar(
        |s| rate_tradeoff(s, r, relative_renyi(&m2, &m1, s).expect("order inside bracket")),
        lo,
        hi,
        DEFAULT_TOL,
    )
}

/// Smallest Han-Kobayashi exponent over the privacy budget; attained at the
/// optimal three-symbol pair.
pub fn min_han_kobayashi(
    budget: &PrivacyBudget,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    r: f64,
) -> Result<ExponentResult> {
    interior(theta1, theta2)?;
    check_rate(r)?;
    let (lo, hi) = POSITIVE_ORDERS;
    maximize_scalar(
        |s| rate_tradeoff(s, r, max_renyi(budget, theta2, theta1, s).expect("order inside bracket")),
        lo,
        hi,
        DEFAULT_TOL,
    )
}
