//! Fisher information, f-divergences and relative Rényi entropies of the
//! mixture family `p_theta = (1 - theta) p0 + theta p1`, plus the closed-form
//! maxima of each quantity over all pairs meeting an l1 privacy budget.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{mixture_values, MechanismPair, MixtureParameter, PrivacyBudget};

/// A convex function `f` on `(0, inf)` together with its boundary behaviour,
/// which fixes the value of `q f(p / q)` when `p` or `q` vanishes.
#[derive(Clone)]
pub struct ConvexGenerator {
    name: String,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    limit_at_zero: f64,
    slope_at_infinity: f64,
}

impl fmt::Debug for ConvexGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexGenerator")
            .field("name", &self.name)
            .field("limit_at_zero", &self.limit_at_zero)
            .field("slope_at_infinity", &self.slope_at_infinity)
            .finish()
    }
}

impl ConvexGenerator {
    /// `limit_at_zero` is `f(0+)`, `slope_at_infinity` is `lim f(x) / x`;
    /// either may be `+inf`.
    pub fn new(
        name: impl Into<String>,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
        limit_at_zero: f64,
        slope_at_infinity: f64,
    ) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
            limit_at_zero,
            slope_at_infinity,
        }
    }

    /// `x ln x`, giving the relative entropy.
    pub fn relative_entropy() -> Self {
        Self::new("x ln x", |x| x * x.ln(), 0.0, f64::INFINITY)
    }

    /// `-x^(1+s)` for `s in (-1, 0)` and `x^(1+s)` for `s > 0`; the Rényi
    /// divergence of order `1 + s` is a monotone transform of this one.
    pub fn renyi_power(s: f64) -> Result<Self> {
        if s.is_nan() || s <= -1.0 || s.is_infinite() || s == 0.0 {
            return Err(Error::SOutOfRange(s));
        }
        let e = 1.0 + s;
        if s < 0.0 {
            Ok(Self::new(format!("-x^{e}"), move |x| -x.powf(e), 0.0, 0.0))
        } else {
            Ok(Self::new(format!("x^{e}"), move |x| x.powf(e), 0.0, f64::INFINITY))
        }
    }

    pub fn total_variation() -> Self {
        Self::new("|x - 1| / 2", |x| 0.5 * (x - 1.0).abs(), 0.5, 0.5)
    }

    pub fn chi_square() -> Self {
        Self::new("(x - 1)^2", |x| (x - 1.0).powi(2), 1.0, f64::INFINITY)
    }

    pub fn squared_hellinger() -> Self {
        Self::new("(sqrt x - 1)^2", |x| (x.sqrt() - 1.0).powi(2), 1.0, 1.0)
    }

    /// `x - 1`; its divergence vanishes identically.
    pub fn linear() -> Self {
        Self::new("x - 1", |x| x - 1.0, -1.0, 1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        (self.func)(x)
    }

    pub fn limit_at_zero(&self) -> f64 {
        self.limit_at_zero
    }

    pub fn slope_at_infinity(&self) -> f64 {
        self.slope_at_infinity
    }

    /// The perspective `q f(p / q)` with the zero-mass conventions applied.
    pub fn perspective(&self, p: f64, q: f64) -> f64 {
        match (p > 0.0, q > 0.0) {
            (false, false) => 0.0,
            (true, false) => p * self.slope_at_infinity,
            (false, true) => q * self.limit_at_zero,
            (true, true) => q * self.evaluate(p / q),
        }
    }
}

/// `J_theta = sum_y (p1(y) - p0(y))^2 / p_theta(y)`.
///
/// Symbols with `p_theta(y) = 0` contribute nothing when `p0(y) = p1(y)`;
/// otherwise (possible only at theta in {0, 1}) the information is infinite
/// and an error is returned.
pub fn fisher_information(pair: &MechanismPair, theta: MixtureParameter) -> Result<f64> {
    let t = theta.value();
    let mut total = 0.0;
    for (symbol, (x, y)) in pair.symbols().enumerate() {
        let diff = y - x;
        let mass = (1.0 - t) * x + t * y;
        if mass > 0.0 {
            total += diff * diff / mass;
        } else if diff != 0.0 {
            return Err(Error::ThetaOnBoundary { theta: t, symbol });
        }
    }
    Ok(total)
}

/// The three regimes of the constrained Fisher maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherCase {
    /// Two symbols, `theta <= theta0`.
    TwoSymbolLow,
    /// Two symbols, `theta > theta0`.
    TwoSymbolHigh,
    /// Three or more symbols.
    Rich,
}

impl FisherCase {
    pub fn select(budget: &PrivacyBudget, theta: f64, alphabet_size: usize) -> Self {
        if alphabet_size >= 3 {
            FisherCase::Rich
        } else if theta <= budget.theta0() {
            FisherCase::TwoSymbolLow
        } else {
            FisherCase::TwoSymbolHigh
        }
    }
}

/// Closed form of one regime, regardless of which regime is active.
pub fn max_fisher_case(budget: &PrivacyBudget, theta: MixtureParameter, case: FisherCase) -> Result<f64> {
    theta.require_interior()?;
    let t = theta.value();
    let a = budget.a();
    let w = budget.weight();
    Ok(match case {
        FisherCase::TwoSymbolLow => (w - a) / (t * (w * (1.0 - t) + a * t)),
        FisherCase::TwoSymbolHigh => {
            (1.0 - w - a) / ((1.0 - t) * (a * (1.0 - t) + (1.0 - w) * t))
        }
        FisherCase::Rich => {
            (1.0 - a / (w * (1.0 - t) + (1.0 - w) * t)) / (t * (1.0 - t))
        }
    })
}

/// Largest Fisher information attainable under `budget` on an alphabet of
/// `alphabet_size` symbols.
pub fn max_fisher(budget: &PrivacyBudget, theta: MixtureParameter, alphabet_size: usize) -> Result<f64> {
    if alphabet_size < 2 {
        return Err(Error::AlphabetTooSmall {
            size: alphabet_size,
            min: 2,
        });
    }
    let case = FisherCase::select(budget, theta.value(), alphabet_size);
    max_fisher_case(budget, theta, case)
}

fn interior_pair(theta1: MixtureParameter, theta2: MixtureParameter) -> Result<()> {
    theta1.require_interior()?;
    theta2.require_interior()
}

/// `D_f(p_theta1 || p_theta2) = sum_y p_theta2(y) f(p_theta1(y) / p_theta2(y))`.
pub fn f_divergence(
    pair: &MechanismPair,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    f: &ConvexGenerator,
) -> Result<f64> {
    interior_pair(theta1, theta2)?;
    let m1 = mixture_values(pair, theta1.value());
    let m2 = mixture_values(pair, theta2.value());
    Ok(m1.iter().zip(&m2).map(|(&p, &q)| f.perspective(p, q)).sum())
}

fn check_order(s: f64) -> Result<()> {
    if s > -1.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::SOutOfRange(s))
    }
}

// ln(1 + sum_y m_y (r_y^s - 1)) / s, where the weights m_y sum to one.
// Written with expm1/ln_1p so the s -> 0 limit keeps full precision.
fn renyi_from_ratios(terms: impl Iterator<Item = (f64, f64)>, s: f64) -> f64 {
    if s == 0.0 {
        return terms
            .filter(|&(m, _)| m > 0.0)
            .map(|(m, log_ratio)| m * log_ratio)
            .sum();
    }
    let acc: f64 = terms
        .filter(|&(m, _)| m > 0.0)
        .map(|(m, log_ratio)| m * (s * log_ratio).exp_m1())
        .sum();
    acc.max(-1.0).ln_1p() / s
}

/// Relative Rényi entropy `D_{1+s}(p || q)` between two distributions.
///
/// `s = 0` gives the relative entropy. Symbols with `p(y) = 0` contribute
/// nothing; a symbol with `q(y) = 0 < p(y)` makes the divergence infinite
/// for `s >= 0` and contributes nothing for `s < 0`.
pub fn relative_renyi(p: &[f64], q: &[f64], s: f64) -> Result<f64> {
    check_order(s)?;
    let terms = p.iter().zip(q).map(|(&pi, &qi)| (pi, pi.ln() - qi.ln()));
    Ok(renyi_from_ratios(terms, s))
}

/// `D_{1+s}(p_theta1 || p_theta2)` for the mixtures of `pair`.
pub fn renyi_divergence(
    pair: &MechanismPair,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    s: f64,
) -> Result<f64> {
    check_order(s)?;
    interior_pair(theta1, theta2)?;
    let m1 = mixture_values(pair, theta1.value());
    let m2 = mixture_values(pair, theta2.value());
    relative_renyi(&m1, &m2, s)
}

/// Mixture masses and likelihood ratios of the optimal three-symbol pair:
/// `(p_theta1(y), p_theta1(y) / p_theta2(y))` for the shared symbol, the
/// `p0`-only symbol and the `p1`-only symbol.
fn optimal_mixture_terms(budget: &PrivacyBudget, t1: f64, t2: f64) -> [(f64, f64); 3] {
    let a = budget.a();
    let w = budget.weight();
    let u1 = (1.0 - t1) * w + t1 * (1.0 - w);
    let u2 = (1.0 - t2) * w + t2 * (1.0 - w);
    [
        (a / (w * (1.0 - w)) * u1, u1 / u2),
        ((1.0 - a / (1.0 - w)) * (1.0 - t1), (1.0 - t1) / (1.0 - t2)),
        ((1.0 - a / w) * t1, t1 / t2),
    ]
}

/// Largest f-divergence `D_f(p_theta1 || p_theta2)` attainable under the
/// budget (any alphabet of three or more symbols).
pub fn max_f_divergence(
    budget: &PrivacyBudget,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    f: &ConvexGenerator,
) -> Result<f64> {
    interior_pair(theta1, theta2)?;
    let a = budget.a();
    let w = budget.weight();
    let (t1, t2) = (theta1.value(), theta2.value());
    let u1 = (1.0 - t1) * w + t1 * (1.0 - w);
    let u2 = (1.0 - t2) * w + t2 * (1.0 - w);
    let shared = a * ((1.0 - t2) / (1.0 - w) + t2 / w) * f.evaluate(u1 / u2);
    let only0 = (1.0 - a / (1.0 - w)) * (1.0 - t2) * f.evaluate((1.0 - t1) / (1.0 - t2));
    let only1 = (1.0 - a / w) * t2 * f.evaluate(t1 / t2);
    Ok(shared + only0 + only1)
}

/// Largest `D_{1+s}(p_theta1 || p_theta2)` attainable under the budget.
pub fn max_renyi(
    budget: &PrivacyBudget,
    theta1: MixtureParameter,
    theta2: MixtureParameter,
    s: f64,
) -> Result<f64> {
    check_order(s)?;
    interior_pair(theta1, theta2)?;
    let terms = optimal_mixture_terms(budget, theta1.value(), theta2.value());
    Ok(renyi_from_ratios(terms.into_iter().map(|(m, r)| (m, r.ln())), s))
}
