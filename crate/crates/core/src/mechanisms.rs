//! Optimal and baseline randomized-response mechanisms, and the certificate
//! that decides whether a pair on |Y| >= 3 symbols is optimal.
//!
//! With `A = a / (1 - w)` and `B = a / w`, the optimal three-symbol pair is
//!
//! ```text
//! p0 = [A, 1 - A, 0]
//! p1 = [B, 0,     1 - B]
//! ```
//!
//! One shared symbol carries the weighted mass `a` for each row, and every
//! other symbol is exclusive to one row. Every optimal pair on a larger
//! alphabet splits those three symbols into blocks (see [`optimal_family`]).

use crate::error::{Error, Result};
use crate::model::{MechanismPair, MixtureParameter, PrivacyBudget, ProbabilityVector};

/// Default tolerance for [`is_optimal`].
pub const OPTIMALITY_TOL: f64 = 1e-9;

/// Threshold above which an entry counts as "in the support".
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

const BLOCK_TOL: f64 = 1e-12;

fn pair_from(p0: Vec<f64>, p1: Vec<f64>) -> MechanismPair {
    MechanismPair::new(
        ProbabilityVector::new(p0).expect("constructor row is a distribution"),
        ProbabilityVector::new(p1).expect("constructor row is a distribution"),
    )
    .expect("constructor rows share an alphabet")
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

/// The Fisher-optimal pair on three symbols; it does not depend on theta.
pub fn optimal_three_symbol(budget: &PrivacyBudget) -> MechanismPair {
    let a = budget.a();
    let w = budget.weight();
    let x = a / (1.0 - w);
    let y = a / w;
    pair_from(vec![x, 1.0 - x, 0.0], vec![y, 0.0, 1.0 - y])
}

/// The Fisher-optimal pair on two symbols. Which of the two boundary
/// families wins depends on theta; at `theta == theta0` both are optimal and
/// the first family is returned.
pub fn optimal_two_symbol(budget: &PrivacyBudget, theta: MixtureParameter) -> Result<MechanismPair> {
    theta.require_interior()?;
    let a = budget.a();
    let w = budget.weight();
    if theta.value() <= budget.theta0() {
        let y = a / w;
        Ok(pair_from(vec![1.0, 0.0], vec![y, 1.0 - y]))
    } else {
        let x = a / (1.0 - w);
        Ok(pair_from(vec![x, 1.0 - x], vec![1.0, 0.0]))
    }
}

/// Warner's scheme with truthful-answer probability `pi`.
pub fn warner_raw(pi: f64) -> Result<MechanismPair> {
    check_open_unit("pi", pi)?;
    Ok(pair_from(vec![pi, 1.0 - pi], vec![1.0 - pi, pi]))
}

/// Warner's scheme tuned to saturate the symmetric budget delta.
pub fn warner(delta: f64) -> Result<MechanismPair> {
    check_delta(delta)?;
    warner_raw((1.0 + delta) / 2.0)
}

/// Unrelated-question scheme: the sensitive question is answered with
/// probability `pi`, an unrelated one with YES-rate `eta` otherwise.
pub fn greenberg_raw(pi: f64, eta: f64) -> Result<MechanismPair> {
    check_open_unit("pi", pi)?;
    check_open_unit("eta", eta)?;
    let q = 1.0 - pi;
    Ok(pair_from(
        vec![pi + q * (1.0 - eta), q * eta],
        vec![q * (1.0 - eta), pi + q * eta],
    ))
}

/// Unrelated-question scheme tuned to the symmetric budget delta.
pub fn greenberg(delta: f64, eta: f64) -> Result<MechanismPair> {
    check_delta(delta)?;
    greenberg_raw(delta, eta)
}

/// Holohan et al.'s two-symbol optimum at epsilon = 0 (symmetric weight).
pub fn holohan(delta: f64, theta: MixtureParameter) -> Result<MechanismPair> {
    check_delta(delta)?;
    let skewed = vec![1.0 - delta, delta];
    if theta.value() <= 0.5 {
        Ok(pair_from(vec![1.0, 0.0], skewed))
    } else {
        Ok(pair_from(skewed, vec![1.0, 0.0]))
    }
}

/// Degrees of freedom of the optimal pairs on |Y| >= 3 symbols: block
/// weights `b` and 1-based breakpoints `r1 < r2 < r3`.
///
/// Symbols `1..=r1` are shared, `r1+1..=r2` belong to `p0` only,
/// `r2+1..=r3` to `p1` only, and the rest are unused. Each block of `b`
/// sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalFamilyParams {
    b: Vec<f64>,
    r1: usize,
    r2: usize,
    r3: usize,
}

impl OptimalFamilyParams {
    pub fn new(b: Vec<f64>, r1: usize, r2: usize, r3: usize) -> Result<Self> {
        let size = b.len();
        if !(1 <= r1 && r1 < r2 && r2 < r3 && r3 <= size) {
            return Err(Error::InvalidBreakpoints { r1, r2, r3, size });
        }
        for (index, &v) in b.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { index });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { index, value: v });
            }
        }
        let mut blocks = vec![(0, r1), (r1, r2), (r2, r3)];
        if r3 < size {
            blocks.push((r3, size));
        }
        for (block, (lo, hi)) in blocks.into_iter().enumerate() {
            let sum: f64 = b[lo..hi].iter().sum();
            if (sum - 1.0).abs() > BLOCK_TOL {
                return Err(Error::BlockNotNormalized { block, sum });
            }
        }
        Ok(Self { b, r1, r2, r3 })
    }

    pub fn alphabet_size(&self) -> usize {
        self.b.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    pub fn breakpoints(&self) -> (usize, usize, usize) {
        (self.r1, self.r2, self.r3)
    }
}

/// Build the optimal pair described by `params`.
pub fn optimal_family(budget: &PrivacyBudget, params: &OptimalFamilyParams) -> MechanismPair {
    let a = budget.a();
    let w = budget.weight();
    let shared0 = a / (1.0 - w);
    let shared1 = a / w;
    let size = params.alphabet_size();
    let mut p0 = vec![0.0; size];
    let mut p1 = vec![0.0; size];
    for (y, &b) in params.b.iter().enumerate() {
        if y < params.r1 {
            p0[y] = shared0 * b;
            p1[y] = shared1 * b;
        } else if y < params.r2 {
            p0[y] = (1.0 - shared0) * b;
        } else if y < params.r3 {
            p1[y] = (1.0 - shared1) * b;
        }
    }
    pair_from(p0, p1)
}

/// Optimality certificate for alphabets of three or more symbols.
///
/// Holds iff every symbol in both supports satisfies `(1-w) p0(y) = w p1(y)`
/// and `(1-w) sum_{p1(y)>0} p0(y) = w sum_{p0(y)>0} p1(y) = a`, each within
/// `tol`.
pub fn is_optimal(pair: &MechanismPair, budget: &PrivacyBudget, tol: f64) -> Result<bool> {
    if pair.len() < 3 {
        return Err(Error::AlphabetTooSmall {
            size: pair.len(),
            min: 3,
        });
    }
    let w = budget.weight();
    let a = budget.a();
    let mut p0_on_supp1 = 0.0;
    let mut p1_on_supp0 = 0.0;
    for (x, y) in pair.symbols() {
        let in0 = x > SUPPORT_THRESHOLD;
        let in1 = y > SUPPORT_THRESHOLD;
        if in0 && in1 && ((1.0 - w) * x - w * y).abs() > tol {
            return Ok(false);
        }
        if in1 {
            p0_on_supp1 += x;
        }
        if in0 {
            p1_on_supp0 += y;
        }
    }
    Ok(((1.0 - w) * p0_on_supp1 - a).abs() <= tol && (w * p1_on_supp0 - a).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::privacy::{satisfies_constraint, uc_security};

    fn assert_row(p: &ProbabilityVector, want: &[f64], tol: f64) {
        assert_eq!(p.len(), want.len());
        for (g, w) in p.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{:?} vs {want:?}", p.as_slice());
        }
    }

    fn theta(v: f64) -> MixtureParameter {
        MixtureParameter::new(v).unwrap()
    }

    #[test]
    fn optimal_three_symbol_examples() {
        let b = PrivacyBudget::new(0.25, 0.5).unwrap();
        let p = optimal_three_symbol(&b);
        assert_row(p.p0(), &[0.75, 0.25, 0.0], 0.0);
        assert_row(p.p1(), &[0.75, 0.0, 0.25], 0.0);
        assert!((uc_security(&p, 0.5) - 0.25).abs() < 1e-15);
        assert!(is_optimal(&p, &b, OPTIMALITY_TOL).unwrap());

        let b = PrivacyBudget::new(0.25, 0.4).unwrap();
        let p = optimal_three_symbol(&b);
        assert_row(p.p0(), &[0.625, 0.375, 0.0], 1e-15);
        assert_row(p.p1(), &[0.9375, 0.0, 0.0625], 1e-15);
        assert!(satisfies_constraint(&p, &b));

        // w = a collapses p1 onto the shared symbol
        let b = PrivacyBudget::new(0.3, 0.35).unwrap();
        let p = optimal_three_symbol(&b);
        assert_row(p.p1(), &[1.0, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn optimal_two_symbol_examples() {
        let b = PrivacyBudget::new(0.25, 0.5).unwrap();
        let p = optimal_two_symbol(&b, theta(0.25)).unwrap();
        assert_row(p.p0(), &[1.0, 0.0], 0.0);
        assert_row(p.p1(), &[0.75, 0.25], 0.0);
        let p = optimal_two_symbol(&b, theta(0.75)).unwrap();
        assert_row(p.p0(), &[0.75, 0.25], 0.0);
        assert_row(p.p1(), &[1.0, 0.0], 0.0);

        let b = PrivacyBudget::new(0.25, 0.4).unwrap();
        let at_threshold = optimal_two_symbol(&b, theta(b.theta0())).unwrap();
        assert_row(at_threshold.p0(), &[1.0, 0.0], 0.0);
        assert!(optimal_two_symbol(&b, theta(0.0)).is_err());
    }

    #[test]
    fn baselines_match_reference_rows() {
        let w = warner(0.25).unwrap();
        assert_row(w.p0(), &[0.625, 0.375], 0.0);
        assert_row(w.p1(), &[0.375, 0.625], 0.0);
        assert!((uc_security(&w, 0.5) - 0.25).abs() < 1e-15);

        let w = warner(0.999).unwrap();
        assert!((w.p0()[0] - 0.9995).abs() < 1e-12);

        let g = greenberg(0.25, 0.5).unwrap();
        assert_row(g.p0(), &[0.625, 0.375], 1e-15);
        assert_row(g.p1(), &[0.375, 0.625], 1e-15);
        let g = greenberg(0.25, 0.2).unwrap();
        assert_row(g.p0(), &[0.85, 0.15], 1e-15);
        assert_row(g.p1(), &[0.6, 0.4], 1e-15);
        let g = greenberg(0.25, 1e-9).unwrap();
        assert!((g.p0()[0] - 1.0).abs() < 1e-8);

        let h = holohan(0.25, theta(0.3)).unwrap();
        assert_row(h.p0(), &[1.0, 0.0], 0.0);
        assert_row(h.p1(), &[0.75, 0.25], 0.0);
        let h = holohan(0.25, theta(0.7)).unwrap();
        assert_row(h.p0(), &[0.75, 0.25], 0.0);
        assert_row(h.p1(), &[1.0, 0.0], 0.0);

        assert!(warner(1.5).is_err());
        assert!(greenberg(0.25, 1.0).is_err());
        assert!(warner_raw(0.0).is_err());
    }

    #[test]
    fn warner_rows_are_swapped() {
        for d in [0.05, 0.3, 0.8] {
            let w = warner(d).unwrap();
            assert_eq!(w.p0()[0], w.p1()[1]);
            assert_eq!(w.p0()[1], w.p1()[0]);
        }
    }

    #[test]
    fn holohan_coincides_with_two_symbol_optimum_at_half_weight() {
        for d in [0.1, 0.25, 0.6] {
            let b = PrivacyBudget::symmetric(d).unwrap();
            for t in [0.05, 0.3, 0.5, 0.51, 0.9] {
                let h = holohan(d, theta(t)).unwrap();
                let o = optimal_two_symbol(&b, theta(t)).unwrap();
                assert_row(h.p0(), o.p0().as_slice(), 1e-15);
                assert_row(h.p1(), o.p1().as_slice(), 1e-15);
            }
        }
    }

    #[test]
    fn family_examples() {
        let b = PrivacyBudget::new(0.25, 0.5).unwrap();
        let params = OptimalFamilyParams::new(vec![1.0, 1.0, 1.0], 1, 2, 3).unwrap();
        assert_eq!(optimal_family(&b, &params), optimal_three_symbol(&b));

        let params = OptimalFamilyParams::new(vec![0.5, 0.5, 1.0, 1.0], 2, 3, 4).unwrap();
        let p = optimal_family(&b, &params);
        assert_row(p.p0(), &[0.375, 0.375, 0.25, 0.0], 1e-15);
        assert_row(p.p1(), &[0.375, 0.375, 0.0, 0.25], 1e-15);
        assert!(is_optimal(&p, &b, OPTIMALITY_TOL).unwrap());

        let params = OptimalFamilyParams::new(vec![1.0; 4], 1, 2, 3).unwrap();
        let p = optimal_family(&b, &params);
        assert_row(p.p0(), &[0.75, 0.25, 0.0, 0.0], 1e-15);
        assert_row(p.p1(), &[0.75, 0.0, 0.25, 0.0], 1e-15);
        assert!(is_optimal(&p, &b, OPTIMALITY_TOL).unwrap());
    }

    #[test]
    fn family_param_errors() {
        assert!(matches!(
            OptimalFamilyParams::new(vec![1.0; 3], 0, 1, 2),
            Err(Error::InvalidBreakpoints { .. })
        ));
        assert!(matches!(
            OptimalFamilyParams::new(vec![1.0; 3], 1, 2, 4),
            Err(Error::InvalidBreakpoints { .. })
        ));
        assert!(matches!(
            OptimalFamilyParams::new(vec![1.0; 3], 2, 2, 3),
            Err(Error::InvalidBreakpoints { .. })
        ));
        assert_eq!(
            OptimalFamilyParams::new(vec![0.5, 0.4, 1.0, 1.0], 2, 3, 4),
            Err(Error::BlockNotNormalized {
                block: 0,
                sum: 0.9
            })
        );
        assert!(matches!(
            OptimalFamilyParams::new(vec![1.0, 1.0, 1.0, 0.5], 1, 2, 3),
            Err(Error::BlockNotNormalized { block: 3, .. })
        ));
        assert!(matches!(
            OptimalFamilyParams::new(vec![1.5, -0.5, 1.0, 1.0], 2, 3, 4),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
    }

    #[test]
    fn is_optimal_examples() {
        let b = PrivacyBudget::new(0.25, 0.5).unwrap();
        let p = optimal_three_symbol(&b);
        let other = b.with_weight(0.4).unwrap();
        assert!(!is_optimal(&p, &other, OPTIMALITY_TOL).unwrap());

        let same = MechanismPair::from_slices(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]).unwrap();
        assert!(!is_optimal(&same, &b, OPTIMALITY_TOL).unwrap());

        let two = warner(0.25).unwrap();
        assert_eq!(
            is_optimal(&two, &b, OPTIMALITY_TOL),
            Err(Error::AlphabetTooSmall { size: 2, min: 3 })
        );
    }
}
