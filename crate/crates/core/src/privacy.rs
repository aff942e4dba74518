//! The l1 (universally composable) security measure, the adversary's
//! minimum weighted error, and the `(epsilon, delta)`-DP check.

use crate::error::{Error, Result};
use crate::model::{MechanismPair, PrivacyBudget};

/// Additive slack for budget comparisons; optimal pairs sit exactly on the
/// boundary.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

/// Largest alphabet accepted by [`min_weighted_error_exhaustive`].
pub const EXHAUSTIVE_MAX_SYMBOLS: usize = 20;

/// `||(1-w) p0 - w p1||_1`.
pub fn uc_security(pair: &MechanismPair, weight: f64) -> f64 {
    pair.symbols()
        .map(|(x, y)| ((1.0 - weight) * x - weight * y).abs())
        .sum()
}

/// `min_S (1-w) p0(S) + w p1(S^c)`, via the closed form `(1 - uc) / 2`.
pub fn min_weighted_error(pair: &MechanismPair, weight: f64) -> f64 {
    0.5 * (1.0 - uc_security(pair, weight))
}

/// Minimum weighted error by enumerating every subset `S` of the alphabet.
pub fn min_weighted_error_exhaustive(pair: &MechanismPair, weight: f64) -> Result<f64> {
    let n = pair.len();
    if n > EXHAUSTIVE_MAX_SYMBOLS {
        return Err(Error::AlphabetTooLarge {
            size: n,
            max: EXHAUSTIVE_MAX_SYMBOLS,
        });
    }
    let p0 = pair.p0().as_slice();
    let p1 = pair.p1().as_slice();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << n) {
        let mut err = 0.0;
        for y in 0..n {
            if mask & (1 << y) != 0 {
                err += (1.0 - weight) * p0[y];
            } else {
                err += weight * p1[y];
            }
        }
        best = best.min(err);
    }
    Ok(best)
}

/// Smallest delta such that `p_i(S) <= e^eps p_j(S) + delta` for all `S` and
/// both orderings `(i, j)`.
pub fn dp_delta(pair: &MechanismPair, epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
        });
    }
    let scale = epsilon.exp();
    let one_way = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&pa, &pb)| (pa - scale * pb).max(0.0))
            .sum()
    };
    let p0 = pair.p0().as_slice();
    let p1 = pair.p1().as_slice();
    Ok(one_way(p0, p1).max(one_way(p1, p0)).clamp(0.0, 1.0))
}

/// Whether the pair meets `||(1-w) p0 - w p1||_1 <= delta`.
pub fn satisfies_constraint(pair: &MechanismPair, budget: &PrivacyBudget) -> bool {
    uc_security(pair, budget.weight()) <= budget.delta() + CONSTRAINT_SLACK
}
