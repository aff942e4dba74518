//! Value types shared by every other module: distributions over the
//! disclosed alphabet, mechanism pairs, privacy budgets and the mixture
//! parameter.
//!
//! All types validate on construction and are immutable afterwards.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a distribution's total mass from 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Entries in `[-NEGATIVE_CLAMP, 0)` are treated as round-off and set to 0.
pub const NEGATIVE_CLAMP: f64 = 1e-15;

/// A finite probability distribution over the disclosed alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut values = values;
        for (index, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { index });
            }
            if *v < -NEGATIVE_CLAMP {
                return Err(Error::NegativeEntry { index, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(values))
    }

    /// Point mass on `symbol` in an alphabet of `size` symbols.
    pub fn point_mass(size: usize, symbol: usize) -> Self {
        assert!(symbol < size, "symbol {symbol} outside alphabet of size {size}");
        let mut v = vec![0.0; size];
        v[symbol] = 1.0;
        Self(v)
    }

    // Callers guarantee validity (affine combinations of valid vectors).
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

impl Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Validate `values` as a probability vector.
pub fn make_distribution(values: &[f64]) -> Result<ProbabilityVector> {
    ProbabilityVector::new(values.to_vec())
}

/// The randomization rule: `p0` is the report distribution for private bit 0,
/// `p1` the one for private bit 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct MechanismPair {
    p0: ProbabilityVector,
    p1: ProbabilityVector,
}

#[derive(Deserialize)]
struct RawPair {
    p0: ProbabilityVector,
    p1: ProbabilityVector,
}

impl TryFrom<RawPair> for MechanismPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        Self::new(raw.p0, raw.p1)
    }
}

impl MechanismPair {
    pub fn new(p0: ProbabilityVector, p1: ProbabilityVector) -> Result<Self> {
        if p0.len() != p1.len() {
            return Err(Error::SizeMismatch {
                left: p0.len(),
                right: p1.len(),
            });
        }
        Ok(Self { p0, p1 })
    }

    pub fn from_slices(p0: &[f64], p1: &[f64]) -> Result<Self> {
        Self::new(make_distribution(p0)?, make_distribution(p1)?)
    }

    pub fn p0(&self) -> &ProbabilityVector {
        &self.p0
    }

    pub fn p1(&self) -> &ProbabilityVector {
        &self.p1
    }

    /// Alphabet size |Y|.
    pub fn len(&self) -> usize {
        self.p0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Iterate `(p0(y), p1(y))` over the alphabet.
    pub fn symbols(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p0.iter().copied().zip(self.p1.iter().copied())
    }

    /// Apply the same relabeling of symbols to both rows.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        assert_eq!(order.len(), self.len(), "permutation length mismatch");
        let p0 = order.iter().map(|&i| self.p0[i]).collect();
        let p1 = order.iter().map(|&i| self.p1[i]).collect();
        Self::new(ProbabilityVector::new(p0)?, ProbabilityVector::new(p1)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mechanism pair serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl fmt::Display for MechanismPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// Slack used when a weight lands just outside `[a, 1 - a]` by round-off.
const WEIGHT_SLACK: f64 = 1e-12;

/// The l1 privacy budget `||(1-w) p0 - w p1||_1 <= delta` together with the
/// derived floor `a = (1 - delta) / 2` and threshold `theta0 = (w - a) / delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyBudget {
    delta: f64,
    weight: f64,
    a: f64,
    theta0: f64,
}

impl PrivacyBudget {
    pub fn new(delta: f64, weight: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidDelta(delta));
        }
        let a = (1.0 - delta) / 2.0;
        let hi = 1.0 - a;
        if !weight.is_finite() || weight < a - WEIGHT_SLACK || weight > hi + WEIGHT_SLACK {
            return Err(Error::WeightOutOfRange { weight, lo: a, hi });
        }
        let weight = weight.clamp(a, hi);
        // (w - a) / delta, arranged to give exactly 1/2 at w = 1/2
        let theta0 = ((2.0 * weight - 1.0 + delta) / (2.0 * delta)).clamp(0.0, 1.0);
        Ok(Self {
            delta,
            weight,
            a,
            theta0,
        })
    }

    /// Symmetric budget `w = 1/2`.
    pub fn symmetric(delta: f64) -> Result<Self> {
        Self::new(delta, 0.5)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Minimum weighted error the adversary must suffer.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Same delta, different weight.
    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        Self::new(self.delta, weight)
    }
}

/// Population fraction of private bit 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct MixtureParameter(f64);

impl MixtureParameter {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::ThetaOutOfRange(theta));
        }
        Ok(Self(theta))
    }

    /// Like [`MixtureParameter::new`] but rejects the endpoints.
    pub fn interior(theta: f64) -> Result<Self> {
        let t = Self::new(theta)?;
        t.require_interior()?;
        Ok(t)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_interior(self) -> bool {
        self.0 > 0.0 && self.0 < 1.0
    }

    pub fn require_interior(self) -> Result<()> {
        if self.is_interior() {
            Ok(())
        } else {
            Err(Error::ThetaNotInterior(self.0))
        }
    }
}

/// Entrywise `(1 - theta) p0 + theta p1`.
pub fn mixture(pair: &MechanismPair, theta: MixtureParameter) -> ProbabilityVector {
    ProbabilityVector::from_raw(mixture_values(pair, theta.value()))
}

pub(crate) fn mixture_values(pair: &MechanismPair, theta: f64) -> Vec<f64> {
    pair.symbols()
        .map(|(x, y)| (1.0 - theta) * x + theta * y)
        .collect()
}
