//! Survey simulation, maximum-likelihood recovery of theta, asymptotic
//! confidence intervals and Monte Carlo accuracy checks.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64`; Monte Carlo trial `k`
//! uses seed `seed + k` (wrapping), so results do not depend on how trials
//! are scheduled across threads.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::information::fisher_information;
use crate::model::{MechanismPair, MixtureParameter};

/// Width of the final bracket in the likelihood bisection.
pub const MLE_TOL: f64 = 1e-12;

/// theta-hat is pulled this far inside `[0, 1]` before evaluating `J`.
pub const FISHER_CLAMP: f64 = 1e-9;

/// Observed reports in sufficient-statistic form: one count per symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyDataset {
    counts: Vec<u64>,
    n: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    symbol: usize,
    count: u64,
}

impl SurveyDataset {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Dataset("no symbols".into()));
        }
        let n = counts.iter().sum();
        Ok(Self { counts, n })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Parse CSV with header `symbol,count`; symbols are 1-based and each
    /// must appear exactly once.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Dataset(e.to_string()))?;
        if headers.iter().map(str::trim).ne(["symbol", "count"]) {
            return Err(Error::Dataset(format!(
                "expected header `symbol,count`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for record in rdr.deserialize::<CountRow>() {
            rows.push(record.map_err(|e| Error::Dataset(e.to_string()))?);
        }
        let mut counts = vec![None; rows.len()];
        for row in rows {
            let slot = row
                .symbol
                .checked_sub(1)
                .and_then(|i| counts.get_mut(i))
                .ok_or_else(|| Error::Dataset(format!("symbol {} out of range", row.symbol)))?;
            if slot.replace(row.count).is_some() {
                return Err(Error::Dataset(format!("symbol {} listed twice", row.symbol)));
            }
        }
        Self::new(counts.into_iter().map(|c| c.expect("every slot filled")).collect())
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (i, &count) in self.counts.iter().enumerate() {
            wtr.serialize(CountRow { symbol: i + 1, count })
                .map_err(|e| Error::Dataset(e.to_string()))?;
        }
        wtr.flush().map_err(|e| Error::Dataset(e.to_string()))
    }
}

/// Maximum-likelihood estimate with its plug-in Fisher information and
/// asymptotic `1 - alpha` confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateResult {
    pub theta_hat: f64,
    pub fisher_at_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub alpha: f64,
    /// Every observed symbol has `p0(y) = p1(y)`; theta-hat is the
    /// conventional 0.5.
    pub uninformative: bool,
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    row.iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

// Inverse-CDF draw; zero-mass symbols are never returned.
fn draw(cum: &[f64], row: &[f64], u: f64) -> usize {
    cum.iter()
        .position(|&c| c > u)
        .unwrap_or_else(|| row.iter().rposition(|&p| p > 0.0).expect("row has mass"))
}

/// Simulate `n` respondents: each has `X ~ Bernoulli(theta)` and reports
/// `Y ~ p_X`.
pub fn sample_survey(pair: &MechanismPair, theta: MixtureParameter, n: u64, seed: u64) -> SurveyDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p0 = pair.p0().as_slice();
    let p1 = pair.p1().as_slice();
    let (c0, c1) = (cumulative(p0), cumulative(p1));
    let t = theta.value();
    let mut counts = vec![0u64; pair.len()];
    for _ in 0..n {
        let y = if rng.random::<f64>() < t {
            draw(&c1, p1, rng.random())
        } else {
            draw(&c0, p0, rng.random())
        };
        counts[y] += 1;
    }
    SurveyDataset { counts, n }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
        })
    }
}

/// Maximize `sum_y counts(y) ln p_theta(y)` over `theta in [0, 1]` and
/// attach the `1 - alpha` interval.
///
/// The log-likelihood is concave, so its derivative is bisected; a
/// derivative of one sign on the whole interval yields exactly 0 or 1.
pub fn mle(pair: &MechanismPair, data: &SurveyDataset, alpha: f64) -> Result<EstimateResult> {
    check_alpha(alpha)?;
    if data.len() != pair.len() {
        return Err(Error::CountMismatch {
            counts: data.len(),
            alphabet: pair.len(),
        });
    }
    if data.n() == 0 {
        return Err(Error::Dataset("no respondents".into()));
    }
    let mut terms = Vec::new();
    for (symbol, ((x, y), &c)) in pair.symbols().zip(data.counts()).enumerate() {
        if c == 0 {
            continue;
        }
        if x == 0.0 && y == 0.0 {
            return Err(Error::DegenerateLikelihood { symbol });
        }
        if x != y {
            terms.push((c as f64, x, y));
        }
    }
    let uninformative = terms.is_empty();
    let score = |t: f64| -> f64 {
        terms
            .iter()
            .map(|&(c, x, y)| c * (y - x) / ((1.0 - t) * x + t * y))
            .sum()
    };

    let theta_hat = if uninformative {
        0.5
    } else if score(0.0) <= 0.0 {
        0.0
    } else if score(1.0) >= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > MLE_TOL {
            let mid = 0.5 * (lo + hi);
            if score(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let at = MixtureParameter::new(theta_hat.clamp(FISHER_CLAMP, 1.0 - FISHER_CLAMP))?;
    let fisher_at_hat = fisher_information(pair, at)?;
    let (ci_lo, ci_hi) = if fisher_at_hat > 0.0 {
        confidence_interval(theta_hat, fisher_at_hat, data.n(), alpha)?
    } else {
        (0.0, 1.0)
    };
    Ok(EstimateResult {
        theta_hat,
        fisher_at_hat,
        ci_lo,
        ci_hi,
        alpha,
        uninformative,
    })
}

/// `theta_hat -/+ z_{1 - alpha/2} / sqrt(n J)`, clipped to `[0, 1]`.
pub fn confidence_interval(theta_hat: f64, fisher: f64, n: u64, alpha: f64) -> Result<(f64, f64)> {
    if fisher.is_nan() || fisher <= 0.0 || fisher.is_infinite() {
        return Err(Error::NonPositiveFisher(fisher));
    }
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", value: 0.0 });
    }
    let half = normal_quantile(1.0 - alpha / 2.0)? / (n as f64 * fisher).sqrt();
    Ok(((theta_hat - half).max(0.0), (theta_hat + half).min(1.0)))
}

/// Standard normal quantile: Acklam's rational approximation followed by
/// one Halley step against `libm::erfc`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter { name: "p", value: p });
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383_577_518_672_69e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // Phi(x) - p, keeping the erfc argument non-negative where it is accurate
    let e = if x <= 0.0 {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - p
    } else {
        (1.0 - p) - 0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
    };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Aggregate of repeated simulate-and-estimate trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub theta: f64,
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub alpha: f64,
    pub mean_theta_hat: f64,
    pub min_theta_hat: f64,
    pub max_theta_hat: f64,
    pub variance: f64,
    pub mse: f64,
    /// Cramér-Rao bound `1 / (n J_theta)`.
    pub crb: f64,
    pub mse_over_crb: f64,
    /// Fraction of trials whose interval contains theta.
    pub coverage: f64,
    pub uninformative_trials: u64,
}

fn run_trials(
    pair: &MechanismPair,
    theta: MixtureParameter,
    n: u64,
    trials: u64,
    seed: u64,
    alpha: f64,
) -> Result<Vec<EstimateResult>> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: 0.0,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", value: 0.0 });
    }
    (0..trials)
        .into_par_iter()
        .map(|k| mle(pair, &sample_survey(pair, theta, n, seed.wrapping_add(k)), alpha))
        .collect()
}

/// Mean of `(theta_hat - theta)^2` over `trials` independent surveys.
pub fn monte_carlo_mse(
    pair: &MechanismPair,
    theta: MixtureParameter,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    let results = run_trials(pair, theta, n, trials, seed, 0.05)?;
    let t = theta.value();
    let sum: f64 = results.iter().map(|r| (r.theta_hat - t).powi(2)).sum();
    Ok(sum / trials as f64)
}

/// Full Monte Carlo report; `theta` must be interior so that the
/// Cramér-Rao bound is finite.
pub fn monte_carlo(
    pair: &MechanismPair,
    theta: MixtureParameter,
    n: u64,
    trials: u64,
    seed: u64,
    alpha: f64,
) -> Result<MonteCarloSummary> {
    theta.require_interior()?;
    check_alpha(alpha)?;
    let fisher = fisher_information(pair, theta)?;
    let results = run_trials(pair, theta, n, trials, seed, alpha)?;
    let t = theta.value();
    let count = trials as f64;
    let hats: Vec<f64> = results.iter().map(|r| r.theta_hat).collect();
    let mean = hats.iter().sum::<f64>() / count;
    let variance = hats.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / count;
    let mse = hats.iter().map(|h| (h - t).powi(2)).sum::<f64>() / count;
    let covered = results.iter().filter(|r| r.ci_lo <= t && t <= r.ci_hi).count();
    let crb = if fisher > 0.0 {
        1.0 / (n as f64 * fisher)
    } else {
        f64::INFINITY
    };
    Ok(MonteCarloSummary {
        theta: t,
        n,
        trials,
        seed,
        alpha,
        mean_theta_hat: mean,
        min_theta_hat: hats.iter().copied().fold(f64::INFINITY, f64::min),
        max_theta_hat: hats.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        variance,
        mse,
        crb,
        mse_over_crb: mse / crb,
        coverage: covered as f64 / count,
        uninformative_trials: results.iter().filter(|r| r.uninformative).count() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{optimal_three_symbol, warner};
    use crate::model::{mixture, PrivacyBudget};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn th(v: f64) -> MixtureParameter {
        MixtureParameter::new(v).unwrap()
    }

    fn opt() -> MechanismPair {
        optimal_three_symbol(&PrivacyBudget::symmetric(0.25).unwrap())
    }

    // mpmath: sqrt(2) * erfinv(2p - 1)
    const Z_975: f64 = 1.959_963_984_540_054_3;
    const Z_90: f64 = 1.281_551_565_544_600_4;

    #[test]
    fn quantile_reference_values() {
        assert!((normal_quantile(0.975).unwrap() - Z_975).abs() < 1e-12);
        assert!((normal_quantile(0.9).unwrap() - Z_90).abs() < 1e-12);
        assert!((normal_quantile(0.025).unwrap() + Z_975).abs() < 1e-12);
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        for p in [1e-10, 1e-4, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-6] {
            let x = normal_quantile(p).unwrap();
            // compare the smaller tail, where erfc is evaluated accurately
            let tail = 0.5 * libm::erfc(x.abs() / std::f64::consts::SQRT_2);
            let expected = p.min(1.0 - p);
            assert!((tail - expected).abs() <= 1e-12 * expected.max(1e-3), "p={p}");
        }
    }

    #[test]
    fn confidence_interval_examples() {
        let (lo, hi) = confidence_interval(0.5, 1.0, 10_000, 0.05).unwrap();
        assert!((hi - 0.5 - Z_975 / 100.0).abs() < 1e-12);
        assert!((0.5 - lo - Z_975 / 100.0).abs() < 1e-12);
        let (lo, hi) = confidence_interval(0.5, 1.0, 10_000, 1.0 - 1e-12).unwrap();
        assert!(hi - lo < 1e-9);
        let (lo, _) = confidence_interval(0.01, 1.0, 100, 0.05).unwrap();
        assert_eq!(lo, 0.0);
        assert_eq!(
            confidence_interval(0.5, 0.0, 100, 0.05),
            Err(Error::NonPositiveFisher(0.0))
        );
    }

    #[test]
    fn mle_examples() {
        let p = opt();
        let r = mle(&p, &SurveyDataset::new(vec![50, 30, 20]).unwrap(), 0.05).unwrap();
        assert!((r.theta_hat - 0.4).abs() < 1e-10);
        assert!(r.ci_lo <= r.theta_hat && r.theta_hat <= r.ci_hi);
        assert!(!r.uninformative);
        let r = mle(&p, &SurveyDataset::new(vec![0, 0, 7]).unwrap(), 0.05).unwrap();
        assert_eq!(r.theta_hat, 1.0);
        let r = mle(&p, &SurveyDataset::new(vec![3, 7, 0]).unwrap(), 0.05).unwrap();
        assert_eq!(r.theta_hat, 0.0);
        let r = mle(&p, &SurveyDataset::new(vec![40, 0, 0]).unwrap(), 0.05).unwrap();
        assert!(r.uninformative);
        assert_eq!(r.theta_hat, 0.5);
    }

    #[test]
    fn mle_errors() {
        let p = opt();
        assert!(matches!(
            mle(&p, &SurveyDataset::new(vec![1, 2]).unwrap(), 0.05),
            Err(Error::CountMismatch { .. })
        ));
        let padded = MechanismPair::from_slices(&[0.5, 0.5, 0.0], &[0.2, 0.8, 0.0]).unwrap();
        assert_eq!(
            mle(&padded, &SurveyDataset::new(vec![1, 2, 1]).unwrap(), 0.05),
            Err(Error::DegenerateLikelihood { symbol: 2 })
        );
        assert!(mle(&p, &SurveyDataset::new(vec![0, 0, 0]).unwrap(), 0.05).is_err());
    }

    #[test]
    fn mle_matches_warner_closed_form() {
        // p_theta(1) = 0.625 - 0.25 theta, so theta_hat = (0.625 - f) / 0.25
        let p = warner(0.25).unwrap();
        let r = mle(&p, &SurveyDataset::new(vec![55, 45]).unwrap(), 0.05).unwrap();
        assert!((r.theta_hat - 0.3).abs() < 1e-10);
    }

    #[test]
    fn sampling_examples() {
        let p = opt();
        let d = sample_survey(&p, th(0.0), 5000, 1);
        assert_eq!(d.counts()[2], 0);
        assert_eq!(d.n(), 5000);
        assert_eq!(sample_survey(&p, th(0.3), 1000, 9), sample_survey(&p, th(0.3), 1000, 9));
        let big = sample_survey(&p, th(0.4), 1_000_000, 2);
        let freq = big.counts()[0] as f64 / 1e6;
        assert!((freq - 0.75).abs() < 0.002, "{freq}");
    }

    #[test]
    fn sampling_chi_square() {
        let p = opt();
        let theta = th(0.35);
        let expected = mixture(&p, theta);
        let dist = ChiSquared::new(2.0).unwrap();
        for seed in 0..20 {
            let n = 20_000;
            let d = sample_survey(&p, theta, n, seed);
            let stat: f64 = d
                .counts()
                .iter()
                .zip(expected.iter())
                .map(|(&c, &e)| {
                    let e = e * n as f64;
                    (c as f64 - e).powi(2) / e
                })
                .sum();
            assert!(1.0 - dist.cdf(stat) > 0.001, "seed {seed}: {stat}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = SurveyDataset::new(vec![50, 30, 20]).unwrap();
        let mut buf = Vec::new();
        d.to_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "symbol,count\n1,50\n2,30\n3,20\n");
        assert_eq!(SurveyDataset::from_csv(buf.as_slice()).unwrap(), d);
        let shuffled = "symbol,count\n2,30\n1,50\n3,20\n";
        assert_eq!(SurveyDataset::from_csv(shuffled.as_bytes()).unwrap(), d);
        assert!(SurveyDataset::from_csv("symbol,count\n1,5\n1,6\n".as_bytes()).is_err());
        assert!(SurveyDataset::from_csv("symbol,count\n0,5\n".as_bytes()).is_err());
        assert!(SurveyDataset::from_csv("a,b\n1,5\n".as_bytes()).is_err());
    }

    #[test]
    fn efficiency_and_coverage() {
        let p = opt();
        let s = monte_carlo(&p, th(0.5), 10_000, 5000, 2024, 0.05).unwrap();
        assert!((s.crb - 1e-4).abs() < 1e-18);
        assert!((0.9..=1.1).contains(&(s.variance / s.crb)), "{}", s.variance / s.crb);
        assert!((0.935..=0.965).contains(&s.coverage), "{}", s.coverage);
    }

    #[test]
    fn mse_scaling_and_consistency() {
        let p = opt();
        let small = monte_carlo_mse(&p, th(0.5), 2000, 1000, 5).unwrap();
        let large = monte_carlo_mse(&p, th(0.5), 4000, 1000, 6).unwrap();
        let ratio = large / small;
        assert!((0.4..=0.6).contains(&ratio), "{ratio}");

        let mut previous = f64::INFINITY;
        for n in [1_000, 10_000, 100_000] {
            let mut errors: Vec<f64> = (0..200)
                .map(|k| {
                    let d = sample_survey(&p, th(0.3), n, 100 + k);
                    (mle(&p, &d, 0.05).unwrap().theta_hat - 0.3).abs()
                })
                .collect();
            errors.sort_by(f64::total_cmp);
            let median = 0.5 * (errors[99] + errors[100]);
            assert!(median < previous);
            previous = median;
        }
    }

    #[test]
    fn uninformative_pair_falls_back() {
        let same = MechanismPair::from_slices(&[0.4, 0.6], &[0.4, 0.6]).unwrap();
        let mse = monte_carlo_mse(&same, th(0.5), 100, 10, 1).unwrap();
        assert_eq!(mse, 0.0);
        let s = monte_carlo(&same, th(0.3), 100, 10, 1, 0.05).unwrap();
        assert_eq!(s.uninformative_trials, 10);
        assert!((s.mse - 0.04).abs() < 1e-15);
    }
}
