//! Numerical certification of the closed-form optima.
//!
//! Every objective handled here has the form `Psi(p0, p1) = sum_y psi(p0(y), p1(y))`
//! with `psi` sublinear, so its maximum over the (convex) feasible set sits
//! at an extreme point. [`brute_force_max`] searches a grid of candidate
//! extreme points plus randomly drawn feasible pairs and compares the best
//! value with the objective at the analytic maximizer.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::information::ConvexGenerator;
use crate::mechanisms::optimal_three_symbol;
use crate::model::{MechanismPair, MixtureParameter, PrivacyBudget, ProbabilityVector};
use crate::privacy::{satisfies_constraint, CONSTRAINT_SLACK};

/// Relative tolerance of the homogeneity test and absolute tolerance of the
/// subadditivity test in [`sublinear_check`].
pub const SUBLINEAR_TOL: f64 = 1e-9;

/// Tolerance on `J` in [`convexity_equality_holds`].
pub const J_EQUALITY_TOL: f64 = 1e-10;

/// Tolerance on the per-symbol determinants in [`convexity_equality_holds`].
pub const DETERMINANT_TOL: f64 = 1e-12;

/// Random draws handled by one seeded stream in [`brute_force_max`].
const SAMPLE_CHUNK: usize = 4096;

/// A function `psi` of `(p0(y), p1(y))` that is expected to be sublinear.
#[derive(Clone)]
pub struct SublinearObjective {
    psi: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    description: String,
}

impl fmt::Debug for SublinearObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SublinearObjective")
            .field("description", &self.description)
            .finish()
    }
}

impl SublinearObjective {
    pub fn new(
        description: impl Into<String>,
        psi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            psi: Arc::new(psi),
            description: description.into(),
        }
    }

    /// Fisher summand `(y - x)^2 / ((1 - theta) x + theta y)`, zero at the origin.
    pub fn fisher(theta: MixtureParameter) -> Result<Self> {
        theta.require_interior()?;
        let t = theta.value();
        Ok(Self::new(format!("fisher(theta={t})"), move |x, y| {
            let mass = (1.0 - t) * x + t * y;
            if mass > 0.0 {
                (y - x) * (y - x) / mass
            } else {
                0.0
            }
        }))
    }

    /// Summand of `D_f(p_theta1 || p_theta2)`: the perspective of `f` at the
    /// two mixtures of `(x, y)`.
    pub fn f_divergence(
        theta1: MixtureParameter,
        theta2: MixtureParameter,
        f: ConvexGenerator,
    ) -> Result<Self> {
        theta1.require_interior()?;
        theta2.require_interior()?;
        let (t1, t2) = (theta1.value(), theta2.value());
        let description = format!("f-divergence[{}](theta1={t1}, theta2={t2})", f.name());
        Ok(Self::new(description, move |x, y| {
            let p = (1.0 - t1) * x + t1 * y;
            let q = (1.0 - t2) * x + t2 * y;
            f.perspective(p, q)
        }))
    }

    /// Relative entropy `D(p_theta1 || p_theta2)`.
    pub fn kl(theta1: MixtureParameter, theta2: MixtureParameter) -> Result<Self> {
        Self::f_divergence(theta1, theta2, ConvexGenerator::relative_entropy())
    }

    /// Power sum whose maximum also maximizes `D_{1+s}`, `s != 0`.
    pub fn renyi(theta1: MixtureParameter, theta2: MixtureParameter, s: f64) -> Result<Self> {
        Self::f_divergence(theta1, theta2, ConvexGenerator::renyi_power(s)?)
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        (self.psi)(x, y)
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

/// Draw from the uniform (flat Dirichlet) distribution on the simplex.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, size: usize) -> ProbabilityVector {
    assert!(size >= 1, "alphabet must be non-empty");
    ProbabilityVector::from_raw(dirichlet_values(rng, size))
}

fn dirichlet_values<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..size).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let mut values: Vec<f64> = draws.iter().map(|d| d / total).collect();
    // push the rounding residue into the largest entry
    let residue = 1.0 - values.iter().sum::<f64>();
    let (largest, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    values[largest] += residue;
    values
}

/// Two independent flat-Dirichlet rows.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, size: usize) -> MechanismPair {
    let p0 = random_distribution(rng, size);
    let p1 = random_distribution(rng, size);
    MechanismPair::new(p0, p1).expect("rows share the alphabet")
}

/// Check positive homogeneity and subadditivity of `psi` on `samples`
/// random tuples from `[0, 1]^2` (a quarter of the points sit on an axis)
/// and scales `alpha in (0, 10)`.
pub fn sublinear_check(obj: &SublinearObjective, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coordinate = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.125) {
            0.0
        } else {
            rng.random::<f64>()
        }
    };
    for _ in 0..samples.max(1) {
        let (x1, y1) = (coordinate(&mut rng), coordinate(&mut rng));
        let (x2, y2) = (coordinate(&mut rng), coordinate(&mut rng));
        let alpha = rng.random_range(1e-3..10.0);

        let base = obj.evaluate(x1, y1);
        let scaled = obj.evaluate(alpha * x1, alpha * y1);
        if !close_relative(scaled, alpha * base, SUBLINEAR_TOL) {
            return false;
        }
        let joint = obj.evaluate(x1 + x2, y1 + y2);
        let split = base + obj.evaluate(x2, y2);
        if joint.is_nan() || split.is_nan() || joint > split + SUBLINEAR_TOL {
            return false;
        }
    }
    true
}

fn close_relative(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Midpoint convexity of `f` on `samples` random pairs from `(0, 10)`.
pub fn convexity_check(f: &ConvexGenerator, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples.max(1)).all(|_| {
        let u = rng.random_range(1e-6..10.0);
        let v = rng.random_range(1e-6..10.0);
        let mid = f.evaluate(0.5 * (u + v));
        let chord = 0.5 * (f.evaluate(u) + f.evaluate(v));
        mid <= chord + SUBLINEAR_TOL * chord.abs().max(1.0)
    })
}

/// `Psi(p0, p1) = sum_y psi(p0(y), p1(y))`.
pub fn evaluate_psi_sum(obj: &SublinearObjective, pair: &MechanismPair) -> f64 {
    pair.symbols().map(|(x, y)| obj.evaluate(x, y)).sum()
}

fn psi_rows(obj: &SublinearObjective, p0: &[f64], p1: &[f64]) -> f64 {
    p0.iter().zip(p1).map(|(&x, &y)| obj.evaluate(x, y)).sum()
}

// Evenly spaced points with both endpoints exact.
fn linspace(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| {
        if i + 1 == points {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / (points - 1) as f64)
        }
    })
}

/// Number of pairs produced by [`extreme_point_candidates`]: `g^2 + 2g` for
/// three symbols, `2g` for two.
pub fn candidate_count(alphabet_size: usize, grid_points: usize) -> usize {
    match alphabet_size {
        3 => grid_points * grid_points + 2 * grid_points,
        _ => 2 * grid_points,
    }
}

type Rows = (Vec<f64>, Vec<f64>);

fn candidate_rows(budget: &PrivacyBudget, alphabet_size: usize, grid_points: usize) -> Vec<Rows> {
    let a = budget.a();
    let w = budget.weight();
    let x_lo = (a / (1.0 - w)).min(1.0);
    let y_lo = (a / w).min(1.0);
    let pad = |v: [f64; 2]| -> Vec<f64> {
        let mut row = v.to_vec();
        row.resize(alphabet_size, 0.0);
        row
    };
    let mut rows = Vec::with_capacity(candidate_count(alphabet_size, grid_points));
    if alphabet_size == 3 {
        for x in linspace(x_lo, 1.0, grid_points) {
            for y in linspace(y_lo, 1.0, grid_points) {
                rows.push((vec![x, 1.0 - x, 0.0], vec![y, 0.0, 1.0 - y]));
            }
        }
    }
    for y in linspace(y_lo, 1.0, grid_points) {
        rows.push((pad([1.0, 0.0]), pad([y, 1.0 - y])));
    }
    for x in linspace(x_lo, 1.0, grid_points) {
        rows.push((pad([x, 1.0 - x]), pad([1.0, 0.0])));
    }
    rows
}

fn check_search_args(alphabet_size: usize, grid_points: usize) -> Result<()> {
    if !(2..=3).contains(&alphabet_size) {
        return Err(Error::InvalidParameter {
            name: "alphabet_size",
            value: alphabet_size as f64,
        });
    }
    if grid_points < 2 {
        return Err(Error::InvalidParameter {
            name: "grid_points",
            value: grid_points as f64,
        });
    }
    Ok(())
}

/// Feasible pairs with a single shared symbol and otherwise disjoint
/// supports: `p0 = [x, 1-x, 0]`, `p1 = [y, 0, 1-y]` with `(1-w) x >= a` and
/// `w y >= a` on a `grid_points x grid_points` grid, followed by the
/// two-symbol families `p0 = [1, 0]`, `p1 = [y, 1-y]` (`w y >= a`) and their
/// mirror, zero-padded to the alphabet.
pub fn extreme_point_candidates(
    budget: &PrivacyBudget,
    alphabet_size: usize,
    grid_points: usize,
) -> Result<Vec<MechanismPair>> {
    check_search_args(alphabet_size, grid_points)?;
    candidate_rows(budget, alphabet_size, grid_points)
        .into_iter()
        .map(|(p0, p1)| MechanismPair::from_slices(&p0, &p1))
        .collect()
}

/// Result of [`brute_force_max`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub objective: String,
    pub alphabet_size: usize,
    pub best_value: f64,
    pub best_pair: MechanismPair,
    /// Grid candidates plus accepted random pairs.
    pub candidates_examined: usize,
    pub grid_candidates: usize,
    pub random_draws: usize,
    pub random_accepted: usize,
    pub closed_form_value: f64,
    /// `closed_form_value - best_value`; negative means the search beat the
    /// analytic optimum.
    pub gap: f64,
}

impl SearchReport {
    pub fn acceptance_rate(&self) -> f64 {
        if self.random_draws == 0 {
            0.0
        } else {
            self.random_accepted as f64 / self.random_draws as f64
        }
    }
}

/// Objective at the analytic maximizer: the optimal three-symbol pair, or
/// for two symbols the best vertex of the feasible polygon (up to symbol
/// relabeling the vertices are the two one-sided pairs and `p0 = p1`).
pub fn closed_form_max(budget: &PrivacyBudget, obj: &SublinearObjective, alphabet_size: usize) -> f64 {
    if alphabet_size >= 3 {
        let mut opt = optimal_three_symbol(budget);
        if alphabet_size > 3 {
            let mut p0 = opt.p0().as_slice().to_vec();
            let mut p1 = opt.p1().as_slice().to_vec();
            p0.resize(alphabet_size, 0.0);
            p1.resize(alphabet_size, 0.0);
            opt = MechanismPair::from_slices(&p0, &p1).expect("padded optimal pair");
        }
        return evaluate_psi_sum(obj, &opt);
    }
    let a = budget.a();
    let w = budget.weight();
    let y = a / w;
    let x = a / (1.0 - w);
    let vertices = [
        ([1.0, 0.0], [y, 1.0 - y]),
        ([x, 1.0 - x], [1.0, 0.0]),
        ([1.0, 0.0], [1.0, 0.0]),
    ];
    vertices
        .iter()
        .map(|(p0, p1)| psi_rows(obj, p0, p1))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone)]
struct Best {
    value: f64,
    rows: Option<Rows>,
}

impl Best {
    fn empty() -> Self {
        Best {
            value: f64::NEG_INFINITY,
            rows: None,
        }
    }

    fn offer(&mut self, value: f64, p0: &[f64], p1: &[f64]) {
        if value > self.value {
            self.value = value;
            self.rows = Some((p0.to_vec(), p1.to_vec()));
        } else if value == self.value {
            if let Some((b0, b1)) = &self.rows {
                if tie_key(p0, p1) < tie_key(b0, b1) {
                    self.rows = Some((p0.to_vec(), p1.to_vec()));
                }
            }
        }
    }

    fn merge(mut self, other: Best) -> Best {
        if let Some((p0, p1)) = &other.rows {
            self.offer(other.value, p0, p1);
        }
        self
    }
}

fn tie_key(p0: &[f64], p1: &[f64]) -> String {
    serde_json::json!({ "p0": p0, "p1": p1 }).to_string()
}

/// Maximize `Psi` over pairs with `alphabet_size` symbols meeting `budget`.
///
/// Candidates are the grid of [`extreme_point_candidates`] plus
/// `random_samples` flat-Dirichlet pairs kept when feasible. Random draws
/// come in fixed chunks, each from its own stream seeded by
/// `seed + chunk`, so the report does not depend on the thread count.
pub fn brute_force_max(
    budget: &PrivacyBudget,
    obj: &SublinearObjective,
    alphabet_size: usize,
    grid_points: usize,
    random_samples: usize,
    seed: u64,
) -> Result<SearchReport> {
    check_search_args(alphabet_size, grid_points)?;
    let rows = candidate_rows(budget, alphabet_size, grid_points);
    let grid_best = rows
        .par_chunks(1024)
        .map(|chunk| {
            let mut best = Best::empty();
            for (p0, p1) in chunk {
                best.offer(psi_rows(obj, p0, p1), p0, p1);
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Best::empty(), Best::merge);

    let chunks = random_samples.div_ceil(SAMPLE_CHUNK);
    let sampled: Vec<(Best, usize)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let draws = SAMPLE_CHUNK.min(random_samples - chunk * SAMPLE_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(chunk as u64));
            let mut best = Best::empty();
            let mut accepted = 0;
            for _ in 0..draws {
                let p0 = dirichlet_values(&mut rng, alphabet_size);
                let p1 = dirichlet_values(&mut rng, alphabet_size);
                if !rows_feasible(&p0, &p1, budget) {
                    continue;
                }
                accepted += 1;
                best.offer(psi_rows(obj, &p0, &p1), &p0, &p1);
            }
            (best, accepted)
        })
        .collect();
    let random_accepted = sampled.iter().map(|(_, n)| n).sum();
    let best = sampled
        .into_iter()
        .fold(grid_best, |acc, (b, _)| acc.merge(b));

    let (p0, p1) = best.rows.expect("grid is never empty");
    let closed_form_value = closed_form_max(budget, obj, alphabet_size);
    Ok(SearchReport {
        objective: obj.description().to_string(),
        alphabet_size,
        best_value: best.value,
        best_pair: MechanismPair::from_slices(&p0, &p1)?,
        candidates_examined: rows.len() + random_accepted,
        grid_candidates: rows.len(),
        random_draws: random_samples,
        random_accepted,
        closed_form_value,
        gap: closed_form_value - best.value,
    })
}

fn rows_feasible(p0: &[f64], p1: &[f64], budget: &PrivacyBudget) -> bool {
    let w = budget.weight();
    let uc: f64 = p0
        .iter()
        .zip(p1)
        .map(|(&x, &y)| ((1.0 - w) * x - w * y).abs())
        .sum();
    uc <= budget.delta() + CONSTRAINT_SLACK
}

/// Compare `J_theta` at the mixture `(1-t) q + t q'` with `(1-t) J(q) + t J(q')`.
///
/// Returns `(J equality within 1e-10, every determinant
/// q1(y) q0'(y) - q0(y) q1'(y) within 1e-12 of zero)`. Convexity of `J` in
/// the pair is strict away from proportional symbol columns, so the two
/// flags should agree.
pub fn convexity_equality_holds(
    qpair: &MechanismPair,
    qpair2: &MechanismPair,
    theta: MixtureParameter,
    t: f64,
) -> Result<(bool, bool)> {
    theta.require_interior()?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter { name: "t", value: t });
    }
    if qpair.len() != qpair2.len() {
        return Err(Error::SizeMismatch {
            left: qpair.len(),
            right: qpair2.len(),
        });
    }
    let fisher = SublinearObjective::fisher(theta)?;
    let mut mixed = 0.0;
    let mut combined = 0.0;
    let mut determinants_vanish = true;
    for ((x, y), (x2, y2)) in qpair.symbols().zip(qpair2.symbols()) {
        mixed += fisher.evaluate((1.0 - t) * x + t * x2, (1.0 - t) * y + t * y2);
        combined += (1.0 - t) * fisher.evaluate(x, y) + t * fisher.evaluate(x2, y2);
        if (y * x2 - x * y2).abs() > DETERMINANT_TOL {
            determinants_vanish = false;
        }
    }
    Ok(((mixed - combined).abs() <= J_EQUALITY_TOL, determinants_vanish))
}

/// Random instance for [`convexity_equality_holds`]. With probability 1/2
/// the second pair is a per-symbol rescaling `q'(y) = c(y) q(y)` with
/// `c - 1` orthogonal to both rows (so the rows stay normalized and every
/// determinant vanishes); otherwise both pairs are drawn independently.
pub fn random_equality_instance<R: Rng + ?Sized>(
    rng: &mut R,
    size: usize,
) -> (MechanismPair, MechanismPair) {
    let q = random_pair(rng, size);
    if size < 3 || rng.random_bool(0.5) {
        return (q, random_pair(rng, size));
    }
    let q0 = q.p0().as_slice();
    let q1 = q.p1().as_slice();
    // Gram-Schmidt a random direction against q0 and q1.
    let mut v: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
    let e0 = normalized(q0.to_vec()).expect("distribution is non-zero");
    let mut u = q1.to_vec();
    subtract_projection(&mut u, &e0);
    subtract_projection(&mut v, &e0);
    if let Some(e1) = normalized(u) {
        subtract_projection(&mut v, &e1);
    }
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let scale = if peak > 0.0 { rng.random_range(0.1..0.9) / peak } else { 0.0 };
    let c: Vec<f64> = v.iter().map(|vi| 1.0 + scale * vi).collect();
    let r0: Vec<f64> = q0.iter().zip(&c).map(|(x, ci)| x * ci).collect();
    let r1: Vec<f64> = q1.iter().zip(&c).map(|(y, ci)| y * ci).collect();
    let q2 = MechanismPair::from_slices(&r0, &r1).expect("rescaled rows stay normalized");
    (q, q2)
}

fn normalized(mut u: Vec<f64>) -> Option<Vec<f64>> {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= norm);
    Some(u)
}

fn subtract_projection(v: &mut [f64], e: &[f64]) {
    let dot: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(e).for_each(|(a, b)| *a -= dot * b);
}

/// Move `eps` of `p0` mass from a symbol only `p0` uses onto a symbol both
/// rows use. This breaks the balance `(1-w) p0(y) = w p1(y)` on the shared
/// support while keeping the pair feasible. `None` when the pair has no
/// such symbols or too little mass to move.
pub fn break_optimality(pair: &MechanismPair, budget: &PrivacyBudget, eps: f64) -> Option<MechanismPair> {
    let p0 = pair.p0().as_slice();
    let p1 = pair.p1().as_slice();
    let shared = (0..pair.len()).find(|&y| p0[y] > 0.0 && p1[y] > 0.0)?;
    let donor = (0..pair.len())
        .filter(|&y| p1[y] == 0.0 && p0[y] >= eps)
        .max_by(|&i, &j| p0[i].total_cmp(&p0[j]))?;
    let mut moved = p0.to_vec();
    moved[donor] -= eps;
    moved[shared] += eps;
    let out = MechanismPair::from_slices(&moved, p1).ok()?;
    satisfies_constraint(&out, budget).then_some(out)
}
