//! Optimal binary randomized-response mechanisms under the l1 privacy
//! constraint `||(1-w) p0 - w p1||_1 <= delta`.
//!
//! The crate builds the optimal pairs and the classical baselines, evaluates
//! Fisher information, f-divergences, Rényi divergences and testing
//! exponents together with their constrained maxima, simulates surveys with
//! maximum-likelihood recovery, and certifies the closed forms against a
//! brute-force search.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod exponents;
pub mod information;
pub mod mechanisms;
pub mod model;
pub mod privacy;
pub mod verify;

pub use error::{Error, Result};
pub use model::{make_distribution, mixture, MechanismPair, MixtureParameter, PrivacyBudget, ProbabilityVector};
