//! Ergodicity analysis for block-structured Markov chains of GI/G/1 type.
//!
//! A chain is described by a boundary row/column of `B` blocks and a
//! repeating interior of `A` blocks, each family carrying a parametric tail
//! law so that generating-function radii and block moments are computable in
//! closed form. On top of that model the crate provides:
//!
//! * spectral analysis of `A*(z)` (Perron root, eigenvector, decay root `eta`),
//! * explicit drift certificates for geometric ergodicity and hitting-time
//!   bounds for strong ergodicity, with machine verification of both,
//! * a truncation/augmentation stationary solver, taboo-solve visit measures
//!   (`R`), and the factorization identities tying them together,
//! * exact first-passage moment tables, total-variation curves, and a seeded
//!   Monte Carlo simulator,
//! * a classifier that combines these criteria into one verdict.

pub mod certificates;
pub mod chain;
pub mod classifier;
pub mod error;
pub mod fixtures;
pub mod hitting;
pub mod numeric;
pub mod spectral;
pub mod stationary;
pub mod truncated;

pub use chain::{BlockSequence, Gi1Chain, PhaseSummary, TailLaw};
pub use classifier::{classify, ErgodicityReport, Verdict};
pub use error::{Error, Result};
