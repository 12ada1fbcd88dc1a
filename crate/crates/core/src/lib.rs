//! Detection of two-component location mixtures `(1−ε)φ(x−μ₁) + εφ(x−μ₂)`
//! against the translation model `φ(x−μ)` with unknown `μ`.
//!
//! The main procedure is the multi-scale spacing test in [`spacing`]. The
//! crate also ships a variance test, Higher Criticism and Kolmogorov–Smirnov
//! baselines, closed-form theory calculators, and a Monte Carlo power harness.
//!
//! Monte Carlo work is split over replicates with rayon when the `parallel`
//! feature is enabled (the default). Every replicate draws from its own
//! counter-based stream, so results do not depend on the thread count.

pub mod baselines;
pub mod decision;
pub mod dist;
pub mod error;
pub mod exec;
pub mod montecarlo;
pub mod order;
pub mod power;
pub mod rng;
pub mod spacing;
pub mod theory;
pub mod variance;

pub use decision::{ScaleCheck, TestDecision, Threshold};
pub use dist::{BaseDistribution, MixtureParams, Model, SampleVector};
pub use error::{Error, Result};
pub use exec::Execution;
pub use montecarlo::MonteCarlo;
