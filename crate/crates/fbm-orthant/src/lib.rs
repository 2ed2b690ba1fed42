//! Exact large-threshold asymptotics for orthant entry of correlated
//! fractional Brownian motion with drift.
//!
//! The model is a d-dimensional process `X(t) = A·B_H(t)` where the
//! coordinates of `B_H` are independent fractional Brownian motions with a
//! common Hurst parameter `H ∈ (0,1)` and `Σ = A·Aᵀ` is positive definite.
//! For a drift vector `μ` and a level vector `ν` (some coordinate must have
//! `μ_i > 0` and `ν_i > 0`), the quantity of interest is
//!
//! ```text
//! P(u) = P(∃ t ≥ 0 : X(t) − μ t u^{1−H}  >  ν u^{1−H}   componentwise)
//! ```
//!
//! written here in the time scale in which the threshold grows like
//! `u^{1−H}`. As `u → ∞` this probability obeys
//!
//! ```text
//! P(u) ~ C · u^γ · exp(−(ĝ/2) · u^{2(1−H)})
//! ```
//!
//! and the crate computes every ingredient of the right-hand side exactly
//! (or by controlled simulation where no closed form exists):
//!
//! * [`qp`] — the orthant-constrained quadratic program whose value drives
//!   the exponential rate, with a certificate of optimality;
//! * [`critical`] — the critical time `t₀`, the essential / weakly-essential /
//!   negligible coordinate classification, and the regime dichotomy;
//! * [`constants`] — the curvature constant (a truncated Gaussian
//!   quadrature, possibly against a multivariate normal CDF), the
//!   closed-form regime-two prefactor, and the assembled asymptotic formula;
//! * [`pickands`] — Monte Carlo estimation of the generalized Pickands
//!   constant appearing in regime one;
//! * [`fbm`] — exact synthesis of fractional Gaussian paths by circulant
//!   embedding, plus on-disk path formats;
//! * [`montecarlo`] — direct estimation of `P(u)` at finite `u` (crude and
//!   mean-shifted importance sampling) for validating the asymptotics.
//!
//! Every stochastic routine takes an explicit seed and derives per-batch
//! RNG streams from it, so results are bit-identical across thread counts.

pub mod constants;
pub mod critical;
pub mod fbm;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod mvn;
pub mod pickands;
pub mod qp;
pub mod quad;
pub mod report;
pub mod rng;
pub mod scenarios;

pub use constants::{assemble_asymptotics, c_k, AsymptoticResult, CkValue};
pub use critical::{find_t0, Case, CriticalPoint};
pub use fbm::{sample_correlated_fbm, sample_fbm, FbmPath, FbmSampler};
pub use model::{load_model, IndexSet, ModelSpec};
pub use montecarlo::{
    compare_asymptotics, estimate_p, ComparisonTable, McConfig, McEstimate, McMethod,
};
pub use pickands::{estimate_pickands, PickandsConfig, PickandsEstimate};
pub use qp::{solve_qp, QpSolution};
pub use report::RunReport;
pub use scenarios::{example_scenario, scalar_brownian, scalar_fractional};
