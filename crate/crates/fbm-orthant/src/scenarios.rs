//! Canonical ready-made models, including a four-dimensional showcase in
//! which all three coordinate classes (essential, weakly essential,
//! negligible) are populated simultaneously.

use crate::critical::{find_t0, CriticalError};
use crate::linalg::Matrix;
use crate::model::{ModelError, ModelSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
}

/// The showcase model: d = 4, independent components (Σ = I), H = 3/4,
/// drift μ = (2, 1, −1, −1) and levels ν = (1, 2, ν₃*, 1).
///
/// The first two coordinates drift upward and carry the crossing; the
/// last two drift downward. ν₃* is chosen at runtime so that the third
/// coordinate's boundary line ν₃ + μ₃t hits zero exactly at the critical
/// time of the first two — putting it on the weakly-essential razor's
/// edge — while the fourth stays strictly negligible there. Since
/// μ₃ = −1 this means ν₃* = t₀, i.e. t₀ = ν₃*/|μ₃|.
///
/// Returns the model together with the computed ν₃*.
pub fn example_scenario() -> Result<(ModelSpec, f64), ScenarioError> {
    let sub = ModelSpec::from_covariance(
        0.75,
        vec![2.0, 1.0],
        vec![1.0, 2.0],
        Matrix::identity(2),
    )?;
    let nu3 = find_t0(&sub)?.t0;
    let model = ModelSpec::from_covariance(
        0.75,
        vec![2.0, 1.0, -1.0, -1.0],
        vec![1.0, 2.0, nu3, 1.0],
        Matrix::identity(4),
    )?;
    Ok((model, nu3))
}

/// Scalar standard Brownian motion with drift μ and level ν — the model
/// whose crossing probability is exactly `exp(−2μνu)`, used as a
/// simulator oracle.
pub fn scalar_brownian(mu: f64, nu: f64) -> Result<ModelSpec, ScenarioError> {
    Ok(ModelSpec::from_covariance(0.5, vec![mu], vec![nu], Matrix::identity(1))?)
}

/// Scalar unit-variance fractional model with drift μ = ν = 1.
pub fn scalar_fractional(hurst: f64) -> Result<ModelSpec, ScenarioError> {
    Ok(ModelSpec::from_covariance(hurst, vec![1.0], vec![1.0], Matrix::identity(1))?)
}
