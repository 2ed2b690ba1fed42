//! Problem specification: Hurst parameter, covariance, drift and level
//! vectors, with validation and JSON (de)serialization.
//!
//! A model describes the process `X(t) = A·B_H(t)` and the event
//! `∃t : X(t) − μ t v > ν v` (componentwise, `v = u^{1−H}`). Configs may
//! supply either the mixing matrix `A` (covariance is formed as `A·Aᵀ`) or
//! the covariance `Σ` directly (a symmetric square root is taken when paths
//! must be simulated).

use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative eigenvalue floor for the positive definiteness check:
/// `λ_min > COND_TOL · λ_max` must hold.
pub const COND_TOL: f64 = 1e-12;

/// Half-width of the exclusion band around `H = 1/2` within which the model
/// is treated as Brownian and rejected by the analytic pipeline.
pub const BROWNIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("Hurst parameter must lie in (0,1), got {0}")]
    HurstOutOfRange(f64),
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, got: usize, expected: usize },
    #[error("dimension must be between 1 and 15, got {0}")]
    DimensionUnsupported(usize),
    #[error("covariance is not positive definite (λ_min = {lambda_min:.3e}, λ_max = {lambda_max:.3e})")]
    NotPositiveDefinite { lambda_min: f64, lambda_max: f64 },
    #[error("no coordinate has both positive drift and positive level; the entry probability is not a rare event in this regime")]
    NoRareCoordinate,
    #[error("config must supply exactly one of the mixing matrix A or the covariance Sigma")]
    MatrixChoiceAmbiguous,
    #[error("matrix {what} must be {expected}x{expected}, got {got} entries")]
    MatrixShape { what: &'static str, expected: usize, got: usize },
    #[error("H = 1/2 is the Brownian boundary case; {context} requires H ≠ 1/2 (use the Brownian reference formulas instead)")]
    BrownianBoundary { context: &'static str },
    #[error("failed to parse model config: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Sorted set of coordinate indices (0-based internally; serialized and
/// displayed 1-based, matching the convention of the written reports).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Builds from 0-based indices; sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// All coordinates of a d-dimensional model.
    pub fn full(d: usize) -> Self {
        IndexSet((0..d).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// 0-based members, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// 1-based members, ascending (the external convention).
    pub fn members_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&i| i + 1).collect()
    }

    /// Complement within {0, …, d−1}.
    pub fn complement(&self, d: usize) -> IndexSet {
        IndexSet((0..d).filter(|i| !self.contains(*i)).collect())
    }

    /// Gathers the entries of `v` at this set's indices.
    pub fn gather(&self, v: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| v[i]).collect()
    }
}

impl std::fmt::Display for IndexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, m) in self.members_one_based().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.members_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let one_based: Vec<usize> = Vec::deserialize(d)?;
        if one_based.contains(&0) {
            return Err(serde::de::Error::custom("index set members are 1-based; 0 is invalid"));
        }
        Ok(IndexSet::new(one_based.into_iter().map(|m| m - 1).collect()))
    }
}

/// Raw config as it appears on disk.
#[derive(Debug, Serialize, Deserialize)]
struct RawConfig {
    #[serde(rename = "H")]
    hurst: f64,
    mu: Vec<f64>,
    nu: Vec<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    mixing: Option<Vec<f64>>,
    #[serde(rename = "Sigma", default, skip_serializing_if = "Option::is_none")]
    covariance: Option<Vec<f64>>,
}

/// Validated model specification.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    hurst: f64,
    mu: Vec<f64>,
    nu: Vec<f64>,
    sigma: Matrix,
    /// Mixing matrix if the config supplied one; otherwise derived on demand.
    mixing: Option<Matrix>,
}

impl ModelSpec {
    /// Builds and validates a model from a covariance matrix.
    pub fn from_covariance(
        hurst: f64,
        mu: Vec<f64>,
        nu: Vec<f64>,
        sigma: Matrix,
    ) -> Result<Self, ModelError> {
        Self::build(hurst, mu, nu, sigma, None)
    }

    /// Builds and validates a model from a mixing matrix (Σ = A·Aᵀ).
    pub fn from_mixing(
        hurst: f64,
        mu: Vec<f64>,
        nu: Vec<f64>,
        mixing: Matrix,
    ) -> Result<Self, ModelError> {
        let sigma = mixing.gram();
        Self::build(hurst, mu, nu, sigma, Some(mixing))
    }

    fn build(
        hurst: f64,
        mu: Vec<f64>,
        nu: Vec<f64>,
        mut sigma: Matrix,
        mixing: Option<Matrix>,
    ) -> Result<Self, ModelError> {
        if !(hurst > 0.0 && hurst < 1.0) || !hurst.is_finite() {
            return Err(ModelError::HurstOutOfRange(hurst));
        }
        let d = mu.len();
        if d == 0 || d > 15 {
            return Err(ModelError::DimensionUnsupported(d));
        }
        if nu.len() != d {
            return Err(ModelError::DimensionMismatch { what: "nu", got: nu.len(), expected: d });
        }
        if sigma.dim() != d {
            return Err(ModelError::DimensionMismatch {
                what: "Sigma",
                got: sigma.dim(),
                expected: d,
            });
        }
        sigma.symmetrize();
        let eig = sigma.sym_eigenvalues();
        let (lambda_min, lambda_max) = (eig[0], eig[eig.len() - 1]);
        if !(lambda_min > COND_TOL * lambda_max && lambda_min > 0.0) {
            return Err(ModelError::NotPositiveDefinite { lambda_min, lambda_max });
        }
        if !mu.iter().zip(&nu).any(|(&m, &n)| m > 0.0 && n > 0.0) {
            return Err(ModelError::NoRareCoordinate);
        }
        Ok(ModelSpec { hurst, mu, nu, sigma, mixing })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    /// True when H falls inside the Brownian exclusion band around 1/2.
    pub fn is_brownian(&self) -> bool {
        (self.hurst - 0.5).abs() <= BROWNIAN_TOL
    }

    /// Errors out if the model is Brownian; used by the analytic pipeline.
    pub fn require_non_brownian(&self, context: &'static str) -> Result<(), ModelError> {
        if self.is_brownian() {
            Err(ModelError::BrownianBoundary { context })
        } else {
            Ok(())
        }
    }

    /// The threshold vector b(t) = ν + μ·t.
    pub fn b_of_t(&self, t: f64) -> Vec<f64> {
        self.mu.iter().zip(&self.nu).map(|(&m, &n)| n + m * t).collect()
    }

    /// A mixing matrix D with D·Dᵀ = Σ: the one supplied in the config, or
    /// else the lower Cholesky factor of Σ.
    pub fn mixing_matrix(&self) -> Matrix {
        match &self.mixing {
            Some(a) => a.clone(),
            // Validation guaranteed positive definiteness.
            None => self.sigma.cholesky().expect("validated SPD").factor().clone(),
        }
    }

    /// Serializes back to the on-disk config format. Models built from a
    /// mixing matrix round-trip through `A`; others through `Sigma`.
    pub fn to_json(&self) -> String {
        let raw = RawConfig {
            hurst: self.hurst,
            mu: self.mu.clone(),
            nu: self.nu.clone(),
            mixing: self.mixing.as_ref().map(|a| a.as_slice().to_vec()),
            covariance: if self.mixing.is_some() {
                None
            } else {
                Some(self.sigma.as_slice().to_vec())
            },
        };
        serde_json::to_string_pretty(&raw).expect("plain data serializes")
    }
}

/// Parses and validates a model config from JSON text.
///
/// The config object holds `H`, `mu`, `nu`, and exactly one of `A` (mixing
/// matrix) or `Sigma` (covariance), matrices row-major as a flat array.
pub fn load_model(json: &str) -> Result<ModelSpec, ModelError> {
    let raw: RawConfig = serde_json::from_str(json)?;
    let d = raw.mu.len();
    let take = |name: &'static str, flat: Vec<f64>| -> Result<Matrix, ModelError> {
        if flat.len() != d * d {
            return Err(ModelError::MatrixShape { what: name, expected: d, got: flat.len() });
        }
        Ok(Matrix::from_row_major(d, &flat).expect("length checked"))
    };
    match (raw.mixing, raw.covariance) {
        (Some(a), None) => ModelSpec::from_mixing(raw.hurst, raw.mu, raw.nu, take("A", a)?),
        (None, Some(s)) => ModelSpec::from_covariance(raw.hurst, raw.mu, raw.nu, take("Sigma", s)?),
        _ => Err(ModelError::MatrixChoiceAmbiguous),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_json() -> &'static str {
        r#"{"H": 0.25, "mu": [1.0, -0.5], "nu": [1.0, 2.0],
            "Sigma": [1.0, 0.3, 0.3, 1.0]}"#
    }

    #[test]
    fn loads_and_validates_covariance_config() {
        let m = load_model(demo_json()).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.hurst(), 0.25);
        assert_eq!(m.sigma()[(0, 1)], 0.3);
        assert!(!m.is_brownian());
    }

    #[test]
    fn mixing_config_forms_gram_covariance() {
        let json = r#"{"H": 0.7, "mu": [1.0, 0.0], "nu": [1.0, 1.0],
                       "A": [1.0, 0.0, 0.5, 1.0]}"#;
        let m = load_model(json).unwrap();
        // Sigma = A*A^T = [[1, .5], [.5, 1.25]]
        assert!((m.sigma()[(1, 1)] - 1.25).abs() < 1e-15);
        assert!((m.sigma()[(0, 1)] - 0.5).abs() < 1e-15);
        // mixing matrix is returned as supplied
        assert_eq!(m.mixing_matrix()[(1, 0)], 0.5);
    }

    #[test]
    fn roundtrip_preserves_model() {
        let m = load_model(demo_json()).unwrap();
        let again = load_model(&m.to_json()).unwrap();
        assert_eq!(again.hurst(), m.hurst());
        assert_eq!(again.mu(), m.mu());
        assert_eq!(again.nu(), m.nu());
        assert_eq!(again.sigma().as_slice(), m.sigma().as_slice());
    }

    #[test]
    fn rejects_out_of_range_hurst() {
        let bad = demo_json().replace("0.25", "1.5");
        assert!(matches!(load_model(&bad), Err(ModelError::HurstOutOfRange(_))));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let bad = demo_json().replace("0.3, 0.3", "2.0, 2.0");
        assert!(matches!(load_model(&bad), Err(ModelError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn rejects_when_no_coordinate_is_rare() {
        // mu positive only where nu is negative and vice versa
        let json = r#"{"H": 0.25, "mu": [1.0, -0.5], "nu": [-1.0, 2.0],
                       "Sigma": [1.0, 0.0, 0.0, 1.0]}"#;
        assert!(matches!(load_model(json), Err(ModelError::NoRareCoordinate)));
    }

    #[test]
    fn rejects_ambiguous_matrix_choice() {
        let json = r#"{"H": 0.25, "mu": [1.0], "nu": [1.0],
                       "A": [1.0], "Sigma": [1.0]}"#;
        assert!(matches!(load_model(json), Err(ModelError::MatrixChoiceAmbiguous)));
        let json2 = r#"{"H": 0.25, "mu": [1.0], "nu": [1.0]}"#;
        assert!(matches!(load_model(json2), Err(ModelError::MatrixChoiceAmbiguous)));
    }

    #[test]
    fn brownian_band_is_detected() {
        let json = r#"{"H": 0.5, "mu": [1.0], "nu": [1.0], "Sigma": [1.0]}"#;
        let m = load_model(json).unwrap();
        assert!(m.is_brownian());
        assert!(m.require_non_brownian("test").is_err());
    }

    #[test]
    fn index_set_roundtrips_one_based() {
        let s = IndexSet::new(vec![2, 0]);
        assert_eq!(s.members_one_based(), vec![1, 3]);
        assert_eq!(s.to_string(), "{1,3}");
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[1,3]");
        let back: IndexSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn index_set_complement_and_gather() {
        let s = IndexSet::new(vec![1]);
        assert_eq!(s.complement(3), IndexSet::new(vec![0, 2]));
        assert_eq!(s.gather(&[10.0, 20.0, 30.0]), vec![20.0]);
    }

    #[test]
    fn asymmetric_covariance_is_symmetrized() {
        let json = r#"{"H": 0.25, "mu": [1.0, 1.0], "nu": [1.0, 1.0],
                       "Sigma": [1.0, 0.2, 0.4, 1.0]}"#;
        let m = load_model(json).unwrap();
        assert!((m.sigma()[(0, 1)] - 0.3).abs() < 1e-15);
        assert!((m.sigma()[(1, 0)] - 0.3).abs() < 1e-15);
    }
}
