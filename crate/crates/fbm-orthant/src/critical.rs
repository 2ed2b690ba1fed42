//! Critical time location and coordinate classification.
//!
//! The exponential rate of the entry probability is governed by
//! `g(t) = inf_{x ≥ ν+μt} xᵀΣ⁻¹x / t^{2H}`, a C¹ function of t with a
//! unique minimizer `t₀ > 0`. On the piece where the essential set I is
//! constant, `g = g_I` has the closed form
//!
//! ```text
//! g_I(t) = (q_μμ t² + 2 q_νμ t + q_νν) / t^{2H},
//! q_μμ = μ_IᵀΣ_II⁻¹μ_I,  q_νμ = ν_IᵀΣ_II⁻¹μ_I,  q_νν = ν_IᵀΣ_II⁻¹ν_I,
//! ```
//!
//! whose stationary point solves a quadratic in t. [`find_t0`] alternates
//! between certifying I via the quadratic program and jumping to that
//! closed-form root, with a golden-section fallback, then certifies local
//! minimality. At `t₀` the coordinates split into the essential set I, the
//! weakly essential set K (constraint met with equality but zero dual
//! weight), and the negligible set J; the asymptotic regime is decided by
//! whether the normalized boundary curve `ζ_i(t) = (ν_i + μ_i t)/t^H` is
//! stationary at `t₀` for all essential coordinates.

use crate::linalg::inv_quadratic_form;
use crate::model::{IndexSet, ModelError, ModelSpec};
use crate::qp::{self, QpError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative convergence tolerance for the critical time iteration.
pub const T_TOL: f64 = 1e-12;
/// Base tolerance (absolute + relative mix) for the K/J classification.
pub const CLASS_TOL: f64 = 1e-9;
/// Relative tolerance for the regime-dichotomy equality test.
pub const CASE_TOL: f64 = 1e-7;
/// Iteration cap before falling back to golden-section minimization.
const MAX_ALTERNATIONS: usize = 64;
/// Bracket expansion limits for the golden-section fallback.
const BRACKET_LO: f64 = 1e-12;
const BRACKET_HI: f64 = 1e12;

#[derive(Debug, Error)]
pub enum CriticalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("quadratic program failed at t = {t}: {source}")]
    Qp { t: f64, source: QpError },
    #[error("golden-section bracket expansion exhausted [{BRACKET_LO:e}, {BRACKET_HI:e}]; the model is pathological")]
    BracketExhausted,
    #[error("local-minimality certification failed at t0 = {t0}: g({side}) = {g_side} vs g(t0) = {g_t0}")]
    NotALocalMinimum { t0: f64, side: f64, g_side: f64, g_t0: f64 },
}

/// The two asymptotic regimes. Regime one applies when the boundary curve is
/// flat (to first order) at the critical time for every essential
/// coordinate — always true for H < 1/2 — and brings in the generalized
/// Pickands constant. Regime two applies otherwise and has a closed-form
/// prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Case::One => write!(f, "I"),
            Case::Two => write!(f, "II"),
        }
    }
}

impl std::str::FromStr for Case {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" | "one" => Ok(Case::One),
            "ii" | "2" | "two" => Ok(Case::Two),
            other => Err(format!("unknown case '{other}' (expected 'i' or 'ii')")),
        }
    }
}

/// Everything the asymptotic formula needs about the critical time.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    /// The unique minimizer of g.
    pub t0: f64,
    /// Essential coordinates (constraint binds with positive dual weight).
    pub essential: IndexSet,
    /// Weakly essential coordinates (constraint met with equality, zero weight).
    pub weakly_essential: IndexSet,
    /// Negligible coordinates (constraint strictly slack at the minimizer).
    pub negligible: IndexSet,
    /// b = ν + μ·t₀.
    pub b: Vec<f64>,
    /// Dual weights w = Σ⁻¹b̃ at t₀ (zero off the essential set).
    pub weights: Vec<f64>,
    /// g(t₀), twice the exponential rate.
    pub g_value: f64,
    /// Second derivative of g at t₀ using the essential set certified at t₀
    /// itself; this is the curvature entering the quadrature constant.
    pub g_dd: f64,
    /// One-sided second derivatives (can differ when t₀ is a set-switch point).
    pub g_dd_plus: f64,
    pub g_dd_minus: f64,
    /// True when the essential sets just left and just right of t₀ differ.
    pub switch_point: bool,
    /// True when the quadratic program certificate at t₀ sat on a tolerance
    /// boundary.
    pub qp_boundary: bool,
    /// Asymptotic regime; `None` exactly when H = 1/2 (Brownian boundary,
    /// outside the analytic dichotomy).
    pub case: Option<Case>,
    /// ζ′_i(t₀) for i in the essential set (same order as `essential`).
    pub zeta_prime_essential: Vec<f64>,
}

impl CriticalPoint {
    /// Essential-set dual weights, in essential-index order.
    pub fn weights_essential(&self) -> Vec<f64> {
        self.essential.gather(&self.weights)
    }

    /// The regime, or an error for the Brownian boundary.
    pub fn require_case(&self) -> Result<Case, ModelError> {
        self.case.ok_or(ModelError::BrownianBoundary { context: "regime detection" })
    }
}

/// g(t) via the quadratic program, together with the certified essential set.
pub fn g_of_t(model: &ModelSpec, t: f64) -> Result<(f64, IndexSet), CriticalError> {
    assert!(t > 0.0, "g(t) requires t > 0");
    let b = model.b_of_t(t);
    let sol = qp::solve_qp(model.sigma(), &b).map_err(|source| CriticalError::Qp { t, source })?;
    Ok((sol.value / t.powf(2.0 * model.hurst()), sol.essential))
}

/// The three quadratic forms q_μμ, q_νμ, q_νν restricted to `set`.
pub fn quadratic_forms(model: &ModelSpec, set: &IndexSet) -> (f64, f64, f64) {
    let idx = set.indices();
    let chol = model
        .sigma()
        .submatrix(idx, idx)
        .cholesky()
        .expect("principal submatrix of validated SPD");
    let mu = set.gather(model.mu());
    let nu = set.gather(model.nu());
    (
        inv_quadratic_form(&chol, &mu, &mu),
        inv_quadratic_form(&chol, &nu, &mu),
        inv_quadratic_form(&chol, &nu, &nu),
    )
}

/// Closed forms for (g_I, g′_I, g″_I) at a general t > 0.
pub fn g_restricted_derivatives(model: &ModelSpec, set: &IndexSet, t: f64) -> (f64, f64, f64) {
    let (qmm, qnm, qnn) = quadratic_forms(model, set);
    let h = model.hurst();
    let g = (qmm * t * t + 2.0 * qnm * t + qnn) / t.powf(2.0 * h);
    let num = 2.0 * qmm * (1.0 - h) * t * t + 2.0 * (1.0 - 2.0 * h) * qnm * t - 2.0 * h * qnn;
    let g_d = num / t.powf(2.0 * h + 1.0);
    let num_d = 4.0 * qmm * (1.0 - h) * t + 2.0 * (1.0 - 2.0 * h) * qnm;
    let g_dd = (num_d * t - (2.0 * h + 1.0) * num) / t.powf(2.0 * h + 2.0);
    (g, g_d, g_dd)
}

/// The stationary point of g_I in closed form: the positive root of
/// `2q_μμ(1−H)t² + 2(1−2H)q_νμ t − 2H q_νν = 0`. `None` when the branch has
/// no positive stationary point (degenerate restricted data).
pub fn stationary_time(model: &ModelSpec, set: &IndexSet) -> Option<f64> {
    let (qmm, qnm, qnn) = quadratic_forms(model, set);
    let h = model.hurst();
    let denom = 4.0 * qmm * (1.0 - h);
    if denom <= 0.0 || !denom.is_finite() {
        return None;
    }
    let disc = 4.0 * qnm * qnm * (1.0 - 2.0 * h).powi(2) + 16.0 * h * (1.0 - h) * qnn * qmm;
    if disc < 0.0 {
        return None;
    }
    let t = (disc.sqrt() - 2.0 * (1.0 - 2.0 * h) * qnm) / denom;
    (t.is_finite() && t > 0.0).then_some(t)
}

/// Derivative of the normalized boundary curve ζ_i(t) = (ν_i + μ_i t)/t^H.
pub fn zeta_prime(model: &ModelSpec, i: usize, t: f64) -> f64 {
    let h = model.hurst();
    let (mu, nu) = (model.mu()[i], model.nu()[i]);
    (mu * t.powf(h) - h * t.powf(h - 1.0) * (nu + mu * t)) / t.powf(2.0 * h)
}

/// Classifies the complement of the essential set at `t0` into weakly
/// essential (projection meets the constraint) and negligible (strict slack).
pub fn classify_indices(
    model: &ModelSpec,
    t0: f64,
) -> Result<(IndexSet, IndexSet, IndexSet), CriticalError> {
    let b = model.b_of_t(t0);
    let sol = qp::solve_qp(model.sigma(), &b)
        .map_err(|source| CriticalError::Qp { t: t0, source })?;
    let mut weak = Vec::new();
    let mut negligible = Vec::new();
    for &j in sol.essential.complement(model.dim()).indices() {
        let gap = sol.minimizer[j] - b[j];
        let tol = CLASS_TOL * (1.0 + b[j].abs() + sol.minimizer[j].abs());
        if gap.abs() <= tol {
            weak.push(j);
        } else {
            negligible.push(j);
        }
    }
    Ok((sol.essential, IndexSet::new(weak), IndexSet::new(negligible)))
}

/// Decides the asymptotic regime for a non-Brownian model.
pub fn detect_case(model: &ModelSpec, cp: &CriticalPoint) -> Result<Case, ModelError> {
    model.require_non_brownian("regime detection")?;
    let h = model.hurst();
    if h < 0.5 {
        return Ok(Case::One);
    }
    let flat = cp.essential.indices().iter().all(|&i| {
        let lhs = h * model.nu()[i];
        let rhs = (1.0 - h) * cp.t0 * model.mu()[i];
        (lhs - rhs).abs() <= CASE_TOL * (lhs.abs() + rhs.abs() + 1.0)
    });
    Ok(if flat { Case::One } else { Case::Two })
}

/// Locates the critical time, classifies coordinates, and records curvature
/// and regime data.
pub fn find_t0(model: &ModelSpec) -> Result<CriticalPoint, CriticalError> {
    let t_init = initial_time(model);
    let t0 = match alternate(model, t_init) {
        Some(t) => t,
        None => {
            let coarse = golden_section(model, t_init)?;
            polish(model, coarse)
        }
    };
    certify_minimum(model, t0)?;
    build_critical_point(model, t0)
}

/// Median of the scalar critical times over coordinates that are
/// individually rare (μ_i > 0 and ν_i > 0); the model validator guarantees
/// at least one such coordinate.
fn initial_time(model: &ModelSpec) -> f64 {
    let h = model.hurst();
    let mut times: Vec<f64> = model
        .mu()
        .iter()
        .zip(model.nu())
        .filter(|(&m, &n)| m > 0.0 && n > 0.0)
        .map(|(&m, &n)| h * n / ((1.0 - h) * m))
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = times.len();
    if k % 2 == 1 {
        times[k / 2]
    } else {
        0.5 * (times[k / 2 - 1] + times[k / 2])
    }
}

/// Alternating scheme: certify the essential set at t, jump to the
/// closed-form stationary point of that branch, repeat until both settle.
fn alternate(model: &ModelSpec, t_init: f64) -> Option<f64> {
    let mut t = t_init;
    let mut prev_set: Option<IndexSet> = None;
    for _ in 0..MAX_ALTERNATIONS {
        let b = model.b_of_t(t);
        let set = qp::solve_qp(model.sigma(), &b).ok()?.essential;
        let t_next = stationary_time(model, &set)?;
        let settled = prev_set.as_ref() == Some(&set) && (t_next - t).abs() <= T_TOL * t.abs();
        t = t_next;
        if settled {
            return Some(t);
        }
        prev_set = Some(set);
    }
    None
}

/// Golden-section comparisons can only localize a smooth minimum to ~√ε
/// relative precision. When the certified essential set is stable at the
/// coarse minimizer and the closed-form stationary point of that branch is
/// nearby, snap to it to recover full precision. At a set-switch minimizer
/// no such root exists nearby and the coarse value is kept.
fn polish(model: &ModelSpec, t_coarse: f64) -> f64 {
    let set = match qp::solve_qp(model.sigma(), &model.b_of_t(t_coarse)) {
        Ok(sol) => sol.essential,
        Err(_) => return t_coarse,
    };
    match stationary_time(model, &set) {
        Some(root) if (root - t_coarse).abs() <= 1e-6 * t_coarse => {
            let same_set = qp::solve_qp(model.sigma(), &model.b_of_t(root))
                .map(|s| s.essential == set)
                .unwrap_or(false);
            if same_set {
                root
            } else {
                t_coarse
            }
        }
        _ => t_coarse,
    }
}

fn golden_section(model: &ModelSpec, t_init: f64) -> Result<f64, CriticalError> {
    let g = |t: f64| g_of_t(model, t).map(|(v, _)| v);
    // expand a bracket [lo, hi] around t_init until g increases on both ends
    let mut lo = (t_init / 2.0).max(BRACKET_LO);
    let mut hi = (t_init * 2.0).min(BRACKET_HI);
    let g_init = g(t_init)?;
    let mut g_lo = g(lo)?;
    let mut g_hi = g(hi)?;
    while g_lo <= g_init {
        if lo <= BRACKET_LO {
            return Err(CriticalError::BracketExhausted);
        }
        lo = (lo / 4.0).max(BRACKET_LO);
        g_lo = g(lo)?;
    }
    while g_hi <= g_init {
        if hi >= BRACKET_HI {
            return Err(CriticalError::BracketExhausted);
        }
        hi = (hi * 4.0).min(BRACKET_HI);
        g_hi = g(hi)?;
    }
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut gc = g(c)?;
    let mut gd = g(d)?;
    while (b - a) > T_TOL * b.max(1e-300) {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Verifies that g genuinely increases on both sides of the candidate.
/// The probe step is far enough from t₀ that curvature dominates floating
/// point noise (a relative step of 1e-5 produces a g-increase ~1e-10·g).
fn certify_minimum(model: &ModelSpec, t0: f64) -> Result<(), CriticalError> {
    let h_rel = (10.0 * T_TOL).max(1e-5);
    let g_t0 = g_of_t(model, t0)?.0;
    for side in [t0 * (1.0 - h_rel), t0 * (1.0 + h_rel)] {
        let g_side = g_of_t(model, side)?.0;
        if g_side <= g_t0 {
            return Err(CriticalError::NotALocalMinimum { t0, side, g_side, g_t0 });
        }
    }
    Ok(())
}

fn build_critical_point(model: &ModelSpec, t0: f64) -> Result<CriticalPoint, CriticalError> {
    let b = model.b_of_t(t0);
    let sol = qp::solve_qp(model.sigma(), &b)
        .map_err(|source| CriticalError::Qp { t: t0, source })?;
    let (essential, weak, negligible) = classify_indices(model, t0)?;
    let g_value = sol.value / t0.powf(2.0 * model.hurst());
    let g_dd = g_restricted_derivatives(model, &essential, t0).2;

    // one-sided curvatures from the essential sets just left/right of t0
    let probe = 1e-7 * t0;
    let set_minus = qp::solve_qp(model.sigma(), &model.b_of_t(t0 - probe))
        .map_err(|source| CriticalError::Qp { t: t0 - probe, source })?
        .essential;
    let set_plus = qp::solve_qp(model.sigma(), &model.b_of_t(t0 + probe))
        .map_err(|source| CriticalError::Qp { t: t0 + probe, source })?
        .essential;
    let g_dd_minus = g_restricted_derivatives(model, &set_minus, t0).2;
    let g_dd_plus = g_restricted_derivatives(model, &set_plus, t0).2;

    let zeta_prime_essential =
        essential.indices().iter().map(|&i| zeta_prime(model, i, t0)).collect();

    let mut cp = CriticalPoint {
        t0,
        switch_point: set_minus != set_plus,
        qp_boundary: sol.boundary,
        essential,
        weakly_essential: weak,
        negligible,
        b,
        weights: sol.weights,
        g_value,
        g_dd,
        g_dd_plus,
        g_dd_minus,
        case: None,
        zeta_prime_essential,
    };
    if !model.is_brownian() {
        cp.case = Some(detect_case(model, &cp).expect("non-Brownian by check"));
    }
    Ok(cp)
}

#[cfg(test)]
mod tests {
    // reference values keep every digit of the high-precision oracle run
    #![allow(clippy::excessive_precision)]

    use super::*;
    use crate::linalg::Matrix;
    use crate::model::ModelSpec;
    use crate::testutil::random_spd;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn scalar_model(h: f64, mu: f64, nu: f64) -> ModelSpec {
        ModelSpec::from_covariance(h, vec![mu], vec![nu], Matrix::identity(1)).unwrap()
    }

    fn symmetric_model(h: f64, d: usize) -> ModelSpec {
        ModelSpec::from_covariance(h, vec![1.0; d], vec![1.0; d], Matrix::identity(d)).unwrap()
    }

    #[test]
    fn scalar_g_values() {
        let m = scalar_model(0.25, 1.0, 1.0);
        let (g1, set) = g_of_t(&m, 1.0).unwrap();
        assert!((g1 - 4.0).abs() < 1e-12);
        assert_eq!(set, IndexSet::new(vec![0]));
        let (g13, _) = g_of_t(&m, 1.0 / 3.0).unwrap();
        // (4/3)² · 3^{1/2}
        let expected = (4.0f64 / 3.0).powi(2) * 3.0f64.sqrt();
        assert!((g13 - expected).abs() < 1e-12, "{g13} vs {expected}");
        assert!((expected - 3.0792014356780040774).abs() < 1e-15);
    }

    #[test]
    fn symmetric_model_doubles_scalar_g() {
        let m1 = scalar_model(0.3, 1.0, 1.0);
        let m2 = symmetric_model(0.3, 2);
        for &t in &[0.2, 0.7, 1.9] {
            let (a, _) = g_of_t(&m1, t).unwrap();
            let (b, set) = g_of_t(&m2, t).unwrap();
            assert!((b - 2.0 * a).abs() < 1e-12);
            assert_eq!(set.len(), 2);
        }
    }

    #[test]
    fn scalar_t0_closed_form() {
        for &(h, mu, nu) in &[(0.25, 1.0, 1.0), (0.75, 2.0, 0.5), (0.4, 0.3, 2.2)] {
            let m = scalar_model(h, mu, nu);
            let cp = find_t0(&m).unwrap();
            let expected = h * nu / ((1.0 - h) * mu);
            assert!(
                (cp.t0 - expected).abs() <= 1e-12 * expected,
                "H={h}: {} vs {expected}",
                cp.t0
            );
            assert_eq!(cp.essential.len(), 1);
            assert!(cp.weakly_essential.is_empty());
            assert!(cp.negligible.is_empty());
            assert!(cp.g_dd > 0.0 && cp.g_dd_plus > 0.0 && cp.g_dd_minus > 0.0);
            assert!(!cp.switch_point);
        }
    }

    #[test]
    fn scalar_curvature_closed_form() {
        // H=1/4, μ=ν=1: g″(t₀) = 2·3^{3/2}
        let m = scalar_model(0.25, 1.0, 1.0);
        let cp = find_t0(&m).unwrap();
        let expected = 2.0 * 3.0f64.powf(1.5);
        assert!((cp.g_dd - expected).abs() < 1e-10 * expected, "{}", cp.g_dd);
    }

    #[test]
    fn symmetric_model_keeps_scalar_t0() {
        for d in [2, 4] {
            let m = symmetric_model(0.7, d);
            let cp = find_t0(&m).unwrap();
            let expected = 0.7 / 0.3;
            assert!((cp.t0 - expected).abs() < 1e-12 * expected);
            assert_eq!(cp.essential.len(), d);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let h: f64 = rng.gen_range(0.1..0.9);
            let d = rng.gen_range(1..=4);
            let sigma = random_spd(&mut rng, d);
            let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let mut nu: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let k = rng.gen_range(0..d);
            nu[k] = nu[k].abs() + 0.1;
            let mu = {
                let mut m = mu;
                m[k] = m[k].abs() + 0.1;
                m
            };
            let model = match ModelSpec::from_covariance(h, mu, nu, sigma) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let set = IndexSet::full(d);
            let t: f64 = rng.gen_range(0.3..3.0);
            let fd_h = 1e-5;
            let (g, g_d, g_dd) = g_restricted_derivatives(&model, &set, t);
            let (gp, _, _) = g_restricted_derivatives(&model, &set, t + fd_h);
            let (gm, _, _) = g_restricted_derivatives(&model, &set, t - fd_h);
            let fd1 = (gp - gm) / (2.0 * fd_h);
            let fd2 = (gp - 2.0 * g + gm) / (fd_h * fd_h);
            assert!(
                (g_d - fd1).abs() <= 1e-5 * g_d.abs() + 1e-6,
                "g' {g_d} vs fd {fd1} (H={h}, t={t})"
            );
            assert!(
                (g_dd - fd2).abs() <= 1e-4 * g_dd.abs() + 1e-3,
                "g'' {g_dd} vs fd {fd2} (H={h}, t={t})"
            );
        }
    }

    #[test]
    fn minimality_over_log_grid() {
        let m = ModelSpec::from_covariance(
            0.35,
            vec![1.0, 0.4],
            vec![0.8, 1.5],
            Matrix::from_row_major(2, &[1.0, 0.4, 0.4, 1.0]).unwrap(),
        )
        .unwrap();
        let cp = find_t0(&m).unwrap();
        for k in 0..200 {
            let t = cp.t0 * 100.0f64.powf((k as f64 / 99.5) - 1.0);
            let (g, _) = g_of_t(&m, t).unwrap();
            assert!(g >= cp.g_value - 1e-9 * cp.g_value, "g({t}) = {g} < {}", cp.g_value);
        }
    }

    #[test]
    fn homogeneity_in_threshold_scale() {
        let base = ModelSpec::from_covariance(
            0.6,
            vec![1.0, -0.3],
            vec![0.5, 1.0],
            Matrix::from_row_major(2, &[1.0, 0.2, 0.2, 1.0]).unwrap(),
        )
        .unwrap();
        let c = 3.7;
        let scaled = ModelSpec::from_covariance(
            0.6,
            base.mu().iter().map(|x| c * x).collect(),
            base.nu().iter().map(|x| c * x).collect(),
            base.sigma().clone(),
        )
        .unwrap();
        let cp0 = find_t0(&base).unwrap();
        let cp1 = find_t0(&scaled).unwrap();
        assert!((cp0.t0 - cp1.t0).abs() < 1e-9 * cp0.t0);
        assert!((cp1.g_value - c * c * cp0.g_value).abs() < 1e-8 * cp1.g_value);
        assert_eq!(cp0.essential, cp1.essential);
        assert_eq!(cp0.case, cp1.case);
    }

    #[test]
    fn scalar_models_are_always_regime_one() {
        for &h in &[0.2, 0.45, 0.55, 0.75, 0.9] {
            let m = scalar_model(h, 1.3, 0.7);
            let cp = find_t0(&m).unwrap();
            assert_eq!(cp.case, Some(Case::One), "H = {h}");
            // equivalent characterization: ζ′ vanishes at t₀
            assert!(cp.zeta_prime_essential[0].abs() < 1e-9);
        }
    }

    #[test]
    fn manufactured_weakly_essential_coordinate() {
        // d=2 diagonal; choose μ₂ = −ν₂/t₀ so b₂(t₀) = 0 exactly
        let h = 0.25f64;
        let t0 = h / (1.0 - h);
        let m = ModelSpec::from_covariance(
            h,
            vec![1.0, -1.0 / t0],
            vec![1.0, 1.0],
            Matrix::identity(2),
        )
        .unwrap();
        let cp = find_t0(&m).unwrap();
        assert!((cp.t0 - t0).abs() < 1e-10 * t0);
        assert_eq!(cp.essential, IndexSet::new(vec![0]));
        assert_eq!(cp.weakly_essential, IndexSet::new(vec![1]));
        assert!(cp.negligible.is_empty());
    }

    #[test]
    fn case_detection_brownian_rejected() {
        let m = scalar_model(0.5, 1.0, 1.0);
        let cp = find_t0(&m).unwrap();
        assert_eq!(cp.case, None);
        assert!(cp.require_case().is_err());
        // t0 itself is still located correctly
        assert!((cp.t0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_agrees_with_alternation() {
        let m = ModelSpec::from_covariance(
            0.3,
            vec![0.9, 0.2],
            vec![1.1, 0.4],
            Matrix::from_row_major(2, &[1.0, -0.3, -0.3, 1.0]).unwrap(),
        )
        .unwrap();
        let cp = find_t0(&m).unwrap();
        let gs = polish(&m, golden_section(&m, initial_time(&m)).unwrap());
        assert!((cp.t0 - gs).abs() <= 1e-10 * cp.t0, "{} vs {gs}", cp.t0);
    }
}
