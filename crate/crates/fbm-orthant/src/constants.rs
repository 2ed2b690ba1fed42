//! The curvature constant, the regime-two prefactor, and the assembled
//! asymptotic formula.
//!
//! The tail approximation has the shape `P(u) ≈ C · u^γ · e^{−rate·u^{2(1−H)}}`.
//! The pieces computed here:
//!
//! * `𝓒` — a Gaussian-curvature integral at the critical time. With no
//!   weakly essential coordinates it has the closed form
//!   `√(4π / (g″ · (2π t₀^{2H})^{|I|} · |Σ_II|))`; otherwise the Gaussian
//!   envelope `e^{−g″y²/4}` is integrated against the conditional
//!   probability `P(Y_K < a_K·y)` with `Y_K ~ N(0, Σ_KK − Σ_KI Σ_II⁻¹ Σ_IK)`
//!   and shift `a_K = t₀^{−H}(μ_K − Σ_KI Σ_II⁻¹ μ_I)`, by adaptive
//!   Gauss–Kronrod quadrature over a truncation window `[−M, M]` grown until
//!   the envelope tail is negligible.
//! * the regime-two prefactor `t₀^{2H(|I|−1)}/∏w_i · Σ_i (w_iμ_i − (H/t₀)w_ib_i)₋`
//!   (`(x)₋ = max(0, −x)`), whose sum is strictly positive away from the
//!   regime boundary.
//! * the power exponent `γ`, regime-dependent; both regime formulas
//!   coincide at `(1−|I|)/2` on the Brownian boundary `H = 1/2`.

use crate::critical::{Case, CriticalPoint};
use crate::linalg::inv_quadratic_form;
use crate::model::{ModelError, ModelSpec};
use crate::mvn::{mvn_cdf, MvnError};
use crate::pickands::PickandsEstimate;
use crate::quad::integrate;
use crate::IndexSet;
use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance for the curvature quadrature.
pub const QUAD_ABS_TOL: f64 = 1e-12;
/// Relative tolerance for the curvature quadrature.
pub const QUAD_REL_TOL: f64 = 1e-10;
/// The truncation window stops growing once the envelope tail is below this
/// fraction of the running integral.
const TAIL_FRACTION: f64 = 1e-14;
const MAX_SUBDIVISIONS: usize = 400;
const MAX_EXPANSIONS: usize = 64;

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("essential covariance block factorization failed: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("conditional probability factor failed: {0}")]
    Mvn(#[from] MvnError),
    #[error("curvature quadrature did not converge (error {error:.3e} at window half-width M = {m:.3e})")]
    QuadratureNotConverged { error: f64, m: f64 },
    #[error("curvature g'' must be positive, got {0}")]
    NonpositiveCurvature(f64),
    #[error(
        "regime-two weight sum is numerically zero ({0:.3e}): the model sits on \
         the regime boundary and the classification is unreliable"
    )]
    DegenerateCaseIiSum(f64),
    #[error("operation requires the {expected} regime but the critical point is {got}")]
    CaseMismatch { expected: Case, got: Case },
    #[error("regime one requires a Pickands-constant estimate")]
    MissingPickands,
}

/// The curvature constant together with its evaluation metadata.
#[derive(Debug, Clone, Serialize)]
pub struct CkValue {
    pub value: f64,
    /// Truncation half-width requested by the caller (`None` = untruncated).
    pub requested_m: Option<f64>,
    /// Half-width actually integrated over; infinite for the closed form.
    pub effective_m: f64,
    /// Absolute error estimate (quadrature + envelope tail; 0 for the
    /// closed form).
    pub quad_error: f64,
}

/// Every factor of the prefactor, kept for auditability.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticComponents {
    pub case: Case,
    pub essential: IndexSet,
    pub ck: CkValue,
    /// Long-run constant estimate (used only in regime one).
    pub pickands: Option<PickandsEstimate>,
    /// Regime two only: `Σ_{i∈I} max(0, −(w_iμ_i − (H/t₀) w_i b_i))`.
    pub case_ii_sum: Option<f64>,
    /// Regime two only: `t₀^{2H(|I|−1)} / ∏_{i∈I} w_i`.
    pub case_ii_scale: Option<f64>,
}

/// The assembled approximation `P(u) ≈ C·u^γ·exp(−rate·u^{2(1−H)})`.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticResult {
    /// Full prefactor C.
    pub c: f64,
    /// Power exponent γ.
    pub gamma: f64,
    /// Exponential rate, `g(t₀)/2`.
    pub rate: f64,
    pub hurst: f64,
    pub components: AsymptoticComponents,
}

impl AsymptoticResult {
    /// Evaluates the approximation at threshold level `u`.
    pub fn evaluate(&self, u: f64) -> f64 {
        self.c
            * u.powf(self.gamma)
            * (-self.rate * u.powf(2.0 * (1.0 - self.hurst))).exp()
    }
}

/// Power exponent in regime one: `−|I|(1−H) + 1/H + H − 2`.
pub fn exponent_case_i(h: f64, essential_len: usize) -> f64 {
    -(essential_len as f64) * (1.0 - h) + 1.0 / h + h - 2.0
}

/// Power exponent in regime two: `−|I|(1−H) + 1 − H`.
pub fn exponent_case_ii(h: f64, essential_len: usize) -> f64 {
    -(essential_len as f64) * (1.0 - h) + 1.0 - h
}

/// The curvature constant 𝓒.
///
/// `m`: optional truncation half-width. `None` asks for the untruncated
/// value: the closed form when there are no weakly essential coordinates,
/// otherwise a window grown automatically until the envelope tail is below
/// `1e-14` of the integral. `Some(M)` forces integration over `[−M, M]`
/// (the truncated value is nondecreasing in `M`).
pub fn c_k(
    model: &ModelSpec,
    cp: &CriticalPoint,
    m: Option<f64>,
) -> Result<CkValue, ConstantsError> {
    cp.require_case()?;
    let g_dd = cp.g_dd;
    if g_dd <= 0.0 || g_dd.is_nan() {
        return Err(ConstantsError::NonpositiveCurvature(g_dd));
    }
    let ess = &cp.essential;
    let h = model.hurst();
    let t0 = cp.t0;
    let t02h = t0.powf(2.0 * h);
    let sigma_ii = model.sigma().submatrix(ess.indices(), ess.indices());
    let chol_ii = sigma_ii.cholesky()?;
    let det_ii = chol_ii.det();
    let ess_len = ess.len() as f64;
    let norm = (2.0 * std::f64::consts::PI * t02h).powf(-ess_len / 2.0) / det_ii.sqrt();

    let weak = &cp.weakly_essential;
    if weak.is_empty() && m.is_none() {
        let value = (4.0 * std::f64::consts::PI
            / (g_dd * (2.0 * std::f64::consts::PI * t02h).powf(ess_len) * det_ii))
            .sqrt();
        return Ok(CkValue {
            value,
            requested_m: None,
            effective_m: f64::INFINITY,
            quad_error: 0.0,
        });
    }

    // conditional law of the weakly essential block given the essential one:
    // covariance Σ_KK − Σ_KI Σ_II⁻¹ Σ_IK, shift a = t₀^{−H}(μ_K − Σ_KIΣ_II⁻¹μ_I)
    let (y_cov, a_vec) = if weak.is_empty() {
        (crate::linalg::Matrix::zeros(0), Vec::new())
    } else {
        let sigma_ki = model.sigma().block(weak.indices(), ess.indices());
        let sigma_kk = model.sigma().submatrix(weak.indices(), weak.indices());
        let mu_i = ess.gather(model.mu());
        let mu_k = weak.gather(model.mu());
        let mut cov = sigma_kk;
        for p in 0..weak.len() {
            for q in 0..weak.len() {
                cov[(p, q)] -=
                    inv_quadratic_form(&chol_ii, &sigma_ki[p], &sigma_ki[q]);
            }
        }
        cov.symmetrize();
        let z = chol_ii.solve(&mu_i);
        let a: Vec<f64> = (0..weak.len())
            .map(|p| {
                let cross: f64 = sigma_ki[p].iter().zip(&z).map(|(s, zi)| s * zi).sum();
                (mu_k[p] - cross) * t0.powf(-h)
            })
            .collect();
        (cov, a)
    };

    let mut upper = vec![0.0; weak.len()];
    let mut integrand = |y: f64| -> f64 {
        let envelope = (-g_dd * y * y / 4.0).exp();
        if weak.is_empty() {
            envelope
        } else {
            for (u, a) in upper.iter_mut().zip(&a_vec) {
                *u = a * y;
            }
            // fixed internal QMC seed keeps this a pure function of y
            let p = mvn_cdf(&y_cov, &upper).map(|r| r.p).unwrap_or(f64::NAN);
            envelope * p
        }
    };

    let sd = (2.0 / g_dd).sqrt();
    let tail_bound =
        |mm: f64| 2.0 * (std::f64::consts::PI / g_dd).sqrt() * libm::erfc(mm * g_dd.sqrt() / 2.0);

    let (integral, quad_err, eff_m) = match m {
        Some(mm) => {
            let res = integrate(&mut integrand, -mm, mm, QUAD_ABS_TOL, QUAD_REL_TOL, MAX_SUBDIVISIONS);
            (res.value, res.error, mm)
        }
        None => {
            let mut mm = 8.0 * sd;
            let mut last = None;
            for _ in 0..MAX_EXPANSIONS {
                let res =
                    integrate(&mut integrand, -mm, mm, QUAD_ABS_TOL, QUAD_REL_TOL, MAX_SUBDIVISIONS);
                let tail = tail_bound(mm);
                if tail < TAIL_FRACTION * res.value.abs() {
                    last = Some((res.value, res.error, mm));
                    break;
                }
                last = Some((res.value, res.error + tail, mm));
                mm *= 1.5;
            }
            last.expect("expansion loop runs at least once")
        }
    };
    if !integral.is_finite() {
        return Err(ConstantsError::QuadratureNotConverged { error: f64::NAN, m: eff_m });
    }
    if quad_err > 1e3 * QUAD_ABS_TOL.max(QUAD_REL_TOL * integral.abs()) {
        return Err(ConstantsError::QuadratureNotConverged { error: quad_err, m: eff_m });
    }
    Ok(CkValue {
        value: norm * integral,
        requested_m: m,
        effective_m: eff_m,
        quad_error: norm * quad_err,
    })
}

/// The two factors of the regime-two prefactor:
/// (`t₀^{2H(|I|−1)}/∏w_i`, `Σ_i max(0, −(w_iμ_i − (H/t₀)w_ib_i))`).
fn case_ii_pieces(model: &ModelSpec, cp: &CriticalPoint) -> (f64, f64) {
    let h = model.hurst();
    let t0 = cp.t0;
    let w = cp.weights_essential();
    let b = cp.essential.gather(&cp.b);
    let mu = cp.essential.gather(model.mu());
    let scale =
        t0.powf(2.0 * h * (cp.essential.len() as f64 - 1.0)) / w.iter().product::<f64>();
    let mut sum = 0.0;
    for i in 0..w.len() {
        let summand = w[i] * mu[i] - (h / t0) * w[i] * b[i];
        sum += (-summand).max(0.0);
    }
    (scale, sum)
}

/// Regime-two prefactor `t₀^{2H(|I|−1)}/∏w_i · Σ_i (w_iμ_i − (H/t₀)w_ib_i)₋`.
///
/// Fails when the critical point is not in regime two, or when the sum is
/// numerically zero (which contradicts the regime-two guarantee and signals
/// a model on the regime boundary).
pub fn case_ii_prefactor(model: &ModelSpec, cp: &CriticalPoint) -> Result<f64, ConstantsError> {
    match cp.require_case()? {
        Case::Two => {}
        got => return Err(ConstantsError::CaseMismatch { expected: Case::Two, got }),
    }
    let (scale, sum) = case_ii_pieces(model, cp);
    // magnitude of the summands, for a relative zero test
    let h = model.hurst();
    let w = cp.weights_essential();
    let b = cp.essential.gather(&cp.b);
    let mu = cp.essential.gather(model.mu());
    let mag: f64 = (0..w.len())
        .map(|i| (w[i] * mu[i]).abs() + (h / cp.t0) * (w[i] * b[i]).abs())
        .sum();
    if sum <= 1e-12 * mag.max(1.0) {
        return Err(ConstantsError::DegenerateCaseIiSum(sum));
    }
    Ok(scale * sum)
}

/// Assembles the full tail approximation from the critical-point analysis,
/// the curvature constant (computed here), and — in regime one — the
/// supplied long-run constant estimate.
pub fn assemble_asymptotics(
    model: &ModelSpec,
    cp: &CriticalPoint,
    pickands: Option<&PickandsEstimate>,
) -> Result<AsymptoticResult, ConstantsError> {
    let case = cp.require_case()?;
    let ck = c_k(model, cp, None)?;
    let h = model.hurst();
    let (c, gamma, case_ii_sum, case_ii_scale) = match case {
        Case::One => {
            let p = pickands.ok_or(ConstantsError::MissingPickands)?;
            (p.value * ck.value, exponent_case_i(h, cp.essential.len()), None, None)
        }
        Case::Two => {
            let prefactor = case_ii_prefactor(model, cp)?;
            let (scale, sum) = case_ii_pieces(model, cp);
            (
                prefactor * ck.value,
                exponent_case_ii(h, cp.essential.len()),
                Some(sum),
                Some(scale),
            )
        }
    };
    Ok(AsymptoticResult {
        c,
        gamma,
        rate: cp.g_value / 2.0,
        hurst: h,
        components: AsymptoticComponents {
            case,
            essential: cp.essential.clone(),
            ck,
            pickands: pickands.cloned(),
            case_ii_sum,
            case_ii_scale,
        },
    })
}

#[cfg(test)]
mod tests {
    // reference values keep every digit of the high-precision oracle run
    #![allow(clippy::excessive_precision)]

    use super::*;
    use crate::critical::find_t0;
    use crate::linalg::Matrix;
    use crate::model::ModelSpec;

    fn scalar_quarter() -> (ModelSpec, CriticalPoint) {
        let model =
            ModelSpec::from_covariance(0.25, vec![1.0], vec![1.0], Matrix::identity(1))
                .unwrap();
        let cp = find_t0(&model).unwrap();
        (model, cp)
    }

    #[test]
    fn scalar_closed_form_matches_frozen_value() {
        let (model, cp) = scalar_quarter();
        let ck = c_k(&model, &cp, None).unwrap();
        // √(4π/(g″·2π·√(1/3))) = 1/√3 for this model
        assert!((ck.value - 0.57735026918962576451).abs() < 1e-13);
        assert!(ck.effective_m.is_infinite());
        assert_eq!(ck.quad_error, 0.0);
    }

    #[test]
    fn closed_form_agrees_with_explicit_quadrature() {
        let (model, cp) = scalar_quarter();
        let closed = c_k(&model, &cp, None).unwrap();
        let sd = (2.0 / cp.g_dd).sqrt();
        let quad = c_k(&model, &cp, Some(9.0 * sd)).unwrap();
        assert!(
            (quad.value - closed.value).abs() < 1e-11 * closed.value,
            "quadrature {} vs closed form {}",
            quad.value,
            closed.value
        );
        assert_eq!(quad.requested_m, Some(9.0 * sd));
    }

    #[test]
    fn truncated_values_monotone_and_stabilizing() {
        let (model, cp) = scalar_quarter();
        let sd = (2.0 / cp.g_dd).sqrt();
        let values: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0, 10.0]
            .iter()
            .map(|k| c_k(&model, &cp, Some(k * sd)).unwrap().value)
            .collect();
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "truncated value must grow with the window");
        }
        let last_two = &values[values.len() - 2..];
        assert!(
            (last_two[1] - last_two[0]).abs() <= 1e-12 * last_two[0],
            "wide-window values must agree to near machine precision"
        );
    }

    #[test]
    fn single_weakly_essential_coordinate_halves_the_closed_form() {
        // d=2, Σ=I, H=1/4, μ=(1,−3), ν=(1,1): at t₀=1/3 the second
        // coordinate touches the boundary with zero weight (K = {2}), and
        // the odd part of Φ integrates to zero against the even envelope,
        // leaving exactly half the K=∅ value — frozen independently.
        let model = ModelSpec::from_covariance(
            0.25,
            vec![1.0, -3.0],
            vec![1.0, 1.0],
            Matrix::identity(2),
        )
        .unwrap();
        let cp = find_t0(&model).unwrap();
        assert_eq!(cp.essential.indices(), &[0]);
        assert_eq!(cp.weakly_essential.indices(), &[1]);
        assert!((cp.t0 - 1.0 / 3.0).abs() < 1e-10);
        let ck = c_k(&model, &cp, None).unwrap();
        assert!(
            (ck.value - 0.28867513459481288225).abs() < 1e-11,
            "got {}",
            ck.value
        );
        assert!(ck.quad_error < 1e-10);
    }

    #[test]
    fn two_weakly_essential_coordinates_match_frozen_quadrature() {
        // d=3, Σ=I, H=1/4, μ=(1,−3,−6), ν=(1,1,2): K = {2,3}; the frozen
        // value comes from 40-digit quadrature of
        // ∫ e^{−g″y²/4} Φ(−3·3^{1/4} y) Φ(−6·3^{1/4} y) dy / √(2π t₀^{1/2})
        let model = ModelSpec::from_covariance(
            0.25,
            vec![1.0, -3.0, -6.0],
            vec![1.0, 1.0, 2.0],
            Matrix::identity(3),
        )
        .unwrap();
        let cp = find_t0(&model).unwrap();
        assert_eq!(cp.essential.indices(), &[0]);
        assert_eq!(cp.weakly_essential.indices(), &[1, 2]);
        let ck = c_k(&model, &cp, None).unwrap();
        assert!(
            (ck.value - 0.23464466360830982872).abs() < 5e-11,
            "got {}",
            ck.value
        );
    }

    #[test]
    fn exponents_meet_at_the_brownian_boundary() {
        for k in 1..=6usize {
            let a = exponent_case_i(0.5, k);
            let b = exponent_case_ii(0.5, k);
            let expected = (1.0 - k as f64) / 2.0;
            assert_eq!(a, expected, "regime one exponent at H = 1/2, |I| = {k}");
            assert_eq!(b, expected, "regime two exponent at H = 1/2, |I| = {k}");
        }
        assert!((exponent_case_i(0.25, 1) - 1.5).abs() < 1e-15);
        assert!((exponent_case_ii(0.75, 2) - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn case_ii_prefactor_rejects_wrong_regime_and_degenerate_sums() {
        // H < 1/2 puts every model in regime one
        let (model, cp) = scalar_quarter();
        assert!(matches!(
            case_ii_prefactor(&model, &cp),
            Err(ConstantsError::CaseMismatch { .. })
        ));

        // a d=1 model with H > 1/2 sits exactly on the flat boundary:
        // forcing the regime-two tag must trip the degenerate-sum error
        let model = ModelSpec::from_covariance(0.75, vec![1.0], vec![1.0], Matrix::identity(1))
            .unwrap();
        let mut cp = find_t0(&model).unwrap();
        assert_eq!(cp.case, Some(Case::One), "scalar models are always regime one");
        cp.case = Some(Case::Two);
        assert!(matches!(
            case_ii_prefactor(&model, &cp),
            Err(ConstantsError::DegenerateCaseIiSum(_))
        ));

        // Brownian boundary: no regime at all
        let model = ModelSpec::from_covariance(0.5, vec![1.0], vec![1.0], Matrix::identity(1))
            .unwrap();
        let cp = find_t0(&model).unwrap();
        assert!(matches!(case_ii_prefactor(&model, &cp), Err(ConstantsError::Model(_))));
        assert!(matches!(c_k(&model, &cp, None), Err(ConstantsError::Model(_))));
    }

    fn dummy_pickands(value: f64) -> PickandsEstimate {
        PickandsEstimate {
            value,
            stderr: 0.01,
            table: Vec::new(),
            delta: 0.01,
            delta_grid: vec![0.01],
            n_samples: 0,
            seed: 0,
            converged: true,
            note: None,
        }
    }

    #[test]
    fn assembly_regime_one_multiplies_pickands_by_curvature() {
        let (model, cp) = scalar_quarter();
        assert!(matches!(
            assemble_asymptotics(&model, &cp, None),
            Err(ConstantsError::MissingPickands)
        ));
        let p = dummy_pickands(2.0);
        let res = assemble_asymptotics(&model, &cp, Some(&p)).unwrap();
        assert!((res.c - 2.0 * 0.57735026918962576451).abs() < 1e-12);
        assert!((res.gamma - 1.5).abs() < 1e-15);
        assert!((res.rate - cp.g_value / 2.0).abs() < 1e-15);
        let u = 3.0f64;
        let expected = res.c * u.powf(1.5) * (-res.rate * u.powf(1.5)).exp();
        assert!((res.evaluate(u) - expected).abs() < 1e-15 * expected);
        assert!(res.components.pickands.is_some());
        assert!(res.components.case_ii_sum.is_none());
    }

    #[test]
    fn assembly_regime_two_uses_the_closed_prefactor() {
        // d=2, Σ=I, H=3/4, ν=(1,1), μ=(2,1): regime two with one negative
        // drift-adjusted weight component
        let model = ModelSpec::from_covariance(
            0.75,
            vec![2.0, 1.0],
            vec![1.0, 1.0],
            Matrix::identity(2),
        )
        .unwrap();
        let cp = find_t0(&model).unwrap();
        assert_eq!(cp.case, Some(Case::Two));
        assert_eq!(cp.essential.len(), 2);
        let res = assemble_asymptotics(&model, &cp, None).unwrap();
        let pref = case_ii_prefactor(&model, &cp).unwrap();
        let ck = c_k(&model, &cp, None).unwrap();
        assert!(pref > 0.0);
        assert!((res.c - pref * ck.value).abs() < 1e-14 * res.c);
        assert!((res.gamma - (-0.25)).abs() < 1e-15);
        let sum = res.components.case_ii_sum.unwrap();
        let scale = res.components.case_ii_scale.unwrap();
        assert!(sum > 0.0 && scale > 0.0);
        assert!((scale * sum - pref).abs() < 1e-14 * pref);
        // exactly one ζ′ component is negative here: the sum equals its
        // magnitude times the matching weight and t₀-power
        let negatives: Vec<f64> = cp
            .zeta_prime_essential
            .iter()
            .zip(cp.weights_essential())
            .filter(|(z, _)| **z < 0.0)
            .map(|(z, w)| -z * w * cp.t0.powf(model.hurst()))
            .collect();
        assert_eq!(negatives.len(), 1);
        assert!((negatives[0] - sum).abs() < 1e-10 * sum);
    }
}
