//! Monte Carlo estimation of the generalized Pickands constant.
//!
//! The long-run clustering constant entering the sharp asymptotics is
//! `𝓗 = lim_{T→∞} 𝓗(T)/T`, where
//!
//! ```text
//! 𝓗(T) = E ∫ exp(w_Iᵀx / t₀^{2H}) · 1{∃ t ∈ [0,T]: Y(t) > x} dx,
//! Y(t)  = W_I(t) − b_I · t^{2H} / (2 t₀^{2H}),
//! ```
//!
//! with `W_I` the essential block of the correlated fBm (covariance
//! `Σ_II·r(t,s)`), `b = ν + μt₀` and `w_I = Σ_II⁻¹ b_I` the certified dual
//! weights. Time is discretized to `{δ, 2δ, …, T}` (the origin is excluded:
//! both lattices converge to the continuous supremum as `δ → 0`, and the
//! origin-free one makes the single-point case `T = δ` exactly unbiased for
//! the small-horizon limit, because the tilt balance
//! `cᵀm(T) + ½cᵀ(T^{2H}Σ_II)c = 0` holds identically). The x-integral over
//! the random region `S = {x : ∃ grid t, x < Y(t)}` is done exactly per path
//! in dimensions 1 (max formula) and 2 (staircase over the Pareto frontier),
//! and by an inner importance-sampled Monte Carlo in dimension ≥ 3.
//!
//! All T values in the output table are evaluated on prefixes of a single
//! simulation at the largest T, so table entries share randomness: the
//! un-normalized `𝓗(T)` column is nondecreasing path by path, and
//! successive `𝓗(T)/T` differences have much smaller variance than the
//! entries themselves. Coarser grid steps are evaluated by subsampling the
//! same paths, giving a discretization-sensitivity column under common
//! randomness.

use crate::critical::CriticalPoint;
use crate::fbm::{FbmError, FbmSampler};
use crate::linalg::{pairwise_sum, LinalgError};
use crate::model::ModelSpec;
use crate::rng::{batch_count, batch_range, batch_rng, StreamDomain};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Inner importance-sampling draws per path for the dimension ≥ 3 region
/// integral. Region-volume noise is small next to path-to-path variance,
/// so a modest count suffices.
pub const N_INNER: usize = 64;

/// Relative slack when checking that grid steps divide horizon values.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PickandsError {
    #[error("horizon grid must be positive and strictly increasing")]
    BadHorizonGrid,
    #[error("step grid must be positive and strictly decreasing, each entry an integer multiple of the finest step")]
    BadStepGrid,
    #[error("step {delta} does not divide horizon {t}")]
    StepMismatch { delta: f64, t: f64 },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("estimated cost {needed} random draws exceeds budget {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("path synthesis failed: {0}")]
    Fbm(#[from] FbmError),
    #[error("essential covariance block factorization failed: {0}")]
    Linalg(#[from] LinalgError),
    #[error("mixing matrix shape does not reproduce the essential covariance block")]
    BadMixing,
}

/// One row of the convergence table: everything normalized by the horizon.
#[derive(Debug, Clone, Serialize)]
pub struct PickandsRow {
    /// Horizon T.
    pub t: f64,
    /// Estimate of 𝓗(T)/T at the finest grid step.
    pub value_over_t: f64,
    /// Standard error of `value_over_t` over paths.
    pub stderr: f64,
    /// Largest shift of `value_over_t` when re-evaluating the same paths on
    /// the coarser grid steps (0 when only one step is supplied).
    pub delta_sensitivity: f64,
}

/// Result of the long-run constant estimation.
#[derive(Debug, Clone, Serialize)]
pub struct PickandsEstimate {
    /// Point estimate: the largest-horizon value of 𝓗(T)/T.
    pub value: f64,
    /// Standard error of `value`.
    pub stderr: f64,
    /// Per-horizon table for convergence inspection.
    pub table: Vec<PickandsRow>,
    /// Finest grid step used for simulation.
    pub delta: f64,
    /// Full step grid (finest last), echoed for provenance.
    pub delta_grid: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// True when the last two table entries agree within twice their
    /// combined standard error.
    pub converged: bool,
    /// Human-readable caveat when not converged.
    pub note: Option<String>,
}

/// Tuning knobs for [`estimate_pickands`].
#[derive(Debug, Clone)]
pub struct PickandsConfig {
    /// Horizons T, strictly increasing; the largest drives the simulation.
    pub t_grid: Vec<f64>,
    /// Grid steps, strictly decreasing; the finest (last) is the simulation
    /// step, the others feed the sensitivity column. Every entry must be an
    /// integer multiple of the finest and divide every horizon.
    pub delta_grid: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Optional cap on the total number of random doubles drawn; exceeding
    /// it fails fast before any simulation.
    pub budget: Option<u64>,
    /// Use the inner Monte Carlo integrator even in dimensions 1–2 (the
    /// exact integrators remain the default there); used by cross-checks.
    pub force_inner_mc: bool,
}

impl PickandsConfig {
    /// Defaults: horizons {T/8, T/4, T/2, T}, steps {T/256, T/512, T/1024},
    /// 10⁴ paths, seed 0.
    pub fn new(t_max: f64) -> Self {
        PickandsConfig {
            t_grid: vec![t_max / 8.0, t_max / 4.0, t_max / 2.0, t_max],
            delta_grid: vec![t_max / 256.0, t_max / 512.0, t_max / 1024.0],
            n_samples: 10_000,
            seed: 0,
            budget: None,
            force_inner_mc: false,
        }
    }
}

/// Exact limit of 𝓗(T) as T → 0: the region shrinks to {x < 0}, leaving
/// `∏ t₀^{2H}/w_i`.
pub fn small_t_limit(model: &ModelSpec, cp: &CriticalPoint) -> f64 {
    let t02h = cp.t0.powf(2.0 * model.hurst());
    cp.weights_essential().iter().map(|w| t02h / w).product()
}

/// Exact per-path integral in dimension 1: `∫_{x<m} c·e^{cx} dx / c = e^{cm}/c`.
pub fn integral_dim1(c: f64, m: f64) -> f64 {
    (c * m).exp() / c
}

/// Exact integral of `e^{c₁x₁+c₂x₂}` over the union of lower-left quadrants
/// `∪_p {x < p}` of the given points: reduce to the Pareto frontier, then
/// telescope the closed-form antiderivative along the staircase.
pub fn staircase_integral(points: &[(f64, f64)], c1: f64, c2: f64) -> f64 {
    let mut scratch = points.to_vec();
    staircase_with_scratch(&mut scratch, c1, c2)
}

fn staircase_with_scratch(pts: &mut [(f64, f64)], c1: f64, c2: f64) -> f64 {
    debug_assert!(c1 > 0.0 && c2 > 0.0);
    // first coordinate descending, second descending to break ties
    pts.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut sum = 0.0;
    let mut best_y = f64::NEG_INFINITY;
    let mut prev_exp = 0.0;
    for &(x, y) in pts.iter() {
        // frontier points appear with strictly increasing second coordinate
        if y > best_y {
            let ey = (c2 * y).exp();
            sum += (c1 * x).exp() * (ey - prev_exp);
            prev_exp = ey;
            best_y = y;
        }
    }
    sum / (c1 * c2)
}

/// Importance-sampled integral of `e^{cᵀx}` over `∪_rows {x < row}` for
/// row-major `points` (each row one |I|-vector): draws `x_i = M_i − E_i/c_i`
/// with the exponentials supplied in `exps` (length = draws × dim), weights
/// by `∏ e^{c_iM_i}/c_i`, and averages the region indicator.
pub fn quadrant_union_mc(points: &[f64], dim: usize, c: &[f64], exps: &[f64]) -> f64 {
    assert_eq!(points.len() % dim, 0);
    union_mc_strided(points, dim, 1, points.len() / dim - 1, c, exps)
}

const STACK_DIM: usize = 16;

/// Same as [`quadrant_union_mc`] but over the rows `{0, stride, …, stride·rows}`.
fn union_mc_strided(
    ys: &[f64],
    dim: usize,
    stride: usize,
    rows: usize,
    c: &[f64],
    exps: &[f64],
) -> f64 {
    assert!(dim <= STACK_DIM);
    let mut m = [f64::NEG_INFINITY; STACK_DIM];
    for j in 0..=rows {
        let row = &ys[j * stride * dim..j * stride * dim + dim];
        for (mi, &v) in m.iter_mut().zip(row) {
            if v > *mi {
                *mi = v;
            }
        }
    }
    let n_inner = exps.len() / dim;
    debug_assert!(n_inner > 0);
    let mut hits = 0usize;
    let mut x = [0.0; STACK_DIM];
    for r in 0..n_inner {
        for i in 0..dim {
            x[i] = m[i] - exps[r * dim + i] / c[i];
        }
        'draw: for j in 0..=rows {
            let row = &ys[j * stride * dim..j * stride * dim + dim];
            if row.iter().zip(&x[..dim]).all(|(v, xi)| v > xi) {
                hits += 1;
                break 'draw;
            }
        }
    }
    let mut weight = 1.0;
    for i in 0..dim {
        weight *= (c[i] * m[i]).exp() / c[i];
    }
    weight * hits as f64 / n_inner as f64
}

/// Single-horizon estimate: returns the un-normalized `(𝓗(T), stderr)`.
pub fn estimate_pickands_t(
    model: &ModelSpec,
    cp: &CriticalPoint,
    t: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64), PickandsError> {
    let cfg = PickandsConfig {
        t_grid: vec![t],
        delta_grid: vec![delta],
        n_samples,
        seed,
        budget: None,
        force_inner_mc: false,
    };
    let est = estimate_pickands(model, cp, &cfg)?;
    Ok((est.value * t, est.stderr * t))
}

/// Estimates 𝓗 = lim 𝓗(T)/T by Monte Carlo, reporting the full horizon
/// table. The essential fBm block is synthesized through the Cholesky
/// factor of Σ_II; any other factor gives the same law (see
/// [`estimate_pickands_with_mixing`]).
pub fn estimate_pickands(
    model: &ModelSpec,
    cp: &CriticalPoint,
    cfg: &PickandsConfig,
) -> Result<PickandsEstimate, PickandsError> {
    let set = &cp.essential;
    let sigma_ii = model.sigma().submatrix(set.indices(), set.indices());
    let chol = sigma_ii.cholesky()?;
    let rows: Vec<Vec<f64>> =
        (0..set.len()).map(|i| chol.factor().row(i).to_vec()).collect();
    estimate_pickands_with_mixing(model, cp, cfg, &rows)
}

/// Cross-validation entry point: run the estimator with an explicit mixing
/// matrix `D` (rows × components) satisfying `DDᵀ = Σ_II`. The estimator's
/// law depends on `D` only through `DDᵀ`.
pub fn estimate_pickands_with_mixing(
    model: &ModelSpec,
    cp: &CriticalPoint,
    cfg: &PickandsConfig,
    mix_rows: &[Vec<f64>],
) -> Result<PickandsEstimate, PickandsError> {
    let set = &cp.essential;
    let dim = set.len();
    assert!(dim >= 1, "critical point always carries a nonempty essential set");
    if cfg.n_samples < 2 {
        return Err(PickandsError::TooFewSamples(cfg.n_samples));
    }
    validate_mixing(model, cp, mix_rows)?;
    let n_components = mix_rows[0].len();

    // --- grid validation -------------------------------------------------
    let t_grid = &cfg.t_grid;
    if t_grid.is_empty()
        || t_grid.iter().any(|&t| t <= 0.0 || t.is_nan())
        || t_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(PickandsError::BadHorizonGrid);
    }
    let deltas = &cfg.delta_grid;
    if deltas.is_empty()
        || deltas.iter().any(|&d| d <= 0.0 || d.is_nan())
        || deltas.windows(2).any(|w| w[0] <= w[1])
    {
        return Err(PickandsError::BadStepGrid);
    }
    let delta = *deltas.last().unwrap();
    // strides of the coarser steps on the finest lattice
    let mut strides = Vec::with_capacity(deltas.len());
    for &d in deltas.iter().rev() {
        let s = (d / delta).round();
        if ((d / delta) - s).abs() > GRID_TOL * s.max(1.0) {
            return Err(PickandsError::BadStepGrid);
        }
        strides.push(s as usize);
    }
    // steps-per-horizon on the finest lattice; every stride must divide
    let mut k_of_t = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let k = (t / delta).round();
        if k < 1.0 || ((t / delta) - k).abs() > GRID_TOL * k {
            return Err(PickandsError::StepMismatch { delta, t });
        }
        let k = k as usize;
        for &s in &strides {
            if !k.is_multiple_of(s) {
                return Err(PickandsError::StepMismatch { delta: s as f64 * delta, t });
            }
        }
        k_of_t.push(k);
    }
    let n = *k_of_t.last().unwrap();

    // --- cost control ----------------------------------------------------
    let use_mc = cfg.force_inner_mc || dim >= 3;
    let draws_per_path = (n_components * 2 * n.next_power_of_two()
        + if use_mc { N_INNER * dim } else { 0 }) as u64;
    let needed = draws_per_path * cfg.n_samples as u64;
    if let Some(budget) = cfg.budget {
        if needed > budget {
            return Err(PickandsError::BudgetExceeded { needed, budget });
        }
    }

    // --- shared per-run precomputation -----------------------------------
    let h = model.hurst();
    let t02h = cp.t0.powf(2.0 * h);
    let b_ess = set.gather(&cp.b);
    let w_ess = cp.weights_essential();
    let c: Vec<f64> = w_ess.iter().map(|w| w / t02h).collect();
    let sampler = FbmSampler::new(h, n, delta)?;
    // drift multiplier at grid row j: (jδ)^{2H} / (2 t₀^{2H})
    let drift_scale: Vec<f64> = (0..=n)
        .map(|j| (j as f64 * delta).powf(2.0 * h) / (2.0 * t02h))
        .collect();

    let n_cells = strides.len() * k_of_t.len();
    let n_batches = batch_count(cfg.n_samples);
    let partials: Vec<Vec<(f64, f64)>> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = batch_rng(cfg.seed, StreamDomain::Pickands, batch as u64);
            let mut scr = sampler.scratch();
            let mut comp = vec![vec![0.0f64; n]; n_components];
            let mut ys = vec![0.0f64; (n + 1) * dim];
            let mut exps = vec![0.0f64; if use_mc { N_INNER * dim } else { 0 }];
            let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
            let mut cells = vec![(0.0f64, 0.0f64); n_cells];
            for _ in batch_range(cfg.n_samples, batch) {
                for comp_path in comp.iter_mut() {
                    sampler.sample_into(&mut rng, &mut scr, comp_path);
                }
                for e in exps.iter_mut() {
                    *e = rng.sample(Exp1);
                }
                for j in 1..=n {
                    for (i, mix) in mix_rows.iter().enumerate() {
                        let mut v = 0.0;
                        for (coef, comp_path) in mix.iter().zip(&comp) {
                            v += coef * comp_path[j - 1];
                        }
                        ys[j * dim + i] = v - drift_scale[j] * b_ess[i];
                    }
                }
                for (si, &stride) in strides.iter().enumerate() {
                    for (ti, &k) in k_of_t.iter().enumerate() {
                        // the lattice is {δ', 2δ', …, T} — t = 0 is excluded,
                        // which makes the single-point case T = δ exactly
                        // unbiased for the small-horizon limit
                        let f = if use_mc {
                            union_mc_strided(
                                &ys[stride * dim..],
                                dim,
                                stride,
                                k / stride - 1,
                                &c,
                                &exps,
                            )
                        } else if dim == 1 {
                            let mut m = f64::NEG_INFINITY;
                            for j in (stride..=k).step_by(stride) {
                                m = m.max(ys[j]);
                            }
                            integral_dim1(c[0], m)
                        } else {
                            pts.clear();
                            for j in (stride..=k).step_by(stride) {
                                pts.push((ys[j * 2], ys[j * 2 + 1]));
                            }
                            staircase_with_scratch(&mut pts, c[0], c[1])
                        };
                        let cell = &mut cells[si * k_of_t.len() + ti];
                        cell.0 += f;
                        cell.1 += f * f;
                    }
                }
            }
            cells
        })
        .collect();

    // deterministic ordered reduction over batches, cell by cell
    let mut sums = vec![0.0f64; n_cells];
    let mut sumsqs = vec![0.0f64; n_cells];
    let mut col = Vec::with_capacity(n_batches);
    for cell in 0..n_cells {
        col.clear();
        col.extend(partials.iter().map(|p| p[cell].0));
        sums[cell] = pairwise_sum(&col);
        col.clear();
        col.extend(partials.iter().map(|p| p[cell].1));
        sumsqs[cell] = pairwise_sum(&col);
    }

    // --- table assembly (finest step is strides[0] == 1) ------------------
    let nsf = cfg.n_samples as f64;
    let fine_base = 0;
    let mut table = Vec::with_capacity(t_grid.len());
    for (ti, (&t, &_k)) in t_grid.iter().zip(&k_of_t).enumerate() {
        let sum = sums[fine_base + ti];
        let sumsq = sumsqs[fine_base + ti];
        let mean = sum / nsf;
        let var = ((sumsq - sum * sum / nsf) / (nsf - 1.0)).max(0.0);
        let se = (var / nsf).sqrt();
        let mut sens = 0.0f64;
        for si in 1..strides.len() {
            let coarse_mean = sums[si * k_of_t.len() + ti] / nsf;
            sens = sens.max(((coarse_mean - mean) / t).abs());
        }
        table.push(PickandsRow {
            t,
            value_over_t: mean / t,
            stderr: se / t,
            delta_sensitivity: sens,
        });
    }
    let last = table.last().unwrap();
    let converged = if table.len() >= 2 {
        let prev = &table[table.len() - 2];
        (last.value_over_t - prev.value_over_t).abs()
            <= 2.0 * (last.stderr.powi(2) + prev.stderr.powi(2)).sqrt()
    } else {
        true
    };
    let note = (!converged).then(|| {
        "normalized table not stabilized over the last two horizons; \
         increase the horizon or the sample count"
            .to_string()
    });
    Ok(PickandsEstimate {
        value: last.value_over_t,
        stderr: last.stderr,
        table,
        delta,
        delta_grid: deltas.clone(),
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        converged,
        note,
    })
}

/// Checks `D·Dᵀ = Σ_II` up to a small relative tolerance.
fn validate_mixing(
    model: &ModelSpec,
    cp: &CriticalPoint,
    mix_rows: &[Vec<f64>],
) -> Result<(), PickandsError> {
    let set = &cp.essential;
    let dim = set.len();
    let m = mix_rows.first().map_or(0, Vec::len);
    if mix_rows.len() != dim || m == 0 || mix_rows.iter().any(|r| r.len() != m) {
        return Err(PickandsError::BadMixing);
    }
    let sigma_ii = model.sigma().submatrix(set.indices(), set.indices());
    let scale = (0..dim).map(|i| sigma_ii[(i, i)]).fold(0.0f64, f64::max);
    for i in 0..dim {
        for j in 0..dim {
            let prod: f64 =
                mix_rows[i].iter().zip(&mix_rows[j]).map(|(a, b)| a * b).sum();
            if (prod - sigma_ii[(i, j)]).abs() > 1e-9 * scale.max(1.0) {
                return Err(PickandsError::BadMixing);
            }
        }
    }
    Ok(())
}
