//! Exact synthesis of fractional Brownian motion on uniform grids.
//!
//! Sampling goes through the stationary increment process (fractional
//! Gaussian noise) with autocovariance
//! `γ(k) = (|k+1|^{2H} + |k−1|^{2H} − 2|k|^{2H})/2`:
//! the length-2N circulant embedding of the Toeplitz increment covariance
//! is diagonalized by FFT, complex normals are colored by the square roots
//! of the eigenvalues, and a second FFT yields an exact-in-distribution
//! fGn block, which is then cumulated and rescaled by `dt^H`
//! (self-similarity). For fGn the embedding is nonnegative definite in
//! practice across H ∈ (0,1); tiny negative eigenvalues from rounding are
//! clamped, and a genuinely failing embedding falls back to a dense
//! Cholesky factorization of the increment covariance for moderate n.
//!
//! Grids are padded to a power of two internally; excess samples are
//! discarded.

use crate::linalg::{Cholesky, Matrix};
use crate::rng::{batch_rng, StreamDomain};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::io::{self, Read, Write};
use std::sync::Arc;
use thiserror::Error;

/// Relative eigenvalue tolerance: embedding eigenvalues in
/// `[−EIG_TOL_REL·λ_max, 0)` are clamped to zero; anything lower triggers
/// the Cholesky fallback.
pub const EIG_TOL_REL: f64 = 1e-8;

/// Largest n for the dense Cholesky fallback.
pub const CHOLESKY_FALLBACK_MAX_N: usize = 4096;

const BINARY_MAGIC: &[u8; 8] = b"FBMPATH1";

#[derive(Debug, Error)]
pub enum FbmError {
    #[error("Hurst parameter must lie in (0,1), got {0}")]
    InvalidHurst(f64),
    #[error("path length must be at least 1")]
    EmptyPath,
    #[error("circulant embedding failed (min eigenvalue {min_eig:.3e}) and n = {n} exceeds the Cholesky fallback limit {CHOLESKY_FALLBACK_MAX_N}")]
    EmbeddingFailed { min_eig: f64, n: usize },
    #[error("path dump I/O: {0}")]
    Io(#[from] io::Error),
    #[error("path dump is not in the expected binary format")]
    BadFormat,
}

/// A sampled path: `values[k] = B_H((k+1)·dt)`, with `B_H(0) = 0` implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub hurst: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// fGn autocovariance at integer lag k (unit spacing, unit variance).
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let two_h = 2.0 * h;
    0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).abs().powf(two_h) - 2.0 * k.powf(two_h))
}

/// Covariance of fBm at times t and s: (t^{2H} + s^{2H} − |t−s|^{2H})/2.
pub fn fbm_covariance(h: f64, t: f64, s: f64) -> f64 {
    let two_h = 2.0 * h;
    0.5 * (t.abs().powf(two_h) + s.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

enum Backend {
    Circulant {
        /// sqrt(λ_j) for j = 0..m; λ from the FFT of the circulant row.
        sqrt_eigen: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
        /// number of eigenvalues clamped up to zero
        clamped: usize,
    },
    CholeskyDense(Box<Cholesky>),
}

/// Reusable sampler for fixed (H, n, dt): precomputes the embedding
/// spectrum and FFT plan once, then generates paths allocation-free.
pub struct FbmSampler {
    hurst: f64,
    n: usize,
    dt: f64,
    n_pad: usize,
    backend: Backend,
}

/// Per-worker scratch buffers for [`FbmSampler::sample_into`].
pub struct FbmScratch {
    freq: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
    noise: Vec<f64>,
}

impl FbmSampler {
    pub fn new(hurst: f64, n: usize, dt: f64) -> Result<Self, FbmError> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(FbmError::InvalidHurst(hurst));
        }
        if n == 0 {
            return Err(FbmError::EmptyPath);
        }
        let n_pad = n.next_power_of_two();
        let m = 2 * n_pad;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);

        // spectrum of the circulant extension of the increment covariance
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| Complex::new(fgn_autocovariance(hurst, j.min(m - j)), 0.0))
            .collect();
        let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut row, &mut scratch);

        let max_eig = row.iter().map(|c| c.re).fold(0.0f64, f64::max);
        let min_eig = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min_eig < -EIG_TOL_REL * max_eig {
            // genuine embedding failure: dense fallback on the original n
            if n > CHOLESKY_FALLBACK_MAX_N {
                return Err(FbmError::EmbeddingFailed { min_eig, n });
            }
            log::warn!(
                "circulant embedding indefinite (min eigenvalue {min_eig:.3e}); \
                 using dense Cholesky fallback for n = {n}"
            );
            let mut cov = Matrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    cov[(i, j)] = fgn_autocovariance(hurst, i.abs_diff(j));
                }
            }
            let chol = cov.cholesky().map_err(|_| FbmError::EmbeddingFailed { min_eig, n })?;
            return Ok(FbmSampler {
                hurst,
                n,
                dt,
                n_pad,
                backend: Backend::CholeskyDense(Box::new(chol)),
            });
        }
        let mut clamped = 0;
        let sqrt_eigen: Vec<f64> = row
            .iter()
            .map(|c| {
                if c.re < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    c.re.sqrt()
                }
            })
            .collect();
        if clamped > 0 {
            log::warn!(
                "clamped {clamped} slightly negative embedding eigenvalues to zero \
                 (H = {hurst}, padded n = {n_pad})"
            );
        }
        Ok(FbmSampler { hurst, n, dt, n_pad, backend: Backend::Circulant { sqrt_eigen, fft, clamped } })
    }

    pub fn scratch(&self) -> FbmScratch {
        let m = 2 * self.n_pad;
        let fft_len = match &self.backend {
            Backend::Circulant { fft, .. } => fft.get_inplace_scratch_len(),
            Backend::CholeskyDense(_) => 0,
        };
        FbmScratch {
            freq: vec![Complex::default(); m],
            fft_scratch: vec![Complex::default(); fft_len],
            noise: vec![0.0; 2 * self.n_pad],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Number of clamped embedding eigenvalues (0 for the Cholesky backend).
    pub fn clamped_eigenvalues(&self) -> usize {
        match &self.backend {
            Backend::Circulant { clamped, .. } => *clamped,
            Backend::CholeskyDense(_) => 0,
        }
    }

    /// Writes one path (cumulated, `dt^H`-scaled) into `out[0..n]`.
    pub fn sample_into(&self, rng: &mut ChaCha12Rng, scratch: &mut FbmScratch, out: &mut [f64]) {
        assert_eq!(out.len(), self.n);
        match &self.backend {
            Backend::Circulant { sqrt_eigen, fft, .. } => {
                self.sample_fgn_circulant(sqrt_eigen, fft, rng, scratch, out)
            }
            Backend::CholeskyDense(chol) => {
                for z in scratch.noise[..self.n].iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                let incr = chol.lower_matvec(&scratch.noise[..self.n]);
                out.copy_from_slice(&incr);
            }
        }
        // cumulate increments and apply the self-similar scale
        let scale = self.dt.powf(self.hurst);
        let mut acc = 0.0;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc * scale;
        }
    }

    fn sample_fgn_circulant(
        &self,
        sqrt_eigen: &[f64],
        fft: &Arc<dyn Fft<f64>>,
        rng: &mut ChaCha12Rng,
        scratch: &mut FbmScratch,
        out: &mut [f64],
    ) {
        let n_pad = self.n_pad;
        let m = 2 * n_pad;
        let freq = &mut scratch.freq;
        // 2·n_pad standard normals drive one exact block of m circulant values
        for z in scratch.noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        let inv_sqrt_m = (1.0 / m as f64).sqrt();
        let inv_sqrt_2m = (1.0 / (2 * m) as f64).sqrt();
        freq[0] = Complex::new(sqrt_eigen[0] * inv_sqrt_m * scratch.noise[0], 0.0);
        freq[n_pad] = Complex::new(sqrt_eigen[n_pad] * inv_sqrt_m * scratch.noise[1], 0.0);
        for j in 1..n_pad {
            let a = scratch.noise[2 * j];
            let b = scratch.noise[2 * j + 1];
            let s = sqrt_eigen[j] * inv_sqrt_2m;
            freq[j] = Complex::new(s * a, s * b);
            freq[m - j] = Complex::new(s * a, -s * b);
        }
        fft.process_with_scratch(freq, &mut scratch.fft_scratch);
        for (o, c) in out.iter_mut().zip(freq.iter()) {
            *o = c.re;
        }
    }
}

/// One-shot convenience: a single path under the stand-alone path domain.
pub fn sample_fbm(
    hurst: f64,
    n: usize,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<FbmPath, FbmError> {
    let sampler = FbmSampler::new(hurst, n, dt)?;
    let mut scratch = sampler.scratch();
    let mut rng = batch_rng(seed, StreamDomain::PathDump, stream);
    let mut values = vec![0.0; n];
    sampler.sample_into(&mut rng, &mut scratch, &mut values);
    Ok(FbmPath { hurst, dt, values, seed, stream })
}

/// `d` correlated paths: mixes `mix_rows.len()` output components from
/// `mix_rows[0].len()` independent fBm components. Cross-covariance is
/// `(D·Dᵀ)_{ij} · fbm_covariance(H, t, s)`.
pub fn sample_correlated_fbm(
    hurst: f64,
    mix_rows: &[Vec<f64>],
    n: usize,
    dt: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<Vec<f64>>, FbmError> {
    let m = mix_rows.first().map_or(0, Vec::len);
    assert!(mix_rows.iter().all(|r| r.len() == m), "ragged mixing matrix");
    let sampler = FbmSampler::new(hurst, n, dt)?;
    let mut scratch = sampler.scratch();
    let mut components = vec![vec![0.0; n]; m];
    for comp in components.iter_mut() {
        sampler.sample_into(rng, &mut scratch, comp);
    }
    Ok(mix(mix_rows, &components, n))
}

/// out_i(t) = Σ_j D_ij · component_j(t).
pub fn mix(mix_rows: &[Vec<f64>], components: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    mix_rows
        .iter()
        .map(|row| {
            let mut out = vec![0.0; n];
            for (coef, comp) in row.iter().zip(components) {
                if *coef != 0.0 {
                    for (o, c) in out.iter_mut().zip(comp) {
                        *o += coef * c;
                    }
                }
            }
            out
        })
        .collect()
}

/// Binary path dump: magic, H, dt, n, seed, stream, then n little-endian
/// doubles.
pub fn write_path_binary(w: &mut impl Write, path: &FbmPath) -> Result<(), FbmError> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&path.hurst.to_le_bytes())?;
    w.write_all(&path.dt.to_le_bytes())?;
    w.write_all(&(path.values.len() as u64).to_le_bytes())?;
    w.write_all(&path.seed.to_le_bytes())?;
    w.write_all(&path.stream.to_le_bytes())?;
    for v in &path.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_path_binary(r: &mut impl Read) -> Result<FbmPath, FbmError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(FbmError::BadFormat);
    }
    let mut f = [0u8; 8];
    let mut read_f64 = |r: &mut dyn Read| -> Result<f64, FbmError> {
        r.read_exact(&mut f)?;
        Ok(f64::from_le_bytes(f))
    };
    let hurst = read_f64(r)?;
    let dt = read_f64(r)?;
    let mut u = [0u8; 8];
    let mut read_u64 = |r: &mut dyn Read| -> Result<u64, FbmError> {
        r.read_exact(&mut u)?;
        Ok(u64::from_le_bytes(u))
    };
    let n = read_u64(r)? as usize;
    let seed = read_u64(r)?;
    let stream = read_u64(r)?;
    let mut values = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        values.push(f64::from_le_bytes(b));
    }
    Ok(FbmPath { hurst, dt, values, seed, stream })
}

/// CSV dump (t, value) for small paths.
pub fn write_path_csv(w: &mut impl Write, path: &FbmPath) -> Result<(), FbmError> {
    writeln!(w, "t,value")?;
    for (k, v) in path.values.iter().enumerate() {
        writeln!(w, "{},{}", (k + 1) as f64 * path.dt, v)?;
    }
    Ok(())
}
