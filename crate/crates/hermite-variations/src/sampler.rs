//! Exact simulation of fractional Gaussian noise and Monte Carlo batches
//! of `F_n`.
//!
//! The covariance is embedded into a circulant matrix diagonalized by the
//! FFT; fGn embeddings are expected nonnegative-definite, so the sampler
//! is exact. Eigenvalues in `[-1e-9, 0)` are clipped to zero (a
//! perturbation of the law far below Monte Carlo resolution); anything
//! more negative routes to a dense Cholesky of the Toeplitz covariance.
//!
//! Reproducibility: every replicate pair draws from its own ChaCha stream
//! keyed by `(seed, pair index)` through a SplitMix64 expansion, and
//! normal variates come from the inverse CDF, so identical `(spec, count,
//! seed)` give bit-identical batches at any worker count and platform.
//!
//! ```
//! use hermite_variations::covariance::VariationSpec;
//! use hermite_variations::sampler::sample_fn;
//!
//! let spec = VariationSpec::new(2, 0.6, 32).unwrap();
//! let a = sample_fn(&spec, 100, 7).unwrap();
//! let b = sample_fn(&spec, 100, 7).unwrap();
//! assert_eq!(a.replicates, b.replicates); // same seed ⇒ identical batch
//! ```

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::distribution::ContinuousCDF;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::covariance::{FgnCovariance, VariationSpec};
use crate::error::Error;
use crate::hermite::hermite_eval;
use crate::numeric::{kahan_total, KahanSum};
use crate::Result;

/// Eigenvalues of the embedding below this are a hard failure; within
/// `[-CLIP_TOL, 0)` they are clipped to zero.
pub const CLIP_TOL: f64 = 1e-9;

/// Replicates generated per work unit; sized so FFT workspaces stay warm.
pub const DEFAULT_BLOCK: usize = 1024;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based stream splitting: an independent ChaCha RNG per
/// `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = seed ^ stream.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Standard normal via the inverse CDF of a 53-bit uniform in (0,1).
///
/// No rejection loop, so streams never diverge across platforms.
#[inline]
fn standard_normal(rng: &mut ChaCha12Rng, normal: &statrs::distribution::Normal) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0);
    normal.inverse_cdf(u)
}

enum Method {
    /// Degenerate n = 1 case: a single standard normal per row.
    Scalar,
    /// Circulant embedding: `sqrt(λ_m / (M/2))`, FFT of size `M`.
    Embedding {
        len: usize,
        scaled_sqrt_eigs: Vec<f64>,
        fft: Arc<dyn rustfft::Fft<f64>>,
    },
    /// Dense Cholesky fallback (lower triangular, row-major).
    Cholesky { factor: Vec<f64> },
}

/// Exact sampler for stationary rows `(X_0, …, X_{n-1})` with fGn
/// correlation.
pub struct FgnSampler {
    n: usize,
    method: Method,
    normal: statrs::distribution::Normal,
    used_cholesky: bool,
    min_eigenvalue: f64,
}

impl FgnSampler {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        let cov = FgnCovariance::new(h)?;
        Self::from_covariance(&cov, n)
    }

    pub fn from_covariance(cov: &FgnCovariance, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("sample size must be ≥ 1"));
        }
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        if n == 1 {
            return Ok(FgnSampler {
                n,
                method: Method::Scalar,
                normal,
                used_cholesky: false,
                min_eigenvalue: 1.0,
            });
        }
        let (eigs, len) = embedding_eigenvalues(cov, n);
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig >= -CLIP_TOL {
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(len);
            let scale = 1.0 / (len as f64 / 2.0);
            let scaled_sqrt_eigs = eigs
                .iter()
                .map(|&l| (l.max(0.0) * scale).sqrt())
                .collect();
            Ok(FgnSampler {
                n,
                method: Method::Embedding {
                    len,
                    scaled_sqrt_eigs,
                    fft,
                },
                normal,
                used_cholesky: false,
                min_eigenvalue: min_eig,
            })
        } else {
            // Embedding failed; factor the n×n Toeplitz matrix directly.
            let factor = toeplitz_cholesky(&cov.rho_table(n), n)?;
            Ok(FgnSampler {
                n,
                method: Method::Cholesky { factor },
                normal,
                used_cholesky: true,
                min_eigenvalue: min_eig,
            })
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest circulant eigenvalue seen while embedding (1.0 for n = 1).
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn used_cholesky_fallback(&self) -> bool {
        self.used_cholesky
    }

    /// Generate the pair of rows owned by stream `pair`, as a flat
    /// `2 × n` buffer. Row `2·pair` occupies the first half.
    fn sample_pair(&self, seed: u64, pair: u64, scratch: &mut Vec<Complex<f64>>) -> Vec<f64> {
        let mut rng = stream_rng(seed, pair);
        match &self.method {
            Method::Scalar => {
                let a = standard_normal(&mut rng, &self.normal);
                let b = standard_normal(&mut rng, &self.normal);
                vec![a, b]
            }
            Method::Embedding {
                len,
                scaled_sqrt_eigs,
                fft,
            } => {
                scratch.clear();
                scratch.reserve(*len);
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                for &s in scaled_sqrt_eigs.iter() {
                    let a = standard_normal(&mut rng, &self.normal);
                    let b = standard_normal(&mut rng, &self.normal);
                    scratch.push(Complex::new(s * a * inv_sqrt2, s * b * inv_sqrt2));
                }
                fft.process(scratch);
                let mut out = Vec::with_capacity(2 * self.n);
                out.extend(scratch[..self.n].iter().map(|c| c.re));
                out.extend(scratch[..self.n].iter().map(|c| c.im));
                out
            }
            Method::Cholesky { factor } => {
                let n = self.n;
                let mut out = Vec::with_capacity(2 * n);
                for _ in 0..2 {
                    let z: Vec<f64> = (0..n)
                        .map(|_| standard_normal(&mut rng, &self.normal))
                        .collect();
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..=i {
                            acc += factor[i * n + j] * z[j];
                        }
                        out.push(acc);
                    }
                }
                out
            }
        }
    }
}

/// Circulant eigenvalues of the covariance embedded on a circle of the
/// next power-of-two size ≥ 2(n-1).
fn embedding_eigenvalues(cov: &FgnCovariance, n: usize) -> (Vec<f64>, usize) {
    let len = (2 * (n - 1)).max(2).next_power_of_two();
    let half = len / 2;
    let table = cov.rho_table(half + 1);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for k in 0..=half {
        buf[k].re = table[k];
        if k > 0 && k < half {
            buf[len - k].re = table[k];
        }
    }
    if half >= 1 {
        buf[half].re = table[half];
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    (buf.iter().map(|c| c.re).collect(), len)
}

/// Exposed for the embedding-validity checks.
pub fn embedding_min_eigenvalue(h: f64, n: usize) -> Result<f64> {
    let cov = FgnCovariance::new(h)?;
    if n < 2 {
        return Ok(1.0);
    }
    let (eigs, _) = embedding_eigenvalues(&cov, n);
    Ok(eigs.into_iter().fold(f64::INFINITY, f64::min))
}

fn toeplitz_cholesky(rho: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = rho[i - j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Covariance(format!(
                        "Toeplitz covariance is numerically non-PSD at pivot {i} ({sum})"
                    )));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Independent draws of `(X_0, …, X_{n-1})`, one row per replicate.
pub fn sample_fgn(h: f64, n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::domain("replicate count must be ≥ 1"));
    }
    let sampler = FgnSampler::new(h, n)?;
    let pairs = count.div_ceil(2);
    let rows: Vec<Vec<f64>> = (0..pairs as u64)
        .into_par_iter()
        .map_init(Vec::new, |scratch, p| sampler.sample_pair(seed, p, scratch))
        .collect();
    let mut out = Vec::with_capacity(count);
    for (p, pair_buf) in rows.into_iter().enumerate() {
        let (first, second) = pair_buf.split_at(n);
        out.push(first.to_vec());
        if 2 * p + 1 < count {
            out.push(second.to_vec());
        }
    }
    Ok(out)
}

/// Monte Carlo replicates of `F_n` for one spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleBatch {
    pub spec: VariationSpec,
    pub replicates: Vec<f64>,
    pub seed: u64,
    pub count: usize,
}

use serde::{Deserialize, Serialize};

/// Replicates of `F_n = (n v_n)^{-1/2} Σ H_q(X_k)`, a deterministic
/// function of `(spec, count, seed)`.
pub fn sample_fn(spec: &VariationSpec, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::domain("replicate count must be ≥ 1"));
    }
    let sampler = FgnSampler::from_covariance(&spec.covariance(), spec.n)?;
    let q = spec.q;
    let n = spec.n;
    let inv_norm = 1.0 / (n as f64 * spec.v_n).sqrt();
    let pairs = count.div_ceil(2);
    let values: Vec<[f64; 2]> = (0..pairs)
        .into_par_iter()
        .with_min_len(16)
        .map_init(Vec::new, |scratch, p| {
            let buf = sampler.sample_pair(seed, p as u64, scratch);
            let mut out = [0.0; 2];
            for (half, slot) in buf.chunks_exact(n).zip(out.iter_mut()) {
                let mut acc = KahanSum::new();
                for &x in half {
                    acc.add(hermite_eval(q, x));
                }
                *slot = acc.value() * inv_norm;
            }
            out
        })
        .collect();
    let mut replicates = Vec::with_capacity(count);
    for (p, pair) in values.iter().enumerate() {
        replicates.push(pair[0]);
        if 2 * p + 1 < count {
            replicates.push(pair[1]);
        }
    }
    debug_assert!(replicates.iter().all(|v| v.is_finite()));
    Ok(SampleBatch {
        spec: *spec,
        replicates,
        seed,
        count,
    })
}

/// Sample cumulants with batch-means standard errors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampledCumulants {
    pub kappa3: f64,
    pub kappa3_se: f64,
    pub kappa4: f64,
    pub kappa4_se: f64,
    pub count: usize,
}

/// Monte Carlo `κ̂₃, κ̂₄` of `F_n` from `count` replicates, with standard
/// errors from 20 sub-batches.
pub fn sampled_cumulants(spec: &VariationSpec, count: usize, seed: u64) -> Result<SampledCumulants> {
    let batch = sample_fn(spec, count, seed)?;
    Ok(cumulants_from_samples(&batch.replicates, count))
}

pub fn cumulants_from_samples(values: &[f64], count: usize) -> SampledCumulants {
    let n_batches = 20usize.min(values.len());
    let batch_len = values.len() / n_batches;
    let mut k3s = Vec::with_capacity(n_batches);
    let mut k4s = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let chunk = &values[b * batch_len..(b + 1) * batch_len];
        let (k3, k4) = sample_k3_k4(chunk);
        k3s.push(k3);
        k4s.push(k4);
    }
    let mean = |v: &[f64]| kahan_total(v) / v.len() as f64;
    let se = |v: &[f64], m: f64| {
        let var =
            v.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0);
        (var / v.len() as f64).sqrt()
    };
    let m3 = mean(&k3s);
    let m4 = mean(&k4s);
    SampledCumulants {
        kappa3: m3,
        kappa3_se: se(&k3s, m3),
        kappa4: m4,
        kappa4_se: se(&k4s, m4),
        count,
    }
}

fn sample_k3_k4(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut s1 = KahanSum::new();
    for &v in values {
        s1.add(v);
    }
    let mean = s1.value() / n;
    let (mut m2, mut m3, mut m4) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2.add(d2);
        m3.add(d2 * d);
        m4.add(d2 * d2);
    }
    let m2 = m2.value() / n;
    let m3 = m3.value() / n;
    let m4 = m4.value() / n;
    // Standardize: F is nominally unit variance but the sample is not.
    let k3 = m3 / m2.powf(1.5);
    let k4 = m4 / (m2 * m2) - 3.0;
    (k3, k4)
}

/// Reproducible iid standard normals (same stream splitting as the fGn
/// sampler); used for estimator calibration against known laws.
pub fn sample_standard_normal(count: usize, seed: u64) -> Vec<f64> {
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let pairs = count.div_ceil(2);
    let values: Vec<[f64; 2]> = (0..pairs)
        .into_par_iter()
        .with_min_len(256)
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            [
                standard_normal(&mut rng, &normal),
                standard_normal(&mut rng, &normal),
            ]
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for (p, pair) in values.iter().enumerate() {
        out.push(pair[0]);
        if 2 * p + 1 < count {
            out.push(pair[1]);
        }
    }
    out
}

const DUMP_MAGIC: &[u8; 8] = b"HVFNSMP1";

/// Binary little-endian dump: 32-byte header (magic, version, q, H, n,
/// count) followed by `count` f64 replicate values.
pub fn write_batch_binary(path: &std::path::Path, batch: &SampleBatch) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&batch.spec.q.to_le_bytes())?;
    w.write_all(&batch.spec.h.to_le_bytes())?;
    w.write_all(&(batch.spec.n as u32).to_le_bytes())?;
    w.write_all(&(batch.count as u32).to_le_bytes())?;
    for v in &batch.replicates {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read a binary dump written by [`write_batch_binary`].
pub fn read_batch_binary(path: &std::path::Path) -> Result<SampleBatch> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..8] != DUMP_MAGIC {
        return Err(Error::config(format!("{}: not a sample dump", path.display())));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != 1 {
        return Err(Error::config(format!("unsupported dump version {version}")));
    }
    let q = u32::from_le_bytes(header[12..16].try_into().unwrap());
    let h = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let n = u32::from_le_bytes(header[24..28].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(header[28..32].try_into().unwrap()) as usize;
    let mut replicates = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        replicates.push(f64::from_le_bytes(buf));
    }
    let spec = VariationSpec::new(q, h, n)?;
    Ok(SampleBatch {
        spec,
        replicates,
        seed: 0,
        count,
    })
}

/// CSV alternative to the binary dump: one replicate per line.
pub fn write_batch_csv(path: &std::path::Path, batch: &SampleBatch) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# q={} H={} n={} count={} seed={}", batch.spec.q, batch.spec.h, batch.spec.n, batch.count, batch.seed)?;
    writeln!(w, "f_n")?;
    for v in &batch.replicates {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}
