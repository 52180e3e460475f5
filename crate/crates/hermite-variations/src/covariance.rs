//! Fractional Gaussian noise covariance and the normalization `v_n`.
//!
//! fGn with Hurst index `H ∈ (0,1)` is the stationary standard Gaussian
//! sequence with correlation
//!
//! ```text
//! ρ(k) = ½(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}),
//! ```
//!
//! which behaves like `H(2H-1)|k|^{2H-2}` for large `|k|`. Direct
//! evaluation of the second difference cancels almost all significant
//! digits at large lags, so the tail is computed from the even binomial
//! series of `(1±1/k)^{2H}` instead.
//!
//! ```
//! use hermite_variations::covariance::{fgn_rho, VariationSpec};
//!
//! // ρ(1) = (2^{2H} - 2)/2; positive correlation for H > 1/2.
//! let rho1 = fgn_rho(0.7, 1).unwrap();
//! assert!((rho1 - (2f64.powf(1.4) - 2.0) / 2.0).abs() < 1e-12);
//!
//! // The CLT regime for the Hermite variation is 0 < H < 1 - 1/(2q).
//! let spec = VariationSpec::new(2, 0.7, 64).unwrap();
//! assert!(spec.in_clt_regime());
//! assert!(!VariationSpec::new(2, 0.8, 64).unwrap().in_clt_regime());
//! ```

use crate::error::Error;
use crate::numeric::KahanSum;
use crate::Result;

/// `q!` as a float (exact for `q ≤ 20`).
pub fn factorial(q: u32) -> f64 {
    (1..=q as u64).product::<u64>() as f64
}

/// Fractional Gaussian noise correlation sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgnCovariance {
    h: f64,
}

/// Lags at or beyond this cutoff use the series form of the second
/// difference; below it, direct evaluation is exact enough.
const SERIES_CUTOFF: i64 = 8;

impl FgnCovariance {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) || !h.is_finite() {
            return Err(Error::domain(format!(
                "Hurst index must lie in (0,1), got {h}"
            )));
        }
        Ok(FgnCovariance { h })
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    /// `ρ(k)`; symmetric in `k`, with `ρ(0) = 1`.
    pub fn rho(&self, k: i64) -> f64 {
        let k = k.unsigned_abs();
        if k == 0 {
            return 1.0;
        }
        let a = 2.0 * self.h;
        if (k as i64) < SERIES_CUTOFF {
            let k = k as f64;
            0.5 * ((k + 1.0).powf(a) - 2.0 * k.powf(a) + (k - 1.0).powf(a))
        } else {
            // ½ k^a [(1+1/k)^a + (1-1/k)^a - 2] with the bracket expanded
            // as 2 Σ_{j≥1} C(a, 2j) k^{-2j}; the direct form loses
            // ~|log₁₀ k^{a-2}| digits to cancellation.
            let kf = k as f64;
            let x2 = 1.0 / (kf * kf);
            let mut coeff = a * (a - 1.0) / 2.0; // C(a,2)
            let mut power = x2;
            let mut acc = KahanSum::new();
            let mut j = 1u32;
            loop {
                let term = coeff * power;
                acc.add(term);
                if term.abs() < 1e-20 * acc.value().abs().max(1e-300) || j > 60 {
                    break;
                }
                // C(a,2j+2) = C(a,2j) (a-2j)(a-2j-1)/((2j+1)(2j+2))
                let m = 2.0 * j as f64;
                coeff *= (a - m) * (a - m - 1.0) / ((m + 1.0) * (m + 2.0));
                power *= x2;
                j += 1;
            }
            kf.powf(a) * acc.value()
        }
    }

    /// Dense table of `ρ(k)` for `k = 0, …, len-1`.
    ///
    /// Every lattice sum reuses all lags, so experiments build this once.
    pub fn rho_table(&self, len: usize) -> Vec<f64> {
        (0..len as i64).map(|k| self.rho(k)).collect()
    }
}

/// `ρ(k)` for fGn with Hurst index `H`.
pub fn fgn_rho(h: f64, k: i64) -> Result<f64> {
    Ok(FgnCovariance::new(h)?.rho(k))
}

/// The normalization `v_n = (q!/n) Σ_{|k|<n} (n-|k|) ρ(k)^q`, the unique
/// positive value making `E[F_n²] = 1`.
pub fn variance_norm(q: u32, h: f64, n: usize) -> Result<f64> {
    if q < 2 {
        return Err(Error::domain(format!("Hermite degree must be ≥ 2, got {q}")));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be ≥ 1"));
    }
    let cov = FgnCovariance::new(h)?;
    Ok(variance_norm_from_table(q, n, &cov.rho_table(n)))
}

/// `v_n` from a precomputed lag table (`rho[k]` for `k = 0..n-1`).
pub fn variance_norm_from_table(q: u32, n: usize, rho: &[f64]) -> f64 {
    debug_assert!(rho.len() >= n);
    let nf = n as f64;
    let mut acc = KahanSum::new();
    acc.add(1.0); // k = 0, ρ(0)^q = 1
    for k in 1..n {
        acc.add(2.0 * (nf - k as f64) / nf * rho[k].powi(q as i32));
    }
    factorial(q) * acc.value()
}

/// The triple `(q, H, n)` defining `F_n`, plus its normalization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VariationSpec {
    pub q: u32,
    pub h: f64,
    pub n: usize,
    pub v_n: f64,
}

impl VariationSpec {
    pub fn new(q: u32, h: f64, n: usize) -> Result<Self> {
        let v_n = variance_norm(q, h, n)?;
        Ok(VariationSpec { q, h, n, v_n })
    }

    pub fn covariance(&self) -> FgnCovariance {
        FgnCovariance::new(self.h).expect("validated at construction")
    }

    /// Breuer–Major CLT regime: `H < 1 - 1/(2q)`.
    ///
    /// Specs outside it are still computable; the rates module flags them
    /// instead of rejecting.
    pub fn in_clt_regime(&self) -> bool {
        self.h < 1.0 - 1.0 / (2.0 * self.q as f64)
    }

    /// Short id used in file names and job labels.
    pub fn label(&self) -> String {
        format!("q{}_H{}_n{}", self.q, self.h, self.n)
    }
}
