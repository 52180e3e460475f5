//! Convergence-rate experiments: theoretical exponent tables for
//! `κ₃(F_n)`, `κ₄(F_n)`, and `d_TV(F_n, N)`, log–log fits of computed
//! sequences, and the empirical sandwich `d_TV ≍ M = max(|κ₃|, κ₄)`.
//!
//! Every rate has the form `n^a log^b n` with `b ∈ {0, 1, 2, 3}`. Fits
//! divide the log factor out first, then regress `log value` on `log n`
//! by ordinary least squares.
//!
//! ```
//! use hermite_variations::rates::{theoretical_exponent, Statistic};
//!
//! // Quadratic variation, H = 1/2: κ₄ decays like n^{-1}.
//! let rate = theoretical_exponent(2, 0.5, Statistic::Kappa4).unwrap();
//! assert_eq!((rate.exponent, rate.log_power), (-1.0, 0));
//!
//! // At the regime boundary H = 2/3 the TV rate picks up log² n.
//! let rate = theoretical_exponent(2, 2.0 / 3.0, Statistic::Tv).unwrap();
//! assert_eq!((rate.exponent, rate.log_power), (-0.5, 2));
//!
//! // Outside the CLT regime there is no tabulated rate.
//! assert!(theoretical_exponent(2, 0.8, Statistic::Tv).is_err());
//! ```

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariance::VariationSpec;
use crate::diagrams::{exact_cumulants, exact_kappa2_kappa3, CumulantReport, ExactCaps};
use crate::distances::{distance_report, DistanceReport, TvMethod};
use crate::error::Error;
use crate::sampler::sample_fn;
use crate::Result;

/// Which sequence a rate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Kappa3,
    Kappa4,
    Tv,
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistic::Kappa3 => write!(f, "kappa3"),
            Statistic::Kappa4 => write!(f, "kappa4"),
            Statistic::Tv => write!(f, "tv"),
        }
    }
}

/// A rate of the form `n^exponent · log^log_power n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalRate {
    pub exponent: f64,
    pub log_power: u32,
    /// Human-readable regime, e.g. `"0 < H < 1 - 2/(3q)"`.
    pub regime_label: &'static str,
}

fn rate(exponent: f64, log_power: u32, regime_label: &'static str) -> TheoreticalRate {
    TheoreticalRate {
        exponent,
        log_power,
        regime_label,
    }
}

const BOUNDARY_TOL: f64 = 1e-12;

fn near(h: f64, boundary: f64) -> bool {
    (h - boundary).abs() < BOUNDARY_TOL
}

/// The piecewise rate of `|κ₃(F_n)|`, `κ₄(F_n)`, or `d_TV(F_n, N)` inside
/// the CLT regime `0 < H < 1 - 1/(2q)`.
///
/// `κ₃` rates exist only for even `q` (odd `q` has `κ₃ ≡ 0`, which has no
/// rate); `d_TV` rates are tabulated only for `q ∈ {2, 3}`. Outside those
/// ranges, and outside the CLT regime, this returns `Unsupported`.
pub fn theoretical_exponent(q: u32, h: f64, statistic: Statistic) -> Result<TheoreticalRate> {
    if q < 2 {
        return Err(Error::domain(format!("Hermite degree must be ≥ 2, got {q}")));
    }
    let qf = q as f64;
    let clt_edge = 1.0 - 1.0 / (2.0 * qf);
    if !(h > 0.0 && h < clt_edge - BOUNDARY_TOL) {
        return Err(Error::unsupported(format!(
            "no tabulated rate outside the CLT regime 0 < H < {clt_edge} (got H = {h})"
        )));
    }
    match statistic {
        Statistic::Kappa3 => {
            if q % 2 != 0 {
                return Err(Error::unsupported(format!(
                    "κ₃ vanishes identically for odd q = {q}; no rate to fit"
                )));
            }
            let b = 1.0 - 2.0 / (3.0 * qf);
            Ok(if near(h, b) {
                rate(-0.5, 2, "H = 1 - 2/(3q)")
            } else if h < b {
                rate(-0.5, 0, "0 < H < 1 - 2/(3q)")
            } else {
                rate(1.5 - 3.0 * qf + 3.0 * qf * h, 0, "1 - 2/(3q) < H < 1 - 1/(2q)")
            })
        }
        Statistic::Kappa4 if q <= 3 => {
            let b = 1.0 - 3.0 / (4.0 * qf);
            Ok(if near(h, b) {
                rate(-1.0, 3, "H = 1 - 3/(4q)")
            } else if h < b {
                rate(-1.0, 0, "0 < H < 1 - 3/(4q)")
            } else {
                rate(4.0 * qf * h - 4.0 * qf + 2.0, 0, "1 - 3/(4q) < H < 1 - 1/(2q)")
            })
        }
        Statistic::Kappa4 => {
            let b2 = 1.0 - 1.0 / (2.0 * qf - 2.0);
            Ok(if near(h, 0.75) {
                rate(-1.0, 1, "H = 3/4")
            } else if h < 0.75 {
                rate(-1.0, 0, "0 < H < 3/4")
            } else if near(h, b2) {
                rate(4.0 * h - 4.0, 2, "H = 1 - 1/(2q-2)")
            } else if h < b2 {
                rate(4.0 * h - 4.0, 0, "3/4 < H < 1 - 1/(2q-2)")
            } else {
                rate(4.0 * qf * h - 4.0 * qf + 2.0, 0, "1 - 1/(2q-2) < H < 1 - 1/(2q)")
            })
        }
        Statistic::Tv if q == 2 => Ok(if near(h, 2.0 / 3.0) {
            rate(-0.5, 2, "H = 2/3")
        } else if h < 2.0 / 3.0 {
            rate(-0.5, 0, "0 < H < 2/3")
        } else {
            rate(6.0 * h - 4.5, 0, "2/3 < H < 3/4")
        }),
        Statistic::Tv if q == 3 => Ok(if near(h, 0.75) {
            rate(-1.0, 3, "H = 3/4")
        } else if h < 0.75 {
            rate(-1.0, 0, "0 < H < 3/4")
        } else {
            rate(12.0 * h - 10.0, 0, "3/4 < H < 5/6")
        }),
        Statistic::Tv => Err(Error::unsupported(format!(
            "d_TV rates are tabulated only for q ∈ {{2, 3}}, got q = {q}"
        ))),
    }
}

/// A fitted log–log slope with its OLS standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub statistic: Statistic,
    pub q: u32,
    pub h: f64,
    pub fitted_exponent: f64,
    pub stderr: f64,
    pub theoretical_exponent: f64,
    pub log_power: u32,
    pub regime_label: String,
    /// True when the fit dropped the lower half of the n-grid because the
    /// half-grid slopes drifted apart (pre-asymptotic range).
    pub top_half_only: bool,
    pub points_used: usize,
}

fn ols_slope(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let unit = vec![1.0; xs.len()];
    let w = weights.unwrap_or(&unit);
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(w).map(|(x, w)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(w)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .zip(w)
        .map(|((x, y), w)| {
            let r = y - intercept - slope * x;
            w * r * r
        })
        .sum();
    (slope, (rss / dof / sxx).sqrt())
}

/// Pre-asymptotic drift detector: the slope over the lower half of the
/// grid differs materially from the slope over the upper half. (A plain
/// monotone-residual check cannot work: OLS residuals are orthogonal to
/// the regressor, so they can never drift monotonically.)
fn slopes_drift(xs: &[f64], ys: &[f64]) -> bool {
    let half = xs.len() / 2;
    let (lo, se_lo) = ols_slope(&xs[..half], &ys[..half], None);
    let (hi, se_hi) = ols_slope(&xs[half..], &ys[half..], None);
    let gap = (lo - hi).abs();
    gap > 0.02 && gap > 3.0 * (se_lo + se_hi)
}

/// Fit `log(value / log^log_power n)` against `log n` by least squares.
///
/// `errors`, when given, are absolute standard errors on `values`
/// (sampled cumulants); they turn the regression into a weighted fit and
/// inflate `stderr` accordingly. Non-positive values are a domain error:
/// they signal an identically-zero family the caller must skip.
pub fn fit_exponent(
    points: &[(usize, f64)],
    log_power: u32,
    errors: Option<&[f64]>,
) -> Result<(f64, f64, bool)> {
    if points.len() < 2 {
        return Err(Error::domain("exponent fit needs at least two points"));
    }
    if let Some(e) = errors {
        if e.len() != points.len() {
            return Err(Error::domain("error vector length mismatch"));
        }
    }
    for &(n, v) in points {
        if n < 2 {
            return Err(Error::domain("exponent fit needs n ≥ 2"));
        }
        if !(v > 0.0) {
            return Err(Error::domain(format!(
                "non-positive value {v} at n = {n}; identically-zero families have no rate"
            )));
        }
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|&(n, v)| v.ln() - log_power as f64 * (n as f64).ln().ln())
        .collect();
    // Weight by inverse variance of log(value): Var(log v) ≈ (SE/v)².
    let weights: Option<Vec<f64>> = errors.map(|es| {
        points
            .iter()
            .zip(es)
            .map(|(&(_, v), &e)| if e > 0.0 { (v / e).powi(2).min(1e12) } else { 1e12 })
            .collect()
    });

    let use_top_half = points.len() >= 6 && slopes_drift(&xs, &ys);
    let (xs, ys, weights) = if use_top_half {
        let half = points.len() / 2;
        (
            xs[half..].to_vec(),
            ys[half..].to_vec(),
            weights.map(|w| w[half..].to_vec()),
        )
    } else {
        (xs, ys, weights)
    };
    let (slope, mut stderr) = ols_slope(&xs, &ys, weights.as_deref());
    if let Some(w) = &weights {
        // Propagate the sampled-point uncertainty itself: the slope is a
        // linear functional of ys, so its variance from measurement noise
        // is Σ c_i² σ_i² with c_i the OLS coefficients.
        let sw: f64 = w.iter().sum();
        let mx = xs.iter().zip(w).map(|(x, wi)| wi * x).sum::<f64>() / sw;
        let sxx: f64 = xs.iter().zip(w).map(|(x, wi)| wi * (x - mx) * (x - mx)).sum();
        let noise_var: f64 = xs
            .iter()
            .zip(w)
            .map(|(x, wi)| {
                let c = wi * (x - mx) / sxx;
                c * c / wi.max(1e-300)
            })
            .sum();
        stderr = (stderr * stderr + noise_var).sqrt();
    }
    Ok((slope, stderr, use_top_half))
}

/// One row of `sandwich.csv`: cumulants, distances, and the ratio for a
/// single spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub q: u32,
    pub h: f64,
    pub n: usize,
    pub kappa3: f64,
    pub kappa4: f64,
    pub m_stat: f64,
    pub tv_density: f64,
    pub tv_uncertainty: f64,
    pub sandwich_ratio: f64,
}

/// Configuration of a rates run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesPlan {
    pub q_values: Vec<u32>,
    pub h_values: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// Replicates for the distance estimates; 0 disables distance rows.
    pub replicates: usize,
    pub seed: u64,
    pub tv_method: TvMethod,
    pub caps: ExactCaps,
}

impl Default for RatesPlan {
    fn default() -> Self {
        RatesPlan {
            q_values: vec![2, 3],
            h_values: vec![0.5, 0.7],
            n_grid: (7..=11).map(|p| 1usize << p).collect(),
            replicates: 50_000,
            seed: 0x5eed,
            tv_method: TvMethod::Kde,
            caps: ExactCaps::default(),
        }
    }
}

/// Full output of [`run_grid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesOutput {
    pub fits: Vec<RateFit>,
    pub sandwich: Vec<SandwichRecord>,
    pub warnings: Vec<String>,
}

fn geometric_grid(grid: &[usize]) -> bool {
    if grid.len() < 3 {
        return true;
    }
    let r0 = grid[1] as f64 / grid[0] as f64;
    grid.windows(2)
        .all(|w| (w[1] as f64 / w[0] as f64 / r0 - 1.0).abs() < 0.05)
}

/// Run the experiment grid: exact (or sampled, above the caps) cumulants
/// per `n`, optional distance reports, exponent fits per statistic, and
/// sandwich ratios.
pub fn run_grid(plan: &RatesPlan) -> Result<RatesOutput> {
    if plan.n_grid.len() < 2 {
        return Err(Error::config("rates need an n-grid with at least two points"));
    }
    let mut warnings = Vec::new();
    if !geometric_grid(&plan.n_grid) {
        warnings.push("n-grid is not geometric; log-log fits may be poorly conditioned".into());
    }
    let mut fits = Vec::new();
    let mut sandwich = Vec::new();

    for &q in &plan.q_values {
        for &h in &plan.h_values {
            let probe = VariationSpec::new(q, h, plan.n_grid[0])?;
            if !probe.in_clt_regime() {
                warnings.push(format!(
                    "q={q} H={h}: outside the CLT regime (H ≥ 1 - 1/(2q)); skipped"
                ));
                continue;
            }
            // value, SE (0 for exact), per statistic and n.
            let mut k3_pts: Vec<(usize, f64)> = Vec::new();
            let mut k4_pts: Vec<(usize, f64)> = Vec::new();
            let mut k4_errs: Vec<f64> = Vec::new();
            let mut tv_pts: Vec<(usize, f64)> = Vec::new();
            let mut tv_errs: Vec<f64> = Vec::new();

            for &n in &plan.n_grid {
                let spec = VariationSpec::new(q, h, n)?;
                let (report, k4_se) = cumulants_for_rates(&spec, &plan.caps, plan.seed)?;
                if q % 2 == 0 {
                    k3_pts.push((n, report.kappa3.abs()));
                }
                k4_pts.push((n, report.kappa4));
                k4_errs.push(k4_se);

                let mut tv_value = f64::NAN;
                let mut tv_unc = f64::NAN;
                if plan.replicates > 0 {
                    let dr = distance_for_spec(&spec, &report, plan)?;
                    tv_value = dr.tv_density.value;
                    tv_unc = dr.tv_density.uncertainty;
                    tv_pts.push((n, tv_value));
                    tv_errs.push(tv_unc);
                }
                sandwich.push(SandwichRecord {
                    q,
                    h,
                    n,
                    kappa3: report.kappa3,
                    kappa4: report.kappa4,
                    m_stat: report.m_stat,
                    tv_density: tv_value,
                    tv_uncertainty: tv_unc,
                    sandwich_ratio: if report.m_stat > 0.0 {
                        tv_value / report.m_stat
                    } else {
                        f64::NAN
                    },
                });
            }

            push_fit(&mut fits, &mut warnings, Statistic::Kappa3, q, h, &k3_pts, None);
            push_fit(
                &mut fits,
                &mut warnings,
                Statistic::Kappa4,
                q,
                h,
                &k4_pts,
                Some(&k4_errs),
            );
            push_fit(
                &mut fits,
                &mut warnings,
                Statistic::Tv,
                q,
                h,
                &tv_pts,
                Some(&tv_errs),
            );
        }
    }

    // Stability heuristic on the ratio sequence of each (q, H) family.
    for &q in &plan.q_values {
        for &h in &plan.h_values {
            let ratios: Vec<f64> = sandwich
                .iter()
                .filter(|r| r.q == q && r.h == h && r.sandwich_ratio.is_finite())
                .map(|r| r.sandwich_ratio)
                .collect();
            if ratios.len() >= 4 {
                let mut sorted = ratios.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let central = &sorted[sorted.len() / 4..(3 * sorted.len()).div_ceil(4)];
                let lo = central.first().copied().unwrap_or(1.0) / 2.0;
                let hi = central.last().copied().unwrap_or(1.0) * 2.0;
                if ratios.iter().any(|&r| r < lo || r > hi) {
                    warnings.push(format!(
                        "q={q} H={h}: sandwich ratios leave [{lo:.3}, {hi:.3}] (central-half band)"
                    ));
                }
            }
        }
    }
    Ok(RatesOutput {
        fits,
        sandwich,
        warnings,
    })
}

fn push_fit(
    fits: &mut Vec<RateFit>,
    warnings: &mut Vec<String>,
    statistic: Statistic,
    q: u32,
    h: f64,
    points: &[(usize, f64)],
    errors: Option<&[f64]>,
) {
    if points.is_empty() {
        return;
    }
    let theory = match theoretical_exponent(q, h, statistic) {
        Ok(t) => t,
        Err(_) => return, // family has no tabulated rate; nothing to compare
    };
    match fit_exponent(points, theory.log_power, errors) {
        Ok((fitted, stderr, top_half_only)) => fits.push(RateFit {
            statistic,
            q,
            h,
            fitted_exponent: fitted,
            stderr,
            theoretical_exponent: theory.exponent,
            log_power: theory.log_power,
            regime_label: theory.regime_label.to_string(),
            top_half_only,
            points_used: points.len(),
        }),
        Err(e) => warnings.push(format!("q={q} H={h} {statistic}: fit skipped ({e})")),
    }
}

/// Replicates used for the sampled-κ₄ fallback above the exact caps.
const KAPPA4_FALLBACK_REPLICATES: usize = 400_000;

/// Exact cumulants when the caps allow, else exact κ₂/κ₃ plus sampled κ₄
/// with its standard error (second return value; 0 for exact reports).
pub fn cumulants_for_rates(
    spec: &VariationSpec,
    caps: &ExactCaps,
    seed: u64,
) -> Result<(CumulantReport, f64)> {
    match exact_cumulants(spec, caps) {
        Ok(report) => Ok((report, 0.0)),
        Err(Error::Capacity(_)) => {
            let (kappa2, kappa3) = exact_kappa2_kappa3(spec)?;
            let sc = crate::sampler::sampled_cumulants(spec, KAPPA4_FALLBACK_REPLICATES, seed)?;
            let report = CumulantReport {
                spec: *spec,
                kappa2,
                kappa3,
                kappa4: sc.kappa4,
                m_stat: kappa3.abs().max(sc.kappa4),
            };
            Ok((report, sc.kappa4_se))
        }
        Err(e) => Err(e),
    }
}

fn distance_for_spec(
    spec: &VariationSpec,
    report: &CumulantReport,
    plan: &RatesPlan,
) -> Result<DistanceReport> {
    let batch = sample_fn(spec, plan.replicates, plan.seed)?;
    distance_report(&batch, report.kappa4.max(0.0), report.m_stat, plan.tv_method)
}

/// Write `rates_summary.csv`: one row per (q, H, statistic) fit.
pub fn write_rates_summary(path: &Path, fits: &[RateFit]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "statistic,q,h,fitted_exponent,stderr,theoretical_exponent,log_power,regime_label,top_half_only,points_used"
    )?;
    for fit in fits {
        writeln!(
            f,
            "{},{},{},{:.6},{:.6},{:.6},{},{:?},{},{}",
            fit.statistic,
            fit.q,
            fit.h,
            fit.fitted_exponent,
            fit.stderr,
            fit.theoretical_exponent,
            fit.log_power,
            fit.regime_label,
            fit.top_half_only,
            fit.points_used
        )?;
    }
    Ok(())
}

/// Write `sandwich.csv`: one row per spec.
pub fn write_sandwich(path: &Path, records: &[SandwichRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "q,h,n,kappa3,kappa4,m_stat,tv_density,tv_uncertainty,sandwich_ratio"
    )?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e}",
            r.q, r.h, r.n, r.kappa3, r.kappa4, r.m_stat, r.tv_density, r.tv_uncertainty, r.sandwich_ratio
        )?;
    }
    Ok(())
}

/// Symbolic consistency of the tables: for `q ∈ {2, 3}`, the slower of
/// the two cumulant rates must equal the `d_TV` rate at every `H`.
///
/// Rates compare lexicographically: larger exponent first, then larger
/// log power. For odd `q` the κ₃ rate is absent and κ₄ alone must match.
pub fn tables_consistent(samples_per_cell: usize) -> bool {
    for q in [2u32, 3] {
        let clt_edge = 1.0 - 1.0 / (2.0 * q as f64);
        let mut hs: Vec<f64> = (1..samples_per_cell)
            .map(|i| clt_edge * i as f64 / samples_per_cell as f64)
            .filter(|&h| h > 1e-6)
            .collect();
        // Make sure the boundary H values themselves are covered.
        hs.extend([1.0 - 2.0 / (3.0 * q as f64), 1.0 - 3.0 / (4.0 * q as f64)]);
        hs.retain(|&h| h > 0.0 && h < clt_edge - 1e-12);
        for h in hs {
            let k4 = theoretical_exponent(q, h, Statistic::Kappa4).unwrap();
            let tv = theoretical_exponent(q, h, Statistic::Tv).unwrap();
            let slowest = if q % 2 == 0 {
                let k3 = theoretical_exponent(q, h, Statistic::Kappa3).unwrap();
                std::cmp::max_by(k3, k4, |a, b| {
                    (a.exponent, a.log_power)
                        .partial_cmp(&(b.exponent, b.log_power))
                        .unwrap()
                })
            } else {
                k4
            };
            if (slowest.exponent - tv.exponent).abs() > 1e-12 || slowest.log_power != tv.log_power {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_examples() {
        let r = theoretical_exponent(2, 0.5, Statistic::Kappa3).unwrap();
        assert_eq!((r.exponent, r.log_power), (-0.5, 0));
        let r = theoretical_exponent(5, 0.75, Statistic::Kappa4).unwrap();
        assert_eq!((r.exponent, r.log_power), (-1.0, 1));
        let r = theoretical_exponent(2, 2.0 / 3.0, Statistic::Kappa3).unwrap();
        assert_eq!((r.exponent, r.log_power), (-0.5, 2));
        let r = theoretical_exponent(2, 0.7, Statistic::Kappa4).unwrap();
        assert!((r.exponent - (-0.4)).abs() < 1e-12);
        assert_eq!(r.log_power, 0);
        let r = theoretical_exponent(3, 0.8, Statistic::Kappa4).unwrap();
        assert!((r.exponent - (-0.4)).abs() < 1e-12);
        let r = theoretical_exponent(5, 0.8, Statistic::Kappa4).unwrap();
        assert!((r.exponent - (-0.8)).abs() < 1e-12);
        let r = theoretical_exponent(2, 0.7, Statistic::Tv).unwrap();
        assert!((r.exponent - (6.0 * 0.7 - 4.5)).abs() < 1e-12);
        let r = theoretical_exponent(3, 0.8, Statistic::Tv).unwrap();
        assert!((r.exponent - (12.0 * 0.8 - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn unsupported_requests() {
        assert!(theoretical_exponent(3, 0.5, Statistic::Kappa3).is_err()); // odd q
        assert!(theoretical_exponent(4, 0.5, Statistic::Tv).is_err()); // q > 3
        assert!(theoretical_exponent(2, 0.8, Statistic::Kappa4).is_err()); // past CLT edge
        assert!(theoretical_exponent(2, 0.75, Statistic::Kappa4).is_err()); // at CLT edge
        assert!(theoretical_exponent(1, 0.5, Statistic::Kappa4).is_err());
    }

    #[test]
    fn exponents_continuous_within_regimes() {
        // Piecewise pieces must agree at their interior boundaries
        // (exponents match; only the log power jumps).
        for q in [2u32, 4, 6] {
            let b = 1.0 - 2.0 / (3.0 * q as f64);
            let below = theoretical_exponent(q, b - 1e-9, Statistic::Kappa3).unwrap();
            let at = theoretical_exponent(q, b, Statistic::Kappa3).unwrap();
            let above = theoretical_exponent(q, b + 1e-9, Statistic::Kappa3).unwrap();
            assert!((below.exponent - at.exponent).abs() < 1e-6);
            assert!((above.exponent - at.exponent).abs() < 1e-6);
            assert_eq!(at.log_power, 2);
        }
        for q in [4u32, 5, 8] {
            let at = theoretical_exponent(q, 0.75, Statistic::Kappa4).unwrap();
            assert_eq!((at.exponent, at.log_power), (-1.0, 1));
            let b2 = 1.0 - 1.0 / (2.0 * q as f64 - 2.0);
            let at2 = theoretical_exponent(q, b2, Statistic::Kappa4).unwrap();
            assert_eq!(at2.log_power, 2);
            assert!((at2.exponent - (4.0 * b2 - 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn table_consistency_dense_grid() {
        assert!(tables_consistent(2000));
    }

    #[test]
    fn fit_recovers_pure_power_law() {
        let pts: Vec<(usize, f64)> = (7..=13)
            .map(|p| {
                let n = 1usize << p;
                (n, 3.0 * (n as f64).powf(-0.5))
            })
            .collect();
        let (slope, stderr, top) = fit_exponent(&pts, 0, None).unwrap();
        assert!((slope + 0.5).abs() < 1e-10);
        assert!(stderr < 1e-9);
        assert!(!top);
    }

    #[test]
    fn fit_divides_out_log_power() {
        let pts: Vec<(usize, f64)> = (7..=13)
            .map(|p| {
                let n = 1usize << p;
                let ln = (n as f64).ln();
                (n, (n as f64).powf(-1.0) * ln * ln * ln)
            })
            .collect();
        let (slope, _, _) = fit_exponent(&pts, 3, None).unwrap();
        assert!((slope + 1.0).abs() < 1e-10);
        // Fitting without the correction shows the bias the log term causes.
        let (raw, _, _) = fit_exponent(&pts, 0, None).unwrap();
        assert!(raw > -0.8);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_exponent(&[(128, 1.0)], 0, None).is_err());
        assert!(fit_exponent(&[(128, 1.0), (256, 0.0)], 0, None).is_err());
        assert!(fit_exponent(&[(128, 1.0), (256, -0.5)], 0, None).is_err());
        assert!(fit_exponent(&[(1, 1.0), (256, 0.5)], 0, None).is_err());
        assert!(fit_exponent(&[(128, 1.0), (256, 0.5)], 0, Some(&[0.1])).is_err());
    }

    #[test]
    fn fit_uses_top_half_on_curved_data() {
        // value = n^{-1/2} (1 + 40/n): a strong transient that decays.
        let pts: Vec<(usize, f64)> = (4..=13)
            .map(|p| {
                let n = 1usize << p;
                (n, (n as f64).powf(-0.5) * (1.0 + 40.0 / n as f64))
            })
            .collect();
        let (slope, _, top) = fit_exponent(&pts, 0, None).unwrap();
        assert!(top, "half-grid slope drift should trigger the top-half refit");
        // The surviving transient still biases the top-half slope by
        // ~ln(1.005/1.08)/ln(16) ≈ -0.026; the full-grid fit is off by
        // several times that.
        assert!((slope + 0.5).abs() < 0.04, "slope {slope}");
        let half = pts.len() / 2;
        let (full_tail, _) = {
            let xs: Vec<f64> = pts[..half].iter().map(|&(n, _)| (n as f64).ln()).collect();
            let ys: Vec<f64> = pts[..half].iter().map(|&(_, v)| v.ln()).collect();
            ols_slope(&xs, &ys, None)
        };
        assert!((full_tail + 0.5).abs() > 0.08, "lower half should be visibly biased");
    }

    #[test]
    fn weighted_fit_inflates_stderr() {
        let pts: Vec<(usize, f64)> = (7..=12)
            .map(|p| {
                let n = 1usize << p;
                (n, 2.0 * (n as f64).powf(-1.0))
            })
            .collect();
        let (_, se_exact, _) = fit_exponent(&pts, 0, None).unwrap();
        let errs = vec![0.3 * 2.0 * (pts[0].0 as f64).powf(-1.0); pts.len()];
        let (slope, se_noisy, _) = fit_exponent(&pts, 0, Some(&errs)).unwrap();
        assert!((slope + 1.0).abs() < 1e-9);
        assert!(se_noisy > se_exact);
        assert!(se_noisy > 0.05);
    }

    #[test]
    fn exact_kappa3_sequence_recovers_minus_half() {
        let pts: Vec<(usize, f64)> = (7..=11)
            .map(|p| {
                let n = 1usize << p;
                let spec = VariationSpec::new(2, 0.5, n).unwrap();
                let rep = exact_cumulants(&spec, &ExactCaps::default()).unwrap();
                (n, rep.kappa3.abs())
            })
            .collect();
        let (slope, _, _) = fit_exponent(&pts, 0, None).unwrap();
        assert!((slope + 0.5).abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn grid_runs_and_writes_csv() {
        let plan = RatesPlan {
            q_values: vec![2],
            h_values: vec![0.5],
            n_grid: vec![64, 128, 256, 512],
            replicates: 0,
            seed: 7,
            tv_method: TvMethod::Kde,
            caps: ExactCaps::default(),
        };
        let out = run_grid(&plan).unwrap();
        assert_eq!(out.sandwich.len(), 4);
        assert!(out
            .fits
            .iter()
            .any(|f| f.statistic == Statistic::Kappa3 && (f.fitted_exponent + 0.5).abs() < 0.05));
        assert!(out
            .fits
            .iter()
            .any(|f| f.statistic == Statistic::Kappa4 && (f.fitted_exponent + 1.0).abs() < 0.1));
        let dir = tempfile::tempdir().unwrap();
        let summary = dir.path().join("rates_summary.csv");
        let sandwich = dir.path().join("sandwich.csv");
        write_rates_summary(&summary, &out.fits).unwrap();
        write_sandwich(&sandwich, &out.sandwich).unwrap();
        let text = std::fs::read_to_string(&summary).unwrap();
        assert!(text.starts_with("statistic,q,h,fitted_exponent"));
        assert_eq!(text.lines().count(), 1 + out.fits.len());
        let text = std::fs::read_to_string(&sandwich).unwrap();
        assert_eq!(text.lines().count(), 1 + out.sandwich.len());
    }

    #[test]
    fn grid_flags_non_clt_specs() {
        let plan = RatesPlan {
            q_values: vec![2],
            h_values: vec![0.9],
            n_grid: vec![64, 128],
            replicates: 0,
            seed: 7,
            tv_method: TvMethod::Kde,
            caps: ExactCaps::default(),
        };
        let out = run_grid(&plan).unwrap();
        assert!(out.fits.is_empty());
        assert!(out.warnings.iter().any(|w| w.contains("CLT regime")));
    }
}
