//! Exact cumulants, exact simulation, and total-variation rate checks for
//! Hermite variations of fractional Gaussian noise.
//!
//! The central object is the normalized Hermite variation
//!
//! ```text
//! F_n = (n v_n)^{-1/2} Σ_{k=0}^{n-1} H_q(X_k),
//! ```
//!
//! where `H_q` is the probabilists' Hermite polynomial of degree `q ≥ 2`,
//! `{X_k}` is a stationary standard Gaussian sequence (fractional Gaussian
//! noise with Hurst index `H`), and `v_n > 0` makes `E[F_n²] = 1`.
//!
//! The crate computes:
//!
//! * exact third and fourth cumulants of `F_n` by Wick-diagram enumeration
//!   ([`diagrams`]),
//! * exact fGn samples by circulant embedding and Monte Carlo batches of
//!   `F_n` ([`sampler`]),
//! * total-variation and Kolmogorov distance estimates to the standard
//!   normal, together with fourth-moment upper bounds and a trigonometric
//!   lower bound ([`distances`]),
//! * numerical solutions of Stein's equation and checks of the classical
//!   Stein bounds ([`stein`]),
//! * log–log exponent fits against the piecewise rate tables of the
//!   Breuer–Major regime ([`rates`]).
//!
//! All Hermite polynomials are in the **probabilists'** normalization
//! (`H_2(x) = x² - 1`, leading coefficient 1). Mixing in the physicists'
//! convention silently corrupts every cumulant downstream, so nothing in
//! this crate ever rescales by √2.
//!
//! # Example
//!
//! ```
//! use hermite_variations::covariance::VariationSpec;
//! use hermite_variations::diagrams::{exact_cumulants, ExactCaps};
//!
//! // Quadratic variation of iid noise: κ₃ = √(8/n), κ₄ = 12/n.
//! let spec = VariationSpec::new(2, 0.5, 10).unwrap();
//! let report = exact_cumulants(&spec, &ExactCaps::default()).unwrap();
//! assert!((report.kappa3 - (8.0f64 / 10.0).sqrt()).abs() < 1e-10);
//! assert!((report.kappa4 - 1.2).abs() < 1e-10);
//! ```

pub mod config;
pub mod covariance;
pub mod diagrams;
pub mod distances;
pub mod error;
pub mod hermite;
pub mod numeric;
pub mod rates;
pub mod sampler;
pub mod stein;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
