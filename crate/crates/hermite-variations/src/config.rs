//! Flat key–value experiment configuration.
//!
//! The format is deliberately rigid: one `key = value` pair per line,
//! `#` comments, a fixed key set with strict unknown-key rejection, and
//! a SHA-256 hash of the canonical serialization embedded in every
//! output file so that runs are traceable to their exact configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distances::TvMethod;
use crate::error::Error;
use crate::Result;

/// Full experiment configuration shared by all subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Hermite degrees, each ≥ 2.
    pub qs: Vec<u32>,
    /// Hurst indices, each in (0, 1).
    pub hs: Vec<f64>,
    /// Sample sizes; expected geometric (warned, not rejected).
    pub n_grid: Vec<usize>,
    /// Monte Carlo replicates per spec.
    pub replicates: usize,
    /// Master seed; all randomness derives from it.
    pub seed: u64,
    /// Cap on `n` for the O(n³) exact-κ₄ loop.
    pub exact_n_cap: usize,
    /// Output directory for artifact files.
    pub output_dir: PathBuf,
    /// Density estimator for the TV integral.
    pub tv_method: TvMethod,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            qs: vec![2, 3],
            hs: vec![0.5, 0.7],
            n_grid: vec![128, 256, 512, 1024, 2048],
            replicates: 50_000,
            seed: 0x5eed,
            exact_n_cap: 512,
            output_dir: PathBuf::from("out"),
            tv_method: TvMethod::Kde,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::config(format!("{key}: cannot parse '{s}'")))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{}'", raw.trim())))
}

impl ExperimentConfig {
    /// Parse the flat `key = value` text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            match key {
                "qs" => cfg.qs = parse_list(key, value)?,
                "hs" => cfg.hs = parse_list(key, value)?,
                "n_grid" => cfg.n_grid = parse_list(key, value)?,
                "replicates" => cfg.replicates = parse_scalar(key, value)?,
                "seed" => cfg.seed = parse_scalar(key, value)?,
                "exact_n_cap" => cfg.exact_n_cap = parse_scalar(key, value)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value.trim()),
                "tv_method" => cfg.tv_method = value.trim().parse()?,
                other => {
                    return Err(Error::config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.qs.is_empty() || self.hs.is_empty() || self.n_grid.is_empty() {
            return Err(Error::config("qs, hs, and n_grid must all be non-empty"));
        }
        for &q in &self.qs {
            if q < 2 {
                return Err(Error::config(format!("q must be ≥ 2, got {q}")));
            }
        }
        for &h in &self.hs {
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::config(format!("H must lie in (0,1), got {h}")));
            }
        }
        for &n in &self.n_grid {
            if n == 0 {
                return Err(Error::config("n_grid entries must be ≥ 1"));
            }
        }
        Ok(())
    }

    /// Extra check for subcommands that estimate distances.
    pub fn validate_for_distance(&self) -> Result<()> {
        self.validate()?;
        if self.replicates < crate::distances::MIN_COUNT {
            return Err(Error::config(format!(
                "distance estimation needs replicates ≥ {}, got {}",
                crate::distances::MIN_COUNT,
                self.replicates
            )));
        }
        Ok(())
    }

    /// Canonical single-line rendering; input to the config hash.
    pub fn canonical(&self) -> String {
        let join_us = |v: &[usize]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        let mut s = String::new();
        write!(
            s,
            "qs={};hs={};n_grid={};replicates={};seed={};exact_n_cap={};tv_method={:?}",
            self.qs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            self.hs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(","),
            join_us(&self.n_grid),
            self.replicates,
            self.seed,
            self.exact_n_cap,
            self.tv_method,
        )
        .expect("write to String cannot fail");
        s
    }

    /// Hex SHA-256 of the canonical form (output paths excluded, so the
    /// hash identifies the experiment, not where it lands on disk).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::new(), |mut acc, b| {
            write!(acc, "{b:02x}").expect("write to String cannot fail");
            acc
        })
    }
}
