//! Shared numerical utilities: compensated summation and Gauss–Hermite
//! quadrature for expectations against the standard normal weight.

/// Kahan compensated accumulator.
///
/// Lattice sums in this crate add up to a few 10⁸ slowly decaying terms;
/// plain summation loses about three digits there.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Kahan-sum a slice in index order (deterministic for any producer).
pub fn kahan_total(values: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Gauss–Hermite rule for the probabilists' weight `e^{-x²/2}/√(2π)`.
///
/// `nodes[i]` are the roots of the probabilists' Hermite polynomial of
/// degree `n` and the weights sum to one, so
/// `E[g(N)] ≈ Σ weights[i] · g(nodes[i])` for `N ~ N(0,1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Build the `n`-point rule by Golub–Welsch: the Jacobi matrix of the
    /// probabilists' Hermite recurrence is symmetric tridiagonal with zero
    /// diagonal and off-diagonal `√k`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
        let (eigenvalues, first_components) = symmetric_tridiagonal_eigen(&diag, &off);
        let mut pairs: Vec<(f64, f64)> = eigenvalues
            .iter()
            .zip(first_components.iter())
            .map(|(&x, &c)| (x, c * c))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let nodes = pairs.iter().map(|p| p.0).collect();
        let weights = pairs.iter().map(|p| p.1).collect();
        GaussHermite { nodes, weights }
    }

    /// `E[g(N)]` for `N ~ N(0,1)`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for (&x, &w) in self.nodes.iter().zip(self.weights.iter()) {
            acc.add(w * g(x));
        }
        acc.value()
    }
}

/// Eigenvalues and first components of the eigenvectors of a symmetric
/// tridiagonal matrix, by the implicit QL algorithm (classic `tql2`,
/// restricted to tracking the first row of the eigenvector matrix).
fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    // z tracks row 0 of the accumulated rotations.
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tridiagonal QL failed to converge");

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Rotate the tracked eigenvector row.
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_decaying_series() {
        let mut naive = 0.0f64;
        let mut kahan = KahanSum::new();
        for k in 1..2_000_000u64 {
            let term = 1.0 / (k as f64 * k as f64);
            naive += term;
            kahan.add(term);
        }
        let exact = std::f64::consts::PI * std::f64::consts::PI / 6.0 - 1.0 / 1_999_999.5;
        assert!((kahan.value() - exact).abs() <= (naive - exact).abs() + 1e-15);
    }

    #[test]
    fn gauss_hermite_standard_moments() {
        let gh = GaussHermite::new(64);
        let total: f64 = gh.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(gh.expect(|x| x).abs() < 1e-12);
        assert!((gh.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((gh.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!((gh.expect(|x| x.powi(6)) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn gauss_hermite_cos_expectation() {
        // E[cos N] = e^{-1/2}
        let gh = GaussHermite::new(96);
        assert!((gh.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn doubling_nodes_is_stable() {
        let g64 = GaussHermite::new(64).expect(|x| (x.sin() + 0.3 * x).tanh());
        let g128 = GaussHermite::new(128).expect(|x| (x.sin() + 0.3 * x).tanh());
        assert!((g64 - g128).abs() < 1e-10);
    }
}
