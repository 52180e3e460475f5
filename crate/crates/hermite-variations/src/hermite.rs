//! Probabilists' Hermite polynomials.
//!
//! The defining recursion is `H_0 = 1`, `H_{q+1}(x) = x H_q(x) - H'_q(x)`,
//! which together with `H'_q = q H_{q-1}` gives the numerically stable
//! three-term form used here:
//!
//! ```text
//! H_{q+1}(x) = x H_q(x) - q H_{q-1}(x).
//! ```
//!
//! This is the **probabilists'** normalization: `H_1(x) = x`,
//! `H_2(x) = x² - 1`, `H_3(x) = x³ - 3x`, `H_4(x) = x⁴ - 6x² + 3`, with
//! `E[H_p(N) H_q(N)] = q!·1{p=q}`. Do not substitute the physicists'
//! family: every cumulant in this crate depends on this convention.
//!
//! ```
//! use hermite_variations::hermite::hermite_eval;
//! assert_eq!(hermite_eval(2, 3.0), 8.0);   // 3² - 1
//! assert_eq!(hermite_eval(3, 1.0), -2.0);  // 1 - 3
//! ```

/// Evaluate `H_q(x)` by the three-term recurrence.
///
/// Total on finite inputs; explicit coefficient expansion is avoided
/// because the coefficients grow factorially and cancel catastrophically
/// for `q ≥ 8`.
#[inline]
pub fn hermite_eval(q: u32, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0; // H_0
            let mut cur = x; // H_1
            for k in 1..q {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Elementwise [`hermite_eval`]; bit-identical to the scalar loop.
pub fn hermite_eval_batch(q: u32, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| hermite_eval(q, x)).collect()
}

/// Coefficients of `H_q` in the monomial basis, `c[k]` multiplying `x^k`.
///
/// Test-oracle helper only (exact for small `q`); evaluation should go
/// through [`hermite_eval`].
pub fn hermite_coefficients(q: u32) -> Vec<f64> {
    let mut prev = vec![1.0]; // H_0
    if q == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0]; // H_1
    for k in 1..q {
        let mut next = vec![0.0; k as usize + 2];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += c; // x * H_k
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= k as f64 * c; // - k * H_{k-1}
        }
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spec_values() {
        assert_eq!(hermite_eval(2, 3.0), 8.0);
        assert_eq!(hermite_eval(0, 17.5), 1.0);
        assert_eq!(hermite_eval(4, 0.0), 3.0);
        assert_eq!(hermite_eval(3, 1.0), -2.0);
        assert_eq!(hermite_eval_batch(2, &[0.0, 1.0, 2.0]), vec![-1.0, 0.0, 3.0]);
        assert_eq!(hermite_eval_batch(1, &[5.0]), vec![5.0]);
        assert_eq!(hermite_eval_batch(4, &[1.0]), vec![-2.0]);
    }

    #[test]
    fn recurrence_consistency_on_grid() {
        for q in 0..=12u32 {
            let mut x = -6.0;
            while x <= 6.0 {
                let lhs = hermite_eval(q + 1, x);
                let rhs = x * hermite_eval(q, x)
                    - if q == 0 { 0.0 } else { q as f64 * hermite_eval(q - 1, x) };
                let scale = lhs.abs().max(rhs.abs()).max(1.0);
                assert!((lhs - rhs).abs() / scale <= 1e-9, "q={q} x={x}");
                x += 0.125;
            }
        }
    }

    #[test]
    fn derivative_identity_symbolic() {
        // H'_q = q H_{q-1} on exact coefficients, q ≤ 10.
        for q in 1..=10u32 {
            let c = hermite_coefficients(q);
            let deriv: Vec<f64> = (1..c.len()).map(|k| c[k] * k as f64).collect();
            let lower: Vec<f64> = hermite_coefficients(q - 1)
                .iter()
                .map(|&v| v * q as f64)
                .collect();
            assert_eq!(deriv.len(), lower.len());
            for (a, b) in deriv.iter().zip(lower.iter()) {
                assert_eq!(a, b, "q={q}");
            }
        }
    }

    #[test]
    fn orthogonality_by_quadrature() {
        let gh = crate::numeric::GaussHermite::new(64);
        for p in 0..=8u32 {
            for q in 0..=8u32 {
                let est = gh.expect(|x| hermite_eval(p, x) * hermite_eval(q, x));
                let expected = if p == q {
                    (1..=q as u64).product::<u64>() as f64
                } else {
                    0.0
                };
                assert!((est - expected).abs() < 1e-8, "p={p} q={q} est={est}");
            }
        }
    }

    proptest! {
        #[test]
        fn parity(q in 0u32..12, x in -6.0f64..6.0) {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            let lhs = hermite_eval(q, -x);
            let rhs = sign * hermite_eval(q, x);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
        }

        #[test]
        fn batch_matches_scalar(q in 0u32..10, xs in proptest::collection::vec(-5.0f64..5.0, 0..20)) {
            let batch = hermite_eval_batch(q, &xs);
            for (i, &x) in xs.iter().enumerate() {
                prop_assert_eq!(batch[i], hermite_eval(q, x));
            }
        }
    }
}
