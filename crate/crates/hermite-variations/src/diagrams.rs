//! Wick-diagram enumeration and exact cumulants of `F_n`.
//!
//! For jointly standard Gaussian `(X_1, …, X_m)` with correlations
//! `ρ(i,j)`, the moment `E[∏ H_q(X_i)]` expands as a sum over
//! edge-multiplicity matrices ("diagrams") with zero diagonal and row sums
//! `q`:
//!
//! ```text
//! E[∏ H_q(X_i)] = Σ_D weight(D) ∏_{i<j} ρ(i,j)^{e_ij},
//! ```
//!
//! and the joint *cumulant* keeps only the connected diagrams. The weight
//! counts the pairings realizing the multiplicity pattern:
//!
//! ```text
//! weight(D) = ∏_i [ q! / ∏_{j≠i} e_ij! ] × ∏_{i<j} e_ij!.
//! ```
//!
//! This formula is validated in two independent ways: against hard-coded
//! `q = 2` cases on first use (fail-fast), and against a brute-force
//! pairing expansion of the explicit polynomials in the test suite.
//!
//! For `m = 4` the row-sum constraints force opposite edges to share one
//! multiplicity, so every diagram is described by a triple `(a, b, c)`
//! with `a + b + c = q`:
//!
//! * one multiplicity zero → a 4-cycle, whose lattice sum is a trace of
//!   Toeplitz matrix products and is computed in `O(n² log n)` by FFT;
//! * all positive → a complete graph on 4 nodes, which requires the
//!   `O(n³)` difference-reindexed lattice loop and is therefore capped.

use std::sync::Once;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::covariance::{factorial, VariationSpec};
use crate::error::Error;
use crate::numeric::{kahan_total, KahanSum};
use crate::Result;

/// One Wick-contraction pattern among `m` Hermite nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    /// Node count, 2 ≤ m ≤ 4.
    pub m: usize,
    /// Symmetric edge-multiplicity matrix with zero diagonal.
    pub edges: Vec<Vec<u32>>,
    /// Number of pairings realizing this multiplicity pattern.
    pub weight: u128,
    /// Whether the support graph is connected.
    pub connected: bool,
}

impl Diagram {
    fn from_edges(q: u32, edges: Vec<Vec<u32>>) -> Self {
        let m = edges.len();
        let weight = diagram_weight(q, &edges);
        let connected = edges_connected(&edges);
        Diagram {
            m,
            edges,
            weight,
            connected,
        }
    }

    pub fn weight_f64(&self) -> f64 {
        self.weight as f64
    }
}

fn factorial_u128(k: u32) -> u128 {
    (1..=k as u128).product()
}

fn diagram_weight(q: u32, edges: &[Vec<u32>]) -> u128 {
    let m = edges.len();
    let mut w: u128 = 1;
    for i in 0..m {
        let mut per_node = factorial_u128(q);
        for j in 0..m {
            if j != i {
                per_node /= factorial_u128(edges[i][j]);
            }
        }
        w *= per_node;
    }
    for i in 0..m {
        for j in (i + 1)..m {
            w *= factorial_u128(edges[i][j]);
        }
    }
    w
}

fn edges_connected(edges: &[Vec<u32>]) -> bool {
    // Union-find over at most 4 nodes.
    let m = edges.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut x = x;
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if edges[i][j] > 0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let root = find(&mut parent, 0);
    (1..m).all(|i| find(&mut parent, i) == root)
}

/// The `(a, b, c)` parametrization of `m = 4` diagrams: opposite edges
/// `(1,2)/(3,4)` carry `a`, `(1,3)/(2,4)` carry `b`, `(1,4)/(2,3)` carry
/// `c`, with `a + b + c = q`.
fn m4_edges(a: u32, b: u32, c: u32) -> Vec<Vec<u32>> {
    vec![
        vec![0, a, b, c],
        vec![a, 0, c, b],
        vec![b, c, 0, a],
        vec![c, b, a, 0],
    ]
}

/// Weight of the `(a,b,c)` diagram: `(q!)⁴ / (a! b! c!)²`.
fn m4_weight(q: u32, a: u32, b: u32, c: u32) -> u128 {
    let denom = factorial_u128(a) * factorial_u128(b) * factorial_u128(c);
    let f = factorial_u128(q);
    f * f * f * f / (denom * denom)
}

static WEIGHT_CHECK: Once = Once::new();

/// Validate the weight formula against hard-coded `q = 2` cases.
///
/// Runs once per process before any diagram is used; a mismatch aborts.
pub fn validate_diagram_weights() {
    WEIGHT_CHECK.call_once(|| {
        let pair = enumerate_unchecked(2, 2, false);
        assert!(pair.len() == 1 && pair[0].weight == 2, "m=2 weight check");
        let triple = enumerate_unchecked(3, 2, false);
        assert!(triple.len() == 1 && triple[0].weight == 8, "m=3 weight check");
        let quad: Vec<_> = enumerate_unchecked(4, 2, true);
        assert!(
            quad.len() == 3 && quad.iter().all(|d| d.weight == 16),
            "m=4 cycle weight check"
        );
    });
}

fn enumerate_unchecked(m: usize, q: u32, connected_only: bool) -> Vec<Diagram> {
    let mut out = Vec::new();
    match m {
        2 => {
            let mut edges = vec![vec![0u32; 2]; 2];
            edges[0][1] = q;
            edges[1][0] = q;
            out.push(Diagram::from_edges(q, edges));
        }
        3 => {
            // Row sums force all three edges to q/2; no diagram if q is odd.
            if q % 2 == 0 {
                let half = q / 2;
                let mut edges = vec![vec![0u32; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            edges[i][j] = half;
                        }
                    }
                }
                out.push(Diagram::from_edges(q, edges));
            }
        }
        4 => {
            for a in 0..=q {
                for b in 0..=(q - a) {
                    let c = q - a - b;
                    let d = Diagram::from_edges(q, m4_edges(a, b, c));
                    debug_assert_eq!(d.weight, m4_weight(q, a, b, c));
                    out.push(d);
                }
            }
        }
        _ => unreachable!(),
    }
    if connected_only {
        out.retain(|d| d.connected);
    }
    out
}

/// All diagrams on `m` nodes with row sums `q`, in deterministic order.
pub fn enumerate_diagrams(m: usize, q: u32, connected_only: bool) -> Result<Vec<Diagram>> {
    if !(2..=4).contains(&m) {
        return Err(Error::unsupported(format!(
            "diagram enumeration supports m ∈ {{2,3,4}}, got {m}"
        )));
    }
    if q < 1 {
        return Err(Error::domain("Hermite degree must be ≥ 1 for diagrams"));
    }
    validate_diagram_weights();
    Ok(enumerate_unchecked(m, q, connected_only))
}

/// `E[∏_{i=1}^m H_q(X_i)]` for jointly standard Gaussians with the given
/// correlation matrix, by the diagram sum.
pub fn joint_hermite_moment(q: u32, rho: &[Vec<f64>]) -> Result<f64> {
    let m = rho.len();
    if !(2..=4).contains(&m) {
        return Err(Error::unsupported(format!(
            "joint moments support m ∈ {{2,3,4}}, got {m}"
        )));
    }
    for (i, row) in rho.iter().enumerate() {
        if row.len() != m {
            return Err(Error::domain("correlation matrix must be square"));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                return Err(Error::domain(format!("correlation ρ({i},{j}) = {v} outside [-1,1]")));
            }
            if (v - rho[j][i]).abs() > 1e-12 {
                return Err(Error::domain("correlation matrix must be symmetric"));
            }
        }
    }
    let diagrams = enumerate_diagrams(m, q, false)?;
    let mut acc = KahanSum::new();
    for d in &diagrams {
        let mut term = d.weight_f64();
        for i in 0..m {
            for j in (i + 1)..m {
                term *= rho[i][j].powi(d.edges[i][j] as i32);
            }
        }
        acc.add(term);
    }
    Ok(acc.value())
}

/// Exact `κ₂, κ₃, κ₄` and `M = max(|κ₃|, κ₄)` for one spec.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CumulantReport {
    pub spec: VariationSpec,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub m_stat: f64,
}

/// Size caps for the exact lattice sums.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExactCaps {
    /// Cap on `n` for the `O(n³)` complete-graph loop. Diagram classes
    /// reducible to Toeplitz traces are exempt (see `trace_cap`).
    pub k4_loop_cap: usize,
    /// Cap on `n` for the FFT trace path (`O(n² log n)`).
    pub trace_cap: usize,
}

impl Default for ExactCaps {
    fn default() -> Self {
        ExactCaps {
            k4_loop_cap: 512,
            trace_cap: 16384,
        }
    }
}

/// `κ₂(F_n)`, which equals 1 by the choice of `v_n`; computed anyway as a
/// consistency check on the normalization.
fn kappa2_from_table(spec: &VariationSpec, rho: &[f64]) -> f64 {
    let n = spec.n;
    let mut acc = KahanSum::new();
    acc.add(n as f64);
    for k in 1..n {
        acc.add(2.0 * (n - k) as f64 * rho[k].powi(spec.q as i32));
    }
    factorial(spec.q) * acc.value() / (spec.n as f64 * spec.v_n)
}

/// Reduced `O(n²)` third-cumulant lattice sum.
///
/// With `g(k) = ρ(k)^{q/2}` and translation invariance, the triple sum
/// over `[0,n)³` collapses to differences `(d₁, d₂)` with multiplicity
/// `n - max(0,d₁,d₂) + min(0,d₁,d₂)`.
fn kappa3_lattice_sum(n: usize, g: &[f64]) -> f64 {
    let ni = n as i64;
    let partials: Vec<f64> = (-(ni - 1)..ni)
        .into_par_iter()
        .map(|d1| {
            let mut acc = KahanSum::new();
            let g1 = g[d1.unsigned_abs() as usize];
            let hi = d1.max(0);
            let lo = d1.min(0);
            // Range of d2 keeping the index window non-empty.
            for d2 in (hi - ni + 1)..(lo + ni) {
                let cnt = ni - hi.max(d2.max(0)) + lo.min(d2.min(0));
                debug_assert!(cnt > 0);
                let g2 = g[d2.unsigned_abs() as usize];
                let g12 = g[(d2 - d1).unsigned_abs() as usize];
                acc.add(cnt as f64 * g1 * g2 * g12);
            }
            acc.value()
        })
        .collect();
    kahan_total(&partials)
}

/// Direct `O(n³)` third-cumulant sum over `[0,n)³`; test oracle for the
/// reduced form.
pub fn kappa3_lattice_sum_direct(n: usize, g: &[f64]) -> f64 {
    let ni = n as i64;
    let mut acc = KahanSum::new();
    for x1 in 0..ni {
        for x2 in 0..ni {
            for x3 in 0..ni {
                acc.add(
                    g[(x1 - x2).unsigned_abs() as usize]
                        * g[(x1 - x3).unsigned_abs() as usize]
                        * g[(x2 - x3).unsigned_abs() as usize],
                );
            }
        }
    }
    acc.value()
}

/// Monomial in the `(a,b,c)` diagram parametrization with its weight.
#[derive(Debug, Clone, Copy)]
struct M4Monomial {
    a: i32,
    b: i32,
    c: i32,
    weight: f64,
}

/// Difference-reindexed `O(n³)` lattice sum over quadruples for a set of
/// `m = 4` monomials. `rho` must cover lags `0..n`.
fn m4_lattice_sum(n: usize, rho: &[f64], monomials: &[M4Monomial]) -> f64 {
    let ni = n as i64;
    let monomials = monomials.to_vec();
    let partials: Vec<f64> = (-(ni - 1)..ni)
        .into_par_iter()
        .map(|d1| {
            let mut acc = KahanSum::new();
            let hi1 = d1.max(0);
            let lo1 = d1.min(0);
            for d2 in (hi1 - ni + 1)..(lo1 + ni) {
                let hi2 = hi1.max(d2);
                let lo2 = lo1.min(d2);
                let r1 = rho[d1.unsigned_abs() as usize];
                let r2 = rho[d2.unsigned_abs() as usize];
                let r12 = rho[(d2 - d1).unsigned_abs() as usize];
                for d3 in (hi2 - ni + 1)..(lo2 + ni) {
                    let cnt = ni - hi2.max(d3.max(0)) + lo2.min(d3.min(0));
                    debug_assert!(cnt > 0);
                    let r3 = rho[d3.unsigned_abs() as usize];
                    let r13 = rho[(d3 - d1).unsigned_abs() as usize];
                    let r23 = rho[(d3 - d2).unsigned_abs() as usize];
                    // Pair products for the three opposite-edge classes.
                    let x = r1 * r23; // edges (1,2),(3,4)
                    let y = r2 * r13; // edges (1,3),(2,4)
                    let z = r3 * r12; // edges (1,4),(2,3)
                    let mut term = 0.0;
                    for m in &monomials {
                        term += m.weight * x.powi(m.a) * y.powi(m.b) * z.powi(m.c);
                    }
                    acc.add(cnt as f64 * term);
                }
            }
            acc.value()
        })
        .collect();
    kahan_total(&partials)
}

/// Toeplitz matvec workspace: circulant embedding of the kernel, FFT size
/// the next power of two ≥ 2n.
struct ToeplitzOperator {
    n: usize,
    len: usize,
    kernel_fft: Vec<Complex<f64>>,
}

impl ToeplitzOperator {
    fn new(table: &[f64], n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let len = (2 * n).next_power_of_two();
        let mut kernel = vec![Complex::new(0.0, 0.0); len];
        for k in 0..n {
            kernel[k].re = table[k];
            if k > 0 {
                kernel[len - k].re = table[k];
            }
        }
        planner.plan_fft_forward(len).process(&mut kernel);
        ToeplitzOperator {
            n,
            len,
            kernel_fft: kernel,
        }
    }

    /// `y = T x` with `T[i][j] = table[|i-j|]`, via the circulant embedding.
    fn apply(
        &self,
        x: &[f64],
        fwd: &std::sync::Arc<dyn rustfft::Fft<f64>>,
        inv: &std::sync::Arc<dyn rustfft::Fft<f64>>,
        scratch: &mut Vec<Complex<f64>>,
    ) -> Vec<f64> {
        scratch.clear();
        scratch.resize(self.len, Complex::new(0.0, 0.0));
        for (i, &v) in x.iter().enumerate() {
            scratch[i].re = v;
        }
        fwd.process(scratch);
        for (s, k) in scratch.iter_mut().zip(self.kernel_fft.iter()) {
            *s *= k;
        }
        inv.process(scratch);
        let scale = 1.0 / self.len as f64;
        scratch[..self.n].iter().map(|c| c.re * scale).collect()
    }
}

/// `tr((T_u T_v)²)` for symmetric Toeplitz matrices with kernels
/// `rho^u`, `rho^v` on `[0,n)²`, in `O(n² log n)`.
///
/// Deterministic for any worker count: per-column contributions are
/// collected by index and combined in order.
fn cycle_trace(n: usize, rho_u: &[f64], rho_v: &[f64]) -> f64 {
    let mut planner = FftPlanner::new();
    let op_u = ToeplitzOperator::new(rho_u, n, &mut planner);
    let op_v = ToeplitzOperator::new(rho_v, n, &mut planner);
    let fwd = planner.plan_fft_forward(op_u.len);
    let inv = planner.plan_fft_inverse(op_u.len);

    let column = |table: &[f64], j: usize| -> Vec<f64> {
        (0..n).map(|i| table[i.abs_diff(j)]).collect()
    };

    let per_column: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(
            || Vec::new(),
            |scratch, j| {
                // P = T_u T_v. Column j of P is T_u (T_v e_j); column j of
                // Pᵀ = T_v T_u is T_v (T_u e_j). Both start from known
                // Toeplitz columns, so one matvec each.
                let p_col = op_u.apply(&column(rho_v, j), &fwd, &inv, scratch);
                let pt_col = op_v.apply(&column(rho_u, j), &fwd, &inv, scratch);
                let mut dot = KahanSum::new();
                for (a, b) in p_col.iter().zip(pt_col.iter()) {
                    dot.add(a * b);
                }
                dot.value()
            },
        )
        .collect();
    kahan_total(&per_column)
}

/// Power tables `ρ(k)^p` for each distinct positive multiplicity.
fn power_table(rho: &[f64], p: u32) -> Vec<f64> {
    rho.iter().map(|&r| r.powi(p as i32)).collect()
}

/// Classification of `m = 4` diagrams by their lattice-sum algorithm.
struct M4Classes {
    /// `(u, v, total_weight)` for 4-cycle diagrams sharing the unordered
    /// kernel pair `{u, v}`.
    cycles: Vec<(u32, u32, f64)>,
    /// All-positive `(a,b,c)` monomials, needing the `O(n³)` loop.
    complete: Vec<M4Monomial>,
    /// Disconnected `(q,0,0)`-type diagrams: weight per diagram (their
    /// lattice sum factorizes into pair sums).
    disconnected_weight: f64,
    disconnected_count: usize,
}

fn classify_m4(q: u32) -> M4Classes {
    let mut cycles: Vec<(u32, u32, f64)> = Vec::new();
    let mut complete = Vec::new();
    let mut disconnected_count = 0;
    for a in 0..=q {
        for b in 0..=(q - a) {
            let c = q - a - b;
            let w = m4_weight(q, a, b, c) as f64;
            let positive = [a, b, c].iter().filter(|&&m| m > 0).count();
            match positive {
                1 => disconnected_count += 1,
                2 => {
                    let mut uv: Vec<u32> =
                        [a, b, c].iter().copied().filter(|&m| m > 0).collect();
                    uv.sort_unstable();
                    if let Some(entry) =
                        cycles.iter_mut().find(|e| (e.0, e.1) == (uv[0], uv[1]))
                    {
                        entry.2 += w;
                    } else {
                        cycles.push((uv[0], uv[1], w));
                    }
                }
                _ => complete.push(M4Monomial {
                    a: a as i32,
                    b: b as i32,
                    c: c as i32,
                    weight: w,
                }),
            }
        }
    }
    let f = factorial(q);
    M4Classes {
        cycles,
        complete,
        disconnected_weight: f * f,
        disconnected_count,
    }
}

/// Connected `m = 4` lattice sum (unnormalized), choosing the trace path
/// for cycles and the capped loop for complete-graph diagrams.
fn kappa4_lattice_sum(spec: &VariationSpec, rho: &[f64], caps: &ExactCaps) -> Result<f64> {
    let n = spec.n;
    let classes = classify_m4(spec.q);
    if n > caps.trace_cap {
        return Err(Error::capacity(format!(
            "n = {n} exceeds the exact-κ₄ trace cap {}; use Monte Carlo cumulants instead",
            caps.trace_cap
        )));
    }
    if !classes.complete.is_empty() && n > caps.k4_loop_cap {
        return Err(Error::capacity(format!(
            "n = {n} exceeds the exact-κ₄ loop cap {} for complete-graph diagrams (q = {}); \
             use Monte Carlo cumulants instead",
            caps.k4_loop_cap, spec.q
        )));
    }
    let mut total = KahanSum::new();
    for &(u, v, weight) in &classes.cycles {
        let tu = power_table(rho, u);
        let tv = power_table(rho, v);
        total.add(weight * cycle_trace(n, &tu, &tv));
    }
    if !classes.complete.is_empty() {
        total.add(m4_lattice_sum(n, rho, &classes.complete));
    }
    Ok(total.value())
}

/// Connected `m = 4` lattice sum evaluated entirely by the `O(n³)` loop;
/// test oracle for the trace path.
pub fn kappa4_lattice_sum_loop_only(spec: &VariationSpec, rho: &[f64]) -> f64 {
    let classes = classify_m4(spec.q);
    let mut monomials = classes.complete.clone();
    for &(u, v, w) in &classes.cycles {
        // Re-expand grouped cycle weights into (a,b,c) monomials. The
        // grouped weight already sums the diagrams sharing {u,v}, and all
        // of them have the same lattice sum, so a single representative
        // monomial carries it.
        monomials.push(M4Monomial {
            a: u as i32,
            b: v as i32,
            c: 0,
            weight: w,
        });
    }
    m4_lattice_sum(spec.n, rho, &monomials)
}

/// Exact cumulants `κ₂, κ₃, κ₄` of `F_n` and `M = max(|κ₃|, κ₄)`.
pub fn exact_cumulants(spec: &VariationSpec, caps: &ExactCaps) -> Result<CumulantReport> {
    validate_diagram_weights();
    let n = spec.n;
    let rho = spec.covariance().rho_table(n);
    let norm = n as f64 * spec.v_n;

    let kappa2 = kappa2_from_table(spec, &rho);

    let kappa3 = if spec.q % 2 == 1 {
        0.0 // no m = 3 diagram exists when q is odd
    } else {
        let d = &enumerate_diagrams(3, spec.q, true)?[0];
        let g = power_table(&rho, spec.q / 2);
        d.weight_f64() * kappa3_lattice_sum(n, &g) / norm.powf(1.5)
    };

    let kappa4 = kappa4_lattice_sum(spec, &rho, caps)? / (norm * norm);

    Ok(CumulantReport {
        spec: *spec,
        kappa2,
        kappa3,
        kappa4,
        m_stat: kappa3.abs().max(kappa4),
    })
}

/// Exact `κ₂` and `κ₃` only, skipping the `κ₄` lattice sums.
///
/// Both are cheap (`O(n)` and `O(n²)`) at any `n` the crate handles, so
/// callers that must fall back to sampled `κ₄` still get these exactly.
pub fn exact_kappa2_kappa3(spec: &VariationSpec) -> Result<(f64, f64)> {
    validate_diagram_weights();
    let n = spec.n;
    let rho = spec.covariance().rho_table(n);
    let kappa2 = kappa2_from_table(spec, &rho);
    let kappa3 = if spec.q % 2 == 1 {
        0.0
    } else {
        let d = &enumerate_diagrams(3, spec.q, true)?[0];
        let g = power_table(&rho, spec.q / 2);
        d.weight_f64() * kappa3_lattice_sum(n, &g) / (n as f64 * spec.v_n).powf(1.5)
    };
    Ok((kappa2, kappa3))
}

/// `E[F_n⁴]` by summing over ALL `m = 4` diagrams, connected and
/// disconnected; must equal `κ₄ + 3` (consistency check of the
/// moment–cumulant relation).
pub fn moment4_all_diagrams(spec: &VariationSpec, caps: &ExactCaps) -> Result<f64> {
    validate_diagram_weights();
    let n = spec.n;
    let rho = spec.covariance().rho_table(n);
    let norm = n as f64 * spec.v_n;
    let connected = kappa4_lattice_sum(spec, &rho, caps)?;

    // Disconnected diagrams factor into the square of the pair sum
    // Σ_{x,y∈[0,n)} ρ(x-y)^q.
    let classes = classify_m4(spec.q);
    let mut pair = KahanSum::new();
    pair.add(n as f64);
    for k in 1..n {
        pair.add(2.0 * (n - k) as f64 * rho[k].powi(spec.q as i32));
    }
    let disconnected = classes.disconnected_count as f64
        * classes.disconnected_weight
        * pair.value()
        * pair.value();

    Ok((connected + disconnected) / (norm * norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::VariationSpec;

    #[test]
    fn enumerate_pair() {
        for q in 1..=8u32 {
            let ds = enumerate_diagrams(2, q, false).unwrap();
            assert_eq!(ds.len(), 1);
            assert_eq!(ds[0].edges[0][1], q);
            assert_eq!(ds[0].weight, factorial_u128(q));
            assert!(ds[0].connected);
        }
    }

    #[test]
    fn enumerate_triple() {
        assert!(enumerate_diagrams(3, 3, false).unwrap().is_empty());
        assert!(enumerate_diagrams(3, 5, false).unwrap().is_empty());
        let ds = enumerate_diagrams(3, 2, false).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].edges[0][1], 1);
        assert_eq!(ds[0].weight, 8);
    }

    #[test]
    fn enumerate_quad_cycles() {
        let ds = enumerate_diagrams(4, 2, true).unwrap();
        assert_eq!(ds.len(), 3);
        for d in &ds {
            assert_eq!(d.weight, 16);
            // each node has exactly two incident single edges
            for row in &d.edges {
                assert_eq!(row.iter().sum::<u32>(), 2);
            }
        }
    }

    #[test]
    fn unsupported_arity() {
        assert!(enumerate_diagrams(5, 2, false).is_err());
        assert!(enumerate_diagrams(1, 2, false).is_err());
    }

    #[test]
    fn joint_moment_examples() {
        // q=2, m=2, ρ=0.5 → 2!·0.25 = 0.5
        let rho = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        assert!((joint_hermite_moment(2, &rho).unwrap() - 0.5).abs() < 1e-12);
        // q=2, m=3, all ρ=1 → E[(X²-1)³] = 8
        let ones = vec![vec![1.0; 3]; 3];
        assert!((joint_hermite_moment(2, &ones).unwrap() - 8.0).abs() < 1e-12);
        // independence: any q, ρ=0 → 0
        let indep = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        for q in 1..=6 {
            assert_eq!(joint_hermite_moment(q, &indep).unwrap(), 0.0);
        }
    }

    #[test]
    fn joint_moment_domain_errors() {
        let bad = vec![vec![1.0, 1.5], vec![1.5, 1.0]];
        assert!(joint_hermite_moment(2, &bad).is_err());
        let asym = vec![vec![1.0, 0.3], vec![0.2, 1.0]];
        assert!(joint_hermite_moment(2, &asym).is_err());
    }

    #[test]
    fn chi_square_cumulants() {
        // q=2, H=1/2: κ₃ = √(8/n), κ₄ = 12/n by chi-square cumulants.
        let caps = ExactCaps::default();
        for &n in &[4usize, 10, 100] {
            let spec = VariationSpec::new(2, 0.5, n).unwrap();
            let r = exact_cumulants(&spec, &caps).unwrap();
            assert!((r.kappa2 - 1.0).abs() < 1e-12);
            assert!(
                (r.kappa3 - (8.0 / n as f64).sqrt()).abs() < 1e-12,
                "n={n} κ₃={}",
                r.kappa3
            );
            assert!((r.kappa4 - 12.0 / n as f64).abs() < 1e-12, "n={n}");
            assert_eq!(r.m_stat, r.kappa3.abs().max(r.kappa4));
        }
    }

    #[test]
    fn odd_q_kappa3_vanishes() {
        let caps = ExactCaps::default();
        for &q in &[3u32, 5] {
            for &h in &[0.3, 0.6, 0.8] {
                let spec = VariationSpec::new(q, h, 32).unwrap();
                let r = exact_cumulants(&spec, &caps).unwrap();
                assert_eq!(r.kappa3, 0.0);
                assert!(r.kappa4 > 0.0);
            }
        }
    }

    #[test]
    fn moment4_consistency_small() {
        let caps = ExactCaps::default();
        let spec = VariationSpec::new(2, 0.5, 10).unwrap();
        let m4 = moment4_all_diagrams(&spec, &caps).unwrap();
        assert!((m4 - 4.2).abs() < 1e-10);
        let spec1 = VariationSpec::new(2, 0.5, 1).unwrap();
        let m4 = moment4_all_diagrams(&spec1, &caps).unwrap();
        assert!((m4 - 15.0).abs() < 1e-10);
    }

    #[test]
    fn kappa3_reduction_matches_direct() {
        for &n in &[8usize, 33, 64] {
            for &h in &[0.4, 0.75] {
                let spec = VariationSpec::new(2, h, n).unwrap();
                let rho = spec.covariance().rho_table(n);
                let g = power_table(&rho, 1);
                let reduced = kappa3_lattice_sum(n, &g);
                let direct = kappa3_lattice_sum_direct(n, &g);
                assert!(
                    (reduced - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                    "n={n} H={h}"
                );
            }
        }
    }

    #[test]
    fn trace_path_matches_loop() {
        let caps = ExactCaps::default();
        for &(q, h) in &[(2u32, 0.5), (2, 0.7), (3, 0.8), (4, 0.6), (5, 0.8)] {
            for &n in &[16usize, 65] {
                let spec = VariationSpec::new(q, h, n).unwrap();
                let rho = spec.covariance().rho_table(n);
                let fast = kappa4_lattice_sum(&spec, &rho, &caps).unwrap();
                let slow = kappa4_lattice_sum_loop_only(&spec, &rho);
                let rel = (fast - slow).abs() / slow.abs().max(1e-12);
                assert!(rel < 1e-10, "q={q} H={h} n={n} rel={rel}");
            }
        }
    }

    #[test]
    fn capacity_error_above_cap() {
        let caps = ExactCaps {
            k4_loop_cap: 32,
            trace_cap: 16384,
        };
        // q=3 has a complete-graph diagram, so the loop cap binds.
        let spec = VariationSpec::new(3, 0.6, 64).unwrap();
        assert!(matches!(
            exact_cumulants(&spec, &caps),
            Err(Error::Capacity(_))
        ));
        // q=2 has no complete-graph diagram; exact stays available.
        let spec = VariationSpec::new(2, 0.6, 64).unwrap();
        assert!(exact_cumulants(&spec, &caps).is_ok());
    }

    #[test]
    fn kappa4_positive_and_kappa2_unit() {
        let caps = ExactCaps::default();
        for &q in &[2u32, 3, 4] {
            for &h in &[0.2, 0.5, 0.7] {
                let spec = VariationSpec::new(q, h, 48).unwrap();
                let r = exact_cumulants(&spec, &caps).unwrap();
                assert!((r.kappa2 - 1.0).abs() < 1e-10, "q={q} H={h}");
                assert!(r.kappa4 > 0.0, "q={q} H={h}");
            }
        }
    }
}
