//! Problem-instance types, canonicalization, simplex geometry, and the
//! action-set predicates every other module consumes.
//!
//! A model is a reproduction matrix `R`, per-type revenue `p`, per-type
//! selection cost `q`, and a budget fraction `beta`. Canonicalization
//! absorbs `q` and `beta` into a rescaled matrix `R'` and revenue `p'`, so
//! the budget constraint everywhere downstream reads `‖s‖ ≤ ‖w‖_{p'}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative feasibility slack: the sets are exact in the model, floating
/// point needs room near facet boundaries.
pub const FEAS_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Dense square matrix
// ---------------------------------------------------------------------------

/// Small dense K×K matrix, row-major. K is the number of population types
/// and stays in the single digits, so no sparse or blocked representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    k: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("matrix must be square".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Matrix { k, data })
    }

    pub fn zeros(k: usize) -> Self {
        Matrix { k, data: vec![0.0; k * k] }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Matrix::zeros(k);
        for i in 0..k {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.k + j] = v;
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.k);
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.k, other.k);
        let mut out = Matrix::zeros(self.k);
        for i in 0..self.k {
            for j in 0..self.k {
                let mut acc = 0.0;
                for l in 0..self.k {
                    acc += self.get(i, l) * other.get(l, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.k).map(|i| self.get(i, j)).collect()
    }

    pub fn scale(&self, a: f64) -> Matrix {
        Matrix { k: self.k, data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.k, other.k);
        Matrix {
            k: self.k,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k).map(|i| (0..self.k).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Swap types i and j: permutes both rows and columns.
    pub fn swap_types(&self, i: usize, j: usize) -> Matrix {
        let mut out = self.clone();
        for c in 0..self.k {
            let (a, b) = (out.get(i, c), out.get(j, c));
            out.set(i, c, b);
            out.set(j, c, a);
        }
        for r in 0..self.k {
            let (a, b) = (out.get(r, i), out.get(r, j));
            out.set(r, i, b);
            out.set(r, j, a);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Plain L1 norm of a nonnegative vector.
#[inline]
pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// L1 distance.
#[inline]
pub fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Weighted L1 norm `Σ weights_i · w_i`.
pub fn weighted_norm(w: &[f64], weights: &[f64]) -> Result<f64> {
    if w.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: w.len() });
    }
    Ok(w.iter().zip(weights).map(|(x, p)| x * p).sum())
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A full problem instance: reproduction matrix `R` (offspring means,
/// individuals per reproducing individual), revenue `p`, selection cost `q`
/// and the budget fraction `beta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub beta: f64,
}

/// One invariant violation found by [`validate_model`]. Violations are
/// data, not faults: an empty list means the spec is valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn violation(field: &str, reason: String) -> Violation {
    Violation { field: field.into(), reason }
}

/// Check every `ModelSpec` invariant; returns an empty list iff valid.
pub fn validate_model(spec: &ModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = spec.r.len();
    if k < 2 {
        out.push(violation("R", format!("K = {k}, need K >= 2")));
    }
    for (i, row) in spec.r.iter().enumerate() {
        if row.len() != k {
            out.push(violation("R", format!("row {} has {} entries, expected {k}", i + 1, row.len())));
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                out.push(violation("R", format!("R entry ({},{}) not finite", i + 1, j + 1)));
            } else if v <= 0.0 {
                out.push(violation("R", format!("R entry ({},{}) not strictly positive", i + 1, j + 1)));
            }
        }
    }
    for (name, v) in [("p", &spec.p), ("q", &spec.q)] {
        if v.len() != k {
            out.push(violation(name, format!("length {} does not match K = {k}", v.len())));
        }
        for (i, &x) in v.iter().enumerate() {
            if !x.is_finite() || x <= 0.0 {
                out.push(violation(name, format!("entry {} not strictly positive", i + 1)));
            }
        }
    }
    if !spec.beta.is_finite() || spec.beta <= 0.0 || spec.beta > 1.0 {
        out.push(violation("beta", "beta outside (0,1]".into()));
    }
    out
}

/// Rescaled instance with `q` and `beta` absorbed: `R'_{ij} = q_i R_{ij}/q_j`
/// and `p'_i = beta p_i / q_i`. The budget constraint downstream is always
/// `‖s‖ ≤ ‖w‖_{p'}` together with dominance `s ⪯ w`. The rescaling changes
/// `‖w(t)‖` by a bounded factor only, so growth rates are preserved.
#[derive(Debug, Clone)]
pub struct CanonicalModel {
    pub r_prime: Matrix,
    pub p_prime: Vec<f64>,
}

impl CanonicalModel {
    pub fn k(&self) -> usize {
        self.r_prime.k()
    }

    /// True if all `p'` entries are equal (the symmetric-revenue setting);
    /// their common value plays the role of the budget fraction.
    pub fn symmetric_budget(&self) -> Option<f64> {
        let b = self.p_prime[0];
        if self.p_prime.iter().all(|&x| (x - b).abs() <= 1e-12 * b.max(1.0)) {
            Some(b)
        } else {
            None
        }
    }
}

/// Convert a validated `ModelSpec` into the canonical form all solvers
/// consume.
pub fn canonicalize(spec: &ModelSpec) -> Result<CanonicalModel> {
    let violations = validate_model(spec);
    if !violations.is_empty() {
        return Err(Error::InvalidModel(violations));
    }
    let k = spec.r.len();
    let mut r_prime = Matrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            r_prime.set(i, j, spec.q[i] * spec.r[i][j] / spec.q[j]);
        }
    }
    let p_prime = (0..k).map(|i| spec.beta * spec.p[i] / spec.q[i]).collect();
    Ok(CanonicalModel { r_prime, p_prime })
}

/// A nonnegative real population vector (continuous relaxation).
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationProfile(pub Vec<f64>);

impl PopulationProfile {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidInput("population profile must be nonnegative and finite".into()));
        }
        Ok(PopulationProfile(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A point on the unit simplex Δ (coordinates sum to 1 within 1e-12).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mixture(pub Vec<f64>);

impl Mixture {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidInput("mixture coordinates must be nonnegative".into()));
        }
        let s = l1(&x);
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("mixture norm {s} is not 1")));
        }
        Ok(Mixture(x))
    }

    pub fn uniform(k: usize) -> Self {
        Mixture(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A chosen reproductive vector, `s ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPopulation(pub Vec<f64>);

// ---------------------------------------------------------------------------
// Simplex geometry and action sets
// ---------------------------------------------------------------------------

/// Scale a nonzero nonnegative vector onto Δ. Idempotent on mixtures.
pub fn normalize(w: &[f64]) -> Result<Mixture> {
    let n = l1(w);
    if n <= 0.0 || !n.is_finite() {
        return Err(Error::DegenerateInput("cannot normalize zero population".into()));
    }
    Ok(Mixture(w.iter().map(|x| x / n).collect()))
}

/// Membership in the feasible action set: `‖s‖ ≤ ‖w‖_{p'}` and `0 ⪯ s ⪯ w`,
/// with relative slack `1e-9·(1+‖w‖)`.
pub fn real_feasible(w: &[f64], s: &[f64], m: &CanonicalModel) -> bool {
    if w.len() != s.len() || w.len() != m.k() {
        return false;
    }
    let tol = FEAS_TOL * (1.0 + l1(w));
    let budget = weighted_norm(w, &m.p_prime).expect("dimensions checked");
    if l1(s) > budget + tol {
        return false;
    }
    s.iter().zip(w).all(|(&si, &wi)| si >= -tol && si <= wi + tol)
}

/// Total mass kept by any rate-optimal policy: `min{‖w‖_{p'}, ‖w‖}`.
pub fn facet_budget(w: &[f64], m: &CanonicalModel) -> f64 {
    let budget = weighted_norm(w, &m.p_prime).expect("dimension mismatch");
    budget.min(l1(w))
}

/// Per-coordinate upper bounds of the simplex-scaled action set at mixture
/// `x`: `bound_i = x_i / facet_budget(x)`. The feasible actions are the
/// `s ∈ Δ` with `s ⪯ bound`.
pub fn sim_action_bounds(x: &Mixture, m: &CanonicalModel) -> Vec<f64> {
    let fb = facet_budget(x.as_slice(), m);
    x.as_slice().iter().map(|&xi| xi / fb).collect()
}

/// Per-stage reward of the real-valued process: `ln(‖R's‖/‖w‖)`. Returns
/// negative infinity when `R's = 0` (only possible for `s = 0`).
pub fn reward_real(w: &[f64], s: &[f64], m: &CanonicalModel) -> Result<f64> {
    let wn = l1(w);
    if wn <= 0.0 {
        return Err(Error::DegenerateInput("reward undefined for zero population".into()));
    }
    let grown = l1(&m.r_prime.mul_vec(s));
    if grown <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((grown / wn).ln())
}

/// Per-stage reward of the simplex process:
/// `ln‖R's‖ + ln(min{‖x‖_{p'}, 1})`. The action must lie within the bounds
/// at `x` (up to the feasibility slack).
pub fn reward_sim(x: &Mixture, s: &Mixture, m: &CanonicalModel) -> Result<f64> {
    let bounds = sim_action_bounds(x, m);
    let tol = FEAS_TOL * 2.0;
    for (i, (&si, &bi)) in s.as_slice().iter().zip(&bounds).enumerate() {
        if si > bi + tol {
            return Err(Error::InfeasibleAction {
                step: 0,
                reason: format!("s_{} = {si} exceeds bound {bi}", i + 1),
            });
        }
    }
    let grown = l1(&m.r_prime.mul_vec(s.as_slice()));
    let budget = weighted_norm(x.as_slice(), &m.p_prime)?;
    Ok(grown.ln() + budget.min(1.0).ln())
}

// ---------------------------------------------------------------------------
// Spectral radius
// ---------------------------------------------------------------------------

/// Perron root and Perron vector of a strictly positive matrix, by power
/// iteration from the uniform mixture to relative tolerance 1e-12.
pub fn spectral_radius(r: &Matrix) -> Result<(f64, Mixture)> {
    let k = r.k();
    let mut x = vec![1.0 / k as f64; k];
    let mut rho = 0.0;
    for _ in 0..200_000 {
        let y = r.mul_vec(&x);
        let n = l1(&y);
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::NumericalFailure("power iteration collapsed".into()));
        }
        let next: Vec<f64> = y.iter().map(|v| v / n).collect();
        let moved = l1_dist(&next, &x);
        x = next;
        if (n - rho).abs() <= 1e-12 * n && moved <= 1e-14 {
            return Ok((n, Mixture(x)));
        }
        rho = n;
    }
    Err(Error::NumericalFailure("power iteration did not converge".into()))
}


#[cfg(test)]
pub(crate) use tests::{blog_spec, cancer_spec, eig2_oracle, spec_2x2};
