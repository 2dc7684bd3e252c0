//! Fixed-point solvers for the optimal population mixture: the K = 2
//! closed form, a simplex-lattice search with local refinement for general
//! K, the uniform baseline, and budget thresholds.

use std::fmt::Write as _;

use serde::Serialize;

use crate::detproc::{rollout, MixturePolicy};
use crate::model::{
    canonicalize, facet_budget, l1, l1_dist, normalize, sim_action_bounds, spectral_radius,
    weighted_norm, CanonicalModel, Mixture, ModelSpec, PopulationProfile,
};
use crate::{Error, Result};

/// Which solver produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "k2-closed-form")]
    K2ClosedForm,
    #[serde(rename = "grid-refine")]
    GridRefine,
    #[serde(rename = "mdp-oracle")]
    MdpOracle,
}

/// The optimal stationary solution: mixture `x*`, sub-population direction
/// `s*` (normalized to Δ), growth factor `κ*` and rate `α* = ln κ*`, with
/// self-consistency residuals.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSolution {
    pub x_star: Mixture,
    pub s_star: Mixture,
    pub kappa_star: f64,
    pub alpha_star: f64,
    /// `‖normalize(R's*) − x*‖`.
    pub residual_fixed_point: f64,
    /// Max coordinate violation of `s*` against the action bounds at `x*`.
    pub residual_feasibility: f64,
    pub method: Method,
    /// Set when the instance makes every mixture optimal (proportional
    /// columns / equal column sums) and the Perron solution was returned.
    pub degenerate: bool,
}

fn residuals(x_star: &Mixture, s_star: &Mixture, m: &CanonicalModel) -> Result<(f64, f64)> {
    let image = normalize(&m.r_prime.mul_vec(s_star.as_slice()))?;
    let fp = l1_dist(image.as_slice(), x_star.as_slice());
    let bounds = sim_action_bounds(x_star, m);
    let feas = s_star
        .as_slice()
        .iter()
        .zip(&bounds)
        .map(|(&si, &bi)| (si - bi).max(0.0))
        .fold(0.0, f64::max);
    Ok((fp, feas))
}

fn build_solution(
    x_star: Mixture,
    s_star: Mixture,
    kappa_star: f64,
    method: Method,
    degenerate: bool,
    m: &CanonicalModel,
) -> Result<FixedPointSolution> {
    let (residual_fixed_point, residual_feasibility) = residuals(&x_star, &s_star, m)?;
    Ok(FixedPointSolution {
        x_star,
        s_star,
        alpha_star: kappa_star.ln(),
        kappa_star,
        residual_fixed_point,
        residual_feasibility,
        method,
        degenerate,
    })
}

/// Perron solution: `x* = s* = ` Perron vector, `κ* = facet·ρ`. This is
/// exact when the budget pins `s = x` (β = 1) and when the instance is
/// column-degenerate.
fn perron_solution(m: &CanonicalModel, method: Method, degenerate: bool) -> Result<FixedPointSolution> {
    let (rho, v) = spectral_radius(&m.r_prime)?;
    let fb = facet_budget(v.as_slice(), m);
    build_solution(v.clone(), v, fb.min(1.0) * rho, method, degenerate, m)
}

/// Closed-form solver for K = 2 with symmetric `p' = (β, β)`.
///
/// With columns relabeled so the first column sum `c₁` dominates, either
/// the budget is small enough that selecting only type 1 is consistent
/// (`β ≤ a/(a+c)`: `s* = e₁`, `κ* = βc₁`), or the stationary mixture
/// solves the quadratic obtained by substituting `s₁ = x₁/β` into
/// `x = normalize(R's)`:
/// `(c₁−c₂)x₁² + (βc₂−(a−b))x₁ − βb = 0`, with `κ* = βc₂ + (c₁−c₂)x₁`.
pub fn solve_k2(m: &CanonicalModel) -> Result<FixedPointSolution> {
    if m.k() != 2 {
        return Err(Error::UnsupportedInstance(format!(
            "closed form requires K = 2, got K = {}; use solve_general",
            m.k()
        )));
    }
    let beta = m.symmetric_budget().ok_or_else(|| {
        Error::UnsupportedInstance("closed form requires symmetric p'; use solve_general".into())
    })?;

    if beta >= 1.0 {
        // The budget never binds below the dominance facet: s = x is the
        // only maximal action and the Perron mixture is optimal.
        return perron_solution(m, Method::K2ClosedForm, false);
    }

    let c_left = m.r_prime.col_sum(0);
    let c_right = m.r_prime.col_sum(1);
    // Equal column sums: ‖R's‖ = c₁ for every s ∈ Δ, so all feasible
    // actions achieve the same growth and the Perron pair is as good as
    // any.
    if (c_left - c_right).abs() <= 1e-12 * c_left.max(c_right) {
        return perron_solution(m, Method::K2ClosedForm, true);
    }

    // Relabel so column 1 has the larger sum; undo the swap on output.
    let swapped = c_right > c_left;
    let r = if swapped { m.r_prime.swap_types(0, 1) } else { m.r_prime.clone() };
    let (a, b) = (r.get(0, 0), r.get(0, 1));
    let c1 = r.col_sum(0);
    let c2 = r.col_sum(1);

    let (x1, s1, kappa) = if beta <= a / (a + r.get(1, 0)) {
        // Selecting type 1 only is consistent with the stationary mixture.
        (a / (a + r.get(1, 0)), 1.0, beta * c1)
    } else {
        let qa = c1 - c2;
        let qb = beta * c2 - (a - b);
        let qc = -beta * b;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return Err(Error::NumericalFailure("stationarity quadratic has no real root".into()));
        }
        let sq = disc.sqrt();
        let roots = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)];
        let mut best: Option<f64> = None;
        for root in roots {
            if (-1e-12..=1.0 + 1e-12).contains(&root) {
                let better = match best {
                    None => true,
                    // Larger kappa wins; ties toward larger x1 (more weight
                    // on the dominant column).
                    Some(cur) => {
                        let knew = beta * c2 + qa * root;
                        let kcur = beta * c2 + qa * cur;
                        knew > kcur || (knew == kcur && root > cur)
                    }
                };
                if better {
                    best = Some(root);
                }
            }
        }
        let x1 = best
            .ok_or_else(|| Error::NumericalFailure("no stationarity root in [0,1]".into()))?
            .clamp(0.0, 1.0);
        (x1, (x1 / beta).min(1.0), beta * c2 + qa * x1)
    };

    let (x, s) = if swapped {
        (vec![1.0 - x1, x1], vec![1.0 - s1, s1])
    } else {
        (vec![x1, 1.0 - x1], vec![s1, 1.0 - s1])
    };
    build_solution(Mixture(x), Mixture(s), kappa, Method::K2ClosedForm, false, m)
}

fn lattice_points(k: usize, denom: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=remaining {
            prefix.push(v);
            rec(k - 1, remaining - v, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(k, denom, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|v| v.into_iter().map(|n| n as f64 / denom as f64).collect())
        .collect()
}

/// The growth-maximizing feasible action at mixture `x`: `‖R's‖` is
/// linear in `s`, so fill coordinates in decreasing column-sum order up
/// to their bounds `x_i/facet_budget(x)` until the unit of mass is
/// spent. For K = 2 this reproduces the `s₁ = min{x₁/β, 1}` structure of
/// the closed form exactly, including landing exactly on the facet.
fn greedy_action(x: &[f64], m: &CanonicalModel, order: &[usize]) -> Vec<f64> {
    let fb = facet_budget(x, m);
    let mut s = vec![0.0; x.len()];
    let mut remaining = 1.0;
    for &j in order {
        let take = (x[j] / fb).min(remaining);
        s[j] = take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    s
}

/// Growth factor of the stationary pair at a fixed point `x` of the
/// greedy map: `min{‖x‖_{p'}, 1}·‖R's(x)‖`.
fn stationary_value(x: &[f64], s: &[f64], m: &CanonicalModel) -> Result<f64> {
    let budget = weighted_norm(x, &m.p_prime)?;
    Ok(budget.min(1.0) * l1(&m.r_prime.mul_vec(s)))
}

/// General-K solver. Candidate mixtures are the simplex lattice with the
/// given denominator; from each, the map `x ← ⟨R's(x)⟩` (with `s(x)` the
/// greedy action) is iterated to a fixed point, and the best fixed point
/// wins. The optimal action saturates the facet exactly, so iterating
/// the greedy map — the same construction the K = 2 closed form solves
/// analytically — keeps every iterate exactly feasible, where a naive
/// ascent on `s` would have to walk along the feasibility boundary.
pub fn solve_general(m: &CanonicalModel, resolution: usize) -> Result<FixedPointSolution> {
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be positive".into()));
    }
    let k = m.k();
    // Deterministic greedy fill order: column sums descending, index
    // ascending on ties.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        m.r_prime
            .col_sum(j)
            .partial_cmp(&m.r_prime.col_sum(i))
            .unwrap()
            .then(i.cmp(&j))
    });

    let iterate = |start: &[f64]| -> Option<Vec<f64>> {
        let mut x = start.to_vec();
        // Plain iteration first; if it cycles, damped averaging (which
        // preserves fixed points) usually settles it.
        for phase in 0..2 {
            let limit = if phase == 0 { 2_000 } else { 20_000 };
            for _ in 0..limit {
                let s = greedy_action(&x, m, &order);
                let image = m.r_prime.mul_vec(&s);
                let n = l1(&image);
                if n <= 0.0 {
                    return None;
                }
                let mut next: Vec<f64> = image.iter().map(|v| v / n).collect();
                if phase == 1 {
                    for (ni, &xi) in next.iter_mut().zip(&x) {
                        *ni = 0.5 * (*ni + xi);
                    }
                }
                let moved = l1_dist(&next, &x);
                x = next;
                if moved < 1e-15 {
                    return Some(x);
                }
            }
        }
        None
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in lattice_points(k, resolution) {
        if l1(&start) <= 0.0 {
            continue;
        }
        let Some(x) = iterate(&start) else { continue };
        let s = greedy_action(&x, m, &order);
        let value = stationary_value(&x, &s, m)?;
        // Enumeration order is deterministic, so strict improvement keeps
        // the first argmax on ties.
        if best.as_ref().map_or(true, |(v, _)| value > *v) {
            best = Some((value, x));
        }
    }
    let (kappa, x) =
        best.ok_or_else(|| Error::NumericalFailure("greedy-map iteration never converged".into()))?;
    let s_star = Mixture(greedy_action(&x, m, &order));
    let x_star = normalize(&m.r_prime.mul_vec(s_star.as_slice()))?;
    build_solution(x_star, s_star, kappa, Method::GridRefine, false, m)
}

/// Dispatch: the closed form when it applies, otherwise the lattice
/// solver.
pub fn solve(m: &CanonicalModel, resolution: usize) -> Result<FixedPointSolution> {
    match solve_k2(m) {
        Ok(sol) => Ok(sol),
        Err(Error::UnsupportedInstance(_)) => solve_general(m, resolution),
        Err(e) => Err(e),
    }
}

/// Self-consistency report for a claimed solution: recomputed residuals
/// plus a 10-step rollout under the mixture policy checking that the norm
/// tracks `κ*^t`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub residual_fixed_point: f64,
    pub residual_feasibility: f64,
    /// Max relative error of `‖w(t)‖` against `κ*^t` over a 10-step
    /// rollout started at `x*`.
    pub rollout_max_rel_err: f64,
    pub pass: bool,
}

pub fn verify_fixed_point(sol: &FixedPointSolution, m: &CanonicalModel) -> Result<VerifyReport> {
    let (residual_fixed_point, residual_feasibility) = residuals(&sol.x_star, &sol.s_star, m)?;
    let mut rollout_max_rel_err = f64::INFINITY;
    if residual_fixed_point <= 1e-6 {
        let policy = MixturePolicy::new(sol.x_star.clone(), sol.s_star.clone(), m)?;
        let traj = rollout(&policy, &PopulationProfile(sol.x_star.as_slice().to_vec()), 10, m)?;
        rollout_max_rel_err = (0..=10)
            .map(|t| {
                let expect = t as f64 * sol.kappa_star.ln();
                (traj.log_norms[t] - traj.log_norms[0] - expect).abs() / (1.0 + expect.abs())
            })
            .fold(0.0, f64::max);
    }
    let pass = residual_fixed_point <= 1e-8
        && residual_feasibility <= 1e-8
        && rollout_max_rel_err <= 1e-8;
    Ok(VerifyReport { residual_fixed_point, residual_feasibility, rollout_max_rel_err, pass })
}

/// Growth factor of the uniform baseline `s = βw`: `κ_u = βρ(R')`.
pub fn uniform_growth_factor(m: &CanonicalModel) -> Result<f64> {
    let beta = m.symmetric_budget().ok_or_else(|| {
        Error::UnsupportedInstance("uniform baseline is defined for symmetric p' only".into())
    })?;
    let (rho, _) = spectral_radius(&m.r_prime)?;
    Ok(beta.min(1.0) * rho)
}

/// Which growth curve a threshold is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Optimal,
    Uniform,
}

fn kappa_at(spec_template: &ModelSpec, beta: f64, solver: SolverKind, resolution: usize) -> Result<f64> {
    let mut spec = spec_template.clone();
    spec.beta = beta;
    let m = canonicalize(&spec)?;
    match solver {
        SolverKind::Optimal => Ok(solve(&m, resolution)?.kappa_star),
        SolverKind::Uniform => uniform_growth_factor(&m),
    }
}

/// Smallest budget fraction achieving `κ(β) ≥ target_kappa`, by bisection
/// on the nondecreasing map `β ↦ κ(β)` to absolute tolerance 1e-6.
/// `None` when even `β = 1` falls short or `β → 0` already exceeds the
/// target (no crossing in (0,1)).
pub fn beta_threshold(
    spec_template: &ModelSpec,
    target_kappa: f64,
    solver: SolverKind,
) -> Result<Option<f64>> {
    let resolution = 2000;
    let mut lo = 1e-9;
    let mut hi = 1.0;
    if kappa_at(spec_template, hi, solver, resolution)? < target_kappa
        || kappa_at(spec_template, lo, solver, resolution)? >= target_kappa
    {
        return Ok(None);
    }
    while hi - lo > 1e-6 {
        let mid = (lo + hi) / 2.0;
        if kappa_at(spec_template, mid, solver, resolution)? < target_kappa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some((lo + hi) / 2.0))
}

/// One row of a budget sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub kappa_opt: f64,
    pub kappa_uniform: f64,
    pub gain: f64,
    pub x_star: Vec<f64>,
    pub s_star: Vec<f64>,
}

/// Evaluate the optimal and uniform growth factors on an inclusive β grid.
pub fn sweep(
    spec_template: &ModelSpec,
    beta_min: f64,
    beta_max: f64,
    steps: usize,
    resolution: usize,
) -> Result<Vec<SweepRow>> {
    if !(0.0 < beta_min && beta_min < beta_max && beta_max <= 1.0) || steps < 2 {
        return Err(Error::InvalidInput(
            "sweep needs 0 < beta_min < beta_max <= 1 and steps >= 2".into(),
        ));
    }
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let beta = beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64;
        let mut spec = spec_template.clone();
        spec.beta = beta;
        let m = canonicalize(&spec)?;
        let sol = solve(&m, resolution)?;
        let kappa_uniform = uniform_growth_factor(&m)?;
        rows.push(SweepRow {
            beta,
            kappa_opt: sol.kappa_star,
            kappa_uniform,
            gain: sol.kappa_star - kappa_uniform,
            x_star: sol.x_star.as_slice().to_vec(),
            s_star: sol.s_star.as_slice().to_vec(),
        });
    }
    Ok(rows)
}

/// Sweep rows as CSV: `beta, kappa_opt, kappa_uniform, gain, x_star_1..K,
/// s_star_1..K`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    if rows.is_empty() {
        return out;
    }
    let k = rows[0].x_star.len();
    out.push_str("beta,kappa_opt,kappa_uniform,gain");
    for i in 1..=k {
        let _ = write!(out, ",x_star_{i}");
    }
    for i in 1..=k {
        let _ = write!(out, ",s_star_{i}");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            row.beta, row.kappa_opt, row.kappa_uniform, row.gain
        );
        for &v in row.x_star.iter().chain(&row.s_star) {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}
