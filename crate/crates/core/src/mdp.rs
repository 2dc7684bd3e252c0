//! Independent numerical oracle for the optimal growth rate: discounted
//! value iteration on a simplex lattice, with the vanishing-discount
//! estimate `α̂ = (1−γ)V^γ` at a reference mixture.
//!
//! The key structural fact making this fast: the per-stage reward splits
//! into a state part `ln(min{‖x‖_{p'}, 1})` and an action part `ln‖R's‖`,
//! and the successor mixture `⟨R's⟩` depends on the action only. So each
//! Bellman sweep computes `Q[a] = lngrowth[a] + γV[succ[a]]` once per
//! action and then takes a per-state maximum over the feasible action set.
//! For K = 2 the feasible set at each state is a contiguous range of
//! action indices, and the per-state maximum becomes a range-max query
//! answered by a sparse table rebuilt once per sweep.

use std::collections::HashMap;

use crate::model::{l1, normalize, sim_action_bounds, weighted_norm, CanonicalModel, Mixture};
use crate::{Error, Result};

/// Default cap on lattice size; grids above it are refused rather than
/// silently thrashing memory.
pub const GRID_POINT_CAP: usize = 5_000_000;

/// The lattice `{v/m : v ∈ Z₊^K, Σv = m}` in lexicographic order, with an
/// exact inverse lookup from lattice vector to point id.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    pub k: usize,
    pub m: usize,
    /// Integer lattice vectors, lexicographically ascending.
    pub points: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

/// `C(m+K−1, K−1)` without overflow for sane inputs.
fn lattice_count(k: usize, m: usize) -> Option<usize> {
    let mut acc: u128 = 1;
    for i in 1..k {
        acc = acc.checked_mul((m + i) as u128)?;
        acc /= i as u128;
    }
    usize::try_from(acc).ok()
}

impl SimplexGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The lattice vector as a mixture.
    pub fn mixture(&self, id: usize) -> Mixture {
        Mixture(self.points[id].iter().map(|&v| v as f64 / self.m as f64).collect())
    }

    pub fn index_of(&self, v: &[u32]) -> Option<usize> {
        self.index.get(v).copied()
    }

    /// Nearest lattice vector to an arbitrary mixture in total variation:
    /// floor each scaled coordinate, then hand the remaining units to the
    /// largest fractional parts (ties to the lowest index, which favors
    /// the larger first coordinate).
    pub fn project(&self, x: &[f64]) -> usize {
        let m = self.m as f64;
        let mut v: Vec<u32> = Vec::with_capacity(self.k);
        let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(self.k);
        let mut total: u32 = 0;
        for (i, &xi) in x.iter().enumerate() {
            let scaled = xi * m;
            let fl = scaled.floor().clamp(0.0, m) as u32;
            v.push(fl);
            fracs.push((scaled - fl as f64, i));
            total += fl;
        }
        let deficit = self.m as u32 - total;
        // Sort descending by fractional part; equal fractions keep index
        // order (stable sort), so the deficit lands on earlier coordinates.
        fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for &(_, i) in fracs.iter().take(deficit as usize) {
            v[i] += 1;
        }
        self.index[&v]
    }
}

/// Full lattice enumeration. Refuses grids above [`GRID_POINT_CAP`].
pub fn build_grid(k: usize, m: usize) -> Result<SimplexGrid> {
    if k < 2 || m == 0 {
        return Err(Error::InvalidInput(format!("grid needs K >= 2 and m >= 1, got K={k}, m={m}")));
    }
    let count = lattice_count(k, m).unwrap_or(usize::MAX);
    if count > GRID_POINT_CAP {
        return Err(Error::Capacity(format!(
            "simplex grid would hold {count} points, cap is {GRID_POINT_CAP}"
        )));
    }
    let mut points = Vec::with_capacity(count);
    let mut prefix: Vec<u32> = Vec::with_capacity(k);
    fn rec(k: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
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
    rec(k, m as u32, &mut prefix, &mut points);
    let index = points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    Ok(SimplexGrid { k, m, points, index })
}

/// Feasible action ids per state: a contiguous index range for K = 2
/// (the bounds cut one interval out of the s₁ axis), explicit lists
/// otherwise.
enum FeasibleActions {
    Ranges(Vec<(usize, usize)>),
    Lists(Vec<Vec<u32>>),
}

/// Converged discounted value function with its greedy policy.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub gamma: f64,
    pub values: Vec<f64>,
    /// Greedy action (grid id) per state, lexicographically-first argmax.
    pub policy: Vec<usize>,
    pub sup_delta: f64,
    /// Sup-norm change per sweep, for convergence diagnostics.
    pub delta_history: Vec<f64>,
    pub iterations: usize,
}

/// Range-max sparse table over a fixed array, rebuilt per sweep.
struct SparseMax {
    rows: Vec<Vec<f64>>,
}

impl SparseMax {
    fn build(q: &[f64]) -> Self {
        let n = q.len();
        let levels = (usize::BITS - n.leading_zeros()) as usize;
        let mut rows = Vec::with_capacity(levels);
        rows.push(q.to_vec());
        let mut width = 1;
        while 2 * width <= n {
            let prev = rows.last().unwrap();
            let row: Vec<f64> = (0..=n - 2 * width).map(|i| prev[i].max(prev[i + width])).collect();
            rows.push(row);
            width *= 2;
        }
        SparseMax { rows }
    }

    /// Max over the inclusive range [lo, hi].
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let width = 1usize << level;
        self.rows[level][lo].max(self.rows[level][hi + 1 - width])
    }
}

fn feasible_actions(m_model: &CanonicalModel, grid: &SimplexGrid) -> Result<FeasibleActions> {
    let n = grid.len();
    let slack = 1.0 / (2.0 * grid.m as f64);
    if grid.k == 2 {
        // Action id a has s1 = a/m; the bounds cap s1 from above and
        // (via the s2 bound) from below, so the feasible set is a range.
        let mut ranges = Vec::with_capacity(n);
        for id in 0..n {
            let x = grid.mixture(id);
            let bounds = sim_action_bounds(&x, m_model);
            let hi_s1 = (bounds[0] + slack).min(1.0);
            let lo_s1 = (1.0 - bounds[1] - slack).max(0.0);
            let lo = (lo_s1 * grid.m as f64).ceil() as usize;
            let hi = (hi_s1 * grid.m as f64).floor() as usize;
            if lo > hi {
                return Err(Error::NumericalFailure(format!("no feasible action at grid point {id}")));
            }
            ranges.push((lo, hi));
        }
        Ok(FeasibleActions::Ranges(ranges))
    } else {
        let mut lists = Vec::with_capacity(n);
        for id in 0..n {
            let x = grid.mixture(id);
            let bounds = sim_action_bounds(&x, m_model);
            let mut list = Vec::new();
            for (a, point) in grid.points.iter().enumerate() {
                let ok = point
                    .iter()
                    .zip(&bounds)
                    .all(|(&v, &b)| v as f64 / grid.m as f64 <= b + slack);
                if ok {
                    list.push(a as u32);
                }
            }
            if list.is_empty() {
                return Err(Error::NumericalFailure(format!("no feasible action at grid point {id}")));
            }
            lists.push(list);
        }
        Ok(FeasibleActions::Lists(lists))
    }
}

/// Iterate the discounted Bellman operator to convergence: stop once the
/// sup-norm change drops to `epsilon·(1−gamma)/(2·gamma)`, which bounds
/// the distance to the true fixed point by `epsilon`.
pub fn value_iteration(
    m_model: &CanonicalModel,
    grid: &SimplexGrid,
    gamma: f64,
    epsilon: f64,
) -> Result<ValueTable> {
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::InvalidInput("gamma must lie in (0,1)".into()));
    }
    if epsilon <= 0.0 {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let n = grid.len();

    // Action-indexed data: log growth and projected successor state.
    let mut lngrowth = Vec::with_capacity(n);
    let mut succ = Vec::with_capacity(n);
    for a in 0..n {
        let s = grid.mixture(a);
        let image = m_model.r_prime.mul_vec(s.as_slice());
        lngrowth.push(l1(&image).ln());
        succ.push(grid.project(normalize(&image)?.as_slice()));
    }

    // State-indexed reward part ln(min{‖x‖_{p'}, 1}).
    let state_reward: Vec<f64> = (0..n)
        .map(|id| {
            let x = grid.mixture(id);
            weighted_norm(x.as_slice(), &m_model.p_prime).map(|b| b.min(1.0).ln())
        })
        .collect::<Result<_>>()?;

    let feasible = feasible_actions(m_model, grid)?;

    let threshold = epsilon * (1.0 - gamma) / (2.0 * gamma);
    let mut values = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut delta_history = Vec::new();
    let mut sup_delta = f64::INFINITY;
    let mut iterations = 0;
    let max_iterations = 10_000_000;

    while sup_delta > threshold {
        if iterations >= max_iterations {
            return Err(Error::NumericalFailure("value iteration did not converge".into()));
        }
        for a in 0..n {
            q[a] = lngrowth[a] + gamma * values[succ[a]];
        }
        sup_delta = 0.0;
        match &feasible {
            FeasibleActions::Ranges(ranges) => {
                let table = SparseMax::build(&q);
                for (id, &(lo, hi)) in ranges.iter().enumerate() {
                    let new = state_reward[id] + table.query(lo, hi);
                    sup_delta = sup_delta.max((new - values[id]).abs());
                    values[id] = new;
                }
            }
            FeasibleActions::Lists(lists) => {
                for (id, list) in lists.iter().enumerate() {
                    let best = list.iter().map(|&a| q[a as usize]).fold(f64::NEG_INFINITY, f64::max);
                    let new = state_reward[id] + best;
                    sup_delta = sup_delta.max((new - values[id]).abs());
                    values[id] = new;
                }
            }
        }
        delta_history.push(sup_delta);
        iterations += 1;
    }

    // Greedy policy extraction: lexicographically-first argmax over the
    // final Q, so results are reproducible bit-for-bit.
    for a in 0..n {
        q[a] = lngrowth[a] + gamma * values[succ[a]];
    }
    let argmax_in = |ids: &mut dyn Iterator<Item = usize>| -> usize {
        let mut best_id = usize::MAX;
        let mut best_q = f64::NEG_INFINITY;
        for a in ids {
            if q[a] > best_q {
                best_q = q[a];
                best_id = a;
            }
        }
        best_id
    };
    let policy: Vec<usize> = match &feasible {
        FeasibleActions::Ranges(ranges) => {
            ranges.iter().map(|&(lo, hi)| argmax_in(&mut (lo..=hi))).collect()
        }
        FeasibleActions::Lists(lists) => lists
            .iter()
            .map(|list| argmax_in(&mut list.iter().map(|&a| a as usize)))
            .collect(),
    };

    Ok(ValueTable { gamma, values, policy, sup_delta, delta_history, iterations })
}

/// Grid point nearest the uniform mixture — the default reference for the
/// vanishing-discount estimate.
pub fn default_reference(grid: &SimplexGrid) -> usize {
    grid.project(&vec![1.0 / grid.k as f64; grid.k])
}

/// Vanishing-discount growth-rate estimate `α̂ = (1−γ)V^γ(w̃)`.
pub fn estimate_alpha(vt: &ValueTable, reference_point: usize) -> f64 {
    (1.0 - vt.gamma) * vt.values[reference_point]
}

/// Relative value (bias) `g(x) = V^γ(x) − V^γ(w̃)` per grid point, with
/// its sup-norm.
pub fn extract_bias(vt: &ValueTable, reference_point: usize) -> (Vec<f64>, f64) {
    let base = vt.values[reference_point];
    let g: Vec<f64> = vt.values.iter().map(|v| v - base).collect();
    let max_abs = g.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    (g, max_abs)
}

/// A state whose greedy successor returns to (a lattice neighborhood of)
/// itself, with its one-step growth factor — the discrete analogue of an
/// optimal stationary mixture.
#[derive(Debug, Clone)]
pub struct FixedPointCandidate {
    pub state: usize,
    pub mixture: Mixture,
    pub growth_factor: f64,
}

/// All grid points whose greedy successor lies within lattice distance 1
/// per coordinate of the point itself.
pub fn greedy_fixed_points(
    vt: &ValueTable,
    m_model: &CanonicalModel,
    grid: &SimplexGrid,
) -> Vec<FixedPointCandidate> {
    let mut out = Vec::new();
    for id in 0..grid.len() {
        let action = vt.policy[id];
        let s = grid.mixture(action);
        let image = m_model.r_prime.mul_vec(s.as_slice());
        let succ = grid.project(normalize(&image).expect("positive matrix image").as_slice());
        let near = grid.points[id]
            .iter()
            .zip(&grid.points[succ])
            .all(|(&a, &b)| a.abs_diff(b) <= 1);
        if near {
            let x = grid.mixture(id);
            let budget = weighted_norm(x.as_slice(), &m_model.p_prime).expect("dimensions match");
            out.push(FixedPointCandidate {
                state: id,
                mixture: x,
                growth_factor: budget.min(1.0) * l1(&image),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonicalize, cancer_spec, Matrix};

    fn cancer(beta: f64) -> CanonicalModel {
        canonicalize(&cancer_spec(beta)).unwrap()
    }

    // Every action maps to the center with ln‖R's‖ = 0 and the state
    // reward is 0 on all of Δ, so V ≡ 0.
    fn zero_reward_model() -> CanonicalModel {
        CanonicalModel {
            r_prime: Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap(),
            p_prime: vec![1.0, 1.0],
        }
    }

    #[test]
    fn grid_enumeration() {
        let g = build_grid(2, 4).unwrap();
        assert_eq!(g.points, vec![vec![0, 4], vec![1, 3], vec![2, 2], vec![3, 1], vec![4, 0]]);
        assert_eq!(g.len(), 5);
        assert_eq!(build_grid(3, 2).unwrap().len(), 6);
        assert_eq!(build_grid(2, 2000).unwrap().len(), 2001);
        for (i, p) in g.points.iter().enumerate() {
            assert_eq!(g.index_of(p), Some(i));
        }
    }

    #[test]
    fn grid_capacity_and_validation() {
        assert!(matches!(build_grid(4, 2000), Err(Error::Capacity(_))));
        assert!(build_grid(1, 10).is_err());
        assert!(build_grid(3, 2).is_ok());
    }

    #[test]
    fn projection_rounds_to_nearest() {
        let g = build_grid(2, 10).unwrap();
        assert_eq!(g.points[g.project(&[0.31, 0.69])], vec![3, 7]);
        assert_eq!(g.points[g.project(&[0.5, 0.5])], vec![5, 5]);
        // Exact tie between neighbors resolves toward the larger first
        // coordinate.
        assert_eq!(g.points[g.project(&[0.25, 0.75])], vec![3, 7]);
    }

    #[test]
    fn zero_reward_value_function_is_zero() {
        let m = zero_reward_model();
        let g = build_grid(2, 50).unwrap();
        let vt = value_iteration(&m, &g, 0.9, 1e-6).unwrap();
        assert!(vt.values.iter().all(|&v| v.abs() < 1e-5));
        assert!(estimate_alpha(&vt, default_reference(&g)).abs() < 1e-6);
        let (bias, max_abs) = extract_bias(&vt, default_reference(&g));
        assert!(max_abs < 1e-5);
        assert_eq!(bias[default_reference(&g)], 0.0);
    }

    #[test]
    fn zero_reward_every_point_is_candidate_neighborhood() {
        // With identical columns every successor is the center mixture,
        // so the candidate set is exactly the center's lattice
        // neighborhood — a diagnostic that the tie-break is deterministic.
        let m = zero_reward_model();
        let g = build_grid(2, 20).unwrap();
        let vt = value_iteration(&m, &g, 0.9, 1e-6).unwrap();
        let candidates = greedy_fixed_points(&vt, &m, &g);
        assert!(!candidates.is_empty());
        for c in &candidates {
            assert!((c.growth_factor - 1.0).abs() < 1e-12);
            assert!(g.points[c.state].iter().zip(&[10u32, 10u32]).all(|(&a, &b)| a.abs_diff(b) <= 1));
        }
    }

    #[test]
    fn sup_delta_is_nonincreasing() {
        let m = cancer(0.8);
        let g = build_grid(2, 200).unwrap();
        let vt = value_iteration(&m, &g, 0.95, 1e-6).unwrap();
        for pair in vt.delta_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    // ln kappa* for cancer beta = 0.8 (closed form, frozen).
    const CANCER_ALPHA: f64 = 0.293_903_491_163_137_63;

    #[test]
    fn oracle_matches_closed_form_cancer() {
        let m = cancer(0.8);
        let g = build_grid(2, 2000).unwrap();
        let vt = value_iteration(&m, &g, 0.999, 1e-6).unwrap();
        let alpha = estimate_alpha(&vt, default_reference(&g));
        assert!((alpha - CANCER_ALPHA).abs() < 5e-3, "alpha = {alpha}");
    }

    #[test]
    fn oracle_regime_a_and_threshold() {
        let g = build_grid(2, 1000).unwrap();
        let vt = value_iteration(&cancer(0.3), &g, 0.999, 1e-6).unwrap();
        let alpha = estimate_alpha(&vt, default_reference(&g));
        assert!((alpha - 0.61092f64.ln()).abs() < 5e-3, "alpha = {alpha}");

        let vt = value_iteration(&cancer(0.5518), &g, 0.999, 1e-6).unwrap();
        let alpha = estimate_alpha(&vt, default_reference(&g));
        assert!(alpha.abs() < 5e-3, "alpha = {alpha}");
    }

    #[test]
    fn grid_refinement_converges() {
        let m = cancer(0.8);
        let mut errs = Vec::new();
        for grid_m in [500, 1000, 2000] {
            let g = build_grid(2, grid_m).unwrap();
            let vt = value_iteration(&m, &g, 0.999, 1e-6).unwrap();
            errs.push((estimate_alpha(&vt, default_reference(&g)) - CANCER_ALPHA).abs());
        }
        assert!(errs[1] <= errs[0] + 1e-12 && errs[2] <= errs[1] + 1e-12, "errors {errs:?}");
    }

    #[test]
    fn greedy_fixed_point_near_x_star() {
        let m = cancer(0.8);
        let g = build_grid(2, 2000).unwrap();
        let vt = value_iteration(&m, &g, 0.999, 1e-6).unwrap();
        let candidates = greedy_fixed_points(&vt, &m, &g);
        let x1 = 0.35306967647942267;
        assert!(
            candidates.iter().any(|c| (c.mixture.0[0] - x1).abs() <= 2.0 / 2000.0),
            "no candidate near x* among {} candidates",
            candidates.len()
        );
    }

    #[test]
    fn beta_one_candidate_near_perron() {
        let m = cancer(1.0);
        let g = build_grid(2, 500).unwrap();
        let vt = value_iteration(&m, &g, 0.999, 1e-6).unwrap();
        let candidates = greedy_fixed_points(&vt, &m, &g);
        let perron_x1 = 0.34993464881284164;
        assert!(candidates.iter().any(|c| (c.mixture.0[0] - perron_x1).abs() <= 2.0 / 500.0));
    }

    #[test]
    fn bias_is_discretely_concave() {
        // Successor-projection noise in the bias scales like 1/m, so the
        // tolerance is only meaningful at fine resolution.
        let m = cancer(0.8);
        let g = build_grid(2, 2000).unwrap();
        let vt = value_iteration(&m, &g, 0.999, 1e-6).unwrap();
        let (bias, _) = extract_bias(&vt, default_reference(&g));
        let mut max_violation = 0.0f64;
        for w in bias.windows(3) {
            // Positive second difference = convex kink.
            max_violation = max_violation.max(w[0] - 2.0 * w[1] + w[2]);
        }
        assert!(max_violation <= 1e-3, "second difference {max_violation}");
    }
}
