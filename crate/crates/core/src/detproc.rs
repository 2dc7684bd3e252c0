//! Deterministic trajectory engine: rollouts of `w(t+1) = R's(t)` under a
//! policy, the uniform and mixture reference policies, and growth-rate
//! estimation from trajectories.
//!
//! Rollouts store the state renormalized to Δ each step and accumulate the
//! log-norm separately, so horizons of thousands of steps cannot overflow
//! even with growth factors above 100.

use std::fmt::Write as _;

use crate::model::{
    facet_budget, l1, l1_dist, normalize, real_feasible, reward_real, CanonicalModel, Mixture,
    PopulationProfile, SubPopulation,
};
use crate::{Error, Result};

/// A state-feedback policy on the normalized process: given the step index
/// and the current mixture, produce the reproductive vector (in the same
/// scale as the mixture).
pub trait Policy {
    fn action(&self, t: usize, x: &Mixture, m: &CanonicalModel) -> Result<SubPopulation>;
}

/// A feasible sequence `{(w(t), s(t))}` produced by a policy. `states[t]`
/// is the mixture `w(t)/‖w(t)‖` and `log_norms[t] = ln‖w(t)‖`, so the raw
/// profile is recoverable without overflow.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<Mixture>,
    pub log_norms: Vec<f64>,
    pub actions: Vec<SubPopulation>,
    pub rewards: Vec<f64>,
    pub horizon: usize,
}

impl Trajectory {
    /// `ln‖w(t)‖ − ln‖w(0)‖`, available even when the raw norms overflow.
    pub fn log_growth(&self) -> f64 {
        self.log_norms[self.horizon] - self.log_norms[0]
    }

    /// CSV export: columns `t, w_1..w_K, log_norm, reward` with the state
    /// renormalized to Δ. Rewards column is empty on the final row.
    pub fn to_csv(&self) -> String {
        let k = self.states[0].as_slice().len();
        let mut out = String::new();
        out.push('t');
        for i in 1..=k {
            let _ = write!(out, ",w_{i}");
        }
        out.push_str(",log_norm,reward\n");
        for t in 0..=self.horizon {
            let _ = write!(out, "{t}");
            for &wi in self.states[t].as_slice() {
                let _ = write!(out, ",{wi:.16e}");
            }
            let _ = write!(out, ",{:.16e}", self.log_norms[t]);
            if t < self.horizon {
                let _ = write!(out, ",{:.16e}", self.rewards[t]);
            } else {
                out.push(',');
            }
            out.push('\n');
        }
        out
    }
}

/// Growth statistics of a trajectory: `alpha_hat` is the endpoint log
/// slope, `tail_alpha` the slope over the last ⌈H/2⌉ steps (suppresses the
/// reaching transient), and `kappa_hat = e^{alpha_hat}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEstimate {
    pub alpha_hat: f64,
    pub kappa_hat: f64,
    pub tail_alpha: f64,
}

/// One transition of the real process: `w(t+1) = R's(t)`, with the action
/// checked against the budget and dominance constraints.
pub fn step_real(w: &PopulationProfile, s: &SubPopulation, m: &CanonicalModel) -> Result<PopulationProfile> {
    if !real_feasible(w.as_slice(), &s.0, m) {
        return Err(Error::InfeasibleAction {
            step: 0,
            reason: "action violates budget or dominance".into(),
        });
    }
    Ok(PopulationProfile(m.r_prime.mul_vec(&s.0)))
}

/// Apply `policy` for `horizon` steps starting at `w0`. The trajectory is
/// stored normalized; `rewards[t] = ln(‖R's(t)‖/‖w(t)‖)` so the rewards
/// telescope exactly to the total log growth.
pub fn rollout(
    policy: &dyn Policy,
    w0: &PopulationProfile,
    horizon: usize,
    m: &CanonicalModel,
) -> Result<Trajectory> {
    let n0 = l1(w0.as_slice());
    if n0 <= 0.0 {
        return Err(Error::DegenerateInput("rollout requires a nonzero starting population".into()));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut log_norms = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);

    let mut x = normalize(w0.as_slice())?;
    let mut log_norm = n0.ln();
    states.push(x.clone());
    log_norms.push(log_norm);

    for t in 0..horizon {
        let s = policy.action(t, &x, m)?;
        if !real_feasible(x.as_slice(), &s.0, m) {
            return Err(Error::InfeasibleAction {
                step: t,
                reason: "policy returned an action outside the feasible set".into(),
            });
        }
        let r = reward_real(x.as_slice(), &s.0, m)?;
        let next = m.r_prime.mul_vec(&s.0);
        let next_norm = l1(&next);
        if next_norm <= 0.0 {
            return Err(Error::DegenerateInput(format!("population died out at step {t}")));
        }
        // ‖w(t+1)‖ = ‖w(t)‖·(‖next‖/‖x‖) and ‖x‖ = 1, so the reward is
        // exactly the log-norm increment.
        log_norm += r;
        x = normalize(&next)?;
        states.push(x.clone());
        log_norms.push(log_norm);
        actions.push(s);
        rewards.push(r);
    }

    Ok(Trajectory { states, log_norms, actions, rewards, horizon })
}

/// The baseline policy `s(t) = βw(t)`: keep the same fraction of every
/// type. For non-symmetric `p'` (outside the setting the baseline was
/// defined for) the fraction is `min_i p'_i`, flagged as an extension.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub fraction: f64,
    /// True when `p'` was non-symmetric and the fraction had to be derived
    /// as `min_i p'_i` rather than read off directly.
    pub extended: bool,
}

impl UniformPolicy {
    pub fn new(m: &CanonicalModel) -> Self {
        match m.symmetric_budget() {
            // Dominance caps the keepable fraction at 1 when p' > 1.
            Some(b) => UniformPolicy { fraction: b.min(1.0), extended: false },
            None => {
                let c = m.p_prime.iter().cloned().fold(f64::INFINITY, f64::min);
                UniformPolicy { fraction: c.min(1.0), extended: true }
            }
        }
    }
}

impl Policy for UniformPolicy {
    fn action(&self, _t: usize, x: &Mixture, _m: &CanonicalModel) -> Result<SubPopulation> {
        Ok(SubPopulation(x.as_slice().iter().map(|&xi| self.fraction * xi).collect()))
    }
}

/// Policy that reaches the mixture `x*` and then holds it, achieving the
/// fixed-point growth factor exactly from phase 3 on.
///
/// Phase 1 (steps `0..K−2`): keep the largest feasible uniform fraction of
/// the current state. Phase 2 (step `K−1`): play the largest feasible
/// scalar multiple of `s*`, which lands the state on the ray of `x*`.
/// Phase 3 (steps `≥ K`): hold `s(t) = facet_budget(w(t))·s*`.
/// A state already within 1e-9 of `x*` jumps straight to phase 3.
#[derive(Debug, Clone)]
pub struct MixturePolicy {
    x_star: Mixture,
    s_star: Mixture,
    k: usize,
}

impl MixturePolicy {
    /// Requires `normalize(R's*) = x*` within 1e-6 and `s*` feasible at
    /// `x*`; anything else is not a fixed point and is rejected.
    pub fn new(x_star: Mixture, s_star: Mixture, m: &CanonicalModel) -> Result<Self> {
        let k = m.k();
        if x_star.as_slice().len() != k || s_star.as_slice().len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: x_star.as_slice().len() });
        }
        let image = normalize(&m.r_prime.mul_vec(s_star.as_slice()))?;
        if l1_dist(image.as_slice(), x_star.as_slice()) > 1e-6 {
            return Err(Error::InvalidInput(
                "(x*, s*) is not a fixed point: normalize(R's*) differs from x*".into(),
            ));
        }
        let scaled: Vec<f64> = {
            let fb = facet_budget(x_star.as_slice(), m);
            s_star.as_slice().iter().map(|&v| fb * v).collect()
        };
        if !real_feasible(x_star.as_slice(), &scaled, m) {
            return Err(Error::InvalidInput("s* is infeasible at x*".into()));
        }
        Ok(MixturePolicy { x_star, s_star, k })
    }
}

impl Policy for MixturePolicy {
    fn action(&self, t: usize, x: &Mixture, m: &CanonicalModel) -> Result<SubPopulation> {
        let fb = facet_budget(x.as_slice(), m);
        // Already at the target mixture: hold it (phases 1-2 degenerate).
        if l1_dist(x.as_slice(), self.x_star.as_slice()) <= 1e-9 {
            return Ok(SubPopulation(self.s_star.as_slice().iter().map(|&v| fb * v).collect()));
        }
        if t + 1 < self.k {
            // Largest feasible uniform fraction: budget allows fb·x, and
            // dominance allows at most x itself.
            let c = fb.min(1.0);
            Ok(SubPopulation(x.as_slice().iter().map(|&xi| c * xi).collect()))
        } else {
            // Largest feasible multiple of s*: budget caps the total at
            // fb, dominance caps it per coordinate.
            let mut kmax = fb;
            for (&si, &xi) in self.s_star.as_slice().iter().zip(x.as_slice()) {
                if si > 0.0 {
                    kmax = kmax.min(xi / si);
                }
            }
            Ok(SubPopulation(self.s_star.as_slice().iter().map(|&v| kmax * v).collect()))
        }
    }
}

/// Endpoint and tail log-growth slopes of a trajectory. Extinct
/// trajectories report negative infinity.
pub fn growth_estimate(traj: &Trajectory) -> Result<GrowthEstimate> {
    let h = traj.horizon;
    if h < 2 {
        return Err(Error::InvalidInput("growth estimate needs horizon >= 2".into()));
    }
    let alpha_hat = (traj.log_norms[h] - traj.log_norms[0]) / h as f64;
    let tail = h.div_ceil(2);
    let tail_alpha = (traj.log_norms[h] - traj.log_norms[h - tail]) / tail as f64;
    Ok(GrowthEstimate { alpha_hat, kappa_hat: alpha_hat.exp(), tail_alpha })
}
