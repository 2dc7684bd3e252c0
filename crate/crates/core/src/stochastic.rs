//! Integer-valued branching simulator under the resource constraint: the
//! ⌈k̄s*⌉ selection policy, offspring sampling, single paths, and seeded
//! Monte Carlo extinction/growth statistics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::model::{l1, real_feasible, weighted_norm, CanonicalModel, Mixture};
use crate::{Error, Result};

/// Populations above this total are truncated: the explosion-rate
/// estimate only needs the pre-cap slope, and staying far below 2^63
/// avoids integer overflow.
pub const POPULATION_CAP: f64 = 1e12;

/// One weighted offspring outcome of a custom table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    /// Offspring counts per type.
    pub v: Vec<u64>,
    /// Probability of this outcome.
    pub p: f64,
}

/// Per-parent-type offspring distribution. The mean matrix of `poisson`
/// and `deterministic-rounding` is the model's reproduction matrix; a
/// `custom-table` carries its own outcome lists (one per parent type).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OffspringModel {
    /// Independent Poisson per offspring type. Satisfies the
    /// positive-extinction-chance assumption automatically
    /// (P(all zero) = e^{−column sum} > 0) and sums over parents exactly:
    /// S_j independent Poisson(R_ij) draws equal one Poisson(S_j·R_ij).
    Poisson,
    /// Deterministic aggregate: round-half-up of `R·S` per coordinate.
    DeterministicRounding,
    CustomTable { tables: Vec<Vec<TableEntry>> },
}

impl OffspringModel {
    /// Check shape and, for custom tables, that each parent type's
    /// probabilities form a distribution and give positive probability to
    /// the all-zero outcome (the extinction-chance assumption).
    pub fn validate(&self, k: usize) -> Result<()> {
        let OffspringModel::CustomTable { tables } = self else {
            return Ok(());
        };
        if tables.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: tables.len() });
        }
        for (j, table) in tables.iter().enumerate() {
            let mut total = 0.0;
            let mut zero_mass = 0.0;
            for entry in table {
                if entry.v.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, got: entry.v.len() });
                }
                if !(0.0..=1.0).contains(&entry.p) {
                    return Err(Error::InvalidInput(format!(
                        "offspring table {} has probability {} outside [0,1]",
                        j + 1,
                        entry.p
                    )));
                }
                total += entry.p;
                if entry.v.iter().all(|&x| x == 0) {
                    zero_mass += entry.p;
                }
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "offspring table {} probabilities sum to {total}, not 1",
                    j + 1
                )));
            }
            if zero_mass <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "offspring table {} gives zero probability to extinction",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Integer population vector.
pub type StochState = Vec<u64>;

/// Feasibility of an integer selection: `ΣS_i ≤ ‖Z‖_{p'}` and `S ⪯ Z`.
pub fn int_feasible(z: &StochState, s: &[u64], m: &CanonicalModel) -> bool {
    if z.len() != s.len() || z.len() != m.k() {
        return false;
    }
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let budget = weighted_norm(&zf, &m.p_prime).expect("dimensions checked");
    let total: u64 = s.iter().sum();
    total as f64 <= budget && s.iter().zip(z).all(|(&si, &zi)| si <= zi)
}

/// A state-feedback policy on integer populations.
pub trait StochPolicy {
    fn action(&self, t: usize, z: &StochState, m: &CanonicalModel) -> Result<StochState>;
}

/// The extinction/explosion policy `S = ⌈k̄s*⌉` with
/// `k̄ = sup{k > 0 : ⌈ks*⌉ feasible at Z}`.
///
/// Dominance gives the exact cap `k ≤ min_{s*_i>0} Z_i/s*_i` (for integer
/// `Z_i`, `⌈ks*_i⌉ ≤ Z_i ⟺ ks*_i ≤ Z_i`); within that cap the budget
/// predicate is a monotone step function of `k`, located by bisection.
/// `⌈ks*⌉` is left-continuous in `k`, so evaluating at the lower bisection
/// endpoint yields exactly `⌈k̄s*⌉`.
pub fn theorem3_policy(z: &StochState, s_star: &Mixture, m: &CanonicalModel) -> Result<StochState> {
    let k = m.k();
    if z.len() != k || s_star.as_slice().len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: z.len() });
    }
    if z.iter().all(|&v| v == 0) {
        return Err(Error::ExtinctState);
    }
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let budget = weighted_norm(&zf, &m.p_prime)?;
    let ceil_s = |kk: f64| -> StochState {
        s_star
            .as_slice()
            .iter()
            .map(|&si| if si > 0.0 { ceil_eps(kk * si) } else { 0 })
            .collect()
    };
    let budget_ok = |kk: f64| -> bool {
        let total: u64 = ceil_s(kk).iter().sum();
        total as f64 <= budget
    };

    // Dominance cap; zero when some needed type is absent, making every
    // positive k infeasible.
    let mut k_dom = f64::INFINITY;
    for (&si, &zi) in s_star.as_slice().iter().zip(&zf) {
        if si > 0.0 {
            k_dom = k_dom.min(zi / si);
        }
    }
    if !k_dom.is_finite() {
        return Err(Error::InvalidInput("s* has no positive coordinate".into()));
    }
    if k_dom <= 0.0 {
        return Ok(vec![0; k]);
    }
    if budget_ok(k_dom) {
        return Ok(ceil_s(k_dom));
    }
    // Even the smallest positive multiple (one individual per selected
    // type) can bust the budget; then only S = 0 is admissible.
    let mut lo = f64::MIN_POSITIVE;
    if !budget_ok(lo) {
        return Ok(vec![0; k]);
    }
    let mut hi = k_dom;
    for _ in 0..200 {
        let mid = lo / 2.0 + hi / 2.0;
        if budget_ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ceil_s(lo))
}

/// Ceiling with a small relative guard: at a breakpoint the product
/// `k·s*_i` is an integer up to floating-point noise, and rounding that
/// noise upward would overshoot the dominance bound by a whole individual.
fn ceil_eps(v: f64) -> u64 {
    if v <= 0.0 {
        return 0;
    }
    (v - 1e-9 * (1.0 + v)).ceil().max(1.0) as u64
}

/// Policy wrapper around [`theorem3_policy`] for a fixed target direction.
#[derive(Debug, Clone)]
pub struct Theorem3Policy {
    pub s_star: Mixture,
}

impl StochPolicy for Theorem3Policy {
    fn action(&self, _t: usize, z: &StochState, m: &CanonicalModel) -> Result<StochState> {
        theorem3_policy(z, &self.s_star, m)
    }
}

fn poisson_draw(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Next generation given the selected parents `S`: per type the sum of
/// `S_j` independent offspring draws.
pub fn sample_offspring(
    offspring: &OffspringModel,
    s: &[u64],
    m: &CanonicalModel,
    rng: &mut impl Rng,
) -> StochState {
    let k = m.k();
    match offspring {
        OffspringModel::Poisson => (0..k)
            .map(|i| {
                let mean: f64 = (0..k).map(|j| s[j] as f64 * m.r_prime.get(i, j)).sum();
                poisson_draw(mean, rng)
            })
            .collect(),
        OffspringModel::DeterministicRounding => (0..k)
            .map(|i| {
                let mean: f64 = (0..k).map(|j| s[j] as f64 * m.r_prime.get(i, j)).sum();
                (mean + 0.5).floor() as u64
            })
            .collect(),
        OffspringModel::CustomTable { tables } => {
            let mut z = vec![0u64; k];
            for (j, table) in tables.iter().enumerate() {
                for _ in 0..s[j] {
                    let mut u: f64 = rng.gen();
                    let mut chosen = table.last().expect("validated nonempty table");
                    for entry in table {
                        if u < entry.p {
                            chosen = entry;
                            break;
                        }
                        u -= entry.p;
                    }
                    for (zi, &vi) in z.iter_mut().zip(&chosen.v) {
                        *zi += vi;
                    }
                }
            }
            z
        }
    }
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, Serialize)]
pub struct PathSummary {
    pub extinct: bool,
    pub extinction_time: Option<usize>,
    /// True when the population hit the cap and the path was truncated.
    pub overflow: bool,
    /// Log slope over the last half of the recorded path; negative
    /// infinity for extinct paths.
    pub tail_alpha: f64,
    /// `ln‖Z(t)‖` per recorded step.
    pub log_sizes: Vec<f64>,
}

/// Run one path: `S(t) = policy(Z(t))`, `Z(t+1) = ` offspring sample.
/// Extinction (`Z = 0`) is absorbing; exceeding [`POPULATION_CAP`]
/// truncates the path with the overflow flag set.
pub fn simulate(
    policy: &dyn StochPolicy,
    z0: &StochState,
    horizon: usize,
    m: &CanonicalModel,
    offspring: &OffspringModel,
    rng: &mut impl Rng,
) -> Result<PathSummary> {
    if z0.iter().all(|&v| v == 0) {
        return Err(Error::ExtinctState);
    }
    offspring.validate(m.k())?;
    let mut z = z0.clone();
    let mut log_sizes = vec![(l1(&z.iter().map(|&v| v as f64).collect::<Vec<_>>())).ln()];
    let mut extinct = false;
    let mut extinction_time = None;
    let mut overflow = false;

    for t in 0..horizon {
        let s = policy.action(t, &z, m)?;
        if !int_feasible(&z, &s, m) {
            return Err(Error::InfeasibleAction {
                step: t,
                reason: "policy returned an infeasible selection".into(),
            });
        }
        // The real-relaxation constraint must also hold for the cast
        // vectors — a broken canonical model would surface here.
        let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let sf: Vec<f64> = s.iter().map(|&v| v as f64).collect();
        debug_assert!(real_feasible(&zf, &sf, m));

        z = sample_offspring(offspring, &s, m, rng);
        let size: f64 = z.iter().map(|&v| v as f64).sum();
        if size == 0.0 {
            extinct = true;
            extinction_time = Some(t + 1);
            break;
        }
        log_sizes.push(size.ln());
        if size > POPULATION_CAP {
            overflow = true;
            break;
        }
    }

    let tail_alpha = if extinct {
        f64::NEG_INFINITY
    } else {
        let end = log_sizes.len() - 1;
        let tail = end.div_ceil(2).max(1);
        (log_sizes[end] - log_sizes[end - tail]) / tail as f64
    };

    Ok(PathSummary { extinct, extinction_time, overflow, tail_alpha, log_sizes })
}

/// Aggregated Monte Carlo statistics over independently seeded runs.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub extinction_count: usize,
    pub extinction_probability: f64,
    /// 95% normal-approximation half-width on the extinction probability.
    pub ci_halfwidth: f64,
    pub overflow_count: usize,
    /// Mean tail growth rate over non-extinct runs; `None` when every run
    /// went extinct.
    pub conditional_alpha_mean: Option<f64>,
    pub conditional_alpha_std: Option<f64>,
    pub seed: u64,
}

/// Run `runs` independent paths. Run `i` uses a generator seeded with
/// `base_seed + i`, so the report is identical however runs are scheduled.
pub fn monte_carlo(
    policy: &dyn StochPolicy,
    z0: &StochState,
    runs: usize,
    horizon: usize,
    m: &CanonicalModel,
    offspring: &OffspringModel,
    base_seed: u64,
) -> Result<MonteCarloReport> {
    if runs == 0 {
        return Err(Error::InvalidInput("monte carlo needs at least one run".into()));
    }
    let mut extinction_count = 0;
    let mut overflow_count = 0;
    // Compensated sums keep the aggregate independent of run order.
    let mut sum = 0.0f64;
    let mut sum_c = 0.0f64;
    let mut sumsq = 0.0f64;
    let mut sumsq_c = 0.0f64;
    let mut survivors = 0usize;

    let kahan = |acc: &mut f64, comp: &mut f64, term: f64| {
        let y = term - *comp;
        let t = *acc + y;
        *comp = (t - *acc) - y;
        *acc = t;
    };

    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(run as u64));
        let path = simulate(policy, z0, horizon, m, offspring, &mut rng)?;
        if path.extinct {
            extinction_count += 1;
        } else {
            survivors += 1;
            kahan(&mut sum, &mut sum_c, path.tail_alpha);
            kahan(&mut sumsq, &mut sumsq_c, path.tail_alpha * path.tail_alpha);
        }
        if path.overflow {
            overflow_count += 1;
        }
    }

    let p = extinction_count as f64 / runs as f64;
    let (mean, std) = if survivors > 0 {
        let mean = sum / survivors as f64;
        let var = (sumsq / survivors as f64 - mean * mean).max(0.0);
        (Some(mean), Some(var.sqrt()))
    } else {
        (None, None)
    };
    Ok(MonteCarloReport {
        runs,
        extinction_count,
        extinction_probability: p,
        ci_halfwidth: 1.96 * (p * (1.0 - p) / runs as f64).sqrt(),
        overflow_count,
        conditional_alpha_mean: mean,
        conditional_alpha_std: std,
        seed: base_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonicalize, cancer_spec};
    use crate::optimizer::solve_k2;

    fn cancer(beta: f64) -> CanonicalModel {
        canonicalize(&cancer_spec(beta)).unwrap()
    }

    fn halfp() -> CanonicalModel {
        CanonicalModel {
            r_prime: crate::model::Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            p_prime: vec![0.5, 0.5],
        }
    }

    #[test]
    fn int_feasible_examples() {
        let m = halfp();
        assert!(int_feasible(&vec![3, 2], &[2, 0], &m));
        assert!(!int_feasible(&vec![3, 2], &[3, 0], &m));
        assert!(int_feasible(&vec![3, 2], &[0, 0], &m));
        assert!(!int_feasible(&vec![3, 2], &[0, 3], &m));
    }

    #[test]
    fn theorem3_policy_examples() {
        let m = halfp();
        let s = theorem3_policy(&vec![10, 10], &Mixture(vec![0.5, 0.5]), &m).unwrap();
        assert_eq!(s, vec![5, 5]);
        let s = theorem3_policy(&vec![10, 10], &Mixture(vec![1.0, 0.0]), &m).unwrap();
        assert_eq!(s, vec![10, 0]);
        // One type extinct but required: k_dom = 0, nothing selectable.
        let s = theorem3_policy(&vec![1, 0], &Mixture(vec![0.5, 0.5]), &m).unwrap();
        assert_eq!(s, vec![0, 0]);
        assert!(matches!(
            theorem3_policy(&vec![0, 0], &Mixture(vec![0.5, 0.5]), &m),
            Err(Error::ExtinctState)
        ));
    }

    /// Brute-force maximality oracle: no feasible ⌈ks*⌉ has a larger
    /// total than the policy's choice.
    fn brute_force_best(z: &StochState, s_star: &Mixture, m: &CanonicalModel) -> u64 {
        let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let budget = weighted_norm(&zf, &m.p_prime).unwrap();
        let mut best = 0u64;
        // Every distinct value of ⌈ks*⌉ appears at a breakpoint
        // k = n/s*_i for integers n up to the dominance cap.
        let mut breakpoints = vec![];
        for (&si, &zi) in s_star.as_slice().iter().zip(z) {
            if si > 0.0 {
                for n in 1..=(zi + 1) {
                    breakpoints.push(n as f64 / si);
                }
            }
        }
        for &k in &breakpoints {
            let s: Vec<u64> = s_star
                .as_slice()
                .iter()
                .map(|&si| {
                    if si > 0.0 {
                        ((k * si) - 1e-9 * (1.0 + k * si)).ceil().max(1.0) as u64
                    } else {
                        0
                    }
                })
                .collect();
            let total: u64 = s.iter().sum();
            if s.iter().zip(z).all(|(&a, &b)| a <= b) && (total as f64) <= budget {
                best = best.max(total);
            }
        }
        best
    }

    #[test]
    fn theorem3_policy_maximality_exhaustive() {
        let m = cancer(0.8);
        let s_star = solve_k2(&m).unwrap().s_star;
        for z1 in 0..=30u64 {
            for z2 in 0..=(30 - z1) {
                if z1 + z2 == 0 {
                    continue;
                }
                let z = vec![z1, z2];
                let s = theorem3_policy(&z, &s_star, &m).unwrap();
                assert!(int_feasible(&z, &s, &m), "infeasible at Z=({z1},{z2})");
                let total: u64 = s.iter().sum();
                assert_eq!(
                    total,
                    brute_force_best(&z, &s_star, &m),
                    "suboptimal at Z=({z1},{z2}): S={s:?}"
                );
            }
        }
    }

    #[test]
    fn offspring_zero_selection() {
        let m = cancer(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = sample_offspring(&OffspringModel::Poisson, &[0, 0], &m, &mut rng);
        assert_eq!(z, vec![0, 0]);
    }

    #[test]
    fn deterministic_rounding_aggregate() {
        let m = cancer(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Column 1 = (0.75, 1.2864); twice that rounds half-up to (2, 3).
        let z = sample_offspring(&OffspringModel::DeterministicRounding, &[2, 0], &m, &mut rng);
        assert_eq!(z, vec![2, 3]);
    }

    #[test]
    fn poisson_mean_consistency() {
        let m = cancer(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000usize;
        let mut total = 0u64;
        for _ in 0..draws {
            total += sample_offspring(&OffspringModel::Poisson, &[1000, 0], &m, &mut rng)[0];
        }
        let mean = total as f64 / draws as f64;
        // Mean 750, sd sqrt(750); 3 sigma over 1e4 draws.
        let sigma = (750.0f64).sqrt() / (draws as f64).sqrt();
        assert!((mean - 750.0).abs() < 3.0 * sigma, "empirical mean {mean}");
    }

    #[test]
    fn custom_table_validation() {
        let bad = OffspringModel::CustomTable {
            tables: vec![
                vec![TableEntry { v: vec![1, 0], p: 1.0 }],
                vec![TableEntry { v: vec![0, 0], p: 1.0 }],
            ],
        };
        // First table has no extinction mass.
        assert!(bad.validate(2).is_err());

        let good = OffspringModel::CustomTable {
            tables: vec![
                vec![
                    TableEntry { v: vec![2, 0], p: 0.5 },
                    TableEntry { v: vec![0, 0], p: 0.5 },
                ],
                vec![
                    TableEntry { v: vec![0, 2], p: 0.5 },
                    TableEntry { v: vec![0, 0], p: 0.5 },
                ],
            ],
        };
        assert!(good.validate(2).is_ok());
    }

    #[test]
    fn offspring_json_round_trip() {
        let json = r#"{"kind":"poisson"}"#;
        let model: OffspringModel = serde_json::from_str(json).unwrap();
        assert!(matches!(model, OffspringModel::Poisson));
        let json = r#"{"kind":"custom-table","tables":[[{"v":[0,0],"p":1.0}],[{"v":[0,0],"p":1.0}]]}"#;
        let model: OffspringModel = serde_json::from_str(json).unwrap();
        assert!(model.validate(2).is_ok());
    }

    struct KeepAll;
    impl StochPolicy for KeepAll {
        fn action(&self, _t: usize, z: &StochState, _m: &CanonicalModel) -> Result<StochState> {
            Ok(z.clone())
        }
    }

    #[test]
    fn always_zero_offspring_goes_extinct_at_one() {
        let m = cancer(1.0);
        let table = OffspringModel::CustomTable {
            tables: vec![
                vec![TableEntry { v: vec![0, 0], p: 1.0 }],
                vec![TableEntry { v: vec![0, 0], p: 1.0 }],
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let path = simulate(&KeepAll, &vec![5, 5], 10, &m, &table, &mut rng).unwrap();
        assert!(path.extinct);
        assert_eq!(path.extinction_time, Some(1));
        assert_eq!(path.tail_alpha, f64::NEG_INFINITY);
    }

    #[test]
    fn subcritical_path_goes_extinct() {
        let m = cancer(0.5);
        let s_star = solve_k2(&m).unwrap().s_star;
        let policy = Theorem3Policy { s_star };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let path =
            simulate(&policy, &vec![500, 500], 200, &m, &OffspringModel::Poisson, &mut rng).unwrap();
        assert!(path.extinct, "seeded subcritical run survived");
    }

    #[test]
    fn supercritical_growth_rate() {
        let m = cancer(0.8);
        let sol = solve_k2(&m).unwrap();
        let policy = Theorem3Policy { s_star: sol.s_star };
        let report = monte_carlo(
            &policy,
            &vec![5000, 5000],
            50,
            60,
            &m,
            &OffspringModel::Poisson,
            2024,
        )
        .unwrap();
        assert!(report.runs - report.extinction_count > 0);
        let mean = report.conditional_alpha_mean.unwrap();
        let target = sol.kappa_star.ln();
        assert!((mean - target).abs() < 0.1 * target, "mean alpha {mean} vs {target}");
    }

    #[test]
    fn monotone_extinction_in_budget() {
        let mut prev = usize::MAX;
        for &beta in &[0.4, 0.5, 0.6, 0.7, 0.8] {
            let m = cancer(beta);
            let s_star = solve_k2(&m).unwrap().s_star;
            let policy = Theorem3Policy { s_star };
            let report = monte_carlo(
                &policy,
                &vec![50, 50],
                100,
                100,
                &m,
                &OffspringModel::Poisson,
                7,
            )
            .unwrap();
            assert!(
                report.extinction_count <= prev,
                "extinction rose from {prev} to {} at beta={beta}",
                report.extinction_count
            );
            prev = report.extinction_count;
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_and_matches_single_run() {
        let m = cancer(0.8);
        let s_star = solve_k2(&m).unwrap().s_star;
        let policy = Theorem3Policy { s_star };
        let a = monte_carlo(&policy, &vec![100, 100], 5, 30, &m, &OffspringModel::Poisson, 99)
            .unwrap();
        let b = monte_carlo(&policy, &vec![100, 100], 5, 30, &m, &OffspringModel::Poisson, 99)
            .unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

        let single = monte_carlo(&policy, &vec![100, 100], 1, 30, &m, &OffspringModel::Poisson, 99)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let path =
            simulate(&policy, &vec![100, 100], 30, &m, &OffspringModel::Poisson, &mut rng).unwrap();
        if path.extinct {
            assert_eq!(single.extinction_count, 1);
        } else {
            assert_eq!(single.conditional_alpha_mean, Some(path.tail_alpha));
        }
    }

    #[test]
    fn overflow_truncates() {
        let m = canonicalize(&crate::model::blog_spec(1.0)).unwrap();
        let policy = KeepAll;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = simulate(&policy, &vec![1000, 1000], 50, &m, &OffspringModel::Poisson, &mut rng)
            .unwrap();
        assert!(path.overflow);
        assert!(path.log_sizes.len() < 51);
        // The pre-cap slope still estimates the growth factor (rho = 160).
        assert!((path.tail_alpha - 160.42f64.ln()).abs() < 0.05);
    }
}
