//! Command-line surface: model I/O plus the optimize / sweep / threshold /
//! simulate / mdp / kinetics commands behind the `branchrate` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::detproc::{rollout, MixturePolicy};
use crate::kinetics::{build_generator, discretize, to_model_spec, KineticsSpec};
use crate::mdp::{build_grid, default_reference, estimate_alpha, greedy_fixed_points, value_iteration};
use crate::model::{canonicalize, validate_model, ModelSpec, PopulationProfile};
use crate::optimizer::{
    beta_threshold, solve, sweep, sweep_to_csv, verify_fixed_point, SolverKind,
};
use crate::stochastic::{monte_carlo, OffspringModel, Theorem3Policy};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "branchrate",
    about = "Rate-optimal control for resource-constrained multi-type branching processes",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverFlag {
    Optimal,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeFlag {
    Det,
    Stoch,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the optimal mixture, growth factor, and residuals.
    Optimize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Lattice denominator for the general-K solver.
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
    },
    /// Optimal vs uniform growth factors over a budget grid (CSV).
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        beta_min: f64,
        #[arg(long)]
        beta_max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
    },
    /// Smallest budget fraction reaching a target growth factor.
    Threshold {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        target: f64,
        #[arg(long, value_enum, default_value_t = SolverFlag::Optimal)]
        solver: SolverFlag,
    },
    /// Deterministic rollout (CSV) or stochastic Monte Carlo (JSON).
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: ModeFlag,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Starting population, comma-separated counts per type.
        #[arg(long)]
        z0: Option<String>,
        /// Offspring model JSON; Poisson when omitted.
        #[arg(long)]
        offspring: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
    },
    /// Value-iteration oracle for the growth rate.
    Mdp {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        grid_m: usize,
        #[arg(long, default_value_t = 0.999)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
    /// Cell-cycle kinetics JSON -> reproduction-matrix model JSON.
    Kinetics {
        /// Kinetics spec JSON ({"mu":..,"gamma":..,"period_days":..}).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Budget fraction echoed into the emitted model.
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
}

fn read_model(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)?;
    let spec: ModelSpec = serde_json::from_str(&text)?;
    let violations = validate_model(&spec);
    if !violations.is_empty() {
        return Err(Error::InvalidModel(violations));
    }
    Ok(spec)
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn parse_z0(text: &str, k: usize) -> Result<Vec<u64>> {
    let parsed: std::result::Result<Vec<u64>, _> =
        text.split(',').map(|part| part.trim().parse::<u64>()).collect();
    let z0 = parsed.map_err(|e| Error::InvalidInput(format!("bad --z0 value: {e}")))?;
    if z0.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: z0.len() });
    }
    Ok(z0)
}

/// Run the parsed command. Errors map to process exit codes in `main`.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize { model, out, resolution } => {
            let spec = read_model(&model)?;
            let m = canonicalize(&spec)?;
            let sol = solve(&m, resolution)?;
            let report = verify_fixed_point(&sol, &m)?;
            if !report.pass {
                return Err(Error::NumericalFailure(format!(
                    "solution failed verification: {report:?}"
                )));
            }
            emit_json(&out, &json!({ "solution": sol, "verification": report }))
        }
        Command::Sweep { model, out, beta_min, beta_max, steps, resolution } => {
            let spec = read_model(&model)?;
            let rows = sweep(&spec, beta_min, beta_max, steps, resolution)?;
            emit(&out, &sweep_to_csv(&rows))
        }
        Command::Threshold { model, out, target, solver } => {
            let spec = read_model(&model)?;
            let kind = match solver {
                SolverFlag::Optimal => SolverKind::Optimal,
                SolverFlag::Uniform => SolverKind::Uniform,
            };
            let beta_star = beta_threshold(&spec, target, kind)?;
            emit_json(
                &out,
                &json!({
                    "target": target,
                    "solver": kind,
                    "beta_star": beta_star,
                    "extermination_fraction": beta_star.map(|b| 1.0 - b),
                }),
            )
        }
        Command::Simulate { model, out, mode, runs, horizon, seed, z0, offspring, resolution } => {
            let spec = read_model(&model)?;
            let m = canonicalize(&spec)?;
            let k = m.k();
            let z0 = match z0 {
                Some(text) => parse_z0(&text, k)?,
                None => vec![1; k],
            };
            let sol = solve(&m, resolution)?;
            match mode {
                ModeFlag::Det => {
                    let policy = MixturePolicy::new(sol.x_star, sol.s_star, &m)?;
                    let w0 = PopulationProfile::new(z0.iter().map(|&v| v as f64).collect())?;
                    let traj = rollout(&policy, &w0, horizon, &m)?;
                    emit(&out, &traj.to_csv())
                }
                ModeFlag::Stoch => {
                    let offspring_model = match offspring {
                        Some(path) => {
                            let text = fs::read_to_string(&path)?;
                            serde_json::from_str::<OffspringModel>(&text)?
                        }
                        None => OffspringModel::Poisson,
                    };
                    offspring_model.validate(k)?;
                    let policy = Theorem3Policy { s_star: sol.s_star };
                    let report =
                        monte_carlo(&policy, &z0, runs, horizon, &m, &offspring_model, seed)?;
                    emit_json(
                        &out,
                        &json!({
                            "config": {
                                "runs": runs,
                                "horizon": horizon,
                                "z0": z0,
                                "seed": seed,
                                "kappa_star": sol.kappa_star,
                            },
                            "report": report,
                        }),
                    )
                }
            }
        }
        Command::Mdp { model, out, grid_m, gamma, epsilon } => {
            let spec = read_model(&model)?;
            let m = canonicalize(&spec)?;
            let grid = build_grid(m.k(), grid_m)?;
            let vt = value_iteration(&m, &grid, gamma, epsilon)?;
            let reference = default_reference(&grid);
            let alpha_hat = estimate_alpha(&vt, reference);
            let candidates: Vec<_> = greedy_fixed_points(&vt, &m, &grid)
                .into_iter()
                .map(|c| json!({ "mixture": c.mixture, "growth_factor": c.growth_factor }))
                .collect();
            emit_json(
                &out,
                &json!({
                    "alpha_hat": alpha_hat,
                    "kappa_hat": alpha_hat.exp(),
                    "gamma": gamma,
                    "grid_m": grid_m,
                    "iterations": vt.iterations,
                    "fixed_point_candidates": candidates,
                }),
            )
        }
        Command::Kinetics { model, out, beta } => {
            let text = fs::read_to_string(&model)?;
            let spec: KineticsSpec = serde_json::from_str(&text)?;
            let a = build_generator(&spec)?;
            let (r, fallback) = discretize(&a, spec.period_days)?;
            if fallback {
                eprintln!("warning: eigendecomposition unavailable, used series fallback");
            }
            let model_spec = to_model_spec(&r, beta);
            let violations = validate_model(&model_spec);
            if !violations.is_empty() {
                eprintln!("warning: emitted model is degenerate and will not validate:");
                for v in &violations {
                    eprintln!("  {v}");
                }
            }
            emit_json(&out, &model_spec)
        }
    }
}
