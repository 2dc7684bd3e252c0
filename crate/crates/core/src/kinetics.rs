//! Active/quiescent cell-cycle kinetics: build the continuous-time
//! generator `A = [[−μ, γ],[2μ, −γ]]` and discretize it over one
//! treatment period into a reproduction matrix `R = e^{AT}`.

use serde::{Deserialize, Serialize};

use crate::model::{Matrix, ModelSpec};
use crate::{Error, Result};

/// Cell-cycle rates: mitosis rate μ (per day), quiescent-to-active rate γ
/// (per day), and the spacing `T` between treatment rounds (days).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KineticsSpec {
    #[serde(rename = "mu")]
    pub mu_rate: f64,
    #[serde(rename = "gamma")]
    pub gamma_rate: f64,
    pub period_days: f64,
}

impl KineticsSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu_rate),
            ("gamma", self.gamma_rate),
            ("period_days", self.period_days),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// The linear-ODE generator: active cells divide at rate μ (one parent
/// becomes two actives, column sum μ), quiescent cells re-activate at rate
/// γ (count-conserving, column sum 0).
pub fn build_generator(spec: &KineticsSpec) -> Result<Matrix> {
    spec.validate()?;
    let (mu, ga) = (spec.mu_rate, spec.gamma_rate);
    Matrix::from_rows(&[vec![-mu, ga], vec![2.0 * mu, -ga]])
}

/// Matrix exponential `e^{AT}` of a 2×2 generator with distinct real
/// eigenvalues, via the closed-form eigendecomposition `V D(T) V⁻¹`.
/// Near-defective matrices (eigenvalue gap below 1e-10) and sizes other
/// than 2 fall back to scaling-and-squaring of the truncated series; the
/// second return value is true when the fallback ran.
pub fn discretize(a: &Matrix, t: f64) -> Result<(Matrix, bool)> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidInput("period must be nonnegative and finite".into()));
    }
    if a.k() != 2 {
        return Ok((expm_series(a, t)?, true));
    }
    let (a11, a12, a21, a22) = (a.get(0, 0), a.get(0, 1), a.get(1, 0), a.get(1, 1));
    let tr = a11 + a22;
    let det = a11 * a22 - a12 * a21;
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return Ok((expm_series(a, t)?, true));
    }
    let sq = disc.sqrt();
    let l1 = (tr + sq) / 2.0;
    let l2 = (tr - sq) / 2.0;
    if (l1 - l2).abs() < 1e-10 {
        return Ok((expm_series(a, t)?, true));
    }

    // Eigenvector for λ: (A − λI)v = 0. Use the off-diagonal row when it
    // carries information.
    let eigvec = |l: f64| -> Vec<f64> {
        if a12.abs() > 1e-300 {
            vec![a12, l - a11]
        } else {
            vec![l - a22, a21]
        }
    };
    let v1 = eigvec(l1);
    let v2 = eigvec(l2);
    let vdet = v1[0] * v2[1] - v2[0] * v1[1];
    if vdet.abs() < 1e-300 {
        return Ok((expm_series(a, t)?, true));
    }
    // R = V diag(e^{λT}) V⁻¹ assembled entrywise.
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    let mut r = Matrix::zeros(2);
    r.set(0, 0, (e1 * v1[0] * v2[1] - e2 * v2[0] * v1[1]) / vdet);
    r.set(0, 1, (e2 * v1[0] * v2[0] - e1 * v1[0] * v2[0]) / vdet);
    r.set(1, 0, (e1 * v1[1] * v2[1] - e2 * v1[1] * v2[1]) / vdet);
    r.set(1, 1, (e2 * v1[0] * v2[1] - e1 * v2[0] * v1[1]) / vdet);
    Ok((r, false))
}

/// Scaling-and-squaring truncated-series exponential with term-wise error
/// control at 1e-12.
fn expm_series(a: &Matrix, t: f64) -> Result<Matrix> {
    let k = a.k();
    let at = a.scale(t);
    // Scale so the scaled matrix has small norm, then square back.
    let norm: f64 = (0..k)
        .map(|i| (0..k).map(|j| at.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = at.scale(0.5f64.powi(squarings as i32));

    let mut result = Matrix::identity(k);
    let mut term = Matrix::identity(k);
    for i in 1..=60 {
        term = term.mul_mat(&scaled).scale(1.0 / i as f64);
        result = result.add(&term);
        let term_norm: f64 = (0..k)
            .map(|r| (0..k).map(|c| term.get(r, c).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if term_norm < 1e-12 {
            let mut out = result;
            for _ in 0..squarings {
                out = out.mul_mat(&out);
            }
            return Ok(out);
        }
    }
    Err(Error::NumericalFailure("matrix exponential series did not converge".into()))
}

/// Package a reproduction matrix as a model with unit revenue and cost —
/// the treatment setting where only the budget fraction matters.
pub fn to_model_spec(r: &Matrix, beta: f64) -> ModelSpec {
    let k = r.k();
    ModelSpec { r: r.rows(), p: vec![1.0; k], q: vec![1.0; k], beta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{spectral_radius, validate_model};
    use proptest::prelude::*;

    fn paper_spec() -> KineticsSpec {
        KineticsSpec { mu_rate: 0.0655, gamma_rate: 0.0476, period_days: 21.0 }
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        let mut d = 0.0f64;
        for i in 0..a.k() {
            for j in 0..a.k() {
                d = d.max((a.get(i, j) - b.get(i, j)).abs());
            }
        }
        d
    }

    #[test]
    fn generator_template() {
        let a = build_generator(&paper_spec()).unwrap();
        assert_eq!(a.rows(), vec![vec![-0.0655, 0.0476], vec![0.131, -0.0476]]);
        // Mitosis adds one net cell; quiescent transitions conserve count.
        assert!((a.col_sum(0) - 0.0655).abs() < 1e-15);
        assert!(a.col_sum(1).abs() < 1e-15);
        // det = -mu*gamma < 0: always invertible, eigenvalues straddle 0.
        let det = a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0);
        assert!((det + 0.0655 * 0.0476).abs() < 1e-15);
    }

    #[test]
    fn generator_rejects_nonpositive_rates() {
        let mut spec = paper_spec();
        spec.mu_rate = 0.0;
        assert!(build_generator(&spec).is_err());
    }

    #[test]
    fn discretize_zero_period_is_identity() {
        let a = build_generator(&paper_spec()).unwrap();
        let (r, _) = discretize(&a, 0.0).unwrap();
        assert!(max_abs_diff(&r, &Matrix::identity(2)) < 1e-12);
    }

    #[test]
    fn discretize_reproduces_treatment_matrix() {
        let a = build_generator(&paper_spec()).unwrap();
        let (r, fallback) = discretize(&a, 21.0).unwrap();
        assert!(!fallback);
        let expect =
            Matrix::from_rows(&[vec![0.75, 0.4674], vec![1.2864, 0.9258]]).unwrap();
        assert!(max_abs_diff(&r, &expect) < 1e-3, "got {:?}", r.rows());
        let trace = r.get(0, 0) + r.get(1, 1);
        assert!((trace - 1.6758).abs() < 1e-4);
    }

    #[test]
    fn discretize_matches_series_fallback() {
        let a = build_generator(&paper_spec()).unwrap();
        let (eig, _) = discretize(&a, 21.0).unwrap();
        let series = expm_series(&a, 21.0).unwrap();
        assert!(max_abs_diff(&eig, &series) < 1e-9);
    }

    #[test]
    fn semigroup_property() {
        let a = build_generator(&paper_spec()).unwrap();
        let (half, _) = discretize(&a, 10.5).unwrap();
        let (full, _) = discretize(&a, 21.0).unwrap();
        assert!(max_abs_diff(&half.mul_mat(&half), &full) < 1e-9);
    }

    #[test]
    fn spectral_consistency() {
        let spec = paper_spec();
        let a = build_generator(&spec).unwrap();
        // Largest eigenvalue of A from its characteristic polynomial.
        let tr = a.get(0, 0) + a.get(1, 1);
        let det = a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0);
        let lmax = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        assert!((lmax - 0.022922).abs() < 1e-6);

        let (r, _) = discretize(&a, 21.0).unwrap();
        let (rho, _) = spectral_radius(&r).unwrap();
        assert!((rho - (21.0 * lmax).exp()).abs() < 1e-9);
        assert!((rho - 1.6183).abs() < 1e-4);
    }

    #[test]
    fn model_spec_packaging() {
        let a = build_generator(&paper_spec()).unwrap();
        let (r, _) = discretize(&a, 21.0).unwrap();
        let spec = to_model_spec(&r, 0.8);
        assert_eq!(spec.p, vec![1.0, 1.0]);
        assert_eq!(spec.q, vec![1.0, 1.0]);
        assert!(validate_model(&spec).is_empty());
        // Zero period produces the identity, which fails positivity.
        let (r0, _) = discretize(&a, 0.0).unwrap();
        assert!(!validate_model(&to_model_spec(&r0, 0.8)).is_empty());
    }

    #[test]
    fn kinetics_json_keys() {
        let spec: KineticsSpec =
            serde_json::from_str(r#"{"mu":0.0655,"gamma":0.0476,"period_days":21}"#).unwrap();
        assert_eq!(spec.mu_rate, 0.0655);
        assert_eq!(spec.gamma_rate, 0.0476);
        assert_eq!(spec.period_days, 21.0);
    }

    proptest! {
        #[test]
        fn semigroup_random_times(s in 0.1f64..30.0, t in 0.1f64..30.0) {
            let a = build_generator(&paper_spec()).unwrap();
            let (rs, _) = discretize(&a, s).unwrap();
            let (rt, _) = discretize(&a, t).unwrap();
            let (rst, _) = discretize(&a, s + t).unwrap();
            prop_assert!(max_abs_diff(&rs.mul_mat(&rt), &rst) < 1e-9);
        }

        #[test]
        fn positivity(mu in 0.001f64..0.5, ga in 0.001f64..0.5, t in 0.01f64..50.0) {
            let a = build_generator(&KineticsSpec {
                mu_rate: mu,
                gamma_rate: ga,
                period_days: t,
            }).unwrap();
            let (r, _) = discretize(&a, t).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!(r.get(i, j) > 0.0);
                }
            }
        }
    }
}
