//! Built-in test problems: scalar benchmarks with known solutions, chemical
//! Langevin networks read from text files, and a locally refined heat
//! equation whose stiffness is dictated by a few fine grid cells.

mod reaction;
mod refined_heat;

pub use reaction::{load_reaction_network, parse_reaction_network, Reaction, ReactionNetwork};
pub use refined_heat::{
    make_refined_heat, make_refined_heat_with_source, RefinedHeatProblem, HEAT_DOMAIN_LENGTH,
};

use crate::error::{Result, SolverError};
use crate::problem::{DiffusionSpec, DriftPair, SplitSdeProblem};

/// Scalar linear benchmark with fast drift `lambda x`, slow drift `zeta x`
/// and multiplicative noise `mu x`, started at 1 with horizon 1. The exact
/// solution is geometric Brownian motion,
/// `X(t) = exp((lambda + zeta - mu^2/2) t + mu W(t))`.
pub fn make_multirate_test(lambda: f64, zeta: f64, mu: f64) -> Result<SplitSdeProblem> {
    if !(lambda.is_finite() && zeta.is_finite() && mu.is_finite()) {
        return Err(SolverError::invalid("rates must be finite"));
    }
    if lambda > 0.0 || zeta > 0.0 {
        return Err(SolverError::invalid(format!(
            "drift rates must be non-positive, got lambda = {lambda}, zeta = {zeta}"
        )));
    }
    let problem = SplitSdeProblem {
        name: format!("multirate-test(lambda={lambda}, zeta={zeta}, mu={mu})"),
        drift: DriftPair::new(
            1,
            move |_, y: &[f64], out: &mut [f64]| out[0] = lambda * y[0],
            move |_, y: &[f64], out: &mut [f64]| out[0] = zeta * y[0],
        ),
        diffusion: DiffusionSpec::vector(1, move |_, x: &[f64], out: &mut [f64]| {
            out[0] = mu * x[0]
        }),
        x0: vec![1.0],
        horizon: 1.0,
        exact: Some(Box::new(move |t: f64, w: &[f64]| {
            vec![((lambda + zeta - 0.5 * mu * mu) * t + mu * w[0]).exp()]
        })),
        weak_functional: Some(Box::new(|x: &[f64]| x[0])),
    };
    problem.validate()?;
    Ok(problem)
}

/// Scalar nonlinear benchmark with exact solution
/// `X(t) = sinh(t/2 + W(t)/sqrt(2))`: fast drift `sqrt(X^2+1)/2`, slow drift
/// `X/4`, diffusion `sqrt((X^2+1)/2)`, started at 0 with horizon 1. The
/// weak-error functional is `asinh`, which maps the solution back to the
/// driving Gaussian `t/2 + W(t)/sqrt(2)`.
pub fn make_sinh_problem() -> SplitSdeProblem {
    SplitSdeProblem {
        name: "sinh".into(),
        drift: DriftPair::new(
            1,
            |_, y: &[f64], out: &mut [f64]| out[0] = 0.5 * (y[0] * y[0] + 1.0).sqrt(),
            |_, y: &[f64], out: &mut [f64]| out[0] = 0.25 * y[0],
        ),
        diffusion: DiffusionSpec::vector(1, |_, x: &[f64], out: &mut [f64]| {
            out[0] = (0.5 * (x[0] * x[0] + 1.0)).sqrt()
        }),
        x0: vec![0.0],
        horizon: 1.0,
        exact: Some(Box::new(|t: f64, w: &[f64]| vec![(0.5 * t + w[0] / 2.0_f64.sqrt()).sinh()])),
        weak_functional: Some(Box::new(|x: &[f64]| x[0].asinh())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::{ms_stable_exact, MultirateTestParams};
    use approx::assert_relative_eq;

    #[test]
    fn multirate_test_exact_solution_is_gbm() {
        let p = make_multirate_test(-8.0, -2.0, 1.0).unwrap();
        let exact = p.exact.as_ref().unwrap();
        // W(t) = 0: deterministic exponential with the Ito correction.
        let v = exact(0.5, &[0.0]);
        assert_relative_eq!(v[0], (-10.5_f64 * 0.5).exp(), max_relative = 1e-14);
        // Constant solution when everything vanishes.
        let c = make_multirate_test(0.0, 0.0, 0.0).unwrap();
        let e = c.exact.as_ref().unwrap();
        assert_eq!(e(1.0, &[0.37])[0], 1.0);
    }

    #[test]
    fn multirate_test_drift_splits_linearly() {
        let p = make_multirate_test(-100.0, -3.0, 0.5).unwrap();
        let mut fast = [0.0];
        let mut slow = [0.0];
        p.drift.fast_into(0.0, &[2.0], &mut fast);
        p.drift.slow_into(0.0, &[2.0], &mut slow);
        assert_eq!(fast[0], -200.0);
        assert_eq!(slow[0], -6.0);
    }

    #[test]
    fn stiff_test_point_lies_in_stability_domain() {
        let q = MultirateTestParams::new(-1e4, -1.0, 1.0).unwrap();
        assert!(ms_stable_exact(&q));
    }

    #[test]
    fn rejects_positive_rates() {
        assert!(make_multirate_test(1.0, -1.0, 0.0).is_err());
        assert!(make_multirate_test(-1.0, 2.0, 0.0).is_err());
        assert!(make_multirate_test(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn sinh_exact_solution_values() {
        let p = make_sinh_problem();
        let exact = p.exact.as_ref().unwrap();
        let v = exact(1.0, &[0.0]);
        assert_relative_eq!(v[0], 0.5_f64.sinh(), max_relative = 1e-15);
        // asinh undoes the solution map exactly.
        let psi = p.weak_functional.as_ref().unwrap();
        let w = 0.83;
        let x = exact(1.0, &[w]);
        assert_relative_eq!(psi(&x), 0.5 + w / 2.0_f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn sinh_drift_and_diffusion_at_origin() {
        let p = make_sinh_problem();
        let mut fast = [0.0];
        let mut slow = [0.0];
        let mut g = [0.0];
        p.drift.fast_into(0.0, &[0.0], &mut fast);
        p.drift.slow_into(0.0, &[0.0], &mut slow);
        p.diffusion.eval_into(0.0, &[0.0], &mut g);
        assert_eq!(fast[0], 0.5);
        assert_eq!(slow[0], 0.0);
        assert_relative_eq!(g[0], 0.5_f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn sinh_drift_matches_ito_expansion_of_exact_solution() {
        // d sinh(u) with u = t/2 + W/sqrt(2):
        // drift = cosh(u)/2 + sinh(u)/4, diffusion = cosh(u)/sqrt(2).
        let p = make_sinh_problem();
        for &u in &[-1.0, 0.0, 0.4, 2.0] {
            let x = f64::sinh(u);
            let mut scratch = [0.0];
            let mut full = [0.0];
            p.drift.full_into(0.0, &[x], &mut scratch, &mut full);
            assert_relative_eq!(
                full[0],
                0.5 * f64::cosh(u) + 0.25 * f64::sinh(u),
                max_relative = 1e-13
            );
            let mut g = [0.0];
            p.diffusion.eval_into(0.0, &[x], &mut g);
            assert_relative_eq!(g[0], f64::cosh(u) / 2.0_f64.sqrt(), max_relative = 1e-13);
        }
    }
}
