//! Spectral-radius estimation for drift Jacobians via a nonlinear power
//! method on finite-difference directional derivatives.
//!
//! The estimate feeds stage selection, which only needs about two
//! significant digits; callers scale the result by a safety factor before
//! selecting stages (see the stages module).

use crate::error::{Result, SolverError};

/// Default relative tolerance on successive Rayleigh quotients.
pub const DEFAULT_RADIUS_TOL: f64 = 1e-2;

/// Default iteration cap of the power method.
pub const DEFAULT_RADIUS_MAX_ITER: usize = 100;

/// Outcome of one power-method run.
#[derive(Debug, Clone)]
pub struct RadiusEstimate {
    /// Estimated spectral radius, in 1/time units. Finite and non-negative.
    pub rho: f64,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Final direction, unit norm; pass back in as the warm start.
    pub eigvec: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Deterministic fallback direction: alternating signs, unit norm.
fn seed_direction(n: usize) -> Vec<f64> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n).map(|i| if i % 2 == 0 { scale } else { -scale }).collect()
}

/// Estimates the spectral radius of the Jacobian of `fmap` at `y` by power
/// iteration on the finite-difference derivative
/// `(fmap(y + delta z) - fmap(y)) / delta`, `delta = sqrt(eps) max(1, |y|)`.
///
/// Stops once two successive Rayleigh-quotient magnitudes agree to relative
/// `tol`, or after `max_iter` iterations. `warm` restarts from a previous
/// estimate's direction; a zero or absent start falls back to a fixed
/// alternating pattern. The zero map yields `rho = 0` without error.
pub fn estimate_radius<F>(
    fmap: F,
    y: &[f64],
    warm: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<RadiusEstimate>
where
    F: Fn(&[f64], &mut [f64]),
{
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SolverError::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(SolverError::invalid("max_iter must be at least 1"));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::invalid("base state must be finite"));
    }
    let n = y.len();
    let delta = f64::EPSILON.sqrt() * norm(y).max(1.0);

    let mut z = match warm {
        Some(w) if w.len() == n && norm(w) > 0.0 && w.iter().all(|x| x.is_finite()) => {
            let s = 1.0 / norm(w);
            w.iter().map(|x| x * s).collect()
        }
        _ => seed_direction(n),
    };

    let mut base = vec![0.0; n];
    fmap(y, &mut base);
    if base.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::SpectralFailure("map returned non-finite values".into()));
    }

    let mut shifted = vec![0.0; n];
    let mut jz = vec![0.0; n];
    let mut arg = vec![0.0; n];
    let mut rho_prev = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        for i in 0..n {
            arg[i] = y[i] + delta * z[i];
        }
        fmap(&arg, &mut shifted);
        if shifted.iter().any(|x| !x.is_finite()) {
            return Err(SolverError::SpectralFailure(
                "map returned non-finite values during iteration".into(),
            ));
        }
        for i in 0..n {
            jz[i] = (shifted[i] - base[i]) / delta;
        }
        let len = norm(&jz);
        if len == 0.0 {
            // Derivative annihilates the direction; for the zero map (and
            // locally constant maps) the radius estimate is zero.
            return Ok(RadiusEstimate { rho: 0.0, iterations: it, eigvec: z });
        }
        // |z . Jz| as the Rayleigh-quotient magnitude; z has unit norm.
        let rayleigh: f64 = z.iter().zip(&jz).map(|(a, b)| a * b).sum::<f64>().abs();
        let rho = if rayleigh > 0.0 { rayleigh } else { len };
        for i in 0..n {
            z[i] = jz[i] / len;
        }
        if (rho - rho_prev).abs() < tol * rho.max(f64::MIN_POSITIVE) {
            return Ok(RadiusEstimate { rho, iterations: it, eigvec: z });
        }
        rho_prev = rho;
    }
    Ok(RadiusEstimate { rho: rho_prev, iterations, eigvec: z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_linear_map_converges_at_the_confirmation_step() {
        // The stop rule wants two agreeing Rayleigh quotients, so even an
        // exact first estimate takes one confirmation pass.
        let est = estimate_radius(
            |y: &[f64], out: &mut [f64]| out[0] = -42.5 * y[0],
            &[1.3],
            None,
            1e-2,
            100,
        )
        .unwrap();
        assert_relative_eq!(est.rho, 42.5, max_relative = 1e-6);
        assert_eq!(est.iterations, 2);
    }

    #[test]
    fn zero_map_reports_zero_radius() {
        let est = estimate_radius(
            |_: &[f64], out: &mut [f64]| out.fill(0.0),
            &[1.0, -2.0, 3.0],
            None,
            1e-2,
            100,
        )
        .unwrap();
        assert_eq!(est.rho, 0.0);
    }

    #[test]
    fn diagonal_map_dominant_eigenvalue_within_one_percent() {
        let est = estimate_radius(
            |y: &[f64], out: &mut [f64]| {
                out[0] = -100.0 * y[0];
                out[1] = -y[1];
            },
            &[0.4, 0.7],
            None,
            1e-4,
            50,
        )
        .unwrap();
        assert!(est.iterations <= 50);
        assert_relative_eq!(est.rho, 100.0, max_relative = 1e-2);
        assert!(norm(&est.eigvec) > 0.99 && norm(&est.eigvec) < 1.01);
    }

    #[test]
    fn symmetric_maps_with_spectral_gap_are_not_underestimated() {
        // Eigenvalue gap of at least 10%: the power method may undershoot,
        // but not by more than the tolerance allows.
        for &(a, b) in &[(-50.0, -5.0), (-200.0, -180.0), (-1.0, -0.1)] {
            let est = estimate_radius(
                |y: &[f64], out: &mut [f64]| {
                    out[0] = a * y[0];
                    out[1] = b * y[1];
                },
                &[1.0, 1.0],
                None,
                1e-4,
                200,
            )
            .unwrap();
            let true_rho = f64::max(a.abs(), b.abs());
            assert!(est.rho >= 0.95 * true_rho, "estimate {} below 95% of {true_rho}", est.rho);
            assert!(est.rho <= true_rho * 1.001);
        }
    }

    #[test]
    fn warm_restart_converges_fast_on_drifting_family() {
        // Rotating dominant direction; after the first call each restart
        // should need at most 5 iterations.
        let family = |theta: f64| {
            move |y: &[f64], out: &mut [f64]| {
                let (c, s) = (theta.cos(), theta.sin());
                // R(theta) diag(-80, -2) R(theta)^T, symmetric.
                let d0 = -80.0;
                let d1 = -2.0;
                let a = c * c * d0 + s * s * d1;
                let bq = c * s * (d0 - d1);
                let d = s * s * d0 + c * c * d1;
                out[0] = a * y[0] + bq * y[1];
                out[1] = bq * y[0] + d * y[1];
            }
        };
        let mut warm: Option<Vec<f64>> = None;
        let mut first_iters = 0;
        for k in 0..8 {
            let theta = 0.01 * k as f64;
            let est =
                estimate_radius(family(theta), &[0.3, -0.2], warm.as_deref(), 1e-2, 100).unwrap();
            assert_relative_eq!(est.rho, 80.0, max_relative = 0.05);
            if k == 0 {
                first_iters = est.iterations;
            } else {
                assert!(
                    est.iterations <= 5,
                    "warm restart took {} iterations at k = {k}",
                    est.iterations
                );
            }
            warm = Some(est.eigvec);
        }
        assert!(first_iters >= 1);
    }

    #[test]
    fn nonlinear_map_uses_local_jacobian() {
        // f(x) = -x^3: Jacobian at y is -3 y^2.
        let y = 2.0;
        let est = estimate_radius(
            move |x: &[f64], out: &mut [f64]| out[0] = -x[0] * x[0] * x[0],
            &[y],
            None,
            1e-3,
            100,
        )
        .unwrap();
        assert_relative_eq!(est.rho, 3.0 * y * y, max_relative = 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = |_: &[f64], out: &mut [f64]| out.fill(0.0);
        assert!(estimate_radius(f, &[1.0], None, 0.0, 10).is_err());
        assert!(estimate_radius(f, &[1.0], None, 1e-2, 0).is_err());
        assert!(estimate_radius(f, &[f64::NAN], None, 1e-2, 10).is_err());
        let bad = |_: &[f64], out: &mut [f64]| out.fill(f64::INFINITY);
        assert!(estimate_radius(bad, &[1.0], None, 1e-2, 10).is_err());
    }
}
