//! Stability functions of the stabilized schemes and the mean-square
//! stability certification built on them.
//!
//! Every scheme in this crate has, on the linear test equation, an update of
//! the form `X_{n+1} = (A_s(p) + B_s(p) q xi) X_n`:
//!
//! * `stab_a` is the shifted first-kind Chebyshev polynomial `A_k(z) =
//!   T_k(w0 + w1 z) / T_k(w0)`, bounded by one on the damped interval
//!   `[-beta k^2, 0]`.
//! * `stab_phi` is the secant slope `(A_k(z) - 1)/z`, the factor a multirate
//!   step applies to the drift.
//! * `stab_b` is the noise polynomial `U_{k-1}(w0 + w1 z)/U_{k-1}(w0) *
//!   (1 + w1 z / 2)`.
//! * `stab_psi` is the damped diffusion factor of the inner scheme; it uses
//!   the coefficients of the full `m = 2r`-stage scheme but Chebyshev degree
//!   `r - 1`.
//!
//! `certify_stability` walks a grid of test-equation parameters, selects
//! stages exactly as the solver would, and checks that the exact mean-square
//! amplification `A^2 + B^2 q^2` stays below one.

use crate::chebyshev::{cheb_t, cheb_t_prime, cheb_u};
use crate::error::{Result, SolverError};
use crate::stages::select_stages;

/// Below this magnitude `phi` switches to its quadratic series: the direct
/// quotient loses accuracy to cancellation faster than the series truncates.
pub const PHI_SERIES_CUTOFF: f64 = 1e-6;

/// Below this magnitude `stab_phi` switches from the direct secant (which
/// cancels catastrophically) to a midpoint-derivative evaluation.
pub const STAB_PHI_LIMIT_CUTOFF: f64 = 1e-6;

/// Slack for strict stability inequalities, absorbing round-off at domain
/// boundaries.
pub const CERT_SLACK: f64 = 1e-12;

/// `phi(z) = (e^z - 1)/z`, continuously extended by `phi(0) = 1`.
pub fn phi(z: f64) -> f64 {
    assert!(!z.is_nan(), "phi: argument must not be NaN");
    if z == 0.0 {
        1.0
    } else if z.abs() < PHI_SERIES_CUTOFF {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// Shifted Chebyshev parameters `(w0, w1)` for a `k`-stage scheme with
/// damping `eps`: `w0 = 1 + eps/k^2`, `w1 = T_k(w0)/T_k'(w0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPolyParams {
    pub stages: u32,
    pub eps: f64,
    pub omega0: f64,
    pub omega1: f64,
}

impl StabilityPolyParams {
    pub fn new(stages: u32, eps: f64) -> Result<Self> {
        if stages == 0 {
            return Err(SolverError::invalid("stage count must be at least 1"));
        }
        if !eps.is_finite() || eps < 0.0 {
            return Err(SolverError::invalid(format!(
                "damping must be finite and non-negative, got {eps}"
            )));
        }
        let k = stages as f64;
        let omega0 = 1.0 + eps / (k * k);
        let omega1 = cheb_t(stages, omega0) / cheb_t_prime(stages, omega0);
        Ok(StabilityPolyParams { stages, eps, omega0, omega1 })
    }
}

/// Drift stability polynomial `A_k(z) = T_k(w0 + w1 z)/T_k(w0)`.
pub fn stab_a(p: &StabilityPolyParams, z: f64) -> f64 {
    cheb_t(p.stages, p.omega0 + p.omega1 * z) / cheb_t(p.stages, p.omega0)
}

/// Secant slope `Phi_k(z) = (A_k(z) - 1)/z` with its removable singularity
/// filled in: exactly 1 at `z = 0`. For small nonzero `z` the secant is
/// evaluated as `w1 T_k'(w0 + w1 z / 2)/T_k(w0)`, the midpoint form of the
/// difference quotient, which avoids the `A - 1` cancellation and tends to
/// `A_k'(0) = 1` (by construction of `w1`) as `z -> 0`.
pub fn stab_phi(p: &StabilityPolyParams, z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else if z.abs() < STAB_PHI_LIMIT_CUTOFF {
        p.omega1 * cheb_t_prime(p.stages, p.omega0 + 0.5 * p.omega1 * z)
            / cheb_t(p.stages, p.omega0)
    } else {
        (stab_a(p, z) - 1.0) / z
    }
}

/// Noise stability polynomial
/// `B_k(z) = U_{k-1}(w0 + w1 z)/U_{k-1}(w0) * (1 + w1 z / 2)`.
pub fn stab_b(p: &StabilityPolyParams, z: f64) -> f64 {
    cheb_u(p.stages - 1, p.omega0 + p.omega1 * z) / cheb_u(p.stages - 1, p.omega0)
        * (1.0 + 0.5 * p.omega1 * z)
}

/// Damped diffusion polynomial of the `r`-stage noise chains,
/// `Psi_r(z) = U_{r-1}(w0 + w1 z)/U_{r-1}(w0) * (1 + w1 z / 2)`, where
/// `p` must carry the parameters of the full `m = 2r`-stage scheme.
pub fn stab_psi(p: &StabilityPolyParams, z: f64) -> f64 {
    assert!(
        p.stages >= 2 && p.stages % 2 == 0,
        "stab_psi: parameters must describe an even m = 2r stage scheme, got m = {}",
        p.stages
    );
    let r = p.stages / 2;
    cheb_u(r - 1, p.omega0 + p.omega1 * z) / cheb_u(r - 1, p.omega0) * (1.0 + 0.5 * p.omega1 * z)
}

/// Parameters of the linear multirate test equation
/// `dX = (lambda + zeta) X dt + mu X dW` with `lambda` the fast rate and
/// `zeta` the slow rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultirateTestParams {
    pub lambda: f64,
    pub zeta: f64,
    pub mu: f64,
}

impl MultirateTestParams {
    pub fn new(lambda: f64, zeta: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && zeta.is_finite() && mu.is_finite()) {
            return Err(SolverError::invalid("test-equation rates must be finite"));
        }
        if lambda > 0.0 || zeta > 0.0 {
            return Err(SolverError::invalid(format!(
                "test-equation rates must be non-positive, got lambda = {lambda}, zeta = {zeta}"
            )));
        }
        Ok(MultirateTestParams { lambda, zeta, mu })
    }
}

/// Exact mean-square stability of the test equation:
/// `lambda + zeta + |mu|^2 / 2 < 0`.
pub fn ms_stable_exact(t: &MultirateTestParams) -> bool {
    t.lambda + t.zeta + 0.5 * t.mu * t.mu < 0.0
}

/// Exact one-step mean-square amplification of a scheme with stability
/// functions `A`, `B` under a standard normal noise draw:
/// `E |A(p) + B(p) q xi|^2 = A(p)^2 + B(p)^2 q^2`.
pub fn ms_amplification(outer: &StabilityPolyParams, p: f64, q: f64) -> f64 {
    let a = stab_a(outer, p);
    let b = stab_b(outer, p);
    a * a + b * b * q * q
}

/// One certified grid point: the stage choice the solver would make, the
/// effective drift/noise arguments, and the resulting amplification.
#[derive(Debug, Clone, Copy)]
pub struct CertRow {
    pub point: MultirateTestParams,
    pub s: usize,
    pub m: usize,
    pub eta: f64,
    pub p: f64,
    pub q: f64,
    pub amplification: f64,
    pub stable: bool,
}

#[derive(Debug, Clone)]
pub struct CertificationReport {
    pub tau: f64,
    pub rows: Vec<CertRow>,
}

impl CertificationReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.stable).count()
    }

    pub fn all_stable(&self) -> bool {
        self.rows.iter().all(|r| r.stable)
    }
}

/// Certifies mean-square stability of the multirate stochastic scheme over a
/// grid of test-equation parameters at step size `tau`.
///
/// Stages are selected with zero damping from the exact rates, mirroring the
/// solver. A row is stable when the exact amplification stays below
/// `1 + CERT_SLACK`. Points outside the exact mean-square stability domain
/// are rejected.
pub fn certify_stability(points: &[MultirateTestParams], tau: f64) -> Result<CertificationReport> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SolverError::invalid(format!("tau must be positive, got {tau}")));
    }
    let mut rows = Vec::with_capacity(points.len());
    for point in points {
        if !ms_stable_exact(point) {
            return Err(SolverError::invalid(format!(
                "grid point (lambda = {}, zeta = {}, mu = {}) lies outside the \
                 mean-square stability domain",
                point.lambda, point.zeta, point.mu
            )));
        }
        let params = select_stages(tau, point.lambda.abs(), point.zeta.abs(), 0.0)?;
        let inner = StabilityPolyParams::new(params.m as u32, 0.0)?;
        let outer = StabilityPolyParams::new(params.s as u32, 0.0)?;
        let z = params.eta * point.lambda;
        let p = tau * stab_phi(&inner, z) * (point.lambda + point.zeta);
        let q = stab_psi(&inner, z) * point.mu * tau.sqrt();
        let amplification = ms_amplification(&outer, p, q);
        rows.push(CertRow {
            point: *point,
            s: params.s,
            m: params.m,
            eta: params.eta,
            p,
            q,
            amplification,
            stable: amplification < 1.0 + CERT_SLACK,
        });
    }
    Ok(CertificationReport { tau, rows })
}

/// Deterministic log-spaced grid inside the mean-square stability domain:
/// `n_lambda` fast rates in `[-1e6, -1e-2]`, `n_zeta` slow rates in
/// `[-1e3, -1e-2]`, and `n_mu` noise magnitudes filling `mu^2 < 2|lambda +
/// zeta|` up to 99 percent of the boundary.
pub fn s_mms_grid(n_lambda: usize, n_zeta: usize, n_mu: usize) -> Vec<MultirateTestParams> {
    let mut grid = Vec::with_capacity(n_lambda * n_zeta * n_mu);
    for i in 0..n_lambda {
        let u = lin(-2.0, 6.0, i, n_lambda);
        let lambda = -(10.0_f64).powf(u);
        for j in 0..n_zeta {
            let v = lin(-2.0, 3.0, j, n_zeta);
            let zeta = -(10.0_f64).powf(v);
            for k in 0..n_mu {
                let w = lin(0.0, 0.99, k, n_mu);
                let mu = w * (2.0 * (lambda + zeta).abs()).sqrt();
                grid.push(MultirateTestParams { lambda, zeta, mu });
            }
        }
    }
    grid
}

fn lin(a: f64, b: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        a
    } else {
        a + (b - a) * (i as f64) / ((n - 1) as f64)
    }
}
