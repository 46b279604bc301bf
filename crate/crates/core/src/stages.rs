//! Stage-count selection and the Chebyshev recurrence coefficients shared by
//! the deterministic and stochastic integrators.
//!
//! For a step `tau` and spectral radii `rho_s` (slow drift, outer scheme) and
//! `rho_f` (fast drift, inner scheme) the counts are the smallest admissible
//!
//! * `s` with `beta s^2 >= tau rho_s`,
//! * even `m >= 2` with `beta (m^2 - 1) >= 6 tau rho_f / (beta s^2)`,
//!
//! where `beta = 2 - 4 eps / 3` shrinks the stability interval in exchange
//! for damping `eps`. The inner scheme then integrates the fast drift over
//! the auxiliary horizon `eta = 6 tau / (beta s^2) * m^2/(m^2 - 1)`, which is
//! exactly long enough to shield the outer scheme from the fast scale.

use crate::chebyshev::{cheb_t, cheb_t_prime, cheb_u};
use crate::error::{Result, SolverError};
use crate::stability::StabilityPolyParams;

/// Multiplier applied to *estimated* spectral radii before stage selection.
/// Callers passing exact rates (tests, certification) use the radii as-is.
pub const RADIUS_SAFETY: f64 = 1.05;

/// Default damping; keeps a strip around the negative real axis inside the
/// stability domain at the cost of about 3 percent of its length.
pub const DEFAULT_EPS: f64 = 0.05;

/// Stability interval shrink factor `beta = 2 - 4 eps / 3`.
pub fn damping_beta(eps: f64) -> f64 {
    2.0 - 4.0 * eps / 3.0
}

/// Coefficients of the outer (slow, `s`-stage) recurrence.
///
/// The first stage uses `mu1`; the stochastic schemes additionally shift its
/// drift argument by `nu1 * Q` and add `kappa1 * Q`, where `Q` is the damped
/// noise term. Stages `j = 2..=s` use `mu[j-2]`, `nu[j-2]`, `kappa[j-2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterCoeffs {
    pub omega0: f64,
    pub omega1: f64,
    pub mu1: f64,
    pub nu1: f64,
    pub kappa1: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `b[j] = 1/T_j(omega0)`, kept for the consistency checks.
    pub b: Vec<f64>,
}

/// Coefficients of the inner (fast, `m`-stage) recurrence and of the
/// `r = m/2`-stage noise chains.
///
/// The first stage uses `alpha1`; stages `j = 2..=m` use `alpha[j-2]`,
/// `beta[j-2]`, `gamma[j-2]`. The noise chains reuse the same table for
/// stages `2..=r` and inject the diffusion in their first stage through
/// `beta1_noise`, `gamma1_noise`, and `theta1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerCoeffs {
    pub omega0: f64,
    pub omega1: f64,
    pub alpha1: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta1_noise: f64,
    pub gamma1_noise: f64,
    pub theta1: f64,
    /// `a[j] = 1/T_j(omega0)`.
    pub a: Vec<f64>,
}

/// Everything a multirate step needs: the stage counts `(s, m, r)`, the
/// auxiliary horizon `eta`, the damping, and both coefficient tables.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    pub s: usize,
    pub m: usize,
    pub r: usize,
    pub eta: f64,
    pub eps: f64,
    pub beta: f64,
    pub outer: OuterCoeffs,
    pub inner: InnerCoeffs,
}

impl StageParams {
    /// Rebuilds the full parameter set from the counts alone. Calling this
    /// with the fields of an existing `StageParams` reproduces it exactly.
    pub fn from_counts(s: usize, m: usize, eta: f64, eps: f64) -> Result<Self> {
        if s == 0 {
            return Err(SolverError::invalid("outer stage count must be at least 1"));
        }
        if m < 2 || m % 2 != 0 {
            return Err(SolverError::invalid(format!(
                "inner stage count must be even and at least 2, got {m}"
            )));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(SolverError::invalid(format!(
                "auxiliary horizon must be positive, got {eta}"
            )));
        }
        if !(0.0..1.5).contains(&eps) {
            return Err(SolverError::invalid(format!("damping must lie in [0, 1.5), got {eps}")));
        }
        let outer = build_outer(s, eps)?;
        let inner = build_inner(m, eps)?;
        Ok(StageParams { s, m, r: m / 2, eta, eps, beta: damping_beta(eps), outer, inner })
    }

    /// Builds parameters for caller-chosen stage counts with the auxiliary
    /// horizon coupled to the step size by the same relation
    /// `eta = 6 tau / (beta s^2) * m^2 / (m^2 - 1)` that [`select_stages`]
    /// uses.
    pub fn coupled_from_counts(tau: f64, s: usize, m: usize, eps: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(SolverError::invalid(format!("tau must be positive, got {tau}")));
        }
        if m < 2 {
            return Err(SolverError::invalid(format!("inner stage count too small: {m}")));
        }
        let beta = damping_beta(eps);
        let m_f = m as f64;
        let eta = 6.0 * tau / (beta * (s * s) as f64) * m_f * m_f / (m_f * m_f - 1.0);
        StageParams::from_counts(s, m, eta, eps)
    }
}

fn build_outer(s: usize, eps: f64) -> Result<OuterCoeffs> {
    let p = StabilityPolyParams::new(s as u32, eps)?;
    let (omega0, omega1) = (p.omega0, p.omega1);
    let b: Vec<f64> = (0..=s as u32).map(|j| 1.0 / cheb_t(j, omega0)).collect();
    let mut mu = Vec::with_capacity(s.saturating_sub(1));
    let mut nu = Vec::with_capacity(s.saturating_sub(1));
    let mut kappa = Vec::with_capacity(s.saturating_sub(1));
    for j in 2..=s {
        mu.push(2.0 * omega1 * b[j] / b[j - 1]);
        nu.push(2.0 * omega0 * b[j] / b[j - 1]);
        kappa.push(-b[j] / b[j - 2]);
    }
    Ok(OuterCoeffs {
        omega0,
        omega1,
        mu1: omega1 / omega0,
        nu1: s as f64 * omega1 / 2.0,
        kappa1: s as f64 * omega1 / omega0,
        mu,
        nu,
        kappa,
        b,
    })
}

fn build_inner(m: usize, eps: f64) -> Result<InnerCoeffs> {
    let p = StabilityPolyParams::new(m as u32, eps)?;
    let (omega0, omega1) = (p.omega0, p.omega1);
    let a: Vec<f64> = (0..=m as u32).map(|j| 1.0 / cheb_t(j, omega0)).collect();
    let mut alpha = Vec::with_capacity(m - 1);
    let mut beta = Vec::with_capacity(m - 1);
    let mut gamma = Vec::with_capacity(m - 1);
    for j in 2..=m {
        alpha.push(2.0 * omega1 * a[j] / a[j - 1]);
        beta.push(2.0 * omega0 * a[j] / a[j - 1]);
        gamma.push(-a[j] / a[j - 2]);
    }
    let r = (m / 2) as u32;
    let theta1 = cheb_t(r, omega0) / (2.0 * omega1 * cheb_t_prime(r, omega0));
    Ok(InnerCoeffs {
        omega0,
        omega1,
        alpha1: omega1 / omega0,
        alpha,
        beta,
        gamma,
        beta1_noise: m as f64 * omega1 / 2.0,
        gamma1_noise: m as f64 * omega1 / omega0,
        theta1,
        a,
    })
}

/// Selects the smallest admissible stage counts for step `tau` given the
/// fast and slow drift spectral radii, and builds all coefficients.
///
/// Both radii are used as given; multiply estimates by [`RADIUS_SAFETY`]
/// first. Zero radii are valid and give the floors `s = 1`, `m = 2`.
pub fn select_stages(tau: f64, rho_f: f64, rho_s: f64, eps: f64) -> Result<StageParams> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SolverError::invalid(format!("tau must be positive, got {tau}")));
    }
    if !(rho_f.is_finite() && rho_f >= 0.0) || !(rho_s.is_finite() && rho_s >= 0.0) {
        return Err(SolverError::invalid(format!(
            "spectral radii must be finite and non-negative, got rho_f = {rho_f}, rho_s = {rho_s}"
        )));
    }
    if !(0.0..1.5).contains(&eps) {
        return Err(SolverError::invalid(format!("damping must lie in [0, 1.5), got {eps}")));
    }
    let beta = damping_beta(eps);

    // Exact algebraic ties (target an exact multiple of beta) must keep the
    // tied count; a relative slack absorbs the rounding noise of the target
    // products. Any resulting condition violation is below 1e-9 relative,
    // orders of magnitude inside the callers' radius safety margin.
    const TIE_REL: f64 = 1e-9;

    let slow_target = tau * rho_s * (1.0 - TIE_REL);
    let mut s = (slow_target / beta).sqrt().ceil().max(1.0) as usize;
    while beta * ((s * s) as f64) < slow_target {
        s += 1;
    }
    while s > 1 && beta * (((s - 1) * (s - 1)) as f64) >= slow_target {
        s -= 1;
    }

    let fast_target = 6.0 * tau * rho_f / (beta * (s * s) as f64) * (1.0 - TIE_REL);
    let mut m = (fast_target / beta + 1.0).sqrt().ceil().max(2.0) as usize;
    if m % 2 == 1 {
        m += 1;
    }
    while beta * ((m * m - 1) as f64) < fast_target {
        m += 2;
    }
    while m > 2 && beta * (((m - 2) * (m - 2) - 1) as f64) >= fast_target {
        m -= 2;
    }

    let m_f = m as f64;
    let eta = 6.0 * tau / (beta * (s * s) as f64) * m_f * m_f / (m_f * m_f - 1.0);
    StageParams::from_counts(s, m, eta, eps)
}

/// Result of the outer-scheme consistency check: the weighted sum of stage
/// increments (must be 1) and the smallest individual term (must be
/// non-negative).
#[derive(Debug, Clone, Copy)]
pub struct AbscissaeCheck {
    pub sum: f64,
    pub min_term: f64,
}

/// Evaluates `sum_{k=1..s} (b_s / b_k) U_{s-k}(omega0) mu_k`, which telescopes
/// to 1 for a consistent coefficient table, together with the smallest term.
pub fn stage_abscissae_check(p: &StageParams) -> AbscissaeCheck {
    let o = &p.outer;
    let s = p.s;
    let b_s = o.b[s];
    let mut sum = 0.0;
    let mut min_term = f64::INFINITY;
    for k in 1..=s {
        let mu_k = if k == 1 { o.mu1 } else { o.mu[k - 2] };
        let term = (b_s / o.b[k]) * cheb_u((s - k) as u32, o.omega0) * mu_k;
        sum += term;
        min_term = min_term.min(term);
    }
    AbscissaeCheck { sum, min_term }
}

/// Evaluates `(b_s / b_1) U_{s-1}(omega0) kappa1`, which equals 1: the noise
/// injected in the first stage is propagated to the final one with unit
/// weight.
pub fn noise_stage_identity(p: &StageParams) -> f64 {
    let o = &p.outer;
    (o.b[p.s] / o.b[1]) * cheb_u((p.s - 1) as u32, o.omega0) * o.kappa1
}
