//! Stochastic stabilized integrators: the single-rate Chebyshev scheme
//! (`skrock_step`) and its multirate extension (`mskrock_step`).
//!
//! Both push the noise through the first stage only. The multirate step
//! additionally damps the diffusion before injecting it: two parallel
//! `r = m/2`-stage chains integrate the fast drift from the same base point,
//! one of them carrying the diffusion term; their scaled difference is the
//! damped noise `Q`. In matrix mode the Wiener increment is folded into the
//! injection so the chains run once; in vector mode the chains run on the raw
//! diffusion values and the increment multiplies the result componentwise.

use crate::cost::StepStats;
use crate::error::{Result, SolverError};
use crate::problem::{DiffusionSpec, DriftPair, NoiseKind};
use crate::rkc::averaged_outer_loop;
use crate::stages::StageParams;
use crate::workspace::{InnerWs, Workspace};

/// How a matrix (or diagonal) diffusion is damped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixNoiseMode {
    /// Fold `g(x) dW` into one pair of chains. The default: the chains run
    /// once per step regardless of the number of noise components.
    #[default]
    Combined,
    /// Damp each diffusion column separately and contract with `dW`
    /// afterwards. Agrees with `Combined` for linear fast drift; kept for
    /// that equivalence check.
    PerColumn,
}

fn check_finite(v: &[f64], location: &'static str, stage: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::Divergence { location, stage })
    }
}

/// Runs one `r`-stage chain from `x`, leaving the terminal state in
/// `inner.u_prev1`. With `inject` the first stage carries `inner.inj`.
fn run_noise_chain(
    drift: &DriftPair,
    p: &StageParams,
    x: &[f64],
    t: f64,
    inject: bool,
    inner: &mut InnerWs,
    stats: &mut StepStats,
) -> Result<()> {
    let c = &p.inner;
    let n = x.len();
    let location: &'static str = if inject { "noise chain" } else { "noise-free chain" };
    inner.u_prev2.copy_from_slice(x);
    if inject {
        let shift = c.beta1_noise * c.theta1;
        let add = c.gamma1_noise * c.theta1;
        for i in 0..n {
            inner.u_tmp[i] = x[i] + shift * inner.inj[i];
        }
        drift.fast_into(t, &inner.u_tmp, &mut inner.u_prev1);
        stats.n_ff += 1;
        let a1 = c.alpha1 * p.eta;
        for i in 0..n {
            inner.u_prev1[i] = x[i] + a1 * inner.u_prev1[i] + add * inner.inj[i];
        }
    } else {
        drift.fast_into(t, x, &mut inner.u_tmp);
        stats.n_ff += 1;
        let a1 = c.alpha1 * p.eta;
        for i in 0..n {
            inner.u_prev1[i] = x[i] + a1 * inner.u_tmp[i];
        }
    }
    check_finite(&inner.u_prev1, location, 1)?;
    for j in 2..=p.r {
        drift.fast_into(t, &inner.u_prev1, &mut inner.u_tmp);
        stats.n_ff += 1;
        let (al, be, ga) = (c.alpha[j - 2] * p.eta, c.beta[j - 2], c.gamma[j - 2]);
        for i in 0..n {
            inner.u_tmp[i] = be * inner.u_prev1[i] + ga * inner.u_prev2[i] + al * inner.u_tmp[i];
        }
        check_finite(&inner.u_tmp, location, j)?;
        std::mem::swap(&mut inner.u_prev2, &mut inner.u_prev1);
        std::mem::swap(&mut inner.u_prev1, &mut inner.u_tmp);
    }
    Ok(())
}

/// Difference of the two chains, scaled by `1/eta`, written into `out`.
fn chain_difference(
    drift: &DriftPair,
    p: &StageParams,
    x: &[f64],
    t: f64,
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    run_noise_chain(drift, p, x, t, false, &mut ws.inner, stats)?;
    let iw = &mut ws.inner;
    iw.chain_save.copy_from_slice(&iw.u_prev1);
    run_noise_chain(drift, p, x, t, true, &mut ws.inner, stats)?;
    let iw = &ws.inner;
    for i in 0..x.len() {
        out[i] = (iw.u_prev1[i] - iw.chain_save[i]) / p.eta;
    }
    Ok(())
}

/// Damped diffusion for a vector-kind term: returns `g` filtered through the
/// fast drift over the auxiliary horizon, *not* yet multiplied by the Wiener
/// increment. With no fast drift this is `g(x)` itself.
pub fn damped_diffusion_vector(
    drift: &DriftPair,
    d: &DiffusionSpec,
    p: &StageParams,
    x: &[f64],
    t: f64,
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    if d.kind() != NoiseKind::Vector {
        return Err(SolverError::invalid(
            "damped_diffusion_vector requires a vector-kind diffusion",
        ));
    }
    d.eval_into(t, x, &mut ws.gvals);
    stats.n_g += 1;
    for i in 0..x.len() {
        ws.inner.inj[i] = p.eta * ws.gvals[i];
    }
    chain_difference(drift, p, x, t, ws, stats, out)
}

/// Damped diffusion for matrix or diagonal terms with the Wiener increment
/// folded in: returns the damped `g(x) dW` directly.
pub fn damped_diffusion_matrix(
    drift: &DriftPair,
    d: &DiffusionSpec,
    p: &StageParams,
    x: &[f64],
    t: f64,
    dw: &[f64],
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    if d.kind() == NoiseKind::Vector {
        return Err(SolverError::invalid(
            "damped_diffusion_matrix requires a matrix- or diagonal-kind diffusion",
        ));
    }
    d.eval_into(t, x, &mut ws.gvals);
    stats.n_g += 1;
    {
        let Workspace { inner: iw, gvals, .. } = ws;
        d.combine_with_noise(gvals, dw, &mut iw.inj)?;
        for v in iw.inj.iter_mut() {
            *v *= p.eta;
        }
    }
    chain_difference(drift, p, x, t, ws, stats, out)
}

/// Column-by-column damping of a matrix or diagonal diffusion, contracted
/// with `dW` afterwards. One pair of chains per noise component.
pub fn damped_diffusion_per_column(
    drift: &DriftPair,
    d: &DiffusionSpec,
    p: &StageParams,
    x: &[f64],
    t: f64,
    dw: &[f64],
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    if d.kind() == NoiseKind::Vector {
        return Err(SolverError::invalid(
            "damped_diffusion_per_column requires a matrix- or diagonal-kind diffusion",
        ));
    }
    if dw.len() != d.noise_dim() {
        return Err(SolverError::dim(format!(
            "noise increment has length {}, expected {}",
            dw.len(),
            d.noise_dim()
        )));
    }
    let n = x.len();
    d.eval_into(t, x, &mut ws.gvals);
    stats.n_g += 1;
    out.fill(0.0);
    let mut col_result = std::mem::take(&mut ws.gbar);
    for j in 0..d.noise_dim() {
        match d.kind() {
            NoiseKind::Matrix => {
                for i in 0..n {
                    ws.inner.inj[i] = p.eta * ws.gvals[j * n + i];
                }
            }
            NoiseKind::Diagonal => {
                ws.inner.inj.fill(0.0);
                ws.inner.inj[j] = p.eta * ws.gvals[j];
            }
            NoiseKind::Vector => unreachable!(),
        }
        let res = chain_difference(drift, p, x, t, ws, stats, &mut col_result);
        if let Err(e) = res {
            ws.gbar = col_result;
            return Err(e);
        }
        for i in 0..n {
            out[i] += col_result[i] * dw[j];
        }
    }
    ws.gbar = col_result;
    Ok(())
}

/// One multirate stochastic step, writing the new state into `out` and
/// accumulating evaluation counts into `stats`.
#[allow(clippy::too_many_arguments)]
pub fn mskrock_step_into(
    drift: &DriftPair,
    d: &DiffusionSpec,
    p: &StageParams,
    x: &[f64],
    t: f64,
    tau: f64,
    dw: &[f64],
    mode: MatrixNoiseMode,
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    let mut qbar = std::mem::take(&mut ws.qbar);
    let built = match d.kind() {
        NoiseKind::Vector => {
            if dw.len() != d.noise_dim() {
                Err(SolverError::dim(format!(
                    "noise increment has length {}, expected {}",
                    dw.len(),
                    d.noise_dim()
                )))
            } else {
                let mut gbar = std::mem::take(&mut ws.gbar);
                let res = damped_diffusion_vector(drift, d, p, x, t, ws, stats, &mut gbar);
                if res.is_ok() {
                    for i in 0..x.len() {
                        qbar[i] = gbar[i] * dw[i];
                    }
                }
                ws.gbar = gbar;
                res
            }
        }
        NoiseKind::Diagonal | NoiseKind::Matrix => match mode {
            MatrixNoiseMode::Combined => {
                damped_diffusion_matrix(drift, d, p, x, t, dw, ws, stats, &mut qbar)
            }
            MatrixNoiseMode::PerColumn => {
                damped_diffusion_per_column(drift, d, p, x, t, dw, ws, stats, &mut qbar)
            }
        },
    };
    let res =
        built.and_then(|()| averaged_outer_loop(drift, p, x, t, tau, Some(&qbar), ws, stats, out));
    ws.qbar = qbar;
    res
}

/// One multirate stochastic step returning the new state and its counters.
#[allow(clippy::too_many_arguments)]
pub fn mskrock_step(
    drift: &DriftPair,
    d: &DiffusionSpec,
    p: &StageParams,
    x: &[f64],
    t: f64,
    tau: f64,
    dw: &[f64],
    ws: &mut Workspace,
) -> Result<(Vec<f64>, StepStats)> {
    let mut stats = StepStats::default();
    let mut out = vec![0.0; x.len()];
    mskrock_step_into(
        drift,
        d,
        p,
        x,
        t,
        tau,
        dw,
        MatrixNoiseMode::Combined,
        ws,
        &mut stats,
        &mut out,
    )?;
    Ok((out, stats))
}

/// One single-rate stochastic step on the unsplit drift `f = f_fast +
/// f_slow`, using only the outer coefficients of `p`. The raw diffusion
/// enters the first stage undamped.
#[allow(clippy::too_many_arguments)]
pub fn skrock_step_into(
    drift: &DriftPair,
    d: &DiffusionSpec,
    p: &StageParams,
    x: &[f64],
    t: f64,
    tau: f64,
    dw: &[f64],
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    stats.s_used = p.s;
    stats.m_used = 0;
    let n = x.len();
    let mut q = std::mem::take(&mut ws.qbar);
    let Workspace { outer: ow, inner: iw, gvals, .. } = ws;
    d.eval_into(t, x, gvals);
    stats.n_g += 1;
    if let Err(e) = d.combine_with_noise(gvals, dw, &mut q) {
        ws.qbar = q;
        return Err(e);
    }
    let o = &p.outer;
    let step = (|| {
        for i in 0..n {
            ow.shifted[i] = x[i] + o.nu1 * q[i];
        }
        drift.full_into(t, &ow.shifted, &mut iw.u_tmp, &mut ow.k_tmp);
        stats.n_ff += 1;
        stats.n_fs += 1;
        for i in 0..n {
            ow.k_prev1[i] = x[i] + o.mu1 * tau * ow.k_tmp[i] + o.kappa1 * q[i];
        }
        check_finite(&ow.k_prev1, "single-rate outer", 1)?;
        ow.k_prev2.copy_from_slice(x);
        for j in 2..=p.s {
            drift.full_into(t, &ow.k_prev1, &mut iw.u_tmp, &mut ow.k_tmp);
            stats.n_ff += 1;
            stats.n_fs += 1;
            let (mu, nu, kappa) = (o.mu[j - 2] * tau, o.nu[j - 2], o.kappa[j - 2]);
            for i in 0..n {
                ow.k_tmp[i] = nu * ow.k_prev1[i] + kappa * ow.k_prev2[i] + mu * ow.k_tmp[i];
            }
            check_finite(&ow.k_tmp, "single-rate outer", j)?;
            std::mem::swap(&mut ow.k_prev2, &mut ow.k_prev1);
            std::mem::swap(&mut ow.k_prev1, &mut ow.k_tmp);
        }
        out.copy_from_slice(&ow.k_prev1);
        Ok(())
    })();
    ws.qbar = q;
    step
}

/// One single-rate stochastic step returning the new state and its counters.
#[allow(clippy::too_many_arguments)]
pub fn skrock_step(
    drift: &DriftPair,
    d: &DiffusionSpec,
    p: &StageParams,
    x: &[f64],
    t: f64,
    tau: f64,
    dw: &[f64],
    ws: &mut Workspace,
) -> Result<(Vec<f64>, StepStats)> {
    let mut stats = StepStats::default();
    let mut out = vec![0.0; x.len()];
    skrock_step_into(drift, d, p, x, t, tau, dw, ws, &mut stats, &mut out)?;
    Ok((out, stats))
}
