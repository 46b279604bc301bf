//! Deterministic stabilized integrators: the first-order Chebyshev scheme
//! (`rkc_step`), the averaged fast force, and the multirate step built from
//! them (`mrkc_step`).
//!
//! The multirate step never evaluates the full right-hand side. Each outer
//! stage applies the averaged force `(u_m - y)/eta`, where `u_m` results from
//! `m` inner stages that integrate the fast drift over the auxiliary horizon
//! `eta` while the slow drift stays frozen at the stage base point. Frozen
//! means frozen: the slow part is evaluated exactly once per averaged-force
//! call, and time arguments stay at the step's base time throughout.

use crate::cost::StepStats;
use crate::error::{Result, SolverError};
use crate::problem::DriftPair;
use crate::stability::phi;
use crate::stages::StageParams;
use crate::workspace::{InnerWs, Workspace};

fn check_finite(v: &[f64], location: &'static str, stage: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::Divergence { location, stage })
    }
}

/// One step of the `s`-stage first-order Chebyshev scheme for `y' = f(t, y)`,
/// written into `out`. Uses only the outer coefficients of `p`.
pub fn rkc_step<F>(
    f: F,
    p: &StageParams,
    y: &[f64],
    t: f64,
    tau: f64,
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<()>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let o = &p.outer;
    let ow = &mut ws.outer;
    f(t, y, &mut ow.k_tmp);
    for i in 0..y.len() {
        ow.k_prev1[i] = y[i] + o.mu1 * tau * ow.k_tmp[i];
    }
    check_finite(&ow.k_prev1, "chebyshev scheme", 1)?;
    ow.k_prev2.copy_from_slice(y);
    for j in 2..=p.s {
        f(t, &ow.k_prev1, &mut ow.k_tmp);
        let (mu, nu, kappa) = (o.mu[j - 2] * tau, o.nu[j - 2], o.kappa[j - 2]);
        for i in 0..y.len() {
            ow.k_tmp[i] = nu * ow.k_prev1[i] + kappa * ow.k_prev2[i] + mu * ow.k_tmp[i];
        }
        check_finite(&ow.k_tmp, "chebyshev scheme", j)?;
        std::mem::swap(&mut ow.k_prev2, &mut ow.k_prev1);
        std::mem::swap(&mut ow.k_prev1, &mut ow.k_tmp);
    }
    out.copy_from_slice(&ow.k_prev1);
    Ok(())
}

/// Averaged fast force `(u_m - y)/eta` at base point `y` and base time `t`.
///
/// The slow drift is evaluated once at `(t, y)` and added, frozen, to every
/// inner stage; the fast drift is evaluated `m` times.
pub fn averaged_force(
    drift: &DriftPair,
    p: &StageParams,
    y: &[f64],
    t: f64,
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    averaged_force_into(drift, p, y, t, &mut ws.inner, stats, out)
}

pub(crate) fn averaged_force_into(
    drift: &DriftPair,
    p: &StageParams,
    y: &[f64],
    t: f64,
    inner: &mut InnerWs,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    let c = &p.inner;
    let n = y.len();
    drift.slow_into(t, y, &mut inner.frozen_slow);
    stats.n_fs += 1;
    inner.u_prev2.copy_from_slice(y);
    drift.fast_into(t, y, &mut inner.u_tmp);
    stats.n_ff += 1;
    let a1 = c.alpha1 * p.eta;
    for i in 0..n {
        inner.u_prev1[i] = y[i] + a1 * (inner.u_tmp[i] + inner.frozen_slow[i]);
    }
    check_finite(&inner.u_prev1, "averaged force", 1)?;
    for j in 2..=p.m {
        drift.fast_into(t, &inner.u_prev1, &mut inner.u_tmp);
        stats.n_ff += 1;
        let (al, be, ga) = (c.alpha[j - 2] * p.eta, c.beta[j - 2], c.gamma[j - 2]);
        for i in 0..n {
            inner.u_tmp[i] = be * inner.u_prev1[i]
                + ga * inner.u_prev2[i]
                + al * (inner.u_tmp[i] + inner.frozen_slow[i]);
        }
        check_finite(&inner.u_tmp, "averaged force", j)?;
        std::mem::swap(&mut inner.u_prev2, &mut inner.u_prev1);
        std::mem::swap(&mut inner.u_prev1, &mut inner.u_tmp);
    }
    for i in 0..n {
        out[i] = (inner.u_prev1[i] - y[i]) / p.eta;
    }
    Ok(())
}

/// Exact averaged force of the linear test pair `f_fast = lambda y`,
/// `f_slow = zeta y`: the continuous inner flow gives
/// `phi(eta lambda) (lambda + zeta) y`. At `eta = 0` this is the unsplit
/// drift. Oracle for the linear behavior of [`averaged_force`].
pub fn exact_averaged_force(lambda: f64, zeta: f64, eta: f64, y: f64) -> f64 {
    phi(eta * lambda) * (lambda + zeta) * y
}

/// Shared outer recurrence of the multirate schemes. `noise` is the damped
/// noise term entering the first stage (absent for the deterministic step).
pub(crate) fn averaged_outer_loop(
    drift: &DriftPair,
    p: &StageParams,
    y: &[f64],
    t: f64,
    tau: f64,
    noise: Option<&[f64]>,
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    stats.s_used = p.s;
    stats.m_used = p.m;
    let o = &p.outer;
    let n = y.len();
    let Workspace { outer: ow, inner: iw, .. } = ws;

    let force_arg: &[f64] = match noise {
        Some(q) => {
            for i in 0..n {
                ow.shifted[i] = y[i] + o.nu1 * q[i];
            }
            &ow.shifted
        }
        None => y,
    };
    averaged_force_into(drift, p, force_arg, t, iw, stats, &mut ow.k_tmp)?;
    match noise {
        Some(q) => {
            for i in 0..n {
                ow.k_prev1[i] = y[i] + o.mu1 * tau * ow.k_tmp[i] + o.kappa1 * q[i];
            }
        }
        None => {
            for i in 0..n {
                ow.k_prev1[i] = y[i] + o.mu1 * tau * ow.k_tmp[i];
            }
        }
    }
    check_finite(&ow.k_prev1, "multirate outer", 1)?;
    ow.k_prev2.copy_from_slice(y);
    for j in 2..=p.s {
        averaged_force_into(drift, p, &ow.k_prev1, t, iw, stats, &mut ow.k_tmp)?;
        let (mu, nu, kappa) = (o.mu[j - 2] * tau, o.nu[j - 2], o.kappa[j - 2]);
        for i in 0..n {
            ow.k_tmp[i] = nu * ow.k_prev1[i] + kappa * ow.k_prev2[i] + mu * ow.k_tmp[i];
        }
        check_finite(&ow.k_tmp, "multirate outer", j)?;
        std::mem::swap(&mut ow.k_prev2, &mut ow.k_prev1);
        std::mem::swap(&mut ow.k_prev1, &mut ow.k_tmp);
    }
    out.copy_from_slice(&ow.k_prev1);
    Ok(())
}

/// One deterministic multirate step `y -> k_s`, written into `out`.
pub fn mrkc_step(
    drift: &DriftPair,
    p: &StageParams,
    y: &[f64],
    t: f64,
    tau: f64,
    ws: &mut Workspace,
    stats: &mut StepStats,
    out: &mut [f64],
) -> Result<()> {
    averaged_outer_loop(drift, p, y, t, tau, None, ws, stats, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::{stab_a, stab_phi, StabilityPolyParams};
    use crate::stages::{select_stages, StageParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn scalar_drift(lambda: f64, zeta: f64) -> DriftPair {
        DriftPair::new(
            1,
            move |_, y: &[f64], out: &mut [f64]| out[0] = lambda * y[0],
            move |_, y: &[f64], out: &mut [f64]| out[0] = zeta * y[0],
        )
    }

    #[test]
    fn chebyshev_step_single_stage_is_explicit_euler_scaled() {
        // s = 1: k_1 = y + mu1 tau f(y) with mu1 = omega1/omega0 = 1.
        let p = StageParams::from_counts(1, 2, 0.1, 0.05).unwrap();
        assert_relative_eq!(p.outer.mu1, 1.0, max_relative = 1e-15);
        let mut ws = Workspace::new(1, 0);
        let mut out = [0.0];
        rkc_step(|_, y, o: &mut [f64]| o[0] = -2.0 * y[0], &p, &[1.5], 0.0, 0.1, &mut ws, &mut out)
            .unwrap();
        assert_relative_eq!(out[0], 1.5 + 0.1 * (-2.0 * 1.5), max_relative = 1e-15);
    }

    #[test]
    fn chebyshev_step_reproduces_stability_polynomial() {
        // On f = lambda y one step equals A_s(tau lambda) y.
        let p = StageParams::from_counts(13, 2, 0.1, 0.05).unwrap();
        let poly = StabilityPolyParams::new(13, 0.05).unwrap();
        let (tau, lambda, y0) = (1.0, -250.0, 0.7);
        let mut ws = Workspace::new(1, 0);
        let mut out = [0.0];
        rkc_step(
            |_, y, o: &mut [f64]| o[0] = lambda * y[0],
            &p,
            &[y0],
            0.0,
            tau,
            &mut ws,
            &mut out,
        )
        .unwrap();
        assert_relative_eq!(out[0], stab_a(&poly, tau * lambda) * y0, max_relative = 1e-12);
    }

    #[test]
    fn chebyshev_step_reports_diverging_stage() {
        let p = StageParams::from_counts(5, 2, 0.1, 0.05).unwrap();
        let mut ws = Workspace::new(1, 0);
        let mut out = [0.0];
        let err = rkc_step(
            |_, y, o: &mut [f64]| o[0] = y[0] * 1e308,
            &p,
            &[1.0],
            0.0,
            1.0,
            &mut ws,
            &mut out,
        )
        .unwrap_err();
        match err {
            SolverError::Divergence { stage, .. } => assert!(stage >= 1),
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn averaged_force_matches_exact_linear_flow() {
        let (lambda, zeta, tau) = (-1e4_f64, -1.0_f64, 0.01);
        let p = select_stages(tau, lambda.abs(), zeta.abs(), 0.05).unwrap();
        let drift = scalar_drift(lambda, zeta);
        let inner_poly = StabilityPolyParams::new(p.m as u32, 0.05).unwrap();
        let mut ws = Workspace::new(1, 0);
        let mut stats = StepStats::default();
        let mut out = [0.0];
        let y0 = 0.9;
        averaged_force(&drift, &p, &[y0], 0.0, &mut ws, &mut stats, &mut out).unwrap();
        let expected = stab_phi(&inner_poly, p.eta * lambda) * (lambda + zeta) * y0;
        assert_relative_eq!(out[0], expected, max_relative = 1e-10);
    }

    #[test]
    fn averaged_force_approaches_continuous_flow_for_mild_stiffness() {
        // For |eta lambda| << 1 the secant slope of the chain is close to
        // phi, so the discrete averaged force tracks the continuous one.
        let (lambda, zeta) = (-10.0, -1.0);
        let p = StageParams::from_counts(2, 2, 1e-3, 0.05).unwrap();
        let drift = scalar_drift(lambda, zeta);
        let mut ws = Workspace::new(1, 0);
        let mut stats = StepStats::default();
        let mut out = [0.0];
        let y0 = 0.9;
        averaged_force(&drift, &p, &[y0], 0.0, &mut ws, &mut stats, &mut out).unwrap();
        assert_relative_eq!(
            out[0],
            exact_averaged_force(lambda, zeta, p.eta, y0),
            max_relative = 1e-2
        );
    }

    #[test]
    fn averaged_force_is_componentwise_for_diagonal_drift() {
        let p = StageParams::from_counts(3, 6, 0.02, 0.05).unwrap();
        let drift = DriftPair::new(
            2,
            |_, y: &[f64], out: &mut [f64]| {
                out[0] = -200.0 * y[0];
                out[1] = -3000.0 * y[1];
            },
            |_, y: &[f64], out: &mut [f64]| {
                out[0] = -0.5 * y[0];
                out[1] = -2.0 * y[1];
            },
        );
        let mut ws = Workspace::new(2, 0);
        let mut stats = StepStats::default();
        let mut out = [0.0, 0.0];
        averaged_force(&drift, &p, &[1.0, -2.0], 0.0, &mut ws, &mut stats, &mut out).unwrap();
        let inner_poly = StabilityPolyParams::new(6, 0.05).unwrap();
        let c0 = stab_phi(&inner_poly, p.eta * -200.0) * (-200.0 - 0.5) * 1.0;
        let c1 = stab_phi(&inner_poly, p.eta * -3000.0) * (-3000.0 - 2.0) * -2.0;
        assert_relative_eq!(out[0], c0, max_relative = 1e-10);
        assert_relative_eq!(out[1], c1, max_relative = 1e-10);
    }

    #[test]
    fn averaged_force_freezes_the_slow_part() {
        // A slow drift with a violent state dependence away from the base
        // point must act exactly like its frozen value.
        let p = StageParams::from_counts(2, 4, 0.05, 0.05).unwrap();
        let y0 = [1.25];
        let frozen_value = 0.7;
        let wild = DriftPair::new(
            1,
            |_, y: &[f64], out: &mut [f64]| out[0] = -50.0 * y[0],
            move |_, y: &[f64], out: &mut [f64]| {
                out[0] = frozen_value + (y[0] - 1.25) * 1e9;
            },
        );
        let constant = DriftPair::new(
            1,
            |_, y: &[f64], out: &mut [f64]| out[0] = -50.0 * y[0],
            move |_, _: &[f64], out: &mut [f64]| out[0] = frozen_value,
        );
        let mut ws = Workspace::new(1, 0);
        let mut stats = StepStats::default();
        let (mut a, mut b) = ([0.0], [0.0]);
        averaged_force(&wild, &p, &y0, 0.0, &mut ws, &mut stats, &mut a).unwrap();
        averaged_force(&constant, &p, &y0, 0.0, &mut ws, &mut stats, &mut b).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn averaged_force_counts_one_slow_and_m_fast_evaluations() {
        let p = StageParams::from_counts(4, 8, 0.03, 0.05).unwrap();
        let drift = scalar_drift(-10.0, -1.0);
        let mut ws = Workspace::new(1, 0);
        let mut stats = StepStats::default();
        let mut out = [0.0];
        averaged_force(&drift, &p, &[1.0], 0.0, &mut ws, &mut stats, &mut out).unwrap();
        assert_eq!(stats.n_fs, 1);
        assert_eq!(stats.n_ff, 8);
    }

    #[test]
    fn exact_averaged_force_limits() {
        // eta = 0 recovers the unsplit drift.
        assert_eq!(exact_averaged_force(-3.0, -1.0, 0.0, 2.0), -8.0);
        // Large eta lambda shrinks the fast contribution toward -zeta y.
        let v = exact_averaged_force(-1e8, -1.0, 1.0, 1.0);
        assert_abs_diff_eq!(v, -1.0, epsilon = 1e-4);
    }

    #[test]
    fn multirate_step_matches_composed_stability_polynomials() {
        let (lambda, zeta, tau) = (-5e3_f64, -2.0_f64, 0.05);
        let p = select_stages(tau, lambda.abs(), zeta.abs(), 0.05).unwrap();
        let inner_poly = StabilityPolyParams::new(p.m as u32, 0.05).unwrap();
        let outer_poly = StabilityPolyParams::new(p.s as u32, 0.05).unwrap();
        let drift = scalar_drift(lambda, zeta);
        let mut ws = Workspace::new(1, 0);
        let mut stats = StepStats::default();
        let mut out = [0.0];
        let y0 = 1.3;
        mrkc_step(&drift, &p, &[y0], 0.0, tau, &mut ws, &mut stats, &mut out).unwrap();
        let z = tau * stab_phi(&inner_poly, p.eta * lambda) * (lambda + zeta);
        assert_relative_eq!(out[0], stab_a(&outer_poly, z) * y0, max_relative = 1e-10);
    }

    #[test]
    fn multirate_step_contracts_across_the_stiff_quadrant() {
        let tau = 0.1;
        for i in 0..12 {
            let lambda = -(10.0_f64).powf(-1.0 + 7.0 * (i as f64) / 11.0);
            for j in 0..8 {
                let zeta = -(10.0_f64).powf(-1.0 + 3.0 * (j as f64) / 7.0);
                let p = select_stages(tau, lambda.abs(), zeta.abs(), 0.0).unwrap();
                let drift = scalar_drift(lambda, zeta);
                let mut ws = Workspace::new(1, 0);
                let mut stats = StepStats::default();
                let mut out = [0.0];
                mrkc_step(&drift, &p, &[1.0], 0.0, tau, &mut ws, &mut stats, &mut out).unwrap();
                assert!(
                    out[0].abs() <= 1.0 + 1e-12,
                    "|update| = {} at lambda = {lambda}, zeta = {zeta}",
                    out[0].abs()
                );
            }
        }
    }

    #[test]
    fn time_arguments_stay_at_the_base_time() {
        // A time-dependent slow drift must act exactly like its value at t_n.
        let p = StageParams::from_counts(3, 4, 0.02, 0.05).unwrap();
        let t_n = 2.0;
        let nonautonomous = DriftPair::new(
            1,
            |_, y: &[f64], out: &mut [f64]| out[0] = -30.0 * y[0],
            |t, _: &[f64], out: &mut [f64]| out[0] = t,
        );
        let frozen_time = DriftPair::new(
            1,
            |_, y: &[f64], out: &mut [f64]| out[0] = -30.0 * y[0],
            move |_, _: &[f64], out: &mut [f64]| out[0] = t_n,
        );
        let mut ws = Workspace::new(1, 0);
        let mut stats = StepStats::default();
        let (mut a, mut b) = ([0.0], [0.0]);
        mrkc_step(&nonautonomous, &p, &[1.0], t_n, 0.01, &mut ws, &mut stats, &mut a).unwrap();
        mrkc_step(&frozen_time, &p, &[1.0], t_n, 0.01, &mut ws, &mut stats, &mut b).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn workspace_size_ignores_stage_counts() {
        let ws_small = Workspace::new(3, 3);
        let mut ws = Workspace::new(3, 3);
        let drift = DriftPair::new(
            3,
            |_, y: &[f64], out: &mut [f64]| {
                for i in 0..3 {
                    out[i] = -100.0 * y[i];
                }
            },
            |_, y: &[f64], out: &mut [f64]| {
                for i in 0..3 {
                    out[i] = -y[i];
                }
            },
        );
        let mut stats = StepStats::default();
        let mut out = [0.0; 3];
        for &(s, m) in &[(1usize, 2usize), (7, 4), (40, 64)] {
            let p = StageParams::from_counts(s, m, 0.01, 0.05).unwrap();
            mrkc_step(&drift, &p, &[1.0, 2.0, 3.0], 0.0, 1e-3, &mut ws, &mut stats, &mut out)
                .unwrap();
            assert_eq!(ws.total_floats(), ws_small.total_floats());
        }
    }

    #[test]
    fn multirate_ode_error_decays_linearly() {
        // y' = -y + cos(y): first-order convergence of the split scheme.
        let drift = DriftPair::new(
            1,
            |_, y: &[f64], out: &mut [f64]| out[0] = -y[0],
            |_, y: &[f64], out: &mut [f64]| out[0] = y[0].cos(),
        );
        let reference = {
            // Fine classical RK4 on the unsplit drift.
            let f = |y: f64| -y + y.cos();
            let n = 1 << 14;
            let h = 1.0 / n as f64;
            let mut y = 1.0_f64;
            for _ in 0..n {
                let k1 = f(y);
                let k2 = f(y + 0.5 * h * k1);
                let k3 = f(y + 0.5 * h * k2);
                let k4 = f(y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            y
        };
        let mut errs = Vec::new();
        for k in 3..=7 {
            let n = 1usize << k;
            let tau = 1.0 / n as f64;
            let p = select_stages(tau, 1.0, 1.0, 0.05).unwrap();
            let mut ws = Workspace::new(1, 0);
            let mut stats = StepStats::default();
            let mut y = [1.0];
            let mut out = [0.0];
            for step in 0..n {
                mrkc_step(&drift, &p, &y, step as f64 * tau, tau, &mut ws, &mut stats, &mut out)
                    .unwrap();
                y = out;
            }
            errs.push(((tau).log2(), ((y[0] - reference).abs()).log2()));
        }
        let n = errs.len() as f64;
        let (sx, sy): (f64, f64) = errs.iter().fold((0.0, 0.0), |a, e| (a.0 + e.0, a.1 + e.1));
        let (sxx, sxy): (f64, f64) =
            errs.iter().fold((0.0, 0.0), |a, e| (a.0 + e.0 * e.0, a.1 + e.0 * e.1));
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope - 1.0).abs() < 0.15, "slope = {slope}");
    }
}
