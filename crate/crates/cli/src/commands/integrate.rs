//! Single-trajectory driver: one seeded path, per-step stage bookkeeping,
//! state snapshots at the ends (and optionally in between).

use anyhow::{anyhow, Result};

use mrock::brownian::BrownianGrid;
use mrock::convergence::integrate_path_with;
use mrock::stages::StageParams;

use crate::cli::RunEnv;
use crate::csvio::{write_csv, Table};
use crate::meta::Metadata;
use crate::Failure;

/// Slow-part radius estimates along a heat-surrogate trajectory may wiggle
/// by the estimator tolerance but must not trend: the slow grid never
/// refines, so its stiffness cannot depend on the channel or the state.
const RHO_S_FLATNESS: f64 = 1.02;

fn push_state(snapshot: &mut Table, step: usize, t: f64, x: &[f64]) {
    for (i, &v) in x.iter().enumerate() {
        snapshot.push(vec![step as f64, t, i as f64, v]);
    }
}

pub fn run(env: &RunEnv) -> Result<Vec<Failure>> {
    let cfg = &env.config;
    let icfg =
        cfg.integrate.as_ref().ok_or_else(|| anyhow!("config needs an [integrate] section"))?;
    let pcfg = cfg.problem()?;
    let problem = pcfg.build()?;
    let mcfg = cfg.method_or_default();
    let method = mcfg.scheme()?;
    let selection = mcfg.selection()?;
    let seed = env.seed.ok_or_else(|| {
        anyhow!("integrate draws noise; provide a seed (--seed or `seed =` in the config)")
    })?;

    let n_steps = super::steps_for(problem.horizon, icfg.tau)?;
    let grid = BrownianGrid::new(seed, problem.horizon, n_steps, problem.noise_dim())?;
    let path = grid.path(0);

    let mut steps =
        Table::new(&["step", "t", "s", "m", "eta", "rho_f", "rho_s", "n_ff", "n_fs", "n_g"]);
    let mut snapshot = Table::new(&["step", "t", "component", "value"]);
    push_state(&mut snapshot, 0, 0.0, &problem.x0);
    let snap_every = icfg.snapshot_every.unwrap_or(0);
    let eps = mcfg.eps();

    let (terminal, sums) =
        integrate_path_with(&problem, method, selection, &path, n_steps, |step, t, stats, x| {
            // The coupling time is a closed function of (tau, s, m); the
            // single-rate scheme has no inner flow, reported as eta = 0.
            let eta = if stats.m_used >= 2 {
                StageParams::coupled_from_counts(icfg.tau, stats.s_used, stats.m_used, eps)
                    .map_or(f64::NAN, |p| p.eta)
            } else {
                0.0
            };
            steps.push(vec![
                (step + 1) as f64,
                t,
                stats.s_used as f64,
                stats.m_used as f64,
                eta,
                stats.rho_f_est,
                stats.rho_s_est,
                stats.n_ff as f64,
                stats.n_fs as f64,
                stats.n_g as f64,
            ]);
            if snap_every > 0 && (step + 1) % snap_every == 0 && step + 1 != n_steps {
                push_state(&mut snapshot, step + 1, t, x);
            }
        })?;
    push_state(&mut snapshot, n_steps, problem.horizon, &terminal);

    write_csv(&env.out.join("steps.csv"), &steps)?;
    write_csv(&env.out.join("snapshot.csv"), &snapshot)?;

    let mut failures = Vec::new();

    // With no source and no noise the heat surrogate starts at its
    // stationary state; the trajectory must hold it.
    if pcfg.is_driftless_heat() {
        let drift =
            problem.x0.iter().zip(&terminal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if drift > 1e-10 {
            failures.push(Failure::new(
                "terminal-equals-initial",
                format!("max deviation {drift:.3e} exceeds 1e-10"),
            ));
        }
    }

    // On the heat surrogate the slow radius is a property of the unrefined
    // part of the grid: constant along the run up to estimator noise.
    if pcfg.id == "refined-heat" {
        let estimates: Vec<f64> =
            steps.column("rho_s")?.into_iter().filter(|r| r.is_finite() && *r > 0.0).collect();
        if estimates.len() > 1 {
            let max = estimates.iter().cloned().fold(0.0, f64::max);
            let min = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
            if max / min > RHO_S_FLATNESS {
                failures.push(Failure::new(
                    "slow-radius-flat",
                    format!("rho_s spread {max}/{min} exceeds {RHO_S_FLATNESS}"),
                ));
            }
        }
    }

    let mut meta = Metadata::new();
    meta.put("command", "integrate");
    meta.put("problem", &problem.name);
    meta.put(
        "scheme",
        if matches!(method, mrock::convergence::Method::Mskrock) { "mskrock" } else { "skrock" },
    );
    meta.put("selection", mcfg.selection_label());
    meta.put("eps", eps);
    meta.put("seed", seed);
    meta.put("tau", icfg.tau);
    meta.put("n_steps", n_steps);
    meta.put("mean_s", sums.mean_s());
    meta.put("mean_m", sums.mean_m());
    meta.put("total_n_ff", sums.n_ff);
    meta.put("total_n_fs", sums.n_fs);
    meta.put("total_n_g", sums.n_g);
    meta.write(&env.out.join("steps.meta"))?;

    Ok(failures)
}
