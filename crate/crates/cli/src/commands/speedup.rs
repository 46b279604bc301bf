//! Cost comparison drivers. The delta sweep measures evaluation counts on
//! the refinement surrogate as the channel narrows; the reaction sweep
//! predicts costs for a network as its fast reaction set grows.

use anyhow::{anyhow, bail, Result};

use mrock::brownian::BrownianGrid;
use mrock::convergence::{integrate_path_with, Method, RunSums, StageSelection};
use mrock::cost::cost_model;
use mrock::problems::{make_refined_heat, parse_reaction_network};
use mrock::spectral::estimate_radius;
use mrock::stages::{select_stages, DEFAULT_EPS, RADIUS_SAFETY};

use crate::cli::RunEnv;
use crate::config::SpeedupConfig;
use crate::csvio::{write_csv, Table};
use crate::meta::Metadata;
use crate::Failure;

pub fn run(env: &RunEnv) -> Result<Vec<Failure>> {
    let scfg =
        env.config.speedup.as_ref().ok_or_else(|| anyhow!("config needs a [speedup] section"))?;
    match scfg.sweep.as_str() {
        "delta" => run_delta(env, scfg),
        "reaction" => run_reaction(env, scfg),
        other => bail!("unknown sweep '{other}' (expected delta or reaction)"),
    }
}

fn need<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("config key {key} is required for this sweep"))
}

fn run_delta(env: &RunEnv, scfg: &SpeedupConfig) -> Result<Vec<Failure>> {
    let deltas = scfg
        .deltas
        .clone()
        .ok_or_else(|| anyhow!("config key speedup.deltas is required for this sweep"))?;
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) {
        bail!("speedup.deltas must be nonempty and strictly decreasing");
    }
    let h_coarse = need(scfg.h_coarse, "speedup.h_coarse")?;
    let sigma = need(scfg.sigma, "speedup.sigma")?;
    let tau = need(scfg.tau, "speedup.tau")?;
    let n_paths = scfg.n_paths.unwrap_or(4);
    let seed = env.seed.ok_or_else(|| {
        anyhow!("the delta sweep draws noise; provide a seed (--seed or `seed =` in the config)")
    })?;

    let mut table = Table::new(&[
        "delta",
        "rho_f",
        "rho_s",
        "w_fast",
        "msk_mean_s",
        "msk_mean_m",
        "msk_n_ff",
        "msk_n_fs",
        "msk_n_g",
        "sk_mean_s",
        "sk_n_ff",
        "sk_n_fs",
        "sk_n_g",
        "cost_msk",
        "cost_sk",
        "speedup",
    ]);
    let mut failures = Vec::new();
    let mut speedups = Vec::new();

    for &delta in &deltas {
        let heat = make_refined_heat(delta, h_coarse, sigma)?;
        let problem = &heat.problem;
        let n_steps = super::steps_for(problem.horizon, tau)?;
        let drift = &problem.drift;
        let rho_f =
            estimate_radius(|y, out| drift.fast_into(0.0, y, out), &problem.x0, None, 1e-3, 500)?
                .rho;
        let rho_s =
            estimate_radius(|y, out| drift.slow_into(0.0, y, out), &problem.x0, None, 1e-3, 500)?
                .rho;

        let grid = BrownianGrid::new(seed, problem.horizon, n_steps, problem.noise_dim())?;
        let w_fast = heat.fast_mask.iter().filter(|&&f| f).count() as f64 / problem.dim() as f64;
        let w_slow = 1.0 - w_fast;

        let mut totals = [RunSums::default(), RunSums::default()];
        let mut costs = [0.0f64; 2];
        for (slot, method) in [(0usize, Method::Mskrock), (1, Method::Skrock)] {
            // Recompute the expected counters from the per-step stage
            // choices; measured work must match the model exactly.
            let (mut exp_ff, mut exp_fs, mut exp_g) = (0u64, 0u64, 0u64);
            for path_idx in 0..n_paths as u64 {
                let path = grid.path(path_idx);
                let (_, sums) = integrate_path_with(
                    problem,
                    method,
                    StageSelection::auto(DEFAULT_EPS),
                    &path,
                    n_steps,
                    |_, _, stats, _| {
                        match method {
                            Method::Mskrock => {
                                exp_ff += ((stats.s_used + 1) * stats.m_used) as u64;
                                exp_fs += stats.s_used as u64;
                            }
                            Method::Skrock => {
                                exp_ff += stats.s_used as u64;
                                exp_fs += stats.s_used as u64;
                            }
                        }
                        exp_g += 1;
                    },
                )?;
                totals[slot].merge(&sums);
            }
            if (totals[slot].n_ff, totals[slot].n_fs, totals[slot].n_g) != (exp_ff, exp_fs, exp_g) {
                failures.push(Failure::new(
                    "counter-model-agreement",
                    format!(
                        "delta = {delta}, {method:?}: counted ({}, {}, {}) vs predicted \
                         ({exp_ff}, {exp_fs}, {exp_g})",
                        totals[slot].n_ff, totals[slot].n_fs, totals[slot].n_g
                    ),
                ));
            }
            // A fast evaluation touches only masked rows; weigh the counts
            // by each part's share of the grid.
            costs[slot] = totals[slot].n_ff as f64 * w_fast
                + totals[slot].n_fs as f64 * w_slow
                + totals[slot].n_g as f64;
        }

        let speedup = costs[1] / costs[0];
        speedups.push(speedup);
        table.push(vec![
            delta,
            rho_f,
            rho_s,
            w_fast,
            totals[0].mean_s(),
            totals[0].mean_m(),
            totals[0].n_ff as f64,
            totals[0].n_fs as f64,
            totals[0].n_g as f64,
            totals[1].mean_s(),
            totals[1].n_ff as f64,
            totals[1].n_fs as f64,
            totals[1].n_g as f64,
            costs[0],
            costs[1],
            speedup,
        ]);
    }

    // The narrowest channel is the whole point of the splitting.
    let last = *speedups.last().expect("nonempty sweep");
    if last <= 1.0 {
        failures.push(Failure::new(
            "speedup-at-finest",
            format!("speed-up {last:.3} at delta = {} not above 1", deltas.last().unwrap()),
        ));
    }

    write_csv(&env.out.join("speedup_delta.csv"), &table)?;
    let mut meta = Metadata::new();
    meta.put("command", "speedup");
    meta.put("sweep", "delta");
    meta.put("seed", seed);
    meta.put("n_paths", n_paths);
    meta.put("tau", tau);
    meta.put("h_coarse", h_coarse);
    meta.put("sigma", sigma);
    let list: Vec<String> = speedups.iter().map(|s| format!("{s:.4}")).collect();
    meta.put("speedups", list.join(","));
    meta.write(&env.out.join("speedup_delta.meta"))?;
    Ok(failures)
}

fn run_reaction(env: &RunEnv, scfg: &SpeedupConfig) -> Result<Vec<Failure>> {
    let path = scfg
        .path
        .as_ref()
        .ok_or_else(|| anyhow!("config key speedup.path is required for this sweep"))?;
    let x0 = scfg
        .x0
        .clone()
        .ok_or_else(|| anyhow!("config key speedup.x0 is required for this sweep"))?;
    let fast_counts = scfg
        .fast_counts
        .clone()
        .ok_or_else(|| anyhow!("config key speedup.fast_counts is required for this sweep"))?;
    if fast_counts.is_empty() {
        bail!("speedup.fast_counts must be nonempty");
    }
    let tau = need(scfg.tau, "speedup.tau")?;
    let horizon = scfg.horizon.unwrap_or(1.0);
    let drift_cost = scfg.drift_cost.unwrap_or(0.9);
    if !(0.0..=1.0).contains(&drift_cost) {
        bail!("speedup.drift_cost must lie in [0, 1], got {drift_cost}");
    }

    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read {}: {e}", path.display()))?;
    let base = parse_reaction_network(&text)?;
    let n_reactions = base.n_reactions();

    let mut table = Table::new(&[
        "r",
        "rho_f",
        "rho_s",
        "s",
        "m",
        "s_single",
        "c_f",
        "c_s",
        "cost_msk",
        "cost_sk",
        "speedup",
        "speedup_model",
    ]);
    let mut failures = Vec::new();

    for &r in &fast_counts {
        if r > n_reactions {
            bail!("fast count {r} exceeds the {n_reactions} reactions in the network");
        }
        let mut net = base.clone();
        net.fast_count = r;
        let problem = net.into_problem(x0.clone(), horizon)?;
        let drift = &problem.drift;
        let rho_f =
            estimate_radius(|y, out| drift.fast_into(0.0, y, out), &problem.x0, None, 1e-3, 500)?
                .rho;
        let rho_s =
            estimate_radius(|y, out| drift.slow_into(0.0, y, out), &problem.x0, None, 1e-3, 500)?
                .rho;

        let multi = select_stages(tau, RADIUS_SAFETY * rho_f, RADIUS_SAFETY * rho_s, DEFAULT_EPS)?;
        let single = select_stages(tau, 0.0, RADIUS_SAFETY * (rho_f + rho_s), DEFAULT_EPS)?;

        // The drift share splits across the two parts in proportion to the
        // reactions each assembles; the remainder is the diffusion.
        let c_f = drift_cost * r as f64 / n_reactions as f64;
        let c_s = drift_cost * (n_reactions - r) as f64 / n_reactions as f64;
        let cost_msk =
            ((multi.s + 1) * multi.m - 1) as f64 * c_f + (multi.s - 1) as f64 * c_s + 1.0;
        let cost_sk = (single.s - 1) as f64 * (c_f + c_s) + 1.0;
        let speedup = cost_sk / cost_msk;
        let model = cost_model(multi.s as f64, multi.m as f64, c_f, c_s).speedup;

        if r == 0 && (cost_msk - cost_sk).abs() > 1e-12 * cost_sk {
            failures.push(Failure::new(
                "empty-fast-set-degenerates",
                format!("r = 0 costs {cost_msk} (multirate) vs {cost_sk} (single-rate)"),
            ));
        }

        table.push(vec![
            r as f64,
            rho_f,
            rho_s,
            multi.s as f64,
            multi.m as f64,
            single.s as f64,
            c_f,
            c_s,
            cost_msk,
            cost_sk,
            speedup,
            model,
        ]);
    }

    write_csv(&env.out.join("speedup_reaction.csv"), &table)?;
    let mut meta = Metadata::new();
    meta.put("command", "speedup");
    meta.put("sweep", "reaction");
    meta.put("network", path.display());
    meta.put("n_reactions", n_reactions);
    meta.put("tau", tau);
    meta.put("drift_cost", drift_cost);
    meta.write(&env.out.join("speedup_reaction.meta"))?;
    Ok(failures)
}
