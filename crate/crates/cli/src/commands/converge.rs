//! Monte-Carlo error-table driver: runs the convergence harness, writes the
//! table, fits the slopes into the metadata, and checks any acceptance
//! windows declared in the config.

use anyhow::{anyhow, Result};

use mrock::convergence::{fit_slope, run_convergence, ConvergenceConfig, FitTarget};

use crate::cli::RunEnv;
use crate::csvio::{write_csv, Table};
use crate::meta::Metadata;
use crate::Failure;

pub fn run(env: &RunEnv) -> Result<Vec<Failure>> {
    let cfg = &env.config;
    let ccfg = cfg.converge.as_ref().ok_or_else(|| anyhow!("config needs a [converge] section"))?;
    let problem = cfg.problem()?.build()?;
    let mcfg = cfg.method_or_default();
    let seed = env.seed.ok_or_else(|| {
        anyhow!("converge draws noise; provide a seed (--seed or `seed =` in the config)")
    })?;

    let conv = ConvergenceConfig {
        problem: &problem,
        method: mcfg.scheme()?,
        selection: mcfg.selection()?,
        reference: ccfg.reference()?,
        taus: &ccfg.taus,
        n_paths: ccfg.n_paths,
        seed,
    };
    let table = run_convergence(&conv)?;

    let mut csv = Table::new(&[
        "tau",
        "n_steps",
        "strong_error",
        "strong_stderr",
        "weak_error",
        "weak_stderr",
        "n_samples",
        "mean_s",
        "mean_m",
        "mean_n_ff",
        "mean_n_fs",
        "mean_n_g",
    ]);
    for r in &table.rows {
        csv.push(vec![
            r.tau,
            r.n_steps as f64,
            r.strong_error,
            r.strong_stderr,
            r.weak_error,
            r.weak_stderr,
            r.n_samples as f64,
            r.mean_s,
            r.mean_m,
            r.mean_n_ff,
            r.mean_n_fs,
            r.mean_n_g,
        ]);
    }
    write_csv(&env.out.join("errors.csv"), &csv)?;

    let strong = fit_slope(&table, FitTarget::Strong);
    let weak = fit_slope(&table, FitTarget::Weak);

    let mut meta = Metadata::new();
    meta.put("command", "converge");
    meta.put("problem", &problem.name);
    meta.put("scheme", format!("{:?}", conv.method).to_lowercase());
    meta.put("selection", mcfg.selection_label());
    meta.put("reference", ccfg.reference_label());
    meta.put("seed", seed);
    meta.put("n_paths", ccfg.n_paths);
    let taus: Vec<String> = ccfg.taus.iter().map(|t| format!("{t}")).collect();
    meta.put("taus", taus.join(","));
    match &strong {
        Ok(f) => meta.put("strong_slope", f.slope),
        Err(e) => meta.put("strong_slope_unfit", e),
    }
    match &weak {
        Ok(f) => meta.put("weak_slope", f.slope),
        Err(e) => meta.put("weak_slope_unfit", e),
    }
    meta.write(&env.out.join("errors.meta"))?;

    let mut failures = Vec::new();
    let mut check_window = |name: &str,
                            window: Option<[f64; 2]>,
                            fit: &std::result::Result<
        mrock::convergence::SlopeFit,
        mrock::error::SolverError,
    >| {
        if let Some([lo, hi]) = window {
            match fit {
                Ok(f) if (lo..=hi).contains(&f.slope) => {}
                Ok(f) => failures.push(Failure::new(
                    name,
                    format!("fitted slope {:.4} outside [{lo}, {hi}]", f.slope),
                )),
                Err(e) => failures.push(Failure::new(name, format!("no fit: {e}"))),
            }
        }
    };
    check_window("strong-slope-window", ccfg.expect_strong_slope, &strong);
    check_window("weak-slope-window", ccfg.expect_weak_slope, &weak);
    Ok(failures)
}
