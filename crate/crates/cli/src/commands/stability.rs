//! Stability polynomial tables and mean-square certification grids.

use anyhow::{anyhow, bail, Result};

use mrock::stability::{
    certify_stability, s_mms_grid, stab_a, stab_b, stab_phi, stab_psi, CertificationReport,
    StabilityPolyParams, CERT_SLACK,
};
use mrock::stages::damping_beta;

use crate::cli::RunEnv;
use crate::csvio::{write_csv, Table};
use crate::meta::Metadata;
use crate::Failure;

pub fn run_scan(env: &RunEnv) -> Result<Vec<Failure>> {
    let scfg = env
        .config
        .stability_scan
        .as_ref()
        .ok_or_else(|| anyhow!("config needs a [stability_scan] section"))?;
    if scfg.m < 2 || scfg.m % 2 != 0 {
        bail!("stability_scan.m must be even and at least 2, got {}", scfg.m);
    }
    let eps = scfg.eps.unwrap_or(0.0);
    let outer = StabilityPolyParams::new(scfg.s as u32, eps)?;
    let inner = StabilityPolyParams::new(scfg.m as u32, eps)?;
    let inner_edge = -damping_beta(eps) * (scfg.m * scfg.m) as f64;
    let n_z = scfg.n_z.unwrap_or(201).max(2);
    let z_min = scfg.z_min.unwrap_or(inner_edge);
    if !(z_min.is_finite() && z_min < 0.0) {
        bail!("stability_scan.z_min must be negative, got {z_min}");
    }

    let mut poly = Table::new(&["z", "a_s", "b_s", "phi_m", "psi_r", "psi_sq_le_phi"]);
    let mut flag_violations = 0usize;
    for i in 0..n_z {
        // Walks from z_min up to exactly 0 in the last row.
        let z = z_min * (1.0 - i as f64 / (n_z - 1) as f64);
        let phi = stab_phi(&inner, z);
        let psi = stab_psi(&inner, z);
        let dominated = psi * psi <= phi * (1.0 + 1e-10) + 1e-14;
        if !dominated && z >= inner_edge - 1e-12 {
            flag_violations += 1;
        }
        poly.push(vec![
            z,
            stab_a(&outer, z),
            stab_b(&outer, z),
            phi,
            psi,
            if dominated { 1.0 } else { 0.0 },
        ]);
    }

    let mut failures = Vec::new();
    let origin_phi = poly.rows.last().expect("n_z >= 2")[3];
    if origin_phi != 1.0 {
        failures.push(Failure::new(
            "phi-at-origin",
            format!("Phi_m(0) = {origin_phi}, expected exactly 1"),
        ));
    }
    // The domination inequality is exact at zero damping; positive damping
    // is tabulated but only asserted where the claim is proven.
    if eps == 0.0 && flag_violations > 0 {
        failures.push(Failure::new(
            "noise-chain-domination",
            format!("{flag_violations} of {n_z} points with Psi_r^2 > Phi_m"),
        ));
    }
    write_csv(&env.out.join("polynomials.csv"), &poly)?;

    let (region, report) = certified_region(scfg.n_lambda, scfg.n_zeta, scfg.n_mu, scfg.tau)?;
    failures.extend(contraction_failures(&report));
    write_csv(&env.out.join("region.csv"), &region)?;

    let mut meta = Metadata::new();
    meta.put("command", "stability-scan");
    meta.put("s", scfg.s);
    meta.put("m", scfg.m);
    meta.put("eps", eps);
    meta.put("n_z", n_z);
    meta.put("z_min", z_min);
    meta.put("tau", scfg.tau);
    meta.put("grid", format!("{}x{}x{}", scfg.n_lambda, scfg.n_zeta, scfg.n_mu));
    put_report(&mut meta, &report);
    meta.write(&env.out.join("polynomials.meta"))?;
    Ok(failures)
}

pub fn run_certify(env: &RunEnv) -> Result<Vec<Failure>> {
    let ccfg =
        env.config.certify.as_ref().ok_or_else(|| anyhow!("config needs a [certify] section"))?;
    let (region, report) = certified_region(ccfg.n_lambda, ccfg.n_zeta, ccfg.n_mu, ccfg.tau)?;
    let failures = contraction_failures(&report);
    write_csv(&env.out.join("certification.csv"), &region)?;

    let mut meta = Metadata::new();
    meta.put("command", "certify");
    meta.put("tau", ccfg.tau);
    meta.put("grid", format!("{}x{}x{}", ccfg.n_lambda, ccfg.n_zeta, ccfg.n_mu));
    meta.put("slack", CERT_SLACK);
    put_report(&mut meta, &report);
    meta.write(&env.out.join("certification.meta"))?;
    Ok(failures)
}

fn certified_region(
    n_lambda: usize,
    n_zeta: usize,
    n_mu: usize,
    tau: f64,
) -> Result<(Table, CertificationReport)> {
    let points = s_mms_grid(n_lambda, n_zeta, n_mu);
    let report = certify_stability(&points, tau)?;
    let mut table =
        Table::new(&["lambda", "zeta", "mu", "s", "m", "eta", "p", "q", "amplification", "stable"]);
    for row in &report.rows {
        table.push(vec![
            row.point.lambda,
            row.point.zeta,
            row.point.mu,
            row.s as f64,
            row.m as f64,
            row.eta,
            row.p,
            row.q,
            row.amplification,
            if row.stable { 1.0 } else { 0.0 },
        ]);
    }
    Ok((table, report))
}

fn contraction_failures(report: &CertificationReport) -> Vec<Failure> {
    let violations = report.violations();
    if violations == 0 {
        Vec::new()
    } else {
        vec![Failure::new(
            "mean-square-contraction",
            format!("{violations} of {} grid points amplify", report.rows.len()),
        )]
    }
}

fn put_report(meta: &mut Metadata, report: &CertificationReport) {
    let max_amp = report.rows.iter().map(|r| r.amplification).fold(0.0, f64::max);
    meta.put("points", report.rows.len());
    meta.put("violations", report.violations());
    meta.put("max_amplification", max_amp);
}
