//! Heat equation on a 1-D interval with a locally refined grid: a narrow
//! channel of width `delta` in the middle of the domain is meshed at
//! `h = delta/8` (capped at the coarse spacing `H`) while the rest uses `H`.
//! The second-difference rows touching fine nodes form the fast drift part;
//! everything else, plus a time-periodic Gaussian source, is slow. Noise is
//! diagonal and multiplicative, `g_i(x) = sigma x_i`.
//!
//! This is a deliberately reduced surrogate of mesh-refinement stiffness:
//! one space dimension, finite differences, node-wise independent noise. It
//! reproduces the phenomenon (a handful of fine cells dictating the global
//! explicit step) without any FEM machinery, and no quantitative claims are
//! attached to it.

use std::sync::Arc;

use crate::error::{Result, SolverError};
use crate::problem::{DiffusionSpec, DriftPair, SplitSdeProblem};

/// Interval length of the heat surrogate.
pub const HEAT_DOMAIN_LENGTH: f64 = 10.0;

const SOURCE_CENTER: f64 = 7.5;

/// The assembled problem plus the grid data tests and tooling need.
#[derive(Debug)]
pub struct RefinedHeatProblem {
    pub problem: SplitSdeProblem,
    /// Node coordinates, ascending, first 0 and last the domain length.
    pub positions: Vec<f64>,
    /// Cell widths, `positions.len() - 1` entries.
    pub spacings: Vec<f64>,
    /// Rows assigned to the fast drift part.
    pub fast_mask: Vec<bool>,
}

struct Grid {
    positions: Vec<f64>,
    spacings: Vec<f64>,
    fast_rows: Vec<bool>,
}

impl Grid {
    /// Second difference at row `i` with homogeneous Neumann ends
    /// (mirror ghost nodes).
    fn row(&self, i: usize, x: &[f64]) -> f64 {
        let n = x.len();
        if i == 0 {
            let h = self.spacings[0];
            2.0 * (x[1] - x[0]) / (h * h)
        } else if i == n - 1 {
            let h = self.spacings[n - 2];
            2.0 * (x[n - 2] - x[n - 1]) / (h * h)
        } else {
            let hm = self.spacings[i - 1];
            let hp = self.spacings[i];
            2.0 / (hm + hp) * ((x[i + 1] - x[i]) / hp - (x[i] - x[i - 1]) / hm)
        }
    }
}

fn segment(points: &mut Vec<f64>, from: f64, to: f64, pieces: usize) {
    for k in 1..=pieces {
        points.push(from + (to - from) * k as f64 / pieces as f64);
    }
}

/// Builds the refined-heat problem with a unit-amplitude source. See
/// [`make_refined_heat_with_source`] for the source-free variant.
pub fn make_refined_heat(delta: f64, h_coarse: f64, sigma: f64) -> Result<RefinedHeatProblem> {
    make_refined_heat_with_source(delta, h_coarse, sigma, 1.0)
}

/// Same as [`make_refined_heat`], with the source amplitude exposed
/// (0 disables the source entirely).
pub fn make_refined_heat_with_source(
    delta: f64,
    h_coarse: f64,
    sigma: f64,
    source_amplitude: f64,
) -> Result<RefinedHeatProblem> {
    let length = HEAT_DOMAIN_LENGTH;
    if !(delta.is_finite() && delta > 0.0 && delta < length) {
        return Err(SolverError::invalid(format!(
            "channel width must lie in (0, {length}), got {delta}"
        )));
    }
    if !(h_coarse.is_finite() && h_coarse > 0.0 && h_coarse < length / 2.0) {
        return Err(SolverError::invalid(format!("bad coarse spacing {h_coarse}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(SolverError::invalid(format!("bad noise intensity {sigma}")));
    }
    let h_fine = (delta / 8.0).min(h_coarse);
    let a = 0.5 * (length - delta);
    let b = a + delta;

    let mut positions = vec![0.0];
    let n_side = (a / h_coarse).ceil().max(1.0) as usize;
    let n_channel = (delta / h_fine).round().max(1.0) as usize;
    segment(&mut positions, 0.0, a, n_side);
    segment(&mut positions, a, b, n_channel);
    segment(&mut positions, b, length, n_side);
    let spacings: Vec<f64> = positions.windows(2).map(|w| w[1] - w[0]).collect();
    let n = positions.len();

    // A node is fine if it lies in the channel; a row is fast if its stencil
    // touches a fine node. Classification is by position alone: side spacings
    // can round to just under the coarse target when `a/H` is fractional, and
    // with h = H the channel nodes still count as fine, so the degenerate
    // uniform grid keeps a nonempty (and non-stiffening) fast part instead of
    // silently turning the method single-rate.
    let fine: Vec<bool> =
        (0..n).map(|i| positions[i] >= a - 1e-12 && positions[i] <= b + 1e-12).collect();
    let fast_rows: Vec<bool> =
        (0..n).map(|i| fine[i] || (i > 0 && fine[i - 1]) || (i < n - 1 && fine[i + 1])).collect();

    let grid = Arc::new(Grid {
        positions: positions.clone(),
        spacings: spacings.clone(),
        fast_rows: fast_rows.clone(),
    });
    let fast_grid = Arc::clone(&grid);
    let slow_grid = Arc::clone(&grid);

    let problem = SplitSdeProblem {
        name: format!("refined-heat(delta={delta}, H={h_coarse}, sigma={sigma})"),
        drift: DriftPair::new(
            n,
            move |_, y: &[f64], out: &mut [f64]| {
                for i in 0..y.len() {
                    out[i] = if fast_grid.fast_rows[i] { fast_grid.row(i, y) } else { 0.0 };
                }
            },
            move |t, y: &[f64], out: &mut [f64]| {
                let pulse = (10.0 * std::f64::consts::PI * t).sin().powi(2);
                for i in 0..y.len() {
                    let d = slow_grid.positions[i] - SOURCE_CENTER;
                    let source = source_amplitude * pulse * (-5.0 * d * d).exp();
                    out[i] =
                        if slow_grid.fast_rows[i] { 0.0 } else { slow_grid.row(i, y) } + source;
                }
            },
        ),
        diffusion: DiffusionSpec::diagonal(n, move |_, x: &[f64], out: &mut [f64]| {
            for (o, &v) in out.iter_mut().zip(x) {
                *o = sigma * v;
            }
        }),
        x0: vec![1.0; n],
        horizon: 0.32,
        exact: None,
        weak_functional: Some(Box::new(|x: &[f64]| x.iter().sum::<f64>() / x.len() as f64)),
    };
    problem.validate()?;
    Ok(RefinedHeatProblem { problem, positions, spacings, fast_mask: fast_rows })
}
