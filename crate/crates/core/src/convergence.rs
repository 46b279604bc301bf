//! Monte-Carlo convergence and efficiency measurements.
//!
//! The harness drives many independent Brownian paths over a ladder of step
//! sizes that all divide one common fine grid, so every level of a given path
//! sees the same underlying noise (common random numbers). Strong errors
//! compare terminal states in L2, weak errors compare a scalar observable in
//! the mean, both against a per-path reference. Paths run in parallel;
//! accumulation is serial and in path order, so the output is bitwise
//! identical for any thread count.

use rayon::prelude::*;

use crate::brownian::{BrownianGrid, BrownianPath};
use crate::cost::StepStats;
use crate::error::{Result, SolverError};
use crate::problem::SplitSdeProblem;
use crate::skrock::{mskrock_step_into, skrock_step_into, MatrixNoiseMode};
use crate::spectral::{estimate_radius, DEFAULT_RADIUS_MAX_ITER, DEFAULT_RADIUS_TOL};
use crate::stages::{select_stages, StageParams, DEFAULT_EPS, RADIUS_SAFETY};
use crate::workspace::Workspace;

/// Time stepping scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Single-rate stabilized scheme on the full drift.
    Skrock,
    /// Multirate scheme on the split drift.
    Mskrock,
}

/// How stage counts are chosen along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageSelection {
    /// Estimate both spectral radii by power iteration every `every` steps,
    /// inflate them by [`RADIUS_SAFETY`] and re-select the stage counts.
    /// Steps in between reuse the previous choice.
    Auto { eps: f64, every: usize },
    /// Caller-fixed stage counts. For the multirate scheme the auxiliary
    /// horizon is coupled to the step size via
    /// [`StageParams::coupled_from_counts`]; the single-rate scheme uses only
    /// `s` and ignores `m`.
    Fixed { s: usize, m: usize, eps: f64 },
}

impl StageSelection {
    /// Per-step automatic selection.
    pub fn auto(eps: f64) -> Self {
        StageSelection::Auto { eps, every: 1 }
    }
}

/// Source of the per-path reference terminal state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Evaluate the problem's pathwise exact solution at the horizon.
    Exact,
    /// Integrate the same path with the single-rate scheme (automatic stage
    /// selection) on a grid `factor` times finer than the finest ladder
    /// level. `factor` must be at least 2.
    FineSkrock { factor: usize },
}

/// Evaluation counters summed over a run and averaged on demand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSums {
    pub steps: u64,
    pub n_ff: u64,
    pub n_fs: u64,
    pub n_g: u64,
    pub s_sum: u64,
    pub m_sum: u64,
}

impl RunSums {
    pub fn absorb(&mut self, stats: &StepStats) {
        self.steps += 1;
        self.n_ff += stats.n_ff;
        self.n_fs += stats.n_fs;
        self.n_g += stats.n_g;
        self.s_sum += stats.s_used as u64;
        self.m_sum += stats.m_used as u64;
    }

    pub fn merge(&mut self, other: &RunSums) {
        self.steps += other.steps;
        self.n_ff += other.n_ff;
        self.n_fs += other.n_fs;
        self.n_g += other.n_g;
        self.s_sum += other.s_sum;
        self.m_sum += other.m_sum;
    }

    fn per_step(&self, total: u64) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            total as f64 / self.steps as f64
        }
    }

    /// Average outer stage count per step.
    pub fn mean_s(&self) -> f64 {
        self.per_step(self.s_sum)
    }

    /// Average inner stage count per step (zero for single-rate runs).
    pub fn mean_m(&self) -> f64 {
        self.per_step(self.m_sum)
    }
}

/// One ladder level of a convergence run.
///
/// `mean_*` counter fields are totals per simulated path (summed over the
/// path's steps, averaged over paths); `mean_s` and `mean_m` are per-step
/// averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub tau: f64,
    pub n_steps: usize,
    pub strong_error: f64,
    pub strong_stderr: f64,
    pub weak_error: f64,
    pub weak_stderr: f64,
    pub n_samples: usize,
    pub mean_s: f64,
    pub mean_m: f64,
    pub mean_n_ff: f64,
    pub mean_n_fs: f64,
    pub mean_n_g: f64,
}

/// Ladder of error rows, coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

/// Which error column a slope fit reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    Strong,
    Weak,
}

/// Least-squares line through `(log2 tau, log2 err)`.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    /// Fitted `log2 err` at `tau = 1`.
    pub intercept: f64,
    pub n_points: usize,
}

/// Fits a convergence order to the rows with a positive, finite error.
/// At least three such rows are required.
pub fn fit_slope(table: &ErrorTable, target: FitTarget) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| {
            let err = match target {
                FitTarget::Strong => r.strong_error,
                FitTarget::Weak => r.weak_error,
            };
            (r.tau, err)
        })
        .filter(|&(_, e)| e.is_finite() && e > 0.0)
        .map(|(tau, e)| (tau.log2(), e.log2()))
        .collect();
    if pts.len() < 3 {
        return Err(SolverError::invalid(format!(
            "slope fit needs at least 3 positive error points, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    if sxx == 0.0 {
        return Err(SolverError::invalid("slope fit needs distinct step sizes"));
    }
    let slope = sxy / sxx;
    Ok(SlopeFit { slope, intercept: ybar - slope * xbar, n_points: pts.len() })
}

/// Holds the current stage choice and the warm-start state of the radius
/// estimators across the steps of one trajectory.
struct Selector<'a> {
    method: Method,
    selection: StageSelection,
    problem: &'a SplitSdeProblem,
    tau: f64,
    params: Option<StageParams>,
    warm_f: Option<Vec<f64>>,
    warm_s: Option<Vec<f64>>,
    last_rho_f: f64,
    last_rho_s: f64,
    since_refresh: usize,
}

impl<'a> Selector<'a> {
    fn new(
        method: Method,
        selection: StageSelection,
        problem: &'a SplitSdeProblem,
        tau: f64,
    ) -> Result<Self> {
        let params = match selection {
            StageSelection::Fixed { s, m, eps } => Some(match method {
                Method::Mskrock => StageParams::coupled_from_counts(tau, s, m, eps)?,
                // Single-rate: the auxiliary horizon and inner chain are
                // never touched, any positive eta works.
                Method::Skrock => StageParams::from_counts(s, 2, 1.0, eps)?,
            }),
            StageSelection::Auto { every, .. } => {
                if every == 0 {
                    return Err(SolverError::invalid("refresh interval must be at least 1"));
                }
                None
            }
        };
        Ok(Selector {
            method,
            selection,
            problem,
            tau,
            params,
            warm_f: None,
            warm_s: None,
            last_rho_f: f64::NAN,
            last_rho_s: f64::NAN,
            since_refresh: 0,
        })
    }

    /// Makes sure `self.params` matches the state at `(t, x)` and records the
    /// radius estimates behind it.
    fn prepare(&mut self, t: f64, x: &[f64], stats: &mut StepStats) -> Result<()> {
        if let StageSelection::Auto { eps, every } = self.selection {
            if self.params.is_none() || self.since_refresh >= every {
                let drift = &self.problem.drift;
                let est_f = estimate_radius(
                    |y, out| drift.fast_into(t, y, out),
                    x,
                    self.warm_f.as_deref(),
                    DEFAULT_RADIUS_TOL,
                    DEFAULT_RADIUS_MAX_ITER,
                )?;
                let est_s = estimate_radius(
                    |y, out| drift.slow_into(t, y, out),
                    x,
                    self.warm_s.as_deref(),
                    DEFAULT_RADIUS_TOL,
                    DEFAULT_RADIUS_MAX_ITER,
                )?;
                self.last_rho_f = est_f.rho;
                self.last_rho_s = est_s.rho;
                self.warm_f = Some(est_f.eigvec);
                self.warm_s = Some(est_s.eigvec);
                let p = match self.method {
                    Method::Mskrock => select_stages(
                        self.tau,
                        RADIUS_SAFETY * est_f.rho,
                        RADIUS_SAFETY * est_s.rho,
                        eps,
                    )?,
                    // Single-rate stabilization must cover the whole drift;
                    // the sum bounds the spectral radius of the full
                    // Jacobian and is exact for the scalar benchmarks.
                    Method::Skrock => {
                        select_stages(self.tau, 0.0, RADIUS_SAFETY * (est_f.rho + est_s.rho), eps)?
                    }
                };
                self.params = Some(p);
                self.since_refresh = 0;
            }
            self.since_refresh += 1;
            stats.rho_f_est = self.last_rho_f;
            stats.rho_s_est = self.last_rho_s;
        }
        Ok(())
    }
}

/// Integrates one Brownian path from 0 to the horizon in `n_steps` equal
/// steps, invoking `on_step(step, t_end, stats, state)` after each step.
/// `n_steps` must divide the path's fine step count.
pub fn integrate_path_with<F>(
    problem: &SplitSdeProblem,
    method: Method,
    selection: StageSelection,
    path: &BrownianPath,
    n_steps: usize,
    mut on_step: F,
) -> Result<(Vec<f64>, RunSums)>
where
    F: FnMut(usize, f64, &StepStats, &[f64]),
{
    if n_steps == 0 || path.finest_steps() % n_steps != 0 {
        return Err(SolverError::invalid(format!(
            "{n_steps} steps do not divide the {}-step noise grid",
            path.finest_steps()
        )));
    }
    if path.noise_dim() != problem.noise_dim() {
        return Err(SolverError::dim(format!(
            "noise grid carries {} components, problem drives {}",
            path.noise_dim(),
            problem.noise_dim()
        )));
    }
    let stride = path.finest_steps() / n_steps;
    let tau = problem.horizon / n_steps as f64;
    let mut selector = Selector::new(method, selection, problem, tau)?;
    let mut ws = Workspace::for_problem(problem);
    let mut x = problem.x0.clone();
    let mut xn = vec![0.0; problem.dim()];
    let mut dw = vec![0.0; problem.noise_dim()];
    let mut sums = RunSums::default();
    for step in 0..n_steps {
        let t = step as f64 * tau;
        path.increment_into(step, stride, &mut dw);
        let mut stats = StepStats::default();
        selector.prepare(t, &x, &mut stats)?;
        let p = selector.params.as_ref().expect("selector always leaves params set");
        match method {
            Method::Mskrock => mskrock_step_into(
                &problem.drift,
                &problem.diffusion,
                p,
                &x,
                t,
                tau,
                &dw,
                MatrixNoiseMode::Combined,
                &mut ws,
                &mut stats,
                &mut xn,
            )?,
            Method::Skrock => skrock_step_into(
                &problem.drift,
                &problem.diffusion,
                p,
                &x,
                t,
                tau,
                &dw,
                &mut ws,
                &mut stats,
                &mut xn,
            )?,
        }
        std::mem::swap(&mut x, &mut xn);
        sums.absorb(&stats);
        on_step(step, (step + 1) as f64 * tau, &stats, &x);
    }
    Ok((x, sums))
}

/// [`integrate_path_with`] without the per-step callback.
pub fn integrate_path(
    problem: &SplitSdeProblem,
    method: Method,
    selection: StageSelection,
    path: &BrownianPath,
    n_steps: usize,
) -> Result<(Vec<f64>, RunSums)> {
    integrate_path_with(problem, method, selection, path, n_steps, |_, _, _, _| ())
}

/// Full specification of a convergence run.
pub struct ConvergenceConfig<'a> {
    pub problem: &'a SplitSdeProblem,
    pub method: Method,
    pub selection: StageSelection,
    pub reference: Reference,
    /// Step sizes, strictly decreasing; each must cut the horizon into a
    /// whole number of steps.
    pub taus: &'a [f64],
    pub n_paths: usize,
    pub seed: u64,
}

struct LevelSample {
    sq_diff: f64,
    w_diff: f64,
    sums: RunSums,
}

struct LevelAcc {
    sum_d: f64,
    sumsq_d: f64,
    sum_w: f64,
    sumsq_w: f64,
    sums: RunSums,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: usize, b: usize) -> Result<usize> {
    (a / gcd(a, b))
        .checked_mul(b)
        .ok_or_else(|| SolverError::invalid("step-count ladder has no representable common grid"))
}

fn ladder_steps(horizon: f64, taus: &[f64]) -> Result<Vec<usize>> {
    if taus.is_empty() {
        return Err(SolverError::invalid("step-size ladder is empty"));
    }
    let mut steps = Vec::with_capacity(taus.len());
    for (i, &tau) in taus.iter().enumerate() {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(SolverError::invalid(format!("step size must be positive, got {tau}")));
        }
        if i > 0 && tau >= taus[i - 1] {
            return Err(SolverError::invalid("step sizes must be strictly decreasing"));
        }
        let n = (horizon / tau).round();
        if n < 1.0 || (n * tau - horizon).abs() > 1e-9 * horizon {
            return Err(SolverError::invalid(format!(
                "step size {tau} does not divide the horizon {horizon}"
            )));
        }
        steps.push(n as usize);
    }
    Ok(steps)
}

/// Runs the ladder and reports per-level strong and weak errors with their
/// Monte-Carlo standard errors.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ErrorTable> {
    let problem = cfg.problem;
    problem.validate()?;
    if cfg.n_paths == 0 {
        return Err(SolverError::invalid("need at least one sample path"));
    }
    let steps = ladder_steps(problem.horizon, cfg.taus)?;
    let mut finest = 1usize;
    for &n in &steps {
        finest = lcm(finest, n)?;
    }
    let ref_steps = match cfg.reference {
        Reference::Exact => {
            if problem.exact.is_none() {
                return Err(SolverError::invalid(format!(
                    "problem '{}' has no exact solution to compare against",
                    problem.name
                )));
            }
            None
        }
        Reference::FineSkrock { factor } => {
            if factor < 2 {
                return Err(SolverError::invalid(
                    "reference grid must be at least twice as fine as the ladder",
                ));
            }
            Some(
                finest
                    .checked_mul(factor)
                    .ok_or_else(|| SolverError::invalid("reference grid too fine to represent"))?,
            )
        }
    };
    let grid_steps = ref_steps.unwrap_or(finest);
    let grid = BrownianGrid::new(cfg.seed, problem.horizon, grid_steps, problem.noise_dim())?;

    let worker = |index: usize| -> Result<Vec<LevelSample>> {
        let path = grid.path(index as u64);
        let x_ref = match cfg.reference {
            Reference::Exact => {
                let w = path.terminal();
                (problem.exact.as_ref().expect("checked above"))(problem.horizon, &w)
            }
            Reference::FineSkrock { .. } => {
                let (x, _) = integrate_path(
                    problem,
                    Method::Skrock,
                    StageSelection::auto(DEFAULT_EPS),
                    &path,
                    grid_steps,
                )?;
                x
            }
        };
        if x_ref.len() != problem.dim() {
            return Err(SolverError::dim(format!(
                "reference produced {} components for a {}-dimensional state",
                x_ref.len(),
                problem.dim()
            )));
        }
        let psi = |x: &[f64]| match &problem.weak_functional {
            Some(f) => f(x),
            None => x[0],
        };
        let psi_ref = psi(&x_ref);
        let mut records = Vec::with_capacity(steps.len());
        for &n_steps in &steps {
            let (x, sums) = integrate_path(problem, cfg.method, cfg.selection, &path, n_steps)?;
            let sq_diff: f64 = x.iter().zip(x_ref.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            records.push(LevelSample { sq_diff, w_diff: psi_ref - psi(&x), sums });
        }
        Ok(records)
    };

    // Ordered collect keeps one slot per path; the reduction below is serial
    // and in path order, so thread scheduling cannot change the result.
    let results: Vec<Result<Vec<LevelSample>>> =
        (0..cfg.n_paths).into_par_iter().map(worker).collect();

    let mut acc: Vec<LevelAcc> = steps
        .iter()
        .map(|_| LevelAcc {
            sum_d: 0.0,
            sumsq_d: 0.0,
            sum_w: 0.0,
            sumsq_w: 0.0,
            sums: RunSums::default(),
        })
        .collect();
    for (i, res) in results.into_iter().enumerate() {
        let records = res.map_err(|e| SolverError::PathFailure { path: i, source: Box::new(e) })?;
        for (a, r) in acc.iter_mut().zip(records.iter()) {
            a.sum_d += r.sq_diff;
            a.sumsq_d += r.sq_diff * r.sq_diff;
            a.sum_w += r.w_diff;
            a.sumsq_w += r.w_diff * r.w_diff;
            a.sums.merge(&r.sums);
        }
    }

    let n = cfg.n_paths as f64;
    let rows = steps
        .iter()
        .zip(cfg.taus.iter())
        .zip(acc.iter())
        .map(|((&n_steps, &tau), a)| {
            let mean_d = a.sum_d / n;
            let mean_w = a.sum_w / n;
            // Sample variances of the per-path squared difference and of the
            // paired observable difference; tiny negative values from
            // cancellation clamp to zero.
            let (var_d, var_w) = if cfg.n_paths > 1 {
                (
                    ((a.sumsq_d - n * mean_d * mean_d) / (n - 1.0)).max(0.0),
                    ((a.sumsq_w - n * mean_w * mean_w) / (n - 1.0)).max(0.0),
                )
            } else {
                (0.0, 0.0)
            };
            let strong_error = mean_d.max(0.0).sqrt();
            // Delta method: se(sqrt(mean)) = se(mean) / (2 sqrt(mean)).
            let strong_stderr =
                if strong_error > 0.0 { (var_d / n).sqrt() / (2.0 * strong_error) } else { 0.0 };
            ErrorRow {
                tau,
                n_steps,
                strong_error,
                strong_stderr,
                weak_error: mean_w.abs(),
                weak_stderr: (var_w / n).sqrt(),
                n_samples: cfg.n_paths,
                mean_s: a.sums.mean_s(),
                mean_m: a.sums.mean_m(),
                mean_n_ff: a.sums.n_ff as f64 / n,
                mean_n_fs: a.sums.n_fs as f64 / n,
                mean_n_g: a.sums.n_g as f64 / n,
            }
        })
        .collect();
    Ok(ErrorTable { rows })
}
