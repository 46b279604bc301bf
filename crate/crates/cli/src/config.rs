//! Declarative run configuration: one versioned TOML file, sections of
//! `key = value` pairs, flag overrides applied by the dispatcher. A run is
//! reproducible from its config plus its seed alone.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use mrock::convergence::{Method, Reference, StageSelection};
use mrock::problem::SplitSdeProblem;
use mrock::problems::{
    load_reaction_network, make_multirate_test, make_refined_heat_with_source, make_sinh_problem,
    RefinedHeatProblem,
};
use mrock::stages::DEFAULT_EPS;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Default seed; the --seed flag takes precedence.
    pub seed: Option<u64>,
    /// Default output directory; the --out flag takes precedence.
    pub out: Option<String>,
    pub problem: Option<ProblemConfig>,
    pub method: Option<MethodConfig>,
    pub integrate: Option<IntegrateConfig>,
    pub converge: Option<ConvergeConfig>,
    pub stability_scan: Option<StabilityScanConfig>,
    pub speedup: Option<SpeedupConfig>,
    pub certify: Option<CertifyConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("malformed config")?;
        if cfg.version != CONFIG_VERSION {
            bail!(
                "unsupported config version {} (this build reads version {})",
                cfg.version,
                CONFIG_VERSION
            );
        }
        Ok(cfg)
    }

    pub fn problem(&self) -> Result<&ProblemConfig> {
        self.problem.as_ref().ok_or_else(|| anyhow!("config needs a [problem] section"))
    }

    pub fn method_or_default(&self) -> MethodConfig {
        self.method.clone().unwrap_or_default()
    }
}

/// Problem selection: `id` picks the family, the remaining keys apply only
/// where noted and must not be mixed across families.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// "multirate-test" | "sinh" | "refined-heat" | "reaction-file"
    pub id: String,
    /// multirate-test: fast rate, slow rate, noise intensity.
    pub lambda: Option<f64>,
    pub zeta: Option<f64>,
    pub mu: Option<f64>,
    /// refined-heat: channel width, coarse spacing, noise intensity, and
    /// source amplitude (default 1; 0 disables the source).
    pub delta: Option<f64>,
    pub h_coarse: Option<f64>,
    pub sigma: Option<f64>,
    pub source: Option<f64>,
    /// reaction-file: network path, initial state, time horizon.
    pub path: Option<PathBuf>,
    pub x0: Option<Vec<f64>>,
    pub horizon: Option<f64>,
}

fn need<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("config key {key} is required for this problem"))
}

impl ProblemConfig {
    pub fn build(&self) -> Result<SplitSdeProblem> {
        match self.id.as_str() {
            "multirate-test" => Ok(make_multirate_test(
                need(self.lambda, "problem.lambda")?,
                need(self.zeta, "problem.zeta")?,
                need(self.mu, "problem.mu")?,
            )?),
            "sinh" => Ok(make_sinh_problem()),
            "refined-heat" => Ok(self.build_heat()?.problem),
            "reaction-file" => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| anyhow!("config key problem.path is required"))?;
                let x0 =
                    self.x0.clone().ok_or_else(|| anyhow!("config key problem.x0 is required"))?;
                Ok(load_reaction_network(path, x0, need(self.horizon, "problem.horizon")?)?)
            }
            other => bail!(
                "unknown problem id '{other}' \
                 (expected multirate-test, sinh, refined-heat or reaction-file)"
            ),
        }
    }

    /// The refined-heat problem with its grid metadata (node masks, widths).
    pub fn build_heat(&self) -> Result<RefinedHeatProblem> {
        if self.id != "refined-heat" {
            bail!("problem id '{}' has no grid structure", self.id);
        }
        Ok(make_refined_heat_with_source(
            need(self.delta, "problem.delta")?,
            need(self.h_coarse, "problem.h_coarse")?,
            need(self.sigma, "problem.sigma")?,
            self.source.unwrap_or(1.0),
        )?)
    }

    /// True for the heat configuration whose right-hand side vanishes on a
    /// constant state: no noise, no source.
    pub fn is_driftless_heat(&self) -> bool {
        self.id == "refined-heat" && self.sigma == Some(0.0) && self.source == Some(0.0)
    }
}

/// Scheme and stage selection. Omitting the section selects the multirate
/// scheme with automatic per-step stage selection.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    /// "mskrock" (multirate, default) | "skrock" (single-rate)
    pub scheme: Option<String>,
    /// Fixing one of s, m requires fixing the other; leaving both unset
    /// selects stages from spectral-radius estimates each step.
    pub s: Option<usize>,
    pub m: Option<usize>,
    pub eps: Option<f64>,
    /// Under automatic selection, re-estimate radii every this many steps.
    pub refresh_every: Option<usize>,
}

impl MethodConfig {
    pub fn scheme(&self) -> Result<Method> {
        match self.scheme.as_deref() {
            None | Some("mskrock") => Ok(Method::Mskrock),
            Some("skrock") => Ok(Method::Skrock),
            Some(other) => bail!("unknown scheme '{other}' (expected mskrock or skrock)"),
        }
    }

    pub fn selection(&self) -> Result<StageSelection> {
        let eps = self.eps.unwrap_or(DEFAULT_EPS);
        match (self.s, self.m) {
            (Some(s), Some(m)) => {
                if self.refresh_every.is_some() {
                    bail!("method.refresh_every only applies to automatic stage selection");
                }
                Ok(StageSelection::Fixed { s, m, eps })
            }
            (None, None) => {
                Ok(StageSelection::Auto { eps, every: self.refresh_every.unwrap_or(1) })
            }
            _ => bail!("fix both method.s and method.m, or neither"),
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or(DEFAULT_EPS)
    }

    /// Short human/metadata label, e.g. "fixed(5,4)" or "auto(every=1)".
    pub fn selection_label(&self) -> String {
        match (self.s, self.m) {
            (Some(s), Some(m)) => format!("fixed({s},{m})"),
            _ => format!("auto(every={})", self.refresh_every.unwrap_or(1)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    pub tau: f64,
    /// Also snapshot the state every this many steps; the initial and
    /// terminal states are always written.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Step sizes, strictly decreasing, each dividing the horizon.
    pub taus: Vec<f64>,
    pub n_paths: usize,
    /// "exact" (default) | "fine" (single-rate run on a finer grid).
    pub reference: Option<String>,
    /// Grid refinement of the fine reference (default 16).
    pub fine_factor: Option<usize>,
    /// Optional in-run acceptance windows [lo, hi] on the fitted slopes.
    pub expect_strong_slope: Option<[f64; 2]>,
    pub expect_weak_slope: Option<[f64; 2]>,
}

impl ConvergeConfig {
    pub fn reference(&self) -> Result<Reference> {
        match self.reference.as_deref() {
            None | Some("exact") => {
                if self.fine_factor.is_some() {
                    bail!("converge.fine_factor only applies to the fine reference");
                }
                Ok(Reference::Exact)
            }
            Some("fine") => Ok(Reference::FineSkrock { factor: self.fine_factor.unwrap_or(16) }),
            Some(other) => bail!("unknown reference '{other}' (expected exact or fine)"),
        }
    }

    pub fn reference_label(&self) -> String {
        match self.reference.as_deref() {
            None | Some("exact") => "exact".to_string(),
            _ => format!("fine(factor={})", self.fine_factor.unwrap_or(16)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityScanConfig {
    /// Outer and inner stage counts of the tabulated polynomials; the inner
    /// count must be even.
    pub s: usize,
    pub m: usize,
    /// Damping (default 0, the sharp edge of the stability interval).
    pub eps: Option<f64>,
    /// Points on [z_min, 0] (default 201; z_min defaults to the inner
    /// stability boundary).
    pub n_z: Option<usize>,
    pub z_min: Option<f64>,
    /// Certification grid resolution and the step size it is checked at.
    pub n_lambda: usize,
    pub n_zeta: usize,
    pub n_mu: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub n_lambda: usize,
    pub n_zeta: usize,
    pub n_mu: usize,
    pub tau: f64,
}

/// `sweep = "delta"`: measured evaluation counts on the refinement
/// surrogate across channel widths. `sweep = "reaction"`: predicted costs
/// for a reaction network as its fast set grows.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedupConfig {
    pub sweep: String,
    /// Shared: outer step size.
    pub tau: Option<f64>,
    /// delta sweep: channel widths (strictly decreasing), grid and noise,
    /// paths per width (default 4).
    pub deltas: Option<Vec<f64>>,
    pub h_coarse: Option<f64>,
    pub sigma: Option<f64>,
    pub n_paths: Option<usize>,
    /// reaction sweep: network path, initial state, fast-set sizes, and the
    /// fraction of one step spent on the drift (default 0.9; the remainder
    /// is the diffusion).
    pub path: Option<PathBuf>,
    pub x0: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub fast_counts: Option<Vec<usize>>,
    pub drift_cost: Option<f64>,
}
