//! Work accounting: per-step evaluation counters and the relative cost model
//! used to predict the speed-up over the single-rate stabilized scheme.

/// Evaluation counters and stage bookkeeping for one or more steps.
///
/// One multirate stochastic step with stage counts `(s, m)` performs exactly
/// `(s + 1) m` fast-drift, `s` slow-drift, and `1` diffusion evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub n_ff: u64,
    pub n_fs: u64,
    pub n_g: u64,
    pub s_used: usize,
    pub m_used: usize,
    /// Spectral-radius estimates behind the stage choice; NaN when the caller
    /// fixed the stages without estimating.
    pub rho_f_est: f64,
    pub rho_s_est: f64,
}

impl Default for StepStats {
    fn default() -> Self {
        StepStats {
            n_ff: 0,
            n_fs: 0,
            n_g: 0,
            s_used: 0,
            m_used: 0,
            rho_f_est: f64::NAN,
            rho_s_est: f64::NAN,
        }
    }
}

/// Per-step cost of the multirate scheme and of the single-rate scheme that
/// covers the same spectrum, in units of one diffusion evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub multirate: f64,
    pub single_rate: f64,
    pub speedup: f64,
}

/// Continuous cost model at stage counts `(s, m)` for relative evaluation
/// costs `c_f` (fast drift) and `c_s` (slow drift) with `c_f + c_s <= 1`; the
/// remainder is the diffusion cost.
///
/// The single-rate scheme needs `s' = s sqrt((m^2 + 2)/3)` stages to cover
/// the combined spectrum that `(s, m)` covers in the multirate splitting.
pub fn cost_model(s: f64, m: f64, c_f: f64, c_s: f64) -> CostModel {
    assert!(s >= 0.0 && m >= 0.0, "stage counts must be non-negative");
    assert!(
        c_f >= 0.0 && c_s >= 0.0 && c_f + c_s <= 1.0 + 1e-12,
        "relative costs must be non-negative with c_f + c_s <= 1, got {c_f}, {c_s}"
    );
    let multirate = ((s + 1.0) * m - 1.0) * c_f + (s - 1.0) * c_s + 1.0;
    let s_single = s * ((m * m + 2.0) / 3.0).sqrt();
    let single_rate = (s_single - 1.0) * (c_f + c_s) + 1.0;
    CostModel { multirate, single_rate, speedup: single_rate / multirate }
}

/// Closed-form speed-up in terms of the scaled radii `p_f = tau rho_f`,
/// `p_s = tau rho_s` (both positive). Algebraically identical to the cost
/// ratio of [`cost_model`] at the continuous stage counts `s = sqrt(p_s/2)`,
/// `m = sqrt(3 p_f / p_s + 1)`.
pub fn theoretical_speedup(p_f: f64, p_s: f64, c_f: f64, c_s: f64) -> f64 {
    assert!(p_f >= 0.0 && p_s > 0.0, "scaled radii must satisfy p_f >= 0, p_s > 0");
    let sqrt2 = std::f64::consts::SQRT_2;
    let num = ((p_f + p_s).sqrt() - sqrt2) * (c_f + c_s) + sqrt2;
    let den = ((p_s.sqrt() + sqrt2) * (3.0 * p_f / p_s + 1.0).sqrt() - sqrt2) * c_f
        + (p_s.sqrt() - sqrt2) * c_s
        + sqrt2;
    num / den
}
