//! Reusable scratch buffers for the stage recurrences.
//!
//! Every recurrence in this crate rotates through three state vectors, so a
//! step needs a fixed number of buffers regardless of how many stages the
//! stiffness demands. Allocating them once per trajectory keeps the hot loop
//! allocation-free.

use crate::problem::SplitSdeProblem;

/// Buffers of the outer (slow) recurrence.
#[derive(Debug, Clone)]
pub(crate) struct OuterWs {
    pub k_prev2: Vec<f64>,
    pub k_prev1: Vec<f64>,
    pub k_tmp: Vec<f64>,
    /// First-stage drift argument shifted by the noise term.
    pub shifted: Vec<f64>,
}

/// Buffers of the inner (fast) recurrence and of the noise chains.
#[derive(Debug, Clone)]
pub(crate) struct InnerWs {
    pub u_prev2: Vec<f64>,
    pub u_prev1: Vec<f64>,
    pub u_tmp: Vec<f64>,
    /// Slow drift frozen at the stage base point.
    pub frozen_slow: Vec<f64>,
    /// Terminal state of the noise-free chain while the noisy chain runs.
    pub chain_save: Vec<f64>,
    /// Scaled diffusion injection for the noisy chain.
    pub inj: Vec<f64>,
}

/// Scratch space for one step of any scheme in this crate. Its size depends
/// only on the state and noise dimensions, never on the stage counts.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub(crate) outer: OuterWs,
    pub(crate) inner: InnerWs,
    /// Raw diffusion values (`dim` or `dim * noise_dim` entries).
    pub(crate) gvals: Vec<f64>,
    /// Damped noise term entering the first outer stage.
    pub(crate) qbar: Vec<f64>,
    /// Damped diffusion before noise multiplication (vector mode).
    pub(crate) gbar: Vec<f64>,
}

impl Workspace {
    /// Buffers for state dimension `dim` and a raw diffusion buffer of
    /// `g_len` entries (`0` for drift-only use).
    pub fn new(dim: usize, g_len: usize) -> Self {
        let z = || vec![0.0; dim];
        Workspace {
            outer: OuterWs { k_prev2: z(), k_prev1: z(), k_tmp: z(), shifted: z() },
            inner: InnerWs {
                u_prev2: z(),
                u_prev1: z(),
                u_tmp: z(),
                frozen_slow: z(),
                chain_save: z(),
                inj: z(),
            },
            gvals: vec![0.0; g_len],
            qbar: z(),
            gbar: z(),
        }
    }

    pub fn for_problem(p: &SplitSdeProblem) -> Self {
        Workspace::new(p.dim(), p.diffusion.value_len())
    }

    /// Total floats held; constant across steps and stage counts.
    pub fn total_floats(&self) -> usize {
        12 * self.outer.k_prev2.len() + self.gvals.len()
    }
}
