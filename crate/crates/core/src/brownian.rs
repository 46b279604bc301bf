//! Reproducible Brownian increments on a common fine grid.
//!
//! All step sizes used in a convergence study draw from the same underlying
//! fine discretization, so two methods (or two step sizes) integrate the
//! same sample path. Each path is an independent counter-based substream of
//! one seed: path `i` is reproducible in isolation, regardless of how many
//! paths run, in what order, or on how many threads.

use crate::error::{Result, SolverError};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Description of the common fine grid: `finest_steps` increments of
/// `noise_dim` components over `[0, horizon]`. Paths are generated lazily.
#[derive(Debug, Clone)]
pub struct BrownianGrid {
    seed: u64,
    horizon: f64,
    finest_steps: usize,
    noise_dim: usize,
}

impl BrownianGrid {
    pub fn new(seed: u64, horizon: f64, finest_steps: usize, noise_dim: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SolverError::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if finest_steps == 0 || noise_dim == 0 {
            return Err(SolverError::invalid("finest_steps and noise_dim must be at least 1"));
        }
        Ok(BrownianGrid { seed, horizon, finest_steps, noise_dim })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn finest_steps(&self) -> usize {
        self.finest_steps
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Fine step size.
    pub fn tau_fine(&self) -> f64 {
        self.horizon / self.finest_steps as f64
    }

    /// Number of fine increments per coarse step when the horizon is cut
    /// into `n_steps` pieces. Errors unless `n_steps` divides the fine count.
    pub fn stride_for(&self, n_steps: usize) -> Result<usize> {
        if n_steps == 0 || self.finest_steps % n_steps != 0 {
            return Err(SolverError::invalid(format!(
                "{n_steps} coarse steps do not divide {} fine steps",
                self.finest_steps
            )));
        }
        Ok(self.finest_steps / n_steps)
    }

    /// Materializes path `index`. Deterministic in `(seed, index)`.
    pub fn path(&self, index: u64) -> BrownianPath {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let scale = self.tau_fine().sqrt();
        let normal = StandardNormal;
        let increments = (0..self.finest_steps * self.noise_dim)
            .map(|_| {
                let xi: f64 = normal.sample(&mut rng);
                scale * xi
            })
            .collect();
        BrownianPath { increments, finest_steps: self.finest_steps, noise_dim: self.noise_dim }
    }
}

/// One realized path: `finest_steps` increments, each of `noise_dim`
/// components, laid out step-major.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    increments: Vec<f64>,
    finest_steps: usize,
    noise_dim: usize,
}

impl BrownianPath {
    pub fn finest_steps(&self) -> usize {
        self.finest_steps
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Fine increment of step `step` (no aggregation).
    pub fn fine(&self, step: usize) -> &[f64] {
        let l = self.noise_dim;
        &self.increments[step * l..(step + 1) * l]
    }

    /// Coarse increment of coarse step `step` at the given stride: the sum
    /// of the contained fine increments, accumulated in grid order.
    pub fn increment_into(&self, step: usize, stride: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.noise_dim, "output buffer length");
        assert!(
            (step + 1) * stride <= self.finest_steps,
            "coarse step {step} at stride {stride} exceeds {} fine steps",
            self.finest_steps
        );
        out.fill(0.0);
        for k in step * stride..(step + 1) * stride {
            for (o, v) in out.iter_mut().zip(self.fine(k)) {
                *o += v;
            }
        }
    }

    /// Terminal value `W(horizon)`: sum of all fine increments in grid order.
    pub fn terminal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.noise_dim];
        self.increment_into(0, self.finest_steps, &mut out);
        out
    }
}
