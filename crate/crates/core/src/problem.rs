//! Problem containers: a drift split into fast and slow parts, a diffusion
//! term in vector, diagonal, or matrix form, and the assembled SDE problem.

use crate::error::{Result, SolverError};

/// State-space map `(t, y) -> out`; `out` has the length declared by the
/// owning container.
pub type StateFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Exact solution as a function of time and the driving Wiener value at that
/// time.
pub type ExactFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;

/// Scalar observable of the terminal state, used for weak errors.
pub type ObservableFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Drift split `f = f_fast + f_slow`. The fast part is assumed cheap and
/// stiff (handled by the inner scheme), the slow part expensive and mildly
/// stiff (handled by the outer scheme).
pub struct DriftPair {
    dim: usize,
    fast: Box<StateFn>,
    slow: Box<StateFn>,
}

impl DriftPair {
    pub fn new<F, S>(dim: usize, fast: F, slow: S) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        DriftPair { dim, fast: Box::new(fast), slow: Box::new(slow) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fast_into(&self, t: f64, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.fast)(t, y, out);
    }

    pub fn slow_into(&self, t: f64, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.slow)(t, y, out);
    }

    /// `out = f_fast(y) + f_slow(y)`, using `scratch` for the slow value.
    pub fn full_into(&self, t: f64, y: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.fast_into(t, y, out);
        self.slow_into(t, y, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += *s;
        }
    }
}

/// Shape of the diffusion term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// `g: R^n -> R^n`, driven by an `n`-dimensional Wiener process acting
    /// componentwise: `(g dW)_i = g_i dW_i`.
    Vector,
    /// Diagonal matrix diffusion stored as its diagonal; same action as
    /// `Vector` but integrated in matrix mode (noise folded into the chains).
    Diagonal,
    /// Full `n x l` matrix diffusion, stored column-major.
    Matrix,
}

/// Diffusion term of the SDE.
pub struct DiffusionSpec {
    kind: NoiseKind,
    dim: usize,
    noise_dim: usize,
    g: Box<StateFn>,
}

impl DiffusionSpec {
    /// Componentwise vector diffusion; `g` writes `dim` values.
    pub fn vector<G>(dim: usize, g: G) -> Self
    where
        G: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        DiffusionSpec { kind: NoiseKind::Vector, dim, noise_dim: dim, g: Box::new(g) }
    }

    /// Diagonal matrix diffusion; `g` writes the `dim` diagonal entries.
    pub fn diagonal<G>(dim: usize, g: G) -> Self
    where
        G: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        DiffusionSpec { kind: NoiseKind::Diagonal, dim, noise_dim: dim, g: Box::new(g) }
    }

    /// Matrix diffusion with `noise_dim` independent Wiener components; `g`
    /// writes `dim * noise_dim` values, column `j` at offset `j * dim`.
    pub fn matrix<G>(dim: usize, noise_dim: usize, g: G) -> Self
    where
        G: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        DiffusionSpec { kind: NoiseKind::Matrix, dim, noise_dim, g: Box::new(g) }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Length of the raw evaluation buffer.
    pub fn value_len(&self) -> usize {
        match self.kind {
            NoiseKind::Vector | NoiseKind::Diagonal => self.dim,
            NoiseKind::Matrix => self.dim * self.noise_dim,
        }
    }

    /// Raw diffusion values at `(t, x)`.
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.value_len());
        (self.g)(t, x, out);
    }

    /// `out = g(values) . dw`: componentwise product for vector and diagonal
    /// kinds, matrix-vector product for the matrix kind. `values` must hold a
    /// previous `eval_into` result.
    pub fn combine_with_noise(&self, values: &[f64], dw: &[f64], out: &mut [f64]) -> Result<()> {
        if dw.len() != self.noise_dim {
            return Err(SolverError::dim(format!(
                "noise increment has length {}, expected {}",
                dw.len(),
                self.noise_dim
            )));
        }
        debug_assert_eq!(out.len(), self.dim);
        match self.kind {
            NoiseKind::Vector | NoiseKind::Diagonal => {
                for i in 0..self.dim {
                    out[i] = values[i] * dw[i];
                }
            }
            NoiseKind::Matrix => {
                out.fill(0.0);
                for j in 0..self.noise_dim {
                    let col = &values[j * self.dim..(j + 1) * self.dim];
                    let w = dw[j];
                    for i in 0..self.dim {
                        out[i] += col[i] * w;
                    }
                }
            }
        }
        Ok(())
    }
}

/// A stiff SDE with split drift, ready for the multirate solvers.
pub struct SplitSdeProblem {
    pub name: String,
    pub drift: DriftPair,
    pub diffusion: DiffusionSpec,
    pub x0: Vec<f64>,
    pub horizon: f64,
    /// Pathwise exact solution `(t, W(t)) -> X(t)` when one is known.
    pub exact: Option<Box<ExactFn>>,
    /// Observable for weak-error measurements.
    pub weak_functional: Option<Box<ObservableFn>>,
}

impl std::fmt::Debug for SplitSdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitSdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("noise_kind", &self.diffusion.kind())
            .field("noise_dim", &self.noise_dim())
            .field("horizon", &self.horizon)
            .field("has_exact", &self.exact.is_some())
            .field("has_weak_functional", &self.weak_functional.is_some())
            .finish()
    }
}

impl SplitSdeProblem {
    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.diffusion.noise_dim()
    }

    /// Checks the container's internal dimension consistency.
    pub fn validate(&self) -> Result<()> {
        if self.drift.dim() != self.diffusion.dim() {
            return Err(SolverError::dim(format!(
                "drift dimension {} != diffusion dimension {}",
                self.drift.dim(),
                self.diffusion.dim()
            )));
        }
        if self.x0.len() != self.drift.dim() {
            return Err(SolverError::dim(format!(
                "initial state length {} != dimension {}",
                self.x0.len(),
                self.drift.dim()
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SolverError::invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::invalid("initial state must be finite"));
        }
        Ok(())
    }
}
