//! One module per subcommand. Each `run` takes the resolved environment,
//! writes its artifacts, and returns the list of failed in-run checks;
//! errors mean the run could not be carried out.

use anyhow::{bail, Result};

pub mod converge;
pub mod integrate;
pub mod speedup;
pub mod stability;

/// Whole number of steps of size `tau` covering `horizon`, or an error when
/// `tau` does not divide it.
pub(crate) fn steps_for(horizon: f64, tau: f64) -> Result<usize> {
    if !(tau.is_finite() && tau > 0.0 && tau <= horizon) {
        bail!("step size {tau} outside (0, {horizon}]");
    }
    let n = (horizon / tau).round();
    if (n * tau - horizon).abs() > 1e-9 * horizon {
        bail!("step size {tau} does not divide the horizon {horizon}");
    }
    Ok(n as usize)
}
