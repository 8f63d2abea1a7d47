use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-step integration and differencing parameters shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// RK4 step; grids use `ceil(T / h)` equal cells.
    pub h: f64,
    /// Gate for every inversion.
    pub max_condition: f64,
    /// Step of central differences in `x`.
    pub fd_step: f64,
    /// Base time `T` of the `{T, 2T, 4T, 8T}` grid used by the Lyapunov index.
    pub slope_t: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            h: 1e-3,
            max_condition: 1e8,
            fd_step: 1e-5,
            slope_t: 5.0,
        }
    }
}

impl SolverOptions {
    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.h) {
            return Err(Error::BadParameter(format!("step h = {} must be positive", self.h)));
        }
        if !positive(self.fd_step) {
            return Err(Error::BadParameter(format!(
                "fd_step = {} must be positive",
                self.fd_step
            )));
        }
        if !positive(self.max_condition) {
            return Err(Error::BadParameter("max_condition must be positive".into()));
        }
        if !positive(self.slope_t) {
            return Err(Error::BadParameter("slope_t must be positive".into()));
        }
        Ok(())
    }
}
