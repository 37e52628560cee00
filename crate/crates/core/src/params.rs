//! Model parameters and the uniform time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when classifying the critical cases `dH = 1` and `H = 1/d`.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Spatial dimension, Hurst exponent and time horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    #[serde(rename = "H")]
    pub hurst: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(d: usize, hurst: f64, horizon: f64) -> Result<Self> {
        let p = ModelParams { d, hurst, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Domain("dimension d must be >= 1".into()));
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::Domain(format!(
                "Hurst exponent must lie in (0,1), got {}",
                self.hurst
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon T must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// The product `dH`.
    pub fn dh(&self) -> f64 {
        self.d as f64 * self.hurst
    }

    /// `dH = 1` within [`CRITICAL_TOL`].
    pub fn is_critical(&self) -> bool {
        (self.dh() - 1.0).abs() <= CRITICAL_TOL
    }

    /// `dH < 1`: the uncentered local time converges.
    pub fn is_strong(&self) -> bool {
        self.dh() < 1.0 - CRITICAL_TOL
    }

    /// `dH < 3/2`: the centered local time converges and `E_00` is finite.
    pub fn is_centered_regime(&self) -> bool {
        self.dh() < 1.5
    }

    /// `(d+1)H < 3/2`: the hypothesis of the `ε^{1/2}` rate bound.
    pub fn is_rate_regime(&self) -> bool {
        (self.d as f64 + 1.0) * self.hurst < 1.5
    }

    pub fn flags(&self) -> RegimeFlags {
        RegimeFlags {
            strong: self.is_strong(),
            critical: self.is_critical(),
            centered: self.is_centered_regime(),
            rate: self.is_rate_regime(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub strong: bool,
    pub critical: bool,
    pub centered: bool,
    pub rate: bool,
}

/// Uniform grid `t_k = kT/n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n: usize,
    pub horizon: f64,
}

impl TimeGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("grid needs n >= 1 steps".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon T must be positive, got {horizon}"
            )));
        }
        Ok(TimeGrid { n, horizon })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.n {
            self.horizon
        } else {
            k as f64 * self.horizon / self.n as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.point(k)).collect()
    }

    /// Rejects an explicit list of times unless it is the uniform grid on `[0, T]`.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("grid needs at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::Domain("grid must start at t=0".into()));
        }
        let n = points.len() - 1;
        let grid = TimeGrid::new(n, points[n])?;
        let tol = 1e-9 * grid.step();
        for (k, &t) in points.iter().enumerate() {
            if (t - grid.point(k)).abs() > tol {
                return Err(Error::Domain(format!(
                    "non-uniform grids are not supported (t_{k} = {t}, expected {})",
                    grid.point(k)
                )));
            }
        }
        Ok(grid)
    }
}
