//! The mean `E(L_ε) = (2π)^{−d/2} ∫₀ᵀ (T−u)(u^{2H}+ε)^{−d/2} du` and its leading
//! small-`ε` behavior.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, CRITICAL_TOL};
use crate::quad1d::{geometric_breaks, integrate, Tolerance};

/// Target relative accuracy of the 1D mean integrals.
const MEAN_REL_TOL: f64 = 1e-12;

/// `E(L_ε)` by adaptive 1D quadrature (relative error well below `1e-10`).
pub fn mean_local_time(params: &ModelParams, eps: f64) -> Result<f64> {
    params.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    let d = params.d as f64;
    let h2 = 2.0 * params.hurst;
    let t = params.horizon;
    // The kernel (u^{2H}+ε)^{−d/2} changes scale at u ≈ ε^{1/(2H)}.
    let scale = eps.powf(1.0 / h2);
    let breaks = geometric_breaks(scale, t, 4.0);
    let q = integrate(
        |u| (t - u) * (u.powf(h2) + eps).powf(-d / 2.0),
        0.0,
        t,
        &breaks,
        Tolerance { abs: 0.0, rel: MEAN_REL_TOL, max_intervals: 4000 },
    )?;
    if !q.converged {
        return Err(Error::NonConvergence(format!(
            "mean integral at eps={eps}: error {:e}",
            q.abs_error
        )));
    }
    Ok((2.0 * PI).powf(-d / 2.0) * q.value)
}

/// `C_{H,d} = (2π)^{−d/2} ∫₀^∞ (1+v^{2H})^{−d/2} dv`, finite for `dH > 1`. Cached.
pub fn c_hd(d: usize, hurst: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let key = (d, hurst.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache poisoned").get(&key) {
        return Ok(*v);
    }
    let v = c_hd_uncached(d, hurst)?;
    cache.lock().expect("cache poisoned").insert(key, v);
    Ok(v)
}

fn c_hd_uncached(d: usize, hurst: f64) -> Result<f64> {
    let dh = d as f64 * hurst;
    if !(dh > 1.0) {
        return Err(Error::Regime(format!("C_(H,d) needs dH > 1, got dH = {dh}")));
    }
    let half_d = d as f64 / 2.0;
    let h2 = 2.0 * hurst;
    let tol = Tolerance { abs: 0.0, rel: MEAN_REL_TOL, max_intervals: 4000 };
    let head = integrate(|v| (1.0 + v.powf(h2)).powf(-half_d), 0.0, 1.0, &[], tol)?;
    // Tail v = 1/w, w = z^k with k = 1/(dH−1): the integrand becomes k(z^{2Hk}+1)^{−d/2}.
    let k = 1.0 / (dh - 1.0);
    let tail = integrate(|z| k * (z.powf(h2 * k) + 1.0).powf(-half_d), 0.0, 1.0, &[], tol)?;
    if !(head.converged && tail.converged) {
        return Err(Error::NonConvergence("C_(H,d) integral".into()));
    }
    Ok((2.0 * PI).powf(-half_d) * (head.value + tail.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanRegime {
    /// `H = 1/d`: `E(L_ε) ≈ T/(2H(2π)^{d/2}) ln(1/ε)`.
    Log,
    /// `1/d < H < 3/(2d)`: `E(L_ε) ≈ T C_{H,d} ε^{−d/2+1/(2H)}`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanAsymptotic {
    pub regime: MeanRegime,
    /// Factor in front of `ln(1/ε)` or `ε^{exponent}`, including `T`.
    pub coefficient: f64,
    /// Power of `ε` (0 for the log regime).
    pub exponent: f64,
    pub value: f64,
}

pub fn mean_regime(params: &ModelParams) -> Result<MeanRegime> {
    let d = params.d as f64;
    let h = params.hurst;
    if (h - 1.0 / d).abs() <= CRITICAL_TOL {
        Ok(MeanRegime::Log)
    } else if h > 1.0 / d && h < 1.5 / d {
        Ok(MeanRegime::Power)
    } else {
        Err(Error::Regime(format!(
            "mean asymptotics need 1/d <= H < 3/(2d); got d = {}, H = {h}",
            params.d
        )))
    }
}

/// Leading term of `E(L_ε)` as `ε → 0`.
pub fn mean_asymptotic(params: &ModelParams, eps: f64) -> Result<MeanAsymptotic> {
    params.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    let d = params.d as f64;
    let h = params.hurst;
    let t = params.horizon;
    Ok(match mean_regime(params)? {
        MeanRegime::Log => {
            let coefficient = t / (2.0 * h * (2.0 * PI).powf(d / 2.0));
            MeanAsymptotic { regime: MeanRegime::Log, coefficient, exponent: 0.0, value: coefficient * (1.0 / eps).ln() }
        }
        MeanRegime::Power => {
            let coefficient = t * c_hd(params.d, h)?;
            let exponent = -d / 2.0 + 1.0 / (2.0 * h);
            MeanAsymptotic { regime: MeanRegime::Power, coefficient, exponent, value: coefficient * eps.powf(exponent) }
        }
    })
}
