//! Reference values computed by methods independent of the fast paths.
//!
//! The brute-force covariance integral works directly on time quadruples: a
//! midpoint rule over the `n⁴` grid of `[0,T]⁴` restricted to `s < t`, `s′ < t′`,
//! with the kernels taken from the covariance bilinear form rather than the
//! gap formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::increment_covariance;
use crate::numeric::KahanSum;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    pub value: f64,
    /// `|I_n − I_{n/2}|`.
    pub error: f64,
    pub n: usize,
}

// (s, t, weight): square cells off the diagonal, the upper triangle's centroid on it.
fn intervals(n: usize, horizon: f64) -> Vec<(f64, f64, f64)> {
    let h = horizon / n as f64;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let lo = i as f64 * h;
        out.push((lo + h / 3.0, lo + 2.0 * h / 3.0, 0.5 * h * h));
        for j in i + 1..n {
            out.push(((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, h * h));
        }
    }
    out
}

/// `E_{εγ}` by the midpoint rule on an `n⁴` grid.
pub fn brute_force_e_grid(eps: f64, gamma: f64, params: &ModelParams, n: usize) -> Result<f64> {
    params.validate()?;
    if !(eps > 0.0 && gamma > 0.0) {
        return Err(Error::Domain("brute force needs positive shifts".into()));
    }
    if n < 2 {
        return Err(Error::Config("grid needs n >= 2".into()));
    }
    let cells = intervals(n, params.horizon);
    let half_d = params.d as f64 / 2.0;
    let norm = (2.0 * std::f64::consts::PI).powf(-(params.d as f64));
    let hurst = params.hurst;
    let mut total = KahanSum::default();
    for &(s, t, w) in &cells {
        let lambda = increment_covariance(s, t, s, t, hurst)?;
        let mut row = KahanSum::default();
        for &(s2, t2, w2) in &cells {
            let rho = increment_covariance(s2, t2, s2, t2, hurst)?;
            let mu = increment_covariance(s, t, s2, t2, hurst)?;
            let p = (lambda + eps) * (rho + gamma);
            row.add(w2 * ((p - mu * mu).powf(-half_d) - p.powf(-half_d)));
        }
        total.add(w * row.sum());
    }
    Ok(norm * total.sum())
}

/// Grid `n` with the half-resolution difference as error bar.
pub fn brute_force_e(eps: f64, gamma: f64, params: &ModelParams, n: usize) -> Result<BruteForce> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!("grid size must be even and >= 4, got {n}")));
    }
    let fine = brute_force_e_grid(eps, gamma, params, n)?;
    let coarse = brute_force_e_grid(eps, gamma, params, n / 2)?;
    Ok(BruteForce { value: fine, error: (fine - coarse).abs(), n })
}
