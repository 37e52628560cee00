//! Pathwise estimation of the approximated self-intersection local time
//! `L_ε = ∫₀ᵀ dt ∫₀ᵗ ds p_ε(B_t − B_s)`, its centered version and Edwards weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::Path;
use crate::numeric::KahanSum;

/// Bound applied to the Edwards exponent `−g·L` before exponentiation.
pub const EXPONENT_CLAMP: f64 = 700.0;

fn check_eps(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")))
    }
}

/// `p_ε(x) = (2πε)^{−d/2} exp(−|x|²/(2ε))`.
pub fn heat_kernel(x: &[f64], epsilon: f64, d: usize) -> Result<f64> {
    check_eps(epsilon)?;
    if x.len() != d {
        return Err(Error::DimensionMismatch { path: x.len(), requested: d });
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok(heat_norm(epsilon, d) * (-r2 / (2.0 * epsilon)).exp())
}

#[inline]
pub(crate) fn heat_norm(epsilon: f64, d: usize) -> f64 {
    (2.0 * std::f64::consts::PI * epsilon).powf(-(d as f64) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub epsilon: f64,
    /// Discretized `L_ε`.
    pub value: f64,
    /// `value − mean_reference`.
    pub centered: f64,
    pub mean_reference: f64,
    pub discretization_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdwardsWeight {
    pub g: f64,
    pub weight: f64,
    pub centered_flag: bool,
    /// The exponent hit the `±700` clamp.
    pub saturated: bool,
}

/// Cell sum over the triangle `{s < t}`: `h² [Σ_{0≤j<i≤n−1} p_ε(x_i − x_j) + (n/2)·p_ε(0)]`.
///
/// Each off-diagonal cell is evaluated at its lower-left corner; the diagonal cells
/// are half squares, where the kernel takes its value `p_ε(0)`. For the mean this is
/// the trapezoid rule in the lag `t − s`.
///
/// `points` holds at least `n_used` rows of `d` coordinates; only the first `n_used`
/// rows enter the sum. Rows are reduced in a fixed order with compensation.
pub fn triangle_sum(points: &[f64], d: usize, n_used: usize, step: f64, epsilon: f64) -> f64 {
    let inv = 1.0 / (2.0 * epsilon);
    let mut total = KahanSum::default();
    for i in 1..n_used {
        let xi = &points[i * d..(i + 1) * d];
        let mut row = KahanSum::default();
        for j in 0..i {
            let xj = &points[j * d..(j + 1) * d];
            let mut r2 = 0.0;
            for c in 0..d {
                let dx = xi[c] - xj[c];
                r2 += dx * dx;
            }
            row.add((-r2 * inv).exp());
        }
        total.add(row.sum());
    }
    total.add(0.5 * n_used as f64);
    total.sum() * step * step * heat_norm(epsilon, d)
}

/// Discretized `L_ε` of a path on its own grid; the final grid point is not used.
pub fn local_time_approx(path: &Path, epsilon: f64) -> Result<LocalTimeEstimate> {
    local_time_approx_dim(path, epsilon, path.d())
}

/// As [`local_time_approx`], checking the kernel dimension against the path.
pub fn local_time_approx_dim(path: &Path, epsilon: f64, d: usize) -> Result<LocalTimeEstimate> {
    check_eps(epsilon)?;
    if path.d() != d {
        return Err(Error::DimensionMismatch { path: path.d(), requested: d });
    }
    let n = path.grid.n;
    if n < 2 {
        return Err(Error::Domain("local time needs a grid with n >= 2".into()));
    }
    let rows = path.row_major();
    let value = triangle_sum(&rows, d, n, path.grid.step(), epsilon);
    Ok(LocalTimeEstimate {
        epsilon,
        value,
        centered: value,
        mean_reference: 0.0,
        discretization_n: n,
    })
}

/// Recenters an estimate at `mean`.
pub fn center(estimate: &LocalTimeEstimate, mean: f64) -> LocalTimeEstimate {
    LocalTimeEstimate {
        centered: estimate.value - mean,
        mean_reference: mean,
        ..*estimate
    }
}

/// `exp(−g·L)` (or `exp(−g·L_c)` when `use_centered`), exponent clamped to `±700`.
pub fn edwards_weight(estimate: &LocalTimeEstimate, g: f64, use_centered: bool) -> Result<EdwardsWeight> {
    if !(g >= 0.0) {
        return Err(Error::Domain(format!("coupling g must be nonnegative, got {g}")));
    }
    let l = if use_centered { estimate.centered } else { estimate.value };
    let (weight, saturated) = clamped_exp(-g * l);
    Ok(EdwardsWeight { g, weight, centered_flag: use_centered, saturated })
}

/// `exp(x)` with `x` clamped to `[−700, 700]`; the flag reports clamping.
pub fn clamped_exp(x: f64) -> (f64, bool) {
    if x == 0.0 {
        return (1.0, false);
    }
    let c = x.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP);
    (c.exp(), c != x)
}
