//! Closed-form kernels of the moment integrals over time quadruples
//! `τ = (s, t, s′, t′)`, `0 < s < t < T`, `0 < s′ < t′ < T`:
//!
//! * `λ = (t−s)^{2H}`, `ρ = (t′−s′)^{2H}` (increment variances),
//! * `μ = ½[|s−t′|^{2H} + |s′−t|^{2H} − |t−t′|^{2H} − |s−s′|^{2H}]` (increment covariance),
//! * `δ = λρ − μ²`.
//!
//! With `s ≤ s′` every quadruple falls in one of three orderings, parametrized by
//! gaps `(a, b, c)`:
//!
//! * `T1`: `s < s′ < t < t′`, `a = s′−s`, `b = t−s′`, `c = t′−t`,
//! * `T2`: `s < s′ < t′ < t`, `a = s′−s`, `b = t′−s′`, `c = t−t′`,
//! * `T3`: `s < t < s′ < t′`, `a = t−s`, `b = s′−t`, `c = t′−s′`.
//!
//! `δ` degenerates along `a, c → 0` in `T1`/`T2` (nearly identical increments); there
//! it is evaluated through `v = Var(X−Y)` and `w = λ−ρ`, both computed from power
//! increments, as `δ = (2(λ+ρ)v − v² − w²)/4`, which keeps full relative accuracy.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::power_increment;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    T1,
    T2,
    T3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::T1, Region::T2, Region::T3];

    pub fn name(self) -> &'static str {
        match self {
            Region::T1 => "T1",
            Region::T2 => "T2",
            Region::T3 => "T3",
        }
    }
}

/// A time quadruple, optionally tagged with the subregion and gaps it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeQuad {
    pub s: f64,
    pub t: f64,
    pub s2: f64,
    pub t2: f64,
    pub subregion: Option<Region>,
    pub abc: Option<[f64; 3]>,
}

impl TimeQuad {
    pub fn new(s: f64, t: f64, s2: f64, t2: f64) -> Result<Self> {
        let tau = TimeQuad { s, t, s2, t2, subregion: None, abc: None };
        tau.validate()?;
        Ok(tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0 && self.s2 >= 0.0) {
            return Err(Error::Domain(format!("times must be nonnegative: {self:?}")));
        }
        if !(self.s < self.t && self.s2 < self.t2) {
            return Err(Error::Domain(format!(
                "degenerate increment: need s < t and s2 < t2, got {:?}",
                self.as_array()
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s, self.t, self.s2, self.t2]
    }

    /// Ordering and gaps `(a, b, c)` with `(s,t)` and `(s′,t′)` exchanged when
    /// `s′ < s`; the flag reports the exchange (which swaps `λ` and `ρ`).
    pub fn classify(&self) -> (Region, [f64; 3], bool) {
        let swapped = self.s2 < self.s || (self.s2 == self.s && self.t2 < self.t);
        let (s, t, s2, t2) = if swapped {
            (self.s2, self.t2, self.s, self.t)
        } else {
            (self.s, self.t, self.s2, self.t2)
        };
        if t <= s2 {
            (Region::T3, [t - s, s2 - t, t2 - s2], swapped)
        } else if t <= t2 {
            (Region::T1, [s2 - s, t - s2, t2 - t], swapped)
        } else {
            (Region::T2, [s2 - s, t2 - s2, t - t2], swapped)
        }
    }

    /// Smallest distance between any two of the four times.
    pub fn min_gap(&self) -> f64 {
        let p = self.as_array();
        let mut m = f64::INFINITY;
        for i in 0..4 {
            for j in i + 1..4 {
                m = m.min((p[i] - p[j]).abs());
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValues {
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
    pub delta: f64,
}

#[inline]
fn pw(x: f64, two_h: f64) -> f64 {
    x.powf(two_h)
}

/// Kernels at gaps `(a, b, c)` of `region`, with `λ`, `ρ` the variances of the
/// increments over `[s, t]` and `[s′, t′]` respectively (geometric labeling).
pub fn region_kernels(region: Region, abc: [f64; 3], hurst: f64) -> KernelValues {
    let [a, b, c] = abc;
    let h2 = 2.0 * hurst;
    let g = |x: f64, h: f64| power_increment(x, h, h2);
    match region {
        Region::T1 => {
            let lambda = pw(a + b, h2);
            let rho = pw(b + c, h2);
            let mu = 0.5 * (g(c, a + b) + pw(b, h2) - pw(a, h2));
            let v = pw(a, h2) + pw(c, h2) + g(b, a) - g(b + c, a);
            let w = g(b, a) - g(b, c);
            close_delta(lambda, rho, mu, v, w)
        }
        Region::T2 => {
            let lambda = pw(a + b + c, h2);
            let rho = pw(b, h2);
            let mu = 0.5 * (g(a, b) + g(c, b));
            let v = pw(a, h2) + pw(c, h2) + g(a + b, c) - g(b, c);
            let w = g(b, a + c);
            close_delta(lambda, rho, mu, v, w)
        }
        Region::T3 => {
            let lambda = pw(a, h2);
            let rho = pw(c, h2);
            // symmetric in (a, c); the smaller gap as inner increment avoids cancellation
            let (outer, inner) = if a < c { (c, a) } else { (a, c) };
            let mu = 0.5 * (g(b + outer, inner) - g(b, inner));
            KernelValues { lambda, rho, mu, delta: lambda * rho - mu * mu }
        }
    }
}

#[inline]
fn close_delta(lambda: f64, rho: f64, mu: f64, v: f64, w: f64) -> KernelValues {
    let sum = lambda + rho;
    let delta = if v <= 0.5 * sum {
        0.25 * (2.0 * sum * v - v * v - w * w)
    } else {
        lambda * rho - mu * mu
    };
    KernelValues { lambda, rho, mu, delta }
}

/// Kernels with the labeling used by the integrability bounds, where on `T2` the inner
/// increment is called `λ₂ = b^{2H}` and the outer one `ρ₂ = (a+b+c)^{2H}`.
pub fn bound_kernels(region: Region, abc: [f64; 3], hurst: f64) -> KernelValues {
    let kv = region_kernels(region, abc, hurst);
    match region {
        Region::T2 => KernelValues { lambda: kv.rho, rho: kv.lambda, ..kv },
        _ => kv,
    }
}

/// `λ, ρ, μ, δ` at `tau`.
pub fn kernel_values(tau: &TimeQuad, hurst: f64) -> Result<KernelValues> {
    tau.validate()?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!("Hurst exponent must lie in (0,1), got {hurst}")));
    }
    let (region, abc, swapped) = tau.classify();
    let kv = region_kernels(region, abc, hurst);
    Ok(if swapped { KernelValues { lambda: kv.rho, rho: kv.lambda, ..kv } } else { kv })
}

/// `μ` evaluated literally from the four absolute differences.
pub fn mu_direct(tau: &TimeQuad, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let TimeQuad { s, t, s2, t2, .. } = *tau;
    0.5 * (pw((s - t2).abs(), h2) + pw((s2 - t).abs(), h2) - pw((t - t2).abs(), h2) - pw((s - s2).abs(), h2))
}

/// Maps gaps `(a, b, c)` and base time `s` to the quadruple of `region`:
/// `T1 → (s, s+a+b, s+a, s+a+b+c)`, `T2 → (s, s+a+b+c, s+a, s+a+b)`,
/// `T3 → (s, s+a, s+a+b, s+a+b+c)`.
pub fn subregion_map(abc: [f64; 3], region: Region, s_base: f64, horizon: f64) -> Result<TimeQuad> {
    let [a, b, c] = abc;
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::Domain(format!("gaps must be positive, got {abc:?}")));
    }
    if !(s_base >= 0.0) || s_base + a + b + c >= horizon {
        return Err(Error::Domain(format!(
            "s + a + b + c = {} must be below T = {horizon}",
            s_base + a + b + c
        )));
    }
    let [s, t, s2, t2] = region_corners(abc, region, s_base);
    Ok(TimeQuad { s, t, s2, t2, subregion: Some(region), abc: Some(abc) })
}

/// Unchecked `(s, t, s′, t′)` for the gaps of one ordering.
pub fn region_corners(abc: [f64; 3], region: Region, s: f64) -> [f64; 4] {
    let [a, b, c] = abc;
    match region {
        Region::T1 => [s, s + a + b, s + a, s + a + b + c],
        Region::T2 => [s, s + a + b + c, s + a, s + a + b],
        Region::T3 => [s, s + a, s + a + b, s + a + b + c],
    }
}

/// Powers `x^{2H}` of the six gap sums of one `(a, b, c)`, shared by all three
/// orderings. Kernel values come from plain differences of these powers and fall
/// back to [`region_kernels`] where the differences cancel.
#[derive(Debug, Clone, Copy)]
pub struct GapPowers {
    abc: [f64; 3],
    hurst: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    fab: f64,
    fbc: f64,
    fabc: f64,
}

const CANCELLATION_GUARD: f64 = 1e-3;

impl GapPowers {
    pub fn new(abc: [f64; 3], hurst: f64) -> Self {
        let [a, b, c] = abc;
        let h2 = 2.0 * hurst;
        GapPowers {
            abc,
            hurst,
            fa: pw(a, h2),
            fb: pw(b, h2),
            fc: pw(c, h2),
            fab: pw(a + b, h2),
            fbc: pw(b + c, h2),
            fabc: pw(a + b + c, h2),
        }
    }

    pub fn region(&self, region: Region) -> KernelValues {
        let (lambda, rho, mu) = match region {
            Region::T1 => (self.fab, self.fbc, 0.5 * (self.fabc + self.fb - self.fc - self.fa)),
            Region::T2 => (self.fabc, self.fb, 0.5 * (self.fab + self.fbc - self.fa - self.fc)),
            Region::T3 => (self.fa, self.fc, 0.5 * (self.fabc + self.fb - self.fbc - self.fab)),
        };
        let delta = lambda * rho - mu * mu;
        if delta < CANCELLATION_GUARD * lambda * rho || mu.abs() < CANCELLATION_GUARD * self.fabc {
            return region_kernels(region, self.abc, self.hurst);
        }
        KernelValues { lambda, rho, mu, delta }
    }
}

/// `(2π)^{−d}`.
#[inline]
pub fn two_pi_pow(d: usize) -> f64 {
    (2.0 * PI).powi(-(d as i32))
}

/// `x^{−d/2}` for integer `d`.
#[inline]
pub fn inv_pow_half(x: f64, d: usize) -> f64 {
    let half = (d / 2) as i32;
    let base = x.powi(-half);
    if d % 2 == 1 {
        base / x.sqrt()
    } else {
        base
    }
}

/// Bracket `((λ+ε)(ρ+γ)−μ²)^{−d/2} − ((λ+ε)(ρ+γ))^{−d/2}` without the `(2π)^{−d}`
/// factor, or `None` if the shifted determinant is not positive.
#[inline]
pub fn e_bracket(kv: &KernelValues, eps: f64, gamma: f64, d: usize) -> Option<f64> {
    let p = (kv.lambda + eps) * (kv.rho + gamma);
    let det = kv.delta + eps * kv.rho + gamma * kv.lambda + eps * gamma;
    if !(det > 0.0) {
        return None;
    }
    let y = kv.mu * kv.mu / p;
    let log_ratio = if y < 0.5 { (-y).ln_1p() } else { (det / p).ln() };
    Some(inv_pow_half(p, d) * (-(d as f64) * 0.5 * log_ratio).exp_m1())
}

/// `((λ+ε)(ρ+ε)−μ²)^{−d/2}` without the `(2π)^{−d}` factor.
#[inline]
pub fn second_moment_bracket(kv: &KernelValues, eps: f64, d: usize) -> Option<f64> {
    let det = kv.delta + eps * (kv.rho + kv.lambda) + eps * eps;
    if !(det > 0.0) {
        return None;
    }
    Some(inv_pow_half(det, d))
}

/// Integrand of the covariance integral `E_{εγ}` at `tau`.
pub fn e_integrand(tau: &TimeQuad, eps: f64, gamma: f64, params: &ModelParams) -> Result<f64> {
    if !(eps >= 0.0 && gamma >= 0.0) {
        return Err(Error::Domain(format!("shifts must be nonnegative, got ({eps}, {gamma})")));
    }
    let kv = kernel_values(tau, params.hurst)?;
    e_bracket(&kv, eps, gamma, params.d)
        .map(|v| two_pi_pow(params.d) * v)
        .ok_or_else(|| singular(&kv, tau, eps, gamma))
}

/// Integrand of `E(L_ε²)` at `tau`.
pub fn second_moment_integrand(tau: &TimeQuad, eps: f64, params: &ModelParams) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    let kv = kernel_values(tau, params.hurst)?;
    second_moment_bracket(&kv, eps, params.d)
        .map(|v| two_pi_pow(params.d) * v)
        .ok_or_else(|| singular(&kv, tau, eps, eps))
}

fn singular(kv: &KernelValues, tau: &TimeQuad, eps: f64, gamma: f64) -> Error {
    Error::Singularity {
        det: (kv.lambda + eps) * (kv.rho + gamma) - kv.mu * kv.mu,
        tau: tau.as_array(),
    }
}
