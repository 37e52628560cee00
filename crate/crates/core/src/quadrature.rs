//! The covariance integrals `E_{εγ}` and the second moment `E(L_ε²)` as
//! weighted integrals over the gap simplex `Δ_T = {a, b, c > 0, a+b+c < T}`.
//!
//! Integrating out the base time of a quadruple leaves the weight `T−a−b−c`;
//! the half with `s′ < s` is the mirror image with the shifts exchanged, so each
//! ordering contributes `(T−a−b−c)[e(ε,γ) + e(γ,ε)]`.
//!
//! The simplex is mapped to the unit cube through
//! `a = r·x`, `b = r(1−x)·y`, `c = r(1−x)(1−y)` (Jacobian `r²(1−x)`), with
//! `r = T·p^κ` and `x, y = q^κ/(q^κ + (1−q)^κ)`. The radial power absorbs the
//! corner singularity, and the symmetric map in `x, y` clusters nodes at the faces
//! and edges where `δ` degenerates.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cubature::{integrate_cube, CubatureConfig};
use crate::error::{Error, Result};
use crate::kernels::{e_bracket, region_corners, second_moment_bracket, two_pi_pow, GapPowers, KernelValues, Region};
use crate::mean::mean_local_time;
use crate::numeric::{linear_fit, LinearFit};
use crate::params::{ModelParams, CRITICAL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub max_cells: usize,
    pub softening_exponent: f64,
    /// Gaps below this value are cut out of the domain; zero integrates the full simplex.
    pub boundary_margin: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { rel_tol: 1e-6, max_cells: 2_000_000, softening_exponent: 3.0, boundary_margin: 0.0 }
    }
}

impl QuadConfig {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Config(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        if self.max_cells < 1 {
            return Err(Error::Config("max_cells must be at least 1".into()));
        }
        if !(self.softening_exponent >= 1.0 && self.softening_exponent.is_finite()) {
            return Err(Error::Config(format!(
                "softening_exponent must be >= 1, got {}",
                self.softening_exponent
            )));
        }
        if !(self.boundary_margin >= 0.0 && 3.0 * self.boundary_margin < horizon) {
            return Err(Error::Config(format!(
                "boundary_margin must lie in [0, T/3), got {}",
                self.boundary_margin
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub cells: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Contribution of each ordering, both mirror halves included; sums to `value`.
    pub region_breakdown: BTreeMap<Region, f64>,
    pub elapsed_ms: u64,
}

/// One term `coef · E_{εγ}` of a linear combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub eps: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
enum Kernel {
    Covariance(Vec<Term>),
    SecondMoment(f64),
}

struct SimplexMap {
    reach: f64,
    margin: f64,
    kappa: f64,
}

struct MappedPoint {
    abc: [f64; 3],
    weight: f64,
}

impl SimplexMap {
    fn new(params: &ModelParams, cfg: &QuadConfig) -> Self {
        SimplexMap {
            reach: params.horizon - 3.0 * cfg.boundary_margin,
            margin: cfg.boundary_margin,
            kappa: cfg.softening_exponent,
        }
    }

    // Returns (φ(u), 1−φ(u), φ′(u)).
    fn soften(&self, u: f64) -> (f64, f64, f64) {
        let k = self.kappa;
        if k == 1.0 {
            return (u, 1.0 - u, 1.0);
        }
        let lo = u.powf(k);
        let hi = (1.0 - u).powf(k);
        let s = lo + hi;
        let deriv = k * lo / u * hi / (1.0 - u) / (s * s);
        (lo / s, hi / s, deriv)
    }

    fn map(&self, u: &[f64; 3]) -> MappedPoint {
        let k = self.kappa;
        let r = self.reach * u[0].powf(k);
        let dr = self.reach * k * u[0].powf(k - 1.0);
        let (x, x_rest, dx) = self.soften(u[1]);
        let (y, y_rest, dy) = self.soften(u[2]);
        let tail = r * x_rest;
        let abc = [self.margin + r * x, self.margin + tail * y, self.margin + tail * y_rest];
        let weight = (self.reach - r) * r * r * x_rest * dr * dx * dy;
        MappedPoint { abc, weight }
    }
}

fn region_value(kernel: &Kernel, kv: &KernelValues, d: usize) -> Option<f64> {
    match kernel {
        Kernel::Covariance(terms) => {
            let mut acc = 0.0;
            for t in terms {
                acc += t.coef * (e_bracket(kv, t.eps, t.gamma, d)? + e_bracket(kv, t.gamma, t.eps, d)?);
            }
            Some(acc)
        }
        Kernel::SecondMoment(eps) => Some(2.0 * second_moment_bracket(kv, *eps, d)?),
    }
}

fn integrate(kernel: Kernel, params: &ModelParams, cfg: &QuadConfig) -> Result<QuadResult> {
    params.validate()?;
    cfg.validate(params.horizon)?;
    let start = Instant::now();
    let map = SimplexMap::new(params, cfg);
    let norm = two_pi_pow(params.d);
    let d = params.d;
    let hurst = params.hurst;
    let f = |u: &[f64; 3]| -> Result<[f64; 3]> {
        let pt = map.map(u);
        let powers = GapPowers::new(pt.abc, hurst);
        let mut out = [0.0; 3];
        for (slot, region) in out.iter_mut().zip(Region::ALL) {
            let kv = powers.region(region);
            let v = region_value(&kernel, &kv, d).filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Singularity { det: kv.delta, tau: region_corners(pt.abc, region, 0.0) }
            })?;
            *slot = norm * pt.weight * v;
        }
        Ok(out)
    };
    let cube = CubatureConfig { rel_tol: cfg.rel_tol, abs_tol: 0.0, max_cells: cfg.max_cells, initial_divisions: 4 };
    let r = integrate_cube(&f, &cube)?;
    let region_breakdown = Region::ALL.iter().copied().zip(r.components).collect();
    Ok(QuadResult {
        value: r.value,
        abs_error_estimate: r.abs_error,
        cells: r.cells,
        evaluations: r.evaluations,
        converged: r.converged,
        region_breakdown,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

fn check_shift(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be a nonnegative finite number, got {v}")))
    }
}

/// `Cov(L_ε, L_γ)`.
pub fn compute_e(eps: f64, gamma: f64, params: &ModelParams, cfg: &QuadConfig) -> Result<QuadResult> {
    compute_combination(&[Term { coef: 1.0, eps, gamma }], params, cfg)
}

/// `Σ coef·E_{εγ}`, integrated as a single integrand so that cancellations
/// between terms happen pointwise.
pub fn compute_combination(terms: &[Term], params: &ModelParams, cfg: &QuadConfig) -> Result<QuadResult> {
    if terms.is_empty() {
        return Err(Error::Config("empty combination".into()));
    }
    for t in terms {
        check_shift("eps", t.eps)?;
        check_shift("gamma", t.gamma)?;
        if !t.coef.is_finite() {
            return Err(Error::Domain(format!("coefficient must be finite, got {}", t.coef)));
        }
        if t.eps == 0.0 && t.gamma == 0.0 && !params.is_centered_regime() && cfg.boundary_margin == 0.0 {
            return Err(Error::Divergence(format!(
                "E_00 is infinite for dH = {} >= 3/2; use divergence_probe",
                params.dh()
            )));
        }
    }
    integrate(Kernel::Covariance(terms.to_vec()), params, cfg)
}

/// `E(L_ε²)`.
pub fn compute_second_moment(eps: f64, params: &ModelParams, cfg: &QuadConfig) -> Result<QuadResult> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    integrate(Kernel::SecondMoment(eps), params, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub eps: f64,
    pub delta: f64,
    pub error: f64,
    pub cells: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    /// Least-squares fit of `ln Δ` against `ln ε`.
    pub fit: LinearFit,
    /// `max Δ(ε)/ε^{1/2}` over the ladder.
    pub k_empirical: f64,
    /// Max/min of `Δ(ε)/ε^{1/2}` over the last four ladder points.
    pub tail_spread: f64,
    pub all_positive: bool,
    pub decreasing: bool,
    /// Set when `(d+1)H` equals `3/2` to within tolerance.
    pub boundary: bool,
}

/// `Δ(ε) = E_εε − 2E_ε0 + E_00` along a decreasing ladder.
pub fn rate_curve(params: &ModelParams, ladder: &[f64], cfg: &QuadConfig) -> Result<RateCurve> {
    params.validate()?;
    let excess = (params.d as f64 + 1.0) * params.hurst - 1.5;
    if excess > CRITICAL_TOL {
        return Err(Error::Regime(format!(
            "rate requires (d+1)H < 3/2 (equality accepted as a boundary case), got {}",
            excess + 1.5
        )));
    }
    if ladder.len() < 2 || ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config("ladder must be positive and strictly decreasing with at least 2 points".into()));
    }
    let mut points = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let terms = [
            Term { coef: 1.0, eps, gamma: eps },
            Term { coef: -2.0, eps, gamma: 0.0 },
            Term { coef: 1.0, eps: 0.0, gamma: 0.0 },
        ];
        let r = compute_combination(&terms, params, cfg)?;
        points.push(RatePoint { eps, delta: r.value, error: r.abs_error_estimate, cells: r.cells, converged: r.converged });
    }
    let all_positive = points.iter().all(|p| p.delta > 0.0);
    let decreasing = points.windows(2).all(|w| w[1].delta < w[0].delta);
    let xs: Vec<f64> = points.iter().map(|p| p.eps.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.delta.max(f64::MIN_POSITIVE).ln()).collect();
    let fit = linear_fit(&xs, &ys);
    let scaled: Vec<f64> = points.iter().map(|p| p.delta / p.eps.sqrt()).collect();
    let k_empirical = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail = &scaled[scaled.len().saturating_sub(4)..];
    let tail_spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / tail.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RateCurve {
        points,
        fit,
        k_empirical,
        tail_spread,
        all_positive,
        decreasing,
        boundary: excess.abs() <= CRITICAL_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Stabilizing,
    Diverging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub margin: f64,
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub levels: Vec<ProbeLevel>,
    /// `I_k − I_{k−1}`.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub increment_ratios: Vec<f64>,
    /// `I_k / I_{k−1}`.
    pub value_ratios: Vec<f64>,
    pub growth: Growth,
    pub threshold: f64,
}

/// Tolerance for probe levels; the verdict needs only a few digits.
pub const PROBE_REL_TOL: f64 = 1e-4;

/// Floors `T·2^{−k}`, `k = 3..=11`.
pub fn default_probe_schedule(horizon: f64) -> Vec<f64> {
    (3..=11).map(|k| horizon * 0.5f64.powi(k)).collect()
}

/// Partial integrals of `E_00` over `{a, b, c ≥ η}` along a decreasing schedule
/// of gap floors `η`. A finite integral has geometrically shrinking increments;
/// a divergent one has increments that stay level (logarithmic) or grow (power).
pub fn divergence_probe(params: &ModelParams, schedule: &[f64], cfg: &QuadConfig, margin: f64) -> Result<DivergenceReport> {
    params.validate()?;
    if schedule.len() < 3 || schedule.windows(2).any(|w| !(w[1] < w[0])) || schedule.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Config("schedule must hold at least 3 positive, strictly decreasing floors".into()));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::Config(format!("margin must lie in (0, 1), got {margin}")));
    }
    let mut levels = Vec::with_capacity(schedule.len());
    for &m in schedule {
        let level_cfg = QuadConfig { boundary_margin: m, ..*cfg };
        let r = compute_e(0.0, 0.0, params, &level_cfg)?;
        levels.push(ProbeLevel { margin: m, value: r.value, error: r.abs_error_estimate, converged: r.converged });
    }
    let increments: Vec<f64> = levels.windows(2).map(|w| w[1].value - w[0].value).collect();
    let increment_ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let value_ratios: Vec<f64> = levels.windows(2).map(|w| w[1].value / w[0].value).collect();
    let threshold = 1.0 - margin;
    let last = increment_ratios.len();
    let tail = &increment_ratios[last.saturating_sub(2)..];
    let growth = if tail.iter().all(|&r| r >= threshold) { Growth::Diverging } else { Growth::Stabilizing };
    Ok(DivergenceReport { levels, increments, increment_ratios, value_ratios, growth, threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    pub points: Vec<(f64, f64)>,
    /// Fit of the mean against `ln(1/ε)`.
    pub fit: LinearFit,
}

/// `E(L_ε)` along a ladder in the logarithmic case `H = 1/d`.
pub fn mean_divergence_curve(params: &ModelParams, ladder: &[f64]) -> Result<MeanCurve> {
    params.validate()?;
    if !params.is_critical() {
        return Err(Error::Regime(format!("logarithmic divergence needs H = 1/d, got dH = {}", params.dh())));
    }
    if ladder.len() < 2 {
        return Err(Error::Config("ladder needs at least 2 points".into()));
    }
    let points = ladder
        .iter()
        .map(|&e| mean_local_time(params, e).map(|m| (e, m)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| -p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(MeanCurve { fit: linear_fit(&xs, &ys), points })
}
