//! The verification suite: twelve numbered criteria with pinned tolerances.
//!
//! Each criterion yields a [`CriterionResult`] with its measured values; a failing
//! computation is reported as a failed criterion rather than an error. The fast
//! suite skips the Monte Carlo, rate and divergence criteria.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{capital_xi_sweep, streit_sweep, xi_sweep, BoundReport, CapitalXiEnvelope, XiEnvelope};
use crate::error::{Error, Result};
use crate::fbm::increment_covariance;
use crate::kernels::{kernel_values, mu_direct, Region};
use crate::mc::{run_experiment, with_threads, CenterMode, ExperimentReport, ExperimentSpec};
use crate::mean::{mean_asymptotic, mean_local_time};
use crate::numeric::logspace;
use crate::oracle::brute_force_e;
use crate::params::ModelParams;
use crate::quadrature::{
    compute_e, default_probe_schedule, divergence_probe, mean_divergence_curve, rate_curve, Growth, QuadConfig,
    PROBE_REL_TOL,
};
pub use crate::rng::DEFAULT_SEED;
use crate::sampling::{random_tau, sample_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Fast,
    Full,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Suite::Fast),
            "full" => Ok(Suite::Full),
            other => Err(Error::Config(format!("unknown suite '{other}' (fast|full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub tolerance: String,
    pub summary: String,
    pub measured: Value,
    pub elapsed_ms: u64,
}

impl CriterionResult {
    /// One table row.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<4} {:<34} {} [{}] ({} ms)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.summary,
            self.tolerance,
            self.elapsed_ms
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub suite: Suite,
    pub seed: u64,
    pub results: Vec<CriterionResult>,
    pub passed: bool,
    pub elapsed_ms: u64,
}

struct Outcome {
    passed: bool,
    summary: String,
    measured: Value,
}

fn run(id: u8, name: &str, tolerance: &str, f: impl FnOnce() -> Result<Outcome>) -> CriterionResult {
    let start = Instant::now();
    let outcome = f().unwrap_or_else(|e| Outcome {
        passed: false,
        summary: format!("error: {e}"),
        measured: json!({ "error": e.to_string() }),
    });
    CriterionResult {
        id,
        name: name.into(),
        passed: outcome.passed,
        tolerance: tolerance.into(),
        summary: outcome.summary,
        measured: outcome.measured,
        elapsed_ms: start.elapsed().as_millis() as u64,
    }
}

fn p(d: usize, h: f64) -> ModelParams {
    ModelParams { d, hurst: h, horizon: 1.0 }
}

pub fn mu_identity(seed: u64) -> CriterionResult {
    run(1, "mu identity", "1e-12 relative to sqrt(lambda rho)", || {
        let mut worst = Vec::new();
        let mut passed = true;
        for h in [0.2, 1.0 / 3.0, 0.45, 0.5] {
            let mut max_err = 0.0f64;
            for i in 0..10_000 {
                let tau = random_tau(&mut sample_rng(seed, i, 100), 1.0);
                let bilinear = increment_covariance(tau.s, tau.t, tau.s2, tau.t2, h)?;
                let kv = kernel_values(&tau, h)?;
                let scale = (kv.lambda * kv.rho).sqrt();
                let err = (mu_direct(&tau, h) - bilinear).abs().max((kv.mu - bilinear).abs()) / scale;
                max_err = max_err.max(err);
            }
            passed &= max_err <= 1e-12;
            worst.push(json!({ "H": h, "max_rel_error": max_err }));
        }
        let top = worst.iter().map(|w| w["max_rel_error"].as_f64().unwrap_or(f64::NAN)).fold(0.0, f64::max);
        Ok(Outcome { passed, summary: format!("max rel error {top:.2e}"), measured: json!(worst) })
    })
}

pub fn mean_closed_form() -> CriterionResult {
    run(2, "mean closed form", "1e-6 absolute", || {
        let v = mean_local_time(&p(2, 0.5), 0.1)?;
        let want = (1.1 * 11f64.ln() - 1.0) / (2.0 * PI);
        Ok(Outcome {
            passed: (v - want).abs() <= 1e-6,
            summary: format!("{v:.9} vs {want:.9}"),
            measured: json!({ "value": v, "closed_form": want }),
        })
    })
}

pub fn log_divergence_slope() -> CriterionResult {
    run(3, "log-divergence coefficient", "5% relative", || {
        let ladder = logspace(-8.0, -4.0, 9);
        let cases = [(2usize, 0.5, 1.0 / (2.0 * PI)), (3, 1.0 / 3.0, 1.0 / ((2.0 / 3.0) * (2.0 * PI).powf(1.5)))];
        let mut measured = Vec::new();
        let mut passed = true;
        let mut parts = Vec::new();
        for (d, h, want) in cases {
            let curve = mean_divergence_curve(&p(d, h), &ladder)?;
            let rel = (curve.fit.slope / want - 1.0).abs();
            passed &= rel <= 0.05;
            parts.push(format!("d={d}: {:.6} vs {want:.6}", curve.fit.slope));
            measured.push(json!({ "d": d, "H": h, "slope": curve.fit.slope, "expected": want, "rel_error": rel }));
        }
        Ok(Outcome { passed, summary: parts.join(", "), measured: json!(measured) })
    })
}

pub fn power_divergence_ratio() -> CriterionResult {
    run(4, "power-divergence ratio", "ratio in [0.98, 1.02] at eps=1e-8", || {
        let params = p(2, 0.6);
        let asym = mean_asymptotic(&params, 1e-8)?;
        let mean = mean_local_time(&params, 1e-8)?;
        let ratio = mean / asym.value;
        Ok(Outcome {
            passed: (0.98..=1.02).contains(&ratio),
            summary: format!("ratio {ratio:.4}"),
            measured: json!({ "mean": mean, "asymptotic": asym.value, "coefficient": asym.coefficient, "ratio": ratio }),
        })
    })
}

pub fn reduction_oracle() -> CriterionResult {
    run(5, "reduction vs brute-force 4D", "within combined error estimates", || {
        let mut measured = Vec::new();
        let mut passed = true;
        let mut parts = Vec::new();
        for h in [0.4, 0.5] {
            let params = p(2, h);
            let q = compute_e(0.05, 0.05, &params, &QuadConfig::default())?;
            let b = brute_force_e(0.05, 0.05, &params, 24)?;
            let gap = (q.value - b.value).abs();
            let allowed = q.abs_error_estimate + b.error;
            passed &= q.converged && gap <= allowed;
            parts.push(format!("H={h}: |{:.6}-{:.6}|={gap:.1e} <= {allowed:.1e}", q.value, b.value));
            measured.push(json!({
                "H": h, "quadrature": q.value, "quadrature_error": q.abs_error_estimate,
                "brute_force": b.value, "brute_force_error": b.error,
            }));
        }
        Ok(Outcome { passed, summary: parts.join(", "), measured: json!(measured) })
    })
}

/// The Monte Carlo experiments shared by criteria 6, 11 and 12.
#[derive(Debug, Clone)]
pub struct McRuns {
    pub canonical: ExperimentReport,
    pub critical: Vec<ExperimentReport>,
}

pub fn canonical_spec(seed: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(p(2, 0.4), 0.1, 512, 10_000, seed);
    spec.g_list = vec![0.0, 1.0, 5.0, 25.0];
    spec
}

pub const CRITICAL_EPS: [f64; 3] = [0.1, 0.05, 0.025];

pub fn critical_specs(seed: u64) -> Vec<ExperimentSpec> {
    CRITICAL_EPS
        .iter()
        .map(|&eps| {
            let mut spec = ExperimentSpec::new(p(2, 0.5), eps, 512, 4_000, seed);
            spec.g_list = vec![0.1];
            spec.center_mode = CenterMode::QuadratureMean;
            spec
        })
        .collect()
}

pub fn mc_runs(seed: u64, threads: usize) -> Result<McRuns> {
    with_threads(threads, || {
        let canonical = run_experiment(&canonical_spec(seed))?;
        let critical = critical_specs(seed).iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
        Ok(McRuns { canonical, critical })
    })?
}

fn shared(runs: &Result<McRuns>) -> Result<&McRuns> {
    runs.as_ref().map_err(|e| Error::NonConvergence(format!("monte carlo runs failed: {e}")))
}

pub fn mc_cross_validation(runs: &Result<McRuns>) -> CriterionResult {
    run(6, "MC vs quadrature", "3 standard errors", || {
        let runs = shared(runs)?;
        let r = &runs.canonical;
        let var_q = compute_e(r.spec.eps, r.spec.eps, &r.spec.params, &QuadConfig::default())?;
        let (m, v) = (r.mean(), r.variance());
        let z = |e: &crate::mc::McEstimate, target: f64| (e.mean - target) / e.std_error.unwrap_or(f64::NAN);
        let (zm, zv) = (z(m, r.mean_reference), z(v, var_q.value));
        Ok(Outcome {
            passed: m.within(r.mean_reference, 3.0) && v.within(var_q.value, 3.0),
            summary: format!("mean z={zm:.2}, variance z={zv:.2}"),
            measured: json!({
                "mc_mean": m, "quadrature_mean": r.mean_reference,
                "mc_variance": v, "quadrature_variance": var_q.value,
            }),
        })
    })
}

pub fn rate_criterion() -> CriterionResult {
    run(7, "rate eps^(1/2)", "slope >= 0.45, tail spread < 3", || {
        let ladder: Vec<f64> = (2..=10).map(|k| 0.5f64.powi(k)).collect();
        let c = rate_curve(&p(2, 0.5), &ladder, &QuadConfig::default())?;
        Ok(Outcome {
            passed: c.all_positive && c.decreasing && c.fit.slope >= 0.45 && c.tail_spread < 3.0,
            summary: format!("slope {:.3}, spread {:.2}, K {:.4}", c.fit.slope, c.tail_spread, c.k_empirical),
            measured: serde_json::to_value(&c).map_err(|e| Error::Format(e.to_string()))?,
        })
    })
}

pub fn sign_lemma() -> CriterionResult {
    run(8, "sign lemma", "E_ee <= E_e0", || {
        let params = p(2, 0.5);
        let cfg = QuadConfig::default();
        let mut measured = Vec::new();
        let mut passed = true;
        for eps in [0.1, 0.01] {
            let ee = compute_e(eps, eps, &params, &cfg)?.value;
            let e0 = compute_e(eps, 0.0, &params, &cfg)?.value;
            passed &= ee <= e0;
            measured.push(json!({ "eps": eps, "E_ee": ee, "E_e0": e0 }));
        }
        Ok(Outcome { passed, summary: format!("{} checks", measured.len()), measured: json!(measured) })
    })
}

pub fn finiteness_frontier() -> CriterionResult {
    run(9, "finiteness frontier", "d=3,H=0.6 diverging; d=2,H=0.5 stabilizing", || {
        let schedule = default_probe_schedule(1.0);
        let cfg = QuadConfig { rel_tol: PROBE_REL_TOL, ..Default::default() };
        let div = divergence_probe(&p(3, 0.6), &schedule, &cfg, 0.2)?;
        let fin = divergence_probe(&p(2, 0.5), &schedule, &cfg, 0.2)?;
        let last = |r: &crate::quadrature::DivergenceReport| r.increment_ratios.last().copied().unwrap_or(f64::NAN);
        Ok(Outcome {
            passed: div.growth == Growth::Diverging && fin.growth == Growth::Stabilizing,
            summary: format!("last increment ratios {:.3} / {:.3}", last(&div), last(&fin)),
            measured: json!({ "d3_H0.6": div, "d2_H0.5": fin }),
        })
    })
}

fn relative_spread(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

pub fn bound_suites(seed: u64) -> CriterionResult {
    run(10, "bound suites", "finite; seeds agree within 10%", || {
        let streit = streit_sweep()?;
        let mut passed = streit.sup_ratio.is_finite() && streit.sup_ratio <= 2.5;
        let mut rows = vec![json!({ "check": "streit", "sup_ratio": streit.sup_ratio, "arg_sup": streit.arg_sup })];
        let mut failing = Vec::new();
        for (d, h) in [(2usize, 0.45), (3, 0.3)] {
            let params = p(d, h);
            for region in [Region::T2, Region::T3] {
                let pairs: Vec<(BoundReport, BoundReport)> = vec![
                    (xi_sweep(&params, region, XiEnvelope::MuSquared, 10_000, seed)?,
                     xi_sweep(&params, region, XiEnvelope::MuSquared, 10_000, seed + 1)?),
                    (xi_sweep(&params, region, XiEnvelope::Plain, 10_000, seed)?,
                     xi_sweep(&params, region, XiEnvelope::Plain, 10_000, seed + 1)?),
                    (capital_xi_sweep(&params, region, CapitalXiEnvelope::MuSquared, 10_000, seed)?,
                     capital_xi_sweep(&params, region, CapitalXiEnvelope::MuSquared, 10_000, seed + 1)?),
                    (capital_xi_sweep(&params, region, CapitalXiEnvelope::Plain, 10_000, seed)?,
                     capital_xi_sweep(&params, region, CapitalXiEnvelope::Plain, 10_000, seed + 1)?),
                ];
                for (a, b) in pairs {
                    let spread = relative_spread(a.sup_ratio, b.sup_ratio);
                    let ok = a.sup_ratio.is_finite() && b.sup_ratio.is_finite() && spread <= 0.1;
                    if !ok {
                        failing.push(format!("{}(d={d}) {spread:.2}", a.check));
                    }
                    passed &= ok;
                    rows.push(json!({
                        "check": a.check, "d": d, "H": h,
                        "sup_ratio": [a.sup_ratio, b.sup_ratio], "spread": spread, "passed": ok,
                    }));
                }
            }
        }
        let summary = if failing.is_empty() {
            format!("A* {:.3}, all {} sweeps reproducible", streit.sup_ratio, rows.len() - 1)
        } else {
            format!("A* {:.3}, {} of {} sweeps not reproducible: {}", streit.sup_ratio, failing.len(), rows.len() - 1, failing.join(", "))
        };
        Ok(Outcome { passed, summary, measured: json!(rows) })
    })
}

fn overlap(a: &crate::mc::McEstimate, b: &crate::mc::McEstimate) -> bool {
    let (sa, sb) = (3.0 * a.std_error.unwrap_or(f64::NAN), 3.0 * b.std_error.unwrap_or(f64::NAN));
    (a.mean - b.mean).abs() <= sa + sb
}

pub fn edwards_surrogates(runs: &Result<McRuns>) -> CriterionResult {
    run(11, "Edwards integrability surrogates", "decreasing in g; 3-SE overlap over eps", || {
        let runs = shared(runs)?;
        let c = &runs.canonical;
        let curve: Vec<&crate::mc::McEstimate> = c
            .spec
            .g_list
            .iter()
            .map(|&g| c.edwards(g).ok_or_else(|| Error::Config(format!("missing g={g}"))))
            .collect::<Result<_>>()?;
        let finite = curve.iter().all(|e| e.mean.is_finite() && e.saturated_fraction == 0.0);
        let decreasing = curve.windows(2).all(|w| w[1].mean < w[0].mean);
        let critical: Vec<&crate::mc::McEstimate> = runs
            .critical
            .iter()
            .map(|r| r.edwards(0.1).ok_or_else(|| Error::Config("missing g=0.1".into())))
            .collect::<Result<_>>()?;
        let mut stable = critical.iter().all(|e| e.mean.is_finite());
        for i in 0..critical.len() {
            for j in i + 1..critical.len() {
                stable &= overlap(critical[i], critical[j]);
            }
        }
        Ok(Outcome {
            passed: finite && decreasing && stable,
            summary: format!(
                "uncentered {:?}, centered {:?}",
                curve.iter().map(|e| (e.mean * 1e4).round() / 1e4).collect::<Vec<_>>(),
                critical.iter().map(|e| (e.mean * 1e4).round() / 1e4).collect::<Vec<_>>()
            ),
            measured: json!({ "uncentered": curve, "centered_eps": CRITICAL_EPS, "centered": critical }),
        })
    })
}

fn stripped(runs: &McRuns) -> Result<String> {
    let all: Vec<ExperimentReport> = std::iter::once(&runs.canonical)
        .chain(runs.critical.iter())
        .map(|r| r.without_timing())
        .collect();
    serde_json::to_string(&all).map_err(|e| Error::Format(e.to_string()))
}

pub fn determinism(one: &Result<McRuns>, many: &Result<McRuns>) -> CriterionResult {
    run(12, "determinism 1 vs 8 workers", "bit-identical reports", || {
        let a = stripped(shared(one)?)?;
        let b = stripped(shared(many)?)?;
        Ok(Outcome {
            passed: a == b,
            summary: format!("{} bytes, identical: {}", a.len(), a == b),
            measured: json!({ "bytes": a.len(), "identical": a == b }),
        })
    })
}

/// Runs a suite; `progress` sees each result as it completes.
pub fn run_suite(suite: Suite, seed: u64, mut progress: impl FnMut(&CriterionResult)) -> AcceptanceReport {
    let start = Instant::now();
    let mut results = Vec::new();
    let mut push = |r: CriterionResult| {
        progress(&r);
        results.push(r);
    };
    push(mu_identity(seed));
    push(mean_closed_form());
    push(log_divergence_slope());
    push(power_divergence_ratio());
    push(reduction_oracle());
    if suite == Suite::Full {
        let clock = Instant::now();
        let one = mc_runs(seed, 1);
        let one_ms = clock.elapsed().as_millis() as u64;
        let mut c6 = mc_cross_validation(&one);
        c6.elapsed_ms += one_ms;
        push(c6);
        push(rate_criterion());
        push(sign_lemma());
        push(finiteness_frontier());
        push(bound_suites(seed));
        push(edwards_surrogates(&one));
        let clock = Instant::now();
        let many = mc_runs(seed, 8);
        let mut c12 = determinism(&one, &many);
        c12.elapsed_ms += clock.elapsed().as_millis() as u64;
        push(c12);
    } else {
        push(sign_lemma());
        push(bound_suites(seed));
    }
    let passed = results.iter().all(|r| r.passed);
    AcceptanceReport { suite, seed, results, passed, elapsed_ms: start.elapsed().as_millis() as u64 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("fast".parse::<Suite>().unwrap(), Suite::Fast);
        assert!("slow".parse::<Suite>().unwrap_err().is_validation());
    }

    #[test]
    fn errors_become_failures() {
        let r = run(99, "x", "none", || Err(Error::Divergence("boom".into())));
        assert!(!r.passed);
        assert!(r.line().contains("FAIL") && r.summary.contains("boom"));
    }

    #[test]
    fn cheap_criteria_pass() {
        assert!(mean_closed_form().passed);
        assert!(log_divergence_slope().passed);
    }
}
