//! Monte Carlo estimation of `E(L_ε)`, `Var(L_ε)` and Edwards expectations.
//!
//! Path `i` is generated from its own streams, so the per-path values do not depend
//! on scheduling; all reductions run over path index order afterwards. Standard
//! errors come from contiguous batches of paths.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{FbmGenerator, Method};
use crate::local_time::{clamped_exp, local_time_approx};
use crate::mean::mean_local_time;
use crate::numeric::KahanSum;
use crate::params::{ModelParams, TimeGrid};

pub const DEFAULT_BATCHES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    #[default]
    None,
    QuadratureMean,
}

impl std::str::FromStr for CenterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CenterMode::None),
            "quadrature_mean" => Ok(CenterMode::QuadratureMean),
            other => Err(Error::Config(format!("unknown center mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    pub eps: f64,
    pub grid_n: usize,
    pub n_paths: usize,
    pub g_list: Vec<f64>,
    pub center_mode: CenterMode,
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_batches")]
    pub n_batches: usize,
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

impl ExperimentSpec {
    pub fn new(params: ModelParams, eps: f64, grid_n: usize, n_paths: usize, seed: u64) -> Self {
        ExperimentSpec {
            params,
            eps,
            grid_n,
            n_paths,
            g_list: Vec::new(),
            center_mode: CenterMode::None,
            seed,
            method: Method::Fast,
            n_batches: DEFAULT_BATCHES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.eps)));
        }
        if self.grid_n < 2 {
            return Err(Error::Config(format!("grid_n must be >= 2, got {}", self.grid_n)));
        }
        if self.n_paths < 1 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        if self.n_batches < 1 {
            return Err(Error::Config("n_batches must be >= 1".into()));
        }
        if let Some(g) = self.g_list.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::Domain(format!("couplings must be nonnegative, got {g}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Absent when fewer than two batches are available.
    pub std_error: Option<f64>,
    pub n_paths: usize,
    pub n_batches: usize,
    pub seed: u64,
    pub saturated_fraction: f64,
}

impl McEstimate {
    /// `|mean − target| ≤ k·SE`; false without a standard error.
    pub fn within(&self, target: f64, k: f64) -> bool {
        self.std_error.is_some_and(|se| (self.mean - target).abs() <= k * se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(flatten)]
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Floors {
    /// `−E(L_ε)`, the pathwise lower bound of the centered variable.
    pub centered_floor: f64,
    pub min_centered: f64,
    pub min_local_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub mean_reference: f64,
    pub statistics: Vec<Statistic>,
    pub floors: Floors,
    pub elapsed_ms: u64,
}

impl ExperimentReport {
    pub fn statistic(&self, name: &str, g: Option<f64>) -> Option<&McEstimate> {
        self.statistics.iter().find(|s| s.name == name && s.g == g).map(|s| &s.estimate)
    }

    pub fn mean(&self) -> &McEstimate {
        self.statistic("local_time_mean", None).expect("always reported")
    }

    pub fn variance(&self) -> &McEstimate {
        self.statistic("local_time_variance", None).expect("always reported")
    }

    pub fn edwards(&self, g: f64) -> Option<&McEstimate> {
        self.statistic("edwards", Some(g))
    }

    /// The report with `elapsed_ms` zeroed, for byte comparisons.
    pub fn without_timing(&self) -> Self {
        ExperimentReport { elapsed_ms: 0, ..self.clone() }
    }
}

/// Contiguous index ranges of near-equal size.
pub fn batch_ranges(n: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    let b = batches.min(n).max(1);
    (0..b).map(|k| k * n / b..(k + 1) * n / b).collect()
}

/// Batch-means estimate of `E(x)`.
pub fn batch_mean(values: &[f64], batches: usize, seed: u64, saturated: usize) -> McEstimate {
    let n = values.len();
    let ranges = batch_ranges(n, batches);
    let means: Vec<(f64, usize)> = ranges
        .iter()
        .map(|r| (values[r.clone()].iter().copied().collect::<KahanSum>().sum() / r.len() as f64, r.len()))
        .collect();
    let mean = values.iter().copied().collect::<KahanSum>().sum() / n as f64;
    McEstimate {
        mean,
        std_error: spread(&means, mean, n),
        n_paths: n,
        n_batches: ranges.len(),
        seed,
        saturated_fraction: saturated as f64 / n as f64,
    }
}

// SE of a size-weighted average of batch statistics.
fn spread(stats: &[(f64, usize)], center: f64, n: usize) -> Option<f64> {
    let b = stats.len();
    if b < 2 {
        return None;
    }
    let s: f64 = stats
        .iter()
        .map(|&(m, len)| {
            let w = len as f64 / n as f64;
            w * w * (m - center) * (m - center)
        })
        .collect::<KahanSum>()
        .sum();
    Some((s * b as f64 / (b as f64 - 1.0)).sqrt())
}

fn unbiased_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().copied().collect::<KahanSum>().sum() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).collect::<KahanSum>().sum() / (n as f64 - 1.0)
}

/// Sample variance with a batch-variance standard error.
pub fn batch_variance(values: &[f64], batches: usize, seed: u64) -> McEstimate {
    let n = values.len();
    let var = unbiased_variance(values);
    let ranges = batch_ranges(n, batches);
    let per_batch: Vec<(f64, usize)> = ranges
        .iter()
        .filter(|r| r.len() >= 2)
        .map(|r| (unbiased_variance(&values[r.clone()]), r.len()))
        .collect();
    let std_error = if per_batch.len() == ranges.len() {
        spread(&per_batch, var, n)
    } else {
        None
    };
    McEstimate { mean: var, std_error, n_paths: n, n_batches: ranges.len(), seed, saturated_fraction: 0.0 }
}

/// `L_ε` for each path index, in index order.
pub fn sample_local_times(spec: &ExperimentSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let grid = TimeGrid::new(spec.grid_n, spec.params.horizon)?;
    let generator = FbmGenerator::new(spec.params, grid, spec.method)?;
    (0..spec.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = generator.sample(spec.seed, i);
            local_time_approx(&path, spec.eps).map(|e| e.value)
        })
        .collect()
}

/// Mean, variance and one Edwards expectation per coupling in `g_list`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let start = Instant::now();
    spec.validate()?;
    let mean_reference = mean_local_time(&spec.params, spec.eps)?;
    let values = sample_local_times(spec)?;
    let centered: Vec<f64> = values.iter().map(|v| v - mean_reference).collect();
    let mut statistics = vec![
        Statistic { name: "local_time_mean".into(), g: None, estimate: batch_mean(&values, spec.n_batches, spec.seed, 0) },
        Statistic { name: "local_time_variance".into(), g: None, estimate: batch_variance(&values, spec.n_batches, spec.seed) },
    ];
    let exponent_base = match spec.center_mode {
        CenterMode::None => &values,
        CenterMode::QuadratureMean => &centered,
    };
    for &g in &spec.g_list {
        let mut saturated = 0;
        let weights: Vec<f64> = exponent_base
            .iter()
            .map(|&l| {
                let (w, sat) = clamped_exp(-g * l);
                saturated += sat as usize;
                w
            })
            .collect();
        statistics.push(Statistic {
            name: "edwards".into(),
            g: Some(g),
            estimate: batch_mean(&weights, spec.n_batches, spec.seed, saturated),
        });
    }
    let floors = Floors {
        centered_floor: -mean_reference,
        min_centered: centered.iter().copied().fold(f64::INFINITY, f64::min),
        min_local_time: values.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok(ExperimentReport {
        spec: spec.clone(),
        mean_reference,
        statistics,
        floors,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

/// Edwards expectations along `spec.g_list`.
pub fn edwards_curve(spec: &ExperimentSpec) -> Result<Vec<(f64, McEstimate)>> {
    let report = run_experiment(spec)?;
    Ok(spec
        .g_list
        .iter()
        .map(|&g| (g, report.edwards(g).expect("reported for every g").clone()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    #[serde(rename = "N")]
    pub n: f64,
    pub probability: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub spec: ExperimentSpec,
    pub mean_reference: f64,
    /// `L_{ε,c} ≥ −E(L_ε)` holds pathwise.
    pub floor: f64,
    pub min_centered: f64,
    pub points: Vec<TailPoint>,
}

/// Empirical `P(L_{ε,c} ≤ −N)` for each `N`.
pub fn tail_probe(spec: &ExperimentSpec, levels: &[f64]) -> Result<TailReport> {
    if spec.center_mode != CenterMode::QuadratureMean {
        return Err(Error::Config("tail probe needs center_mode = quadrature_mean".into()));
    }
    if let Some(n) = levels.iter().find(|n| !(**n > 0.0)) {
        return Err(Error::Domain(format!("tail levels must be positive, got {n}")));
    }
    spec.validate()?;
    let mean_reference = mean_local_time(&spec.params, spec.eps)?;
    let centered: Vec<f64> = sample_local_times(spec)?.iter().map(|v| v - mean_reference).collect();
    let total = centered.len() as f64;
    let points = levels
        .iter()
        .map(|&n| {
            let count = centered.iter().filter(|&&c| c <= -n).count();
            TailPoint { n, probability: count as f64 / total, count }
        })
        .collect();
    Ok(TailReport {
        spec: spec.clone(),
        mean_reference,
        floor: -mean_reference,
        min_centered: centered.iter().copied().fold(f64::INFINITY, f64::min),
        points,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
