//! Exact simulation of d-dimensional fractional Brownian motion.
//!
//! Each coordinate is an independent centered Gaussian vector on the grid with
//! covariance `R(s,t) = ½(t^{2H} + s^{2H} − |t−s|^{2H})`. Two exact samplers are
//! provided: a dense Cholesky factorization of the covariance matrix and
//! circulant embedding of the increment (fGn) autocovariance.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, TimeGrid};
use crate::rng::path_stream;

/// Default upper bound on `n` for the dense sampler.
pub const DEFAULT_DENSE_CAP: usize = 4096;

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Hurst exponent must lie in (0,1), got {hurst}")))
    }
}

#[inline]
pub(crate) fn cov_unchecked(s: f64, t: f64, two_h: f64) -> f64 {
    0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// Per-coordinate covariance `E[B_s B_t]` of fBm.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!("times must be nonnegative, got s={s}, t={t}")));
    }
    Ok(cov_unchecked(s, t, 2.0 * hurst))
}

/// Covariance of the increments `B_t − B_s` and `B_{t2} − B_{s2}` of one coordinate.
pub fn increment_covariance(s: f64, t: f64, s2: f64, t2: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(s >= 0.0 && s2 >= 0.0) {
        return Err(Error::Domain("times must be nonnegative".into()));
    }
    if !(s < t && s2 < t2) {
        return Err(Error::Domain(format!(
            "increments need s < t and s2 < t2, got ({s}, {t}) and ({s2}, {t2})"
        )));
    }
    let h2 = 2.0 * hurst;
    Ok(cov_unchecked(t, t2, h2) - cov_unchecked(t, s2, h2) - cov_unchecked(s, t2, h2)
        + cov_unchecked(s, s2, h2))
}

/// Covariance matrix `[R(t_i, t_j)]` for `i, j = 1..=n` (the origin is excluded).
pub fn covariance_matrix(grid: &TimeGrid, hurst: f64) -> Result<Vec<f64>> {
    check_hurst(hurst)?;
    let n = grid.n;
    let h2 = 2.0 * hurst;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        let ti = grid.point(i + 1);
        for j in 0..=i {
            let v = cov_unchecked(ti, grid.point(j + 1), h2);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    #[default]
    Fast,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Method::Dense),
            "fast" => Ok(Method::Fast),
            other => Err(Error::Config(format!("unknown method '{other}' (dense|fast)"))),
        }
    }
}

/// One sampled trajectory, stored column-major: coordinate `c` occupies
/// `values[c*(n+1) .. (c+1)*(n+1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub seed: u64,
    pub path_index: u64,
    values: Vec<f64>,
}

impl Path {
    /// Builds a path from per-coordinate columns of length `n+1` starting at 0.
    pub fn from_columns(
        params: ModelParams,
        grid: TimeGrid,
        seed: u64,
        path_index: u64,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if columns.len() != params.d {
            return Err(Error::DimensionMismatch { path: columns.len(), requested: params.d });
        }
        let mut values = Vec::with_capacity((grid.n + 1) * params.d);
        for col in columns {
            if col.len() != grid.n + 1 {
                return Err(Error::Format(format!(
                    "column has {} values, grid needs {}",
                    col.len(),
                    grid.n + 1
                )));
            }
            if col[0] != 0.0 {
                return Err(Error::Format("path must start at the origin".into()));
            }
            values.extend(col);
        }
        Ok(Path { params, grid, seed, path_index, values })
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn coord(&self, c: usize) -> &[f64] {
        let len = self.grid.n + 1;
        &self.values[c * len..(c + 1) * len]
    }

    /// Column-major raw values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Position at grid index `k` as a d-vector.
    pub fn position(&self, k: usize) -> Vec<f64> {
        (0..self.d()).map(|c| self.coord(c)[k]).collect()
    }

    /// Row-major copy `[x_1(t_k), …, x_d(t_k)]` for `k = 0..=n`.
    pub fn row_major(&self) -> Vec<f64> {
        let d = self.d();
        let len = self.grid.n + 1;
        let mut out = vec![0.0; len * d];
        for c in 0..d {
            for (k, v) in self.coord(c).iter().enumerate() {
                out[k * d + c] = *v;
            }
        }
        out
    }
}

enum Sampler {
    Dense {
        /// Lower Cholesky factor, row-major `n × n`.
        chol: Vec<f64>,
    },
    Fast {
        /// `sqrt(λ_k / m)` for the length-`m` circulant embedding.
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
}

/// Precomputed sampler for one `(params, grid, method)` triple; draws are keyed by
/// `(seed, path_index, coordinate)`.
pub struct FbmGenerator {
    params: ModelParams,
    grid: TimeGrid,
    method: Method,
    sampler: Sampler,
}

impl std::fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("params", &self.params)
            .field("grid", &self.grid)
            .field("method", &self.method)
            .finish()
    }
}

impl FbmGenerator {
    pub fn new(params: ModelParams, grid: TimeGrid, method: Method) -> Result<Self> {
        Self::with_dense_cap(params, grid, method, DEFAULT_DENSE_CAP)
    }

    pub fn with_dense_cap(
        params: ModelParams,
        grid: TimeGrid,
        method: Method,
        dense_cap: usize,
    ) -> Result<Self> {
        params.validate()?;
        if (grid.horizon - params.horizon).abs() > 1e-12 * params.horizon {
            return Err(Error::Config(format!(
                "grid horizon {} differs from model horizon {}",
                grid.horizon, params.horizon
            )));
        }
        let sampler = match method {
            Method::Dense => {
                if grid.n > dense_cap {
                    return Err(Error::Config(format!(
                        "dense method limited to n <= {dense_cap}, got n = {}",
                        grid.n
                    )));
                }
                let mut m = covariance_matrix(&grid, params.hurst)?;
                cholesky_with_jitter(&mut m, grid.n)?;
                Sampler::Dense { chol: m }
            }
            Method::Fast => circulant_sampler(&grid, params.hurst)?,
        };
        Ok(FbmGenerator { params, grid, method, sampler })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// One coordinate of path `path_index`: `n+1` values starting at 0.
    pub fn sample_coordinate(&self, seed: u64, path_index: u64, coord: usize) -> Vec<f64> {
        let n = self.grid.n;
        let mut rng = path_stream(seed, path_index, coord);
        let mut out = vec![0.0; n + 1];
        match &self.sampler {
            Sampler::Dense { chol } => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                for i in 0..n {
                    let row = &chol[i * n..i * n + i + 1];
                    out[i + 1] = row.iter().zip(&z).map(|(l, z)| l * z).sum();
                }
            }
            Sampler::Fast { scale, fft } => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                let mut acc = 0.0;
                for k in 0..n {
                    acc += buf[k].re;
                    out[k + 1] = acc;
                }
            }
        }
        out
    }

    /// Path `path_index`; coordinates are drawn concurrently but each from its own stream.
    pub fn sample(&self, seed: u64, path_index: u64) -> Path {
        let d = self.params.d;
        let columns: Vec<Vec<f64>> = if d > 1 {
            (0..d)
                .into_par_iter()
                .map(|c| self.sample_coordinate(seed, path_index, c))
                .collect()
        } else {
            vec![self.sample_coordinate(seed, path_index, 0)]
        };
        let mut values = Vec::with_capacity((self.grid.n + 1) * d);
        for col in columns {
            values.extend(col);
        }
        Path { params: self.params, grid: self.grid, seed, path_index, values }
    }
}

/// Generates one path; for many paths build an [`FbmGenerator`] once instead.
pub fn generate_path(
    params: ModelParams,
    grid: TimeGrid,
    seed: u64,
    path_index: u64,
    method: Method,
) -> Result<Path> {
    Ok(FbmGenerator::new(params, grid, method)?.sample(seed, path_index))
}

/// In-place lower Cholesky factorization of a row-major SPD matrix, retrying with
/// diagonal jitter up to `1e-10 · trace / n`. The upper triangle is zeroed.
fn cholesky_with_jitter(m: &mut [f64], n: usize) -> Result<()> {
    let original = m.to_vec();
    let trace: f64 = (0..n).map(|i| original[i * n + i]).sum();
    let unit = trace / n as f64;
    let mut jitter = 0.0;
    loop {
        m.copy_from_slice(&original);
        for i in 0..n {
            m[i * n + i] += jitter;
        }
        match cholesky_in_place(m, n) {
            Ok(()) => return Ok(()),
            Err(pivot) => {
                let max = 1e-10 * unit;
                if jitter >= max {
                    return Err(Error::Factorization { pivot, jitter });
                }
                jitter = if jitter == 0.0 { 1e-14 * unit } else { (jitter * 10.0).min(max) };
            }
        }
    }
}

fn cholesky_in_place(m: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for i in 0..n {
        for j in 0..=i {
            let (row_i, row_j) = if i == j {
                (&m[i * n..i * n + j], &m[j * n..j * n + j])
            } else {
                let (lo, hi) = m.split_at(i * n);
                (&hi[..j], &lo[j * n..j * n + j])
            };
            let dot: f64 = row_i.iter().zip(row_j).map(|(a, b)| a * b).sum();
            let v = m[i * n + j] - dot;
            if i == j {
                if !(v > 0.0) {
                    return Err(i);
                }
                m[i * n + i] = v.sqrt();
            } else {
                m[i * n + j] = v / m[j * n + j];
            }
        }
        for j in i + 1..n {
            m[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Eigenvalues of the minimal circulant embedding (size `2n`) of the fGn covariance.
pub fn circulant_eigenvalues(n: usize, hurst: f64) -> Vec<f64> {
    let m = 2 * n;
    let mut row = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..=n {
        let g = fgn_autocovariance(j, hurst);
        row[j] = Complex64::new(g, 0.0);
        if j > 0 && j < n {
            row[m - j] = Complex64::new(g, 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut row);
    row.iter().map(|c| c.re).collect()
}

fn circulant_sampler(grid: &TimeGrid, hurst: f64) -> Result<Sampler> {
    let n = grid.n;
    let m = 2 * n;
    let eig = circulant_eigenvalues(n, hurst);
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let var = grid.step().powf(2.0 * hurst);
    let mut scale = Vec::with_capacity(m);
    for (k, &l) in eig.iter().enumerate() {
        if l < -1e-10 * max {
            return Err(Error::Embedding { index: k, value: l });
        }
        scale.push((l.max(0.0) * var / m as f64).sqrt());
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    Ok(Sampler::Fast { scale, fft })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: usize, h: f64) -> ModelParams {
        ModelParams::new(d, h, 1.0).unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(fbm_covariance(1.0, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(fbm_covariance(2.0, 3.0, 0.5).unwrap(), 2.0);
        let v = fbm_covariance(1.0, 2.0, 0.4).unwrap();
        assert!((v - 0.5 * 2f64.powf(0.8)).abs() < 1e-15);
        assert!((v - 0.870_550_563_296_124).abs() < 1e-12);
    }

    #[test]
    fn covariance_domain_errors() {
        assert!(fbm_covariance(1.0, 1.0, 0.0).is_err());
        assert!(fbm_covariance(1.0, 1.0, 1.0).is_err());
        assert!(fbm_covariance(-1.0, 1.0, 0.5).is_err());
        assert!(increment_covariance(1.0, 0.5, 0.0, 1.0, 0.5).is_err());
        assert!(increment_covariance(0.0, 1.0, 0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn increment_covariance_examples() {
        assert_eq!(increment_covariance(0.0, 1.0, 2.0, 3.0, 0.5).unwrap(), 0.0);
        assert_eq!(increment_covariance(0.0, 2.0, 1.0, 3.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn fgn_embedding_nonnegative() {
        for &h in &[0.05, 0.2, 0.5, 0.75, 0.95] {
            for &n in &[1usize, 2, 7, 64, 300] {
                let eig = circulant_eigenvalues(n, h);
                let max = eig.iter().cloned().fold(0.0, f64::max);
                assert!(eig.iter().all(|&l| l >= -1e-12 * max), "H={h} n={n}");
            }
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let grid = TimeGrid::new(20, 1.0).unwrap();
        let c = covariance_matrix(&grid, 0.3).unwrap();
        let mut l = c.clone();
        cholesky_with_jitter(&mut l, 20).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let v: f64 = (0..20).map(|k| l[i * 20 + k] * l[j * 20 + k]).sum();
                assert!((v - c[i * 20 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            cholesky_with_jitter(&mut m, 2),
            Err(Error::Factorization { .. })
        ));
    }

    #[test]
    fn dense_cap_enforced() {
        let grid = TimeGrid::new(100, 1.0).unwrap();
        assert!(FbmGenerator::with_dense_cap(p(1, 0.5), grid, Method::Dense, 50).is_err());
        assert!(FbmGenerator::with_dense_cap(p(1, 0.5), grid, Method::Fast, 50).is_ok());
    }

    #[test]
    fn path_starts_at_origin_and_is_reproducible() {
        let grid = TimeGrid::new(32, 1.0).unwrap();
        for method in [Method::Dense, Method::Fast] {
            let a = generate_path(p(3, 0.3), grid, 11, 5, method).unwrap();
            let b = generate_path(p(3, 0.3), grid, 11, 5, method).unwrap();
            assert_eq!(a, b);
            for c in 0..3 {
                assert_eq!(a.coord(c)[0], 0.0);
            }
            let other = generate_path(p(3, 0.3), grid, 11, 6, method).unwrap();
            assert_ne!(a.values(), other.values());
        }
    }

    #[test]
    fn from_columns_validates() {
        let grid = TimeGrid::new(2, 1.0).unwrap();
        assert!(Path::from_columns(p(1, 0.5), grid, 0, 0, vec![vec![0.0, 1.0, 2.0]]).is_ok());
        assert!(Path::from_columns(p(1, 0.5), grid, 0, 0, vec![vec![1.0, 1.0, 2.0]]).is_err());
        assert!(Path::from_columns(p(2, 0.5), grid, 0, 0, vec![vec![0.0, 1.0, 2.0]]).is_err());
        assert!(Path::from_columns(p(1, 0.5), grid, 0, 0, vec![vec![0.0, 1.0]]).is_err());
    }
}
