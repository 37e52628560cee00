use std::path::PathBuf;

use fbmlab_core::acceptance::{run_suite, Suite};
use fbmlab_core::bounds::{
    capital_xi_sweep, delta_positivity, streit_sweep, t1_lower_bound, t2_small_b, t3_small_b, xi_sweep,
    BoundReport, CapitalXiEnvelope, XiEnvelope,
};
use fbmlab_core::local_time::edwards_weight;
use fbmlab_core::mc::{run_experiment, sample_local_times, tail_probe, with_threads, CenterMode, ExperimentSpec};
use fbmlab_core::mean::{mean_asymptotic, mean_local_time};
use fbmlab_core::numeric::logspace;
use fbmlab_core::path_io::{write_binary, write_csv};
use fbmlab_core::quadrature::{
    compute_e, default_probe_schedule, divergence_probe, mean_divergence_curve, rate_curve, QuadConfig, QuadResult,
    PROBE_REL_TOL,
};
use fbmlab_core::rng::DEFAULT_SEED;
use fbmlab_core::{generate_path, Error, LocalTimeEstimate, Method, ModelParams, Region, Result, TimeGrid};
use serde_json::{json, Value};

use crate::config::{resolve_seed, ConfigFile};
use crate::output::{emit, json_bytes, tagged, Csv, Format};
use crate::{Cli, Command, McArgs, ModelArgs, QuadArgs};

const DEFAULT_N: usize = 512;
const DEFAULT_PATHS: usize = 10_000;
const DEFAULT_G: [f64; 4] = [0.0, 1.0, 5.0, 25.0];
const DEFAULT_LEVELS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
const DEFAULT_SAMPLES: usize = 10_000;
const DEFAULT_MARGIN: f64 = 0.2;

struct Ctx {
    file: ConfigFile,
    seed: u64,
    format: Option<Format>,
}

impl Ctx {
    fn params(&self, m: &ModelArgs) -> Result<ModelParams> {
        let d = self.file.require(m.d, "d")?;
        let hurst = self.file.require(m.hurst, "hurst")?;
        let horizon = self.file.or(m.horizon, "T", 1.0)?;
        ModelParams::new(d, hurst, horizon)
    }

    fn quad(&self, q: &QuadArgs, params: &ModelParams, base: QuadConfig) -> Result<QuadConfig> {
        let cfg = QuadConfig {
            rel_tol: self.file.or(q.rel_tol, "rel_tol", base.rel_tol)?,
            max_cells: self.file.or(q.max_cells, "max_cells", base.max_cells)?,
            softening_exponent: self.file.or(q.softening, "softening", base.softening_exponent)?,
            boundary_margin: self.file.or(q.boundary_margin, "boundary_margin", base.boundary_margin)?,
        };
        cfg.validate(params.horizon)?;
        Ok(cfg)
    }

    fn format(&self, op: &str, allowed: &[Format], default: Format) -> Result<Format> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(Error::Config(format!("{op} does not support format {}", f.name())))
        }
    }

    fn method(&self, flag: &Option<String>) -> Result<Method> {
        self.file.or(flag.clone(), "method", "fast".to_string())?.parse()
    }

    fn eps(&self, flag: Option<f64>) -> Result<f64> {
        self.file.require(flag, "eps")
    }

    fn spec(&self, params: ModelParams, mc: &McArgs, g_list: Vec<f64>, center: bool) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::new(
            params,
            self.eps(mc.eps)?,
            self.file.or(mc.n, "n", DEFAULT_N)?,
            self.file.or(mc.paths, "paths", DEFAULT_PATHS)?,
            self.seed,
        );
        spec.method = self.method(&mc.method)?;
        spec.n_batches = self.file.or(mc.batches, "batches", spec.n_batches)?;
        spec.g_list = g_list;
        if center || self.file.flag(mc.center, "center")? {
            spec.center_mode = CenterMode::QuadratureMean;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn quad_json(op: &str, params: &ModelParams, eps: f64, gamma: f64, cfg: &QuadConfig, r: &QuadResult) -> Value {
    json!({
        "operation": op,
        "params": params,
        "eps": eps,
        "gamma": gamma,
        "value": r.value,
        "error": r.abs_error_estimate,
        "cells": r.cells,
        "converged": r.converged,
        "region_breakdown": r.region_breakdown,
        "config": cfg,
        "elapsed_ms": r.elapsed_ms,
    })
}

fn curve_csv(points: impl Iterator<Item = (f64, f64)>, x: &str) -> Vec<u8> {
    let mut csv = Csv::new(&[x, "value"]);
    for (e, v) in points {
        csv.row(&[num(e), num(v)]);
    }
    csv.into_bytes()
}

fn bounds(params: &ModelParams, check: &str, samples: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let wants = |name: &str| check == "all" || check == name;
    let known = ["all", "streit", "xi", "capital-xi", "delta", "t1", "t3-small-b", "t2-small-b"];
    if !known.contains(&check) {
        return Err(Error::Config(format!("unknown check '{check}' ({})", known.join("|"))));
    }
    let mut out = Vec::new();
    if wants("streit") {
        out.push(streit_sweep()?);
    }
    for region in [Region::T2, Region::T3] {
        if wants("xi") {
            for env in [XiEnvelope::MuSquared, XiEnvelope::Plain] {
                out.push(xi_sweep(params, region, env, samples, seed)?);
            }
        }
        if wants("capital-xi") {
            for env in [CapitalXiEnvelope::MuSquared, CapitalXiEnvelope::Plain] {
                out.push(capital_xi_sweep(params, region, env, samples, seed)?);
            }
        }
    }
    if wants("delta") {
        out.push(delta_positivity(params, samples, seed)?);
    }
    if wants("t1") {
        out.push(t1_lower_bound(params, samples, seed)?);
    }
    if wants("t3-small-b") {
        out.push(t3_small_b(params, samples, seed)?);
    }
    if wants("t2-small-b") {
        out.push(t2_small_b(params, samples, seed)?);
    }
    Ok(out)
}

/// Runs one command; `Ok(false)` means the command ran but reported failure.
fn execute(command: Command, ctx: &Ctx) -> Result<(Vec<u8>, bool)> {
    use Format::{Bin, Csv as C, Json};
    let bytes = match command {
        Command::Simulate { model, n, method, path_index } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("simulate", &[C, Json, Bin], C)?;
            let grid = TimeGrid::new(ctx.file.or(n, "n", DEFAULT_N)?, params.horizon)?;
            let index = ctx.file.or(path_index, "path_index", 0)?;
            let method = ctx.method(&method)?;
            let path = generate_path(params, grid, ctx.seed, index, method)?;
            let mut buf = Vec::new();
            match format {
                C => write_csv(&path, &mut buf)?,
                Bin => write_binary(&path, &mut buf)?,
                Json => {
                    let values: Vec<Vec<f64>> = (0..=grid.n).map(|k| path.position(k)).collect();
                    buf = json_bytes(&json!({
                        "operation": "simulate", "params": params, "n": grid.n, "seed": ctx.seed,
                        "path_index": index, "method": method, "t": grid.points(), "values": values,
                    }))?;
                }
            }
            buf
        }
        Command::Localtime { model, mc, g } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("localtime", &[C, Json], C)?;
            let g_list = ctx.file.list(&g, "g")?.unwrap_or_default();
            let spec = ctx.spec(params, &mc, g_list, false)?;
            let centered = spec.center_mode == CenterMode::QuadratureMean;
            let mean_reference = mean_local_time(&params, spec.eps)?;
            let values = sample_local_times(&spec)?;
            let mut header = vec!["path_index".to_string(), "epsilon".into(), "L_eps".into(), "L_eps_centered".into()];
            header.extend(spec.g_list.iter().map(|g| format!("edwards_weight_g{g}")));
            let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            let mut rows = Vec::new();
            for (i, &value) in values.iter().enumerate() {
                let est = LocalTimeEstimate {
                    epsilon: spec.eps,
                    value,
                    centered: value - mean_reference,
                    mean_reference,
                    discretization_n: spec.grid_n,
                };
                let weights =
                    spec.g_list.iter().map(|&g| edwards_weight(&est, g, centered)).collect::<Result<Vec<_>>>()?;
                let mut cells = vec![i.to_string(), num(spec.eps), num(value), num(est.centered)];
                cells.extend(weights.iter().map(|w| num(w.weight)));
                csv.row(&cells);
                rows.push(json!({
                    "path_index": i, "epsilon": spec.eps, "L_eps": value, "L_eps_centered": est.centered,
                    "edwards": weights,
                }));
            }
            match format {
                C => csv.into_bytes(),
                _ => json_bytes(&json!({
                    "operation": "localtime", "spec": spec, "mean_reference": mean_reference, "rows": rows,
                }))?,
            }
        }
        Command::Mean { model, eps } => {
            let params = ctx.params(&model)?;
            let eps = ctx.eps(eps)?;
            let format = ctx.format("mean", &[C, Json], Json)?;
            let value = mean_local_time(&params, eps)?;
            match format {
                C => curve_csv(std::iter::once((eps, value)), "eps"),
                _ => {
                    let asymptotic = mean_asymptotic(&params, eps).ok();
                    json_bytes(&json!({
                        "operation": "mean", "params": params, "eps": eps, "value": value,
                        "asymptotic": asymptotic,
                    }))?
                }
            }
        }
        Command::Var { model, quad, eps } => {
            let params = ctx.params(&model)?;
            let eps = ctx.eps(eps)?;
            let format = ctx.format("var", &[C, Json], Json)?;
            let cfg = ctx.quad(&quad, &params, QuadConfig::default())?;
            let r = compute_e(eps, eps, &params, &cfg)?;
            match format {
                C => curve_csv(std::iter::once((eps, r.value)), "eps"),
                _ => json_bytes(&quad_json("var", &params, eps, eps, &cfg, &r))?,
            }
        }
        Command::EValue { model, quad, eps, gamma } => {
            let params = ctx.params(&model)?;
            let eps = ctx.eps(eps)?;
            let gamma = ctx.file.require(gamma, "gamma")?;
            ctx.format("e-value", &[Json], Json)?;
            let cfg = ctx.quad(&quad, &params, QuadConfig::default())?;
            json_bytes(&quad_json("e-value", &params, eps, gamma, &cfg, &compute_e(eps, gamma, &params, &cfg)?))?
        }
        Command::Rate { model, quad, ladder } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("rate", &[C, Json], Json)?;
            let cfg = ctx.quad(&quad, &params, QuadConfig::default())?;
            let ladder = ctx.file.list(&ladder, "ladder")?.unwrap_or_else(|| (2..=10).map(|k| 0.5f64.powi(k)).collect());
            let start = std::time::Instant::now();
            let curve = rate_curve(&params, &ladder, &cfg)?;
            match format {
                C => curve_csv(curve.points.iter().map(|p| (p.eps, p.delta)), "eps"),
                _ => json_bytes(&json!({
                    "operation": "rate", "params": params, "config": cfg, "curve": curve,
                    "elapsed_ms": start.elapsed().as_millis() as u64,
                }))?,
            }
        }
        Command::MeanDivergence { model, ladder } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("mean-divergence", &[C, Json], Json)?;
            let ladder = ctx.file.list(&ladder, "ladder")?.unwrap_or_else(|| logspace(-8.0, -4.0, 9));
            let curve = mean_divergence_curve(&params, &ladder)?;
            match format {
                C => curve_csv(curve.points.iter().copied(), "eps"),
                _ => json_bytes(&tagged("mean-divergence", &json!({ "params": params, "curve": curve }))?)?,
            }
        }
        Command::DivergenceProbe { model, quad, margin } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("divergence-probe", &[C, Json], Json)?;
            let base = QuadConfig { rel_tol: PROBE_REL_TOL, ..Default::default() };
            let cfg = ctx.quad(&quad, &params, base)?;
            let margin = ctx.file.or(margin, "margin", DEFAULT_MARGIN)?;
            let schedule = default_probe_schedule(params.horizon);
            let report = divergence_probe(&params, &schedule, &cfg, margin)?;
            match format {
                C => curve_csv(report.levels.iter().map(|l| (l.margin, l.value)), "eta"),
                _ => json_bytes(&json!({
                    "operation": "divergence-probe", "params": params, "config": cfg, "report": report,
                }))?,
            }
        }
        Command::Edwards { model, mc, g } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("edwards", &[C, Json], Json)?;
            let g_list = ctx.file.list(&g, "g")?.unwrap_or_else(|| DEFAULT_G.to_vec());
            let spec = ctx.spec(params, &mc, g_list, false)?;
            let report = run_experiment(&spec)?;
            match format {
                C => {
                    let mut csv = Csv::new(&["g", "mean", "std_error", "n_paths", "n_batches"]);
                    for &g in &spec.g_list {
                        let e = report.edwards(g).ok_or_else(|| Error::Config(format!("missing g={g}")))?;
                        let se = e.std_error.map(num).unwrap_or_default();
                        csv.row(&[num(g), num(e.mean), se, e.n_paths.to_string(), e.n_batches.to_string()]);
                    }
                    csv.into_bytes()
                }
                _ => json_bytes(&tagged("edwards", &report)?)?,
            }
        }
        Command::Tails { model, mc, levels } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("tails", &[C, Json], Json)?;
            let levels = ctx.file.list(&levels, "levels")?.unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
            let spec = ctx.spec(params, &mc, Vec::new(), true)?;
            let report = tail_probe(&spec, &levels)?;
            match format {
                C => {
                    let mut csv = Csv::new(&["N", "probability", "count"]);
                    for p in &report.points {
                        csv.row(&[num(p.n), num(p.probability), p.count.to_string()]);
                    }
                    csv.into_bytes()
                }
                _ => json_bytes(&tagged("tails", &report)?)?,
            }
        }
        Command::VerifyBounds { model, check, samples } => {
            let params = ctx.params(&model)?;
            let format = ctx.format("verify-bounds", &[C, Json], Json)?;
            let check = ctx.file.or(check, "check", "all".to_string())?;
            let samples = ctx.file.or(samples, "samples", DEFAULT_SAMPLES)?;
            if samples == 0 {
                return Err(Error::Config("samples must be >= 1".into()));
            }
            let reports = bounds(&params, &check, samples, ctx.seed)?;
            match format {
                C => {
                    let mut csv = Csv::new(&["check", "H", "d", "samples", "sup_ratio", "seed"]);
                    for r in &reports {
                        csv.row(&[
                            r.check.clone(),
                            num(r.hurst),
                            r.d.to_string(),
                            r.samples.to_string(),
                            num(r.sup_ratio),
                            r.seed.to_string(),
                        ]);
                    }
                    csv.into_bytes()
                }
                _ => json_bytes(&json!({ "operation": "verify-bounds", "params": params, "reports": reports }))?,
            }
        }
        Command::Accept { suite } => {
            let suite: Suite = suite.parse()?;
            let format = ctx.format("accept", &[C, Json], Json)?;
            let report = run_suite(suite, ctx.seed, |r| eprintln!("{}", r.line()));
            let bytes = match format {
                C => {
                    let mut csv = Csv::new(&["id", "name", "passed", "elapsed_ms"]);
                    for r in &report.results {
                        csv.row(&[r.id.to_string(), r.name.clone(), r.passed.to_string(), r.elapsed_ms.to_string()]);
                    }
                    csv.into_bytes()
                }
                _ => json_bytes(&tagged("accept", &report)?)?,
            };
            return Ok((bytes, report.passed));
        }
    };
    Ok((bytes, true))
}

pub fn dispatch(cli: Cli, env_seed: Option<&str>) -> Result<bool> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = resolve_seed(env_seed, cli.seed, &file, DEFAULT_SEED)?;
    let format = file.get(cli.format.clone(), "format")?.map(|f: String| f.parse()).transpose()?;
    let output: Option<PathBuf> = file.get(cli.output.as_ref().map(|p| p.display().to_string()), "output")?.map(PathBuf::from);
    let default_threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let threads = file.or(cli.threads, "threads", default_threads)?;
    if threads == 0 {
        return Err(Error::Config("threads must be >= 1".into()));
    }
    let ctx = Ctx { file, seed, format };
    let (bytes, passed) = with_threads(threads, || execute(cli.command, &ctx))??;
    emit(output.as_deref(), &bytes)?;
    Ok(passed)
}
