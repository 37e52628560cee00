use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

/// Fractional Brownian motion self-intersection local time toolkit.
#[derive(Debug, Parser)]
#[command(name = "fbmlab", version)]
pub struct Cli {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overridden by FBMLAB_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// csv, json, or bin (simulate only).
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Output file (default: stdout).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Spatial dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Hurst exponent H.
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Horizon T (default 1).
    #[arg(long = "T")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct QuadArgs {
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_cells: Option<usize>,
    #[arg(long)]
    pub softening: Option<f64>,
    #[arg(long)]
    pub boundary_margin: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct McArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    /// Grid steps per path.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// dense or fast.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub batches: Option<usize>,
    /// Center with the quadrature mean.
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one fBm path.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        path_index: Option<u64>,
    },
    /// Per-path local time and Edwards weights.
    Localtime {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, value_delimiter = ',')]
        g: Vec<f64>,
    },
    /// E(L_eps) by one-dimensional quadrature.
    Mean {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Var(L_eps) = E_{eps,eps}.
    Var {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Covariance integral E_{eps,gamma}.
    EValue {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Delta(eps) = E_ee - 2E_e0 + E_00 along a ladder.
    Rate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long, value_delimiter = ',')]
        ladder: Vec<f64>,
    },
    /// E(L_eps) against ln(1/eps) for H = 1/d.
    MeanDivergence {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        ladder: Vec<f64>,
    },
    /// Growth of E_00 under shrinking gap floors.
    DivergenceProbe {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long)]
        margin: Option<f64>,
    },
    /// E[exp(-g L)] over a list of couplings.
    Edwards {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, value_delimiter = ',')]
        g: Vec<f64>,
    },
    /// Empirical P(L_c <= -N).
    Tails {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, value_delimiter = ',')]
        levels: Vec<f64>,
    },
    /// Sampled sup-ratios of the integrability bounds.
    VerifyBounds {
        #[command(flatten)]
        model: ModelArgs,
        /// all, streit, xi, capital-xi, delta, t1, t3-small-b, t2-small-b.
        #[arg(long)]
        check: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run the acceptance suite (fast or full).
    Accept { suite: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::dispatch(cli, std::env::var("FBMLAB_SEED").ok().as_deref()) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("fbmlab: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
