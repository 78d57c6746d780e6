use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::config::Format;

#[derive(Debug, Parser)]
#[command(
    name = "treedyn",
    version,
    about = "Exact samplers and fixed-point numerics for particle systems on directed trees"
)]
pub struct Cli {
    /// Configuration file (TOML, or JSON including a previous report).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory for report files; without it data goes to stdout.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimates from the exact samplers.
    Simulate {
        #[command(subcommand)]
        which: SimulateCmd,
    },
    /// Coupled voter/Glauber chains and the infection process.
    Ising {
        #[command(subcommand)]
        which: IsingCmd,
    },
    /// Deterministic numerics for the flow curves.
    Analytic {
        #[command(subcommand)]
        which: AnalyticCmd,
    },
    /// Runs the cross-checks and writes a pass/fail summary.
    Verify {
        /// `fast` or `full`.
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args, Default)]
pub struct Sampling {
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct Grid {
    /// Grid step.
    #[arg(long)]
    pub h: Option<f64>,
    /// Grid horizon.
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Flow probability into a vertex `n` layers above the occupied base.
    Coalescing {
        #[arg(long)]
        n: Option<u32>,
        /// Horizons, comma separated.
        #[arg(long = "T", value_delimiter = ',')]
        t: Option<Vec<f64>>,
        /// Branching number.
        #[arg(long)]
        d: Option<u32>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Autocorrelation of the opinion `n` layers above the coin layer.
    Voter {
        #[arg(long)]
        n: Option<u32>,
        /// Lags, comma separated.
        #[arg(long = "T", value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Particle density on a torus under the undirected pull dynamics.
    LatticeDemo {
        #[arg(long)]
        side: Option<u32>,
        #[arg(long)]
        dim: Option<u32>,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args, Default)]
pub struct IsingModel {
    #[arg(long)]
    pub beta: Option<f64>,
    /// `ksq` or `power:<scale>:<exponent>`.
    #[arg(long)]
    pub schedule: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum IsingCmd {
    /// Per-layer disagreement creation in the coupled chains.
    Coupled {
        #[command(flatten)]
        model: IsingModel,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Event-driven infection process.
    Infection {
        #[command(flatten)]
        model: IsingModel,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Series bounding the rate at which infected vertices appear.
    RateSum {
        #[command(flatten)]
        model: IsingModel,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnalyticCmd {
    /// Iterates of the integral transform from the maximal element.
    Iterate {
        /// `coalescing`, `voter` or `general`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        d: Option<u32>,
        /// Number of iterations.
        #[arg(long)]
        n: Option<u32>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Heteroclinic solution of the energy equation.
    Ode {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        d: Option<u32>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Closed-form limit curve of the binary coalescing model.
    ClosedForm {
        /// Times, comma separated; without it the grid is used.
        #[arg(long = "T", value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Fixed-point, ODE and energy residuals of a curve.
    Residual {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        d: Option<u32>,
        /// Curve in the grid CSV format; defaults to the model's ODE solution.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        grid: Grid,
    },
}

/// Extra inputs that are not part of the experiment configuration.
#[derive(Debug, Default, Clone)]
pub struct Extras {
    pub input: Option<PathBuf>,
}

impl Cli {
    /// The configuration layer given by the flags, plus extras.
    pub fn layer(&self) -> (Value, Extras) {
        let mut extras = Extras::default();
        let output = json!({
            "dir": self.out_dir,
            "format": self.format.map(Format::from),
        });
        let sampling_workers = json!({ "workers": self.workers });
        let mut layer = match &self.command {
            Command::Simulate { which } => match which {
                SimulateCmd::Coalescing { n, t, d, sampling } => json!({
                    "command": "simulate coalescing",
                    "model": {"n": n, "T": t, "d": d},
                    "sampling": {"samples": sampling.samples, "seed": sampling.seed},
                }),
                SimulateCmd::Voter { n, t, sampling } => json!({
                    "command": "simulate voter",
                    "model": {"n": n, "T": t},
                    "sampling": {"samples": sampling.samples, "seed": sampling.seed},
                }),
                SimulateCmd::LatticeDemo { side, dim, t, seed } => json!({
                    "command": "simulate lattice-demo",
                    "model": {"side": side, "dim": dim, "T": t.map(|x| vec![x])},
                    "sampling": {"seed": seed},
                }),
            },
            Command::Ising { which } => match which {
                IsingCmd::Coupled { model, depth, t, replicas, seed } => json!({
                    "command": "ising coupled",
                    "model": {"beta": model.beta, "schedule": model.schedule, "depth": depth,
                              "T": t.map(|x| vec![x])},
                    "sampling": {"replicas": replicas, "seed": seed},
                }),
                IsingCmd::Infection { model, depth, t, replicas, seed } => json!({
                    "command": "ising infection",
                    "model": {"beta": model.beta, "schedule": model.schedule, "depth": depth,
                              "T": t.map(|x| vec![x])},
                    "sampling": {"replicas": replicas, "seed": seed},
                }),
                IsingCmd::RateSum { model, tol } => json!({
                    "command": "ising rate-sum",
                    "model": {"beta": model.beta, "schedule": model.schedule, "tol": tol},
                }),
            },
            Command::Analytic { which } => match which {
                AnalyticCmd::Iterate { model, d, n, grid } => json!({
                    "command": "analytic iterate",
                    "model": {"kind": model, "d": d, "n": n},
                    "grid": {"h": grid.h, "t_max": grid.t_max},
                }),
                AnalyticCmd::Ode { model, d, grid } => json!({
                    "command": "analytic ode",
                    "model": {"kind": model, "d": d},
                    "grid": {"h": grid.h, "t_max": grid.t_max},
                }),
                AnalyticCmd::ClosedForm { t, grid } => json!({
                    "command": "analytic closed-form",
                    "model": {"T": t},
                    "grid": {"h": grid.h, "t_max": grid.t_max},
                }),
                AnalyticCmd::Residual { model, d, input, grid } => {
                    extras.input = input.clone();
                    json!({
                        "command": "analytic residual",
                        "model": {"kind": model, "d": d},
                        "grid": {"h": grid.h, "t_max": grid.t_max},
                    })
                }
            },
            Command::Verify { suite, seed } => json!({
                "command": format!("verify {suite}"),
                "sampling": {"seed": seed},
            }),
        };
        layer["output"] = output;
        if let Some(s) = layer.get_mut("sampling") {
            s["workers"] = sampling_workers["workers"].clone();
        } else {
            layer["sampling"] = sampling_workers;
        }
        (layer, extras)
    }
}
