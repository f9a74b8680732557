//! Batch command-line front end: builds models from a TOML config, runs
//! verification suites and prints line-delimited JSON records.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{AlphaScan, Suite, EXIT_INVALID};
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "moyal", version, about = "Harmonic scalar field theory on Moyal space with general metric")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    pub config: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative quadrature tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tests adaptedness of Σ to G and prints the decomposition.
    Adapt(Common),
    /// Runs a residual suite, one JSON record per check.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Evaluates the regularized amplitude of the configured graph.
    Amplitude {
        #[command(flatten)]
        common: Common,
        /// Emits the α-integrand on a grid of this many points per line as CSV.
        #[arg(long, value_name = "POINTS")]
        alpha_scan: Option<usize>,
        /// Upper end of the α-scan grid.
        #[arg(long, default_value_t = 10.0)]
        alpha_max: f64,
    },
    /// Evaluates the regularized propagator C_ε(x, y).
    Propagator {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        y: Vec<f64>,
    },
    /// Evaluates the action of the configured field.
    Action(Common),
}

fn load(common: &Common, err: &mut dyn Write) -> Option<RunConfig> {
    let overrides = Overrides {
        theta: common.theta,
        omega: common.omega,
        epsilon: common.epsilon,
        seed: common.seed,
        tol: common.tol,
    };
    match RunConfig::load(&common.config, &overrides) {
        Ok(c) => Some(c),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

/// Runs a parsed command and returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let common = match &cli.command {
        Command::Adapt(c) | Command::Action(c) => c,
        Command::Verify { common, .. } | Command::Amplitude { common, .. } | Command::Propagator { common, .. } => {
            common
        }
    };
    let Some(cfg) = load(common, err) else {
        return EXIT_INVALID;
    };
    match &cli.command {
        Command::Adapt(_) => commands::adapt(&cfg, out, err),
        Command::Verify { suite, .. } => commands::verify(&cfg, *suite, out, err),
        Command::Amplitude { alpha_scan, alpha_max, .. } => {
            let scan = alpha_scan.map(|points| AlphaScan {
                alpha_max: *alpha_max,
                points,
            });
            commands::amplitude_cmd(&cfg, scan, out, err)
        }
        Command::Propagator { x, y, .. } => {
            let d = cfg.dim();
            if (!x.is_empty() && x.len() != d) || (!y.is_empty() && y.len() != d) {
                let _ = writeln!(err, "error: points must have {d} coordinates");
                return EXIT_INVALID;
            }
            commands::propagator_cmd(&cfg, x, y, out, err)
        }
        Command::Action(_) => commands::action_cmd(&cfg, out, err),
    }
}
