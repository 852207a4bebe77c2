//! Batch front end: `certify`, `bound`, `optimize`, `validate` and `simulate`.

pub mod commands;
pub mod config;
pub mod table;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_bound, cmd_certify, cmd_optimize, cmd_simulate, cmd_validate, Outcome};
pub use config::{ConfigMap, OutputFormat, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "gibbsbound",
    version,
    about = "Convergence certificates for conjugate two-block Gibbs samplers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build drift and minorization certificates.
    Certify(Common),
    /// Evaluate bound curves and solve for n*.
    Bound(Common),
    /// Grid-search the bound parameters (r, gamma, w).
    Optimize(Common),
    /// Check the drift identity, domination and the bound sandwich.
    Validate(Common),
    /// Simulate a chain and compare empirical and exact distances.
    Simulate(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Certify(c)
            | Command::Bound(c)
            | Command::Optimize(c)
            | Command::Validate(c)
            | Command::Simulate(c) => c,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat key = value config file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Model: 'worked', a config file, or inline key=value,... pairs.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lmax: Option<u64>,
    /// Values 'a,b,c', 'lin:lo:hi:n' or 'log:lo:hi:n'.
    #[arg(long)]
    pub grid_r: Option<String>,
    /// As --grid-r, or 'ch:n'.
    #[arg(long)]
    pub grid_gamma: Option<String>,
    /// As --grid-r, or 'above:upper:n'.
    #[arg(long)]
    pub grid_w: Option<String>,
    /// csv or jsonl.
    #[arg(long)]
    pub format: Option<String>,
    /// Multiply every minorization mass by this factor.
    #[arg(long)]
    pub epsilon_scale: Option<f64>,
    /// Any config key, e.g. --set r=0.2; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Common {
    /// Merges file, `--model`, flags and `--set` in that order.
    pub fn to_map(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::from_file(path)?,
            None => ConfigMap::new(),
        };
        if let Some(model) = &self.model {
            map.merge(&ConfigMap::from_model_arg(model)?);
        }
        let flags: [(&str, Option<String>); 10] = [
            ("x0", self.x0.map(|v| v.to_string())),
            ("omega", self.omega.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("lmax", self.lmax.map(|v| v.to_string())),
            ("grid_r", self.grid_r.clone()),
            ("grid_gamma", self.grid_gamma.clone()),
            ("grid_w", self.grid_w.clone()),
            ("format", self.format.clone()),
            ("epsilon_scale", self.epsilon_scale.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                map.set(key, v)?;
            }
        }
        for assignment in &self.overrides {
            map.apply_assignment(assignment)?;
        }
        Ok(map)
    }

    pub fn to_config(&self) -> Result<RunConfig> {
        RunConfig::from_map(&self.to_map()?)
    }
}

/// Parses the configuration and runs the selected command.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = cli.command.common().to_config()?;
    match &cli.command {
        Command::Certify(_) => cmd_certify(&cfg),
        Command::Bound(_) => cmd_bound(&cfg),
        Command::Optimize(_) => cmd_optimize(&cfg),
        Command::Validate(_) => cmd_validate(&cfg),
        Command::Simulate(_) => cmd_simulate(&cfg),
    }
}
