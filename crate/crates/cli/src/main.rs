//! `starweyl`: direct, inverse and roundtrip Weyl-matrix experiments on star
//! graphs.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 every edge of
//! the inverse run failed, 1 anything else.

mod commands;
mod config;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, PRESETS};

/// A configuration or usage problem; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "starweyl", version, about = "Weyl-matrix experiments on star graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for the numerical library (default: all cores).
    #[arg(long, global = true, env = "STARWEYL_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize Weyl-matrix samples and write `weyl.csv`.
    Direct(Common),
    /// Recover the potentials from a Weyl CSV.
    Inverse {
        #[command(flatten)]
        common: Common,
        /// Weyl samples as written by `direct`.
        #[arg(long, default_value = "weyl.csv")]
        weyl: PathBuf,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// `direct` followed by `inverse`, in memory.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Dirichlet and Neumann-Dirichlet eigenvalues of one edge: ODE oracle
    /// against the zeros of the truncated series.
    Spectra {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edge: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,11,51,101")]
        indices: Vec<usize>,
        /// Root scan limit (default: enough for the largest index).
        #[arg(long)]
        rho_max: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: example1-uniform190, example1-log90, fig2-sweep.
    #[arg(long)]
    preset: Option<String>,
    /// Truncation order of the endpoint series.
    #[arg(long = "N")]
    order: Option<usize>,
    /// Extra Weyl entries per row in the endpoint system.
    #[arg(long = "Mk")]
    m_k: Option<usize>,
    /// Number of spectral points.
    #[arg(long = "m")]
    m: Option<usize>,
    #[arg(long)]
    svd_threshold: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Sweep {
    /// Repeat the inverse run over a range of M_k, e.g. `Mk=0..7`.
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<[usize; 2]>,
}

fn parse_sweep(s: &str) -> Result<[usize; 2], String> {
    let range = s.strip_prefix("Mk=").ok_or("expected Mk=a..b")?;
    let (a, b) = range.split_once("..").ok_or("expected Mk=a..b")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok([a, b])
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => return Err(anyhow!("one of --config or --preset is required ({})", PRESETS.join(", "))),
        };
        if let Some(n) = self.order {
            c.solver.order = n;
        }
        if let Some(m_k) = self.m_k {
            c.solver.m_k = m_k;
        }
        if let Some(t) = self.svd_threshold {
            c.solver.svd_threshold = t;
        }
        if let Some(m) = self.m {
            let s = c.sampling.as_mut().ok_or_else(|| anyhow!("--m needs a `sampling` section"))?;
            s.set_count(m);
        }
        c.validate()?;
        Ok(c)
    }
}

fn load(common: &Common, sweep: Option<&Sweep>) -> std::result::Result<ExperimentConfig, anyhow::Error> {
    let mut c = common.load().map_err(|e| anyhow::Error::new(UsageError(format!("{e:#}"))))?;
    if let Some(range) = sweep.and_then(|s| s.sweep) {
        c.sweep_mk = Some(range);
    }
    Ok(c)
}

fn run(cli: &Cli) -> Result<commands::Run> {
    match &cli.command {
        Command::Direct(common) => commands::direct(&load(common, None)?, &common.out),
        Command::Inverse { common, weyl, sweep } => commands::inverse(&load(common, Some(sweep))?, weyl, &common.out),
        Command::Roundtrip { common, sweep } => commands::roundtrip(&load(common, Some(sweep))?, &common.out),
        Command::Spectra {
            common,
            edge,
            indices,
            rho_max,
        } => commands::spectra(&load(common, None)?, *edge, indices, *rho_max, &common.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(r) if r.all_failed => {
            eprintln!("error: recovery failed on every edge");
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges() {
        assert_eq!(parse_sweep("Mk=0..7"), Ok([0, 7]));
        assert!(parse_sweep("Mk=3..1").is_err());
        assert!(parse_sweep("N=0..7").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
