//! Command-line front end for the severity-fitting study.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, StudyConfig};
use crate::error::{CliError, EXIT_OTHER};

#[derive(Debug, Parser)]
#[command(name = "sevfit", version, about = "Severity-model MLE study: fit, bootstrap, and test asymptotic normality")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Study configuration file (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the bootstrap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Bootstrap replications per (family, n).
    #[arg(long, global = true)]
    pub replications: Option<usize>,
    /// Use 40,000 replications.
    #[arg(long = "paper-scale", global = true)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit each family to the tail of the loss file.
    Fit,
    /// Parametric bootstrap for every (family, n).
    Bootstrap,
    /// Anderson-Darling and Mardia tests on the bootstrap matrices.
    Normality,
    /// Normal-approximation versus bootstrap interval widths.
    Cierror,
    /// Kernel density overlays against the asymptotic normal density.
    Overlays,
    /// Write a synthetic loss file from a built-in profile.
    Generate,
    /// Every stage in order.
    Run,
}

impl GlobalArgs {
    /// The configuration file, if any, with command-line overrides applied.
    pub fn resolve(&self) -> Result<StudyConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::load(path)?,
            None => StudyConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            output: self.out.clone(),
            replications: self.replications,
            full_scale: self.full_scale,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn bootstrap_progress(bm: &sevfit_core::BootstrapMatrix) {
    println!(
        "bootstrap {:<11} n = {:<5} converged {}/{}",
        bm.family.key(),
        bm.n,
        bm.m_converged,
        bm.m_requested
    );
}

/// Runs `command`, printing a short summary to stdout.
pub fn execute(command: Command, cfg: &StudyConfig) -> Result<(), CliError> {
    match command {
        Command::Generate => {
            let r = commands::cmd_generate(cfg)?;
            println!(
                "wrote {} losses to {} (mean {:.0}, median {:.0}, {:.1}% at or above {})",
                r.summary.n,
                r.path.display(),
                r.summary.mean,
                r.summary.median,
                100.0 * r.summary.fraction_above_threshold,
                cfg.threshold
            );
        }
        Command::Fit => {
            let tp = commands::cmd_fit(cfg)?;
            for e in &tp.entries {
                let warnings = e.fit.as_ref().map_or(String::new(), |f| {
                    if f.warnings.is_empty() {
                        String::new()
                    } else {
                        format!(" warnings {:?}", f.warnings)
                    }
                });
                println!("{:<11} {:?}{warnings}", e.family.key(), e.params);
            }
        }
        Command::Bootstrap => {
            commands::cmd_bootstrap(cfg, bootstrap_progress)?;
        }
        Command::Normality => {
            for r in commands::cmd_normality(cfg)? {
                let family = r.family.map_or("-", |f| f.key());
                println!("{family:<11} n = {:<5} {:<16} p = {:.4}", r.n.unwrap_or(0), r.test.key(), r.p_value);
            }
        }
        Command::Cierror => {
            for r in commands::cmd_cierror(cfg)? {
                println!("{:<11} {:<8} n = {:<5} {:+.1}%", r.family.key(), r.param_name, r.n, r.percent_error);
            }
        }
        Command::Overlays => {
            let files = commands::cmd_overlays(cfg)?;
            println!("wrote {} overlay files", files.len());
        }
        Command::Run => commands::cmd_run(cfg, bootstrap_progress)?,
    }
    Ok(())
}

/// Runs `command` inside a pool of `threads` workers when given.
pub fn execute_with_threads(command: Command, cfg: &StudyConfig, threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        None => execute(command, cfg),
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::new(EXIT_OTHER, format!("cannot start {t} worker threads: {e}")))?
            .install(|| execute(command, cfg)),
    }
}
