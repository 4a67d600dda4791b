//! Command-line pipeline: synthetic data or ingestion, hazard fit,
//! features, grouping by the sign of `u`, per-group causal discovery and a
//! run report.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod error;
pub mod figures;
pub mod report;
pub mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::CliError;
pub use report::RunReport;
pub use stages::Pipeline;

#[derive(Debug, Parser)]
#[command(name = "hazlingam", version, about = "Hazard random effects and group-wise causal discovery")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stage (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write synthetic inspections, covariates and ground truth.
    Synth(ScenarioFlag),
    /// Fit the hazard model and summarize the random effects.
    Fit,
    /// Extract window features from the covariate series.
    Features,
    /// Split pumps by the sign of their random effect.
    Group(ScenarioFlag),
    /// Run causal discovery per group and write the report.
    Discover(ScenarioFlag),
    /// Run every stage, reusing intact cached outputs.
    Pipeline(ScenarioFlag),
    /// Rebuild the report from existing outputs.
    Report,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ScenarioFlag {
    /// Use the two-group causal scenario instead of hazard data.
    #[arg(long)]
    pub scenario: bool,
}

/// Loads the config file and applies the command-line overrides.
pub fn resolve_config(global: &GlobalArgs) -> Result<PipelineConfig, CliError> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.propagate_seed();
    if let Some(out) = &global.out {
        config.run.out = out.clone();
    }
    if let Some(t) = global.threads {
        config.run.threads = t;
    }
    config.validate()?;
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => log::error!("cannot print result: {e}"),
    }
}

fn warn_exit(report_warnings: bool) -> ExitCode {
    if report_warnings {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

/// Runs one parsed command and maps the outcome to an exit code.
pub fn run(cli: Cli) -> ExitCode {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let config = resolve_config(&cli.global)?;
    if config.run.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(config.run.threads).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let scenario = match &cli.command {
        Command::Synth(f) | Command::Group(f) | Command::Discover(f) | Command::Pipeline(f) => f.scenario,
        Command::Fit | Command::Features | Command::Report => false,
    };
    let p = Pipeline::new(config, scenario);
    match cli.command {
        Command::Synth(_) => {
            p.synth()?;
            let dir = p.stage_dir(if scenario { stages::SCENARIO_DIR } else { stages::SYNTH_DIR });
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit => {
            let fit = p.fit()?;
            let warnings = report::diagnostic_warnings(&fit.diagnostics);
            println!(
                "max R-hat {:.4}, min bulk ESS {:.0}, divergences {}",
                fit.diagnostics.max_rhat, fit.diagnostics.min_ess_bulk, fit.diagnostics.total_divergences
            );
            Ok(warn_exit(!warnings.is_empty()))
        }
        Command::Features => {
            let m = p.features()?;
            println!("{} pumps x {} features", m.n_rows(), m.n_features());
            Ok(ExitCode::SUCCESS)
        }
        Command::Group(_) => {
            print_json(&p.group()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Discover(_) => {
            let r = p.discover()?;
            print_json(&r);
            Ok(warn_exit(r.has_warnings()))
        }
        Command::Pipeline(_) => {
            let o = p.run_all()?;
            print_json(&o.report);
            Ok(warn_exit(o.report.has_warnings()))
        }
        Command::Report => {
            let r = p.report()?;
            print_json(&r);
            Ok(warn_exit(r.has_warnings()))
        }
    }
}
