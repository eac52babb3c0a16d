//! `rrl`: run ring executions and verify the equilibrium claims from the command line.
//!
//! Exit codes: 0 every check passed, 1 some check failed (its witness is in the
//! report), 2 config or output error, 3 capacity bound exceeded.

mod checks;
mod config;
mod error;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rrl_core::analysis::Limits;

use config::{
    CheckKind, CommandKind, ConfigFile, ExperimentConfig, Format, HonestSpec, OutputSpec, SpaceKind, StrategyKind,
    StrategySpec,
};
use error::CliError;
use report::{write_atomic, VerifyReport};

#[derive(Parser)]
#[command(name = "rrl", version, about = "Rational consensus on a synchronous ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded execution and write its trace.
    Simulate(Common),
    /// Run exact and sampled checks and write a report.
    Verify {
        #[arg(long = "check", value_enum, num_args = 1.., required_unless_present = "config")]
        checks: Vec<CheckKind>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the JSON schema for config files.
    Schema,
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// `all`, `adjacent`, `nonadjacent`, or honest positions.
    #[arg(long, num_args = 1..)]
    honest: Option<Vec<String>>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    preferred: Option<u8>,
    #[arg(long)]
    samples: Option<u64>,
    /// Scripts drawn by the uniformity check.
    #[arg(long)]
    scripts: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyKind>,
    /// Id pattern of the parity rigger.
    #[arg(long, value_enum, default_value_t = Pattern::Fresh)]
    pattern: Pattern,
    #[arg(long, default_value_t = 0)]
    forged_random: u64,
    /// Script space searched by conditional, full-control and best-response.
    #[arg(long, value_enum)]
    space: Option<SpaceKind>,
    /// Report path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Pattern {
    Fresh,
    Mirrored,
    Echo,
}

impl Common {
    fn overrides(&self, command: CommandKind, checks: Vec<CheckKind>) -> Result<ConfigFile, CliError> {
        let pattern = match self.pattern {
            Pattern::Fresh => rrl_core::adversary::IdPattern::Fresh,
            Pattern::Mirrored => rrl_core::adversary::IdPattern::Mirrored,
            Pattern::Echo => rrl_core::adversary::IdPattern::Echo,
        };
        Ok(ConfigFile {
            command: Some(command),
            checks: (!checks.is_empty()).then_some(checks),
            n: self.n,
            node_ids: None,
            honest: self.honest.as_deref().map(HonestSpec::from_args).transpose()?,
            strategy: self.strategy.map(|k| match k {
                StrategyKind::Truthful => StrategySpec::Truthful,
                StrategyKind::ParityRigger => StrategySpec::ParityRigger { pattern, forged_random: self.forged_random },
                StrategyKind::MirroredRelayRigger => StrategySpec::MirroredRelayRigger,
            }),
            space: self.space,
            preferred: self.preferred,
            samples: self.samples,
            scripts: self.scripts,
            seed: self.seed,
            output: (self.out.is_some() || self.format.is_some())
                .then(|| OutputSpec { path: self.out.clone(), format: self.format.unwrap_or(Format::Json) }),
        })
    }

    fn resolve(&self, command: CommandKind, checks: Vec<CheckKind>) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => {
                let file = ConfigFile::load(path)?;
                if file.command != Some(command) {
                    return Err(CliError::Config(format!("{} is a config for a different command", path.display())));
                }
                file
            }
            None => ConfigFile::default(),
        };
        let merged = base.merge(self.overrides(command, checks)?);
        ExperimentConfig::resolve(merged, Limits::from_env().max_universe)
    }
}

fn emit(config: &ExperimentConfig, contents: &str, summary: &[String]) -> Result<(), CliError> {
    match &config.output.path {
        Some(path) => {
            write_atomic(path, contents)?;
            for line in summary {
                println!("{line}");
            }
        }
        None => {
            print!("{contents}");
            for line in summary {
                eprintln!("{line}");
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Schema => {
            print!("{}", config::SCHEMA);
            Ok(true)
        }
        Command::Simulate(common) => {
            let config = common.resolve(CommandKind::Simulate, Vec::new())?;
            let trace = simulate::simulate(&config)?;
            emit(&config, &trace, &[])?;
            Ok(true)
        }
        Command::Verify { checks, common } => {
            let config = common.resolve(CommandKind::Verify, checks)?;
            let results = checks::run_all(&config)?;
            let passed = results.iter().all(|r| r.passed);
            let lines: Vec<String> = results.iter().map(|r| r.line()).collect();
            let report = VerifyReport { config: &config, passed, checks: results };
            let contents = match config.output.format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv()?,
            };
            emit(&config, &contents, &lines)?;
            Ok(passed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rrl: {e}");
            e.exit_code()
        }
    }
}
