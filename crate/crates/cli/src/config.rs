//! Experiment configuration: the JSON file format, flag overrides, and the fully
//! resolved form embedded in every output.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rrl_core::adversary::{
    fixed_stream_forger, mirrored_relay_rigger, parity_rigger, CoalitionStrategy, ForgeScript, IdPattern, Truthful,
};
use rrl_core::ring::{RingConfig, Role};
use rrl_core::Bit;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The schema published for config files.
pub const SCHEMA: &str = include_str!("../schema/experiment-config.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Simulate,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Fairness,
    Uniformity,
    Conditional,
    FullControl,
    BestResponse,
    Impossibility,
    Uniqueness,
    MonteCarlo,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Fairness => "fairness",
            CheckKind::Uniformity => "uniformity",
            CheckKind::Conditional => "conditional",
            CheckKind::FullControl => "full-control",
            CheckKind::BestResponse => "best-response",
            CheckKind::Impossibility => "impossibility",
            CheckKind::Uniqueness => "uniqueness",
            CheckKind::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// Constant forged streams.
    Fixed,
    /// Per-slot relay, flip, overwrite or echo-forge.
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    All,
    Adjacent,
    Nonadjacent,
}

/// Which positions are honest: a named placement or explicit positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HonestSpec {
    Named(Placement),
    Positions(Vec<usize>),
}

impl HonestSpec {
    /// Parse flag values: one placement keyword or a list of positions.
    pub fn from_args(values: &[String]) -> Result<Self, CliError> {
        match values {
            [one] if one == "all" => Ok(HonestSpec::Named(Placement::All)),
            [one] if one == "adjacent" => Ok(HonestSpec::Named(Placement::Adjacent)),
            [one] if one == "nonadjacent" => Ok(HonestSpec::Named(Placement::Nonadjacent)),
            _ => values
                .iter()
                .flat_map(|v| v.split(','))
                .filter(|v| !v.is_empty())
                .map(|v| v.trim().parse().map_err(|_| CliError::Config(format!("bad honest position {v:?}"))))
                .collect::<Result<_, _>>()
                .map(HonestSpec::Positions),
        }
    }

    fn positions(&self, n: usize) -> Result<Vec<usize>, CliError> {
        let named = |need: usize, v: Vec<usize>| {
            if n < need {
                Err(CliError::Config(format!("this placement needs n >= {need}, got {n}")))
            } else {
                Ok(v)
            }
        };
        match self {
            HonestSpec::Named(Placement::All) => Ok((0..n).collect()),
            HonestSpec::Named(Placement::Adjacent) => named(3, vec![n.saturating_sub(2), n.saturating_sub(1)]),
            HonestSpec::Named(Placement::Nonadjacent) => named(4, vec![1, 1 + n / 2]),
            HonestSpec::Positions(p) => {
                let mut p = p.clone();
                p.sort_unstable();
                if p.windows(2).any(|w| w[0] == w[1]) {
                    return Err(CliError::Config("honest positions repeat".into()));
                }
                Ok(p)
            }
        }
    }
}

/// How coalition members behave.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum StrategySpec {
    /// Run the protocol with input 0 and random 0.
    Truthful,
    ParityRigger {
        #[serde(default = "default_pattern")]
        pattern: IdPattern,
        #[serde(default)]
        forged_random: u64,
    },
    MirroredRelayRigger,
    Script {
        script: ForgeScript,
    },
}

fn default_pattern() -> IdPattern {
    IdPattern::Fresh
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyKind {
    Truthful,
    ParityRigger,
    MirroredRelayRigger,
}

impl StrategySpec {
    pub fn build(&self, ring: &RingConfig, preferred: Bit) -> Result<Box<dyn CoalitionStrategy>, CliError> {
        Ok(match self {
            StrategySpec::Truthful => Box::new(Truthful::zeros(ring)),
            StrategySpec::ParityRigger { pattern, forged_random } => {
                Box::new(parity_rigger(ring, preferred, *pattern, *forged_random)?)
            }
            StrategySpec::MirroredRelayRigger => Box::new(mirrored_relay_rigger(ring, preferred)?),
            StrategySpec::Script { script } => Box::new(fixed_stream_forger(ring, script.clone())?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// A config file. Everything but `command`, `n` and `seed` has a default.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<CommandKind>,
    pub checks: Option<Vec<CheckKind>>,
    pub n: Option<usize>,
    pub node_ids: Option<Vec<u64>>,
    pub honest: Option<HonestSpec>,
    pub strategy: Option<StrategySpec>,
    pub space: Option<SpaceKind>,
    pub preferred: Option<u8>,
    pub samples: Option<u64>,
    pub scripts: Option<u64>,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: ConfigFile =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (field, present) in
            [("command", file.command.is_some()), ("n", file.n.is_some()), ("seed", file.seed.is_some())]
        {
            if !present {
                return Err(CliError::Config(format!("{}: missing required field `{field}`", path.display())));
            }
        }
        Ok(file)
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            command: over.command.or(self.command),
            checks: over.checks.or(self.checks),
            n: over.n.or(self.n),
            node_ids: over.node_ids.or(self.node_ids),
            honest: over.honest.or(self.honest),
            strategy: over.strategy.or(self.strategy),
            space: over.space.or(self.space),
            preferred: over.preferred.or(self.preferred),
            samples: over.samples.or(self.samples),
            scripts: over.scripts.or(self.scripts),
            seed: over.seed.or(self.seed),
            output: match (self.output, over.output) {
                (Some(base), Some(o)) => Some(OutputSpec { path: o.path.or(base.path), format: o.format }),
                (base, o) => o.or(base),
            },
        }
    }
}

pub const DEFAULT_N: usize = 4;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_SCRIPTS: u64 = 100;

/// The config a run actually used. Every field is concrete.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub checks: Vec<CheckKind>,
    pub n: usize,
    pub node_ids: Vec<u64>,
    pub honest: HonestSpec,
    pub strategy: StrategySpec,
    pub space: SpaceKind,
    pub preferred: u8,
    pub samples: u64,
    pub scripts: u64,
    pub seed: u64,
    pub output: OutputSpec,
    /// The capacity bound in force, from `RRL_MAX_UNIVERSE` or the default.
    #[serde(skip)]
    pub max_universe: u128,
}

impl ExperimentConfig {
    /// Fill defaults and validate. Honest positions default to the non-adjacent
    /// placement for `verify` on rings of four or more, and to the whole ring otherwise.
    pub fn resolve(file: ConfigFile, max_universe: u128) -> Result<Self, CliError> {
        let command = file.command.ok_or_else(|| CliError::Config("no command".into()))?;
        let n = file.n.unwrap_or(DEFAULT_N);
        if n < 2 {
            return Err(CliError::Config(format!("a ring needs at least 2 nodes, got n = {n}")));
        }
        let mut checks = file.checks.unwrap_or_default();
        checks.sort_unstable();
        checks.dedup();
        match command {
            CommandKind::Verify if checks.is_empty() => return Err(CliError::Config("no check selected".into())),
            CommandKind::Simulate if !checks.is_empty() => {
                return Err(CliError::Config("checks apply to verify only".into()))
            }
            _ => {}
        }
        let honest = file.honest.unwrap_or(HonestSpec::Named(match command {
            CommandKind::Verify if n >= 4 => Placement::Nonadjacent,
            _ => Placement::All,
        }));
        let preferred = file.preferred.unwrap_or(1);
        if preferred > 1 {
            return Err(CliError::Config(format!("preferred must be 0 or 1, got {preferred}")));
        }
        let config = ExperimentConfig {
            command,
            checks,
            n,
            node_ids: file.node_ids.unwrap_or_else(|| (1..=n as u64).collect()),
            honest: HonestSpec::Positions(honest.positions(n)?),
            strategy: file.strategy.unwrap_or(StrategySpec::Truthful),
            space: file.space.unwrap_or(SpaceKind::Fixed),
            preferred,
            samples: file.samples.unwrap_or(DEFAULT_SAMPLES),
            scripts: file.scripts.unwrap_or(DEFAULT_SCRIPTS),
            seed: file.seed.unwrap_or(DEFAULT_SEED),
            output: file.output.unwrap_or(OutputSpec { path: None, format: Format::Json }),
            max_universe,
        };
        config.ring()?;
        Ok(config)
    }

    pub fn honest_positions(&self) -> &[usize] {
        match &self.honest {
            HonestSpec::Positions(p) => p,
            HonestSpec::Named(_) => unreachable!("resolved configs list positions"),
        }
    }

    pub fn ring(&self) -> Result<RingConfig, CliError> {
        if self.node_ids.len() != self.n {
            return Err(CliError::Config(format!("node_ids has {} entries for n = {}", self.node_ids.len(), self.n)));
        }
        let mut roles = vec![Role::Coalition; self.n];
        for &p in self.honest_positions() {
            if p >= self.n {
                return Err(CliError::Config(format!("honest position {p} is outside a ring of {}", self.n)));
            }
            roles[p] = Role::Honest;
        }
        Ok(RingConfig::new(self.node_ids.clone(), roles)?)
    }

    pub fn preferred_bit(&self) -> Bit {
        Bit::new(self.preferred == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verify(n: usize) -> ConfigFile {
        ConfigFile {
            command: Some(CommandKind::Verify),
            checks: Some(vec![CheckKind::Fairness]),
            n: Some(n),
            ..Default::default()
        }
    }

    #[test]
    fn placements() {
        let at = |n, h: &str| HonestSpec::from_args(&[h.to_string()]).unwrap().positions(n).unwrap();
        assert_eq!(at(4, "nonadjacent"), [1, 3]);
        assert_eq!(at(8, "nonadjacent"), [1, 5]);
        assert_eq!(at(4, "adjacent"), [2, 3]);
        assert_eq!(at(3, "all"), [0, 1, 2]);
        let listed = HonestSpec::from_args(&["3".into(), "1".into()]).unwrap();
        assert_eq!(listed.positions(4).unwrap(), [1, 3]);
        assert!(HonestSpec::from_args(&["x".into()]).is_err());
    }

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::resolve(verify(4), 10).unwrap();
        assert_eq!(c.honest_positions(), [1, 3]);
        assert_eq!(c.node_ids, [1, 2, 3, 4]);
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn bad_configs_rejected() {
        let dup = ConfigFile { node_ids: Some(vec![1, 1, 2, 3]), ..verify(4) };
        assert!(matches!(ExperimentConfig::resolve(dup, 10), Err(CliError::Config(_))));
        let no_checks = ConfigFile { checks: None, ..verify(4) };
        assert!(ExperimentConfig::resolve(no_checks, 10).is_err());
        let out_of_range = ConfigFile { honest: Some(HonestSpec::Positions(vec![7])), ..verify(4) };
        assert!(ExperimentConfig::resolve(out_of_range, 10).is_err());
    }

    #[test]
    fn flags_override_file() {
        let merged = verify(4).merge(ConfigFile { n: Some(6), ..Default::default() });
        assert_eq!(merged.n, Some(6));
        assert_eq!(merged.checks, Some(vec![CheckKind::Fairness]));
    }
}
