//! Exact and sampled evaluation of outcomes, coalition utilities and equilibrium claims.
//!
//! The probability space is the honest nodes' inputs (uniform on `{0,1}`) times
//! their randoms (uniform on `Z_n`). With `h` honest nodes that is `2^h · n^h`
//! equally likely points, and every exact quantity here is a count over them,
//! reduced to a fraction at the end.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::CoalitionStrategy;
use crate::bit::Bit;
use crate::error::{Error, Result};
use crate::protocol::Decision;
use crate::ring::{honest_behavior, run_ring_into, Behavior, HonestBehavior, RingConfig, Trace};
use crate::Prob;

mod checks;
mod monte_carlo;
mod search;

pub use checks::{
    check_conditional_half, check_fairness, check_leader_uniformity, ConditionalHalfReport, FairnessReport,
    LeaderUniformityReport, NodeHalf,
};
pub use monte_carlo::{monte_carlo, McEstimate};
pub use search::{
    best_response_search, best_response_search_with, evaluate_script, strategy_utility, EquilibriumReport,
    ScriptEvaluation, SearchDiagnostics, Verdict,
};

/// Environment variable overriding [`Limits::max_universe`].
pub const MAX_UNIVERSE_ENV: &str = "RRL_MAX_UNIVERSE";

/// Capacity bounds for exhaustive work, counted in ring executions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_universe: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_universe: 100_000_000 }
    }
}

impl Limits {
    /// Defaults, with `RRL_MAX_UNIVERSE` applied when set to a valid integer.
    pub fn from_env() -> Self {
        let mut limits = Limits::default();
        if let Some(v) = std::env::var(MAX_UNIVERSE_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            limits.max_universe = v;
        }
        limits
    }

    pub fn check(&self, required: u128) -> Result<()> {
        if required > self.max_universe {
            Err(Error::Capacity { required, bound: self.max_universe })
        } else {
            Ok(())
        }
    }
}

/// Global outcome of a run, judged on the honest nodes only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AllHonestDecided(Bit),
    HonestDisagreement,
    /// Some honest node reported a cheater.
    Erroneous,
}

pub fn classify(trace: &Trace, config: &RingConfig) -> Outcome {
    let mut agreed: Option<Bit> = None;
    let mut disagreement = false;
    for p in (0..config.n()).filter(|&p| config.is_honest(p)) {
        match trace.decision(p) {
            Decision::CheaterDetected(_) => return Outcome::Erroneous,
            Decision::Decided(b) => match agreed {
                None => agreed = Some(b),
                Some(a) if a != b => disagreement = true,
                _ => {}
            },
        }
    }
    match (disagreement, agreed) {
        (false, Some(b)) => Outcome::AllHonestDecided(b),
        _ => Outcome::HonestDisagreement,
    }
}

/// Fraction as an integer pair, for reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl From<Prob> for Fraction {
    fn from(p: Prob) -> Self {
        Fraction { num: *p.numer(), den: *p.denom() }
    }
}

impl From<Fraction> for Prob {
    fn from(f: Fraction) -> Self {
        Prob::new(f.num, f.den)
    }
}

/// Exact distribution over [`Outcome`]s.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutcomeDistribution {
    counts: BTreeMap<Outcome, u64>,
    total: u64,
}

impl OutcomeDistribution {
    pub fn record(&mut self, outcome: Outcome) {
        *self.counts.entry(outcome).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, outcome: Outcome) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    pub fn probability(&self, outcome: Outcome) -> Prob {
        if self.total == 0 {
            return Prob::from_integer(0);
        }
        Prob::new(self.count(outcome), self.total)
    }

    pub fn probabilities(&self) -> BTreeMap<Outcome, Prob> {
        self.counts.keys().map(|&o| (o, self.probability(o))).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .probabilities()
            .into_iter()
            .map(|(o, p)| serde_json::json!({ "outcome": o, "probability": Fraction::from(p) }))
            .collect();
        serde_json::json!({ "traces": self.total, "outcomes": entries })
    }
}

/// Every coalition member values its shared preferred legal outcome at 1 and
/// everything else, erroneous outcomes included, at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub preferred: Bit,
}

impl UtilityModel {
    pub fn utility(&self, outcome: Outcome) -> u64 {
        u64::from(outcome == Outcome::AllHonestDecided(self.preferred))
    }
}

pub fn coalition_utility(dist: &OutcomeDistribution, model: &UtilityModel) -> Prob {
    dist.probability(Outcome::AllHonestDecided(model.preferred))
}

/// Honest inputs and randoms, in honest-position order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub inputs: Vec<Bit>,
    pub randoms: Vec<u64>,
}

/// The uniform honest universe of a configuration.
#[derive(Clone, Debug)]
pub struct Universe {
    honest: Vec<usize>,
    n: usize,
    size: u128,
}

impl Universe {
    pub fn new(config: &RingConfig) -> Self {
        let honest = config.honest_positions();
        let n = config.n();
        let size = (2 * n as u128).checked_pow(honest.len() as u32).unwrap_or(u128::MAX);
        Universe { honest, n, size }
    }

    pub fn len(&self) -> u128 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn honest(&self) -> &[usize] {
        &self.honest
    }

    pub fn get(&self, index: u128) -> Assignment {
        let h = self.honest.len();
        let mut a = Assignment { inputs: vec![Bit::ZERO; h], randoms: vec![0; h] };
        self.fill(index, &mut a);
        a
    }

    /// [`get`](Self::get) into an existing assignment of the right shape.
    pub fn fill(&self, index: u128, a: &mut Assignment) {
        let h = self.honest.len();
        let n = self.n as u64;
        // u64 arithmetic is enough for every universe that passes a capacity check.
        let mut rest = (index >> h) as u64;
        for i in 0..h {
            a.inputs[i] = Bit::new((index >> i) & 1 == 1);
            a.randoms[i] = rest % n;
            rest /= n;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        (0..self.size).map(move |i| self.get(i))
    }

    /// Visit every point with one reused buffer.
    pub fn try_for_each(&self, mut f: impl FnMut(&Assignment) -> Result<()>) -> Result<()> {
        let mut a = self.get(0);
        for i in 0..self.size {
            self.fill(i, &mut a);
            f(&a)?;
        }
        Ok(())
    }
}

/// One execution: honest nodes from `assignment`, coalition seats from `strategy`.
pub fn run_assignment(config: &RingConfig, strategy: &dyn CoalitionStrategy, assignment: &Assignment) -> Result<Trace> {
    let mut runner = Runner::new(config, strategy);
    runner.run(assignment)?;
    Ok(runner.trace)
}

/// Runs many assignments against one strategy, reusing seat and trace buffers.
pub(crate) struct Runner<'a> {
    config: &'a RingConfig,
    strategy: &'a dyn CoalitionStrategy,
    honest: usize,
    seats: Vec<Seat<'a>>,
    trace: Trace,
}

impl<'a> Runner<'a> {
    pub fn new(config: &'a RingConfig, strategy: &'a dyn CoalitionStrategy) -> Self {
        Runner {
            config,
            strategy,
            honest: (0..config.n()).filter(|&p| config.is_honest(p)).count(),
            seats: Vec::with_capacity(config.n()),
            trace: Trace::blank(config),
        }
    }

    pub fn run(&mut self, assignment: &Assignment) -> Result<&Trace> {
        let config = self.config;
        let n = config.n();
        let h = assignment.inputs.len();
        if h != self.honest || assignment.randoms.len() != self.honest {
            return Err(Error::LengthMismatch { expected: self.honest, actual: h.min(assignment.randoms.len()) });
        }
        let mut members = self.strategy.members(config)?.into_iter().peekable();
        let mut next_honest = 0;
        self.seats.clear();
        for p in 0..n {
            if config.is_honest(p) {
                let i = next_honest;
                next_honest += 1;
                let b = honest_behavior(n, config.id(p), assignment.inputs[i], assignment.randoms[i])?;
                self.seats.push(Seat::Honest(b));
            } else {
                match members.next_if(|(q, _)| *q == p) {
                    Some((_, b)) => self.seats.push(Seat::Member(b)),
                    None => return Err(Error::NotCoalition(p)),
                }
            }
        }
        run_ring_into(config, &mut self.seats, &mut self.trace)?;
        Ok(&self.trace)
    }
}

enum Seat<'a> {
    Honest(HonestBehavior),
    Member(Box<dyn Behavior + 'a>),
}

impl Behavior for Seat<'_> {
    fn send(&mut self, round: usize) -> Option<crate::protocol::Triplet> {
        match self {
            Seat::Honest(b) => b.send(round),
            Seat::Member(b) => b.send(round),
        }
    }
    fn receive(&mut self, round: usize, message: Option<crate::protocol::Triplet>) {
        match self {
            Seat::Honest(b) => b.receive(round, message),
            Seat::Member(b) => b.receive(round, message),
        }
    }
    fn decide(&mut self) -> Decision {
        match self {
            Seat::Honest(b) => b.decide(),
            Seat::Member(b) => b.decide(),
        }
    }
    fn leader(&self) -> Option<crate::protocol::IdEntry> {
        match self {
            Seat::Honest(b) => b.leader(),
            Seat::Member(b) => b.leader(),
        }
    }
}

fn require_honest(config: &RingConfig) -> Result<Universe> {
    let universe = Universe::new(config);
    if universe.honest().is_empty() {
        return Err(Error::Unsupported("the ring has no honest node".into()));
    }
    Ok(universe)
}

/// Run every point of the honest universe and count outcomes.
pub fn exact_distribution(
    config: &RingConfig,
    strategy: &dyn CoalitionStrategy,
    limits: &Limits,
) -> Result<OutcomeDistribution> {
    let universe = require_honest(config)?;
    limits.check(universe.len())?;
    let mut dist = OutcomeDistribution::default();
    let mut runner = Runner::new(config, strategy);
    universe.try_for_each(|a| {
        dist.record(classify(runner.run(a)?, config));
        Ok(())
    })?;
    Ok(dist)
}

/// Rank of `u`'s elected leader in its sorted id array.
pub(crate) fn leader_index(trace: &Trace, u: usize) -> Option<usize> {
    let leader = trace.leader(u)?;
    let n = trace.n();
    let mut ids: Vec<u64> = (1..n).filter_map(|r| trace.received(u, r).map(|t| t.id)).collect();
    ids.push(trace.sent(u, 1)?.id);
    ids.sort_unstable();
    ids.iter().position(|&id| id == leader.id)
}
