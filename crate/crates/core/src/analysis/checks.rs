use std::collections::BTreeMap;

use serde::Serialize;

use super::{classify, leader_index, require_honest, run_assignment, Assignment, Fraction, Limits, Outcome, Runner};
use crate::adversary::{CoalitionStrategy, Truthful};
use crate::bit::Bit;
use crate::error::{Error, Result};
use crate::protocol::Decision;
use crate::ring::RingConfig;
use crate::Prob;

/// Agreement, validity and balance of an all-honest ring over its whole universe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    pub n: usize,
    pub traces: u64,
    #[serde(serialize_with = "as_fraction")]
    pub p_one: Prob,
    #[serde(serialize_with = "as_fraction")]
    pub p_zero: Prob,
    pub agreement_violations: u64,
    pub validity_violations: u64,
    /// First violating point, if any.
    pub witness: Option<Assignment>,
}

impl FairnessReport {
    pub fn passed(&self) -> bool {
        let half = Prob::new(1, 2);
        self.agreement_violations == 0 && self.validity_violations == 0 && self.p_one == half && self.p_zero == half
    }
}

pub(crate) fn as_fraction<S: serde::Serializer>(p: &Prob, s: S) -> Result<S::Ok, S::Error> {
    Fraction::from(*p).serialize(s)
}

/// Enumerate all `2^n · n^n` honest executions of an even ring.
pub fn check_fairness(n: usize, limits: &Limits) -> Result<FairnessReport> {
    if n % 2 == 1 {
        return Err(Error::Unsupported(format!("fairness is claimed for even rings only, got n = {n}")));
    }
    let config = RingConfig::all_honest(n)?;
    let universe = require_honest(&config)?;
    limits.check(universe.len())?;

    let mut report = FairnessReport {
        n,
        traces: 0,
        p_one: Prob::from_integer(0),
        p_zero: Prob::from_integer(0),
        agreement_violations: 0,
        validity_violations: 0,
        witness: None,
    };
    let (mut ones, mut zeros) = (0u64, 0u64);
    let nobody = Truthful::zeros(&config);
    let mut runner = Runner::new(&config, &nobody);
    universe.try_for_each(|a| {
        let trace = runner.run(a)?;
        report.traces += 1;
        let mut bad = false;
        match classify(trace, &config) {
            Outcome::AllHonestDecided(b) => {
                if b.is_one() {
                    ones += 1;
                } else {
                    zeros += 1;
                }
                let unanimous = a.inputs.iter().all(|&x| x == a.inputs[0]);
                if unanimous && b != a.inputs[0] {
                    report.validity_violations += 1;
                    bad = true;
                }
            }
            _ => {
                report.agreement_violations += 1;
                bad = true;
            }
        }
        if bad && report.witness.is_none() {
            report.witness = Some(a.clone());
        }
        Ok(())
    })?;
    report.p_one = Prob::new(ones, report.traces);
    report.p_zero = Prob::new(zeros, report.traces);
    Ok(report)
}

/// Distribution of the leader an honest node elects as its own random varies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeaderUniformityReport {
    pub position: usize,
    /// Probability of each index of the sorted id array, among non-detected runs.
    #[serde(serialize_with = "fractions")]
    pub per_index: Vec<Prob>,
    pub per_leader_id: BTreeMap<u64, Fraction>,
    #[serde(serialize_with = "as_fraction")]
    pub detected: Prob,
}

fn fractions<S: serde::Serializer>(v: &[Prob], s: S) -> Result<S::Ok, S::Error> {
    let f: Vec<Fraction> = v.iter().map(|&p| p.into()).collect();
    f.serialize(s)
}

impl LeaderUniformityReport {
    pub fn passed(&self) -> bool {
        let n = self.per_index.len() as u64;
        self.detected != Prob::from_integer(1) && self.per_index.iter().all(|&p| p == Prob::new(1, n))
    }
}

/// Fix everything in `base` except honest node `u`'s random and sweep that over `Z_n`.
pub fn check_leader_uniformity(
    config: &RingConfig,
    strategy: &dyn CoalitionStrategy,
    u: usize,
    base: &Assignment,
) -> Result<LeaderUniformityReport> {
    config.check_position(u)?;
    let slot = config.honest_positions().iter().position(|&p| p == u).ok_or(Error::NotHonest(u))?;
    let n = config.n();
    let mut per_index = vec![0u64; n];
    let mut per_id: BTreeMap<u64, u64> = BTreeMap::new();
    let mut detected = 0u64;
    for r in 0..n as u64 {
        let mut a = base.clone();
        a.randoms[slot] = r;
        let trace = run_assignment(config, strategy, &a)?;
        match (trace.decision(u), leader_index(&trace, u)) {
            (Decision::Decided(_), Some(i)) => {
                per_index[i] += 1;
                *per_id.entry(trace.leader(u).expect("decided").id).or_insert(0) += 1;
            }
            _ => detected += 1,
        }
    }
    let decided = n as u64 - detected;
    let frac = |c: u64| if decided == 0 { Prob::from_integer(0) } else { Prob::new(c, decided) };
    Ok(LeaderUniformityReport {
        position: u,
        per_index: per_index.into_iter().map(frac).collect(),
        per_leader_id: per_id.into_iter().map(|(id, c)| (id, frac(c).into())).collect(),
        detected: Prob::new(detected, n as u64),
    })
}

/// Decision statistics of one honest node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeHalf {
    pub position: usize,
    pub upstream_honest: bool,
    /// `P(decides 1 | elected leader is not itself)`.
    #[serde(serialize_with = "as_fraction")]
    pub given_other_leader: Prob,
    #[serde(serialize_with = "as_fraction")]
    pub unconditional: Prob,
}

impl NodeHalf {
    pub fn passed(&self) -> bool {
        let half = Prob::new(1, 2);
        self.given_other_leader == half && (!self.upstream_honest || self.unconditional == half)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionalHalfReport {
    pub nodes: Vec<NodeHalf>,
}

impl ConditionalHalfReport {
    pub fn passed(&self) -> bool {
        self.nodes.iter().all(NodeHalf::passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &NodeHalf> {
        self.nodes.iter().filter(|n| !n.passed())
    }
}

#[derive(Clone, Copy, Default, Debug)]
pub(crate) struct HalfCounter {
    pub other_leader: u64,
    pub other_leader_ones: u64,
    pub total: u64,
    pub ones: u64,
}

impl HalfCounter {
    pub fn record(&mut self, decision: Decision, self_elected: bool) {
        self.total += 1;
        let one = decision == Decision::Decided(Bit::ONE);
        self.ones += u64::from(one);
        if decision.bit().is_some() && !self_elected {
            self.other_leader += 1;
            self.other_leader_ones += u64::from(one);
        }
    }

    pub fn finish(&self, position: usize, upstream_honest: bool) -> NodeHalf {
        let frac = |a, b| if b == 0 { Prob::from_integer(0) } else { Prob::new(a, b) };
        NodeHalf {
            position,
            upstream_honest,
            given_other_leader: frac(self.other_leader_ones, self.other_leader),
            unconditional: frac(self.ones, self.total),
        }
    }
}

/// Conditioned on electing someone else, every honest node decides 1 with
/// probability exactly 1/2; a node whose upstream neighbour is honest does so
/// unconditionally.
pub fn check_conditional_half(
    config: &RingConfig,
    strategy: &dyn CoalitionStrategy,
    limits: &Limits,
) -> Result<ConditionalHalfReport> {
    let universe = require_honest(config)?;
    limits.check(universe.len())?;
    let honest = universe.honest().to_vec();
    let mut counters = vec![HalfCounter::default(); honest.len()];
    let mut runner = Runner::new(config, strategy);
    universe.try_for_each(|a| {
        let trace = runner.run(a)?;
        for (c, &u) in counters.iter_mut().zip(&honest) {
            let self_elected = trace.leader(u).is_some_and(|l| l.id == config.id(u));
            c.record(trace.decision(u), self_elected);
        }
        Ok(())
    })?;
    Ok(ConditionalHalfReport {
        nodes: counters.iter().zip(&honest).map(|(c, &u)| c.finish(u, config.is_honest(config.upstream(u)))).collect(),
    })
}
