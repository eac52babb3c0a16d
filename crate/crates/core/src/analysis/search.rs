use serde::Serialize;

use super::checks::{as_fraction, HalfCounter, NodeHalf};
use super::{classify, exact_distribution, require_honest, Limits, Outcome, Runner, UtilityModel};
use crate::adversary::{
    compute_view_partition, fixed_stream_forger, forge_targets, ForgeScript, ScriptSpace, Truthful,
};
use crate::bit::Bit;
use crate::error::{Error, Result};
use crate::protocol::Decision;
use crate::ring::RingConfig;
use crate::{adversary::CoalitionStrategy, Prob};

/// Exact statistics of one coalition strategy over the honest universe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScriptEvaluation {
    /// Probability that every honest node decides the preferred bit.
    #[serde(serialize_with = "as_fraction")]
    pub utility: Prob,
    #[serde(serialize_with = "as_fraction")]
    pub detected: Prob,
    #[serde(serialize_with = "as_fraction")]
    pub disagreement: Prob,
    pub nodes: Vec<NodeHalf>,
    /// Runs where a targeted node elected itself.
    pub full_control_checks: u64,
    /// ... and did not decide the parity of its lie-set inputs.
    pub full_control_violations: u64,
}

impl ScriptEvaluation {
    pub fn conditional_half_holds(&self) -> bool {
        self.nodes.iter().all(NodeHalf::passed)
    }
}

/// Evaluate `strategy` exactly, including the per-node and full-control statistics.
pub fn evaluate_script(
    config: &RingConfig,
    strategy: &dyn CoalitionStrategy,
    preferred: Bit,
    limits: &Limits,
) -> Result<ScriptEvaluation> {
    let universe = require_honest(config)?;
    limits.check(universe.len())?;
    let honest = universe.honest().to_vec();
    let targets = forge_targets(config);
    let model = UtilityModel { preferred };
    let mut counters = vec![HalfCounter::default(); honest.len()];
    let (mut wins, mut detected, mut disagreement, mut total) = (0u64, 0u64, 0u64, 0u64);
    let (mut checks, mut violations) = (0u64, 0u64);

    let mut runner = Runner::new(config, strategy);
    universe.try_for_each(|a| {
        let trace = runner.run(a)?;
        total += 1;
        match classify(trace, config) {
            Outcome::Erroneous => detected += 1,
            Outcome::HonestDisagreement => disagreement += 1,
            o => wins += model.utility(o),
        }
        for (c, &u) in counters.iter_mut().zip(&honest) {
            let self_elected = trace.leader(u).is_some_and(|l| l.id == config.id(u));
            c.record(trace.decision(u), self_elected);
            if self_elected && targets.contains(&u) {
                checks += 1;
                let view = compute_view_partition(trace, config, u)?;
                if trace.decision(u) != Decision::Decided(Bit::parity(view.input_l)) {
                    violations += 1;
                }
            }
        }
        Ok(())
    })?;
    Ok(ScriptEvaluation {
        utility: Prob::new(wins, total),
        detected: Prob::new(detected, total),
        disagreement: Prob::new(disagreement, total),
        nodes: counters.iter().zip(&honest).map(|(c, &u)| c.finish(u, config.is_honest(config.upstream(u)))).collect(),
        full_control_checks: checks,
        full_control_violations: violations,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    NoProfitableDeviation,
    ProfitableDeviation { witness: ForgeScript },
}

/// Aggregates over every script visited by a search.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SearchDiagnostics {
    /// Scripts where some honest node's conditional or unconditional half failed.
    pub conditional_half_violations: u64,
    pub full_control_checks: u64,
    pub full_control_violations: u64,
    /// Scripts with a positive detection probability.
    pub detecting_scripts: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquilibriumReport {
    pub n: usize,
    pub honest: Vec<usize>,
    pub preferred: Bit,
    #[serde(serialize_with = "as_fraction")]
    pub baseline: Prob,
    #[serde(serialize_with = "as_fraction")]
    pub best_utility: Prob,
    pub best_strategy: Option<ForgeScript>,
    pub strategies_evaluated: u128,
    pub verdict: Verdict,
    pub diagnostics: SearchDiagnostics,
}

/// [`best_response_search_with`] without a per-script callback.
pub fn best_response_search(
    config: &RingConfig,
    preferred: Bit,
    space: &ScriptSpace,
    limits: &Limits,
) -> Result<EquilibriumReport> {
    best_response_search_with(config, preferred, space, limits, |_, _| {})
}

/// Evaluate every script of `space` exactly and compare the best against the
/// truthful baseline, in which members run the protocol with input 0 and random 0.
///
/// The first script reaching the maximum is kept as the witness.
pub fn best_response_search_with(
    config: &RingConfig,
    preferred: Bit,
    space: &ScriptSpace,
    limits: &Limits,
    mut on_script: impl FnMut(&ForgeScript, &ScriptEvaluation),
) -> Result<EquilibriumReport> {
    if config.coalition_positions().is_empty() {
        return Err(Error::EmptyCoalition);
    }
    let universe = require_honest(config)?;
    limits.check(space.len().saturating_mul(universe.len()))?;

    let model = UtilityModel { preferred };
    let baseline_dist = exact_distribution(config, &Truthful::zeros(config), limits)?;
    let baseline = super::coalition_utility(&baseline_dist, &model);

    let mut best: Option<(Prob, ForgeScript)> = None;
    let mut diagnostics = SearchDiagnostics::default();
    let mut evaluated = 0u128;
    for script in space.iter() {
        let strategy = fixed_stream_forger(config, script)?;
        let eval = evaluate_script(config, &strategy, preferred, limits)?;
        evaluated += 1;
        diagnostics.conditional_half_violations += u64::from(!eval.conditional_half_holds());
        diagnostics.full_control_checks += eval.full_control_checks;
        diagnostics.full_control_violations += eval.full_control_violations;
        diagnostics.detecting_scripts += u64::from(eval.detected > Prob::from_integer(0));
        on_script(&strategy.script, &eval);
        if best.as_ref().is_none_or(|(u, _)| eval.utility > *u) {
            best = Some((eval.utility, strategy.script));
        }
    }

    let (best_utility, best_strategy) = match best {
        Some((u, s)) => (u, Some(s)),
        None => (Prob::from_integer(0), None),
    };
    let verdict = match &best_strategy {
        Some(s) if best_utility > baseline => Verdict::ProfitableDeviation { witness: s.clone() },
        _ => Verdict::NoProfitableDeviation,
    };
    Ok(EquilibriumReport {
        n: config.n(),
        honest: config.honest_positions(),
        preferred,
        baseline,
        best_utility,
        best_strategy,
        strategies_evaluated: evaluated,
        verdict,
        diagnostics,
    })
}

/// Utility of an arbitrary strategy, for callers that only need the number.
pub fn strategy_utility(
    config: &RingConfig,
    strategy: &dyn CoalitionStrategy,
    preferred: Bit,
    limits: &Limits,
) -> Result<Prob> {
    let dist = exact_distribution(config, strategy, limits)?;
    Ok(super::coalition_utility(&dist, &UtilityModel { preferred }))
}
