//! One runner per `--check`. Each returns a pass/fail record; only capacity and
//! config problems are errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrl_core::adversary::{enumerate_adaptive_strategies, enumerate_fixed_strategies, fixed_stream_forger, IdPattern};
use rrl_core::analysis::{
    best_response_search_with, check_fairness, check_leader_uniformity, monte_carlo, strategy_utility,
    EquilibriumReport, Limits, Universe, UtilityModel, Verdict,
};
use rrl_core::impossibility::{
    derive_constraints, equilibrium_functions_bruteforce, satisfies_constancy, ConsensusFunction, Derivation,
    BRUTEFORCE_MAX_N, MAX_ARITY,
};
use rrl_core::Prob;
use serde_json::json;

use crate::config::{CheckKind, ExperimentConfig, SpaceKind};
use crate::error::CliError;
use crate::report::CheckResult;

/// Coalition randoms offered to the adaptive space.
const ADAPTIVE_RANDOMS: [u64; 2] = [0, 1];

/// Z-score within which a sampled estimate counts as agreeing with the exact value.
const MC_TOLERANCE_SE: f64 = 4.0;

fn limits(config: &ExperimentConfig) -> Limits {
    Limits { max_universe: config.max_universe }
}

pub fn run_all(config: &ExperimentConfig) -> Result<Vec<CheckResult>, CliError> {
    let mut results = Vec::new();
    let mut search = None;
    for &check in &config.checks {
        let result = match check {
            CheckKind::Fairness => fairness(config)?,
            CheckKind::Uniformity => uniformity(config)?,
            CheckKind::Conditional | CheckKind::FullControl | CheckKind::BestResponse => {
                if search.is_none() {
                    search = Some(search_pass(config)?);
                }
                search.as_ref().expect("just ran").result(check)
            }
            CheckKind::Impossibility => impossibility(config)?,
            CheckKind::Uniqueness => uniqueness(config)?,
            CheckKind::MonteCarlo => monte_carlo_check(config)?,
        };
        results.push(result);
    }
    Ok(results)
}

fn fairness(config: &ExperimentConfig) -> Result<CheckResult, CliError> {
    let r = check_fairness(config.n, &limits(config))?;
    Ok(CheckResult::new(
        CheckKind::Fairness,
        r.passed(),
        format!(
            "P={} over {} traces, {} agreement and {} validity violations",
            r.p_one, r.traces, r.agreement_violations, r.validity_violations
        ),
    )
    .metric("n", r.n)
    .metric("traces", r.traces)
    .metric("p_one", r.p_one)
    .metric("p_zero", r.p_zero)
    .metric("agreement_violations", r.agreement_violations)
    .metric("validity_violations", r.validity_violations)
    .witness(r.witness.map(|w| json!(w))))
}

/// Sweep every honest node's random for `scripts` seeded draws from the fixed space.
fn uniformity(config: &ExperimentConfig) -> Result<CheckResult, CliError> {
    let ring = config.ring()?;
    let space = enumerate_fixed_strategies(&ring, &IdPattern::ALL);
    let universe = Universe::new(&ring);
    limits(config).check(u128::from(config.scripts).saturating_mul(universe.len()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut sweeps, mut bad) = (0u64, 0u64);
    let mut witness = None;
    for _ in 0..config.scripts {
        let script = space.get(rng.gen_range(0..space.len())).expect("index in range");
        let strategy = fixed_stream_forger(&ring, script.clone())?;
        for (slot, &u) in universe.honest().iter().enumerate() {
            for base in universe.iter().filter(|a| a.randoms[slot] == 0) {
                let r = check_leader_uniformity(&ring, &strategy, u, &base)?;
                sweeps += 1;
                if !r.passed() {
                    bad += 1;
                    witness.get_or_insert_with(|| json!({ "script": script, "base": base, "report": r }));
                }
            }
        }
    }
    Ok(CheckResult::new(
        CheckKind::Uniformity,
        bad == 0,
        format!("{} scripts, {sweeps} sweeps, {bad} non-uniform", config.scripts),
    )
    .metric("scripts", config.scripts)
    .metric("sweeps", sweeps)
    .metric("non_uniform", bad)
    .witness(witness))
}

/// One exhaustive pass serves the conditional, full-control and best-response checks.
struct SearchPass {
    report: EquilibriumReport,
    conditional_witness: Option<serde_json::Value>,
    full_control_witness: Option<serde_json::Value>,
}

fn search_pass(config: &ExperimentConfig) -> Result<SearchPass, CliError> {
    let ring = config.ring()?;
    let space = match config.space {
        SpaceKind::Fixed => enumerate_fixed_strategies(&ring, &IdPattern::ALL),
        SpaceKind::Adaptive => enumerate_adaptive_strategies(&ring, &ADAPTIVE_RANDOMS),
    };
    let mut conditional_witness = None;
    let mut full_control_witness = None;
    let report = best_response_search_with(&ring, config.preferred_bit(), &space, &limits(config), |script, eval| {
        if conditional_witness.is_none() && !eval.conditional_half_holds() {
            conditional_witness = Some(json!({ "script": script, "nodes": eval.nodes }));
        }
        if full_control_witness.is_none() && eval.full_control_violations > 0 {
            full_control_witness = Some(json!({ "script": script, "violations": eval.full_control_violations }));
        }
    })?;
    Ok(SearchPass { report, conditional_witness, full_control_witness })
}

impl SearchPass {
    fn result(&self, check: CheckKind) -> CheckResult {
        let r = &self.report;
        let d = &r.diagnostics;
        match check {
            CheckKind::Conditional => CheckResult::new(
                check,
                d.conditional_half_violations == 0,
                format!(
                    "{} of {} scripts violate the conditional half",
                    d.conditional_half_violations, r.strategies_evaluated
                ),
            )
            .metric("scripts", r.strategies_evaluated)
            .metric("violating_scripts", d.conditional_half_violations)
            .witness(self.conditional_witness.clone()),
            CheckKind::FullControl => CheckResult::new(
                check,
                d.full_control_violations == 0,
                format!("{} self-elected traces, {} exceptions", d.full_control_checks, d.full_control_violations),
            )
            .metric("self_elected_traces", d.full_control_checks)
            .metric("exceptions", d.full_control_violations)
            .witness(self.full_control_witness.clone()),
            CheckKind::BestResponse => {
                let witness = match &r.verdict {
                    Verdict::ProfitableDeviation { witness } => Some(json!({ "script": witness })),
                    Verdict::NoProfitableDeviation => None,
                };
                CheckResult::new(
                    check,
                    r.verdict == Verdict::NoProfitableDeviation,
                    format!("max={} baseline={} over {} scripts", r.best_utility, r.baseline, r.strategies_evaluated),
                )
                .metric("max", r.best_utility)
                .metric("baseline", r.baseline)
                .metric("scripts", r.strategies_evaluated)
                .metric("detecting_scripts", d.detecting_scripts)
                .metric("best_script", r.best_strategy.as_ref().map(|s| s.to_json()).unwrap_or_default())
                .witness(witness)
            }
            _ => unreachable!("not a search check"),
        }
    }
}

fn check_arity(n: usize) -> Result<(), CliError> {
    if n > MAX_ARITY {
        return Err(CliError::Capacity(format!("truth tables stop at n = {MAX_ARITY}, got {n}")));
    }
    Ok(())
}

fn derivation_label(d: &Derivation) -> String {
    match d {
        Derivation::Contradiction { .. } => "contradiction".into(),
        Derivation::UniqueFunction(f) => format!("unique {}", f.name().unwrap_or_else(|| f.to_hex())),
    }
}

/// Even rings admit no equilibrium function; odd rings admit exactly parity.
fn impossibility(config: &ExperimentConfig) -> Result<CheckResult, CliError> {
    let n = config.n;
    check_arity(n)?;
    let derivation = derive_constraints(n);
    let derived_ok = match &derivation {
        Derivation::Contradiction { .. } => n.is_multiple_of(2),
        Derivation::UniqueFunction(f) => n % 2 == 1 && *f == ConsensusFunction::xor(n),
    };
    let mut result = if n <= BRUTEFORCE_MAX_N {
        let survivors = equilibrium_functions_bruteforce(n)?;
        let expected = if n.is_multiple_of(2) { 0 } else { 1 };
        CheckResult::new(
            CheckKind::Impossibility,
            derived_ok && survivors.len() == expected,
            format!("survivors: {}; derivation: {}", survivors.len(), derivation_label(&derivation)),
        )
        .metric("survivors", survivors.len())
    } else {
        CheckResult::new(
            CheckKind::Impossibility,
            derived_ok,
            format!(
                "derivation: {} (tables enumerated only up to n = {BRUTEFORCE_MAX_N})",
                derivation_label(&derivation)
            ),
        )
    };
    result = result.metric("n", n).metric("derivation", derivation_label(&derivation));
    if !derived_ok {
        result = result.witness(Some(json!(derivation)));
    }
    Ok(result)
}

/// At most one function survives, and if one does it is parity.
fn uniqueness(config: &ExperimentConfig) -> Result<CheckResult, CliError> {
    let n = config.n;
    check_arity(n)?;
    let survivors = if n <= BRUTEFORCE_MAX_N {
        equilibrium_functions_bruteforce(n)?
    } else {
        match derive_constraints(n) {
            Derivation::UniqueFunction(f) if satisfies_constancy(&f) => vec![f],
            _ => Vec::new(),
        }
    };
    let passed = match survivors.as_slice() {
        [] => n.is_multiple_of(2),
        [f] => n % 2 == 1 && *f == ConsensusFunction::xor(n),
        _ => false,
    };
    let names: Vec<String> = survivors
        .iter()
        .map(|f| format!("{} ({})", f.to_hex(), f.name().unwrap_or_else(|| "unnamed".into())))
        .collect();
    let summary =
        if names.is_empty() { "no surviving function".to_string() } else { format!("survivors: {}", names.join(", ")) };
    Ok(CheckResult::new(CheckKind::Uniqueness, passed, summary)
        .metric("n", n)
        .metric("survivors", survivors.len())
        .witness((!passed).then(|| json!(survivors))))
}

fn monte_carlo_check(config: &ExperimentConfig) -> Result<CheckResult, CliError> {
    let ring = config.ring()?;
    let strategy = config.strategy.build(&ring, config.preferred_bit())?;
    let model = UtilityModel { preferred: config.preferred_bit() };
    let e = monte_carlo(&ring, strategy.as_ref(), &model, config.samples, config.seed)?;
    let exact = match strategy_utility(&ring, strategy.as_ref(), config.preferred_bit(), &limits(config)) {
        Ok(p) => Some(p),
        Err(err) if err.is_capacity() => None,
        Err(err) => return Err(err.into()),
    };
    let mut result = match exact {
        Some(p) => {
            let z = e.z_score(to_f64(p));
            CheckResult::new(
                CheckKind::MonteCarlo,
                z <= MC_TOLERANCE_SE,
                format!("estimate {:.6} (se {:.6}) against exact {p}, z={z:.2}", e.estimate, e.std_error),
            )
            .metric("exact", p)
            .metric("z_score", z)
        }
        None => CheckResult::new(
            CheckKind::MonteCarlo,
            true,
            format!("estimate {:.6} (se {:.6}); exact value beyond the capacity bound", e.estimate, e.std_error),
        ),
    };
    result = result
        .metric("estimate", e.estimate)
        .metric("std_error", e.std_error)
        .metric("samples", e.samples)
        .metric("successes", e.successes)
        .metric("seed", e.seed);
    Ok(result)
}

fn to_f64(p: Prob) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}
