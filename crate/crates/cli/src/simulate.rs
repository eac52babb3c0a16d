use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrl_core::analysis::{classify, run_assignment, Assignment};
use rrl_core::Bit;
use serde_json::json;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

/// One execution with honest inputs and randoms drawn from the config's seed.
///
/// Draws follow the Monte Carlo sampler: for each honest node in position order,
/// an input bit, then a random in `Z_n`.
pub fn simulate(config: &ExperimentConfig) -> Result<String, CliError> {
    let ring = config.ring()?;
    let strategy = config.strategy.build(&ring, config.preferred_bit())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h = config.honest_positions().len();
    let mut assignment = Assignment { inputs: vec![Bit::ZERO; h], randoms: vec![0; h] };
    for i in 0..h {
        assignment.inputs[i] = Bit::new(rng.gen_bool(0.5));
        assignment.randoms[i] = rng.gen_range(0..config.n as u64);
    }
    let trace = run_assignment(&ring, strategy.as_ref(), &assignment)?;
    let outcome = classify(&trace, &ring);
    match config.output.format {
        Format::Json => {
            let doc = json!({
                "config": config,
                "assignment": assignment,
                "outcome": outcome,
                "trace": trace.to_json(),
            });
            Ok(serde_json::to_string_pretty(&doc).expect("trace serializes") + "\n")
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| CliError::Output(e.to_string());
            w.write_record(["position", "id", "role", "decision", "leader_id"]).map_err(err)?;
            let nodes = trace.to_json()["nodes"].as_array().cloned().unwrap_or_default();
            for node in nodes {
                let field = |k: &str| match &node[k] {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Null => String::new(),
                    v => v.to_string(),
                };
                let leader = node["leader"]["id"].as_u64().map(|id| id.to_string()).unwrap_or_default();
                w.write_record([field("position"), field("id"), field("role"), field("decision"), leader])
                    .map_err(err)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("utf-8 fields"))
        }
    }
}
