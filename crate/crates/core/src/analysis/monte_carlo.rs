use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{classify, require_honest, Assignment, Runner, UtilityModel};
use crate::adversary::CoalitionStrategy;
use crate::bit::Bit;
use crate::error::{Error, Result};
use crate::ring::RingConfig;

/// A sampled coalition utility.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// `sqrt(p̂(1 − p̂) / (N − 1))`, zero for a single sample.
    pub std_error: f64,
    pub seed: u64,
    pub samples: u64,
    pub successes: u64,
}

impl McEstimate {
    /// Distance from `value` in standard errors. Infinite if the error is zero and the values differ.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.estimate - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Sample honest inputs and randoms from a ChaCha8 stream seeded with `seed`.
///
/// The same seed always replays the same runs.
pub fn monte_carlo(
    config: &RingConfig,
    strategy: &dyn CoalitionStrategy,
    model: &UtilityModel,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::Unsupported("monte carlo needs at least one sample".into()));
    }
    let universe = require_honest(config)?;
    let h = universe.honest().len();
    let n = config.n() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Assignment { inputs: vec![Bit::ZERO; h], randoms: vec![0; h] };
    let mut successes = 0u64;
    let mut runner = Runner::new(config, strategy);
    for _ in 0..samples {
        for i in 0..h {
            a.inputs[i] = Bit::new(rng.gen_bool(0.5));
            a.randoms[i] = rng.gen_range(0..n);
        }
        successes += model.utility(classify(runner.run(&a)?, config));
    }
    let p = successes as f64 / samples as f64;
    let std_error = if samples > 1 { (p * (1.0 - p) / (samples - 1) as f64).sqrt() } else { 0.0 };
    Ok(McEstimate { estimate: p, std_error, seed, samples, successes })
}
