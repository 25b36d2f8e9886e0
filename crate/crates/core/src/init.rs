//! Seeded random parameter source used for benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{Init, ModelWeights, ParamSource};
use crate::pipeline::QuickVc;

/// Draws each requested tensor from its [`Init`] and records it, so the
/// result can be saved as a regular container.
pub struct RandomInit {
    rng: ChaCha8Rng,
    weights: ModelWeights,
}

impl RandomInit {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            weights: ModelWeights::new(config),
        }
    }

    pub fn into_weights(self) -> ModelWeights {
        self.weights
    }
}

impl ParamSource for RandomInit {
    fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Vec<f32>> {
        if self.weights.get(name).is_some() {
            return Err(Error::Config(format!("parameter {name:?} requested twice")));
        }
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Uniform(bound) => (0..n).map(|_| self.rng.random_range(-bound..=bound)).collect(),
            Init::Zeros => vec![0.0; n],
            Init::Values(v) => v,
        };
        self.weights.insert(name, shape.to_vec(), data.clone())?;
        Ok(data)
    }
}

/// Random weights covering every tensor the model reads, in the layout a
/// strict load expects.
pub fn random_weights(config: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    config.validate()?;
    let mut src = RandomInit::new(config.clone(), seed);
    QuickVc::build(&mut src, config)?;
    Ok(src.into_weights())
}
