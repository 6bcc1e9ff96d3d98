pub mod evaluate;
pub mod radar;
pub mod synth;
pub mod transform;

use crate::config::RunConfig;

/// Global flags merged with the config file.
pub struct Context {
    pub seed: Option<u64>,
    pub config: RunConfig,
}

impl Context {
    pub fn seed(&self) -> Option<u64> {
        self.seed.or(self.config.seed)
    }
}
