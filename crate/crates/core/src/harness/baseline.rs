//! Fixed association policies used for comparison.

use crate::env::{DtwnEnv, JointAction};
use crate::error::Result;
use crate::maddpg::Controller;
use crate::rng::{stream_rng, streams, SimRng};

/// Uniformly random association, batch fractions and shares each step.
pub struct RandomBaseline {
    rng: SimRng,
}

impl RandomBaseline {
    pub fn new(seed: u64) -> Self {
        Self { rng: stream_rng(seed, streams::BASELINE) }
    }
}

impl Controller for RandomBaseline {
    fn act(&mut self, env: &DtwnEnv, _features: &[f64]) -> Result<JointAction> {
        let net = env.network();
        Ok(JointAction::random(net.num_bs(), net.num_users(), net.num_subchannels, env.config(), &mut self.rng))
    }
}

/// Even split of twins, midpoint batch fraction, equal shares.
pub struct AverageBaseline;

impl Controller for AverageBaseline {
    fn act(&mut self, env: &DtwnEnv, _features: &[f64]) -> Result<JointAction> {
        let net = env.network();
        Ok(JointAction::average(net.num_bs(), net.num_users(), net.num_subchannels, env.config()))
    }
}
