//! Multi-agent deep deterministic policy gradient for edge association.
//!
//! Each base station runs an actor over the shared state and a critic over
//! the state and the joint action of all stations.

pub mod agent;
pub mod checkpoint;
pub mod noise;
pub mod replay;
pub mod train;

pub use agent::{critic_input, Agent, MaddpgConfig};
pub use noise::OuNoise;
pub use replay::{Batch, ReplayMemory, Transition};
pub use train::{episode_seed, eval_seed, evaluate, rollout, train, Controller, EpisodeStats, Learner, Maddpg, UpdateStats};
