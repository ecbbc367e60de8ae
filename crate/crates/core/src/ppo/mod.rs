//! From-scratch PPO (clip variant) with a REINFORCE arm.

pub mod adam;
pub mod agent;
pub mod net;
pub mod persist;
pub mod train;

pub use agent::{
    advantages, clip_objective, ppo_loss_grad, reinforce_loss_grad, reinforce_update,
    rewards_to_go, update, Hyperparams, Learner, Objective, Sample,
};
pub use net::{policy_forward, value_forward, Architecture, PolicyNet};
pub use persist::{config_hash, load_params, save_params, LoadedModel};
pub use train::{
    evaluate, train, train_from, CurvePoint, EpisodeSource, Evaluation, GreedyPolicy,
    SamplingPolicy, SimSource, TrainConfig, TrainOutcome,
};
