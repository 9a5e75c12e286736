//! Deterministic policy gradients with a prior-matching penalty on the
//! actor: the actor minimizes `−E[Q(s, π(s))] + λ·L`, where `L` is the mean
//! squared gap between the mini-batch mean action and a fixed prior.

mod checkpoint;
mod losses;
mod networks;
mod replay;
mod train;

pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_VERSION};
pub use losses::{actor_loss, critic_loss, mean_action, regularization_loss, soft_update, td_target};
pub use networks::{act, recent, ActorNetwork, CriticNetwork, CriticTrace, ACTION_DIM, CRITIC_WIDTH, RECURRENT_UNITS};
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    train, train_from, ActorPolicy, EpochRecord, MarketTrainingEnv, RewardFn, TrainConfig, TrainOutcome,
    TrainingEnv, TrainingLog, TRAINING_LOG_HEADER,
};
