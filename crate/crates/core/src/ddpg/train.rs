use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::losses::{actor_loss, critic_loss, mean_action, prior_gap, soft_update};
use super::networks::{recent, ActorNetwork, CriticNetwork, ACTION_DIM};
use super::replay::{ReplayBuffer, Transition};
use crate::affinity::AffinityPrior;
use crate::error::{Error, Result};
use crate::market::{AllocationAction, MarketEnv, Policy, PortfolioState};
use crate::numerics::{softmax_in_place, Optimizer, OptimizerKind};

pub const TRAINING_LOG_HEADER: &str =
    "epoch,mean_reward,mean_act_0,mean_act_1,mean_act_2,mean_act_3,mean_act_4,reg_loss,actor_loss,critic_loss";

/// Hyperparameters of one training run. One epoch is one episode followed
/// by `updates_per_episode` gradient steps on replayed mini-batches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub updates_per_episode: usize,
    /// Exploration noise on the logits, decayed linearly from `noise_scale`
    /// at the first epoch to `noise_floor` at the last.
    pub noise_scale: f64,
    pub noise_floor: f64,
    pub replay_capacity: usize,
    /// Trailing observations seen by both networks; 0 means the whole episode so far.
    pub history_window: usize,
    pub critic_width: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            actor_lr: 0.005,
            critic_lr: 0.01,
            tau: 0.05,
            gamma: 0.95,
            lambda: 5.0,
            batch_size: 64,
            episodes: 60,
            updates_per_episode: 60,
            noise_scale: 0.1,
            noise_floor: 0.01,
            replay_capacity: 100_000,
            history_window: 12,
            critic_width: super::networks::CRITIC_WIDTH,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Contract(msg));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau {} outside (0, 1]", self.tau));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("lambda {} must be non-negative", self.lambda));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.critic_width == 0 {
            return fail("batch size, replay capacity and critic width must be positive".into());
        }
        if !(self.noise_scale >= 0.0 && self.noise_floor >= 0.0) {
            return fail("noise scales must be non-negative".into());
        }
        Ok(())
    }

    fn noise_at(&self, epoch: usize) -> f64 {
        let frac = if self.episodes > 1 {
            epoch as f64 / (self.episodes - 1) as f64
        } else {
            0.0
        };
        self.noise_scale + (self.noise_floor - self.noise_scale) * frac
    }
}

/// An episodic environment driven by simplex actions.
pub trait TrainingEnv {
    fn obs_dim(&self) -> usize;

    fn horizon(&self) -> usize;

    /// Starts a new episode and returns its first observation.
    fn reset(&mut self) -> Result<Vec<f64>>;

    /// Applies `action`, returning the next observation and the reward.
    fn step(&mut self, action: &AllocationAction) -> Result<(Vec<f64>, f64)>;
}

/// Reward computed from (state, action, next state).
pub type RewardFn = Box<dyn Fn(&PortfolioState, &AllocationAction, &PortfolioState) -> f64 + Send + Sync>;

/// The investment environment with an attached reward function.
pub struct MarketTrainingEnv {
    pub market: MarketEnv,
    reward: RewardFn,
    state: PortfolioState,
}

impl MarketTrainingEnv {
    pub fn new(market: MarketEnv, reward: RewardFn) -> Self {
        let state = market.initial_state();
        Self { market, reward, state }
    }

    pub fn state(&self) -> &PortfolioState {
        &self.state
    }
}

impl TrainingEnv for MarketTrainingEnv {
    fn obs_dim(&self) -> usize {
        self.market.obs_dim()
    }

    fn horizon(&self) -> usize {
        self.market.horizon()
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.state = self.market.initial_state();
        Ok(self.market.observe(&self.state))
    }

    fn step(&mut self, action: &AllocationAction) -> Result<(Vec<f64>, f64)> {
        let next = self.market.step(&self.state, action)?;
        let reward = (self.reward)(&self.state, action, &next);
        self.state = next;
        Ok((self.market.observe(&next), reward))
    }
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_action: [f64; ACTION_DIM],
    pub reg_loss: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(TRAINING_LOG_HEADER);
        out.push('\n');
        for r in &self.epochs {
            let a = r.mean_action;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.epoch, r.mean_reward, a[0], a[1], a[2], a[3], a[4], r.reg_loss, r.actor_loss, r.critic_loss
            );
        }
        out
    }
}

pub struct TrainOutcome {
    pub actor: ActorNetwork,
    pub critic: CriticNetwork,
    pub log: TrainingLog,
}

/// Trains a randomly initialized actor. Deterministic given `config.seed`.
pub fn train(env: &mut dyn TrainingEnv, prior: &AffinityPrior, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let actor = ActorNetwork::random(env.obs_dim(), &mut rng);
    train_from(env, prior, config, actor, &mut rng)
}

/// Trains starting from `actor`, drawing the critic initialization,
/// exploration noise and mini-batches from `rng`.
pub fn train_from(
    env: &mut dyn TrainingEnv,
    prior: &AffinityPrior,
    config: &TrainConfig,
    actor: ActorNetwork,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome> {
    config.validate()?;
    if actor.obs_dim() != env.obs_dim() {
        return Err(Error::Shape(format!(
            "actor expects {} features, environment emits {}",
            actor.obs_dim(),
            env.obs_dim()
        )));
    }
    let window = config.history_window;
    let mut actor = actor;
    let mut critic = CriticNetwork::random(env.obs_dim(), config.critic_width, rng);
    let mut target_actor = actor.clone();
    let mut target_critic = critic.clone();
    let mut actor_opt = Optimizer::new(config.optimizer);
    let mut critic_opt = Optimizer::new(config.optimizer);
    let mut buffer = ReplayBuffer::new(config.replay_capacity)?;
    let mut log = TrainingLog::default();

    for epoch in 0..config.episodes {
        let sigma = config.noise_at(epoch);
        let mut observations = vec![env.reset()?];
        let mut steps: Vec<([f64; ACTION_DIM], f64)> = Vec::with_capacity(env.horizon());
        for _ in 0..env.horizon() {
            let mut logits = actor.logits(recent(&observations, window))?;
            for z in logits.iter_mut() {
                let noise: f64 = rng.sample(StandardNormal);
                *z += sigma * noise;
            }
            softmax_in_place(&mut logits);
            let action = AllocationAction::from_slice(&logits)?;
            let (obs, reward) = env.step(&action)?;
            if !reward.is_finite() {
                return Err(divergence(epoch, "environment reward", &log));
            }
            observations.push(obs);
            steps.push((*action.fractions(), reward));
        }
        let episode = Arc::new(observations);
        let last = steps.len().saturating_sub(1);
        for (t, (action, reward)) in steps.iter().enumerate() {
            buffer.push(Transition::new(episode.clone(), t, *action, *reward, t == last)?);
        }

        let (mut actor_sum, mut critic_sum, mut updates) = (0.0, 0.0, 0usize);
        if buffer.len() >= config.batch_size {
            for _ in 0..config.updates_per_episode {
                let batch = buffer.sample(config.batch_size, rng)?;
                let (c_loss, c_grad) = critic_loss(&batch, &critic, &target_actor, &target_critic, config.gamma, window)
                    .map_err(|e| escalate(e, epoch, &log))?;
                critic_opt
                    .step(&mut critic, &c_grad, config.critic_lr)
                    .map_err(|e| escalate(e, epoch, &log))?;
                let (a_loss, a_grad) = actor_loss(&batch, &actor, &critic, prior, config.lambda, window)
                    .map_err(|e| escalate(e, epoch, &log))?;
                actor_opt
                    .step(&mut actor, &a_grad, config.actor_lr)
                    .map_err(|e| escalate(e, epoch, &log))?;
                soft_update(&critic, &mut target_critic, config.tau)?;
                soft_update(&actor, &mut target_actor, config.tau)?;
                actor_sum += a_loss;
                critic_sum += c_loss;
                updates += 1;
            }
        }

        let actions: Vec<[f64; ACTION_DIM]> = steps.iter().map(|(a, _)| *a).collect();
        let mean = mean_action(&actions);
        let per_update = |s: f64| if updates > 0 { s / updates as f64 } else { 0.0 };
        log.epochs.push(EpochRecord {
            epoch,
            mean_reward: steps.iter().map(|(_, r)| r).sum::<f64>() / steps.len().max(1) as f64,
            mean_action: mean,
            reg_loss: if steps.is_empty() { 0.0 } else { prior_gap(&mean, prior) },
            actor_loss: per_update(actor_sum),
            critic_loss: per_update(critic_sum),
        });
    }
    Ok(TrainOutcome { actor, critic, log })
}

fn escalate(e: Error, epoch: usize, log: &TrainingLog) -> Error {
    match e {
        Error::NonFinite { path } => divergence(epoch, &path, log),
        other => other,
    }
}

fn divergence(epoch: usize, what: &str, log: &TrainingLog) -> Error {
    let last = log.epochs.last().map_or_else(
        || "no completed epoch".to_string(),
        |r| {
            format!(
                "last epoch {}: mean action {:?}, actor loss {}, critic loss {}",
                r.epoch, r.mean_action, r.actor_loss, r.critic_loss
            )
        },
    );
    Error::Divergence {
        epoch,
        snapshot: format!("non-finite {what}; {last}"),
    }
}

/// Deterministic greedy rollout policy backed by a trained actor.
pub struct ActorPolicy<'a> {
    pub actor: &'a ActorNetwork,
    pub window: usize,
}

impl Policy for ActorPolicy<'_> {
    fn act(&mut self, history: &[Vec<f64>]) -> Result<AllocationAction> {
        super::networks::act(self.actor, recent(history, self.window))
    }
}
