//! One profit-seeking agent per personality trait, each pulled toward the
//! trait's asset-class prior.

use std::fmt::Write as _;

use crate::affinity::{prototype_prior, AffinityPrior, Trait, TraitAssetCoefficients};
use crate::ddpg::{train, ActorNetwork, ActorPolicy, Checkpoint, MarketTrainingEnv, TrainConfig, TrainingLog};
use crate::error::{Error, Result};
use crate::market::{portfolio_value, AllocationAction, EpisodeResult, MarketEnv, PriceSeries, DEFAULT_CONTRIBUTION};

pub const SCHEDULE_CSV_HEADER: &str = "month,act_savings,act_property,act_stocks,act_luxury,act_mortgage";

/// A trained, frozen prototype together with its greedy schedule on the
/// training series.
#[derive(Clone, Debug)]
pub struct PrototypeAgent {
    pub personality_trait: Trait,
    pub prior: AffinityPrior,
    pub actor: ActorNetwork,
    pub window: usize,
    pub schedule: Vec<AllocationAction>,
}

impl PrototypeAgent {
    /// Builds an agent from a trained actor, computing its schedule on `series`.
    pub fn new(personality_trait: Trait, actor: ActorNetwork, window: usize, series: &PriceSeries) -> Result<Self> {
        let prior = prototype_prior(&TraitAssetCoefficients::canonical(), personality_trait)?;
        let schedule = rollout(&actor, window, series)?.actions;
        Ok(Self {
            personality_trait,
            prior,
            actor,
            window,
            schedule,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, series: &PriceSeries) -> Result<Self> {
        let t: Trait = ckpt.label.parse()?;
        Self::new(t, ckpt.actor()?, ckpt.config.history_window, series)
    }

    pub fn checkpoint(&self, config: &TrainConfig) -> Checkpoint {
        Checkpoint::new(self.personality_trait.name(), &self.prior, config, &self.actor)
    }

    /// Time-averaged allocation of the schedule.
    pub fn mean_allocation(&self) -> [f64; 5] {
        time_average(&self.schedule)
    }

    pub fn policy(&self) -> ActorPolicy<'_> {
        ActorPolicy {
            actor: &self.actor,
            window: self.window,
        }
    }
}

pub fn time_average(actions: &[AllocationAction]) -> [f64; 5] {
    let mut mean = [0.0; 5];
    for a in actions {
        for (m, v) in mean.iter_mut().zip(a.fractions()) {
            *m += v;
        }
    }
    let n = actions.len().max(1) as f64;
    mean.map(|m| m / n)
}

/// Monthly profit in millions of NOK: the change in portfolio value.
pub fn profit_env(series: &PriceSeries) -> MarketTrainingEnv {
    MarketTrainingEnv::new(
        MarketEnv::new(series.clone(), DEFAULT_CONTRIBUTION),
        Box::new(|state, _, next| (portfolio_value(next) - portfolio_value(state)) / 1e6),
    )
}

/// Greedy episode of `actor` on `series` with the default contribution.
pub fn rollout(actor: &ActorNetwork, window: usize, series: &PriceSeries) -> Result<EpisodeResult> {
    MarketEnv::new(series.clone(), DEFAULT_CONTRIBUTION).run_episode(&mut ActorPolicy { actor, window })
}

/// Per-trait seed so the five prototypes start from different networks.
pub fn prototype_seed(base: u64, t: Trait) -> u64 {
    base.wrapping_add(t.index() as u64)
}

pub fn train_prototype(t: Trait, series: &PriceSeries, config: &TrainConfig) -> Result<(PrototypeAgent, TrainingLog)> {
    let prior = prototype_prior(&TraitAssetCoefficients::canonical(), t)?;
    let config = TrainConfig {
        seed: prototype_seed(config.seed, t),
        ..config.clone()
    };
    let outcome = train(&mut profit_env(series), &prior, &config)?;
    let agent = PrototypeAgent::new(t, outcome.actor, config.history_window, series)?;
    Ok((agent, outcome.log))
}

/// The agent's greedy allocations on `series`, one CSV row per month.
pub fn export_schedule(agent: &PrototypeAgent, series: &PriceSeries) -> Result<String> {
    let episode = rollout(&agent.actor, agent.window, series)?;
    Ok(schedule_csv(&episode.actions))
}

pub fn schedule_csv(actions: &[AllocationAction]) -> String {
    let mut out = String::from(SCHEDULE_CSV_HEADER);
    out.push('\n');
    for (t, a) in actions.iter().enumerate() {
        let f = a.fractions();
        let _ = writeln!(out, "{t},{},{},{},{},{}", f[0], f[1], f[2], f[3], f[4]);
    }
    out
}

/// Loads the five prototypes from checkpoints keyed by trait.
pub fn load_prototypes(checkpoints: &[Checkpoint], series: &PriceSeries) -> Result<[PrototypeAgent; 5]> {
    let mut slots: [Option<PrototypeAgent>; 5] = Default::default();
    for c in checkpoints {
        let agent = PrototypeAgent::from_checkpoint(c, series)?;
        let slot = agent.personality_trait.index();
        slots[slot] = Some(agent);
    }
    let agents: Vec<PrototypeAgent> = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::EmptyInput(format!("no checkpoint for {}", Trait::ALL[i]))))
        .collect::<Result<_>>()?;
    Ok(agents.try_into().unwrap_or_else(|_| unreachable!("five slots")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_actor_schedule_is_uniform() {
        let series = PriceSeries::constant(4, 1.01, 1.0, 0.002).unwrap();
        let agent = PrototypeAgent::new(Trait::Openness, ActorNetwork::zeros(10), 0, &series).unwrap();
        let csv = export_schedule(&agent, &series).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SCHEDULE_CSV_HEADER));
        for (t, line) in lines.enumerate() {
            assert_eq!(line, format!("{t},0.2,0.2,0.2,0.2,0.2"));
        }
        assert_eq!(csv, export_schedule(&agent, &series).unwrap());
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            episodes: 2,
            updates_per_episode: 3,
            batch_size: 8,
            critic_width: 16,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_checkpoint_and_distinct_traits_differ() {
        let series = PriceSeries::constant(12, 1.01, 1.002, 0.002).unwrap();
        let (a, _) = train_prototype(Trait::Extraversion, &series, &tiny_config()).unwrap();
        let (b, _) = train_prototype(Trait::Extraversion, &series, &tiny_config()).unwrap();
        let (c, _) = train_prototype(Trait::Neuroticism, &series, &tiny_config()).unwrap();
        let json = |agent: &PrototypeAgent| agent.checkpoint(&tiny_config()).to_json();
        assert_eq!(json(&a), json(&b));
        assert_eq!(a.schedule, b.schedule);
        assert_ne!(json(&a), json(&c));
        let reloaded = PrototypeAgent::from_checkpoint(&Checkpoint::from_json(&json(&a)).unwrap(), &series).unwrap();
        assert_eq!(reloaded.schedule, a.schedule);
    }

    #[test]
    fn missing_prototype_checkpoint_is_reported() {
        let series = PriceSeries::constant(2, 1.0, 1.0, 0.0).unwrap();
        let agent = PrototypeAgent::new(Trait::Agreeableness, ActorNetwork::zeros(10), 0, &series).unwrap();
        let ckpt = agent.checkpoint(&TrainConfig::default());
        assert!(matches!(load_prototypes(&[ckpt], &series), Err(Error::EmptyInput(_))));
    }
}
