//! Per-customer blending of the five prototypes: a learned weighting trained
//! on the customer's satisfaction, and the fixed personality-weighted baseline.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::affinity::{
    orchestration_prior, preference_vector, satisfaction_index, satisfaction_reward, AffinityPrior, PersonalityVector,
    PreferenceVector, TraitAssetCoefficients, REFERENCE_CUSTOMER_PRIORS,
};
use crate::ddpg::{act, recent, train_from, ActorNetwork, Checkpoint, TrainConfig, TrainOutcome, TrainingEnv};
use crate::error::{Error, Result};
use crate::market::{
    portfolio_value, AllocationAction, EpisodeResult, MarketEnv, Policy, PortfolioState, PriceSeries, BASE_OBS_DIM,
    DEFAULT_CONTRIBUTION,
};
use crate::prototypes::PrototypeAgent;
use crate::statespace::{BehavioralTrajectory, STATE_DIM};

pub const COMPARISON_CSV_HEADER: &str = "customer_id,orch_value_nok,orch_satisfaction,linear_value_nok,linear_satisfaction";

/// Shrink applied to the random head weights when the orchestrator is
/// started at its prior.
pub const WARM_START_SHRINK: f64 = 0.1;

/// Weights over the five prototypes, in trait order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrchestrationAction([f64; 5]);

impl OrchestrationAction {
    pub fn new(weights: [f64; 5]) -> Result<Self> {
        let checked = AllocationAction::new(weights)
            .map_err(|_| Error::Contract(format!("prototype weights {weights:?} are not on the simplex")))?;
        Ok(Self(*checked.fractions()))
    }

    pub fn one_hot(k: usize) -> Self {
        let mut w = [0.0; 5];
        w[k] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64; 5] {
        &self.0
    }
}

impl From<&AffinityPrior> for OrchestrationAction {
    fn from(prior: &AffinityPrior) -> Self {
        Self(*prior.weights())
    }
}

impl From<AllocationAction> for OrchestrationAction {
    fn from(a: AllocationAction) -> Self {
        Self(*a.fractions())
    }
}

/// `Σᵢ wᵢ·aᵢ`. A one-hot weight returns the selected action unchanged.
pub fn combine_actions(weights: &OrchestrationAction, actions: &[AllocationAction; 5]) -> AllocationAction {
    let mut mixed = [0.0; 5];
    for (w, a) in weights.0.iter().zip(actions) {
        for (m, v) in mixed.iter_mut().zip(a.fractions()) {
            *m += w * v;
        }
    }
    AllocationAction::new(mixed).expect("a convex combination of simplex points lies on the simplex")
}

/// Fixed blend with the personality normalized to unit sum as weights.
pub fn linear_baseline(p: &PersonalityVector, actions: &[AllocationAction; 5]) -> Result<AllocationAction> {
    let prior = orchestration_prior(p)?;
    Ok(combine_actions(&OrchestrationAction::from(&prior), actions))
}

/// One customer as seen by the orchestrator.
#[derive(Clone, Debug)]
pub struct CustomerProfile {
    pub id: String,
    pub personality: PersonalityVector,
    pub trajectory: Option<BehavioralTrajectory>,
    pub prior: AffinityPrior,
    pub preference: PreferenceVector,
}

impl CustomerProfile {
    pub fn new(id: impl Into<String>, personality: PersonalityVector, trajectory: Option<BehavioralTrajectory>) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            prior: orchestration_prior(&personality)?,
            preference: preference_vector(&personality, &TraitAssetCoefficients::canonical()),
            personality,
            trajectory,
        })
    }

    /// Terminal behavioral state, or the origin when no trajectory is known.
    pub fn behavior_feature(&self) -> [f64; STATE_DIM] {
        self.trajectory.as_ref().map_or([0.0; STATE_DIM], BehavioralTrajectory::terminal)
    }

    /// Market environment with the behavioral feature appended to every observation.
    pub fn market(&self, series: &PriceSeries) -> MarketEnv {
        MarketEnv::new(series.clone(), DEFAULT_CONTRIBUTION).with_extra_features(self.behavior_feature().to_vec())
    }
}

/// Four customers whose normalized personalities are the published reference
/// priors, at magnitudes from low and balanced (A) to pronounced (D).
pub fn reference_customers() -> Result<Vec<CustomerProfile>> {
    const SCALES: [f64; 4] = [1.6, 2.5, 3.3, 3.5];
    REFERENCE_CUSTOMER_PRIORS
        .iter()
        .zip(SCALES)
        .map(|((id, prior), scale)| CustomerProfile::new(*id, PersonalityVector::new(prior.map(|v| v * scale))?, None))
        .collect()
}

/// Each prototype's action given the shared base observations.
fn prototype_actions(prototypes: &[PrototypeAgent; 5], base_history: &[Vec<f64>]) -> Result<[AllocationAction; 5]> {
    let mut out = [AllocationAction::uniform(); 5];
    for (slot, agent) in out.iter_mut().zip(prototypes) {
        *slot = act(&agent.actor, recent(base_history, agent.window))?;
    }
    Ok(out)
}

/// Drops the customer features; prototypes only see the market.
fn base_observation(obs: &[f64]) -> Vec<f64> {
    obs[..BASE_OBS_DIM.min(obs.len())].to_vec()
}

/// Training environment whose actions are prototype weights and whose
/// reward is the customer's satisfaction after the month.
pub struct OrchestrationEnv<'a> {
    market: MarketEnv,
    prototypes: &'a [PrototypeAgent; 5],
    preference: PreferenceVector,
    state: PortfolioState,
    base_history: Vec<Vec<f64>>,
}

impl<'a> OrchestrationEnv<'a> {
    pub fn new(customer: &CustomerProfile, prototypes: &'a [PrototypeAgent; 5], series: &PriceSeries) -> Self {
        let market = customer.market(series);
        let state = market.initial_state();
        Self {
            market,
            prototypes,
            preference: customer.preference,
            state,
            base_history: Vec::new(),
        }
    }
}

impl TrainingEnv for OrchestrationEnv<'_> {
    fn obs_dim(&self) -> usize {
        self.market.obs_dim()
    }

    fn horizon(&self) -> usize {
        self.market.horizon()
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.state = self.market.initial_state();
        let obs = self.market.observe(&self.state);
        self.base_history = vec![base_observation(&obs)];
        Ok(obs)
    }

    fn step(&mut self, action: &AllocationAction) -> Result<(Vec<f64>, f64)> {
        let proposals = prototype_actions(self.prototypes, &self.base_history)?;
        let blended = combine_actions(&OrchestrationAction::from(*action), &proposals);
        self.state = self.market.step(&self.state, &blended)?;
        let obs = self.market.observe(&self.state);
        self.base_history.push(base_observation(&obs));
        Ok((obs, satisfaction_reward(&self.state, &self.preference)))
    }
}

/// Where a [`BlendPolicy`] takes its prototype weights from.
pub enum WeightSource<'a> {
    Fixed(OrchestrationAction),
    Learned { actor: &'a ActorNetwork, window: usize },
}

/// Blends the prototypes' proposals each month.
pub struct BlendPolicy<'a> {
    pub prototypes: &'a [PrototypeAgent; 5],
    pub weights: WeightSource<'a>,
    base_history: Vec<Vec<f64>>,
}

impl<'a> BlendPolicy<'a> {
    pub fn new(prototypes: &'a [PrototypeAgent; 5], weights: WeightSource<'a>) -> Self {
        Self {
            prototypes,
            weights,
            base_history: Vec::new(),
        }
    }
}

impl Policy for BlendPolicy<'_> {
    fn reset(&mut self) {
        self.base_history.clear();
    }

    fn act(&mut self, history: &[Vec<f64>]) -> Result<AllocationAction> {
        let latest = history
            .last()
            .ok_or_else(|| Error::Contract("blend policy needs at least one observation".into()))?;
        self.base_history.push(base_observation(latest));
        let proposals = prototype_actions(self.prototypes, &self.base_history)?;
        let weights = match &self.weights {
            WeightSource::Fixed(w) => *w,
            WeightSource::Learned { actor, window } => act(actor, recent(history, *window))?.into(),
        };
        Ok(combine_actions(&weights, &proposals))
    }
}

/// A trained orchestration actor bound to its customer.
#[derive(Clone, Debug)]
pub struct Orchestrator {
    pub customer: CustomerProfile,
    pub actor: ActorNetwork,
    pub window: usize,
}

impl Orchestrator {
    pub fn checkpoint(&self, config: &TrainConfig) -> Checkpoint {
        Checkpoint::new(&self.customer.id, &self.customer.prior, config, &self.actor)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, customer: CustomerProfile) -> Result<Self> {
        if ckpt.label != customer.id {
            return Err(Error::Contract(format!(
                "checkpoint belongs to customer '{}', not '{}'",
                ckpt.label, customer.id
            )));
        }
        let actor = ckpt.actor()?;
        if actor.obs_dim() != BASE_OBS_DIM + STATE_DIM {
            return Err(Error::Shape(format!("orchestrator checkpoint expects {} features", actor.obs_dim())));
        }
        Ok(Self {
            customer,
            actor,
            window: ckpt.config.history_window,
        })
    }

    /// Greedy orchestrated episode on `series`.
    pub fn rollout(&self, prototypes: &[PrototypeAgent; 5], series: &PriceSeries) -> Result<EpisodeResult> {
        let mut policy = BlendPolicy::new(
            prototypes,
            WeightSource::Learned {
                actor: &self.actor,
                window: self.window,
            },
        );
        self.customer.market(series).run_episode(&mut policy)
    }

    /// Per-month prototype weights chosen on `series`.
    pub fn weight_schedule(&self, prototypes: &[PrototypeAgent; 5], series: &PriceSeries) -> Result<Vec<OrchestrationAction>> {
        let market = self.customer.market(series);
        let mut env = OrchestrationEnv::new(&self.customer, prototypes, series);
        let mut history = vec![env.reset()?];
        let mut out = Vec::with_capacity(market.horizon());
        for _ in 0..market.horizon() {
            let w = act(&self.actor, recent(&history, self.window))?;
            history.push(env.step(&w)?.0);
            out.push(w.into());
        }
        Ok(out)
    }
}

/// Greedy episode of the fixed personality-weighted blend.
pub fn linear_rollout(customer: &CustomerProfile, prototypes: &[PrototypeAgent; 5], series: &PriceSeries) -> Result<EpisodeResult> {
    let mut policy = BlendPolicy::new(prototypes, WeightSource::Fixed(OrchestrationAction::from(&customer.prior)));
    customer.market(series).run_episode(&mut policy)
}

/// Trains an orchestrator for `customer` with the customer's prior and
/// satisfaction reward. The actor starts at the prior.
pub fn train_orchestrator(
    customer: &CustomerProfile,
    prototypes: &[PrototypeAgent; 5],
    series: &PriceSeries,
    config: &TrainConfig,
) -> Result<(Orchestrator, TrainOutcome)> {
    let mut env = OrchestrationEnv::new(customer, prototypes, series);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut actor = ActorNetwork::random(env.obs_dim(), &mut rng);
    actor.warm_start(&customer.prior, WARM_START_SHRINK);
    let outcome = train_from(&mut env, &customer.prior, config, actor, &mut rng)?;
    let orchestrator = Orchestrator {
        customer: customer.clone(),
        actor: outcome.actor.clone(),
        window: config.history_window,
    };
    Ok((orchestrator, outcome))
}

/// Final portfolio value and satisfaction of both strategies for one customer.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub customer_id: String,
    pub orch_value: f64,
    pub orch_satisfaction: f64,
    pub linear_value: f64,
    pub linear_satisfaction: f64,
}

impl ComparisonRow {
    /// `(orchestrated − linear) / |linear|` satisfaction.
    pub fn relative_improvement(&self) -> f64 {
        let base = self.linear_satisfaction.abs().max(f64::MIN_POSITIVE);
        (self.orch_satisfaction - self.linear_satisfaction) / base
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(COMPARISON_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.customer_id, r.orch_value, r.orch_satisfaction, r.linear_value, r.linear_satisfaction
            );
        }
        out
    }
}

fn summarize(episode: &EpisodeResult, customer: &CustomerProfile) -> Result<(f64, f64)> {
    let value = episode.final_state().map_or(0.0, portfolio_value);
    let satisfaction = satisfaction_index(episode, &customer.preference)?;
    if !(value.is_finite() && satisfaction.is_finite()) {
        return Err(Error::NonFinite {
            path: format!("comparison[{}]", customer.id),
        });
    }
    Ok((value, satisfaction))
}

/// Runs both strategies for every orchestrator on the same series.
pub fn compare(orchestrators: &[Orchestrator], prototypes: &[PrototypeAgent; 5], series: &PriceSeries) -> Result<ComparisonReport> {
    let mut rows = Vec::with_capacity(orchestrators.len());
    for o in orchestrators {
        let (orch_value, orch_satisfaction) = summarize(&o.rollout(prototypes, series)?, &o.customer)?;
        let (linear_value, linear_satisfaction) =
            summarize(&linear_rollout(&o.customer, prototypes, series)?, &o.customer)?;
        rows.push(ComparisonRow {
            customer_id: o.customer.id.clone(),
            orch_value,
            orch_satisfaction,
            linear_value,
            linear_satisfaction,
        });
    }
    Ok(ComparisonReport { rows })
}

/// Month-by-month prototype weights as CSV.
pub fn weights_csv(weights: &[OrchestrationAction]) -> String {
    let mut out = String::from("month,w_openness,w_conscientiousness,w_extraversion,w_agreeableness,w_neuroticism\n");
    for (t, w) in weights.iter().enumerate() {
        let w = w.weights();
        let _ = writeln!(out, "{t},{},{},{},{},{}", w[0], w[1], w[2], w[3], w[4]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::Trait;
    use crate::market::Asset;
    use rand::Rng;

    fn zero_prototypes(series: &PriceSeries) -> [PrototypeAgent; 5] {
        Trait::ALL.map(|t| PrototypeAgent::new(t, ActorNetwork::zeros(BASE_OBS_DIM), 0, series).unwrap())
    }

    #[test]
    fn convex_examples() {
        let a: [AllocationAction; 5] = Asset::ALL.map(AllocationAction::all_in);
        for k in 0..5 {
            assert_eq!(combine_actions(&OrchestrationAction::one_hot(k), &a), a[k]);
        }
        let half = OrchestrationAction::new([0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(combine_actions(&half, &a).fractions(), &[0.5, 0.5, 0.0, 0.0, 0.0]);
        assert!(OrchestrationAction::new([0.5, 0.6, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn random_combinations_stay_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draw = |rng: &mut ChaCha8Rng| {
            let raw: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
            let total: f64 = raw.iter().sum();
            raw.map(|v| v / total)
        };
        for _ in 0..10_000 {
            let w = OrchestrationAction::new(draw(&mut rng)).unwrap();
            let actions: [AllocationAction; 5] = std::array::from_fn(|_| AllocationAction::new(draw(&mut rng)).unwrap());
            let mixed = combine_actions(&w, &actions);
            assert!(mixed.is_on_simplex(1e-9));
            assert!(mixed.fractions().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn baseline_examples() {
        let a: [AllocationAction; 5] = std::array::from_fn(|i| {
            let mut f = [0.1; 5];
            f[i] = 0.6;
            AllocationAction::new(f).unwrap()
        });
        let extravert = PersonalityVector::one_hot(Trait::Extraversion);
        assert_eq!(linear_baseline(&extravert, &a).unwrap(), a[Trait::Extraversion.index()]);
        let uniform = linear_baseline(&PersonalityVector::new([0.4; 5]).unwrap(), &a).unwrap();
        for v in uniform.fractions() {
            assert!((v - 0.2).abs() < 1e-15);
        }
        assert!(matches!(PersonalityVector::new([0.0; 5]), Err(_)));
    }

    #[test]
    fn reference_customers_reproduce_published_priors() {
        for (c, (id, prior)) in reference_customers().unwrap().iter().zip(REFERENCE_CUSTOMER_PRIORS) {
            assert_eq!(c.id, id);
            for (got, want) in c.prior.weights().iter().zip(prior) {
                assert!((got - want).abs() < 1e-12);
            }
            assert!(c.personality.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn scaling_personality_keeps_prior_and_preference_ranking() {
        let p = PersonalityVector::new([0.2, 0.4, 0.1, 0.3, 0.05]).unwrap();
        let q = PersonalityVector::new(p.values().map(|v| v * 2.0)).unwrap();
        let cp = CustomerProfile::new("p", p, None).unwrap();
        let cq = CustomerProfile::new("q", q, None).unwrap();
        for (a, b) in cp.prior.weights().iter().zip(cq.prior.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in cp.preference.values().iter().zip(cq.preference.values()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_strategies_report_identical_metrics() {
        let series = PriceSeries::constant(24, 1.01, 1.002, 0.002).unwrap();
        let prototypes = zero_prototypes(&series);
        // Zero logits and an even personality both give weights of exactly 0.2.
        let customer = CustomerProfile::new("x", PersonalityVector::new([0.4; 5]).unwrap(), None).unwrap();
        let actor = ActorNetwork::zeros(BASE_OBS_DIM + STATE_DIM);
        let orch = Orchestrator { customer, actor, window: 0 };
        let report = compare(std::slice::from_ref(&orch), &prototypes, &series).unwrap();
        let r = &report.rows[0];
        assert_eq!(r.orch_value, r.linear_value);
        assert_eq!(r.orch_satisfaction, r.linear_satisfaction);
        assert_eq!(report.to_csv_string().lines().next(), Some(COMPARISON_CSV_HEADER));
        assert_eq!(ComparisonReport::default().to_csv_string().lines().count(), 1);
    }

    #[test]
    fn training_is_deterministic_under_a_fixed_seed() {
        let series = PriceSeries::constant(12, 1.01, 1.002, 0.002).unwrap();
        let prototypes = zero_prototypes(&series);
        let customer = reference_customers().unwrap().remove(1);
        let config = TrainConfig {
            episodes: 2,
            updates_per_episode: 3,
            batch_size: 8,
            critic_width: 16,
            seed: 4,
            ..Default::default()
        };
        let (a, log_a) = train_orchestrator(&customer, &prototypes, &series, &config).unwrap();
        let (b, log_b) = train_orchestrator(&customer, &prototypes, &series, &config).unwrap();
        assert_eq!(a.checkpoint(&config).to_json(), b.checkpoint(&config).to_json());
        assert_eq!(log_a.log, log_b.log);
        let restored = Orchestrator::from_checkpoint(&a.checkpoint(&config), customer.clone()).unwrap();
        assert_eq!(restored.rollout(&prototypes, &series).unwrap(), a.rollout(&prototypes, &series).unwrap());
        let other = CustomerProfile::new("other", customer.personality, None).unwrap();
        assert!(Orchestrator::from_checkpoint(&a.checkpoint(&config), other).is_err());
    }

    #[test]
    fn env_observation_carries_behavior_feature() {
        let series = PriceSeries::constant(3, 1.0, 1.0, 0.0).unwrap();
        let prototypes = zero_prototypes(&series);
        let traj = BehavioralTrajectory {
            states: vec![[0.1, -0.2, 0.3]],
            label: Trait::Openness,
        };
        let customer = CustomerProfile::new("b", PersonalityVector::one_hot(Trait::Openness), Some(traj)).unwrap();
        let mut env = OrchestrationEnv::new(&customer, &prototypes, &series);
        let obs = env.reset().unwrap();
        assert_eq!(obs.len(), BASE_OBS_DIM + STATE_DIM);
        assert_eq!(&obs[BASE_OBS_DIM..], &[0.1, -0.2, 0.3]);
        let (_, reward) = env.step(&AllocationAction::uniform()).unwrap();
        assert!(reward.is_finite());
    }
}
