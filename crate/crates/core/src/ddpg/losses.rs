use super::networks::{ActorNetwork, CriticNetwork, ACTION_DIM};
use super::replay::Transition;
use crate::affinity::AffinityPrior;
use crate::error::{Error, Result};
use crate::numerics::{GradientRecord, Parameters};

pub fn mean_action(actions: &[[f64; ACTION_DIM]]) -> [f64; ACTION_DIM] {
    let mut mean = [0.0; ACTION_DIM];
    for a in actions {
        for (m, v) in mean.iter_mut().zip(a) {
            *m += v;
        }
    }
    let n = actions.len().max(1) as f64;
    mean.map(|m| m / n)
}

/// Mean over the action dimensions of the squared gap between the batch-mean
/// action and the prior.
pub fn regularization_loss(actions: &[[f64; ACTION_DIM]], prior: &AffinityPrior) -> Result<f64> {
    if actions.is_empty() {
        return Err(Error::Contract("regularization loss of an empty batch".into()));
    }
    Ok(prior_gap(&mean_action(actions), prior))
}

pub(crate) fn prior_gap(mean: &[f64; ACTION_DIM], prior: &AffinityPrior) -> f64 {
    mean.iter()
        .zip(prior.weights())
        .map(|(m, p)| (m - p).powi(2))
        .sum::<f64>()
        / ACTION_DIM as f64
}

/// `−mean Q(s, π(s)) + λ·L` over the batch, with its gradient w.r.t. the actor.
pub fn actor_loss(
    batch: &[&Transition],
    actor: &ActorNetwork,
    critic: &CriticNetwork,
    prior: &AffinityPrior,
    lambda: f64,
    window: usize,
) -> Result<(f64, GradientRecord)> {
    if batch.is_empty() {
        return Err(Error::Contract("actor loss of an empty batch".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Contract(format!("lambda {lambda} must be non-negative")));
    }
    let n = batch.len() as f64;
    let mut passes = Vec::with_capacity(batch.len());
    let mut actions = Vec::with_capacity(batch.len());
    let mut q_sum = 0.0;
    for t in batch {
        let state = t.state(window);
        let (probs, trace) = actor.forward_traced(state)?;
        let action: [f64; ACTION_DIM] = std::array::from_fn(|i| probs[i]);
        let (q, critic_trace) = critic.forward_traced(state, &action)?;
        q_sum += q;
        actions.push(action);
        passes.push((trace, critic_trace));
    }
    let mean = mean_action(&actions);
    let reg = prior_gap(&mean, prior);
    let loss = -q_sum / n + lambda * reg;
    if !loss.is_finite() {
        return Err(Error::NonFinite { path: "actor_loss".into() });
    }
    let reg_grad: [f64; ACTION_DIM] =
        std::array::from_fn(|j| lambda * 2.0 / ACTION_DIM as f64 * (mean[j] - prior.weights()[j]) / n);
    let mut grads = GradientRecord::zeros_like(actor);
    for (t, (trace, critic_trace)) in batch.iter().zip(&passes) {
        let dq_da = critic.action_gradient(critic_trace, -1.0 / n);
        let da: Vec<f64> = dq_da.iter().zip(&reg_grad).map(|(q, r)| q + r).collect();
        actor.backward_accumulate(t.state(window), trace, &da, &mut grads);
    }
    Ok((loss, grads))
}

/// Bootstrapped regression target `r + γ·Q'(s', π'(s'))`, or `r` at a terminal step.
pub fn td_target(
    t: &Transition,
    target_actor: &ActorNetwork,
    target_critic: &CriticNetwork,
    gamma: f64,
    window: usize,
) -> Result<f64> {
    if t.terminal || gamma == 0.0 {
        return Ok(t.reward);
    }
    let next = t.next_state(window);
    let next_action = target_actor.probabilities(next)?;
    let y = t.reward + gamma * target_critic.q(next, &next_action)?;
    if !y.is_finite() {
        return Err(Error::NonFinite {
            path: format!("td_target[{}]", t.index()),
        });
    }
    Ok(y)
}

/// Mean squared TD error over the batch, with its gradient w.r.t. the critic.
pub fn critic_loss(
    batch: &[&Transition],
    critic: &CriticNetwork,
    target_actor: &ActorNetwork,
    target_critic: &CriticNetwork,
    gamma: f64,
    window: usize,
) -> Result<(f64, GradientRecord)> {
    if batch.is_empty() {
        return Err(Error::Contract("critic loss of an empty batch".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Contract(format!("gamma {gamma} outside [0, 1]")));
    }
    let n = batch.len() as f64;
    let mut grads = GradientRecord::zeros_like(critic);
    let mut loss = 0.0;
    for t in batch {
        let y = td_target(t, target_actor, target_critic, gamma, window)?;
        let state = t.state(window);
        let (q, trace) = critic.forward_traced(state, &t.action)?;
        let diff = q - y;
        loss += diff * diff / n;
        critic.backward_accumulate(state, &trace, 2.0 * diff / n, &mut grads);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite { path: "critic_loss".into() });
    }
    Ok((loss, grads))
}

/// `target ← τ·online + (1 − τ)·target`, elementwise.
pub fn soft_update<P: Parameters + ?Sized>(online: &P, target: &mut P, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Contract(format!("tau {tau} outside [0, 1]")));
    }
    let source = online.flat_params();
    if source.len() != target.param_count() {
        return Err(Error::Shape("online and target networks differ in size".into()));
    }
    let mut i = 0;
    target.visit_mut(&mut |_, p| {
        for v in p.iter_mut() {
            *v = tau * source[i] + (1.0 - tau) * *v;
            i += 1;
        }
    });
    Ok(())
}
