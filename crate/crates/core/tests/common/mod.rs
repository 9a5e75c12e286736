//! Seeded fixtures shared by the integration targets.
#![allow(dead_code)]

use std::sync::Arc;

use intrinsic_affinity::affinity::AffinityPrior;
use intrinsic_affinity::ddpg::{actor_loss, critic_loss, ActorNetwork, CriticNetwork, Transition};
use intrinsic_affinity::numerics::{finite_diff_check, Activation, DenseLayer, RealMatrix, RecurrentNet, RnnCell};
use intrinsic_affinity::statespace::{centered_inputs, personality_loss, synth_dataset, PersonalityRnn, TransactionHistory, CATEGORIES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPSILON: f64 = 1e-6;
pub const OBS_DIM: usize = 10;
pub const WINDOW: usize = 4;

/// Random observation episode and a batch of transitions over it.
pub fn random_batch(rng: &mut ChaCha8Rng, steps: usize, batch: usize) -> Vec<Transition> {
    let episode: Arc<Vec<Vec<f64>>> =
        Arc::new((0..=steps).map(|_| (0..OBS_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
    (0..batch)
        .map(|k| {
            let t = rng.random_range(0..steps);
            let raw: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>() + 0.05);
            let total: f64 = raw.iter().sum();
            let action = raw.map(|v| v / total);
            Transition::new(episode.clone(), t, action, rng.random_range(-1.0..1.0), k % 3 == 0 && t == steps - 1).unwrap()
        })
        .collect()
}

/// Worst relative error of the regularized actor loss gradient.
pub fn actor_gradient_error(seed: u64, lambda: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = ActorNetwork::random(OBS_DIM, &mut rng);
    let critic = CriticNetwork::random(OBS_DIM, 24, &mut rng);
    let batch = random_batch(&mut rng, 9, 6);
    let refs: Vec<&Transition> = batch.iter().collect();
    let prior = AffinityPrior::new([0.4, 0.05, 0.3, 0.15, 0.1]).unwrap();
    finite_diff_check(&actor, |a| actor_loss(&refs, a, &critic, &prior, lambda, WINDOW), FD_EPSILON).unwrap()
}

/// Worst relative error of the TD loss gradient w.r.t. the online critic.
pub fn critic_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let critic = CriticNetwork::random(OBS_DIM, 24, &mut rng);
    let target_actor = ActorNetwork::random(OBS_DIM, &mut rng);
    let target_critic = CriticNetwork::random(OBS_DIM, 24, &mut rng);
    let batch = random_batch(&mut rng, 9, 6);
    let refs: Vec<&Transition> = batch.iter().collect();
    finite_diff_check(
        &critic,
        |c| critic_loss(&refs, c, &target_actor, &target_critic, 0.95, WINDOW),
        FD_EPSILON,
    )
    .unwrap()
}

/// Worst relative error of the personality regression gradient.
pub fn personality_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = PersonalityRnn::untrained(&mut rng);
    let data = synth_dataset(5, seed);
    let inputs: Vec<Vec<Vec<f64>>> = data.iter().map(|d| centered_inputs(d.history.steps())).collect();
    let targets: Vec<[f64; 5]> = data.iter().map(|d| *d.personality.values()).collect();
    finite_diff_check(model.net(), |n| personality_loss(n, &inputs, &targets), FD_EPSILON).unwrap()
}

/// Read-out whose inverse-regression attractors all lie inside the cube.
pub const CONSTRUCTED_HEAD: [[f64; 5]; 3] = [
    [1.0, 0.0, 0.0, 0.5, -0.5],
    [0.0, 1.0, 0.0, 0.5, 0.5],
    [0.0, 0.0, 1.0, -0.5, 0.5],
];

fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r: usize, k: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
        m[r1][k1] * m[r2][k2] - m[r1][k2] * m[r2][k1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) / det))
}

/// `‖W[:, j]‖₁ · (W⁺)[j, :]` with `W⁺ = Wᵀ(WWᵀ)⁻¹`, the cube corners
/// maximizing each linear output.
pub fn constructed_oracle() -> [[f64; 3]; 5] {
    let w = CONSTRUCTED_HEAD;
    let gram: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| (0..5).map(|j| w[i][j] * w[k][j]).sum()));
    let g_inv = inverse3(gram);
    std::array::from_fn(|j| {
        let d: f64 = (0..3).map(|i| w[i][j].abs()).sum();
        std::array::from_fn(|c| d * (0..3).map(|i| w[i][j] * g_inv[i][c]).sum::<f64>())
    })
}

/// A cell with `W_rec = I/2` whose input weights make the oracle point of
/// trait `j` the fixed point under a history concentrated on category `19j`.
pub fn constructed_rnn() -> (PersonalityRnn, Vec<TransactionHistory>) {
    let points = constructed_oracle();
    let drive: Vec<[f64; 3]> = points
        .iter()
        .map(|p| p.map(|v| v.atanh() - 0.5 * v))
        .collect();
    // Centered input for category c_j is 97·e_{c_j} − 1, so the drive is
    // 97·u_j − Σu; solve for the columns u_j.
    let n = CATEGORIES as f64;
    let total: [f64; 3] = std::array::from_fn(|i| drive.iter().map(|d| d[i]).sum::<f64>() / (n - 5.0));
    let mut w_in = RealMatrix::zeros(3, CATEGORIES);
    let mut histories = Vec::new();
    for (j, d) in drive.iter().enumerate() {
        let c = 19 * j;
        for i in 0..3 {
            w_in.set(i, c, (d[i] + total[i]) / n);
        }
        let mut step = vec![0.0; CATEGORIES];
        step[c] = 1.0;
        histories.push(TransactionHistory::new(vec![step; 6]).unwrap());
    }
    let mut w_rec = RealMatrix::zeros(3, 3);
    for i in 0..3 {
        w_rec.set(i, i, 0.5);
    }
    let cell = RnnCell::new(w_in, w_rec, vec![0.0; 3]).unwrap();
    let head_rows: Vec<Vec<f64>> = CONSTRUCTED_HEAD.iter().map(|r| r.to_vec()).collect();
    let head = DenseLayer::new(RealMatrix::from_rows(&head_rows).unwrap(), vec![0.1; 5], Activation::Identity).unwrap();
    let rnn = PersonalityRnn::from_net(RecurrentNet::new(cell, head).unwrap()).unwrap();
    (rnn, histories)
}
