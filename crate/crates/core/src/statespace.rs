//! Personality-from-transactions model and the geometry of its hidden state:
//! behavioral trajectories, their limits under repeated input, and attractor
//! locations recovered by regressing states on reachable outputs.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::affinity::{argmax, PersonalityVector, Trait};
use crate::ddpg::NamedTensor;
use crate::error::{Error, Result};
use crate::numerics::{
    min_norm_least_squares, symmetric_eigen, Activation, GradientRecord, Optimizer, Parameters, RealMatrix,
    RecurrentNet,
};

pub const CATEGORIES: usize = 97;
pub const HISTORY_STEPS: usize = 6;
pub const STATE_DIM: usize = 3;
pub const TRAJECTORY_CSV_HEADER: &str = "customer_id,step,h0,h1,h2,dominant_trait";
pub const ATTRACTOR_CSV_HEADER: &str = "trait,kind,x0,y0,z0,dx,dy,dz";
/// Spread ratio (largest over second-largest principal standard deviation)
/// above which a terminal-state cluster is reported as a line.
pub const LINE_SPREAD_RATIO: f64 = 5.0;
const GRID_SEED: u64 = 0x5eed_0a77;

/// Spending shares per time step; each step is a point on the simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct TransactionHistory {
    steps: Vec<Vec<f64>>,
}

impl TransactionHistory {
    pub fn new(steps: Vec<Vec<f64>>) -> Result<Self> {
        for (t, s) in steps.iter().enumerate() {
            if s.len() != CATEGORIES {
                return Err(Error::Shape(format!("step {t} has {} categories, expected {CATEGORIES}", s.len())));
            }
            if s.iter().any(|v| !(*v >= 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Contract(format!("step {t} is not a distribution over categories")));
            }
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[Vec<f64>] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Trait whose spending block contains category `c`; the last two categories are shared.
pub fn category_trait(c: usize) -> Option<Trait> {
    Trait::from_index(c / 19)
}

/// Six steps of spending shares whose category mix leans toward the
/// categories linked to the customer's stronger traits.
pub fn synth_transactions(profile: &PersonalityVector, seed: u64) -> (TransactionHistory, Trait) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..CATEGORIES)
        .map(|c| 0.3 + category_trait(c).map_or(0.5, |t| 2.0 * profile.get(t)))
        .collect();
    let steps = (0..HISTORY_STEPS)
        .map(|_| {
            let raw: Vec<f64> = base
                .iter()
                .map(|b| {
                    let z: f64 = rng.sample(StandardNormal);
                    b * (0.5 * z).exp()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    (TransactionHistory { steps }, profile.dominant_trait())
}

/// A personality with one clearly dominant trait (membership in [0.7, 1],
/// every other trait in [0, 0.3]).
pub fn random_personality<R: Rng + ?Sized>(rng: &mut R) -> PersonalityVector {
    let dominant = rng.random_range(0..5);
    let values = std::array::from_fn(|i| {
        if i == dominant {
            rng.random_range(0.7..=1.0)
        } else {
            rng.random_range(0.0..=0.3)
        }
    });
    PersonalityVector::new(values).expect("components are in range and one is at least 0.7")
}

#[derive(Clone, Debug)]
pub struct LabeledHistory {
    pub history: TransactionHistory,
    pub personality: PersonalityVector,
}

pub fn synth_dataset(n: usize, seed: u64) -> Vec<LabeledHistory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let personality = random_personality(&mut rng);
            let (history, _) = synth_transactions(&personality, rng.random());
            LabeledHistory { history, personality }
        })
        .collect()
}

/// Three-unit recurrent regressor from transaction history to personality.
#[derive(Clone, Debug)]
pub struct PersonalityRnn {
    net: RecurrentNet,
    trained: bool,
}

impl PersonalityRnn {
    pub fn untrained<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            net: RecurrentNet::random(CATEGORIES, STATE_DIM, 5, Activation::Identity, rng),
            trained: false,
        }
    }

    /// Wraps an explicitly constructed network, which counts as trained.
    pub fn from_net(net: RecurrentNet) -> Result<Self> {
        if net.hidden_size() != STATE_DIM || net.head.output_dim() != 5 || net.head.activation != Activation::Identity {
            return Err(Error::Shape("personality model needs 3 recurrent units and a linear 5-way head".into()));
        }
        Ok(Self { net, trained: true })
    }

    pub fn net(&self) -> &RecurrentNet {
        &self.net
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    fn require_trained(&self) -> Result<()> {
        if self.trained {
            Ok(())
        } else {
            Err(Error::State("personality model has not been trained".into()))
        }
    }

    pub fn predict(&self, history: &TransactionHistory) -> Result<[f64; 5]> {
        let y = self.net.predict(&centered_inputs(history.steps()))?;
        Ok(std::array::from_fn(|i| y[i]))
    }

    pub fn to_json(&self) -> String {
        let mut tensors = Vec::new();
        self.net.visit(&mut |name, v| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                values: v.to_vec(),
            })
        });
        let file = RnnFile {
            version: 1,
            trained: self.trained,
            tensors,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("tensors are serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RnnFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let mut net = RecurrentNet::zeros(CATEGORIES, STATE_DIM, 5, Activation::Identity);
        let flat: Vec<f64> = file.tensors.iter().flat_map(|t| t.values.iter().copied()).collect();
        net.set_flat_params(&flat)?;
        Ok(Self {
            net,
            trained: file.trained,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct RnnFile {
    version: u32,
    trained: bool,
    tensors: Vec<NamedTensor>,
}

/// Shares relative to a uniform step: `97·share − 1`.
pub fn centered_inputs(steps: &[Vec<f64>]) -> Vec<Vec<f64>> {
    steps
        .iter()
        .map(|s| s.iter().map(|v| v * CATEGORIES as f64 - 1.0).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Independent initializations; the one with the lowest final loss is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for RnnTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.02,
            restarts: 4,
            seed: 7,
        }
    }
}

/// Mean squared error over samples and outputs, with its gradient.
pub fn personality_loss(net: &RecurrentNet, inputs: &[Vec<Vec<f64>>], targets: &[[f64; 5]]) -> Result<(f64, GradientRecord)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Shape("personality dataset is empty or misaligned".into()));
    }
    let scale = 1.0 / (inputs.len() * 5) as f64;
    let mut loss = 0.0;
    let mut grads = GradientRecord::zeros_like(net);
    for (x, target) in inputs.iter().zip(targets) {
        let (y, trace) = net.forward_traced(x)?;
        let diff: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
        loss += diff.iter().map(|d| d * d).sum::<f64>() * scale;
        let dy: Vec<f64> = diff.iter().map(|d| 2.0 * d * scale).collect();
        net.backward_accumulate(x, &trace, &dy, &mut grads);
    }
    Ok((loss, grads))
}

/// Full-batch Adam regression of personality on history. Returns the best
/// model over the restarts and its loss before each epoch's update.
pub fn train_personality_rnn(dataset: &[LabeledHistory], config: &RnnTrainConfig) -> Result<(PersonalityRnn, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("personality dataset is empty".into()));
    }
    let inputs: Vec<Vec<Vec<f64>>> = dataset.iter().map(|d| centered_inputs(d.history.steps())).collect();
    let targets: Vec<[f64; 5]> = dataset.iter().map(|d| *d.personality.values()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(f64, PersonalityRnn, Vec<f64>)> = None;
    for _ in 0..config.restarts.max(1) {
        let mut model = PersonalityRnn::untrained(&mut rng);
        let mut opt = Optimizer::adam();
        let mut losses = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            let (loss, grads) = personality_loss(&model.net, &inputs, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    snapshot: format!("personality loss {loss}"),
                });
            }
            losses.push(loss);
            opt.step(&mut model.net, &grads, config.learning_rate)?;
        }
        let (final_loss, _) = personality_loss(&model.net, &inputs, &targets)?;
        model.trained = true;
        if best.as_ref().is_none_or(|(b, _, _)| final_loss < *b) {
            best = Some((final_loss, model, losses));
        }
    }
    let (_, model, losses) = best.expect("at least one restart ran");
    Ok((model, losses))
}

/// Hidden-state path of one customer, labeled with the model's dominant trait.
#[derive(Clone, Debug, PartialEq)]
pub struct BehavioralTrajectory {
    pub states: Vec<[f64; STATE_DIM]>,
    pub label: Trait,
}

impl BehavioralTrajectory {
    pub fn terminal(&self) -> [f64; STATE_DIM] {
        self.states.last().copied().unwrap_or([0.0; STATE_DIM])
    }
}

fn trajectory_over(rnn: &PersonalityRnn, steps: &[Vec<f64>]) -> Result<BehavioralTrajectory> {
    rnn.require_trained()?;
    let states = rnn.net.cell.unroll(&centered_inputs(steps), &[0.0; STATE_DIM])?;
    let states: Vec<[f64; STATE_DIM]> = states.iter().map(|h| [h[0], h[1], h[2]]).collect();
    let output = rnn.net.head.forward(&states.last().copied().unwrap_or([0.0; STATE_DIM]))?;
    Ok(BehavioralTrajectory {
        states,
        label: Trait::ALL[argmax(&output)],
    })
}

pub fn extract_trajectory(rnn: &PersonalityRnn, history: &TransactionHistory) -> Result<BehavioralTrajectory> {
    trajectory_over(rnn, history.steps())
}

/// Trajectory under the first step of `history` repeated `repeats` times.
pub fn converge_trajectory(rnn: &PersonalityRnn, history: &TransactionHistory, repeats: usize) -> Result<BehavioralTrajectory> {
    if repeats == 0 {
        return Err(Error::Contract("repeats must be at least 1".into()));
    }
    let first = history
        .steps()
        .first()
        .ok_or_else(|| Error::EmptyInput("transaction history is empty".into()))?;
    trajectory_over(rnn, &vec![first.clone(); repeats])
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttractorShape {
    Point,
    Line { direction: [f64; STATE_DIM] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attractor {
    pub personality_trait: Trait,
    pub location: [f64; STATE_DIM],
    pub shape: AttractorShape,
}

impl Attractor {
    /// Euclidean distance from `h` to the point, or to the line through it.
    pub fn distance(&self, h: &[f64; STATE_DIM]) -> f64 {
        let d: [f64; STATE_DIM] = std::array::from_fn(|i| h[i] - self.location[i]);
        let sq: f64 = d.iter().map(|v| v * v).sum();
        match &self.shape {
            AttractorShape::Point => sq.sqrt(),
            AttractorShape::Line { direction } => {
                let along: f64 = d.iter().zip(direction).map(|(a, b)| a * b).sum();
                (sq - along * along).max(0.0).sqrt()
            }
        }
    }
}

/// Intermediate matrices of the inverse regression and the resulting
/// per-trait attractors.
#[derive(Clone, Debug)]
pub struct AttractorSet {
    /// Sampled states, K × 3.
    pub states: RealMatrix,
    /// Reachable outputs `states · output_map`, K × 5.
    pub outputs: RealMatrix,
    /// Linear part of the read-out, 3 × 5.
    pub output_map: RealMatrix,
    /// Fitted inverse map, 6 × 3: five output rows then the intercept row.
    pub inverse_map: RealMatrix,
    /// Per-output maxima of the reachable outputs.
    pub output_maxima: [f64; 5],
    pub attractors: Vec<Attractor>,
}

impl AttractorSet {
    pub fn nearest(&self, h: &[f64; STATE_DIM]) -> Trait {
        let d: Vec<f64> = self.attractors.iter().map(|a| -a.distance(h)).collect();
        self.attractors[argmax(&d)].personality_trait
    }

    pub fn get(&self, t: Trait) -> &Attractor {
        &self.attractors[t.index()]
    }

    /// Marks attractors as lines where the terminal states assigned to them
    /// spread along one dominant direction.
    pub fn classify_shapes(&mut self, terminal: &[(Trait, [f64; STATE_DIM])]) -> Result<()> {
        for attractor in &mut self.attractors {
            let cluster: Vec<&[f64; STATE_DIM]> = terminal
                .iter()
                .filter(|(t, _)| *t == attractor.personality_trait)
                .map(|(_, h)| h)
                .collect();
            attractor.shape = AttractorShape::Point;
            if cluster.len() < 3 {
                continue;
            }
            let n = cluster.len() as f64;
            let mean: [f64; STATE_DIM] = std::array::from_fn(|i| cluster.iter().map(|h| h[i]).sum::<f64>() / n);
            let mut cov = RealMatrix::zeros(STATE_DIM, STATE_DIM);
            for h in &cluster {
                for i in 0..STATE_DIM {
                    for j in 0..STATE_DIM {
                        cov.set(i, j, cov.get(i, j) + (h[i] - mean[i]) * (h[j] - mean[j]) / n);
                    }
                }
            }
            let (values, vectors) = symmetric_eigen(&cov)?;
            let (top, second) = (values[0].max(0.0), values[1].max(0.0));
            if top > 0.0 && (second == 0.0 || (top / second).sqrt() > LINE_SPREAD_RATIO) {
                attractor.shape = AttractorShape::Line {
                    direction: std::array::from_fn(|i| vectors.get(i, 0)),
                };
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(ATTRACTOR_CSV_HEADER);
        out.push('\n');
        for a in &self.attractors {
            let [x, y, z] = a.location;
            match &a.shape {
                AttractorShape::Point => {
                    let _ = writeln!(out, "{},point,{x},{y},{z}", a.personality_trait);
                }
                AttractorShape::Line { direction: [dx, dy, dz] } => {
                    let _ = writeln!(out, "{},line,{x},{y},{z},{dx},{dy},{dz}", a.personality_trait);
                }
            }
        }
        out
    }
}

/// The 8 cube corners followed by `k − 8` uniform points of `[−1, 1]³`.
pub fn state_grid(k: usize, seed: u64) -> Result<RealMatrix> {
    if k < 8 {
        return Err(Error::Contract(format!("grid needs at least the 8 corners, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(k * STATE_DIM);
    for corner in 0..8u8 {
        data.extend((0..STATE_DIM).map(|i| if corner >> i & 1 == 1 { 1.0 } else { -1.0 }));
    }
    data.extend((0..(k - 8) * STATE_DIM).map(|_| rng.random_range(-1.0..=1.0)));
    RealMatrix::from_vec(k, STATE_DIM, data)
}

/// Attractors from the inverse regression of sampled states on their
/// reachable outputs. For trait `j` the location is the image of the
/// largest reachable `j`-th output minus the image of the zero output,
/// clipped to the state cube. `grid_points` counts the 8 corners.
pub fn estimate_attractors(rnn: &PersonalityRnn, grid_points: usize) -> Result<AttractorSet> {
    rnn.require_trained()?;
    let states = state_grid(grid_points, GRID_SEED)?;
    let output_map = rnn.net.head.weights.clone();
    let outputs = states.matmul(&output_map)?;
    let k = states.rows();
    let mut design = RealMatrix::zeros(k, 6);
    for r in 0..k {
        for c in 0..5 {
            design.set(r, c, outputs.get(r, c));
        }
        design.set(r, 5, 1.0);
    }
    let (inverse_map, rank) = min_norm_least_squares(&design, &states, 1e-10)?;
    if rank < STATE_DIM + 1 {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let output_maxima: [f64; 5] =
        std::array::from_fn(|j| (0..k).map(|r| outputs.get(r, j)).fold(f64::NEG_INFINITY, f64::max));
    let attractors = Trait::ALL
        .iter()
        .map(|&t| {
            let j = t.index();
            Attractor {
                personality_trait: t,
                location: std::array::from_fn(|i| (output_maxima[j] * inverse_map.get(j, i)).clamp(-1.0, 1.0)),
                shape: AttractorShape::Point,
            }
        })
        .collect();
    Ok(AttractorSet {
        states,
        outputs,
        output_map,
        inverse_map,
        output_maxima,
        attractors,
    })
}

pub fn trajectories_csv(rows: &[(String, BehavioralTrajectory)]) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for (id, traj) in rows {
        for (step, h) in traj.states.iter().enumerate() {
            let _ = writeln!(out, "{id},{step},{},{},{},{}", h[0], h[1], h[2], traj.label);
        }
    }
    out
}
