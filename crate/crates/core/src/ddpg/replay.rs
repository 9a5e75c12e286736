use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use super::networks::{recent, ACTION_DIM};
use crate::error::{Error, Result};

/// One recorded decision. Observation sequences are shared per episode:
/// the state is observations `0..=index`, the next state `0..=index + 1`.
#[derive(Clone, Debug)]
pub struct Transition {
    episode: Arc<Vec<Vec<f64>>>,
    index: usize,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub terminal: bool,
}

impl Transition {
    pub fn new(
        episode: Arc<Vec<Vec<f64>>>,
        index: usize,
        action: [f64; ACTION_DIM],
        reward: f64,
        terminal: bool,
    ) -> Result<Self> {
        if index + 1 >= episode.len() {
            return Err(Error::Shape(format!(
                "transition {index} needs a successor observation in an episode of {}",
                episode.len()
            )));
        }
        if action.iter().any(|a| !(*a >= 0.0)) || (action.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("stored action {action:?} is off the simplex")));
        }
        if !reward.is_finite() {
            return Err(Error::NonFinite {
                path: format!("reward[{index}]"),
            });
        }
        Ok(Self {
            episode,
            index,
            action,
            reward,
            terminal,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn state(&self, window: usize) -> &[Vec<f64>] {
        recent(&self.episode[..=self.index], window)
    }

    pub fn next_state(&self, window: usize) -> &[Vec<f64>] {
        recent(&self.episode[..=self.index + 1], window)
    }
}

/// Bounded FIFO of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Contract("replay capacity must be positive".into()));
        }
        Ok(Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        })
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::Contract("cannot sample from an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn episode(n: usize) -> Arc<Vec<Vec<f64>>> {
        Arc::new((0..n).map(|i| vec![i as f64]).collect())
    }

    #[test]
    fn states_are_prefixes() {
        let t = Transition::new(episode(5), 2, [0.2; 5], 1.0, false).unwrap();
        assert_eq!(t.state(0).len(), 3);
        assert_eq!(t.next_state(0).len(), 4);
        assert_eq!(t.next_state(2), &[vec![2.0], vec![3.0]]);
        assert!(Transition::new(episode(3), 2, [0.2; 5], 1.0, true).is_err());
        assert!(Transition::new(episode(3), 0, [0.5; 5], 1.0, true).is_err());
    }

    #[test]
    fn buffer_is_bounded_fifo() {
        let ep = episode(100);
        let mut buf = ReplayBuffer::new(10).unwrap();
        for i in 0..25 {
            buf.push(Transition::new(ep.clone(), i, [0.2; 5], i as f64, false).unwrap());
            assert!(buf.len() <= 10);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rewards: Vec<f64> = buf.sample(200, &mut rng).unwrap().iter().map(|t| t.reward).collect();
        assert!(rewards.iter().all(|r| (15.0..25.0).contains(r)));
        let mut rng2 = ChaCha8Rng::seed_from_u64(0);
        let again: Vec<f64> = buf.sample(200, &mut rng2).unwrap().iter().map(|t| t.reward).collect();
        assert_eq!(rewards, again);
    }
}
