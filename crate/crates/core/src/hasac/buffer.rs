use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::AgentAction;

/// One joint step as seen by the centralized learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<AgentAction>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    /// True environment termination. Time-limit truncation is not terminal.
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { items: Vec::new(), capacity, cursor: 0 }
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

    pub fn store(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> Option<&Transition> {
        self.items.get(idx)
    }

    /// Indices of a uniform batch drawn without replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        let n = batch.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n).into_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        self.sample_indices(batch, rng).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition {
            state: vec![r],
            obs: vec![vec![r]],
            actions: vec![AgentAction { discrete: vec![1], continuous: vec![0.5], pre_tanh: vec![0.55] }],
            reward: r,
            next_state: vec![r + 1.0],
            next_obs: vec![vec![r + 1.0]],
            terminal: false,
        }
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut b = ReplayBuffer::new(2);
        for r in [1.0, 2.0, 3.0] {
            b.store(t(r));
        }
        assert_eq!(b.len(), 2);
        let rewards: Vec<f64> = (0..2).map(|i| b.get(i).unwrap().reward).collect();
        assert!(rewards.contains(&2.0) && rewards.contains(&3.0));
    }

    #[test]
    fn sampled_transition_is_identical() {
        let mut b = ReplayBuffer::new(4);
        let x = t(0.123_456_789);
        b.store(x.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(1, &mut rng)[0], &x);
    }

    #[test]
    fn batch_has_no_repeats() {
        let mut b = ReplayBuffer::new(100);
        for r in 0..100 {
            b.store(t(r as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut idx = b.sample_indices(64, &mut rng);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 64);
    }
}
