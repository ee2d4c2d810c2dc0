use std::collections::VecDeque;

use rand::Rng;

use super::Action;

/// One per-node decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub node: usize,
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: [f64; 2],
    pub next_state: Option<Vec<f64>>,
    pub terminal: bool,
}

/// FIFO ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    buffer: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.buffer.get(i)
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        if self.buffer.is_empty() {
            return Vec::new();
        }
        (0..batch).map(|_| rng.random_range(0..self.buffer.len())).collect()
    }

    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        self.sample_indices(batch, rng).into_iter().map(|i| &self.buffer[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tr(node: usize) -> Transition {
        Transition {
            node,
            t: 0,
            state: vec![],
            action: Action::Wait,
            reward: [0.0; 2],
            next_state: None,
            terminal: true,
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(tr(i));
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.get(0).unwrap().node, 2);
        assert_eq!(buf.get(2).unwrap().node, 4);
    }

    #[test]
    fn empty_sample_is_empty() {
        let buf = ReplayBuffer::new(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert!(buf.sample(4, &mut rng).is_empty());
    }
}
