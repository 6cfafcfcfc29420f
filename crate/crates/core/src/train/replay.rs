//! Transition records and the ring replay store.

use rand::Rng;

/// One environment interaction. `done` marks true terminals only;
/// time-limit truncation keeps `done = false` so the bootstrap term stays.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform sampling over stored items.
#[derive(Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            cursor: 0,
        }
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

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// Uniform independent index draws over the written region.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.items.is_empty(), "cannot sample from an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(tag: f64) -> Transition {
        Transition {
            state: vec![tag],
            action: vec![0.0],
            reward: tag,
            next_state: vec![tag],
            done: false,
        }
    }

    #[test]
    fn never_returns_an_unwritten_slot() {
        let mut buf = ReplayBuffer::new(64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..10 {
            buf.push(transition(i as f64));
            for &idx in &buf.sample_indices(32, &mut rng) {
                assert!(idx < buf.len());
                assert!(buf.get(idx).reward <= i as f64);
            }
        }
    }

    #[test]
    fn overwrites_oldest_when_full() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| buf.get(i).reward).collect();
        // Ring layout after 5 pushes into capacity 3: [3, 4, 2].
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn sampling_is_uniform_chi_squared() {
        let capacity = 100;
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..capacity {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let mut counts = vec![0usize; capacity];
        for idx in buf.sample_indices(draws, &mut rng) {
            counts[idx] += 1;
        }
        let expected = draws as f64 / capacity as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 1% critical value of chi-squared with 99 degrees of freedom.
        assert!(chi2 < 134.642, "chi2 = {chi2}");
    }
}
