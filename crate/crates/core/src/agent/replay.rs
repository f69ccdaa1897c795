//! Prioritized episode replay.

use rand::Rng;

use crate::env::Episode;

/// Binary tree of partial sums over leaf priorities.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    // Leaf count rounded up to a power of two so leaves stay in index order.
    width: usize,
    // node 1 is the root; leaves live at [width, 2 * width)
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "sum tree needs a positive capacity");
        let width = capacity.next_power_of_two();
        SumTree {
            capacity,
            width,
            nodes: vec![0.0; 2 * width],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.width + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        assert!(
            value >= 0.0 && value.is_finite(),
            "priority must be finite and non-negative"
        );
        assert!(i < self.capacity, "leaf {i} out of range");
        let mut node = self.width + i;
        self.nodes[node] = value;
        // Parents are recomputed from their children so rounding never accumulates.
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative range contains `mass`, for `mass` in `[0, total)`.
    pub fn find(&self, mass: f64) -> usize {
        let mut node = 1;
        let mut mass = mass.clamp(0.0, self.total());
        while node < self.width {
            let left = 2 * node;
            if mass < self.nodes[left] || self.nodes[left + 1] == 0.0 {
                node = left;
            } else {
                mass -= self.nodes[left];
                node = left + 1;
            }
        }
        node - self.width
    }

    /// Draws one leaf with probability proportional to its value.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.find(rng.random::<f64>() * self.total())
    }
}

/// Fixed-capacity FIFO of episodes with proportional prioritized sampling.
///
/// An entry with priority `p` is drawn with probability `p^alpha / sum`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: Vec<Episode>,
    priorities: Vec<f64>,
    tree: SumTree,
    next: usize,
    alpha: f64,
    eps: f64,
    max_priority: f64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, alpha: f64, eps: f64) -> Self {
        ReplayBuffer {
            entries: Vec::with_capacity(capacity),
            priorities: Vec::with_capacity(capacity),
            tree: SumTree::new(capacity),
            next: 0,
            alpha,
            eps,
            max_priority: 1.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.tree.capacity()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Episode {
        &self.entries[i]
    }

    pub fn priority(&self, i: usize) -> f64 {
        self.priorities[i]
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    pub fn iter(&self) -> impl Iterator<Item = &Episode> {
        self.entries.iter()
    }

    /// Stores with the largest priority seen so far; evicts the oldest entry when full.
    pub fn push(&mut self, episode: Episode) -> usize {
        let p = self.max_priority;
        self.push_with_priority(episode, p)
    }

    pub fn push_with_priority(&mut self, episode: Episode, priority: f64) -> usize {
        let slot = self.next;
        if self.entries.len() < self.capacity() {
            self.entries.push(episode);
            self.priorities.push(0.0);
        } else {
            self.entries[slot] = episode;
        }
        self.set_priority(slot, priority);
        self.next = (self.next + 1) % self.capacity();
        slot
    }

    fn set_priority(&mut self, i: usize, priority: f64) {
        self.priorities[i] = priority;
        self.max_priority = self.max_priority.max(priority);
        self.tree.set(i, priority.powf(self.alpha));
    }

    /// Sets the priority of entry `i` from a prediction residual.
    pub fn update(&mut self, i: usize, residual: f64) {
        self.set_priority(i, residual.abs() + self.eps);
    }

    /// `n` indices drawn independently, with replacement.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        if self.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| self.tree.sample(rng).min(self.len() - 1))
            .collect()
    }
}
