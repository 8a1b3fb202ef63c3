//! Fixed-capacity FIFO experience buffers.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::vessel::{ControlAction, VesselState};

/// Which policy produced the executed action of a stored transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSource {
    Agent,
    Expert,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub s: VesselState,
    pub a: ControlAction,
    pub r: f64,
    pub s_next: VesselState,
    /// True when the successor is absorbing and must not be bootstrapped.
    pub terminal: bool,
    pub source: ActionSource,
}

/// A transition executed by the agent plus the expert's label for the same state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentedTransition {
    pub s: VesselState,
    pub a: ControlAction,
    pub a_expert: ControlAction,
    pub r: f64,
    pub s_next: VesselState,
    pub terminal: bool,
}

impl AugmentedTransition {
    pub fn transition(&self) -> Transition {
        Transition {
            s: self.s,
            a: self.a,
            r: self.r,
            s_next: self.s_next,
            terminal: self.terminal,
            source: ActionSource::Agent,
        }
    }
}

/// Common view used by the critic updates.
pub trait Experience {
    fn state(&self) -> &VesselState;
    fn action(&self) -> &ControlAction;
    fn reward(&self) -> f64;
    fn next_state(&self) -> &VesselState;
    fn is_terminal(&self) -> bool;
}

impl Experience for Transition {
    fn state(&self) -> &VesselState {
        &self.s
    }
    fn action(&self) -> &ControlAction {
        &self.a
    }
    fn reward(&self) -> f64 {
        self.r
    }
    fn next_state(&self) -> &VesselState {
        &self.s_next
    }
    fn is_terminal(&self) -> bool {
        self.terminal
    }
}

impl Experience for AugmentedTransition {
    fn state(&self) -> &VesselState {
        &self.s
    }
    fn action(&self) -> &ControlAction {
        &self.a
    }
    fn reward(&self) -> f64 {
        self.r
    }
    fn next_state(&self) -> &VesselState {
        &self.s_next
    }
    fn is_terminal(&self) -> bool {
        self.terminal
    }
}

#[derive(Clone, Debug)]
pub struct RingBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    cursor: usize,
}

impl<T: Clone> RingBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring buffer capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn newest(&self) -> Option<&T> {
        if self.items.is_empty() {
            None
        } else {
            let i = (self.cursor + self.capacity - 1) % self.capacity;
            self.items.get(i)
        }
    }

    /// Uniform minibatch. Indices are distinct when the buffer holds at
    /// least `n` items, otherwise drawn with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<T>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer("cannot sample from an empty buffer"));
        }
        let len = self.items.len();
        if len >= n {
            Ok(index::sample(rng, len, n)
                .into_iter()
                .map(|i| self.items[i].clone())
                .collect())
        } else {
            Ok((0..n)
                .map(|_| self.items[rng.random_range(0..len)].clone())
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn push_and_evict() {
        let mut b = RingBuffer::new(2);
        b.push(1);
        assert_eq!(b.len(), 1);
        b.push(2);
        b.push(3);
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(b.newest(), Some(&3));
        let mut big = RingBuffer::new(100_000);
        for i in 0..150 {
            big.push(i);
        }
        assert_eq!(big.len(), 150);
    }

    #[test]
    fn fifo_order_is_exact_across_wraps() {
        let mut b = RingBuffer::new(7);
        for i in 0..30 {
            b.push(i);
            let expect: Vec<i32> = ((i - 6).max(0)..=i).collect();
            assert_eq!(b.iter().copied().collect::<Vec<_>>(), expect);
        }
    }

    #[test]
    fn sampling_single_item_and_empty() {
        let mut b: RingBuffer<u8> = RingBuffer::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(b.sample(1, &mut rng).is_err());
        b.push(42);
        assert_eq!(b.sample(1, &mut rng).unwrap(), vec![42]);
        assert_eq!(b.sample(3, &mut rng).unwrap(), vec![42, 42, 42]);
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let mut b = RingBuffer::new(100);
        for i in 0..100 {
            b.push(i);
        }
        let x = b.sample(64, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let y = b.sample(64, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(x, y);
        let mut sorted = x.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 64);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = RingBuffer::new(10);
        for i in 0..10usize {
            b.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            counts[b.sample(1, &mut rng).unwrap()[0]] += 1;
        }
        let p = 0.1;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sd, "count {c} too far from {mean}");
            chi2 += (c as f64 - mean).powi(2) / mean;
        }
        // 99.9th percentile of chi-square with 9 degrees of freedom
        assert!(chi2 < 27.88, "chi-square {chi2}");
    }
}
