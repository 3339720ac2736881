//! Fixed-capacity experience replay.

use ndarray::Array2;
use rand::Rng;

use crate::error::{ensure_dim, Error, Result};

/// One joint step: state, concatenated agent actions, per-agent rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Row-stacked sample of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array2<f64>,
    pub next_states: Array2<f64>,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::invalid("empty batch"))?;
        let (s, a, r) = (first.state.len(), first.action.len(), first.rewards.len());
        let n = items.len();
        let mut b = Batch {
            states: Array2::zeros((n, s)),
            actions: Array2::zeros((n, a)),
            rewards: Array2::zeros((n, r)),
            next_states: Array2::zeros((n, s)),
            done: Vec::with_capacity(n),
        };
        for (row, t) in items.iter().enumerate() {
            ensure_dim(s, t.state.len())?;
            ensure_dim(s, t.next_state.len())?;
            ensure_dim(a, t.action.len())?;
            ensure_dim(r, t.rewards.len())?;
            for (dst, src) in [(&mut b.states, &t.state), (&mut b.actions, &t.action), (&mut b.rewards, &t.rewards), (&mut b.next_states, &t.next_state)] {
                dst.row_mut(row).iter_mut().zip(src.iter()).for_each(|(d, v)| *d = *v);
            }
            b.done.push(t.done);
        }
        Ok(b)
    }
}

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(Self { capacity, items: Vec::new(), next: 0 })
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

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Distinct indices, uniform over the stored entries.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 || batch > self.items.len() {
            return Err(Error::invalid(format!("cannot draw {batch} of {} stored transitions", self.items.len())));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(batch, rng)?;
        let items: Vec<&Transition> = idx.iter().map(|&i| &self.items[i]).collect();
        Batch::from_transitions(&items)
    }
}
