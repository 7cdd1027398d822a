//! Fixed-capacity replay of joint multi-agent transitions.
//!
//! One entry covers every agent for one environment step, so a replayed
//! minibatch can be pushed through the communicating network as a whole.
//! The buffer is a plain ring and is not thread-safe.

use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("transition shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot sample {requested} transitions from a buffer holding {available}")]
    InsufficientSamples { requested: usize, available: usize },
    #[error("replay capacity must be positive")]
    ZeroCapacity,
}

pub type Result<T, E = ReplayError> = std::result::Result<T, E>;

/// Total transitions shared by all agents in the default sizing rule.
pub const DEFAULT_TOTAL_CAPACITY: usize = 100_000;

pub fn default_capacity(n_agents: usize) -> usize {
    (DEFAULT_TOTAL_CAPACITY / n_agents.max(1)).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTransition {
    /// `[agent][frame][roi³]`.
    pub obs: Vec<f32>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f32>,
    pub next_obs: Vec<f32>,
    pub terminal: Vec<bool>,
    /// Agent was still searching when the step began. Inactive entries
    /// carry a placeholder action and are excluded from the loss.
    pub active: Vec<bool>,
}

/// A gathered minibatch; per-agent arrays are `[sample][agent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub n_agents: usize,
    pub obs: Vec<f32>,
    pub next_obs: Vec<f32>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f32>,
    pub terminal: Vec<bool>,
    pub active: Vec<bool>,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    n_agents: usize,
    obs_len: usize,
    obs: Vec<f32>,
    next_obs: Vec<f32>,
    actions: Vec<usize>,
    rewards: Vec<f32>,
    terminal: Vec<bool>,
    active: Vec<bool>,
    cursor: usize,
    size: usize,
}

impl ReplayBuffer {
    /// `obs_len` is one agent's observation length (`in_frames * roi³`).
    pub fn new(capacity: usize, n_agents: usize, obs_len: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            n_agents,
            obs_len,
            obs: Vec::new(),
            next_obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminal: Vec::new(),
            active: Vec::new(),
            cursor: 0,
            size: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn check(&self, t: &JointTransition) -> Result<()> {
        let n = self.n_agents;
        let o = n * self.obs_len;
        let bad = |what: &str, got: usize, want: usize| {
            Err(ReplayError::ShapeMismatch(format!("{what} has {got} entries, expected {want}")))
        };
        if t.obs.len() != o {
            return bad("obs", t.obs.len(), o);
        }
        if t.next_obs.len() != o {
            return bad("next_obs", t.next_obs.len(), o);
        }
        for (what, len) in [
            ("actions", t.actions.len()),
            ("rewards", t.rewards.len()),
            ("terminal", t.terminal.len()),
            ("active", t.active.len()),
        ] {
            if len != n {
                return bad(what, len, n);
            }
        }
        if let Some(r) = t.rewards.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
            return Err(ReplayError::ShapeMismatch(format!("reward {r} outside [-1, 1]")));
        }
        Ok(())
    }

    pub fn push(&mut self, t: JointTransition) -> Result<()> {
        self.check(&t)?;
        let n = self.n_agents;
        let o = n * self.obs_len;
        if self.size < self.capacity && self.cursor == self.size {
            self.obs.extend_from_slice(&t.obs);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.actions.extend_from_slice(&t.actions);
            self.rewards.extend_from_slice(&t.rewards);
            self.terminal.extend_from_slice(&t.terminal);
            self.active.extend_from_slice(&t.active);
        } else {
            let c = self.cursor;
            self.obs[c * o..(c + 1) * o].copy_from_slice(&t.obs);
            self.next_obs[c * o..(c + 1) * o].copy_from_slice(&t.next_obs);
            self.actions[c * n..(c + 1) * n].copy_from_slice(&t.actions);
            self.rewards[c * n..(c + 1) * n].copy_from_slice(&t.rewards);
            self.terminal[c * n..(c + 1) * n].copy_from_slice(&t.terminal);
            self.active[c * n..(c + 1) * n].copy_from_slice(&t.active);
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.size = (self.size + 1).min(self.capacity);
        Ok(())
    }

    /// Stored transition by slot index.
    pub fn get(&self, slot: usize) -> Option<JointTransition> {
        if slot >= self.size {
            return None;
        }
        let n = self.n_agents;
        let o = n * self.obs_len;
        Some(JointTransition {
            obs: self.obs[slot * o..(slot + 1) * o].to_vec(),
            actions: self.actions[slot * n..(slot + 1) * n].to_vec(),
            rewards: self.rewards[slot * n..(slot + 1) * n].to_vec(),
            next_obs: self.next_obs[slot * o..(slot + 1) * o].to_vec(),
            terminal: self.terminal[slot * n..(slot + 1) * n].to_vec(),
            active: self.active[slot * n..(slot + 1) * n].to_vec(),
        })
    }

    /// Retained transitions, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = JointTransition> + '_ {
        let start = if self.size < self.capacity { 0 } else { self.cursor };
        (0..self.size).filter_map(move |i| self.get((start + i) % self.capacity))
    }

    /// Uniform sampling with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Result<Batch> {
        if self.size < batch_size || self.size == 0 {
            return Err(ReplayError::InsufficientSamples {
                requested: batch_size,
                available: self.size,
            });
        }
        let n = self.n_agents;
        let o = n * self.obs_len;
        let indices: Vec<usize> = (0..batch_size).map(|_| rng.below(self.size as u64) as usize).collect();
        let mut b = Batch {
            size: batch_size,
            n_agents: n,
            obs: Vec::with_capacity(batch_size * o),
            next_obs: Vec::with_capacity(batch_size * o),
            actions: Vec::with_capacity(batch_size * n),
            rewards: Vec::with_capacity(batch_size * n),
            terminal: Vec::with_capacity(batch_size * n),
            active: Vec::with_capacity(batch_size * n),
            indices,
        };
        for &i in &b.indices {
            b.obs.extend_from_slice(&self.obs[i * o..(i + 1) * o]);
            b.next_obs.extend_from_slice(&self.next_obs[i * o..(i + 1) * o]);
            b.actions.extend_from_slice(&self.actions[i * n..(i + 1) * n]);
            b.rewards.extend_from_slice(&self.rewards[i * n..(i + 1) * n]);
            b.terminal.extend_from_slice(&self.terminal[i * n..(i + 1) * n]);
            b.active.extend_from_slice(&self.active[i * n..(i + 1) * n]);
        }
        Ok(b)
    }
}
