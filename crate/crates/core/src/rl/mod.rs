//! Actor-critic allocators: the fully connected DDPG baseline and IA(GRU).

mod agent;
mod ddpg;
mod iagru;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::market::{Allocation, MarketState};

pub use agent::{ActorCritic, Architecture, Batch};
pub use ddpg::{DdpgAgent, DdpgNet};
pub use iagru::{IaGruAgent, IaGruNet};

/// Gaussian exploration noise whose mean decays geometrically per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSchedule {
    pub initial_mean: f64,
    pub decay: f64,
    pub std_dev: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self { initial_mean: 0.2, decay: 0.995, std_dev: 0.1 }
    }
}

impl NoiseSchedule {
    pub fn mean(&self, episode: u64) -> f64 {
        self.initial_mean * self.decay.powf(episode as f64)
    }
}

/// Hyperparameters shared by both actor-critic allocators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub noise: NoiseSchedule,
    /// Greedy-Myopic episodes used to seed the replay buffer before training.
    pub prefill_episodes: usize,
    pub ddpg_hidden: [usize; 2],
    pub background_hidden: usize,
    pub seller_hidden: usize,
    pub head_hidden: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 1e-3,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            batch_size: 64,
            buffer_capacity: 100_000,
            noise: NoiseSchedule::default(),
            prefill_episodes: 5,
            ddpg_hidden: [64, 64],
            background_hidden: 32,
            seller_hidden: 16,
            head_hidden: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<MarketState>,
    pub action: Allocation,
    pub reward: f64,
    pub next: Arc<MarketState>,
}

/// Fixed-capacity ring of transitions; the oldest is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer needs room for at least one transition");
        Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)), pushed: 0 }
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

    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.pushed += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform minibatch without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.len() < size {
            return Err(ArenaError::InsufficientBuffer { have: self.items.len(), need: size });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), size).into_iter().map(|i| &self.items[i]).collect())
    }
}

/// Adds `N(μ_e, σ²)` noise per seller, clips at zero and renormalises; falls
/// back to uniform if everything was clipped.
pub fn explore<R: Rng + ?Sized>(
    action: &Allocation,
    episode: u64,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Allocation {
    let normal = Normal::new(schedule.mean(episode), schedule.std_dev).expect("valid noise");
    let noisy: Vec<f64> = action.shares().iter().map(|q| (q + normal.sample(rng)).max(0.0)).collect();
    Allocation::proportional(&noisy)
}

/// Canonical seller order for one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    /// `order[k]` is the original index of the seller placed at position `k`.
    pub order: Vec<usize>,
    /// `inverse[i]` is the sorted position of original seller `i`.
    pub inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(m: usize) -> Self {
        Self { order: (0..m).collect(), inverse: (0..m).collect() }
    }

    pub fn from_order(order: Vec<usize>) -> Self {
        let mut inverse = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            inverse[i] = k;
        }
        Self { order, inverse }
    }

    /// Maps values given in sorted positions back to original seller indices.
    pub fn unsort(&self, sorted: &[f64]) -> Vec<f64> {
        self.inverse.iter().map(|&k| sorted[k]).collect()
    }

    pub fn sort(&self, original: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&i| original[i]).collect()
    }
}

/// Sorts sellers by descending mean revenue over the window, ties broken by
/// ascending original index.
pub fn permutation_transform(state: &MarketState) -> (MarketState, Permutation) {
    let key = state.mean_revenue();
    let mut order: Vec<usize> = (0..state.sellers()).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    let perm = Permutation::from_order(order);
    (state.permuted(&perm.order), perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{market_step, SellerRecord};
    use crate::rng::SeedTree;

    fn state_with_revenues(revenues: &[f64]) -> MarketState {
        let records = revenues
            .iter()
            .map(|&l| SellerRecord { impressions: 1.0, price: l, transactions: 1.0 - l, revenue: l * (1.0 - l) })
            .collect();
        MarketState::from_records(1, revenues.len(), 1, records).unwrap()
    }

    #[test]
    fn sorts_by_descending_revenue() {
        let (sorted, perm) = permutation_transform(&state_with_revenues(&[0.1, 0.5, 0.3]));
        assert_eq!(perm.order, vec![1, 2, 0]);
        assert_eq!(perm.inverse, vec![2, 0, 1]);
        assert_eq!(sorted.latest()[0].price, 0.5);
    }

    #[test]
    fn equal_revenues_keep_index_order() {
        let (_, perm) = permutation_transform(&MarketState::initial(4, 2));
        assert_eq!(perm, Permutation::identity(4));
    }

    #[test]
    fn unsort_inverts_sort() {
        let (_, perm) = permutation_transform(&state_with_revenues(&[0.2, 0.05, 0.4, 0.3]));
        let original = [10.0, 20.0, 30.0, 40.0];
        assert_eq!(perm.unsort(&perm.sort(&original)), original.to_vec());
    }

    #[test]
    fn window_mean_decides_order() {
        let mut state = MarketState::initial(2, 2);
        let q = Allocation::uniform(2);
        state = market_step(&state, &[0.5, 0.1], &[0.0; 2], &q).unwrap().next;
        state = market_step(&state, &[0.1, 0.4], &[0.0; 2], &q).unwrap().next;
        // means: seller 0 (0.125 + 0.045)/2, seller 1 (0.045 + 0.12)/2
        assert_eq!(permutation_transform(&state).1.order, vec![0, 1]);
    }

    #[test]
    fn noise_mean_decays() {
        let s = NoiseSchedule::default();
        assert_eq!(s.mean(0), 0.2);
        assert!((0..50).all(|e| s.mean(e + 1) < s.mean(e)));
        assert!(s.mean(5000) < 1e-10);
    }

    #[test]
    fn zero_noise_keeps_action() {
        let schedule = NoiseSchedule { initial_mean: 0.0, decay: 1.0, std_dev: 0.0 };
        let q = Allocation::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut rng = SeedTree::new(0).stream("noise", 0);
        let out = explore(&q, 3, &schedule, &mut rng);
        for (a, b) in out.shares().iter().zip(q.shares()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn all_clipped_falls_back_to_uniform() {
        let schedule = NoiseSchedule { initial_mean: -5.0, decay: 1.0, std_dev: 0.0 };
        let mut rng = SeedTree::new(0).stream("noise", 0);
        let out = explore(&Allocation::point(4, 1), 0, &schedule, &mut rng);
        assert_eq!(out.shares(), &[0.25; 4]);
    }

    #[test]
    fn buffer_evicts_oldest() {
        let state = Arc::new(MarketState::initial(2, 1));
        let mut buf = ReplayBuffer::new(3);
        for k in 0..5 {
            buf.push(Transition {
                state: state.clone(),
                action: Allocation::uniform(2),
                reward: k as f64 / 100.0,
                next: state.clone(),
            });
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![0.02, 0.03, 0.04]);
        let mut rng = SeedTree::new(0).stream("replay", 0);
        assert!(buf.sample(4, &mut rng).is_err());
        assert_eq!(buf.sample(3, &mut rng).unwrap().len(), 3);
    }
}
