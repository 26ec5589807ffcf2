use std::sync::Arc;

use crate::baselines::{greedy_myopic, LinUcbState, FEATURES};
use crate::error::Result;
use crate::market::{Allocation, MarketState};
use crate::nn::Checkpoint;
use crate::rl::{explore, ActorCritic, Architecture, DdpgNet, IaGruNet, Transition};
use crate::rng::SeedTree;

use super::config::{AllocatorKind, ExperimentConfig};

/// Phase an episode is run in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Replay warm-up: act like Greedy Myopic, store transitions, no updates.
    Prefill,
    Train,
    Eval,
}

/// One round seen from the platform's side.
#[derive(Debug, Clone)]
pub struct Step {
    pub state: Arc<MarketState>,
    pub action: Allocation,
    pub reward: f64,
    pub next: Arc<MarketState>,
}

pub trait Allocator: Send {
    fn kind(&self) -> AllocatorKind;

    fn allocate(&mut self, state: &MarketState, mode: Mode, episode: u64) -> Result<Allocation>;

    /// Returns the critic loss when a gradient update happened.
    fn observe(&mut self, step: Step, mode: Mode) -> Result<Option<f64>>;

    fn prefill_episodes(&self) -> usize {
        0
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }

    fn restore(&mut self, _ckpt: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct GreedyAllocator;

impl Allocator for GreedyAllocator {
    fn kind(&self) -> AllocatorKind {
        AllocatorKind::Greedy
    }

    fn allocate(&mut self, state: &MarketState, _mode: Mode, _episode: u64) -> Result<Allocation> {
        Ok(greedy_myopic(state))
    }

    fn observe(&mut self, _step: Step, _mode: Mode) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// LinUCB keeps learning online in every phase.
#[derive(Debug, Clone)]
pub struct LinUcbAllocator {
    pub state: LinUcbState,
    pending: Option<(usize, [f64; FEATURES])>,
}

impl LinUcbAllocator {
    pub fn new(sellers: usize, alpha: f64) -> Self {
        Self { state: LinUcbState::new(sellers, alpha), pending: None }
    }
}

impl Allocator for LinUcbAllocator {
    fn kind(&self) -> AllocatorKind {
        AllocatorKind::Linucb
    }

    fn allocate(&mut self, state: &MarketState, _mode: Mode, _episode: u64) -> Result<Allocation> {
        let features = LinUcbState::features(state);
        let (arm, q) = self.state.choose(&features)?;
        self.pending = Some((arm, features[arm]));
        Ok(q)
    }

    fn observe(&mut self, step: Step, _mode: Mode) -> Result<Option<f64>> {
        if let Some((arm, x)) = self.pending.take() {
            self.state.update(arm, &x, step.reward)?;
        }
        Ok(None)
    }
}

/// Adapts an actor-critic agent to the episode loop.
#[derive(Debug, Clone)]
pub struct RlAllocator<A: Architecture> {
    pub agent: ActorCritic<A>,
}

impl<A: Architecture> RlAllocator<A> {
    pub fn new(agent: ActorCritic<A>) -> Self {
        Self { agent }
    }
}

impl<A: Architecture + 'static> Allocator for RlAllocator<A> {
    fn kind(&self) -> AllocatorKind {
        if A::CANONICAL {
            AllocatorKind::Iagru
        } else {
            AllocatorKind::Ddpg
        }
    }

    fn allocate(&mut self, state: &MarketState, mode: Mode, episode: u64) -> Result<Allocation> {
        match mode {
            Mode::Prefill => Ok(greedy_myopic(state)),
            Mode::Train => {
                let action = self.agent.act(state)?;
                let schedule = self.agent.config.noise.clone();
                Ok(explore(&action, episode, &schedule, self.agent.noise_draw()))
            }
            Mode::Eval => self.agent.act(state),
        }
    }

    fn observe(&mut self, step: Step, mode: Mode) -> Result<Option<f64>> {
        if mode == Mode::Eval {
            return Ok(None);
        }
        self.agent.remember(Transition {
            state: step.state,
            action: step.action,
            reward: step.reward,
            next: step.next,
        });
        if mode == Mode::Train && self.agent.buffer.len() >= self.agent.config.batch_size {
            return self.agent.train_step().map(Some);
        }
        Ok(None)
    }

    fn prefill_episodes(&self) -> usize {
        self.agent.config.prefill_episodes
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(self.agent.checkpoint())
    }

    fn restore(&mut self, ckpt: &Checkpoint) -> Result<()> {
        self.agent.restore(ckpt)
    }
}

/// Builds the allocator named in the config for `sellers` sellers.
pub fn make_allocator(config: &ExperimentConfig, sellers: usize, seeds: &SeedTree) -> Box<dyn Allocator> {
    match config.allocator {
        AllocatorKind::Greedy => Box::new(GreedyAllocator),
        AllocatorKind::Linucb => Box::new(LinUcbAllocator::new(sellers, config.linucb_alpha)),
        AllocatorKind::Ddpg => {
            Box::new(RlAllocator::new(ActorCritic::<DdpgNet>::new(sellers, config.window, config.rl.clone(), seeds)))
        }
        AllocatorKind::Iagru => {
            Box::new(RlAllocator::new(ActorCritic::<IaGruNet>::new(sellers, config.window, config.rl.clone(), seeds)))
        }
    }
}
