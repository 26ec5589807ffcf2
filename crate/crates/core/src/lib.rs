//! Impression allocation arena.
//!
//! Strategic sellers price with bandit algorithms while a platform splits a
//! unit of buyer impressions among them each round. The crate provides the
//! market model, the seller strategies, two heuristic allocators, DDPG and the
//! permutation-canonical recurrent actor-critic (IA(GRU)), and an experiment
//! harness that ties them together.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod market;
pub mod nn;
pub mod rl;
pub mod rng;
pub mod sellers;

pub use error::{ArenaError, Result};
pub use harness::{AllocatorKind, ExperimentConfig, ExperimentResult};
pub use market::{Allocation, MarketState, PriceGrid, SellerRecord};
pub use sellers::{BanditState, StrategyKind};
