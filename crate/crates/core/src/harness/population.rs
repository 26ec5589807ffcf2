use crate::error::{ArenaError, Result};
use crate::market::sample_costs;
use crate::rng::SeedTree;
use crate::sellers::{BanditState, Seller, StrategyKind};

use super::config::ExperimentConfig;

/// Strategy per seller: each kind gets `floor(fraction · m)` consecutive
/// sellers in mix order and the last kind absorbs the remainder.
pub fn assign_strategies(config: &ExperimentConfig) -> Result<Vec<StrategyKind>> {
    let m = config.sellers;
    let total: f64 = config.strategy_mix.values().sum();
    if config.strategy_mix.is_empty() || (total - 1.0).abs() > 1e-9 {
        return Err(ArenaError::Config(format!("strategy fractions sum to {total}, not 1")));
    }
    let mut kinds = Vec::with_capacity(m);
    let entries: Vec<_> = config.strategy_mix.iter().collect();
    for (k, (kind, fraction)) in entries.iter().enumerate() {
        let count = if k + 1 == entries.len() {
            m - kinds.len()
        } else {
            ((**fraction * m as f64 + 1e-9).floor() as usize).min(m - kinds.len())
        };
        kinds.extend(std::iter::repeat_n(**kind, count));
    }
    Ok(kinds)
}

/// Sellers with costs from the "costs" stream and fresh strategy memory.
pub fn build_population(config: &ExperimentConfig, seeds: &SeedTree) -> Result<Vec<Seller>> {
    config.validate()?;
    let grid = config.grid()?;
    let costs = sample_costs(config.sellers, &mut seeds.stream("costs", 0));
    let kinds = assign_strategies(config)?;
    Ok(kinds
        .into_iter()
        .zip(costs)
        .enumerate()
        .map(|(i, (kind, cost))| {
            let strategy = match &config.fixed_prices {
                Some(prices) => BanditState::Fixed { arm: grid.arm_of(prices[i]) },
                None => BanditState::new(kind, &grid, &config.strategy, &mut seeds.stream("seller_init", i as u64)),
            };
            Seller::new(cost, strategy)
        })
        .collect())
}
