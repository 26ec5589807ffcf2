use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ArenaError, Result};
use crate::market::PriceGrid;
use crate::rl::RlConfig;
use crate::sellers::{StrategyKind, StrategyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Costs drawn once per experiment.
    Fixed,
    /// Costs redrawn every round.
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocatorKind {
    Greedy,
    Linucb,
    Ddpg,
    Iagru,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 4] = [Self::Greedy, Self::Linucb, Self::Ddpg, Self::Iagru];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Linucb => "linucb",
            Self::Ddpg => "ddpg",
            Self::Iagru => "iagru",
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, Self::Ddpg | Self::Iagru)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sellers: usize,
    pub regime: Regime,
    /// Fraction of sellers per strategy; assigned in blocks in this order.
    pub strategy_mix: BTreeMap<StrategyKind, f64>,
    pub allocator: AllocatorKind,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    pub steps_per_episode: usize,
    pub window: usize,
    pub price_resolution: usize,
    pub seed: u64,
    /// Largest sub-problem handled by one allocator instance.
    pub group_size: usize,
    pub linucb_alpha: f64,
    /// Pins every seller to one grid price (single-arm bandits) when set.
    pub fixed_prices: Option<Vec<f64>>,
    /// Fill the `wall_ms` column; off by default so metrics stay reproducible.
    pub record_wall_clock: bool,
    pub strategy: StrategyParams,
    pub rl: RlConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sellers: 200,
            regime: Regime::Fixed,
            strategy_mix: BTreeMap::from([(StrategyKind::EpsGreedy, 1.0)]),
            allocator: AllocatorKind::Iagru,
            train_episodes: 1000,
            eval_episodes: 1000,
            steps_per_episode: 1000,
            window: 1,
            price_resolution: 100,
            seed: 0,
            group_size: 200,
            linucb_alpha: 1.0,
            fixed_prices: None,
            record_wall_clock: false,
            strategy: StrategyParams::default(),
            rl: RlConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<PriceGrid> {
        PriceGrid::new(self.price_resolution)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ArenaError::Config(msg));
        if self.sellers == 0 {
            return bad("sellers must be positive".into());
        }
        if self.steps_per_episode == 0 || self.window == 0 || self.price_resolution == 0 {
            return bad("steps_per_episode, window and price_resolution must be positive".into());
        }
        if self.group_size < 2 {
            return bad(format!("group_size {} is below 2", self.group_size));
        }
        if self.strategy_mix.is_empty() {
            return bad("strategy_mix is empty".into());
        }
        if self.strategy_mix.values().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("strategy fractions must lie in [0, 1]".into());
        }
        let total: f64 = self.strategy_mix.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("strategy fractions sum to {total}, not 1"));
        }
        if let Some(prices) = &self.fixed_prices {
            if prices.len() != self.sellers {
                return bad(format!("{} fixed prices for {} sellers", prices.len(), self.sellers));
            }
            let grid = self.grid()?;
            if let Some(p) = prices.iter().find(|p| (grid.price(grid.arm_of(**p)) - **p).abs() > 1e-12) {
                return bad(format!("fixed price {p} is not on the 1/{} grid", self.price_resolution));
            }
        }
        if self.allocator.is_learned() && self.rl.batch_size == 0 {
            return bad("rl.batch_size must be positive".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ArenaError::Config(format!("malformed config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ArenaError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies `key=value` overrides. Keys are dotted paths into the config
    /// (`rl.gamma`, `strategy.exp3_gamma`); values parse as JSON and fall back
    /// to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut value = serde_json::to_value(self).expect("config serialises");
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| ArenaError::Config(format!("override {item:?} is not key=value")))?;
            let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut slot = &mut value;
            for part in key.split('.') {
                slot = match slot {
                    Value::Object(map) => {
                        map.get_mut(part).ok_or_else(|| ArenaError::Config(format!("unknown config key {key}")))?
                    }
                    _ => return Err(ArenaError::Config(format!("unknown config key {key}"))),
                };
            }
            *slot = parsed;
        }
        let cfg: Self =
            serde_json::from_value(value).map_err(|e| ArenaError::Config(format!("bad override value: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// FNV-1a hash of the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serialises");
        text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
    }
}
