use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{ArenaError, Result};
use crate::market::{market_step, reward_ceiling, sample_costs, MarketState, PriceGrid};
use crate::nn::Checkpoint;
use crate::rng::{derive_seed, SeedTree, Stream};
use crate::sellers::Seller;

use super::allocators::{make_allocator, Allocator, Mode, Step};
use super::config::{ExperimentConfig, Regime};
use super::population::build_population;

/// Slack allowed when checking a round's reward against its ceiling.
pub const CEILING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub critic_loss: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
    /// Total impression mass handed out each round, aligned with `rows`.
    pub allocation_mass: Vec<f64>,
    /// Rows before this index come from training episodes.
    pub eval_start: usize,
    pub checkpoint: Option<Checkpoint>,
}

impl ExperimentResult {
    pub fn eval_rows(&self) -> &[MetricsRow] {
        &self.rows[self.eval_start..]
    }

    pub fn mean_eval_reward(&self) -> f64 {
        mean(self.eval_rows().iter().map(|r| r.reward))
    }

    /// Critic losses in update order.
    pub fn critic_losses(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.critic_loss).collect()
    }
}

pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Sellers, their private randomness and costs for one (sub-)market.
struct Market {
    grid: PriceGrid,
    window: usize,
    sellers: Vec<Seller>,
    seller_rngs: Vec<Stream>,
    costs: Vec<f64>,
    regime: Regime,
    cost_rng: Stream,
    /// Fraction of the global impression this market receives.
    share: f64,
}

impl Market {
    fn new(config: &ExperimentConfig, seeds: &SeedTree, share: f64) -> Result<Self> {
        let sellers = build_population(config, seeds)?;
        let costs = sellers.iter().map(|s| s.cost).collect();
        Ok(Self {
            grid: config.grid()?,
            window: config.window,
            seller_rngs: (0..sellers.len()).map(|i| seeds.stream("seller", i as u64)).collect(),
            sellers,
            costs,
            regime: config.regime,
            cost_rng: seeds.stream("round_costs", 0),
            share,
        })
    }

    fn episode(
        &mut self,
        allocator: &mut dyn Allocator,
        mode: Mode,
        episode: u64,
        steps: usize,
        mut sink: impl FnMut(usize, f64, Option<f64>, f64),
    ) -> Result<()> {
        for s in &mut self.sellers {
            s.reset();
        }
        let m = self.sellers.len();
        let mut state = Arc::new(MarketState::initial(m, self.window));
        for t in 0..steps {
            if self.regime == Regime::Variable {
                self.costs = sample_costs(m, &mut self.cost_rng);
                for (s, c) in self.sellers.iter_mut().zip(&self.costs) {
                    s.cost = *c;
                }
            }
            let prices: Vec<f64> = self
                .sellers
                .iter_mut()
                .zip(&mut self.seller_rngs)
                .map(|(s, rng)| s.choose(&self.grid, t as u64, rng).price)
                .collect();
            let action = allocator.allocate(&state, mode, episode)?;
            let outcome = market_step(&state, &prices, &self.costs, &action)?;
            let ceiling = reward_ceiling(&prices);
            if outcome.reward > ceiling + CEILING_SLACK {
                return Err(ArenaError::CeilingViolated { reward: outcome.reward, ceiling });
            }
            for (s, u) in self.sellers.iter_mut().zip(&outcome.payoffs) {
                s.observe(t as u64, u * self.share)?;
            }
            let mass: f64 = action.shares().iter().sum();
            let next = Arc::new(outcome.next);
            let loss = allocator
                .observe(Step { state: state.clone(), action, reward: outcome.reward, next: next.clone() }, mode)?;
            sink(t, outcome.reward, loss, mass);
            state = next;
        }
        Ok(())
    }
}

fn run_market(
    config: &ExperimentConfig,
    seeds: &SeedTree,
    share: f64,
    checkpoint: Option<&Checkpoint>,
) -> Result<ExperimentResult> {
    config.validate()?;
    let mut market = Market::new(config, seeds, share)?;
    let mut allocator = make_allocator(config, config.sellers, &seeds.child("allocator", 0));
    let start = Instant::now();
    let clock = |on: bool| on.then(|| start.elapsed().as_secs_f64() * 1e3);

    let mut rows = Vec::with_capacity((config.train_episodes + config.eval_episodes) * config.steps_per_episode);
    let mut allocation_mass = Vec::with_capacity(rows.capacity());
    let steps = config.steps_per_episode;

    if let Some(ckpt) = checkpoint {
        allocator.restore(ckpt)?;
    } else {
        for e in 0..allocator.prefill_episodes() {
            market.episode(allocator.as_mut(), Mode::Prefill, e as u64, steps, |_, _, _, _| {})?;
        }
        for e in 0..config.train_episodes {
            market.episode(allocator.as_mut(), Mode::Train, e as u64, steps, |t, reward, loss, mass| {
                rows.push(MetricsRow {
                    episode: e,
                    step: t,
                    reward,
                    critic_loss: loss,
                    wall_ms: clock(config.record_wall_clock),
                });
                allocation_mass.push(mass);
            })?;
        }
    }
    let eval_start = rows.len();
    let first_eval = if checkpoint.is_some() { 0 } else { config.train_episodes };
    for e in 0..config.eval_episodes {
        market.episode(allocator.as_mut(), Mode::Eval, e as u64, steps, |t, reward, loss, mass| {
            rows.push(MetricsRow {
                episode: first_eval + e,
                step: t,
                reward,
                critic_loss: loss,
                wall_ms: clock(config.record_wall_clock),
            });
            allocation_mass.push(mass);
        })?;
    }
    Ok(ExperimentResult {
        config: config.clone(),
        rows,
        allocation_mass,
        eval_start,
        checkpoint: allocator.checkpoint(),
    })
}

/// Splits `m` sellers into consecutive groups of at most `group_size`.
pub fn group_sizes(m: usize, group_size: usize) -> Vec<usize> {
    let groups = m.div_ceil(group_size);
    (0..groups).map(|g| group_size.min(m - g * group_size)).collect()
}

/// Trains and evaluates one allocator. Markets larger than `group_size` are
/// split into groups that share the impression equally; each group runs its
/// own allocator and the global round reward is the share-weighted sum.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    if config.sellers <= config.group_size {
        return run_market(config, &SeedTree::new(config.seed), 1.0, None);
    }
    let sizes = group_sizes(config.sellers, config.group_size);
    let share = 1.0 / sizes.len() as f64;
    let master = SeedTree::new(config.seed);
    let mut offset = 0;
    let jobs: Vec<(ExperimentConfig, SeedTree)> = sizes
        .iter()
        .enumerate()
        .map(|(g, &size)| {
            let mut sub = config.clone();
            sub.sellers = size;
            sub.fixed_prices = config.fixed_prices.as_ref().map(|p| p[offset..offset + size].to_vec());
            offset += size;
            (sub, master.child("group", g as u64))
        })
        .collect();
    let parts: Vec<ExperimentResult> =
        jobs.par_iter().map(|(sub, seeds)| run_market(sub, seeds, share, None)).collect::<Result<_>>()?;
    Ok(combine(config, parts, share))
}

fn combine(config: &ExperimentConfig, parts: Vec<ExperimentResult>, share: f64) -> ExperimentResult {
    let rows = (0..parts[0].rows.len())
        .map(|k| {
            let losses: Vec<f64> = parts.iter().filter_map(|p| p.rows[k].critic_loss).collect();
            MetricsRow {
                episode: parts[0].rows[k].episode,
                step: parts[0].rows[k].step,
                reward: parts.iter().map(|p| share * p.rows[k].reward).sum(),
                critic_loss: (!losses.is_empty()).then(|| mean(losses.iter().copied())),
                wall_ms: parts.iter().filter_map(|p| p.rows[k].wall_ms).reduce(f64::max),
            }
        })
        .collect();
    let allocation_mass =
        (0..parts[0].rows.len()).map(|k| parts.iter().map(|p| share * p.allocation_mass[k]).sum()).collect();
    ExperimentResult {
        config: config.clone(),
        rows,
        allocation_mass,
        eval_start: parts[0].eval_start,
        checkpoint: None,
    }
}

/// Evaluation episodes only, with learned weights taken from `checkpoint`.
pub fn run_evaluation(config: &ExperimentConfig, checkpoint: &Checkpoint) -> Result<ExperimentResult> {
    config.validate()?;
    if !config.allocator.is_learned() {
        return Err(ArenaError::Config(format!("{} has no checkpoint to evaluate", config.allocator.name())));
    }
    if config.sellers > config.group_size {
        return Err(ArenaError::Config("checkpoint evaluation needs sellers <= group_size".into()));
    }
    run_market(config, &SeedTree::new(config.seed), 1.0, Some(checkpoint))
}

/// Master seed of replica `k`; replica 0 keeps the configured seed.
pub fn replica_seed(seed: u64, k: u64) -> u64 {
    if k == 0 {
        seed
    } else {
        derive_seed(seed, "replica", k)
    }
}

/// Runs `n` independent replicas of the experiment, one per derived seed.
pub fn run_seeds(config: &ExperimentConfig, n: usize) -> Result<Vec<ExperimentResult>> {
    (0..n as u64)
        .into_par_iter()
        .map(|k| run_experiment(&ExperimentConfig { seed: replica_seed(config.seed, k), ..config.clone() }))
        .collect()
}
