//! Market domain types and the expected-value transition.
//!
//! A round works as follows: every seller posts a price on the grid, the
//! platform splits one unit of buyer impressions into an [`Allocation`], and a
//! single buyer with valuation drawn from U(0,1) purchases from seller `i` with
//! probability `(1 - p_i) * q_i`. Everything here is computed in expectation,
//! so the transition itself never samples.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, ArenaError, Result};

/// Tolerance used when checking that an allocation sums to one.
pub const ALLOCATION_TOLERANCE: f64 = 1e-9;

/// Mean and variance of the seller cost distribution before clamping.
pub const COST_MEAN: f64 = 0.5;
pub const COST_VARIANCE: f64 = 0.5;

/// One seller's observations for one round: impressions, price, expected
/// transactions and expected revenue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SellerRecord {
    pub impressions: f64,
    pub price: f64,
    pub transactions: f64,
    pub revenue: f64,
}

impl SellerRecord {
    pub fn as_array(&self) -> [f64; 4] {
        [self.impressions, self.price, self.transactions, self.revenue]
    }

    pub fn is_valid(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        unit(self.impressions)
            && unit(self.price)
            && unit(self.transactions)
            && unit(self.revenue)
            && self.transactions <= self.impressions + 1e-12
            && (self.revenue - self.price * self.transactions).abs() <= 1e-12
    }
}

/// The last `window` rounds of records for `m` sellers, oldest round first.
///
/// Stored flat in (round, seller) order; the window always holds exactly
/// `window` rounds, padded with all-zero rounds before any history exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    window: usize,
    sellers: usize,
    round: u64,
    records: Vec<SellerRecord>,
}

impl MarketState {
    /// All-zero history for `sellers` sellers and a window of `window` rounds.
    pub fn initial(sellers: usize, window: usize) -> Self {
        assert!(sellers > 0 && window > 0, "market needs at least one seller and one round");
        Self { window, sellers, round: 0, records: vec![SellerRecord::default(); window * sellers] }
    }

    pub fn from_records(window: usize, sellers: usize, round: u64, records: Vec<SellerRecord>) -> Result<Self> {
        if window == 0 || sellers == 0 || records.len() != window * sellers {
            return Err(ArenaError::Dimension(format!("{} records for a ({window}, {sellers}) window", records.len())));
        }
        if let Some(bad) = records.iter().find(|r| !r.is_valid()) {
            return Err(ArenaError::Dimension(format!("invalid record {bad:?}")));
        }
        Ok(Self { window, sellers, round, records })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn sellers(&self) -> usize {
        self.sellers
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn records(&self) -> &[SellerRecord] {
        &self.records
    }

    pub fn record(&self, round: usize, seller: usize) -> &SellerRecord {
        &self.records[round * self.sellers + seller]
    }

    /// Records of the most recent round.
    pub fn latest(&self) -> &[SellerRecord] {
        &self.records[(self.window - 1) * self.sellers..]
    }

    /// Seller `i`'s history over the window, oldest first.
    pub fn history(&self, seller: usize) -> impl Iterator<Item = &SellerRecord> + '_ {
        (0..self.window).map(move |t| self.record(t, seller))
    }

    /// Mean revenue of each seller over the window.
    pub fn mean_revenue(&self) -> Vec<f64> {
        (0..self.sellers).map(|i| self.history(i).map(|r| r.revenue).sum::<f64>() / self.window as f64).collect()
    }

    /// Flattened (T, m, 4) tensor, row-major.
    pub fn to_tensor(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| r.as_array()).collect()
    }

    /// Reorders sellers so that new seller `k` is old seller `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.sellers);
        let mut records = Vec::with_capacity(self.records.len());
        for t in 0..self.window {
            records.extend(order.iter().map(|&i| *self.record(t, i)));
        }
        Self { records, ..self.clone() }
    }

    fn push_round(&self, round: &[SellerRecord]) -> Self {
        let mut records = Vec::with_capacity(self.records.len());
        records.extend_from_slice(&self.records[self.sellers..]);
        records.extend_from_slice(round);
        Self { window: self.window, sellers: self.sellers, round: self.round + 1, records }
    }
}

/// Fractions of the unit buyer impression given to each seller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(ArenaError::Infeasible("empty allocation".into()));
        }
        if let Some(x) = shares.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(ArenaError::Infeasible(format!("share {x} is negative or non-finite")));
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > ALLOCATION_TOLERANCE {
            return Err(ArenaError::Infeasible(format!("shares sum to {total}")));
        }
        Ok(Self(shares))
    }

    pub fn uniform(sellers: usize) -> Self {
        Self(vec![1.0 / sellers as f64; sellers])
    }

    /// Entire impression to one seller.
    pub fn point(sellers: usize, winner: usize) -> Self {
        let mut shares = vec![0.0; sellers];
        shares[winner] = 1.0;
        Self(shares)
    }

    /// Normalises nonnegative weights; falls back to uniform when they sum to zero.
    pub fn proportional(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if total > 0.0 && total.is_finite() {
            Self(weights.iter().map(|w| w.max(0.0) / total).collect())
        } else {
            Self::uniform(weights.len())
        }
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self(order.iter().map(|&i| self.0[i]).collect())
    }
}

/// The discrete set of admissible prices `{0, 1/K, ..., 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceGrid {
    resolution: usize,
}

impl PriceGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(ArenaError::Config("price grid resolution must be positive".into()));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn arms(&self) -> usize {
        self.resolution + 1
    }

    pub fn price(&self, arm: usize) -> f64 {
        debug_assert!(arm <= self.resolution);
        arm as f64 / self.resolution as f64
    }

    pub fn prices(&self) -> Vec<f64> {
        (0..self.arms()).map(|j| self.price(j)).collect()
    }

    /// Nearest grid arm to `price`.
    pub fn arm_of(&self, price: f64) -> usize {
        ((price.clamp(0.0, 1.0) * self.resolution as f64).round() as usize).min(self.resolution)
    }
}

impl Default for PriceGrid {
    fn default() -> Self {
        Self { resolution: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellerProfile {
    pub cost: f64,
}

/// Buyer valuation CDF. Only the uniform distribution is used by the arena.
pub trait BuyerDistribution {
    fn cdf(&self, price: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformBuyer;

impl BuyerDistribution for UniformBuyer {
    fn cdf(&self, price: f64) -> f64 {
        price.clamp(0.0, 1.0)
    }
}

/// Expected transaction mass `(1 - F_b(p)) * v` under a uniform buyer.
pub fn purchase_probability(price: f64, impressions: f64) -> Result<f64> {
    check_unit("price", price)?;
    check_unit("impressions", impressions)?;
    Ok((1.0 - UniformBuyer.cdf(price)) * impressions)
}

/// Seller payoff `v * (1 - p) * (p - c)`; negative when priced below cost.
pub fn seller_payoff(price: f64, impressions: f64, cost: f64) -> Result<f64> {
    check_unit("cost", cost)?;
    Ok(purchase_probability(price, impressions)? * (price - cost))
}

/// Result of one market round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: MarketState,
    pub reward: f64,
    pub payoffs: Vec<f64>,
}

/// Advances the market one round given posted prices, costs and an allocation.
pub fn market_step(state: &MarketState, prices: &[f64], costs: &[f64], allocation: &Allocation) -> Result<StepOutcome> {
    let m = state.sellers();
    if prices.len() != m || costs.len() != m || allocation.len() != m {
        return Err(ArenaError::Dimension(format!(
            "state has {m} sellers, got {} prices, {} costs, {} shares",
            prices.len(),
            costs.len(),
            allocation.len()
        )));
    }
    let mut round = Vec::with_capacity(m);
    let mut payoffs = Vec::with_capacity(m);
    let mut reward = 0.0;
    for ((&p, &c), &q) in prices.iter().zip(costs).zip(allocation.shares()) {
        let n = purchase_probability(p, q)?;
        let revenue = p * n;
        reward += revenue;
        payoffs.push(seller_payoff(p, q, c)?);
        round.push(SellerRecord { impressions: q, price: p, transactions: n, revenue });
    }
    Ok(StepOutcome { next: state.push_round(&round), reward, payoffs })
}

/// Best reward achievable this round: all impressions on the seller whose
/// price maximises `p (1 - p)`.
pub fn reward_ceiling(prices: &[f64]) -> f64 {
    prices.iter().map(|p| p * (1.0 - p)).fold(0.0, f64::max)
}

pub fn clamp_cost(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}

/// Draws `m` costs from Normal(1/2, variance 1/2), clamped to [0, 1].
pub fn sample_costs<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(COST_MEAN, COST_VARIANCE.sqrt()).expect("valid normal");
    (0..m).map(|_| clamp_cost(normal.sample(rng))).collect()
}
