//! Seller pricing strategies.
//!
//! Each seller runs a multi-armed bandit over the price grid and only ever
//! sees the payoff of the price it actually posted. Raw payoffs lie in
//! [-1, 1]; every strategy consumes them after [`scale_payoff`].

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, check_unit, ArenaError, Result};
use crate::market::PriceGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    EpsGreedy,
    EpsFirst,
    Ucb1,
    Exp3,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::EpsGreedy, Self::EpsFirst, Self::Ucb1, Self::Exp3];

    pub fn name(&self) -> &'static str {
        match self {
            Self::EpsGreedy => "eps_greedy",
            Self::EpsFirst => "eps_first",
            Self::Ucb1 => "ucb1",
            Self::Exp3 => "exp3",
        }
    }
}

/// Tunables shared by every seller of a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    /// Mean and standard deviation of the per-seller ε-Greedy exploration rate.
    pub eps_greedy_mean: f64,
    pub eps_greedy_std: f64,
    pub eps_first_epsilon: f64,
    pub eps_first_horizon: usize,
    pub exp3_gamma: f64,
    /// Use the textbook UCB1 (running mean, `sqrt(2 ln t / n)` bonus)
    /// instead of the recurrence `x(t) = x(t-1)/t + u/t` with a `log2 t / n` bonus.
    pub ucb1_textbook: bool,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            eps_greedy_mean: 0.1,
            eps_greedy_std: 0.1 / 3.0,
            eps_first_epsilon: 0.1,
            eps_first_horizon: 200,
            exp3_gamma: 0.1,
            ucb1_textbook: false,
        }
    }
}

/// Maps a raw payoff in [-1, 1] onto [0, 1].
pub fn scale_payoff(payoff: f64) -> Result<f64> {
    check_range("payoff", payoff, -1.0, 1.0)?;
    Ok((payoff + 1.0) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceChoice {
    pub arm: usize,
    pub price: f64,
}

impl PriceChoice {
    pub fn new(grid: &PriceGrid, arm: usize) -> Self {
        Self { arm, price: grid.price(arm) }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Per-arm running means; untried arms read as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeans {
    pub means: Vec<f64>,
    pub counts: Vec<u64>,
}

impl EmpiricalMeans {
    pub fn new(arms: usize) -> Self {
        Self { means: vec![0.0; arms], counts: vec![0; arms] }
    }

    pub fn record(&mut self, arm: usize, value: f64) {
        self.counts[arm] += 1;
        self.means[arm] += (value - self.means[arm]) / self.counts[arm] as f64;
    }

    pub fn best(&self) -> usize {
        argmax(self.means.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsGreedy {
    pub epsilon: f64,
    pub stats: EmpiricalMeans,
}

impl EpsGreedy {
    pub fn new(arms: usize, epsilon: f64) -> Self {
        Self { epsilon, stats: EmpiricalMeans::new(arms) }
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..self.stats.means.len())
        } else {
            self.stats.best()
        }
    }

    pub fn update(&mut self, arm: usize, scaled: f64) {
        self.stats.record(arm, scaled);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsFirst {
    pub epsilon: f64,
    pub horizon: usize,
    pub stats: EmpiricalMeans,
}

impl EpsFirst {
    pub fn new(arms: usize, epsilon: f64, horizon: usize) -> Self {
        Self { epsilon, horizon, stats: EmpiricalMeans::new(arms) }
    }

    pub fn exploring(&self, round: u64) -> bool {
        (round as f64) < self.epsilon * self.horizon as f64
    }

    /// Uniform during the first `ε·horizon` rounds, greedy afterwards
    /// (including past the horizon, where the means keep updating).
    pub fn choose<R: Rng + ?Sized>(&self, round: u64, rng: &mut R) -> usize {
        if self.exploring(round) {
            rng.random_range(0..self.stats.means.len())
        } else {
            self.stats.best()
        }
    }

    pub fn update(&mut self, arm: usize, scaled: f64) {
        self.stats.record(arm, scaled);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ucb1 {
    pub values: Vec<f64>,
    pub pulls: Vec<u64>,
    pub textbook: bool,
}

impl Ucb1 {
    pub fn new(arms: usize, textbook: bool) -> Self {
        Self { values: vec![0.0; arms], pulls: vec![0; arms], textbook }
    }

    pub fn index(&self, arm: usize, round: u64) -> f64 {
        let n = self.pulls[arm] as f64;
        if self.textbook {
            self.values[arm] + (2.0 * (round as f64).ln() / n).sqrt()
        } else {
            self.values[arm] + (round as f64).log2() / n
        }
    }

    /// Rounds `0..=K` try every arm once in index order; afterwards the arm
    /// with the largest index wins.
    pub fn choose(&self, round: u64) -> usize {
        if let Some(untried) = self.pulls.iter().position(|&n| n == 0) {
            return untried;
        }
        argmax((0..self.values.len()).map(|j| self.index(j, round)))
    }

    /// `round` counts from 1: the choice made at round `t` is recorded with `t + 1`.
    pub fn update(&mut self, arm: usize, round: u64, scaled: f64) -> Result<()> {
        if round == 0 {
            return Err(ArenaError::ZeroRound);
        }
        self.pulls[arm] += 1;
        if self.textbook {
            self.values[arm] += (scaled - self.values[arm]) / self.pulls[arm] as f64;
        } else {
            let t = round as f64;
            self.values[arm] = self.values[arm] / t + scaled / t;
        }
        Ok(())
    }
}

/// Exp3 with weights kept in log space so long runs neither overflow nor
/// underflow to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3 {
    pub gamma: f64,
    log_weights: Vec<f64>,
}

impl Exp3 {
    pub fn new(arms: usize, gamma: f64) -> Self {
        Self { gamma, log_weights: vec![0.0; arms] }
    }

    pub fn with_weights(weights: &[f64], gamma: f64) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(ArenaError::OutOfRange { name: "exp3 weight", value: *w, lo: 0.0, hi: f64::MAX });
        }
        Ok(Self { gamma, log_weights: weights.iter().map(|w| w.ln()).collect() })
    }

    pub fn arms(&self) -> usize {
        self.log_weights.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `(1 - γ) w_i / Σ w + γ / (K + 1)`
    pub fn probabilities(&self) -> Vec<f64> {
        let k = self.arms() as f64;
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = self.log_weights.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = rel.iter().sum();
        rel.iter().map(|r| (1.0 - self.gamma) * r / total + self.gamma / k).collect()
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let probs = self.probabilities();
        let mut u = rng.random::<f64>();
        for (j, p) in probs.iter().enumerate() {
            if u < *p {
                return j;
            }
            u -= p;
        }
        probs.len() - 1
    }

    /// Multiplies the chosen arm's weight by `exp(γ (u / π_j) / (K + 1))`.
    pub fn update(&mut self, arm: usize, scaled: f64) -> Result<()> {
        check_unit("scaled payoff", scaled)?;
        let pi = self.probabilities()[arm];
        self.log_weights[arm] += self.gamma * (scaled / pi) / self.arms() as f64;
        Ok(())
    }
}

/// Per-seller strategy memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BanditState {
    EpsGreedy(EpsGreedy),
    EpsFirst(EpsFirst),
    Ucb1(Ucb1),
    Exp3(Exp3),
    /// Single-arm bandit: always posts the same price.
    Fixed {
        arm: usize,
    },
}

impl BanditState {
    /// Fresh memory for `kind`. ε-Greedy draws its personal exploration rate here.
    pub fn new<R: Rng + ?Sized>(kind: StrategyKind, grid: &PriceGrid, params: &StrategyParams, rng: &mut R) -> Self {
        let arms = grid.arms();
        match kind {
            StrategyKind::EpsGreedy => {
                let eps = if params.eps_greedy_std > 0.0 {
                    Normal::new(params.eps_greedy_mean, params.eps_greedy_std).expect("valid normal").sample(rng)
                } else {
                    params.eps_greedy_mean
                };
                Self::EpsGreedy(EpsGreedy::new(arms, eps.clamp(0.0, 1.0)))
            }
            StrategyKind::EpsFirst => {
                Self::EpsFirst(EpsFirst::new(arms, params.eps_first_epsilon, params.eps_first_horizon))
            }
            StrategyKind::Ucb1 => Self::Ucb1(Ucb1::new(arms, params.ucb1_textbook)),
            StrategyKind::Exp3 => Self::Exp3(Exp3::new(arms, params.exp3_gamma)),
        }
    }

    pub fn choose<R: Rng + ?Sized>(&self, round: u64, rng: &mut R) -> usize {
        match self {
            Self::EpsGreedy(s) => s.choose(rng),
            Self::EpsFirst(s) => s.choose(round, rng),
            Self::Ucb1(s) => s.choose(round),
            Self::Exp3(s) => s.choose(rng),
            Self::Fixed { arm } => *arm,
        }
    }

    pub fn update(&mut self, arm: usize, round: u64, scaled: f64) -> Result<()> {
        match self {
            Self::EpsGreedy(s) => s.update(arm, scaled),
            Self::EpsFirst(s) => s.update(arm, scaled),
            Self::Ucb1(s) => s.update(arm, round + 1, scaled)?,
            Self::Exp3(s) => s.update(arm, scaled)?,
            Self::Fixed { .. } => {}
        }
        Ok(())
    }
}

/// A seller: private cost plus the pricing strategy it restarts from each episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Seller {
    pub cost: f64,
    initial: BanditState,
    state: BanditState,
    last: Option<usize>,
}

impl Seller {
    pub fn new(cost: f64, strategy: BanditState) -> Self {
        Self { cost, initial: strategy.clone(), state: strategy, last: None }
    }

    pub fn strategy(&self) -> &BanditState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = self.initial.clone();
        self.last = None;
    }

    pub fn choose<R: Rng + ?Sized>(&mut self, grid: &PriceGrid, round: u64, rng: &mut R) -> PriceChoice {
        let arm = self.state.choose(round, rng);
        self.last = Some(arm);
        PriceChoice::new(grid, arm)
    }

    /// Feeds back the raw payoff of the price chosen this round.
    pub fn observe(&mut self, round: u64, payoff: f64) -> Result<()> {
        let arm = self
            .last
            .take()
            .ok_or_else(|| ArenaError::Config("seller observed a payoff without choosing a price".into()))?;
        // Payoffs are products of unit-interval factors; clamp away rounding noise.
        let scaled = scale_payoff(payoff.clamp(-1.0, 1.0))?;
        self.state.update(arm, round, scaled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn scaling() {
        assert!((scale_payoff(0.08).unwrap() - 0.54).abs() < 1e-15);
        assert_eq!(scale_payoff(-1.0).unwrap(), 0.0);
        assert_eq!(scale_payoff(1.0).unwrap(), 1.0);
        assert!(scale_payoff(1.5).is_err());
    }

    #[test]
    fn eps_greedy_exploit_branch() {
        let mut rng = SeedTree::new(1).stream("t", 0);
        let tied = EpsGreedy::new(3, 0.0);
        assert_eq!(tied.choose(&mut rng), 0);
        let mut s = EpsGreedy::new(3, 0.0);
        s.stats.means = vec![0.1, 0.9, 0.3];
        assert_eq!(s.choose(&mut rng), 1);
    }

    #[test]
    fn eps_greedy_epsilon_draw_is_clamped() {
        let grid = PriceGrid::default();
        let params = StrategyParams { eps_greedy_mean: -5.0, eps_greedy_std: 0.01, ..Default::default() };
        let mut rng = SeedTree::new(2).stream("t", 0);
        match BanditState::new(StrategyKind::EpsGreedy, &grid, &params, &mut rng) {
            BanditState::EpsGreedy(s) => assert_eq!(s.epsilon, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eps_first_phases() {
        let mut s = EpsFirst::new(2, 0.1, 200);
        assert!(s.exploring(0));
        assert!(s.exploring(19));
        assert!(!s.exploring(20));
        s.stats.means = vec![0.2, 0.7];
        let mut rng = SeedTree::new(3).stream("t", 0);
        assert_eq!(s.choose(20, &mut rng), 1);
        assert_eq!(s.choose(1500, &mut rng), 1);
        let picks: std::collections::BTreeSet<usize> = (0..50).map(|_| s.choose(5, &mut rng)).collect();
        assert_eq!(picks.len(), 2);
    }

    #[test]
    fn exp3_probability_examples() {
        let uniform = Exp3::new(5, 0.1).probabilities();
        assert!(uniform.iter().all(|p| (p - 0.2).abs() < 1e-15));
        let skewed = Exp3::with_weights(&[3.0, 1.0], 0.0).unwrap().probabilities();
        assert!((skewed[0] - 0.75).abs() < 1e-15 && (skewed[1] - 0.25).abs() < 1e-15);
        let explore = Exp3::with_weights(&[9.0, 1.0, 1.0, 1.0, 1.0], 1.0).unwrap().probabilities();
        assert!(explore.iter().all(|p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn exp3_update_examples() {
        let mut s = Exp3::new(5, 0.1);
        s.update(2, 0.54).unwrap();
        let w = s.weights();
        assert!((w[2] - 0.054f64.exp()).abs() < 1e-12);
        assert!((w[2] - 1.05548).abs() < 1e-5);
        assert!(w.iter().enumerate().all(|(j, x)| j == 2 || *x == 1.0));
        let before = s.clone();
        s.update(0, 0.0).unwrap();
        assert_eq!(s, before);
        assert!(s.update(0, 1.5).is_err());
    }

    #[test]
    fn ucb1_sweeps_arms_then_uses_index() {
        let mut s = Ucb1::new(4, false);
        for t in 0..4u64 {
            let arm = s.choose(t);
            assert_eq!(arm, t as usize);
            s.update(arm, t + 1, 0.5).unwrap();
        }
        let mut tied = Ucb1::new(3, false);
        tied.pulls = vec![1, 1, 1];
        assert_eq!(tied.choose(3), 0);
    }

    #[test]
    fn ucb1_index_example() {
        let mut s = Ucb1::new(2, false);
        s.values = vec![0.1, 0.5];
        s.pulls = vec![10, 1];
        assert!((s.index(0, 8) - 0.4).abs() < 1e-15);
        assert!((s.index(1, 8) - 3.5).abs() < 1e-15);
        assert_eq!(s.choose(8), 1);
    }

    #[test]
    fn ucb1_recurrence() {
        let mut s = Ucb1::new(2, false);
        s.update(0, 1, 0.6).unwrap();
        assert!((s.values[0] - 0.6).abs() < 1e-15);
        s.update(0, 2, 0.6).unwrap();
        assert!((s.values[0] - 0.6).abs() < 1e-15);
        s.values[1] = 0.5;
        s.update(0, 3, 0.1).unwrap();
        assert_eq!(s.values[1], 0.5);
        assert!(matches!(s.update(0, 0, 0.1), Err(ArenaError::ZeroRound)));
    }

    #[test]
    fn seller_requires_choice_before_observation() {
        let mut seller = Seller::new(0.2, BanditState::Fixed { arm: 3 });
        assert!(seller.observe(0, 0.1).is_err());
        let grid = PriceGrid::new(10).unwrap();
        let mut rng = SeedTree::new(0).stream("t", 0);
        let c = seller.choose(&grid, 0, &mut rng);
        assert_eq!(c.arm, 3);
        assert!((c.price - 0.3).abs() < 1e-15);
        seller.observe(0, 0.1).unwrap();
    }

    #[test]
    fn reset_restores_initial_memory() {
        let grid = PriceGrid::new(4).unwrap();
        let mut rng = SeedTree::new(5).stream("t", 0);
        let mut seller = Seller::new(0.1, BanditState::Exp3(Exp3::new(grid.arms(), 0.1)));
        for t in 0..10 {
            seller.choose(&grid, t, &mut rng);
            seller.observe(t, 0.3).unwrap();
        }
        assert_ne!(seller.strategy(), &BanditState::Exp3(Exp3::new(grid.arms(), 0.1)));
        seller.reset();
        assert_eq!(seller.strategy(), &BanditState::Exp3(Exp3::new(grid.arms(), 0.1)));
    }
}
