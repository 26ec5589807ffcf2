#![allow(dead_code)]

use ia_arena::market::{market_step, Allocation, MarketState};
use rand::seq::SliceRandom;
use rand::Rng;

/// A state reached by `window` rounds of random grid prices and allocations.
pub fn random_state<R: Rng>(sellers: usize, window: usize, rng: &mut R) -> MarketState {
    let mut state = MarketState::initial(sellers, window);
    for _ in 0..window {
        let prices: Vec<f64> = (0..sellers).map(|_| rng.random_range(1..100) as f64 / 100.0).collect();
        let weights: Vec<f64> = (0..sellers).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
        let q = Allocation::proportional(&weights);
        state = market_step(&state, &prices, &vec![0.5; sellers], &q).unwrap().next;
    }
    state
}

pub fn random_allocation<R: Rng>(sellers: usize, rng: &mut R) -> Allocation {
    let weights: Vec<f64> = (0..sellers).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    Allocation::proportional(&weights)
}

pub fn random_order<R: Rng>(sellers: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sellers).collect();
    order.shuffle(rng);
    order
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
