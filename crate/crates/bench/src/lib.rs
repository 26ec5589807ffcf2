//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use ia_arena::market::{market_step, Allocation, MarketState};
use ia_arena::rl::Transition;

/// A deterministic state after `window` rounds of spread-out prices.
pub fn fixture_state(sellers: usize, window: usize) -> MarketState {
    let mut state = MarketState::initial(sellers, window);
    let q = Allocation::uniform(sellers);
    for t in 0..window {
        let prices: Vec<f64> = (0..sellers).map(|i| ((i * 7 + t * 13) % 99 + 1) as f64 / 100.0).collect();
        state = market_step(&state, &prices, &vec![0.5; sellers], &q).expect("valid fixture").next;
    }
    state
}

pub fn fixture_transitions(sellers: usize, window: usize, n: usize) -> Vec<Transition> {
    let state = Arc::new(fixture_state(sellers, window));
    (0..n)
        .map(|k| Transition {
            state: state.clone(),
            action: Allocation::uniform(sellers),
            reward: 0.2 + 0.001 * (k % 10) as f64,
            next: state.clone(),
        })
        .collect()
}
