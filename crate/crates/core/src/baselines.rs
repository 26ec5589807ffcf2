//! Heuristic allocators: Greedy Myopic and disjoint Linear UCB.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, ArenaError, Result};
use crate::market::{Allocation, MarketState, SellerRecord};
use crate::sellers::argmax;

pub const FEATURES: usize = 4;

/// Splits the impression in proportion to each seller's revenue in the
/// latest round, or uniformly when there is none.
pub fn greedy_myopic(state: &MarketState) -> Allocation {
    let revenues: Vec<f64> = state.latest().iter().map(|r| r.revenue).collect();
    Allocation::proportional(&revenues)
}

type Mat4 = [[f64; FEATURES]; FEATURES];

fn identity() -> Mat4 {
    let mut a = [[0.0; FEATURES]; FEATURES];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    a
}

/// Cholesky factor of a symmetric positive definite 4x4 matrix.
fn cholesky(a: &Mat4) -> Option<Mat4> {
    let mut l = [[0.0; FEATURES]; FEATURES];
    for i in 0..FEATURES {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn solve(l: &Mat4, b: &[f64; FEATURES]) -> [f64; FEATURES] {
    let mut y = [0.0; FEATURES];
    for i in 0..FEATURES {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = [0.0; FEATURES];
    for i in (0..FEATURES).rev() {
        x[i] = (y[i] - (i + 1..FEATURES).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

fn dot(a: &[f64; FEATURES], b: &[f64; FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinUcbArm {
    pub design: Mat4,
    pub response: [f64; FEATURES],
}

impl Default for LinUcbArm {
    fn default() -> Self {
        Self { design: identity(), response: [0.0; FEATURES] }
    }
}

impl LinUcbArm {
    /// `θᵀx + α sqrt(xᵀ A⁻¹ x)` with `θ = A⁻¹ b`.
    pub fn score(&self, x: &[f64; FEATURES], alpha: f64) -> Result<f64> {
        let l = cholesky(&self.design)
            .ok_or_else(|| ArenaError::Dimension("LinUCB design matrix lost positive definiteness".into()))?;
        let theta = solve(&l, &self.response);
        let ainv_x = solve(&l, x);
        Ok(dot(&theta, x) + alpha * dot(x, &ainv_x).max(0.0).sqrt())
    }
}

/// Disjoint LinUCB with one arm per seller and the seller's latest record as context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinUcbState {
    pub alpha: f64,
    pub arms: Vec<LinUcbArm>,
}

impl LinUcbState {
    pub fn new(sellers: usize, alpha: f64) -> Self {
        Self { alpha, arms: vec![LinUcbArm::default(); sellers] }
    }

    pub fn features(state: &MarketState) -> Vec<[f64; FEATURES]> {
        state.latest().iter().map(SellerRecord::as_array).collect()
    }

    pub fn choose(&self, features: &[[f64; FEATURES]]) -> Result<(usize, Allocation)> {
        if features.len() != self.arms.len() {
            return Err(ArenaError::Dimension(format!("{} feature rows for {} arms", features.len(), self.arms.len())));
        }
        let scores =
            self.arms.iter().zip(features).map(|(arm, x)| arm.score(x, self.alpha)).collect::<Result<Vec<_>>>()?;
        let best = argmax(scores);
        Ok((best, Allocation::point(self.arms.len(), best)))
    }

    pub fn update(&mut self, arm: usize, x: &[f64; FEATURES], reward: f64) -> Result<()> {
        check_unit("reward", reward)?;
        let a = self.arms.get_mut(arm).ok_or_else(|| ArenaError::Dimension(format!("arm {arm} out of range")))?;
        for i in 0..FEATURES {
            for j in 0..FEATURES {
                a.design[i][j] += x[i] * x[j];
            }
            a.response[i] += reward * x[i];
        }
        Ok(())
    }
}
