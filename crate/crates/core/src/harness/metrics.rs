use std::io::Write;

use crate::error::Result;

use super::config::AllocatorKind;
use super::run::{mean, ExperimentResult, MetricsRow};

pub const METRICS_HEADER: &str = "episode,step,reward,critic_loss,wall_ms";
pub const SUMMARY_HEADER: &str = "allocator,config_hash,seeds,mean_eval_reward,std_eval_reward";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per round; missing losses and clock readings are left empty.
pub fn write_metrics<W: Write>(rows: &[MetricsRow], mut out: W) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.episode, r.step, r.reward, opt(r.critic_loss), opt(r.wall_ms))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub allocator: AllocatorKind,
    pub config_hash: u64,
    pub seeds: usize,
    pub mean_eval_reward: f64,
    /// Sample standard deviation across seeds; zero for a single seed.
    pub std_eval_reward: f64,
}

impl SummaryRow {
    pub fn from_results(results: &[ExperimentResult]) -> Self {
        let first = &results[0].config;
        let per_seed: Vec<f64> = results.iter().map(|r| r.mean_eval_reward()).collect();
        let mu = mean(per_seed.iter().copied());
        let std = if per_seed.len() > 1 {
            (per_seed.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (per_seed.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            allocator: first.allocator,
            config_hash: first.hash(),
            seeds: results.len(),
            mean_eval_reward: mu,
            std_eval_reward: std,
        }
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:016x},{},{},{}",
            r.allocator.name(),
            r.config_hash,
            r.seeds,
            r.mean_eval_reward,
            r.std_eval_reward
        )?;
    }
    out.flush()?;
    Ok(())
}
