use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replay buffer holds {have} transitions, minibatch needs {need}")]
    InsufficientBuffer { have: usize, need: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("round index must be at least 1 for this update")]
    ZeroRound,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("reward {reward} exceeds the per-round ceiling {ceiling}")]
    CeilingViolated { reward: f64, ceiling: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ArenaError> = std::result::Result<T, E>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    check_range(name, value, 0.0, 1.0)
}

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ArenaError::OutOfRange { name, value, lo, hi })
    }
}
