use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("target has dimension {target} but {requested} was requested")]
    DimensionMismatch { target: usize, requested: usize },

    #[error("chain {chain}: log density not finite at initialization after {attempts} attempts")]
    Initialization { chain: usize, attempts: usize },
}
