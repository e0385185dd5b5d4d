// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("leakage {population:.3e} into the top {buffer} Fock levels during block {block} exceeds {tolerance:.1e}")]
    Leakage {
        block: String,
        population: f64,
        buffer: usize,
        tolerance: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("direct propagator did not converge: halving the step changed the result by {change:.3e}")]
    NotConverged { change: f64 },
    #[error("ill-conditioned fit (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
