//! Error type shared by all engines.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),

    #[error("quadrature rule needs at least 2 nodes per dimension, got {0}")]
    QuadratureOrder(usize),

    #[error("Monte Carlo spec needs at least 1 sample")]
    NoSamples,

    #[error("detector gain must be positive and finite, got {0}")]
    InvalidGain(f64),

    #[error("grid step must be positive and at most pi/8 radians, got {0}")]
    InvalidGridStep(f64),

    #[error("bound cap must be positive and finite, got {0}")]
    InvalidCap(f64),

    #[error("pair production rate {0} is too close to zero to normalize by")]
    DegenerateNormalization(f64),

    #[error(
        "strategy `{strategy}` exceeded its declared cap {cap} on side {side}: \
         |{value}| at angle {angle} rad, lambda sample #{sample_index} = {lambda}"
    )]
    CapViolation {
        strategy: String,
        side: &'static str,
        angle: f64,
        sample_index: u64,
        lambda: String,
        value: f64,
        cap: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
}
