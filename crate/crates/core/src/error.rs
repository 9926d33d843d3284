use thiserror::Error;

/// Errors raised anywhere in the direct or inverse pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge {edge}: non-positive length {length}")]
    NonPositiveLength { edge: usize, length: f64 },

    #[error("edge {edge}: non-finite potential sample at x = {x}")]
    NonFinitePotential { edge: usize, x: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("step-size underflow while integrating at x = {x} (rho = {rho})")]
    StepUnderflow { x: f64, rho: String },

    #[error("|rho| = {abs} exceeds the configured maximum {max}")]
    RhoTooLarge { abs: f64, max: f64 },

    #[error("spherical Bessel overflow for order {order} at z = {z}")]
    BesselOverflow { order: usize, z: String },

    #[error("missing coefficient family `{0}`")]
    MissingCoefficients(&'static str),

    #[error("ill-conditioned coefficient fit (condition number {condition:e})")]
    IllConditionedFit { condition: f64 },

    #[error("near-spectrum point rho = {rho}: condition number {condition:e}")]
    NearSpectrum { rho: String, condition: f64 },

    #[error("under-determined system: {have} available, at least {need} required ({detail})")]
    UnderDetermined {
        have: usize,
        need: usize,
        detail: String,
    },

    #[error("rank-deficient system: numerical rank {rank} < {unknowns} unknowns")]
    RankDeficient { rank: usize, unknowns: usize },

    #[error("missing Weyl entry ({i}, {j}) at sample {k}")]
    MissingEntry { k: usize, i: usize, j: usize },

    #[error("interlacing violated on edge {edge} at index {index}: {detail}")]
    Interlacing {
        edge: usize,
        index: usize,
        detail: String,
    },

    #[error("vanishing multiplier for nu_{index} = {nu}")]
    VanishingMultiplier { index: usize, nu: f64 },

    #[error("denominator degeneracy at x = {x}")]
    DenominatorDegeneracy { x: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
