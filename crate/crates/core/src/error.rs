use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("population cap {cap} exceeded in generation {generation}")]
    Overflow { generation: usize, cap: u64 },

    #[error(
        "population {population} in generation {generation} exceeds the per-individual cap {cap}; \
         use aggregate mode for large populations"
    )]
    PerIndividualCap {
        generation: usize,
        population: u64,
        cap: u64,
    },

    #[error("degenerate denominator: {0} estimator is undefined on this trajectory")]
    DegenerateDenominator(&'static str),

    #[error("trajectory has no {0} records")]
    MissingRecords(&'static str),

    #[error("error decomposition mismatch at generation {generation}: relative discrepancy {discrepancy:e}")]
    DecompositionMismatch { generation: usize, discrepancy: f64 },

    #[error("limit theta cannot be classified for this model; supply it explicitly")]
    IndeterminateTheta,

    #[error("regime conditions not satisfied: {0}")]
    RegimeNotSatisfied(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("unsupported test function: {0}")]
    UnsupportedPhi(String),

    #[error("{failures} of {replications} replications failed (more than 10%)")]
    TooManyFailures {
        failures: usize,
        replications: usize,
    },

    #[error("malformed trajectory data: {0}")]
    Parse(String),
}
