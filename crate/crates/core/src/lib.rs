//! Simulation and variance estimation for critical Galton–Watson processes
//! with time-varying immigration.
//!
//! The process is `Z_0 = 0`, `Z_k = X_{k,1} + ... + X_{k,Z_{k-1}} + ξ_k` with
//! mean-one offspring `X` and independent immigration `ξ_k` whose mean grows
//! with `k`. The crate covers:
//!
//! - [`models`]: offspring and immigration families, exact moment sequences
//!   and the symbolic regime classifier,
//! - [`simulate`]: reproducible trajectory generation,
//! - [`estimate`]: martingale residuals, the conditional least squares
//!   estimators of the offspring variance and the exact error decomposition,
//! - [`asymptotics`]: normalizing sequences, the limiting variance and the
//!   limit covariance of the error process,
//! - [`verify`]: the Monte Carlo harness for the limit laws.

pub mod asymptotics;
pub mod error;
pub mod estimate;
pub mod models;
pub mod plots;
pub mod pmf;
pub mod quad;
pub mod regvar;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use asymptotics::{AsymptoticParams, LimitLaw};
pub use error::{Error, Result};
pub use estimate::{Estimate, EstimatorKind, ResidualSeries};
pub use models::{
    HomogeneousLaw, ImmigrationFamily, ImmigrationModel, OffspringFamily, OffspringModel,
    RegimeReport, ThetaClass,
};
pub use regvar::RegVarSeq;
pub use simulate::{SimConfig, SimMode, Trajectory};
pub use verify::{McSettings, McSummary};

/// Default hard cap on any population count: `2^62 - 1`.
pub const DEFAULT_POPULATION_CAP: u64 = (1u64 << 62) - 1;
