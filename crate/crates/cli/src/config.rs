//! Experiment configuration file (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use critbranch::estimate::EstimatorKind;
use critbranch::simulate::SimMode;
use critbranch::verify::PhiFn;
use critbranch::{ImmigrationModel, OffspringModel, RegVarSeq};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "one")]
    pub horizon: usize,
    #[serde(default = "one")]
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Overrides the symbolic classification of the limit `θ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub offspring: OffspringModel,
    pub immigration: ImmigrationModel,
    #[serde(default)]
    pub output: OutputOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub estimate: EstimateOptions,
    #[serde(default)]
    pub check: CheckOptions,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub svg: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            svg: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOptions {
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default)]
    pub record_immigration: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateOptions {
    #[serde(default)]
    pub kind: EstimatorKind,
    /// Stored `k,Z,xi` trajectory; when absent, trajectories are simulated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    /// Known offspring mean for the homogeneous estimator (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offspring_mean: Option<f64>,
    /// Known immigration mean for the homogeneous estimator (default: the model's).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immigration_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOptions {
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_phi")]
    pub phi: PhiFn,
    #[serde(default = "default_c_seq")]
    pub c_seq: RegVarSeq,
}

fn default_t_grid() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

fn default_eps_grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_phi() -> PhiFn {
    PhiFn::Square
}

fn default_c_seq() -> RegVarSeq {
    RegVarSeq::constant(1.0).expect("valid constant")
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            t_grid: default_t_grid(),
            eps_grid: default_eps_grid(),
            phi: default_phi(),
            c_seq: default_c_seq(),
        }
    }
}

/// Scalar fields that may be overridden on the command line.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long = "seed")]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots (experiment only).
    #[arg(long)]
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.replications {
            self.replications = v;
        }
        if let Some(v) = o.master_seed {
            self.master_seed = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if o.theta.is_some() {
            self.theta = o.theta;
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
        if o.svg {
            self.output.svg = true;
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        // TOML integers are signed 64-bit.
        if self.master_seed > i64::MAX as u64 {
            bail!("master_seed must not exceed {}", i64::MAX);
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> anyhow::Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
horizon = 2000
replications = 1000
master_seed = 7
workers = 4
theta = 0.25

[offspring]
family = "custom_finite_support"
pmf = [[0, 0.25], [1, 0.5], [2, 0.25]]

[immigration]
family = "neyman_a"
lambda = { exponent = 0.7, scale = 1.5 }
phi = { exponent = 0.5, log_power = 1.0 }

[output]
dir = "out"
svg = true

[simulate]
mode = "per_individual"
record_immigration = true

[estimate]
kind = "homogeneous"
trajectory = "traj.csv"
offspring_mean = 1.0
immigration_mean = 5.0

[check]
t_grid = [0.1, 0.3333333333333333, 1.0]
eps_grid = [0.05]
phi = { power = 3.0 }
c_seq = { exponent = 0.5, scale = 2.0 }
"#;

    #[test]
    fn round_trips_losslessly() {
        let c = ExperimentConfig::parse(FULL).unwrap();
        let again = ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash().unwrap(), again.hash().unwrap());
    }

    #[test]
    fn minimal_config_round_trips() {
        let text = "master_seed = 1\n[offspring]\nfamily = \"poisson1\"\n\
                    [immigration]\nfamily = \"homogeneous\"\nlaw = \"poisson\"\nmean = 5.0\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.horizon, 1);
        assert_eq!(c.check.phi, PhiFn::Square);
        assert_eq!(ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_invalid_pmf_and_unknown_keys() {
        let bad = FULL.replace("[2, 0.25]", "[2, 0.5]");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let unknown = FULL.replace("workers = 4", "workers = 4\nwrokers = 3");
        assert!(ExperimentConfig::parse(&unknown).is_err());
    }

    #[test]
    fn overrides_replace_scalars() {
        let mut c = ExperimentConfig::parse(FULL).unwrap();
        let before = c.hash().unwrap();
        c.apply(&Overrides {
            horizon: Some(10),
            master_seed: Some(99),
            ..Default::default()
        });
        assert_eq!((c.horizon, c.master_seed, c.replications), (10, 99, 1000));
        assert_ne!(before, c.hash().unwrap());
    }

    #[test]
    fn seed_must_fit_toml_integer() {
        let mut c = ExperimentConfig::parse(FULL).unwrap();
        c.master_seed = u64::MAX;
        assert!(c.validate().is_err());
    }
}
