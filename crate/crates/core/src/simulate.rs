//! Trajectory generation with per-replication random streams.
//!
//! Each replication draws from its own ChaCha8 stream: the key is derived from
//! `master_seed` with `SeedableRng::seed_from_u64` (PCG32 expansion) and the
//! stream id is the replication index. The mapping is fixed, so a trajectory
//! depends only on `(master_seed, replication_index)` and never on scheduling.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ImmigrationModel, OffspringModel};
use crate::DEFAULT_POPULATION_CAP;

pub type ReplicationRng = ChaCha8Rng;

/// Independent, deterministic stream for one replication.
pub fn replication_stream(master_seed: u64, replication_index: u64) -> ReplicationRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication_index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Offspring totals drawn from the closed-form law of the sum.
    #[default]
    Aggregate,
    /// Every offspring count drawn and kept.
    PerIndividual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub master_seed: u64,
    pub replication_index: u64,
    pub mode: SimMode,
    pub record_immigration: bool,
    /// Largest `Z_{k-1}` allowed in per-individual mode.
    pub per_individual_cap: u64,
    pub population_cap: u64,
}

impl SimConfig {
    pub fn new(horizon: usize, master_seed: u64, replication_index: u64) -> Self {
        Self {
            horizon,
            master_seed,
            replication_index,
            mode: SimMode::Aggregate,
            record_immigration: false,
            per_individual_cap: 1_000_000,
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }

    /// Per-individual mode with immigration recorded.
    pub fn per_individual(mut self) -> Self {
        self.mode = SimMode::PerIndividual;
        self.record_immigration = true;
        self
    }

    pub fn with_immigration(mut self) -> Self {
        self.record_immigration = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.mode == SimMode::PerIndividual && !self.record_immigration {
            return Err(Error::InvalidArgument(
                "per-individual mode requires record_immigration".into(),
            ));
        }
        if self.per_individual_cap == 0 || self.population_cap == 0 {
            return Err(Error::InvalidArgument("caps must be positive".into()));
        }
        Ok(())
    }
}

/// One realized path `Z_0, ..., Z_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub z: Vec<u64>,
    /// `ξ_1, ..., ξ_n` when recorded.
    pub xi: Option<Vec<u64>>,
    /// `offspring[k-1]` holds `X_{k,1}, ..., X_{k,Z_{k-1}}`.
    pub offspring: Option<Vec<Vec<u64>>>,
    pub offspring_model: String,
    pub immigration_model: String,
    pub master_seed: Option<u64>,
    pub replication_index: Option<u64>,
}

impl Trajectory {
    /// Wraps stored counts; checks `Z_0 = 0` and matching lengths.
    pub fn from_counts(z: Vec<u64>, xi: Option<Vec<u64>>) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::Parse(
                "trajectory needs Z_0 and at least one step".into(),
            ));
        }
        if z[0] != 0 {
            return Err(Error::Parse(format!("Z_0 must be 0, got {}", z[0])));
        }
        if let Some(xi) = &xi {
            if xi.len() != z.len() - 1 {
                return Err(Error::Parse(format!(
                    "{} immigration values for horizon {}",
                    xi.len(),
                    z.len() - 1
                )));
            }
        }
        Ok(Self {
            z,
            xi,
            offspring: None,
            offspring_model: String::new(),
            immigration_model: String::new(),
            master_seed: None,
            replication_index: None,
        })
    }

    pub fn horizon(&self) -> usize {
        self.z.len() - 1
    }

    /// Checks `Z_k = Σ_i X_{k,i} + ξ_k` on recorded generations; returns the
    /// first offending generation.
    pub fn check_recursion(&self) -> std::result::Result<(), usize> {
        let (Some(xi), Some(off)) = (&self.xi, &self.offspring) else {
            return Ok(());
        };
        for k in 1..self.z.len() {
            let kids = &off[k - 1];
            let total: u64 = kids.iter().sum();
            if kids.len() as u64 != self.z[k - 1] || total + xi[k - 1] != self.z[k] {
                return Err(k);
            }
        }
        Ok(())
    }

    /// Writes `k,Z,xi` rows; `xi` is empty at `k = 0` and when not recorded.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"k,Z,xi\n")?;
        for (k, z) in self.z.iter().enumerate() {
            match (&self.xi, k) {
                (Some(xi), k) if k > 0 => writeln!(w, "{k},{z},{}", xi[k - 1])?,
                _ => writeln!(w, "{k},{z},")?,
            }
        }
        Ok(())
    }

    /// Writes `k,i,x` rows for every recorded offspring count.
    pub fn write_offspring_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let off = self
            .offspring
            .as_ref()
            .ok_or(Error::MissingRecords("offspring"))?;
        let io = |e: std::io::Error| Error::Parse(e.to_string());
        w.write_all(b"k,i,x\n").map_err(io)?;
        for (k, gen) in off.iter().enumerate() {
            for (i, x) in gen.iter().enumerate() {
                writeln!(w, "{},{},{x}", k + 1, i + 1).map_err(io)?;
            }
        }
        Ok(())
    }

    /// Reads the `k,Z,xi` format written by [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty file".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        if header.trim() != "k,Z,xi" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut z = Vec::new();
        let mut xi = Vec::new();
        let mut have_xi = true;
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {}: expected 3 fields", row + 1)));
            }
            let num = |s: &str| {
                s.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))
            };
            if num(fields[0])? != row as u64 {
                return Err(Error::Parse(format!(
                    "row {}: generation out of order",
                    row + 1
                )));
            }
            z.push(num(fields[1])?);
            if row > 0 {
                if fields[2].is_empty() {
                    have_xi = false;
                } else {
                    xi.push(num(fields[2])?);
                }
            }
        }
        Self::from_counts(z, have_xi.then_some(xi))
    }
}

/// Generates one trajectory of the process under `cfg`.
pub fn simulate(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = replication_stream(cfg.master_seed, cfg.replication_index);
    let n = cfg.horizon;
    let cap = cfg.population_cap;
    let mut z = Vec::with_capacity(n + 1);
    z.push(0u64);
    let mut xi_rec = cfg.record_immigration.then(|| Vec::with_capacity(n));
    let mut off_rec = (cfg.mode == SimMode::PerIndividual).then(|| Vec::with_capacity(n));

    for k in 1..=n {
        let prev = z[k - 1];
        let overflow = Error::Overflow { generation: k, cap };
        let kids = match cfg.mode {
            SimMode::Aggregate => off.sample_sum(prev, cap, &mut rng).map_err(|e| match e {
                Error::Overflow { .. } => overflow.clone(),
                other => other,
            })?,
            SimMode::PerIndividual => {
                if prev > cfg.per_individual_cap {
                    return Err(Error::PerIndividualCap {
                        generation: k,
                        population: prev,
                        cap: cfg.per_individual_cap,
                    });
                }
                let draws: Vec<u64> = (0..prev).map(|_| off.sample_one(&mut rng)).collect();
                let mut total: u64 = 0;
                for &x in &draws {
                    total = total.checked_add(x).ok_or(overflow.clone())?;
                }
                if let Some(rec) = off_rec.as_mut() {
                    rec.push(draws);
                }
                total
            }
        };
        let xi = imm.sample(k as u64, &mut rng);
        if let Some(rec) = xi_rec.as_mut() {
            rec.push(xi);
        }
        let next = kids.checked_add(xi).filter(|&v| v <= cap).ok_or(overflow)?;
        z.push(next);
    }

    Ok(Trajectory {
        z,
        xi: xi_rec,
        offspring: off_rec,
        offspring_model: off.to_string(),
        immigration_model: imm.to_string(),
        master_seed: Some(cfg.master_seed),
        replication_index: Some(cfg.replication_index),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regvar::RegVarSeq;
    use rand::Rng;

    fn sqrt_poisson() -> ImmigrationModel {
        ImmigrationModel::poisson_seq(RegVarSeq::power(0.5, 1.0).unwrap())
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = replication_stream(42, 7);
        let mut b = replication_stream(42, 7);
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn streams_are_uncorrelated() {
        let mut a = replication_stream(42, 0);
        let mut b = replication_stream(42, 1);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| a.random()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.02, "corr = {corr}");
    }

    #[test]
    fn sibling_replication_is_isolated() {
        let off = OffspringModel::geometric1();
        let imm = sqrt_poisson();
        let alone = simulate(&off, &imm, &SimConfig::new(30, 9, 1)).unwrap();
        let _ = simulate(&off, &imm, &SimConfig::new(300, 9, 0)).unwrap();
        let after = simulate(&off, &imm, &SimConfig::new(30, 9, 1)).unwrap();
        assert_eq!(alone, after);
    }

    #[test]
    fn zero_immigration_stays_extinct() {
        let imm = ImmigrationModel::homogeneous_finite(vec![(0, 1.0)]).unwrap();
        let t = simulate(
            &OffspringModel::geometric1(),
            &imm,
            &SimConfig::new(50, 1, 0),
        )
        .unwrap();
        assert!(t.z.iter().all(|&z| z == 0));
    }

    #[test]
    fn two_point_parity() {
        let cfg = SimConfig::new(40, 5, 3).with_immigration();
        let t = simulate(&OffspringModel::two_point(), &sqrt_poisson(), &cfg).unwrap();
        let xi = t.xi.as_ref().unwrap();
        for k in 1..=40 {
            assert_eq!((t.z[k] - xi[k - 1]) % 2, 0);
        }
    }

    #[test]
    fn per_individual_records_satisfy_recursion() {
        let cfg = SimConfig::new(50, 11, 0).per_individual();
        let t = simulate(&OffspringModel::geometric1(), &sqrt_poisson(), &cfg).unwrap();
        assert_eq!(t.check_recursion(), Ok(()));
        assert_eq!(t.offspring.as_ref().unwrap().len(), 50);
    }

    #[test]
    fn per_individual_requires_immigration_record() {
        let mut cfg = SimConfig::new(5, 1, 0);
        cfg.mode = SimMode::PerIndividual;
        assert!(simulate(&OffspringModel::poisson1(), &sqrt_poisson(), &cfg).is_err());
    }

    #[test]
    fn overflow_is_an_error_with_generation() {
        let mut cfg = SimConfig::new(100, 1, 0);
        cfg.population_cap = 50;
        let imm = ImmigrationModel::poisson_seq(RegVarSeq::power(1.0, 1.0).unwrap());
        match simulate(&OffspringModel::poisson1(), &imm, &cfg) {
            Err(Error::Overflow { generation, cap }) => {
                assert_eq!(cap, 50);
                assert!(generation > 1 && generation <= 100);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn per_individual_cap_is_enforced() {
        let mut cfg = SimConfig::new(100, 1, 0).per_individual();
        cfg.per_individual_cap = 20;
        let r = simulate(&OffspringModel::poisson1(), &sqrt_poisson(), &cfg);
        assert!(matches!(r, Err(Error::PerIndividualCap { cap: 20, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let cfg = SimConfig::new(10, 3, 0).with_immigration();
        let t = simulate(&OffspringModel::poisson1(), &sqrt_poisson(), &cfg).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,Z,xi\n0,0,\n"));
        assert!(!text.contains('\r'));
        let back = Trajectory::read_csv(&buf[..]).unwrap();
        assert_eq!(back.z, t.z);
        assert_eq!(back.xi, t.xi);
    }

    #[test]
    fn read_csv_rejects_bad_rows() {
        assert!(Trajectory::read_csv(&b"k,Z,xi\n0,1,\n1,2,1\n"[..]).is_err());
        assert!(Trajectory::read_csv(&b"k,Z\n0,0\n"[..]).is_err());
        assert!(Trajectory::read_csv(&b"k,Z,xi\n0,0,\n2,2,1\n"[..]).is_err());
        let t = Trajectory::read_csv(&b"k,Z,xi\n0,0,\n1,2,\n2,3,\n"[..]).unwrap();
        assert_eq!(t.xi, None);
    }
}
