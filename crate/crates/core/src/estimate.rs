//! Martingale residuals, conditional least squares estimators of the offspring
//! variance, and the exact three-part decomposition of the regression errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ImmigrationModel, OffspringModel};
use crate::simulate::Trajectory;
use crate::stats::CompensatedSum;

/// Relative tolerance for the decomposition identity.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

/// Regression error parts `V⁽¹⁾`, `V⁽²⁾`, `V⁽³⁾` per generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorParts {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v3: Vec<f64>,
}

/// Residual series indexed by generation `k = 1..=n` (stored at `k - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    /// `M_k = Z_k - Z_{k-1} - α_k`.
    pub m: Vec<f64>,
    /// `V_k = M_k² - b² Z_{k-1} - β²_k`, when `b²` was supplied.
    pub v: Option<Vec<f64>>,
    pub parts: Option<ErrorParts>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Time-varying immigration with known `α_k`, `β²_k`.
    #[default]
    #[serde(rename = "nonhomogeneous")]
    NonHomogeneous,
    /// Homogeneous immigration with known offspring and immigration means.
    Homogeneous,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::NonHomogeneous => "nonhomogeneous",
            EstimatorKind::Homogeneous => "homogeneous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub kind: EstimatorKind,
    pub horizon: usize,
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
}

fn increment(traj: &Trajectory, k: usize) -> f64 {
    (traj.z[k] as i128 - traj.z[k - 1] as i128) as f64
}

/// `M_k = Z_k - Z_{k-1} - α_k` for `k = 1..=n`.
pub fn residuals(traj: &Trajectory, imm: &ImmigrationModel) -> ResidualSeries {
    let m = (1..traj.z.len())
        .map(|k| increment(traj, k) - imm.mean(k as u64))
        .collect();
    ResidualSeries {
        m,
        v: None,
        parts: None,
    }
}

/// Residuals together with the regression errors `V_k`, using the true `b²`.
pub fn regression_errors(
    traj: &Trajectory,
    off: &OffspringModel,
    imm: &ImmigrationModel,
) -> ResidualSeries {
    let b2 = off.b_sq();
    let mut out = residuals(traj, imm);
    let v = out
        .m
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let beta2 = imm.moments(i as u64 + 1).variance;
            m * m - b2 * traj.z[i] as f64 - beta2
        })
        .collect();
    out.v = Some(v);
    out
}

/// Conditional least squares estimator of `b²` under time-varying immigration:
/// `Σ ((Z_k - Z_{k-1} - α_k)² - β²_k) Z_{k-1} / Σ Z²_{k-1}` over `k = 1..=n`.
pub fn clse_variance(traj: &Trajectory, imm: &ImmigrationModel) -> Result<Estimate> {
    let n = traj.horizon();
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for k in 1..=n {
        let prev = traj.z[k - 1];
        if prev == 0 {
            continue;
        }
        let mom = imm.moments(k as u64);
        let m = increment(traj, k) - mom.mean;
        let zp = prev as f64;
        num.add((m * m - mom.variance) * zp);
        den.add(zp * zp);
    }
    let denominator = den.value();
    if denominator == 0.0 {
        return Err(Error::DegenerateDenominator("nonhomogeneous"));
    }
    let numerator = num.value();
    Ok(Estimate {
        kind: EstimatorKind::NonHomogeneous,
        horizon: n,
        value: numerator / denominator,
        numerator,
        denominator,
    })
}

/// Centered estimator for homogeneous immigration with known means:
/// `Σ (M*_k)² (Z_{k-1} - Z̄) / Σ (Z_{k-1} - Z̄)²` with
/// `M*_k = Z_k - offspring_mean Z_{k-1} - imm_mean`.
pub fn clse_variance_homogeneous(
    traj: &Trajectory,
    offspring_mean: f64,
    imm_mean: f64,
) -> Result<Estimate> {
    let n = traj.horizon();
    let prev = &traj.z[..n];
    let nf = n as f64;

    // Exact centered sum of squares when it fits in u128.
    let exact = prev.iter().try_fold((0u128, 0u128), |(s1, s2), &z| {
        let z = z as u128;
        Some((s1.checked_add(z)?, s2.checked_add(z.checked_mul(z)?)?))
    });
    let (mean_prev, denominator) = match exact {
        Some((s1, s2)) => {
            let scaled = (n as u128)
                .checked_mul(s2)
                .zip(s1.checked_mul(s1))
                .map(|(a, b)| a - b);
            if scaled == Some(0) {
                return Err(Error::DegenerateDenominator("homogeneous"));
            }
            let mean = s1 as f64 / nf;
            let den = match scaled {
                Some(v) => v as f64 / nf,
                None => prev
                    .iter()
                    .map(|&z| (z as f64 - mean).powi(2))
                    .collect::<CompensatedSum>()
                    .value(),
            };
            (mean, den)
        }
        None => {
            let mean = prev
                .iter()
                .map(|&z| z as f64)
                .collect::<CompensatedSum>()
                .value()
                / nf;
            let den = prev
                .iter()
                .map(|&z| (z as f64 - mean).powi(2))
                .collect::<CompensatedSum>()
                .value();
            (mean, den)
        }
    };
    if denominator <= 0.0 {
        return Err(Error::DegenerateDenominator("homogeneous"));
    }
    let numerator = (1..=n)
        .map(|k| {
            let m = traj.z[k] as f64 - offspring_mean * traj.z[k - 1] as f64 - imm_mean;
            m * m * (traj.z[k - 1] as f64 - mean_prev)
        })
        .collect::<CompensatedSum>()
        .value();
    Ok(Estimate {
        kind: EstimatorKind::Homogeneous,
        horizon: n,
        value: numerator / denominator,
        numerator,
        denominator,
    })
}

/// Splits each `V_k` into
/// `V⁽¹⁾ = 2 Σ_{j=2}^{Z_{k-1}} X̃_{k,j} S_{j-1} + η̃_k`,
/// `V⁽²⁾ = 2 ξ̃_k Σ_i X̃_{k,i}` and `V⁽³⁾ = Σ_i (X̃²_{k,i} - b²)`,
/// where `X̃ = X - 1`, `S_j` are partial sums of `X̃`, `ξ̃_k = ξ_k - α_k`
/// and `η̃_k = ξ̃²_k - β²_k`. The identity `V = V⁽¹⁾ + V⁽²⁾ + V⁽³⁾` is checked
/// for every generation.
pub fn decompose_error(
    traj: &Trajectory,
    off: &OffspringModel,
    imm: &ImmigrationModel,
) -> Result<ResidualSeries> {
    let records = traj
        .offspring
        .as_ref()
        .ok_or(Error::MissingRecords("offspring"))?;
    let xi = traj
        .xi
        .as_ref()
        .ok_or(Error::MissingRecords("immigration"))?;
    let b2 = off.b_sq();
    let mut series = regression_errors(traj, off, imm);
    let v = series.v.as_ref().expect("computed above");
    let n = traj.horizon();
    let mut parts = ErrorParts {
        v1: Vec::with_capacity(n),
        v2: Vec::with_capacity(n),
        v3: Vec::with_capacity(n),
    };
    for k in 1..=n {
        let kids = &records[k - 1];
        if kids.len() as u64 != traj.z[k - 1] {
            return Err(Error::MissingRecords("complete offspring"));
        }
        // Integer parts are exact.
        let mut partial: i128 = 0;
        let mut cross: i128 = 0;
        let mut sq: i128 = 0;
        for &x in kids {
            let xt = x as i128 - 1;
            cross += xt * partial;
            partial += xt;
            sq += xt * xt;
        }
        let mom = imm.moments(k as u64);
        let xi_t = xi[k - 1] as f64 - mom.mean;
        let eta_t = xi_t * xi_t - mom.variance;
        let v1 = 2.0 * cross as f64 + eta_t;
        let v2 = 2.0 * xi_t * partial as f64;
        let v3 = sq as f64 - kids.len() as f64 * b2;
        let vk = v[k - 1];
        let discrepancy = (vk - (v1 + v2 + v3)).abs() / (1.0 + vk.abs());
        if discrepancy >= DECOMPOSITION_TOL {
            return Err(Error::DecompositionMismatch {
                generation: k,
                discrepancy,
            });
        }
        parts.v1.push(v1);
        parts.v2.push(v2);
        parts.v3.push(v3);
    }
    series.parts = Some(parts);
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regvar::RegVarSeq;
    use crate::simulate::{simulate, SimConfig};

    fn identity_poisson() -> ImmigrationModel {
        ImmigrationModel::poisson_seq(RegVarSeq::power(1.0, 1.0).unwrap())
    }

    fn hand_trajectory() -> Trajectory {
        Trajectory::from_counts(vec![0, 2, 3, 4], None).unwrap()
    }

    #[test]
    fn hand_computed_residuals() {
        let r = residuals(&hand_trajectory(), &identity_poisson());
        assert_eq!(r.m, vec![1.0, -1.0, -2.0]);
    }

    #[test]
    fn hand_computed_estimate() {
        let e = clse_variance(&hand_trajectory(), &identity_poisson()).unwrap();
        assert_eq!(e.numerator, 1.0);
        assert_eq!(e.denominator, 13.0);
        assert_eq!(e.value, 1.0 / 13.0);
        assert_eq!(e.horizon, 3);
    }

    #[test]
    fn all_zero_trajectory_is_degenerate() {
        let t = Trajectory::from_counts(vec![0; 6], None).unwrap();
        assert_eq!(
            clse_variance(&t, &identity_poisson()),
            Err(Error::DegenerateDenominator("nonhomogeneous"))
        );
        assert_eq!(
            clse_variance_homogeneous(&t, 1.0, 1.0),
            Err(Error::DegenerateDenominator("homogeneous"))
        );
    }

    #[test]
    fn homogeneous_hand_example() {
        let t = Trajectory::from_counts(vec![0, 1, 2], None).unwrap();
        let e = clse_variance_homogeneous(&t, 1.0, 1.0).unwrap();
        assert_eq!(e.numerator, 0.0);
        assert_eq!(e.denominator, 0.5);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn deterministic_path_has_zero_residuals() {
        let imm = ImmigrationModel::homogeneous_finite(vec![(3, 1.0)]).unwrap();
        let off = OffspringModel::degenerate_one();
        let t = simulate(&off, &imm, &SimConfig::new(20, 1, 0)).unwrap();
        assert!(residuals(&t, &imm).m.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn empty_generations_reduce_to_immigration_term() {
        // Z_0 = 0 and Z_1 = 1: the first two generations have no cross terms.
        let mut t = Trajectory::from_counts(vec![0, 1, 4], Some(vec![1, 2])).unwrap();
        t.offspring = Some(vec![vec![], vec![2]]);
        let imm = identity_poisson();
        let off = OffspringModel::poisson1();
        let r = decompose_error(&t, &off, &imm).unwrap();
        let p = r.parts.unwrap();
        // k = 1: ξ̃ = 0, η̃ = -1.
        assert_eq!((p.v1[0], p.v2[0], p.v3[0]), (-1.0, 0.0, 0.0));
        // k = 2: ξ̃ = 0, η̃ = -2, X̃ = 1.
        assert_eq!(p.v1[1], -2.0);
        assert_eq!(p.v2[1], 0.0);
        assert_eq!(p.v3[1], 0.0);
    }

    #[test]
    fn decomposition_requires_records() {
        let t = hand_trajectory();
        assert_eq!(
            decompose_error(&t, &OffspringModel::poisson1(), &identity_poisson()),
            Err(Error::MissingRecords("offspring"))
        );
    }

    #[test]
    fn k1_summand_vanishes() {
        let imm = ImmigrationModel::poisson_seq(RegVarSeq::power(0.5, 1.0).unwrap());
        for rep in 0..20 {
            let t = simulate(
                &OffspringModel::geometric1(),
                &imm,
                &SimConfig::new(30, 4, rep),
            )
            .unwrap();
            let full = clse_variance(&t, &imm).unwrap();
            // Dropping the k = 1 generation entirely leaves the sums unchanged.
            let mut num = CompensatedSum::new();
            let mut den = CompensatedSum::new();
            for k in 2..=30 {
                let mom = imm.moments(k as u64);
                let m = t.z[k] as f64 - t.z[k - 1] as f64 - mom.mean;
                num.add((m * m - mom.variance) * t.z[k - 1] as f64);
                den.add((t.z[k - 1] as f64).powi(2));
            }
            assert_eq!(full.numerator, num.value());
            assert_eq!(full.denominator, den.value());
            assert!(
                (full.value - full.numerator / full.denominator).abs() <= 1e-12 * full.value.abs()
            );
        }
    }
}
