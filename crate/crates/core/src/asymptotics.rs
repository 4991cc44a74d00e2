//! Deterministic quantities of the limit theorem: `A_n`, `τ²_n`, `H²_n`, `θ_n`,
//! the limit `θ`, the limiting variance `σ²`, and the covariance `C(t)` of the
//! limiting error process.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::models::{validate_regime, ImmigrationModel, OffspringModel};
use crate::quad::{integrate, QuadOptions};
use crate::stats::CompensatedSum;

/// The parameters `(θ, α, γ, b²)` that determine the Gaussian limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub theta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub b_sq: f64,
}

impl LimitLaw {
    /// `(2α+3)² (θ 2b⁴/(4α+5) + (1-θ)(γ+1)/(2α+3+γ))`.
    pub fn sigma_sq(&self) -> f64 {
        let LimitLaw {
            theta,
            alpha,
            gamma,
            b_sq,
        } = *self;
        let lead = 2.0 * alpha + 3.0;
        lead * lead
            * (theta * 2.0 * b_sq * b_sq / (4.0 * alpha + 5.0)
                + (1.0 - theta) * (gamma + 1.0) / (lead + gamma))
    }

    /// `C(t) = θ 2b⁴ t^(2α+3)/(2α+3) + (1-θ) t^(γ+1)`.
    pub fn limit_covariance(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let lead = 2.0 * self.alpha + 3.0;
        self.theta * 2.0 * self.b_sq * self.b_sq * t.powf(lead) / lead
            + (1.0 - self.theta) * t.powf(self.gamma + 1.0)
    }

    /// Variance of `ζ = ∫_0^1 (V(1) - V(u)) u^α du` in closed form.
    pub fn zeta_variance(&self) -> f64 {
        let a1 = self.alpha + 1.0;
        (self.theta * 2.0 * self.b_sq * self.b_sq / (4.0 * self.alpha + 5.0)
            + (1.0 - self.theta) * (self.gamma + 1.0) / (2.0 * self.alpha + self.gamma + 3.0))
            / (a1 * a1)
    }

    /// `E (V(1) - V(u))² = C(1) - C(u)`.
    fn increment_variance(&self, u: f64) -> f64 {
        let lead = 2.0 * self.alpha + 3.0;
        self.theta * 2.0 * self.b_sq * self.b_sq * (1.0 - u.powf(lead)) / lead
            + (1.0 - self.theta) * (1.0 - u.powf(self.gamma + 1.0))
    }

    /// `∫_0^1 ∫_0^1 s^α t^α K(max(s, t)) ds dt` by nested adaptive quadrature,
    /// with the inner integral split at the kink `s = t`.
    pub fn zeta_variance_numeric(&self) -> Result<f64> {
        let alpha = self.alpha;
        let inner_opts = QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_intervals: 1000,
        };
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let inner = |t: f64| -> f64 {
            let kt = self.increment_variance(t);
            let below = integrate(|s| s.powf(alpha) * kt, 0.0, t, inner_opts);
            let above = integrate(
                |s| s.powf(alpha) * self.increment_variance(s),
                t,
                1.0,
                inner_opts,
            );
            match (below, above) {
                (Ok(x), Ok(y)) => x + y,
                (Err(e), _) | (_, Err(e)) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let outer_opts = QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 1000,
        };
        let v = integrate(|t| t.powf(alpha) * inner(t), 0.0, 1.0, outer_opts)?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// `(closed form, quadrature)` values of `E ζ²`.
pub fn zeta_variance_crosscheck(law: &LimitLaw) -> Result<(f64, f64)> {
    Ok((law.zeta_variance(), law.zeta_variance_numeric()?))
}

/// `A_n = Σ_{k=1}^n α_k`, the mean of `Z_n`.
pub fn mean_sequence(imm: &ImmigrationModel, n: usize) -> f64 {
    (1..=n as u64)
        .map(|k| imm.mean(k))
        .collect::<CompensatedSum>()
        .value()
}

/// `τ²_n = Σ_{k=1}^n γ⁴_k`.
pub fn tau_sq(imm: &ImmigrationModel, n: usize) -> f64 {
    (1..=n as u64)
        .map(|k| imm.moments(k).gamma4)
        .collect::<CompensatedSum>()
        .value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    Symbolic,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub n: usize,
    pub a_n: f64,
    pub tau_sq_n: f64,
    /// `H²_n = n A²_n + τ²_n`.
    pub h_sq_n: f64,
    pub theta_n: f64,
    pub theta: f64,
    pub theta_source: ThetaSource,
    pub sigma_sq: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub b_sq: f64,
    pub warnings: Vec<String>,
}

impl AsymptoticParams {
    pub fn law(&self) -> LimitLaw {
        LimitLaw {
            theta: self.theta,
            alpha: self.alpha,
            gamma: self.gamma,
            b_sq: self.b_sq,
        }
    }

    pub fn limit_covariance(&self, t: f64) -> f64 {
        self.law().limit_covariance(t)
    }
}

/// Finite-`n` normalizers and the limit law for a model pair.
///
/// `θ` comes from the symbolic classification unless `theta_override` is given;
/// an indeterminate class or a regime outside the theorem's hypotheses is an
/// error without an override.
pub fn theta_params(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    n: usize,
    theta_override: Option<f64>,
) -> Result<AsymptoticParams> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let report = validate_regime(off, imm);
    let (theta, theta_source) = match theta_override {
        Some(t) if (0.0..=1.0).contains(&t) => (t, ThetaSource::Override),
        Some(t) => {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in [0, 1], got {t}"
            )))
        }
        None => {
            let t = report
                .theta_class
                .value()
                .ok_or(Error::IndeterminateTheta)?;
            if !report.theorem_applies() {
                return Err(Error::RegimeNotSatisfied(report.warnings.join("; ")));
            }
            (t, ThetaSource::Symbolic)
        }
    };
    let a_n = mean_sequence(imm, n);
    let tau_sq_n = tau_sq(imm, n);
    let n_a_sq = n as f64 * a_n * a_n;
    let h_sq_n = n_a_sq + tau_sq_n;
    let theta_n = if h_sq_n > 0.0 { n_a_sq / h_sq_n } else { 0.0 };
    let law = LimitLaw {
        theta,
        alpha: report.exponents.alpha,
        gamma: report.exponents.gamma,
        b_sq: off.b_sq(),
    };
    Ok(AsymptoticParams {
        n,
        a_n,
        tau_sq_n,
        h_sq_n,
        theta_n,
        theta,
        theta_source,
        sigma_sq: law.sigma_sq(),
        alpha: law.alpha,
        gamma: law.gamma,
        b_sq: law.b_sq,
        warnings: report.warnings,
    })
}

/// `(θ_n n)^{1/2} (b̂²_n - b²)`.
pub fn normalized_statistic(est: &Estimate, b_sq_true: f64, params: &AsymptoticParams) -> f64 {
    assert_eq!(
        est.horizon, params.n,
        "estimate and parameters use different horizons"
    );
    (params.theta_n * params.n as f64).sqrt() * (est.value - b_sq_true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::EstimatorKind;
    use crate::regvar::RegVarSeq;
    use proptest::prelude::*;

    fn law(theta: f64, alpha: f64, gamma: f64, b_sq: f64) -> LimitLaw {
        LimitLaw {
            theta,
            alpha,
            gamma,
            b_sq,
        }
    }

    #[test]
    fn sigma_sq_examples() {
        assert!((law(1.0, 0.5, 1.0, 2.0).sigma_sq() - 128.0 / 7.0).abs() < 1e-12);
        assert!((law(0.0, 1.0, 6.0, 2.0).sigma_sq() - 25.0 * 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(law(1.0, 0.0, 0.0, 1.0).limit_covariance(0.0), 0.0);
        assert!((law(1.0, 0.0, 0.0, 1.0).limit_covariance(1.0) - 2.0 / 3.0).abs() < 1e-15);
        // θ = 1: C(1) = 2b⁴/(2α+3).
        let l = law(1.0, 0.5, 1.0, 2.0);
        assert!((l.limit_covariance(1.0) - 8.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_examples() {
        assert!((law(1.0, 0.0, 0.0, 1.0).zeta_variance() - 0.4).abs() < 1e-15);
        assert!((law(0.0, 0.0, 1.0, 1.0).zeta_variance() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zeta_quadrature_matches_closed_form() {
        for l in [
            law(1.0, 0.0, 0.0, 1.0),
            law(0.3, 0.05, 2.7, 3.0),
            law(0.0, 1.9, 0.1, 0.5),
        ] {
            let (c, q) = zeta_variance_crosscheck(&l).unwrap();
            assert!((c - q).abs() / c < 1e-6, "{l:?}: {c} vs {q}");
        }
    }

    #[test]
    fn mean_sequence_examples() {
        let lin = ImmigrationModel::poisson_seq(RegVarSeq::power(1.0, 1.0).unwrap());
        assert_eq!(mean_sequence(&lin, 100), 5050.0);
        let c = ImmigrationModel::poisson_seq(RegVarSeq::constant(2.5).unwrap());
        assert_eq!(mean_sequence(&c, 40), 100.0);
        let sq = ImmigrationModel::poisson_seq(RegVarSeq::power(0.5, 1.0).unwrap());
        let direct: f64 = (1..=5000).map(|k| (k as f64).sqrt()).sum();
        assert!((mean_sequence(&sq, 5000) - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn theta_n_tends_to_one_for_linear_poisson_mean() {
        let imm = ImmigrationModel::poisson_seq(RegVarSeq::power(1.0, 1.0).unwrap());
        let p = theta_params(&OffspringModel::poisson1(), &imm, 1_000_000, None).unwrap();
        assert_eq!(p.theta, 1.0);
        // τ²_n / (n A²_n) ≈ (2n³/3) / (n⁵/4).
        let gap = 1.0 - p.theta_n;
        let approx = (2.0 / 3.0) / (1e6f64.powi(2) / 4.0);
        assert!(
            (gap / approx - 1.0).abs() < 1e-3,
            "gap {gap} approx {approx}"
        );
    }

    #[test]
    fn homogeneous_needs_override() {
        let imm = ImmigrationModel::homogeneous_poisson(5.0).unwrap();
        let off = OffspringModel::geometric1();
        assert_eq!(
            theta_params(&off, &imm, 10, None),
            Err(Error::IndeterminateTheta)
        );
        let p = theta_params(&off, &imm, 10, Some(0.5)).unwrap();
        assert_eq!(p.theta_source, ThetaSource::Override);
        assert!(theta_params(&off, &imm, 10, Some(1.5)).is_err());
    }

    #[test]
    fn normalized_statistic_examples() {
        let imm = ImmigrationModel::poisson_seq(RegVarSeq::power(0.5, 1.0).unwrap());
        let mut p = theta_params(&OffspringModel::geometric1(), &imm, 100, None).unwrap();
        let est = |value| Estimate {
            kind: EstimatorKind::NonHomogeneous,
            horizon: 100,
            value,
            numerator: value,
            denominator: 1.0,
        };
        assert_eq!(normalized_statistic(&est(2.0), 2.0, &p), 0.0);
        p.theta_n = 1.0;
        assert_eq!(normalized_statistic(&est(2.5), 2.0, &p), 5.0);
    }

    #[test]
    fn theta_n_monotonicity() {
        // x / (x + c) increases in x and decreases in c.
        let f = |a: f64, tau: f64, n: f64| n * a * a / (n * a * a + tau);
        let (a, tau, n) = (37.0, 1.0e4, 50.0);
        assert!(f(a * 1.01, tau, n) > f(a, tau, n));
        assert!(f(a, tau * 1.01, n) < f(a, tau, n));
    }

    proptest! {
        #[test]
        fn sigma_sq_chain_identity(theta in 0.0f64..=1.0, alpha in 0.0f64..3.0, gamma in 0.0f64..8.0, b_sq in 0.01f64..5.0) {
            let l = law(theta, alpha, gamma, b_sq);
            let chain = (2.0 * alpha + 3.0).powi(2) * (alpha + 1.0).powi(2) * l.zeta_variance();
            prop_assert!((chain - l.sigma_sq()).abs() <= 1e-12 * l.sigma_sq());
        }

        #[test]
        fn sigma_sq_interpolates_endpoints(theta in 0.0f64..=1.0, alpha in 0.0f64..3.0, gamma in 0.0f64..8.0, b_sq in 0.01f64..5.0) {
            let s = law(theta, alpha, gamma, b_sq).sigma_sq();
            let s0 = law(0.0, alpha, gamma, b_sq).sigma_sq();
            let s1 = law(1.0, alpha, gamma, b_sq).sigma_sq();
            prop_assert!((s - (theta * s1 + (1.0 - theta) * s0)).abs() <= 1e-12 * s.max(1.0));
            prop_assert!(s > 0.0);
        }

        #[test]
        fn covariance_at_one_for_theta_one(alpha in 0.0f64..3.0, b_sq in 0.01f64..5.0) {
            let l = law(1.0, alpha, 1.0, b_sq);
            let expect = 2.0 * b_sq * b_sq / (2.0 * alpha + 3.0);
            prop_assert!((l.limit_covariance(1.0) - expect).abs() <= 1e-14 * expect);
        }
    }
}
