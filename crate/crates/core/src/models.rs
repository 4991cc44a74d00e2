//! Offspring and immigration families, their exact moments, samplers, and the
//! symbolic classifier for the asymptotic regime of a model pair.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regvar::{leading, ratio_limit, Limit, RegVarSeq, Term};

const PMF_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Offspring
// ---------------------------------------------------------------------------

/// Offspring laws. All have mean one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OffspringFamily {
    /// Poisson with mean 1.
    Poisson1,
    /// Geometric on `{0, 1, 2, ...}` with success probability 1/2.
    Geometric1,
    /// Values 0 and 2 with probability 1/2 each.
    TwoPoint,
    /// Explicit `(value, probability)` pairs.
    CustomFiniteSupport { pmf: Vec<(u64, f64)> },
}

/// Exact moments of an offspring law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffspringMoments {
    pub mean: f64,
    /// `b^2 = Var X`.
    pub variance: f64,
    pub mu3: f64,
    pub mu4: f64,
    /// `Var((X - 1)^2)`.
    pub y_tilde_sq: f64,
}

impl OffspringMoments {
    pub fn raw_third(&self) -> f64 {
        self.mu3 + 3.0 * self.variance + 1.0
    }

    pub fn raw_fourth(&self) -> f64 {
        self.mu4 + 4.0 * self.mu3 + 6.0 * self.variance + 1.0
    }

    /// The expansion `E X^4 - 4 E X^3 - 4 b^4 + 3 b^2 + 3` that is sometimes quoted for
    /// `Var((X - 1)^2)`. It disagrees with the exact value (which is
    /// `E X^4 - 4 E X^3 - b^4 + 6 b^2 + 3`) whenever `b^2 != 1`, and even for the
    /// two-point law it is negative. Kept only to report the discrepancy.
    pub fn printed_y_tilde_sq(&self) -> f64 {
        let b2 = self.variance;
        self.raw_fourth() - 4.0 * self.raw_third() - 4.0 * b2 * b2 + 3.0 * b2 + 3.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawOffspring {
    #[serde(flatten)]
    family: OffspringFamily,
    #[serde(default, skip_serializing_if = "is_false")]
    allow_degenerate: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A validated mean-one offspring law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOffspring", into = "RawOffspring")]
pub struct OffspringModel {
    family: OffspringFamily,
    allow_degenerate: bool,
    moments: OffspringMoments,
    support: Vec<u64>,
    probs: Vec<f64>,
}

impl TryFrom<RawOffspring> for OffspringModel {
    type Error = Error;
    fn try_from(raw: RawOffspring) -> Result<Self> {
        OffspringModel::new(raw.family, raw.allow_degenerate)
    }
}

impl From<OffspringModel> for RawOffspring {
    fn from(m: OffspringModel) -> Self {
        RawOffspring {
            family: m.family,
            allow_degenerate: m.allow_degenerate,
        }
    }
}

impl OffspringModel {
    /// Validates the family. Degenerate laws (`b^2 = 0`) are rejected unless
    /// `allow_degenerate` is set.
    pub fn new(family: OffspringFamily, allow_degenerate: bool) -> Result<Self> {
        let (moments, support, probs) = match &family {
            OffspringFamily::Poisson1 => (
                OffspringMoments {
                    mean: 1.0,
                    variance: 1.0,
                    mu3: 1.0,
                    mu4: 4.0,
                    y_tilde_sq: 3.0,
                },
                vec![],
                vec![],
            ),
            // p = 1/2: variance (1-p)/p^2, mu3 (1-p)(2-p)/p^3, mu4 (1-p)(p^2-9p+9)/p^4.
            OffspringFamily::Geometric1 => (
                OffspringMoments {
                    mean: 1.0,
                    variance: 2.0,
                    mu3: 6.0,
                    mu4: 38.0,
                    y_tilde_sq: 34.0,
                },
                vec![],
                vec![],
            ),
            OffspringFamily::TwoPoint => (
                OffspringMoments {
                    mean: 1.0,
                    variance: 1.0,
                    mu3: 0.0,
                    mu4: 1.0,
                    y_tilde_sq: 0.0,
                },
                vec![0, 2],
                vec![0.5, 0.5],
            ),
            OffspringFamily::CustomFiniteSupport { pmf } => {
                let (support, probs) = validate_pmf(pmf)?;
                let m = finite_central_moments(&support, &probs);
                if (m.0 - 1.0).abs() > PMF_TOL {
                    return Err(Error::InvalidModel(format!(
                        "offspring mean must be 1, got {}",
                        m.0
                    )));
                }
                (
                    OffspringMoments {
                        mean: 1.0,
                        variance: m.1,
                        mu3: m.2,
                        mu4: m.3,
                        y_tilde_sq: m.3 - m.1 * m.1,
                    },
                    support,
                    probs,
                )
            }
        };
        if moments.variance <= PMF_TOL && !allow_degenerate {
            return Err(Error::InvalidModel(
                "degenerate offspring law (b^2 = 0); set allow_degenerate to use it".into(),
            ));
        }
        Ok(Self {
            family,
            allow_degenerate,
            moments,
            support,
            probs,
        })
    }

    pub fn poisson1() -> Self {
        Self::new(OffspringFamily::Poisson1, false).expect("valid")
    }

    pub fn geometric1() -> Self {
        Self::new(OffspringFamily::Geometric1, false).expect("valid")
    }

    pub fn two_point() -> Self {
        Self::new(OffspringFamily::TwoPoint, false).expect("valid")
    }

    /// `X == 1` almost surely; only for trivial-case checks.
    pub fn degenerate_one() -> Self {
        Self::new(
            OffspringFamily::CustomFiniteSupport {
                pmf: vec![(1, 1.0)],
            },
            true,
        )
        .expect("valid")
    }

    pub fn family(&self) -> &OffspringFamily {
        &self.family
    }

    pub fn moments(&self) -> OffspringMoments {
        self.moments
    }

    /// Offspring variance `b^2`.
    pub fn b_sq(&self) -> f64 {
        self.moments.variance
    }

    pub fn is_degenerate(&self) -> bool {
        self.moments.variance <= PMF_TOL
    }

    /// One offspring draw.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.family {
            OffspringFamily::Poisson1 => poisson(rng, 1.0),
            OffspringFamily::Geometric1 => Geometric::new(0.5).expect("p in (0,1]").sample(rng),
            OffspringFamily::TwoPoint => {
                if rng.random::<bool>() {
                    2
                } else {
                    0
                }
            }
            OffspringFamily::CustomFiniteSupport { .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in self.support.iter().zip(&self.probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *self.support.last().expect("non-empty support")
            }
        }
    }

    /// Total offspring of `count` individuals, drawn from the closed-form law of the sum.
    ///
    /// Fails with [`Error::Overflow`] (generation 0; callers fill it in) when
    /// `count` or the result exceeds `cap`.
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: u64, cap: u64, rng: &mut R) -> Result<u64> {
        let overflow = Error::Overflow { generation: 0, cap };
        if count > cap {
            return Err(overflow);
        }
        if count == 0 {
            return Ok(0);
        }
        let total = match self.family {
            OffspringFamily::Poisson1 => poisson(rng, count as f64),
            OffspringFamily::Geometric1 => {
                // NB(count, 1/2) as a Poisson-Gamma mixture.
                let g = Gamma::new(count as f64, 1.0)
                    .expect("positive shape")
                    .sample(rng);
                poisson(rng, g)
            }
            OffspringFamily::TwoPoint => {
                let b = Binomial::new(count, 0.5).expect("valid p").sample(rng);
                b.checked_mul(2).ok_or(overflow.clone())?
            }
            OffspringFamily::CustomFiniteSupport { .. } => {
                let mut remaining = count;
                let mut rest_prob = 1.0;
                let mut total: u64 = 0;
                let last = self.support.len() - 1;
                for (i, (&v, &p)) in self.support.iter().zip(&self.probs).enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let k = if i == last || rest_prob <= 0.0 {
                        remaining
                    } else {
                        let q = (p / rest_prob).clamp(0.0, 1.0);
                        Binomial::new(remaining, q).expect("valid p").sample(rng)
                    };
                    remaining -= k;
                    rest_prob -= p;
                    let add = v.checked_mul(k).ok_or(overflow.clone())?;
                    total = total.checked_add(add).ok_or(overflow.clone())?;
                }
                total
            }
        };
        if total > cap {
            return Err(overflow);
        }
        Ok(total)
    }
}

impl fmt::Display for OffspringModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            OffspringFamily::Poisson1 => write!(f, "poisson1"),
            OffspringFamily::Geometric1 => write!(f, "geometric1"),
            OffspringFamily::TwoPoint => write!(f, "two_point"),
            OffspringFamily::CustomFiniteSupport { pmf } => {
                write!(f, "custom[")?;
                for (i, (v, p)) in pmf.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                write!(f, "]")
            }
        }
    }
}

fn validate_pmf(pmf: &[(u64, f64)]) -> Result<(Vec<u64>, Vec<f64>)> {
    if pmf.is_empty() {
        return Err(Error::InvalidModel("empty pmf".into()));
    }
    let mut pairs = pmf.to_vec();
    pairs.sort_by_key(|&(v, _)| v);
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidModel("pmf has repeated values".into()));
    }
    if pairs.iter().any(|&(_, p)| !(p.is_finite() && p >= 0.0)) {
        return Err(Error::InvalidModel(
            "pmf probabilities must be finite and non-negative".into(),
        ));
    }
    let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
    if (total - 1.0).abs() > PMF_TOL {
        return Err(Error::InvalidModel(format!(
            "pmf sums to {total}, expected 1"
        )));
    }
    Ok(pairs.into_iter().unzip())
}

/// `(mean, mu2, mu3, mu4)` of a finite law.
fn finite_central_moments(support: &[u64], probs: &[f64]) -> (f64, f64, f64, f64) {
    let mean: f64 = support.iter().zip(probs).map(|(&v, p)| v as f64 * p).sum();
    let mut m = [0.0; 3];
    for (&v, &p) in support.iter().zip(probs) {
        let d = v as f64 - mean;
        let d2 = d * d;
        m[0] += p * d2;
        m[1] += p * d2 * d;
        m[2] += p * d2 * d2;
    }
    (mean, m[0], m[1], m[2])
}

pub(crate) fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda)
        .expect("finite positive mean")
        .sample(rng) as u64
}

// ---------------------------------------------------------------------------
// Immigration
// ---------------------------------------------------------------------------

/// Time-invariant immigration laws for the homogeneous baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum HomogeneousLaw {
    Poisson { mean: f64 },
    Finite { pmf: Vec<(u64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ImmigrationFamily {
    /// `ξ_n ~ Poisson(α_n)`.
    PoissonSeq { alpha: RegVarSeq },
    /// `ξ_n = Y_1 + ... + Y_N` with `N ~ Poisson(λ_n)`, `Y_i ~ Poisson(φ_n)`.
    NeymanA { lambda: RegVarSeq, phi: RegVarSeq },
    Homogeneous {
        #[serde(flatten)]
        law: HomogeneousLaw,
    },
}

/// `α_n = E ξ_n`, `β²_n = Var ξ_n`, `γ⁴_n = Var (ξ_n - α_n)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImmigrationMoments {
    pub mean: f64,
    pub variance: f64,
    pub gamma4: f64,
}

/// Leading asymptotic terms of the immigration moment sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTerms {
    pub mean: Term,
    pub variance: Term,
    pub gamma4: Term,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawImmigration {
    #[serde(flatten)]
    family: ImmigrationFamily,
    #[serde(default, skip_serializing_if = "is_false")]
    allow_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawImmigration", into = "RawImmigration")]
pub struct ImmigrationModel {
    family: ImmigrationFamily,
    allow_degenerate: bool,
    support: Vec<u64>,
    probs: Vec<f64>,
}

impl TryFrom<RawImmigration> for ImmigrationModel {
    type Error = Error;
    fn try_from(raw: RawImmigration) -> Result<Self> {
        ImmigrationModel::new(raw.family, raw.allow_degenerate)
    }
}

impl From<ImmigrationModel> for RawImmigration {
    fn from(m: ImmigrationModel) -> Self {
        RawImmigration {
            family: m.family,
            allow_degenerate: m.allow_degenerate,
        }
    }
}

impl ImmigrationModel {
    pub fn new(family: ImmigrationFamily, allow_degenerate: bool) -> Result<Self> {
        let (support, probs) = match &family {
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Poisson { mean },
            } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "homogeneous Poisson mean must be positive, got {mean}"
                    )));
                }
                (vec![], vec![])
            }
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Finite { pmf },
            } => validate_pmf(pmf)?,
            _ => (vec![], vec![]),
        };
        let model = Self {
            family,
            allow_degenerate,
            support,
            probs,
        };
        let m = model.moments(1);
        if (m.variance <= PMF_TOL || m.gamma4 <= PMF_TOL || m.mean <= 0.0) && !allow_degenerate {
            return Err(Error::InvalidModel(
                "degenerate immigration law (zero mean or variance); set allow_degenerate to use it"
                    .into(),
            ));
        }
        Ok(model)
    }

    pub fn poisson_seq(alpha: RegVarSeq) -> Self {
        Self::new(ImmigrationFamily::PoissonSeq { alpha }, false).expect("valid")
    }

    pub fn neyman_a(lambda: RegVarSeq, phi: RegVarSeq) -> Self {
        Self::new(ImmigrationFamily::NeymanA { lambda, phi }, false).expect("valid")
    }

    pub fn homogeneous_poisson(mean: f64) -> Result<Self> {
        Self::new(
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Poisson { mean },
            },
            false,
        )
    }

    /// Finite homogeneous law; degenerate laws are accepted.
    pub fn homogeneous_finite(pmf: Vec<(u64, f64)>) -> Result<Self> {
        Self::new(
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Finite { pmf },
            },
            true,
        )
    }

    pub fn family(&self) -> &ImmigrationFamily {
        &self.family
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.family, ImmigrationFamily::Homogeneous { .. })
    }

    /// Exact `(α_n, β²_n, γ⁴_n)`.
    pub fn moments(&self, n: u64) -> ImmigrationMoments {
        match &self.family {
            ImmigrationFamily::PoissonSeq { alpha } => poisson_moments(alpha.value(n)),
            ImmigrationFamily::NeymanA { lambda, phi } => {
                let l = lambda.value(n);
                let f = phi.value(n);
                let k2 = l * f * (1.0 + f);
                let k4 = l * f * (1.0 + f * (7.0 + f * (6.0 + f)));
                ImmigrationMoments {
                    mean: l * f,
                    variance: k2,
                    gamma4: k4 + 2.0 * k2 * k2,
                }
            }
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Poisson { mean },
            } => poisson_moments(*mean),
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Finite { .. },
            } => {
                let (mean, m2, _, m4) = finite_central_moments(&self.support, &self.probs);
                ImmigrationMoments {
                    mean,
                    variance: m2,
                    gamma4: m4 - m2 * m2,
                }
            }
        }
    }

    pub fn mean(&self, n: u64) -> f64 {
        self.moments(n).mean
    }

    /// Leading terms of the moment sequences; `None` for homogeneous laws.
    pub fn moment_terms(&self) -> Option<MomentTerms> {
        match &self.family {
            ImmigrationFamily::PoissonSeq { alpha } => {
                let a = alpha.term();
                Some(MomentTerms {
                    mean: a,
                    variance: a,
                    gamma4: leading(&[a, a.powi(2).scaled(2.0)]),
                })
            }
            ImmigrationFamily::NeymanA { lambda, phi } => {
                let l = lambda.term();
                let f = phi.term();
                let l2 = l.powi(2);
                let lf = |k: i32| l.times(f.powi(k));
                let l2f = |k: i32| l2.times(f.powi(k));
                Some(MomentTerms {
                    mean: lf(1),
                    variance: leading(&[lf(1), lf(2)]),
                    // κ4 + 2κ2² expanded.
                    gamma4: leading(&[
                        lf(4),
                        lf(3).scaled(6.0),
                        lf(2).scaled(7.0),
                        lf(1),
                        l2f(2).scaled(2.0),
                        l2f(3).scaled(4.0),
                        l2f(4).scaled(2.0),
                    ]),
                })
            }
            ImmigrationFamily::Homogeneous { .. } => None,
        }
    }

    /// Regular-variation exponents `(α, β, γ)` of `α_n`, `β²_n`, `γ⁴_n`; zeros for homogeneous laws.
    pub fn exponents(&self) -> RegimeExponents {
        match self.moment_terms() {
            Some(t) => RegimeExponents {
                alpha: t.mean.exponent,
                beta: t.variance.exponent,
                gamma: t.gamma4.exponent,
            },
            None => RegimeExponents {
                alpha: 0.0,
                beta: 0.0,
                gamma: 0.0,
            },
        }
    }

    /// One draw of `ξ_n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> u64 {
        match &self.family {
            ImmigrationFamily::PoissonSeq { alpha } => poisson(rng, alpha.value(n)),
            ImmigrationFamily::NeymanA { lambda, phi } => {
                let clusters = poisson(rng, lambda.value(n));
                if clusters == 0 {
                    0
                } else {
                    poisson(rng, clusters as f64 * phi.value(n))
                }
            }
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Poisson { mean },
            } => poisson(rng, *mean),
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Finite { .. },
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in self.support.iter().zip(&self.probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *self.support.last().expect("non-empty support")
            }
        }
    }

    pub(crate) fn finite_law(&self) -> Option<(&[u64], &[f64])> {
        match self.family {
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Finite { .. },
            } => Some((&self.support, &self.probs)),
            _ => None,
        }
    }
}

fn poisson_moments(a: f64) -> ImmigrationMoments {
    ImmigrationMoments {
        mean: a,
        variance: a,
        gamma4: a + 2.0 * a * a,
    }
}

impl fmt::Display for ImmigrationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seq = |s: &RegVarSeq| {
            format!(
                "{}*n^{}*(1+ln n)^{}",
                s.scale(),
                s.exponent(),
                s.log_power()
            )
        };
        match &self.family {
            ImmigrationFamily::PoissonSeq { alpha } => write!(f, "poisson_seq[{}]", seq(alpha)),
            ImmigrationFamily::NeymanA { lambda, phi } => {
                write!(f, "neyman_a[{};{}]", seq(lambda), seq(phi))
            }
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Poisson { mean },
            } => write!(f, "homogeneous_poisson[{mean}]"),
            ImmigrationFamily::Homogeneous {
                law: HomogeneousLaw::Finite { pmf },
            } => {
                write!(f, "homogeneous_finite[")?;
                for (i, (v, p)) in pmf.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                write!(f, "]")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Regime classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeExponents {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "value", rename_all = "snake_case")]
pub enum ThetaClass {
    ThetaZero,
    ThetaOne,
    ThetaInterior(f64),
    Indeterminate,
}

impl ThetaClass {
    pub fn value(&self) -> Option<f64> {
        match *self {
            ThetaClass::ThetaZero => Some(0.0),
            ThetaClass::ThetaOne => Some(1.0),
            ThetaClass::ThetaInterior(v) => Some(v),
            ThetaClass::Indeterminate => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// `α_n -> ∞`.
    pub mean_diverges: bool,
    /// `β²_n / (n α_n) -> 0`.
    pub condition_i: bool,
    /// `β²_n / (n α²_n) -> 0` and `n α_n β²_n / γ⁴_n -> 0`.
    pub condition_ii: bool,
    pub theta_class: ThetaClass,
    pub exponents: RegimeExponents,
    /// Whether the normalization `θ_n n` diverges.
    pub rate_diverges: bool,
    pub warnings: Vec<String>,
}

impl RegimeReport {
    /// Mean divergence plus condition (i) or (ii).
    pub fn theorem_applies(&self) -> bool {
        self.mean_diverges && (self.condition_i || self.condition_ii)
    }
}

/// Classifies a model pair symbolically from the leading terms of the immigration
/// moment sequences. Pure: identical inputs give identical reports.
pub fn validate_regime(off: &OffspringModel, imm: &ImmigrationModel) -> RegimeReport {
    let mut warnings = Vec::new();
    if off.is_degenerate() {
        warnings.push("degenerate offspring law: b^2 = 0".to_string());
    }
    let exponents = imm.exponents();
    let Some(terms) = imm.moment_terms() else {
        warnings.push(
            "homogeneous immigration: the mean does not diverge; only the homogeneous estimator applies"
                .to_string(),
        );
        return RegimeReport {
            mean_diverges: false,
            condition_i: false,
            condition_ii: false,
            theta_class: ThetaClass::Indeterminate,
            exponents,
            rate_diverges: false,
            warnings,
        };
    };
    let n = Term::n();
    let a = terms.mean;
    let b2 = terms.variance;
    let g4 = terms.gamma4;

    let mean_diverges = a.limit().is_infinite();
    let condition_i = ratio_limit(b2, n.times(a)).is_zero();
    let condition_ii = ratio_limit(b2, n.times(a.powi(2))).is_zero()
        && ratio_limit(n.times(a).times(b2), g4).is_zero();

    // θ_n = nA²/(nA² + τ²) with A_n = Σ α_k and τ²_n = Σ γ⁴_k.
    let n_a_sq = n.times(a.partial_sum().powi(2));
    let tau_sq = g4.partial_sum();
    let theta_class = match ratio_limit(n_a_sq, tau_sq) {
        Limit::Zero => ThetaClass::ThetaZero,
        Limit::Infinite => ThetaClass::ThetaOne,
        Limit::Finite(c) => ThetaClass::ThetaInterior(c / (1.0 + c)),
    };

    let rate_diverges = match theta_class {
        ThetaClass::ThetaZero => n.times(n_a_sq).over(tau_sq).limit().is_infinite(),
        _ => true,
    };
    if !mean_diverges {
        warnings.push("immigration mean does not diverge".to_string());
    }
    if !(condition_i || condition_ii) {
        warnings.push("neither moment condition (i) nor (ii) holds".to_string());
    }
    if !rate_diverges {
        warnings.push("normalization theta_n * n does not diverge".to_string());
    }
    if theta_class == ThetaClass::ThetaZero {
        let proviso = ratio_limit(n.powi(3).times(a.powi(2)), g4);
        if proviso.is_infinite() {
            warnings.push(
                "theta = 0 while n^3 alpha_n^2 / gamma^4_n diverges; the rate theta_n * n diverges \
                 precisely because of this"
                    .to_string(),
            );
        }
    }
    RegimeReport {
        mean_diverges,
        condition_i,
        condition_ii,
        theta_class,
        exponents,
        rate_diverges,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pow(e: f64) -> RegVarSeq {
        RegVarSeq::power(e, 1.0).unwrap()
    }

    /// Central moments by direct pmf summation, truncated where the tail is below 1e-15.
    fn pmf_moments(pmf: impl Fn(u64) -> f64) -> (f64, f64, f64, f64) {
        let mut pts = Vec::new();
        let mut mass = 0.0;
        let mut x = 0;
        while mass < 1.0 - 1e-15 && x < 10_000 {
            let p = pmf(x);
            pts.push((x as f64, p));
            mass += p;
            x += 1;
        }
        let mean: f64 = pts.iter().map(|(x, p)| x * p).sum();
        let c = |k: i32| pts.iter().map(|(x, p)| (x - mean).powi(k) * p).sum::<f64>();
        (mean, c(2), c(3), c(4))
    }

    #[test]
    fn offspring_moments_match_pmf_summation() {
        let poisson1 = |x: u64| (-1.0f64).exp() / (1..=x).map(|i| i as f64).product::<f64>();
        let geometric = |x: u64| 0.5f64.powi(x as i32 + 1);
        for (model, pmf) in [
            (OffspringModel::poisson1(), &poisson1 as &dyn Fn(u64) -> f64),
            (OffspringModel::geometric1(), &geometric),
        ] {
            let m = model.moments();
            let (mean, c2, c3, c4) = pmf_moments(pmf);
            assert!((mean - 1.0).abs() < 1e-12);
            assert!((m.variance - c2).abs() < 1e-10, "{model}");
            assert!((m.mu3 - c3).abs() < 1e-9, "{model}");
            assert!((m.mu4 - c4).abs() < 1e-8, "{model}");
            assert!((m.y_tilde_sq - (c4 - c2 * c2)).abs() < 1e-8, "{model}");
        }
    }

    #[test]
    fn named_offspring_examples() {
        let t = OffspringModel::two_point().moments();
        assert_eq!(
            (t.mean, t.variance, t.mu3, t.mu4, t.y_tilde_sq),
            (1.0, 1.0, 0.0, 1.0, 0.0)
        );
        let p = OffspringModel::poisson1().moments();
        assert_eq!((p.mean, p.variance, p.mu3, p.mu4), (1.0, 1.0, 1.0, 4.0));
        assert_eq!(OffspringModel::geometric1().b_sq(), 2.0);
    }

    #[test]
    fn custom_pmf_matches_named_law() {
        let custom = OffspringModel::new(
            OffspringFamily::CustomFiniteSupport {
                pmf: vec![(2, 0.5), (0, 0.5)],
            },
            false,
        )
        .unwrap();
        assert_eq!(custom.moments(), OffspringModel::two_point().moments());
    }

    #[test]
    fn printed_expansion_differs_from_exact_value() {
        let t = OffspringModel::two_point().moments();
        assert_eq!(t.y_tilde_sq, 0.0);
        assert_eq!(t.printed_y_tilde_sq(), -6.0);
        // The exact expansion E X^4 - 4 E X^3 - b^4 + 6 b^2 + 3 holds for every family.
        for m in [
            OffspringModel::poisson1(),
            OffspringModel::geometric1(),
            OffspringModel::two_point(),
        ] {
            let mm = m.moments();
            let b2 = mm.variance;
            let exact = mm.raw_fourth() - 4.0 * mm.raw_third() - b2 * b2 + 6.0 * b2 + 3.0;
            assert!((exact - mm.y_tilde_sq).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_offspring_pmfs() {
        let bad_sum = OffspringFamily::CustomFiniteSupport {
            pmf: vec![(0, 0.5), (2, 0.4)],
        };
        assert!(matches!(
            OffspringModel::new(bad_sum, false),
            Err(Error::InvalidModel(_))
        ));
        let bad_mean = OffspringFamily::CustomFiniteSupport {
            pmf: vec![(0, 0.5), (3, 0.5)],
        };
        assert!(OffspringModel::new(bad_mean, false).is_err());
        let degenerate = OffspringFamily::CustomFiniteSupport {
            pmf: vec![(1, 1.0)],
        };
        assert!(OffspringModel::new(degenerate.clone(), false).is_err());
        assert!(OffspringModel::new(degenerate, true).is_ok());
    }

    #[test]
    fn immigration_moment_examples() {
        let p = ImmigrationModel::poisson_seq(RegVarSeq::constant(3.0).unwrap()).moments(7);
        assert_eq!((p.mean, p.variance, p.gamma4), (3.0, 3.0, 21.0));
        let one = RegVarSeq::constant(1.0).unwrap();
        let na = ImmigrationModel::neyman_a(one, one).moments(1);
        assert_eq!((na.mean, na.variance, na.gamma4), (1.0, 2.0, 23.0));
        let h = ImmigrationModel::homogeneous_poisson(5.0)
            .unwrap()
            .moments(99);
        assert_eq!((h.mean, h.variance, h.gamma4), (5.0, 5.0, 55.0));
    }

    #[test]
    fn regime_poisson_example() {
        let imm = ImmigrationModel::poisson_seq(pow(0.5));
        let r = validate_regime(&OffspringModel::geometric1(), &imm);
        assert!(r.mean_diverges);
        assert!(r.condition_i);
        assert_eq!(r.theta_class, ThetaClass::ThetaOne);
        assert!(r.theorem_applies());
        assert_eq!(r.exponents.alpha, 0.5);
        assert_eq!(r.exponents.gamma, 1.0);
    }

    #[test]
    fn regime_constant_mean() {
        let imm = ImmigrationModel::poisson_seq(RegVarSeq::constant(1.0).unwrap());
        let r = validate_regime(&OffspringModel::geometric1(), &imm);
        assert!(!r.mean_diverges);
        assert!(!r.theorem_applies());
    }

    #[test]
    fn regime_homogeneous_is_indeterminate() {
        let imm = ImmigrationModel::homogeneous_poisson(5.0).unwrap();
        let r = validate_regime(&OffspringModel::geometric1(), &imm);
        assert!(!r.mean_diverges);
        assert_eq!(r.theta_class, ThetaClass::Indeterminate);
    }

    #[test]
    fn regime_neyman_a_depends_on_split_of_exponents() {
        // λ + φ = 1.2 in both cases; γ = 2λ + 4φ decides against 2 + 2α.
        let off = OffspringModel::geometric1();
        let zero = validate_regime(&off, &ImmigrationModel::neyman_a(pow(0.1), pow(1.1)));
        assert_eq!(zero.theta_class, ThetaClass::ThetaZero);
        assert!(zero.condition_ii && !zero.condition_i);
        assert!(zero.rate_diverges);
        assert!((zero.exponents.gamma - 4.6).abs() < 1e-12);

        let one = validate_regime(&off, &ImmigrationModel::neyman_a(pow(0.7), pow(0.5)));
        assert_eq!(one.theta_class, ThetaClass::ThetaOne);
        assert!(one.condition_i);
        assert!((one.exponents.gamma - 3.4).abs() < 1e-12);
        assert!((one.exponents.alpha - 1.2).abs() < 1e-12);
    }

    #[test]
    fn regime_neyman_a_interior_theta() {
        // φ exponent 1: nA² and τ² share the exponent 2λ + 5.
        let r = validate_regime(
            &OffspringModel::geometric1(),
            &ImmigrationModel::neyman_a(pow(0.2), pow(1.0)),
        );
        let c1 = 1.0 / (2.2f64 * 2.2);
        let c2 = 2.0 / 5.4;
        match r.theta_class {
            ThetaClass::ThetaInterior(t) => assert!((t - c1 / (c1 + c2)).abs() < 1e-12),
            other => panic!("expected interior theta, got {other:?}"),
        }
    }

    #[test]
    fn regime_is_pure() {
        let imm = ImmigrationModel::neyman_a(pow(0.3), pow(0.2));
        let off = OffspringModel::poisson1();
        assert_eq!(validate_regime(&off, &imm), validate_regime(&off, &imm));
    }

    #[test]
    fn sample_sum_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [
            OffspringModel::poisson1(),
            OffspringModel::geometric1(),
            OffspringModel::two_point(),
        ] {
            assert_eq!(m.sample_sum(0, u64::MAX, &mut rng).unwrap(), 0);
        }
        let tp = OffspringModel::two_point();
        for k in 1..200 {
            assert_eq!(tp.sample_sum(k, u64::MAX, &mut rng).unwrap() % 2, 0);
        }
        assert!(matches!(
            OffspringModel::poisson1().sample_sum(11, 10, &mut rng),
            Err(Error::Overflow { cap: 10, .. })
        ));
    }

    #[test]
    fn neyman_a_zero_clusters_gives_zero() {
        // With λ tiny almost every draw has no clusters.
        let tiny = RegVarSeq::constant(1e-9).unwrap();
        let big = RegVarSeq::constant(50.0).unwrap();
        let imm = ImmigrationModel::neyman_a(tiny, big);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| imm.sample(1, &mut rng) == 0));
    }

    #[test]
    fn serde_round_trip() {
        let imm = ImmigrationModel::neyman_a(pow(0.7), pow(0.5));
        let s = serde_json::to_string(&imm).unwrap();
        assert_eq!(serde_json::from_str::<ImmigrationModel>(&s).unwrap(), imm);
        let h = ImmigrationModel::homogeneous_finite(vec![(3, 1.0)]).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        assert!(s.contains("\"law\":\"finite\""), "{s}");
        assert_eq!(serde_json::from_str::<ImmigrationModel>(&s).unwrap(), h);
        let off: OffspringModel = serde_json::from_str(
            r#"{"family":"custom_finite_support","pmf":[[0,0.25],[1,0.5],[2,0.25]]}"#,
        )
        .unwrap();
        assert_eq!(off.b_sq(), 0.5);
        assert!(serde_json::from_str::<OffspringModel>(
            r#"{"family":"custom_finite_support","pmf":[[0,0.25],[1,0.5]]}"#
        )
        .is_err());
    }
}
