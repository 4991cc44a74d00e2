//! Regularly varying sequences restricted to `scale * n^exponent * (1 + ln n)^log_power`,
//! plus the leading-term algebra used to classify limits symbolically.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents closer than this are treated as equal when comparing orders.
pub const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegVar", into = "RawRegVar")]
pub struct RegVarSeq {
    exponent: f64,
    scale: f64,
    log_power: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegVar {
    #[serde(default)]
    exponent: f64,
    #[serde(default = "one")]
    scale: f64,
    #[serde(default)]
    log_power: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawRegVar> for RegVarSeq {
    type Error = Error;
    fn try_from(raw: RawRegVar) -> Result<Self> {
        RegVarSeq::new(raw.exponent, raw.scale, raw.log_power)
    }
}

impl From<RegVarSeq> for RawRegVar {
    fn from(s: RegVarSeq) -> Self {
        RawRegVar {
            exponent: s.exponent,
            scale: s.scale,
            log_power: s.log_power,
        }
    }
}

impl RegVarSeq {
    pub fn new(exponent: f64, scale: f64, log_power: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "exponent must be finite and non-negative, got {exponent}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidModel(format!(
                "scale must be finite and positive, got {scale}"
            )));
        }
        if !(log_power.is_finite() && log_power >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "log_power must be finite and non-negative, got {log_power}"
            )));
        }
        Ok(Self {
            exponent,
            scale,
            log_power,
        })
    }

    /// `scale * n^exponent`.
    pub fn power(exponent: f64, scale: f64) -> Result<Self> {
        Self::new(exponent, scale, 0.0)
    }

    pub fn constant(scale: f64) -> Result<Self> {
        Self::new(0.0, scale, 0.0)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn log_power(&self) -> f64 {
        self.log_power
    }

    /// Value at index `n`; indices below 1 are evaluated at 1.
    pub fn value(&self, n: u64) -> f64 {
        let x = n.max(1) as f64;
        let mut v = self.scale * pow_exact(x, self.exponent);
        if self.log_power != 0.0 {
            v *= pow_exact(1.0 + x.ln(), self.log_power);
        }
        v
    }

    pub fn term(&self) -> Term {
        Term::new(self.scale, self.exponent, self.log_power)
    }
}

fn pow_exact(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// A single asymptotic term `scale * n^exponent * (ln n)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub scale: f64,
    pub exponent: f64,
    pub log_power: f64,
}

impl Term {
    pub const fn new(scale: f64, exponent: f64, log_power: f64) -> Self {
        Self {
            scale,
            exponent,
            log_power,
        }
    }

    /// The sequence `n`.
    pub const fn n() -> Self {
        Self::new(1.0, 1.0, 0.0)
    }

    pub fn times(self, other: Term) -> Term {
        Term::new(
            self.scale * other.scale,
            self.exponent + other.exponent,
            self.log_power + other.log_power,
        )
    }

    pub fn over(self, other: Term) -> Term {
        Term::new(
            self.scale / other.scale,
            self.exponent - other.exponent,
            self.log_power - other.log_power,
        )
    }

    pub fn powi(self, k: i32) -> Term {
        Term::new(
            self.scale.powi(k),
            self.exponent * k as f64,
            self.log_power * k as f64,
        )
    }

    pub fn scaled(self, c: f64) -> Term {
        Term::new(self.scale * c, self.exponent, self.log_power)
    }

    /// Leading term of the partial sums `sum_{k<=n} term(k)`.
    ///
    /// Valid for exponents above -1, which holds for every non-negative sequence here.
    pub fn partial_sum(self) -> Term {
        let e = self.exponent + 1.0;
        Term::new(self.scale / e, e, self.log_power)
    }

    /// Compares growth orders: exponent first, then log-power.
    pub fn order_cmp(&self, other: &Term) -> Ordering {
        let de = self.exponent - other.exponent;
        if de.abs() > ORDER_TOL {
            return de.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
        }
        let dl = self.log_power - other.log_power;
        if dl.abs() > ORDER_TOL {
            return dl.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
        }
        Ordering::Equal
    }

    /// Limit of this term as `n -> infinity`.
    pub fn limit(&self) -> Limit {
        match self.order_cmp(&Term::new(1.0, 0.0, 0.0)) {
            Ordering::Less => Limit::Zero,
            Ordering::Greater => Limit::Infinite,
            Ordering::Equal => Limit::Finite(self.scale),
        }
    }
}

/// Leading term of a finite sum of terms; ties in order add their scales.
pub fn leading(terms: &[Term]) -> Term {
    let mut best = terms[0];
    for t in &terms[1..] {
        match t.order_cmp(&best) {
            Ordering::Greater => best = *t,
            Ordering::Equal => best.scale += t.scale,
            Ordering::Less => {}
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Zero,
    Finite(f64),
    Infinite,
}

impl Limit {
    pub fn is_zero(&self) -> bool {
        matches!(self, Limit::Zero)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Limit::Infinite)
    }
}

/// Limit of the ratio `num / den` of two regularly varying sequences.
pub fn ratio_limit(num: Term, den: Term) -> Limit {
    num.over(den).limit()
}
