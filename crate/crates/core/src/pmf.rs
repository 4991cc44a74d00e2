//! Truncated probability mass functions of the immigration laws.

use statrs::function::gamma::ln_gamma;

use crate::models::{HomogeneousLaw, ImmigrationFamily, ImmigrationModel};

/// Upper bound on the support scanned before giving up on the tail tolerance.
pub const MAX_SUPPORT: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPmf {
    /// `probs[x] = P(ξ = x)` for `x = 0..probs.len()`.
    pub probs: Vec<f64>,
    /// Probability mass not represented in `probs`.
    pub tail_mass: f64,
}

impl TruncatedPmf {
    pub fn converged(&self, tol: f64) -> bool {
        self.tail_mass < tol
    }
}

pub fn poisson_ln_pmf(x: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    x as f64 * lambda.ln() - lambda - ln_gamma(x as f64 + 1.0)
}

/// Poisson pmf up to the point where the remaining tail is below `tol`.
///
/// Past the mode `p_{y+1}/p_y <= r = λ/(x+1)`, so the tail after `x` is at most
/// `p_x r/(1-r)`; that bound is reported as `tail_mass`.
pub fn poisson_pmf(lambda: f64, tol: f64) -> TruncatedPmf {
    let mut probs = Vec::new();
    let mut x = 0u64;
    loop {
        let p = poisson_ln_pmf(x, lambda).exp();
        probs.push(p);
        let r = lambda / (x + 1) as f64;
        x += 1;
        let bound = if r < 1.0 {
            p * r / (1.0 - r)
        } else {
            f64::INFINITY
        };
        if bound < tol || probs.len() >= MAX_SUPPORT {
            return TruncatedPmf {
                probs,
                tail_mass: bound.min(1.0),
            };
        }
    }
}

/// Chernoff bound on `P(ξ > x)` from the mgf `exp(λ(e^{φ(e^s - 1)} - 1))`.
///
/// With `u = e^s - 1` the exponent `λ(e^{φu} - 1) - (x+1) ln(1+u)` is convex in `s`;
/// its minimizer solves `λφ(1+u)e^{φu} = x+1`, found by bisection.
pub fn neyman_a_tail_bound(lambda: f64, phi: f64, x: u64) -> f64 {
    let target = (x + 1) as f64;
    let rate = lambda * phi;
    if rate == 0.0 {
        return 0.0;
    }
    if target <= rate {
        return 1.0;
    }
    let slope = |u: f64| rate * (1.0 + u) * (phi * u).exp();
    let (mut lo, mut hi) = (0.0, (target / rate).ln() / phi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = |u: f64| lambda * (phi * u).exp_m1() - target * u.ln_1p();
    g(lo).min(g(hi)).exp().min(1.0)
}

/// Neyman type A pmf through the Panjer recursion
/// `p_x = (λ/x) Σ_{j=1}^x j f_j p_{x-j}` with Poisson(φ) cluster sizes `f`.
pub fn neyman_a_pmf(lambda: f64, phi: f64, tol: f64) -> TruncatedPmf {
    let ln_p0 = -lambda * (1.0 - (-phi).exp());
    if ln_p0 < -700.0 {
        return neyman_a_pmf_mixture(lambda, phi, tol);
    }
    let cluster = poisson_pmf(phi, 1e-17).probs;
    let mean = lambda * phi;
    let mut probs = vec![ln_p0.exp()];
    loop {
        let x = probs.len();
        let jmax = x.min(cluster.len() - 1);
        let s: f64 = (1..=jmax)
            .map(|j| j as f64 * cluster[j] * probs[x - j])
            .sum();
        let p = lambda / x as f64 * s;
        probs.push(p);
        let tail = if x as f64 > mean {
            neyman_a_tail_bound(lambda, phi, x as u64)
        } else {
            1.0
        };
        if tail < tol || probs.len() >= MAX_SUPPORT {
            return TruncatedPmf {
                probs,
                tail_mass: tail,
            };
        }
    }
}

/// Mixture form `Σ_N P(N) P(Poisson(Nφ) = x)`, used when `p_0` underflows.
fn neyman_a_pmf_mixture(lambda: f64, phi: f64, tol: f64) -> TruncatedPmf {
    let counts = poisson_pmf(lambda, 1e-16);
    let n_lo = counts.probs.iter().position(|&p| p > 1e-18).unwrap_or(0);
    let mean = lambda * phi;
    let mut probs = Vec::new();
    loop {
        let x = probs.len() as u64;
        let p: f64 = counts.probs[n_lo..]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-18)
            .map(|(i, &w)| w * poisson_ln_pmf(x, (n_lo + i) as f64 * phi).exp())
            .sum();
        probs.push(p);
        let tail = if x as f64 > mean {
            neyman_a_tail_bound(lambda, phi, x)
        } else {
            1.0
        };
        if tail < tol || probs.len() >= MAX_SUPPORT {
            return TruncatedPmf {
                probs,
                tail_mass: tail,
            };
        }
    }
}

/// Pmf of `ξ_n` truncated at tail mass `tol` (or at [`MAX_SUPPORT`]).
pub fn immigration_pmf(imm: &ImmigrationModel, n: u64, tol: f64) -> TruncatedPmf {
    match imm.family() {
        ImmigrationFamily::PoissonSeq { alpha } => poisson_pmf(alpha.value(n), tol),
        ImmigrationFamily::NeymanA { lambda, phi } => {
            neyman_a_pmf(lambda.value(n), phi.value(n), tol)
        }
        ImmigrationFamily::Homogeneous {
            law: HomogeneousLaw::Poisson { mean },
        } => poisson_pmf(*mean, tol),
        ImmigrationFamily::Homogeneous {
            law: HomogeneousLaw::Finite { .. },
        } => {
            let (support, p) = imm.finite_law().expect("finite law");
            let top = *support.iter().max().expect("non-empty") as usize;
            let mut probs = vec![0.0; top + 1];
            for (&v, &q) in support.iter().zip(p) {
                probs[v as usize] += q;
            }
            TruncatedPmf {
                probs,
                tail_mass: 0.0,
            }
        }
    }
}
