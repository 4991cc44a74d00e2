//! Monte Carlo harness for the limit laws.
//!
//! Every check fans replications out over a dedicated thread pool. Replication
//! `r` always uses [`replication_stream`]`(master_seed, r)` and results are
//! collected in replication order, so outputs are bit-identical for any worker
//! count.
//!
//! None of the limit theorems checked here come with a rate, so all Monte Carlo
//! tolerances used with this module are engineering choices.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    mean_sequence, normalized_statistic, tau_sq, theta_params, AsymptoticParams,
};
use crate::error::{Error, Result};
use crate::estimate::{clse_variance, regression_errors};
use crate::models::{validate_regime, ImmigrationModel, OffspringModel};
use crate::pmf::immigration_pmf;
use crate::regvar::{ratio_limit, RegVarSeq, Term};
use crate::simulate::{simulate, SimConfig, Trajectory};
use crate::stats::{ad_normal, compensated_sum, ks_normal, median, CompensatedSum, SampleMoments};

/// Replications may fail (overflow, degenerate denominators) up to this fraction.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// Tail mass below which a truncated pmf counts as exact.
pub const PMF_TAIL_TOL: f64 = 1e-12;

pub const TOLERANCE_NOTE: &str =
    "convergence is in distribution/probability without a rate; Monte Carlo tolerances are engineering choices";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub horizon: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub workers: usize,
}

impl McSettings {
    pub fn new(horizon: usize, replications: usize, master_seed: u64, workers: usize) -> Self {
        Self {
            horizon,
            replications,
            master_seed,
            workers,
        }
    }

    fn sim_config(&self, replication: u64) -> SimConfig {
        SimConfig::new(self.horizon, self.master_seed, replication)
    }
}

/// Runs `f(r)` for `r = 0..replications` on `workers` threads, in replication order.
pub fn run_replications<T, F>(workers: usize, replications: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..replications as u64).into_par_iter().map(&f).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicationStatus {
    Ok,
    Degenerate,
    Overflow,
}

impl ReplicationStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReplicationStatus::Ok => "ok",
            ReplicationStatus::Degenerate => "degenerate",
            ReplicationStatus::Overflow => "overflow",
        }
    }

    fn from_error(e: &Error) -> Option<Self> {
        match e {
            Error::DegenerateDenominator(_) => Some(ReplicationStatus::Degenerate),
            Error::Overflow { .. } => Some(ReplicationStatus::Overflow),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    pub seed: u64,
    pub b2hat: Option<f64>,
    pub statistic: Option<f64>,
    pub status: ReplicationStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub degenerate: usize,
    pub overflow: usize,
}

impl FailureCounts {
    pub fn total(&self) -> usize {
        self.degenerate + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub replications: usize,
    pub horizon: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub offspring: OffspringModel,
    pub immigration: ImmigrationModel,
    pub params: AsymptoticParams,
    pub moments: SampleMoments,
    /// KS distance of the normalized statistics to `N(0, σ²)`.
    pub ks_distance: f64,
    pub anderson_darling: f64,
    pub failures: FailureCounts,
    pub elapsed_secs: f64,
    pub warnings: Vec<String>,
    pub tolerance_note: String,
    /// Normalized statistics of successful replications, in replication order.
    #[serde(skip)]
    pub statistics: Vec<f64>,
    #[serde(skip)]
    pub records: Vec<ReplicationRecord>,
}

impl McSummary {
    /// `replication,seed,b2hat,statistic,status` rows in replication order.
    pub fn write_replications_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"replication,seed,b2hat,statistic,status\n")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.replication,
                r.seed,
                opt(r.b2hat),
                opt(r.statistic),
                r.status.as_str()
            )?;
        }
        Ok(())
    }
}

fn check_failures(failures: usize, replications: usize) -> Result<()> {
    if failures as f64 > MAX_FAILURE_FRACTION * replications as f64 {
        return Err(Error::TooManyFailures {
            failures,
            replications,
        });
    }
    Ok(())
}

/// Simulates `R` trajectories, computes the estimator and its normalization
/// `(θ_n n)^{1/2}(b̂²_n - b²)`, and compares the ensemble with `N(0, σ²)`.
pub fn normality_experiment(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    settings: &McSettings,
    theta_override: Option<f64>,
) -> Result<McSummary> {
    if settings.replications < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 replications required, got {}",
            settings.replications
        )));
    }
    let started = Instant::now();
    let params = theta_params(off, imm, settings.horizon, theta_override)?;
    let b_sq = off.b_sq();
    let records = run_replications(settings.workers, settings.replications, |r| {
        let outcome =
            simulate(off, imm, &settings.sim_config(r)).and_then(|t| clse_variance(&t, imm));
        let (b2hat, statistic, status) = match outcome {
            Ok(est) => (
                Some(est.value),
                Some(normalized_statistic(&est, b_sq, &params)),
                ReplicationStatus::Ok,
            ),
            Err(e) => match ReplicationStatus::from_error(&e) {
                Some(s) => (None, None, s),
                None => return Err(e),
            },
        };
        Ok(ReplicationRecord {
            replication: r,
            seed: settings.master_seed,
            b2hat,
            statistic,
            status,
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut failures = FailureCounts::default();
    for r in &records {
        match r.status {
            ReplicationStatus::Degenerate => failures.degenerate += 1,
            ReplicationStatus::Overflow => failures.overflow += 1,
            ReplicationStatus::Ok => {}
        }
    }
    check_failures(failures.total(), settings.replications)?;
    let statistics: Vec<f64> = records.iter().filter_map(|r| r.statistic).collect();
    let moments = SampleMoments::of(&statistics);

    let mut warnings = params.warnings.clone();
    if off.is_degenerate() || moments.variance == 0.0 {
        warnings.push("degenerate model: the statistic ensemble has no spread".into());
    }
    let (ks_distance, anderson_darling) = if params.sigma_sq > 0.0 && !statistics.is_empty() {
        (
            ks_normal(&statistics, params.sigma_sq),
            ad_normal(&statistics, params.sigma_sq),
        )
    } else {
        warnings.push("sigma^2 is zero; goodness of fit not computed".into());
        (f64::NAN, f64::NAN)
    };

    Ok(McSummary {
        replications: settings.replications,
        horizon: settings.horizon,
        master_seed: settings.master_seed,
        workers: settings.workers,
        offspring: off.clone(),
        immigration: imm.clone(),
        params,
        moments,
        ks_distance,
        anderson_darling,
        failures,
        elapsed_secs: started.elapsed().as_secs_f64(),
        warnings,
        tolerance_note: TOLERANCE_NOTE.into(),
        statistics,
        records,
    })
}

/// Test functions with closed-form limits in the functional law of large numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiFn {
    Identity,
    Square,
    Power(f64),
}

impl PhiFn {
    /// The power `p` with `Φ(x) = x^p`; only `0 < p <= 4` is supported.
    pub fn power(&self) -> Result<f64> {
        let p = match *self {
            PhiFn::Identity => 1.0,
            PhiFn::Square => 2.0,
            PhiFn::Power(p) => p,
        };
        if !(p > 0.0 && p <= 4.0) {
            return Err(Error::UnsupportedPhi(format!("power {p} outside (0, 4]")));
        }
        Ok(p)
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            PhiFn::Identity => x,
            PhiFn::Square => x * x,
            PhiFn::Power(p) => x.powf(p),
        }
    }
}

/// `∫_0^t u^ρ Φ(u^{α+1}) du` for `Φ(x) = x^p`.
pub fn lemma1_limit(t: f64, rho: f64, alpha: f64, p: f64) -> f64 {
    let e = rho + p * (alpha + 1.0) + 1.0;
    t.powf(e) / e
}

fn rel_error(empirical: f64, limit: f64) -> f64 {
    if limit == 0.0 {
        (empirical - limit).abs()
    } else {
        (empirical - limit).abs() / limit.abs()
    }
}

fn grid_index(n: usize, t: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "grid point {t} outside [0, 1]"
        )));
    }
    Ok(((n as f64) * t).floor() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Row {
    pub t: f64,
    /// Average over replications of `(n c_n)^{-1} Σ_{k=0}^{[nt]} c_k Φ(Z_k/A_n)`.
    pub empirical: f64,
    pub limit: f64,
    pub rel_error: f64,
    /// Median over replications of the per-replication relative error.
    pub median_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Table {
    pub rows: Vec<Lemma1Row>,
    pub failures: usize,
    /// For `Φ = square`, constant `c` and `t = 1`: the largest per-trajectory
    /// discrepancy between the functional and the estimator denominator over `n A²_n`.
    pub denominator_agreement: Option<f64>,
}

fn lemma1_hypotheses(imm: &ImmigrationModel) -> Result<()> {
    let terms = imm.moment_terms().ok_or_else(|| {
        Error::RegimeNotSatisfied("homogeneous immigration has a bounded mean".into())
    })?;
    if !terms.mean.limit().is_infinite() {
        return Err(Error::RegimeNotSatisfied(
            "immigration mean does not diverge".into(),
        ));
    }
    if !ratio_limit(terms.variance, Term::n().times(terms.mean.powi(2))).is_zero() {
        return Err(Error::RegimeNotSatisfied(
            "beta^2_n / (n alpha^2_n) does not vanish".into(),
        ));
    }
    Ok(())
}

/// Monte Carlo check of `(n c_n)^{-1} Σ_{k=0}^{[nt]} c_k Φ(Z_k/A_n) → ∫_0^t u^ρ Φ(u^{α+1}) du`.
pub fn lemma1_check(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    settings: &McSettings,
    t_grid: &[f64],
    phi: PhiFn,
    c_seq: &RegVarSeq,
) -> Result<Lemma1Table> {
    let p = phi.power()?;
    lemma1_hypotheses(imm)?;
    let n = settings.horizon;
    let idx: Vec<usize> = t_grid
        .iter()
        .map(|&t| grid_index(n, t))
        .collect::<Result<_>>()?;
    let alpha = imm.exponents().alpha;
    let a_n = mean_sequence(imm, n);
    let norm = n as f64 * c_seq.value(n as u64);
    let check_denominator =
        phi == PhiFn::Square && c_seq.exponent() == 0.0 && c_seq.log_power() == 0.0;

    let per_rep = run_replications(settings.workers, settings.replications, |r| {
        let t = simulate(off, imm, &settings.sim_config(r))?;
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::new();
        for (k, &z) in t.z.iter().enumerate() {
            acc.add(c_seq.value(k as u64) * phi.apply(z as f64 / a_n));
            prefix.push(acc.value() / norm);
        }
        let values: Vec<f64> = idx.iter().map(|&i| prefix[i]).collect();
        let agreement = if check_denominator {
            let full = prefix[n];
            let last = c_seq.value(n as u64) * phi.apply(t.z[n] as f64 / a_n) / norm;
            let den = compensated_sum(t.z[..n].iter().map(|&z| (z as f64).powi(2)));
            let via_den = den / (n as f64 * a_n * a_n);
            Some((full - last - via_den).abs() / via_den.abs().max(f64::MIN_POSITIVE))
        } else {
            None
        };
        Ok::<_, Error>((values, agreement))
    })?;

    let mut failures = 0;
    let mut ok = Vec::new();
    for r in per_rep {
        match r {
            Ok(v) => ok.push(v),
            Err(Error::Overflow { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    check_failures(failures, settings.replications)?;

    let denominator_agreement =
        check_denominator.then(|| ok.iter().filter_map(|(_, a)| *a).fold(0.0, f64::max));
    if let Some(d) = denominator_agreement {
        if d > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "functional and estimator denominator disagree by {d:e}"
            )));
        }
    }
    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let limit = lemma1_limit(t, c_seq.exponent(), alpha, p);
            let vals: Vec<f64> = ok.iter().map(|(v, _)| v[j]).collect();
            let empirical = compensated_sum(vals.iter().copied()) / vals.len() as f64;
            let errs: Vec<f64> = vals.iter().map(|&v| rel_error(v, limit)).collect();
            Lemma1Row {
                t,
                empirical,
                limit,
                rel_error: rel_error(empirical, limit),
                median_rel_error: median(&errs),
            }
        })
        .collect();
    Ok(Lemma1Table {
        rows,
        failures,
        denominator_agreement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub t: f64,
    pub empirical: f64,
    pub limit: f64,
    pub rel_error: f64,
}

fn collect_ok<T>(results: Vec<Result<T>>, replications: usize) -> Result<Vec<T>> {
    let mut failures = 0;
    let mut ok = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(Error::Overflow { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    check_failures(failures, replications)?;
    Ok(ok)
}

/// Mean of `Z_{[nt]}/A_n` across replications against `t^{α+1}`.
pub fn fluctuation_check(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    settings: &McSettings,
    t_grid: &[f64],
) -> Result<Vec<CheckRow>> {
    let report = validate_regime(off, imm);
    if !report.mean_diverges {
        return Err(Error::RegimeNotSatisfied(
            "immigration mean does not diverge".into(),
        ));
    }
    let n = settings.horizon;
    let idx: Vec<usize> = t_grid
        .iter()
        .map(|&t| grid_index(n, t))
        .collect::<Result<_>>()?;
    let a_n = mean_sequence(imm, n);
    let results = run_replications(settings.workers, settings.replications, |r| {
        let t = simulate(off, imm, &settings.sim_config(r))?;
        Ok(idx
            .iter()
            .map(|&i| t.z[i] as f64 / a_n)
            .collect::<Vec<f64>>())
    })?;
    let ok = collect_ok(results, settings.replications)?;
    let alpha = report.exponents.alpha;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let empirical = compensated_sum(ok.iter().map(|v| v[j])) / ok.len() as f64;
            let limit = t.powf(alpha + 1.0);
            CheckRow {
                t,
                empirical,
                limit,
                rel_error: rel_error(empirical, limit),
            }
        })
        .collect())
}

/// Variance across replications of `V_n(t) = H_n^{-1} Σ_{k<=[nt]} V_k` against `C(t)`.
pub fn variance_process_check(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    settings: &McSettings,
    t_grid: &[f64],
    theta_override: Option<f64>,
) -> Result<Vec<CheckRow>> {
    let params = theta_params(off, imm, settings.horizon, theta_override)?;
    let n = settings.horizon;
    let idx: Vec<usize> = t_grid
        .iter()
        .map(|&t| grid_index(n, t))
        .collect::<Result<_>>()?;
    let h_n = params.h_sq_n.sqrt();
    let results = run_replications(settings.workers, settings.replications, |r| {
        let t: Trajectory = simulate(off, imm, &settings.sim_config(r))?;
        let v = regression_errors(&t, off, imm).v.expect("b^2 supplied");
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::new();
        prefix.push(0.0);
        for vk in v {
            acc.add(vk);
            prefix.push(acc.value() / h_n);
        }
        Ok(idx.iter().map(|&i| prefix[i]).collect::<Vec<f64>>())
    })?;
    let ok = collect_ok(results, settings.replications)?;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let vals: Vec<f64> = ok.iter().map(|v| v[j]).collect();
            let empirical = SampleMoments::of(&vals).variance;
            let limit = params.limit_covariance(t);
            CheckRow {
                t,
                empirical,
                limit,
                rel_error: rel_error(empirical, limit),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindebergRow {
    pub eps: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindebergReport {
    pub n: usize,
    pub tau_sq_n: f64,
    pub rows: Vec<LindebergRow>,
    /// Largest truncated tail mass over `k <= n`.
    pub max_tail_mass: f64,
    pub warnings: Vec<String>,
}

/// `τ_n^{-2} Σ_{k<=n} E(η̃²_k 1{|η̃_k| > ε τ_n})` by truncated pmf summation,
/// with `η̃_k = (ξ_k - α_k)² - β²_k`.
pub fn lindeberg_diagnostic(
    imm: &ImmigrationModel,
    n: usize,
    eps_grid: &[f64],
) -> Result<LindebergReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let tau2 = tau_sq(imm, n);
    let tau = tau2.sqrt();
    let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::new(); eps_grid.len()];
    let mut max_tail: f64 = 0.0;
    for k in 1..=n as u64 {
        let pmf = immigration_pmf(imm, k, PMF_TAIL_TOL);
        max_tail = max_tail.max(pmf.tail_mass);
        let mom = imm.moments(k);
        for (x, &p) in pmf.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let d = x as f64 - mom.mean;
            let eta = d * d - mom.variance;
            for (s, &eps) in sums.iter_mut().zip(eps_grid) {
                if eta.abs() > eps * tau {
                    s.add(p * eta * eta);
                }
            }
        }
    }
    let mut warnings = Vec::new();
    if max_tail >= PMF_TAIL_TOL {
        warnings.push(format!(
            "pmf truncation reached tail mass {max_tail:e}, above the tolerance {PMF_TAIL_TOL:e}"
        ));
    }
    Ok(LindebergReport {
        n,
        tau_sq_n: tau2,
        rows: eps_grid
            .iter()
            .zip(&sums)
            .map(|(&eps, s)| LindebergRow {
                eps,
                value: if tau2 > 0.0 { s.value() / tau2 } else { 0.0 },
            })
            .collect(),
        max_tail_mass: max_tail,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt_poisson() -> ImmigrationModel {
        ImmigrationModel::poisson_seq(RegVarSeq::power(0.5, 1.0).unwrap())
    }

    #[test]
    fn lemma1_limits() {
        assert!((lemma1_limit(1.0, 0.0, 1.0, 2.0) - 0.2).abs() < 1e-15);
        assert!((lemma1_limit(1.0, 0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unsupported_phi() {
        assert!(matches!(
            PhiFn::Power(5.0).power(),
            Err(Error::UnsupportedPhi(_))
        ));
        assert!(PhiFn::Power(0.0).power().is_err());
        assert_eq!(PhiFn::Power(3.0).power().unwrap(), 3.0);
    }

    #[test]
    fn too_few_replications() {
        let s = McSettings::new(10, 50, 1, 1);
        let r = normality_experiment(&OffspringModel::geometric1(), &sqrt_poisson(), &s, None);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_model_gives_point_mass() {
        let imm = ImmigrationModel::homogeneous_finite(vec![(3, 1.0)]).unwrap();
        let off = OffspringModel::degenerate_one();
        let s = McSettings::new(30, 100, 5, 2);
        let m = normality_experiment(&off, &imm, &s, Some(0.5)).unwrap();
        assert!(m.statistics.iter().all(|&x| x == 0.0));
        assert!(m.params.sigma_sq > 0.0);
        assert!((m.ks_distance - 0.5).abs() < 1e-12);
        assert!(m.warnings.iter().any(|w| w.contains("degenerate")));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let s1 = McSettings::new(60, 120, 77, 1);
        let s4 = McSettings { workers: 4, ..s1 };
        let off = OffspringModel::geometric1();
        let a = normality_experiment(&off, &sqrt_poisson(), &s1, None).unwrap();
        let b = normality_experiment(&off, &sqrt_poisson(), &s4, None).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_replications_csv(&mut ca).unwrap();
        b.write_replications_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.records.len(), 120);
    }

    #[test]
    fn summary_counts_add_up() {
        let s = McSettings::new(40, 100, 3, 2);
        let m =
            normality_experiment(&OffspringModel::poisson1(), &sqrt_poisson(), &s, None).unwrap();
        assert_eq!(m.statistics.len() + m.failures.total(), m.replications);
        assert!((0.0..=1.0).contains(&m.ks_distance));
    }

    #[test]
    fn check_edges_at_zero_and_one() {
        let s = McSettings::new(200, 20, 9, 2);
        let rows = fluctuation_check(
            &OffspringModel::geometric1(),
            &sqrt_poisson(),
            &s,
            &[0.0, 1.0],
        )
        .unwrap();
        assert_eq!(rows[0].empirical, 0.0);
        assert_eq!(rows[0].limit, 0.0);
        assert_eq!(rows[1].limit, 1.0);
        let v = variance_process_check(
            &OffspringModel::geometric1(),
            &sqrt_poisson(),
            &s,
            &[0.0],
            None,
        )
        .unwrap();
        assert_eq!((v[0].empirical, v[0].limit), (0.0, 0.0));
        assert!(
            fluctuation_check(&OffspringModel::geometric1(), &sqrt_poisson(), &s, &[1.5]).is_err()
        );
    }

    #[test]
    fn lindeberg_bounded_immigration_is_zero() {
        let imm = ImmigrationModel::homogeneous_finite(vec![(0, 0.3), (1, 0.4), (4, 0.3)]).unwrap();
        let r = lindeberg_diagnostic(&imm, 50, &[100.0]).unwrap();
        assert_eq!(r.rows[0].value, 0.0);
        assert_eq!(r.max_tail_mass, 0.0);
        // ε = 0 counts every non-zero η̃: the full normalized sum is one.
        let all = lindeberg_diagnostic(&imm, 50, &[0.0]).unwrap();
        assert!((all.rows[0].value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lindeberg_decreases_for_poisson() {
        let imm = sqrt_poisson();
        let small = lindeberg_diagnostic(&imm, 1000, &[1.0]).unwrap();
        let large = lindeberg_diagnostic(&imm, 4000, &[1.0]).unwrap();
        assert!(large.rows[0].value < small.rows[0].value);
        assert!(small.warnings.is_empty());
    }

    #[test]
    fn lindeberg_decreases_for_neyman_a() {
        let q = RegVarSeq::power(0.25, 1.0).unwrap();
        let imm = ImmigrationModel::neyman_a(q, q);
        let small = lindeberg_diagnostic(&imm, 1000, &[0.1]).unwrap();
        let large = lindeberg_diagnostic(&imm, 4000, &[0.1]).unwrap();
        assert!(large.rows[0].value < small.rows[0].value);
    }
}
