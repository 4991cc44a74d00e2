//! `critbranch`: simulate, estimate and run Monte Carlo checks from a TOML config.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error.

mod config;
mod output;

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use critbranch::asymptotics::{theta_params, zeta_variance_crosscheck};
use critbranch::estimate::{clse_variance, clse_variance_homogeneous, EstimatorKind};
use critbranch::plots::{histogram_svg, qq_svg};
use critbranch::simulate::{simulate, SimConfig, SimMode, Trajectory};
use critbranch::verify::{
    fluctuation_check, lemma1_check, lindeberg_diagnostic, normality_experiment, run_replications,
    variance_process_check, CheckRow, McSettings,
};
use critbranch::{Error, Estimate};
use serde::Serialize;

use config::{ExperimentConfig, Overrides};
use output::{Outputs, Provenance};

#[derive(Parser)]
#[command(
    name = "critbranch",
    version,
    about = "Critical branching processes with immigration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write `k,Z,xi` CSV files.
    Simulate(CommonArgs),
    /// Estimate the offspring variance from a stored or simulated trajectory.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Stored trajectory CSV; overrides `estimate.trajectory`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Monte Carlo ensemble of the normalized estimator against its normal limit.
    Experiment(CommonArgs),
    /// Numeric checks of the limit theorems.
    Check {
        which: Which,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(clap::Args)]
struct CommonArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Lemma1,
    Fluctuation,
    Varprocess,
    Lindeberg,
    Zeta,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::Lemma1 => "lemma1",
            Which::Fluctuation => "fluctuation",
            Which::Varprocess => "varprocess",
            Which::Lindeberg => "lindeberg",
            Which::Zeta => "zeta",
        }
    }
}

/// Failure with its exit code.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Overflow { .. }
            | Error::PerIndividualCap { .. }
            | Error::DegenerateDenominator(_)
            | Error::DecompositionMismatch { .. }
            | Error::Quadrature { .. }
            | Error::TooManyFailures { .. } => Failure::Runtime(e.into()),
            Error::InvalidModel(_)
            | Error::InvalidArgument(_)
            | Error::Parse(_)
            | Error::MissingRecords(_)
            | Error::IndeterminateTheta
            | Error::RegimeNotSatisfied(_)
            | Error::UnsupportedPhi(_) => Failure::Validation(e.into()),
        }
    }
}

/// Errors from plumbing (I/O, serialization) are runtime failures.
impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn load(common: &CommonArgs) -> Outcome<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(Failure::Validation)?;
    cfg.apply(&common.overrides);
    cfg.validate().map_err(Failure::Validation)?;
    Ok(cfg)
}

fn settings(cfg: &ExperimentConfig) -> McSettings {
    McSettings::new(cfg.horizon, cfg.replications, cfg.master_seed, cfg.workers)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn finish(out: Outputs, cfg: &ExperimentConfig) -> Outcome<()> {
    for p in out.commit(&cfg.output.dir)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn json_bytes<T: Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Outcome<()> {
    let per_individual = cfg.simulate.mode == SimMode::PerIndividual;
    let trajectories = run_replications(cfg.workers, cfg.replications, |r| {
        let mut sc = SimConfig::new(cfg.horizon, cfg.master_seed, r);
        sc.mode = cfg.simulate.mode;
        sc.record_immigration = cfg.simulate.record_immigration || per_individual;
        simulate(&cfg.offspring, &cfg.immigration, &sc)
    })?;
    let mut out = Outputs::new(Provenance::new("simulate", cfg)?);
    for (r, t) in trajectories.into_iter().enumerate() {
        let t = t?;
        let mut csv = Vec::new();
        t.write_csv(&mut csv).context("formatting trajectory")?;
        out.add(format!("trajectory_{r:05}.csv"), csv);
        if per_individual {
            let mut csv = Vec::new();
            t.write_offspring_csv(&mut csv)?;
            out.add(format!("offspring_{r:05}.csv"), csv);
        }
    }
    finish(out, cfg)
}

fn estimate_one(cfg: &ExperimentConfig, t: &Trajectory) -> critbranch::Result<Estimate> {
    match cfg.estimate.kind {
        EstimatorKind::NonHomogeneous => clse_variance(t, &cfg.immigration),
        EstimatorKind::Homogeneous => {
            let m = cfg.estimate.offspring_mean.unwrap_or(1.0);
            let lambda = match cfg.estimate.immigration_mean {
                Some(l) => l,
                None if cfg.immigration.is_homogeneous() => cfg.immigration.mean(1),
                None => {
                    return Err(Error::InvalidArgument(
                        "homogeneous estimator needs estimate.immigration_mean for this immigration model".into(),
                    ))
                }
            };
            clse_variance_homogeneous(t, m, lambda)
        }
    }
}

fn cmd_estimate(cfg: &ExperimentConfig, trajectory: Option<PathBuf>) -> Outcome<()> {
    let mut rows = String::from("n,kind,value,numerator,denominator,seed,replication\n");
    let mut push = |e: &Estimate, seed: Option<u64>, r: Option<u64>| {
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{},{}",
            e.horizon,
            e.kind.as_str(),
            e.value,
            e.numerator,
            e.denominator,
            opt(seed),
            opt(r)
        );
    };
    match trajectory.or_else(|| cfg.estimate.trajectory.clone()) {
        Some(path) => {
            let file = std::fs::File::open(&path)
                .with_context(|| format!("opening {}", path.display()))
                .map_err(Failure::Validation)?;
            let t = Trajectory::read_csv(BufReader::new(file))?;
            push(&estimate_one(cfg, &t)?, None, None);
        }
        None => {
            let results = run_replications(cfg.workers, cfg.replications, |r| {
                let t = simulate(
                    &cfg.offspring,
                    &cfg.immigration,
                    &SimConfig::new(cfg.horizon, cfg.master_seed, r),
                )?;
                estimate_one(cfg, &t)
            })?;
            for (r, e) in results.into_iter().enumerate() {
                push(&e?, Some(cfg.master_seed), Some(r as u64));
            }
        }
    }
    print!("{rows}");
    let mut out = Outputs::new(Provenance::new("estimate", cfg)?);
    out.add("estimate.csv", rows.into_bytes());
    finish(out, cfg)
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    provenance: &'a Provenance,
    summary: &'a critbranch::McSummary,
}

fn cmd_experiment(cfg: &ExperimentConfig) -> Outcome<()> {
    let summary =
        normality_experiment(&cfg.offspring, &cfg.immigration, &settings(cfg), cfg.theta)?;
    warn_all(&summary.warnings);
    let mut out = Outputs::new(Provenance::new("experiment", cfg)?);
    let mut csv = Vec::new();
    summary
        .write_replications_csv(&mut csv)
        .context("formatting replications")?;
    let report = json_bytes(&ExperimentReport {
        provenance: out.provenance(),
        summary: &summary,
    })?;
    out.add("replications.csv", csv);
    out.add("report.json", report);
    if cfg.output.svg {
        let sigma_sq = summary.params.sigma_sq;
        if let Some(svg) = histogram_svg(&summary.statistics, sigma_sq, 40) {
            out.add("histogram.svg", svg.into_bytes());
        }
        if let Some(svg) = qq_svg(&summary.statistics, sigma_sq) {
            out.add("qq.svg", svg.into_bytes());
        }
    }
    println!(
        "sigma^2={} mean={} variance={} ks={} ad={} failures={} elapsed={:.2}s",
        summary.params.sigma_sq,
        summary.moments.mean,
        summary.moments.variance,
        summary.ks_distance,
        summary.anderson_darling,
        summary.failures.total(),
        summary.elapsed_secs
    );
    finish(out, cfg)
}

fn check_rows_csv(rows: &[CheckRow]) -> String {
    let mut s = String::from("t,empirical,limit,rel_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.t, r.empirical, r.limit, r.rel_error);
    }
    s
}

fn cmd_check(cfg: &ExperimentConfig, which: Which) -> Outcome<()> {
    let s = settings(cfg);
    let opts = &cfg.check;
    let (off, imm) = (&cfg.offspring, &cfg.immigration);
    let table = match which {
        Which::Lemma1 => {
            let t = lemma1_check(off, imm, &s, &opts.t_grid, opts.phi, &opts.c_seq)?;
            let mut csv = String::from("t,empirical,limit,rel_error,median_rel_error\n");
            for r in &t.rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    r.t, r.empirical, r.limit, r.rel_error, r.median_rel_error
                );
            }
            csv
        }
        Which::Fluctuation => check_rows_csv(&fluctuation_check(off, imm, &s, &opts.t_grid)?),
        Which::Varprocess => check_rows_csv(&variance_process_check(
            off,
            imm,
            &s,
            &opts.t_grid,
            cfg.theta,
        )?),
        Which::Lindeberg => {
            let r = lindeberg_diagnostic(imm, cfg.horizon, &opts.eps_grid)?;
            warn_all(&r.warnings);
            let mut csv = String::from("eps,value\n");
            for row in &r.rows {
                let _ = writeln!(csv, "{},{}", row.eps, row.value);
            }
            csv
        }
        Which::Zeta => {
            let params = theta_params(off, imm, cfg.horizon, cfg.theta)?;
            warn_all(&params.warnings);
            let law = params.law();
            let (closed, quad) = zeta_variance_crosscheck(&law)?;
            let rel = (closed - quad).abs() / closed.abs();
            format!(
                "theta,alpha,gamma,b_sq,closed_form,quadrature,rel_error\n{},{},{},{},{},{},{}\n",
                law.theta, law.alpha, law.gamma, law.b_sq, closed, quad, rel
            )
        }
    };
    print!("{table}");
    let name = which.name();
    let mut out = Outputs::new(Provenance::new(&format!("check {name}"), cfg)?);
    out.add(format!("{name}.csv"), table.into_bytes());
    finish(out, cfg)
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Simulate(c) => cmd_simulate(&load(&c)?),
        Command::Estimate { common, trajectory } => cmd_estimate(&load(&common)?, trajectory),
        Command::Experiment(c) => cmd_experiment(&load(&c)?),
        Command::Check { which, common } => cmd_check(&load(&common)?, which),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Validation(e) | Failure::Runtime(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
