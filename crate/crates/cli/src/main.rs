//! `tomo`: simulate tomography records, estimate states with certified
//! optimality and asymptotic error bars, and run the numerical oracles.
//!
//! Exit codes: 0 success, 1 other failure, 2 unreadable or invalid input,
//! 3 optimality certificate failure, 4 degenerate gap or invalid report.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tomo_core::bayes::{bayes_report, AsymptoticOptions};
use tomo_core::convergence::{convergence_table, variance_table, Branch, LaplaceCase};
use tomo_core::hermitian::DEFAULT_RANK_TOL;
use tomo_core::maxlike::{certify, solve, spectral_gap, OptimalityCertificate, SolverOptions};
use tomo_core::oracle_mc::{mc_bayes, McOptions};
use tomo_core::simulate::{simulate, SimulationSpec};
use tomo_core::{likelihood, DensityMatrix, Error as CoreError, HermitianMatrix, MeasurementDataset};

#[derive(Parser)]
#[command(name = "tomo", version, about = "Certified maximum-likelihood tomography with asymptotic Bayesian error bars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Write the JSON result here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw multinomial counts from a simulation spec.
    Simulate {
        spec: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve, certify and report the asymptotic mean and variance of an observable.
    Estimate {
        dataset: PathBuf,
        observable: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        /// Certificate tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1e-6)]
        gap_tol: f64,
        /// Random solver start instead of the maximally mixed state.
        #[arg(long)]
        seed: Option<u64>,
        /// Report even when the certificate or gap checks fail.
        #[arg(long)]
        force: bool,
        /// CSV of mean +- k standard deviations, k = 1, 2, 3.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// JSON-lines solver trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Certify a given state, or the solver's estimate when no state is given.
    Certify {
        dataset: PathBuf,
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo posterior mean and variance under the flat prior.
    Oracle {
        dataset: PathBuf,
        observable: PathBuf,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Laplace expansion versus quadrature on the built-in test integrands.
    LaplaceCheck {
        #[arg(long, value_enum, default_value_t = CaseKind::Interior)]
        case: CaseKind,
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, value_enum, default_value_t = BranchKind::Leading)]
        branch: BranchKind,
        /// Compare the leading posterior variance instead of the integral.
        #[arg(long)]
        variance: bool,
        #[arg(long, value_delimiter = ',', default_values_t = vec![100.0, 200.0, 400.0, 800.0])]
        sizes: Vec<f64>,
        /// Quadrature relative tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// CSV of N, asymptotic, quadrature, ratio.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseKind {
    Interior,
    Boundary,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchKind {
    Leading,
    Second,
}

/// Input that could not be read or validated.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn load<T>(path: &Path, parse: impl FnOnce(&str) -> tomo_core::Result<T>) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(InputError)?;
    parse(&text).with_context(|| format!("parsing {}", path.display())).map_err(|e| InputError(e).into())
}

/// Observable file: a Hermitian matrix, or one of `"sigma_x"`, `"sigma_y"`, `"sigma_z"`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ObservableFile {
    Named(String),
    Matrix(HermitianMatrix),
}

fn parse_observable(text: &str) -> tomo_core::Result<HermitianMatrix> {
    match serde_json::from_str(text)? {
        ObservableFile::Matrix(m) => Ok(m),
        ObservableFile::Named(name) => match name.as_str() {
            "sigma_x" | "x" => Ok(HermitianMatrix::pauli_x()),
            "sigma_y" | "y" => Ok(HermitianMatrix::pauli_y()),
            "sigma_z" | "z" => Ok(HermitianMatrix::pauli_z()),
            other => Err(CoreError::InvalidInput(format!("unknown observable {other:?}"))),
        },
    }
}

fn emit(common: &Common, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match &common.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct CertifyOutput<'a> {
    rho: &'a DensityMatrix,
    log_likelihood: f64,
    spectral_gap: Option<f64>,
    certificate: &'a OptimalityCertificate,
}

#[derive(Serialize)]
struct OracleOutput {
    mean: f64,
    variance: f64,
    se_mean: f64,
    se_var: f64,
    ess: f64,
    samples: usize,
    seed: u64,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { spec, seed, common } => {
            let mut spec = load(&spec, SimulationSpec::from_json)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let ds = simulate(&spec).map_err(|e| InputError(e.into()))?;
            let text = ds.to_json()? + "\n";
            match &common.output {
                Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { dataset, observable, rank_tol, tol, gap_tol, seed, force, plot, trace, common } => {
            let ds = load(&dataset, MeasurementDataset::from_json)?;
            let a = load(&observable, parse_observable)?;
            if a.dim() != ds.dim() {
                return Err(InputError(CoreError::DimensionMismatch { expected: ds.dim(), found: a.dim() }.into()).into());
            }
            let out = solve(&ds, &SolverOptions { grad_tol: tol, rank_tol, seed, ..Default::default() })?;
            if let Some(path) = trace {
                fs::write(&path, out.log_json_lines()).with_context(|| format!("writing {}", path.display()))?;
            }
            let opts =
                AsymptoticOptions { rank_tol, certificate_tol: tol, gap_tol, force, ..AsymptoticOptions::default() };
            let report = bayes_report(&ds, &a, &out.rho, &out.certificate, &opts)?;
            if let Some(path) = plot {
                let rows = (1..=3).map(|k| {
                    let half = k as f64 * report.std_dev;
                    format!("{k},{},{},{}", report.mean, report.mean - half, report.mean + half)
                });
                write_csv(&path, "k,mean,lower,upper", rows)?;
            }
            emit(&common, &report)?;
            Ok(if report.valid || force { ExitCode::SUCCESS } else { ExitCode::from(4) })
        }
        Command::Certify { dataset, state, rank_tol, tol, seed, common } => {
            let ds = load(&dataset, MeasurementDataset::from_json)?;
            let rho = match state {
                Some(path) => load(&path, |t| Ok(serde_json::from_str::<DensityMatrix>(t)?))?,
                None => solve(&ds, &SolverOptions { grad_tol: tol, rank_tol, seed, ..Default::default() })?.rho,
            };
            let cert = certify(&ds, &rho, rank_tol, tol)?;
            let gap = spectral_gap(&cert, &likelihood::gradient(&ds, &rho)?)?;
            let output = CertifyOutput {
                rho: &rho,
                log_likelihood: likelihood::log_likelihood(&ds, &rho)?,
                spectral_gap: gap.is_finite().then_some(gap),
                certificate: &cert,
            };
            emit(&common, &output)?;
            Ok(if cert.passed { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Oracle { dataset, observable, samples, seed, common } => {
            let ds = load(&dataset, MeasurementDataset::from_json)?;
            let a = load(&observable, parse_observable)?;
            let est = mc_bayes(&ds, &a, &McOptions { samples, seed, ..McOptions::default() })?;
            emit(
                &common,
                &OracleOutput {
                    mean: est.mean,
                    variance: est.variance,
                    se_mean: est.std_error_mean,
                    se_var: est.std_error_variance,
                    ess: est.effective_sample_size,
                    samples,
                    seed,
                },
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::LaplaceCheck { case, m, n, branch, variance, sizes, tol, plot, common } => {
            let case = LaplaceCase {
                boundary: matches!(case, CaseKind::Boundary),
                m,
                n,
                branch: match branch {
                    BranchKind::Leading => Branch::Leading,
                    BranchKind::Second => Branch::SecondOrder,
                },
            };
            case.validate().map_err(|e| InputError(e.into()))?;
            if variance {
                let table = variance_table(&case, &sizes, tol)?;
                if let Some(path) = plot {
                    let rows = table.iter().map(|r| {
                        format!("{},{},{},{}", r.sample_size, r.asymptotic_variance, r.quadrature_variance, r.ratio)
                    });
                    write_csv(&path, "N,asymptotic,quadrature,ratio", rows)?;
                }
                emit(&common, &table)?;
            } else {
                let table = convergence_table(&case, &sizes, tol)?;
                if let Some(path) = plot {
                    let rows =
                        table.iter().map(|r| format!("{},{},{},{}", r.sample_size, r.asymptotic, r.quadrature, r.ratio));
                    write_csv(&path, "N,asymptotic,quadrature,ratio", rows)?;
                }
                emit(&common, &table)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::CertificateFailed(_)) => 3,
        Some(CoreError::DegenerateGap { .. } | CoreError::FisherNotPositiveDefinite) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
