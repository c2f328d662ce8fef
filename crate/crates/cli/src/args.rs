//! Command-line grammar. Every tolerance is an option whose default is the
//! acceptance threshold for that command.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dysonprop::Sign;

use crate::report::Format;

#[derive(Debug, Clone, Parser)]
#[command(name = "dysonprop", version, about = "Validate perturbation expansions against independent oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Monomial divided-difference identity over integer node lists.
    IdentityCheck(IdentityArgs),
    /// Series coefficients against time-ordered quadrature, and the
    /// resolvent-product form against the truncated series.
    Propagate(PropagateArgs),
    /// Truncation error and unitarity defect under halving of the coupling.
    Converge(ConvergeArgs),
    /// Dyson partial sums of the resolvent against a direct solve.
    DysonCheck(DysonArgs),
    /// Fourier pair between the time-dependent Green operator and the resolvent.
    GreenFt(GreenArgs),
    /// Lattice transition amplitudes through the kernel relation.
    Amplitude(AmplitudeArgs),
    /// Small deterministic run of every check.
    Selftest(SelftestArgs),
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    s.parse::<Sign>().map_err(|e| e.to_string())
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("expected a positive number, got {s}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("expected a non-negative number, got {s}"))
    }
}

fn finite(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got {s}"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct IdentityArgs {
    /// Largest node-list length.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..=12))]
    pub max_nodes: u64,
    /// Floating-point tolerance (absolute).
    #[arg(long, default_value_t = 1e-12, value_parser = positive)]
    pub tol: f64,
    /// Minimum number of node lists that must be covered.
    #[arg(long, default_value_t = 500)]
    pub min_lists: u64,
}

/// Model selection shared by several commands: a model file, or a seeded
/// random model.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Spectral model JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Seed for the random model used when no file is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dimension of the random model.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=16))]
    pub dim: u64,
}

#[derive(Debug, Clone, Args)]
pub struct PropagateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Coupling scale applied to H1.
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0, value_parser = finite)]
    pub t: f64,
    /// Truncation order N.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Gauss-Legendre points per time dimension for the quadrature oracle.
    #[arg(long, default_value_t = 64)]
    pub quad_points: usize,
    /// Largest eps of the halving ladder used for extrapolation.
    #[arg(long, default_value_t = 1e-2, value_parser = positive)]
    pub eps: f64,
    #[arg(long, default_value = "+", value_parser = parse_sign)]
    pub sign: Sign,
    /// Tolerance for series terms against quadrature.
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub tol: f64,
    /// Tolerance for the extrapolated resolvent-product form.
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub eps_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    /// Model file; the two-level model (omega = 1, v = 1) when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Larger coupling; the run also uses lambda / 2.
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0, value_parser = finite)]
    pub t: f64,
    /// Highest truncation order; orders 1..=N are checked.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=12))]
    pub order: u64,
    /// Relative tolerance on the ratio 2^(N+1).
    #[arg(long, default_value_t = 0.25, value_parser = positive)]
    pub ratio_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DysonArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Target spectral norm of H1 G0 after rescaling the coupling.
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub rho: f64,
    /// Energy; defaults to two units above the unperturbed spectrum.
    #[arg(long, value_parser = finite)]
    pub energy: Option<f64>,
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub eps: f64,
    #[arg(long, default_value = "+", value_parser = parse_sign)]
    pub sign: Sign,
    #[arg(long, default_value_t = 40)]
    pub order: usize,
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GreenArgs {
    /// Model file; the two-level model (omega = 1, v = 1) when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub eps: f64,
    #[arg(long, default_value = "+", value_parser = parse_sign)]
    pub sign: Sign,
    /// Gauss-Legendre points on the time domain.
    #[arg(long, default_value_t = 2000)]
    pub quad_points: usize,
    /// Length T of the time domain [0, T].
    #[arg(long, default_value_t = 200.0, value_parser = positive)]
    pub quad_domain: f64,
    /// Gauss-Legendre points on the energy window.
    #[arg(long, default_value_t = 8000)]
    pub energy_points: usize,
    /// Half-width of the energy window around tr(H)/D.
    #[arg(long, default_value_t = 10.0, value_parser = positive)]
    pub energy_window: f64,
    /// Tolerance for the time-to-energy transform.
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    pub tol: f64,
    /// Tolerance for the energy-to-time transform and causality.
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub causality_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AmplitudeArgs {
    /// Lattice JSON file; a six-point Gaussian well when absent.
    #[arg(long)]
    pub lattice: Option<PathBuf>,
    /// Larger coupling; the run also uses lambda / 2.
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Largest eps of the halving ladder used for extrapolation.
    #[arg(long, default_value_t = 1e-2, value_parser = positive)]
    pub eps: f64,
    /// Elapsed time t_b - t_a.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub t: f64,
    #[arg(long, default_value_t = 0.3, value_parser = positive)]
    pub ratio_tol: f64,
    /// Tolerance of the free-particle reduction.
    #[arg(long, default_value_t = 1e-12, value_parser = positive)]
    pub reduction_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `argv` without the program name.
pub fn parse_args<I, S>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(std::iter::once(std::ffi::OsString::from("dysonprop")).chain(argv.into_iter().map(Into::into)))
}
