//! Perturbation expansions of the time-evolution operator, the
//! time-dependent complete Green operator and lattice transition amplitudes,
//! written in terms of divided differences of the phase function
//! `E -> exp(-i E t)` over unperturbed eigen-energies.
//!
//! Every expansion is paired with an independent route in [`oracle`]
//! (exact diagonalisation, direct linear solves, nested time-ordered
//! quadrature) so that each identity can be checked numerically.

pub mod amplitude;
pub mod divdiff;
pub mod error;
pub mod green;
pub mod json;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Energy gap below which two unperturbed levels are treated as coincident.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Selects the `+i eps` (retarded) or `-i eps` (advanced) prescription.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Retarded,
    #[serde(rename = "-")]
    Advanced,
}

impl Sign {
    /// `+1.0` for retarded, `-1.0` for advanced.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Retarded => 1.0,
            Sign::Advanced => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Retarded => "+",
            Sign::Advanced => "-",
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" | "retarded" => Ok(Sign::Retarded),
            "-" | "minus" | "advanced" => Ok(Sign::Advanced),
            other => Err(error::invalid(format!("unknown sign {other:?}, expected + or -"))),
        }
    }
}
