//! Spectral models: the unperturbed spectrum `E_gamma` plus the perturbing
//! Hamiltonian in the unperturbed eigenbasis (which is the standard basis).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{linalg, C64, DEGENERACY_TOL};

/// Relative tolerance for accepting a perturbing matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    energies: Vec<f64>,
    h1: Array2<C64>,
    label: String,
    nondegenerate: bool,
}

impl SpectralModel {
    pub fn new(energies: Vec<f64>, h1: Array2<C64>, label: impl Into<String>) -> Result<Self> {
        let dim = energies.len();
        if dim == 0 {
            return Err(Error::Validation("model dimension must be positive".into()));
        }
        if h1.dim() != (dim, dim) {
            return Err(Error::Validation(format!(
                "h1 has shape {:?}, expected {dim}x{dim}",
                h1.dim()
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Validation("energies must be finite".into()));
        }
        if h1.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("h1 entries must be finite".into()));
        }
        let residual = linalg::hermiticity_residual(&h1);
        let scale = linalg::max_abs(&h1).max(1.0);
        if residual > HERMITIAN_TOL * scale {
            return Err(Error::Validation(format!(
                "h1 is not Hermitian (max |h1 - h1^dagger| = {residual:.3e})"
            )));
        }
        let nondegenerate = min_level_gap(&energies) > DEGENERACY_TOL;
        Ok(Self { energies, h1, label: label.into(), nondegenerate })
    }

    /// Two levels at `0` and `omega` coupled by a real off-diagonal `v`.
    pub fn two_level(omega: f64, v: f64) -> Result<Self> {
        let mut h1 = Array2::zeros((2, 2));
        h1[[0, 1]] = C64::new(v, 0.0);
        h1[[1, 0]] = C64::new(v, 0.0);
        Self::new(vec![0.0, omega], h1, format!("two-level omega={omega} v={v}"))
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn h1(&self) -> &Array2<C64> {
        &self.h1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True iff every pair of levels is separated by more than [`DEGENERACY_TOL`].
    pub fn nondegenerate(&self) -> bool {
        self.nondegenerate
    }

    pub fn is_free(&self) -> bool {
        self.h1.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    /// `H0` as a diagonal matrix.
    pub fn h0_matrix(&self) -> Array2<C64> {
        let diag: Vec<C64> = self.energies.iter().map(|&e| C64::new(e, 0.0)).collect();
        linalg::diag(&diag)
    }

    /// Full `H = H0 + H1`.
    pub fn hamiltonian(&self) -> Array2<C64> {
        self.h0_matrix() + &self.h1
    }
}

fn min_level_gap(energies: &[f64]) -> f64 {
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Nonnegative multiplier applied to `h1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingScale {
    lambda: f64,
}

impl CouplingScale {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid(format!("coupling scale must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(self) -> f64 {
        self.lambda
    }
}

pub fn scale_coupling(model: &SpectralModel, s: CouplingScale) -> SpectralModel {
    SpectralModel {
        energies: model.energies.clone(),
        h1: model.h1.mapv(|z| z * s.lambda),
        label: model.label.clone(),
        nondegenerate: model.nondegenerate,
    }
}

/// Deterministic random model: sorted energies with gaps of at least 0.05
/// and a Hermitian `h1` with entries of modulus at most `lambda`.
pub fn random_model(dim: usize, seed: u64, lambda: f64) -> Result<SpectralModel> {
    if dim == 0 {
        return Err(invalid("random model dimension must be at least 1"));
    }
    let scale = CouplingScale::new(lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut energies = Vec::with_capacity(dim);
    let mut e = rng.gen_range(-1.0..0.0);
    for _ in 0..dim {
        energies.push(e);
        e += 0.05 + rng.gen_range(0.0..0.5);
    }

    let mut h1 = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        h1[[i, i]] = C64::new(rng.gen_range(-1.0..=1.0), 0.0);
        for j in (i + 1)..dim {
            let r: f64 = rng.gen_range(0.0..=1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = C64::from_polar(r, phi);
            h1[[i, j]] = z;
            h1[[j, i]] = z.conj();
        }
    }
    let model = SpectralModel::new(energies, h1, format!("random dim={dim} seed={seed}"))?;
    Ok(scale_coupling(&model, scale))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    dim: usize,
    energies: Vec<f64>,
    h1: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

pub fn load_model(text: &str) -> Result<SpectralModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.energies.len() != file.dim {
        return Err(Error::Validation(format!(
            "dim is {} but {} energies were given",
            file.dim,
            file.energies.len()
        )));
    }
    if file.h1.len() != file.dim || file.h1.iter().any(|row| row.len() != file.dim) {
        return Err(Error::Validation(format!("h1 must be a {0}x{0} array", file.dim)));
    }
    let h1 = Array2::from_shape_fn((file.dim, file.dim), |(i, j)| {
        let [re, im] = file.h1[i][j];
        C64::new(re, im)
    });
    SpectralModel::new(file.energies, h1, file.label.unwrap_or_default())
}

pub fn emit_model(model: &SpectralModel) -> String {
    let file = ModelFile {
        dim: model.dim(),
        energies: model.energies.clone(),
        h1: model
            .h1
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect(),
        label: (!model.label.is_empty()).then(|| model.label.clone()),
    };
    crate::json::to_string(&file).expect("model serialization cannot fail")
}
