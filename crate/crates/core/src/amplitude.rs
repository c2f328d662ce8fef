//! Transition amplitudes on a uniform 1D lattice with Dirichlet walls.
//!
//! Position kets are normalised as `<x_m|x_n> = delta_mn / h`, so that a
//! continuum integral `int dy` becomes `h * sum_y` and `delta(x - x')`
//! becomes `delta_mn / h`. With this convention
//! `K(x_b, t_b; x_a, t_a) = <x_b| exp(-i H (t_b - t_a)) |x_a>` is the
//! ordinary matrix exponential divided by `h`.

use ndarray::Array2;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divdiff::phase_fn;
use crate::error::{invalid, Error, Result};
use crate::model::{CouplingScale, SpectralModel};
use crate::oracle::{exact_evolution_matrix, hermitian_eigendecomposition};
use crate::propagator::{epsilon_form_pieces, richardson, truncated_evolution, TruncationSpec};
use crate::{linalg, Sign, C64};

/// Boundary condition at both ends of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Boundary {
    #[default]
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(rename = "M")]
    pub m: usize,
    pub x0: f64,
    pub h: f64,
    pub mass: f64,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    #[serde(default)]
    pub bc: Boundary,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Validation(format!("lattice needs M >= 2, got {}", self.m)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Validation(format!("grid spacing must be positive, got {}", self.h)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::Validation(format!("mass must be positive, got {}", self.mass)));
        }
        if !self.x0.is_finite() {
            return Err(Error::Validation("x0 must be finite".into()));
        }
        for (name, v) in [("v0", &self.v0), ("v1", &self.v1)] {
            if v.len() != self.m {
                return Err(Error::Validation(format!("{name} has {} values, expected {}", v.len(), self.m)));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Grid coordinate of point `n`.
    pub fn x(&self, n: usize) -> f64 {
        self.x0 + n as f64 * self.h
    }

    /// Free particle, `v0 = v1 = 0`.
    pub fn free(m: usize, h: f64, mass: f64) -> Self {
        Self { m, x0: 0.0, h, mass, v0: vec![0.0; m], v1: vec![0.0; m], bc: Boundary::Dirichlet }
    }

    /// Same lattice with the perturbing potential multiplied by `lambda`.
    pub fn with_coupling(&self, s: CouplingScale) -> Self {
        Self { v1: self.v1.iter().map(|v| v * s.lambda()).collect(), ..self.clone() }
    }

    /// Kinetic second difference plus `diag(v0)`.
    pub fn h0_matrix(&self) -> Array2<f64> {
        let m = self.m;
        let k = 1.0 / (2.0 * self.mass * self.h * self.h);
        Array2::from_shape_fn((m, m), |(i, j)| {
            if i == j {
                2.0 * k + self.v0[i]
            } else if i.abs_diff(j) == 1 {
                -k
            } else {
                0.0
            }
        })
    }

    /// Full lattice Hamiltonian `H0 + diag(v1)`.
    pub fn hamiltonian(&self) -> Array2<f64> {
        let mut h = self.h0_matrix();
        for (i, v) in self.v1.iter().enumerate() {
            h[[i, i]] += v;
        }
        h
    }
}

pub fn load_lattice(text: &str) -> Result<LatticeSpec> {
    let spec: LatticeSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn emit_lattice(spec: &LatticeSpec) -> String {
    crate::json::to_string(spec).expect("lattice serialization cannot fail")
}

#[derive(Debug, Clone)]
pub struct LatticeSystem {
    pub spec: LatticeSpec,
    pub model: SpectralModel,
    /// `basis[[n, g]] = <x_n|Phi^g>`, i.e. the orthonormal eigenvectors of the
    /// lattice `H0` divided by `sqrt(h)`.
    pub basis: Array2<f64>,
}

impl LatticeSystem {
    /// `max |h * B^T B - 1|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let gram = self.basis.t().dot(&self.basis) * self.spec.h;
        let m = self.spec.m;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - target).abs());
            }
        }
        worst
    }

    /// `<x_b| O |x_a>` for an operator given in the `H0` eigenbasis.
    fn sandwich(&self, op: &Array2<C64>, xb: usize, xa: usize) -> C64 {
        let d = self.spec.m;
        let mut acc = linalg::CompensatedSum::new();
        for g in 0..d {
            for gp in 0..d {
                acc.add(op[[g, gp]] * (self.basis[[xb, g]] * self.basis[[xa, gp]]));
            }
        }
        acc.value()
    }

    fn check_index(&self, x: usize) -> Result<()> {
        if x >= self.spec.m {
            return Err(invalid(format!("grid index {x} out of range 0..{}", self.spec.m)));
        }
        Ok(())
    }
}

pub fn build_lattice(spec: LatticeSpec) -> Result<LatticeSystem> {
    spec.validate()?;
    let m = spec.m;
    let h0 = spec.h0_matrix().mapv(|x| C64::new(x, 0.0));
    let eig = hermitian_eigendecomposition(&h0)?;
    let u = eig.vectors.mapv(|z| z.re);
    let basis = &u / spec.h.sqrt();

    let mut h1 = Array2::<f64>::zeros((m, m));
    for g in 0..m {
        for gp in g..m {
            let mut acc = linalg::CompensatedSum::new();
            for n in 0..m {
                acc.add(C64::new(u[[n, g]] * spec.v1[n] * u[[n, gp]], 0.0));
            }
            h1[[g, gp]] = acc.value().re;
            h1[[gp, g]] = h1[[g, gp]];
        }
    }
    let model = SpectralModel::new(eig.values, h1.mapv(|x| C64::new(x, 0.0)), format!("lattice M={m} h={}", spec.h))?;
    Ok(LatticeSystem { spec, model, basis })
}

fn elapsed(tb: f64, ta: f64) -> Result<f64> {
    if !(tb.is_finite() && ta.is_finite()) {
        return Err(invalid("times must be finite"));
    }
    if tb < ta {
        return Err(invalid(format!("amplitudes need tb >= ta, got tb={tb} ta={ta}")));
    }
    Ok(tb - ta)
}

/// `<x_b| exp(-i H0 (t_b - t_a)) |x_a>`.
pub fn k0_amplitude(sys: &LatticeSystem, xb: usize, tb: f64, xa: usize, ta: f64) -> Result<C64> {
    sys.check_index(xb)?;
    sys.check_index(xa)?;
    let tau = elapsed(tb, ta)?;
    if tau == 0.0 {
        let v = if xb == xa { 1.0 / sys.spec.h } else { 0.0 };
        return Ok(C64::new(v, 0.0));
    }
    let mut acc = linalg::CompensatedSum::new();
    for (g, &e) in sys.model.energies().iter().enumerate() {
        acc.add(phase_fn(C64::new(e, 0.0), tau) * (sys.basis[[xb, g]] * sys.basis[[xa, g]]));
    }
    Ok(acc.value())
}

/// `<x_b| exp(-i H (t_b - t_a)) |x_a>` with the full lattice Hamiltonian.
pub fn k_exact(sys: &LatticeSystem, xb: usize, tb: f64, xa: usize, ta: f64) -> Result<C64> {
    Ok(k_exact_grid(sys, tb, ta)?[[xb, xa]])
}

/// [`k_exact`] at every grid pair.
pub fn k_exact_grid(sys: &LatticeSystem, tb: f64, ta: f64) -> Result<Array2<C64>> {
    let tau = elapsed(tb, ta)?;
    let h = sys.spec.hamiltonian().mapv(|x| C64::new(x, 0.0));
    Ok(exact_evolution_matrix(&h, tau)? / C64::new(sys.spec.h, 0.0))
}

/// Position-basis sandwich of the order-`N` truncated evolution operator.
pub fn k_truncated_direct(
    sys: &LatticeSystem,
    spec: TruncationSpec,
    xb: usize,
    tb: f64,
    xa: usize,
    ta: f64,
) -> Result<C64> {
    sys.check_index(xb)?;
    sys.check_index(xa)?;
    Ok(k_truncated_grid(sys, spec, tb, ta)?[[xb, xa]])
}

/// [`k_truncated_direct`] at every grid pair.
pub fn k_truncated_grid(sys: &LatticeSystem, spec: TruncationSpec, tb: f64, ta: f64) -> Result<Array2<C64>> {
    let tau = elapsed(tb, ta)?;
    let u = truncated_evolution(&sys.model, spec, tau)?.entries;
    let m = sys.spec.m;
    Ok(Array2::from_shape_fn((m, m), |(xb, xa)| sys.sandwich(&u, xb, xa)))
}

/// One `(l, i, g_i)` term of the kernel in position space.
#[derive(Debug, Clone)]
struct KernelPiece {
    position: usize,
    level: usize,
    /// `<x_b| (G0 H1)^{i-1} |y_b>`.
    left: Array2<C64>,
    /// `<Phi^g| (H1 G0)^{l+1-i} |x_a>`.
    right: Vec<C64>,
}

/// The regularised, truncated kernel `C` relating `K` to `K0`.
///
/// Resolvents carry the same position-graded shifts as the resolvent-product
/// form of the evolution operator, so a term whose propagator sits at chain
/// position `i` is weighted by `exp(-s eps (i-1) tau)` with `tau = t_b - t_a`.
#[derive(Debug, Clone)]
pub struct CKernel {
    eps: f64,
    sign: Sign,
    h: f64,
    basis: Array2<f64>,
    pieces: Vec<KernelPiece>,
}

impl CKernel {
    pub fn new(sys: &LatticeSystem, spec: TruncationSpec, eps: f64, sign: Sign) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        let m = sys.spec.m;
        let e = sys.model.energies();
        let h1 = sys.model.h1();
        let s = sign.factor();
        let b = sys.basis.mapv(|x| C64::new(x, 0.0));
        let bt = b.t().to_owned();
        let to_position_row = |row: &[C64]| -> Vec<C64> {
            (0..m)
                .map(|x| row.iter().enumerate().map(|(g, r)| r * sys.basis[[x, g]]).sum())
                .collect()
        };

        let mut pieces = Vec::new();
        for l in 0..=spec.order {
            for chain in epsilon_form_pieces(&sys.model, l, eps, sign) {
                let (i, g) = (chain.position, chain.level);
                // (G0 H1)^{i-1} as an operator, G0 at E_g with shift i s eps (j - i).
                let mut op = linalg::identity(m);
                for j in 1..i {
                    let shift = s * eps * (j as f64 - i as f64);
                    let mut factor = h1.clone();
                    for (a, mut row) in factor.rows_mut().into_iter().enumerate() {
                        let r = C64::new(1.0, 0.0) / C64::new(e[g] - e[a], shift);
                        row.mapv_inplace(|z| z * r);
                    }
                    op = op.dot(&factor);
                }
                let left = b.dot(&op).dot(&bt);
                pieces.push(KernelPiece { position: i, level: g, left, right: to_position_row(&chain.right) });
            }
        }
        Ok(Self { eps, sign, h: sys.spec.h, basis: sys.basis.clone(), pieces })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn weight(&self, position: usize, tau: f64) -> f64 {
        (-self.sign.factor() * self.eps * (position - 1) as f64 * tau).exp()
    }

    /// `C(x_b, y_b; x_a, y_a)` for elapsed time `tau`.
    pub fn value(&self, tau: f64, xb: usize, yb: usize, xa: usize, ya: usize) -> C64 {
        let mut acc = linalg::CompensatedSum::new();
        for p in &self.pieces {
            let w = self.weight(p.position, tau) * self.basis[[ya, p.level]];
            acc.add(p.left[[xb, yb]] * p.right[xa] * w);
        }
        acc.value()
    }

    /// `h^2 sum_{y_b, y_a} C(x_b, y_b; x_a, y_a) K0(y_b, y_a)` where
    /// `k0[[y_b, y_a]]` holds the unperturbed amplitude over the same `tau`.
    pub fn relation(&self, tau: f64, k0: &Array2<C64>, xb: usize, xa: usize) -> C64 {
        let m = k0.nrows();
        let mut acc = linalg::CompensatedSum::new();
        for yb in 0..m {
            for ya in 0..m {
                acc.add(self.value(tau, xb, yb, xa, ya) * k0[[yb, ya]]);
            }
        }
        acc.value() * (self.h * self.h)
    }
}

/// Single evaluation of the kernel `C(x_b, y_b; x_a, y_a)` at elapsed time `tau`
/// with the retarded prescription.
#[allow(clippy::too_many_arguments)]
pub fn c_kernel(
    sys: &LatticeSystem,
    spec: TruncationSpec,
    eps: f64,
    tau: f64,
    xb: usize,
    yb: usize,
    xa: usize,
    ya: usize,
) -> Result<C64> {
    for x in [xb, yb, xa, ya] {
        sys.check_index(x)?;
    }
    Ok(CKernel::new(sys, spec, eps, Sign::Retarded)?.value(tau, xb, yb, xa, ya))
}

/// [`k0_amplitude`] at every grid pair for elapsed time `tau`.
pub fn k0_grid(sys: &LatticeSystem, tau: f64) -> Result<Array2<C64>> {
    let m = sys.spec.m;
    let mut out = Array2::zeros((m, m));
    for yb in 0..m {
        for ya in 0..m {
            out[[yb, ya]] = k0_amplitude(sys, yb, tau, ya, 0.0)?;
        }
    }
    Ok(out)
}

/// `K` assembled from the kernel and `K0` by the double lattice sum.
pub fn k_via_relation(
    sys: &LatticeSystem,
    spec: TruncationSpec,
    eps: f64,
    xb: usize,
    tb: f64,
    xa: usize,
    ta: f64,
) -> Result<C64> {
    sys.check_index(xb)?;
    sys.check_index(xa)?;
    let tau = elapsed(tb, ta)?;
    let kernel = CKernel::new(sys, spec, eps, Sign::Retarded)?;
    Ok(kernel.relation(tau, &k0_grid(sys, tau)?, xb, xa))
}

/// [`k_via_relation`] at every grid pair.
pub fn k_via_relation_grid(
    sys: &LatticeSystem,
    spec: TruncationSpec,
    eps: f64,
    tb: f64,
    ta: f64,
) -> Result<Array2<C64>> {
    let tau = elapsed(tb, ta)?;
    let kernel = CKernel::new(sys, spec, eps, Sign::Retarded)?;
    let k0 = k0_grid(sys, tau)?;
    let m = sys.spec.m;
    let values: Vec<C64> = (0..m * m)
        .into_par_iter()
        .map(|ix| kernel.relation(tau, &k0, ix / m, ix % m))
        .collect();
    Ok(Array2::from_shape_vec((m, m), values).expect("grid shape"))
}

/// [`k_via_relation_grid`] extrapolated to `eps -> 0` over `eps_values`.
pub fn k_via_relation_extrapolated(
    sys: &LatticeSystem,
    spec: TruncationSpec,
    eps_values: &[f64],
    tb: f64,
    ta: f64,
) -> Result<Array2<C64>> {
    if eps_values.is_empty() {
        return Err(invalid("need at least one eps value"));
    }
    let grids = eps_values
        .iter()
        .map(|&eps| k_via_relation_grid(sys, spec, eps, tb, ta))
        .collect::<Result<Vec<_>>>()?;
    let m = sys.spec.m;
    Ok(Array2::from_shape_fn((m, m), |ix| {
        let column: Vec<C64> = grids.iter().map(|g| g[ix]).collect();
        richardson(eps_values, &column)
    }))
}

/// `max |A - B|` over two amplitude grids.
pub fn max_grid_error(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `h * sum_n K(x_n; x_a) conj(K(x_n; x_b))` for a grid of amplitudes.
pub fn unitarity_row(k: &Array2<C64>, h: f64, xa: usize, xb: usize) -> C64 {
    let mut acc = C64::zero();
    for n in 0..k.nrows() {
        acc += k[[n, xa]] * k[[n, xb]].conj();
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well(m: usize, depth: f64) -> LatticeSpec {
        let mut spec = LatticeSpec::free(m, 0.5, 1.0);
        for n in 0..m {
            let x = spec.x(n) - spec.x(m - 1) / 2.0;
            spec.v1[n] = -depth * (-x * x).exp();
            spec.v0[n] = 0.1 * x * x;
        }
        spec
    }

    #[test]
    fn free_spectrum_is_dirichlet_second_difference() {
        let (m, h, mass) = (8, 0.3, 1.7);
        let sys = build_lattice(LatticeSpec::free(m, h, mass)).unwrap();
        for (k, e) in sys.model.energies().iter().enumerate() {
            let expected = (1.0 - ((k + 1) as f64 * std::f64::consts::PI / (m + 1) as f64).cos()) / (mass * h * h);
            assert!((e - expected).abs() < 1e-12 * expected.max(1.0), "{k}: {e} vs {expected}");
        }
        assert!(sys.model.is_free());
    }

    #[test]
    fn basis_is_orthonormal_under_lattice_product() {
        let sys = build_lattice(well(7, 0.8)).unwrap();
        assert!(sys.orthonormality_residual() < 1e-10);
    }

    #[test]
    fn equal_times_give_scaled_identity() {
        let sys = build_lattice(well(5, 0.3)).unwrap();
        for xb in 0..5 {
            for xa in 0..5 {
                let expected = if xb == xa { 1.0 / sys.spec.h } else { 0.0 };
                assert_eq!(k0_amplitude(&sys, xb, 1.0, xa, 1.0).unwrap(), C64::new(expected, 0.0));
                assert!((k_exact(&sys, xb, 1.0, xa, 1.0).unwrap() - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_backward_time_and_bad_index() {
        let sys = build_lattice(well(4, 0.3)).unwrap();
        assert!(k0_amplitude(&sys, 0, 0.0, 1, 1.0).is_err());
        assert!(k0_amplitude(&sys, 4, 1.0, 1, 0.0).is_err());
        assert!(c_kernel(&sys, TruncationSpec::new(1), 0.0, 1.0, 0, 0, 0, 0).is_err());
    }

    #[test]
    fn free_reduction_of_every_route() {
        let sys = build_lattice(LatticeSpec::free(6, 0.4, 1.0)).unwrap();
        let spec = TruncationSpec::new(2);
        let k0 = k0_grid(&sys, 0.8).unwrap();
        let routes = [
            k_exact_grid(&sys, 1.0, 0.2).unwrap(),
            k_truncated_grid(&sys, spec, 1.0, 0.2).unwrap(),
            k_via_relation_grid(&sys, spec, 1e-2, 1.0, 0.2).unwrap(),
        ];
        for r in &routes {
            assert!(max_grid_error(r, &k0) < 1e-12 * linalg::max_abs(&k0).max(1.0));
        }
    }

    #[test]
    fn zeroth_order_relation_returns_k0() {
        let sys = build_lattice(well(5, 0.6)).unwrap();
        let k = k_via_relation_grid(&sys, TruncationSpec::new(0), 1e-2, 0.7, 0.0).unwrap();
        assert!(max_grid_error(&k, &k0_grid(&sys, 0.7).unwrap()) < 1e-12);
    }

    #[test]
    fn lattice_file_round_trip() {
        let spec = well(4, 0.2);
        let text = emit_lattice(&spec);
        assert_eq!(load_lattice(&text).unwrap(), spec);
        let minimal = r#"{"M":2,"x0":0,"h":1,"mass":1,"v0":[0,0],"v1":[0,1]}"#;
        assert_eq!(load_lattice(minimal).unwrap().bc, Boundary::Dirichlet);
        assert!(load_lattice(r#"{"M":2,"x0":0,"h":1,"mass":1,"v0":[0],"v1":[0,1]}"#).is_err());
        assert!(load_lattice(r#"{"M":2,"x0":0,"h":-1,"mass":1,"v0":[0,0],"v1":[0,1]}"#).is_err());
    }
}
