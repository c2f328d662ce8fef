//! Stationary resolvents, Dyson partial sums and the time-dependent complete
//! Green operator, with quadrature checks of the Fourier pair
//!
//! ```text
//! G_E = int dt G(t, t') e^{iE(t-t')}        G(t, t') = (1/2pi) int dE G_E e^{-iE(t-t')}
//! ```
//!
//! Both sides are compared at matched finite `eps`: the time side carries
//! the damping `exp(-eps |tau|)`, which is the same as evaluating the
//! stationary side at `E +- i eps`.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::SpectralModel;
use crate::oracle::{self, linear_solve};
use crate::propagator::{truncated_evolution, OperatorKind, OperatorMatrix, OperatorParams, TruncationSpec};
use crate::quadrature::QuadratureSpec;
use crate::special::expint_e1;
use crate::{linalg, Sign, C64};

/// Default regulator for quadrature experiments.
pub const DEFAULT_EPS: f64 = 0.1;
/// Largest tolerated `exp(-eps T)` at the end of a time-domain integral.
pub const DAMPING_CUTOFF: f64 = 1e-8;
/// Smallest energy margin around the spectrum, in units of eps.
pub const MIN_MARGIN_IN_EPS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventQuery {
    pub energy: f64,
    pub sign: Sign,
    pub eps: f64,
}

impl ResolventQuery {
    pub fn new(energy: f64, sign: Sign, eps: f64) -> Result<Self> {
        if !energy.is_finite() {
            return Err(invalid("resolvent energy must be finite"));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { energy, sign, eps })
    }

    /// `E +- i eps`.
    pub fn z(&self) -> C64 {
        C64::new(self.energy, self.sign.factor() * self.eps)
    }

    fn params(&self) -> OperatorParams {
        OperatorParams { energy: Some(self.energy), eps: Some(self.eps), sign: Some(self.sign), ..Default::default() }
    }
}

/// `G0 = 1/(E - H0 +- i eps)`, diagonal.
pub fn unperturbed_resolvent(model: &SpectralModel, q: ResolventQuery) -> OperatorMatrix {
    let z = q.z();
    let diag: Vec<C64> = model.energies().iter().map(|&e| C64::new(1.0, 0.0) / (z - e)).collect();
    OperatorMatrix::new(linalg::diag(&diag), OperatorKind::Resolvent, q.params())
}

/// `(E - H +- i eps)`.
fn shifted_operator(model: &SpectralModel, z: C64) -> Array2<C64> {
    linalg::identity(model.dim()).mapv(|x| x * z) - model.hamiltonian()
}

/// `G = 1/(E - H +- i eps)` by a dense LU solve.
pub fn complete_resolvent_direct(model: &SpectralModel, q: ResolventQuery) -> Result<OperatorMatrix> {
    let a = shifted_operator(model, q.z());
    let eye = linalg::identity(model.dim());
    let x = linear_solve(&a, &eye)?;
    let residual = linalg::max_abs_diff(&a.dot(&x), &eye);
    if residual > 1e-10 {
        return Err(Error::Singular {
            context: format!("complete resolvent residual {residual:.3e} exceeds 1e-10"),
            condition: linalg::spectral_norm(&a) * linalg::spectral_norm(&x),
        });
    }
    Ok(OperatorMatrix::new(x, OperatorKind::Resolvent, q.params()))
}

/// A Dyson partial sum together with its convergence diagnostics.
#[derive(Debug, Clone)]
pub struct DysonPartial {
    pub resolvent: OperatorMatrix,
    /// Spectral norm of `H1 G0`.
    pub rho: f64,
    /// Spectral norm of `G0`.
    pub g0_norm: f64,
}

impl DysonPartial {
    /// `||G0|| rho^{N+1} / (1 - rho)`, when the series converges.
    pub fn tail_bound(&self) -> Option<f64> {
        let n = self.resolvent.params.order.unwrap_or(0) as i32;
        (self.rho < 1.0).then(|| self.g0_norm * self.rho.powi(n + 1) / (1.0 - self.rho))
    }
}

/// `G0 sum_{l=0}^{N} (H1 G0)^l`. Divergence (`rho >= 1`) is reported through
/// [`DysonPartial::rho`], not as an error.
pub fn dyson_partial(model: &SpectralModel, q: ResolventQuery, order: usize) -> DysonPartial {
    let g0 = unperturbed_resolvent(model, q).entries;
    let kernel = model.h1().dot(&g0);
    let mut power = g0.clone();
    let mut terms = vec![power.clone()];
    for _ in 0..order {
        power = power.dot(&kernel);
        terms.push(power.clone());
    }
    let d = model.dim();
    let sum = linalg::compensated_matrix_sum((d, d), terms.iter());
    let params = OperatorParams { order: Some(order), ..q.params() };
    DysonPartial {
        resolvent: OperatorMatrix::new(sum, OperatorKind::Resolvent, params),
        rho: linalg::spectral_norm(&kernel),
        g0_norm: linalg::spectral_norm(&g0),
    }
}

/// Step function with `theta(0) = 1/2`.
fn theta(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// `G^{(+)}(t, t') = -i theta(t - t') U_N(t - t')` and
/// `G^{(-)}(t, t') = +i theta(t' - t) U_N(t - t')`.
pub fn timedep_green(
    model: &SpectralModel,
    spec: TruncationSpec,
    t: f64,
    tp: f64,
    sign: Sign,
) -> Result<OperatorMatrix> {
    let tau = t - tp;
    let step = theta(sign.factor() * tau);
    let params = OperatorParams { sign: Some(sign), order: Some(spec.order), ..OperatorParams::time(tau) };
    if step == 0.0 {
        let d = model.dim();
        return Ok(OperatorMatrix::new(Array2::zeros((d, d)), OperatorKind::GreenTd, params));
    }
    let u = truncated_evolution(model, spec, tau)?;
    let prefactor = C64::new(0.0, -sign.factor() * step);
    Ok(OperatorMatrix::new(u.entries * prefactor, OperatorKind::GreenTd, params))
}

/// `int dtau G(tau) e^{i E tau} e^{-eps |tau|}` by quadrature over
/// `tau in [0, T]` (retarded) or `[-T, 0]` (advanced), where `quad` is given
/// on `[0, T]`.
pub fn inverse_fourier_check(
    model: &SpectralModel,
    spec: TruncationSpec,
    energy: f64,
    sign: Sign,
    eps: f64,
    quad: QuadratureSpec,
) -> Result<OperatorMatrix> {
    let q = ResolventQuery::new(energy, sign, eps)?;
    if quad.a != 0.0 {
        return Err(Error::QuadratureDomain(format!(
            "time domain must start at 0 (mirrored for the advanced sign), got [{}, {}]",
            quad.a, quad.b
        )));
    }
    let damping = (-eps * quad.b).exp();
    if damping > DAMPING_CUTOFF {
        return Err(Error::QuadratureDomain(format!(
            "exp(-eps T) = {damping:.3e} exceeds {DAMPING_CUTOFF:e}; lengthen the domain"
        )));
    }
    let s = sign.factor();
    let (nodes, weights) = quad.nodes_weights();
    let prefactor = C64::new(0.0, -s);
    let contributions = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&x, &w)| {
            let tau = s * x;
            let u = truncated_evolution(model, spec, tau)?;
            let factor = prefactor * C64::new(0.0, energy * tau).exp() * (-eps * x).exp() * w;
            Ok(u.entries * factor)
        })
        .collect::<Result<Vec<_>>>()?;
    let d = model.dim();
    let sum = linalg::compensated_matrix_sum((d, d), contributions.iter());
    let params = OperatorParams { order: Some(spec.order), ..q.params() };
    Ok(OperatorMatrix::new(sum, OperatorKind::Resolvent, params))
}

/// `(1/2pi) int dE G_E e^{-i E tau}` over the quadrature window, plus the
/// region outside the window from the large-`E` expansion of `G_E` in powers
/// of `1/(E - c +- i eps)` with `c = tr(H)/D`. The stationary side is the direct resolvent, or the Dyson
/// partial sum of the given order.
pub fn forward_fourier(
    model: &SpectralModel,
    quad: QuadratureSpec,
    t: f64,
    tp: f64,
    sign: Sign,
    eps: f64,
    order: Option<usize>,
) -> Result<OperatorMatrix> {
    ResolventQuery::new(0.0, sign, eps)?;
    let tau = t - tp;
    if tau == 0.0 || !tau.is_finite() {
        return Err(invalid("forward transform needs a finite nonzero t - t'"));
    }
    let h = model.hamiltonian();
    let spectrum = oracle::hermitian_eigendecomposition(&h)?.values;
    let lo = spectrum.iter().chain(model.energies()).cloned().fold(f64::INFINITY, f64::min);
    let hi = spectrum.iter().chain(model.energies()).cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = (lo - quad.a).min(quad.b - hi);
    if margin < MIN_MARGIN_IN_EPS * eps {
        return Err(Error::QuadratureDomain(format!(
            "energy window [{}, {}] leaves a margin of {margin:.3e} around the spectrum [{lo}, {hi}]; need >= {}",
            quad.a,
            quad.b,
            MIN_MARGIN_IN_EPS * eps
        )));
    }

    let d = model.dim();
    let (nodes, weights) = quad.nodes_weights();
    let contributions = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&e, &w)| {
            let q = ResolventQuery::new(e, sign, eps)?;
            let g = match order {
                None => complete_resolvent_direct(model, q)?.entries,
                Some(n) => dyson_partial(model, q, n).resolvent.entries,
            };
            Ok(g * (C64::new(0.0, -e * tau).exp() * w))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = linalg::compensated_matrix_sum((d, d), contributions.iter());

    let center = h.diag().iter().map(|z| z.re).sum::<f64>() / d as f64;
    let tails = outside_window_integrals(quad.a, quad.b, center, sign.factor() * eps, tau, TAIL_MOMENTS);
    for (moment, tail) in resolvent_moments(model, center, order, TAIL_MOMENTS).iter().zip(tails) {
        sum.scaled_add(tail, moment);
    }
    sum.mapv_inplace(|z| z / std::f64::consts::TAU);

    let params = OperatorParams { eps: Some(eps), sign: Some(sign), order, ..OperatorParams::time(tau) };
    Ok(OperatorMatrix::new(sum, OperatorKind::GreenTd, params))
}

/// Number of terms of the large-`E` expansion used outside the window.
const TAIL_MOMENTS: usize = 5;

/// Moments `M_n` of `G(z) = sum_n M_n / (z - c)^{n+1}`, i.e. `(H - c)^n`, or
/// for a Dyson partial sum the part of `(H0 - c + H1)^n` with at most `order`
/// factors of `H1`.
fn resolvent_moments(model: &SpectralModel, center: f64, order: Option<usize>, count: usize) -> Vec<Array2<C64>> {
    let d = model.dim();
    let shifted_h0 = linalg::diag(&model.energies().iter().map(|&e| C64::new(e - center, 0.0)).collect::<Vec<_>>());
    let max_degree = order.unwrap_or(count).min(count);
    // by_degree[k] holds the terms with exactly k factors of H1
    let mut by_degree = vec![linalg::identity(d)];
    let mut moments = Vec::with_capacity(count);
    for _ in 0..count {
        moments.push(linalg::compensated_matrix_sum((d, d), by_degree.iter()));
        let mut next = Vec::with_capacity(by_degree.len() + 1);
        for k in 0..=by_degree.len().min(max_degree) {
            let mut term = Array2::zeros((d, d));
            if let Some(p) = by_degree.get(k) {
                term = term + shifted_h0.dot(p);
            }
            if k > 0 {
                term = term + model.h1().dot(&by_degree[k - 1]);
            }
            next.push(term);
        }
        by_degree = next;
    }
    moments
}

/// `J_n = (int_{-inf}^{a} + int_{b}^{inf}) dE e^{-i E tau} / (E - c + i s)^{n+1}`
/// for `n < count`. `J_0` is an exponential integral; higher orders follow by
/// integration by parts,
/// `J_n = (F_n(b) - F_n(a)) / n - (i tau / n) J_{n-1}` with
/// `F_n(E) = e^{-i E tau} (E - c + i s)^{-n}`.
fn outside_window_integrals(a: f64, b: f64, c: f64, s: f64, tau: f64, count: usize) -> Vec<C64> {
    let upper = C64::new(b - c, s);
    let lower = C64::new(a - c, s);
    let i_tau = C64::new(0.0, tau);
    let prefactor = C64::new(0.0, -c * tau).exp() * (-s * tau).exp();
    let mut out = vec![prefactor * (expint_e1(i_tau * upper) - expint_e1(i_tau * lower))];
    let phase_a = C64::new(0.0, -a * tau).exp();
    let phase_b = C64::new(0.0, -b * tau).exp();
    for n in 1..count {
        let nf = n as f64;
        let boundary = phase_b * upper.powi(-(n as i32)) - phase_a * lower.powi(-(n as i32));
        let previous = out[n - 1];
        out.push(boundary / nf - i_tau * previous / nf);
    }
    out
}

/// `-+ i theta(+-tau) exp(-i H tau) exp(-eps |tau|)` from exact diagonalisation.
pub fn damped_green_oracle(model: &SpectralModel, tau: f64, sign: Sign, eps: f64) -> Result<OperatorMatrix> {
    let step = theta(sign.factor() * tau);
    let d = model.dim();
    let params = OperatorParams { eps: Some(eps), sign: Some(sign), ..OperatorParams::time(tau) };
    if step == 0.0 {
        return Ok(OperatorMatrix::new(Array2::zeros((d, d)), OperatorKind::GreenTd, params));
    }
    let u = oracle::exact_evolution_matrix(&model.hamiltonian(), tau)?;
    let factor = C64::new(0.0, -sign.factor() * step) * (-eps * tau.abs()).exp();
    Ok(OperatorMatrix::new(u * factor, OperatorKind::GreenTd, params))
}

