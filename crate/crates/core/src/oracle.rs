//! Independent ground truth: Hermitian eigendecomposition by cyclic Jacobi,
//! exact propagators, LU solves and nested time-ordered quadrature of
//! low-order Dyson terms.

use ndarray::Array2;
use num_traits::Zero;

use crate::error::{invalid, Error, Result};
use crate::model::SpectralModel;
use crate::propagator::{OperatorKind, OperatorMatrix, OperatorParams};
use crate::quadrature::gauss_legendre;
use crate::{linalg, C64};

pub const JACOBI_SWEEPS: usize = 30;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: Array2<C64>,
}

impl EigenDecomposition {
    /// `V diag(values) V^dagger`.
    pub fn reconstruct(&self) -> Array2<C64> {
        self.apply_fn(|x| C64::new(x, 0.0))
    }

    /// `V diag(f(values)) V^dagger`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> Array2<C64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let fk = f(lam);
            for r in 0..n {
                scaled[[r, k]] *= fk;
            }
        }
        scaled.dot(&linalg::adjoint(&self.vectors))
    }
}

/// Cyclic Jacobi diagonalisation of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary, then applies a real Givens rotation. Eigenvectors are returned
/// with their largest component real and positive.
pub fn hermitian_eigendecomposition(a: &Array2<C64>) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(invalid(format!("eigendecomposition needs a square matrix, got {:?}", a.dim())));
    }
    let scale = linalg::max_abs(a).max(1.0);
    let residual = linalg::hermiticity_residual(a);
    if residual > 1e-10 * scale {
        return Err(invalid(format!("matrix is not Hermitian (residual {residual:.3e})")));
    }

    let mut m = a.clone();
    let mut v = linalg::identity(n);
    let norm = linalg::frobenius(a);
    let threshold = 1e-14 * norm;

    let off_norm = |m: &Array2<C64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * m[[p, q]].norm_sqr();
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _sweep in 0..JACOBI_SWEEPS {
        if off_norm(&m) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                if mag < 1e-18 * norm {
                    m[[p, q]] = C64::zero();
                    m[[q, p]] = C64::zero();
                    continue;
                }
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        let off = off_norm(&m);
        if off > threshold {
            return Err(Error::NoConvergence { sweeps: JACOBI_SWEEPS, off_norm: off });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].re.total_cmp(&m[[j, j]].re).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[[i, i]].re).collect();
    let mut vectors = Array2::<C64>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let mut best = 0;
        for r in 0..n {
            if v[[r, src]].norm() > v[[best, src]].norm() * (1.0 + 1e-12) {
                best = r;
            }
        }
        let pivot = v[[best, src]];
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { C64::new(1.0, 0.0) };
        for r in 0..n {
            vectors[[r, col]] = v[[r, src]] * phase;
        }
        vectors[[best, col]].im = 0.0;
    }
    Ok(EigenDecomposition { values, vectors })
}

fn rotate(m: &mut Array2<C64>, v: &mut Array2<C64>, p: usize, q: usize) {
    let n = m.nrows();
    let apq = m[[p, q]];
    let mag = apq.norm();
    let unit = (apq / mag).conj();

    // Diagonal phase on index q makes the pivot real and positive.
    for r in 0..n {
        if r != q {
            m[[r, q]] *= unit;
            m[[q, r]] *= unit.conj();
        }
        v[[r, q]] *= unit;
    }

    let app = m[[p, p]].re;
    let aqq = m[[q, q]].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
        sgn / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    m[[p, p]] = C64::new(app - t * mag, 0.0);
    m[[q, q]] = C64::new(aqq + t * mag, 0.0);
    m[[p, q]] = C64::zero();
    m[[q, p]] = C64::zero();
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = m[[r, p]];
        let arq = m[[r, q]];
        let new_rp = arp * c - arq * s;
        let new_rq = arp * s + arq * c;
        m[[r, p]] = new_rp;
        m[[r, q]] = new_rq;
        m[[p, r]] = new_rp.conj();
        m[[q, r]] = new_rq.conj();
    }
    for r in 0..n {
        let vrp = v[[r, p]];
        let vrq = v[[r, q]];
        v[[r, p]] = vrp * c - vrq * s;
        v[[r, q]] = vrp * s + vrq * c;
    }
}

/// `exp(-i H t)` for a Hermitian matrix `H`.
pub fn exact_evolution_matrix(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let eig = hermitian_eigendecomposition(h)?;
    Ok(eig.apply_fn(|lam| crate::divdiff::phase_fn(C64::new(lam, 0.0), t)))
}

/// Exact `exp(-i (H0 + H1) t)` in the unperturbed eigenbasis.
pub fn exact_evolution(model: &SpectralModel, t: f64) -> Result<OperatorMatrix> {
    let entries = exact_evolution_matrix(&model.hamiltonian(), t)?;
    Ok(OperatorMatrix::new(entries, OperatorKind::Propagator, OperatorParams::time(t)))
}

/// Highest Dyson order accepted by [`dyson_term_quadrature`].
pub const MAX_QUADRATURE_ORDER: usize = 3;

/// The `l`-th time-ordered Dyson term
/// `(-i)^l int_{t > t1 > ... > tl > 0} e^{-iH0(t-t1)} H1 e^{-iH0(t1-t2)} ... H1 e^{-iH0 tl}`
/// by tensor Gauss-Legendre on the unit cube, mapped onto the simplex with
/// `t_k = t u_1 ... u_k`.
pub fn dyson_term_quadrature(
    model: &SpectralModel,
    l: usize,
    t: f64,
    npoints: usize,
) -> Result<OperatorMatrix> {
    if l > MAX_QUADRATURE_ORDER {
        return Err(invalid(format!("quadrature oracle supports l <= {MAX_QUADRATURE_ORDER}, got {l}")));
    }
    if npoints < 16 {
        return Err(invalid("quadrature oracle needs at least 16 points per axis"));
    }
    let d = model.dim();
    let energies = model.energies();
    let h1 = model.h1();
    let params = OperatorParams { order: Some(l), ..OperatorParams::time(t) };

    let phases = |s: f64| -> Vec<C64> {
        energies.iter().map(|&e| crate::divdiff::phase_fn(C64::new(e, 0.0), s)).collect()
    };
    if l == 0 {
        return Ok(OperatorMatrix::new(linalg::diag(&phases(t)), OperatorKind::Propagator, params));
    }

    let (x, w) = gauss_legendre(npoints);
    let u: Vec<f64> = x.iter().map(|xi| 0.5 * (xi + 1.0)).collect();
    let wu: Vec<f64> = w.iter().map(|wi| 0.5 * wi).collect();

    let mut acc = Array2::<C64>::zeros((d, d));
    let mut idx = vec![0usize; l];
    let mut times = vec![0.0; l + 2];
    loop {
        // Simplex point and Jacobian t^l prod u_k^(l-k).
        let mut weight = t.powi(l as i32);
        let mut prod = 1.0;
        times[0] = t;
        for k in 0..l {
            let uk = u[idx[k]];
            prod *= uk;
            times[k + 1] = t * prod;
            weight *= wu[idx[k]] * uk.powi((l - 1 - k) as i32);
        }
        times[l + 1] = 0.0;

        // F(t - t1) H1 F(t1 - t2) ... H1 F(tl)
        let mut chain = linalg::diag(&phases(times[0] - times[1]));
        for k in 1..=l {
            let f = phases(times[k] - times[k + 1]);
            let mut next = chain.dot(h1);
            for r in 0..d {
                for c in 0..d {
                    next[[r, c]] *= f[c];
                }
            }
            chain = next;
        }
        acc.scaled_add(C64::new(weight, 0.0), &chain);

        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < npoints {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == l {
                let factor = C64::new(0.0, -1.0).powu(l as u32);
                return Ok(OperatorMatrix::new(acc * factor, OperatorKind::Propagator, params));
            }
        }
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn linear_solve(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(invalid(format!("linear_solve needs a square matrix, got {:?}", a.dim())));
    }
    if b.nrows() != n {
        return Err(invalid(format!("right-hand side has {} rows, expected {n}", b.nrows())));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = linalg::max_abs(a);
    let mut pivots = Vec::with_capacity(n);

    for col in 0..n {
        let (piv_row, piv_mag) = (col..n)
            .map(|r| (r, lu[[r, col]].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        pivots.push(piv_mag);
        if piv_mag <= n as f64 * f64::EPSILON * scale || piv_mag == 0.0 {
            let largest = pivots.iter().cloned().fold(0.0, f64::max);
            return Err(Error::Singular {
                context: format!("linear_solve: pivot {col} vanishes to working precision"),
                condition: if piv_mag > 0.0 { largest / piv_mag } else { f64::INFINITY },
            });
        }
        if piv_row != col {
            for c in 0..n {
                lu.swap([col, c], [piv_row, c]);
            }
            for c in 0..x.ncols() {
                x.swap([col, c], [piv_row, c]);
            }
        }
        let pivot = lu[[col, col]];
        for r in (col + 1)..n {
            let factor = lu[[r, col]] / pivot;
            if factor == C64::zero() {
                continue;
            }
            lu[[r, col]] = factor;
            for c in (col + 1)..n {
                let v = lu[[col, c]];
                lu[[r, c]] -= factor * v;
            }
            for c in 0..x.ncols() {
                let v = x[[col, c]];
                x[[r, c]] -= factor * v;
            }
        }
    }
    for c in 0..x.ncols() {
        for r in (0..n).rev() {
            let mut acc = x[[r, c]];
            for k in (r + 1)..n {
                acc -= lu[[r, k]] * x[[k, c]];
            }
            x[[r, c]] = acc / lu[[r, r]];
        }
    }
    Ok(x)
}
