//! Small dense helpers over `Array2<C64>` shared by every module.

use ndarray::{Array1, Array2, Zip};
use num_traits::Zero;

use crate::C64;

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn diag(values: &[C64]) -> Array2<C64> {
    Array2::from_diag(&Array1::from(values.to_vec()))
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    let mut m = 0.0_f64;
    Zip::from(a).and(b).for_each(|x, y| m = m.max((x - y).norm()));
    m
}

pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// max |A - A^dagger| over all entries.
pub fn hermiticity_residual(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            m = m.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    m
}

/// Spectral norm, from the largest eigenvalue of `A^dagger A`.
pub fn spectral_norm(a: &Array2<C64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let mut gram = adjoint(a).dot(a);
    // Round-off can leave the Gram matrix a hair off Hermitian.
    let n = gram.nrows();
    for i in 0..n {
        gram[[i, i]].im = 0.0;
        for j in (i + 1)..n {
            let avg = 0.5 * (gram[[i, j]] + gram[[j, i]].conj());
            gram[[i, j]] = avg;
            gram[[j, i]] = avg.conj();
        }
    }
    match crate::oracle::hermitian_eigendecomposition(&gram) {
        Ok(eig) => eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => frobenius(a),
    }
}

/// Compensated (Kahan-Babuska) accumulator for complex sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: C64,
    comp: C64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self { sum: C64::zero(), comp: C64::zero() }
    }

    pub fn add(&mut self, x: C64) {
        self.sum.re = neumaier(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = neumaier(self.sum.im, x.im, &mut self.comp.im);
    }

    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }
}

fn neumaier(sum: f64, x: f64, comp: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

/// Entrywise compensated sum of equally shaped matrices.
pub fn compensated_matrix_sum<'a, I>(shape: (usize, usize), terms: I) -> Array2<C64>
where
    I: IntoIterator<Item = &'a Array2<C64>>,
{
    let mut acc = Array2::from_elem(shape, CompensatedSum::new());
    for term in terms {
        Zip::from(&mut acc).and(term).for_each(|a, &x| a.add(x));
    }
    acc.mapv(|a| a.value())
}
