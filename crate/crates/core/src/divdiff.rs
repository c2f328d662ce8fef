//! Divided differences of the phase function `f(E) = exp(-i E t)` and of
//! monomials `E^K`, including confluent (repeated-node) limits.
//!
//! The alternating sums over the denominators `d_i` are exactly the
//! partial-fraction form of a divided difference,
//! `(-1)^(i-1) / d_i = 1 / prod_{j != i} (E_i - E_j)`, so every series
//! coefficient of the evolution operator reduces to one call here.
//!
//! Two evaluation routes exist for the phase function:
//!
//! * the direct partial-fraction sum, used when the nodes are well separated
//!   and the sum shows no significant cancellation;
//! * the matrix-function route: the divided differences over a node list are
//!   the first row of `f(J)` where `J` is upper bidiagonal with the nodes on
//!   the diagonal and ones on the superdiagonal. `exp(-i t J)` is evaluated by
//!   scaling and squaring a truncated Taylor series, which stays accurate for
//!   clustered and coincident nodes.

use ndarray::Array2;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::C64;

/// An ordered, non-empty list of finite (possibly complex) energy nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeList(Vec<C64>);

impl NodeList {
    pub fn new(nodes: Vec<C64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("node list must contain at least one node"));
        }
        if nodes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("node list contains a non-finite entry"));
        }
        Ok(Self(nodes))
    }

    pub fn from_real(nodes: &[f64]) -> Result<Self> {
        Self::new(nodes.iter().map(|&e| C64::new(e, 0.0)).collect())
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smallest pairwise distance; `+inf` for a single node.
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, a) in self.0.iter().enumerate() {
            for b in &self.0[i + 1..] {
                gap = gap.min((a - b).norm());
            }
        }
        gap
    }

    /// Adds the same complex offset to every node.
    pub fn shifted(&self, delta: C64) -> NodeList {
        NodeList(self.0.iter().map(|z| z + delta).collect())
    }

    /// Returns a copy with `z` appended.
    pub fn with_node(&self, z: C64) -> NodeList {
        let mut v = self.0.clone();
        v.push(z);
        NodeList(v)
    }
}

/// The time entering the phase function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpec {
    pub t: f64,
}

impl PhaseSpec {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(invalid("phase time must be finite"));
        }
        Ok(Self { t })
    }
}

#[inline]
pub(crate) fn phase_fn(z: C64, t: f64) -> C64 {
    (C64::new(0.0, -t) * z).exp()
}

/// Divided difference of `exp(-i E t)` over `nodes`.
pub fn dd_phase(nodes: &NodeList, phase: PhaseSpec) -> C64 {
    let z = nodes.as_slice();
    let t = phase.t;
    if z.len() == 1 {
        return phase_fn(z[0], t);
    }
    if nodes.min_gap() > 0.1 / t.abs().max(1.0) {
        let (sum, magnitude) = partial_fraction_phase(z, t);
        // Lose at most two digits to cancellation before switching routes.
        if magnitude <= 1e2 * sum.norm() {
            return sum;
        }
    }
    *phase_bidiagonal_row(z, t).last().expect("non-empty")
}

/// Leading divided differences `f[E1], f[E1,E2], ..., f[E1..En]` in one pass.
pub fn dd_phase_table(nodes: &NodeList, phase: PhaseSpec) -> Vec<C64> {
    phase_bidiagonal_row(nodes.as_slice(), phase.t)
}

fn partial_fraction_phase(z: &[C64], t: f64) -> (C64, f64) {
    let mut sum = C64::zero();
    let mut magnitude = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let mut denom = C64::one();
        for (j, &zj) in z.iter().enumerate() {
            if i != j {
                denom *= zi - zj;
            }
        }
        let term = phase_fn(zi, t) / denom;
        magnitude += term.norm();
        sum += term;
    }
    (sum, magnitude)
}

/// First row of `exp(-i t J)` with `J` the node bidiagonal matrix.
fn phase_bidiagonal_row(z: &[C64], t: f64) -> Vec<C64> {
    let n = z.len();
    let mu = z.iter().sum::<C64>() / n as f64;
    let minus_it = C64::new(0.0, -t);

    let mut a = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        a[[k, k]] = minus_it * (z[k] - mu);
        if k + 1 < n {
            a[[k, k + 1]] = minus_it;
        }
    }

    let norm1 = (0..n)
        .map(|col| (0..n).map(|row| a[[row, col]].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    while norm1 / 2f64.powi(squarings as i32) > 0.5 {
        squarings += 1;
    }
    let scaled = a.mapv(|x| x / 2f64.powi(squarings as i32));

    let mut result = crate::linalg::identity(n);
    let mut term = crate::linalg::identity(n);
    for k in 1..200 {
        term = upper_triangular_product(&term, &scaled) / C64::new(k as f64, 0.0);
        result += &term;
        // Entries span many orders of magnitude (the corner is O(t^(n-1)/(n-1)!)),
        // so convergence is judged entrywise.
        let converged = term
            .iter()
            .zip(result.iter())
            .all(|(dt, r)| dt.norm() <= 1e-18 * r.norm());
        if converged {
            break;
        }
    }
    for _ in 0..squarings {
        result = upper_triangular_product(&result, &result);
    }

    let shift = phase_fn(mu, t);
    (0..n).map(|k| result[[0, k]] * shift).collect()
}

fn upper_triangular_product(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut c = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut acc = C64::zero();
            for k in i..=j {
                acc += a[[i, k]] * b[[k, j]];
            }
            c[[i, j]] = acc;
        }
    }
    c
}

/// `d_i` over the node list, `i` one-based:
/// `prod_{j<i} (E_j - E_i) * prod_{k>i} (E_i - E_k)`.
///
/// This is the raw, singular form; coincident nodes are rejected.
pub fn denominator_d(nodes: &NodeList, i: usize) -> Result<C64> {
    let z = nodes.as_slice();
    if i == 0 || i > z.len() {
        return Err(invalid(format!("denominator index {i} out of range 1..={}", z.len())));
    }
    let zi = z[i - 1];
    let mut d = C64::one();
    for (j, &zj) in z.iter().enumerate() {
        let factor = match (j + 1).cmp(&i) {
            std::cmp::Ordering::Less => zj - zi,
            std::cmp::Ordering::Greater => zi - zj,
            std::cmp::Ordering::Equal => continue,
        };
        if factor == C64::zero() {
            return Err(Error::Singular {
                context: format!("denominator d_{i}: node {} coincides with node {i}", j + 1),
                condition: f64::INFINITY,
            });
        }
        d *= factor;
    }
    Ok(d)
}

/// Divided difference of `E^k` over `nodes`.
///
/// Well-separated distinct nodes use the alternating sum over the
/// denominators (see [`dd_monomial_alternating`]) unless it cancels badly;
/// otherwise the complete homogeneous symmetric polynomial
/// `h_{k-n+1}(E_1..E_n)` is used, which also covers repeated nodes.
pub fn dd_monomial(nodes: &NodeList, k: u32) -> C64 {
    let z = nodes.as_slice();
    let scale = z.iter().fold(1.0_f64, |m, w| m.max(w.norm()));
    if nodes.min_gap() >= 1e-3 * scale {
        if let Ok((sum, magnitude)) = alternating_monomial(nodes, k) {
            if magnitude <= 1e2 * sum.norm() {
                return sum;
            }
        }
    }
    complete_homogeneous(z, k)
}

/// `sum_i (-1)^(i-1) E_i^k / d_i` in floating point; distinct nodes only.
pub fn dd_monomial_alternating(nodes: &NodeList, k: u32) -> Result<C64> {
    alternating_monomial(nodes, k).map(|(sum, _)| sum)
}

fn alternating_monomial(nodes: &NodeList, k: u32) -> Result<(C64, f64)> {
    let mut sum = C64::zero();
    let mut magnitude = 0.0;
    for (idx, &zi) in nodes.as_slice().iter().enumerate() {
        let d = denominator_d(nodes, idx + 1)?;
        let sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * zi.powu(k) / d;
        magnitude += term.norm();
        sum += term;
    }
    Ok((sum, magnitude))
}

fn complete_homogeneous(z: &[C64], k: u32) -> C64 {
    let n = z.len() as u32;
    if k + 1 < n {
        return C64::zero();
    }
    let m = (k + 1 - n) as usize;
    let mut h = vec![C64::zero(); m + 1];
    h[0] = C64::one();
    for &x in z {
        for j in 1..=m {
            let prev = h[j - 1];
            h[j] += x * prev;
        }
    }
    h[m]
}

/// Exact rational arithmetic over integer nodes.
pub mod exact {
    use super::*;

    pub fn denominator_d_exact(nodes: &[i64], i: usize) -> Result<BigInt> {
        if i == 0 || i > nodes.len() {
            return Err(invalid(format!("denominator index {i} out of range 1..={}", nodes.len())));
        }
        let ei = nodes[i - 1];
        let mut d = BigInt::one();
        for (j, &ej) in nodes.iter().enumerate() {
            let factor = match (j + 1).cmp(&i) {
                std::cmp::Ordering::Less => ej - ei,
                std::cmp::Ordering::Greater => ei - ej,
                std::cmp::Ordering::Equal => continue,
            };
            if factor == 0 {
                return Err(Error::Singular {
                    context: format!("exact denominator d_{i}: repeated node {ei}"),
                    condition: f64::INFINITY,
                });
            }
            d *= BigInt::from(factor);
        }
        Ok(d)
    }

    /// `sum_i (-1)^(i-1) E_i^k / d_i` evaluated exactly.
    pub fn dd_monomial_exact(nodes: &[i64], k: u32) -> Result<BigRational> {
        if nodes.is_empty() {
            return Err(invalid("node list must contain at least one node"));
        }
        let mut sum = BigRational::zero();
        for (idx, &e) in nodes.iter().enumerate() {
            let d = denominator_d_exact(nodes, idx + 1)?;
            let term = BigRational::new(num_traits::pow(BigInt::from(e), k as usize), d);
            if idx % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        Ok(sum)
    }
}

/// Fixed pool used by the identity suite: twelve distinct integers in [-10, 10].
pub const IDENTITY_POOL: [i64; 12] = [-10, -8, -6, -5, -3, -2, 0, 1, 3, 4, 7, 9];

/// One `(node list, K)` check of the monomial identity.
#[derive(Debug, Clone)]
pub struct IdentityCase {
    pub nodes: Vec<i64>,
    pub k: u32,
    /// 1 when `K = n - 1`, else 0.
    pub expected: i64,
    pub exact: BigRational,
    pub float: C64,
}

impl IdentityCase {
    pub fn exact_holds(&self) -> bool {
        self.exact == BigRational::from_integer(BigInt::from(self.expected))
    }

    pub fn float_error(&self) -> f64 {
        (self.float - C64::new(self.expected as f64, 0.0)).norm()
    }
}

/// Runs the identity `sum_i (-1)^(i-1) E_i^K / d_i = [K == n-1]` for
/// `0 <= K <= n-1` over every subset of `pool` with `1..=max_nodes` elements.
pub fn identity_suite(pool: &[i64], max_nodes: usize) -> Result<Vec<IdentityCase>> {
    let mut sorted = pool.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("identity pool must hold distinct integers"));
    }
    let mut cases = Vec::new();
    for size in 1..=max_nodes.min(pool.len()) {
        for subset in subsets(pool, size) {
            let nodes = NodeList::from_real(&subset.iter().map(|&e| e as f64).collect::<Vec<_>>())?;
            for k in 0..size as u32 {
                cases.push(IdentityCase {
                    exact: exact::dd_monomial_exact(&subset, k)?,
                    float: dd_monomial_alternating(&nodes, k)?,
                    expected: i64::from(k + 1 == size as u32),
                    nodes: subset.clone(),
                    k,
                });
            }
        }
    }
    Ok(cases)
}

/// All `size`-element subsets of `pool`, lexicographic in pool order.
fn subsets(pool: &[i64], size: usize) -> Vec<Vec<i64>> {
    fn walk(pool: &[i64], size: usize, start: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            walk(pool, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    walk(pool, size, 0, &mut Vec::with_capacity(size), &mut out);
    out
}
