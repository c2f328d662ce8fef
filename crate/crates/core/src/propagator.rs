//! Series coefficients `A_l(t)` of the time-evolution operator, the truncated
//! evolution `U_N(t) = sum_{l<=N} A_l(t)`, and the eps-regularised
//! resolvent-product form used as a cross-check.
//!
//! In the unperturbed eigenbasis
//!
//! ```text
//! A_l(t)[g, g'] = sum over paths g = g_1, g_2, ..., g_{l+1} = g'
//!                 f[E_{g_1}, ..., E_{g_{l+1}}] * prod_j H1[g_j, g_{j+1}]
//! ```
//!
//! with `f[...]` the divided difference of `exp(-i E t)`. Repeated indices
//! along a path take the confluent value, which carries the secular
//! `t^m exp(-i E t)` terms.

use std::collections::HashMap;

use ndarray::Array2;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divdiff::{dd_phase, phase_fn, NodeList, PhaseSpec};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CompensatedSum};
use crate::model::SpectralModel;
use crate::{Sign, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Propagator,
    Resolvent,
    GreenTd,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub time: Option<f64>,
    pub energy: Option<f64>,
    pub eps: Option<f64>,
    pub sign: Option<Sign>,
    pub order: Option<usize>,
}

impl OperatorParams {
    pub fn time(t: f64) -> Self {
        Self { time: Some(t), ..Self::default() }
    }
}

/// A dense complex matrix in the unperturbed eigenbasis, tagged with what it
/// represents.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: Array2<C64>,
    pub kind: OperatorKind,
    pub params: OperatorParams,
}

impl OperatorMatrix {
    pub fn new(entries: Array2<C64>, kind: OperatorKind, params: OperatorParams) -> Self {
        debug_assert!(entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self { entries, kind, params }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        linalg::max_abs_diff(&self.entries, &other.entries)
    }

    /// `max |U^dagger U - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = linalg::adjoint(&self.entries).dot(&self.entries);
        linalg::max_abs_diff(&gram, &linalg::identity(self.dim()))
    }
}

/// Highest perturbation order retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub order: usize,
}

impl TruncationSpec {
    pub fn new(order: usize) -> Self {
        Self { order }
    }
}

pub const TUPLE_BUDGET_ENV: &str = "DYSONPROP_TUPLE_BUDGET";
pub const DEFAULT_TUPLE_BUDGET: u64 = 2_000_000;

/// Upper bound on the number of index tuples a single `a_matrix` call may
/// enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleBudget(pub u64);

impl Default for TupleBudget {
    fn default() -> Self {
        TupleBudget(DEFAULT_TUPLE_BUDGET)
    }
}

impl TupleBudget {
    /// The default, overridden by `DYSONPROP_TUPLE_BUDGET` when it parses.
    pub fn from_env() -> Self {
        std::env::var(TUPLE_BUDGET_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .map(TupleBudget)
            .unwrap_or_default()
    }

    pub fn check(self, dim: usize, order: usize) -> Result<()> {
        let tuples = (dim as u128).checked_pow(order as u32 + 1).unwrap_or(u128::MAX);
        if tuples > u128::from(self.0) {
            return Err(Error::BudgetExceeded { tuples, budget: self.0 });
        }
        Ok(())
    }
}

fn free_phases(model: &SpectralModel, t: f64) -> Vec<C64> {
    model.energies().iter().map(|&e| phase_fn(C64::new(e, 0.0), t)).collect()
}

fn check_indices(model: &SpectralModel, g: usize, gp: usize) -> Result<()> {
    let d = model.dim();
    if g >= d || gp >= d {
        return Err(invalid(format!("indices ({g}, {gp}) out of range for dimension {d}")));
    }
    Ok(())
}

/// One coefficient `A_l^{g gp}(t)` by plain enumeration of the interior
/// indices, one divided difference per path.
pub fn a_coefficient(model: &SpectralModel, l: usize, g: usize, gp: usize, t: f64) -> Result<C64> {
    check_indices(model, g, gp)?;
    let phase = PhaseSpec::new(t)?;
    if l == 0 {
        return Ok(if g == gp { free_phases(model, t)[g] } else { C64::zero() });
    }
    TupleBudget::from_env().check(model.dim(), l.saturating_sub(2))?;

    let d = model.dim();
    let e = model.energies();
    let h1 = model.h1();
    let mut path = vec![g; l + 1];
    path[l] = gp;
    let interior = l - 1;
    let mut idx = vec![0usize; interior];
    let mut acc = CompensatedSum::new();
    loop {
        for (k, &i) in idx.iter().enumerate() {
            path[k + 1] = i;
        }
        let weight: C64 = path.windows(2).map(|w| h1[[w[0], w[1]]]).product();
        if weight != C64::zero() {
            let nodes = NodeList::from_real(&path.iter().map(|&i| e[i]).collect::<Vec<_>>())?;
            acc.add(dd_phase(&nodes, phase) * weight);
        }
        let mut k = 0;
        loop {
            if k == interior {
                return Ok(acc.value());
            }
            idx[k] += 1;
            if idx[k] < d {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `A_l(t)` with the default (or environment) tuple budget.
pub fn a_matrix(model: &SpectralModel, l: usize, t: f64) -> Result<OperatorMatrix> {
    a_matrix_with_budget(model, l, t, TupleBudget::from_env())
}

/// `A_l(t)` as a matrix.
///
/// The divided difference only depends on the multiset of energies along a
/// path, so it is computed once per multiset of indices and shared by every
/// path that visits the same levels. Paths whose coupling product vanishes
/// are pruned as soon as a zero factor appears.
pub fn a_matrix_with_budget(
    model: &SpectralModel,
    l: usize,
    t: f64,
    budget: TupleBudget,
) -> Result<OperatorMatrix> {
    let phase = PhaseSpec::new(t)?;
    let params = OperatorParams { order: Some(l), ..OperatorParams::time(t) };
    let d = model.dim();
    if l == 0 {
        let entries = linalg::diag(&free_phases(model, t));
        return Ok(OperatorMatrix::new(entries, OperatorKind::Propagator, params));
    }
    budget.check(d, l)?;

    let table = multiset_table(model, l + 1, phase)?;
    let h1 = model.h1();
    let rows: Vec<Vec<C64>> = (0..d)
        .into_par_iter()
        .map(|g| {
            let mut acc = vec![CompensatedSum::new(); d];
            let mut path = Vec::with_capacity(l + 1);
            path.push(g);
            let mut key = Vec::with_capacity(l + 1);
            walk_paths(h1, &table, l, &mut path, C64::new(1.0, 0.0), &mut key, &mut acc);
            acc.iter().map(CompensatedSum::value).collect()
        })
        .collect();

    let entries = Array2::from_shape_fn((d, d), |(r, c)| rows[r][c]);
    Ok(OperatorMatrix::new(entries, OperatorKind::Propagator, params))
}

fn walk_paths(
    h1: &Array2<C64>,
    table: &HashMap<Vec<u32>, C64>,
    l: usize,
    path: &mut Vec<usize>,
    weight: C64,
    key: &mut Vec<u32>,
    acc: &mut [CompensatedSum],
) {
    let last = *path.last().expect("path starts non-empty");
    if path.len() == l + 1 {
        key.clear();
        key.extend(path.iter().map(|&i| i as u32));
        key.sort_unstable();
        acc[last].add(table[key.as_slice()] * weight);
        return;
    }
    for next in 0..h1.ncols() {
        let coupling = h1[[last, next]];
        if coupling == C64::zero() {
            continue;
        }
        path.push(next);
        walk_paths(h1, table, l, path, weight * coupling, key, acc);
        path.pop();
    }
}

/// Divided differences for every multiset of `size` level indices.
fn multiset_table(model: &SpectralModel, size: usize, phase: PhaseSpec) -> Result<HashMap<Vec<u32>, C64>> {
    let d = model.dim() as u32;
    let mut keys = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn combos(d: u32, size: usize, start: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            combos(d, size, i, cur, out);
            cur.pop();
        }
    }
    combos(d, size, 0, &mut cur, &mut keys);

    let e = model.energies();
    let values: Vec<C64> = keys
        .par_iter()
        .map(|k| {
            let nodes: Vec<f64> = k.iter().map(|&i| e[i as usize]).collect();
            NodeList::from_real(&nodes).map(|n| dd_phase(&n, phase))
        })
        .collect::<Result<_>>()?;
    Ok(keys.into_iter().zip(values).collect())
}

/// `U_N(t) = sum_{l=0}^{N} A_l(t)`, accumulated order by order with
/// compensated summation.
pub fn truncated_evolution(model: &SpectralModel, spec: TruncationSpec, t: f64) -> Result<OperatorMatrix> {
    let budget = TupleBudget::from_env();
    budget.check(model.dim(), spec.order)?;
    let terms = (0..=spec.order)
        .map(|l| a_matrix_with_budget(model, l, t, budget).map(|m| m.entries))
        .collect::<Result<Vec<_>>>()?;
    let d = model.dim();
    let entries = linalg::compensated_matrix_sum((d, d), terms.iter());
    let params = OperatorParams { order: Some(spec.order), ..OperatorParams::time(t) };
    Ok(OperatorMatrix::new(entries, OperatorKind::Propagator, params))
}

/// Order-`l` part of the resolvent-product form
///
/// ```text
/// sum_{i=1}^{l+1} sum_{g_i} (G0 H1)^{i-1} exp(-i H0 t) |g_i><g_i| (H1 G0)^{l+1-i}
/// ```
///
/// The chain position `j` carries the node `E_{g_j} - i s eps (j-1)`
/// (`s = +1` retarded, `-1` advanced), so the resolvent between the
/// propagator at position `i` and position `j` is
/// `1 / (E_{g_i} - H0 + i s eps (j - i))` and the propagator itself is
/// evaluated at the shifted node. A path revisiting a level therefore never
/// hits a zero denominator, and the limit `eps -> 0` is the confluent
/// divided difference. Intermediate terms grow like `1/eps`.
pub fn epsilon_form_term(model: &SpectralModel, l: usize, t: f64, eps: f64, sign: Sign) -> Result<Array2<C64>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let d = model.dim();
    if l == 0 {
        return Ok(linalg::diag(&free_phases(model, t)));
    }
    let terms = epsilon_form_pieces(model, l, eps, sign);
    let mut acc = Array2::from_elem((d, d), CompensatedSum::new());
    for piece in &terms {
        let weight = piece.damping(t, eps, sign) * phase_fn(C64::new(model.energies()[piece.level], 0.0), t);
        for r in 0..d {
            for c in 0..d {
                acc[[r, c]].add(weight * piece.left[r] * piece.right[c]);
            }
        }
    }
    Ok(acc.mapv(|a| a.value()))
}

/// One `(l, i, g_i)` contribution of the resolvent-product form, split into
/// the column `(G0 H1)^{i-1} |g_i>` and the row `<g_i| (H1 G0)^{l+1-i}`.
#[derive(Debug, Clone)]
pub struct ResolventChain {
    pub order: usize,
    /// One-based position of the propagator in the chain.
    pub position: usize,
    pub level: usize,
    pub left: Vec<C64>,
    pub right: Vec<C64>,
}

impl ResolventChain {
    /// `exp(-s eps (i-1) t)`: the shift of the propagator node.
    pub fn damping(&self, t: f64, eps: f64, sign: Sign) -> C64 {
        C64::new((-sign.factor() * eps * (self.position - 1) as f64 * t).exp(), 0.0)
    }
}

pub fn epsilon_form_pieces(model: &SpectralModel, l: usize, eps: f64, sign: Sign) -> Vec<ResolventChain> {
    let d = model.dim();
    let e = model.energies();
    let h1 = model.h1();
    let s = sign.factor();
    let resolvent = |g: usize, offset: isize| -> Vec<C64> {
        (0..d)
            .map(|a| C64::new(1.0, 0.0) / C64::new(e[g] - e[a], s * eps * offset as f64))
            .collect()
    };

    let mut pieces = Vec::with_capacity((l + 1) * d);
    for i in 1..=l + 1 {
        for g in 0..d {
            let mut left = vec![C64::zero(); d];
            left[g] = C64::new(1.0, 0.0);
            for j in (1..i).rev() {
                let gres = resolvent(g, j as isize - i as isize);
                let hv = h1.dot(&ndarray::Array1::from(left.clone()));
                left = (0..d).map(|a| gres[a] * hv[a]).collect();
            }
            let mut right = vec![C64::zero(); d];
            right[g] = C64::new(1.0, 0.0);
            for j in (i + 1)..=(l + 1) {
                let gres = resolvent(g, j as isize - i as isize);
                let vh = ndarray::Array1::from(right.clone()).dot(h1);
                right = (0..d).map(|a| vh[a] * gres[a]).collect();
            }
            pieces.push(ResolventChain { order: l, position: i, level: g, left, right });
        }
    }
    pieces
}

/// `sum_{l<=N}` of [`epsilon_form_term`] at a single `eps`.
pub fn epsilon_form_evolution(
    model: &SpectralModel,
    spec: TruncationSpec,
    t: f64,
    eps: f64,
    sign: Sign,
) -> Result<OperatorMatrix> {
    let terms = (0..=spec.order)
        .map(|l| epsilon_form_term(model, l, t, eps, sign))
        .collect::<Result<Vec<_>>>()?;
    let d = model.dim();
    let entries = linalg::compensated_matrix_sum((d, d), terms.iter());
    let params = OperatorParams {
        eps: Some(eps),
        sign: Some(sign),
        order: Some(spec.order),
        ..OperatorParams::time(t)
    };
    Ok(OperatorMatrix::new(entries, OperatorKind::Propagator, params))
}

/// Polynomial extrapolation to `eps = 0` (Neville) through `(eps_k, v_k)`.
pub fn richardson(eps: &[f64], values: &[C64]) -> C64 {
    assert_eq!(eps.len(), values.len(), "one value per eps");
    assert!(!eps.is_empty(), "need at least one point");
    if values.iter().all(|v| *v == values[0]) {
        return values[0];
    }
    let mut p = values.to_vec();
    let n = eps.len();
    for m in 1..n {
        for i in 0..(n - m) {
            let j = i + m;
            p[i] = (eps[i] * p[i + 1] - eps[j] * p[i]) / (eps[i] - eps[j]);
        }
    }
    p[0]
}

/// Entrywise [`richardson`] over equally shaped matrices.
pub fn richardson_matrix(eps: &[f64], values: &[Array2<C64>]) -> Array2<C64> {
    let shape = values[0].dim();
    Array2::from_shape_fn(shape, |ix| {
        let column: Vec<C64> = values.iter().map(|v| v[ix]).collect();
        richardson(eps, &column)
    })
}

/// The halving ladder `{eps, eps/2, eps/4}`.
pub fn halving_ladder(eps: f64) -> [f64; 3] {
    [eps, eps / 2.0, eps / 4.0]
}

/// Extrapolates [`epsilon_form_evolution`] to `eps -> 0` over `eps_values`.
pub fn epsilon_form_extrapolated(
    model: &SpectralModel,
    spec: TruncationSpec,
    t: f64,
    eps_values: &[f64],
    sign: Sign,
) -> Result<OperatorMatrix> {
    let values = eps_values
        .iter()
        .map(|&eps| epsilon_form_evolution(model, spec, t, eps, sign).map(|m| m.entries))
        .collect::<Result<Vec<_>>>()?;
    let params = OperatorParams { eps: Some(0.0), sign: Some(sign), order: Some(spec.order), ..OperatorParams::time(t) };
    Ok(OperatorMatrix::new(richardson_matrix(eps_values, &values), OperatorKind::Propagator, params))
}
