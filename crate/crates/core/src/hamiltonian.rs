//! The Lagrangian `L = b·p + ½ Tr(σσᵀ M)` and the lower, upper and mixed
//! Hamiltonians over finite control sets.
//!
//! Ties are broken towards the lowest control index everywhere.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix_game;
use crate::sde::ProblemSpec;

/// Arguments `(t, x, p, M)`; `M` is symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianQuery {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Row-major `d × d`.
    pub m: Vec<f64>,
}

impl HamiltonianQuery {
    pub fn new(t: f64, x: Vec<f64>, p: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        let d = x.len();
        if p.len() != d || m.len() != d * d {
            return Err(Error::InvalidInput("query dimensions disagree".into()));
        }
        if x.iter().chain(&p).chain(&m).any(|c| !c.is_finite()) || !t.is_finite() {
            return Err(Error::InvalidInput("query must be finite".into()));
        }
        let mut sym = m;
        for i in 0..d {
            for j in i + 1..d {
                let avg = 0.5 * (sym[i * d + j] + sym[j * d + i]);
                sym[i * d + j] = avg;
                sym[j * d + i] = avg;
            }
        }
        Ok(Self { t, x, p, m: sym })
    }

    /// One-dimensional query.
    pub fn scalar(t: f64, x: f64, p: f64, m: f64) -> Result<Self> {
        Self::new(t, vec![x], vec![p], vec![m])
    }
}

/// Which Hamiltonian a result belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

/// Optimal value and the controls that achieve it.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianResult {
    pub side: Side,
    pub value: f64,
    pub u_star: usize,
    pub v_star: usize,
    /// Lower: the minimizing `v` for each `u`. Upper: the maximizing `u` for each `v`.
    pub responses: Vec<usize>,
}

/// Probability weights over a control set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    weights: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(*w >= -1e-12)) || libm::fabs(sum - 1.0) > 1e-10 {
            return Err(Error::InvalidInput(
                "mixed strategy weights must be a probability vector".into(),
            ));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w.max(0.0)).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedHamiltonian {
    pub value: f64,
    pub mu: MixedStrategy,
    pub nu: MixedStrategy,
    pub duality_gap: f64,
}

/// `½ Tr(a M)` with `a = σσᵀ`.
fn half_trace(sigma: &[f64], d: usize, dw: usize, m: &[f64]) -> f64 {
    let mut tr = 0.0;
    for i in 0..d {
        for j in 0..d {
            let a_ij: f64 = (0..dw).map(|k| sigma[i * dw + k] * sigma[j * dw + k]).sum();
            tr += a_ij * m[j * d + i];
        }
    }
    0.5 * tr
}

pub fn lagrangian(spec: &ProblemSpec, q: &HamiltonianQuery, u: usize, v: usize) -> Result<f64> {
    if u >= spec.u.len() || v >= spec.v.len() {
        return Err(Error::InvalidInput("control index outside its set".into()));
    }
    if q.x.len() != spec.dim {
        return Err(Error::InvalidInput("query dimension does not match the problem".into()));
    }
    let mut b = vec![0.0; spec.dim];
    let mut s = vec![0.0; spec.dim * spec.dim_w];
    lagrangian_with(spec, q, u, v, &mut b, &mut s)
}

fn lagrangian_with(
    spec: &ProblemSpec,
    q: &HamiltonianQuery,
    u: usize,
    v: usize,
    b: &mut [f64],
    s: &mut [f64],
) -> Result<f64> {
    spec.drift_into(q.t, &q.x, u, v, b)?;
    spec.diffusion_into(q.t, &q.x, u, v, s)?;
    let drift: f64 = b.iter().zip(&q.p).map(|(b, p)| b * p).sum();
    Ok(drift + half_trace(s, spec.dim, spec.dim_w, &q.m))
}

/// Row-major `|U| × |V|` matrix of `L(q; u_i, v_j)`.
pub fn lagrangian_matrix(spec: &ProblemSpec, q: &HamiltonianQuery) -> Result<Vec<f64>> {
    if q.x.len() != spec.dim {
        return Err(Error::InvalidInput("query dimension does not match the problem".into()));
    }
    let mut b = vec![0.0; spec.dim];
    let mut s = vec![0.0; spec.dim * spec.dim_w];
    let (nu, nv) = (spec.u.len(), spec.v.len());
    let mut out = Vec::with_capacity(nu * nv);
    for u in 0..nu {
        for v in 0..nv {
            out.push(lagrangian_with(spec, q, u, v, &mut b, &mut s)?);
        }
    }
    Ok(out)
}

/// `sup_u inf_v` over a row-major matrix; lowest-index ties.
pub fn sup_inf(l: &[f64], nu: usize, nv: usize) -> (f64, usize, Vec<usize>) {
    let mut responses = Vec::with_capacity(nu);
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for u in 0..nu {
        let row = &l[u * nv..(u + 1) * nv];
        let mut vmin = 0;
        for v in 1..nv {
            if row[v] < row[vmin] {
                vmin = v;
            }
        }
        responses.push(vmin);
        if row[vmin] > best {
            best = row[vmin];
            arg = u;
        }
    }
    (best, arg, responses)
}

/// `inf_v sup_u` over a row-major matrix; lowest-index ties.
pub fn inf_sup(l: &[f64], nu: usize, nv: usize) -> (f64, usize, Vec<usize>) {
    let mut responses = Vec::with_capacity(nv);
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for v in 0..nv {
        let mut umax = 0;
        for u in 1..nu {
            if l[u * nv + v] > l[umax * nv + v] {
                umax = u;
            }
        }
        responses.push(umax);
        let val = l[umax * nv + v];
        if val < best {
            best = val;
            arg = v;
        }
    }
    (best, arg, responses)
}

/// `H⁻ = sup_u inf_v L`.
pub fn hamiltonian_lower(spec: &ProblemSpec, q: &HamiltonianQuery) -> Result<HamiltonianResult> {
    let l = lagrangian_matrix(spec, q)?;
    let (value, u_star, responses) = sup_inf(&l, spec.u.len(), spec.v.len());
    Ok(HamiltonianResult {
        side: Side::Lower,
        value,
        u_star,
        v_star: responses[u_star],
        responses,
    })
}

/// `H⁺ = inf_v sup_u L`.
pub fn hamiltonian_upper(spec: &ProblemSpec, q: &HamiltonianQuery) -> Result<HamiltonianResult> {
    let l = lagrangian_matrix(spec, q)?;
    let (value, v_star, responses) = inf_sup(&l, spec.u.len(), spec.v.len());
    Ok(HamiltonianResult {
        side: Side::Upper,
        value,
        u_star: responses[v_star],
        v_star,
        responses,
    })
}

/// `H⁺ − H⁻`; an negative gap beyond `1e-10` is an optimizer bug.
pub fn isaacs_gap(spec: &ProblemSpec, q: &HamiltonianQuery) -> Result<f64> {
    let l = lagrangian_matrix(spec, q)?;
    let (lower, _, _) = sup_inf(&l, spec.u.len(), spec.v.len());
    let (upper, _, _) = inf_sup(&l, spec.u.len(), spec.v.len());
    let gap = upper - lower;
    if gap < -1e-10 {
        return Err(Error::Invariant(alloc::format!("negative Isaacs gap {gap}")));
    }
    Ok(gap.max(0.0))
}

/// Value of the matrix game `A[i][j] = L(q; u_i, v_j)` with its equilibrium.
pub fn hamiltonian_mixed(spec: &ProblemSpec, q: &HamiltonianQuery) -> Result<MixedHamiltonian> {
    let l = lagrangian_matrix(spec, q)?;
    let sol = matrix_game::solve(&l, spec.u.len(), spec.v.len())?;
    Ok(MixedHamiltonian {
        value: sol.value,
        mu: MixedStrategy::new(sol.row)?,
        nu: MixedStrategy::new(sol.col)?,
        duality_gap: sol.duality_gap,
    })
}
