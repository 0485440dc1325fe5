//! Explicit monotone finite-difference solver for the lower and upper Isaacs
//! equations `−v_t − H(t, x, v_x, v_xx) = 0`, `v(T, ·) = g`.
//!
//! Each candidate pair `(u, v)` gets its own upwinded first differences and
//! central second differences; the finite sup-inf (or inf-sup) is taken over
//! the resulting numerical Lagrangians. The truncated box uses a reflecting
//! ghost node at every face, which keeps the update monotone.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hamiltonian::Side;
use crate::sde::{ControlSetLabel, ProblemSpec};
use crate::strategies::{FeedbackMap, SpaceAxis};

const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
const CFL_SAMPLE_TIMES: usize = 5;

/// Space axes plus a uniform backward time grid on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    axes: Vec<SpaceAxis>,
    horizon: f64,
    steps: usize,
}

impl SpaceTimeGrid {
    pub fn new(axes: Vec<SpaceAxis>, horizon: f64, steps: usize) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidInput(
                "the solver supports one or two space dimensions".into(),
            ));
        }
        if axes.iter().any(|a| a.count < 2 || !(a.h > 0.0) || !a.lo.is_finite()) {
            return Err(Error::InvalidInput(
                "every axis needs at least two nodes and a positive spacing".into(),
            ));
        }
        if !(horizon > 0.0) || !horizon.is_finite() || steps == 0 {
            return Err(Error::InvalidInput(
                "time grid needs a positive horizon and step count".into(),
            ));
        }
        Ok(Self { axes, horizon, steps })
    }

    /// Axis on `[lo, hi]` with spacing as close to `h` as divides the interval.
    pub fn axis(lo: f64, hi: f64, h: f64) -> Result<SpaceAxis> {
        if !(hi > lo) || !(h > 0.0) {
            return Err(Error::InvalidInput("axis needs lo < hi and h > 0".into()));
        }
        let cells = libm::round((hi - lo) / h).max(1.0) as usize;
        Ok(SpaceAxis {
            lo,
            h: (hi - lo) / cells as f64,
            count: cells + 1,
        })
    }

    /// The grid with the fewest time steps that satisfies the CFL bound.
    pub fn cfl_tight(spec: &ProblemSpec, axes: Vec<SpaceAxis>) -> Result<Self> {
        let bound = cfl_max_dt(spec, &axes)?;
        let steps = if bound.is_finite() {
            libm::ceil(spec.horizon / bound - 1e-9).max(1.0) as usize
        } else {
            1
        };
        Self::new(axes, spec.horizon, steps)
    }

    pub fn axes(&self) -> &[SpaceAxis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, layer: usize) -> f64 {
        if layer == self.steps {
            self.horizon
        } else {
            self.dt() * layer as f64
        }
    }

    pub fn nodes(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Row-major multi-index of a flat node.
    pub fn coords(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for a in (0..self.axes.len()).rev() {
            let axis = &self.axes[a];
            out[a] = axis.node(rest % axis.count);
            rest /= axis.count;
        }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.axes.len()];
        for a in (0..self.axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.axes[a + 1].count;
        }
        strides
    }
}

/// Largest stable time step for the explicit scheme, `+∞` without dynamics.
pub fn cfl_max_dt(spec: &ProblemSpec, axes: &[SpaceAxis]) -> Result<f64> {
    if axes.len() != spec.dim {
        return Err(Error::InvalidInput("grid dimension does not match the problem".into()));
    }
    let grid = SpaceTimeGrid::new(axes.to_vec(), spec.horizon, 1)?;
    let mut rates = RateScratch::new(spec);
    let mut x = vec![0.0; spec.dim];
    let mut worst = 0.0f64;
    for k in 0..CFL_SAMPLE_TIMES {
        let t = spec.horizon * k as f64 / (CFL_SAMPLE_TIMES - 1) as f64;
        for node in 0..grid.nodes() {
            grid.coords(node, &mut x);
            for u in 0..spec.u.len() {
                for v in 0..spec.v.len() {
                    worst = worst.max(rates.rate(spec, axes, t, &x, u, v)?);
                }
            }
        }
    }
    Ok(if worst > 0.0 { 1.0 / worst } else { f64::INFINITY })
}

struct RateScratch {
    b: Vec<f64>,
    sigma: Vec<f64>,
    diag: Vec<f64>,
}

impl RateScratch {
    fn new(spec: &ProblemSpec) -> Self {
        Self {
            b: vec![0.0; spec.dim],
            sigma: vec![0.0; spec.dim * spec.dim_w],
            diag: vec![0.0; spec.dim],
        }
    }

    /// Fills `b` and the diagonal of `σσᵀ`, rejecting cross-diffusion.
    fn load(&mut self, spec: &ProblemSpec, t: f64, x: &[f64], u: usize, v: usize) -> Result<()> {
        spec.drift_into(t, x, u, v, &mut self.b)?;
        spec.diffusion_into(t, x, u, v, &mut self.sigma)?;
        let (d, dw) = (spec.dim, spec.dim_w);
        for i in 0..d {
            let row_i = &self.sigma[i * dw..(i + 1) * dw];
            self.diag[i] = row_i.iter().map(|s| s * s).sum();
            for j in i + 1..d {
                let row_j = &self.sigma[j * dw..(j + 1) * dw];
                let a_ij: f64 = row_i.iter().zip(row_j).map(|(a, b)| a * b).sum();
                if libm::fabs(a_ij) > OFF_DIAGONAL_TOLERANCE {
                    return Err(Error::Configuration(alloc::format!(
                        "cross-diffusion term {a_ij} at x = {x:?}; only diagonal σσᵀ is supported"
                    )));
                }
            }
        }
        Ok(())
    }

    fn rate(&mut self, spec: &ProblemSpec, axes: &[SpaceAxis], t: f64, x: &[f64], u: usize, v: usize) -> Result<f64> {
        self.load(spec, t, x, u, v)?;
        Ok(axes
            .iter()
            .enumerate()
            .map(|(a, axis)| libm::fabs(self.b[a]) / axis.h + self.diag[a] / (axis.h * axis.h))
            .sum())
    }
}

/// Finite differences at one node along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Differences {
    pub forward: f64,
    pub backward: f64,
    pub second: f64,
}

impl Differences {
    /// Upwinded `b·p + ½ a M` for one axis.
    pub fn lagrangian(&self, b: f64, a: f64) -> f64 {
        let p = if b > 0.0 { self.forward } else { self.backward };
        b * p + 0.5 * a * self.second
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    /// Keep the per-node differences of every step for certificate replay.
    pub record_differences: bool,
}

/// A solved lower or upper field with its feedback maps.
#[derive(Debug, Clone)]
pub struct ValueField {
    side: Side,
    grid: SpaceTimeGrid,
    values: Vec<f64>,
    feedback_u: Arc<FeedbackMap>,
    feedback_v: Arc<FeedbackMap>,
    max_update: Vec<f64>,
    differences: Option<Vec<Differences>>,
}

impl ValueField {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn value(&self, layer: usize, node: usize) -> f64 {
        self.values[layer * self.grid.nodes() + node]
    }

    pub fn layer(&self, layer: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.values[layer * n..(layer + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feedback_u(&self) -> &Arc<FeedbackMap> {
        &self.feedback_u
    }

    pub fn feedback_v(&self) -> &Arc<FeedbackMap> {
        &self.feedback_v
    }

    /// Largest `|v(t_i) − v(t_{i+1})|` per step, indexed by the earlier layer.
    pub fn max_update(&self) -> &[f64] {
        &self.max_update
    }

    /// Differences of step `layer` at `node` along `axis`, if recorded.
    pub fn differences(&self, layer: usize, node: usize, axis: usize) -> Option<Differences> {
        let d = self.grid.dim();
        self.differences
            .as_ref()
            .map(|all| all[(layer * self.grid.nodes() + node) * d + axis])
    }

    /// Multilinear interpolation in `(t, x)`; arguments are clamped to the grid.
    pub fn value_at(&self, t: f64, x: &[f64]) -> f64 {
        let dt = self.grid.dt();
        let steps = self.grid.steps;
        let r = (t / dt).clamp(0.0, steps as f64);
        let i0 = (libm::floor(r) as usize).min(steps.saturating_sub(1));
        let wt = (r - i0 as f64).clamp(0.0, 1.0);
        let a = self.space_interp(i0, x);
        if wt == 0.0 {
            return a;
        }
        let b = self.space_interp(i0 + 1, x);
        (1.0 - wt) * a + wt * b
    }

    fn space_interp(&self, layer: usize, x: &[f64]) -> f64 {
        let axes = self.grid.axes();
        let strides = self.grid.strides();
        let mut base = [0usize; 2];
        let mut w = [0.0f64; 2];
        for (a, axis) in axes.iter().enumerate() {
            let r = ((x[a] - axis.lo) / axis.h).clamp(0.0, (axis.count - 1) as f64);
            let j = (libm::floor(r) as usize).min(axis.count - 2);
            base[a] = j;
            w[a] = (r - j as f64).clamp(0.0, 1.0);
        }
        let values = self.layer(layer);
        let d = axes.len();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut node = 0;
            for a in 0..d {
                let up = (corner >> a) & 1;
                weight *= if up == 1 { w[a] } else { 1.0 - w[a] };
                node += (base[a] + up) * strides[a];
            }
            if weight != 0.0 {
                acc += weight * values[node];
            }
        }
        acc
    }
}

pub fn solve_isaacs(spec: &ProblemSpec, grid: &SpaceTimeGrid, side: Side) -> Result<ValueField> {
    solve_isaacs_with(spec, grid, side, SolveOptions::default())
}

pub fn solve_isaacs_with(
    spec: &ProblemSpec,
    grid: &SpaceTimeGrid,
    side: Side,
    options: SolveOptions,
) -> Result<ValueField> {
    if grid.dim() != spec.dim {
        return Err(Error::InvalidInput("grid dimension does not match the problem".into()));
    }
    if libm::fabs(grid.horizon - spec.horizon) > 1e-12 {
        return Err(Error::InvalidInput("grid horizon does not match the problem".into()));
    }
    let dt = grid.dt();
    let dt_max = cfl_max_dt(spec, grid.axes())?;
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, dt_max });
    }

    let d = grid.dim();
    let n = grid.nodes();
    let steps = grid.steps;
    let strides = grid.strides();
    let axes = grid.axes().to_vec();
    let (nu, nv) = (spec.u.len(), spec.v.len());

    let mut values = vec![0.0; (steps + 1) * n];
    let mut x = vec![0.0; d];
    for node in 0..n {
        grid.coords(node, &mut x);
        values[steps * n + node] = spec.payoff(&x)?;
    }

    let mut table_u = vec![0u32; steps * n];
    let mut table_v = vec![0u32; steps * n];
    let mut max_update = vec![0.0; steps];
    let mut recorded = if options.record_differences {
        Some(vec![Differences::default(); steps * n * d])
    } else {
        None
    };

    let mut scratch = RateScratch::new(spec);
    let mut diffs = vec![Differences::default(); d];
    let mut lag = vec![0.0; nu * nv];
    let mut responses = vec![0usize; nu.max(nv)];

    for layer in (0..steps).rev() {
        let t = grid.time(layer);
        let (head, tail) = values.split_at_mut((layer + 1) * n);
        let next = &tail[..n];
        let current = &mut head[layer * n..];
        let mut biggest = 0.0f64;
        for node in 0..n {
            grid.coords(node, &mut x);
            let centre = next[node];
            let mut rest = node;
            for a in (0..d).rev() {
                let count = axes[a].count;
                let idx = rest % count;
                rest /= count;
                let lo = if idx == 0 { centre } else { next[node - strides[a]] };
                let hi = if idx + 1 == count {
                    centre
                } else {
                    next[node + strides[a]]
                };
                let h = axes[a].h;
                diffs[a] = Differences {
                    forward: (hi - centre) / h,
                    backward: (centre - lo) / h,
                    second: (hi - 2.0 * centre + lo) / (h * h),
                };
            }
            if let Some(rec) = recorded.as_mut() {
                rec[(layer * n + node) * d..(layer * n + node + 1) * d].copy_from_slice(&diffs);
            }

            for u in 0..nu {
                for v in 0..nv {
                    scratch.load(spec, t, &x, u, v)?;
                    let mut rate = 0.0;
                    let mut l = 0.0;
                    for a in 0..d {
                        let h = axes[a].h;
                        rate += libm::fabs(scratch.b[a]) / h + scratch.diag[a] / (h * h);
                        l += diffs[a].lagrangian(scratch.b[a], scratch.diag[a]);
                    }
                    if dt * rate > 1.0 + 1e-12 {
                        return Err(Error::Cfl { dt, dt_max: 1.0 / rate });
                    }
                    lag[u * nv + v] = l;
                }
            }

            let (h_value, u_idx, v_idx) = match side {
                Side::Lower => {
                    let (value, u_star, resp) = crate::hamiltonian::sup_inf(&lag, nu, nv);
                    responses[..nu].copy_from_slice(&resp);
                    (value, u_star, responses[u_star])
                }
                Side::Upper => {
                    let (value, v_star, resp) = crate::hamiltonian::inf_sup(&lag, nu, nv);
                    responses[..nv].copy_from_slice(&resp);
                    (value, responses[v_star], v_star)
                }
            };
            let updated = centre + dt * h_value;
            if !updated.is_finite() {
                return Err(Error::PdeBlowUp { layer, node });
            }
            biggest = biggest.max(libm::fabs(updated - centre));
            current[node] = updated;
            table_u[layer * n + node] = u_idx as u32;
            table_v[layer * n + node] = v_idx as u32;
        }
        max_update[layer] = biggest;
    }

    let feedback_u = FeedbackMap::new(ControlSetLabel::U, 0.0, dt, axes.clone(), table_u)?;
    let feedback_v = FeedbackMap::new(ControlSetLabel::V, 0.0, dt, axes, table_v)?;
    Ok(ValueField {
        side,
        grid: grid.clone(),
        values,
        feedback_u: Arc::new(feedback_u),
        feedback_v: Arc::new(feedback_v),
        max_update,
        differences: recorded,
    })
}

/// The feedback maps for `U` and `V` recorded during the march.
pub fn extract_feedback(field: &ValueField) -> (Arc<FeedbackMap>, Arc<FeedbackMap>) {
    (field.feedback_u.clone(), field.feedback_v.clone())
}

/// Error norms over the nodes of a region, across all time layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub sup: f64,
    /// Space-time `L²` norm of the nodewise error.
    pub l2: f64,
    pub rms: f64,
    pub nodes: usize,
    /// `(layer, node)` where the sup is attained.
    pub worst: (usize, usize),
}

pub fn compare_to_reference(
    field: &ValueField,
    reference: &dyn Fn(f64, &[f64]) -> f64,
    region: &dyn Fn(&[f64]) -> bool,
) -> ErrorReport {
    let grid = &field.grid;
    let cell: f64 = grid.axes().iter().map(|a| a.h).product();
    let mut x = vec![0.0; grid.dim()];
    let mut sup = 0.0f64;
    let mut worst = (0, 0);
    let mut squares = Vec::new();
    for layer in 0..=grid.steps {
        let t = grid.time(layer);
        for node in 0..grid.nodes() {
            grid.coords(node, &mut x);
            if !region(&x) {
                continue;
            }
            let e = libm::fabs(field.value(layer, node) - reference(t, &x));
            if e > sup || squares.is_empty() {
                sup = e;
                worst = (layer, node);
            }
            squares.push(e * e);
        }
    }
    let total = crate::stats::pairwise_sum(&squares);
    let count = squares.len();
    ErrorReport {
        sup,
        l2: libm::sqrt(total * cell * grid.dt()),
        rms: if count > 0 {
            libm::sqrt(total / count as f64)
        } else {
            0.0
        },
        nodes: count,
        worst,
    }
}
